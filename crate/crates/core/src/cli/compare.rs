//! Pointwise comparison of two CSV traces.

use crate::error::{Error, Result};
use serde::Serialize;
use std::io::BufRead;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Max,
    Rms,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn num(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }
}

/// A CSV trace: `# key=value` header comments, a header row whose first
/// column is the numeric abscissa, then rows. Non-numeric cells (labels,
/// flags) must match exactly between traces.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Trace {
    pub fn parse<R: BufRead>(r: R) -> Result<Self> {
        let mut meta = Vec::new();
        let mut body = String::new();
        for line in r.lines() {
            let line = line?;
            if let Some(c) = line.strip_prefix('#') {
                if let Some((k, v)) = c.trim().split_once('=') {
                    meta.push((k.trim().to_string(), v.trim().to_string()));
                }
            } else {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let mut rd = csv::Reader::from_reader(body.as_bytes());
        let columns: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if columns.is_empty() {
            return Err(Error::Compare("trace has no columns".into()));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let row: Vec<Cell> = rec
                .iter()
                .map(|v| match v.trim().parse::<f64>() {
                    Ok(x) if !v.trim().starts_with('+') => Cell::Num(x),
                    _ => Cell::Text(v.trim().to_string()),
                })
                .collect();
            if row[0].num().is_none() {
                return Err(Error::Compare(format!("non-numeric abscissa {:?}", row[0])));
            }
            rows.push(row);
        }
        Ok(Self { meta, columns, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(std::io::BufReader::new(f))
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn cells(&self, j: usize) -> Vec<&Cell> {
        self.rows.iter().map(|r| &r[j]).collect()
    }

    /// Column `j` as numbers, or `None` if any cell is text.
    fn column(&self, j: usize) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r[j].num()).collect()
    }

    /// Column `j` linearly interpolated onto `grid`; `None` outside range.
    fn interpolated(&self, j: usize, grid: &[f64]) -> Option<Vec<f64>> {
        let x = self.column(0)?;
        let y = self.column(j)?;
        grid.iter()
            .map(|&t| {
                let k = x.partition_point(|&v| v < t);
                if k < x.len() && (x[k] - t).abs() <= 1e-12 * t.abs().max(1.0) {
                    return Some(y[k]);
                }
                if k == 0 || k == x.len() {
                    return None;
                }
                let s = (t - x[k - 1]) / (x[k] - x[k - 1]);
                Some(y[k - 1] + s * (y[k] - y[k - 1]))
            })
            .collect()
    }
}

/// `(max |a − b|, rms(a − b))`.
pub fn deviation(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len().min(b.len()).max(1) as f64;
    let mut max: f64 = 0.0;
    let mut sq = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = (x - y).abs();
        max = max.max(d);
        sq += d * d;
    }
    (max, (sq / n).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnDeviation {
    pub column: String,
    pub max: f64,
    pub rms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    pub metric: Metric,
    pub tolerance: f64,
    pub columns: Vec<ColumnDeviation>,
    pub worst: f64,
    pub pass: bool,
    pub forced: bool,
}

#[derive(Clone, Debug, Default)]
pub struct CompareOptions {
    pub metric: Metric,
    pub tolerance: f64,
    /// Compare despite differing `physics_hash` headers.
    pub force: bool,
    pub interpolate: bool,
    /// Restrict to these columns; all shared value columns otherwise.
    pub columns: Vec<String>,
}

pub fn compare(a: &Trace, b: &Trace, opts: &CompareOptions) -> Result<CompareReport> {
    if !(opts.tolerance >= 0.0) {
        return Err(Error::Compare("tolerance must be non-negative".into()));
    }
    let (ha, hb) = (a.meta("physics_hash"), b.meta("physics_hash"));
    let mismatch = matches!((ha, hb), (Some(x), Some(y)) if x != y);
    if mismatch && !opts.force {
        return Err(Error::Compare(format!(
            "physics_hash differs ({} vs {}); use --force to compare anyway",
            ha.unwrap_or_default(),
            hb.unwrap_or_default()
        )));
    }
    if a.columns != b.columns {
        return Err(Error::Compare(format!("columns differ: {:?} vs {:?}", a.columns, b.columns)));
    }
    let grid = a.column(0).expect("numeric abscissa");
    let same_grid = grid.len() == b.rows.len()
        && grid
            .iter()
            .zip(b.column(0).expect("numeric abscissa"))
            .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0));
    if !same_grid && !opts.interpolate {
        return Err(Error::Compare("time grids differ; pass --interpolate to resample".into()));
    }
    let wanted: Vec<usize> = if opts.columns.is_empty() {
        (1..a.columns.len()).collect()
    } else {
        opts.columns
            .iter()
            .map(|c| {
                a.columns
                    .iter()
                    .skip(1)
                    .position(|x| x == c)
                    .map(|p| p + 1)
                    .ok_or_else(|| Error::Compare(format!("no column {c:?}")))
            })
            .collect::<Result<_>>()?
    };
    let mut columns = Vec::new();
    for j in wanted {
        let (max, rms) = match (a.column(j), same_grid) {
            (Some(ya), true) => match b.column(j) {
                Some(yb) => deviation(&ya, &yb),
                None => (f64::INFINITY, f64::INFINITY),
            },
            (Some(ya), false) => {
                let yb = b
                    .interpolated(j, &grid)
                    .ok_or_else(|| Error::Compare("grid of the second trace does not cover the first".into()))?;
                deviation(&ya, &yb)
            }
            (None, true) => {
                let equal = a.cells(j) == b.cells(j);
                if equal {
                    (0.0, 0.0)
                } else {
                    (f64::INFINITY, f64::INFINITY)
                }
            }
            (None, false) => return Err(Error::Compare(format!("cannot interpolate text column {:?}", a.columns[j]))),
        };
        columns.push(ColumnDeviation {
            column: a.columns[j].clone(),
            max,
            rms,
        });
    }
    let worst = columns
        .iter()
        .map(|c| match opts.metric {
            Metric::Max => c.max,
            Metric::Rms => c.rms,
        })
        .fold(0.0, f64::max);
    Ok(CompareReport {
        metric: opts.metric,
        tolerance: opts.tolerance,
        pass: worst <= opts.tolerance,
        worst,
        columns,
        forced: mismatch,
    })
}
