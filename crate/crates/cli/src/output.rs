//! Trace, summary and metrics file formats.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use stackseek_core::scenarios::RegimeRecord;
use stackseek_core::zo::InnerSummary;
use stackseek_core::{DVector, TraceRecord};

pub const SUMMARY_HEADER: &str = "k,j0,best_j0,beta,eta,delta,g_norm,residual,residual_hat";

/// JSON formatter that writes every float with 17 significant digits.
struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{value:.8e}")
    }
}

pub fn to_json_line<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerLine {
    pub residual: f64,
    pub tol: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&InnerSummary> for InnerLine {
    fn from(s: &InnerSummary) -> Self {
        Self {
            residual: s.residual,
            tol: s.tol,
            iterations: s.iterations,
            converged: s.converged,
        }
    }
}

/// One leader iteration of the seeking loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeekLine {
    pub k: usize,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub x: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub eta: f64,
    pub delta: f64,
    pub beta: f64,
    pub j0: f64,
    pub j0_hat: f64,
    pub g_hat: Vec<f64>,
    pub inner: InnerLine,
    pub inner_hat: InnerLine,
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

impl From<&TraceRecord> for SeekLine {
    fn from(r: &TraceRecord) -> Self {
        Self {
            k: r.k,
            y: vec_of(&r.y),
            v: vec_of(&r.v),
            y_hat: vec_of(&r.y_hat),
            x: vec_of(&r.x),
            x_hat: vec_of(&r.x_hat),
            eta: r.eta,
            delta: r.delta,
            beta: r.beta,
            j0: r.j0,
            j0_hat: r.j0_hat,
            g_hat: vec_of(&r.g_hat),
            inner: (&r.inner).into(),
            inner_hat: (&r.inner_hat).into(),
        }
    }
}

/// One step of an illustrative regime. `beta` is always 0: the follower
/// response is taken from the regime, not from a regularized solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeLine {
    pub k: usize,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub eta: f64,
    pub beta: f64,
    pub j0: f64,
    pub grad: Vec<f64>,
}

impl RegimeLine {
    pub fn new(r: &RegimeRecord, eta: f64) -> Self {
        Self {
            k: r.k,
            y: vec![r.y],
            x: r.x.to_vec(),
            eta,
            beta: 0.0,
            j0: r.j0,
            grad: vec![r.grad],
        }
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, lines: &[T]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for line in lines {
        let s = to_json_line(line).map_err(io::Error::other)?;
        w.write_all(s.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> io::Result<Vec<T>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(io::Error::other))
        .collect()
}

/// One row of `summary.csv`. Fields that do not apply to a run are left empty.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub k: usize,
    pub j0: f64,
    pub best_j0: f64,
    pub beta: f64,
    pub eta: f64,
    pub delta: Option<f64>,
    pub g_norm: f64,
    pub residual: Option<f64>,
    pub residual_hat: Option<f64>,
    pub y: Vec<f64>,
}

impl SummaryRow {
    pub fn from_seek(lines: &[SeekLine]) -> Vec<Self> {
        let mut best = f64::INFINITY;
        lines
            .iter()
            .map(|l| {
                best = best.min(l.j0);
                Self {
                    k: l.k,
                    j0: l.j0,
                    best_j0: best,
                    beta: l.beta,
                    eta: l.eta,
                    delta: Some(l.delta),
                    g_norm: l.g_hat.iter().map(|g| g * g).sum::<f64>().sqrt(),
                    residual: Some(l.inner.residual),
                    residual_hat: Some(l.inner_hat.residual),
                    y: l.y.clone(),
                }
            })
            .collect()
    }

    pub fn from_regime(lines: &[RegimeLine]) -> Vec<Self> {
        let mut best = f64::INFINITY;
        lines
            .iter()
            .map(|l| {
                best = best.min(l.j0);
                Self {
                    k: l.k,
                    j0: l.j0,
                    best_j0: best,
                    beta: l.beta,
                    eta: l.eta,
                    delta: None,
                    g_norm: l.grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
                    residual: None,
                    residual_hat: None,
                    y: l.y.clone(),
                }
            })
            .collect()
    }

    /// Per-iteration mean over replicates, truncated to the shortest run.
    pub fn aggregate(runs: &[Vec<SummaryRow>]) -> Vec<SummaryRow> {
        let Some(len) = runs.iter().map(Vec::len).min() else {
            return Vec::new();
        };
        if runs.len() == 1 {
            return runs[0].clone();
        }
        let n = runs.len() as f64;
        let mean = |f: &dyn Fn(&SummaryRow) -> f64, k: usize| runs.iter().map(|r| f(&r[k])).sum::<f64>() / n;
        let mean_opt = |f: &dyn Fn(&SummaryRow) -> Option<f64>, k: usize| {
            runs.iter().map(|r| f(&r[k])).sum::<Option<f64>>().map(|s| s / n)
        };
        (0..len)
            .map(|k| SummaryRow {
                k: runs[0][k].k,
                j0: mean(&|r| r.j0, k),
                best_j0: mean(&|r| r.best_j0, k),
                beta: mean(&|r| r.beta, k),
                eta: mean(&|r| r.eta, k),
                delta: mean_opt(&|r| r.delta, k),
                g_norm: mean(&|r| r.g_norm, k),
                residual: mean_opt(&|r| r.residual, k),
                residual_hat: mean_opt(&|r| r.residual_hat, k),
                y: (0..runs[0][k].y.len())
                    .map(|i| runs.iter().map(|r| r[k].y[i]).sum::<f64>() / n)
                    .collect(),
            })
            .collect()
    }
}

/// Shortest round-trip form, switching to exponent notation for very small or
/// very large magnitudes.
fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Writes the summary with columns `SUMMARY_HEADER` followed by `y_1 … y_m`.
pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> io::Result<()> {
    let m = rows.first().map_or(0, |r| r.y.len());
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "{SUMMARY_HEADER}")?;
    for i in 1..=m {
        write!(w, ",y_{i}")?;
    }
    writeln!(w)?;
    for r in rows {
        write!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.k,
            num(r.j0),
            num(r.best_j0),
            num(r.beta),
            num(r.eta),
            cell(r.delta),
            num(r.g_norm),
            cell(r.residual),
            cell(r.residual_hat)
        )?;
        for y in &r.y {
            write!(w, ",{}", num(*y))?;
        }
        writeln!(w)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let line = to_json_line(&vec![0.1, -2.5e-300, 1.0 / 3.0]).unwrap();
        assert_eq!(
            line,
            "[1.0000000000000001e-1,-2.5000000000000000e-300,3.3333333333333331e-1]"
        );
        let back: Vec<f64> = serde_json::from_str(&line).unwrap();
        assert_eq!(back, vec![0.1, -2.5e-300, 1.0 / 3.0]);
    }

    #[test]
    fn non_finite_becomes_null() {
        assert_eq!(to_json_line(&vec![f64::NAN]).unwrap(), "[null]");
    }

    fn row(k: usize, j0: f64, y: f64) -> SummaryRow {
        SummaryRow {
            k,
            j0,
            best_j0: j0,
            beta: 1.0,
            eta: 0.5,
            delta: Some(0.1),
            g_norm: 2.0,
            residual: None,
            residual_hat: Some(1e-9),
            y: vec![y],
        }
    }

    #[test]
    fn aggregate_averages_and_truncates() {
        let a = vec![row(0, 1.0, 2.0), row(1, 3.0, 4.0), row(2, 5.0, 6.0)];
        let b = vec![row(0, 3.0, 0.0), row(1, 5.0, 0.0)];
        let agg = SummaryRow::aggregate(&[a, b]);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[1].j0, 4.0);
        assert_eq!(agg[0].y, vec![1.0]);
        assert_eq!(agg[0].residual, None);
        assert_eq!(agg[0].residual_hat, Some(1e-9));
    }

    #[test]
    fn summary_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_summary(&p, &[row(0, 1.5, 0.25)]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(
            text,
            format!("{SUMMARY_HEADER},y_1\n0,1.5,1.5,1,0.5,0.1,2,,1e-9,0.25\n")
        );
    }
}
