//! Error measures, error reports and the single-frequency Fourier view.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fom::{Component, FieldState};

/// `||reference - approx|| / ||reference||` in the discrete Euclidean norm.
pub fn relative_l2_error(reference: &[f64], approx: &[f64]) -> Result<f64> {
    if reference.len() != approx.len() {
        return Err(Error::Validation(format!(
            "fields differ in length: {} vs {}",
            reference.len(),
            approx.len()
        )));
    }
    let norm = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Validation("relative error of a zero reference field".into()));
    }
    let diff = reference
        .iter()
        .zip(approx)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm)
}

/// `||u - Psi Psi' u|| / ||u||`.
pub fn projection_error(basis: &DMatrix<f64>, field: &[f64]) -> Result<f64> {
    let coeffs = crate::pod::project(basis, field)?;
    let projected = basis * coeffs;
    relative_l2_error(field, projected.as_slice())
}

/// Per-degree-of-freedom coefficient `(2/N) sum_n u(t_n) exp(-i 2 pi f t_n)`
/// of one component over a series spanning exactly one period.
pub fn fourier_extract(series: &[FieldState], component: Component, frequency: f64) -> Result<Vec<Complex64>> {
    let n = series.len();
    if n < 2 || !(frequency > 0.0) {
        return Err(Error::Validation(format!(
            "need at least 2 samples and a positive frequency, got {n} and {frequency}"
        )));
    }
    let dt = series[1].time - series[0].time;
    let period = 1.0 / frequency;
    let tol = 1e-9 * period;
    let uneven = series
        .windows(2)
        .any(|w| ((w[1].time - w[0].time) - dt).abs() > tol);
    if uneven || (n as f64 * dt - period).abs() > tol {
        return Err(Error::Validation(format!(
            "series must be {n} equidistant samples spanning one period {period}"
        )));
    }
    let dofs = series[0].component(component).len();
    if series.iter().any(|s| s.component(component).len() != dofs) {
        return Err(Error::Validation("series states differ in size".into()));
    }
    let scale = 2.0 / n as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); dofs];
    for state in series {
        let w = Complex64::from_polar(scale, -2.0 * std::f64::consts::PI * frequency * state.time);
        for (acc, &u) in out.iter_mut().zip(state.component(component)) {
            *acc += w * u;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub t: f64,
    pub theta: Vec<f64>,
    pub rom_error: f64,
    pub projection_error: f64,
}

/// Wall-clock comparison between a full-order solve and an online query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub full_order_seconds: f64,
    pub online_seconds: f64,
}

impl Timing {
    pub fn speedup(&self) -> f64 {
        self.full_order_seconds / self.online_seconds
    }
}

/// Pointwise errors for every component, one row per `(t, theta)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorReport {
    pub rows: [Vec<ErrorRow>; 3],
    pub timing: Option<Timing>,
}

impl ErrorReport {
    pub fn component(&self, c: Component) -> &[ErrorRow] {
        &self.rows[c as usize]
    }

    /// Compare reduced fields with full-order references at parameter `theta`.
    ///
    /// Components whose reference is identically zero are skipped.
    pub fn compare(
        bases: [&DMatrix<f64>; 3],
        theta: &[f64],
        reference: &[FieldState],
        approx: &[FieldState],
    ) -> Result<Self> {
        if reference.len() != approx.len() {
            return Err(Error::Validation(format!(
                "{} reference states for {} reduced states",
                reference.len(),
                approx.len()
            )));
        }
        let mut report = Self::default();
        for c in Component::ALL {
            for (r, a) in reference.iter().zip(approx) {
                let u = r.component(c);
                if u.iter().all(|v| *v == 0.0) {
                    continue;
                }
                report.rows[c as usize].push(ErrorRow {
                    t: r.time,
                    theta: theta.to_vec(),
                    rom_error: relative_l2_error(u, a.component(c))?,
                    projection_error: projection_error(bases[c as usize], u)?,
                });
            }
        }
        Ok(report)
    }

    pub fn extend(&mut self, other: ErrorReport) {
        for (mine, theirs) in self.rows.iter_mut().zip(other.rows) {
            mine.extend(theirs);
        }
    }

    /// Mean `(rom_error, projection_error)` over the rows of `c` matching `theta`.
    pub fn time_averaged(&self, c: Component, theta: &[f64]) -> Option<(f64, f64)> {
        let rows: Vec<&ErrorRow> = self.rows[c as usize].iter().filter(|r| r.theta == theta).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        Some((
            rows.iter().map(|r| r.rom_error).sum::<f64>() / n,
            rows.iter().map(|r| r.projection_error).sum::<f64>() / n,
        ))
    }

    /// CSV text for one component with header `t,theta_1..,rom_error,projection_error`.
    pub fn to_csv(&self, c: Component) -> String {
        let rows = &self.rows[c as usize];
        let dim = rows.first().map_or(1, |r| r.theta.len());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t".to_string()];
        header.extend((1..=dim).map(|m| format!("theta_{m}")));
        header.extend(["rom_error".into(), "projection_error".into()]);
        // writing into a Vec cannot fail
        w.write_record(&header).unwrap();
        for r in rows {
            let mut record = vec![r.t.to_string()];
            record.extend(r.theta.iter().map(f64::to_string));
            record.extend([format!("{:e}", r.rom_error), format!("{:e}", r.projection_error)]);
            w.write_record(&record).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    /// Write `errors_<component>.csv` per component into `dir`.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for c in Component::ALL {
            let path = dir.join(format!("errors_{}.csv", c.name()));
            fs::write(&path, self.to_csv(c)).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}
