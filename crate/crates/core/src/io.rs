//! CSV and JSON output. Floats are written like C's `%.17g`, which round-trips
//! every `f64`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ganlab::TimingRow;
use crate::numkit::Matrix;
use crate::optimizers::Trajectory;
use crate::spectra::SweepGrid;

/// `x` formatted as C's `printf("%.17g", x)`.
///
/// ```
/// use centripetal::io::fmt_g17;
/// assert_eq!(fmt_g17(0.1), "0.10000000000000001");
/// assert_eq!(fmt_g17(2.0), "2");
/// assert_eq!(fmt_g17(1e-5), "1.0000000000000001e-05");
/// assert_eq!(fmt_g17(1e21), "1e+21");
/// ```
pub fn fmt_g17(x: f64) -> String {
    const P: i32 = 17;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(BufWriter::new(File::create(path)?)))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InputDomain(format!("csv: {other:?}")),
    }
}

fn finish(mut w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// Columns `step, theta_0.., phi_0.., delta, grad_norm, step_time_s`.
pub fn write_trajectory_csv(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    let (d, p) = traj.points.first().map_or((0, 0), |x| x.dims());
    let mut header = vec!["step".to_string()];
    header.extend((0..d).map(|i| format!("theta_{i}")));
    header.extend((0..p).map(|i| format!("phi_{i}")));
    header.extend(["delta", "grad_norm", "step_time_s"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for (t, x) in traj.points.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(x.theta.iter().chain(&x.phi).map(|v| fmt_g17(*v)));
        row.push(fmt_g17(traj.deltas[t]));
        row.push(fmt_g17(traj.grad_norms[t]));
        row.push(fmt_g17(traj.step_times[t]));
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

/// Columns `alpha, beta, log10_final_dist, rho, diverged`, one row per cell
/// in `alphas`-major order. `rho` is empty when not computed.
pub fn write_sweep_csv(path: impl AsRef<Path>, grid: &SweepGrid) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["alpha", "beta", "log10_final_dist", "rho", "diverged"]).map_err(csv_err)?;
    for c in grid.iter() {
        w.write_record([
            fmt_g17(c.alpha),
            fmt_g17(c.beta),
            fmt_g17(c.log10_final_dist),
            c.rho.map(fmt_g17).unwrap_or_default(),
            c.diverged.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Columns `x, y`.
pub fn write_samples_csv(path: impl AsRef<Path>, samples: &[[f64; 2]]) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["x", "y"]).map_err(csv_err)?;
    for s in samples {
        w.write_record([fmt_g17(s[0]), fmt_g17(s[1])]).map_err(csv_err)?;
    }
    finish(w)
}

/// Columns `label, mean_s, std_s, iterations`.
pub fn write_timing_csv(path: impl AsRef<Path>, rows: &[TimingRow]) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["label", "mean_s", "std_s", "iterations"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.label.clone(), fmt_g17(r.mean_s), fmt_g17(r.std_s), r.iterations.to_string()])
            .map_err(csv_err)?;
    }
    finish(w)
}

/// One matrix row per line, no header.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|v| fmt_g17(*v))).map_err(csv_err)?;
    }
    finish(w)
}

/// Pretty-printed UTF-8 JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
