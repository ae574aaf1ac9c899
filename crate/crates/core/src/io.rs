//! CSV and JSON emission.
//!
//! Floats in CSV are printed with 17 significant digits, which round-trips
//! every `f64` exactly. JSON uses serde_json's shortest round-trip form.

use std::io::{Read, Write};

use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::jacobi::JacobiRun;
use crate::model::{constraint_residual, energy, Model};

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

pub fn trajectory_header(n: usize, constraints: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain(numbered("q", n))
        .chain(numbered("v", n))
        .chain(std::iter::once("energy".to_string()))
        .chain(numbered("res", constraints))
        .collect()
}

pub fn jacobi_header(n: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain(numbered("W", n))
        .chain(numbered("Wd", n))
        .chain(["res_lifted".to_string(), "res_jacobi".to_string()])
        .collect()
}

/// `t,q1..qn,v1..vn,energy,res1..res{n-k}`.
pub fn write_trajectory_csv<M: Model, W: Write>(
    model: &M,
    traj: &Trajectory,
    out: W,
) -> Result<()> {
    let n = model.dim();
    let c = n - model.rank();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(n, c))?;
    for s in &traj.samples {
        let ts = s.tangent();
        let mut row = vec![fmt_float(s.t)];
        row.extend(s.q.iter().chain(&s.v).map(|x| fmt_float(*x)));
        row.push(fmt_float(energy(model, &ts)));
        row.extend(
            constraint_residual(model, &ts)
                .iter()
                .map(|x| fmt_float(*x)),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `t,W1..Wn,Wd1..Wdn,res_lifted,res_jacobi`.
pub fn write_jacobi_csv<W: Write>(run: &JacobiRun, out: W) -> Result<()> {
    let n = run.w0.len();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(jacobi_header(n))?;
    for (i, s) in run.samples.iter().enumerate() {
        let mut row = vec![fmt_float(s.t)];
        row.extend(s.w.iter().chain(&s.wd).map(|x| fmt_float(*x)));
        row.push(fmt_float(run.res_lifted[i]));
        row.push(fmt_float(run.res_jacobi[i]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a numeric CSV with a header row.
pub fn read_csv<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::Io(format!("bad number '{f}': {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate;
    use crate::model::{Particle, TangentState};

    #[test]
    fn headers() {
        assert_eq!(
            trajectory_header(3, 1).join(","),
            "t,q1,q2,q3,v1,v2,v3,energy,res1"
        );
        assert_eq!(
            jacobi_header(2).join(","),
            "t,W1,W2,Wd1,Wd2,res_lifted,res_jacobi"
        );
    }

    #[test]
    fn trajectory_round_trip_is_exact() {
        let s = TangentState::new(vec![0.1, 0.2, 0.3], vec![1.0, -0.7, 0.2]);
        let t = integrate(&Particle, &s, 1e-2, 1.0, &Default::default()).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&Particle, &t, &mut buf).unwrap();
        let (h, rows) = read_csv(&buf[..]).unwrap();
        assert_eq!(h.len(), 9);
        assert_eq!(rows.len(), t.samples.len());
        for (row, s) in rows.iter().zip(&t.samples) {
            assert_eq!(row[0].to_bits(), s.t.to_bits());
            for k in 0..3 {
                assert_eq!(row[1 + k].to_bits(), s.q[k].to_bits());
                assert_eq!(row[4 + k].to_bits(), s.v[k].to_bits());
            }
        }
    }

    #[test]
    fn awkward_floats_round_trip() {
        for x in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
            -0.0,
        ] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert!(fmt_float(f64::NAN).parse::<f64>().unwrap().is_nan());
    }
}
