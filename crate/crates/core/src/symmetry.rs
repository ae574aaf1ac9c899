//! Symmetry audit of candidate Jacobi fields.
//!
//! A field `W` that preserves the distribution, and whose Lie derivative of
//! the metric vanishes on frame fields and their brackets, restricts to a
//! Jacobi field along every nonholonomic geodesic. The conditions are
//! checked pointwise at sample points, which approximates the section-level
//! statement.

use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::jacobi::{jacobi_residual, lifted_constraint_residual};
use crate::jet::{seed, Dual, Jet, Jet1, Scalar};
use crate::linalg::{max_abs, Matrix};
use crate::model::{check_point, Model};
use crate::sampling::box_samples;

pub const AUDIT_TOL: f64 = 1e-10;
pub const JACOBI_TOL: f64 = 1e-7;

/// `(L_W g)_ij = W^k ∂_k g_ij + g_kj ∂_i W^k + g_ik ∂_j W^k`.
pub fn lie_derivative_metric<M: Model, F: VectorField>(
    model: &M,
    field: &F,
    q: &[f64],
) -> Result<Matrix<f64>> {
    check_point(model, q)?;
    Ok(lie_metric_at(model, field, &seed::<Jet1>(q)))
}

fn lie_metric_at<M: Model, F: VectorField>(model: &M, field: &F, x: &[Jet1]) -> Matrix<f64> {
    let n = x.len();
    let g = model.metric(x);
    let w = field.eval(x);
    Matrix::from_fn(n, n, |i, j| {
        let mut acc = 0.0;
        for k in 0..n {
            acc += w[k].val * g[(i, j)].partial(k)
                + g[(k, j)].val * w[k].partial(i)
                + g[(i, k)].val * w[k].partial(j);
        }
        acc
    })
}

/// `[X, Y]^i = X^j ∂_j Y^i − Y^j ∂_j X^i` for jet-valued fields.
fn bracket(x: &[Jet1], y: &[Jet1]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                acc += x[j].val * y[i].grad[j] - y[j].val * x[i].grad[j];
            }
            acc
        })
        .collect()
}

/// `[W, e_a]` at `q`.
pub fn lie_bracket<M: Model, F: VectorField>(
    model: &M,
    field: &F,
    a: usize,
    q: &[f64],
) -> Result<Vec<f64>> {
    check_point(model, q)?;
    if a >= model.rank() {
        return Err(Error::InvalidInput(format!(
            "frame index {a} out of range for rank {}",
            model.rank()
        )));
    }
    let x = seed::<Jet1>(q);
    let e = model.frame(&x);
    Ok(bracket(&field.eval(&x), &e.column(a)))
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    pub model: String,
    pub field: String,
    pub samples: usize,
    pub tol: f64,
    /// `max |μ^b([W, e_a])|`.
    pub cond_i: f64,
    /// `max |(L_W g)(e_a, e_b)|`.
    pub cond_ii: f64,
    /// `max |(L_W g)([e_a, e_b], e_c)|`.
    pub cond_iii: f64,
    /// `max |(L_W g)_ij|`.
    pub killing: f64,
    pub pass_i: bool,
    pub pass_ii: bool,
    pub pass_iii: bool,
    pub pass_killing: bool,
    /// Conditions (i)–(iii) all hold.
    pub symmetry: bool,
}

/// Fifty quasi-random points in `[-2, 2]^n`.
pub fn default_samples<M: Model>(model: &M, seed: u64) -> Vec<Vec<f64>> {
    box_samples(model.dim(), 50, -2.0, 2.0, seed)
}

pub fn audit<M: Model, F: VectorField>(
    model: &M,
    field: &F,
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<SymmetryReport> {
    let k = model.rank();
    let (mut c1, mut c2, mut c3, mut kil) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for q in samples {
        check_point(model, q)?;
        let x = seed::<Jet1>(q);
        let w = field.eval(&x);
        let e = model.frame(&x);
        let m = model.annihilator(q);
        let frame: Vec<Vec<Jet1>> = (0..k).map(|a| e.column(a)).collect();
        let ev: Vec<Vec<f64>> = frame
            .iter()
            .map(|c| c.iter().map(|s| s.val).collect())
            .collect();

        for ea in &frame {
            c1 = c1.max(max_abs(&m.mul_vec(&bracket(&w, ea))));
        }
        let l = lie_metric_at(model, field, &x);
        kil = kil.max(l.max_abs());
        let form = |a: &[f64], b: &[f64]| crate::linalg::dot(a, &l.mul_vec(b));
        for a in 0..k {
            for b in 0..k {
                c2 = c2.max(form(&ev[a], &ev[b]).abs());
                let ab = bracket(&frame[a], &frame[b]);
                for ec in &ev {
                    c3 = c3.max(form(&ab, ec).abs());
                }
            }
        }
    }
    let (p1, p2, p3) = (c1 <= tol, c2 <= tol, c3 <= tol);
    Ok(SymmetryReport {
        model: model.name(),
        field: field.name(),
        samples: samples.len(),
        tol,
        cond_i: c1,
        cond_ii: c2,
        cond_iii: c3,
        killing: kil,
        pass_i: p1,
        pass_ii: p2,
        pass_iii: p3,
        pass_killing: kil <= tol,
        symmetry: p1 && p2 && p3,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryJacobiReport {
    pub model: String,
    pub field: String,
    pub tol: f64,
    /// Jacobi residual of `W∘c`, `NaN` at the two samples on either end.
    pub res_jacobi: Vec<f64>,
    /// Lifted-constraint residual with `Ẇ = ∂W·ċ`.
    pub res_lifted: Vec<f64>,
    pub max_res_jacobi: f64,
    pub max_res_lifted: f64,
    pub pass: bool,
}

/// Samples `W∘c` along `base` and checks that it solves the Jacobi equation
/// and keeps `Ẇ` in the lifted distribution.
pub fn verify_symmetry_jacobi<M: Model, F: VectorField>(
    model: &M,
    field: &F,
    base: &Trajectory,
    tol: f64,
) -> Result<SymmetryJacobiReport> {
    let ws: Vec<Vec<f64>> = base.samples.iter().map(|s| field.eval(&s.q)).collect();
    let res_jacobi = jacobi_residual(model, base, &ws)?;
    let res_lifted: Vec<f64> = base
        .samples
        .iter()
        .zip(&ws)
        .map(|(s, w)| {
            let x: Vec<Dual<f64>> =
                s.q.iter()
                    .zip(&s.v)
                    .map(|(&q, &v)| Dual::new(q, v))
                    .collect();
            let wd: Vec<f64> = field.eval(&x).iter().map(|d| d.eps).collect();
            max_abs(&lifted_constraint_residual(model, &s.q, &s.v, w, &wd))
        })
        .collect();
    let max_res_jacobi = res_jacobi
        .iter()
        .filter(|r| r.is_finite())
        .fold(0.0, |m: f64, r| m.max(*r));
    let max_res_lifted = res_lifted.iter().fold(0.0, |m: f64, r| m.max(*r));
    Ok(SymmetryJacobiReport {
        model: model.name(),
        field: field.name(),
        tol,
        pass: max_res_jacobi < tol && max_res_lifted < tol,
        res_jacobi,
        res_lifted,
        max_res_jacobi,
        max_res_lifted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate;
    use crate::field::Field;
    use crate::model::{Disk, Particle, TangentState};

    fn field(name: &str, p: &[(&str, f64)]) -> Field {
        let p: Vec<(String, f64)> = p.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Field::by_name(name, &p).unwrap()
    }

    #[test]
    fn dz_is_killing_for_particle() {
        let f = field("dz", &[]);
        let q = [0.3, -1.1, 0.4];
        assert_eq!(
            lie_derivative_metric(&Particle, &f, &q).unwrap().max_abs(),
            0.0
        );
        assert_eq!(lie_bracket(&Particle, &f, 0, &q).unwrap(), vec![0.0; 3]);
        assert_eq!(lie_bracket(&Particle, &f, 1, &q).unwrap(), vec![0.0; 3]);
        assert!(lie_bracket(&Particle, &f, 2, &q).is_err());
        let r = audit(&Particle, &f, &default_samples(&Particle, 0), AUDIT_TOL).unwrap();
        assert!(r.symmetry && r.pass_killing);
    }

    #[test]
    fn dtheta_commutes_with_disk_frame() {
        let f = field("dtheta", &[]);
        let d = Disk::default();
        for a in 0..2 {
            assert_eq!(
                lie_bracket(&d, &f, a, &[0.1, 0.2, 0.3, 0.9]).unwrap(),
                vec![0.0; 4]
            );
        }
        assert!(
            audit(&d, &f, &default_samples(&d, 0), AUDIT_TOL)
                .unwrap()
                .symmetry
        );
    }

    #[test]
    fn counterexamples() {
        let (u, xd0) = (0.7, 1.6);
        let f2 = field(
            "counterexample2",
            &[("u", u), ("xdot0", xd0), ("x0", 0.2), ("z0", -0.3)],
        );
        let l = lie_derivative_metric(&Particle, &f2, &[1.0, 0.5, 2.0]).unwrap();
        assert!((l[(0, 0)] - 2.0 * u / xd0).abs() < 1e-12);
        let r = audit(&Particle, &f2, &default_samples(&Particle, 0), AUDIT_TOL).unwrap();
        assert!(!r.pass_killing);
        assert!((r.killing - 2.0 * u / xd0).abs() < 1e-12);

        let f1 = field("counterexample1", &[("u", u), ("xdot0", xd0)]);
        let r = audit(&Particle, &f1, &default_samples(&Particle, 0), AUDIT_TOL).unwrap();
        assert!(!r.pass_i && !r.symmetry);

        // both restrict to Jacobi fields along y = y0, ẏ = 0
        let y0 = 0.4;
        let start = TangentState::new(vec![0.2, y0, -0.3], vec![xd0, 0.0, y0 * xd0]);
        let base = integrate(&Particle, &start, 1e-3, 1.0, &Default::default()).unwrap();
        let f1 = field("counterexample1", &[("u", u), ("xdot0", xd0), ("x0", 0.2)]);
        for f in [&f1, &f2] {
            let rep = verify_symmetry_jacobi(&Particle, f, &base, JACOBI_TOL).unwrap();
            assert!(
                rep.pass,
                "{}: {} {}",
                rep.field, rep.max_res_jacobi, rep.max_res_lifted
            );
        }
    }

    #[test]
    fn zero_field_audits_to_zero() {
        let r = audit(
            &Disk::default(),
            &Field::Zero,
            &default_samples(&Disk::default(), 2),
            AUDIT_TOL,
        )
        .unwrap();
        assert_eq!(
            (r.cond_i, r.cond_ii, r.cond_iii, r.killing),
            (0.0, 0.0, 0.0, 0.0)
        );
    }
}
