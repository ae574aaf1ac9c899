//! Chart-level mechanical models.
//!
//! A model supplies the metric `G(q)`, a frame `E(q)` whose columns span the
//! constraint distribution, an annihilator `M(q)` whose rows span its
//! annihilator, and optionally a potential `V(q)`. All evaluators are
//! generic over [`Scalar`] so that derivatives come from jets.

mod builtin;

pub use builtin::{AnyModel, Builtin, Disk, Euclidean, Particle, ParticlePotential, MODEL_NAMES};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::Scalar;
use crate::linalg::Matrix;
use crate::sampling::Halton;

/// Tolerance for `M E = 0` in [`validate_model`] and the evaluators.
pub const CONSISTENCY_TOL: f64 = 1e-12;

/// Singular values below this count as a rank drop.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Signature {
    Riemannian,
    PseudoRiemannian,
}

/// A point of `TQ` in natural coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangentState {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl TangentState {
    pub fn new(q: Vec<f64>, v: Vec<f64>) -> Self {
        TangentState { q, v }
    }
}

pub trait Model: Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    /// Rank `k` of the distribution.
    fn rank(&self) -> usize;
    fn signature(&self) -> Signature;

    /// Symmetric `n × n` metric.
    fn metric<S: Scalar>(&self, q: &[S]) -> Matrix<S>;
    /// `n × k`, columns span the distribution.
    fn frame<S: Scalar>(&self, q: &[S]) -> Matrix<S>;
    /// `(n − k) × n`, rows annihilate the distribution.
    fn annihilator<S: Scalar>(&self, q: &[S]) -> Matrix<S>;

    fn has_potential(&self) -> bool {
        false
    }

    fn potential<S: Scalar>(&self, _q: &[S]) -> S {
        S::zero()
    }

    /// Closed-form nonholonomic trajectory through `state` at time `t`.
    fn reference_solution(&self, _state: &TangentState, _t: f64) -> Option<TangentState> {
        None
    }
}

/// Checks that `q` has the model's dimension and finite entries.
pub fn check_point<M: Model>(model: &M, q: &[f64]) -> Result<()> {
    check_vector("q", model.dim(), q)
}

pub fn check_vector(what: &str, n: usize, x: &[f64]) -> Result<()> {
    if x.len() != n {
        return Err(Error::dim(what, n, x.len()));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what}[{i}] is not finite")));
    }
    Ok(())
}

pub fn check_state<M: Model>(model: &M, s: &TangentState) -> Result<()> {
    check_vector("q", model.dim(), &s.q)?;
    check_vector("v", model.dim(), &s.v)
}

pub fn evaluate_metric<M: Model>(model: &M, q: &[f64]) -> Result<Matrix<f64>> {
    check_point(model, q)?;
    Ok(model.metric(q))
}

pub fn evaluate_frame<M: Model>(model: &M, q: &[f64]) -> Result<Matrix<f64>> {
    check_point(model, q)?;
    let e = model.frame(q);
    let rank = e.rank(RANK_TOL);
    if rank != model.rank() {
        return Err(Error::DegenerateDistribution {
            q: q.to_vec(),
            detail: format!("frame has rank {rank}, expected {}", model.rank()),
        });
    }
    Ok(e)
}

pub fn evaluate_annihilator<M: Model>(model: &M, q: &[f64]) -> Result<Matrix<f64>> {
    check_point(model, q)?;
    let m = model.annihilator(q);
    let want = model.dim() - model.rank();
    let rank = m.rank(RANK_TOL);
    if rank != want {
        return Err(Error::DegenerateDistribution {
            q: q.to_vec(),
            detail: format!("annihilator has rank {rank}, expected {want}"),
        });
    }
    Ok(m)
}

pub fn energy<M: Model>(model: &M, s: &TangentState) -> f64 {
    let g = model.metric(&s.q);
    let gv = g.mul_vec(&s.v);
    0.5 * crate::linalg::dot(&s.v, &gv) + model.potential(&s.q)
}

/// `M(q) v`, one entry per annihilator row.
pub fn constraint_residual<M: Model>(model: &M, s: &TangentState) -> Vec<f64> {
    model.annihilator(&s.q).mul_vec(&s.v)
}

/// The velocity `E(q) a`, which lies in the distribution by construction.
pub fn velocity_in_distribution<M: Model>(model: &M, q: &[f64], a: &[f64]) -> Vec<f64> {
    model.frame(q).mul_vec(a)
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub model: String,
    pub samples: usize,
    pub max_consistency: f64,
    pub max_asymmetry: f64,
    /// Smallest `|det(EᵀGE)|` seen over the samples.
    pub min_regularity_det: f64,
    /// Largest constraint residual of the reference solution, if any.
    pub reference_residual: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ValidationOptions {
    pub samples: usize,
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            samples: 100,
            lo: -2.0,
            hi: 2.0,
            seed: 0,
        }
    }
}

/// Checks annihilator consistency, constant rank, metric symmetry and
/// regularity at quasi-random points, plus the reference solution when the
/// model provides one.
pub fn validate_model<M: Model>(model: &M, opts: &ValidationOptions) -> Result<ValidationReport> {
    let n = model.dim();
    let mut pts = Halton::new(2 * n, opts.seed);
    let mut report = ValidationReport {
        model: model.name(),
        samples: opts.samples,
        max_consistency: 0.0,
        max_asymmetry: 0.0,
        min_regularity_det: f64::INFINITY,
        reference_residual: None,
    };
    for _ in 0..opts.samples {
        let x = pts.next_in(opts.lo, opts.hi);
        let (q, a) = x.split_at(n);
        let e = evaluate_frame(model, q)?;
        let m = evaluate_annihilator(model, q)?;
        let g = evaluate_metric(model, q)?;
        let me = m.matmul(&e).max_abs();
        if me > CONSISTENCY_TOL {
            return Err(Error::Inconsistent {
                q: q.to_vec(),
                residual: me,
            });
        }
        report.max_consistency = report.max_consistency.max(me);
        report.max_asymmetry = report.max_asymmetry.max(g.sub(&g.transpose()).max_abs());

        let ege = e.transpose().matmul(&g).matmul(&e);
        if ege.inverse().is_err() {
            return Err(Error::Regularity { q: q.to_vec() });
        }
        let det = ege.to_nalgebra().determinant().abs();
        report.min_regularity_det = report.min_regularity_det.min(det);

        let v = velocity_in_distribution(model, q, &a[..model.rank()]);
        let s0 = TangentState::new(q.to_vec(), v);
        if let Some(s) = model.reference_solution(&s0, 0.5) {
            let r = crate::linalg::max_abs(&constraint_residual(model, &s));
            let prev = report.reference_residual.unwrap_or(0.0);
            report.reference_residual = Some(prev.max(r));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{seed, Jet2};

    struct Broken;

    impl Model for Broken {
        fn name(&self) -> String {
            "broken".into()
        }
        fn dim(&self) -> usize {
            2
        }
        fn rank(&self) -> usize {
            1
        }
        fn signature(&self) -> Signature {
            Signature::Riemannian
        }
        fn metric<S: Scalar>(&self, _q: &[S]) -> Matrix<S> {
            Matrix::identity(2)
        }
        fn frame<S: Scalar>(&self, _q: &[S]) -> Matrix<S> {
            Matrix::from_rows(vec![vec![S::one()], vec![S::zero()]], 1)
        }
        fn annihilator<S: Scalar>(&self, _q: &[S]) -> Matrix<S> {
            Matrix::from_rows(vec![vec![S::one(), S::one()]], 2)
        }
    }

    #[test]
    fn particle_metric_frame_annihilator() {
        let p = Particle;
        let q = [0.3, 2.0, -1.0];
        assert_eq!(evaluate_metric(&p, &q).unwrap(), Matrix::identity(3));
        let e = evaluate_frame(&p, &q).unwrap();
        assert_eq!(e.column(0), vec![1.0, 0.0, 2.0]);
        assert_eq!(e.column(1), vec![0.0, 1.0, 0.0]);
        let m = evaluate_annihilator(&p, &q).unwrap();
        assert_eq!(m.row(0), vec![-2.0, 0.0, 1.0]);
    }

    #[test]
    fn disk_metric_and_annihilator() {
        let d = Disk::new(1.5, 0.7, 0.3);
        let phi: f64 = 0.4;
        let q = [0.0, 0.0, 1.0, phi];
        let g = evaluate_metric(&d, &q).unwrap();
        for (i, want) in [1.0, 1.0, 0.7, 0.3].into_iter().enumerate() {
            assert_eq!(g[(i, i)], want);
        }
        let m = evaluate_annihilator(&d, &q).unwrap();
        assert_eq!(m.row(0), vec![1.0, 0.0, -1.5 * phi.cos(), 0.0]);
        assert_eq!(m.row(1), vec![0.0, 1.0, -1.5 * phi.sin(), 0.0]);
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        assert!(matches!(
            evaluate_metric(&Particle, &[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 3,
                got: 2,
                ..
            })
        ));
        assert!(evaluate_metric(&Particle, &[1.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn builtins_validate() {
        for name in MODEL_NAMES {
            let m = AnyModel::by_name(name, &[]).unwrap();
            let r = validate_model(&m, &ValidationOptions::default()).unwrap();
            assert!(r.max_consistency < CONSISTENCY_TOL, "{name}");
            assert_eq!(r.max_asymmetry, 0.0, "{name}");
            if let Some(res) = r.reference_residual {
                assert!(res < 1e-12, "{name}: {res}");
            }
        }
    }

    #[test]
    fn particle_regularity_matrix() {
        let y = 1.7;
        let q = [0.0, y, 0.0];
        let e = Particle.frame(&q);
        let ege = e.transpose().matmul(&Particle.metric(&q)).matmul(&e);
        assert_eq!(ege.to_rows(), vec![vec![1.0 + y * y, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn broken_model_fails_consistency() {
        let err = validate_model(&Broken, &ValidationOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Inconsistent { .. }));
    }

    #[test]
    fn energy_and_residual() {
        let s = TangentState::new(vec![0.0; 3], vec![1.0, 1.0, 0.0]);
        assert_eq!(energy(&Particle, &s), 1.0);
        assert_eq!(constraint_residual(&Particle, &s), vec![0.0]);

        let d = Disk::default();
        let s = TangentState::new(vec![0.0; 4], vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(energy(&d, &s), 1.0);
        assert_eq!(constraint_residual(&d, &s), vec![0.0, 0.0]);

        let p = ParticlePotential;
        let s = TangentState::new(vec![0.2, 0.1, 1.5], vec![0.0; 3]);
        assert_eq!(energy(&p, &s), 1.5);
    }

    #[test]
    fn jet_and_value_evaluations_agree() {
        let q = [0.4, -1.2, 0.9, 2.1];
        let j = seed::<Jet2>(&q);
        let models = [
            AnyModel::by_name("disk", &[]).unwrap(),
            AnyModel::by_name("euclidean", &[("n".into(), 4.0)]).unwrap(),
        ];
        for m in &models {
            assert_eq!(m.metric(&j).values(), m.metric(&q));
            assert_eq!(m.frame(&j).values(), m.frame(&q));
            assert_eq!(m.annihilator(&j).values(), m.annihilator(&q));
        }
        let q3 = &q[..3];
        let j3 = seed::<Jet2>(q3);
        let p = ParticlePotential;
        assert_eq!(p.frame(&j3).values(), p.frame(q3));
        assert_eq!(p.potential(&j3).val, p.potential(q3));
    }
}
