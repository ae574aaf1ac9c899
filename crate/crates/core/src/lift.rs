//! Complete lift of a model to its tangent bundle.
//!
//! Lifted coordinates are `(q, r)` with `r` the fiber coordinates. Every
//! lifted evaluator runs the base evaluator once on `Dual` numbers at
//! `q + ε r`: the real part is the base quantity and the `ε` part is its
//! derivative `r^j ∂_j` along the fiber, which is all a complete lift needs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::{Dual, Scalar, MAX_VARS};
use crate::linalg::Matrix;
use crate::model::{validate_model, Model, Signature, TangentState, ValidationOptions};

/// The complete-lift system `(g^c, D^c, V^c)` of a base model.
#[derive(Clone, Debug, PartialEq)]
pub struct Lifted<M> {
    base: M,
}

impl<M: Model> Lifted<M> {
    pub fn base(&self) -> &M {
        &self.base
    }

    fn dual_point<S: Scalar>(&self, x: &[S]) -> Vec<Dual<S>> {
        let n = self.base.dim();
        (0..n).map(|i| Dual::new(x[i], x[n + i])).collect()
    }
}

/// Builds the lift after checking that the base model is regular.
pub fn lift_model<M: Model>(base: M) -> Result<Lifted<M>> {
    if 2 * base.dim() > MAX_VARS {
        return Err(Error::InvalidInput(format!(
            "cannot lift a {}-dimensional model: lifted dimension exceeds {MAX_VARS}",
            base.dim()
        )));
    }
    validate_model(&base, &ValidationOptions::default())?;
    Ok(Lifted { base })
}

impl<M: Model> Model for Lifted<M> {
    fn name(&self) -> String {
        format!("{}:lift", self.base.name())
    }
    fn dim(&self) -> usize {
        2 * self.base.dim()
    }
    fn rank(&self) -> usize {
        2 * self.base.rank()
    }
    fn signature(&self) -> Signature {
        Signature::PseudoRiemannian
    }

    /// `[[r^k ∂_k G, G], [G, 0]]`.
    fn metric<S: Scalar>(&self, x: &[S]) -> Matrix<S> {
        let n = self.base.dim();
        let g = self.base.metric(&self.dual_point(x));
        Matrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => g[(i, j)].eps,
            (true, false) => g[(i, j - n)].re,
            (false, true) => g[(i - n, j)].re,
            (false, false) => S::zero(),
        })
    }

    /// Columns `e^c_a = (e_a; r·∂e_a)` for every `a`, then `e^v_a = (0; e_a)`.
    fn frame<S: Scalar>(&self, x: &[S]) -> Matrix<S> {
        let (n, k) = (self.base.dim(), self.base.rank());
        let e = self.base.frame(&self.dual_point(x));
        Matrix::from_fn(2 * n, 2 * k, |i, j| {
            let (complete, a) = if j < k { (true, j) } else { (false, j - k) };
            match (complete, i < n) {
                (true, true) => e[(i, a)].re,
                (true, false) => e[(i - n, a)].eps,
                (false, true) => S::zero(),
                (false, false) => e[(i - n, a)].re,
            }
        })
    }

    /// Rows `μ^v = (μ, 0)` for every base row, then `μ^c = (r·∂μ, μ)`.
    fn annihilator<S: Scalar>(&self, x: &[S]) -> Matrix<S> {
        let n = self.base.dim();
        let m = self.base.annihilator(&self.dual_point(x));
        let c = m.rows();
        Matrix::from_fn(2 * c, 2 * n, |b, j| match (b < c, j < n) {
            (true, true) => m[(b, j)].re,
            (true, false) => S::zero(),
            (false, true) => m[(b - c, j)].eps,
            (false, false) => m[(b - c, j - n)].re,
        })
    }

    fn has_potential(&self) -> bool {
        self.base.has_potential()
    }

    /// `V^c = r^i ∂_i V`.
    fn potential<S: Scalar>(&self, x: &[S]) -> S {
        self.base.potential(&self.dual_point(x)).eps
    }
}

/// Lifted state with position `(q, W)` and velocity `(v, Ẇ)`.
pub fn lift_state(base: &TangentState, w: &[f64], wd: &[f64]) -> TangentState {
    TangentState::new(
        base.q.iter().chain(w).copied().collect(),
        base.v.iter().chain(wd).copied().collect(),
    )
}

/// The canonical involution in local form: swaps the two middle blocks of
/// `(q, q̇, r, ṙ)`.
pub fn kappa(w: &[f64]) -> Result<Vec<f64>> {
    if !w.len().is_multiple_of(4) {
        return Err(Error::InvalidInput(format!(
            "kappa expects a vector of length 4n, got {}",
            w.len()
        )));
    }
    let n = w.len() / 4;
    let mut out = w.to_vec();
    out[n..2 * n].copy_from_slice(&w[2 * n..3 * n]);
    out[2 * n..3 * n].copy_from_slice(&w[n..2 * n]);
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct SignatureReport {
    pub samples: usize,
    pub expected: (usize, usize),
    /// `(positive, negative)` eigenvalue counts per sample.
    pub counts: Vec<(usize, usize)>,
    pub min_abs_eigenvalue: f64,
    pub pass: bool,
}

/// Counts eigenvalue signs of the lifted metric at each sample point.
pub fn lifted_signature_check<M: Model>(
    lifted: &Lifted<M>,
    samples: &[Vec<f64>],
) -> SignatureReport {
    let n = lifted.base.dim();
    let mut counts = Vec::with_capacity(samples.len());
    let mut min_abs = f64::INFINITY;
    for x in samples {
        let g = lifted.metric(x).to_nalgebra();
        let eig = g.symmetric_eigen().eigenvalues;
        let pos = eig.iter().filter(|&&e| e > 0.0).count();
        let neg = eig.iter().filter(|&&e| e < 0.0).count();
        min_abs = eig.iter().fold(min_abs, |m, e| m.min(e.abs()));
        counts.push((pos, neg));
    }
    let pass = counts.iter().all(|&c| c == (n, n));
    SignatureReport {
        samples: samples.len(),
        expected: (n, n),
        counts,
        min_abs_eigenvalue: min_abs,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Disk, Euclidean, Particle};
    use crate::sampling::box_samples;

    #[test]
    fn particle_lift_metric_is_block_antidiagonal() {
        let l = lift_model(Particle).unwrap();
        let g = l.metric(&[0.3, -1.0, 2.0, 0.5, 0.7, -0.2]);
        let want = Matrix::from_fn(6, 6, |i, j| {
            if (i + 3 == j) || (j + 3 == i) {
                1.0
            } else {
                0.0
            }
        });
        assert_eq!(g, want);
    }

    #[test]
    fn particle_lift_constraints() {
        // (x, y, z, u, v, w)
        let (y, v) = (1.3, -0.4);
        let l = lift_model(Particle).unwrap();
        let m = l.annihilator(&[0.1, y, 0.2, 0.9, v, 0.5]);
        assert_eq!(m.row(0), vec![-y, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.row(1), vec![-v, 0.0, 0.0, -y, 0.0, 1.0]);
    }

    #[test]
    fn particle_lift_multiplier_matrix() {
        let (y, v) = (0.8, 1.9);
        let l = lift_model(Particle).unwrap();
        let x = [0.0, y, 0.0, 0.0, v, 0.0];
        let m = l.annihilator(&x);
        let ginv = l.metric(&x).inverse().unwrap();
        let c = m.matmul(&ginv).matmul(&m.transpose());
        let want = [[0.0, 1.0 + y * y], [1.0 + y * y, 2.0 * v * y]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((c[(i, j)] - want[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lifted_annihilator_kills_lifted_frame() {
        let l = lift_model(Disk::new(0.8, 1.3, 0.4)).unwrap();
        for x in box_samples(8, 100, -2.0, 2.0, 1) {
            assert!(l.annihilator(&x).matmul(&l.frame(&x)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn kappa_swaps_middle_blocks() {
        assert_eq!(
            kappa(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
            vec![1.0, 3.0, 2.0, 4.0]
        );
        let w: Vec<f64> = (0..12).map(f64::from).collect();
        let k = kappa(&w).unwrap();
        assert_eq!(&k[3..6], &w[6..9]);
        assert_eq!(kappa(&k).unwrap(), w);
        assert!(kappa(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn signatures() {
        let p = lift_model(Particle).unwrap();
        assert!(lifted_signature_check(&p, &box_samples(6, 50, -2.0, 2.0, 0)).pass);
        let d = lift_model(Disk::default()).unwrap();
        let r = lifted_signature_check(&d, &box_samples(8, 50, -2.0, 2.0, 0));
        assert!(r.pass);
        assert_eq!(r.expected, (4, 4));
        let e = lift_model(Euclidean { n: 1 }).unwrap();
        let eig = e
            .metric(&[0.3, 0.1])
            .to_nalgebra()
            .symmetric_eigen()
            .eigenvalues;
        let mut eig: Vec<f64> = eig.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        assert_eq!(eig, vec![-1.0, 1.0]);
    }

    #[test]
    fn lifted_potential_is_directional_derivative() {
        let l = lift_model(crate::model::ParticlePotential).unwrap();
        assert_eq!(l.potential(&[1.0, 2.0, 3.0, 0.4, 0.5, 0.6]), 0.6);
    }
}
