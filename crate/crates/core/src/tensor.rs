//! Projectors, Christoffel symbols, torsion and curvature of the
//! nonholonomic connection at a chart point.
//!
//! The index convention is `∇_{∂_i} ∂_j = Γ^k_{ij} ∂_k`, so the first lower
//! index is the differentiating direction. Symbols are stored flat with
//! `Γ^k_{ij}` at `(k·n + i)·n + j`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::{seed, Jet, Jet1, Jet2, Scalar};
use crate::linalg::Matrix;
use crate::model::{check_point, check_vector, Model};

/// A rank-(1,2) array `Γ^k_{ij}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Symbols<S> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> Symbols<S> {
    pub fn zeros(n: usize) -> Self {
        Symbols {
            n,
            data: vec![S::zero(); n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> S {
        self.data[(k * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, j: usize, v: S) {
        self.data[(k * self.n + i) * self.n + j] = v;
    }

    /// `Γ^k_{ij} a^i b^j`.
    pub fn contract(&self, a: &[S], b: &[S]) -> Vec<S> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let mut acc = S::zero();
                for i in 0..n {
                    for j in 0..n {
                        acc += self.get(k, i, j) * a[i] * b[j];
                    }
                }
                acc
            })
            .collect()
    }

    /// `Γ^k_{ji}`.
    pub fn swap_lower(&self) -> Self {
        let mut out = Self::zeros(self.n);
        for k in 0..self.n {
            for i in 0..self.n {
                for j in 0..self.n {
                    out.set(k, i, j, self.get(k, j, i));
                }
            }
        }
        out
    }

    pub fn values(&self) -> Symbols<f64> {
        Symbols {
            n: self.n,
            data: self.data.iter().map(|s| s.value()).collect(),
        }
    }

    /// Nested `[k][i][j]` arrays of plain values.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        let n = self.n;
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| (0..n).map(|j| self.get(k, i, j).value()).collect())
                    .collect()
            })
            .collect()
    }
}

impl Symbols<Jet1> {
    /// `∂_l Γ^k_{ij}` for one direction `l`.
    pub fn partial(&self, l: usize) -> Symbols<f64> {
        Symbols {
            n: self.n,
            data: self.data.iter().map(|s| s.grad[l]).collect(),
        }
    }
}

impl Symbols<f64> {
    pub fn max_abs(&self) -> f64 {
        crate::linalg::max_abs(&self.data)
    }
}

impl Serialize for Symbols<f64> {
    fn serialize<Se: serde::Serializer>(&self, s: Se) -> std::result::Result<Se::Ok, Se::Error> {
        self.to_nested().serialize(s)
    }
}

/// `P = E (EᵀGE)⁻¹ EᵀG`, over any scalar.
pub fn projector_generic<M: Model, S: Scalar>(model: &M, x: &[S]) -> Result<Matrix<S>> {
    let g = model.metric(x);
    let e = model.frame(x);
    let et = e.transpose();
    let etg = et.matmul(&g);
    let a = etg.matmul(&e);
    let ainv = a.inverse().map_err(|_| Error::Regularity {
        q: x.iter().map(|s| s.value()).collect(),
    })?;
    Ok(e.matmul(&ainv).matmul(&etg))
}

fn complement<S: Scalar>(p: &Matrix<S>) -> Matrix<S> {
    Matrix::<S>::identity(p.rows()).sub(p)
}

/// Geometry at a point with one derivative order below the jet `J`.
struct Geometry<L> {
    p: Matrix<L>,
    pp: Matrix<L>,
    gamma_g: Symbols<L>,
    gamma_nh: Symbols<L>,
    /// `P · grad_g V`, zero without a potential.
    force: Vec<L>,
}

fn geometry<J: Jet, M: Model>(model: &M, q: &[f64]) -> Result<Geometry<J::Lower>> {
    check_point(model, q)?;
    let n = model.dim();
    let x = seed::<J>(q);

    let p_j = projector_generic(model, &x)?;
    let pp_j = complement(&p_j);
    let g_j = model.metric(&x);

    let g = g_j.truncate();
    let ginv = g.inverse()?;
    let dg: Vec<Matrix<J::Lower>> = (0..n).map(|l| g_j.partial(l)).collect();

    // Koszul: Γ^k_{ij} = ½ g^{km} (∂_i g_{jm} + ∂_j g_{im} − ∂_m g_{ij})
    let mut lowered = Symbols::<J::Lower>::zeros(n);
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                let v = (dg[i][(j, m)] + dg[j][(i, m)] - dg[m][(i, j)]) * 0.5;
                lowered.set(m, i, j, v);
            }
        }
    }
    let mut gamma_g = Symbols::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = J::Lower::zero();
                for m in 0..n {
                    acc += ginv[(k, m)] * lowered.get(m, i, j);
                }
                gamma_g.set(k, i, j, acc);
            }
        }
    }

    let p = p_j.truncate();
    let pp = pp_j.truncate();
    let dpp: Vec<Matrix<J::Lower>> = (0..n).map(|l| pp_j.partial(l)).collect();

    // Γ^{nh,k}_{ij} = P^k_m Γ^m_{ij} + ∂_i P'^k_j + Γ^k_{im} P'^m_j
    let mut gamma_nh = Symbols::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = dpp[i][(k, j)];
                for m in 0..n {
                    acc += p[(k, m)] * gamma_g.get(m, i, j) + gamma_g.get(k, i, m) * pp[(m, j)];
                }
                gamma_nh.set(k, i, j, acc);
            }
        }
    }

    let force = if model.has_potential() {
        let v = model.potential(&x);
        let dv: Vec<J::Lower> = (0..n).map(|i| v.partial(i)).collect();
        p.mul_vec(&ginv.mul_vec(&dv))
    } else {
        vec![J::Lower::zero(); n]
    };

    Ok(Geometry {
        p,
        pp,
        gamma_g,
        gamma_nh,
        force,
    })
}

/// Values needed to evaluate accelerations: `Γ^{nh}` and `F = P grad_g V`.
#[derive(Clone, Debug)]
pub struct Accel {
    pub p: Matrix<f64>,
    pub gamma_nh: Symbols<f64>,
    pub force: Vec<f64>,
}

pub fn accel_data<M: Model>(model: &M, q: &[f64]) -> Result<Accel> {
    let g = geometry::<Jet1, M>(model, q)?;
    Ok(Accel {
        p: g.p,
        gamma_nh: g.gamma_nh,
        force: g.force,
    })
}

/// First-order data along a Jacobi field: `Γ^{nh}`, `F` and their gradients.
#[derive(Clone, Debug)]
pub struct JacobiData {
    pub gamma_nh: Symbols<Jet1>,
    pub force: Vec<Jet1>,
}

pub fn jacobi_data<M: Model>(model: &M, q: &[f64]) -> Result<JacobiData> {
    let g = geometry::<Jet2, M>(model, q)?;
    Ok(JacobiData {
        gamma_nh: g.gamma_nh,
        force: g.force,
    })
}

/// Returns `(P, P′)`.
pub fn orthogonal_projector<M: Model>(model: &M, q: &[f64]) -> Result<(Matrix<f64>, Matrix<f64>)> {
    check_point(model, q)?;
    let p = projector_generic(model, q)?;
    let pp = complement(&p);
    Ok((p, pp))
}

pub fn levi_civita<M: Model>(model: &M, q: &[f64]) -> Result<Symbols<f64>> {
    Ok(geometry::<Jet1, M>(model, q)?.gamma_g)
}

pub fn nh_christoffel<M: Model>(model: &M, q: &[f64]) -> Result<Symbols<f64>> {
    Ok(geometry::<Jet1, M>(model, q)?.gamma_nh)
}

/// `∂_l Γ^{nh}` for every `l`, indexed by `l` first.
pub fn christoffel_gradient<M: Model>(model: &M, q: &[f64]) -> Result<Vec<Symbols<f64>>> {
    let g = geometry::<Jet2, M>(model, q)?;
    Ok((0..model.dim()).map(|l| g.gamma_nh.partial(l)).collect())
}

pub fn torsion_of(gamma: &Symbols<f64>) -> Symbols<f64> {
    let n = gamma.dim();
    let mut t = Symbols::zeros(n);
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                t.set(m, i, j, gamma.get(m, i, j) - gamma.get(m, j, i));
            }
        }
    }
    t
}

pub fn torsion<M: Model>(model: &M, q: &[f64]) -> Result<Symbols<f64>> {
    Ok(torsion_of(&nh_christoffel(model, q)?))
}

/// `R(X,Y)Z` from symbols and their gradient.
pub fn curvature_from(
    gamma: &Symbols<f64>,
    dgamma: &[Symbols<f64>],
    x: &[f64],
    y: &[f64],
    z: &[f64],
) -> Vec<f64> {
    let n = gamma.dim();
    let mut out = vec![0.0; n];
    for (m, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let xy = x[i] * y[j];
                if xy == 0.0 {
                    continue;
                }
                for l in 0..n {
                    let mut r = dgamma[i].get(m, j, l) - dgamma[j].get(m, i, l);
                    for k in 0..n {
                        r += gamma.get(k, j, l) * gamma.get(m, i, k)
                            - gamma.get(k, i, l) * gamma.get(m, j, k);
                    }
                    acc += xy * z[l] * r;
                }
            }
        }
        *o = acc;
    }
    out
}

pub fn curvature_apply<M: Model>(
    model: &M,
    q: &[f64],
    x: &[f64],
    y: &[f64],
    z: &[f64],
) -> Result<Vec<f64>> {
    let n = model.dim();
    check_vector("X", n, x)?;
    check_vector("Y", n, y)?;
    check_vector("Z", n, z)?;
    let cd = connection_data(model, q)?;
    Ok(curvature_from(&cd.gamma_nh, &cd.d_gamma_nh, x, y, z))
}

/// Everything the connection offers at one point.
#[derive(Clone, Debug, Serialize)]
pub struct ConnectionData {
    #[serde(rename = "P")]
    pub p: Matrix<f64>,
    #[serde(rename = "Pp")]
    pub pp: Matrix<f64>,
    #[serde(rename = "gammaG")]
    pub gamma_g: Symbols<f64>,
    #[serde(rename = "gammaNH")]
    pub gamma_nh: Symbols<f64>,
    /// `∂_l Γ^{nh}` indexed by `l` first.
    #[serde(rename = "dGammaNH")]
    pub d_gamma_nh: Vec<Symbols<f64>>,
    pub torsion: Symbols<f64>,
}

pub fn connection_data<M: Model>(model: &M, q: &[f64]) -> Result<ConnectionData> {
    let g = geometry::<Jet2, M>(model, q)?;
    let n = model.dim();
    let gamma_nh = g.gamma_nh.values();
    Ok(ConnectionData {
        p: g.p.values(),
        pp: g.pp.values(),
        gamma_g: g.gamma_g.values(),
        torsion: torsion_of(&gamma_nh),
        d_gamma_nh: (0..n).map(|l| g.gamma_nh.partial(l)).collect(),
        gamma_nh,
    })
}

/// `(∇_X Y)^k = X^i ∂_i Y^k + Γ^k_{ij} X^i Y^j`, with `dy[i]` the
/// components of `∂_i Y`.
pub fn covariant_derivative(
    gamma: &Symbols<f64>,
    x: &[f64],
    y: &[f64],
    dy: &[Vec<f64>],
) -> Vec<f64> {
    let n = gamma.dim();
    let mut out = gamma.contract(x, y);
    for (k, o) in out.iter_mut().enumerate() {
        for i in 0..n {
            *o += x[i] * dy[i][k];
        }
    }
    out
}
