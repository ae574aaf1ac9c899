//! Nonholonomic equations of motion and fixed-step integration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{seed, Jet1};
use crate::linalg::{dot, max_abs};
use crate::model::{check_state, Model, TangentState};
use crate::tensor::{accel_data, projector_generic};

pub use crate::model::{constraint_residual, energy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rk4,
    /// Explicit midpoint rule.
    Rk2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Connection,
    Multiplier,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegrateOptions {
    pub scheme: Scheme,
    pub formulation: Formulation,
    /// Replace `v` by `P(q) v` after every step.
    pub project_velocity: bool,
    /// Largest admissible initial constraint residual when not projecting.
    pub constraint_tol: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            scheme: Scheme::Rk4,
            formulation: Formulation::Connection,
            project_velocity: false,
            constraint_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DynState {
    pub t: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl DynState {
    pub fn tangent(&self) -> TangentState {
        TangentState::new(self.q.clone(), self.v.clone())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub model: String,
    pub dt: f64,
    pub options: IntegrateOptions,
    pub samples: Vec<DynState>,
    /// Largest `|M(q) v|` entry over all samples.
    pub max_residual: f64,
}

impl Trajectory {
    pub fn last(&self) -> &DynState {
        self.samples
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn steps(&self) -> usize {
        self.samples.len() - 1
    }
}

/// `q̈ = −Γ^{nh}(v, v) − P grad_g V`.
pub fn acceleration_connection<M: Model>(model: &M, s: &TangentState) -> Result<Vec<f64>> {
    check_state(model, s)?;
    connection_accel(model, &s.q, &s.v)
}

fn connection_accel<M: Model>(model: &M, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let a = accel_data(model, q)?;
    let gvv = a.gamma_nh.contract(v, v);
    Ok(gvv.iter().zip(&a.force).map(|(g, f)| -g - f).collect())
}

/// Lagrange–d'Alembert acceleration with the multipliers `λ` of
/// `G q̈ + … = Mᵀ λ`.
pub fn acceleration_multiplier<M: Model>(
    model: &M,
    s: &TangentState,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_state(model, s)?;
    multiplier_accel(model, &s.q, &s.v)
}

fn multiplier_accel<M: Model>(model: &M, q: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = model.dim();
    let x = seed::<Jet1>(q);
    let g_j = model.metric(&x);
    let m_j = model.annihilator(&x);
    let g = g_j.truncate();
    let m = m_j.truncate();
    let ginv = g.inverse()?;

    // Σ_k v^k ∂_k G v − ½ ∂G[v, v] + ∂V
    let mut rhs = vec![0.0; n];
    let mut mdot_v = vec![0.0; m.rows()];
    for k in 0..n {
        let dgk = g_j.partial(k);
        let dgk_v = dgk.mul_vec(v);
        let dmk_v = m_j.partial(k).mul_vec(v);
        for i in 0..n {
            rhs[i] += v[k] * dgk_v[i];
        }
        rhs[k] -= 0.5 * dot(v, &dgk_v);
        for (b, d) in mdot_v.iter_mut().enumerate() {
            *d += v[k] * dmk_v[b];
        }
    }
    if model.has_potential() {
        let vj = model.potential(&x);
        for (i, r) in rhs.iter_mut().enumerate() {
            *r += vj.grad[i];
        }
    }
    let a_free: Vec<f64> = ginv.mul_vec(&rhs).iter().map(|a| -a).collect();
    if m.rows() == 0 {
        return Ok((a_free, Vec::new()));
    }

    let ginv_mt = ginv.matmul(&m.transpose());
    let c = m.matmul(&ginv_mt);
    let m_a = m.mul_vec(&a_free);
    let b: Vec<f64> = mdot_v.iter().zip(&m_a).map(|(d, ma)| -(d + ma)).collect();
    let cinv = c
        .inverse()
        .map_err(|_| Error::Compatibility { q: q.to_vec() })?;
    let lambda = cinv.mul_vec(&b);
    let corr = ginv_mt.mul_vec(&lambda);
    let acc = a_free.iter().zip(&corr).map(|(a, c)| a + c).collect();
    Ok((acc, lambda))
}

/// One explicit Runge–Kutta step of `ẏ = f(y)`.
pub(crate) fn rk_step(
    scheme: Scheme,
    y: &[f64],
    dt: f64,
    f: impl Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let axpy =
        |a: f64, x: &[f64]| -> Vec<f64> { y.iter().zip(x).map(|(y, x)| y + a * x).collect() };
    match scheme {
        Scheme::Rk2 => {
            let k1 = f(y)?;
            let k2 = f(&axpy(0.5 * dt, &k1))?;
            Ok(axpy(dt, &k2))
        }
        Scheme::Rk4 => {
            let k1 = f(y)?;
            let k2 = f(&axpy(0.5 * dt, &k1))?;
            let k3 = f(&axpy(0.5 * dt, &k2))?;
            let k4 = f(&axpy(dt, &k3))?;
            Ok(y.iter()
                .enumerate()
                .map(|(i, y)| y + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect())
        }
    }
}

/// Number of steps of size `dt` covering `[0, t_end]`.
pub fn step_count(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidInput(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidInput(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    let n = (t_end / dt).round();
    if n < 1.0 || (n * dt - t_end).abs() > 1e-9 * t_end {
        return Err(Error::InvalidInput(format!(
            "t_end = {t_end} is not a whole number of steps of dt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// `P(q) v`.
pub fn project_velocity<M: Model>(model: &M, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    Ok(projector_generic(model, q)?.mul_vec(v))
}

/// Checks `|M(q) v| ≤ tol` row by row.
pub(crate) fn check_constraints(residual: &[f64], tol: f64) -> Result<()> {
    for (row, r) in residual.iter().enumerate() {
        if !(r.abs() <= tol) {
            return Err(Error::Precondition { row, residual: *r });
        }
    }
    Ok(())
}

pub fn acceleration<M: Model>(
    model: &M,
    formulation: Formulation,
    q: &[f64],
    v: &[f64],
) -> Result<Vec<f64>> {
    match formulation {
        Formulation::Connection => connection_accel(model, q, v),
        Formulation::Multiplier => Ok(multiplier_accel(model, q, v)?.0),
    }
}

/// Fixed-step integration on `t_i = i·dt` for `i = 0..=t_end/dt`.
pub fn integrate<M: Model>(
    model: &M,
    state0: &TangentState,
    dt: f64,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    check_state(model, state0)?;
    let steps = step_count(dt, t_end)?;
    let n = model.dim();

    let mut v0 = state0.v.clone();
    if opts.project_velocity {
        v0 = project_velocity(model, &state0.q, &v0)?;
    } else {
        let res = constraint_residual(model, &TangentState::new(state0.q.clone(), v0.clone()));
        check_constraints(&res, opts.constraint_tol)?;
    }

    let mut y: Vec<f64> = state0.q.iter().chain(&v0).copied().collect();
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(DynState {
        t: 0.0,
        q: state0.q.clone(),
        v: v0,
    });
    let rhs = |y: &[f64]| -> Result<Vec<f64>> {
        // an overflowing stage surfaces as divergence below, not as bad input
        if !y.iter().all(|x| x.is_finite()) {
            return Ok(vec![f64::NAN; y.len()]);
        }
        let (q, v) = y.split_at(n);
        let a = acceleration(model, opts.formulation, q, v)?;
        Ok(v.iter().chain(&a).copied().collect())
    };

    let mut max_res: f64 = max_abs(&constraint_residual(model, &samples[0].tangent()));
    for i in 1..=steps {
        let t = i as f64 * dt;
        let next = rk_step(opts.scheme, &y, dt, rhs).and_then(|mut y1| {
            if opts.project_velocity && y1.iter().all(|v| v.is_finite()) {
                let p = project_velocity(model, &y1[..n], &y1[n..])?;
                y1[n..].copy_from_slice(&p);
            }
            Ok(y1)
        });
        let y1 = match next {
            Ok(y1) if y1.iter().all(|v| v.is_finite()) => y1,
            Ok(_) => return Err(Error::Divergence { t, last: y }),
            Err(e) => return Err(e),
        };
        y = y1;
        let s = DynState {
            t,
            q: y[..n].to_vec(),
            v: y[n..].to_vec(),
        };
        max_res = max_res.max(max_abs(&constraint_residual(model, &s.tangent())));
        samples.push(s);
    }

    Ok(Trajectory {
        model: model.name(),
        dt,
        options: opts.clone(),
        samples,
        max_residual: max_res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AnyModel, Disk, Euclidean, Particle, ParticlePotential};

    fn st(q: &[f64], v: &[f64]) -> TangentState {
        TangentState::new(q.to_vec(), v.to_vec())
    }

    #[test]
    fn particle_accelerations() {
        let s = st(&[0.0, 1.0, 0.0], &[1.0, 1.0, 1.0]);
        let a = acceleration_connection(&Particle, &s).unwrap();
        assert!((a[0] + 0.5).abs() < 1e-15 && a[1].abs() < 1e-15 && (a[2] - 0.5).abs() < 1e-15);
        let (am, lambda) = acceleration_multiplier(&Particle, &s).unwrap();
        assert!((lambda[0] - 0.5).abs() < 1e-15);
        for i in 0..3 {
            assert!((a[i] - am[i]).abs() < 1e-15);
        }

        let s = st(&[0.3, -0.8, 0.1], &[2.0, 0.0, -1.6]);
        assert!(acceleration_connection(&Particle, &s)
            .unwrap()
            .iter()
            .all(|a| a.abs() < 1e-15));
    }

    #[test]
    fn free_motion() {
        let s = st(&[1.0, 2.0, 3.0], &[0.5, -1.0, 2.0]);
        let e = Euclidean { n: 3 };
        assert_eq!(acceleration_connection(&e, &s).unwrap(), vec![0.0; 3]);
        let (a, l) = acceleration_multiplier(&e, &s).unwrap();
        assert_eq!(a, vec![0.0; 3]);
        assert!(l.is_empty());
    }

    #[test]
    fn potential_force_is_projected() {
        // F = P e_z = (y, 0, y²)/(1 + y²)
        let y = 0.5;
        let s = st(&[0.0, y, 0.0], &[0.0; 3]);
        let a = acceleration_connection(&ParticlePotential, &s).unwrap();
        let d = 1.0 + y * y;
        assert!((a[0] + y / d).abs() < 1e-15);
        assert!((a[2] + y * y / d).abs() < 1e-15);
        let (am, _) = acceleration_multiplier(&ParticlePotential, &s).unwrap();
        assert!((a[0] - am[0]).abs() < 1e-15 && (a[2] - am[2]).abs() < 1e-15);
    }

    #[test]
    fn closed_form_arcsinh_branch() {
        let t = integrate(
            &Particle,
            &st(&[0.0; 3], &[1.0, 1.0, 0.0]),
            1e-3,
            1.0,
            &Default::default(),
        )
        .unwrap();
        let e = &t.last().q;
        assert_eq!(t.samples.len(), 1001);
        assert_eq!(t.last().t, 1.0);
        assert!((e[0] - 1f64.asinh()).abs() < 1e-8);
        assert!((e[1] - 1.0).abs() < 1e-12);
        assert!((e[2] - (2f64.sqrt() - 1.0)).abs() < 1e-8);
    }

    #[test]
    fn straight_line_branch() {
        let y0 = 0.6;
        let t = integrate(
            &Particle,
            &st(&[0.0, y0, 0.0], &[1.0, 0.0, y0]),
            1e-3,
            1.0,
            &Default::default(),
        )
        .unwrap();
        let e = &t.last().q;
        assert!(
            (e[0] - 1.0).abs() < 1e-12 && (e[1] - y0).abs() < 1e-15 && (e[2] - y0).abs() < 1e-12
        );
    }

    #[test]
    fn rk2_is_less_accurate_but_converges() {
        let s = st(&[0.0; 3], &[1.0, 1.0, 0.0]);
        let opts = IntegrateOptions {
            scheme: Scheme::Rk2,
            ..Default::default()
        };
        let t = integrate(&Particle, &s, 1e-3, 1.0, &opts).unwrap();
        let err = (t.last().q[0] - 1f64.asinh()).abs();
        assert!(err < 1e-5 && err > 1e-12);
    }

    #[test]
    fn projection_keeps_constraints_tight() {
        let opts = IntegrateOptions {
            project_velocity: true,
            ..Default::default()
        };
        let d = Disk::default();
        let t = integrate(
            &d,
            &st(&[0.0, 0.0, 0.0, 0.2], &[0.98, 0.198, 1.0, 0.7]),
            1e-3,
            1.0,
            &opts,
        )
        .unwrap();
        assert!(t.max_residual < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let s = st(&[0.0; 3], &[1.0, 1.0, 0.5]);
        assert!(matches!(
            integrate(&Particle, &s, 1e-3, 1.0, &Default::default()),
            Err(Error::Precondition { row: 0, .. })
        ));
        let s = st(&[0.0; 3], &[1.0, 1.0, 0.0]);
        assert!(integrate(&Particle, &s, 0.0, 1.0, &Default::default()).is_err());
        assert!(integrate(&Particle, &s, 0.3, 1.0, &Default::default()).is_err());
        assert!(integrate(
            &Particle,
            &st(&[0.0; 2], &[1.0, 1.0]),
            0.1,
            1.0,
            &Default::default()
        )
        .is_err());
    }

    #[test]
    fn lifted_particle_multiplier() {
        let l = AnyModel::by_name("particle:lift", &[]).unwrap();
        let (y, xd, yd) = (0.4, 1.3, -0.7);
        let q = [0.0, y, 0.0, 0.2, 0.5, 0.1];
        // ż = y ẋ, ẇ = v ẋ + y u̇
        let (ud, vd) = (0.3, 0.9);
        let v = [xd, yd, y * xd, ud, vd, 0.5 * xd + y * ud];
        let (_, lambda) = acceleration_multiplier(&l, &st(&q, &v)).unwrap();
        assert!((lambda[1] - xd * yd / (1.0 + y * y)).abs() < 1e-14);
    }

    #[test]
    fn overflow_is_divergence() {
        let s0 = st(&[0.0; 3], &[1e200, 1e200, 0.0]);
        let err = integrate(&Particle, &s0, 0.5, 1.0, &Default::default()).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
        assert!(err.is_numerical());
    }
}
