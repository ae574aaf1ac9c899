//! Jacobi fields along nonholonomic geodesics, computed three ways.
//!
//! * `direct` integrates the linearized equations next to the base motion;
//! * `lift` integrates the complete-lift system and reads `W` off the fiber;
//! * `fd` differentiates a one-parameter family of trajectories.

use serde::Serialize;

use crate::dynamics::{
    check_constraints, integrate, rk_step, step_count, IntegrateOptions, Trajectory,
};
use crate::error::{Error, Result};
use crate::jet::{Dual, Scalar};
use crate::lift::{lift_model, lift_state};
use crate::linalg::{max_abs, max_abs_diff};
use crate::model::{check_vector, Model, TangentState};
use crate::tensor::{jacobi_data, projector_generic};

/// Tolerance on the initial data of a Jacobi field.
pub const SEED_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Lift,
    Fd,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Lift => "lift",
            Method::Fd => "fd",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JacobiState {
    pub t: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub wd: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct JacobiRun {
    pub method: Method,
    pub model: String,
    pub dt: f64,
    pub samples: Vec<JacobiState>,
    /// `max_b |(W·∂μ^b) v + μ^b Ẇ|` per sample.
    pub res_lifted: Vec<f64>,
    /// Jacobi-equation residual per sample, `NaN` where stencils do not fit.
    pub res_jacobi: Vec<f64>,
    pub w0: Vec<f64>,
    pub wd0: Vec<f64>,
}

impl JacobiRun {
    pub fn max_res_lifted(&self) -> f64 {
        self.res_lifted.iter().fold(0.0, |m, r| m.max(*r))
    }

    /// Largest finite Jacobi residual.
    pub fn max_res_jacobi(&self) -> f64 {
        self.res_jacobi
            .iter()
            .filter(|r| r.is_finite())
            .fold(0.0, |m, r| m.max(*r))
    }

    pub fn ws(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.w.clone()).collect()
    }
}

/// `(W·∂M) v + M Ẇ`, the complete-lift constraints on `Ẇ`.
pub fn lifted_constraint_residual<M: Model>(
    model: &M,
    q: &[f64],
    v: &[f64],
    w: &[f64],
    wd: &[f64],
) -> Vec<f64> {
    let x: Vec<Dual<f64>> = q.iter().zip(w).map(|(&q, &w)| Dual::new(q, w)).collect();
    let u: Vec<Dual<f64>> = v.iter().zip(wd).map(|(&v, &wd)| Dual::new(v, wd)).collect();
    model
        .annihilator(&x)
        .mul_vec(&u)
        .iter()
        .map(|d| d.eps)
        .collect()
}

/// `Ẅ` from the linearized equations of motion:
///
/// `Ẅ^k = −[q̇^i q̇^j W^l ∂_l Γ^k_{ij} + 2 q̇^i Ẇ^j Γ^k_{ij} − q̇^i Ẇ^j T^k_{ij} + W^i ∂_i F^k]`
///
/// with `F = P grad_g V`.
pub fn jacobi_rhs<M: Model>(model: &M, s: &JacobiState) -> Result<Vec<f64>> {
    let n = model.dim();
    check_vector("q", n, &s.q)?;
    check_vector("v", n, &s.v)?;
    check_vector("W", n, &s.w)?;
    check_vector("Wd", n, &s.wd)?;
    Ok(augmented_rhs(model, &s.q, &s.v, &s.w, &s.wd)?.1)
}

/// Returns `(q̈, Ẅ)`.
fn augmented_rhs<M: Model>(
    model: &M,
    q: &[f64],
    v: &[f64],
    w: &[f64],
    wd: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = model.dim();
    let d = jacobi_data(model, q)?;
    let g = &d.gamma_nh;
    let mut acc = vec![0.0; n];
    let mut wdd = vec![0.0; n];
    for k in 0..n {
        let mut a = d.force[k].val;
        let mut b = 0.0;
        for l in 0..n {
            b += w[l] * d.force[k].grad[l];
        }
        for i in 0..n {
            for j in 0..n {
                let gij = g.get(k, i, j);
                let gji = g.get(k, j, i);
                let vv = v[i] * v[j];
                a += gij.val * vv;
                let mut dl = 0.0;
                for l in 0..n {
                    dl += w[l] * gij.grad[l];
                }
                // 2Γ_{ij} − T_{ij} = Γ_{ij} + Γ_{ji}
                b += vv * dl + v[i] * wd[j] * (gij.val + gji.val);
            }
        }
        acc[k] = -a;
        wdd[k] = -b;
    }
    Ok((acc, wdd))
}

fn check_seed<M: Model>(model: &M, q: &[f64], v: &[f64], w: &[f64], wd: &[f64]) -> Result<()> {
    let base = model.annihilator(q).mul_vec(v);
    let lifted = lifted_constraint_residual(model, q, v, w, wd);
    let rows: Vec<f64> = base.into_iter().chain(lifted).collect();
    check_constraints(&rows, SEED_TOL)
}

fn finish_run<M: Model>(
    model: &M,
    method: Method,
    dt: f64,
    samples: Vec<JacobiState>,
) -> Result<JacobiRun> {
    let res_lifted = samples
        .iter()
        .map(|s| max_abs(&lifted_constraint_residual(model, &s.q, &s.v, &s.w, &s.wd)))
        .collect();
    let res_jacobi = residual_series(model, dt, &samples)?;
    let (w0, wd0) = (samples[0].w.clone(), samples[0].wd.clone());
    Ok(JacobiRun {
        method,
        model: model.name(),
        dt,
        samples,
        res_lifted,
        res_jacobi,
        w0,
        wd0,
    })
}

/// Integrates `(q, v, W, Ẇ)` with the base trajectory's scheme and step.
///
/// Only the initial data are required to satisfy the lifted constraints;
/// their residual along the run is recorded, not enforced. When the base
/// trajectory was projected, `(W, Ẇ)` receive the linearized projection.
pub fn integrate_jacobi_direct<M: Model>(
    model: &M,
    base: &Trajectory,
    w0: &[f64],
    wd0: &[f64],
) -> Result<JacobiRun> {
    let n = model.dim();
    check_vector("W0", n, w0)?;
    check_vector("Wd0", n, wd0)?;
    let s0 = &base.samples[0];
    check_seed(model, &s0.q, &s0.v, w0, wd0)?;

    let opts = &base.options;
    let dt = base.dt;
    let mut y: Vec<f64> = [&s0.q[..], &s0.v, w0, wd0].concat();
    let rhs = |y: &[f64]| -> Result<Vec<f64>> {
        if !y.iter().all(|x| x.is_finite()) {
            return Ok(vec![f64::NAN; y.len()]);
        }
        let (q, rest) = y.split_at(n);
        let (v, rest) = rest.split_at(n);
        let (w, wd) = rest.split_at(n);
        let (a, wdd) = augmented_rhs(model, q, v, w, wd)?;
        Ok([v, &a, wd, &wdd].concat())
    };
    let to_state = |t: f64, y: &[f64]| JacobiState {
        t,
        q: y[..n].to_vec(),
        v: y[n..2 * n].to_vec(),
        w: y[2 * n..3 * n].to_vec(),
        wd: y[3 * n..].to_vec(),
    };

    let mut samples = vec![to_state(0.0, &y)];
    for i in 1..base.samples.len() {
        let t = i as f64 * dt;
        let mut y1 = rk_step(opts.scheme, &y, dt, rhs)?;
        if !y1.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { t, last: y });
        }
        if opts.project_velocity {
            let (v, vd) = project_tangent(
                model,
                &y1[..n],
                &y1[n..2 * n],
                &y1[2 * n..3 * n],
                &y1[3 * n..],
            )?;
            y1[n..2 * n].copy_from_slice(&v);
            y1[3 * n..].copy_from_slice(&vd);
        }
        y = y1;
        samples.push(to_state(t, &y));
    }
    finish_run(model, Method::Direct, dt, samples)
}

/// `P(q + εW)(v + εẆ)`: the projected velocity and its variation.
pub fn project_tangent<M: Model>(
    model: &M,
    q: &[f64],
    v: &[f64],
    w: &[f64],
    wd: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let x: Vec<Dual<f64>> = q.iter().zip(w).map(|(&q, &w)| Dual::new(q, w)).collect();
    let u: Vec<Dual<f64>> = v.iter().zip(wd).map(|(&v, &wd)| Dual::new(v, wd)).collect();
    let pu = projector_generic(model, &x)?.mul_vec(&u);
    Ok((
        pu.iter().map(|d| d.re).collect(),
        pu.iter().map(|d| d.eps).collect(),
    ))
}

/// Integrates the complete-lift system from position `(q0, W0)` and
/// velocity `(v0, Ẇ0)`.
pub fn integrate_jacobi_via_lift<M: Model + Clone>(
    model: &M,
    start: &TangentState,
    w0: &[f64],
    wd0: &[f64],
    dt: f64,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<JacobiRun> {
    let n = model.dim();
    check_vector("W0", n, w0)?;
    check_vector("Wd0", n, wd0)?;
    let lifted = lift_model(model.clone())?;
    let s0 = lift_state(start, w0, wd0);
    let opts = IntegrateOptions {
        constraint_tol: SEED_TOL,
        ..opts.clone()
    };
    let traj = integrate(&lifted, &s0, dt, t_end, &opts)?;
    let samples = traj
        .samples
        .iter()
        .map(|s| JacobiState {
            t: s.t,
            q: s.q[..n].to_vec(),
            v: s.v[..n].to_vec(),
            w: s.q[n..].to_vec(),
            wd: s.v[n..].to_vec(),
        })
        .collect();
    finish_run(model, Method::Lift, dt, samples)
}

/// Result of [`fd_variation_oracle`].
#[derive(Clone, Debug, Serialize)]
pub struct FdOracle {
    pub run: JacobiRun,
    /// The unperturbed trajectory.
    pub base: Trajectory,
    /// `dq0` and the exact `d/ds P(q_s)(v0 + s dv0)` at `s = 0`, for seeding
    /// the other methods.
    pub w0: Vec<f64>,
    pub wd0: Vec<f64>,
}

/// Central-difference Jacobi field of the family `q_s = q0 + s dq0`,
/// `v_s = P(q_s)(v0 + s dv0)`.
#[allow(clippy::too_many_arguments)]
pub fn fd_variation_oracle<M: Model>(
    model: &M,
    start: &TangentState,
    dq0: &[f64],
    dv0: &[f64],
    eps: f64,
    dt: f64,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<FdOracle> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let n = model.dim();
    check_vector("dq0", n, dq0)?;
    check_vector("dv0", n, dv0)?;
    step_count(dt, t_end)?;

    let member = |s: f64| -> Result<TangentState> {
        let q: Vec<f64> = start.q.iter().zip(dq0).map(|(q, d)| q + s * d).collect();
        let v: Vec<f64> = start.v.iter().zip(dv0).map(|(v, d)| v + s * d).collect();
        let v = projector_generic(model, &q)?.mul_vec(&v);
        Ok(TangentState::new(q, v))
    };
    let (plus, minus) = (member(eps)?, member(-eps)?);
    let ((tp, tm), tb) = rayon::join(
        || {
            rayon::join(
                || integrate(model, &plus, dt, t_end, opts),
                || integrate(model, &minus, dt, t_end, opts),
            )
        },
        || integrate(model, start, dt, t_end, opts),
    );
    let (tp, tm, base) = (tp?, tm?, tb?);

    let h = 2.0 * eps;
    let samples: Vec<JacobiState> = base
        .samples
        .iter()
        .zip(tp.samples.iter().zip(&tm.samples))
        .map(|(b, (p, m))| JacobiState {
            t: b.t,
            q: b.q.clone(),
            v: b.v.clone(),
            w: p.q.iter().zip(&m.q).map(|(a, b)| (a - b) / h).collect(),
            wd: p.v.iter().zip(&m.v).map(|(a, b)| (a - b) / h).collect(),
        })
        .collect();
    let run = finish_run(model, Method::Fd, dt, samples)?;
    let (_, wd0) = project_tangent(model, &start.q, &start.v, dq0, dv0)?;
    Ok(FdOracle {
        run,
        base,
        w0: dq0.to_vec(),
        wd0,
    })
}

/// Fourth-order central first and second derivatives at sample `i`.
pub(crate) fn stencil(ws: &[Vec<f64>], i: usize, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let n = ws[i].len();
    let (m2, m1, z, p1, p2) = (&ws[i - 2], &ws[i - 1], &ws[i], &ws[i + 1], &ws[i + 2]);
    let d1 = (0..n)
        .map(|k| (m2[k] - 8.0 * m1[k] + 8.0 * p1[k] - p2[k]) / (12.0 * dt))
        .collect();
    let d2 = (0..n)
        .map(|k| (-m2[k] + 16.0 * m1[k] - 30.0 * z[k] + 16.0 * p1[k] - p2[k]) / (12.0 * dt * dt))
        .collect();
    (d1, d2)
}

fn residual_series<M: Model>(model: &M, dt: f64, samples: &[JacobiState]) -> Result<Vec<f64>> {
    let qs: Vec<(&[f64], &[f64])> = samples.iter().map(|s| (&s.q[..], &s.v[..])).collect();
    let ws: Vec<Vec<f64>> = samples.iter().map(|s| s.w.clone()).collect();
    residual_core(model, dt, &qs, &ws)
}

fn residual_core<M: Model>(
    model: &M,
    dt: f64,
    base: &[(&[f64], &[f64])],
    ws: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let len = ws.len();
    if len < 5 {
        return Err(Error::InvalidInput(format!(
            "Jacobi residual needs at least 5 samples, got {len}"
        )));
    }
    let mut out = vec![f64::NAN; len];
    for i in 2..len - 2 {
        let (wd, wdd) = stencil(ws, i, dt);
        let (q, v) = base[i];
        let (_, rhs) = augmented_rhs(model, q, v, &ws[i], &wd)?;
        out[i] = max_abs_diff(&wdd, &rhs);
    }
    Ok(out)
}

/// Residual of the Jacobi equation for sampled `W` along `base`, with `Ẇ`
/// and `Ẅ` from fourth-order central differences. The two samples at either
/// end are `NaN`.
pub fn jacobi_residual<M: Model>(
    model: &M,
    base: &Trajectory,
    ws: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if ws.len() != base.samples.len() {
        return Err(Error::dim("W samples", base.samples.len(), ws.len()));
    }
    for w in ws {
        check_vector("W", model.dim(), w)?;
    }
    let qs: Vec<(&[f64], &[f64])> = base.samples.iter().map(|s| (&s.q[..], &s.v[..])).collect();
    residual_core(model, base.dt, &qs, ws)
}

/// `max_t ‖W_a(t) − W_b(t)‖∞` over aligned grids.
pub fn max_deviation(a: &JacobiRun, b: &JacobiRun) -> Result<f64> {
    if a.samples.len() != b.samples.len() || a.dt != b.dt {
        return Err(Error::InvalidInput(format!(
            "cannot compare {} and {} runs on different grids",
            a.method.as_str(),
            b.method.as_str()
        )));
    }
    Ok(a.samples
        .iter()
        .zip(&b.samples)
        .fold(0.0, |m, (x, y)| m.max(max_abs_diff(&x.w, &y.w))))
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub max_dev_direct_lift: f64,
    pub max_dev_direct_fd: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AllMethods {
    pub direct: JacobiRun,
    pub lift: JacobiRun,
    pub fd: JacobiRun,
    pub comparison: Comparison,
}

/// Runs the oracle for `(dq0, dv0)` and seeds the direct and lift methods
/// with its effective initial data.
#[allow(clippy::too_many_arguments)]
pub fn run_all_methods<M: Model + Clone>(
    model: &M,
    start: &TangentState,
    dq0: &[f64],
    dv0: &[f64],
    eps: f64,
    dt: f64,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<AllMethods> {
    let fd = fd_variation_oracle(model, start, dq0, dv0, eps, dt, t_end, opts)?;
    let (direct, lift) = rayon::join(
        || integrate_jacobi_direct(model, &fd.base, &fd.w0, &fd.wd0),
        || integrate_jacobi_via_lift(model, start, &fd.w0, &fd.wd0, dt, t_end, opts),
    );
    let (direct, lift) = (direct?, lift?);
    let comparison = Comparison {
        max_dev_direct_lift: max_deviation(&direct, &lift)?,
        max_dev_direct_fd: max_deviation(&direct, &fd.run)?,
    };
    Ok(AllMethods {
        direct,
        lift,
        fd: fd.run,
        comparison,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Euclidean, Particle};

    fn particle_start(y0: f64, xd0: f64, yd0: f64) -> TangentState {
        TangentState::new(vec![0.0, y0, 0.0], vec![xd0, yd0, y0 * xd0])
    }

    #[test]
    fn vertical_field_is_jacobi() {
        let s = JacobiState {
            t: 0.0,
            q: vec![0.3, -0.7, 1.0],
            v: vec![1.2, 0.4, -0.84],
            w: vec![0.0, 0.0, 1.0],
            wd: vec![0.0; 3],
        };
        let r = jacobi_rhs(&Particle, &s).unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn flat_space_fields_are_linear() {
        let e = Euclidean { n: 3 };
        let start = TangentState::new(vec![0.1, 0.2, 0.3], vec![1.0, -1.0, 0.5]);
        let base = integrate(&e, &start, 1e-2, 1.0, &Default::default()).unwrap();
        let (w0, wd0) = ([1.0, 2.0, 3.0], [0.5, 0.0, -1.0]);
        let run = integrate_jacobi_direct(&e, &base, &w0, &wd0).unwrap();
        let last = run.samples.last().unwrap();
        for k in 0..3 {
            assert!((last.w[k] - (w0[k] + wd0[k])).abs() < 1e-13);
        }
        let s = JacobiState {
            t: 0.0,
            q: start.q.clone(),
            v: start.v.clone(),
            w: w0.to_vec(),
            wd: wd0.to_vec(),
        };
        assert_eq!(jacobi_rhs(&e, &s).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn linear_family_along_straight_line() {
        let y0 = 0.8;
        let start = particle_start(y0, 1.0, 0.0);
        let u = 1.5;
        let s = JacobiState {
            t: 0.7,
            q: vec![0.7, y0, 0.7 * y0],
            v: start.v.clone(),
            w: vec![u * 0.7, 0.0, u * 0.7 * y0],
            wd: vec![u, 0.0, u * y0],
        };
        assert!(jacobi_rhs(&Particle, &s)
            .unwrap()
            .iter()
            .all(|x| x.abs() < 1e-15));

        let base = integrate(&Particle, &start, 1e-3, 1.0, &Default::default()).unwrap();
        let run = integrate_jacobi_direct(&Particle, &base, &[0.0; 3], &[u, 0.0, u * y0]).unwrap();
        let last = run.samples.last().unwrap();
        assert!(max_abs_diff(&last.w, &[u, 0.0, u * y0]) < 1e-12);
    }

    #[test]
    fn arcsinh_family() {
        let (y0, yd0) = (0.3, 1.0);
        let start = particle_start(y0, 1.0, yd0);
        let base = integrate(&Particle, &start, 1e-3, 1.0, &Default::default()).unwrap();
        let run = integrate_jacobi_direct(&Particle, &base, &[0.0; 3], &[1.0, 0.0, y0]).unwrap();
        let k = (y0 * y0 + 1.0).sqrt() / yd0;
        for s in run.samples.iter().step_by(100) {
            let y = yd0 * s.t + y0;
            let want = [
                k * (y.asinh() - y0.asinh()),
                0.0,
                k * ((y * y + 1.0).sqrt() - (y0 * y0 + 1.0).sqrt()),
            ];
            assert!(max_abs_diff(&s.w, &want) < 1e-10, "t={}", s.t);
        }
        assert!(run.max_res_lifted() < 1e-10);
        assert!(run.max_res_jacobi() < 1e-6);
    }

    #[test]
    fn seed_violation_names_row() {
        let start = particle_start(0.5, 1.0, 1.0);
        let base = integrate(&Particle, &start, 1e-2, 1.0, &Default::default()).unwrap();
        let err =
            integrate_jacobi_direct(&Particle, &base, &[0.0; 3], &[1.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Precondition { row: 1, .. }));
    }

    #[test]
    fn three_methods_agree_on_particle() {
        let start = particle_start(0.2, 0.9, -0.6);
        let all = run_all_methods(
            &Particle,
            &start,
            &[0.3, -0.2, 0.5],
            &[0.1, 0.4, -0.3],
            1e-4,
            1e-3,
            1.0,
            &Default::default(),
        )
        .unwrap();
        assert!(
            all.comparison.max_dev_direct_lift < 1e-8,
            "{:?}",
            all.comparison
        );
        assert!(
            all.comparison.max_dev_direct_fd < 5e-6,
            "{:?}",
            all.comparison
        );
    }

    #[test]
    fn zero_perturbation_gives_zero_field() {
        let start = particle_start(0.2, 0.9, -0.6);
        let fd = fd_variation_oracle(
            &Particle,
            &start,
            &[0.0; 3],
            &[0.0; 3],
            1e-4,
            1e-2,
            1.0,
            &Default::default(),
        )
        .unwrap();
        assert!(fd.run.samples.iter().all(|s| s.w.iter().all(|w| *w == 0.0)));
        assert!(fd_variation_oracle(
            &Particle,
            &start,
            &[0.0; 3],
            &[0.0; 3],
            0.0,
            1e-2,
            1.0,
            &Default::default()
        )
        .is_err());
    }

    #[test]
    fn residual_needs_five_samples() {
        let start = particle_start(0.2, 0.9, -0.6);
        let base = integrate(&Particle, &start, 0.25, 0.75, &Default::default()).unwrap();
        assert_eq!(base.samples.len(), 4);
        assert!(jacobi_residual(&Particle, &base, &vec![vec![0.0; 3]; 4]).is_err());
    }
}
