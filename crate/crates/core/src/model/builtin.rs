use crate::error::{Error, Result};
use crate::jet::{Scalar, MAX_VARS};
use crate::lift::Lifted;
use crate::linalg::Matrix;

use super::{Model, Signature, TangentState};

/// Names accepted by [`AnyModel::by_name`]; each also accepts a `:lift` suffix.
pub const MODEL_NAMES: [&str; 4] = ["particle", "particle-potential", "disk", "euclidean"];

fn c<S: Scalar>(v: f64) -> S {
    S::constant(v)
}

/// Free particle in `(x, y, z)` subject to `ż = y ẋ`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Particle;

fn particle_frame<S: Scalar>(q: &[S]) -> Matrix<S> {
    Matrix::from_rows(
        vec![
            vec![c(1.0), c(0.0)],
            vec![c(0.0), c(1.0)],
            vec![q[1], c(0.0)],
        ],
        2,
    )
}

fn particle_annihilator<S: Scalar>(q: &[S]) -> Matrix<S> {
    Matrix::from_rows(vec![vec![-q[1], c(0.0), c(1.0)]], 3)
}

fn particle_reference(s: &TangentState, t: f64) -> TangentState {
    let (x0, y0, z0) = (s.q[0], s.q[1], s.q[2]);
    let (xd0, yd0) = (s.v[0], s.v[1]);
    if yd0 == 0.0 {
        return TangentState::new(
            vec![x0 + xd0 * t, y0, z0 + y0 * xd0 * t],
            vec![xd0, 0.0, y0 * xd0],
        );
    }
    let y = yd0 * t + y0;
    let s0 = (y0 * y0 + 1.0).sqrt();
    let s1 = (y * y + 1.0).sqrt();
    let k = xd0 * s0 / yd0;
    let xd = xd0 * s0 / s1;
    TangentState::new(
        vec![x0 + k * (y.asinh() - y0.asinh()), y, z0 + k * (s1 - s0)],
        vec![xd, yd0, y * xd],
    )
}

impl Model for Particle {
    fn name(&self) -> String {
        "particle".into()
    }
    fn dim(&self) -> usize {
        3
    }
    fn rank(&self) -> usize {
        2
    }
    fn signature(&self) -> Signature {
        Signature::Riemannian
    }
    fn metric<S: Scalar>(&self, _q: &[S]) -> Matrix<S> {
        Matrix::identity(3)
    }
    fn frame<S: Scalar>(&self, q: &[S]) -> Matrix<S> {
        particle_frame(q)
    }
    fn annihilator<S: Scalar>(&self, q: &[S]) -> Matrix<S> {
        particle_annihilator(q)
    }
    fn reference_solution(&self, s: &TangentState, t: f64) -> Option<TangentState> {
        Some(particle_reference(s, t))
    }
}

/// The nonholonomic particle with potential `V = z`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ParticlePotential;

impl Model for ParticlePotential {
    fn name(&self) -> String {
        "particle-potential".into()
    }
    fn dim(&self) -> usize {
        3
    }
    fn rank(&self) -> usize {
        2
    }
    fn signature(&self) -> Signature {
        Signature::Riemannian
    }
    fn metric<S: Scalar>(&self, _q: &[S]) -> Matrix<S> {
        Matrix::identity(3)
    }
    fn frame<S: Scalar>(&self, q: &[S]) -> Matrix<S> {
        particle_frame(q)
    }
    fn annihilator<S: Scalar>(&self, q: &[S]) -> Matrix<S> {
        particle_annihilator(q)
    }
    fn has_potential(&self) -> bool {
        true
    }
    fn potential<S: Scalar>(&self, q: &[S]) -> S {
        q[2]
    }
}

/// Vertical rolling disk in `(x, y, θ, φ)` with radius `R` and moments of
/// inertia `I` (rolling) and `J` (turning); unit mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disk {
    pub radius: f64,
    pub inertia_roll: f64,
    pub inertia_turn: f64,
}

impl Disk {
    pub fn new(radius: f64, inertia_roll: f64, inertia_turn: f64) -> Self {
        Disk {
            radius,
            inertia_roll,
            inertia_turn,
        }
    }
}

impl Default for Disk {
    fn default() -> Self {
        Disk::new(1.0, 1.0, 1.0)
    }
}

impl Model for Disk {
    fn name(&self) -> String {
        "disk".into()
    }
    fn dim(&self) -> usize {
        4
    }
    fn rank(&self) -> usize {
        2
    }
    fn signature(&self) -> Signature {
        Signature::Riemannian
    }
    fn metric<S: Scalar>(&self, _q: &[S]) -> Matrix<S> {
        let d = [1.0, 1.0, self.inertia_roll, self.inertia_turn];
        Matrix::from_fn(4, 4, |i, j| if i == j { c(d[i]) } else { c(0.0) })
    }
    fn frame<S: Scalar>(&self, q: &[S]) -> Matrix<S> {
        let r = self.radius;
        let phi = q[3];
        Matrix::from_rows(
            vec![
                vec![phi.cos() * r, c(0.0)],
                vec![phi.sin() * r, c(0.0)],
                vec![c(1.0), c(0.0)],
                vec![c(0.0), c(1.0)],
            ],
            2,
        )
    }
    fn annihilator<S: Scalar>(&self, q: &[S]) -> Matrix<S> {
        let r = self.radius;
        let phi = q[3];
        Matrix::from_rows(
            vec![
                vec![c(1.0), c(0.0), -(phi.cos() * r), c(0.0)],
                vec![c(0.0), c(1.0), -(phi.sin() * r), c(0.0)],
            ],
            4,
        )
    }
    fn reference_solution(&self, s: &TangentState, t: f64) -> Option<TangentState> {
        let r = self.radius;
        let (x0, y0, th0, phi0) = (s.q[0], s.q[1], s.q[2], s.q[3]);
        let (omega_roll, omega_turn) = (s.v[2], s.v[3]);
        let phi = omega_turn * t + phi0;
        let (x, y) = if omega_turn == 0.0 {
            (
                omega_roll * t * r * phi0.cos() + x0,
                omega_roll * t * r * phi0.sin() + y0,
            )
        } else {
            let k = r * omega_roll / omega_turn;
            (
                x0 + k * (phi.sin() - phi0.sin()),
                y0 - k * (phi.cos() - phi0.cos()),
            )
        };
        Some(TangentState::new(
            vec![x, y, omega_roll * t + th0, phi],
            vec![
                r * omega_roll * phi.cos(),
                r * omega_roll * phi.sin(),
                omega_roll,
                omega_turn,
            ],
        ))
    }
}

/// Flat `R^n` with no constraints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Euclidean {
    pub n: usize,
}

impl Default for Euclidean {
    fn default() -> Self {
        Euclidean { n: 3 }
    }
}

impl Model for Euclidean {
    fn name(&self) -> String {
        "euclidean".into()
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn rank(&self) -> usize {
        self.n
    }
    fn signature(&self) -> Signature {
        Signature::Riemannian
    }
    fn metric<S: Scalar>(&self, _q: &[S]) -> Matrix<S> {
        Matrix::identity(self.n)
    }
    fn frame<S: Scalar>(&self, _q: &[S]) -> Matrix<S> {
        Matrix::identity(self.n)
    }
    fn annihilator<S: Scalar>(&self, _q: &[S]) -> Matrix<S> {
        Matrix::zeros(0, self.n)
    }
    fn reference_solution(&self, s: &TangentState, t: f64) -> Option<TangentState> {
        let q = s.q.iter().zip(&s.v).map(|(q, v)| q + v * t).collect();
        Some(TangentState::new(q, s.v.clone()))
    }
}

/// Any built-in base model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Builtin {
    Particle(Particle),
    ParticlePotential(ParticlePotential),
    Disk(Disk),
    Euclidean(Euclidean),
}

macro_rules! dispatch {
    ($self:expr, $m:ident => $body:expr) => {
        match $self {
            Builtin::Particle($m) => $body,
            Builtin::ParticlePotential($m) => $body,
            Builtin::Disk($m) => $body,
            Builtin::Euclidean($m) => $body,
        }
    };
}

fn take_params(
    model: &str,
    params: &[(String, f64)],
    allowed: &[&str],
) -> Result<Vec<Option<f64>>> {
    let mut out = vec![None; allowed.len()];
    for (k, v) in params {
        let Some(i) = allowed.iter().position(|a| a == k) else {
            return Err(Error::InvalidInput(format!(
                "model '{model}' has no parameter '{k}'"
            )));
        };
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("parameter {k} must be finite")));
        }
        out[i] = Some(*v);
    }
    Ok(out)
}

impl Builtin {
    pub fn by_name(name: &str, params: &[(String, f64)]) -> Result<Builtin> {
        match name {
            "particle" => {
                take_params(name, params, &[])?;
                Ok(Builtin::Particle(Particle))
            }
            "particle-potential" => {
                take_params(name, params, &[])?;
                Ok(Builtin::ParticlePotential(ParticlePotential))
            }
            "disk" => {
                let p = take_params(name, params, &["R", "I", "J"])?;
                let d = Disk::new(
                    p[0].unwrap_or(1.0),
                    p[1].unwrap_or(1.0),
                    p[2].unwrap_or(1.0),
                );
                if d.radius <= 0.0 || d.inertia_roll <= 0.0 || d.inertia_turn <= 0.0 {
                    return Err(Error::InvalidInput(
                        "disk parameters must be positive".into(),
                    ));
                }
                Ok(Builtin::Disk(d))
            }
            "euclidean" => {
                let p = take_params(name, params, &["n"])?;
                let n = p[0].unwrap_or(3.0);
                if n.fract() != 0.0 || n < 1.0 || n > MAX_VARS as f64 {
                    return Err(Error::InvalidInput(format!(
                        "euclidean dimension must be an integer in 1..={MAX_VARS}"
                    )));
                }
                Ok(Builtin::Euclidean(Euclidean { n: n as usize }))
            }
            _ => Err(Error::UnknownModel(name.into())),
        }
    }
}

impl Model for Builtin {
    fn name(&self) -> String {
        dispatch!(self, m => m.name())
    }
    fn dim(&self) -> usize {
        dispatch!(self, m => m.dim())
    }
    fn rank(&self) -> usize {
        dispatch!(self, m => m.rank())
    }
    fn signature(&self) -> Signature {
        dispatch!(self, m => m.signature())
    }
    fn metric<S: Scalar>(&self, q: &[S]) -> Matrix<S> {
        dispatch!(self, m => m.metric(q))
    }
    fn frame<S: Scalar>(&self, q: &[S]) -> Matrix<S> {
        dispatch!(self, m => m.frame(q))
    }
    fn annihilator<S: Scalar>(&self, q: &[S]) -> Matrix<S> {
        dispatch!(self, m => m.annihilator(q))
    }
    fn has_potential(&self) -> bool {
        dispatch!(self, m => m.has_potential())
    }
    fn potential<S: Scalar>(&self, q: &[S]) -> S {
        dispatch!(self, m => m.potential(q))
    }
    fn reference_solution(&self, s: &TangentState, t: f64) -> Option<TangentState> {
        dispatch!(self, m => m.reference_solution(s, t))
    }
}

/// A built-in model or its complete lift, selected by name.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel {
    Base(Builtin),
    Lifted(Lifted<Builtin>),
}

impl AnyModel {
    /// Resolves `name` (optionally suffixed with `:lift`) with `key=value`
    /// parameters applied to the base model.
    pub fn by_name(name: &str, params: &[(String, f64)]) -> Result<AnyModel> {
        match name.strip_suffix(":lift") {
            Some(base) => {
                let b = Builtin::by_name(base, params)?;
                Ok(AnyModel::Lifted(crate::lift::lift_model(b)?))
            }
            None => Ok(AnyModel::Base(Builtin::by_name(name, params)?)),
        }
    }
}

macro_rules! dispatch_any {
    ($self:expr, $m:ident => $body:expr) => {
        match $self {
            AnyModel::Base($m) => $body,
            AnyModel::Lifted($m) => $body,
        }
    };
}

impl Model for AnyModel {
    fn name(&self) -> String {
        dispatch_any!(self, m => m.name())
    }
    fn dim(&self) -> usize {
        dispatch_any!(self, m => m.dim())
    }
    fn rank(&self) -> usize {
        dispatch_any!(self, m => m.rank())
    }
    fn signature(&self) -> Signature {
        dispatch_any!(self, m => m.signature())
    }
    fn metric<S: Scalar>(&self, q: &[S]) -> Matrix<S> {
        dispatch_any!(self, m => m.metric(q))
    }
    fn frame<S: Scalar>(&self, q: &[S]) -> Matrix<S> {
        dispatch_any!(self, m => m.frame(q))
    }
    fn annihilator<S: Scalar>(&self, q: &[S]) -> Matrix<S> {
        dispatch_any!(self, m => m.annihilator(q))
    }
    fn has_potential(&self) -> bool {
        dispatch_any!(self, m => m.has_potential())
    }
    fn potential<S: Scalar>(&self, q: &[S]) -> S {
        dispatch_any!(self, m => m.potential(q))
    }
    fn reference_solution(&self, s: &TangentState, t: f64) -> Option<TangentState> {
        dispatch_any!(self, m => m.reference_solution(s, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_resolves_names_and_params() {
        let d = AnyModel::by_name("disk", &[("R".into(), 2.0)]).unwrap();
        assert_eq!(d, AnyModel::Base(Builtin::Disk(Disk::new(2.0, 1.0, 1.0))));
        let l = AnyModel::by_name("particle:lift", &[]).unwrap();
        assert_eq!(
            (l.dim(), l.rank(), l.name().as_str()),
            (6, 4, "particle:lift")
        );
        assert!(matches!(
            AnyModel::by_name("sleigh", &[]),
            Err(Error::UnknownModel(_))
        ));
        assert!(AnyModel::by_name("disk", &[("K".into(), 1.0)]).is_err());
        assert!(AnyModel::by_name("euclidean", &[("n".into(), 2.5)]).is_err());
        assert!(AnyModel::by_name("euclidean:lift", &[("n".into(), 5.0)]).is_err());
    }

    #[test]
    fn particle_reference_branches() {
        let s = TangentState::new(vec![0.0; 3], vec![1.0, 1.0, 0.0]);
        let e = Particle.reference_solution(&s, 1.0).unwrap();
        assert!((e.q[0] - 1f64.asinh()).abs() < 1e-15);
        assert_eq!(e.q[1], 1.0);
        assert!((e.q[2] - (2f64.sqrt() - 1.0)).abs() < 1e-15);

        let y0 = 0.7;
        let s = TangentState::new(vec![0.0, y0, 0.0], vec![1.0, 0.0, y0]);
        let e = Particle.reference_solution(&s, 2.0).unwrap();
        assert_eq!(e.q, vec![2.0, y0, 2.0 * y0]);
    }

    #[test]
    fn disk_reference_straight_branch() {
        let (x0, y0, th0, phi0, w) = (0.5, -1.0, 0.2, 0.3f64, 1.7);
        let s = TangentState::new(
            vec![x0, y0, th0, phi0],
            vec![w * phi0.cos(), w * phi0.sin(), w, 0.0],
        );
        let e = Disk::default().reference_solution(&s, 1.0).unwrap();
        assert_eq!(
            e.q,
            vec![w * phi0.cos() + x0, w * phi0.sin() + y0, w + th0, phi0]
        );
    }
}
