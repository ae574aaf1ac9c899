//! Candidate symmetry fields `W(q)`, generic over the scalar type.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::Scalar;
use crate::model::Model;

pub trait VectorField: Send + Sync {
    fn name(&self) -> String;
    fn eval<S: Scalar>(&self, q: &[S]) -> Vec<S>;
}

/// Names accepted by [`Field::by_name`].
pub const FIELD_NAMES: [&str; 5] = ["dz", "dtheta", "counterexample1", "counterexample2", "zero"];

/// Built-in candidate fields.
///
/// The two counterexamples live on the nonholonomic particle and are tied
/// to the straight trajectory through `(x0, y0, z0)` with speed `ẋ0`:
/// `(u/ẋ0)(x − x0)(∂x + y∂z)` and `(u/ẋ0)((x − x0)∂x + (z − z0)∂z)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Field {
    /// `∂/∂q^index`.
    Coordinate {
        label: String,
        index: usize,
    },
    Counterexample1 {
        u: f64,
        x0: f64,
        xdot0: f64,
    },
    Counterexample2 {
        u: f64,
        x0: f64,
        z0: f64,
        xdot0: f64,
    },
    Zero,
}

impl Field {
    /// `params` may set `u`, `x0`, `z0` and `xdot0` (defaults 1, 0, 0, 1).
    pub fn by_name(name: &str, params: &[(String, f64)]) -> Result<Field> {
        let mut p = [1.0, 0.0, 0.0, 1.0];
        for (k, v) in params {
            let i = match k.as_str() {
                "u" => 0,
                "x0" => 1,
                "z0" => 2,
                "xdot0" => 3,
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "unknown field parameter '{k}'"
                    )))
                }
            };
            p[i] = *v;
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "field parameters must be finite".into(),
            ));
        }
        let [u, x0, z0, xdot0] = p;
        let needs_speed = matches!(name, "counterexample1" | "counterexample2");
        if needs_speed && xdot0 == 0.0 {
            return Err(Error::InvalidInput("xdot0 must be nonzero".into()));
        }
        match name {
            "dz" | "dtheta" => Ok(Field::Coordinate {
                label: name.into(),
                index: 2,
            }),
            "counterexample1" => Ok(Field::Counterexample1 { u, x0, xdot0 }),
            "counterexample2" => Ok(Field::Counterexample2 { u, x0, z0, xdot0 }),
            "zero" => Ok(Field::Zero),
            _ => Err(Error::UnknownField(name.into())),
        }
    }

    /// Fails when the field cannot be evaluated on `model`'s chart.
    pub fn check<M: Model>(&self, model: &M) -> Result<()> {
        let n = model.dim();
        let need = match self {
            Field::Coordinate { index, .. } => index + 1,
            Field::Counterexample1 { .. } | Field::Counterexample2 { .. } => 3,
            Field::Zero => 0,
        };
        if n < need {
            return Err(Error::InvalidInput(format!(
                "field '{}' needs at least {need} coordinates, model '{}' has {n}",
                self.name(),
                model.name()
            )));
        }
        Ok(())
    }
}

impl VectorField for Field {
    fn name(&self) -> String {
        match self {
            Field::Coordinate { label, .. } => label.clone(),
            Field::Counterexample1 { .. } => "counterexample1".into(),
            Field::Counterexample2 { .. } => "counterexample2".into(),
            Field::Zero => "zero".into(),
        }
    }

    fn eval<S: Scalar>(&self, q: &[S]) -> Vec<S> {
        let mut w = vec![S::zero(); q.len()];
        match *self {
            Field::Coordinate { index, .. } => w[index] = S::one(),
            Field::Counterexample1 { u, x0, xdot0 } => {
                let f = (q[0] - x0) * (u / xdot0);
                w[0] = f;
                w[2] = f * q[1];
            }
            Field::Counterexample2 { u, x0, z0, xdot0 } => {
                let k = u / xdot0;
                w[0] = (q[0] - x0) * k;
                w[2] = (q[2] - z0) * k;
            }
            Field::Zero => {}
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Disk, Particle};

    #[test]
    fn names_and_params() {
        let f = Field::by_name(
            "counterexample2",
            &[("u".into(), 2.0), ("xdot0".into(), 4.0)],
        )
        .unwrap();
        assert_eq!(f.eval(&[3.0, 1.0, 5.0]), vec![1.5, 0.0, 2.5]);
        assert!(Field::by_name("counterexample1", &[("xdot0".into(), 0.0)]).is_err());
        assert!(Field::by_name("dw", &[]).is_err());
        assert!(Field::by_name("dz", &[("v".into(), 1.0)]).is_err());
        let f = Field::by_name("counterexample1", &[]).unwrap();
        assert_eq!(f.eval(&[2.0, 3.0, 0.0]), vec![2.0, 0.0, 6.0]);
    }

    #[test]
    fn coordinate_fields_fit_their_models() {
        let dz = Field::by_name("dz", &[]).unwrap();
        assert_eq!(dz.eval(&[0.0; 3]), vec![0.0, 0.0, 1.0]);
        let dth = Field::by_name("dtheta", &[]).unwrap();
        assert_eq!(dth.eval(&[0.0; 4]), vec![0.0, 0.0, 1.0, 0.0]);
        assert!(dth.check(&Disk::default()).is_ok());
        assert!(dz.check(&Particle).is_ok());
        assert!(dz.check(&crate::model::Euclidean { n: 2 }).is_err());
    }
}
