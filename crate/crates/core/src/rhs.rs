//! Right-hand sides `f(t, u, v)` of the boundary value problem.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `f(t, u, v)` with `u = x(t)` and `v = D^(α-1) x(t)`.
///
/// Implementations must be reentrant; solves on a shared problem may run on
/// several threads.
pub trait RightHandSide: Send + Sync {
    fn eval(&self, t: f64, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;

    /// Short label for reports.
    fn describe(&self) -> String {
        "custom".to_string()
    }
}

impl<F> RightHandSide for F
where
    F: Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync,
{
    fn eval(&self, t: f64, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self(t, u, v)
    }
}

/// `f ≡ 0`
#[derive(Debug, Clone, Copy)]
pub struct ZeroRhs {
    pub dim: usize,
}

impl RightHandSide for ZeroRhs {
    fn eval(&self, _t: f64, _u: &DVector<f64>, _v: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.dim)
    }

    fn describe(&self) -> String {
        "zero".into()
    }
}

/// Scalar time profiles for the forcing term of [`AffineRhs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Zero,
    One,
    /// `t`
    Linear,
    /// `√t`
    Sqrt,
    /// `1 − 2t`
    OneMinusTwoT,
    /// `sin(πt)`
    Sine,
}

impl Profile {
    pub const NAMES: [&'static str; 6] = ["zero", "one", "t", "sqrt_t", "one_minus_two_t", "sin_pi_t"];

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "zero" => Self::Zero,
            "one" => Self::One,
            "t" => Self::Linear,
            "sqrt_t" => Self::Sqrt,
            "one_minus_two_t" => Self::OneMinusTwoT,
            "sin_pi_t" => Self::Sine,
            other => {
                return Err(Error::Input(format!(
                    "unknown profile {other:?}; expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::One => 1.0,
            Self::Linear => t,
            Self::Sqrt => t.sqrt(),
            Self::OneMinusTwoT => 1.0 - 2.0 * t,
            Self::Sine => (std::f64::consts::PI * t).sin(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::One => "one",
            Self::Linear => "t",
            Self::Sqrt => "sqrt_t",
            Self::OneMinusTwoT => "one_minus_two_t",
            Self::Sine => "sin_pi_t",
        }
    }
}

/// `f(t, u, v) = C u + D v + g(t)` with `g(t) = amplitude · profile(t)`.
#[derive(Clone, PartialEq)]
pub struct AffineRhs {
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub amplitude: DVector<f64>,
    pub profile: Profile,
}

impl AffineRhs {
    pub fn new(
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        amplitude: DVector<f64>,
        profile: Profile,
    ) -> Result<Self> {
        let n = amplitude.len();
        if c.shape() != (n, n) || d.shape() != (n, n) {
            return Err(Error::Input(format!(
                "affine rhs needs {n}x{n} C and D, got {:?} and {:?}",
                c.shape(),
                d.shape()
            )));
        }
        Ok(Self {
            c,
            d,
            amplitude,
            profile,
        })
    }

    /// `f = g(t)`, independent of the state.
    pub fn forcing(amplitude: DVector<f64>, profile: Profile) -> Self {
        let n = amplitude.len();
        Self {
            c: DMatrix::zeros(n, n),
            d: DMatrix::zeros(n, n),
            amplitude,
            profile,
        }
    }
}

impl fmt::Debug for AffineRhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl RightHandSide for AffineRhs {
    fn eval(&self, t: f64, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        &self.c * u + &self.d * v + &self.amplitude * self.profile.eval(t)
    }

    fn describe(&self) -> String {
        format!(
            "affine: C u + D v + g(t), g = amplitude * {} (|C| = {:.3e}, |D| = {:.3e})",
            self.profile.name(),
            self.c.norm(),
            self.d.norm()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_with_zero_parts_is_zero() {
        let f = AffineRhs::forcing(DVector::zeros(2), Profile::Zero);
        let u = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(f.eval(0.3, &u, &u).norm(), 0.0);
    }

    #[test]
    fn affine_evaluates_all_terms() {
        let f = AffineRhs::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2) * 2.0,
            DVector::from_vec(vec![1.0, 0.0]),
            Profile::Linear,
        )
        .unwrap();
        let out = f.eval(0.5, &DVector::from_vec(vec![1.0, 1.0]), &DVector::from_vec(vec![0.0, 1.0]));
        assert_eq!(out, DVector::from_vec(vec![1.5, 3.0]));
    }

    #[test]
    fn profile_names_round_trip() {
        for name in Profile::NAMES {
            assert_eq!(Profile::parse(name).unwrap().name(), name);
        }
        assert!(Profile::parse("cosh").is_err());
    }

    #[test]
    fn closures_are_right_hand_sides() {
        let f = |_t: f64, u: &DVector<f64>, _v: &DVector<f64>| u * 2.0;
        let u = DVector::from_vec(vec![1.0]);
        assert_eq!(RightHandSide::eval(&f, 0.0, &u, &u)[0], 2.0);
    }
}
