//! A named residual with a tolerance, the unit of every diagnostic report.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub note: Option<String>,
}

impl Check {
    /// Passes when `residual ≤ tol`. A NaN residual fails.
    pub fn new(name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tol,
            pass: residual <= tol,
            note: None,
        }
    }

    /// Compares `value` with `expected` in absolute terms.
    pub fn against(name: impl Into<String>, value: f64, expected: f64, tol: f64) -> Self {
        Self::new(name, (value - expected).abs(), tol)
            .with_note(format!("value {value:.12e}, expected {expected:.12e}"))
    }

    /// A yes/no condition with no numeric residual.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            residual: if ok { 0.0 } else { 1.0 },
            tol: 0.0,
            pass: ok,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: residual {:.3e} (tol {:.1e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.residual,
            self.tol
        )?;
        if let Some(note) = &self.note {
            write!(f, "; {note}")?;
        }
        Ok(())
    }
}
