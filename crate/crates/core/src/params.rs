//! Physical ensemble parameters.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Parameters of a planar weight or ensemble.
///
/// `n` is both the weight scale and the ensemble size. `s_crit`, when set,
/// ties the charge location to the critical edge scaling a = 1 + S/(2√N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub a: f64,
    pub c: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "one")]
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, rename = "S_crit", skip_serializing_if = "Option::is_none")]
    pub s_crit: Option<f64>,
}

fn one() -> usize {
    1
}

impl EnsembleParams {
    pub fn new(a: f64, c: f64, n: usize) -> Result<Self> {
        let p = Self { a, c, n, d: 1, tau: None, s_crit: None };
        p.validate()?;
        Ok(p)
    }

    /// Point charge at the critical location a = 1 + S/(2√N).
    pub fn critical(c: f64, n: usize, s: f64) -> Result<Self> {
        let a = 1.0 + s / (2.0 * (n as f64).sqrt());
        let p = Self { a, c, n, d: 1, tau: None, s_crit: Some(s) };
        p.validate()?;
        Ok(p)
    }

    pub fn elliptic(tau: f64, n: usize) -> Result<Self> {
        let p = Self { a: 0.0, c: 0.0, n, d: 1, tau: Some(tau), s_crit: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_d(mut self, d: usize) -> Result<Self> {
        self.d = d;
        self.validate()?;
        Ok(self)
    }

    pub fn with_c(mut self, c: f64) -> Result<Self> {
        self.c = c;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > -1.0) || !self.c.is_finite() {
            return Err(Error::InvalidParam(format!("c must exceed -1, got {}", self.c)));
        }
        if !(self.a >= 0.0) || !self.a.is_finite() {
            return Err(Error::InvalidParam(format!("a must be finite and >= 0, got {}", self.a)));
        }
        if self.n == 0 {
            return Err(Error::InvalidParam("N must be positive".into()));
        }
        if self.d == 0 {
            return Err(Error::InvalidParam("d must be positive".into()));
        }
        if let Some(t) = self.tau {
            if !(0.0..1.0).contains(&t) {
                return Err(Error::InvalidParam(format!("tau must lie in [0,1), got {t}")));
            }
        }
        if let Some(s) = self.s_crit {
            let want = 1.0 + s / (2.0 * (self.n as f64).sqrt());
            if (self.a - want).abs() > 1e-14 * want.abs().max(1.0) {
                return Err(Error::InvalidParam(format!("S_crit = {s} requires a = {want}, got {}", self.a)));
            }
        }
        Ok(())
    }

    pub fn sqrt_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_invariant() {
        let p = EnsembleParams::critical(0.0, 100, 1.0).unwrap();
        assert!((p.a - 1.05).abs() < 1e-15);
        let mut q = p.clone();
        q.a = 1.0;
        assert!(q.validate().is_err());
    }

    #[test]
    fn rejects_bad_charge() {
        assert!(EnsembleParams::new(0.5, -1.0, 4).is_err());
        assert!(EnsembleParams::new(0.5, -0.99, 4).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let p = EnsembleParams::new(0.5, 1.0, 8).unwrap().with_d(2).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"N\":8"));
        let q: EnsembleParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
