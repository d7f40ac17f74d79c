use crate::error::{Error, Result};
use crate::matrix::DEFAULT_EPS;

/// How exact ties between candidates are resolved. Only one policy exists;
/// the field is kept in the config so results echo it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

/// Selection knobs for one pruning run.
///
/// `cap_m` and `beta` use `None` for "unbounded".
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PruneConfig {
    /// Keep ratio in (0, 1].
    pub r: f64,
    /// Weight of the relevance term in the greedy score.
    pub alpha: f64,
    /// Relevance threshold for the candidate pre-filter; `<= 0` disables it.
    pub tau: f64,
    /// Candidate cap `M`.
    pub cap_m: Option<usize>,
    /// Candidate pool limit as a multiple of the remaining budget.
    pub beta: Option<f64>,
    pub eps: f64,
    pub tie_break: TieBreak,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            r: 0.15,
            alpha: 1.0,
            tau: 0.0,
            cap_m: None,
            beta: Some(3.0),
            eps: DEFAULT_EPS,
            tie_break: TieBreak::LowestIndex,
        }
    }
}

impl PruneConfig {
    pub fn new(r: f64) -> Self {
        Self { r, ..Self::default() }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_cap_m(mut self, cap_m: Option<usize>) -> Self {
        self.cap_m = cap_m;
        self
    }

    pub fn with_beta(mut self, beta: Option<f64>) -> Self {
        self.beta = beta;
        self
    }

    /// Drops both the `M` and the `beta` caps.
    pub fn unbounded(self) -> Self {
        self.with_cap_m(None).with_beta(None)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(Error::Config("r must lie in (0, 1]"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config("alpha must be finite and >= 0"));
        }
        if !(-1.0..=1.0).contains(&self.tau) {
            return Err(Error::Config("tau must lie in [-1, 1]"));
        }
        if self.cap_m == Some(0) {
            return Err(Error::Config("cap_m must be positive"));
        }
        if let Some(beta) = self.beta {
            if !(beta >= 1.0 && beta.is_finite()) {
                return Err(Error::Config("beta must be finite and >= 1"));
            }
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config("eps must be positive and finite"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = PruneConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.tau, 0.0);
        assert_eq!(cfg.beta, Some(3.0));
        assert_eq!(cfg.cap_m, None);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(PruneConfig::new(0.0).validate().is_err());
        assert!(PruneConfig::new(1.5).validate().is_err());
        assert!(PruneConfig::new(1.0).validate().is_ok());
        assert!(PruneConfig::new(0.5).with_alpha(-1.0).validate().is_err());
        assert!(PruneConfig::new(0.5).with_tau(1.1).validate().is_err());
        assert!(PruneConfig::new(0.5).with_beta(Some(0.5)).validate().is_err());
        assert!(PruneConfig::new(0.5).with_cap_m(Some(0)).validate().is_err());
        assert!(PruneConfig::new(f64::NAN).validate().is_err());
    }
}
