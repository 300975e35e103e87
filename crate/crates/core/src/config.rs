//! Run parameters shared by every engine in the crate.

use thiserror::Error;

/// Largest supported monomer count; monomer ids are stored as `u32`.
pub const MAX_MONOMERS: u64 = u32::MAX as u64 - 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("need at least two monomers (n0 + n1 = {0})")]
    TooFewMonomers(u64),
    #[error("too many monomers: {0} exceeds {MAX_MONOMERS}")]
    TooManyMonomers(u64),
    #[error("kappa must be finite and >= 0, got {0}")]
    Kappa(f64),
    #[error("t_end must be finite and >= 0, got {0}")]
    Horizon(f64),
    #[error("snapshot times must be strictly increasing and within [0, t_end]: {0}")]
    Snapshots(String),
    #[error("gel threshold factor must be > 0, got {0}")]
    ThresholdFactor(f64),
    #[error("cutoff B must be >= 2, got {0}")]
    Cutoff(usize),
    #[error("tolerances must be positive, got rtol = {rtol}, atol = {atol}")]
    Tolerance { rtol: f64, atol: f64 },
}

/// All parameters of a run. Immutable once validated; cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n0: u64,
    pub n1: u64,
    /// Migration rate per particle in rescaled time.
    pub kappa: f64,
    pub t_end: f64,
    pub seed: u64,
    pub snapshot_times: Vec<f64>,
    pub gel_threshold_factor: f64,
    pub cutoff_b: usize,
    pub rtol: f64,
    pub atol: f64,
    /// Hard cap on Monte Carlo events; `None` selects `64 N (1 + kappa t_end)`.
    pub event_cap: Option<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n0: 1000,
            n1: 0,
            kappa: 0.0,
            t_end: 1.0,
            seed: 0,
            snapshot_times: Vec::new(),
            gel_threshold_factor: 2.0,
            cutoff_b: 256,
            rtol: 1e-8,
            atol: 1e-12,
            event_cap: None,
        }
    }
}

impl SimConfig {
    pub fn new(n0: u64, n1: u64, kappa: f64, t_end: f64, seed: u64) -> Self {
        Self {
            n0,
            n1,
            kappa,
            t_end,
            seed,
            ..Self::default()
        }
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    /// `n` evenly spaced snapshot times on `(0, t_end]`.
    pub fn with_uniform_snapshots(self, n: usize) -> Self {
        let t_end = self.t_end;
        let times = (1..=n).map(|k| t_end * k as f64 / n as f64).collect();
        self.with_snapshots(times)
    }

    pub fn total(&self) -> u64 {
        self.n0 + self.n1
    }

    /// Initial mass ratio N1/N0 (infinite when site 0 starts empty).
    pub fn lambda(&self) -> f64 {
        if self.n0 == 0 {
            f64::INFINITY
        } else {
            self.n1 as f64 / self.n0 as f64
        }
    }

    /// Initial mass fractions `(N0/N, N1/N)`.
    pub fn mass_fractions(&self) -> (f64, f64) {
        let n = self.total() as f64;
        (self.n0 as f64 / n, self.n1 as f64 / n)
    }

    /// Largest-particle threshold `factor * N^(2/3)`, rounded to the nearest integer.
    pub fn gel_threshold(&self) -> u64 {
        gel_threshold(self.total(), self.gel_threshold_factor)
    }

    pub fn event_budget(&self) -> u64 {
        self.event_cap.unwrap_or_else(|| {
            let n = self.total() as f64;
            (64.0 * n * (1.0 + self.kappa * self.t_end)).ceil() as u64
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.total();
        if n < 2 {
            return Err(ConfigError::TooFewMonomers(n));
        }
        if n > MAX_MONOMERS {
            return Err(ConfigError::TooManyMonomers(n));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(ConfigError::Kappa(self.kappa));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(ConfigError::Horizon(self.t_end));
        }
        let mut prev = f64::NEG_INFINITY;
        for &t in &self.snapshot_times {
            if !(t.is_finite() && t >= 0.0 && t > prev && t <= self.t_end) {
                return Err(ConfigError::Snapshots(format!(
                    "{t} after {prev} with t_end = {}",
                    self.t_end
                )));
            }
            prev = t;
        }
        if !(self.gel_threshold_factor.is_finite() && self.gel_threshold_factor > 0.0) {
            return Err(ConfigError::ThresholdFactor(self.gel_threshold_factor));
        }
        if self.cutoff_b < 2 {
            return Err(ConfigError::Cutoff(self.cutoff_b));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(ConfigError::Tolerance {
                rtol: self.rtol,
                atol: self.atol,
            });
        }
        Ok(())
    }
}

/// `factor * n^(2/3)` rounded to the nearest integer, never below 1.
pub fn gel_threshold(n: u64, factor: f64) -> u64 {
    let raw = factor * (n as f64).powf(2.0 / 3.0);
    (raw.round() as u64).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_at_one_billion() {
        assert_eq!(gel_threshold(1_000_000_000, 2.0), 2_000_000);
        assert_eq!(gel_threshold(10_000_000, 2.0), 92_832);
    }

    #[test]
    fn rejects_single_monomer() {
        let cfg = SimConfig::new(1, 0, 0.0, 1.0, 0);
        assert_eq!(cfg.validate(), Err(ConfigError::TooFewMonomers(1)));
    }

    #[test]
    fn rejects_unsorted_snapshots() {
        let cfg = SimConfig::new(10, 0, 0.0, 1.0, 0).with_snapshots(vec![0.5, 0.5]);
        assert!(matches!(cfg.validate(), Err(ConfigError::Snapshots(_))));
        let cfg = SimConfig::new(10, 0, 0.0, 1.0, 0).with_snapshots(vec![0.5, 1.5]);
        assert!(matches!(cfg.validate(), Err(ConfigError::Snapshots(_))));
    }

    #[test]
    fn lambda_and_budget() {
        let cfg = SimConfig::new(1_000_000, 500_000, 0.5, 2.0, 1);
        assert_eq!(cfg.lambda(), 0.5);
        assert_eq!(cfg.event_budget(), 64 * 1_500_000 * 2);
        assert!(cfg.validate().is_ok());
    }
}
