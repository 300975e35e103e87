//! Monte Carlo against the truncated deterministic system, before gelation.

use thiserror::Error;

use crate::config::SimConfig;
use crate::mc::{SimError, Simulation};
use crate::moments::{solve_moments_from, Extrapolation, MomentError, MomentPair};
use crate::particles::{MassSpectrum, Site};
use crate::truncated::{integrate_truncated, TruncatedError, TruncatedState};

/// Default moment cap used to locate the gelation time.
pub const X_CAP: f64 = 1e8;

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("comparison time {t} is not before the gelation time {t_gel:.6}; the deterministic limit only holds before gelation")]
    PostGel { t: f64, t_gel: f64 },
    #[error("no comparison times given")]
    NoTimes,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Moments(#[from] MomentError),
    #[error(transparent)]
    Truncated(#[from] TruncatedError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationRow {
    pub t: f64,
    pub site: Site,
    /// `sum_{m<B} m |xi_{m,j}/N - c^B_{m,j}|`.
    pub deviation: f64,
    /// Overflow mass of the truncated system, an upper bound on its truncation error.
    pub c_b0: f64,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub t_gel_hat: f64,
    pub rows: Vec<DeviationRow>,
}

/// `sum_{m<B} m |xi_m/N - reference(m)|` over one site of a spectrum.
pub fn mass_weighted_deviation(
    spectrum: &MassSpectrum,
    site: Site,
    b: usize,
    reference: impl Fn(usize) -> f64,
) -> f64 {
    let n = spectrum.monomers as f64;
    let entries = spectrum.site(site);
    let mut k = 0;
    let mut total = 0.0;
    for m in 1..b {
        let count = match entries.get(k) {
            Some(&(mass, c)) if mass == m as u64 => {
                k += 1;
                c
            }
            _ => 0,
        };
        total += m as f64 * (count as f64 / n - reference(m)).abs();
    }
    total
}

/// Gelation time of the deterministic two-site system started from `config`.
pub fn gel_time(config: &SimConfig) -> Result<f64, MomentError> {
    let (x, y) = config.mass_fractions();
    let (_, est) = solve_moments_from(MomentPair { x, y }, config.kappa, X_CAP, 1e-10, Extrapolation::Reciprocal)?;
    Ok(est.t_gel_hat)
}

/// Run the particle system and the truncated ODE (cutoff `config.cutoff_b`)
/// on matched parameters and report per-site deviations at
/// `config.snapshot_times`.
pub fn compare(config: &SimConfig) -> Result<CompareReport, CompareError> {
    config.validate().map_err(SimError::from)?;
    let times = &config.snapshot_times;
    if times.is_empty() {
        return Err(CompareError::NoTimes);
    }
    let t_gel = gel_time(config)?;
    if let Some(&t) = times.iter().find(|&&t| t >= t_gel) {
        return Err(CompareError::PostGel { t, t_gel });
    }

    let (f0, f1) = config.mass_fractions();
    let init = TruncatedState::from_fractions(config.cutoff_b, f0, f1);
    let ode = integrate_truncated(&init, config.kappa, times, config.rtol, config.atol)?;

    let mut sim = Simulation::new(config)?;
    let mut rows = Vec::with_capacity(2 * times.len());
    for (state, &t) in ode.iter().zip(times) {
        sim.advance_to(t)?;
        let spectrum = sim.system().spectrum();
        for site in Site::BOTH {
            rows.push(DeviationRow {
                t,
                site,
                deviation: mass_weighted_deviation(&spectrum, site, config.cutoff_b, |m| {
                    state.concentration(site, m)
                }),
                c_b0: state.c_b0,
            });
        }
    }
    Ok(CompareReport {
        t_gel_hat: t_gel,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_post_gel_times() {
        let cfg = SimConfig::new(1000, 0, 0.0, 1.5, 1).with_snapshots(vec![0.5, 1.2]);
        assert!(matches!(compare(&cfg), Err(CompareError::PostGel { t, .. }) if t == 1.2));
    }

    #[test]
    fn deviation_of_exact_reference_is_zero() {
        let spectrum = MassSpectrum {
            monomers: 10,
            sites: [vec![(1, 4), (3, 2)], vec![]],
        };
        let reference = |m: usize| match m {
            1 => 0.4,
            3 => 0.2,
            _ => 0.0,
        };
        assert!(mass_weighted_deviation(&spectrum, Site::Zero, 8, reference).abs() < 1e-15);
        // everything above the cutoff is ignored
        assert!((mass_weighted_deviation(&spectrum, Site::Zero, 3, |_| 0.0) - 0.4).abs() < 1e-15);
    }
}
