//! Two-site Smoluchowski system truncated at mass `B`.
//!
//! Classes `1 <= i < B` are tracked per site as number concentrations per
//! monomer. Mass that coagulates to size `>= B` is collected in a single
//! overflow reservoir stored as mass at `(B, 0)`; the reservoir keeps absorbing
//! particles of both sites at rate `i * c_{B,0}`. The total mass
//! `sum i c_{i,j} + c_{B,0}` is an exact invariant of the vector field.

use thiserror::Error;

use crate::kernel::coagulation_sums;
use crate::ode::{Control, DormandPrince, OdeError, OdeSystem, Sampler};
use crate::particles::Site;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TruncatedError {
    #[error("cutoff B must be >= 2, got {0}")]
    Cutoff(usize),
    #[error("output times must be sorted and >= the initial time")]
    Times,
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),
}

/// Deterministic state `c_{i,j}` for `i < B` plus the overflow mass `c_{B,0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedState {
    pub b: usize,
    pub t: f64,
    /// `c[j][i]` for `1 <= i < B`; index 0 is unused and stays 0.
    pub c: [Vec<f64>; 2],
    pub c_b0: f64,
}

impl TruncatedState {
    pub fn zeros(b: usize) -> Self {
        Self {
            b,
            t: 0.0,
            c: [vec![0.0; b], vec![0.0; b]],
            c_b0: 0.0,
        }
    }

    /// Monomers only, with mass fractions `(1/(1+lambda), lambda/(1+lambda))`.
    pub fn monodisperse(b: usize, lambda: f64) -> Self {
        if lambda.is_infinite() {
            Self::from_fractions(b, 0.0, 1.0)
        } else {
            Self::from_fractions(b, 1.0 / (1.0 + lambda), lambda / (1.0 + lambda))
        }
    }

    /// Monomers only, with the given per-site monomer fractions.
    pub fn from_fractions(b: usize, site0: f64, site1: f64) -> Self {
        let mut s = Self::zeros(b);
        if b > 1 {
            s.c[0][1] = site0;
            s.c[1][1] = site1;
        } else {
            s.c_b0 = site0 + site1;
        }
        s
    }

    pub fn concentration(&self, site: Site, i: usize) -> f64 {
        self.c[site.index()].get(i).copied().unwrap_or(0.0)
    }

    /// `sum_{i<B} i^2 c_{i,j}` per site.
    pub fn sigma(&self) -> (f64, f64) {
        let s = |c: &[f64]| c.iter().enumerate().map(|(i, v)| (i * i) as f64 * v).sum();
        (s(&self.c[0]), s(&self.c[1]))
    }

    /// `sum_{i<B} i c_{i,j}` per site.
    pub fn per_site_mass(&self) -> (f64, f64) {
        let s = |c: &[f64]| c.iter().enumerate().map(|(i, v)| i as f64 * v).sum();
        (s(&self.c[0]), s(&self.c[1]))
    }

    pub fn total_mass(&self) -> f64 {
        let (m0, m1) = self.per_site_mass();
        m0 + m1 + self.c_b0
    }

    fn to_vec(&self) -> Vec<f64> {
        let b = self.b;
        let mut y = Vec::with_capacity(2 * (b - 1) + 1);
        y.extend_from_slice(&self.c[0][1..b]);
        y.extend_from_slice(&self.c[1][1..b]);
        y.push(self.c_b0);
        y
    }

    fn from_slice(b: usize, t: f64, y: &[f64]) -> Self {
        let mut s = Self::zeros(b);
        s.t = t;
        s.c[0][1..b].copy_from_slice(&y[..b - 1]);
        s.c[1][1..b].copy_from_slice(&y[b - 1..2 * (b - 1)]);
        s.c_b0 = y[2 * (b - 1)];
        s
    }
}

/// The truncated vector field in flat layout `[c_{.,0}, c_{.,1}, c_{B,0}]`.
#[derive(Debug)]
pub struct TruncatedSystem {
    b: usize,
    kappa: f64,
    a: [Vec<f64>; 2],
    gain: [Vec<f64>; 2],
    suffix: Vec<f64>,
}

impl TruncatedSystem {
    pub fn new(b: usize, kappa: f64) -> Self {
        Self {
            b,
            kappa,
            a: [vec![0.0; b], vec![0.0; b]],
            gain: [vec![0.0; b], vec![0.0; b]],
            suffix: vec![0.0; b + 1],
        }
    }
}

impl OdeSystem for TruncatedSystem {
    fn dim(&self) -> usize {
        2 * (self.b - 1) + 1
    }

    fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let b = self.b;
        let w = b - 1;
        let c_b0 = y[2 * w];
        let mut overflow = 0.0;
        let mut mass = [0.0; 2];
        for j in 0..2 {
            let c = &y[j * w..(j + 1) * w];
            let a = &mut self.a[j];
            for i in 1..b {
                a[i] = i as f64 * c[i - 1];
            }
            overflow += coagulation_sums(a, &mut self.gain[j], &mut self.suffix);
            mass[j] = a.iter().sum();
            // reservoir sweeps up particles at rate i * c_{B,0}
            overflow += c_b0 * a.iter().enumerate().map(|(i, v)| i as f64 * v).sum::<f64>();
        }
        for j in 0..2 {
            let (c, other) = (&y[j * w..(j + 1) * w], &y[(1 - j) * w..(2 - j) * w]);
            let out = &mut dy[j * w..(j + 1) * w];
            let sink = mass[j] + c_b0;
            for i in 1..b {
                let ci = c[i - 1];
                out[i - 1] = self.gain[j][i] - i as f64 * ci * sink
                    + self.kappa * (other[i - 1] - ci);
            }
        }
        dy[2 * w] = overflow;
    }
}

/// Time derivative of `state` as a state-shaped value.
pub fn truncated_rhs(state: &TruncatedState, kappa: f64) -> TruncatedState {
    let mut sys = TruncatedSystem::new(state.b, kappa);
    let y = state.to_vec();
    let mut dy = vec![0.0; y.len()];
    sys.rhs(state.t, &y, &mut dy);
    TruncatedState::from_slice(state.b, state.t, &dy)
}

/// Integrate from `init` and return the state at each of `times` (sorted,
/// each `>= init.t`, last one is the horizon).
pub fn integrate_truncated(
    init: &TruncatedState,
    kappa: f64,
    times: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Vec<TruncatedState>, TruncatedError> {
    let b = init.b;
    if b < 2 {
        return Err(TruncatedError::Cutoff(b));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < init.t) {
        return Err(TruncatedError::Times);
    }
    if times.is_empty() {
        return Ok(Vec::new());
    }
    let mut sys = TruncatedSystem::new(b, kappa);
    let y0 = init.to_vec();
    let mut sampler = Sampler::new(times);
    sampler.observe_initial(init.t, &y0);
    let solver = DormandPrince::new(rtol, atol).nonnegative(true);
    solver.solve_through(&mut sys, init.t, &y0, times, |step| {
        sampler.observe(step);
        Control::Continue
    })?;
    Ok(sampler
        .samples
        .into_iter()
        .map(|(t, y)| TruncatedState::from_slice(b, t, &y))
        .collect())
}

/// Exact per-site mass of finite particles for the untruncated system:
/// `1/2 (1 + (1-lambda)/(1+lambda) e^{-2 kappa t})` at site 0.
pub fn zeta_star_exact(t: f64, lambda: f64, kappa: f64, site: Site) -> f64 {
    let asym = if lambda.is_infinite() {
        -1.0
    } else {
        (1.0 - lambda) / (1.0 + lambda)
    };
    let z0 = 0.5 * (1.0 + asym * (-2.0 * kappa * t).exp());
    match site {
        Site::Zero => z0,
        Site::One => 1.0 - z0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_two_monomer_decay() {
        let s = TruncatedState::monodisperse(2, 0.0);
        let d = truncated_rhs(&s, 0.0);
        assert_eq!(d.c[0][1], -1.0);
        assert_eq!(d.c_b0, 1.0);
        assert_eq!(d.c[1][1], 0.0);
    }

    #[test]
    fn derivative_conserves_mass() {
        for kappa in [0.0, 0.3, 2.0] {
            let mut s = TruncatedState::monodisperse(16, 0.4);
            for i in 1..16 {
                s.c[0][i] = 0.02 / i as f64;
                s.c[1][i] = 0.01 / (i * i) as f64;
            }
            s.c_b0 = 0.1;
            let d = truncated_rhs(&s, kappa);
            assert!(d.total_mass().abs() < 1e-15, "kappa {kappa}: {}", d.total_mass());
        }
    }

    #[test]
    fn symmetric_state_has_symmetric_derivative() {
        let mut s = TruncatedState::monodisperse(32, 1.0);
        s.c[0][3] = 0.05;
        s.c[1][3] = 0.05;
        let d = truncated_rhs(&s, 0.7);
        for i in 1..32 {
            assert_eq!(d.c[0][i], d.c[1][i]);
        }
    }

    #[test]
    fn sigma_values() {
        assert_eq!(TruncatedState::monodisperse(8, 0.0).sigma(), (1.0, 0.0));
        assert_eq!(TruncatedState::monodisperse(8, 1.0).sigma(), (0.5, 0.5));
        let mut s = TruncatedState::zeros(8);
        s.c[0][2] = 0.5;
        assert_eq!(s.sigma(), (2.0, 0.0));
    }

    #[test]
    fn zeta_star_values() {
        assert_eq!(zeta_star_exact(0.0, 0.0, 0.3, Site::Zero), 1.0);
        assert_eq!(zeta_star_exact(5.0, 1.0, 0.3, Site::One), 0.5);
        let z1 = zeta_star_exact(1.0, 0.0, 0.29, Site::One);
        assert!((z1 - 0.5 * (1.0 - (-0.58f64).exp())).abs() < 1e-15);
        assert!((z1 - 0.220050816717).abs() < 1e-11);
        assert!((zeta_star_exact(200.0, 0.0, 0.29, Site::Zero) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_unsorted_times() {
        let s = TruncatedState::monodisperse(4, 0.0);
        assert_eq!(
            integrate_truncated(&s, 0.0, &[1.0, 0.5], 1e-8, 1e-12),
            Err(TruncatedError::Times)
        );
    }
}
