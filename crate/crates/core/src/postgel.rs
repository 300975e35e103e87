//! Sampler of the post-gelation limit model.
//!
//! Finite particles are described by mass-flow coordinates `zeta_{m,j} = m c_{m,j}`
//! for `m < B`. Each site carries a gel mass `zeta_inf_j` that absorbs finite
//! particles at rate `m zeta_inf_j` and therefore grows like `zeta_inf_j sigma_j`.
//! Two independent renewal clocks with exponential waiting times of mean
//! `1/kappa` move the whole gel of their site to the other site, where it merges
//! with the gel already there. Between clock rings the dynamics are a
//! deterministic ODE.
//!
//! Gelation is seeded by the truncation: mass that coagulates to size `>= B`
//! is routed into the gel of the site where it formed. Before the gelation time
//! this flux is negligible for large `B`; after it, the seeded gel takes over
//! through the `zeta_inf sigma` growth term.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Exp1;
use thiserror::Error;

use crate::kernel::coagulation_sums;
use crate::ode::{Control, DormandPrince, OdeError, OdeSystem};
use crate::particles::Site;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitError {
    #[error("cutoff B must be >= 2, got {0}")]
    Cutoff(usize),
    #[error("invalid parameters: {0}")]
    Parameters(String),
    #[error("jump budget of {0} exhausted")]
    JumpBudget(u64),
    #[error("integration failed at t = {t}: {source}")]
    Integration {
        t: f64,
        #[source]
        source: OdeError,
    },
}

/// Finite mass-flow spectrum plus gel masses and renewal clocks.
#[derive(Debug, Clone)]
pub struct LimitState {
    pub b: usize,
    pub t: f64,
    /// `zeta[j][m]` for `1 <= m < B`; index 0 unused.
    pub zeta: [Vec<f64>; 2],
    pub zeta_inf: [f64; 2],
    /// Absolute time of the next ring of each site's clock.
    pub next_jump: [f64; 2],
    rng: ChaCha12Rng,
}

/// Time derivative of the continuous part of a [`LimitState`].
#[derive(Debug, Clone, PartialEq)]
pub struct LimitRates {
    pub zeta: [Vec<f64>; 2],
    pub zeta_inf: [f64; 2],
}

impl LimitRates {
    pub fn total_mass(&self) -> f64 {
        self.zeta.iter().flat_map(|z| z.iter()).sum::<f64>() + self.zeta_inf[0] + self.zeta_inf[1]
    }
}

impl LimitState {
    /// Monodisperse start with clocks drawn from `seed` at rate `kappa`.
    pub fn monodisperse(b: usize, lambda: f64, kappa: f64, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let next_jump = [draw_wait(&mut rng, kappa), draw_wait(&mut rng, kappa)];
        let (f0, f1) = if lambda.is_infinite() {
            (0.0, 1.0)
        } else {
            (1.0 / (1.0 + lambda), lambda / (1.0 + lambda))
        };
        let mut zeta = [vec![0.0; b], vec![0.0; b]];
        if b > 1 {
            zeta[0][1] = f0;
            zeta[1][1] = f1;
        }
        Self {
            b,
            t: 0.0,
            zeta,
            zeta_inf: [0.0; 2],
            next_jump,
            rng,
        }
    }

    /// `sum_{m<B} m zeta_{m,j}`.
    pub fn sigma(&self, site: Site) -> f64 {
        moment(&self.zeta[site.index()], 1)
    }

    /// `sum_{m<B} m^2 zeta_{m,j}`.
    pub fn rho(&self, site: Site) -> f64 {
        moment(&self.zeta[site.index()], 2)
    }

    pub fn finite_mass(&self, site: Site) -> f64 {
        self.zeta[site.index()].iter().sum()
    }

    pub fn total_mass(&self) -> f64 {
        Site::BOTH
            .iter()
            .map(|&s| self.finite_mass(s) + self.zeta_inf[s.index()])
            .sum()
    }

    /// Move the gel of `site` to the other site and restart that site's clock.
    /// Returns the transported mass.
    pub fn gel_jump(&mut self, site: Site, kappa: f64) -> f64 {
        let (j, k) = (site.index(), site.other().index());
        let moved = self.zeta_inf[j];
        self.zeta_inf[k] += moved;
        self.zeta_inf[j] = 0.0;
        self.next_jump[j] = self.t + draw_wait(&mut self.rng, kappa);
        moved
    }

    fn to_vec(&self) -> Vec<f64> {
        let w = self.b - 1;
        let mut y = Vec::with_capacity(2 * w + 2);
        y.extend_from_slice(&self.zeta[0][1..]);
        y.extend_from_slice(&self.zeta[1][1..]);
        y.extend_from_slice(&self.zeta_inf);
        y
    }

    fn load(&mut self, t: f64, y: &[f64]) {
        let w = self.b - 1;
        self.t = t;
        self.zeta[0][1..].copy_from_slice(&y[..w]);
        self.zeta[1][1..].copy_from_slice(&y[w..2 * w]);
        self.zeta_inf = [y[2 * w], y[2 * w + 1]];
    }
}

fn moment(z: &[f64], power: i32) -> f64 {
    z.iter().enumerate().map(|(m, v)| (m as f64).powi(power) * v).sum()
}

fn draw_wait(rng: &mut ChaCha12Rng, kappa: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    if kappa > 0.0 {
        e / kappa
    } else {
        f64::INFINITY
    }
}

/// The deterministic vector field between clock rings, flat layout
/// `[zeta_{.,0}, zeta_{.,1}, zeta_inf_0, zeta_inf_1]`.
#[derive(Debug)]
pub struct LimitSystem {
    b: usize,
    kappa: f64,
    a: [Vec<f64>; 2],
    gain: [Vec<f64>; 2],
    suffix: Vec<f64>,
}

impl LimitSystem {
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

impl OdeSystem for LimitSystem {
    fn dim(&self) -> usize {
        2 * (self.b - 1) + 2
    }

    fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let b = self.b;
        let w = b - 1;
        let mut overflow = [0.0; 2];
        let mut count = [0.0; 2];
        let mut sigma = [0.0; 2];
        for j in 0..2 {
            let a = &mut self.a[j];
            a[1..].copy_from_slice(&y[j * w..(j + 1) * w]);
            overflow[j] = coagulation_sums(a, &mut self.gain[j], &mut self.suffix);
            count[j] = a.iter().sum();
            sigma[j] = moment(a, 1);
        }
        for j in 0..2 {
            let gel = y[2 * w + j];
            let sink = gel + count[j];
            let (z, other) = (&self.a[j], &self.a[1 - j]);
            let out = &mut dy[j * w..(j + 1) * w];
            for m in 1..b {
                let mf = m as f64;
                out[m - 1] = mf * self.gain[j][m] - mf * z[m] * sink
                    + self.kappa * (other[m] - z[m]);
            }
            dy[2 * w + j] = gel * sigma[j] + overflow[j];
        }
    }
}

/// Derivative of the continuous part of `state`.
pub fn limit_rhs(state: &LimitState, kappa: f64) -> LimitRates {
    let mut sys = LimitSystem::new(state.b, kappa);
    let y = state.to_vec();
    let mut dy = vec![0.0; y.len()];
    sys.rhs(state.t, &y, &mut dy);
    let w = state.b - 1;
    let lift = |s: &[f64]| {
        let mut v = vec![0.0; state.b];
        v[1..].copy_from_slice(s);
        v
    };
    LimitRates {
        zeta: [lift(&dy[..w]), lift(&dy[w..2 * w])],
        zeta_inf: [dy[2 * w], dy[2 * w + 1]],
    }
}

#[derive(Debug, Clone)]
pub struct LimitConfig {
    pub lambda: f64,
    pub kappa: f64,
    pub b: usize,
    pub t_end: f64,
    pub seed: u64,
    pub rtol: f64,
    pub atol: f64,
    /// Sorted output times within `[0, t_end]`.
    pub output_times: Vec<f64>,
    pub jump_cap: u64,
}

impl LimitConfig {
    pub fn new(lambda: f64, kappa: f64, b: usize, t_end: f64, seed: u64) -> Self {
        Self {
            lambda,
            kappa,
            b,
            t_end,
            seed,
            rtol: 1e-8,
            atol: 1e-12,
            output_times: Vec::new(),
            jump_cap: 1_000_000,
        }
    }

    /// Output every `dt` from 0 to `t_end` inclusive.
    pub fn with_output_step(mut self, dt: f64) -> Self {
        let n = (self.t_end / dt).round() as usize;
        self.output_times = (0..=n).map(|k| (k as f64 * dt).min(self.t_end)).collect();
        self.output_times.dedup();
        self
    }
}

/// Summary of the limit state at one output time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitSample {
    pub t: f64,
    pub zeta_inf: [f64; 2],
    pub sigma: [f64; 2],
    pub rho: [f64; 2],
    pub finite_mass: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    pub t: f64,
    pub from: Site,
    /// Gel mass carried over (zero for a ring before gelation).
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct LimitRun {
    pub samples: Vec<LimitSample>,
    pub jumps: Vec<JumpRecord>,
    pub final_state: LimitState,
}

fn sample(state: &LimitState) -> LimitSample {
    let per_site = |f: &dyn Fn(Site) -> f64| [f(Site::Zero), f(Site::One)];
    LimitSample {
        t: state.t,
        zeta_inf: state.zeta_inf,
        sigma: per_site(&|s| state.sigma(s)),
        rho: per_site(&|s| state.rho(s)),
        finite_mass: per_site(&|s| state.finite_mass(s)),
    }
}

/// Hybrid simulation: integrate between clock rings, apply gel jumps at rings.
pub fn simulate_limit(config: &LimitConfig) -> Result<LimitRun, LimitError> {
    let LimitConfig {
        lambda,
        kappa,
        b,
        t_end,
        ..
    } = *config;
    if b < 2 {
        return Err(LimitError::Cutoff(b));
    }
    if !(kappa >= 0.0 && kappa.is_finite() && t_end >= 0.0 && t_end.is_finite() && lambda >= 0.0) {
        return Err(LimitError::Parameters(format!(
            "lambda = {lambda}, kappa = {kappa}, t_end = {t_end}"
        )));
    }
    let times = &config.output_times;
    if times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|&t| t < 0.0 || t > t_end) {
        return Err(LimitError::Parameters("output times must be increasing within [0, t_end]".into()));
    }

    let mut state = LimitState::monodisperse(b, lambda, kappa, config.seed);
    let mut sys = LimitSystem::new(b, kappa);
    let solver = DormandPrince::new(config.rtol, config.atol).nonnegative(true);
    let mut samples = Vec::with_capacity(times.len());
    let mut jumps = Vec::new();
    let mut next_out = 0;

    loop {
        while next_out < times.len() && times[next_out] <= state.t {
            let mut s = sample(&state);
            s.t = times[next_out];
            samples.push(s);
            next_out += 1;
        }
        let ring = state.next_jump[0].min(state.next_jump[1]);
        let seg_end = ring.min(t_end);
        if seg_end > state.t {
            let y0 = state.to_vec();
            let mut probe = state.clone();
            // output times inside the segment; a time equal to a ring is
            // sampled after the jump, at the start of the next segment
            let last = seg_end == t_end;
            let inside = |t: f64| t > state.t && (t < seg_end || (last && t <= seg_end));
            let mut stops: Vec<f64> = times[next_out..].iter().copied().take_while(|&t| inside(t)).collect();
            if stops.last() != Some(&seg_end) {
                stops.push(seg_end);
            }
            let out = solver
                .solve_through(&mut sys, state.t, &y0, &stops, |step| {
                    if next_out < times.len() && times[next_out] == step.t1 && inside(step.t1) {
                        probe.load(step.t1, step.y1);
                        samples.push(sample(&probe));
                        next_out += 1;
                    }
                    Control::Continue
                })
                .map_err(|source| LimitError::Integration { t: state.t, source })?;
            state.load(out.t, &out.y);
        }
        if seg_end >= t_end {
            break;
        }
        if jumps.len() as u64 >= config.jump_cap {
            return Err(LimitError::JumpBudget(config.jump_cap));
        }
        let from = if state.next_jump[0] <= state.next_jump[1] {
            Site::Zero
        } else {
            Site::One
        };
        state.t = state.next_jump[from.index()];
        let mass = state.gel_jump(from, kappa);
        jumps.push(JumpRecord {
            t: state.t,
            from,
            mass,
        });
    }
    while next_out < times.len() {
        let mut s = sample(&state);
        s.t = times[next_out];
        samples.push(s);
        next_out += 1;
    }
    Ok(LimitRun {
        samples,
        jumps,
        final_state: state,
    })
}

/// Slope at `t0` of a cubic least-squares fit to `(t, v)` samples, i.e. the
/// right derivative extrapolated from data on one side of `t0`.
pub fn extrapolated_slope(points: &[(f64, f64)], t0: f64) -> Option<f64> {
    const DEG: usize = 3;
    if points.len() <= DEG {
        return None;
    }
    // normal equations on shifted abscissae; 4x4 is well conditioned here
    let mut ata = [[0.0f64; DEG + 1]; DEG + 1];
    let mut atb = [0.0f64; DEG + 1];
    for &(t, v) in points {
        let s = t - t0;
        let pows = [1.0, s, s * s, s * s * s];
        for r in 0..=DEG {
            atb[r] += pows[r] * v;
            for c in 0..=DEG {
                ata[r][c] += pows[r] * pows[c];
            }
        }
    }
    let coef = solve_small(ata, atb)?;
    Some(coef[1])
}

fn solve_small<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let s: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gel_growth_term() {
        let mut s = LimitState::monodisperse(4, 0.0, 0.0, 0);
        s.zeta[0] = vec![0.0, 1.0, 1.0, 0.0];
        s.zeta_inf = [0.2, 0.0];
        assert_eq!(s.sigma(Site::Zero), 3.0);
        let r = limit_rhs(&s, 0.0);
        // only the (2, 2) pair reaches B = 4: overflow 1/2 * 4 * 1 * 1 = 2
        assert!((r.zeta_inf[0] - (0.6 + 2.0)).abs() < 1e-15);
    }

    #[test]
    fn rates_conserve_mass() {
        let mut s = LimitState::monodisperse(24, 0.3, 0.5, 1);
        for m in 1..24 {
            s.zeta[0][m] = 0.03 / m as f64;
            s.zeta[1][m] = 0.01;
        }
        s.zeta_inf = [0.2, 0.05];
        let r = limit_rhs(&s, 0.5);
        assert!(r.total_mass().abs() < 1e-14, "{}", r.total_mass());
    }

    #[test]
    fn jump_moves_and_merges_gel() {
        let mut s = LimitState::monodisperse(8, 0.0, 1.0, 2);
        s.zeta_inf = [0.3, 0.1];
        let before = s.total_mass();
        s.t = 0.5;
        let moved = s.gel_jump(Site::Zero, 1.0);
        assert_eq!(moved, 0.3);
        assert_eq!(s.zeta_inf[0], 0.0);
        assert!((s.zeta_inf[1] - 0.4).abs() < 1e-16);
        assert!((s.total_mass() - before).abs() < 1e-15);
        assert!(s.next_jump[0] > 0.5);
    }

    #[test]
    fn empty_jump_only_restarts_clock() {
        let mut s = LimitState::monodisperse(8, 0.0, 1.0, 2);
        let zeta = s.zeta.clone();
        s.gel_jump(Site::One, 1.0);
        assert_eq!(s.zeta_inf, [0.0, 0.0]);
        assert_eq!(s.zeta, zeta);
    }

    #[test]
    fn no_jumps_without_kappa() {
        let cfg = LimitConfig::new(0.3, 0.0, 16, 3.0, 7).with_output_step(0.5);
        let run = simulate_limit(&cfg).unwrap();
        assert!(run.jumps.is_empty());
        assert_eq!(run.samples.len(), 7);
    }

    #[test]
    fn slope_of_cubic() {
        let pts: Vec<(f64, f64)> = (0..20)
            .map(|k| {
                let t = 1.05 + 0.01 * k as f64;
                let s = t - 1.0;
                (t, 2.0 * s - 3.0 * s * s + 0.5 * s * s * s)
            })
            .collect();
        assert!((extrapolated_slope(&pts, 1.0).unwrap() - 2.0).abs() < 1e-9);
    }
}
