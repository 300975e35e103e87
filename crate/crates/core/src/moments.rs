//! Second-moment system `x' = x^2 + kappa (y - x)`, `y' = y^2 + kappa (x - y)`
//! and estimation of its blow-up (gelation) time.
//!
//! Near blow-up `x ~ (t_gel - t)^{-1}`, so once `max(x, y)` exceeds the cap
//! the remaining time is estimated by `1 / max(x, y)`. The estimator error is
//! `o(1/x_cap)` up to logarithmic corrections coming from the slower site.

use thiserror::Error;

use crate::ode::{hermite, Control, DormandPrince, OdeError, OdeSystem};

/// Integration gives up past this time; blow-up is guaranteed by `t = 2`.
pub const T_LIMIT: f64 = 2.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error("x_cap must be >= 1e4, got {0}")]
    Cap(f64),
    #[error("invalid initial moments or rate: x0 = {x0}, y0 = {y0}, kappa = {kappa}")]
    Input { x0: f64, y0: f64, kappa: f64 },
    #[error("moments stayed below the cap until t = {t}; blow-up must happen by t = 2")]
    CapNotReached { t: f64 },
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPair {
    pub x: f64,
    pub y: f64,
}

impl MomentPair {
    /// Initial second moments `((1+lambda)^{-1}, lambda (1+lambda)^{-1})`.
    pub fn initial(lambda: f64) -> Self {
        if lambda.is_infinite() {
            return Self { x: 0.0, y: 1.0 };
        }
        Self {
            x: 1.0 / (1.0 + lambda),
            y: lambda / (1.0 + lambda),
        }
    }
}

pub fn moment_rhs(p: MomentPair, kappa: f64) -> MomentPair {
    MomentPair {
        x: p.x * p.x + kappa * (p.y - p.x),
        y: p.y * p.y + kappa * (p.x - p.y),
    }
}

struct MomentSystem {
    kappa: f64,
}

impl OdeSystem for MomentSystem {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let d = moment_rhs(MomentPair { x: y[0], y: y[1] }, self.kappa);
        dy[0] = d.x;
        dy[1] = d.y;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extrapolation {
    /// `t_stop + 1 / max(x, y)`.
    Reciprocal,
    /// Fit `a / (t_gel - t)` through the last two accepted points.
    TwoPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GelEstimate {
    pub t_gel_hat: f64,
    pub t_stop: f64,
    pub x_stop: f64,
    pub y_stop: f64,
    pub method: Extrapolation,
}

/// Accepted steps of the moment integration, with cubic Hermite dense output.
#[derive(Debug, Clone, Default)]
pub struct MomentTrajectory {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl MomentTrajectory {
    fn push(&mut self, t: f64, v: &[f64], d: &[f64]) {
        self.t.push(t);
        self.x.push(v[0]);
        self.y.push(v[1]);
        self.dx.push(d[0]);
        self.dy.push(d[1]);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Interpolated moments at `t` inside the integrated range.
    pub fn at(&self, t: f64) -> Option<MomentPair> {
        let (first, last) = (*self.t.first()?, *self.t.last()?);
        if !(first..=last).contains(&t) {
            return None;
        }
        let k = self.t.partition_point(|&s| s < t).max(1).min(self.t.len() - 1);
        let (a, b) = (k - 1, k);
        let mut out = [0.0; 2];
        hermite(
            self.t[a],
            self.t[b],
            &[self.x[a], self.y[a]],
            &[self.x[b], self.y[b]],
            &[self.dx[a], self.dy[a]],
            &[self.dx[b], self.dy[b]],
            t,
            &mut out,
        );
        Some(MomentPair { x: out[0], y: out[1] })
    }
}

/// Solve from the monodisperse initial moments of ratio `lambda`.
pub fn solve_moments(
    lambda: f64,
    kappa: f64,
    x_cap: f64,
    rtol: f64,
) -> Result<(MomentTrajectory, GelEstimate), MomentError> {
    solve_moments_from(MomentPair::initial(lambda), kappa, x_cap, rtol, Extrapolation::Reciprocal)
}

/// Integrate until `max(x, y) >= x_cap` and extrapolate the blow-up time.
pub fn solve_moments_from(
    init: MomentPair,
    kappa: f64,
    x_cap: f64,
    rtol: f64,
    method: Extrapolation,
) -> Result<(MomentTrajectory, GelEstimate), MomentError> {
    if !(x_cap >= 1e4) {
        return Err(MomentError::Cap(x_cap));
    }
    if !(init.x >= 0.0 && init.y >= 0.0 && init.x + init.y > 0.0 && kappa >= 0.0 && kappa.is_finite()) {
        return Err(MomentError::Input {
            x0: init.x,
            y0: init.y,
            kappa,
        });
    }
    let mut sys = MomentSystem { kappa };
    let y0 = [init.x, init.y];
    let mut traj = MomentTrajectory::default();
    let d0 = moment_rhs(init, kappa);
    traj.push(0.0, &y0, &[d0.x, d0.y]);
    let solver = DormandPrince::new(rtol, 1e-14);
    let out = solver.solve(&mut sys, 0.0, &y0, T_LIMIT, |step| {
        traj.push(step.t1, step.y1, step.f1);
        if step.y1[0].max(step.y1[1]) >= x_cap {
            Control::Stop
        } else {
            Control::Continue
        }
    })?;
    if !out.stopped {
        return Err(MomentError::CapNotReached { t: out.t });
    }
    let n = traj.len();
    let (t_stop, x_stop, y_stop) = (traj.t[n - 1], traj.x[n - 1], traj.y[n - 1]);
    let lead = x_stop.max(y_stop);
    let t_gel_hat = match method {
        Extrapolation::Reciprocal => t_stop + 1.0 / lead,
        Extrapolation::TwoPoint => {
            let (t1, v1) = (traj.t[n - 2], traj.x[n - 2].max(traj.y[n - 2]));
            if v1 < lead {
                (lead * t_stop - v1 * t1) / (lead - v1)
            } else {
                t_stop + 1.0 / lead
            }
        }
    };
    Ok((
        traj,
        GelEstimate {
            t_gel_hat,
            t_stop,
            x_stop,
            y_stop,
            method,
        },
    ))
}
