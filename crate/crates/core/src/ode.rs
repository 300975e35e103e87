//! Adaptive Dormand–Prince 5(4) integrator with cubic Hermite dense output.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e}); stiff or blow-up region")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("step limit of {0} reached")]
    MaxSteps(usize),
}

/// Right-hand side `dy = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]);
}

/// What the observer wants after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// An accepted step `[t0, t1]` with endpoint states and slopes.
#[derive(Debug)]
pub struct Step<'a> {
    pub t0: f64,
    pub t1: f64,
    pub y0: &'a [f64],
    pub y1: &'a [f64],
    pub f0: &'a [f64],
    pub f1: &'a [f64],
}

impl Step<'_> {
    /// Cubic Hermite interpolation at `t` in `[t0, t1]`.
    pub fn interpolate(&self, t: f64, out: &mut [f64]) {
        hermite(self.t0, self.t1, self.y0, self.y1, self.f0, self.f1, t, out);
    }
}

#[allow(clippy::too_many_arguments)]
pub fn hermite(t0: f64, t1: f64, y0: &[f64], y1: &[f64], f0: &[f64], f1: &[f64], t: f64, out: &mut [f64]) {
    let h = t1 - t0;
    if h == 0.0 {
        out.copy_from_slice(y1);
        return;
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
}

/// Result of an integration run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub t: f64,
    pub y: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
    pub stopped: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct DormandPrince {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
    /// Reject steps that take any component below `-atol`. Values in
    /// `[-atol, 0)` are kept as they are, so linear invariants stay exact.
    pub nonnegative: bool,
}

impl Default for DormandPrince {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-12,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
            nonnegative: false,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th minus 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

impl DormandPrince {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn nonnegative(mut self, yes: bool) -> Self {
        self.nonnegative = yes;
        self
    }

    /// Integrate from `(t0, y0)` towards `t_end`, calling `observer` after every
    /// accepted step. The run ends at `t_end` or when the observer says stop.
    pub fn solve<S, F>(
        &self,
        sys: &mut S,
        t0: f64,
        y0: &[f64],
        t_end: f64,
        observer: F,
    ) -> Result<Outcome, OdeError>
    where
        S: OdeSystem,
        F: FnMut(&Step<'_>) -> Control,
    {
        self.solve_through(sys, t0, y0, &[t_end], observer)
    }

    /// Like [`DormandPrince::solve`], but steps are shortened so that every time
    /// in `stops` (sorted, the last one is the horizon) ends an accepted step.
    pub fn solve_through<S, F>(
        &self,
        sys: &mut S,
        t0: f64,
        y0: &[f64],
        stops: &[f64],
        mut observer: F,
    ) -> Result<Outcome, OdeError>
    where
        S: OdeSystem,
        F: FnMut(&Step<'_>) -> Control,
    {
        let n = sys.dim();
        assert_eq!(y0.len(), n, "state length does not match system dimension");
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut out = Outcome {
            t,
            y: Vec::new(),
            accepted: 0,
            rejected: 0,
            stopped: false,
        };
        let mut stops = stops.iter().copied().skip_while(|&s| s <= t0).peekable();
        let Some(&first_stop) = stops.peek() else {
            out.y = y;
            return Ok(out);
        };

        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut k5 = vec![0.0; n];
        let mut k6 = vec![0.0; n];
        let mut k7 = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        let mut y_new = vec![0.0; n];

        sys.rhs(t, &y, &mut k1);
        let mut h = self
            .h_init
            .unwrap_or_else(|| self.initial_step(sys, t, &y, &k1, &mut tmp, &mut k2))
            .min(first_stop - t)
            .min(self.h_max);
        let mut last_rejected = false;

        loop {
            if out.accepted + out.rejected >= self.max_steps {
                return Err(OdeError::MaxSteps(self.max_steps));
            }
            let target = *stops.peek().expect("loop ends after the last stop");
            let remaining = target - t;
            let h_free = h;
            let at_stop = h >= remaining * (1.0 - 1e-12);
            if at_stop {
                h = remaining;
            }
            if h < 4.0 * f64::EPSILON * t.abs().max(1e-300) {
                return Err(OdeError::StepUnderflow { t, h });
            }

            for i in 0..n {
                tmp[i] = y[i] + h * A21 * k1[i];
            }
            sys.rhs(t + C2 * h, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            sys.rhs(t + C3 * h, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            sys.rhs(t + C4 * h, &tmp, &mut k4);
            for i in 0..n {
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            sys.rhs(t + C5 * h, &tmp, &mut k5);
            for i in 0..n {
                tmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let t_new = if at_stop { target } else { t + h };
            sys.rhs(t_new, &tmp, &mut k6);
            for i in 0..n {
                y_new[i] = y[i]
                    + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            sys.rhs(t_new, &y_new, &mut k7);

            let mut err = 0.0;
            for i in 0..n {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / n as f64).sqrt();
            if !err.is_finite() {
                // treat as a hard rejection; shrink aggressively
                h *= 0.1;
                out.rejected += 1;
                last_rejected = true;
                continue;
            }

            if err <= 1.0 {
                if self.nonnegative && y_new.iter().any(|&v| v < -self.atol) {
                    h *= 0.5;
                    out.rejected += 1;
                    last_rejected = true;
                    continue;
                }
                if y_new.iter().any(|v| !v.is_finite()) {
                    return Err(OdeError::NonFinite { t: t_new });
                }
                out.accepted += 1;
                let control = observer(&Step {
                    t0: t,
                    t1: t_new,
                    y0: &y,
                    y1: &y_new,
                    f0: &k1,
                    f1: &k7,
                });
                t = t_new;
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(&mut k1, &mut k7);
                if control == Control::Stop {
                    out.stopped = true;
                    break;
                }
                let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
                fac = fac.clamp(0.2, 5.0);
                if last_rejected {
                    fac = fac.min(1.0);
                }
                h = (h * fac).min(self.h_max);
                last_rejected = false;
                if at_stop {
                    stops.next();
                    if stops.peek().is_none() {
                        break;
                    }
                    // the shortened step says little about the natural step size
                    h = h.max(h_free.min(self.h_max));
                }
            } else {
                let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                h *= fac;
                out.rejected += 1;
                last_rejected = true;
            }
        }
        out.t = t;
        out.y = y;
        Ok(out)
    }

    /// Starting step from the Hairer–Wanner heuristic.
    fn initial_step<S: OdeSystem>(
        &self,
        sys: &mut S,
        t: f64,
        y: &[f64],
        f0: &[f64],
        y1: &mut [f64],
        f1: &mut [f64],
    ) -> f64 {
        let n = y.len() as f64;
        let scale = |i: usize| self.atol + self.rtol * y[i].abs();
        let d0 = (y.iter().enumerate().map(|(i, v)| (v / scale(i)).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (f0.iter().enumerate().map(|(i, v)| (v / scale(i)).powi(2)).sum::<f64>() / n).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        for i in 0..y.len() {
            y1[i] = y[i] + h0 * f0[i];
        }
        sys.rhs(t + h0, y1, f1);
        let d2 = (f1
            .iter()
            .zip(f0)
            .enumerate()
            .map(|(i, (a, b))| ((a - b) / scale(i)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    }
}

/// Collects interpolated states at a sorted list of output times.
#[derive(Debug)]
pub struct Sampler<'a> {
    times: &'a [f64],
    next: usize,
    pub samples: Vec<(f64, Vec<f64>)>,
}

impl<'a> Sampler<'a> {
    pub fn new(times: &'a [f64]) -> Self {
        Self {
            times,
            next: 0,
            samples: Vec::with_capacity(times.len()),
        }
    }

    /// Record every pending output time covered by `step`.
    pub fn observe(&mut self, step: &Step<'_>) {
        while self.next < self.times.len() && self.times[self.next] <= step.t1 {
            let t = self.times[self.next];
            let mut y = vec![0.0; step.y1.len()];
            if t == step.t1 {
                y.copy_from_slice(step.y1);
            } else {
                step.interpolate(t, &mut y);
            }
            self.samples.push((t, y));
            self.next += 1;
        }
    }

    /// Record output times that coincide with the initial time.
    pub fn observe_initial(&mut self, t0: f64, y0: &[f64]) {
        while self.next < self.times.len() && self.times[self.next] <= t0 {
            self.samples.push((self.times[self.next], y0.to_vec()));
            self.next += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -y[0];
        }
    }

    struct Oscillator;
    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
    }

    #[test]
    fn exponential_decay() {
        let solver = DormandPrince::new(1e-10, 1e-14);
        let out = solver.solve(&mut Decay, 0.0, &[1.0], 3.0, |_| Control::Continue).unwrap();
        assert_eq!(out.t, 3.0);
        assert!((out.y[0] - (-3.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn oscillator_with_dense_output() {
        let solver = DormandPrince::new(1e-10, 1e-12);
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        let mut sampler = Sampler::new(&times);
        sampler.observe_initial(0.0, &[0.0, 1.0]);
        solver
            .solve(&mut Oscillator, 0.0, &[0.0, 1.0], 10.0, |s| {
                sampler.observe(s);
                Control::Continue
            })
            .unwrap();
        assert_eq!(sampler.samples.len(), times.len());
        for (t, y) in &sampler.samples {
            assert!((y[0] - t.sin()).abs() < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn observer_can_stop() {
        let solver = DormandPrince::default();
        let out = solver
            .solve(&mut Decay, 0.0, &[1.0], 10.0, |s| {
                if s.y1[0] < 0.5 {
                    Control::Stop
                } else {
                    Control::Continue
                }
            })
            .unwrap();
        assert!(out.stopped);
        assert!(out.t < 10.0 && out.y[0] < 0.5);
    }

    #[test]
    fn blow_up_underflows() {
        struct Riccati;
        impl OdeSystem for Riccati {
            fn dim(&self) -> usize {
                1
            }
            fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) {
                dy[0] = y[0] * y[0];
            }
        }
        let err = DormandPrince::default()
            .solve(&mut Riccati, 0.0, &[1.0], 2.0, |_| Control::Continue)
            .unwrap_err();
        assert!(matches!(err, OdeError::StepUnderflow { .. } | OdeError::NonFinite { .. }));
    }
}
