//! Closed-form quantities of the one-site (mean-field) model with
//! monodisperse start.

use statrs::function::factorial::ln_factorial;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeanFieldError {
    #[error("x must lie in [0, 1], got {0}")]
    Argument(f64),
    #[error("t must be finite and >= 0, got {0}")]
    Time(f64),
}

/// Borel concentration `c_{t,m} = t^{m-1} m^{m-2} e^{-tm} / m!`, evaluated in
/// log space.
pub fn borel_coeff(t: f64, m: u64) -> f64 {
    assert!(m >= 1, "mass must be >= 1");
    if m == 1 {
        return (-t).exp();
    }
    if t == 0.0 {
        return 0.0;
    }
    let mf = m as f64;
    let log_c = (mf - 1.0) * t.ln() + (mf - 2.0) * mf.ln() - t * mf - ln_factorial(m);
    log_c.exp()
}

/// Physical root `u` of `x = u e^{t(1-u)}` on `[0, min(1, 1/t)]`.
pub fn solve_u(x: f64, t: f64) -> Result<f64, MeanFieldError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(MeanFieldError::Argument(x));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(MeanFieldError::Time(t));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if t <= 1.0 && x == 1.0 {
        return Ok(1.0);
    }
    let f = |u: f64| u * (t * (1.0 - u)).exp() - x;
    let (mut lo, mut hi) = (0.0, if t > 1.0 { 1.0 / t } else { 1.0 });
    // f is increasing on the bracket with f(lo) < 0 <= f(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut u = 0.5 * (lo + hi);
    // Newton polish, kept inside the bracket
    for _ in 0..4 {
        let e = (t * (1.0 - u)).exp();
        let d = e * (1.0 - t * u);
        if d <= 0.0 {
            break;
        }
        let next = u - (u * e - x) / d;
        if next > lo && next < hi {
            u = next;
        }
    }
    Ok(u)
}

/// Gel mass `1 - u(1, t)`; zero up to `t = 1`.
pub fn gel_fraction(t: f64) -> f64 {
    if t <= 1.0 {
        return 0.0;
    }
    1.0 - solve_u(1.0, t).expect("t > 1 is in the domain")
}

/// Second moment per monomer `zeta/(1 - t zeta)` with `zeta = u(1, t)`;
/// `+inf` at `t = 1`.
pub fn sigma_meanfield(t: f64) -> f64 {
    if t == 1.0 {
        return f64::INFINITY;
    }
    if t < 1.0 {
        return 1.0 / (1.0 - t);
    }
    let z = solve_u(1.0, t).expect("t > 1 is in the domain");
    z / (1.0 - t * z)
}
