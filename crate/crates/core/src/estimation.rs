//! Estimating `nu` from one observation of `s(M(t))` when `lambda` is known.
//!
//! `s(M(t))/t` converges to `f_a(nu)` with `a = s(lambda)` and
//! `f_a(x) = a^(1/x) / x`, which is a decreasing bijection of `(0, inf)`
//! onto itself when `a >= 1`. The estimator is `g_a(s(M(t))/t)` with
//! `g_a = f_a^-1`, extended by `g_a(0) = +inf`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::extended::ExtendedReal;
use crate::model::ModelParams;

const BRACKET_LOW: f64 = 1e-6;
const BRACKET_HIGH: f64 = 64.0;
const MAX_BRACKET_STEPS: usize = 2048;

fn check_base(a: f64) -> Result<()> {
    if !(a.is_finite() && a >= 1.0) {
        return domain(format!("f_a is only invertible for a >= 1, got a = {a}"));
    }
    Ok(())
}

/// `f_a(x) = a^(1/x) / x`.
pub fn f_a(a: f64, x: f64) -> Result<f64> {
    check_base(a)?;
    if !(x.is_finite() && x > 0.0) {
        return domain(format!("f_a needs x > 0, got {x}"));
    }
    Ok(f_unchecked(a.ln(), x))
}

fn f_unchecked(ln_a: f64, x: f64) -> f64 {
    (ln_a / x - x.ln()).exp()
}

/// Solution of `f_a(x) = y` by bisection, with the number of bracket and
/// bisection steps taken.
pub fn g_a_with_iterations(a: f64, y: f64) -> Result<(ExtendedReal, usize)> {
    check_base(a)?;
    if !(y.is_finite() && y >= 0.0) {
        return domain(format!("g_a needs a finite y >= 0, got {y}"));
    }
    if y == 0.0 {
        return Ok((ExtendedReal::PosInfinity, 0));
    }
    let ln_a = a.ln();
    let f = |x: f64| f_unchecked(ln_a, x);
    let (mut lo, mut hi) = (BRACKET_LOW, BRACKET_HIGH);
    let mut iterations = 0;
    while f(lo) < y {
        lo *= 0.5;
        iterations += 1;
        if iterations > MAX_BRACKET_STEPS || lo == 0.0 {
            return Err(Error::NonConvergence {
                what: "g_a bracketing",
                iterations,
            });
        }
    }
    while f(hi) > y {
        hi *= 2.0;
        iterations += 1;
        if iterations > MAX_BRACKET_STEPS || !hi.is_finite() {
            return Err(Error::NonConvergence {
                what: "g_a bracketing",
                iterations,
            });
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if f(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = if (f(lo) - y).abs() <= (f(hi) - y).abs() {
        lo
    } else {
        hi
    };
    Ok((ExtendedReal::Finite(x), iterations))
}

/// `g_a(y)`, the inverse of [`f_a`]; `g_a(0) = +inf`.
pub fn g_a(a: f64, y: f64) -> Result<ExtendedReal> {
    Ok(g_a_with_iterations(a, y)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub nu_hat: ExtendedReal,
    /// `s(M(t)) / t`.
    pub observed_rate: f64,
    pub solver_iterations: usize,
}

fn require_unit_sum(p: &ModelParams) -> Result<f64> {
    let s = p.lambda_sum();
    if s < 1.0 {
        return Err(Error::Precondition(format!(
            "estimator requires s(lambda) >= 1, got s(lambda) = {s}"
        )));
    }
    Ok(s)
}

/// The estimator for fixed intensities.
#[derive(Debug, Clone, Copy)]
pub struct Estimator {
    a: f64,
}

impl Estimator {
    /// Only `lambda` is used; the `nu` stored in `p` plays no role.
    pub fn new(p: &ModelParams) -> Result<Self> {
        Ok(Self {
            a: require_unit_sum(p)?,
        })
    }

    pub fn estimate(&self, t: f64, observed_sum: u64) -> Result<EstimatorResult> {
        if !(t.is_finite() && t > 0.0) {
            return domain(format!("t must be positive and finite, got {t}"));
        }
        let observed_rate = observed_sum as f64 / t;
        let (nu_hat, solver_iterations) = g_a_with_iterations(self.a, observed_rate)?;
        Ok(EstimatorResult {
            nu_hat,
            observed_rate,
            solver_iterations,
        })
    }
}

pub fn estimate_nu(p: &ModelParams, t: f64, observed_sum: u64) -> Result<EstimatorResult> {
    Estimator::new(p)?.estimate(t, observed_sum)
}

/// `D(l1; l2) = l1 log(l1/l2) - l1 + l2`, with `0 log 0 = 0`.
pub fn d_divergence(l1: f64, l2: f64) -> Result<f64> {
    if !(l1.is_finite() && l1 >= 0.0) {
        return domain(format!("D needs a finite l1 >= 0, got {l1}"));
    }
    if !(l2.is_finite() && l2 > 0.0) {
        return domain(format!("D needs a finite l2 > 0, got {l2}"));
    }
    if l1 == 0.0 {
        return Ok(l2);
    }
    Ok((l1 * (l1 / l2).ln() - l1 + l2).max(0.0))
}

/// Rate `J_nu(nu_hat)` of the estimator when the true order is `nu_true`:
///
/// ```text
/// J(nu_hat) = (nu/nu_hat) s^(1/nu_hat) log((nu/nu_hat) s^(1/nu_hat - 1/nu)) - (nu/nu_hat) s^(1/nu_hat) + s^(1/nu)
/// ```
///
/// for `nu_hat > 0`, `+inf` for `nu_hat <= 0` and `s^(1/nu)` at `nu_hat = +inf`.
pub fn rate_j(p: &ModelParams, nu_true: f64, nu_hat: ExtendedReal) -> Result<ExtendedReal> {
    let s = require_unit_sum(p)?;
    if !(nu_true > 0.0 && nu_true <= 1.0) {
        return domain(format!("nu must lie in (0, 1], got {nu_true}"));
    }
    let root = s.powf(1.0 / nu_true);
    let nh = match nu_hat {
        ExtendedReal::PosInfinity => return Ok(ExtendedReal::Finite(root)),
        ExtendedReal::NegInfinity => return Ok(ExtendedReal::PosInfinity),
        ExtendedReal::Finite(v) if v <= 0.0 => return Ok(ExtendedReal::PosInfinity),
        ExtendedReal::Finite(v) => v,
    };
    let ln_s = s.ln();
    let ln_l1 = (nu_true / nh).ln() + ln_s / nh;
    let l1 = ln_l1.exp();
    if !l1.is_finite() {
        return Ok(ExtendedReal::PosInfinity);
    }
    let log_arg = ln_l1 - ln_s / nu_true;
    Ok(ExtendedReal::Finite((l1 * log_arg - l1 + root).max(0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestDirection {
    /// Reject when `nu_hat >= k` (alternative `nu1 > nu0`).
    Upper,
    /// Reject when `nu_hat <= k` (alternative `nu1 < nu0`).
    Lower,
}

/// Threshold test of `nu = nu0` against `nu = nu1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisTest {
    nu0: f64,
    nu1: f64,
    k: f64,
    direction: TestDirection,
}

impl HypothesisTest {
    /// The critical value must lie between `nu0` and the alternative side;
    /// `k = nu0` is accepted as the degenerate test.
    pub fn new(nu0: f64, nu1: f64, k: f64) -> Result<Self> {
        for (name, v) in [("nu0", nu0), ("nu1", nu1)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if nu0 == nu1 {
            return Err(Error::Config("nu0 and nu1 must differ".into()));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Config(format!(
                "threshold must be positive, got {k}"
            )));
        }
        let direction = if nu0 < nu1 {
            if k < nu0 {
                return Err(Error::Config(format!(
                    "threshold {k} must be >= nu0 = {nu0} when nu1 > nu0"
                )));
            }
            TestDirection::Upper
        } else {
            if k > nu0 {
                return Err(Error::Config(format!(
                    "threshold {k} must be <= nu0 = {nu0} when nu1 < nu0"
                )));
            }
            TestDirection::Lower
        };
        Ok(Self {
            nu0,
            nu1,
            k,
            direction,
        })
    }

    pub fn nu0(&self) -> f64 {
        self.nu0
    }

    pub fn nu1(&self) -> f64 {
        self.nu1
    }

    pub fn threshold(&self) -> f64 {
        self.k
    }

    pub fn direction(&self) -> TestDirection {
        self.direction
    }

    /// Whether `nu_hat` falls in the critical region.
    pub fn rejects(&self, nu_hat: ExtendedReal) -> bool {
        match self.direction {
            TestDirection::Upper => nu_hat >= ExtendedReal::Finite(self.k),
            TestDirection::Lower => nu_hat <= ExtendedReal::Finite(self.k),
        }
    }
}

/// `J_{nu0}(k)`: the exponential decay rate of the first-kind error.
pub fn first_kind_error_exponent(p: &ModelParams, test: &HypothesisTest) -> Result<f64> {
    Ok(rate_j(p, test.nu0, ExtendedReal::Finite(test.k))?.to_f64())
}
