//! Mittag-Leffler functions on the non-negative real axis.
//!
//! ```text
//! E_{a,b}(z)   = sum_{r>=0} z^r / Gamma(a r + b)
//! E^g_{a,b}(z) = sum_{j>=0} (g)_j z^j / (j! Gamma(a j + b))
//! ```
//!
//! with `(g)_j` the rising factorial. Every Gamma evaluation goes through
//! `lgamma`. Terms are summed directly while `z^(1/a) <= 30` and combined in
//! log space above that. For `a <= 1` and `z^(1/a) >= 200` the two-parameter
//! function switches to its exponential asymptotic form
//!
//! ```text
//! E_{a,b}(z) = (1/a) z^((1-b)/a) exp(z^(1/a)) - sum_{k=1}^{10} z^-k / Gamma(b - a k) + ...
//! ```
//!
//! whose neglected part is smaller than `exp(-200)` relative to the leading
//! term. Complex or negative arguments are not supported.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::numeric::{ln_gamma, log_add, log_sum_exp, CompensatedSum, LN_F64_MAX};

/// Hard cap on the number of series terms.
pub const SERIES_CAP: usize = 10_000;

/// `z^(1/alpha)` above which series terms are combined in log space.
pub const LOG_SPACE_THRESHOLD: f64 = 30.0;

/// `z^(1/alpha)` at which the asymptotic branch takes over (`alpha <= 1`).
pub const ASYMPTOTIC_THRESHOLD: f64 = 200.0;

const ASYMPTOTIC_TERMS: usize = 10;
// ln(1e-16)
const LN_RELATIVE_STOP: f64 = -36.841_361_487_904_734;
const STOP_RUN: usize = 3;

/// Parameters and argument of a (generalized) Mittag-Leffler evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlQuery {
    alpha: f64,
    beta: f64,
    gamma: f64,
    z: f64,
}

/// Which evaluation route a query takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Origin,
    LinearSeries,
    LogSeries,
    Asymptotic,
}

impl MlQuery {
    /// Two-parameter query (`gamma = 1`).
    pub fn new(alpha: f64, beta: f64, z: f64) -> Result<Self> {
        Self::generalized(alpha, beta, 1.0, z)
    }

    pub fn generalized(alpha: f64, beta: f64, gamma: f64, z: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return domain(format!("alpha must be positive and finite, got {alpha}"));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return domain(format!("beta must be positive and finite, got {beta}"));
        }
        if !(gamma.is_finite() && gamma >= 1.0) {
            return domain(format!("gamma must be >= 1 and finite, got {gamma}"));
        }
        if !(z.is_finite() && z >= 0.0) {
            return domain(format!("argument must be non-negative and finite, got {z}"));
        }
        Ok(Self {
            alpha,
            beta,
            gamma,
            z,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// `z^(1/alpha)`, the quantity that controls term growth.
    pub fn scaled_argument(&self) -> f64 {
        self.z.powf(1.0 / self.alpha)
    }

    pub fn branch(&self) -> Branch {
        if self.z == 0.0 {
            return Branch::Origin;
        }
        let scaled = self.scaled_argument();
        if self.gamma == 1.0 && self.alpha <= 1.0 && scaled >= ASYMPTOTIC_THRESHOLD {
            Branch::Asymptotic
        } else if scaled > LOG_SPACE_THRESHOLD {
            Branch::LogSeries
        } else {
            Branch::LinearSeries
        }
    }

    /// Natural log of the function value.
    pub fn log_value(&self) -> Result<f64> {
        match self.branch() {
            Branch::Origin => Ok(-ln_gamma(self.beta)),
            Branch::LinearSeries => Ok(self.linear_series()?.ln()),
            Branch::LogSeries => self.log_series(),
            Branch::Asymptotic => Ok(log_asymptotic(self.alpha, self.beta, self.z)),
        }
    }

    /// Function value in linear scale. Fails with [`Error::Range`] when the
    /// value overflows `f64`.
    pub fn value(&self) -> Result<f64> {
        match self.branch() {
            Branch::Origin => Ok(rgamma(self.beta)),
            Branch::LinearSeries => self.linear_series(),
            Branch::LogSeries | Branch::Asymptotic => {
                let log = self.log_value()?;
                if log > LN_F64_MAX {
                    return Err(Error::Range(format!(
                        "E(z) = exp({log}) overflows f64; use the log variant"
                    )));
                }
                Ok(log.exp())
            }
        }
    }

    /// Log-space series evaluated regardless of the asymptotic switch.
    pub fn log_series(&self) -> Result<f64> {
        if self.z == 0.0 {
            return Ok(-ln_gamma(self.beta));
        }
        let terms = self.collect_log_terms()?;
        Ok(log_sum_exp(&terms))
    }

    fn linear_series(&self) -> Result<f64> {
        let terms = self.collect_log_terms()?;
        let sum: CompensatedSum = terms.iter().map(|t| t.exp()).collect();
        Ok(sum.value())
    }

    fn log_term(&self, j: usize, ln_z: f64) -> f64 {
        let jf = j as f64;
        let mut lt = if j == 0 { 0.0 } else { jf * ln_z };
        lt -= ln_gamma(self.alpha * jf + self.beta);
        if self.gamma != 1.0 {
            lt += ln_gamma(self.gamma + jf) - ln_gamma(self.gamma) - ln_gamma(jf + 1.0);
        }
        lt
    }

    fn collect_log_terms(&self) -> Result<Vec<f64>> {
        let ln_z = self.z.ln();
        let mut terms: Vec<f64> = Vec::with_capacity(64);
        let mut running = f64::NEG_INFINITY;
        let mut small_run = 0;
        for j in 0..SERIES_CAP {
            let lt = self.log_term(j, ln_z);
            let decreasing = terms.last().is_some_and(|&prev| lt < prev);
            if decreasing && lt - running < LN_RELATIVE_STOP {
                small_run += 1;
            } else {
                small_run = 0;
            }
            running = log_add(running, lt);
            terms.push(lt);
            if small_run >= STOP_RUN {
                return Ok(terms);
            }
        }
        Err(Error::NonConvergence {
            what: "Mittag-Leffler series",
            iterations: SERIES_CAP,
        })
    }
}

/// Log of the asymptotic expansion, valid for `0 < alpha <= 1`, `z > 0`.
pub fn log_asymptotic(alpha: f64, beta: f64, z: f64) -> f64 {
    let ln_z = z.ln();
    let lead = -alpha.ln() + (1.0 - beta) / alpha * ln_z + z.powf(1.0 / alpha);
    let correction: f64 = -(1..=ASYMPTOTIC_TERMS)
        .map(|k| {
            let k = k as f64;
            (-k * ln_z).exp() * rgamma(beta - alpha * k)
        })
        .sum::<f64>();
    lead + (correction * (-lead).exp()).ln_1p()
}

/// `1 / Gamma(x)` on the whole real line (zero at the poles).
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    if x > 0.0 {
        if x > 170.0 {
            (-ln_gamma(x)).exp()
        } else {
            1.0 / libm::tgamma(x)
        }
    } else {
        libm::tgamma(1.0 - x) * (PI * x).sin() / PI
    }
}

pub fn mittag_leffler(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    MlQuery::new(alpha, beta, z)?.value()
}

pub fn log_mittag_leffler(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    MlQuery::new(alpha, beta, z)?.log_value()
}

pub fn generalized_mittag_leffler(alpha: f64, beta: f64, gamma: f64, z: f64) -> Result<f64> {
    MlQuery::generalized(alpha, beta, gamma, z)?.value()
}

pub fn log_generalized_mittag_leffler(alpha: f64, beta: f64, gamma: f64, z: f64) -> Result<f64> {
    MlQuery::generalized(alpha, beta, gamma, z)?.log_value()
}

/// `E_{nu,nu}(z) / E_{nu,1}(z)`, formed as the exponential of a log
/// difference. Tends to `z^((1-nu)/nu)` as `z` grows.
pub fn ml_ratio_nu_nu_over_nu_1(nu: f64, z: f64) -> Result<f64> {
    if !(nu > 0.0 && nu <= 1.0) {
        return domain(format!("nu must lie in (0, 1], got {nu}"));
    }
    let num = log_mittag_leffler(nu, nu, z)?;
    let den = log_mittag_leffler(nu, 1.0, z)?;
    Ok((num - den).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn exponential_special_case() {
        assert!(rel(mittag_leffler(1.0, 1.0, 1.0).unwrap(), std::f64::consts::E) < 1e-15);
        assert_eq!(log_mittag_leffler(1.0, 1.0, 700.0).unwrap(), 700.0);
    }

    #[test]
    fn origin_is_reciprocal_gamma_of_beta() {
        assert_eq!(mittag_leffler(0.7, 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(log_mittag_leffler(0.7, 1.0, 0.0).unwrap(), 0.0);
        let v = generalized_mittag_leffler(0.7, 1.7, 2.0, 0.0).unwrap();
        assert!(rel(v, 1.0 / libm::tgamma(1.7)) < 1e-15);
    }

    #[test]
    fn invalid_parameters_are_domain_errors() {
        for (a, b, z) in [
            (0.0, 1.0, 1.0),
            (0.5, -1.0, 1.0),
            (0.5, 1.0, -0.1),
            (0.5, 1.0, f64::NAN),
        ] {
            assert!(matches!(mittag_leffler(a, b, z), Err(Error::Domain(_))));
        }
        assert!(matches!(
            generalized_mittag_leffler(0.5, 1.0, 0.5, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            ml_ratio_nu_nu_over_nu_1(1.5, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn overflow_is_a_range_error() {
        let err = mittag_leffler(0.5, 1.0, 30.0).unwrap_err();
        assert!(matches!(err, Error::Range(_)));
        assert!(log_mittag_leffler(0.5, 1.0, 30.0).is_ok());
    }

    #[test]
    fn gamma_one_is_bitwise_two_parameter() {
        for i in 0..50 {
            let z = 0.37 * i as f64;
            let a = mittag_leffler(0.7, 1.0, z).unwrap();
            let b = generalized_mittag_leffler(0.7, 1.0, 1.0, z).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "z = {z}");
        }
    }

    #[test]
    fn ratio_edge_values() {
        assert_eq!(ml_ratio_nu_nu_over_nu_1(1.0, 2.0).unwrap(), 1.0);
        let r = ml_ratio_nu_nu_over_nu_1(0.7, 0.0).unwrap();
        assert!(rel(r, 1.0 / libm::tgamma(0.7)) < 1e-14);
    }

    #[test]
    fn rgamma_reflection_and_poles() {
        assert_eq!(rgamma(0.0), 0.0);
        assert_eq!(rgamma(-3.0), 0.0);
        // Gamma(-0.5) = -2 sqrt(pi)
        assert!(rel(rgamma(-0.5), -1.0 / (2.0 * PI.sqrt())) < 1e-14);
        assert!(rel(rgamma(5.0), 1.0 / 24.0) < 1e-15);
    }

    #[test]
    fn branch_selection() {
        assert_eq!(
            MlQuery::new(0.5, 1.0, 0.0).unwrap().branch(),
            Branch::Origin
        );
        assert_eq!(
            MlQuery::new(0.5, 1.0, 2.0).unwrap().branch(),
            Branch::LinearSeries
        );
        assert_eq!(
            MlQuery::new(0.5, 1.0, 10.0).unwrap().branch(),
            Branch::LogSeries
        );
        assert_eq!(
            MlQuery::new(0.5, 1.0, 15.0).unwrap().branch(),
            Branch::Asymptotic
        );
        // the generalized function never switches
        assert_eq!(
            MlQuery::generalized(0.5, 1.0, 2.0, 15.0).unwrap().branch(),
            Branch::LogSeries
        );
        // nor does alpha > 1
        assert_eq!(
            MlQuery::new(1.5, 1.0, 5000.0).unwrap().branch(),
            Branch::LogSeries
        );
    }
}
