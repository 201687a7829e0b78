//! Large and moderate deviation rates for `M(t)/t`.
//!
//! The scaled cumulant generating function is
//!
//! ```text
//! Lambda(theta) = (sum_i lambda_i e^theta_i)^(1/nu) - s(lambda)^(1/nu)
//! ```
//!
//! and its Legendre transform has the closed form
//!
//! ```text
//! Lambda*(x) = sum_i x_i log(nu^nu x_i / (lambda_i s(x)^(1-nu))) - nu s(x) + s(lambda)^(1/nu)
//! ```
//!
//! on the closed orthant (with `0 log 0 = 0`), and `+inf` elsewhere. The
//! moderate deviation rate is the quadratic form `x' C^-1 x / 2`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::extended::ExtendedReal;
use crate::model::{covariance_matrix, CovarianceMatrix, ModelParams};

/// Relative eigenvalue floor below which `C` is treated as singular.
pub const PD_RELATIVE_TOL: f64 = 1e-10;

/// `Lambda*(x)` together with the point and the maximizing `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEvaluation {
    pub point: Vec<f64>,
    pub value: ExtendedReal,
    /// `None` when the supremum is not attained (`x` outside the orthant).
    pub maximizer: Option<Vec<ExtendedReal>>,
}

fn check_vector(p: &ModelParams, v: &[f64], what: &str) -> Result<()> {
    p.check_dim(v.len(), what)?;
    if v.iter().any(|x| x.is_nan()) {
        return domain(format!("{what} contains NaN"));
    }
    Ok(())
}

fn check_finite(p: &ModelParams, v: &[f64], what: &str) -> Result<()> {
    check_vector(p, v, what)?;
    if v.iter().any(|x| !x.is_finite()) {
        return domain(format!("{what} must be finite"));
    }
    Ok(())
}

/// `log(sum_i lambda_i e^theta_i)`, computed as
/// `log s + log1p(sum_i (lambda_i/s) expm1(theta_i))` so that it is exact
/// to working precision near `theta = 0`.
fn log_tilted_sum(p: &ModelParams, theta: &[f64]) -> f64 {
    p.lambda_sum().ln() + log_tilted_ratio(p, theta)
}

/// `log(sum_i lambda_i e^theta_i / s(lambda))`.
fn log_tilted_ratio(p: &ModelParams, theta: &[f64]) -> f64 {
    let s = p.lambda_sum();
    let r: f64 = p
        .lambda()
        .iter()
        .zip(theta)
        .map(|(l, th)| l / s * th.exp_m1())
        .sum();
    r.ln_1p()
}

/// `Lambda(theta)`; components may be `-inf`.
pub fn lambda_limit(p: &ModelParams, theta: &[f64]) -> Result<f64> {
    check_vector(p, theta, "theta")?;
    let inv = 1.0 / p.nu();
    Ok(p.lambda_sum_root() * (inv * log_tilted_ratio(p, theta)).exp_m1())
}

/// `d Lambda / d theta_i = (1/nu) S^(1/nu - 1) lambda_i e^theta_i`.
pub fn lambda_gradient(p: &ModelParams, theta: &[f64]) -> Result<Vec<f64>> {
    check_vector(p, theta, "theta")?;
    let inv = 1.0 / p.nu();
    let ln_s = log_tilted_sum(p, theta);
    Ok(p.lambda()
        .iter()
        .zip(theta)
        .map(|(l, th)| inv * ((inv - 1.0) * ln_s + l.ln() + th).exp())
        .collect())
}

/// Hessian of `Lambda`; equals `C` at the origin.
pub fn lambda_hessian(p: &ModelParams, theta: &[f64]) -> Result<CovarianceMatrix> {
    check_vector(p, theta, "theta")?;
    let inv = 1.0 / p.nu();
    let ln_s = log_tilted_sum(p, theta);
    let w: Vec<f64> = p
        .lambda()
        .iter()
        .zip(theta)
        .map(|(l, th)| (l.ln() + th).exp())
        .collect();
    let cross = inv * (inv - 1.0) * ((inv - 2.0) * ln_s).exp();
    let diag = inv * ((inv - 1.0) * ln_s).exp();
    let m = p.dim();
    let mut rows = vec![vec![0.0; m]; m];
    for j in 0..m {
        rows[j][j] = cross * w[j] * w[j] + diag * w[j];
        for k in j + 1..m {
            let c = cross * w[j] * w[k];
            rows[j][k] = c;
            rows[k][j] = c;
        }
    }
    CovarianceMatrix::from_rows(rows)
}

/// `grad Lambda(0) = (1/nu) s(lambda)^(1/nu - 1) lambda`, the almost sure
/// limit of `M(t)/t` and the unique zero of `Lambda*`.
pub fn gradient_at_zero(p: &ModelParams) -> Vec<f64> {
    let inv = 1.0 / p.nu();
    let scale = inv * p.lambda_sum().powf(inv - 1.0);
    p.lambda().iter().map(|l| scale * l).collect()
}

/// `Lambda*(x)` in closed form.
pub fn rate_ld(p: &ModelParams, x: &[f64]) -> Result<RateEvaluation> {
    check_finite(p, x, "x")?;
    let point = x.to_vec();
    if x.iter().any(|&xi| xi < 0.0) {
        return Ok(RateEvaluation {
            point,
            value: ExtendedReal::PosInfinity,
            maximizer: None,
        });
    }
    let root = p.lambda_sum_root();
    if x.iter().all(|&xi| xi == 0.0) {
        return Ok(RateEvaluation {
            point,
            value: ExtendedReal::Finite(root),
            maximizer: Some(vec![ExtendedReal::NegInfinity; x.len()]),
        });
    }
    let nu = p.nu();
    let sx: f64 = x.iter().sum();
    let shift = nu * nu.ln() - (1.0 - nu) * sx.ln();
    let mut acc = 0.0;
    let mut maximizer = Vec::with_capacity(x.len());
    for (&xi, &li) in x.iter().zip(p.lambda()) {
        if xi == 0.0 {
            maximizer.push(ExtendedReal::NegInfinity);
        } else {
            let theta = shift + xi.ln() - li.ln();
            acc += xi * theta;
            maximizer.push(ExtendedReal::Finite(theta));
        }
    }
    let value = (acc - nu * sx + root).max(0.0);
    Ok(RateEvaluation {
        point,
        value: ExtendedReal::Finite(value),
        maximizer: Some(maximizer),
    })
}

/// The one-dimensional rate
/// `I(x) = x log((nu x)^nu / lambda) - nu x + lambda^(1/nu)` for `x >= 0`,
/// `+inf` for `x < 0`.
pub fn univariate_rate(nu: f64, lambda: f64, x: f64) -> Result<ExtendedReal> {
    let p = ModelParams::new(nu, vec![lambda])?;
    Ok(rate_ld(&p, &[x])?.value)
}

/// `H(q; r) = sum_i q_i log(q_i / r_i)` with `0 log 0 = 0`.
pub fn relative_entropy(q: &[f64], r: &[f64]) -> Result<ExtendedReal> {
    if q.len() != r.len() {
        return domain("relative entropy needs vectors of equal length");
    }
    if q.iter().chain(r).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return domain("relative entropy needs non-negative finite weights");
    }
    let mut acc = 0.0;
    for (&qi, &ri) in q.iter().zip(r) {
        if qi == 0.0 {
            continue;
        }
        if ri == 0.0 {
            return Ok(ExtendedReal::PosInfinity);
        }
        acc += qi * (qi / ri).ln();
    }
    Ok(ExtendedReal::Finite(acc))
}

/// `Lambda*(x) = s(x) H(x/s(x); lambda/s(lambda)) + I_{nu, s(lambda)}(s(x))`.
pub fn rate_ld_entropy_form(p: &ModelParams, x: &[f64]) -> Result<f64> {
    check_finite(p, x, "x")?;
    if x.iter().any(|&xi| xi < 0.0) {
        return domain("the entropy form is defined on the non-negative orthant only");
    }
    let sx: f64 = x.iter().sum();
    let s = p.lambda_sum();
    let univariate = univariate_rate(p.nu(), s, sx)?.to_f64();
    if sx == 0.0 {
        return Ok(univariate);
    }
    let q: Vec<f64> = x.iter().map(|xi| xi / sx).collect();
    let r: Vec<f64> = p.lambda().iter().map(|l| l / s).collect();
    let h = relative_entropy(&q, &r)?.to_f64();
    Ok(sx * h + univariate)
}

/// Settings for the numerical Legendre transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegendreConfig {
    /// Box `[-theta_bound, theta_bound]^m` for coordinates pushed to the boundary.
    pub theta_bound: f64,
    /// Values beyond this are reported as `+inf`.
    pub divergence_threshold: f64,
    pub max_iterations: usize,
    /// Stop once the sup-norm of the gradient falls below this.
    pub gradient_tolerance: f64,
}

impl Default for LegendreConfig {
    fn default() -> Self {
        Self {
            theta_bound: 40.0,
            divergence_threshold: 1e10,
            max_iterations: 500,
            gradient_tolerance: 1e-13,
        }
    }
}

fn dual_objective(p: &ModelParams, x: &[f64], theta: &[f64]) -> f64 {
    let linear: f64 = theta.iter().zip(x).map(|(t, xi)| t * xi).sum();
    linear - lambda_limit(p, theta).expect("validated input")
}

/// Maximizes `<theta, x> - Lambda(theta)` over the box with `lower` as the
/// lower bound. Coordinates with `x_i <= 0` have a strictly negative
/// partial derivative everywhere, so they sit on the lower bound; the rest
/// are found by damped Newton on the stationarity system
/// `x_i = (1/nu) S^(1/nu - 1) lambda_i e^theta_i`.
fn maximize_in_box(
    p: &ModelParams,
    x: &[f64],
    lower: f64,
    upper: f64,
    cfg: &LegendreConfig,
) -> Result<f64> {
    let m = x.len();
    let mut theta: Vec<f64> = x
        .iter()
        .map(|&xi| if xi > 0.0 { 0.0 } else { lower })
        .collect();
    let mut free: Vec<usize> = (0..m).filter(|&i| x[i] > 0.0).collect();
    let scale = x.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut value = dual_objective(p, x, &theta);
    for _ in 0..cfg.max_iterations {
        if free.is_empty() {
            return Ok(value);
        }
        let grad = lambda_gradient(p, &theta)?;
        let hess = lambda_hessian(p, &theta)?;
        let g: Vec<f64> = free.iter().map(|&i| x[i] - grad[i]).collect();
        if g.iter().all(|v| v.abs() <= cfg.gradient_tolerance * scale) {
            return Ok(value);
        }
        let n = free.len();
        let h = DMatrix::from_fn(n, n, |a, b| hess.get(free[a], free[b]));
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&DVector::from_column_slice(&g)),
            None => DVector::from_column_slice(&g),
        };
        let full: Vec<f64> = free
            .iter()
            .enumerate()
            .map(|(a, &i)| (theta[i] + step[a]).clamp(lower, upper))
            .collect();
        if free.iter().zip(&full).all(|(&i, &v)| v == theta[i]) {
            // The step no longer moves theta at working precision.
            return Ok(value);
        }
        if step.norm() <= 1e-6 * (1.0 + theta.iter().fold(0.0f64, |a, v| a.max(v.abs()))) {
            // Local quadratic regime: objective differences are below
            // rounding, so take the pure Newton step.
            for (a, &i) in free.iter().enumerate() {
                theta[i] = full[a];
            }
            value = dual_objective(p, x, &theta);
        } else {
            let mut alpha = 1.0;
            let mut improved = false;
            for _ in 0..60 {
                let mut trial = theta.clone();
                for (a, &i) in free.iter().enumerate() {
                    trial[i] = (theta[i] + alpha * step[a]).clamp(lower, upper);
                }
                let v = dual_objective(p, x, &trial);
                if v > value {
                    improved = true;
                    theta = trial;
                    value = v;
                    break;
                }
                alpha *= 0.5;
            }
            if !improved {
                // No ascent direction left at working precision.
                return Ok(value);
            }
        }
        free.retain(|&i| theta[i] < upper);
    }
    Err(Error::NonConvergence {
        what: "Legendre transform",
        iterations: cfg.max_iterations,
    })
}

/// Numerical `sup_theta <theta, x> - Lambda(theta)`, independent of the
/// closed form. Negative components make the supremum infinite; the lower
/// bound is then pushed down until the value crosses
/// `cfg.divergence_threshold`.
pub fn legendre_oracle(p: &ModelParams, x: &[f64], cfg: &LegendreConfig) -> Result<ExtendedReal> {
    check_finite(p, x, "x")?;
    let mut bound = cfg.theta_bound;
    if x.iter().all(|&xi| xi >= 0.0) {
        return maximize_in_box(p, x, -bound, cfg.theta_bound, cfg).map(ExtendedReal::Finite);
    }
    for _ in 0..1100 {
        let v = maximize_in_box(p, x, -bound, cfg.theta_bound, cfg)?;
        if v > cfg.divergence_threshold {
            return Ok(ExtendedReal::PosInfinity);
        }
        bound *= 2.0;
        if !bound.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence {
        what: "Legendre transform divergence detection",
        iterations: 1100,
    })
}

/// `Lambda~(theta) = <theta, C theta> / 2`.
pub fn md_lambda(p: &ModelParams, theta: &[f64]) -> Result<f64> {
    check_finite(p, theta, "theta")?;
    Ok(0.5 * covariance_matrix(p).bilinear(theta, theta))
}

/// `Lambda~*(x)`: `<x, C^-1 x> / 2` when `C` is numerically positive
/// definite, otherwise the supremum of `<theta, x> - <theta, C theta>/2`
/// taken in the eigenbasis (`+inf` if `x` leaves the range of `C`).
pub fn rate_md(p: &ModelParams, x: &[f64]) -> Result<ExtendedReal> {
    check_finite(p, x, "x")?;
    let c = covariance_matrix(p);
    let mat = c.to_matrix();
    let xv = DVector::from_column_slice(x);
    if c.is_positive_definite(PD_RELATIVE_TOL) {
        if let Some(ch) = mat.clone().cholesky() {
            let y = ch.solve(&xv);
            return Ok(ExtendedReal::Finite(0.5 * xv.dot(&y)));
        }
    }
    let eig = SymmetricEigen::new(mat);
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
    let norm = xv.norm();
    let mut acc = 0.0;
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        let proj = eig.eigenvectors.column(k).dot(&xv);
        if ev <= PD_RELATIVE_TOL * max {
            if proj.abs() > 1e-12 * norm.max(1.0) {
                return Ok(ExtendedReal::PosInfinity);
            }
        } else {
            acc += proj * proj / ev;
        }
    }
    Ok(ExtendedReal::Finite(0.5 * acc))
}

fn check_half_space(p: &ModelParams, normal: &[f64], offset: f64) -> Result<()> {
    check_finite(p, normal, "normal")?;
    if !offset.is_finite() {
        return domain("half-space offset must be finite");
    }
    Ok(())
}

/// `inf { Lambda*(x) : <u, x> >= c }` through the one-dimensional dual
/// `sup_{tau >= 0} tau c - Lambda(tau u)`.
pub fn ld_half_space_infimum(p: &ModelParams, normal: &[f64], offset: f64) -> Result<ExtendedReal> {
    check_half_space(p, normal, offset)?;
    let slope = |tau: f64| -> Result<f64> {
        let th: Vec<f64> = normal.iter().map(|u| tau * u).collect();
        let g = lambda_gradient(p, &th)?;
        Ok(offset - normal.iter().zip(&g).map(|(u, gi)| u * gi).sum::<f64>())
    };
    if slope(0.0)? <= 0.0 {
        return Ok(ExtendedReal::ZERO);
    }
    if normal.iter().all(|&u| u <= 0.0) {
        // The half-space misses the orthant: the dual grows without bound.
        return Ok(ExtendedReal::PosInfinity);
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while slope(hi)? > 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 {
            return Err(Error::NonConvergence {
                what: "half-space dual bracketing",
                iterations: doublings,
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    let th: Vec<f64> = normal.iter().map(|u| tau * u).collect();
    let value = tau * offset - lambda_limit(p, &th)?;
    Ok(ExtendedReal::Finite(value.max(0.0)))
}

/// `inf { Lambda~*(x) : <u, x> >= c } = c^2 / (2 <u, C u>)` for `c > 0`, else 0.
pub fn md_half_space_infimum(p: &ModelParams, normal: &[f64], offset: f64) -> Result<ExtendedReal> {
    check_half_space(p, normal, offset)?;
    if offset <= 0.0 {
        return Ok(ExtendedReal::ZERO);
    }
    let q = covariance_matrix(p).bilinear(normal, normal);
    if q <= 0.0 {
        return Ok(ExtendedReal::PosInfinity);
    }
    Ok(ExtendedReal::Finite(offset * offset / (2.0 * q)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(nu: f64) -> ModelParams {
        ModelParams::new(nu, vec![0.6, 0.9]).unwrap()
    }

    fn value(p: &ModelParams, x: &[f64]) -> f64 {
        rate_ld(p, x).unwrap().value.to_f64()
    }

    #[test]
    fn lambda_at_origin_and_nu_one() {
        assert_eq!(lambda_limit(&params(0.7), &[0.0, 0.0]).unwrap(), 0.0);
        let got = lambda_limit(&params(1.0), &[1.0, 0.0]).unwrap();
        let expected = 0.6 * std::f64::consts::E + 0.9 - 1.5;
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn lambda_handles_negative_infinity() {
        let p = params(0.7);
        let v = lambda_limit(&p, &[f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap();
        assert_eq!(v, -p.lambda_sum_root());
    }

    #[test]
    fn rate_vanishes_at_gradient() {
        let p = params(0.7);
        assert!(value(&p, &gradient_at_zero(&p)) <= 1e-14);
    }

    #[test]
    fn rate_at_origin_and_outside_orthant() {
        let p = params(0.7);
        let r = rate_ld(&p, &[0.0, 0.0]).unwrap();
        assert_eq!(r.value, ExtendedReal::Finite(p.lambda_sum_root()));
        let r = rate_ld(&p, &[-0.1, 1.0]).unwrap();
        assert!(r.value.is_pos_infinity() && r.maximizer.is_none());
    }

    #[test]
    fn boundary_maximizer_has_negative_infinity() {
        let r = rate_ld(&params(0.7), &[0.0, 1.0]).unwrap();
        let th = r.maximizer.unwrap();
        assert_eq!(th[0], ExtendedReal::NegInfinity);
        assert!(th[1].is_finite());
    }

    #[test]
    fn univariate_formula() {
        let (nu, l, x) = (0.7f64, 1.5f64, 2.0f64);
        let expected = x * ((nu * x).powf(nu) / l).ln() - nu * x + l.powf(1.0 / nu);
        let got = univariate_rate(nu, l, x).unwrap().to_f64();
        assert!((got - expected).abs() < 1e-14);
    }

    #[test]
    fn entropy_form_on_lambda_ray() {
        let p = params(0.7);
        let x = [0.8 * 0.6, 0.8 * 0.9];
        let h = rate_ld_entropy_form(&p, &x).unwrap();
        let i = univariate_rate(0.7, 1.5, 0.8 * 1.5).unwrap().to_f64();
        assert!((h - i).abs() < 1e-15);
        assert!(rate_ld_entropy_form(&p, &[-1.0, 1.0]).is_err());
    }

    #[test]
    fn relative_entropy_edges() {
        assert_eq!(
            relative_entropy(&[0.5, 0.5], &[0.5, 0.5]).unwrap(),
            ExtendedReal::ZERO
        );
        assert!(relative_entropy(&[0.5, 0.5], &[1.0, 0.0])
            .unwrap()
            .is_pos_infinity());
        assert_eq!(
            relative_entropy(&[1.0, 0.0], &[0.5, 0.5]).unwrap().to_f64(),
            2f64.ln()
        );
    }

    #[test]
    fn oracle_matches_closed_form_at_a_point() {
        let p = params(0.7);
        let x = [1.0, 0.5];
        let o = legendre_oracle(&p, &x, &LegendreConfig::default())
            .unwrap()
            .to_f64();
        assert!((o - value(&p, &x)).abs() < 1e-9, "{o}");
    }

    #[test]
    fn oracle_on_boundary_and_outside() {
        let p = params(0.7);
        let cfg = LegendreConfig::default();
        let o = legendre_oracle(&p, &[0.0, 1.2], &cfg).unwrap().to_f64();
        assert!((o - value(&p, &[0.0, 1.2])).abs() < 1e-9);
        let o = legendre_oracle(&p, &[0.0, 0.0], &cfg).unwrap().to_f64();
        assert!((o - p.lambda_sum_root()).abs() < 1e-9);
        assert!(legendre_oracle(&p, &[-0.5, 1.0], &cfg)
            .unwrap()
            .is_pos_infinity());
    }

    #[test]
    fn md_rate_cases() {
        assert_eq!(
            rate_md(&params(0.7), &[0.0, 0.0]).unwrap(),
            ExtendedReal::ZERO
        );
        let v = rate_md(&params(1.0), &[0.3, 0.3]).unwrap().to_f64();
        assert!((v - 0.125).abs() < 1e-15);
    }

    #[test]
    fn half_space_infima() {
        let p = params(0.7);
        let g = gradient_at_zero(&p);
        // A half-space containing the law of large numbers limit costs nothing.
        assert_eq!(
            ld_half_space_infimum(&p, &[1.0, 1.0], g[0] + g[1] - 0.1).unwrap(),
            ExtendedReal::ZERO
        );
        assert!(ld_half_space_infimum(&p, &[-1.0, 0.0], 0.5)
            .unwrap()
            .is_pos_infinity());
        // One coordinate of the nu = 1 model is a Poisson rate.
        let q = params(1.0);
        let got = ld_half_space_infimum(&q, &[1.0, 0.0], 0.9)
            .unwrap()
            .to_f64();
        let expected = univariate_rate(1.0, 0.6, 0.9).unwrap().to_f64();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        let md = md_half_space_infimum(&q, &[1.0, 0.0], 0.3)
            .unwrap()
            .to_f64();
        assert!((md - 0.09 / 1.2).abs() < 1e-15);
        assert_eq!(
            md_half_space_infimum(&q, &[1.0, 0.0], -0.3).unwrap(),
            ExtendedReal::ZERO
        );
    }
}
