//! The multivariate alternative fractional Poisson process at a fixed time.
//!
//! Given `s(M(t)) = h`, the components of `M(t)` are multinomial with
//! probabilities `lambda_i / s(lambda)`. The total itself follows the
//! alternative fractional Poisson law
//!
//! ```text
//! P(s(M(t)) = h) = (s(lambda) t^nu)^h / Gamma(nu h + 1) / E_{nu,1}(s(lambda) t^nu)
//! ```
//!
//! All probabilities are kept in log space; `Gamma(nu h + 1)` overflows long
//! before the probabilities become negligible.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::{ln_factorial, ln_gamma, CompensatedSum, LN_F64_MAX};
use crate::special::{
    log_generalized_mittag_leffler, log_mittag_leffler, ml_ratio_nu_nu_over_nu_1,
};

/// Tail mass left outside the certified truncation of the total count.
pub const TAIL_TOLERANCE: f64 = 1e-12;

const TRUNCATION_CAP: u64 = 1 << 32;

/// Fractional order `nu` in `(0, 1]` and intensities `lambda_i > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    nu: f64,
    lambda: Vec<f64>,
    lambda_sum: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    nu: f64,
    lambda: Vec<f64>,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.nu, raw.lambda)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            nu: p.nu,
            lambda: p.lambda,
        }
    }
}

impl ModelParams {
    pub fn new(nu: f64, lambda: Vec<f64>) -> Result<Self> {
        if !(nu > 0.0 && nu <= 1.0) {
            return domain(format!("nu must lie in (0, 1], got {nu}"));
        }
        if lambda.is_empty() {
            return domain("lambda must have at least one component");
        }
        if let Some(bad) = lambda.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return domain(format!(
                "every lambda component must be positive and finite, got {bad}"
            ));
        }
        let lambda_sum = lambda.iter().sum();
        Ok(Self {
            nu,
            lambda,
            lambda_sum,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Dimension `m`.
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// `s(lambda)`.
    pub fn lambda_sum(&self) -> f64 {
        self.lambda_sum
    }

    /// `s(lambda)^(1/nu)`.
    pub fn lambda_sum_root(&self) -> f64 {
        self.lambda_sum.powf(1.0 / self.nu)
    }

    /// Same intensities with a different fractional order.
    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        ModelParams::new(nu, self.lambda.clone())
    }

    pub(crate) fn check_dim(&self, len: usize, what: &str) -> Result<()> {
        if len != self.dim() {
            return domain(format!(
                "{what} has {len} components but the model has dimension {}",
                self.dim()
            ));
        }
        Ok(())
    }

    /// The law of `M(t)` at a fixed `t > 0`, with the normalizer cached.
    pub fn at(&self, t: f64) -> Result<Snapshot<'_>> {
        Snapshot::new(self, t)
    }
}

/// A point `k` of the non-negative integer lattice together with `s(k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticePoint {
    counts: Vec<u64>,
    total: u64,
}

impl LatticePoint {
    pub fn new(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `s(k)`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }
}

/// All points of `{k in N^m : s(k) = total}` in lexicographically
/// decreasing order of the first coordinate.
pub fn compositions(total: u64, m: usize) -> Compositions {
    assert!(m >= 1, "dimension must be positive");
    let mut first = vec![0; m];
    first[0] = total;
    Compositions {
        current: Some(first),
        total,
    }
}

pub struct Compositions {
    current: Option<Vec<u64>>,
    total: u64,
}

impl Iterator for Compositions {
    type Item = LatticePoint;

    fn next(&mut self) -> Option<LatticePoint> {
        let current = self.current.take()?;
        let m = current.len();
        if current[m - 1] != self.total {
            let mut next = current.clone();
            let i = (0..m - 1)
                .rev()
                .find(|&i| next[i] > 0)
                .expect("non-final composition");
            next[i] -= 1;
            let carried = next[m - 1];
            next[m - 1] = 0;
            next[i + 1] = carried + 1;
            self.current = Some(next);
        }
        Some(LatticePoint {
            counts: current,
            total: self.total,
        })
    }
}

/// All points with `s(k) <= max_total`, grouped by increasing total.
pub fn lattice_up_to(m: usize, max_total: u64) -> impl Iterator<Item = LatticePoint> {
    (0..=max_total).flat_map(move |h| compositions(h, m))
}

/// `M(t)` at one fixed time.
#[derive(Debug, Clone)]
pub struct Snapshot<'a> {
    params: &'a ModelParams,
    t: f64,
    ln_t: f64,
    ln_z: f64,
    log_norm: f64,
}

impl<'a> Snapshot<'a> {
    fn new(params: &'a ModelParams, t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return domain(format!("t must be positive and finite, got {t}"));
        }
        let ln_t = t.ln();
        let ln_z = params.lambda_sum.ln() + params.nu * ln_t;
        let log_norm = log_mittag_leffler(params.nu, 1.0, ln_z.exp())?;
        Ok(Self {
            params,
            t,
            ln_t,
            ln_z,
            log_norm,
        })
    }

    pub fn params(&self) -> &ModelParams {
        self.params
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `s(lambda) t^nu`.
    pub fn z(&self) -> f64 {
        self.ln_z.exp()
    }

    /// `log E_{nu,1}(s(lambda) t^nu)`.
    pub fn log_normalizer(&self) -> f64 {
        self.log_norm
    }

    /// `log P(s(M(t)) = h)`.
    pub fn marginal_log_pmf(&self, h: u64) -> f64 {
        let hf = h as f64;
        let mut acc = CompensatedSum::new();
        if h > 0 {
            acc.add(hf * self.params.lambda_sum.ln());
            acc.add(hf * (self.params.nu * self.ln_t));
        }
        acc.add(-ln_gamma(self.params.nu * hf + 1.0));
        acc.add(-self.log_norm);
        acc.value()
    }

    /// `log P(M(t) = k)` from the closed form
    /// `s(k)!/prod k_i! prod lambda_i^k_i (t^nu)^s(k) / Gamma(nu s(k) + 1) / E_{nu,1}(s(lambda) t^nu)`.
    pub fn joint_log_pmf(&self, k: &LatticePoint) -> Result<f64> {
        self.params.check_dim(k.dim(), "lattice point")?;
        let nu = self.params.nu;
        let total = k.total() as f64;
        let mut acc = multinomial_pieces(k, &self.params.lambda);
        if k.total() > 0 {
            acc.add(total * (nu * self.ln_t));
        }
        acc.add(-ln_gamma(nu * total + 1.0));
        acc.add(-self.log_norm);
        Ok(acc.value())
    }

    /// Ratio `P(s = h + 1) / P(s = h)`, non-increasing in `h`.
    fn log_term_ratio(&self, h: u64) -> f64 {
        let nh = self.params.nu * h as f64;
        self.ln_z + ln_gamma(nh + 1.0) - ln_gamma(nh + self.params.nu + 1.0)
    }

    /// Smallest `H` for which `P(s(M(t)) > H) < tol` is certified by
    /// geometric domination of the tail: once the term ratio `rho(H) < 1`,
    /// the tail is at most `P(s = H) rho / (1 - rho)`.
    pub fn truncation_bound_with(&self, tol: f64) -> Result<u64> {
        if !(tol > 0.0 && tol < 1.0) {
            return domain(format!("tail tolerance must lie in (0, 1), got {tol}"));
        }
        let ln_tol = tol.ln();
        for h in 0..TRUNCATION_CAP {
            let ln_rho = self.log_term_ratio(h);
            if ln_rho < 0.0 {
                let ln_tail = self.marginal_log_pmf(h) + ln_rho - (-ln_rho.exp()).ln_1p();
                if ln_tail < ln_tol {
                    return Ok(h);
                }
            }
        }
        Err(Error::NonConvergence {
            what: "tail truncation",
            iterations: TRUNCATION_CAP as usize,
        })
    }

    pub fn truncation_bound(&self) -> Result<u64> {
        self.truncation_bound_with(TAIL_TOLERANCE)
    }

    /// `log E[exp(<theta, M(t)>)] = log E_{nu,1}(sum lambda_i e^theta_i t^nu) - log E_{nu,1}(s(lambda) t^nu)`.
    pub fn log_mgf(&self, theta: &[f64]) -> Result<f64> {
        self.params.check_dim(theta.len(), "theta")?;
        if theta.iter().any(|x| !x.is_finite()) {
            return domain("theta must be finite");
        }
        let tilted: f64 = self
            .params
            .lambda
            .iter()
            .zip(theta)
            .map(|(l, th)| l * th.exp())
            .sum();
        let ln_arg = tilted.ln() + self.params.nu * self.ln_t;
        let num = log_mittag_leffler(self.params.nu, 1.0, ln_arg.exp())?;
        Ok(num - self.log_norm)
    }

    pub fn mgf(&self, theta: &[f64]) -> Result<f64> {
        let log = self.log_mgf(theta)?;
        if log > LN_F64_MAX {
            return Err(Error::Range(format!(
                "moment generating function exp({log}) overflows f64; use log_mgf"
            )));
        }
        Ok(log.exp())
    }

    /// `E[M(t)] = E_{nu,nu}(z)/E_{nu,1}(z) (t^nu / nu) lambda` with `z = s(lambda) t^nu`.
    pub fn mean_vector(&self) -> Result<Vec<f64>> {
        let nu = self.params.nu;
        let ratio = ml_ratio_nu_nu_over_nu_1(nu, self.z())?;
        let scale = ratio * (nu * self.ln_t).exp() / nu;
        Ok(self.params.lambda.iter().map(|l| scale * l).collect())
    }

    /// The same mean through the three-parameter function:
    /// `E^2_{nu,nu+1}(z)/E_{nu,1}(z) t^nu lambda`.
    pub fn mean_vector_generalized(&self) -> Result<Vec<f64>> {
        let nu = self.params.nu;
        let num = log_generalized_mittag_leffler(nu, nu + 1.0, 2.0, self.z())?;
        let scale = (num - self.log_norm + nu * self.ln_t).exp();
        Ok(self.params.lambda.iter().map(|l| scale * l).collect())
    }
}

/// `log[s(k)!/(k_1!...k_m!) prod (lambda_i/s(lambda))^k_i]`; free of `t` and `nu`.
pub fn conditional_multinomial_log_pmf(p: &ModelParams, k: &LatticePoint) -> Result<f64> {
    p.check_dim(k.dim(), "lattice point")?;
    let mut acc = multinomial_pieces(k, &p.lambda);
    if k.total() > 0 {
        acc.add(-(k.total() as f64 * p.lambda_sum.ln()));
    }
    Ok(acc.value())
}

/// `log s(k)! - sum log k_i! + sum k_i log lambda_i`, accumulated without
/// reassociating: the factorials are large and nearly cancel, and the
/// joint, conditional and marginal laws must agree to an ulp or so.
fn multinomial_pieces(k: &LatticePoint, lambda: &[f64]) -> CompensatedSum {
    let mut acc = CompensatedSum::new();
    acc.add(ln_factorial(k.total()));
    for (&ki, &li) in k.counts().iter().zip(lambda) {
        if ki > 0 {
            acc.add(-ln_factorial(ki));
            acc.add(ki as f64 * li.ln());
        }
    }
    acc
}

pub fn marginal_sum_log_pmf(p: &ModelParams, t: f64, h: u64) -> Result<f64> {
    Ok(p.at(t)?.marginal_log_pmf(h))
}

pub fn joint_log_pmf(p: &ModelParams, t: f64, k: &LatticePoint) -> Result<f64> {
    p.at(t)?.joint_log_pmf(k)
}

/// `log w(h) = log h! - log Gamma(nu h + 1)`.
pub fn log_weight(p: &ModelParams, h: u64) -> f64 {
    ln_factorial(h) - ln_gamma(p.nu * h as f64 + 1.0)
}

/// Weighted-Poisson weight `w(h) = h! / Gamma(nu h + 1)`; may be `+inf`
/// for very large `h`.
pub fn weight_function(p: &ModelParams, h: u64) -> f64 {
    log_weight(p, h).exp()
}

pub fn mgf(p: &ModelParams, t: f64, theta: &[f64]) -> Result<f64> {
    p.at(t)?.mgf(theta)
}

pub fn mean_vector(p: &ModelParams, t: f64) -> Result<Vec<f64>> {
    p.at(t)?.mean_vector()
}

/// Symmetric `m x m` matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct CovarianceMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl CovarianceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return domain("covariance matrix must be square and non-empty");
        }
        Ok(Self {
            dim,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.dim + k]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    /// `<x, C y>`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.dim {
            for k in 0..self.dim {
                acc += x[j] * self.get(j, k) * y[k];
            }
        }
        acc
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.to_matrix())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Smallest eigenvalue exceeds `rel_tol` times the largest.
    pub fn is_positive_definite(&self, rel_tol: f64) -> bool {
        let ev = self.eigenvalues();
        let max = *ev.last().unwrap();
        max > 0.0 && ev[0] > rel_tol * max
    }
}

impl From<CovarianceMatrix> for Vec<Vec<f64>> {
    fn from(c: CovarianceMatrix) -> Self {
        c.rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for CovarianceMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        CovarianceMatrix::from_rows(rows)
    }
}

/// The limiting covariance `C`:
///
/// ```text
/// c_jk = (1/nu)(1/nu - 1) s^(1/nu - 2) lambda_j lambda_k  + [j = k] (1/nu) s^(1/nu - 1) lambda_j
/// ```
pub fn covariance_matrix(p: &ModelParams) -> CovarianceMatrix {
    let nu = p.nu;
    let s = p.lambda_sum;
    let m = p.dim();
    let cross = (1.0 / nu) * (1.0 / nu - 1.0) * s.powf(1.0 / nu - 2.0);
    let diag = (1.0 / nu) * s.powf(1.0 / nu - 1.0);
    let mut entries = vec![0.0; m * m];
    for j in 0..m {
        entries[j * m + j] = cross * p.lambda[j] * p.lambda[j] + diag * p.lambda[j];
        for k in j + 1..m {
            let c = cross * p.lambda[j] * p.lambda[k];
            entries[j * m + k] = c;
            entries[k * m + j] = c;
        }
    }
    CovarianceMatrix { dim: m, entries }
}
