//! Monte Carlo experiments that put the deviation rates to an empirical test.
//!
//! For each `t` on the grid the harness draws `n_per_t` independent copies
//! of `M(t)`, counts how often the scaled statistic lands in the event, and
//! compares `v_t log p_hat` with minus the analytic infimum of the rate over
//! the event. Draws are split into fixed-size blocks, each with its own
//! stream keyed by `(seed, t index, block index)`, and the per-block counts
//! are combined in block order, so reports do not depend on scheduling.
//!
//! # Report schema
//!
//! CSV has one record per `t` with the columns of [`ReportRow`]; censored
//! cells (zero hits) and gaps against an infinite target are empty. JSON
//! holds the whole [`ExperimentReport`], with infinite rates written as
//! the strings `"inf"` / `"-inf"`.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{rate_j, Estimator};
use crate::extended::ExtendedReal;
use crate::large_deviations::{ld_half_space_infimum, md_half_space_infimum};
use crate::model::{covariance_matrix, ModelParams};
use crate::sampling::{stream_rng, SumSampler, VectorSampler};

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

/// Replications per RNG stream. Part of the reproducibility contract:
/// changing it changes every report.
pub const BLOCK_SIZE: u64 = 8192;

pub const MIN_REPLICATIONS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    /// `M(t)/t` against `Lambda*`, speed `t`.
    Ld,
    /// `sqrt(t a_t)(M(t) - E M(t))/t` against the quadratic rate, speed `1/a_t`.
    Md,
    /// The estimator of `nu` against `J_nu`, speed `t`.
    Estimator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    /// `{x : <normal, x> >= offset}`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// `{nu_hat >= k}`.
    EstimatorAtLeast { k: f64 },
    /// `{nu_hat <= k}`.
    EstimatorAtMost { k: f64 },
}

/// The scaling `a_t`; the speed of the report is `1/a_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scaling {
    /// `a_t = 1/t`: large deviations.
    InverseT,
    /// `a_t = 1`: the central limit regime.
    Unit,
    /// `a_t = t^-p` with `0 < p < 1`: moderate deviations.
    Power { p: f64 },
}

impl Scaling {
    pub fn a_t(&self, t: f64) -> f64 {
        match self {
            Scaling::InverseT => 1.0 / t,
            Scaling::Unit => 1.0,
            Scaling::Power { p } => t.powf(-p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub params: ModelParams,
    pub t_grid: Vec<f64>,
    pub n_per_t: u64,
    pub event: Event,
    pub seed: u64,
    #[serde(default = "default_scaling")]
    pub scaling: Scaling,
}

fn default_scaling() -> Scaling {
    Scaling::InverseT
}

fn config_error<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() {
            return config_error("t_grid must not be empty");
        }
        if self.t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return config_error("t_grid entries must be positive and finite");
        }
        if self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return config_error("t_grid must be strictly increasing");
        }
        if self.n_per_t < MIN_REPLICATIONS {
            return config_error(format!("n_per_t must be at least {MIN_REPLICATIONS}"));
        }
        match (&self.kind, &self.event) {
            (ExperimentKind::Ld | ExperimentKind::Md, Event::HalfSpace { normal, offset }) => {
                self.params.check_dim(normal.len(), "event normal")?;
                if normal.iter().chain([offset]).any(|v| !v.is_finite()) {
                    return config_error("half-space normal and offset must be finite");
                }
            }
            (ExperimentKind::Estimator, Event::EstimatorAtLeast { k }) => {
                if k.is_nan() || *k < self.params.nu() {
                    return config_error(format!(
                        "upper critical region needs k >= nu0 = {}, got {k}",
                        self.params.nu()
                    ));
                }
            }
            (ExperimentKind::Estimator, Event::EstimatorAtMost { k }) => {
                if !(*k > 0.0 && *k <= self.params.nu()) {
                    return config_error(format!(
                        "lower critical region needs 0 < k <= nu0 = {}, got {k}",
                        self.params.nu()
                    ));
                }
            }
            (kind, _) => {
                return config_error(format!("event type does not fit a {kind:?} experiment"))
            }
        }
        match (self.kind, self.scaling) {
            (ExperimentKind::Ld | ExperimentKind::Estimator, Scaling::InverseT) => {}
            (ExperimentKind::Md, Scaling::Unit) => {}
            (ExperimentKind::Md, Scaling::Power { p }) if p > 0.0 && p < 1.0 => {}
            (ExperimentKind::Md, _) => {
                return config_error(
                    "moderate deviations need a_t = 1 or a_t = t^-p with 0 < p < 1",
                )
            }
            (kind, _) => return config_error(format!("{kind:?} experiments use a_t = 1/t")),
        }
        if self.kind == ExperimentKind::Estimator {
            Estimator::new(&self.params)?;
        }
        Ok(())
    }
}

/// Wilson score interval for `hits` successes out of `n`.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if hits == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if hits == n {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub t: f64,
    pub n: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// `1/a_t`-speed factor `a_t` multiplying `log p`.
    pub a_t: f64,
    pub scaled_log_p: Option<f64>,
    pub scaled_log_p_low: Option<f64>,
    pub scaled_log_p_high: Option<f64>,
    /// `|scaled_log_p - target|`.
    pub gap: Option<f64>,
    /// Smallest and largest distance from the target over the Wilson interval.
    pub gap_low: Option<f64>,
    pub gap_high: Option<f64>,
    pub censored: bool,
}

impl ReportRow {
    fn new(t: f64, n: u64, hits: u64, a_t: f64, target: ExtendedReal) -> Self {
        let (lo, hi) = wilson_interval(hits, n, WILSON_Z);
        let censored = hits == 0;
        let scale = |p: f64| if censored { None } else { Some(a_t * p.ln()) };
        let scaled = scale(hits as f64 / n as f64);
        let scaled_low = scale(lo);
        let scaled_high = scale(hi);
        let (gap, gap_low, gap_high) = match (target.finite(), scaled, scaled_low, scaled_high) {
            (Some(target), Some(x), Some(a), Some(b)) => {
                let inside = a <= target && target <= b;
                let near = if inside {
                    0.0
                } else {
                    (a - target).abs().min((b - target).abs())
                };
                let far = (a - target).abs().max((b - target).abs());
                (Some((x - target).abs()), Some(near), Some(far))
            }
            _ => (None, None, None),
        };
        Self {
            t,
            n,
            hits,
            p_hat: hits as f64 / n as f64,
            wilson_low: lo,
            wilson_high: hi,
            a_t,
            scaled_log_p: scaled,
            scaled_log_p_low: scaled_low,
            scaled_log_p_high: scaled_high,
            gap,
            gap_low,
            gap_high,
            censored,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    /// The last gap interval lies strictly below the first.
    Shrinking,
    NotShrinking,
    /// Fewer than two uncensored rows with a finite target.
    Inconclusive,
    /// No hits at any `t`; the event is too rare for `n_per_t`.
    Censored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub trend: Trend,
    /// Comparison of point estimates only; informational.
    pub point_gap_shrinking: Option<bool>,
    pub first_t: Option<f64>,
    pub last_t: Option<f64>,
    pub final_gap: Option<f64>,
    pub final_gap_high: Option<f64>,
    /// Final gaps divided by the analytic rate.
    pub relative_final_gap: Option<f64>,
    pub relative_final_gap_high: Option<f64>,
}

impl Verdict {
    fn from_rows(rows: &[ReportRow], rate: ExtendedReal) -> Self {
        let usable: Vec<&ReportRow> = rows.iter().filter(|r| r.gap.is_some()).collect();
        let mut v = Verdict {
            trend: if rows.iter().all(|r| r.censored) {
                Trend::Censored
            } else {
                Trend::Inconclusive
            },
            point_gap_shrinking: None,
            first_t: None,
            last_t: None,
            final_gap: None,
            final_gap_high: None,
            relative_final_gap: None,
            relative_final_gap_high: None,
        };
        let (Some(first), Some(last)) = (usable.first(), usable.last()) else {
            return v;
        };
        v.first_t = Some(first.t);
        v.last_t = Some(last.t);
        v.final_gap = last.gap;
        v.final_gap_high = last.gap_high;
        if let Some(r) = rate.finite().filter(|r| *r > 0.0) {
            v.relative_final_gap = last.gap.map(|g| g / r);
            v.relative_final_gap_high = last.gap_high.map(|g| g / r);
        }
        if usable.len() >= 2 {
            v.point_gap_shrinking = Some(last.gap < first.gap);
            v.trend = if last.gap_high < first.gap_low {
                Trend::Shrinking
            } else {
                Trend::NotShrinking
            };
        }
        v
    }
}

/// Empirical covariance of `(M(t) - E M(t))/sqrt(t)` next to `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCheck {
    pub t: f64,
    pub n: u64,
    pub empirical: Vec<Vec<f64>>,
    pub limit: Vec<Vec<f64>>,
    /// `max_jk |empirical_jk - c_jk| / |c_jk|`.
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Infimum of the rate over the event.
    pub analytic_rate: ExtendedReal,
    /// The limit predicted for `a_t log p`, minus `analytic_rate`.
    pub target: ExtendedReal,
    pub rows: Vec<ReportRow>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub covariance: Vec<CovarianceCheck>,
}

fn negate(v: ExtendedReal) -> ExtendedReal {
    match v {
        ExtendedReal::PosInfinity => ExtendedReal::NegInfinity,
        ExtendedReal::NegInfinity => ExtendedReal::PosInfinity,
        ExtendedReal::Finite(x) => ExtendedReal::Finite(-x),
    }
}

#[derive(Debug, Clone, Default)]
struct BlockStats {
    hits: u64,
    sum: Vec<f64>,
    outer: Vec<f64>,
}

/// Runs `n` replications in blocks and folds the block results in order.
fn run_blocks<F>(n: u64, per_block: F) -> Result<BlockStats>
where
    F: Fn(u64, u64) -> Result<BlockStats> + Sync,
{
    let blocks = n.div_ceil(BLOCK_SIZE);
    let parts: Vec<Result<BlockStats>> = (0..blocks)
        .into_par_iter()
        .map(|b| per_block(b, BLOCK_SIZE.min(n - b * BLOCK_SIZE)))
        .collect();
    let mut total = BlockStats::default();
    for part in parts {
        let part = part?;
        total.hits += part.hits;
        if total.sum.is_empty() {
            total.sum = part.sum;
            total.outer = part.outer;
        } else {
            for (a, b) in total.sum.iter_mut().zip(&part.sum) {
                *a += b;
            }
            for (a, b) in total.outer.iter_mut().zip(&part.outer) {
                *a += b;
            }
        }
    }
    Ok(total)
}

fn half_space(cfg: &ExperimentConfig) -> Result<(&[f64], f64)> {
    match &cfg.event {
        Event::HalfSpace { normal, offset } => Ok((normal, *offset)),
        _ => config_error("expected a half-space event"),
    }
}

fn check_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    cfg.validate()?;
    if cfg.kind != kind {
        return config_error(format!(
            "expected a {kind:?} experiment, got {:?}",
            cfg.kind
        ));
    }
    Ok(())
}

fn finish(
    cfg: &ExperimentConfig,
    rate: ExtendedReal,
    hits: Vec<u64>,
    covariance: Vec<CovarianceCheck>,
) -> ExperimentReport {
    let target = negate(rate);
    let rows: Vec<ReportRow> = cfg
        .t_grid
        .iter()
        .zip(hits)
        .map(|(&t, h)| ReportRow::new(t, cfg.n_per_t, h, cfg.scaling.a_t(t), target))
        .collect();
    let verdict = Verdict::from_rows(&rows, rate);
    ExperimentReport {
        config: cfg.clone(),
        analytic_rate: rate,
        target,
        rows,
        verdict,
        covariance,
    }
}

/// `P(<u, M(t)/t> >= c)` against `-inf { Lambda*(x) : <u, x> >= c }`.
pub fn run_ld_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    check_kind(cfg, ExperimentKind::Ld)?;
    let (normal, offset) = half_space(cfg)?;
    let rate = ld_half_space_infimum(&cfg.params, normal, offset)?;
    let mut hits = Vec::with_capacity(cfg.t_grid.len());
    for (ti, &t) in cfg.t_grid.iter().enumerate() {
        let sampler = VectorSampler::new(&cfg.params, t)?;
        let stats = run_blocks(cfg.n_per_t, |b, len| {
            let mut rng = stream_rng(cfg.seed, ti as u64, b);
            let mut h = 0;
            let mut k = vec![0u64; sampler.dim()];
            for _ in 0..len {
                sampler.sample_into(&mut rng, &mut k);
                let dot: f64 = k.iter().zip(normal).map(|(&c, u)| c as f64 / t * u).sum();
                h += u64::from(dot >= offset);
            }
            Ok(BlockStats {
                hits: h,
                ..Default::default()
            })
        })?;
        hits.push(stats.hits);
    }
    Ok(finish(cfg, rate, hits, Vec::new()))
}

/// `P(<u, X_t> >= c)` for `X_t = sqrt(t a_t)(M(t) - E M(t))/t`, against
/// `-inf { x' C^-1 x / 2 : <u, x> >= c }` at speed `1/a_t`. With `a_t = 1`
/// the report also carries the empirical covariance of `X_t`.
pub fn run_md_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    check_kind(cfg, ExperimentKind::Md)?;
    let (normal, offset) = half_space(cfg)?;
    let rate = md_half_space_infimum(&cfg.params, normal, offset)?;
    let with_cov = cfg.scaling == Scaling::Unit;
    let m = cfg.params.dim();
    let limit = covariance_matrix(&cfg.params);
    let mut hits = Vec::with_capacity(cfg.t_grid.len());
    let mut covariance = Vec::new();
    for (ti, &t) in cfg.t_grid.iter().enumerate() {
        let snap = cfg.params.at(t)?;
        let mean = snap.mean_vector()?;
        let factor = (t * cfg.scaling.a_t(t)).sqrt() / t;
        let sampler = VectorSampler::new(&cfg.params, t)?;
        let stats = run_blocks(cfg.n_per_t, |b, len| {
            let mut rng = stream_rng(cfg.seed, ti as u64, b);
            let mut out = BlockStats {
                hits: 0,
                sum: vec![0.0; if with_cov { m } else { 0 }],
                outer: vec![0.0; if with_cov { m * m } else { 0 }],
            };
            let mut x = vec![0.0; m];
            let mut k = vec![0u64; m];
            for _ in 0..len {
                sampler.sample_into(&mut rng, &mut k);
                for i in 0..m {
                    x[i] = factor * (k[i] as f64 - mean[i]);
                }
                let dot: f64 = x.iter().zip(normal).map(|(a, u)| a * u).sum();
                out.hits += u64::from(dot >= offset);
                if with_cov {
                    for i in 0..m {
                        out.sum[i] += x[i];
                        for j in 0..m {
                            out.outer[i * m + j] += x[i] * x[j];
                        }
                    }
                }
            }
            Ok(out)
        })?;
        hits.push(stats.hits);
        if with_cov {
            let n = cfg.n_per_t as f64;
            let mut empirical = vec![vec![0.0; m]; m];
            let mut worst = 0.0f64;
            for i in 0..m {
                for j in 0..m {
                    let c = (stats.outer[i * m + j] - stats.sum[i] * stats.sum[j] / n) / (n - 1.0);
                    empirical[i][j] = c;
                    let reference = limit.get(i, j);
                    worst = worst.max(((c - reference) / reference).abs());
                }
            }
            covariance.push(CovarianceCheck {
                t,
                n: cfg.n_per_t,
                empirical,
                limit: limit.rows(),
                max_relative_error: worst,
            });
        }
    }
    Ok(finish(cfg, rate, hits, covariance))
}

/// First-kind error of the threshold test on the estimator of `nu`, with
/// draws taken under `nu0 = params.nu`, against `-J_{nu0}(k)`.
pub fn run_estimator_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    check_kind(cfg, ExperimentKind::Estimator)?;
    let p = &cfg.params;
    let (k, upper) = match cfg.event {
        Event::EstimatorAtLeast { k } => (k, true),
        Event::EstimatorAtMost { k } => (k, false),
        Event::HalfSpace { .. } => return config_error("expected an estimator event"),
    };
    let rate = rate_j(p, p.nu(), ExtendedReal::Finite(k))?;
    let estimator = Estimator::new(p)?;
    let mut hits = Vec::with_capacity(cfg.t_grid.len());
    for (ti, &t) in cfg.t_grid.iter().enumerate() {
        let sampler = SumSampler::new(p, t)?;
        // The estimate depends on the draw only through s(M(t)), so the
        // critical region is tabulated once per total.
        let rejects = (0..=sampler.support_max())
            .map(|h| {
                let nu_hat = estimator.estimate(t, h)?.nu_hat;
                let bound = ExtendedReal::Finite(k);
                Ok(if upper {
                    nu_hat >= bound
                } else {
                    nu_hat <= bound
                })
            })
            .collect::<Result<Vec<bool>>>()?;
        let stats = run_blocks(cfg.n_per_t, |b, len| {
            let mut rng = stream_rng(cfg.seed, ti as u64, b);
            let mut h = 0;
            for _ in 0..len {
                h += u64::from(rejects[sampler.sample(&mut rng) as usize]);
            }
            Ok(BlockStats {
                hits: h,
                ..Default::default()
            })
        })?;
        hits.push(stats.hits);
    }
    Ok(finish(cfg, rate, hits, Vec::new()))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.kind {
        ExperimentKind::Ld => run_ld_experiment(cfg),
        ExperimentKind::Md => run_md_experiment(cfg),
        ExperimentKind::Estimator => run_estimator_experiment(cfg),
    }
}

impl ExperimentReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row).map_err(io_error)?;
        }
        w.flush().map_err(io_error)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(io_error)
    }

    /// Writes `<stem>.report.csv` and `<stem>.report.json`.
    pub fn write_files(&self, stem: &Path) -> Result<(PathBuf, PathBuf)> {
        let csv_path = with_suffix(stem, ".report.csv");
        let json_path = with_suffix(stem, ".report.json");
        std::fs::write(&csv_path, self.to_csv_string()?).map_err(io_error)?;
        let mut json = self.to_json_string()?;
        json.push('\n');
        std::fs::write(&json_path, json).map_err(io_error)?;
        Ok((csv_path, json_path))
    }
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn io_error(e: impl std::fmt::Display) -> Error {
    Error::Config(format!("writing report: {e}"))
}
