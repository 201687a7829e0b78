//! Command-line front end. Exit status is 0 on success, 2 for invalid input
//! and 1 for numerical failures.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use fracpoisson::estimation::{estimate_nu, rate_j};
use fracpoisson::extended::{parse_extended, ExtendedReal};
use fracpoisson::harness::{run_experiment, ExperimentConfig};
use fracpoisson::large_deviations::{
    gradient_at_zero, legendre_oracle, rate_ld, rate_md, LegendreConfig,
};
use fracpoisson::model::{compositions, covariance_matrix, LatticePoint, ModelParams};
use fracpoisson::sampling::SampleBatch;
use fracpoisson::special::MlQuery;
use fracpoisson::Error;

#[derive(Parser)]
#[command(
    name = "fracpoisson",
    version,
    about = "Multivariate alternative fractional Poisson process: pmf, moments, \
             deviation rates, estimation of nu and Monte Carlo experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Io {
    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Model {
    /// Fractional order nu, 0 < nu <= 1.
    #[arg(long)]
    nu: f64,
    /// Intensities lambda_1,...,lambda_m > 0 (units 1/time^nu), comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    lambda: Vec<f64>,
}

impl Model {
    fn params(&self) -> fracpoisson::Result<ModelParams> {
        ModelParams::new(self.nu, self.lambda.clone())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Mittag-Leffler function E^gamma_{alpha,beta}(z) = sum_r (gamma)_r z^r / (r! Gamma(alpha r + beta)).
    ///
    /// With gamma = 1 this is E_{alpha,beta}(z) = sum_r z^r / Gamma(alpha r + beta).
    /// Use --log for arguments where the value exceeds the f64 range.
    Ml {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        /// Pochhammer exponent gamma >= 1.
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Argument z >= 0.
        #[arg(long)]
        z: f64,
        /// Report log E instead of E.
        #[arg(long)]
        log: bool,
        #[command(flatten)]
        io: Io,
    },
    /// Probability mass function of M(t).
    ///
    /// P(M(t) = k) = s(k)!/(k_1!...k_m!) prod lambda_i^k_i t^(nu s(k)) / Gamma(nu s(k) + 1) / E_{nu,1}(s(lambda) t^nu).
    /// Without --k, lists every lattice point with s(k) <= H, where H certifies
    /// a tail mass below 1e-12 (or --max-sum). With --marginal, lists
    /// P(s(M(t)) = h) = (s(lambda) t^nu)^h / Gamma(nu h + 1) / E_{nu,1}(s(lambda) t^nu) instead.
    Pmf {
        #[command(flatten)]
        model: Model,
        /// Time t > 0.
        #[arg(long)]
        t: f64,
        /// Single lattice point k_1,...,k_m.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<u64>>,
        /// Largest total listed.
        #[arg(long)]
        max_sum: Option<u64>,
        /// List the law of s(M(t)) rather than of M(t).
        #[arg(long)]
        marginal: bool,
        #[command(flatten)]
        io: Io,
    },
    /// Moment generating function E[exp(<theta, M(t)>)] = E_{nu,1}(sum lambda_i e^theta_i t^nu) / E_{nu,1}(s(lambda) t^nu).
    Mgf {
        #[command(flatten)]
        model: Model,
        /// Time t > 0.
        #[arg(long)]
        t: f64,
        /// theta_1,...,theta_m, comma separated.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        theta: Vec<f64>,
        #[command(flatten)]
        io: Io,
    },
    /// Mean E[M(t)] = E_{nu,nu}(z)/E_{nu,1}(z) (t^nu/nu) lambda with z = s(lambda) t^nu,
    /// the limit grad Lambda(0) = (1/nu) s(lambda)^(1/nu - 1) lambda of M(t)/t,
    /// and the covariance C of (M(t) - E M(t))/sqrt(t):
    /// c_jk = (1/nu)(1/nu - 1) s^(1/nu - 2) lambda_j lambda_k + [j = k] (1/nu) s^(1/nu - 1) lambda_j.
    Moments {
        #[command(flatten)]
        model: Model,
        /// Time t > 0.
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        io: Io,
    },
    /// Large deviation rate of M(t)/t:
    /// Lambda*(x) = sum x_i log(nu^nu x_i / (lambda_i s(x)^(1-nu))) - nu s(x) + s(lambda)^(1/nu)
    /// on x >= 0 (0 log 0 = 0), +inf otherwise, with the maximizing theta.
    RateLd {
        #[command(flatten)]
        model: Model,
        /// Point x_1,...,x_m (counts per unit time).
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        x: Vec<f64>,
        /// Also report the numerical supremum of <theta, x> - Lambda(theta).
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        io: Io,
    },
    /// Moderate deviation rate <x, C^-1 x>/2.
    RateMd {
        #[command(flatten)]
        model: Model,
        /// Point x_1,...,x_m.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        x: Vec<f64>,
        #[command(flatten)]
        io: Io,
    },
    /// Estimate nu from one observed total: nu_hat = g_a(sum/t), the inverse of
    /// f_a(x) = a^(1/x)/x with a = s(lambda) >= 1; a zero total gives "inf".
    Estimate {
        /// Accepted for clarity; nu is what is being estimated.
        #[arg(long)]
        nu_unknown: bool,
        /// Intensities lambda_1,...,lambda_m, comma separated, with s(lambda) >= 1.
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
        /// Observation time t > 0.
        #[arg(long)]
        t: f64,
        /// Observed total s(M(t)).
        #[arg(long)]
        sum: u64,
        #[command(flatten)]
        io: Io,
    },
    /// Rate of the estimator, J(nu_hat) = D((nu/nu_hat) s^(1/nu_hat); s^(1/nu)) with
    /// D(l1; l2) = l1 log(l1/l2) - l1 + l2 and s = s(lambda) >= 1.
    RateJ {
        #[command(flatten)]
        model: Model,
        /// Estimate nu_hat; "inf" is accepted.
        #[arg(long, allow_hyphen_values = true)]
        nu_hat: String,
        #[command(flatten)]
        io: Io,
    },
    /// Independent draws of M(t).
    Sample {
        #[command(flatten)]
        model: Model,
        /// Time t > 0.
        #[arg(long)]
        t: f64,
        /// Number of draws.
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Master seed; draws are reproducible for a fixed seed.
        #[arg(long, env = "FRACPOISSON_SEED", default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        io: Io,
    },
    /// Run a Monte Carlo experiment described by a JSON config and write
    /// <stem>.report.csv and <stem>.report.json.
    Experiment {
        /// Experiment config (JSON: kind, params, t_grid, n_per_t, event, seed, scaling)
        #[arg(long)]
        config: PathBuf,
        /// Report path stem; defaults to the config path without extension.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Either a single record or a list of records.
enum Output {
    Record(Value),
    Table(Vec<Value>),
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable output")
}

fn flatten_into(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, inner) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}_{k}")
                };
                flatten_into(&key, inner, out);
            }
        }
        Value::Array(items) if items.iter().all(|i| !i.is_object()) => {
            for (i, inner) in items.iter().enumerate() {
                flatten_into(&format!("{prefix}_{}", i + 1), inner, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn write_csv(records: &[Value], w: impl Write) -> Result<(), Error> {
    let mut writer = csv::Writer::from_writer(w);
    let mut header_written = false;
    for r in records {
        let mut cells = Vec::new();
        flatten_into("", r, &mut cells);
        if !header_written {
            writer
                .write_record(cells.iter().map(|(k, _)| k))
                .map_err(io_err)?;
            header_written = true;
        }
        writer
            .write_record(cells.iter().map(|(_, v)| v))
            .map_err(io_err)?;
    }
    writer.flush().map_err(io_err)
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Range(format!("output failed: {e}"))
}

fn emit(out: Output, io: &Io) -> Result<(), Error> {
    let mut buf = Vec::new();
    match io.format {
        Format::Json => {
            let v = match out {
                Output::Record(v) => v,
                Output::Table(rows) => Value::Array(rows),
            };
            serde_json::to_writer_pretty(&mut buf, &v).map_err(io_err)?;
            buf.push(b'\n');
        }
        Format::Csv => {
            let rows = match out {
                Output::Record(v) => vec![v],
                Output::Table(rows) => rows,
            };
            write_csv(&rows, &mut buf)?;
        }
    }
    match &io.output {
        Some(path) => std::fs::write(path, buf).map_err(io_err),
        None => std::io::stdout().write_all(&buf).map_err(io_err),
    }
}

fn pmf_record(k: &LatticePoint, log_pmf: f64) -> Value {
    json!({ "k": k.counts(), "sum": k.total(), "log_pmf": log_pmf, "pmf": log_pmf.exp() })
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Ml {
            alpha,
            beta,
            gamma,
            z,
            log,
            io,
        } => {
            let q = MlQuery::generalized(alpha, beta, gamma, z)?;
            let mut rec = Map::new();
            rec.insert("alpha".into(), json!(alpha));
            rec.insert("beta".into(), json!(beta));
            rec.insert("gamma".into(), json!(gamma));
            rec.insert("z".into(), json!(z));
            if log {
                rec.insert("log_value".into(), json!(q.log_value()?));
            } else {
                rec.insert("value".into(), json!(q.value()?));
            }
            emit(Output::Record(Value::Object(rec)), &io)
        }
        Command::Pmf {
            model,
            t,
            k,
            max_sum,
            marginal,
            io,
        } => {
            let p = model.params()?;
            let snap = p.at(t)?;
            if let Some(k) = k {
                let k = LatticePoint::new(k);
                let lp = snap.joint_log_pmf(&k)?;
                return emit(Output::Record(pmf_record(&k, lp)), &io);
            }
            let top = match max_sum {
                Some(h) => h,
                None => snap.truncation_bound()?,
            };
            let rows = if marginal {
                (0..=top)
                    .map(|h| {
                        let lp = snap.marginal_log_pmf(h);
                        json!({ "sum": h, "log_pmf": lp, "pmf": lp.exp() })
                    })
                    .collect()
            } else {
                let mut rows = Vec::new();
                for h in 0..=top {
                    for k in compositions(h, p.dim()) {
                        rows.push(pmf_record(&k, snap.joint_log_pmf(&k)?));
                    }
                }
                rows
            };
            emit(Output::Table(rows), &io)
        }
        Command::Mgf {
            model,
            t,
            theta,
            io,
        } => {
            let p = model.params()?;
            let log = p.at(t)?.log_mgf(&theta)?;
            let rec = json!({
                "theta": theta,
                "log_mgf": log,
                "mgf": ExtendedReal::from_f64(log.exp()),
            });
            emit(Output::Record(rec), &io)
        }
        Command::Moments { model, t, io } => {
            let p = model.params()?;
            let snap = p.at(t)?;
            let rec = json!({
                "t": t,
                "mean": snap.mean_vector()?,
                "rate_limit": gradient_at_zero(&p),
                "covariance_limit": covariance_matrix(&p),
            });
            emit(Output::Record(rec), &io)
        }
        Command::RateLd {
            model,
            x,
            oracle,
            io,
        } => {
            let p = model.params()?;
            let mut rec = to_value(&rate_ld(&p, &x)?);
            if oracle {
                let o = legendre_oracle(&p, &x, &LegendreConfig::default())?;
                rec["oracle_value"] = to_value(&o);
            }
            emit(Output::Record(rec), &io)
        }
        Command::RateMd { model, x, io } => {
            let p = model.params()?;
            let rec = json!({ "point": x, "value": rate_md(&p, &x)? });
            emit(Output::Record(rec), &io)
        }
        Command::Estimate {
            lambda, t, sum, io, ..
        } => {
            // nu is not used by the estimator; any admissible value will do.
            let p = ModelParams::new(1.0, lambda)?;
            let r = estimate_nu(&p, t, sum)?;
            emit(Output::Record(to_value(&r)), &io)
        }
        Command::RateJ { model, nu_hat, io } => {
            let p = model.params()?;
            let nh = parse_extended(&nu_hat)
                .ok_or_else(|| Error::Domain(format!("nu_hat is not a number: {nu_hat:?}")))?;
            let rec = json!({ "nu": p.nu(), "nu_hat": nh, "value": rate_j(&p, p.nu(), nh)? });
            emit(Output::Record(rec), &io)
        }
        Command::Sample {
            model,
            t,
            n,
            seed,
            io,
        } => {
            let p = model.params()?;
            let batch = SampleBatch::generate(&p, t, seed, n)?;
            let out = match io.format {
                Format::Json => Output::Record(to_value(&batch)),
                Format::Csv => Output::Table(
                    batch
                        .draws
                        .iter()
                        .enumerate()
                        .map(|(i, k)| json!({ "draw": i, "k": k.counts(), "sum": k.total() }))
                        .collect(),
                ),
            };
            emit(out, &io)
        }
        Command::Experiment {
            config,
            output,
            seed,
        } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let report = run_experiment(&cfg)?;
            let stem = output.unwrap_or_else(|| default_stem(&config));
            let (csv_path, json_path) = report.write_files(&stem)?;
            let summary = json!({
                "csv": csv_path.display().to_string(),
                "json": json_path.display().to_string(),
                "analytic_rate": report.analytic_rate,
                "verdict": report.verdict,
            });
            let io = Io {
                format: Format::Json,
                output: None,
            };
            emit(Output::Record(summary), &io)
        }
    }
}

fn default_stem(config: &Path) -> PathBuf {
    config.with_extension("")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
