//! Command-line front end.
//!
//! Every stochastic subcommand requires an explicit `--seed` (there is no
//! wall-clock fallback); replicate r always draws from stream `--stream + r`,
//! so `--workers` changes wall time but never output bytes. CSV outputs start
//! with a comment line `# spectral-mdp v<semver> config=<JSON>` echoing the
//! parameters that produced the file, followed by a header row; floats carry
//! 17 significant digits, with infinities spelled `inf`/`-inf`.
//!
//! Exit codes: 0 on success, 2 on usage errors (from the argument parser),
//! 1 on domain or numeric failures, reported as one `error: ...` line on
//! standard error.

use std::fs;
use std::io::{self, Read as _, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use spectral_mdp::combinatorics::{dk_matrix, gen_catalan};
use spectral_mdp::ensembles::{
    estimate_moment_covariance, moment_vector, sample_tridiagonal, spectral_measure_with,
    EnsembleSpec, RngState,
};
use spectral_mdp::measures::{ReferenceMeasure, SignedMeasureRep, SpectralMeasure};
use spectral_mdp::mdp::{
    measure_rate, moment_rate, projection_partial_sums, scalar_mdp_table, scalar_rate,
    MdpTableOptions, ScalarRateKind, ScalarRateSpec, SpeedSchedule,
};
use spectral_mdp::orthopoly::{
    canonical_from_z, coeffs_from_moments, coeffs_from_moments_unguarded, coeffs_from_z,
    gauss_quadrature, moments_from_coeffs, z_from_canonical, z_from_coeffs, CanonicalMoments,
    EigenWorkspace, MomentVector, RecursionCoefficients, RecursionVariables,
};
use spectral_mdp::{Ensemble, Error, Result};

#[derive(Parser)]
#[command(
    name = "spectral-mdp",
    version,
    about = "Random spectral measures of classical matrix ensembles and their moderate-deviation rate functions"
)]
struct Cli {
    /// Worker threads for replicated sampling (default: SPECTRAL_MDP_WORKERS,
    /// else one per core). Affects wall time only, never output content.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample spectral measures; one atom,weight CSV per replicate.
    Sample(SampleCmd),
    /// Replicated sampling: spectral-measure moments, one row per replicate.
    Moments(MomentsCmd),
    /// Monte Carlo covariance of rescaled moments next to its exact limit.
    CltCov(CltCovCmd),
    /// Exact lower-triangular covariance factor D_k.
    Dk(DkCmd),
    /// Generalized Catalan number d_{i,j} (nonnegative lattice paths).
    Catalan(CatalanCmd),
    /// Convert between moment, recursion-coefficient, z, and canonical-moment
    /// representations of a measure.
    Transform(TransformCmd),
    /// Gauss quadrature nodes and weights of a reference measure.
    Quadrature(QuadratureCmd),
    /// Evaluate a rate function (scalar, moment-level, measure-level, or
    /// projection partial sums) from a JSON request.
    Rate(RateCmd),
    /// Exact tail probabilities of the finite-n laws, normalized by the
    /// speed, next to the limiting rate.
    MdpTable(MdpTableCmd),
    /// Truncated moment metric between two spectral-measure CSV files.
    Metric(MetricCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OutputFormat {
    Csv,
    Json,
}

/// Ensemble selection shared by the sampling subcommands. The library
/// validates n and beta; the gamma/delta arity check lives here so a stray
/// flag fails loudly instead of being ignored.
#[derive(Args, Debug, Clone)]
struct EnsembleArgs {
    /// Ensemble family: gaussian (hermite), laguerre (wishart), jacobi (manova).
    #[arg(long, value_parser = Ensemble::from_str)]
    ensemble: Ensemble,

    /// Matrix dimension n >= 1.
    #[arg(long)]
    n: usize,

    /// Inverse temperature beta > 0.
    #[arg(long)]
    beta: f64,

    /// First shape parameter, > -1 (laguerre and jacobi only).
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,

    /// Second shape parameter, > -1 (jacobi only).
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
}

impl EnsembleArgs {
    fn spec(&self) -> Result<EnsembleSpec> {
        let reject = |flag: &str| {
            Err(Error::Domain(format!(
                "--{flag} does not apply to the {} ensemble",
                self.ensemble.name()
            )))
        };
        match self.ensemble {
            Ensemble::Gaussian => {
                if self.gamma.is_some() {
                    return reject("gamma");
                }
                if self.delta.is_some() {
                    return reject("delta");
                }
                EnsembleSpec::gaussian(self.n, self.beta)
            }
            Ensemble::Laguerre => {
                if self.delta.is_some() {
                    return reject("delta");
                }
                let gamma = self
                    .gamma
                    .ok_or_else(|| Error::Domain("laguerre requires --gamma".into()))?;
                EnsembleSpec::laguerre(self.n, self.beta, gamma)
            }
            Ensemble::Jacobi => {
                let gamma = self
                    .gamma
                    .ok_or_else(|| Error::Domain("jacobi requires --gamma".into()))?;
                let delta = self
                    .delta
                    .ok_or_else(|| Error::Domain("jacobi requires --delta".into()))?;
                EnsembleSpec::jacobi(self.n, self.beta, gamma, delta)
            }
        }
    }
}

#[derive(Args, Debug, Clone, Copy)]
struct SeedArgs {
    /// RNG seed (mandatory: no wall-clock seeding).
    #[arg(long)]
    seed: u64,

    /// Base RNG stream; replicate r draws from stream + r.
    #[arg(long, default_value_t = 0)]
    stream: u64,
}

impl SeedArgs {
    fn state(self) -> RngState {
        RngState {
            seed: self.seed,
            stream: self.stream,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Output format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Args)]
struct SampleCmd {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[command(flatten)]
    seed: SeedArgs,
    /// Independent replicates; with reps > 1, --out is required and
    /// replicate r is written to {stem}_rep{r}{.ext}.
    #[arg(long, default_value_t = 1)]
    reps: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct MomentsCmd {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[command(flatten)]
    seed: SeedArgs,
    /// Highest moment order k >= 1.
    #[arg(long)]
    k: usize,
    /// Independent replicates, one output row each.
    #[arg(long, default_value_t = 1)]
    reps: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CltCovCmd {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[command(flatten)]
    seed: SeedArgs,
    /// Highest moment order k >= 1.
    #[arg(long)]
    k: usize,
    /// Independent replicates (>= 3 for the jackknife).
    #[arg(long)]
    reps: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct DkCmd {
    /// Ensemble family: gaussian (hermite), laguerre (wishart), jacobi (manova).
    #[arg(long, value_parser = Ensemble::from_str)]
    ensemble: Ensemble,
    /// Matrix order k >= 1.
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CatalanCmd {
    /// Row index i >= 0.
    #[arg(long)]
    i: u64,
    /// Column index j >= i.
    #[arg(long)]
    j: u64,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Representation {
    /// Raw moments m_1..m_k (mass m_0 = 1 implicit).
    Moments,
    /// Three-term recursion coefficients b (diagonal) and a (squared
    /// off-diagonal).
    Coeffs,
    /// Half-line decomposition variables z_1..z_m.
    Z,
    /// Canonical moments p_1..p_m in (0, 1).
    P,
}

#[derive(Args)]
struct TransformCmd {
    /// Source representation.
    #[arg(long, value_enum)]
    from: Representation,
    /// Target representation.
    #[arg(long, value_enum)]
    to: Representation,
    /// Input sequence for --from moments|z|p, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    /// Diagonal coefficients b_1,b_2,... for --from coeffs.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    b: Option<Vec<f64>>,
    /// Squared off-diagonal coefficients a_1,a_2,... for --from coeffs.
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<f64>>,
    /// Moment order for --to moments.
    #[arg(long)]
    k: Option<usize>,
    /// Bypass the conditioning guard on deep moment inversion.
    #[arg(long)]
    unguarded: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct QuadratureCmd {
    /// Reference measure: semicircle, marchenko-pastur, arcsine.
    #[arg(long, value_parser = parse_reference)]
    reference: ReferenceMeasure,
    /// Number of quadrature nodes >= 1.
    #[arg(long)]
    nodes: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct RateCmd {
    /// JSON request file (default: standard input).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file (default: standard output). The response is JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MdpTableCmd {
    /// Finite-n law family: normal-var, gamma-mean, beta-half.
    #[arg(long, value_parser = parse_rate_kind)]
    kind: ScalarRateKind,
    /// Scale parameter alpha > 0.
    #[arg(long)]
    alpha: f64,
    /// Deviation x in the rescaled coordinate.
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    /// Speed schedule: power:<theta> with 0 < theta < 1, or log.
    #[arg(long, default_value = "power:0.5", value_parser = parse_schedule)]
    schedule: SpeedSchedule,
    /// Comma-separated list of n values, one table row each.
    #[arg(long, value_delimiter = ',')]
    n_list: Vec<u64>,
    /// First shape offset of the Gamma/Beta finite-n laws.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    shape_offset: f64,
    /// Second shape offset of the Beta law.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    second_offset: f64,
    /// Sum both tails instead of the upper tail only.
    #[arg(long)]
    two_sided: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct MetricCmd {
    /// First spectral-measure CSV (as written by `sample`).
    #[arg(long)]
    a: PathBuf,
    /// Second spectral-measure CSV.
    #[arg(long)]
    b: PathBuf,
    /// Truncation order K; the omitted tail is bounded by 2^-K.
    #[arg(long, default_value_t = 32)]
    truncation: usize,
    #[command(flatten)]
    output: OutputArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

/// Resolves the worker count (flag, then environment) and runs the
/// subcommand inside a dedicated pool when one is requested. Without an
/// explicit count the global default pool is used untouched.
fn dispatch(cli: Cli) -> Result<()> {
    let workers = match cli.workers {
        Some(w) => Some(w),
        None => match std::env::var("SPECTRAL_MDP_WORKERS") {
            Ok(raw) => Some(raw.parse::<usize>().map_err(|_| {
                Error::Domain(format!(
                    "SPECTRAL_MDP_WORKERS must be a positive integer, got `{raw}`"
                ))
            })?),
            Err(_) => None,
        },
    };
    match workers {
        Some(0) => Err(Error::Domain("worker count must be >= 1".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Io(format!("cannot build worker pool: {e}")))?
            .install(|| run_command(cli.command)),
        None => run_command(cli.command),
    }
}

fn run_command(command: Command) -> Result<()> {
    match command {
        Command::Sample(cmd) => run_sample(cmd),
        Command::Moments(cmd) => run_moments(cmd),
        Command::CltCov(cmd) => run_clt_cov(cmd),
        Command::Dk(cmd) => run_dk(cmd),
        Command::Catalan(cmd) => run_catalan(cmd),
        Command::Transform(cmd) => run_transform(cmd),
        Command::Quadrature(cmd) => run_quadrature(cmd),
        Command::Rate(cmd) => run_rate(cmd),
        Command::MdpTable(cmd) => run_mdp_table(cmd),
        Command::Metric(cmd) => run_metric(cmd),
    }
}

// ---------------------------------------------------------------------------
// output plumbing

fn io_error(context: &str, err: io::Error) -> Error {
    Error::Io(format!("{context}: {err}"))
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => {
            let file = fs::File::create(p)
                .map_err(|e| io_error(&format!("cannot create {}", p.display()), e))?;
            Ok(Box::new(io::BufWriter::new(file)))
        }
        None => Ok(Box::new(io::BufWriter::new(io::stdout()))),
    }
}

/// 17 significant digits; infinities and NaN get fixed spellings so CSV
/// consumers see `inf`, `-inf`, `nan` rather than Rust's defaults.
fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.16e}")
    }
}

/// JSON value for a float: a plain number when finite, otherwise the same
/// string sentinels as the CSV side (serde_json would render them as null).
fn json_f64(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt_f64(x))
    }
}

fn config_json<C: Serialize>(config: &C) -> Result<String> {
    serde_json::to_string(config).map_err(|e| Error::Io(format!("config echo: {e}")))
}

/// The self-description line carried by every CSV output: tool version plus
/// the canonical JSON of the parameters that produced the file.
fn write_comment<W: Write, C: Serialize>(out: &mut W, config: &C) -> Result<()> {
    writeln!(
        out,
        "# spectral-mdp v{} config={}",
        env!("CARGO_PKG_VERSION"),
        config_json(config)?
    )
    .map_err(|e| io_error("write", e))
}

fn write_json<W: Write>(out: &mut W, value: &serde_json::Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| Error::Io(format!("write: {e}")))?;
    writeln!(out).map_err(|e| io_error("write", e))
}

fn finish<W: Write>(mut out: W) -> Result<()> {
    out.flush().map_err(|e| io_error("flush", e))
}

/// `path` with `_rep{r}` spliced in before the extension.
fn replicate_path(base: &Path, r: u64) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}_rep{r}.{}", ext.to_string_lossy()),
        None => format!("{stem}_rep{r}"),
    };
    base.with_file_name(name)
}

// ---------------------------------------------------------------------------
// flag parsers

fn parse_reference(s: &str) -> Result<ReferenceMeasure> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "semicircle" => Ok(ReferenceMeasure::Semicircle),
        "marchenko_pastur" | "mp" => Ok(ReferenceMeasure::MarchenkoPastur),
        "arcsine" => Ok(ReferenceMeasure::Arcsine),
        other => Err(Error::Domain(format!("unknown reference measure `{other}`"))),
    }
}

fn parse_rate_kind(s: &str) -> Result<ScalarRateKind> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "normal_var" => Ok(ScalarRateKind::NormalVar),
        "gamma_mean" => Ok(ScalarRateKind::GammaMean),
        "beta_half" => Ok(ScalarRateKind::BetaHalf),
        other => Err(Error::Domain(format!("unknown rate kind `{other}`"))),
    }
}

fn parse_schedule(s: &str) -> Result<SpeedSchedule> {
    let lower = s.to_ascii_lowercase();
    if let Some(theta) = lower.strip_prefix("power:") {
        let theta: f64 = theta
            .parse()
            .map_err(|_| Error::Domain(format!("cannot parse speed exponent `{theta}`")))?;
        return SpeedSchedule::power(theta);
    }
    match lower.as_str() {
        "log" | "log_n" | "log-n" => Ok(SpeedSchedule::log_n()),
        other => Err(Error::Domain(format!(
            "unknown speed schedule `{other}` (expected power:<theta> or log)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// subcommands

#[derive(Serialize)]
struct SampleEcho<'a> {
    subcommand: &'static str,
    #[serde(flatten)]
    ensemble: &'a EnsembleSpec,
    seed: u64,
    stream: u64,
    reps: u64,
    rep: u64,
}

fn run_sample(cmd: SampleCmd) -> Result<()> {
    let spec = cmd.ensemble.spec()?;
    if cmd.reps < 1 {
        return Err(Error::Domain("reps must be >= 1".into()));
    }
    if cmd.reps > 1 && cmd.output.out.is_none() {
        return Err(Error::Domain(
            "--out is required when reps > 1 (one file per replicate)".into(),
        ));
    }
    let state = cmd.seed.state();
    let mut ws = EigenWorkspace::new();
    for r in 0..cmd.reps {
        let t = sample_tridiagonal(spec, state.lane(r))?;
        let mu = spectral_measure_with(&t, &mut ws)?;
        let echo = SampleEcho {
            subcommand: "sample",
            ensemble: &spec,
            seed: cmd.seed.seed,
            stream: cmd.seed.stream,
            reps: cmd.reps,
            rep: r,
        };
        let path = match (&cmd.output.out, cmd.reps) {
            (Some(base), reps) if reps > 1 => Some(replicate_path(base, r)),
            (opt, _) => opt.clone(),
        };
        let mut out = open_output(path.as_deref())?;
        match cmd.output.format {
            OutputFormat::Csv => {
                write_comment(&mut out, &echo)?;
                mu.write_csv(&mut out).map_err(|e| io_error("write", e))?;
            }
            OutputFormat::Json => {
                write_json(
                    &mut out,
                    &json!({
                        "config": echo,
                        "atoms": mu.atoms(),
                        "weights": mu.weights(),
                    }),
                )?;
            }
        }
        finish(out)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct MomentsEcho<'a> {
    subcommand: &'static str,
    #[serde(flatten)]
    ensemble: &'a EnsembleSpec,
    k: usize,
    seed: u64,
    stream: u64,
    reps: u64,
}

fn run_moments(cmd: MomentsCmd) -> Result<()> {
    let spec = cmd.ensemble.spec()?;
    if cmd.k < 1 {
        return Err(Error::Domain("moment order k must be >= 1".into()));
    }
    if cmd.reps < 1 {
        return Err(Error::Domain("reps must be >= 1".into()));
    }
    let state = cmd.seed.state();
    // Replicates are keyed by their stream offset, so the collected order is
    // the replicate order no matter how the pool schedules them.
    let rows: Result<Vec<Vec<f64>>> = (0..cmd.reps)
        .into_par_iter()
        .map(|r| {
            let t = sample_tridiagonal(spec, state.lane(r))?;
            Ok(moment_vector(&t, cmd.k)?.m().to_vec())
        })
        .collect();
    let rows = rows?;
    let echo = MomentsEcho {
        subcommand: "moments",
        ensemble: &spec,
        k: cmd.k,
        seed: cmd.seed.seed,
        stream: cmd.seed.stream,
        reps: cmd.reps,
    };
    let mut out = open_output(cmd.output.out.as_deref())?;
    match cmd.output.format {
        OutputFormat::Csv => {
            write_comment(&mut out, &echo)?;
            let header: Vec<String> = (1..=cmd.k).map(|j| format!("m{j}")).collect();
            writeln!(out, "rep,{}", header.join(",")).map_err(|e| io_error("write", e))?;
            for (r, row) in rows.iter().enumerate() {
                let vals: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
                writeln!(out, "{r},{}", vals.join(",")).map_err(|e| io_error("write", e))?;
            }
        }
        OutputFormat::Json => {
            write_json(&mut out, &json!({ "config": echo, "rows": rows }))?;
        }
    }
    finish(out)
}

#[derive(Serialize)]
struct CltCovEcho<'a> {
    subcommand: &'static str,
    #[serde(flatten)]
    ensemble: &'a EnsembleSpec,
    k: usize,
    seed: u64,
    stream: u64,
    reps: usize,
}

fn run_clt_cov(cmd: CltCovCmd) -> Result<()> {
    let spec = cmd.ensemble.spec()?;
    let est = estimate_moment_covariance(spec, cmd.k, cmd.reps, cmd.seed.state())?;
    let target: Vec<Vec<f64>> = dk_matrix(spec.kind(), cmd.k)?
        .gram()
        .iter()
        .map(|row| {
            row.iter()
                .map(|v| num_traits::ToPrimitive::to_f64(v).unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    let echo = CltCovEcho {
        subcommand: "clt-cov",
        ensemble: &spec,
        k: cmd.k,
        seed: cmd.seed.seed,
        stream: cmd.seed.stream,
        reps: cmd.reps,
    };
    let mut out = open_output(cmd.output.out.as_deref())?;
    match cmd.output.format {
        OutputFormat::Csv => {
            write_comment(&mut out, &echo)?;
            writeln!(out, "i,j,empirical,se,target").map_err(|e| io_error("write", e))?;
            for i in 0..cmd.k {
                for j in 0..cmd.k {
                    writeln!(
                        out,
                        "{},{},{},{},{}",
                        i + 1,
                        j + 1,
                        fmt_f64(est.covariance()[i][j]),
                        fmt_f64(est.standard_errors()[i][j]),
                        fmt_f64(target[i][j]),
                    )
                    .map_err(|e| io_error("write", e))?;
                }
            }
        }
        OutputFormat::Json => {
            write_json(
                &mut out,
                &json!({
                    "config": echo,
                    "empirical": est.covariance(),
                    "standard_errors": est.standard_errors(),
                    "target": target,
                    "reps": est.reps(),
                }),
            )?;
        }
    }
    finish(out)
}

#[derive(Serialize)]
struct DkEcho {
    subcommand: &'static str,
    ensemble: Ensemble,
    k: usize,
}

fn run_dk(cmd: DkCmd) -> Result<()> {
    let dk = dk_matrix(cmd.ensemble, cmd.k)?;
    let echo = DkEcho {
        subcommand: "dk",
        ensemble: cmd.ensemble,
        k: cmd.k,
    };
    let mut out = open_output(cmd.output.out.as_deref())?;
    match cmd.output.format {
        OutputFormat::Csv => {
            write_comment(&mut out, &echo)?;
            writeln!(out, "i,j,value").map_err(|e| io_error("write", e))?;
            // Lower triangle in row-major order. Gaussian and Laguerre
            // entries are exact integers and are printed as such; Jacobi
            // entries carry the irrational 2^(-1/2) factor and fall back to
            // floats.
            for i in 1..=cmd.k {
                for j in 1..=i {
                    let value = if dk.sqrt_half() {
                        fmt_f64(dk.entry_f64(i, j))
                    } else {
                        dk.entry(i, j).to_string()
                    };
                    writeln!(out, "{i},{j},{value}").map_err(|e| io_error("write", e))?;
                }
            }
        }
        OutputFormat::Json => {
            write_json(
                &mut out,
                &json!({
                    "config": echo,
                    "sqrt_half": dk.sqrt_half(),
                    "rows": dk.to_f64(),
                }),
            )?;
        }
    }
    finish(out)
}

fn run_catalan(cmd: CatalanCmd) -> Result<()> {
    let value = gen_catalan(cmd.i, cmd.j)?;
    let mut out = open_output(cmd.out.as_deref())?;
    writeln!(out, "{value}").map_err(|e| io_error("write", e))?;
    finish(out)
}

#[derive(Serialize)]
struct TransformEcho<'a> {
    subcommand: &'static str,
    from: Representation,
    to: Representation,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    unguarded: bool,
}

/// Named float sequences produced by `transform`.
enum TransformOutput {
    Coeffs { b: Vec<f64>, a: Vec<f64> },
    Single { name: &'static str, values: Vec<f64> },
}

fn run_transform(cmd: TransformCmd) -> Result<()> {
    // Arity of the input flags depends on the source representation; reject
    // contradictions instead of ignoring them so the config echo stays an
    // honest rerun recipe.
    if cmd.from == Representation::Coeffs {
        if cmd.values.is_some() {
            return Err(Error::Domain(
                "--from coeffs takes --b/--a, not --values".into(),
            ));
        }
        if cmd.b.is_none() {
            return Err(Error::Domain("--from coeffs requires --b".into()));
        }
    } else {
        if cmd.b.is_some() || cmd.a.is_some() {
            return Err(Error::Domain(format!(
                "--b/--a only apply to --from coeffs, not --from {}",
                match cmd.from {
                    Representation::Moments => "moments",
                    Representation::Z => "z",
                    Representation::P => "p",
                    Representation::Coeffs => unreachable!(),
                }
            )));
        }
        if cmd.values.is_none() {
            return Err(Error::Domain("this source requires --values".into()));
        }
    }
    if cmd.unguarded && cmd.from != Representation::Moments {
        return Err(Error::Domain(
            "--unguarded only applies to --from moments".into(),
        ));
    }
    if cmd.k.is_some() && cmd.to != Representation::Moments {
        return Err(Error::Domain("--k only applies to --to moments".into()));
    }

    let coeffs = match cmd.from {
        Representation::Moments => {
            let m = MomentVector::new(cmd.values.clone().unwrap())?;
            if cmd.unguarded {
                coeffs_from_moments_unguarded(&m)?
            } else {
                coeffs_from_moments(&m)?
            }
        }
        Representation::Coeffs => RecursionCoefficients::new(
            cmd.b.clone().unwrap(),
            cmd.a.clone().unwrap_or_default(),
        )?,
        Representation::Z => coeffs_from_z(&RecursionVariables::new(cmd.values.clone().unwrap())?),
        Representation::P => {
            let p = CanonicalMoments::new(cmd.values.clone().unwrap())?;
            coeffs_from_z(&z_from_canonical(&p))
        }
    };
    let result = match cmd.to {
        Representation::Moments => {
            let k = cmd
                .k
                .ok_or_else(|| Error::Domain("--to moments requires --k".into()))?;
            TransformOutput::Single {
                name: "m",
                values: moments_from_coeffs(&coeffs, k)?.m().to_vec(),
            }
        }
        Representation::Coeffs => TransformOutput::Coeffs {
            b: coeffs.b().to_vec(),
            a: coeffs.a().to_vec(),
        },
        Representation::Z => TransformOutput::Single {
            name: "z",
            values: z_from_coeffs(&coeffs)?.into_vec(),
        },
        Representation::P => {
            let z = z_from_coeffs(&coeffs)?;
            TransformOutput::Single {
                name: "p",
                values: canonical_from_z(&z)?.into_vec(),
            }
        }
    };

    let echo = TransformEcho {
        subcommand: "transform",
        from: cmd.from,
        to: cmd.to,
        values: cmd.values.as_deref(),
        b: cmd.b.as_deref(),
        a: cmd.a.as_deref(),
        k: cmd.k,
        unguarded: cmd.unguarded,
    };
    let mut out = open_output(cmd.output.out.as_deref())?;
    match cmd.output.format {
        OutputFormat::Csv => {
            write_comment(&mut out, &echo)?;
            writeln!(out, "name,index,value").map_err(|e| io_error("write", e))?;
            let mut emit = |name: &str, values: &[f64]| -> Result<()> {
                for (idx, &v) in values.iter().enumerate() {
                    writeln!(out, "{name},{},{}", idx + 1, fmt_f64(v))
                        .map_err(|e| io_error("write", e))?;
                }
                Ok(())
            };
            match &result {
                TransformOutput::Coeffs { b, a } => {
                    emit("b", b)?;
                    emit("a", a)?;
                }
                TransformOutput::Single { name, values } => emit(name, values)?,
            }
        }
        OutputFormat::Json => {
            let payload = match &result {
                TransformOutput::Coeffs { b, a } => json!({ "config": echo, "b": b, "a": a }),
                TransformOutput::Single { name, values } => {
                    let mut map = serde_json::Map::new();
                    map.insert(
                        "config".into(),
                        serde_json::to_value(&echo)
                            .map_err(|e| Error::Io(format!("config echo: {e}")))?,
                    );
                    map.insert((*name).to_string(), json!(values));
                    serde_json::Value::Object(map)
                }
            };
            write_json(&mut out, &payload)?;
        }
    }
    finish(out)
}

#[derive(Serialize)]
struct QuadratureEcho {
    subcommand: &'static str,
    reference: ReferenceMeasure,
    nodes: usize,
}

fn run_quadrature(cmd: QuadratureCmd) -> Result<()> {
    if cmd.nodes < 1 {
        return Err(Error::Domain("quadrature needs at least one node".into()));
    }
    let coeffs = cmd.reference.recursion(cmd.nodes)?;
    let (nodes, weights) = gauss_quadrature(&coeffs, cmd.nodes)?;
    let echo = QuadratureEcho {
        subcommand: "quadrature",
        reference: cmd.reference,
        nodes: cmd.nodes,
    };
    let mut out = open_output(cmd.output.out.as_deref())?;
    match cmd.output.format {
        OutputFormat::Csv => {
            write_comment(&mut out, &echo)?;
            writeln!(out, "node,weight").map_err(|e| io_error("write", e))?;
            for (x, w) in nodes.iter().zip(&weights) {
                writeln!(out, "{},{}", fmt_f64(*x), fmt_f64(*w))
                    .map_err(|e| io_error("write", e))?;
            }
        }
        OutputFormat::Json => {
            write_json(
                &mut out,
                &json!({ "config": echo, "nodes": nodes, "weights": weights }),
            )?;
        }
    }
    finish(out)
}

/// JSON request accepted by `rate`, dispatching on `"level"`.
#[derive(Deserialize)]
#[serde(tag = "level", rename_all = "snake_case")]
enum RateRequest {
    /// Closed-form scalar rate of one recursion variable.
    Scalar {
        kind: ScalarRateKind,
        alpha: f64,
        x: f64,
    },
    /// Moment-level rate (beta/4)||D_k^-1 m||^2.
    Moments {
        ensemble: Ensemble,
        beta: f64,
        moments: Vec<f64>,
    },
    /// Measure-level rate: Parseval sum for polynomial densities, +inf for
    /// nonzero discrete parts.
    Measure {
        beta: f64,
        measure: SignedMeasureRep,
    },
    /// Projection partial sums (beta/4) sum_{j<=K} (int p_j dmu)^2 against
    /// the named reference measure.
    Projections {
        beta: f64,
        measure: SignedMeasureRep,
        reference: ReferenceMeasure,
        max_k: usize,
    },
}

fn run_rate(cmd: RateCmd) -> Result<()> {
    let raw = match &cmd.input {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| io_error(&format!("cannot read {}", path.display()), e))?,
        None => {
            let mut buf = String::new();
            io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| io_error("cannot read standard input", e))?;
            buf
        }
    };
    let request: RateRequest =
        serde_json::from_str(&raw).map_err(|e| Error::Domain(format!("bad rate request: {e}")))?;
    let request_echo: serde_json::Value = serde_json::from_str(&raw).unwrap_or(json!(null));

    let response = match request {
        RateRequest::Scalar { kind, alpha, x } => {
            let spec = ScalarRateSpec::new(kind, alpha)?;
            json!({ "request": request_echo, "rate": json_f64(scalar_rate(spec, x)) })
        }
        RateRequest::Moments {
            ensemble,
            beta,
            moments,
        } => {
            let m = MomentVector::new(moments)?;
            json!({ "request": request_echo, "rate": json_f64(moment_rate(ensemble, beta, &m)?) })
        }
        RateRequest::Measure { beta, measure } => {
            measure.validate()?;
            json!({ "request": request_echo, "rate": json_f64(measure_rate(beta, &measure)?) })
        }
        RateRequest::Projections {
            beta,
            measure,
            reference,
            max_k,
        } => {
            measure.validate()?;
            // Orthonormal evaluation at degree K consumes K off-diagonal
            // coefficients, hence depth K + 1.
            let sigma = reference.recursion(max_k + 1)?;
            let partials = projection_partial_sums(beta, &measure, &sigma, max_k)?;
            let rate = *partials.last().expect("max_k >= 1");
            let partials: Vec<serde_json::Value> = partials.iter().map(|&v| json_f64(v)).collect();
            json!({
                "request": request_echo,
                "rate": json_f64(rate),
                "partial_sums": partials,
            })
        }
    };
    let mut out = open_output(cmd.out.as_deref())?;
    write_json(&mut out, &response)?;
    finish(out)
}

#[derive(Serialize)]
struct MdpTableEcho {
    subcommand: &'static str,
    kind: ScalarRateKind,
    alpha: f64,
    x: f64,
    schedule: SpeedSchedule,
    n_list: Vec<u64>,
    shape_offset: f64,
    second_offset: f64,
    two_sided: bool,
}

fn run_mdp_table(cmd: MdpTableCmd) -> Result<()> {
    if cmd.n_list.is_empty() {
        return Err(Error::Domain("--n-list must name at least one n".into()));
    }
    let spec = ScalarRateSpec::new(cmd.kind, cmd.alpha)?;
    let opts = MdpTableOptions {
        shape_offset: cmd.shape_offset,
        second_offset: cmd.second_offset,
        two_sided: cmd.two_sided,
    };
    let rows = scalar_mdp_table(spec, cmd.x, cmd.schedule, &cmd.n_list, opts)?;
    let echo = MdpTableEcho {
        subcommand: "mdp-table",
        kind: cmd.kind,
        alpha: cmd.alpha,
        x: cmd.x,
        schedule: cmd.schedule,
        n_list: cmd.n_list.clone(),
        shape_offset: cmd.shape_offset,
        second_offset: cmd.second_offset,
        two_sided: cmd.two_sided,
    };
    let mut out = open_output(cmd.output.out.as_deref())?;
    match cmd.output.format {
        OutputFormat::Csv => {
            write_comment(&mut out, &echo)?;
            writeln!(out, "n,a_n,x_n,log_tail,normalized_rate,target_rate")
                .map_err(|e| io_error("write", e))?;
            for row in &rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    row.n,
                    fmt_f64(row.a_n),
                    fmt_f64(row.x_n),
                    fmt_f64(row.log_tail),
                    fmt_f64(row.normalized_rate),
                    fmt_f64(row.target_rate),
                )
                .map_err(|e| io_error("write", e))?;
            }
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    json!({
                        "n": row.n,
                        "a_n": json_f64(row.a_n),
                        "x_n": json_f64(row.x_n),
                        "log_tail": json_f64(row.log_tail),
                        "normalized_rate": json_f64(row.normalized_rate),
                        "target_rate": json_f64(row.target_rate),
                    })
                })
                .collect();
            write_json(&mut out, &json!({ "config": echo, "rows": rows }))?;
        }
    }
    finish(out)
}

#[derive(Serialize)]
struct MetricEcho {
    subcommand: &'static str,
    a: String,
    b: String,
    truncation: usize,
}

fn run_metric(cmd: MetricCmd) -> Result<()> {
    let mu_a = read_spectral_csv(&cmd.a)?;
    let mu_b = read_spectral_csv(&cmd.b)?;
    let ma = mu_a.moments(cmd.truncation)?;
    let mb = mu_b.moments(cmd.truncation)?;
    let metric = spectral_mdp::measures::moment_metric(&ma, &mb, cmd.truncation)?;
    let echo = MetricEcho {
        subcommand: "metric",
        a: cmd.a.to_string_lossy().into_owned(),
        b: cmd.b.to_string_lossy().into_owned(),
        truncation: cmd.truncation,
    };
    let mut out = open_output(cmd.output.out.as_deref())?;
    match cmd.output.format {
        OutputFormat::Csv => {
            write_comment(&mut out, &echo)?;
            writeln!(out, "distance,truncation,tail_bound").map_err(|e| io_error("write", e))?;
            writeln!(
                out,
                "{},{},{}",
                fmt_f64(metric.value),
                metric.truncation,
                fmt_f64(metric.tail_bound()),
            )
            .map_err(|e| io_error("write", e))?;
        }
        OutputFormat::Json => {
            write_json(
                &mut out,
                &json!({
                    "config": echo,
                    "distance": metric.value,
                    "truncation": metric.truncation,
                    "tail_bound": metric.tail_bound(),
                }),
            )?;
        }
    }
    finish(out)
}

/// Reads back the CSV written by `sample`: comment lines, an `atom,weight`
/// header, then one atom per line.
fn read_spectral_csv(path: &Path) -> Result<SpectralMeasure> {
    let text = fs::read_to_string(path)
        .map_err(|e| io_error(&format!("cannot read {}", path.display()), e))?;
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "atom,weight" {
                return Err(Error::Domain(format!(
                    "{}:{}: expected `atom,weight` header, got `{line}`",
                    path.display(),
                    idx + 1
                )));
            }
            saw_header = true;
            continue;
        }
        let (xs, ws) = line.split_once(',').ok_or_else(|| {
            Error::Domain(format!(
                "{}:{}: expected `atom,weight` pair",
                path.display(),
                idx + 1
            ))
        })?;
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| {
                Error::Domain(format!(
                    "{}:{}: cannot parse {what} `{s}`",
                    path.display(),
                    idx + 1
                ))
            })
        };
        atoms.push(parse(xs, "atom")?);
        weights.push(parse(ws, "weight")?);
    }
    if !saw_header {
        return Err(Error::Domain(format!(
            "{}: no `atom,weight` header found",
            path.display()
        )));
    }
    SpectralMeasure::new(atoms, weights)
}
