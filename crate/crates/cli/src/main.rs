//! `ecp-sim`: command-line driver for the qutrit entanglement concentration
//! simulator.
//!
//! Exit status is 0 on success, 2 when the input is rejected and 3 when an
//! internal check fails. Inputs are validated before anything is computed and
//! output files are only written once the result is complete.

mod config;
mod output;

use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ecp_core::grid::Span;
use ecp_core::homodyne::{sweep, sweep_csv, HomodyneModel, QuadratureConvention};
use ecp_core::known::run_known;
use ecp_core::linalg::{cis, CMatrix};
use ecp_core::optics::{compose_fourier, fidelity_surface, surface_csv, BlockParams, ImperfectionParams};
use ecp_core::protocol::feedforward::feedforward_csv;
use ecp_core::protocol::{enumerate_branches, enumerate_json, run_csv, Detection, MonteCarloConfig, Protocol};
use ecp_core::reference::{self, diff_csv, tally, DiffRow};
use ecp_core::state::SchmidtTriple;
use serde::Serialize;

use config::{parse_coeff_list, parse_reals, parse_span, resolve_coeffs, FileConfig, Format, Network};
use output::Sink;

/// Default probe phase per photon.
const DEFAULT_THETA: f64 = 0.35;
const DEFAULT_PROBE_AMP: f64 = 60.0;
const DEFAULT_TRIALS: u64 = 10_000;
const DEFAULT_SEED: u64 = 1;

#[derive(Debug)]
pub enum CliError {
    /// Bad input; exit status 2.
    Validation(String),
    /// Broken invariant or I/O failure; exit status 3.
    Internal(String),
}

impl From<ecp_core::Error> for CliError {
    fn from(e: ecp_core::Error) -> Self {
        use ecp_core::Error::*;
        match e {
            NotNormalized { .. }
            | ZeroNorm
            | NonFinite(_)
            | InvalidParameter(_)
            | EmptyBranch { .. }
            | EmptyRange
            | OrderingViolated
            | DegenerateRank
            | Json(_) => CliError::Validation(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "ecp-sim", version, about = "Qutrit entanglement concentration simulator")]
struct Cli {
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Branch probabilities and output families as JSON.
    Enumerate {
        #[command(flatten)]
        coeffs: CoeffArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Monte Carlo run: per-trial CSV and a JSON summary.
    Run(RunArgs),
    /// Regenerate a lookup table and diff it against the shipped reference rows.
    Tables {
        /// Table number, 1 to 4.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        which: u8,
        #[command(flatten)]
        out: OutArgs,
        /// Where to write the diff CSV (`table,key,reference,derived,status`).
        /// Without it only a tally is printed to stderr.
        #[arg(long)]
        diff: Option<PathBuf>,
    },
    /// Beam-splitter network tools.
    #[command(subcommand)]
    Optics(OpticsCommand),
    /// Success-probability sweep of the homodyne probes as CSV.
    Homodyne {
        /// Probe amplitude range `start:stop:points` [default: 0:60:61].
        #[arg(long)]
        alpha: Option<String>,
        /// Decay exposure range [default: 0:1:11].
        #[arg(long)]
        gamma_t: Option<String>,
        /// Probe phase per photon, value or range [default: 0.35].
        #[arg(long)]
        theta: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Known-coefficient scheme with unbalanced beam splitters, as JSON.
    Known {
        #[command(flatten)]
        coeffs: CoeffArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Subcommand)]
enum OpticsCommand {
    /// Compose the three-block network and compare it with the Fourier transform.
    Compose {
        #[command(flatten)]
        imp: ImperfectionArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Average block fidelity over a grid of splitting and phase errors.
    Fidelity {
        /// Splitting error range [default: 0:0.1:21].
        #[arg(long)]
        eps: Option<String>,
        /// Phase error range, applied to both phases [default: 0:0.1:21].
        #[arg(long)]
        delta: Option<String>,
        /// Block parameter omega [default: pi/4].
        #[arg(long)]
        omega: Option<f64>,
        /// Block parameter phi [default: pi/3].
        #[arg(long)]
        phi: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args, Clone)]
struct CoeffArgs {
    /// Three comma-separated coefficients, real or complex (`0.6,0.5+0.3i,0.4`).
    #[arg(long, allow_hyphen_values = true)]
    coeffs: Option<String>,
    /// Optional phases multiplied onto the coefficients, in radians.
    #[arg(long, allow_hyphen_values = true)]
    phases: Option<String>,
}

#[derive(Args, Clone)]
struct OutArgs {
    /// Output file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ImperfectionArgs {
    /// Beam-splitter splitting error.
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    /// Error on the internal phase.
    #[arg(long, allow_hyphen_values = true)]
    d_omega: Option<f64>,
    /// Error on the external phase.
    #[arg(long, allow_hyphen_values = true)]
    d_phi: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    coeffs: CoeffArgs,
    /// Number of trials [default: 10000].
    #[arg(long)]
    trials: Option<u64>,
    /// 64-bit seed [default: 1].
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per random stream [default: 4096].
    #[arg(long)]
    chunk_size: Option<u64>,
    /// Coherent probe amplitude [default: 60].
    #[arg(long)]
    probe_amp: Option<f64>,
    /// Phase per photon of the first probe [default: 0.35].
    #[arg(long)]
    theta: Option<f64>,
    /// Phase per photon of the second probe [default: same as theta].
    #[arg(long)]
    theta2: Option<f64>,
    /// Decay exposure gamma*t [default: 0].
    #[arg(long)]
    gamma_t: Option<f64>,
    /// Quadrature scaling, APPENDIX_SQRT2 or FIGURE_2X [default: APPENDIX_SQRT2].
    #[arg(long)]
    convention: Option<String>,
    /// Read the probe branch without error.
    #[arg(long)]
    ideal_detection: bool,
    /// Fourier detection: ideal, or through the composed beam-splitter network.
    #[arg(long, value_enum)]
    network: Option<Network>,
    #[command(flatten)]
    imp: ImperfectionArgs,
    /// csv writes the trials to --output; json writes the summary there.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[command(flatten)]
    out: OutArgs,
    /// Summary JSON file when the format is csv; stderr when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
}

struct Ctx {
    file: FileConfig,
}

impl Ctx {
    fn coeffs(&self, a: &CoeffArgs) -> Result<SchmidtTriple, CliError> {
        let values = match &a.coeffs {
            Some(s) => parse_coeff_list(s)?,
            None => self
                .file
                .coeffs
                .clone()
                .ok_or_else(|| CliError::Validation("no coefficients given (--coeffs)".into()))?,
        };
        let phases = match &a.phases {
            Some(s) => Some(parse_reals(s)?),
            None => self.file.phases.clone(),
        };
        resolve_coeffs(&values, phases.as_deref(), &mut |w| eprintln!("warning: {w}"))
    }

    fn sink(&self, out: &OutArgs) -> Sink {
        Sink::new(out.output.clone().or_else(|| self.file.output.clone()))
    }

    fn imperfections(&self, a: &ImperfectionArgs) -> Result<Option<ImperfectionParams>, CliError> {
        let n = &self.file.network;
        let eps = a.eps.or(n.eps);
        let d_omega = a.d_omega.or(n.d_omega);
        let d_phi = a.d_phi.or(n.d_phi);
        if eps.is_none() && d_omega.is_none() && d_phi.is_none() {
            return Ok(None);
        }
        let imp = ImperfectionParams::new(eps.unwrap_or(0.0), d_omega.unwrap_or(0.0), d_phi.unwrap_or(0.0))?;
        Ok(Some(imp))
    }
}

fn span_or(flag: &Option<String>, file: &Option<String>, default: &str) -> Result<Span, CliError> {
    parse_span(flag.as_deref().or(file.as_deref()).unwrap_or(default))
}

fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var("ECP_SIM_THREADS") {
        Ok(v) if !v.trim().is_empty() => {
            v.trim().parse().map_err(|_| CliError::Validation(format!("ECP_SIM_THREADS={v:?} is not a count")))
        }
        _ => Ok(0),
    }
}

fn print_tally(rows: &[DiffRow]) {
    let parts: Vec<String> = tally(rows).into_iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!("diff: {}", parts.join(" "));
}

fn cmd_tables(ctx: &Ctx, which: u8, out: &OutArgs, diff: &Option<PathBuf>) -> Result<(), CliError> {
    let (table, rows) = match which {
        1 => (reference::table1_csv(&reference::derived_table1()), reference::diff_table1()?),
        2 | 3 => (feedforward_csv(&reference::derived_feedforward(which)?), reference::diff_table2_3(which)?),
        _ => (feedforward_csv(&reference::derived_feedforward(4)?), reference::diff_table4()?),
    };
    print_tally(&rows);
    ctx.sink(out).write(&table)?;
    if let Some(path) = diff {
        Sink::new(Some(path.clone())).write(&diff_csv(&rows))?;
    }
    Ok(())
}

/// Measurement rows in Fourier-outcome order for a composed network.
fn relabelled_network(imp: Option<&ImperfectionParams>) -> Result<CMatrix, CliError> {
    let (net, report) = compose_fourier(imp)?;
    if !report.equivalent && imp.is_none() {
        return Err(CliError::Internal(format!(
            "ideal network is not equivalent to the Fourier transform (residual {})",
            report.residual
        )));
    }
    let m = net.matrix();
    let mut rows = CMatrix::zeros(3, 3);
    for (i, &k) in report.permutation.iter().enumerate() {
        let undo = cis(-report.phases[i]);
        for j in 0..3 {
            rows[(k, j)] = m[(i, j)] * undo;
        }
    }
    Ok(rows)
}

fn cmd_run(ctx: &Ctx, a: &RunArgs) -> Result<(), CliError> {
    let f = &ctx.file;
    let coeffs = ctx.coeffs(&a.coeffs)?;
    let trials = a.trials.or(f.trials).unwrap_or(DEFAULT_TRIALS);
    let seed = a.seed.or(f.seed).unwrap_or(DEFAULT_SEED);
    let chunk_size = a.chunk_size.or(f.chunk_size).unwrap_or(MonteCarloConfig::DEFAULT_CHUNK);
    if chunk_size == 0 {
        return Err(CliError::Validation("chunk size must be positive".into()));
    }
    let h = &f.homodyne;
    let convention = match &a.convention {
        Some(s) => serde_json::from_value(serde_json::Value::String(s.clone()))
            .map_err(|_| CliError::Validation(format!("unknown convention {s:?}")))?,
        None => h.convention.unwrap_or(QuadratureConvention::AppendixSqrt2),
    };
    let probe_amp = a.probe_amp.or(h.probe_amp).unwrap_or(DEFAULT_PROBE_AMP);
    let theta = a.theta.or(h.theta).unwrap_or(DEFAULT_THETA);
    let theta2 = a.theta2.or(h.theta2).unwrap_or(theta);
    let gamma_t = a.gamma_t.or(h.gamma_t).unwrap_or(0.0);
    let first = HomodyneModel::new(probe_amp, theta, gamma_t, convention)?;
    let second = HomodyneModel::new(probe_amp, theta2, gamma_t, convention)?;
    let detection = if a.ideal_detection || h.ideal_detection.unwrap_or(false) {
        Detection::Ideal
    } else {
        Detection::Homodyne { first, second }
    };
    let network = a.network.or(f.network.kind).unwrap_or_default();
    let imp = ctx.imperfections(&a.imp)?;
    if imp.is_some() && network == Network::Ideal {
        return Err(CliError::Validation("imperfection parameters need --network composed".into()));
    }
    let format = a.format.or(f.format).unwrap_or_default();
    let threads = threads_from_env()?;
    let sink = ctx.sink(&a.out);
    let summary_sink = a.summary.clone().or_else(|| f.summary.clone()).map(|p| Sink::new(Some(p)));

    let protocol = match network {
        Network::Ideal => Protocol::new(&coeffs, detection)?,
        Network::Composed => Protocol::with_measurement(&coeffs, detection, &relabelled_network(imp.as_ref())?)?,
    };
    let cfg = MonteCarloConfig { trials, seed, chunk_size, threads };
    let run = protocol.run(&cfg, format == Format::Csv)?;
    let total: u64 = run.summary.class_counts.values().sum();
    if total != trials {
        return Err(CliError::Internal(format!("class counts sum to {total}, not {trials}")));
    }
    let summary = run.summary.to_json();
    match format {
        Format::Csv => {
            let csv = run_csv(&run.records);
            sink.write(&csv)?;
            match summary_sink {
                Some(s) => s.write(&summary)?,
                None => eprintln!("{summary}"),
            }
        }
        Format::Json => sink.write(&summary)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct ComposeJson {
    permutation: [usize; 3],
    phases: [ecp_core::format::F17; 3],
    residual: ecp_core::format::F17,
    equivalent: bool,
    direct_residual: ecp_core::format::F17,
    unitarity_deviation: ecp_core::format::F17,
}

fn cmd_optics(ctx: &Ctx, c: &OpticsCommand) -> Result<(), CliError> {
    use ecp_core::format::F17;
    match c {
        OpticsCommand::Compose { imp, out } => {
            let imp = ctx.imperfections(imp)?;
            let (net, r) = compose_fourier(imp.as_ref())?;
            let j = ComposeJson {
                permutation: r.permutation,
                phases: r.phases.map(F17),
                residual: F17(r.residual),
                equivalent: r.equivalent,
                direct_residual: F17(r.direct_residual),
                unitarity_deviation: F17(net.unitarity_deviation()),
            };
            let text = serde_json::to_string_pretty(&j).map_err(|e| CliError::Internal(e.to_string()))?;
            ctx.sink(out).write(&text)
        }
        OpticsCommand::Fidelity { eps, delta, omega, phi, out } => {
            let o = &ctx.file.optics;
            let eps = span_or(eps, &o.eps, "0:0.1:21")?;
            let delta = span_or(delta, &o.delta, "0:0.1:21")?;
            let p =
                BlockParams::new(phi.or(o.phi).unwrap_or(FRAC_PI_3), omega.or(o.omega).unwrap_or(FRAC_PI_4), (0, 1))?;
            let cells = fidelity_surface(&eps, &delta, &p)?;
            ctx.sink(out).write(&surface_csv(&cells))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let ctx = Ctx { file };
    match &cli.command {
        Command::Enumerate { coeffs, out } => {
            let t = ctx.coeffs(coeffs)?;
            let rows = enumerate_branches(&t)?;
            let total: f64 = rows.iter().map(|r| r.probability).sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(CliError::Internal(format!("branch probabilities sum to {total}")));
            }
            ctx.sink(out).write(&enumerate_json(&rows))
        }
        Command::Run(a) => cmd_run(&ctx, a),
        Command::Tables { which, out, diff } => cmd_tables(&ctx, *which, out, diff),
        Command::Optics(c) => cmd_optics(&ctx, c),
        Command::Homodyne { alpha, gamma_t, theta, out } => {
            let s = &ctx.file.sweep;
            let alpha = span_or(alpha, &s.alpha, "0:60:61")?;
            let gamma_t = span_or(gamma_t, &s.gamma_t, "0:1:11")?;
            let theta = span_or(theta, &s.theta, "0.35")?;
            let rows = sweep(&alpha, &gamma_t, &theta)?;
            ctx.sink(out).write(&sweep_csv(&rows))
        }
        Command::Known { coeffs, out } => {
            let t = ctx.coeffs(coeffs)?;
            let r = run_known(&t)?;
            if r.claim_differs() {
                eprintln!(
                    "note: simulated success probability {} differs from the closed form |gamma|^2/3 = {}",
                    r.success_prob, r.claimed_prob
                );
            }
            ctx.sink(out).write(&r.to_json())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Validation(m) => eprintln!("error: {m}"),
                CliError::Internal(m) => eprintln!("internal error: {m}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
