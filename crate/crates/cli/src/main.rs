use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use retrack::config::RunConfig;
use retrack::models::ModelKind;
use retrack::types::StopReason;
use retrack::{estimator, io, metrics, sampler, simulator, Model, Report, Sequence};

mod bench;

/// Smoothing Bayesian retracking of altimeter waveform sequences.
#[derive(Debug, Parser)]
#[command(name = "retrack", version)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides both the scenario and the chain seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the number of echoes of the scenario.
    #[arg(long, global = true)]
    echoes: Option<usize>,
    /// Worker threads for the estimators (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    dump_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Cd,
    Ls,
    Hmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Brown,
    Ca,
    Dda,
}

impl From<Kind> for ModelKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Brown => ModelKind::Brown,
            Kind::Ca => ModelKind::ConventionalConv,
            Kind::Dda => ModelKind::DelayDoppler,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Param {
    Swh,
    Tau,
    Pu,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the configured scenario and write it with its ground truth.
    Simulate {
        /// Output file; `.csv` writes the CSV form, anything else ALTW.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a waveform file and write `<out>.csv` and `<out>.json`.
    Fit {
        /// ALTW or CSV waveform file.
        input: PathBuf,
        #[arg(long, value_enum, default_value = "cd")]
        algo: Algo,
        #[arg(long, value_enum, default_value = "brown")]
        kind: Kind,
        /// Output prefix.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a fit report with the ground truth stored in a waveform file.
    Evaluate {
        /// ALTW file with truth.
        input: PathBuf,
        /// Report CSV written by `fit`.
        #[arg(long)]
        report: PathBuf,
    },
    /// Power spectral density of one fitted parameter track.
    Psd {
        /// Report CSV written by `fit`.
        report: PathBuf,
        #[arg(long, value_enum, default_value = "swh")]
        param: Param,
        /// Along-track distance between echoes, km.
        #[arg(long, default_value_t = 0.35)]
        spacing: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run LS, CD and HMC on the benchmark scenario and print the table.
    BenchTable1 {
        /// Table CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave the (slow) sampler row out.
        #[arg(long)]
        skip_hmc: bool,
    },
}

/// Exit statuses.
const EXIT_USAGE: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<retrack::Error>() {
        Some(
            retrack::Error::NonFiniteCost
            | retrack::Error::IllConditionedFisher { .. }
            | retrack::Error::InvalidParameter(_),
        ) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.scenario.seed = seed;
        cfg.chain.seed = seed;
    }
    if let Some(m) = cli.echoes {
        cfg.scenario.echoes = m;
        cfg.scenario.pad_remainder = m % cfg.scenario.block_size.max(1) != 0;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = load_config(&cli)?;
    if cli.dump_config {
        print!("{}", cfg.dump());
        return Ok(0);
    }
    let Some(command) = cli.command else {
        bail!("no subcommand given (try --help)");
    };
    match command {
        Command::Simulate { out } => simulate(&cfg, &out),
        Command::Fit { input, algo, kind, out } => fit(&cfg, &input, algo, kind.into(), &out),
        Command::Evaluate { input, report } => evaluate(&cfg, &input, &report),
        Command::Psd { report, param, spacing, out } => psd(&report, param, spacing, &out),
        Command::BenchTable1 { out, skip_hmc } => bench::run(&cfg, out.as_deref(), skip_hmc),
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn simulate(cfg: &RunConfig, out: &Path) -> anyhow::Result<u8> {
    let model = Model::new(cfg.scenario.kind, cfg.instrument).with_options(cfg.model.clone());
    let seq = simulator::generate_with(&cfg.scenario, &model)?;
    if is_csv(out) {
        io::write_csv(out, &seq)?;
    } else {
        io::write_altw(out, &seq)?;
    }
    let sc = &cfg.scenario;
    println!(
        "wrote {}: M={} K={} r={} model={} looks={} mu={} seed={}",
        out.display(),
        seq.num_echoes(),
        seq.num_gates(),
        sc.block_size,
        sc.kind,
        sc.looks,
        sc.mu,
        sc.seed
    );
    Ok(0)
}

fn read_sequence(cfg: &RunConfig, input: &Path) -> anyhow::Result<Sequence> {
    let mut seq = if is_csv(input) {
        io::read_csv(input, cfg.scenario.block_size)?
    } else {
        io::read_altw(input)?
    };
    if is_csv(input) {
        seq.pad_remainder = cfg.scenario.pad_remainder;
    }
    if seq.num_gates() != cfg.instrument.gates {
        bail!(retrack::Error::DimensionMismatch(format!(
            "{} has {} gates but the instrument is configured for {}",
            input.display(),
            seq.num_gates(),
            cfg.instrument.gates
        )));
    }
    retrack::types::validate(&seq, &cfg.instrument)?;
    Ok(seq)
}

fn prefixed(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

fn fit(cfg: &RunConfig, input: &Path, algo: Algo, kind: ModelKind, out: &Path) -> anyhow::Result<u8> {
    let seq = read_sequence(cfg, input)?;
    let model = Model::new(kind, cfg.instrument).with_options(cfg.model.clone());
    let report: Report = match algo {
        Algo::Cd => estimator::fit(&seq, &model, &cfg.instrument, &cfg.hyper, &Default::default())?,
        Algo::Ls => estimator::fit_ls(&seq, &model, &cfg.instrument, &Default::default())?,
        Algo::Hmc => {
            let post = sampler::sample_posterior(&seq, &model, &cfg.instrument, &cfg.hyper, &cfg.chain)?;
            io::write_chain(prefixed(out, ".chain"), &post.chains.theta)?;
            post.report
        }
    };
    io::write_report_csv(prefixed(out, ".csv"), &report)?;
    io::write_diagnostics(prefixed(out, ".json"), &report)?;
    println!(
        "{} on {} echoes: stop_reason={} iterations={} time/echo={:.3} ms",
        report.algorithm,
        seq.num_echoes(),
        report.stop_reason,
        report.iterations,
        1e3 * report.time_per_echo()
    );
    if let Some(acc) = report.acceptance {
        println!("acceptance swh={:.3} tau={:.3} pu={:.3}", acc[0], acc[1], acc[2]);
    }
    if let Some(truth) = &seq.truth {
        print_errors(cfg, &report.theta_hat, truth)?;
    }
    Ok(if report.stop_reason == StopReason::MaxIter { EXIT_NOT_CONVERGED } else { 0 })
}

fn print_errors(cfg: &RunConfig, est: &retrack::Track, truth: &retrack::Track) -> anyhow::Result<()> {
    let gate_cm = 100.0 * cfg.instrument.gate_range();
    let scales = [("swh", 100.0, "cm"), ("tau", gate_cm, "cm"), ("pu", 1.0, "")];
    for (i, (name, scale, unit)) in scales.iter().enumerate() {
        let b = metrics::bias(est.column(i), truth.column(i))?;
        let s = metrics::std_vs_truth(est.column(i), truth.column(i))?;
        println!("{name}: bias={:.4}{unit} std={:.4}{unit}", b * scale, s * scale);
    }
    Ok(())
}

fn evaluate(cfg: &RunConfig, input: &Path, report: &Path) -> anyhow::Result<u8> {
    let seq: Sequence = io::read_altw(input)?;
    let Some(truth) = &seq.truth else {
        bail!("{} carries no ground truth", input.display());
    };
    let est = io::read_report_csv(report)?;
    if est.len() != truth.len() {
        bail!(retrack::Error::DimensionMismatch(format!(
            "report has {} echoes, truth has {}",
            est.len(),
            truth.len()
        )));
    }
    print_errors(cfg, &est, truth)?;
    if est.len() >= 20 {
        let gate_cm = 100.0 * cfg.instrument.gate_range();
        println!(
            "std_20hz: swh={:.4}cm tau={:.4}cm pu={:.4}",
            100.0 * metrics::std_20hz(&est.swh)?,
            gate_cm * metrics::std_20hz(&est.tau)?,
            metrics::std_20hz(&est.pu)?
        );
    }
    Ok(0)
}

fn psd(report: &Path, param: Param, spacing: f64, out: &Path) -> anyhow::Result<u8> {
    let est = io::read_report_csv(report)?;
    let series = match param {
        Param::Swh => &est.swh,
        Param::Tau => &est.tau,
        Param::Pu => &est.pu,
    };
    let spec = metrics::psd(series, spacing)?;
    let mut text = String::from("wavenumber,power\n");
    for (f, p) in spec.frequency.iter().zip(&spec.power) {
        text.push_str(&format!("{f:e},{p:e}\n"));
    }
    std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} ({} bins)", out.display(), spec.frequency.len());
    Ok(0)
}
