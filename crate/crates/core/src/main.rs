use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sparse_precoding::harness::{
    complexity_report, default_exit_ebn0, exit_trajectory, run_sweep, table4, write_complexity_csv,
    write_exit_csv, LinkConfig,
};
use sparse_precoding::map_detector::DEFAULT_ENUMERATION_BUDGET;
use sparse_precoding::{selftest, Error};

#[derive(Parser)]
#[command(name = "spsim", version, about = "Sparse-precoding link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML link configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Table4,
}

#[derive(Subcommand)]
enum Command {
    /// FER/BER sweep over the configured Eb/N0 grid.
    Simulate(Common),
    /// Mutual-information trajectory over turbo iterations.
    Exit {
        #[command(flatten)]
        common: Common,
        /// Eb/N0 in dB at which to measure.
        #[arg(long)]
        ebn0: Option<f64>,
    },
    /// Operation counts per QAM symbol.
    Complexity {
        #[command(flatten)]
        common: Common,
        /// Reference configuration set to evaluate instead of the config.
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// Built-in property checks.
    Selftest,
}

fn load(common: &Common) -> Result<LinkConfig, Error> {
    let mut cfg = match &common.config {
        Some(p) => LinkConfig::from_file(p)?,
        None => LinkConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output = Some(o.clone());
    }
    if let Some(t) = common.threads {
        // Only fails if a global pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    cfg.validate()?;
    if let Some(w) = cfg.precoder_spec()?.equal_gain_warning(cfg.taps.len()) {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Simulate(common) => {
            let cfg = load(&common)?;
            for r in run_sweep(&cfg)? {
                println!(
                    "{} {} Q={} J={} Eb/N0={:.2} dB frames={} errors={} FER={:.3e} BER={:.3e} TI={:.2}",
                    r.scheme, r.detector, r.q, r.j, r.ebn0_db, r.frames, r.frame_errors, r.fer, r.ber, r.mean_ti
                );
            }
            Ok(true)
        }
        Command::Exit { common, ebn0 } => {
            let cfg = load(&common)?;
            let e = match ebn0.or(cfg.exit_ebn0_db) {
                Some(e) => e,
                None => default_exit_ebn0(&cfg)?,
            };
            let rep = exit_trajectory(&cfg, e)?;
            for p in &rep.trajectory {
                println!(
                    "Eb/N0={:.2} dB ti={} IA_det={:.4} IE_det={:.4} IA_dec={:.4} IE_dec={:.4}",
                    e, p.ti, p.ia_det, p.ie_det, p.ia_dec, p.ie_dec
                );
            }
            if let Some(path) = &cfg.output {
                write_exit_csv(path, &rep)?;
            }
            Ok(true)
        }
        Command::Complexity { common, preset } => {
            let (rows, ok) = match preset {
                Some(Preset::Table4) => {
                    if common.threads.is_some() || common.config.is_some() {
                        eprintln!("note: --config and --threads are ignored with --preset");
                    }
                    let check = table4(DEFAULT_ENUMERATION_BUDGET)?;
                    for m in &check.mismatches {
                        eprintln!("mismatch: {m}");
                    }
                    let ok = check.passed();
                    (check.rows, ok)
                }
                None => {
                    let cfg = load(&common)?;
                    (vec![complexity_report(&cfg)?], true)
                }
            };
            let fmt = |v: Option<u64>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
            for r in &rows {
                println!(
                    "{} {} Q={} J={} adds={} mults={} measured adds={} mults={}",
                    r.scheme,
                    r.detector,
                    r.q,
                    r.j,
                    fmt(r.adds_analytic),
                    fmt(r.mults_analytic),
                    fmt(r.adds_measured),
                    fmt(r.mults_measured)
                );
            }
            if let Some(path) = &common.out {
                write_complexity_csv(path, &rows)?;
            }
            if ok && preset.is_some() {
                println!("all reference cells match");
            }
            Ok(ok)
        }
        Command::Selftest => {
            let checks = selftest::run_all()?;
            for c in &checks {
                println!(
                    "{} {} ({:e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io(_) | Error::Csv(_) => 2,
                Error::Capability { .. } => 3,
                _ => 1,
            })
        }
    }
}
