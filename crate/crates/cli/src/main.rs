//! `planar-period`: period-function analysis of planar centers.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 non-periodic point, 4 route inconsistency, 5 partial sweep.

mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use planar_period::fields::list_builtins;
use planar_period::period::{analyze_point, scan_annulus, Spacing};
use planar_period::verify::{default_levels, verify_builtins, verify_system};
use planar_period::{Error, Point};
use serde_json::json;

use config::{parse_point, parse_range, Format, RunConfig, CONFIG_ENV};

#[derive(Parser)]
#[command(name = "planar-period", version, about = "Period function and its derivative for planar centers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze the cycle through one point
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Point on the cycle, `x,y`
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        point: [f64; 2],
    },
    /// Sweep a range of levels
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Level range `lo:hi`
        #[arg(long = "h-range", value_parser = parse_range, allow_hyphen_values = true)]
        h_range: Option<[f64; 2]>,
        /// Number of levels
        #[arg(long)]
        levels: Option<usize>,
        /// linear or geometric
        #[arg(long)]
        spacing: Option<Spacing>,
    },
    /// Run the identity checks
    Verify {
        #[command(flatten)]
        common: Common,
        /// Verify every built-in system
        #[arg(long)]
        all_builtins: bool,
        /// Extra field to test as a normalizer, `(P, Q)`
        #[arg(long)]
        normalizer: Option<String>,
        /// Sample points per check
        #[arg(long)]
        samples: Option<usize>,
        /// Level band `lo:hi` for sampling
        #[arg(long = "h-range", value_parser = parse_range, allow_hyphen_values = true)]
        h_range: Option<[f64; 2]>,
    },
    /// List built-in systems
    List {
        /// Emit JSON instead of a table
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML config file; flags override its keys
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Built-in system name, e.g. `harmonic` or `rotational:2+sin(u)`
    #[arg(long)]
    system: Option<String>,
    /// Inline first integral H(x, y)
    #[arg(long)]
    h: Option<String>,
    /// Routes: comma-separated subset of a,b,c (mu, etabeta, fd)
    #[arg(long)]
    routes: Option<String>,
    /// Route-A normalizer: gradient, kappa, separable or zeta:<expr in h>
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    /// Output path; the extension is replaced per format
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv, json or both
    #[arg(long)]
    format: Option<Format>,
    /// Worker threads
    #[arg(long)]
    workers: Option<usize>,
    /// Sampling seed
    #[arg(long)]
    seed: Option<u64>,
}

/// An exit code with a message for stderr.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn config(msg: impl Into<String>) -> Self {
        Failure { code: 2, msg: msg.into() }
    }
}

fn classify_error(e: &Error) -> u8 {
    match e {
        Error::NotPeriodic { .. }
        | Error::AmbiguousReturn { .. }
        | Error::StepUnderflow { .. }
        | Error::Equilibrium(_) => 3,
        Error::Undetermined { .. } => 5,
        _ => 2,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: classify_error(&e),
            msg: e.to_string(),
        }
    }
}

fn resolve(common: &Common, extra: RunConfig, need_system: bool) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(Failure::config)?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        system: common.system.clone(),
        h: common.h.clone(),
        routes: common.routes.clone(),
        family: common.family.clone(),
        rtol: common.rtol,
        atol: common.atol,
        out: common.out.as_ref().map(|p| p.display().to_string()),
        format: common.format,
        workers: common.workers,
        seed: common.seed,
        ..extra
    };
    // an inline H on the command line replaces a configured built-in, and vice versa
    if flags.h.is_some() {
        cfg.system = None;
    }
    if flags.system.is_some() {
        cfg.h = None;
        cfg.p = None;
        cfg.q = None;
        cfg.kappa = None;
    }
    cfg.overlay(&flags);
    if need_system {
        cfg.validate()
    } else {
        cfg.validate_settings()
    }
    .map_err(Failure::config)?;
    Ok(cfg)
}

/// Write `csv` and/or `json` next to `out`, or print to stdout when no path
/// is configured (JSON only when asked for).
fn emit(cfg: &RunConfig, csv: &str, json: &str) -> Result<(), Failure> {
    let format = cfg.format.unwrap_or_default();
    match &cfg.out {
        Some(out) => {
            let base = Path::new(out);
            let write = |ext: &str, body: &str| {
                let path = base.with_extension(ext);
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).map_err(|e| Failure::config(format!("{}: {}", dir.display(), e)))?;
                }
                fs::write(&path, body).map_err(|e| Failure::config(format!("{}: {}", path.display(), e)))
            };
            if matches!(format, Format::Csv | Format::Both) {
                write("csv", csv)?;
            }
            if matches!(format, Format::Json | Format::Both) {
                write("json", json)?;
            }
        }
        None => match format {
            Format::Csv => print!("{}", csv),
            Format::Json => print!("{}", json),
            Format::Both => print!("{}{}", csv, json),
        },
    }
    Ok(())
}

fn cmd_analyze(common: &Common, point: [f64; 2]) -> Result<u8, Failure> {
    let cfg = resolve(common, RunConfig::default(), true)?;
    let sys = cfg.build_system().map_err(Failure::config)?;
    let opts = cfg.analysis_options(&sys).map_err(Failure::config)?;
    let report = analyze_point(&sys, Point::from(point), &opts)?;
    print!("{}", output::report_table(&sys.name, &report));
    if cfg.out.is_some() {
        let body = json!({ "system": sys.name, "report": report });
        emit(&cfg, &output::report_csv(&report), &output::json("analyze", body))?;
    } else if cfg.format == Some(Format::Json) || cfg.format == Some(Format::Both) {
        print!("{}", output::json("analyze", json!({ "system": sys.name, "report": report })));
    }
    Ok(if report.consistent { 0 } else { 4 })
}

fn cmd_sweep(common: &Common, extra: RunConfig) -> Result<u8, Failure> {
    let cfg = resolve(common, extra, true)?;
    let sys = cfg.build_system().map_err(Failure::config)?;
    let opts = cfg.scan_options(&sys).map_err(Failure::config)?;
    let range = cfg.h_range.map_or_else(|| default_levels(&sys), |[a, b]| (a, b));
    let n = cfg.levels.unwrap_or(8);
    let scan = scan_annulus(&sys, range, n, &opts)?;
    eprint!("{}", output::scan_summary(&scan));
    emit(&cfg, &output::scan_csv(&scan), &output::json("sweep", &scan))?;
    Ok(if scan.is_partial() { 5 } else { 0 })
}

fn cmd_verify(common: &Common, all: bool, extra: RunConfig) -> Result<u8, Failure> {
    let reports = if all {
        let cfg = resolve(common, extra, false)?;
        let mut opts = cfg.verify_options().map_err(Failure::config)?;
        opts.levels = None;
        let reports = verify_builtins(&opts)?;
        emit_verify(&cfg, &reports)?;
        reports
    } else {
        let cfg = resolve(common, extra, true)?;
        let sys = cfg.build_system().map_err(Failure::config)?;
        let opts = cfg.verify_options().map_err(Failure::config)?;
        let reports = verify_system(&sys, &opts);
        emit_verify(&cfg, &reports)?;
        reports
    };
    Ok(if reports.iter().all(|r| r.pass) { 0 } else { 1 })
}

fn emit_verify(cfg: &RunConfig, reports: &[planar_period::verify::VerificationReport]) -> Result<(), Failure> {
    print!("{}", output::verify_summary(reports));
    let body = output::json("verify", json!({ "reports": reports }));
    if let Some(out) = &cfg.out {
        let path = Path::new(out).with_extension("json");
        fs::write(&path, body).map_err(|e| Failure::config(format!("{}: {}", path.display(), e)))?;
    } else if cfg.format == Some(Format::Json) {
        print!("{}", body);
    }
    Ok(())
}

fn cmd_list(as_json: bool) -> u8 {
    let list = list_builtins();
    if as_json {
        print!("{}", output::json("list", json!({ "systems": list })));
    } else {
        let w = list.iter().map(|b| b.name.len()).max().unwrap_or(0);
        for b in &list {
            println!("{:<w$}  {}  [{}]", b.name, b.description, b.origin, w = w);
        }
    }
    0
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze { common, point } => cmd_analyze(common, *point),
        Command::Sweep {
            common,
            h_range,
            levels,
            spacing,
        } => cmd_sweep(
            common,
            RunConfig {
                h_range: *h_range,
                levels: *levels,
                spacing: *spacing,
                ..RunConfig::default()
            },
        ),
        Command::Verify {
            common,
            all_builtins,
            normalizer,
            samples,
            h_range,
        } => cmd_verify(
            common,
            *all_builtins,
            RunConfig {
                normalizer: normalizer.clone(),
                samples: *samples,
                h_range: *h_range,
                ..RunConfig::default()
            },
        ),
        Command::List { json } => Ok(cmd_list(*json)),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
