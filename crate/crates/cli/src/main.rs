use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use perturbed_hankel::invariance::TheoremClass;
use perturbed_hankel::runner::{run_random, run_scenario, sweep, RandomReport, RunReport, SweepReport};
use perturbed_hankel::scenario::{Scenario, TolerancesDto};

const EXIT_PASS: u8 = 0;
const EXIT_VIOLATION: u8 = 1;
const EXIT_INVALID: u8 = 2;

#[derive(Parser)]
#[command(name = "phk", version, about = "Kernel checks for finite-rank perturbations of Hankel operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Verdict tolerance on containment residuals.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Relative singular value cutoff for the kernel rank.
    #[arg(long, global = true)]
    rank_tol: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check a scenario file asks for.
    Verify { file: PathBuf },
    /// Run seeded random scenarios.
    Random {
        #[arg(long, default_value_t = 100)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restrict to one class, e.g. `conj-inner-near` or `analytic-symbol-near`.
        #[arg(long)]
        filter: Option<String>,
        /// Use the non-constant outer factor exp(z/4); violations are reported but do not fail the run.
        #[arg(long)]
        extended: bool,
    },
    /// Kernel dimension and angle to a reference subspace across matrix orders.
    Sweep {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "20,40,60,80")]
        orders: Vec<usize>,
    },
}

fn overrides(c: &Common) -> TolerancesDto {
    TolerancesDto { verdict: c.tol, rank: c.rank_tol, ..TolerancesDto::default() }
}

fn load(path: &Path) -> Result<Scenario, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Scenario::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn emit(out: Option<&Path>, body: &str) -> Result<(), String> {
    match out {
        Some(p) => fs::write(p, body).map_err(|e| format!("{}: {e}", p.display())),
        None => std::io::stdout().write_all(body.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn verify_csv(r: &RunReport) -> String {
    let rows = r
        .diffable
        .invariance
        .iter()
        .map(|i| {
            vec![
                i.mode.to_string(),
                i.class.to_string(),
                i.f_dim.to_string(),
                i.minimal_defect.to_string(),
                i.defect_bound.to_string(),
                i.max_residual.to_string(),
                i.defect_containment_angle.to_string(),
                i.pass.to_string(),
            ]
        })
        .chain(r.diffable.cgp.iter().map(|c| {
            let first = &c.checks[0];
            vec![
                "cgp".into(),
                c.case.to_string(),
                String::new(),
                String::new(),
                String::new(),
                first.forward_max.max(first.backward_max).to_string(),
                String::new(),
                c.pass.to_string(),
            ]
        }))
        .collect();
    csv_text(&["check", "class", "f_dim", "minimal_defect", "defect_bound", "max_residual", "containment_angle", "pass"], rows)
}

fn random_csv(r: &RandomReport) -> String {
    let rows = r
        .diffable
        .results
        .iter()
        .map(|x| {
            vec![
                x.index.to_string(),
                x.name.clone(),
                x.class.to_string(),
                opt(x.verdict.map(|v| format!("{v:?}").to_lowercase())),
                opt(x.max_residual),
                opt(x.minimal_defect),
                opt(x.f_dim),
                opt(x.defect_bound),
                x.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    csv_text(&["index", "name", "class", "verdict", "max_residual", "minimal_defect", "f_dim", "defect_bound", "error"], rows)
}

fn sweep_csv(r: &SweepReport) -> String {
    let rows = r
        .rows
        .iter()
        .map(|x| vec![x.order.to_string(), x.ker_dim.to_string(), x.max_angle.to_string(), opt(x.max_residual), format!("{:.3}", x.ms)])
        .collect();
    csv_text(&["N", "ker_dim", "max_angle", "max_residual", "ms"], rows)
}

fn run(cli: &Cli) -> Result<u8, String> {
    let c = &cli.common;
    let tol = overrides(c);
    let out = c.out.as_deref();
    match &cli.command {
        Command::Verify { file } => {
            let sc = load(file)?;
            let report = run_scenario(&sc, &tol).map_err(|e| e.to_string())?;
            let body = if c.format == Some(Format::Csv) { verify_csv(&report) } else { json(&report) };
            emit(out, &body)?;
            for w in &report.diffable.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!("verdict: {}", if report.passed() { "pass" } else { "violation" });
            Ok(if report.passed() { EXIT_PASS } else { EXIT_VIOLATION })
        }
        Command::Random { count, seed, filter, extended } => {
            let class = match filter {
                Some(name) => Some(TheoremClass::from_name(name).ok_or_else(|| {
                    let names: Vec<&str> = TheoremClass::ALL.iter().map(|c| c.name()).collect();
                    format!("unknown class '{name}'; expected one of {}", names.join(", "))
                })?),
                None => None,
            };
            let report = run_random(*count, *seed, class, *extended, &tol);
            let body = if c.format == Some(Format::Csv) { random_csv(&report) } else { json(&report) };
            emit(out, &body)?;
            let d = &report.diffable;
            eprintln!("passed {} / violations {} / errors {}", d.passed, d.violations, d.errors);
            Ok(if d.errors > 0 {
                EXIT_INVALID
            } else if report.passed() {
                EXIT_PASS
            } else {
                EXIT_VIOLATION
            })
        }
        Command::Sweep { file, orders } => {
            let sc = load(file)?;
            let report = sweep(&sc, orders, &tol).map_err(|e| e.to_string())?;
            let body = if c.format == Some(Format::Json) { json(&report) } else { sweep_csv(&report) };
            emit(out, &body)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            Ok(EXIT_PASS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
