//! Command-line front end: argument parsing, JSON reports and exit codes.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::boundary::essential_boundary;
use crate::conditions::{theorem_dispatch_with_depth, Verdict, DEFAULT_ORACLE_DEPTH};
use crate::energy::{default_radius, dimar_bracket_in, scaling_csv, EnergyContext, ScalingEstimate, CSV_HEADER};
use crate::fixtures::{fixture, FIXTURES};
use crate::paths::{interior_fold_trace, sample_corridor_paths_on, PathError};
use crate::render::{render_svg, Overlay, RenderSpec};
use crate::system::{axiom_report, load_system, validate, AxiomReport, SystemDescription, ValidatedSystem};
use crate::wordtree::{build_levels, EdgeKind};

pub const SCHEMA_VERSION: &str = "1";
/// Seed used when `--seed` is absent.
pub const DEFAULT_SEED: u64 = 20_240_611;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_COMPUTATION: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "polyfract", version, about = "Analyse symmetric self-similar sets built from regular polygons")]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Omit timings so identical inputs give identical output.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Seed for randomised checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the structural axioms.
    Validate(ValidateArgs),
    /// Boundary and contact analysis with the theorem verdict.
    Analyze(AnalyzeArgs),
    /// Conductance scaling tables.
    Energy(EnergyArgs),
    /// Bracket the exponent where the conductance ratio crosses 1.
    Dimar(DimarArgs),
    /// Draw a generation as SVG.
    Render(RenderArgs),
    /// Builtin example systems.
    Examples {
        #[command(subcommand)]
        action: ExamplesAction,
    },
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// System file, or the name of a builtin example.
    file: String,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// System file, or the name of a builtin example.
    file: String,
    /// Deepest level used by the direct contact-point search.
    #[arg(long, default_value_t = DEFAULT_ORACLE_DEPTH)]
    max_level: usize,
    /// Write the JSON report here; `-` for standard output.
    #[arg(long)]
    json: Option<String>,
    /// Number of sampled corridor paths for the folding check.
    #[arg(long, default_value_t = 0)]
    fold_samples: usize,
}

#[derive(Args, Debug)]
struct EnergyArgs {
    /// System file, or the name of a builtin example.
    file: String,
    /// Energy exponent, greater than 1.
    #[arg(long)]
    p: f64,
    /// Neighbourhood radius; defaults to max(1, M_J).
    #[arg(long = "M")]
    radius: Option<usize>,
    /// Number of refinement levels above the base level.
    #[arg(long, default_value_t = 4)]
    m_max: usize,
    /// Write the table as CSV; `-` for standard output.
    #[arg(long)]
    csv: Option<String>,
    /// Print the estimate as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct DimarArgs {
    /// System file, or the name of a builtin example.
    file: String,
    /// Lower exponent; the ratio must exceed 1 here.
    #[arg(long)]
    p_lo: f64,
    /// Upper exponent; the ratio must be below 1 here.
    #[arg(long)]
    p_hi: f64,
    /// Stop once the bracket is at most this wide.
    #[arg(long, default_value_t = 0.1)]
    tol: f64,
    /// Neighbourhood radius; defaults to max(1, M_J).
    #[arg(long = "M")]
    radius: Option<usize>,
    /// Level at which the ratio is evaluated.
    #[arg(long, default_value_t = 4)]
    m_max: usize,
    /// Print the bracket as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct RenderArgs {
    /// System file, or the name of a builtin example.
    file: String,
    /// Generation to draw, at least 1.
    #[arg(long)]
    level: usize,
    /// none, essential_edges, phi_parity_fill or components:I,J,...
    #[arg(long, default_value = "none")]
    overlay: Overlay,
    /// Output SVG path; `-` for standard output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum ExamplesAction {
    List,
    Show { name: String },
    Write { name: String, path: PathBuf },
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    kind: &'static str,
    message: String,
    detail: Option<serde_json::Value>,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, kind: "usage", message: message.into(), detail: None }
    }

    fn validation(message: impl Into<String>) -> Self {
        Failure { code: EXIT_VALIDATION, kind: "validation", message: message.into(), detail: None }
    }

    fn computation(message: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_COMPUTATION, kind: "computation", message: message.to_string(), detail: None }
    }
}

type CliResult = Result<i32, Failure>;

#[derive(Serialize)]
struct SystemSummary {
    source: String,
    j: usize,
    cells: usize,
    ratio: String,
    group: Vec<String>,
    cell_ids: Vec<String>,
}

impl SystemSummary {
    fn of(source: &str, sys: &ValidatedSystem) -> Self {
        SystemSummary {
            source: source.to_string(),
            j: sys.j,
            cells: sys.cell_count(),
            ratio: sys.description.r.clone(),
            group: sys.group.elements.iter().map(|g| g.to_string()).collect(),
            cell_ids: sys.ids().iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Serialize)]
struct FoldSummary {
    seed: u64,
    sampled: usize,
    qualifying: usize,
    satisfied: usize,
}

#[derive(Serialize)]
struct Report {
    schema_version: &'static str,
    system: SystemSummary,
    axioms: AxiomReport,
    essential_boundary: crate::boundary::SubsetZJ,
    contact: crate::boundary::ContactPointReport,
    verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    folding: Option<FoldSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy: Option<ScalingEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing_ms: Option<f64>,
}

/// Parse and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let json_errors = wants_json(&cli.command);
    let pool = match cli.workers {
        Some(0) => Err(Failure::usage("--workers must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Failure::usage(e.to_string())),
        None => rayon::ThreadPoolBuilder::new().build().map_err(|e| Failure::usage(e.to_string())),
    };
    // the pool needs a Send sink, so buffer the output
    let mut buf = Vec::new();
    let result = pool.and_then(|pool| pool.install(|| dispatch(&cli, &mut buf)));
    let _ = out.write_all(&buf);
    match result {
        Ok(code) => code,
        Err(f) => {
            if json_errors {
                let obj = json!({"error": {"kind": f.kind, "code": f.code, "message": f.message, "detail": f.detail}});
                let _ = writeln!(err, "{obj}");
            } else {
                let _ = writeln!(err, "error: {}", f.message);
            }
            f.code
        }
    }
}

fn wants_json(cmd: &Command) -> bool {
    match cmd {
        Command::Validate(a) => a.json,
        Command::Analyze(a) => a.json.is_some(),
        Command::Energy(a) => a.json,
        Command::Dimar(a) => a.json,
        Command::Render(_) | Command::Examples { .. } => false,
    }
}

/// Read a system file, falling back to a builtin example of the same name.
fn read_source(file: &str) -> Result<String, Failure> {
    let path = Path::new(file);
    if path.exists() {
        return std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {file}: {e}")));
    }
    let stem = file.strip_suffix(".toml").unwrap_or(file);
    match fixture(stem) {
        Some(f) => Ok(f.text.to_string()),
        None => Err(Failure::usage(format!("no such file or builtin example: {file}"))),
    }
}

fn parse(file: &str) -> Result<SystemDescription, Failure> {
    let text = read_source(file)?;
    load_system(&text).map_err(|e| Failure::validation(format!("{file}: {e}")))
}

fn load(file: &str) -> Result<ValidatedSystem, Failure> {
    let desc = parse(file)?;
    validate(&desc).map_err(|e| {
        let mut f = Failure::validation(format!("{file}: {e}"));
        if let crate::system::ValidationError::Axioms(report) = &e {
            f.detail = serde_json::to_value(report.as_ref()).ok();
        }
        f
    })
}

fn emit(target: &str, text: &str, out: &mut dyn Write) -> Result<(), Failure> {
    if target == "-" {
        out.write_all(text.as_bytes()).map_err(|e| Failure::usage(e.to_string()))
    } else {
        std::fs::write(target, text).map_err(|e| Failure::usage(format!("cannot write {target}: {e}")))
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialises");
    s.push('\n');
    s
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> CliResult {
    let started = Instant::now();
    let elapsed = || if cli.deterministic { None } else { Some(started.elapsed().as_secs_f64() * 1e3) };
    match &cli.command {
        Command::Validate(a) => {
            let desc = parse(&a.file)?;
            let report = axiom_report(&desc).map_err(|e| Failure::validation(e.to_string()))?;
            let passed = report.all_passed();
            if a.json {
                let body = json!({"schema_version": SCHEMA_VERSION, "passed": passed, "axioms": report});
                emit("-", &to_json(&body), out)?;
            } else {
                for (name, v) in report.verdicts() {
                    let _ = writeln!(out, "{name}: {}", if v.passed { "pass" } else { "FAIL" });
                    for w in &v.witnesses {
                        let _ = writeln!(out, "  witness: {}", serde_json::to_string(w).unwrap_or_default());
                    }
                }
            }
            Ok(if passed { EXIT_OK } else { EXIT_VALIDATION })
        }
        Command::Analyze(a) => {
            let sys = load(&a.file)?;
            let verdict = theorem_dispatch_with_depth(&sys, a.max_level).map_err(Failure::computation)?;
            let folding = if a.fold_samples > 0 {
                Some(fold_summary(&sys, a.fold_samples, cli.seed.unwrap_or(DEFAULT_SEED))?)
            } else {
                None
            };
            let report = Report {
                schema_version: SCHEMA_VERSION,
                system: SystemSummary::of(&a.file, &sys),
                axioms: sys.report.clone(),
                essential_boundary: essential_boundary(&sys),
                contact: verdict.contact.clone(),
                verdict,
                folding,
                energy: None,
                timing_ms: elapsed(),
            };
            match &a.json {
                Some(target) => emit(target, &to_json(&report), out)?,
                None => {
                    let v = &report.verdict;
                    let _ = writeln!(out, "system: {} (J = {}, {} cells)", a.file, sys.j, sys.cell_count());
                    let _ = writeln!(out, "essential boundary: {}", report.essential_boundary);
                    let _ = writeln!(out, "contact points: {}", serde_json::to_string(&v.contact.verdict).unwrap_or_default());
                    let _ = writeln!(out, "status: {}", serde_json::to_string(&v.status).unwrap_or_default().trim_matches('"'));
                    let _ = writeln!(out, "theorem: {}", v.theorem.as_str());
                    for p in &v.prerequisites {
                        let _ = writeln!(out, "  {}: {}", p.name, p.passed);
                    }
                    if let Some(f) = &report.folding {
                        let _ = writeln!(out, "folding: {}/{} qualifying paths satisfied", f.satisfied, f.qualifying);
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Energy(a) => {
            let sys = load(&a.file)?;
            if a.m_max < 2 {
                return Err(Failure::usage("--m-max must be at least 2"));
            }
            let radius = a.radius.unwrap_or_else(|| default_radius(sys.j));
            let ctx = EnergyContext::new(&sys, radius, a.m_max).map_err(Failure::computation)?;
            let est = ctx.scaling(a.p, a.m_max).map_err(Failure::computation)?;
            let name = display_name(&a.file);
            let csv = format!("{CSV_HEADER}\n{}", scaling_csv(&name, &est));
            if let Some(target) = &a.csv {
                emit(target, &csv, out)?;
            }
            if a.json {
                let body = json!({
                    "schema_version": SCHEMA_VERSION,
                    "system": SystemSummary::of(&a.file, &sys),
                    "energy": est,
                    "timing_ms": elapsed(),
                });
                emit("-", &to_json(&body), out)?;
            } else if a.csv.as_deref() != Some("-") {
                let _ = writeln!(out, "base level {}, M = {}, p = {}", est.base_level, est.radius, est.p);
                for (k, v) in est.values.iter().enumerate() {
                    let ratio = if k == 0 { String::from("-") } else { format!("{:.6}", est.ratios[k - 1]) };
                    let _ = writeln!(out, "m = {}  E = {:.9e}  ratio = {ratio}  root = {:.6}", v.m, v.value, est.roots[k]);
                }
            }
            Ok(EXIT_OK)
        }
        Command::Dimar(a) => {
            let sys = load(&a.file)?;
            if !(a.p_lo > 1.0 && a.p_hi > a.p_lo && a.tol > 0.0) {
                return Err(Failure::usage("need 1 < p-lo < p-hi and tol > 0"));
            }
            let radius = a.radius.unwrap_or_else(|| default_radius(sys.j));
            let bracket = if a.tol >= a.p_hi - a.p_lo {
                crate::energy::dimar_bracket(&sys, a.p_lo, a.p_hi, a.tol, radius, a.m_max)
            } else {
                EnergyContext::new(&sys, radius, a.m_max)
                    .and_then(|ctx| dimar_bracket_in(&ctx, a.p_lo, a.p_hi, a.tol, a.m_max))
            }
            .map_err(Failure::computation)?;
            if a.json {
                let body = json!({
                    "schema_version": SCHEMA_VERSION,
                    "system": SystemSummary::of(&a.file, &sys),
                    "m_max": a.m_max,
                    "M": radius,
                    "bracket": bracket,
                    "timing_ms": elapsed(),
                });
                emit("-", &to_json(&body), out)?;
            } else {
                let _ = writeln!(
                    out,
                    "finite-level estimate at m_max = {}: crossing in [{:.6}, {:.6}]",
                    a.m_max, bracket.lo, bracket.hi
                );
            }
            Ok(EXIT_OK)
        }
        Command::Render(a) => {
            let sys = load(&a.file)?;
            let svg = render_svg(&sys, &RenderSpec::new(a.level, a.overlay.clone())).map_err(|e| match e {
                crate::render::RenderError::TooLarge { .. }
                | crate::render::RenderError::BadLevel
                | crate::render::RenderError::BadSubset(..) => Failure::usage(e.to_string()),
                other => Failure::computation(other),
            })?;
            if a.out.as_os_str() == "-" {
                out.write_all(&svg).map_err(|e| Failure::usage(e.to_string()))?;
            } else {
                std::fs::write(&a.out, svg)
                    .map_err(|e| Failure::usage(format!("cannot write {}: {e}", a.out.display())))?;
            }
            Ok(EXIT_OK)
        }
        Command::Examples { action } => match action {
            ExamplesAction::List => {
                for f in FIXTURES {
                    let _ = writeln!(out, "{}\t{}", f.name, f.summary);
                }
                Ok(EXIT_OK)
            }
            ExamplesAction::Show { name } => {
                let f = fixture(name).ok_or_else(|| Failure::usage(format!("unknown example {name}")))?;
                let _ = write!(out, "{}", f.text);
                Ok(EXIT_OK)
            }
            ExamplesAction::Write { name, path } => {
                let f = fixture(name).ok_or_else(|| Failure::usage(format!("unknown example {name}")))?;
                std::fs::write(path, f.text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
                Ok(EXIT_OK)
            }
        },
    }
}

fn display_name(file: &str) -> String {
    Path::new(file).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| file.to_string())
}

/// Sample corridor paths around every level-1 cell and check the folded traces.
fn fold_summary(sys: &ValidatedSystem, samples: usize, seed: u64) -> Result<FoldSummary, Failure> {
    let levels = build_levels(sys, 3).map_err(Failure::computation)?;
    let radius = default_radius(sys.j);
    let cells = sys.cell_count();
    let mut summary = FoldSummary { seed, sampled: 0, qualifying: 0, satisfied: 0 };
    for w in 0..cells {
        let share = samples / cells + usize::from(w < samples % cells);
        if share == 0 {
            continue;
        }
        let sampled =
            sample_corridor_paths_on(&levels[0], &levels[2], w, radius, share, seed.wrapping_add(w as u64), EdgeKind::Star);
        let paths = match sampled {
            Ok(paths) => paths,
            // the corridor may cover the whole level
            Err(PathError::NoneFound(_)) => continue,
            Err(e) => return Err(Failure::computation(e)),
        };
        for p in paths {
            summary.sampled += 1;
            if let Some(t) = interior_fold_trace(sys, &levels, &p.full(), 1).map_err(Failure::computation)? {
                summary.qualifying += 1;
                summary.satisfied += usize::from(t.satisfied);
            }
        }
    }
    Ok(summary)
}
