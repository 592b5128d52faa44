//! `bloch`: command-line access to the bloch toolkit.

mod input;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use bloch_core::molecules::{cs_lower_dual, cs_upper, default_probes, pairing, projective_upper};
use bloch_core::norms::{bloch_seminorm_bracket, default_family};
use bloch_core::report::{Status, Tolerances};
use bloch_core::scenario::{bundled_scenario, run_scenario, Scenario};
use bloch_core::summing::{
    domination_check, factorize, lp_duality_check, maurey_extrapolate, pietsch_lp, summing_estimate,
};
use bloch_core::verify::{verify_all, VerifyConfig};
use bloch_core::{BlochError, DiscPoint, Exponent, Norm, Report};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use input::{load_family, read_expr, read_molecule, read_points, read_sample, read_text};

const VERSION: &str = env!("BLOCH_VERSION");

#[derive(Parser)]
#[command(name = "bloch", version = VERSION, about = "Bloch seminorms, summing norms, Pietsch measures and molecule norms on the unit disc")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Norm on the target space.
    #[arg(long, global = true, value_enum, default_value_t = NormArg::Euclidean)]
    norm: NormArg,
    /// Tolerance override, `name=value`; repeatable.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    tol: Vec<String>,
    /// Emit CSV rows instead of JSON.
    #[arg(long, global = true)]
    csv: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Euclidean,
    Sup,
}

impl From<NormArg> for Norm {
    fn from(n: NormArg) -> Norm {
        match n {
            NormArg::Euclidean => Norm::Euclidean,
            NormArg::Sup => Norm::Sup,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Values and derivatives of a function at points.
    Eval {
        #[arg(long)]
        func: String,
        /// Points file or inline JSON list of `[re, im]`.
        #[arg(long)]
        points: String,
    },
    /// Certified bracket on the Bloch seminorm.
    Seminorm {
        #[arg(long)]
        func: String,
        /// Grid resolutions (comma separated for a sweep).
        #[arg(long, value_delimiter = ',', default_value = "256")]
        resolution: Vec<usize>,
    },
    /// Both sides of the p-summing inequality on a weighted sample.
    Summing {
        #[arg(long)]
        func: String,
        #[arg(long)]
        sample: String,
        /// Family file: a family document or a family recipe (`{"kind": ...}`).
        #[arg(long)]
        family: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        p: Vec<Exponent>,
    },
    /// Discrete Pietsch measure, optional dual, factorization and off-grid checks.
    Pietsch {
        #[arg(long)]
        func: String,
        #[arg(long)]
        points: String,
        #[arg(long)]
        family: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        p: Vec<Exponent>,
        /// Also solve the dual LP and report the witness sample.
        #[arg(long)]
        dual: bool,
        /// Build the factorization certificate.
        #[arg(long)]
        factorize: bool,
        /// Evaluate the domination inequality at these extra points.
        #[arg(long)]
        check_points: Option<String>,
    },
    /// Maurey extrapolation from a q-dominating measure.
    Maurey {
        #[arg(long)]
        func: String,
        #[arg(long)]
        points: String,
        #[arg(long)]
        family: Option<String>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 4.0)]
        q: f64,
        #[arg(long, default_value_t = 6)]
        depth: usize,
    },
    /// Norm bounds of a vector-valued molecule.
    Molecule {
        #[arg(long)]
        mol: String,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        p: Vec<Exponent>,
        /// Compute the lower/upper sandwich for each p.
        #[arg(long)]
        bounds: bool,
    },
    /// The pairing of a molecule with a function.
    Pair {
        #[arg(long)]
        mol: String,
        #[arg(long)]
        func: String,
    },
    /// Run the invariant suite, or one scenario.
    Verify {
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
        /// Additionally check the certificates of this family.
        #[arg(long)]
        family: Option<String>,
        /// Bundled scenario name or scenario file instead of the full suite.
        #[arg(long)]
        scenario: Option<String>,
    },
}

/// How a command ended; maps to the exit status.
enum Outcome {
    Pass,
    CertifiedFailure,
}

enum Failure {
    Input(String),
    Certified(String),
}

impl From<BlochError> for Failure {
    fn from(e: BlochError) -> Self {
        match e {
            BlochError::CertificationFailure(_) | BlochError::RankDeficiency { .. } | BlochError::LpFailure(_) => {
                Failure::Certified(e.to_string())
            }
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<Outcome, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("BLOCH_MAX_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // Only fails if a pool already exists, which cannot happen this early.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::CertifiedFailure) => ExitCode::from(1),
        Err(Failure::Certified(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let g = &cli.global;
    let mut tolerances = Tolerances::default();
    for pair in &g.tol {
        tolerances.insert_pair(pair).map_err(Failure::Input)?;
    }
    let norm: Norm = g.norm.into();
    match &cli.command {
        Command::Eval { func, points } => cmd_eval(g, func, points),
        Command::Seminorm { func, resolution } => cmd_seminorm(g, norm, func, resolution),
        Command::Summing { func, sample, family, p } => cmd_summing(g, norm, func, sample, family.as_deref(), p),
        Command::Pietsch { func, points, family, p, dual, factorize, check_points } => cmd_pietsch(
            g,
            norm,
            &tolerances,
            PietschArgs { func, points, family: family.as_deref(), p, dual: *dual, factorize: *factorize },
            check_points.as_deref(),
        ),
        Command::Maurey { func, points, family, p, q, depth } => {
            cmd_maurey(g, norm, &tolerances, func, points, family.as_deref(), *p, *q, *depth)
        }
        Command::Molecule { mol, p, bounds } => cmd_molecule(g, norm, &tolerances, mol, p, *bounds),
        Command::Pair { mol, func } => cmd_pair(g, mol, func),
        Command::Verify { json, family, scenario } => {
            cmd_verify(g, norm, tolerances, *json, family.as_deref(), scenario.as_deref())
        }
    }
}

/// Prints `{tool, version, seed, command, result}`.
fn emit(g: &Global, command: &str, result: impl Serialize) -> Result<(), Failure> {
    let doc = json!({
        "tool": "bloch",
        "version": VERSION,
        "seed": g.seed,
        "command": command,
        "result": serde_json::to_value(result)?,
    });
    print_text(&serde_json::to_string_pretty(&doc)?);
    Ok(())
}

/// Writes a line to stdout; a closed pipe is not an error.
fn print_text(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn emit_csv(header: &[&str], rows: Vec<Vec<String>>) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| Failure::Input(e.to_string()))?;
    Ok(())
}

fn num(x: f64) -> String {
    if x.is_infinite() && x > 0.0 {
        "inf".into()
    } else {
        format!("{x:e}")
    }
}

fn cmd_eval(g: &Global, func: &str, points: &str) -> CmdResult {
    let f = read_expr(func)?;
    let zs = read_points(points)?;
    let mut rows = Vec::new();
    let mut out = Vec::new();
    for z in &zs {
        let v = f.eval(*z)?;
        let d = f.deriv(*z)?;
        if g.csv {
            let mut row = vec![num(z.value().re), num(z.value().im)];
            for c in v.components().iter().chain(d.components()) {
                row.push(num(c.re));
                row.push(num(c.im));
            }
            rows.push(row);
        }
        out.push(json!({ "z": z, "value": v, "derivative": d }));
    }
    if g.csv {
        let d = f.dim()?;
        let mut header = vec!["z_re".to_string(), "z_im".to_string()];
        for prefix in ["value", "derivative"] {
            for j in 0..d {
                header.push(format!("{prefix}{j}_re"));
                header.push(format!("{prefix}{j}_im"));
            }
        }
        emit_csv(&header.iter().map(String::as_str).collect::<Vec<_>>(), rows)?;
    } else {
        emit(g, "eval", out)?;
    }
    Ok(Outcome::Pass)
}

fn cmd_seminorm(g: &Global, norm: Norm, func: &str, resolution: &[usize]) -> CmdResult {
    let f = read_expr(func)?.normalize_origin()?;
    let mut brackets = Vec::new();
    for &r in resolution {
        brackets.push(bloch_seminorm_bracket(&f, r, norm)?);
    }
    if g.csv {
        let rows = brackets
            .iter()
            .map(|b| vec![b.resolution.to_string(), num(b.lower), num(b.upper), b.lower_method.clone(), b.upper_method.clone()])
            .collect();
        emit_csv(&["resolution", "lower", "upper", "lower_method", "upper_method"], rows)?;
    } else if brackets.len() == 1 {
        emit(g, "seminorm", &brackets[0])?;
    } else {
        emit(g, "seminorm", &brackets)?;
    }
    Ok(Outcome::Pass)
}

fn cmd_summing(g: &Global, norm: Norm, func: &str, sample: &str, family: Option<&str>, ps: &[Exponent]) -> CmdResult {
    let f = read_expr(func)?.normalize_origin()?;
    let sample = read_sample(sample)?;
    let family = load_family(family, &sample.points(), g.seed)?;
    let mut ests = Vec::new();
    for &p in ps {
        ests.push(summing_estimate(&f, &sample, &family, p, norm)?);
    }
    if g.csv {
        let rows = ests
            .iter()
            .map(|e| {
                vec![
                    e.p.to_string(),
                    num(e.numerator),
                    num(e.denominator_family),
                    num(e.denominator_closed_form),
                    num(e.certified_lower),
                    num(e.heuristic_ratio),
                ]
            })
            .collect();
        emit_csv(&["p", "numerator", "denominator_family", "denominator_closed_form", "certified_lower", "heuristic_ratio"], rows)?;
    } else if ests.len() == 1 {
        emit(g, "summing", &ests[0])?;
    } else {
        emit(g, "summing", &ests)?;
    }
    Ok(Outcome::Pass)
}

struct PietschArgs<'a> {
    func: &'a str,
    points: &'a str,
    family: Option<&'a str>,
    p: &'a [Exponent],
    dual: bool,
    factorize: bool,
}

fn cmd_pietsch(g: &Global, norm: Norm, tol: &Tolerances, a: PietschArgs, check_points: Option<&str>) -> CmdResult {
    let f = read_expr(a.func)?.normalize_origin()?;
    let points = read_points(a.points)?;
    let family = load_family(a.family, &points, g.seed)?;
    let extra: Option<Vec<DiscPoint>> = check_points.map(read_points).transpose()?;
    let dual_tol = tol.get("summing.lp_duality", 1e-7);
    let mut outcome = Outcome::Pass;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for &p in a.p {
        let measure = pietsch_lp(&f, &points, &family, p, norm)?;
        let mut entry = json!({ "measure": measure });
        rows.push(vec![p.to_string(), num(measure.constant), num(measure.mass)]);
        entry["domination_solved"] = json!(domination_check(&f, &points, &family, &measure, norm)?.worst_margin);
        if a.dual {
            let r = lp_duality_check(&f, &points, &family, p, norm)?;
            if r.relative_gap.max(r.ratio_gap) > dual_tol {
                outcome = Outcome::CertifiedFailure;
            }
            entry["duality"] = serde_json::to_value(&r)?;
        }
        if a.factorize {
            match factorize(&f, &points, &family, &measure, norm, g.seed) {
                Ok(c) => entry["factorization"] = serde_json::to_value(&c)?,
                Err(e) => {
                    outcome = Outcome::CertifiedFailure;
                    entry["factorization"] = json!({ "error": e.to_string() });
                }
            }
        }
        if let Some(zs) = &extra {
            entry["check_points"] = serde_json::to_value(domination_check(&f, zs, &family, &measure, norm)?)?;
        }
        results.push(entry);
    }
    if g.csv {
        emit_csv(&["p", "constant", "mass"], rows)?;
    } else if results.len() == 1 {
        emit(g, "pietsch", &results[0])?;
    } else {
        emit(g, "pietsch", &results)?;
    }
    Ok(outcome)
}

#[allow(clippy::too_many_arguments)]
fn cmd_maurey(
    g: &Global,
    norm: Norm,
    tol: &Tolerances,
    func: &str,
    points: &str,
    family: Option<&str>,
    p: f64,
    q: f64,
    depth: usize,
) -> CmdResult {
    let f = read_expr(func)?.normalize_origin()?;
    let points = read_points(points)?;
    let family = load_family(family, &points, g.seed)?;
    let r = maurey_extrapolate(&f, &points, &family, p, q, depth, norm)?;
    let interp = r.stages.iter().map(|s| s.interpolation_margin).fold(f64::INFINITY, f64::min);
    let ok = interp >= -tol.get("summing.maurey_interpolation", 1e-12)
        && r.final_margin >= -tol.get("summing.maurey_final", 0.0)
        && r.theta_residual <= tol.get("summing.maurey_theta", 1e-12);
    emit(g, "maurey", &r)?;
    Ok(if ok { Outcome::Pass } else { Outcome::CertifiedFailure })
}

fn cmd_molecule(g: &Global, norm: Norm, tol: &Tolerances, mol: &str, ps: &[Exponent], bounds: bool) -> CmdResult {
    let m = read_molecule(mol)?;
    let proj = projective_upper(&m, norm);
    if !bounds {
        emit(g, "molecule", json!({ "atoms": m.atoms.len(), "projective_upper": proj.value, "representation": proj.representation }))?;
        return Ok(Outcome::Pass);
    }
    let family = default_family(&m.points(), g.seed);
    let probes = default_probes(&m, &family, norm, g.seed);
    let lower = cs_lower_dual(&m, &probes, norm)?;
    let sandwich_tol = tol.get("molecules.sandwich", 1e-9);
    let mut outcome = Outcome::Pass;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for &p in ps {
        let upper = cs_upper(&m, p, norm);
        if lower.value > upper.value + sandwich_tol {
            outcome = Outcome::CertifiedFailure;
        }
        rows.push(vec![p.to_string(), num(lower.value), num(upper.value), num(proj.value)]);
        results.push(json!({
            "p": p,
            "lower": lower.value,
            "upper": upper.value,
            "projective_upper": proj.value,
            "witnesses": {
                "upper_representation": upper.representation,
                "lower_probe": lower.witness.map(|i| &probes[i]),
                "probes": probes.len(),
            },
        }));
    }
    if g.csv {
        emit_csv(&["p", "lower", "upper", "projective_upper"], rows)?;
    } else if results.len() == 1 {
        emit(g, "molecule", &results[0])?;
    } else {
        emit(g, "molecule", &results)?;
    }
    Ok(outcome)
}

fn cmd_pair(g: &Global, mol: &str, func: &str) -> CmdResult {
    let m = read_molecule(mol)?;
    let f = read_expr(func)?.normalize_origin()?;
    let v = pairing(&m, &f)?;
    emit(g, "pair", json!({ "pairing": [v.re, v.im] }))?;
    Ok(Outcome::Pass)
}

fn cmd_verify(
    g: &Global,
    norm: Norm,
    tolerances: Tolerances,
    as_json: bool,
    family: Option<&str>,
    scenario: Option<&str>,
) -> CmdResult {
    let start = Instant::now();
    let mut report: Report = match scenario {
        Some(name) => {
            let text = match bundled_scenario(name) {
                Some(t) => t.to_string(),
                None => read_text(name)?,
            };
            let mut s = Scenario::from_json(&text)?;
            for (k, v) in tolerances.0 {
                s.tolerances.0.insert(k, v);
            }
            run_scenario(&s, VERSION)
        }
        None => {
            let family = family.map(input::load_family_unchecked).transpose()?;
            verify_all(&VerifyConfig { seed: g.seed, norm, tolerances, family }, VERSION)
        }
    };
    report.timing_seconds = Some(start.elapsed().as_secs_f64());
    if as_json {
        print_text(&serde_json::to_string_pretty(&report)?);
    } else if g.csv {
        let rows = report
            .checks
            .iter()
            .map(|c| {
                vec![
                    c.name.clone(),
                    status_word(c.status).into(),
                    serde_json::to_value(c.provenance).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                    c.tolerance.map(num).unwrap_or_default(),
                    c.margin.map(num).unwrap_or_default(),
                ]
            })
            .collect();
        emit_csv(&["name", "status", "provenance", "tolerance", "margin"], rows)?;
    } else {
        print_human(&report);
    }
    Ok(if report.ok() { Outcome::Pass } else { Outcome::CertifiedFailure })
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "fail",
        Status::Info => "info",
    }
}

fn print_human(r: &Report) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "bloch {} verify (seed {})", r.version, r.seed);
    for c in &r.checks {
        let margin = c.margin.map(|m| format!(" margin={m:.3e}")).unwrap_or_default();
        let detail = c.detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default();
        let _ = writeln!(out, "{:<4} {}{margin}{detail}", status_word(c.status), c.name);
    }
    let s = &r.summary;
    let _ = writeln!(
        out,
        "{} pass, {} fail ({} certified), {} info in {:.2}s",
        s.pass,
        s.fail,
        s.certified_failures,
        s.info,
        r.timing_seconds.unwrap_or(0.0)
    );
}

