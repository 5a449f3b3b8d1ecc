//! `contact-ricci`: run one pipeline from a JSON config and write its reports.
//!
//! Exit status 0 when every check is within tolerance, 1 when a check failed (the
//! reports are still written), 2 on invalid input or a failed computation.

mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, ValueEnum};
use contact_ricci::chart::{write_grid_csv, Backend, Expr, ExprField, SharedScalar};
use contact_ricci::contact::{model_manifold, ContactData, MetricField};
use contact_ricci::curvature::{grid_rows, verification_suite, GRID_COLUMNS};
use contact_ricci::metric_space::{
    clarke_bound_sampled, l2_inner_sampled, path_length_upper_sampled, sample_metric, volume_sampled, ExprMetric,
    SampleSet, Scaled, Sym3,
};
use contact_ricci::realization::{
    almost_global_realize, closed_form_agreement, local_realize, random_perturbations, FlowSample,
};
use contact_ricci::{tolerance, Error};
use serde::Serialize;
use serde_json::{json, Value};

use config::{MetricSpec, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Verify,
    RealizeLocal,
    RealizeGlobal,
    Distance,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::RealizeLocal => "realize-local",
            Command::RealizeGlobal => "realize-global",
            Command::Distance => "distance",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "contact-ricci", version, about = "Compatible metrics and Ricci-Reeb realization on contact charts")]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    command: Command,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

/// A failure that ends the run with status 2.
#[derive(Debug)]
struct Failure {
    context: &'static str,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            context: "config",
            message: message.into(),
        }
    }
}

trait Context<T> {
    fn context(self, module: &'static str) -> Result<T, Failure>;
}

impl<T> Context<T> for Result<T, Error> {
    fn context(self, module: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            context: module,
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: String,
    worst: f64,
    tolerance: f64,
    rung: &'static str,
    passed: bool,
}

impl Check {
    fn new(name: &str, worst: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            worst,
            tolerance,
            rung: tolerance::rung(tolerance),
            passed: worst <= tolerance,
        }
    }

    fn flag(name: &str, ok: bool) -> Self {
        Check::new(name, if ok { 0.0 } else { 1.0 }, 0.0)
    }
}

struct Outcome {
    checks: Vec<Check>,
    details: Value,
}

fn backend_name(b: Backend) -> &'static str {
    match b {
        Backend::AnalyticJet => "analytic_jet",
        Backend::FiniteDifference => "finite_difference",
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error [{}]: {}", f.context, f.message);
            ExitCode::from(2)
        }
    }
}

fn run(args: &Args) -> Result<bool, Failure> {
    let mut cfg = config::load(&args.config).map_err(Failure::input)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let cd = model_manifold(&cfg.manifold.name, &cfg.manifold.params).context("contact_core")?;
    std::fs::create_dir_all(&args.out).map_err(|e| Failure {
        context: "report",
        message: format!("cannot create {}: {e}", args.out.display()),
    })?;
    let outcome = match args.command {
        Command::Verify => verify(&cfg, &cd, &args.out)?,
        Command::RealizeLocal => realize_local(&cfg, &cd, &args.out)?,
        Command::RealizeGlobal => realize_global(&cfg, &cd, &args.out)?,
        Command::Distance => distance(&cfg, &cd)?,
    };
    let passed = outcome.checks.iter().all(|c| c.passed);
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let summary = json!({
        "command": args.command.name(),
        "model": cd.name,
        "backend": backend_name(cd.backend()),
        "seed": cfg.seed,
        "passed": passed,
        "checks": outcome.checks,
        "details": outcome.details,
        "timestamp": timestamp,
    });
    write_json(&args.out.join("summary.json"), &summary)?;
    for c in outcome.checks.iter().filter(|c| !c.passed) {
        eprintln!("check failed: {} worst {:.3e} > {:.1e} ({})", c.name, c.worst, c.tolerance, c.rung);
    }
    Ok(passed)
}

fn report_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        context: "report",
        message: format!("cannot write {}: {e}", path.display()),
    }
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| report_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, v).map_err(|e| report_err(path, e))?;
    std::io::Write::write_all(&mut w, b"\n").map_err(|e| report_err(path, e))
}

fn write_csv(path: &Path, columns: &[&str], rows: impl IntoIterator<Item = ([f64; 3], Vec<f64>)>) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| report_err(path, e))?;
    write_grid_csv(BufWriter::new(file), columns, rows).map_err(|e| report_err(path, e))
}

fn prescribed(cfg: &RunConfig) -> Result<SharedScalar, Failure> {
    let v = cfg.f.as_ref().ok_or_else(|| Failure::input("missing field `f` (the prescribed Ricci(X))"))?;
    let e = Expr::from_json(v).map_err(|e| Failure::input(format!("field `f`: {e}")))?;
    Ok(Arc::new(ExprField(e)))
}

fn verify(cfg: &RunConfig, cd: &ContactData, out: &Path) -> Result<Outcome, Failure> {
    let suite = verification_suite(cd, &cfg.verify.suite).context("curvature_engine")?;
    write_csv(&out.join("curvature_grid.csv"), &GRID_COLUMNS, grid_rows(&suite))?;
    let fields = random_perturbations(cfg.seed, cfg.verify.random_perturbations);
    let pts = cd.domain.coarse_points(cfg.verify.perturbation_points);
    let agreement = closed_form_agreement(cd, &fields, &pts).context("realization")?;
    let tol = suite.identities[0].tolerance;
    let mut checks: Vec<Check> = suite
        .identities
        .iter()
        .map(|c| Check {
            name: c.name.into(),
            worst: c.worst,
            tolerance: c.tolerance,
            rung: c.rung,
            passed: c.passed,
        })
        .collect();
    checks.push(Check::new(
        "skipped_fraction",
        suite.skipped as f64 / suite.points.max(1) as f64,
        contact_ricci::curvature::MAX_SKIPPED_FRACTION,
    ));
    if !fields.is_empty() {
        checks.push(Check::new("perturbed_closed_vs_oracle", agreement.max_gap, tol));
        checks.push(Check::new("perturbed_upper_bound", agreement.max_bound_excess, tol));
    }
    let range = |f: fn(&contact_ricci::curvature::CurvatureReport) -> f64| {
        suite.reports.iter().fold([f64::INFINITY, f64::NEG_INFINITY], |m, r| [m[0].min(f(r)), m[1].max(f(r))])
    };
    let details = json!({
        "suite": suite,
        "p_range": range(|r| r.p),
        "q_range": range(|r| r.q),
        "perturbation_agreement": agreement,
    });
    Ok(Outcome { checks, details })
}

const SAMPLE_COLUMNS: [&str; 7] = ["seed_x", "seed_y", "seed_z", "time", "eta", "mu", "lambda"];

fn sample_row(s: &FlowSample) -> ([f64; 3], Vec<f64>) {
    let mut v = s.seed.to_vec();
    v.extend([s.time, s.eta.value(), s.mu.value(), s.lambda.value()]);
    (s.point, v)
}

fn realize_local(cfg: &RunConfig, cd: &ContactData, out: &Path) -> Result<Outcome, Failure> {
    let f = prescribed(cfg)?;
    let local = cfg.local.as_ref().ok_or_else(|| Failure::input("missing field `local` (flow box)"))?;
    let sol = Arc::new(local_realize(cd, f, &local.flow_box, local.step).context("realization")?);
    let (summary, per) = sol.verify().context("realization")?;
    let mut columns = SAMPLE_COLUMNS.to_vec();
    columns.extend(["f", "ricci_oracle", "ricci_closed", "residual"]);
    let rows = sol.samples.iter().zip(&per).map(|(s, c)| {
        let (p, mut v) = sample_row(s);
        v.extend([c.f, c.ricci_oracle, c.ricci_closed, c.residual]);
        (p, v)
    });
    write_csv(&out.join("realization.csv"), &columns, rows)?;
    let checks = vec![
        Check::new("ricci_residual", summary.max_residual, tolerance::NUMERIC),
        Check::new("closed_vs_oracle", summary.max_closed_gap, tolerance::NUMERIC),
        Check::new("upper_bound", summary.max_bound_excess, tolerance::ANALYTIC),
        Check::new("initial_surface_defect", summary.boundary_defect, tolerance::STRUCTURAL),
    ];
    Ok(Outcome {
        checks,
        details: json!({ "flow_box": local.flow_box, "realization": summary }),
    })
}

fn realize_global(cfg: &RunConfig, cd: &ContactData, out: &Path) -> Result<Outcome, Failure> {
    let f = prescribed(cfg)?;
    let seq = almost_global_realize(cd, f, &cfg.global).context("realization")?;
    write_csv(&out.join("realization.csv"), &SAMPLE_COLUMNS, seq.solution.samples.iter().map(sample_row))?;
    let c = &seq.convergence;
    write_json(
        &out.join("convergence.json"),
        &json!({
            "summable": c.summable,
            "deflated_sets_agree": c.deflated_sets_agree,
            "pointwise": c.pointwise,
            "verdict": c.verdict,
            "report": c,
            "distance_matrix": seq.distance_matrix,
            "sqrt_eps_fit": seq.sqrt_eps_fit,
            "partial_sum_ratio": seq.partial_sum_ratio,
            "clarke_constant": seq.clarke_constant,
            "clarke_ratio": seq.clarke_ratio,
        }),
    )?;
    let worst_outside = seq.entries.iter().fold(0.0f64, |m, e| m.max(e.residual_outside));
    let excess = seq.entries.iter().fold(f64::NEG_INFINITY, |m, e| m.max(e.bound_excess));
    let mut checks = vec![
        Check::new("ricci_residual_outside_band", worst_outside, tolerance::NUMERIC),
        Check::new("upper_bound", excess, tolerance::ANALYTIC),
        Check::new("volume_drift", seq.max_volume_drift, tolerance::ANALYTIC),
        Check::flag("convergence_summable", c.summable),
        Check::flag("convergence_deflated_sets", c.deflated_sets_agree),
        Check::flag("convergence_pointwise", c.pointwise),
    ];
    if let Some(fit) = seq.sqrt_eps_fit {
        checks.push(Check::new("sqrt_eps_fit_r2_deficit", 1.0 - fit.r2, 0.01));
    }
    Ok(Outcome {
        checks,
        details: serde_json::to_value(&seq).map_err(|e| Failure {
            context: "report",
            message: e.to_string(),
        })?,
    })
}

fn metric_of<'a>(spec: &MetricSpec, cd: &'a ContactData) -> Result<Box<dyn MetricField + 'a>, Failure> {
    let bad = |m: String| Failure::input(format!("metric `{}`: {m}", spec.name));
    match (&spec.components, spec.scale) {
        (Some(_), Some(_)) => Err(bad("give either `components` or `scale`, not both".into())),
        (Some(c), None) => {
            let e: Vec<Expr> = c
                .iter()
                .map(Expr::from_json)
                .collect::<Result<_, _>>()
                .map_err(|e| bad(e.to_string()))?;
            Ok(Box::new(ExprMetric(Arc::new(e.try_into().expect("six components")))))
        }
        (None, Some(s)) if s > 0.0 => Ok(Box::new(Scaled(s, cd))),
        (None, Some(s)) => Err(bad(format!("scale {s} is not positive"))),
        (None, None) => Ok(Box::new(Scaled(1.0, cd))),
    }
}

#[derive(Serialize)]
struct PairDistance {
    a: String,
    b: String,
    path_length_upper: f64,
    clarke_bound: f64,
    difference_samples: usize,
}

fn distance(cfg: &RunConfig, cd: &ContactData) -> Result<Outcome, Failure> {
    let opts = cfg.distance.as_ref().ok_or_else(|| Failure::input("missing field `distance`"))?;
    if opts.metrics.is_empty() || opts.path_steps == 0 {
        return Err(Failure::input("`distance` needs at least one metric and path_steps ≥ 1"));
    }
    let set = SampleSet::from_domain(&cd.domain);
    let mut sampled: Vec<Vec<Sym3>> = Vec::new();
    for m in &opts.metrics {
        let g = metric_of(m, cd)?;
        sampled.push(sample_metric(g.as_ref(), &set).context("metric_space")?);
    }
    let mut checks = Vec::new();
    let mut volumes = Vec::new();
    for (m, g) in opts.metrics.iter().zip(&sampled) {
        let vol = volume_sampled(&set, g).context("metric_space")?;
        let pairing = l2_inner_sampled(&set, g, g, g).context("metric_space")?;
        checks.push(Check::new(
            &format!("self_pairing_{}", m.name),
            (pairing - 3.0 * vol).abs() / vol.max(1.0),
            tolerance::ANALYTIC,
        ));
        volumes.push(json!({ "name": m.name, "volume": vol, "self_pairing": pairing }));
    }
    let mut pairs = Vec::new();
    for i in 0..sampled.len() {
        for j in i + 1..sampled.len() {
            let len = path_length_upper_sampled(&set, &sampled[i], &sampled[j], opts.path_steps).context("metric_space")?;
            let cb = clarke_bound_sampled(&set, &sampled[i], &sampled[j]).context("metric_space")?;
            pairs.push(PairDistance {
                a: opts.metrics[i].name.clone(),
                b: opts.metrics[j].name.clone(),
                path_length_upper: len,
                clarke_bound: cb.bound,
                difference_samples: cb.samples_in_set,
            });
        }
    }
    checks.push(Check::flag(
        "finite_distances",
        pairs.iter().all(|p| p.path_length_upper.is_finite() && p.clarke_bound.is_finite()),
    ));
    Ok(Outcome {
        checks,
        details: json!({ "samples": set.len(), "path_steps": opts.path_steps, "metrics": volumes, "pairs": pairs }),
    })
}
