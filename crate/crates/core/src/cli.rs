//! Config-driven command-line front end.
//!
//! Every command parses and validates its whole config, builds the scenario,
//! computes the full table, and only then writes anything.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::domain::{enumerate_class, induce_graph, ClassFamily, CostModel, FiniteDomain, LabeledDistribution, ManipulationGraph, Norm};
use crate::error::Error;
use crate::experiments::{
    graph_learn, graph_learn_row, graph_learning_instance, run_experiment, ExperimentName, ExperimentOutput,
    ExperimentParams, RunContext, GRAPH_LEARN_HEADER,
};
use crate::graphdist::{GraphClass, GraphSample};
use crate::learners::draw_sample;
use crate::losses::{effective_hypothesis, expected_loss, is_incentive_compatible, social_burden, LossKind};
use crate::scenarios::{
    gen_appendix_b, gen_example1, gen_example2, gen_observation1, gen_random, observation1_realizable, AppendixB,
    RandomParams, Scenario,
};
use crate::table::{Cell, ResultTable};
use crate::vcdim::{hypothesis_system, loss_class, vc_dimension_with_limit, VcReport, DEFAULT_CAP, DEFAULT_GROUND_LIMIT};

pub const DEFAULT_SEED: u64 = 7;
pub const WORKERS_ENV: &str = "STRATEGIA_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "strategia", version, about = "Strategic classification workbench on finite instances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact per-hypothesis losses, incentive compatibility and burden.
    Eval(CommonArgs),
    /// VC dimension reports for the configured loss classes.
    Vc(CommonArgs),
    /// Run a named experiment and check its assertions.
    Experiment(ExperimentArgs),
    /// Learn a manipulation graph from observed neighborhoods.
    GraphLearn(CommonArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub name: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
    /// Subset-construction sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<usize>>,
}

/// Top-level config document.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub scenario: Option<ScenarioSpec>,
    pub vc: Option<VcSection>,
    pub graph_learn: Option<GraphLearnSection>,
    pub experiment: Option<ExperimentParams>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScenarioSpec {
    Example1 {
        points: usize,
    },
    Example2 {
        p: [f64; 4],
    },
    Observation1 {
        d: usize,
        #[serde(default)]
        target: Option<usize>,
        #[serde(default)]
        positive_mass: Option<f64>,
    },
    AppendixB {
        spec: AppendixB,
    },
    Random {
        points: usize,
        edge_density: f64,
        class_size: usize,
        #[serde(default)]
        deterministic_labels: bool,
        seed: u64,
    },
    GraphLearning {
        seed: u64,
    },
    Inline(InlineScenario),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineScenario {
    /// Domain size when no coordinates are given.
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub coords: Option<Vec<Vec<f64>>>,
    /// Directed edges `[from, to]`. Mutually exclusive with `cost`.
    #[serde(default)]
    pub edges: Option<Vec<[usize; 2]>>,
    /// Induce the graph from coordinate distances instead.
    #[serde(default)]
    pub cost: Option<CostSpec>,
    pub class: ClassFamily,
    pub distribution: Vec<MassEntry>,
    /// Candidate graphs for graph learning, each a list of edges.
    #[serde(default)]
    pub candidates: Option<Vec<Vec<[usize; 2]>>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub norm: Norm,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassEntry {
    pub x: usize,
    pub y: u8,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VcTarget {
    Class,
    Binary,
    Strategic,
    Component,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VcSection {
    #[serde(default)]
    pub losses: Option<Vec<VcTarget>>,
    #[serde(default)]
    pub cap: Option<usize>,
    #[serde(default)]
    pub ground_limit: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphLearnSection {
    /// Points per run.
    #[serde(default)]
    pub n: Option<usize>,
    /// Observed neighborhoods in the tab-separated sample format, relative
    /// to the config file.
    #[serde(default)]
    pub sample_file: Option<PathBuf>,
    /// Candidate graphs; overrides the scenario's own.
    #[serde(default)]
    pub candidates: Option<Vec<Vec<[usize; 2]>>>,
    /// Put the true graph first among the candidates.
    #[serde(default)]
    pub include_true: bool,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Parses a config document. Diagnostics carry the line and field.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text).map_err(|CliError::Usage(m)| CliError::Usage(format!("{}: {m}", path.display())))
}

fn edge_graph(n: usize, edges: &[[usize; 2]]) -> crate::error::Result<ManipulationGraph> {
    ManipulationGraph::from_edges(n, edges.iter().map(|e| (e[0], e[1])))
}

/// Builds the scenario and, for inline scenarios with a cost spec, its cost
/// model.
pub fn build_scenario(spec: &ScenarioSpec) -> crate::error::Result<(Scenario, Option<CostModel>)> {
    let s = match spec {
        ScenarioSpec::Example1 { points } => gen_example1(*points)?,
        ScenarioSpec::Example2 { p } => gen_example2(*p)?,
        ScenarioSpec::Observation1 { d, target, positive_mass } => {
            let mut s = gen_observation1(*d)?;
            if target.is_some() || positive_mass.is_some() {
                s.distribution = observation1_realizable(*d, target.unwrap_or(0), positive_mass.unwrap_or(0.5))?;
            }
            s
        }
        ScenarioSpec::AppendixB { spec } => gen_appendix_b(*spec)?,
        ScenarioSpec::Random {
            points,
            edge_density,
            class_size,
            deterministic_labels,
            seed,
        } => gen_random(
            RandomParams {
                points: *points,
                edge_density: *edge_density,
                class_size: *class_size,
                deterministic_labels: *deterministic_labels,
            },
            *seed,
        )?,
        ScenarioSpec::GraphLearning { seed } => graph_learning_instance(*seed)?,
        ScenarioSpec::Inline(inline) => return build_inline(inline),
    };
    Ok((s, None))
}

fn build_inline(spec: &InlineScenario) -> crate::error::Result<(Scenario, Option<CostModel>)> {
    let domain = match (&spec.coords, spec.points) {
        (Some(c), None) => FiniteDomain::with_coords(c.clone())?,
        (None, Some(n)) => FiniteDomain::new(n),
        (Some(c), Some(n)) if c.len() == n => FiniteDomain::with_coords(c.clone())?,
        (Some(c), Some(n)) => {
            return Err(Error::DomainMismatch {
                expected: n,
                found: c.len(),
            })
        }
        (None, None) => return Err(Error::InvalidParameter("inline scenario needs `points` or `coords`".into())),
    };
    let n = domain.size();
    let (graph, cost) = match (&spec.edges, spec.cost) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidParameter("inline scenario takes `edges` or `cost`, not both".into()));
        }
        (None, Some(c)) => {
            let model = CostModel::from_coordinates(&domain, c.norm, c.gamma)?;
            (induce_graph(&domain, &model)?, Some(model))
        }
        (edges, None) => (edge_graph(n, edges.as_deref().unwrap_or(&[]))?, None),
    };
    let class = enumerate_class(&spec.class, &domain)?;
    let mut items = Vec::with_capacity(spec.distribution.len());
    for m in &spec.distribution {
        let y = match m.y {
            0 => false,
            1 => true,
            other => return Err(Error::InvalidDistribution(format!("label must be 0 or 1, got {other}"))),
        };
        items.push((m.x, y, m.w));
    }
    let distribution = LabeledDistribution::from_support(n, &items)?;
    let graph_class = match &spec.candidates {
        Some(c) => Some(GraphClass::new(c.iter().map(|e| edge_graph(n, e)).collect::<crate::error::Result<Vec<_>>>()?)?),
        None => None,
    };
    Ok((
        Scenario {
            domain,
            graph,
            alt_graph: None,
            class,
            distribution,
            graph_class,
            provenance: "inline".into(),
        },
        cost,
    ))
}

fn require_scenario(cfg: &ExperimentConfig) -> Result<(Scenario, Option<CostModel>), CliError> {
    let spec = cfg
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Usage("config has no [scenario] section".into()))?;
    Ok(build_scenario(spec)?)
}

/// Exact per-hypothesis evaluation.
pub fn cmd_eval(cfg: &ExperimentConfig) -> Result<ResultTable, CliError> {
    let (s, cost) = require_scenario(cfg)?;
    let mut t = ResultTable::new([
        "hypothesis",
        "labels",
        "binary",
        "strategic",
        "component",
        "incentive_compatible",
        "burden",
        "burden_unnormalized",
        "effective_binary",
    ]);
    let p = &s.distribution;
    for h in &s.class {
        let burden = social_burden(h, p, &s.graph, cost.as_ref())?;
        let eff = effective_hypothesis(h, &s.graph);
        t.push(vec![
            h.name().into(),
            h.bit_string().into(),
            expected_loss(LossKind::Binary, h, p)?.into(),
            expected_loss(LossKind::Strategic(&s.graph), h, p)?.into(),
            expected_loss(LossKind::Component(&s.graph), h, p)?.into(),
            is_incentive_compatible(h, &s.graph).into(),
            burden.conditional.value().into(),
            burden.unnormalized.value().into(),
            expected_loss(LossKind::Binary, &eff, p)?.into(),
        ])?;
    }
    Ok(t)
}

/// VC reports for the requested loss classes.
pub fn cmd_vc(cfg: &ExperimentConfig) -> Result<ResultTable, CliError> {
    let (s, _) = require_scenario(cfg)?;
    let section = cfg.vc.clone().unwrap_or(VcSection {
        losses: None,
        cap: None,
        ground_limit: None,
    });
    let targets = section
        .losses
        .unwrap_or_else(|| vec![VcTarget::Class, VcTarget::Binary, VcTarget::Strategic, VcTarget::Component]);
    let cap = section.cap.unwrap_or(DEFAULT_CAP);
    let limit = section.ground_limit.unwrap_or(DEFAULT_GROUND_LIMIT);
    let mut t = ResultTable::new(["loss", "ground_size", "sets", "dimension", "exact", "witness"]);
    for target in targets {
        let (name, ground, sets, report, witness): (&str, usize, usize, VcReport, String) = match target {
            VcTarget::Class => {
                let sys = hypothesis_system(&s.class);
                let r = vc_dimension_with_limit(&sys, cap, limit)?;
                let w = r.witness.iter().map(|&i| sys.ground()[i].to_string()).collect::<Vec<_>>().join(" ");
                ("class", sys.ground().len(), sys.len(), r, w)
            }
            VcTarget::Binary | VcTarget::Strategic | VcTarget::Component => {
                let kind = match target {
                    VcTarget::Binary => LossKind::Binary,
                    VcTarget::Strategic => LossKind::Strategic(&s.graph),
                    _ => LossKind::Component(&s.graph),
                };
                let sys = loss_class(&s.class, kind);
                let r = vc_dimension_with_limit(&sys, cap, limit)?;
                let w = r.witness.iter().map(|&i| sys.ground()[i].to_string()).collect::<Vec<_>>().join(" ");
                (kind.name(), sys.ground().len(), sys.len(), r, w)
            }
        };
        t.push(vec![
            name.into(),
            ground.into(),
            sets.into(),
            report.dimension.to_string().into(),
            report.is_exact().into(),
            witness.into(),
        ])?;
    }
    Ok(t)
}

/// Graph learning on the configured scenario.
pub fn cmd_graph_learn(cfg: &ExperimentConfig, base: &Path, trials: usize, ctx: RunContext) -> Result<ResultTable, CliError> {
    let (s, _) = require_scenario(cfg)?;
    let section = cfg.graph_learn.clone().unwrap_or_default();
    let n = s.domain.size();
    let mut candidates: Vec<ManipulationGraph> = match (&section.candidates, &s.graph_class) {
        (Some(c), _) => c.iter().map(|e| edge_graph(n, e)).collect::<crate::error::Result<_>>()?,
        (None, Some(g)) => g.members().to_vec(),
        (None, None) => {
            return Err(CliError::Usage(
                "graph-learn needs candidates: set [graph_learn].candidates or use a scenario that has them".into(),
            ))
        }
    };
    if section.include_true {
        candidates.insert(0, s.graph.clone());
    }
    let graphs = GraphClass::new(candidates)?;
    match &section.sample_file {
        Some(file) => {
            let path = base.join(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Usage(format!("cannot read sample {}: {e}", path.display())))?;
            let observed = GraphSample::parse_tsv(&text, n)?;
            if observed.is_empty() {
                return Err(Error::EmptySample.into());
            }
            let labeled = draw_sample(&s.distribution, observed.len(), ctx.seed);
            let mut t = ResultTable::new(GRAPH_LEARN_HEADER);
            t.push(graph_learn_row(&s, &graphs, &observed, &labeled, 0)?)?;
            Ok(t)
        }
        None => Ok(graph_learn(&s, &graphs, section.n.unwrap_or(1000), trials, ctx)?),
    }
}

fn resolve_workers(flag: Option<usize>, env: Option<String>, cfg: Option<usize>) -> Result<usize, CliError> {
    let w = match (flag, env) {
        (Some(w), _) => w,
        (None, Some(v)) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got '{v}'")))?,
        (None, None) => cfg.unwrap_or(1),
    };
    if w == 0 {
        return Err(CliError::Usage("worker count must be at least 1".into()));
    }
    Ok(w)
}

struct Outcome {
    table: ResultTable,
    out: Option<PathBuf>,
    failure: Option<String>,
}

fn execute(cli: Cli) -> Result<Outcome, CliError> {
    let (config_path, run) = match &cli.command {
        Command::Eval(a) | Command::Vc(a) | Command::GraphLearn(a) => (Some(a.config.clone()), &a.run),
        Command::Experiment(a) => (a.config.clone(), &a.run),
    };
    let cfg = match &config_path {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    let base = config_path
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let workers = resolve_workers(run.workers, std::env::var(WORKERS_ENV).ok(), cfg.workers)?;
    let ctx = RunContext {
        seed: run.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
        workers,
    };
    let out = run.out.clone().or_else(|| cfg.out.as_ref().map(|o| base.join(o)));
    if run.trials == Some(0) {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let (table, failure) = match &cli.command {
        Command::Eval(_) => (cmd_eval(&cfg)?, None),
        Command::Vc(_) => (cmd_vc(&cfg)?, None),
        Command::GraphLearn(_) => (cmd_graph_learn(&cfg, &base, run.trials.unwrap_or(1), ctx)?, None),
        Command::Experiment(a) => {
            let name: ExperimentName = a.name.parse()?;
            let mut params = cfg.experiment.clone().unwrap_or_default();
            if let Some(t) = run.trials {
                params.trials = Some(t);
            }
            if let Some(d) = &a.d {
                params.d = Some(d.clone());
            }
            let output = run_experiment(name, &params, ctx)?;
            let failure = failure_report(&output);
            (output.table, failure)
        }
    };
    Ok(Outcome { table, out, failure })
}

fn failure_report(output: &ExperimentOutput) -> Option<String> {
    if output.passed() {
        return None;
    }
    let mut report = String::new();
    for c in output.failures() {
        report.push_str(&format!("FAILED: {} ({})\n", c.name, c.detail));
        if !c.rows.is_empty() {
            report.push_str(&format!("  {}\n", output.table.header().join(",")));
            for &r in c.rows.iter().take(20) {
                let cells: Vec<String> = output.table.rows()[r].iter().map(Cell::to_string).collect();
                report.push_str(&format!("  {}\n", cells.join(",")));
            }
            if c.rows.len() > 20 {
                report.push_str(&format!("  ... {} more rows\n", c.rows.len() - 20));
            }
        }
    }
    Some(report)
}

/// Runs the CLI on `args`, writing the table to `--out` or `stdout` and
/// diagnostics to `stderr`. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(stdout, "{e}") } else { write!(stderr, "{e}") };
            return code;
        }
    };
    let outcome = match execute(cli) {
        Ok(o) => o,
        Err(CliError::Usage(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            return EXIT_USAGE;
        }
    };
    let csv = outcome.table.to_csv();
    match &outcome.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &csv) {
                let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                return EXIT_USAGE;
            }
        }
        None => {
            let _ = stdout.write_all(csv.as_bytes());
        }
    }
    match outcome.failure {
        Some(report) => {
            let _ = stderr.write_all(report.as_bytes());
            EXIT_ASSERTION
        }
        None => EXIT_OK,
    }
}
