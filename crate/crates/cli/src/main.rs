//! `gridtop`: generate grids, simulate voltage samples, learn operational
//! forests and run seeded Monte-Carlo experiments.
//!
//! Exit codes: 0 success, 1 failed trials or checks, 2 bad usage or input.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;

use gridtop_core::harness::{
    align_samples, augment_with_extra_lines, generate_random_grid, load_fixture, parse_grid,
    random_spanning_forest, read_samples, run_experiment, serialize_grid, validate, write_samples,
    ExperimentPlan, GeneratorSpec, LoadedGrid,
};
use gridtop_core::learner::{reconstruct, Candidates, LearnerConfig, Variant};
use gridtop_core::moments::{
    analytic_moments, derive_seed, sample_injections, InjectionModel, ModelSpec, VoltageSamples,
};
use gridtop_core::powerflow::{distflow_solve, DistFlowOptions, LinearModel, LinearSweep};
use gridtop_core::ForestConfig;

#[derive(Parser)]
#[command(
    name = "gridtop",
    version,
    about = "Topology learning for radial distribution grids"
)]
struct Cli {
    /// Print results as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random grid with an operational forest.
    GenGrid(GenGridArgs),
    /// Draw injections and write the resulting voltage deviations as CSV.
    Simulate(SimulateArgs),
    /// Second moments of a sample file, or analytic ones for a grid and model.
    Moments(MomentsArgs),
    /// Reconstruct the operational forest from a sample file.
    Learn(LearnArgs),
    /// Run an experiment plan and write the error table.
    Experiment(ExperimentArgs),
    /// Check structural identities and model hypotheses on a grid.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct GridArgs {
    /// Grid file (JSON).
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    grid: Option<PathBuf>,
    /// Bundled fixture name.
    #[arg(long)]
    fixture: Option<String>,
}

impl GridArgs {
    fn load(&self) -> Result<LoadedGrid> {
        match (&self.grid, &self.fixture) {
            (Some(p), _) => parse_grid(p).with_context(|| format!("reading {}", p.display())),
            (None, Some(name)) => Ok(load_fixture(name)?),
            (None, None) => bail!("one of --grid or --fixture is required"),
        }
    }

    fn forest(&self) -> Result<(LoadedGrid, ForestConfig)> {
        let g = self.load()?;
        let f = g.require_forest()?.clone();
        Ok((g, f))
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Injection model (JSON); defaults to the built-in Gaussian model.
    #[arg(long)]
    model: Option<PathBuf>,
}

impl ModelArgs {
    fn build(&self, forest: &ForestConfig) -> Result<InjectionModel> {
        let spec: ModelSpec = match &self.model {
            Some(p) => serde_json::from_reader(BufReader::new(open(p)?))
                .with_context(|| format!("parsing model {}", p.display()))?,
            None => ModelSpec::default(),
        };
        Ok(spec.build(forest.grid(), Some(&forest.tree_labels()))?)
    }
}

#[derive(Args)]
struct GenGridArgs {
    #[arg(long, default_value_t = 13)]
    loads: usize,
    #[arg(long, default_value_t = 3)]
    substations: usize,
    #[arg(long, default_value_t = 3)]
    ties: usize,
    /// Open non-switchable lines to add.
    #[arg(long, default_value_t = 10)]
    extra: usize,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [0.01, 0.04])]
    r_range: Vec<f64>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [0.01, 0.04])]
    x_range: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    chain_bias: f64,
    /// Instead of generating, add `--extra` open lines to this grid.
    #[arg(long, value_name = "GRID")]
    augment: Option<PathBuf>,
    /// Replace the operational forest with a random spanning forest.
    #[arg(long, value_name = "SEED")]
    reforest: Option<u64>,
    #[arg(long, env = "GRIDTOP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    name: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Lc,
    Dc,
    Distflow,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Lc,
    Dc,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Lc => Variant::Lc,
            VariantArg::Dc => Variant::Dc,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CandidatesArg {
    Grid,
    AllPairs,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Number of samples.
    #[arg(short, long)]
    m: usize,
    #[arg(long, value_enum, default_value_t = EngineArg::Lc)]
    engine: EngineArg,
    #[arg(long, env = "GRIDTOP_SEED", default_value_t = 0)]
    seed: u64,
    /// Output CSV; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MomentsArgs {
    /// Sample CSV to average.
    #[arg(long, required_unless_present_any = ["grid", "fixture"])]
    samples: Option<PathBuf>,
    #[command(flatten)]
    grid: OptionalGridArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Linear model for analytic moments.
    #[arg(long, value_enum, default_value_t = VariantArg::Lc)]
    variant: VariantArg,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OptionalGridArgs {
    /// Grid file for analytic moments.
    #[arg(long, conflicts_with_all = ["fixture", "samples"])]
    grid: Option<PathBuf>,
    #[arg(long, conflicts_with = "samples")]
    fixture: Option<String>,
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    samples: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Lc)]
    variant: VariantArg,
    #[arg(long, value_enum, default_value_t = CandidatesArg::Grid)]
    candidates: CandidatesArg,
    /// Use the tolerance test `1 − |LHS/RHS| < τ`.
    #[arg(long)]
    literal_tolerance: bool,
    /// Write the decision trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    plan: PathBuf,
    /// Master seed when the plan has none.
    #[arg(long, env = "GRIDTOP_SEED")]
    seed: Option<u64>,
    /// Summary CSV; overrides the plan, stdout when neither is set.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Per-trial CSV.
    #[arg(long)]
    verbose: Option<PathBuf>,
    /// Companion gnuplot script (needs a CSV path).
    #[arg(long)]
    gnuplot: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    model: ModelArgs,
}

fn open(p: &Path) -> Result<File> {
    File::open(p).with_context(|| format!("opening {}", p.display()))
}

fn create(p: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(p).with_context(|| format!("creating {}", p.display()))?,
    ))
}

fn output(p: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match p {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

/// What a command reports besides errors.
enum Status {
    Ok,
    Failed,
}

fn gen_grid(args: &GenGridArgs, json: bool) -> Result<Status> {
    let (name, grid, forest) = match &args.augment {
        Some(path) => {
            let g = parse_grid(path)?;
            let f = augment_with_extra_lines(g.require_forest()?, args.extra, args.seed)?;
            (args.name.clone().unwrap_or(g.name), f.grid_arc().clone(), f)
        }
        None => {
            let spec = GeneratorSpec {
                loads: args.loads,
                substations: args.substations,
                tie_switches: args.ties,
                extra_lines: args.extra,
                r_range: (args.r_range[0], args.r_range[1]),
                x_range: (args.x_range[0], args.x_range[1]),
                chain_bias: args.chain_bias,
            };
            let (g, f) = generate_random_grid(&spec, args.seed)?;
            let name = args
                .name
                .clone()
                .unwrap_or_else(|| format!("bus_{}_{}", args.loads, args.substations));
            (name, g, f)
        }
    };
    let forest = match args.reforest {
        Some(seed) => random_spanning_forest(&grid, seed)?,
        None => forest,
    };
    let text = serialize_grid(&name, &grid, Some(&forest));
    match &args.output {
        Some(p) => {
            std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
            if json {
                print_json(
                    &serde_json::json!({"output": p, "loads": grid.load_count(), "lines": grid.lines().len()}),
                )?;
            }
        }
        None => print!("{text}"),
    }
    Ok(Status::Ok)
}

fn simulate(args: &SimulateArgs, json: bool) -> Result<Status> {
    let (_, forest) = args.grid.forest()?;
    let model = args.model.build(&forest)?;
    let draws = sample_injections(&model, args.m, derive_seed(args.seed, &[]))?;
    let mut samples = VoltageSamples::new(forest.grid().loads().to_vec());
    let sweep = match args.engine {
        EngineArg::Lc => Some(LinearSweep::new(&forest, LinearModel::Lc)),
        EngineArg::Dc => Some(LinearSweep::new(&forest, LinearModel::DcResistive)),
        EngineArg::Distflow => None,
    };
    for inj in &draws {
        let eps = match &sweep {
            Some(s) => s.solve(inj).eps,
            None => {
                distflow_solve(&forest, inj, DistFlowOptions::default())?
                    .state
                    .eps
            }
        };
        samples.push_row(&eps)?;
    }
    write_samples(&samples, output(args.output.as_deref())?)?;
    if json && args.output.is_some() {
        print_json(&serde_json::json!({"samples": samples.len(), "nodes": samples.nodes().len()}))?;
    }
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct MomentsOut {
    nodes: Vec<u32>,
    /// `null` for analytic moments.
    samples: Option<usize>,
    sigma_eps: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_theta: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_theta_eps: Option<Vec<Vec<f64>>>,
}

fn to_rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows())
        .map(|i| x.row(i).iter().copied().collect())
        .collect()
}

fn moments(args: &MomentsArgs) -> Result<Status> {
    let out = match &args.samples {
        Some(p) => {
            let s = read_samples(BufReader::new(open(p)?))?;
            let set = s.second_moments()?;
            MomentsOut {
                nodes: s.nodes().iter().map(|n| n.0).collect(),
                samples: Some(s.len()),
                sigma_eps: to_rows(&set.sigma_eps),
                sigma_theta: None,
                sigma_theta_eps: None,
            }
        }
        None => {
            let ga = GridArgs {
                grid: args.grid.grid.clone(),
                fixture: args.grid.fixture.clone(),
            };
            let (_, forest) = ga.forest()?;
            let model = args.model.build(&forest)?;
            let kind = match args.variant {
                VariantArg::Lc => LinearModel::Lc,
                VariantArg::Dc => LinearModel::DcResistive,
            };
            let set = analytic_moments(&forest, &model, kind)?;
            MomentsOut {
                nodes: forest.grid().loads().iter().map(|n| n.0).collect(),
                samples: None,
                sigma_eps: to_rows(&set.sigma_eps),
                sigma_theta: set.sigma_theta.as_ref().map(to_rows),
                sigma_theta_eps: set.sigma_theta_eps.as_ref().map(to_rows),
            }
        }
    };
    let mut w = output(args.output.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &out)?;
    writeln!(w)?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct LearnOut {
    edges: Vec<(u32, u32)>,
    unattached: Vec<u32>,
    relative_error: Option<f64>,
    samples: usize,
    tau: f64,
}

fn learn(args: &LearnArgs, json: bool) -> Result<Status> {
    let loaded = args.grid.load()?;
    let grid = loaded.grid.clone();
    let raw = read_samples(BufReader::new(open(&args.samples)?))
        .with_context(|| format!("reading {}", args.samples.display()))?;
    let samples = align_samples(&raw, &grid)?;
    // The model's correlation groups follow the declared forest when there is one.
    let model = match &loaded.forest {
        Some(f) => args.model.build(f)?,
        None => {
            let spec: ModelSpec = match &args.model.model {
                Some(p) => serde_json::from_reader(BufReader::new(open(p)?))?,
                None => ModelSpec::default(),
            };
            spec.build(&grid, None)?
        }
    };
    let config = LearnerConfig {
        tau: args.tau,
        variant: args.variant.into(),
        candidates: match args.candidates {
            CandidatesArg::Grid => Candidates::Grid,
            CandidatesArg::AllPairs => Candidates::AllPairs,
        },
        literal_tolerance: args.literal_tolerance,
    };
    let result = reconstruct(&samples, &model, &grid, &config)?;
    if let Some(p) = &args.trace {
        result.write_trace_csv(create(p)?)?;
    }
    let out = LearnOut {
        edges: result
            .learned_edges
            .iter()
            .map(|e| {
                let l = grid.line(*e).expect("learned edges are grid lines");
                (l.from.0, l.to.0)
            })
            .collect(),
        unattached: result.unattached.iter().map(|n| n.0).collect(),
        relative_error: loaded.forest.as_ref().map(|f| result.relative_error(f)),
        samples: samples.len(),
        tau: args.tau,
    };
    if json {
        print_json(&out)?;
    } else {
        let mut w = io::stdout().lock();
        writeln!(
            w,
            "learned {} edges from {} samples (tau = {})",
            out.edges.len(),
            out.samples,
            out.tau
        )?;
        for (a, b) in &out.edges {
            writeln!(w, "{a} {b}")?;
        }
        if !out.unattached.is_empty() {
            writeln!(w, "unattached: {:?}", out.unattached)?;
        }
        if let Some(e) = out.relative_error {
            writeln!(w, "relative error: {e}")?;
        }
    }
    Ok(Status::Ok)
}

fn experiment(args: &ExperimentArgs, json: bool) -> Result<Status> {
    let mut plan = ExperimentPlan::load(&args.plan)?;
    if plan.seed.is_none() {
        plan.seed = args.seed;
    }
    let csv_path = args.csv.clone().or_else(|| plan.output.csv.clone());
    let verbose = args.verbose.clone().or_else(|| plan.output.verbose.clone());
    let gnuplot = args.gnuplot.clone().or_else(|| plan.output.gnuplot.clone());
    if gnuplot.is_some() && csv_path.is_none() {
        bail!("--gnuplot needs a CSV path to plot");
    }
    let report = run_experiment(&plan)?;
    report.write_csv(output(csv_path.as_deref())?)?;
    if let Some(p) = &verbose {
        report.write_verbose_csv(create(p)?)?;
    }
    if let (Some(script), Some(csv)) = (&gnuplot, &csv_path) {
        std::fs::write(script, report.gnuplot_script(csv))?;
    }
    let failures = report.failures();
    if json && csv_path.is_some() {
        print_json(&serde_json::json!({"rows": report.rows.len(), "failed_trials": failures}))?;
    }
    for r in report
        .records
        .iter()
        .filter_map(|r| r.outcome.as_ref().err().map(|e| (r, e)))
    {
        eprintln!(
            "trial {} (m = {}, tau = {}) failed: {}",
            r.0.trial, r.0.m, r.0.tau, r.1
        );
    }
    Ok(if failures == 0 {
        Status::Ok
    } else {
        Status::Failed
    })
}

fn validate_cmd(args: &ValidateArgs, json: bool) -> Result<Status> {
    let (loaded, forest) = args.grid.forest()?;
    let model = args.model.build(&forest)?;
    let report = validate(&forest, Some(&model))?;
    if json {
        #[derive(Serialize)]
        struct Out<'a> {
            passed: bool,
            #[serde(flatten)]
            report: &'a gridtop_core::harness::ValidationReport,
        }
        print_json(&Out {
            passed: report.passed(),
            report: &report,
        })?;
    } else {
        println!(
            "grid {}: {} loads, {} lines",
            loaded.name,
            forest.grid().load_count(),
            forest.grid().lines().len()
        );
        for c in &report.checks {
            println!(
                "[{}] {}: {}",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        for w in &report.warnings {
            println!("warning: {w}");
        }
    }
    Ok(if report.passed() {
        Status::Ok
    } else {
        Status::Failed
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenGrid(a) => gen_grid(a, cli.json),
        Command::Simulate(a) => simulate(a, cli.json),
        Command::Moments(a) => moments(a),
        Command::Learn(a) => learn(a, cli.json),
        Command::Experiment(a) => experiment(a, cli.json),
        Command::Validate(a) => validate_cmd(a, cli.json),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(1),
        Err(e) => {
            if cli.json {
                println!("{}", serde_json::json!({"error": format!("{e:#}")}));
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(2)
        }
    }
}
