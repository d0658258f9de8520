use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::fixtures::load_fixture;
use super::generate::{generate_random_grid, random_spanning_forest, GeneratorSpec};
use super::gridfile::parse_grid;
use crate::error::{Error, Result};
use crate::grid_model::{EdgeId, ForestConfig};
use crate::learner::{
    reconstruct_from, Candidates, LearnerConfig, ModelMoments, SampleMoments, Variant,
};
use crate::moments::{
    derive_seed, GaussianSampler, InjectionModel, InjectionSampler, ModelSpec, VoltageSamples,
};
use crate::powerflow::{
    distflow_solve, DistFlowOptions, InjectionVector, LinearModel, LinearSweep,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSource {
    /// A bundled fixture by name.
    Fixture(String),
    /// A grid file, relative to the plan's directory.
    File(PathBuf),
    Generate {
        spec: GeneratorSpec,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ForestSelection {
    /// The forest the grid source declares.
    #[default]
    Declared,
    Closed(Vec<EdgeId>),
    Random {
        seed: u64,
    },
}

/// Number of samples per trial; `"inf"` feeds analytic moments instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleCount {
    Finite(usize),
    Infinite,
}

impl fmt::Display for SampleCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleCount::Finite(m) => write!(f, "{m}"),
            SampleCount::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for SampleCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SampleCount::Finite(m) => s.serialize_u64(*m as u64),
            SampleCount::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for SampleCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(usize),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(m) => Ok(SampleCount::Finite(m)),
            Raw::S(s) if s == "inf" => Ok(SampleCount::Infinite),
            Raw::S(s) => Err(serde::de::Error::custom(format!(
                "expected a sample count or \"inf\", got \"{s}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Lc,
    Dc,
    Distflow,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    /// Per-trial rows.
    pub verbose: Option<PathBuf>,
    pub gnuplot: Option<PathBuf>,
}

fn default_samples() -> Vec<SampleCount> {
    [200, 800, 3200, 12800]
        .into_iter()
        .map(SampleCount::Finite)
        .collect()
}

fn default_tau() -> Vec<f64> {
    vec![0.4, 0.2, 0.1, 0.05, 0.01]
}

fn default_trials() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub grid: GridSource,
    #[serde(default)]
    pub forest: ForestSelection,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default = "default_samples")]
    pub samples: Vec<SampleCount>,
    #[serde(default = "default_tau")]
    pub tau: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Master seed; the CLI falls back to `GRIDTOP_SEED`, then 0.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub candidates: Candidates,
    #[serde(default)]
    pub literal_tolerance: bool,
    /// Fill the `seconds` column. Off by default so output is reproducible.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentPlan {
    pub fn new(grid: GridSource) -> Self {
        ExperimentPlan {
            grid,
            forest: ForestSelection::default(),
            model: ModelSpec::default(),
            samples: default_samples(),
            tau: default_tau(),
            trials: default_trials(),
            seed: None,
            engine: Engine::default(),
            variant: Variant::default(),
            candidates: Candidates::default(),
            literal_tolerance: false,
            timing: false,
            output: OutputSpec::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    /// Read a plan; relative file paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut plan = Self::from_json(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let GridSource::File(p) = &mut plan.grid {
            rebase(p);
        }
        for p in [
            &mut plan.output.csv,
            &mut plan.output.verbose,
            &mut plan.output.gnuplot,
        ]
        .into_iter()
        .flatten()
        {
            rebase(p);
        }
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Validation("trials must be at least 1".into()));
        }
        if self.samples.is_empty() || self.samples.contains(&SampleCount::Finite(0)) {
            return Err(Error::Validation(
                "samples must be a non-empty list of counts ≥ 1".into(),
            ));
        }
        if self.tau.is_empty() {
            return Err(Error::Validation("tau list is empty".into()));
        }
        for &tau in &self.tau {
            LearnerConfig::with_tau(tau).validate()?;
        }
        Ok(())
    }

    fn learner(&self, tau: f64) -> LearnerConfig {
        LearnerConfig {
            tau,
            variant: self.variant,
            candidates: self.candidates,
            literal_tolerance: self.literal_tolerance,
        }
    }
}

/// Grid name and operational forest a plan selects.
pub fn resolve_forest(plan: &ExperimentPlan) -> Result<(String, ForestConfig)> {
    let (name, grid, declared) = match &plan.grid {
        GridSource::Fixture(name) => {
            let g = load_fixture(name)?;
            (g.name, g.grid, g.forest)
        }
        GridSource::File(path) => {
            let g = parse_grid(path)?;
            (g.name, g.grid, g.forest)
        }
        GridSource::Generate { spec, seed } => {
            let (g, f) = generate_random_grid(spec, *seed)?;
            (
                format!("random_{}_{}_s{seed}", spec.loads, spec.substations),
                g,
                Some(f),
            )
        }
    };
    let forest = match &plan.forest {
        ForestSelection::Declared => declared.ok_or_else(|| {
            Error::Validation(format!("grid '{name}' declares no operational forest"))
        })?,
        ForestSelection::Closed(edges) => {
            ForestConfig::new(Arc::clone(&grid), edges.iter().copied())?
        }
        ForestSelection::Random { seed } => random_spanning_forest(&grid, *seed)?,
    };
    Ok((name, forest))
}

/// One (m, τ) grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub m: SampleCount,
    pub tau: f64,
    /// Trials that completed.
    pub trials: usize,
    pub mean_error: Option<f64>,
    /// Sample standard deviation of the per-trial error.
    pub std_error: Option<f64>,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub m: SampleCount,
    pub tau: f64,
    pub trial: usize,
    pub outcome: std::result::Result<TrialOutcome, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub error: f64,
    pub learned: usize,
    pub unattached: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub grid: String,
    pub variant: Variant,
    pub timing: bool,
    pub rows: Vec<SummaryRow>,
    pub records: Vec<TrialRecord>,
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Lc => "lc",
        Variant::Dc => "dc",
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "grid",
            "variant",
            "m",
            "tau",
            "trials",
            "mean_error",
            "std_error",
            "seconds",
        ])?;
        for r in &self.rows {
            w.write_record([
                self.grid.clone(),
                variant_name(self.variant).into(),
                r.m.to_string(),
                r.tau.to_string(),
                r.trials.to_string(),
                opt(r.mean_error),
                opt(r.std_error),
                if self.timing {
                    opt(r.seconds)
                } else {
                    String::new()
                },
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_verbose_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "grid",
            "variant",
            "m",
            "tau",
            "trial",
            "error",
            "learned",
            "unattached",
            "seconds",
            "failure",
        ])?;
        for r in &self.records {
            let (error, learned, unattached, secs, failure) = match &r.outcome {
                Ok(o) => (
                    o.error.to_string(),
                    o.learned.to_string(),
                    o.unattached.to_string(),
                    if self.timing {
                        o.seconds.to_string()
                    } else {
                        String::new()
                    },
                    String::new(),
                ),
                Err(e) => (
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.clone(),
                ),
            };
            w.write_record([
                self.grid.clone(),
                variant_name(self.variant).into(),
                r.m.to_string(),
                r.tau.to_string(),
                r.trial.to_string(),
                error,
                learned,
                unattached,
                secs,
                failure,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Script plotting mean error against m, one curve per τ, from `csv_path`.
    pub fn gnuplot_script(&self, csv_path: &Path) -> String {
        let mut taus: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !taus.contains(&r.tau) {
                taus.push(r.tau);
            }
        }
        let file = csv_path.display().to_string().replace('\'', "''");
        let curves: Vec<String> = taus
            .iter()
            .map(|t| {
                format!("'{file}' using (strcol(4) eq '{t}' && strcol(3) ne 'inf' ? $3 : NaN):6 with linespoints title 'tau = {t}'")
            })
            .collect();
        format!(
            "set datafile separator ','\nset key autotitle columnhead\nset logscale x\nset xlabel 'samples m'\n\
             set ylabel 'mean relative error'\nset title '{}'\nplot {}\n",
            self.grid,
            curves.join(", \\\n     ")
        )
    }
}

/// Everything a trial needs, shared read-only across threads.
struct Setup {
    forest: ForestConfig,
    model: InjectionModel,
    sampler: GaussianSampler,
    sweep: Option<LinearSweep>,
    engine: Engine,
}

impl Setup {
    fn samples(&self, m: usize, seed: u64) -> Result<VoltageSamples> {
        let grid = self.forest.grid();
        let n = grid.load_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = VoltageSamples::new(grid.loads().to_vec());
        let mut inj = InjectionVector::zeros(n);
        let mut eps = vec![0.0; n];
        for _ in 0..m {
            self.sampler.sample_into(&mut rng, &mut inj.p, &mut inj.q);
            match &self.sweep {
                Some(sweep) => sweep.solve_into(&inj.p, &inj.q, &mut eps, None),
                None => {
                    debug_assert_eq!(self.engine, Engine::Distflow);
                    eps = distflow_solve(&self.forest, &inj, DistFlowOptions::default())?
                        .state
                        .eps;
                }
            }
            out.push_row(&eps)?;
        }
        Ok(out)
    }
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(std))
}

/// Run every (m, trial) pair, learning once per τ on shared samples.
///
/// Trial `t` at the `i`-th sample count draws from seed
/// `derive_seed(master, [i, t])`, so results do not depend on scheduling.
/// Failed trials are recorded and left out of the averages.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let master = plan.seed.unwrap_or(0);
    let (name, forest) = resolve_forest(plan)?;
    let model = plan
        .model
        .build(forest.grid(), Some(&forest.tree_labels()))?;
    let sweep = match plan.engine {
        Engine::Lc => Some(LinearSweep::new(&forest, LinearModel::Lc)),
        Engine::Dc => Some(LinearSweep::new(&forest, LinearModel::DcResistive)),
        Engine::Distflow => None,
    };
    let setup = Setup {
        sampler: GaussianSampler::new(&model),
        forest,
        model,
        sweep,
        engine: plan.engine,
    };

    let jobs: Vec<(usize, usize)> = plan
        .samples
        .iter()
        .enumerate()
        .flat_map(|(i, m)| {
            let trials = if *m == SampleCount::Infinite {
                1
            } else {
                plan.trials
            };
            (0..trials).map(move |t| (i, t))
        })
        .collect();
    let outcomes: Vec<Vec<std::result::Result<TrialOutcome, String>>> = jobs
        .par_iter()
        .map(|&(i, t)| {
            let start = Instant::now();
            let source: std::result::Result<Box<dyn crate::learner::DeviationMoments>, Error> =
                match plan.samples[i] {
                    SampleCount::Infinite => {
                        let kind = match plan.variant {
                            Variant::Lc => LinearModel::Lc,
                            Variant::Dc => LinearModel::DcResistive,
                        };
                        ModelMoments::new(&setup.forest, &setup.model, kind)
                            .map(|m| Box::new(m) as Box<_>)
                    }
                    SampleCount::Finite(m) => setup
                        .samples(m, derive_seed(master, &[i as u64, t as u64]))
                        .and_then(|s| SampleMoments::new(&s, setup.forest.grid()))
                        .map(|m| Box::new(m) as Box<_>),
                };
            let prep = start.elapsed().as_secs_f64();
            plan.tau
                .iter()
                .map(|&tau| {
                    let source = source.as_ref().map_err(|e| e.to_string())?;
                    let t0 = Instant::now();
                    let r = reconstruct_from(
                        source.as_ref(),
                        &setup.model,
                        setup.forest.grid(),
                        &plan.learner(tau),
                    )
                    .map_err(|e| e.to_string())?;
                    Ok(TrialOutcome {
                        error: r.relative_error(&setup.forest),
                        learned: r.learned_edges.len(),
                        unattached: r.unattached.len(),
                        seconds: prep + t0.elapsed().as_secs_f64(),
                    })
                })
                .collect()
        })
        .collect();

    let mut records = Vec::new();
    let mut rows = Vec::new();
    for (i, &m) in plan.samples.iter().enumerate() {
        for (k, &tau) in plan.tau.iter().enumerate() {
            let mut errors = Vec::new();
            let mut seconds = 0.0;
            for (&(ji, t), out) in jobs.iter().zip(&outcomes) {
                if ji != i {
                    continue;
                }
                let outcome = out[k].clone();
                if let Ok(o) = &outcome {
                    errors.push(o.error);
                    seconds += o.seconds;
                }
                records.push(TrialRecord {
                    m,
                    tau,
                    trial: t,
                    outcome,
                });
            }
            let (mean_error, std_error) = mean_std(&errors);
            rows.push(SummaryRow {
                m,
                tau,
                trials: errors.len(),
                mean_error,
                std_error,
                seconds: Some(seconds),
            });
        }
    }
    Ok(ExperimentReport {
        grid: name,
        variant: plan.variant,
        timing: plan.timing,
        rows,
        records,
    })
}
