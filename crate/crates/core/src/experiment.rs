//! Batch sweeps over discount factors and seeding methods with a simulated
//! trainer, plus the summary statistics the comparison is read from.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::heatmap::HeatMap;
use crate::mdp::{parse_layout, GridWorld};
use crate::session::{Phase, Session, SessionConfig};
use crate::trainer::scripted_demo;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// IRL from a scripted demonstration, then TAMER.
    Seeded,
    /// TAMER from a zero model.
    TamerOnly,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Seeded => "seeded",
            Method::TamerOnly => "tamer_only",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub gammas: Vec<f64>,
    pub trials: usize,
    /// Trial `i` uses seed `seed_base + i` for both the trainer and the planner.
    pub seed_base: u64,
    /// Detour steps added to the scripted demonstration.
    pub demo_suboptimality: usize,
    /// Layout file; the canonical layout when absent.
    pub layout: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub export_heatmaps: bool,
    /// Everything else a session needs. `planner.gamma`, `skip_demo` and the
    /// seeds are overwritten per trial.
    pub session: SessionConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: vec![Method::Seeded, Method::TamerOnly],
            gammas: vec![0.0, 0.7, 0.9, 0.99],
            trials: 10,
            seed_base: 0,
            demo_suboptimality: 0,
            layout: None,
            output_dir: PathBuf::from("results"),
            export_heatmaps: true,
            session: SessionConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.methods.is_empty() || self.gammas.is_empty() {
            return Err(Error::Config("need at least one method and one gamma".into()));
        }
        if let Some(g) = self.gammas.iter().find(|g| !(0.0..1.0).contains(*g)) {
            return Err(Error::Config(format!("gamma {g} must lie in [0, 1)")));
        }
        self.session.validate()
    }

    pub fn grid(&self) -> Result<GridWorld> {
        match &self.layout {
            Some(path) => parse_layout(&fs::read_to_string(path)?),
            None => Ok(GridWorld::canonical()),
        }
    }

    /// The session configuration of one trial.
    pub fn trial_config(&self, method: Method, gamma: f64, trial: usize) -> SessionConfig {
        let seed = self.seed_base + trial as u64;
        let mut cfg = self.session.clone();
        cfg.planner.gamma = gamma;
        cfg.skip_demo = method == Method::TamerOnly;
        cfg.seed = seed;
        cfg.trainer.seed = seed;
        cfg
    }
}

/// One trial's outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: Method,
    pub gamma: f64,
    pub trial: usize,
    pub seed: u64,
    pub total_feedback: usize,
    pub positive: usize,
    pub negative: usize,
    /// `positive / total_feedback`, 0 when there was no feedback.
    pub positive_ratio: f64,
    pub total_steps: usize,
    pub episodes: usize,
    /// Episodes up to and including the first optimal one.
    pub episodes_to_optimal: Option<usize>,
    pub converged: bool,
    pub irl_iterations: Option<usize>,
    /// Semicolon-separated in CSV.
    #[serde(with = "semicolon_list")]
    pub steps_per_episode: Vec<usize>,
}

mod semicolon_list {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[usize], s: S) -> Result<S::Ok, S::Error> {
        let text: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        s.serialize_str(&text.join(";"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
        let text = String::deserialize(d)?;
        if text.is_empty() {
            return Ok(Vec::new());
        }
        text.split(';').map(|x| x.parse().map_err(serde::de::Error::custom)).collect()
    }
}

pub struct TrialRun {
    pub record: TrialRecord,
    pub heatmaps: Vec<HeatMap>,
}

pub fn run_trial(grid: &GridWorld, config: &ExperimentConfig, method: Method, gamma: f64, trial: usize) -> Result<TrialRun> {
    let cfg = config.trial_config(method, gamma, trial);
    let seed = cfg.seed;
    let mut session = match method {
        Method::Seeded => {
            let demo = scripted_demo(grid, config.demo_suboptimality)?;
            Session::with_demonstration(grid.clone(), cfg, &demo)?
        }
        Method::TamerOnly => Session::new(grid.clone(), cfg)?,
    };
    while session.phase() == Phase::Training {
        session.run_step()?;
    }
    let totals = session.feedback_totals();
    let episodes = session.episodes();
    let steps_per_episode: Vec<usize> = episodes.iter().map(|e| e.steps).filter(|&n| n > 0).collect();
    let converged = session.converged();
    let total_feedback = totals.positive + totals.negative;
    let record = TrialRecord {
        method,
        gamma,
        trial,
        seed,
        total_feedback,
        positive: totals.positive,
        negative: totals.negative,
        positive_ratio: if total_feedback == 0 { 0.0 } else { totals.positive as f64 / total_feedback as f64 },
        total_steps: totals.steps,
        episodes: steps_per_episode.len(),
        episodes_to_optimal: converged.then_some(steps_per_episode.len()),
        converged,
        irl_iterations: session.irl().map(|i| i.iterations),
        steps_per_episode,
    };
    let mut heatmaps = session.heatmaps().to_vec();
    heatmaps.push(session.heatmap("final")?);
    Ok(TrialRun { record, heatmaps })
}

/// Runs every trial of one (method, γ) cell. Trials run in parallel; the
/// result is in trial order regardless.
pub fn run_cell(grid: &GridWorld, config: &ExperimentConfig, method: Method, gamma: f64) -> Result<Vec<TrialRun>> {
    (0..config.trials).into_par_iter().map(|t| run_trial(grid, config, method, gamma, t)).collect()
}

/// Runs the whole sweep, writes its files and returns the records.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let grid = config.grid()?;
    let cells: Vec<(Method, f64)> =
        config.methods.iter().flat_map(|&m| config.gammas.iter().map(move |&g| (m, g))).collect();
    let runs: Vec<Vec<TrialRun>> = cells.par_iter().map(|&(m, g)| run_cell(&grid, config, m, g)).collect::<Result<_>>()?;

    let out = &config.output_dir;
    fs::create_dir_all(out)?;
    let records: Vec<TrialRecord> = runs.iter().flatten().map(|r| r.record.clone()).collect();
    write_trials(&out.join("trials.csv"), &records)?;
    Summary::from_records(&records)?.write(out)?;
    if config.export_heatmaps {
        let dir = out.join("heatmaps");
        fs::create_dir_all(&dir)?;
        for run in runs.iter().flatten() {
            let r = &run.record;
            for h in &run.heatmaps {
                h.save(&dir.join(format!("{}_g{}_t{}_{}.json", r.method.name(), r.gamma, r.trial, h.tag)))?;
            }
        }
    }
    fs::write(out.join("config.toml"), toml::to_string(config).map_err(|e| Error::Config(e.to_string()))?)?;
    Ok(records)
}

pub fn write_trials(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Mean, sample standard deviation and standard error. The latter two are
/// undefined for a single observation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub sd: Option<f64>,
    pub sem: Option<f64>,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Empty("sample"));
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Ok(Moments { n, mean, sd: None, sem: None });
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        Ok(Moments { n, mean, sd: Some(sd), sem: Some(sd / (n as f64).sqrt()) })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Welch's unequal-variance t-test of `a` against `b`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Config("a t-test needs at least two observations per group".into()));
    }
    let (ma, mb) = (Moments::of(a)?, Moments::of(b)?);
    let va = ma.sd.unwrap().powi(2) / a.len() as f64;
    let vb = mb.sd.unwrap().powi(2) / b.len() as f64;
    let diff = ma.mean - mb.mean;
    let se2 = va + vb;
    if se2 == 0.0 {
        // both samples constant
        let p = if diff == 0.0 { 1.0 } else { 0.0 };
        let t = if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY };
        return Ok(WelchTest { t, df: (a.len() + b.len() - 2) as f64, p });
    }
    let t = diff / se2.sqrt();
    let df = se2.powi(2) / (va.powi(2) / (a.len() - 1) as f64 + vb.powi(2) / (b.len() - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Config(e.to_string()))?;
    let p = 2.0 * dist.cdf(-t.abs());
    Ok(WelchTest { t, df, p })
}

pub const METRICS: [&str; 6] = ["total_feedback", "positive", "negative", "positive_ratio", "total_steps", "episodes"];

fn metric(r: &TrialRecord, name: &str) -> f64 {
    match name {
        "total_feedback" => r.total_feedback as f64,
        "positive" => r.positive as f64,
        "negative" => r.negative as f64,
        "positive_ratio" => r.positive_ratio,
        "total_steps" => r.total_steps as f64,
        "episodes" => r.episodes as f64,
        _ => unreachable!("unknown metric {name}"),
    }
}

/// Cell key with γ stored as its bit pattern so it orders and compares exactly.
type CellKey = (Method, u64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub gamma: f64,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub sd: Option<f64>,
    pub sem: Option<f64>,
    pub converged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub gamma: f64,
    pub metric: String,
    pub mean_seeded: f64,
    pub mean_tamer_only: f64,
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p: Option<f64>,
}

/// Mean steps per episode index across the trials of a cell, truncated to
/// the shortest trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub method: Method,
    pub gamma: f64,
    pub episode: usize,
    pub n: usize,
    pub mean_steps: f64,
    pub sem: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub comparisons: Vec<ComparisonRow>,
    pub episodes: Vec<EpisodeRow>,
}

impl Summary {
    pub fn from_records(records: &[TrialRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty("experiment records"));
        }
        let mut cells: BTreeMap<CellKey, Vec<&TrialRecord>> = BTreeMap::new();
        for r in records {
            cells.entry((r.method, r.gamma.to_bits())).or_default().push(r);
        }
        let mut cell_keys: Vec<&CellKey> = cells.keys().collect();
        cell_keys.sort_by(|a, b| (a.0, f64::from_bits(a.1)).partial_cmp(&(b.0, f64::from_bits(b.1))).unwrap());

        let mut rows = Vec::new();
        let mut episodes = Vec::new();
        for key in &cell_keys {
            let trials = &cells[key];
            let gamma = f64::from_bits(key.1);
            let converged = trials.iter().filter(|r| r.converged).count();
            for name in METRICS {
                let xs: Vec<f64> = trials.iter().map(|r| metric(r, name)).collect();
                let m = Moments::of(&xs)?;
                rows.push(SummaryRow {
                    method: key.0,
                    gamma,
                    metric: name.to_string(),
                    n: m.n,
                    mean: m.mean,
                    sd: m.sd,
                    sem: m.sem,
                    converged,
                });
            }
            let shortest = trials.iter().map(|r| r.steps_per_episode.len()).min().unwrap_or(0);
            for e in 0..shortest {
                let xs: Vec<f64> = trials.iter().map(|r| r.steps_per_episode[e] as f64).collect();
                let m = Moments::of(&xs)?;
                episodes.push(EpisodeRow { method: key.0, gamma, episode: e, n: m.n, mean_steps: m.mean, sem: m.sem });
            }
        }

        let mut comparisons = Vec::new();
        let mut gammas: Vec<f64> = records.iter().map(|r| r.gamma).collect();
        gammas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        gammas.dedup();
        for gamma in gammas {
            let (Some(seeded), Some(plain)) =
                (cells.get(&(Method::Seeded, gamma.to_bits())), cells.get(&(Method::TamerOnly, gamma.to_bits())))
            else {
                continue;
            };
            for name in METRICS {
                let a: Vec<f64> = seeded.iter().map(|r| metric(r, name)).collect();
                let b: Vec<f64> = plain.iter().map(|r| metric(r, name)).collect();
                let test = welch_t_test(&a, &b).ok();
                comparisons.push(ComparisonRow {
                    gamma,
                    metric: name.to_string(),
                    mean_seeded: Moments::of(&a)?.mean,
                    mean_tamer_only: Moments::of(&b)?.mean,
                    t: test.map(|t| t.t),
                    df: test.map(|t| t.df),
                    p: test.map(|t| t.p),
                });
            }
        }
        Ok(Summary { rows, comparisons, episodes })
    }

    pub fn mean(&self, method: Method, gamma: f64, metric: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.method == method && r.gamma == gamma && r.metric == metric).map(|r| r.mean)
    }

    pub fn comparison(&self, gamma: f64, metric: &str) -> Option<&ComparisonRow> {
        self.comparisons.iter().find(|c| c.gamma == gamma && c.metric == metric)
    }

    /// Whether the seeded arm's mean total steps falls as γ rises. A trend
    /// seen in human data, reported rather than enforced.
    pub fn seeded_steps_fall_with_gamma(&self) -> bool {
        let means: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == Method::Seeded && r.metric == "total_steps")
            .map(|r| r.mean)
            .collect();
        means.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_rows(&dir.join("summary.csv"), &self.rows)?;
        write_rows(&dir.join("comparisons.csv"), &self.comparisons)?;
        write_rows(&dir.join("episodes.csv"), &self.episodes)
    }

    /// Plain-text table of the headline comparison.
    pub fn render(&self) -> String {
        let mut out = String::from("gamma  metric           seeded      tamer_only  p\n");
        for c in &self.comparisons {
            let p = c.p.map_or("-".to_string(), |p| format!("{p:.3e}"));
            out.push_str(&format!(
                "{:<6} {:<16} {:<11.3} {:<11.3} {}\n",
                c.gamma, c.metric, c.mean_seeded, c.mean_tamer_only, p
            ));
        }
        out
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Recomputes the summary files of a finished run from its `trials.csv`.
pub fn summarize_dir(dir: &Path) -> Result<Summary> {
    let records = read_trials(&dir.join("trials.csv"))?;
    let summary = Summary::from_records(&records)?;
    summary.write(dir)?;
    Ok(summary)
}
