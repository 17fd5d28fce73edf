//! The run-time loop: record a demonstration, seed the reward model from it,
//! then repeatedly plan, act, collect feedback, assign credit and update.
//!
//! Simulated and live sessions share every learning path. They differ only
//! in where time comes from (a fixed step duration versus the caller's wall
//! clock) and where feedback comes from (the oracle trainer versus
//! [`Session::ingest_feedback`]).
//!
//! Each recorded step is updated exactly once, when its credit window has
//! closed, i.e. when no later feedback can reach it. The label used is the
//! complete one, so replaying the history reproduces the learned weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureMap};
use crate::heatmap::HeatMap;
use crate::irl::{projection_irl, seed_tamer, DemoSource, Demonstration, IrlConfig};
use crate::mdp::{bfs_distance, Action, Cell, GridWorld, StateId};
use crate::planner::{q_value_iteration, RewardTable, UctConfig, UctPlanner};
use crate::reward::{event_credits, DelayModel, FeedbackEvent, Label, RewardModel, StepRecord};
use crate::trainer::{OracleTrainer, TrainerConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Live,
    #[default]
    Simulated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Demonstrating,
    Training,
    Finished,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Demonstrating => "demonstrating",
            Phase::Training => "training",
            Phase::Finished => "finished",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub mode: Mode,
    /// Seconds per simulated step, and the minimum step length when live.
    pub step_duration: f64,
    pub learning_rate: f64,
    pub delay: DelayModel,
    pub features: FeatureConfig,
    pub planner: UctConfig,
    pub irl: IrlConfig,
    /// Multiplier on the unit-norm IRL weights handed to the reward model.
    pub seed_scale: f64,
    /// Start training straight away with a zero model.
    pub skip_demo: bool,
    /// Simulated mode only.
    pub trainer: TrainerConfig,
    /// Stop once an episode is shortest-path long and drew no negative feedback.
    pub stop_when_optimal: bool,
    pub max_steps: usize,
    pub max_episodes: usize,
    /// Seeds the per-step planner seeds.
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            mode: Mode::Simulated,
            step_duration: 0.5,
            learning_rate: 0.2,
            delay: DelayModel::default(),
            features: FeatureConfig::default(),
            planner: UctConfig::default(),
            irl: IrlConfig::default(),
            seed_scale: 1.0,
            skip_demo: false,
            trainer: TrainerConfig::default(),
            stop_when_optimal: true,
            max_steps: 5000,
            max_episodes: 500,
            seed: 0,
        }
    }
}

impl SessionConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: SessionConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_duration > 0.0 && self.step_duration.is_finite()) {
            return Err(Error::Config(format!("step_duration {} must be positive", self.step_duration)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        if !self.seed_scale.is_finite() {
            return Err(Error::Config("seed_scale must be finite".into()));
        }
        if self.max_steps == 0 || self.max_episodes == 0 {
            return Err(Error::Config("max_steps and max_episodes must be at least 1".into()));
        }
        self.delay.validate()?;
        self.planner.validate()?;
        self.trainer.validate()
    }
}

/// Per-episode counts. Feedback is attributed to the episode of the step
/// it judged (simulated) or the episode running when it arrived (live).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub steps: usize,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrlSummary {
    pub iterations: usize,
    pub converged: bool,
    pub margin_history: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: StateId,
    pub action: Action,
    pub next_state: StateId,
    pub episode: usize,
    /// Number of steps taken so far in `episode`, including this one.
    pub episode_step: usize,
    pub reached_goal: bool,
    pub feedback: Option<FeedbackEvent>,
    /// Model updates applied during this step's credit pass.
    pub updates: usize,
    pub phase: Phase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DemoOutcome {
    /// The key ran into a wall; nothing was recorded.
    Blocked,
    Moved,
    /// The goal was reached and training has begun.
    Seeded,
}

/// Credits of one event after truncation at episode boundaries: only the
/// episode receiving the largest share keeps its credit (the earlier one on
/// a tie), since feedback about a respawned agent's last episode cannot be
/// about its new one and vice versa.
pub fn episode_credits(delay: &DelayModel, history: &[StepRecord], event: &FeedbackEvent) -> Vec<(usize, f64)> {
    let credits = event_credits(delay, history, event);
    let mut best: Option<(usize, f64)> = None;
    let mut i = 0;
    while i < credits.len() {
        let episode = history[credits[i].0].episode;
        let mut total = 0.0;
        while i < credits.len() && history[credits[i].0].episode == episode {
            total += credits[i].1;
            i += 1;
        }
        if best.is_none_or(|(_, t)| total > t) {
            best = Some((episode, total));
        }
    }
    match best {
        Some((episode, _)) => credits.into_iter().filter(|(k, _)| history[*k].episode == episode).collect(),
        None => credits,
    }
}

/// Label for `history[k]` from time-ordered `events`.
fn step_label(delay: &DelayModel, history: &[StepRecord], events: &[FeedbackEvent], k: usize) -> Label {
    let (d_min, d_max) = delay.support();
    let step = &history[k];
    let lo = events.partition_point(|e| e.received_at <= step.started_at + d_min);
    let hi = events.partition_point(|e| e.received_at < step.ended_at + d_max);
    let mut label = Label { value: 0.0, credit: 0.0 };
    for event in &events[lo..hi.max(lo)] {
        if let Some(&(_, c)) = episode_credits(delay, history, event).iter().find(|(i, _)| *i == k) {
            label.value += event.value * c;
            label.credit += c;
        }
    }
    label
}

/// Applies the once-per-step update schedule to a finished history.
pub fn replay_updates(
    model: &mut RewardModel,
    delay: &DelayModel,
    history: &[StepRecord],
    events: &[FeedbackEvent],
) -> Result<usize> {
    let mut n = 0;
    for k in 0..history.len() {
        let label = step_label(delay, history, events, k);
        if label.credit > 0.0 {
            model.update(&history[k].features, label.value)?;
            n += 1;
        }
    }
    Ok(n)
}

/// A pending event with the episode it counts towards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct Pending {
    event: FeedbackEvent,
    episode: usize,
}

#[derive(Clone, Debug)]
pub struct Session {
    grid: GridWorld,
    map: FeatureMap,
    config: SessionConfig,
    phase: Phase,
    clock: f64,
    episode: usize,
    episode_step: usize,
    total_steps: usize,
    current: StateId,
    model: RewardModel,
    initial_weights: Vec<f64>,
    planner: UctPlanner,
    plan_rng: ChaCha8Rng,
    trainer: Option<OracleTrainer>,
    history: Vec<StepRecord>,
    /// Live mode: the step in progress, not yet in `history`.
    open: Option<StepRecord>,
    pending: Vec<Pending>,
    events: Vec<FeedbackEvent>,
    /// Steps of `history` whose credit window has closed.
    closed: usize,
    demo: Vec<(StateId, Action)>,
    demo_state: StateId,
    irl: Option<IrlSummary>,
    /// `V(s)` as the agent has experienced it: the initial model's value
    /// table, overwritten at each planning state by the search's estimate.
    values: Vec<f64>,
    heatmaps: Vec<HeatMap>,
    episodes: Vec<EpisodeStats>,
    shortest: usize,
    converged: bool,
}

impl Session {
    pub fn new(grid: GridWorld, config: SessionConfig) -> Result<Self> {
        config.validate()?;
        let map = FeatureMap::new(&grid, config.features.clone())?;
        let model = RewardModel::zeros(map.dim(), config.learning_rate)?;
        let planner = UctPlanner::new(config.planner.clone())?;
        let trainer = match config.mode {
            Mode::Simulated => Some(OracleTrainer::new(&grid, config.trainer.clone())?),
            Mode::Live => None,
        };
        let shortest = bfs_distance(&grid, grid.start_state(), grid.goal_state())?
            .ok_or_else(|| Error::InvalidLayout("goal unreachable from start".into()))?;
        let start = grid.start_state();
        let mut session = Session {
            plan_rng: ChaCha8Rng::seed_from_u64(config.seed),
            initial_weights: model.weights().to_vec(),
            values: vec![0.0; grid.num_states()],
            grid,
            map,
            phase: Phase::Demonstrating,
            clock: 0.0,
            episode: 0,
            episode_step: 0,
            total_steps: 0,
            current: start,
            model,
            planner,
            trainer,
            history: Vec::new(),
            open: None,
            pending: Vec::new(),
            events: Vec::new(),
            closed: 0,
            demo: Vec::new(),
            demo_state: start,
            irl: None,
            heatmaps: Vec::new(),
            episodes: Vec::new(),
            shortest,
            converged: false,
            config,
        };
        if session.config.skip_demo {
            session.start_training()?;
        }
        Ok(session)
    }

    /// A session already seeded from `demo`.
    pub fn with_demonstration(grid: GridWorld, config: SessionConfig, demo: &Demonstration) -> Result<Self> {
        let mut session = Session::new(grid, SessionConfig { skip_demo: false, ..config })?;
        session.seed_from(demo)?;
        Ok(session)
    }

    pub fn grid(&self) -> &GridWorld {
        &self.grid
    }

    pub fn features(&self) -> &FeatureMap {
        &self.map
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn episode_step(&self) -> usize {
        self.episode_step
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    /// Where the agent is, or during the demonstration where the demonstrator is.
    pub fn current(&self) -> StateId {
        match self.phase {
            Phase::Demonstrating => self.demo_state,
            _ => self.current,
        }
    }

    pub fn model(&self) -> &RewardModel {
        &self.model
    }

    pub fn initial_weights(&self) -> &[f64] {
        &self.initial_weights
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.history
    }

    /// Feedback that has been credited or is being credited, in arrival order.
    pub fn events(&self) -> &[FeedbackEvent] {
        &self.events
    }

    pub fn demonstration(&self) -> &[(StateId, Action)] {
        &self.demo
    }

    pub fn irl(&self) -> Option<&IrlSummary> {
        self.irl.as_ref()
    }

    pub fn episodes(&self) -> &[EpisodeStats] {
        &self.episodes
    }

    pub fn heatmaps(&self) -> &[HeatMap] {
        &self.heatmaps
    }

    pub fn value_table(&self) -> &[f64] {
        &self.values
    }

    /// Whether the stopping rule fired.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Heat map of the experienced value table right now.
    pub fn heatmap(&self, tag: &str) -> Result<HeatMap> {
        HeatMap::from_values(&self.grid, &self.values, tag, self.total_steps, self.episode)
    }

    /// `max_a Q(s, a)` by value iteration on the current model.
    pub fn model_values(&self, gamma: f64) -> Result<Vec<f64>> {
        let rewards = RewardTable::from_model(&self.model, &self.map, &self.grid)?;
        let q = q_value_iteration(&rewards, &self.grid, gamma, 1e-9)?;
        Ok(self.grid.states().map(|s| q.value(s)).collect())
    }

    fn phase_error(&self, code: &'static str) -> Error {
        Error::Phase { code, message: format!("session is {}", self.phase.name()) }
    }

    /// Applies a demonstrator's key press. Keys into walls change nothing.
    pub fn record_demo_step(&mut self, action: Action) -> Result<DemoOutcome> {
        if self.phase != Phase::Demonstrating {
            return Err(self.phase_error("not_demonstrating"));
        }
        let next = self.grid.successor(self.demo_state, action);
        if next == self.demo_state {
            return Ok(DemoOutcome::Blocked);
        }
        self.demo.push((self.demo_state, action));
        self.demo_state = next;
        if !self.grid.is_goal(next) {
            return Ok(DemoOutcome::Moved);
        }
        let demo = Demonstration::new(self.demo.clone(), DemoSource::LiveKeyboard);
        self.seed_from(&demo)?;
        Ok(DemoOutcome::Seeded)
    }

    /// Abandons the demonstration and trains from a zero model.
    pub fn skip_demo(&mut self) -> Result<()> {
        if self.phase != Phase::Demonstrating {
            return Err(self.phase_error("not_demonstrating"));
        }
        self.demo.clear();
        self.start_training()
    }

    fn seed_from(&mut self, demo: &Demonstration) -> Result<()> {
        if self.phase != Phase::Demonstrating {
            return Err(self.phase_error("not_demonstrating"));
        }
        let result = projection_irl(demo, &self.grid, &self.map, &self.config.irl)?;
        self.model = seed_tamer(&result, &self.map, &self.grid, self.config.seed_scale, self.config.learning_rate)?;
        self.demo = demo.steps.clone();
        self.irl = Some(IrlSummary {
            iterations: result.iterations,
            converged: result.converged,
            margin_history: result.margin_history,
            weights: result.weights,
        });
        self.start_training()
    }

    fn start_training(&mut self) -> Result<()> {
        self.phase = Phase::Training;
        self.current = self.grid.start_state();
        self.initial_weights = self.model.weights().to_vec();
        self.values = self.model_values(self.config.planner.gamma)?;
        let snapshot = self.heatmap("first_visit_start")?;
        self.heatmaps.push(snapshot);
        Ok(())
    }

    /// Queues feedback stamped `received_at` for the next credit pass.
    pub fn ingest_feedback(&mut self, value: f64, received_at: f64) -> Result<FeedbackEvent> {
        if self.phase != Phase::Training {
            return Err(self.phase_error("not_training"));
        }
        if !value.is_finite() {
            return Err(Error::NonFinite("feedback value"));
        }
        if !(received_at >= 0.0 && received_at.is_finite()) {
            return Err(Error::NonFinite("feedback time"));
        }
        let event = FeedbackEvent { value, received_at };
        self.queue(event, self.episode);
        Ok(event)
    }

    fn queue(&mut self, event: FeedbackEvent, episode: usize) {
        let at = self.pending.partition_point(|p| p.event.received_at <= event.received_at);
        self.pending.insert(at, Pending { event, episode });
        let stats = self.episode_stats(episode);
        if event.value > 0.0 {
            stats.positive += 1;
        } else if event.value < 0.0 {
            stats.negative += 1;
        }
    }

    fn episode_stats(&mut self, episode: usize) -> &mut EpisodeStats {
        if self.episodes.len() <= episode {
            self.episodes.resize(episode + 1, EpisodeStats::default());
        }
        &mut self.episodes[episode]
    }

    /// Moves arrived feedback into the event log and updates every step whose
    /// credit window has closed by `now`.
    fn credit_pass(&mut self, now: f64) -> Result<usize> {
        let arrived = self.pending.partition_point(|p| p.event.received_at <= now);
        self.events.extend(self.pending.drain(..arrived).map(|p| p.event));

        let (_, d_max) = self.config.delay.support();
        let mut view: Option<Vec<StepRecord>> = None;
        let mut updates = 0;
        while self.closed < self.history.len() && self.history[self.closed].ended_at + d_max <= now {
            // an open live step can share credit; its end is at least `now`
            let steps = match &self.open {
                None => &self.history,
                Some(open) => view.get_or_insert_with(|| {
                    let mut v = self.history.clone();
                    v.push(StepRecord { ended_at: now, ..open.clone() });
                    v
                }),
            };
            let label = step_label(&self.config.delay, steps, &self.events, self.closed);
            if label.credit > 0.0 {
                self.model.update(&self.history[self.closed].features, label.value)?;
                updates += 1;
            }
            self.closed += 1;
        }
        Ok(updates)
    }

    /// Plans from the current state with a fresh tree and returns the step
    /// it commits to, starting at `started_at`.
    fn act(&mut self, started_at: f64, ended_at: f64) -> Result<StepRecord> {
        let s = self.current;
        let rewards = RewardTable::from_model(&self.model, &self.map, &self.grid)?;
        let seed = self.plan_rng.random();
        let result = self.planner.plan(&rewards, &self.grid, s, seed)?;
        if result.root_visits > 0 {
            self.values[s.index()] = (0..4)
                .filter(|&i| result.action_visits[i] > 0)
                .map(|i| result.action_values[i])
                .fold(f64::NEG_INFINITY, f64::max);
        }
        let a = result.action;
        let next = self.grid.successor(s, a);
        Ok(StepRecord {
            state: s,
            action: a,
            next_state: next,
            started_at,
            ended_at,
            episode: self.episode,
            features: self.map.phi_state_action(&self.grid, s, a),
        })
    }

    /// Moves the agent along `step` and handles episode ends and stopping.
    fn advance(&mut self, step: &StepRecord, feedback: Option<FeedbackEvent>, updates: usize) -> Result<StepOutcome> {
        self.total_steps += 1;
        self.episode_step += 1;
        self.episode_stats(step.episode).steps += 1;
        self.current = step.next_state;
        let x1y1 = Cell::new(0, 0);
        if self.grid.cell_of(step.next_state) == x1y1 && !self.heatmaps.iter().any(|h| h.tag == "first_visit_x1y1") {
            let snapshot = self.heatmap("first_visit_x1y1")?;
            self.heatmaps.push(snapshot);
        }
        let episode_step = self.episode_step;
        let reached_goal = self.grid.is_goal(step.next_state);
        if reached_goal {
            let stats = self.episodes[step.episode];
            if self.config.stop_when_optimal
                && self.config.mode == Mode::Simulated
                && stats.steps == self.shortest
                && stats.negative == 0
            {
                self.converged = true;
            }
            self.episode += 1;
            self.episode_step = 0;
            self.current = self.grid.start_state();
        }
        if self.converged || self.total_steps >= self.config.max_steps || self.episode >= self.config.max_episodes {
            self.finish()?;
        }
        Ok(StepOutcome {
            state: step.state,
            action: step.action,
            next_state: step.next_state,
            episode: step.episode,
            episode_step,
            reached_goal,
            feedback,
            updates,
            phase: self.phase,
        })
    }

    /// One simulated step: plan, act for `step_duration`, let the trainer
    /// judge, then credit whatever feedback has arrived.
    pub fn run_step(&mut self) -> Result<StepOutcome> {
        if self.phase != Phase::Training {
            return Err(self.phase_error("not_training"));
        }
        if self.config.mode != Mode::Simulated {
            return Err(Error::Phase { code: "wrong_mode", message: "live sessions step with run_step_at".into() });
        }
        let started = self.clock;
        let ended = started + self.config.step_duration;
        let step = self.act(started, ended)?;
        self.clock = ended;
        let feedback = match self.trainer.as_mut() {
            Some(trainer) => trainer.judge(step.state, step.action, ended),
            None => None,
        };
        if let Some(event) = feedback {
            self.queue(event, step.episode);
        }
        self.history.push(step.clone());
        let updates = self.credit_pass(self.clock)?;
        self.advance(&step, feedback, updates)
    }

    /// One live step at wall-clock time `now`: closes the step in progress,
    /// credits arrived feedback, then plans and commits to the next move.
    pub fn run_step_at(&mut self, now: f64) -> Result<StepOutcome> {
        if self.phase != Phase::Training {
            return Err(self.phase_error("not_training"));
        }
        if !(now >= self.clock && now.is_finite()) {
            return Err(Error::Phase { code: "clock_backwards", message: format!("{now} is before {}", self.clock) });
        }
        if let Some(open) = &self.open {
            if now - open.started_at < self.config.step_duration {
                return Err(Error::Phase {
                    code: "step_too_soon",
                    message: format!("steps last at least {} s", self.config.step_duration),
                });
            }
        }
        if let Some(mut open) = self.open.take() {
            open.ended_at = now;
            self.history.push(open);
        }
        self.clock = now;
        let updates = self.credit_pass(now)?;
        let step = self.act(now, now)?;
        self.open = Some(step.clone());
        self.advance(&step, None, updates)
    }

    /// Ends training: closes any open step and credits all outstanding feedback.
    pub fn finish(&mut self) -> Result<()> {
        if self.phase == Phase::Finished {
            return Ok(());
        }
        self.phase = Phase::Finished;
        if let Some(mut open) = self.open.take() {
            open.ended_at = open.started_at.max(self.clock) + self.config.step_duration;
            self.clock = open.ended_at;
            self.history.push(open);
        }
        let last = self.pending.last().map_or(self.clock, |p| p.event.received_at.max(self.clock));
        let (_, d_max) = self.config.delay.support();
        self.credit_pass(last + d_max)?;
        Ok(())
    }

    /// Feedback counts over the whole session.
    pub fn feedback_totals(&self) -> EpisodeStats {
        self.episodes.iter().fold(EpisodeStats::default(), |acc, e| EpisodeStats {
            steps: acc.steps + e.steps,
            positive: acc.positive + e.positive,
            negative: acc.negative + e.negative,
        })
    }

    pub fn transcript(&self) -> Result<Transcript> {
        let mut events = self.events.clone();
        events.extend(self.pending.iter().map(|p| p.event));
        Ok(Transcript {
            config: self.config.clone(),
            layout: self.grid.to_layout_string(),
            phase: self.phase,
            clock: self.clock,
            demonstration: self
                .demo
                .iter()
                .map(|&(s, a)| TranscriptDemoStep { state: self.grid.cell_of(s), action: a })
                .collect(),
            irl: self.irl.clone(),
            initial_weights: self.initial_weights.clone(),
            final_weights: self.model.weights().to_vec(),
            steps: self
                .history
                .iter()
                .map(|h| TranscriptStep {
                    state: h.state,
                    action: h.action,
                    next_state: h.next_state,
                    started_at: h.started_at,
                    ended_at: h.ended_at,
                    episode: h.episode,
                })
                .collect(),
            events,
            episodes: self.episodes.clone(),
            converged: self.converged,
            value_table: self.values.clone(),
            heatmaps: self.heatmaps.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptDemoStep {
    pub state: Cell,
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptStep {
    pub state: StateId,
    pub action: Action,
    pub next_state: StateId,
    pub started_at: f64,
    pub ended_at: f64,
    pub episode: usize,
}

/// Everything needed to audit or replay a session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub config: SessionConfig,
    pub layout: String,
    pub phase: Phase,
    pub clock: f64,
    pub demonstration: Vec<TranscriptDemoStep>,
    pub irl: Option<IrlSummary>,
    pub initial_weights: Vec<f64>,
    pub final_weights: Vec<f64>,
    pub steps: Vec<TranscriptStep>,
    /// Every feedback event, in arrival order.
    pub events: Vec<FeedbackEvent>,
    pub episodes: Vec<EpisodeStats>,
    pub converged: bool,
    pub value_table: Vec<f64>,
    pub heatmaps: Vec<HeatMap>,
}

impl Transcript {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn grid(&self) -> Result<GridWorld> {
        crate::mdp::parse_layout(&self.layout)
    }

    /// Recomputes the final weights from the initial ones, the steps and the
    /// feedback alone.
    pub fn replay_weights(&self) -> Result<Vec<f64>> {
        let grid = self.grid()?;
        let map = FeatureMap::new(&grid, self.config.features.clone())?;
        let history: Vec<StepRecord> = self
            .steps
            .iter()
            .map(|t| StepRecord {
                state: t.state,
                action: t.action,
                next_state: t.next_state,
                started_at: t.started_at,
                ended_at: t.ended_at,
                episode: t.episode,
                features: map.phi_state_action(&grid, t.state, t.action),
            })
            .collect();
        let mut model = RewardModel::from_weights(self.initial_weights.clone(), self.config.learning_rate)?;
        replay_updates(&mut model, &self.config.delay, &history, &self.events)?;
        Ok(model.weights().to_vec())
    }
}
