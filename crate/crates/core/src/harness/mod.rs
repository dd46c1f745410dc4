//! Learning-curve experiments: every agent kind is driven through the same
//! tutor protocol (one attempt per step, then a bottom-out hint if the
//! attempt was wrong or the agent asked for help).

mod emit;
mod metrics;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentConfig, Decision, SkillExport};
use crate::baselines::{ResponderKind, StateActionResponder};
use crate::error::{Error, Result};
use crate::model::{InterfaceState, Sai, TrainingSignal};
use crate::tutor::{Domain, ProblemSpec, TutorSession};

pub use emit::{curve_csv, parse_curve_csv, svg_plot, transcript_csv, Series, TRANSCRIPT_HEADER};
pub use metrics::{curve_from_runs, mastery_intercept, smooth_curve, CurvePoint, SmoothingSpec};

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "DIPL_WORKERS";

/// Smoothed error below which a curve counts as mastered.
pub const MASTERY_THRESHOLD: f64 = 0.1;

pub const ERROR_FORMULA: &str =
    "per agent and problem: (incorrect first attempts + hint requests) / steps; per problem: mean over agents still running";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    #[serde(rename = "dipl")]
    Dipl,
    #[serde(rename = "single-lhs")]
    SingleLhs,
    #[serde(rename = "dt-single")]
    DtSingle,
    #[serde(rename = "dt-double")]
    DtDouble,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [AgentKind::Dipl, AgentKind::SingleLhs, AgentKind::DtSingle, AgentKind::DtDouble];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Dipl => "dipl",
            AgentKind::SingleLhs => "single-lhs",
            AgentKind::DtSingle => "dt-single",
            AgentKind::DtDouble => "dt-double",
        }
    }

    /// Only the full agent is given foci of attention and skill labels.
    pub fn receives_annotations(self) -> bool {
        self == AgentKind::Dipl
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<AgentKind> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown agent kind {s:?}")))
    }
}

/// The protocol-facing side of an agent.
pub trait Learner: Send {
    /// `None` requests a hint.
    fn act(&mut self, state: &InterfaceState) -> Option<Sai>;
    fn train(&mut self, signal: &TrainingSignal) -> Result<()>;
    fn end_problem(&mut self) {}
    fn export_skills(&self) -> Option<Vec<SkillExport>> {
        None
    }
}

impl Learner for Agent {
    fn act(&mut self, state: &InterfaceState) -> Option<Sai> {
        match Agent::act(self, state) {
            Decision::Attempt(app) => Some(app.sai),
            Decision::HintRequest => None,
        }
    }

    fn train(&mut self, signal: &TrainingSignal) -> Result<()> {
        Agent::train(self, signal)
    }

    fn export_skills(&self) -> Option<Vec<SkillExport>> {
        Some(Agent::export_skills(self))
    }
}

impl Learner for StateActionResponder {
    fn act(&mut self, state: &InterfaceState) -> Option<Sai> {
        Some(StateActionResponder::act(self, state))
    }

    fn train(&mut self, signal: &TrainingSignal) -> Result<()> {
        StateActionResponder::train(self, signal);
        Ok(())
    }

    fn end_problem(&mut self) {
        self.refit();
    }
}

/// Builds a fresh learner. `config` overrides the agent configuration for
/// the two skill-based kinds.
pub fn make_learner(kind: AgentKind, domain: Domain, config: Option<&AgentConfig>) -> Result<Box<dyn Learner>> {
    Ok(match kind {
        AgentKind::Dipl => Box::new(Agent::new(config.cloned().unwrap_or_default())?),
        AgentKind::SingleLhs => Box::new(Agent::new(config.cloned().unwrap_or_else(AgentConfig::single_lhs))?),
        AgentKind::DtSingle => Box::new(StateActionResponder::new(ResponderKind::SingleTree, domain)),
        AgentKind::DtDouble => Box::new(StateActionResponder::new(ResponderKind::DoubleTree, domain)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    #[serde(rename = "attempt-correct")]
    AttemptCorrect,
    #[serde(rename = "attempt-incorrect")]
    AttemptIncorrect,
    #[serde(rename = "hint")]
    Hint,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::AttemptCorrect => "attempt-correct",
            StepKind::AttemptIncorrect => "attempt-incorrect",
            StepKind::Hint => "hint",
        }
    }

    pub fn is_error(self) -> bool {
        self != StepKind::AttemptCorrect
    }
}

/// One tutor step: the first response and the action that was finally
/// applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub agent: usize,
    /// 1-based.
    pub problem: usize,
    /// 1-based within the problem.
    pub step: usize,
    pub kind: StepKind,
    pub label: String,
    /// The first attempt, if any.
    pub attempted: Option<Sai>,
    /// The action applied to the tutor.
    pub applied: Sai,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemStats {
    pub steps: usize,
    pub errors: usize,
}

impl ProblemStats {
    pub fn error_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.errors as f64 / self.steps as f64
        }
    }
}

/// Runs one problem to completion and returns its step records.
pub fn run_problem(learner: &mut dyn Learner, session: &mut TutorSession, agent: usize, problem: usize, annotate: bool) -> Result<Vec<StepRecord>> {
    let mut records = Vec::new();
    while !session.is_complete() {
        let state = session.state().clone();
        let steps = session.correct_steps();
        let attempted = learner.act(&state);
        let mut kind = StepKind::Hint;
        if let Some(sai) = &attempted {
            let reward = session.grade(sai);
            learner.train(&TrainingSignal::feedback(state.clone(), sai.clone(), reward))?;
            session.apply(sai, reward)?;
            if reward > 0.0 {
                let label = steps.iter().find(|h| &h.sai == sai).map(|h| h.skill_label.clone()).unwrap_or_default();
                records.push(StepRecord {
                    agent,
                    problem,
                    step: records.len() + 1,
                    kind: StepKind::AttemptCorrect,
                    label,
                    attempted: attempted.clone(),
                    applied: sai.clone(),
                });
                continue;
            }
            kind = StepKind::AttemptIncorrect;
        }
        let hint = session.hint().ok_or_else(|| Error::Problem("incomplete session without a hint".into()))?;
        let mut demo = TrainingSignal::demonstration(state, hint.sai.clone());
        if annotate {
            demo = demo.with_foci(hint.foci.clone()).with_label(hint.skill_label.clone());
        }
        learner.train(&demo)?;
        session.apply(&hint.sai, 1.0)?;
        records.push(StepRecord {
            agent,
            problem,
            step: records.len() + 1,
            kind,
            label: hint.skill_label,
            attempted,
            applied: hint.sai,
        });
    }
    learner.end_problem();
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub domain: Domain,
    pub agent: AgentKind,
    pub n_agents: usize,
    pub max_problems: usize,
    /// Stop an agent once the mean error of its last ten problems falls
    /// below this value.
    #[serde(default)]
    pub stop_error: Option<f64>,
    pub seed: u64,
    /// Overrides the agent configuration for skill-based kinds.
    #[serde(default)]
    pub agent_config: Option<AgentConfig>,
    /// Whether demonstrations carry foci and skill labels; `None` uses
    /// [`AgentKind::receives_annotations`].
    #[serde(default)]
    pub annotations: Option<bool>,
}

impl RunConfig {
    pub fn new(domain: Domain, agent: AgentKind, n_agents: usize, max_problems: usize, seed: u64) -> RunConfig {
        RunConfig {
            domain,
            agent,
            n_agents,
            max_problems,
            stop_error: None,
            seed,
            agent_config: None,
            annotations: None,
        }
    }

    pub fn annotate(&self) -> bool {
        self.annotations.unwrap_or_else(|| self.agent.receives_annotations())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 || self.max_problems == 0 {
            return Err(Error::Config("n_agents and max_problems must be positive".into()));
        }
        if let Some(c) = &self.agent_config {
            c.validate()?;
        }
        Ok(())
    }
}

/// The problem sequence seen by agent `index`: a ChaCha stream keyed by
/// the run seed and the agent index.
pub fn problem_sequence(domain: Domain, seed: u64, index: usize, n: usize) -> Vec<ProblemSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    (0..n).map(|_| ProblemSpec::generate(domain, &mut rng)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRun {
    pub index: usize,
    pub problems: Vec<ProblemStats>,
    pub records: Vec<StepRecord>,
    pub skills: Option<Vec<SkillExport>>,
}

/// Runs one agent over an explicit problem list.
pub fn run_agent_on(config: &RunConfig, index: usize, problems: &[ProblemSpec]) -> Result<AgentRun> {
    let mut learner = make_learner(config.agent, config.domain, config.agent_config.as_ref())?;
    let annotate = config.annotate();
    let mut stats: Vec<ProblemStats> = Vec::new();
    let mut records = Vec::new();
    for (p, spec) in problems.iter().enumerate() {
        let mut session = TutorSession::new(spec.clone())?;
        let recs = run_problem(learner.as_mut(), &mut session, index, p + 1, annotate)?;
        stats.push(ProblemStats {
            steps: recs.len(),
            errors: recs.iter().filter(|r| r.kind.is_error()).count(),
        });
        records.extend(recs);
        if let Some(stop) = config.stop_error {
            if stats.len() >= 10 {
                let tail = &stats[stats.len() - 10..];
                let mean = tail.iter().map(ProblemStats::error_rate).sum::<f64>() / 10.0;
                if mean < stop {
                    break;
                }
            }
        }
    }
    Ok(AgentRun {
        index,
        problems: stats,
        records,
        skills: learner.export_skills(),
    })
}

pub fn run_agent(config: &RunConfig, index: usize) -> Result<AgentRun> {
    let problems = problem_sequence(config.domain, config.seed, index, config.max_problems);
    run_agent_on(config, index, &problems)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub config: RunConfig,
    pub runs: Vec<AgentRun>,
    pub curve: Vec<CurvePoint>,
}

impl Experiment {
    pub fn mastery(&self, threshold: f64) -> Option<usize> {
        mastery_intercept(&self.curve, threshold)
    }

    /// Smoothed error at a 1-based problem index.
    pub fn smoothed_at(&self, problem: usize) -> Option<f64> {
        self.curve.get(problem.checked_sub(1)?).map(|c| c.smoothed_error)
    }

    pub fn transcript_csv(&self) -> String {
        transcript_csv(self.runs.iter().flat_map(|r| r.records.iter()))
    }
}

/// Worker count from [`WORKERS_ENV`], defaulting to the available cores.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs all agents (one per rayon task) and aggregates their curve.
pub fn run_experiment(config: &RunConfig) -> Result<Experiment> {
    run_with(config, |i| run_agent(config, i))
}

/// Like [`run_experiment`], but every agent works through `problems`
/// (truncated to `max_problems`) instead of a generated sequence.
pub fn run_experiment_on(config: &RunConfig, problems: &[ProblemSpec]) -> Result<Experiment> {
    if let Some(p) = problems.iter().find(|p| p.domain() != config.domain) {
        return Err(Error::Config(format!("problem {p:?} is not in domain {}", config.domain)));
    }
    let problems = &problems[..problems.len().min(config.max_problems)];
    run_with(config, |i| run_agent_on(config, i, problems))
}

fn run_with(config: &RunConfig, run: impl Fn(usize) -> Result<AgentRun> + Sync) -> Result<Experiment> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let runs: Vec<AgentRun> =
        pool.install(|| (0..config.n_agents).into_par_iter().map(&run).collect::<Result<Vec<_>>>())?;
    let curve = curve_from_runs(&runs, &SmoothingSpec::default());
    Ok(Experiment {
        config: config.clone(),
        runs,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Perfect(Vec<Sai>);

    impl Learner for Perfect {
        fn act(&mut self, _: &InterfaceState) -> Option<Sai> {
            if self.0.is_empty() {
                None
            } else {
                Some(self.0.remove(0))
            }
        }
        fn train(&mut self, _: &TrainingSignal) -> Result<()> {
            Ok(())
        }
    }

    #[test]
    fn scripted_perfect_learner_has_no_errors() {
        let spec = ProblemSpec::addition("539", "421");
        let mut probe = TutorSession::new(spec.clone()).unwrap();
        let mut script = Vec::new();
        while let Some(h) = probe.hint() {
            script.push(h.sai.clone());
            probe.attempt(&h.sai).unwrap();
        }
        let mut session = TutorSession::new(spec).unwrap();
        let recs = run_problem(&mut Perfect(script), &mut session, 0, 1, true).unwrap();
        assert_eq!(recs.len(), 5);
        assert!(recs.iter().all(|r| r.kind == StepKind::AttemptCorrect));
    }

    #[test]
    fn fresh_agent_first_problem_is_all_hints() {
        for domain in [Domain::McAddition, Domain::Fractions] {
            let cfg = RunConfig::new(domain, AgentKind::Dipl, 1, 1, 5);
            let run = run_agent(&cfg, 0).unwrap();
            assert_eq!(run.problems[0].error_rate(), 1.0);
            assert!(run.records.iter().all(|r| r.kind == StepKind::Hint));
        }
    }

    #[test]
    fn sequences_differ_per_agent_and_repeat_per_seed() {
        let a = problem_sequence(Domain::McAddition, 1, 0, 5);
        assert_eq!(a, problem_sequence(Domain::McAddition, 1, 0, 5));
        assert_ne!(a, problem_sequence(Domain::McAddition, 1, 1, 5));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in AgentKind::ALL {
            assert_eq!(k.as_str().parse::<AgentKind>().unwrap(), k);
        }
    }
}
