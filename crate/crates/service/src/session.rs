//! One live tutoring session: a tutor board, an agent and the event log
//! that records every change to either.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use dipl_core::agent::{Agent, AgentConfig, Decision, SkillApplication, SkillExport};
use dipl_core::tutor::{Domain, ProblemSpec, TutorSession};
use dipl_core::{InterfaceState, Sai, Source, TrainingSignal};

use crate::error::ServiceError;
use crate::events::{Event, EventLog, EventRecord, Mode, SkillSummary, SkillsSummary, StateCause};

/// Body of `POST /sessions`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub domain: Domain,
    #[serde(default)]
    pub agent_config: Option<AgentConfig>,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Seeds the problem generator; ignored for the first problem when
    /// `problem` is given.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub problem: Option<ProblemSpec>,
}

fn default_mode() -> Mode {
    Mode::HumanTutor
}

/// Body of `POST /sessions/{id}/train`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRequest {
    pub sai: Sai,
    pub reward: f64,
    #[serde(default)]
    pub foci: Option<Vec<String>>,
    #[serde(default)]
    pub skill_label: Option<String>,
    pub source: Source,
}

/// Result of `POST /sessions/{id}/step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    /// The agent's chosen action; absent when it requested a hint.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<Sai>,
    pub hint_request: bool,
    pub conflict_set: Vec<SkillApplication>,
    /// Auto-tutor mode only: the tutor's grade of `action`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
    /// Auto-tutor mode only: the step the tutor demonstrated afterwards.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demonstrated: Option<Sai>,
    pub state: InterfaceState,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub skills_summary: SkillsSummary,
    pub state: InterfaceState,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub domain: Domain,
    pub mode: Mode,
    pub problem: ProblemSpec,
    pub state: InterfaceState,
    pub complete: bool,
    pub skills_summary: SkillsSummary,
    pub last_seq: u64,
}

pub fn summarize(agent: &Agent) -> SkillsSummary {
    let skills: Vec<SkillSummary> = agent
        .skills()
        .iter()
        .map(|s| SkillSummary {
            id: s.id.clone(),
            label: s.label.clone(),
            how: s.how.to_string(),
            utility: s.utility(),
            positives: s.positives,
            total: s.total,
        })
        .collect();
    SkillsSummary {
        count: skills.len(),
        skills,
    }
}

pub struct Session {
    id: String,
    domain: Domain,
    mode: Mode,
    seed: u64,
    agent: Agent,
    tutor: TutorSession,
    rng: ChaCha8Rng,
    log: EventLog,
}

impl Session {
    /// Starts a session and writes its `session-created` event to `log`,
    /// which must be empty.
    pub fn create(id: String, req: CreateRequest, mut log: EventLog) -> Result<(Session, Vec<String>), ServiceError> {
        if log.last_seq() != 0 {
            return Err(ServiceError::Log("new session needs an empty log".into()));
        }
        let agent_config = req.agent_config.unwrap_or_default();
        let agent = Agent::new(agent_config.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        let problem = match req.problem {
            Some(p) if p.domain() != req.domain => {
                return Err(ServiceError::BadRequest(format!("problem is not in domain {}", req.domain)));
            }
            Some(p) => p,
            None => ProblemSpec::generate(req.domain, &mut rng),
        };
        let tutor = TutorSession::new(problem.clone())?;
        let line = log.append(Event::SessionCreated {
            session_id: id.clone(),
            domain: req.domain,
            mode: req.mode,
            seed: req.seed,
            agent_config,
            problem,
            state: tutor.state().clone(),
        })?;
        let session = Session {
            id,
            domain: req.domain,
            mode: req.mode,
            seed: req.seed,
            agent,
            tutor,
            rng,
            log,
        };
        Ok((session, vec![line]))
    }

    /// Rebuilds a session from its records. `log` continues after them.
    pub fn replay(records: &[EventRecord], log: EventLog) -> Result<Session, ServiceError> {
        let bad = |msg: String| ServiceError::Log(msg);
        let Some(Event::SessionCreated {
            session_id,
            domain,
            mode,
            seed,
            agent_config,
            problem,
            ..
        }) = records.first().map(|r| &r.event)
        else {
            return Err(bad("log does not start with session-created".into()));
        };
        let mut s = Session {
            id: session_id.clone(),
            domain: *domain,
            mode: *mode,
            seed: *seed,
            agent: Agent::new(agent_config.clone())?,
            tutor: TutorSession::new(problem.clone())?,
            rng: ChaCha8Rng::seed_from_u64(*seed),
            log,
        };
        // The first problem was drawn from the generator unless it was given;
        // redraw so later problems continue the same stream.
        let mut probe = ChaCha8Rng::seed_from_u64(*seed);
        if ProblemSpec::generate(*domain, &mut probe) == *problem {
            s.rng = probe;
        }
        for r in &records[1..] {
            match &r.event {
                Event::SessionCreated { .. } => return Err(bad(format!("seq {}: second session-created", r.seq))),
                Event::StateChanged { cause, .. } => match cause {
                    StateCause::Applied { sai } => s.tutor.apply(sai, 1.0)?,
                    StateCause::NewProblem { problem, generated } => {
                        if *generated {
                            ProblemSpec::generate(s.domain, &mut s.rng);
                        }
                        s.tutor = TutorSession::new(problem.clone())?;
                    }
                },
                Event::AgentAttempted { .. } => {}
                Event::SkillUpdated { signal, .. } => s.agent.train(signal)?,
            }
        }
        Ok(s)
    }

    /// Reads a log file and rebuilds the session, appending to the same file.
    pub fn resume(path: &Path) -> Result<Session, ServiceError> {
        let (log, records) = EventLog::open(path)?;
        Session::replay(&records, log)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn skills(&self) -> Vec<SkillExport> {
        self.agent.export_skills()
    }

    pub fn state(&self) -> &InterfaceState {
        self.tutor.state()
    }

    pub fn is_complete(&self) -> bool {
        self.tutor.is_complete()
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            session_id: self.id.clone(),
            domain: self.domain,
            mode: self.mode,
            problem: self.tutor.spec().clone(),
            state: self.tutor.state().clone(),
            complete: self.tutor.is_complete(),
            skills_summary: summarize(&self.agent),
            last_seq: self.log.last_seq(),
        }
    }

    fn ensure_open(&self) -> Result<(), ServiceError> {
        if self.tutor.is_complete() {
            return Err(ServiceError::Conflict(format!("session {} has completed its problem", self.id)));
        }
        Ok(())
    }

    fn train_agent(&mut self, signal: TrainingSignal, out: &mut Vec<String>) -> Result<(), ServiceError> {
        // Train a copy so a rejected signal leaves the agent untouched.
        let mut next = self.agent.clone();
        next.train(&signal)?;
        self.agent = next;
        out.push(self.log.append(Event::SkillUpdated {
            signal,
            skills_summary: summarize(&self.agent),
        })?);
        Ok(())
    }

    fn apply_to_board(&mut self, sai: &Sai, out: &mut Vec<String>) -> Result<(), ServiceError> {
        self.tutor.apply(sai, 1.0)?;
        out.push(self.log.append(Event::StateChanged {
            cause: StateCause::Applied { sai: sai.clone() },
            state: self.tutor.state().clone(),
            complete: self.tutor.is_complete(),
        })?);
        Ok(())
    }

    /// Asks the agent for its next action. In auto-tutor mode the tutor
    /// then grades it and, after a wrong attempt or a hint request,
    /// demonstrates the next step. Returns the result and the new log lines.
    pub fn step(&mut self) -> Result<(StepResult, Vec<String>), ServiceError> {
        self.ensure_open()?;
        let mut out = Vec::new();
        let state = self.tutor.state().clone();
        let conflict_set = self.agent.conflict_set(&state);
        let action = match self.agent.act(&state) {
            Decision::Attempt(app) => Some(app.sai),
            Decision::HintRequest => None,
        };
        out.push(self.log.append(Event::AgentAttempted {
            action: action.clone(),
            conflict_set: conflict_set.clone(),
        })?);
        let mut result = StepResult {
            hint_request: action.is_none(),
            action: action.clone(),
            conflict_set,
            reward: None,
            demonstrated: None,
            state: state.clone(),
            complete: false,
        };
        if self.mode == Mode::AutoTutor {
            let mut correct = false;
            if let Some(sai) = &action {
                let reward = self.tutor.grade(sai);
                result.reward = Some(reward);
                self.train_agent(TrainingSignal::feedback(state.clone(), sai.clone(), reward), &mut out)?;
                if reward > 0.0 {
                    self.apply_to_board(sai, &mut out)?;
                    correct = true;
                }
            }
            if !correct {
                let hint = self.tutor.hint().expect("an open problem has a next step");
                let signal = TrainingSignal::demonstration(state, hint.sai.clone())
                    .with_foci(hint.foci)
                    .with_label(hint.skill_label);
                self.train_agent(signal, &mut out)?;
                self.apply_to_board(&hint.sai, &mut out)?;
                result.demonstrated = Some(hint.sai);
            }
        }
        result.state = self.tutor.state().clone();
        result.complete = self.tutor.is_complete();
        Ok((result, out))
    }

    /// Forwards a demonstration or feedback to the agent. Positive signals
    /// are written to the board: always in human-tutor mode, and in
    /// auto-tutor mode only when the tutor agrees.
    pub fn train(&mut self, req: TrainRequest) -> Result<(TrainResult, Vec<String>), ServiceError> {
        self.ensure_open()?;
        if !req.reward.is_finite() || req.reward == 0.0 {
            return Err(ServiceError::BadRequest("reward must be a finite non-zero number".into()));
        }
        let state = self.tutor.state().clone();
        let Some(el) = state.get(&req.sai.selection) else {
            return Err(ServiceError::BadRequest(format!("unknown selection {:?}", req.sai.selection)));
        };
        if req.reward > 0.0 && el.locked {
            return Err(ServiceError::BadRequest(format!("{:?} is locked", req.sai.selection)));
        }
        if let Some(foci) = &req.foci {
            if let Some(f) = foci.iter().find(|f| !state.contains(f)) {
                return Err(ServiceError::BadRequest(format!("unknown focus {f:?}")));
            }
        }
        let signal = TrainingSignal {
            state,
            sai: req.sai.clone(),
            reward: req.reward,
            foci: req.foci,
            skill_label: req.skill_label,
            source: req.source,
        };
        let mut out = Vec::new();
        self.train_agent(signal, &mut out)?;
        let applies = req.reward > 0.0 && (self.mode == Mode::HumanTutor || self.tutor.grade(&req.sai) > 0.0);
        if applies {
            self.apply_to_board(&req.sai, &mut out)?;
        }
        Ok((
            TrainResult {
                skills_summary: summarize(&self.agent),
                state: self.tutor.state().clone(),
                complete: self.tutor.is_complete(),
            },
            out,
        ))
    }

    /// Loads `problem`, or the next generated one, keeping the agent.
    pub fn next_problem(&mut self, problem: Option<ProblemSpec>) -> Result<(SessionView, Vec<String>), ServiceError> {
        let generated = problem.is_none();
        let problem = match problem {
            Some(p) if p.domain() != self.domain => {
                return Err(ServiceError::BadRequest(format!("problem is not in domain {}", self.domain)));
            }
            Some(p) => p,
            None => ProblemSpec::generate(self.domain, &mut self.rng),
        };
        self.tutor = TutorSession::new(problem.clone())?;
        let line = self.log.append(Event::StateChanged {
            cause: StateCause::NewProblem { problem, generated },
            state: self.tutor.state().clone(),
            complete: false,
        })?;
        Ok((self.view(), vec![line]))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn create(mode: Mode) -> Session {
        let req = CreateRequest {
            domain: Domain::McAddition,
            agent_config: None,
            mode,
            seed: 3,
            problem: Some(ProblemSpec::addition("27", "35")),
        };
        Session::create("t".into(), req, EventLog::in_memory()).unwrap().0
    }

    fn demo(sel: &str, value: &str, foci: &[&str], label: &str) -> TrainRequest {
        TrainRequest {
            sai: Sai::update(sel, value),
            reward: 1.0,
            foci: Some(foci.iter().map(|s| s.to_string()).collect()),
            skill_label: Some(label.into()),
            source: Source::Demonstration,
        }
    }

    fn records(s: &Session) -> Vec<EventRecord> {
        s.log().lines_after(0).iter().map(|l| serde_json::from_str(l).unwrap()).collect()
    }

    #[test]
    fn fresh_agent_requests_a_hint() {
        let mut s = create(Mode::HumanTutor);
        let (r, lines) = s.step().unwrap();
        assert!(r.hint_request && r.action.is_none() && r.conflict_set.is_empty());
        assert_eq!(lines.len(), 1);
        assert_eq!(r.state, *s.state());
    }

    #[test]
    fn human_demonstration_writes_and_locks() {
        let mut s = create(Mode::HumanTutor);
        let (r, lines) = s.train(demo("out1", "2", &["inpA1", "inpB1"], "add2")).unwrap();
        assert_eq!(r.skills_summary.count, 1);
        assert_eq!(lines.len(), 2);
        let el = s.state().get("out1").unwrap();
        assert!(el.locked && el.value == "2");
        // A human may demonstrate what the tutor would reject.
        s.train(demo("out2", "9", &["inpA2", "inpB2"], "add2")).unwrap();
        assert_eq!(s.state().get("out2").unwrap().value, "9");
    }

    #[test]
    fn negative_feedback_lowers_utility_and_leaves_the_board() {
        let mut s = create(Mode::HumanTutor);
        s.train(demo("out1", "2", &["inpA1", "inpB1"], "add2")).unwrap();
        // One demo leaves 7 - 5 as the explanation; it proposes 4 - 2 here.
        s.next_problem(Some(ProblemSpec::addition("14", "32"))).unwrap();
        let (r, _) = s.step().unwrap();
        let sai = r.action.expect("trained agent acts");
        let before = summarize(s.agent());
        let board = s.state().clone();
        let (t, _) = s
            .train(TrainRequest {
                sai: sai.clone(),
                reward: -1.0,
                foci: None,
                skill_label: None,
                source: Source::FeedbackOnOwnAction,
            })
            .unwrap();
        assert_eq!(*s.state(), board);
        let id = &r.conflict_set[0].skill_id;
        let u = |sum: &SkillsSummary| sum.skills.iter().find(|k| &k.id == id).unwrap().utility;
        assert!(u(&t.skills_summary) < u(&before));
    }

    #[test]
    fn rejected_signals_leave_no_trace() {
        let mut s = create(Mode::HumanTutor);
        let n = s.log().last_seq();
        for bad in [
            demo("nowhere", "1", &[], "x"),
            demo("inpA1", "1", &[], "x"),
            demo("out1", "2", &["zz"], "x"),
            TrainRequest {
                reward: 0.0,
                ..demo("out1", "2", &[], "x")
            },
            TrainRequest {
                reward: -1.0,
                ..demo("out1", "2", &[], "x")
            },
        ] {
            assert!(matches!(s.train(bad), Err(ServiceError::BadRequest(_))));
        }
        assert_eq!(s.log().last_seq(), n);
        assert_eq!(s.agent().skills().len(), 0);
    }

    #[test]
    fn auto_tutor_finishes_a_problem_and_then_refuses() {
        let mut s = create(Mode::AutoTutor);
        let mut steps = 0;
        while !s.is_complete() {
            let (r, _) = s.step().unwrap();
            assert!(r.reward.is_some() || r.demonstrated.is_some());
            steps += 1;
            assert!(steps <= 10);
        }
        assert!(matches!(s.step(), Err(ServiceError::Conflict(_))));
        s.next_problem(None).unwrap();
        assert!(!s.is_complete());
        assert_eq!(s.view().problem.domain(), Domain::McAddition);
    }

    #[test]
    fn replay_rebuilds_agent_and_board() {
        let mut s = create(Mode::AutoTutor);
        for _ in 0..3 {
            while !s.is_complete() {
                s.step().unwrap();
            }
            s.next_problem(None).unwrap();
        }
        s.step().unwrap();
        let r = Session::replay(&records(&s), EventLog::in_memory()).unwrap();
        assert_eq!(r.skills(), s.skills());
        assert_eq!(r.state(), s.state());
        assert_eq!(r.view().problem, s.view().problem);
        // The generator continues where the live session is.
        let mut a = s;
        let mut b = r;
        assert_eq!(a.next_problem(None).unwrap().0.problem, b.next_problem(None).unwrap().0.problem);
    }

    #[test]
    fn one_train_call_is_one_skill_update() {
        let mut s = create(Mode::HumanTutor);
        let (_, lines) = s.train(demo("out1", "2", &["inpA1", "inpB1"], "add2")).unwrap();
        let kinds: Vec<String> = lines
            .iter()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["type"].as_str().unwrap().to_string())
            .collect();
        assert_eq!(kinds, ["skill-updated", "state-changed"]);
    }
}
