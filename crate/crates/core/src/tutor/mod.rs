//! Simulated tutors: problem generation, grading, locking state
//! transitions and bottom-out hints.

mod addition;
mod fractions;

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionType, Dir, ElementState, InterfaceState, Sai};

pub use fractions::FracOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "mc-addition")]
    McAddition,
    #[serde(rename = "fractions")]
    Fractions,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::McAddition => "mc-addition",
            Domain::Fractions => "fractions",
        }
    }

    /// Canonical knowledge-component labels used in hints.
    pub fn skill_labels(self) -> &'static [&'static str] {
        match self {
            Domain::McAddition => &["add2", "add3", "carry2", "carry3", "final-carry", "done"],
            Domain::Fractions => &[
                "check_convert",
                "conv_den",
                "conv_num",
                "add_num",
                "copy_den",
                "mul_num",
                "mul_den",
                "add_same_num",
                "done",
            ],
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Domain> {
        match s {
            "mc-addition" => Ok(Domain::McAddition),
            "fractions" => Ok(Domain::Fractions),
            other => Err(Error::Config(format!("unknown domain {other:?}"))),
        }
    }
}

/// One problem. Addends are decimal digit strings of equal length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "domain")]
pub enum ProblemSpec {
    #[serde(rename = "mc-addition")]
    Addition { a: String, b: String },
    #[serde(rename = "fractions")]
    Fractions {
        num_a: u32,
        den_a: u32,
        num_b: u32,
        den_b: u32,
        op: FracOp,
    },
}

impl ProblemSpec {
    pub fn domain(&self) -> Domain {
        match self {
            ProblemSpec::Addition { .. } => Domain::McAddition,
            ProblemSpec::Fractions { .. } => Domain::Fractions,
        }
    }

    pub fn addition(a: &str, b: &str) -> ProblemSpec {
        ProblemSpec::Addition {
            a: a.to_string(),
            b: b.to_string(),
        }
    }

    pub fn fractions(num_a: u32, den_a: u32, op: FracOp, num_b: u32, den_b: u32) -> ProblemSpec {
        ProblemSpec::Fractions {
            num_a,
            den_a,
            num_b,
            den_b,
            op,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProblemSpec::Addition { a, b } => {
                let ok = |s: &str| !s.is_empty() && s.len() <= 9 && s.bytes().all(|c| c.is_ascii_digit());
                if !ok(a) || !ok(b) || a.len() != b.len() {
                    return Err(Error::Problem(format!("addends must be equal-length digit strings: {a:?} + {b:?}")));
                }
            }
            ProblemSpec::Fractions {
                num_a,
                den_a,
                num_b,
                den_b,
                ..
            } => {
                if [num_a, den_a, num_b, den_b].iter().any(|v| !(1..=15).contains(*v)) {
                    return Err(Error::Problem("fraction terms must lie in 1..=15".into()));
                }
            }
        }
        Ok(())
    }

    /// Draws a problem uniformly from the domain's ranges: three digit
    /// columns for addition, terms in 1..=15 and a random operator for
    /// fractions.
    pub fn generate<R: Rng + ?Sized>(domain: Domain, rng: &mut R) -> ProblemSpec {
        match domain {
            Domain::McAddition => {
                let mut digits = |n: usize| (0..n).map(|_| char::from(b'0' + rng.gen_range(0..10u8))).collect::<String>();
                let a = digits(3);
                let b = digits(3);
                ProblemSpec::Addition { a, b }
            }
            Domain::Fractions => {
                let op = if rng.gen_bool(0.5) { FracOp::Add } else { FracOp::Mul };
                ProblemSpec::Fractions {
                    num_a: rng.gen_range(1..=15),
                    den_a: rng.gen_range(1..=15),
                    num_b: rng.gen_range(1..=15),
                    den_b: rng.gen_range(1..=15),
                    op,
                }
            }
        }
    }
}

/// Reads one problem per line; blank lines are skipped.
pub fn read_problem_set(reader: impl BufRead) -> Result<Vec<ProblemSpec>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let spec: ProblemSpec = serde_json::from_str(&line)?;
        spec.validate()?;
        out.push(spec);
    }
    Ok(out)
}

pub fn write_problem_set(mut writer: impl Write, problems: &[ProblemSpec]) -> Result<()> {
    for p in problems {
        serde_json::to_writer(&mut writer, p)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// A correct next step together with the instruction a hint would carry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintPackage {
    pub sai: Sai,
    pub foci: Vec<String>,
    pub skill_label: String,
}

/// The tutor's record of one graded or demonstrated step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLogEntry {
    pub sai: Sai,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TutorSession {
    spec: ProblemSpec,
    state: InterfaceState,
    complete: bool,
    log: Vec<StepLogEntry>,
}

impl TutorSession {
    pub fn new(spec: ProblemSpec) -> Result<TutorSession> {
        spec.validate()?;
        let state = match &spec {
            ProblemSpec::Addition { a, b } => addition::initial_state(a, b),
            ProblemSpec::Fractions {
                num_a,
                den_a,
                num_b,
                den_b,
                op,
            } => fractions::initial_state(*num_a, *den_a, *op, *num_b, *den_b),
        }?;
        Ok(TutorSession {
            spec,
            state,
            complete: false,
            log: Vec::new(),
        })
    }

    pub fn generate<R: Rng + ?Sized>(domain: Domain, rng: &mut R) -> TutorSession {
        TutorSession::new(ProblemSpec::generate(domain, rng)).expect("generated problems are valid")
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn domain(&self) -> Domain {
        self.spec.domain()
    }

    pub fn state(&self) -> &InterfaceState {
        &self.state
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn log(&self) -> &[StepLogEntry] {
        &self.log
    }

    /// Every correct next step with its hint instruction, sorted by
    /// selection id.
    pub fn correct_steps(&self) -> Vec<HintPackage> {
        if self.complete {
            return Vec::new();
        }
        let mut steps = match &self.spec {
            ProblemSpec::Addition { a, b } => addition::correct_steps(a, b, &self.state),
            ProblemSpec::Fractions {
                num_a,
                den_a,
                num_b,
                den_b,
                op,
            } => fractions::correct_steps(*num_a, *den_a, *op, *num_b, *den_b, &self.state),
        };
        steps.sort_by(|x, y| x.sai.selection.cmp(&y.sai.selection));
        steps
    }

    pub fn correct_actions(&self) -> Vec<Sai> {
        self.correct_steps().into_iter().map(|h| h.sai).collect()
    }

    /// +1 if `sai` is a correct next action, -1 otherwise.
    pub fn grade(&self, sai: &Sai) -> f64 {
        if self.correct_steps().iter().any(|h| &h.sai == sai) {
            1.0
        } else {
            -1.0
        }
    }

    /// Applies a graded action: positive writes and locks, negative is a
    /// no-op, a positive `done` completes the session.
    pub fn apply(&mut self, sai: &Sai, reward: f64) -> Result<()> {
        if !self.state.contains(&sai.selection) {
            return Err(Error::InvalidSai(format!("unknown selection {:?}", sai.selection)));
        }
        self.log.push(StepLogEntry {
            sai: sai.clone(),
            reward,
        });
        if reward <= 0.0 {
            return Ok(());
        }
        match sai.action_type {
            ActionType::PressButton => {
                if sai.selection == "done" {
                    self.complete = true;
                }
            }
            ActionType::UpdateTextField => {
                let value = sai.value().unwrap_or("");
                self.state = self.state.with_entry(&sai.selection, value, true)?;
            }
        }
        Ok(())
    }

    /// Grades and applies in one call; returns the reward.
    pub fn attempt(&mut self, sai: &Sai) -> Result<f64> {
        let r = self.grade(sai);
        self.apply(sai, r)?;
        Ok(r)
    }

    /// The bottom-out hint: the smallest selection id among the correct
    /// steps, except that a column's answer cell comes before its carry.
    pub fn hint(&self) -> Option<HintPackage> {
        self.correct_steps()
            .into_iter()
            .min_by_key(|h| (h.sai.selection.starts_with("carry"), h.sai.selection.clone()))
    }

    /// Number of elements; an upper bound on the steps of any problem.
    pub fn element_count(&self) -> usize {
        self.state.len()
    }
}

/// A cell placed at explicit coordinates; pointers are derived.
pub(crate) struct Cell {
    pub id: String,
    pub value: String,
    pub locked: bool,
    pub button: bool,
    pub x: f64,
    pub y: f64,
}

impl Cell {
    pub fn given(id: impl Into<String>, value: impl Into<String>, x: f64, y: f64) -> Cell {
        Cell {
            id: id.into(),
            value: value.into(),
            locked: true,
            button: false,
            x,
            y,
        }
    }

    pub fn open(id: impl Into<String>, x: f64, y: f64) -> Cell {
        Cell {
            id: id.into(),
            value: String::new(),
            locked: false,
            button: false,
            x,
            y,
        }
    }

    pub fn button(id: impl Into<String>, x: f64, y: f64) -> Cell {
        Cell {
            button: true,
            ..Cell::open(id, x, y)
        }
    }
}

/// Builds a state from cells, linking each cell to its nearest neighbor in
/// the same row (equal y) and the same column (equal x).
pub(crate) fn grid_state(cells: Vec<Cell>) -> Result<InterfaceState> {
    let mut els: Vec<ElementState> = cells
        .iter()
        .map(|c| {
            if c.button {
                ElementState::button(c.id.clone(), c.x, c.y)
            } else {
                ElementState::text_field(c.id.clone(), c.value.clone(), c.locked, c.x, c.y)
            }
        })
        .collect();
    let n = els.len();
    for i in 0..n {
        let (xi, yi) = (els[i].x, els[i].y);
        let nearest = |pred: &dyn Fn(&ElementState) -> bool, key: &dyn Fn(&ElementState) -> f64| {
            els.iter()
                .filter(|e| pred(e))
                .min_by(|a, b| key(a).total_cmp(&key(b)))
                .map(|e| e.id.clone())
                .unwrap_or_default()
        };
        let above = nearest(&|e| e.x == xi && e.y < yi, &|e| yi - e.y);
        let below = nearest(&|e| e.x == xi && e.y > yi, &|e| e.y - yi);
        let left = nearest(&|e| e.y == yi && e.x < xi, &|e| xi - e.x);
        let right = nearest(&|e| e.y == yi && e.x > xi, &|e| e.x - xi);
        *els[i].pointer_mut(Dir::Above) = above;
        *els[i].pointer_mut(Dir::Below) = below;
        *els[i].pointer_mut(Dir::Left) = left;
        *els[i].pointer_mut(Dir::Right) = right;
    }
    InterfaceState::new(els)
}

pub(crate) fn filled(state: &InterfaceState, id: &str) -> bool {
    state.get(id).is_some_and(|e| !e.is_empty())
}

pub(crate) fn step(sel: impl Into<String>, value: impl Into<String>, foci: &[&str], label: &str) -> HintPackage {
    HintPackage {
        sai: Sai::update(sel, value),
        foci: foci.iter().map(|s| s.to_string()).collect(),
        skill_label: label.to_string(),
    }
}

pub(crate) fn done_step() -> HintPackage {
    HintPackage {
        sai: Sai::press("done"),
        foci: Vec::new(),
        skill_label: "done".to_string(),
    }
}
