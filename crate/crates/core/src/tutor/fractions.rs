//! Fraction arithmetic: addition with a common denominator (the product of
//! the denominators when they differ) and multiplication.
//!
//! ```text
//! numA  op            numB   conv_numA  conv_numB   ans_num
//! denA  check_convert denB   conv_denA  conv_denB   ans_den
//!                                                   done
//! ```
//!
//! `check_convert` takes `x` when a conversion is needed and `no` otherwise.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::InterfaceState;

use super::{done_step, filled, grid_state, step, Cell, HintPackage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FracOp {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "×", alias = "*")]
    Mul,
}

impl FracOp {
    pub fn symbol(self) -> &'static str {
        match self {
            FracOp::Add => "+",
            FracOp::Mul => "×",
        }
    }
}

const W: f64 = 50.0;

fn at(col: usize) -> f64 {
    col as f64 * W
}

pub(crate) fn initial_state(num_a: u32, den_a: u32, op: FracOp, num_b: u32, den_b: u32) -> Result<InterfaceState> {
    grid_state(vec![
        Cell::given("numA", num_a.to_string(), at(0), 0.0),
        Cell::given("op", op.symbol(), at(1), 0.0),
        Cell::given("numB", num_b.to_string(), at(2), 0.0),
        Cell::open("conv_numA", at(4), 0.0),
        Cell::open("conv_numB", at(5), 0.0),
        Cell::open("ans_num", at(7), 0.0),
        Cell::given("denA", den_a.to_string(), at(0), W),
        Cell::open("check_convert", at(1), W),
        Cell::given("denB", den_b.to_string(), at(2), W),
        Cell::open("conv_denA", at(4), W),
        Cell::open("conv_denB", at(5), W),
        Cell::open("ans_den", at(7), W),
        Cell::button("done", at(7), 2.0 * W),
    ])
}

/// Collects the unfilled steps of one phase; `None` once the phase is done.
fn phase(state: &InterfaceState, steps: Vec<HintPackage>) -> Option<Vec<HintPackage>> {
    let open: Vec<_> = steps
        .into_iter()
        .filter(|s| !filled(state, &s.sai.selection))
        .collect();
    (!open.is_empty()).then_some(open)
}

pub(crate) fn correct_steps(
    num_a: u32,
    den_a: u32,
    op: FracOp,
    num_b: u32,
    den_b: u32,
    state: &InterfaceState,
) -> Vec<HintPackage> {
    let convert = op == FracOp::Add && den_a != den_b;
    let check = step("check_convert", if convert { "x" } else { "no" }, &[], "check_convert");
    if let Some(s) = phase(state, vec![check]) {
        return s;
    }
    let phases: Vec<Vec<HintPackage>> = match op {
        FracOp::Add if convert => {
            let den = (den_a * den_b).to_string();
            vec![
                vec![
                    step("conv_denA", &den, &["denA", "denB"], "conv_den"),
                    step("conv_numA", (num_a * den_b).to_string(), &["numA", "denB"], "conv_num"),
                    step("conv_denB", &den, &["denA", "denB"], "conv_den"),
                    step("conv_numB", (num_b * den_a).to_string(), &["numB", "denA"], "conv_num"),
                ],
                vec![
                    step(
                        "ans_num",
                        (num_a * den_b + num_b * den_a).to_string(),
                        &["conv_numA", "conv_numB"],
                        "add_num",
                    ),
                    step("ans_den", &den, &["conv_denA"], "copy_den"),
                ],
            ]
        }
        FracOp::Add => vec![vec![
            step("ans_num", (num_a + num_b).to_string(), &["numA", "numB"], "add_same_num"),
            step("ans_den", den_a.to_string(), &["denA"], "copy_den"),
        ]],
        FracOp::Mul => vec![vec![
            step("ans_num", (num_a * num_b).to_string(), &["numA", "numB"], "mul_num"),
            step("ans_den", (den_a * den_b).to_string(), &["denA", "denB"], "mul_den"),
        ]],
    };
    for p in phases {
        if let Some(s) = phase(state, p) {
            return s;
        }
    }
    vec![done_step()]
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::model::Sai;

    fn trace(spec: ProblemSpec) -> Vec<String> {
        let mut s = TutorSession::new(spec).unwrap();
        let mut out = Vec::new();
        while let Some(h) = s.hint() {
            out.push(format!("{}={}", h.sai.selection, h.sai.value().unwrap_or("")));
            s.attempt(&h.sai).unwrap();
        }
        out
    }

    #[test]
    fn add_different_denominators() {
        assert_eq!(
            trace(ProblemSpec::fractions(4, 10, FracOp::Add, 4, 9)),
            [
                "check_convert=x",
                "conv_denA=90",
                "conv_denB=90",
                "conv_numA=36",
                "conv_numB=40",
                "ans_den=90",
                "ans_num=76",
                "done="
            ]
        );
    }

    #[test]
    fn add_same_denominators() {
        assert_eq!(
            trace(ProblemSpec::fractions(2, 7, FracOp::Add, 3, 7)),
            ["check_convert=no", "ans_den=7", "ans_num=5", "done="]
        );
    }

    #[test]
    fn multiply() {
        assert_eq!(
            trace(ProblemSpec::fractions(2, 3, FracOp::Mul, 4, 5)),
            ["check_convert=no", "ans_den=15", "ans_num=8", "done="]
        );
    }

    #[test]
    fn conversion_steps_in_any_order() {
        let mut s = TutorSession::new(ProblemSpec::fractions(4, 10, FracOp::Add, 4, 9)).unwrap();
        s.attempt(&Sai::update("check_convert", "x")).unwrap();
        assert_eq!(s.attempt(&Sai::update("conv_numB", "40")).unwrap(), 1.0);
        assert_eq!(s.attempt(&Sai::update("ans_num", "76")).unwrap(), -1.0);
        let sels: Vec<_> = s.correct_actions().into_iter().map(|a| a.selection).collect();
        assert_eq!(sels, ["conv_denA", "conv_denB", "conv_numA"]);
    }

    #[test]
    fn layout_pointers() {
        let s = TutorSession::new(ProblemSpec::fractions(1, 2, FracOp::Add, 1, 3)).unwrap();
        let st = s.state();
        assert_eq!(st.len(), 13);
        let c = st.get("check_convert").unwrap();
        assert_eq!((c.to_left.as_str(), c.to_right.as_str(), c.above.as_str()), ("denA", "denB", "op"));
        assert_eq!(st.get("conv_numA").unwrap().to_left, "numB");
        assert_eq!(st.get("done").unwrap().above, "ans_den");
        assert_eq!(st.get("op").unwrap().value, "+");
    }

    #[test]
    fn hint_foci_and_labels() {
        let mut s = TutorSession::new(ProblemSpec::fractions(4, 10, FracOp::Add, 4, 9)).unwrap();
        let h = s.hint().unwrap();
        assert!(h.foci.is_empty());
        s.attempt(&h.sai).unwrap();
        let h = s.hint().unwrap();
        assert_eq!(h.foci, vec!["denA", "denB"]);
        assert_eq!(h.skill_label, "conv_den");
    }
}
