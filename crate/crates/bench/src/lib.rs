//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dipl_core::agent::{Agent, AgentConfig};
use dipl_core::harness::{problem_sequence, run_problem};
use dipl_core::tutor::{Domain, ProblemSpec, TutorSession};
use dipl_core::when_learning::{Dataset, FeatureMap};
use dipl_core::{ElementState, InterfaceState};

/// Locked numeric fields `e0..` in a row, with an empty `out` field below.
pub fn row_state(values: &[&str]) -> InterfaceState {
    let mut els: Vec<ElementState> = values
        .iter()
        .enumerate()
        .map(|(i, v)| ElementState::text_field(format!("e{i}"), *v, true, 50.0 * i as f64, 0.0))
        .collect();
    els.push(ElementState::text_field("out", "", false, 0.0, 100.0));
    InterfaceState::new(els).expect("row layout is consistent")
}

/// An agent trained on the first `problems` problems of a seeded stream,
/// with hints carrying foci and labels.
pub fn trained_agent(domain: Domain, problems: usize, seed: u64) -> Agent {
    let mut agent = Agent::new(AgentConfig::default()).expect("default config is valid");
    for (p, spec) in problem_sequence(domain, seed, 0, problems).into_iter().enumerate() {
        let mut s = TutorSession::new(spec).expect("generated problems are valid");
        run_problem(&mut agent, &mut s, 0, p + 1, true).expect("protocol step succeeds");
    }
    agent
}

/// A fresh board from a stream the training stream does not share.
pub fn fresh_state(domain: Domain, seed: u64) -> InterfaceState {
    let spec = problem_sequence(domain, seed, 1, 1).remove(0);
    TutorSession::new(spec).expect("generated problems are valid").state().clone()
}

pub fn fixed_problem() -> ProblemSpec {
    ProblemSpec::addition("539", "421")
}

/// `rows` random rows over `features` features with values in `0..arity`;
/// the label is a parity rule over the first three features.
pub fn random_dataset(rows: usize, features: usize, arity: u32, seed: u64) -> Dataset<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Dataset::new();
    for _ in 0..rows {
        let mut f = FeatureMap::new();
        let mut sum = 0;
        for k in 0..features {
            let v = rng.gen_range(0..arity);
            if k < 3 {
                sum += v;
            }
            f.insert(format!("f{k}"), v.to_string());
        }
        d.push(&f, sum % 2 == 0);
    }
    d
}
