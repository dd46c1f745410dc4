//! Checks that the benchmark fixtures exercise what their names say, one
//! printed line per check.

use std::process::ExitCode;

use dipl_bench::{fixed_problem, fresh_state, random_dataset, row_state, trained_agent};
use dipl_core::agent::Decision;
use dipl_core::how::{how_search_with_stats, HowSearchConfig, Registry};
use dipl_core::tutor::{Domain, TutorSession};
use dipl_core::when_learning::{DecisionTree, TreeConfig};
use dipl_core::Sai;

fn main() -> ExitCode {
    let mut failed = 0;
    let mut line = |ok: bool, id: &str, detail: String| {
        failed += usize::from(!ok);
        println!("{} {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    };

    let state = row_state(&["2", "3", "5", "7"]);
    let (res, stats) = how_search_with_stats(&Registry::default(), &state, &Sai::update("out", "9"), &HowSearchConfig::with_depth(2));
    let n = res.map(|e| e.terms().len()).unwrap_or(0);
    line(
        n > 0 && stats.visited <= 87_808,
        "bench-how-fixture",
        format!("4 values, depth 2: {n} explanations, {} applications visited (<= 87808)", stats.visited),
    );

    for domain in [Domain::McAddition, Domain::Fractions] {
        let agent = trained_agent(domain, 15, 3);
        let state = fresh_state(domain, 3);
        let acts = matches!(agent.act(&state), Decision::Attempt(_));
        line(
            acts && !agent.skills().is_empty(),
            &format!("bench-trained-agent-{domain}"),
            format!("{} skills after 15 problems; acts on a fresh board", agent.skills().len()),
        );
    }

    let s = TutorSession::new(fixed_problem()).unwrap();
    line(s.hint().is_some(), "bench-train-fixture", "fixed problem has a hint to demonstrate".into());

    let d = random_dataset(1000, 30, 4, 1);
    let fit = DecisionTree::fit(&d, &TreeConfig::default());
    line(fit.is_some() && d.len() == 1000, "bench-tree-fixture", "1000 x 30 dataset fits".into());

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
