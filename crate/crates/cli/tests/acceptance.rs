//! Acceptance checks for the `dipl` binary, one printed line per criterion.

mod common;

use std::fs;
use std::process::ExitCode;

use common::{dipl, run};
use serde_json::Value;

fn line(failed: &mut usize, ok: bool, id: &str, detail: &str) {
    if !ok {
        *failed += 1;
    }
    println!("{} {id}: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn main() -> ExitCode {
    let mut failed = 0;
    let dir = tempfile::tempdir().expect("temp dir");
    let p = |s: &str| dir.path().join(s);

    run(&p("a"), "mc-addition", "dipl", 4, 10, 7, Some("1"));
    run(&p("b"), "mc-addition", "dipl", 4, 10, 7, Some("4"));
    run(&p("c"), "mc-addition", "dipl", 4, 10, 7, Some("1"));
    let read = |d: &str, f: &str| fs::read(p(d).join(f)).unwrap_or_default();
    let same = read("a", "transcripts.csv") == read("c", "transcripts.csv")
        && read("a", "transcripts.csv") == read("b", "transcripts.csv")
        && !read("a", "transcripts.csv").is_empty();
    line(&mut failed, same, "deterministic-transcripts-cli", "same seed, 1 and 4 workers: byte-identical transcripts.csv");

    let curves = String::from_utf8(read("a", "curves.csv")).unwrap_or_default();
    let header = curves.lines().next() == Some("problem,mean_error,n_agents,smoothed_error");
    line(
        &mut failed,
        header && curves.lines().count() == 11,
        "curves-csv-columns",
        "header problem,mean_error,n_agents,smoothed_error and one row per problem",
    );

    let meta: Value = serde_json::from_slice(&read("a", "run.json")).unwrap_or(Value::Null);
    let formula = meta["error_formula"].as_str().unwrap_or("");
    line(
        &mut failed,
        formula.contains("incorrect first attempts") && formula.contains("hint requests"),
        "run-metadata-error-formula",
        &format!("run.json error_formula = {formula:?}"),
    );

    let svg = p("plot.svg");
    let o = dipl(
        &["plot", "--in", p("a").join("curves.csv").to_str().unwrap(), "--log-x", "--svg", svg.to_str().unwrap()],
        None,
    );
    let text = fs::read_to_string(&svg).unwrap_or_default();
    line(
        &mut failed,
        o.status.success() && text.starts_with("<svg") && text.contains("<polyline"),
        "plot-log-x-svg",
        "plot --log-x writes an SVG with one curve",
    );

    let o = dipl(
        &[
            "inspect-skills",
            "--transcript",
            p("a").join("transcripts.csv").to_str().unwrap(),
            "--agent-state",
            p("a").join("agent_state.json").to_str().unwrap(),
        ],
        None,
    );
    let out = String::from_utf8_lossy(&o.stdout);
    line(
        &mut failed,
        o.status.success() && out.contains("add2") && out.contains("GetOnesPlace(Add(?0,?1))"),
        "inspect-skills",
        "lists the learned add2 skill with its how-part",
    );

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
