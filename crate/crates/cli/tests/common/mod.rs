use std::path::Path;
use std::process::{Command, Output};

pub fn dipl(args: &[&str], workers: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dipl"));
    c.args(args);
    match workers {
        Some(w) => c.env("DIPL_WORKERS", w),
        None => c.env_remove("DIPL_WORKERS"),
    };
    c.output().expect("dipl binary runs")
}

/// `dipl run` into `out`; panics with stderr on failure.
pub fn run(out: &Path, domain: &str, agent: &str, n: usize, m: usize, seed: u64, workers: Option<&str>) {
    let o = dipl(
        &[
            "run",
            "--domain",
            domain,
            "--agent",
            agent,
            "--n-agents",
            &n.to_string(),
            "--max-problems",
            &m.to_string(),
            "--seed",
            &seed.to_string(),
            "--out",
            out.to_str().unwrap(),
        ],
        workers,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
