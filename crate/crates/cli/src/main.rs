use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use dipl_core::agent::{AgentConfig, SkillExport};
use dipl_core::harness::{
    self, parse_curve_csv, run_experiment, run_experiment_on, svg_plot, AgentKind, Experiment, RunConfig, Series,
    SmoothingSpec, ERROR_FORMULA, MASTERY_THRESHOLD, WORKERS_ENV,
};
use dipl_core::tutor::{read_problem_set, Domain};

#[derive(Parser)]
#[command(name = "dipl", version, about = "Learning-curve experiments for tutor-trained agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train agents on a problem stream and write curves and transcripts.
    Run(RunArgs),
    /// Render one or more curves.csv files as an SVG line plot.
    Plot(PlotArgs),
    /// Summarize the learned skills of a finished run.
    InspectSkills(InspectArgs),
}

#[derive(Args)]
struct RunArgs {
    /// mc-addition or fractions
    #[arg(long)]
    domain: Domain,
    /// dipl, single-lhs, dt-single or dt-double
    #[arg(long)]
    agent: AgentKind,
    #[arg(long, default_value_t = 20)]
    n_agents: usize,
    #[arg(long, default_value_t = 100)]
    max_problems: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Stop an agent once its last ten problems average below this error.
    #[arg(long)]
    stop_error: Option<f64>,
    /// JSON file with agent configuration overrides.
    #[arg(long)]
    agent_config: Option<PathBuf>,
    /// JSON-lines problem set given to every agent instead of generated streams.
    #[arg(long)]
    problems: Option<PathBuf>,
    /// Withhold foci and skill labels from demonstrations.
    #[arg(long, conflicts_with = "annotations")]
    no_annotations: bool,
    /// Give foci and skill labels to any agent kind.
    #[arg(long)]
    annotations: bool,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    /// curves.csv files; repeat for several series.
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,
    /// Series names, in the order of --in. Defaults to the parent directory name.
    #[arg(long = "label")]
    labels: Vec<String>,
    #[arg(long)]
    log_x: bool,
    #[arg(long)]
    svg: PathBuf,
    /// Added to every problem index, e.g. to account for earlier training.
    #[arg(long, default_value_t = 0)]
    offset: usize,
    /// Plot the per-problem mean instead of the smoothed curve.
    #[arg(long)]
    raw: bool,
    #[arg(long, default_value = "Error rate by problem")]
    title: String,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    transcript: PathBuf,
    #[arg(long)]
    agent_state: PathBuf,
    /// Only this agent index.
    #[arg(long)]
    agent: Option<usize>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

/// Contents of `run.json`.
#[derive(Serialize, Deserialize)]
struct RunMeta {
    config: RunConfig,
    problems_file: Option<PathBuf>,
    error_formula: String,
    smoothing: SmoothingSpec,
    mastery_threshold: f64,
    mastery_intercept: Option<usize>,
    workers: usize,
    problems_per_agent: Vec<usize>,
}

/// Contents of `agent_state.json`.
#[derive(Serialize, Deserialize)]
struct AgentState {
    domain: Domain,
    agent: AgentKind,
    agents: Vec<AgentSkills>,
}

#[derive(Serialize, Deserialize)]
struct AgentSkills {
    index: usize,
    skills: Option<Vec<SkillExport>>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(args: RunArgs) -> Result<()> {
    if let Some(w) = args.workers {
        if w == 0 {
            bail!("--workers must be positive");
        }
        std::env::set_var(WORKERS_ENV, w.to_string());
    }
    let mut config = RunConfig::new(args.domain, args.agent, args.n_agents, args.max_problems, args.seed);
    config.stop_error = args.stop_error;
    if args.no_annotations {
        config.annotations = Some(false);
    } else if args.annotations {
        config.annotations = Some(true);
    }
    if let Some(path) = &args.agent_config {
        if matches!(args.agent, AgentKind::DtSingle | AgentKind::DtDouble) {
            bail!("--agent-config applies only to dipl and single-lhs");
        }
        config.agent_config = Some(read_json::<AgentConfig>(path)?);
    }
    let exp: Experiment = match &args.problems {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let problems = read_problem_set(BufReader::new(f))?;
            if problems.is_empty() {
                bail!("{} contains no problems", path.display());
            }
            run_experiment_on(&config, &problems)?
        }
        None => run_experiment(&config)?,
    };

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write(&args.out.join("curves.csv"), harness::curve_csv(&exp.curve))?;
    write(&args.out.join("transcripts.csv"), exp.transcript_csv())?;
    let mastery = exp.mastery(MASTERY_THRESHOLD);
    let meta = RunMeta {
        config: exp.config.clone(),
        problems_file: args.problems.clone(),
        error_formula: ERROR_FORMULA.to_string(),
        smoothing: SmoothingSpec::default(),
        mastery_threshold: MASTERY_THRESHOLD,
        mastery_intercept: mastery,
        workers: harness::worker_count(),
        problems_per_agent: exp.runs.iter().map(|r| r.problems.len()).collect(),
    };
    write(&args.out.join("run.json"), serde_json::to_string_pretty(&meta)?)?;
    let state = AgentState {
        domain: config.domain,
        agent: config.agent,
        agents: exp
            .runs
            .iter()
            .map(|r| AgentSkills {
                index: r.index,
                skills: r.skills.clone(),
            })
            .collect(),
    };
    write(&args.out.join("agent_state.json"), serde_json::to_string_pretty(&state)?)?;

    let last = exp.curve.last().map_or(f64::NAN, |c| c.smoothed_error);
    match mastery {
        Some(p) => println!("{} {} x{}: mastery at problem {p}, final smoothed error {last:.3}", config.domain, config.agent, config.n_agents),
        None => println!("{} {} x{}: no mastery within {} problems, final smoothed error {last:.3}", config.domain, config.agent, config.n_agents, exp.curve.len()),
    }
    Ok(())
}

fn plot(args: PlotArgs) -> Result<()> {
    if !args.labels.is_empty() && args.labels.len() != args.inputs.len() {
        bail!("got {} --label values for {} --in files", args.labels.len(), args.inputs.len());
    }
    let mut series = Vec::new();
    for (i, path) in args.inputs.iter().enumerate() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let curve = parse_curve_csv(&text).with_context(|| format!("parsing {}", path.display()))?;
        if curve.is_empty() {
            bail!("{} has no rows", path.display());
        }
        let name = args.labels.get(i).cloned().unwrap_or_else(|| default_name(path));
        let points = curve
            .iter()
            .map(|c| (c.problem + args.offset, if args.raw { c.mean_error } else { c.smoothed_error }))
            .collect();
        series.push(Series { name, points });
    }
    write(&args.svg, svg_plot(&series, args.log_x, &args.title))
}

fn default_name(path: &Path) -> String {
    path.parent()
        .and_then(Path::file_name)
        .or_else(|| path.file_stem())
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// Per-label step counts of one agent, from the transcript.
#[derive(Debug, Default, Serialize)]
struct LabelUse {
    steps: usize,
    errors: usize,
    hints: usize,
}

#[derive(Deserialize)]
struct Row {
    agent: usize,
    kind: String,
    label: String,
}

fn label_use(path: &Path) -> Result<BTreeMap<usize, BTreeMap<String, LabelUse>>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out: BTreeMap<usize, BTreeMap<String, LabelUse>> = BTreeMap::new();
    for row in rdr.deserialize() {
        let row: Row = row.with_context(|| format!("parsing {}", path.display()))?;
        let u = out.entry(row.agent).or_default().entry(row.label).or_default();
        u.steps += 1;
        match row.kind.as_str() {
            "attempt-incorrect" => u.errors += 1,
            "hint" => u.hints += 1,
            _ => {}
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct Report<'a> {
    index: usize,
    skills: &'a [SkillExport],
    label_use: BTreeMap<String, LabelUse>,
}

fn inspect(args: InspectArgs) -> Result<()> {
    let state: AgentState = read_json(&args.agent_state)?;
    let mut usage = label_use(&args.transcript)?;
    let agents: Vec<&AgentSkills> = state
        .agents
        .iter()
        .filter(|a| args.agent.is_none_or(|i| i == a.index))
        .collect();
    if agents.is_empty() {
        bail!("no agent {} in {}", args.agent.unwrap_or(0), args.agent_state.display());
    }
    let mut reports = Vec::new();
    for a in agents {
        let Some(skills) = &a.skills else {
            bail!("{} agents keep no skills; nothing to inspect", state.agent);
        };
        reports.push(Report {
            index: a.index,
            skills,
            label_use: usage.remove(&a.index).unwrap_or_default(),
        });
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&reports)?);
        return Ok(());
    }
    println!("{} / {}", state.domain, state.agent);
    for r in &reports {
        println!();
        println!("agent {}: {} skills", r.index, r.skills.len());
        for s in r.skills {
            println!(
                "  {:<6} {:<14} {:<40} utility {:.2} ({}/{}), {} when rules, {} examples",
                s.id,
                s.label.as_deref().unwrap_or("-"),
                s.how,
                s.utility,
                s.positives,
                s.total,
                s.when_rules.len(),
                s.when_examples,
            );
        }
        if !r.label_use.is_empty() {
            println!("  transcript steps by tutor label (steps / wrong attempts / hint requests):");
            for (label, u) in &r.label_use {
                println!("    {:<14} {:>5} {:>5} {:>5}", label, u.steps, u.errors, u.hints);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Plot(a) => plot(a),
        Command::InspectSkills(a) => inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
