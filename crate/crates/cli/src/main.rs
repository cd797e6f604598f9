//! Command-line front end: compile specifications, monitor traces, run
//! adaptive / falsification / random campaigns, and re-render reports.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 validation
//! failure, 3 campaign finished without meeting its objective.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use speccov_core::automaton::DotAnnotations;
use speccov_core::coverage::CriterionKind;
use speccov_core::engine::{
    adaptive_testing, falsify_global, random_testing, transition_coverage_campaign,
    AdaptiveConfig, CampaignOutcome, CampaignReport, TargetPolicy,
};
use speccov_core::signal::{read_csv, write_csv, VarKind};
use speccov_core::stl::{parse_spec, robustness, verdict, IaStlSpec, Verdict};
use speccov_core::sut::{builtin, ExternalModel, SystemModel};
use speccov_core::util::fnv1a_hex;
use speccov_core::{compile, PsoConfig, SymbolicAutomaton};

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 1;
const EXIT_VALIDATION: i32 = 2;
const EXIT_UNMET: i32 = 3;

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn validation(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    fn unmet(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_UNMET,
            message: message.into(),
        }
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "speccov",
    about = "Adaptive specification-coverage testing for discrete-time systems"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a specification into a symbolic automaton
    Compile {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Evaluate robustness and verdict of a trace against a specification
    Monitor {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Check an automaton file for determinism, completeness and guard
    /// satisfiability
    Validate {
        #[arg(long)]
        automaton: PathBuf,
    },
    /// Run the adaptive coverage campaign
    Adaptive(CampaignArgs),
    /// Search for a specification-violating input sequence
    Falsify(CampaignArgs),
    /// Run the random-input baseline campaign
    Random(CampaignArgs),
    /// Re-render the annotated graph from a stored report
    Report {
        #[arg(long, value_name = "REPORT")]
        input: PathBuf,
        #[arg(long)]
        dot: PathBuf,
    },
    /// Solve the cooperative game for a target location and dump the
    /// strategy
    Strategy {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        automaton: Option<PathBuf>,
        /// Target location name (e.g. s4) or numeric id
        #[arg(long)]
        target: String,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct CampaignArgs {
    /// Specification file (compiled on the fly)
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Pre-compiled automaton file
    #[arg(long)]
    automaton: Option<PathBuf>,
    /// Run-config JSON; command-line flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in system name (s1, s2, leaky_integrator)
    #[arg(long)]
    sut: Option<String>,
    /// External system command line
    #[arg(long = "sut-cmd")]
    sut_cmd: Option<String>,
    /// Built-in system parameter, e.g. alpha=0.5
    #[arg(long = "sut-param")]
    sut_params: Vec<String>,
    /// Maximum number of simulations (omit for no cap)
    #[arg(long)]
    budget: Option<u64>,
    /// location or transition
    #[arg(long)]
    criterion: Option<String>,
    /// nearest-first, id-order or seeded-random
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    swarm: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Safety cap on generated trace length
    #[arg(long = "max-len")]
    max_len: Option<usize>,
    /// Keep transition prunings across targets
    #[arg(long = "carry-pruning")]
    carry_pruning: bool,
    /// Trace length for falsify/random modes
    #[arg(long)]
    len: Option<usize>,
    /// Report JSON output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Annotated DOT output path
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Per-simulation timeout for external systems (seconds)
    #[arg(long = "timeout-secs")]
    timeout_secs: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    spec: Option<PathBuf>,
    automaton: Option<PathBuf>,
    sut: Option<SutDescriptor>,
    budget: Option<u64>,
    criterion: Option<String>,
    policy: Option<String>,
    pso: Option<PsoBlock>,
    seed: Option<u64>,
    max_trace_len: Option<usize>,
    carry_pruning: Option<bool>,
    trace_len: Option<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SutDescriptor {
    Builtin {
        builtin: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    Command {
        command: Vec<String>,
        timeout_secs: Option<u64>,
    },
}

#[derive(Deserialize, Default)]
struct PsoBlock {
    swarm: Option<usize>,
    iters: Option<usize>,
    inertia: Option<f64>,
    cognitive: Option<f64>,
    social: Option<f64>,
    velocity_clamp: Option<f64>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Compile { spec, out, dot } => cmd_compile(&spec, &out, dot.as_deref()),
        Cmd::Monitor { spec, trace } => cmd_monitor(&spec, &trace),
        Cmd::Validate { automaton } => cmd_validate(&automaton),
        Cmd::Adaptive(args) => cmd_campaign(args, Mode::Adaptive),
        Cmd::Falsify(args) => cmd_campaign(args, Mode::Falsify),
        Cmd::Random(args) => cmd_campaign(args, Mode::Random),
        Cmd::Report { input, dot } => cmd_report(&input, &dot),
        Cmd::Strategy {
            spec,
            automaton,
            target,
            json,
            dot,
        } => cmd_strategy(
            spec.as_deref(),
            automaton.as_deref(),
            &target,
            json.as_deref(),
            dot.as_deref(),
        ),
    };
    match result {
        Ok(()) => std::process::exit(EXIT_OK),
        Err(f) => {
            eprintln!("error: {}", f.message);
            std::process::exit(f.code);
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, content: &str) -> Result<(), Failure> {
    fs::write(path, content)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn load_spec(path: &Path) -> Result<(IaStlSpec, String), Failure> {
    let text = read_file(path)?;
    let spec =
        parse_spec(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    Ok((spec, text))
}

fn cmd_compile(spec_path: &Path, out: &Path, dot: Option<&Path>) -> CmdResult {
    let (spec, text) = load_spec(spec_path)?;
    let mut aut = compile(&spec).map_err(|e| Failure::validation(e.to_string()))?;
    aut.spec_hash = Some(fnv1a_hex(text.as_bytes()));
    let report = aut
        .validate()
        .map_err(|e| Failure::validation(e.to_string()))?;
    if !report.ok() {
        return Err(Failure::validation(format!(
            "compiled automaton failed validation: {:?}",
            report.witnesses
        )));
    }
    write_file(out, &aut.to_json())?;
    if let Some(dot_path) = dot {
        write_file(dot_path, &aut.export_dot(None))?;
    }
    println!(
        "{} locations, {} transitions -> {}",
        aut.locations.len(),
        aut.transitions.len(),
        out.display()
    );
    Ok(())
}

fn cmd_monitor(spec_path: &Path, trace_path: &Path) -> CmdResult {
    let (spec, _) = load_spec(spec_path)?;
    let text = read_file(trace_path)?;
    let trace = read_csv(spec.variables.clone(), text.as_bytes())
        .map_err(|e| Failure::usage(format!("{}: {e}", trace_path.display())))?;
    if trace.is_empty() {
        return Err(Failure::usage("trace has no steps"));
    }
    let rho =
        robustness(&spec.formula, &trace, 0).map_err(|e| Failure::usage(e.to_string()))?;
    let v = verdict(&spec.formula, &trace).map_err(|e| Failure::usage(e.to_string()))?;
    println!("robustness(0) = {rho}");
    println!(
        "verdict: {}",
        match v {
            Verdict::Satisfied => "satisfied",
            Verdict::Violated => "violated",
        }
    );
    Ok(())
}

fn cmd_validate(path: &Path) -> CmdResult {
    let aut = SymbolicAutomaton::load(path).map_err(|e| Failure::validation(e.to_string()))?;
    let report = aut
        .validate()
        .map_err(|e| Failure::validation(e.to_string()))?;
    println!(
        "deterministic: {}, complete: {}, guards satisfiable: {}",
        report.deterministic, report.complete, report.all_guards_satisfiable
    );
    for w in &report.witnesses {
        println!("  witness: {w}");
    }
    if report.ok() {
        Ok(())
    } else {
        Err(Failure::validation("automaton failed validation"))
    }
}

enum Mode {
    Adaptive,
    Falsify,
    Random,
}

/// Flags override config-file fields, which override defaults.
struct Resolved {
    spec_path: Option<PathBuf>,
    automaton_path: Option<PathBuf>,
    sut: Option<SutDescriptor>,
    config: AdaptiveConfig,
    trace_len: usize,
    out: Option<PathBuf>,
    dot: Option<PathBuf>,
    timeout_secs: u64,
}

fn resolve(args: CampaignArgs) -> Result<Resolved, Failure> {
    let file: RunConfigFile = match &args.config {
        Some(path) => serde_json::from_str(&read_file(path)?)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?,
        None => RunConfigFile::default(),
    };

    let mut pso = PsoConfig::default();
    if let Some(block) = &file.pso {
        if let Some(v) = block.swarm {
            pso.swarm_size = v;
        }
        if let Some(v) = block.iters {
            pso.max_iterations = v;
        }
        if let Some(v) = block.inertia {
            pso.inertia = v;
        }
        if let Some(v) = block.cognitive {
            pso.cognitive = v;
        }
        if let Some(v) = block.social {
            pso.social = v;
        }
        if let Some(v) = block.velocity_clamp {
            pso.velocity_clamp = v;
        }
    }
    if let Some(v) = args.swarm {
        pso.swarm_size = v;
    }
    if let Some(v) = args.iters {
        pso.max_iterations = v;
    }

    let criterion = match args.criterion.as_deref().or(file.criterion.as_deref()) {
        None | Some("location") => CriterionKind::Location,
        Some("transition") => CriterionKind::Transition,
        Some(other) => {
            return Err(Failure::usage(format!(
                "unknown criterion `{other}` (location|transition)"
            )))
        }
    };
    let policy = match args.policy.as_deref().or(file.policy.as_deref()) {
        None | Some("nearest-first") => TargetPolicy::NearestFirst,
        Some("id-order") => TargetPolicy::IdOrder,
        Some("seeded-random") => TargetPolicy::SeededRandom,
        Some(other) => {
            return Err(Failure::usage(format!(
                "unknown policy `{other}` (nearest-first|id-order|seeded-random)"
            )))
        }
    };

    let seed = args.seed.or(file.seed).unwrap_or(0);
    pso.seed = seed;
    let config = AdaptiveConfig {
        budget: args.budget.or(file.budget),
        criterion,
        policy,
        pso,
        seed,
        max_trace_len: args.max_len.or(file.max_trace_len).unwrap_or(50),
        carry_pruning: args.carry_pruning || file.carry_pruning.unwrap_or(false),
        target_filter: None,
    };

    let sut = if let Some(name) = args.sut {
        let mut params = BTreeMap::new();
        for p in &args.sut_params {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("bad --sut-param `{p}`")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Failure::usage(format!("bad --sut-param value `{p}`")))?;
            params.insert(k.to_string(), v);
        }
        Some(SutDescriptor::Builtin {
            builtin: name,
            params,
        })
    } else if let Some(cmd) = args.sut_cmd {
        let command: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
        if command.is_empty() {
            return Err(Failure::usage("empty --sut-cmd"));
        }
        Some(SutDescriptor::Command {
            command,
            timeout_secs: args.timeout_secs,
        })
    } else {
        file.sut
    };

    let timeout_secs = args
        .timeout_secs
        .or(match &sut {
            Some(SutDescriptor::Command { timeout_secs, .. }) => *timeout_secs,
            _ => None,
        })
        .unwrap_or(10);

    Ok(Resolved {
        spec_path: args.spec.or(file.spec),
        automaton_path: args.automaton.or(file.automaton),
        sut,
        config,
        trace_len: args.len.or(file.trace_len).unwrap_or(3),
        out: args.out,
        dot: args.dot,
        timeout_secs,
    })
}

fn build_model(
    descriptor: Option<SutDescriptor>,
    aut: &SymbolicAutomaton,
    timeout_secs: u64,
) -> Result<Box<dyn SystemModel>, Failure> {
    match descriptor {
        Some(SutDescriptor::Builtin {
            builtin: name,
            params,
        }) => builtin(&name, &params).map_err(|e| Failure::usage(e.to_string())),
        Some(SutDescriptor::Command { command, .. }) => {
            let inputs = Arc::new(aut.variables.restrict_kind(VarKind::Input));
            let outputs = Arc::new(aut.variables.restrict_kind(VarKind::Output));
            Ok(Box::new(ExternalModel::new(
                command,
                inputs,
                outputs,
                Duration::from_secs(timeout_secs),
            )))
        }
        None => Err(Failure::usage("no system given (--sut or --sut-cmd)")),
    }
}

fn load_automaton(resolved: &Resolved) -> Result<SymbolicAutomaton, Failure> {
    if let Some(path) = &resolved.automaton_path {
        let aut =
            SymbolicAutomaton::load(path).map_err(|e| Failure::validation(e.to_string()))?;
        let report = aut
            .validate()
            .map_err(|e| Failure::validation(e.to_string()))?;
        if !report.ok() {
            return Err(Failure::validation(format!(
                "automaton failed validation: {:?}",
                report.witnesses
            )));
        }
        return Ok(aut);
    }
    if let Some(path) = &resolved.spec_path {
        let (spec, text) = load_spec(path)?;
        let mut aut = compile(&spec).map_err(|e| Failure::validation(e.to_string()))?;
        aut.spec_hash = Some(fnv1a_hex(text.as_bytes()));
        return Ok(aut);
    }
    Err(Failure::usage("no specification (--spec or --automaton)"))
}

fn annotations(report: &CampaignReport) -> DotAnnotations {
    let mut ann = DotAnnotations::default();
    for block in [&report.coverage, &report.secondary] {
        match block.criterion {
            CriterionKind::Location => ann.location_visits = block.counts.clone(),
            CriterionKind::Transition => ann.transition_visits = block.counts.clone(),
        }
    }
    ann
}

fn emit_outputs(outcome: &CampaignOutcome, resolved: &Resolved) -> CmdResult {
    if let Some(out) = &resolved.out {
        let json = serde_json::to_string_pretty(&outcome.report)
            .map_err(|e| Failure::usage(e.to_string()))?;
        write_file(out, &json)?;
    }
    if let Some(dot) = &resolved.dot {
        let aut = SymbolicAutomaton::from_json(&outcome.report.automaton.to_string())
            .map_err(|e| Failure::usage(e.to_string()))?;
        write_file(dot, &aut.export_dot(Some(&annotations(&outcome.report))))?;
    }
    Ok(())
}

fn print_summary(report: &CampaignReport) {
    let kind = match report.coverage.criterion {
        CriterionKind::Location => "location",
        CriterionKind::Transition => "transition",
    };
    println!(
        "{kind} coverage: {}% ({}/{}) - {} simulations in {:.1}s",
        report.coverage.percent,
        report.coverage.satisfied.len(),
        report.coverage.total,
        report.simulations,
        report.wall_secs
    );
}

fn cmd_campaign(args: CampaignArgs, mode: Mode) -> CmdResult {
    let mut resolved = resolve(args)?;
    let sut = resolved.sut.take();
    match mode {
        Mode::Adaptive => {
            let aut = load_automaton(&resolved)?;
            let mut model = build_model(sut, &aut, resolved.timeout_secs)?;
            let outcome = match resolved.config.criterion {
                CriterionKind::Location => {
                    adaptive_testing(&aut, model.as_mut(), &resolved.config)
                }
                CriterionKind::Transition => {
                    transition_coverage_campaign(&aut, model.as_mut(), &resolved.config)
                }
            }
            .map_err(|e| Failure::usage(e.to_string()))?;
            emit_outputs(&outcome, &resolved)?;
            print_summary(&outcome.report);
            Ok(())
        }
        Mode::Falsify => {
            let Some(spec_path) = resolved.spec_path.clone() else {
                return Err(Failure::usage("falsify requires --spec"));
            };
            let (spec, _) = load_spec(&spec_path)?;
            let aut = load_automaton(&resolved)?;
            let mut model = build_model(sut, &aut, resolved.timeout_secs)?;
            let out = falsify_global(
                &spec,
                model.as_mut(),
                resolved.config.budget,
                &resolved.config.pso,
                resolved.trace_len,
            )
            .map_err(|e| Failure::usage(e.to_string()))?;
            println!(
                "best robustness {} after {} simulations in {:.1}s",
                out.best_robustness, out.simulations, out.wall_secs
            );
            match &out.witness {
                Some((inputs, _)) => {
                    let mut csv = Vec::new();
                    write_csv(inputs, &mut csv).map_err(|e| Failure::usage(e.to_string()))?;
                    let csv = String::from_utf8_lossy(&csv);
                    print!("{csv}");
                    if let Some(path) = &resolved.out {
                        write_file(path, &csv)?;
                    }
                    Ok(())
                }
                None => Err(Failure::unmet("no violating input sequence found")),
            }
        }
        Mode::Random => {
            let aut = load_automaton(&resolved)?;
            let mut model = build_model(sut, &aut, resolved.timeout_secs)?;
            let outcome =
                random_testing(&aut, model.as_mut(), &resolved.config, resolved.trace_len)
                    .map_err(|e| Failure::usage(e.to_string()))?;
            emit_outputs(&outcome, &resolved)?;
            print_summary(&outcome.report);
            Ok(())
        }
    }
}

fn cmd_strategy(
    spec: Option<&Path>,
    automaton: Option<&Path>,
    target: &str,
    json: Option<&Path>,
    dot: Option<&Path>,
) -> CmdResult {
    let aut = if let Some(path) = automaton {
        SymbolicAutomaton::load(path).map_err(|e| Failure::validation(e.to_string()))?
    } else if let Some(path) = spec {
        let (spec, text) = load_spec(path)?;
        let mut aut = compile(&spec).map_err(|e| Failure::validation(e.to_string()))?;
        aut.spec_hash = Some(fnv1a_hex(text.as_bytes()));
        aut
    } else {
        return Err(Failure::usage("no specification (--spec or --automaton)"));
    };
    let target_id = aut
        .locations
        .iter()
        .find(|l| l.name == target)
        .map(|l| l.id)
        .or_else(|| target.parse::<usize>().ok().filter(|&id| id < aut.locations.len()))
        .ok_or_else(|| Failure::usage(format!("unknown location `{target}`")))?;
    let game = speccov_core::game::Game::new(&aut, [target_id].into())
        .map_err(|e| Failure::usage(e.to_string()))?;
    let strat = speccov_core::game::build_strategy(&game)
        .map_err(|e| Failure::usage(e.to_string()))?;
    let Some(strat) = strat else {
        return Err(Failure::unmet(format!(
            "no cooperative strategy: the initial location cannot reach `{target}`"
        )));
    };
    if let Some(path) = json {
        write_file(path, &strat.to_json(&aut))?;
    }
    if let Some(path) = dot {
        write_file(path, &strat.export_dot(&aut))?;
    }
    let coop = strat
        .class
        .values()
        .filter(|c| matches!(c, speccov_core::game::LocClass::Coop))
        .count();
    println!(
        "strategy over {} locations ({} cooperative), {} edges",
        strat.rank.len(),
        coop,
        strat.edges.len()
    );
    Ok(())
}

fn cmd_report(input: &Path, dot: &Path) -> CmdResult {
    let text = read_file(input)?;
    let report: CampaignReport =
        serde_json::from_str(&text).map_err(|e| Failure::usage(e.to_string()))?;
    let aut = SymbolicAutomaton::from_json(&report.automaton.to_string())
        .map_err(|e| Failure::validation(e.to_string()))?;
    if aut.content_hash() != report.automaton_hash {
        return Err(Failure::validation(format!(
            "report hash {} does not match the embedded automaton ({})",
            report.automaton_hash,
            aut.content_hash()
        )));
    }
    write_file(dot, &aut.export_dot(Some(&annotations(&report))))?;
    println!("wrote {}", dot.display());
    Ok(())
}
