use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_yaml::Value;
use twinsim::bridge::{BridgeConfig, BridgeServer};
use twinsim::harness::{
    export_results, load_scenario_value, run_case_with, set_path, sweep_to_dir, CaseId, CaseRun, RunOptions, Scenario,
    TeleopTrace,
};

#[derive(Parser)]
#[command(name = "twinsim", version, about = "Simulation-twin robot control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and export its results.
    Run(RunArgs),
    /// Run a scenario once per value of one parameter.
    Sweep(SweepArgs),
    /// Replay a recorded teleoperation trace as a manual-teleoperation run.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario YAML file, or the name of a bundled scenario.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    #[arg(long, value_parser = parse_case)]
    case_override: Option<CaseId>,
    /// Teleoperation trace (CSV t,v,omega) driving an MT run.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Serve live state on this port while running.
    #[arg(long)]
    serve: Option<u16>,
    /// With --serve, run as fast as possible instead of in real time.
    #[arg(long)]
    no_pacing: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    /// Dotted scenario path, e.g. net.cmd_vel.base_delay.
    #[arg(long)]
    param: String,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    #[arg(long)]
    trace: PathBuf,
}

fn parse_case(s: &str) -> Result<CaseId, String> {
    s.parse()
}

fn scenario_doc(args: &ScenarioArgs) -> Result<Value, String> {
    let mut doc = if Path::new(&args.scenario).exists() {
        load_scenario_value(Path::new(&args.scenario)).map_err(|e| e.to_string())?
    } else {
        let src = Scenario::bundled_source(&args.scenario).map_err(|e| format!("{e} (and no such file)"))?;
        serde_yaml::from_str(src).map_err(|e| e.to_string())?
    };
    if let Some(seed) = args.seed {
        set_path(&mut doc, "seed", Value::from(seed)).map_err(|e| e.to_string())?;
    }
    Ok(doc)
}

fn summarize(run: &CaseRun, out: &Path) {
    let r = &run.report;
    let reached = r.goals.iter().filter(|g| g.success).count();
    println!(
        "{} seed {}: {}/{} goals, mean goal error {:.3} m, tracking {}, collisions {}, {:.1} s -> {}",
        r.case_id,
        r.seed,
        reached,
        r.goals.len(),
        r.mean_goal_error(),
        r.mean_tracking_error.map_or("n/a".to_string(), |e| format!("{e:.3} m")),
        r.collision_count,
        r.duration,
        out.display()
    );
}

fn run(args: RunArgs) -> Result<(), String> {
    let mut doc = scenario_doc(&args.common)?;
    if let Some(case) = args.case_override {
        set_path(&mut doc, "case_id", Value::from(case.to_string())).map_err(|e| e.to_string())?;
    }
    let scenario = Scenario::from_value(doc).map_err(|e| e.to_string())?;
    let trace = args.trace.as_deref().map(TeleopTrace::load).transpose().map_err(|e| e.to_string())?;
    let (run, server) = if let Some(port) = args.serve {
        let config = BridgeConfig { port, realtime: !args.no_pacing, ..BridgeConfig::default() };
        let server = BridgeServer::start(config, scenario.case_id, scenario.dwa.v_max, scenario.dwa.omega_max)
            .map_err(|e| format!("cannot serve on port {port}: {e}"))?;
        eprintln!("serving live state on {}", server.url());
        let mut obs = server.observer();
        let run = run_case_with(&scenario, RunOptions { trace, observer: Some(&mut obs) }).map_err(|e| e.to_string())?;
        if scenario.case_id == CaseId::MT {
            std::fs::create_dir_all(&args.common.out).map_err(|e| e.to_string())?;
            obs.record_trace(&args.common.out.join("trace.csv")).map_err(|e| e.to_string())?;
        }
        (run, Some(server))
    } else {
        (run_case_with(&scenario, RunOptions { trace, observer: None }).map_err(|e| e.to_string())?, None)
    };
    export_results(&run, &args.common.out).map_err(|e| e.to_string())?;
    summarize(&run, &args.common.out);
    if let Some(s) = server {
        s.shutdown();
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), String> {
    let doc = scenario_doc(&args.common)?;
    let points = sweep_to_dir(&doc, &args.param, &args.values, &args.common.out).map_err(|e| e.to_string())?;
    for p in &points {
        println!(
            "{}={}: tracking {}, mean goal error {:.3} m, collisions {}",
            args.param,
            p.value,
            p.report.mean_tracking_error.map_or("n/a".to_string(), |e| format!("{e:.4} m")),
            p.report.mean_goal_error(),
            p.report.collision_count
        );
    }
    println!("wrote {}", args.common.out.join("sweep.csv").display());
    Ok(())
}

fn replay(args: ReplayArgs) -> Result<(), String> {
    let mut doc = scenario_doc(&args.common)?;
    set_path(&mut doc, "case_id", Value::from("MT")).map_err(|e| e.to_string())?;
    let scenario = Scenario::from_value(doc).map_err(|e| e.to_string())?;
    let trace = TeleopTrace::load(&args.trace).map_err(|e| e.to_string())?;
    let run = run_case_with(&scenario, RunOptions { trace: Some(trace), observer: None }).map_err(|e| e.to_string())?;
    export_results(&run, &args.common.out).map_err(|e| e.to_string())?;
    summarize(&run, &args.common.out);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Replay(a) => replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
