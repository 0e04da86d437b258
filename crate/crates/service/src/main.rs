use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use cranial_service::project::{save_project, Stage, PROJECT_FILE};
use cranial_service::stages::Workspace;
use cranial_service::synth::{default_shell, synthetic_shell_project};
use cranial_service::{api, Verdict};

#[derive(Parser)]
#[command(name = "cranial", about = "Cranial implant design pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct StageArgs {
    /// Path to project.json
    project: PathBuf,
    /// Copy the stage's main output here after running
    #[arg(long)]
    export: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    Segment(StageArgs),
    Mirror(StageArgs),
    Clip(StageArgs),
    Fit(StageArgs),
    /// Initial and final implant
    Implant(StageArgs),
    Evaluate(StageArgs),
    RunAll(StageArgs),
    /// Serve the HTTP API over a directory of projects
    Serve {
        #[arg(long, default_value = ".")]
        root: PathBuf,
        /// Defaults to CRANIAL_PORT, then 8080
        #[arg(long)]
        port: Option<u16>,
    },
    /// Write the synthetic shell-with-hole project into a directory
    SynthShell {
        dir: PathBuf,
        #[arg(long, default_value = "synthetic_shell")]
        id: String,
    },
}

fn export(ws: &Workspace, stage: Stage, to: &Path) -> Result<()> {
    let role = if stage == Stage::Evaluate { "report" } else { "mesh" };
    let from = ws.stage_file(stage, role).context("stage has no output")?;
    std::fs::copy(&from, to).with_context(|| format!("copying {} to {}", from.display(), to.display()))?;
    Ok(())
}

fn run(args: &StageArgs, stages: &[Stage]) -> Result<ExitCode> {
    let mut ws = Workspace::open(&args.project)?;
    if stages.len() == Stage::ALL.len() {
        ws.run_all()?;
    } else {
        for &s in stages {
            ws.run_stage(s)?;
        }
    }
    let last = *stages.last().expect("at least one stage");
    for s in stages {
        let rec = &ws.project.stage_outputs[s];
        eprintln!("{s}: {}", rec.files.values().cloned().collect::<Vec<_>>().join(", "));
    }
    if let Some(to) = &args.export {
        export(&ws, last, to)?;
    }
    if last == Stage::Evaluate {
        let data = &ws.project.stage_outputs[&Stage::Evaluate].data;
        println!("{}", serde_json::to_string_pretty(data)?);
        let verdict: Verdict = serde_json::from_value(data["verdict"].clone())?;
        if verdict == Verdict::Fail {
            return Ok(ExitCode::from(1));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Segment(a) => run(&a, &[Stage::Segment]),
        Command::Mirror(a) => run(&a, &[Stage::Mirror]),
        Command::Clip(a) => run(&a, &[Stage::Clip]),
        Command::Fit(a) => run(&a, &[Stage::Fit]),
        Command::Implant(a) => run(&a, &[Stage::Initial, Stage::Final]),
        Command::Evaluate(a) => run(&a, &[Stage::Evaluate]),
        Command::RunAll(a) => run(&a, &Stage::ALL),
        Command::Serve { root, port } => {
            let port = port.unwrap_or_else(api::port_from_env);
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("serving {} on port {port}", root.display());
            rt.block_on(api::serve(root, port))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::SynthShell { dir, id } => {
            let path = dir.join(PROJECT_FILE);
            save_project(&path, &synthetic_shell_project(&id, default_shell()))?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
