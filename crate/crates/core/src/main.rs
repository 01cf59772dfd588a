//! Command-line front end: each subcommand drives one experiment, writes its
//! CSV artifacts under --out, prints the verdicts, and exits nonzero if any
//! verdict failed.

use clap::{Parser, Subcommand};
use fnss::config::Config;
use fnss::energy::{energy_et, write_energy_csv};
use fnss::experiments::{
    run_contraction, run_eps_refinement, run_lemmas, run_linear_check, run_manufactured,
    run_smalldata, run_smalldata_ensemble, write_summary_csv, ExperimentReport, ScenarioParams,
};
use fnss::integrator::{integrate, Termination};
use fnss::lp::build_frame;
use fnss::random::gen_initial;
use fnss::snapshot::{write_snapshot, SnapshotMeta};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fnss", about = "Pseudo-spectral laboratory for a compressible heat-conducting flow model", version)]
struct Cli {
    /// Configuration file (`key = value` lines); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV reports and snapshots.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one seeded random-data run and write its energy series.
    Run {
        /// Which states to store: none, final, or all saved rows.
        #[arg(long, default_value = "none")]
        snapshots: String,
    },
    /// Small-data boundedness study with the ensemble constant fit.
    Smalldata,
    /// Cauchy study under halving of the frequency-cutoff parameter.
    EpsRefine,
    /// Twin-run separation against the Gronwall envelope.
    Contraction,
    /// Single-mode dynamics against the matrix-exponential oracle.
    LinearCheck,
    /// Forced-run temporal and spatial convergence orders.
    Manufactured,
    /// Measured constants of the dyadic-analysis toolbox.
    Lemmas,
}

fn load_params(config: &Option<PathBuf>) -> fnss::Result<ScenarioParams> {
    let cfg = match config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    ScenarioParams::from_config(&cfg)
}

fn run_single(params: &ScenarioParams, out: Option<&Path>, snapshots: &str) -> fnss::Result<ExperimentReport> {
    let mut report = ExperimentReport::new("run");
    let frame = build_frame(params.grid);
    let config = params.solver_config()?;
    let initial =
        gen_initial(params.grid, params.s, &frame, params.eta, &params.shape, params.seed)?;

    let mut saved = 0usize;
    let record = integrate(&config, &initial, &frame, |st, _| {
        if snapshots == "all" {
            if let Some(dir) = out {
                let path = dir.join(format!("run-seed{}-t{:.4}.fnss", params.seed, st.t));
                let meta = SnapshotMeta { s: params.s, eps: params.eps, t: st.t };
                if write_snapshot(&st.rho, &meta, &path).is_ok() {
                    saved += 1;
                }
            }
        }
    })?;
    let completed = record.termination == Termination::Completed;
    report.verdict(
        "run-completed",
        completed,
        match &record.termination {
            Termination::Completed => "completed".into(),
            other => format!("{other:?}"),
        },
    );
    if let Some(dir) = out {
        let energy = energy_et(&record)?;
        let csv = dir.join(format!("run-seed{}.energy.csv", params.seed));
        write_energy_csv(&energy, &csv)?;
        report.artifacts.push(csv);
        if snapshots == "final" || snapshots == "all" {
            let path = dir.join(format!("run-seed{}.final.fnss", params.seed));
            let meta = SnapshotMeta { s: params.s, eps: params.eps, t: record.final_state.t };
            write_snapshot(&record.final_state.rho, &meta, &path)?;
            report.artifacts.push(path);
        }
    }
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(pass) => {
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: &Cli) -> fnss::Result<bool> {
    let params = load_params(&cli.config)?;
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
    }
    let out = cli.out.as_deref();

    let reports: Vec<ExperimentReport> = match &cli.command {
        Command::Run { snapshots } => vec![run_single(&params, out, snapshots)?],
        Command::Smalldata => {
            vec![
                run_smalldata(&params, out)?,
                run_smalldata_ensemble(&params, params.ensemble_size)?,
            ]
        }
        Command::EpsRefine => vec![run_eps_refinement(&params)?],
        Command::Contraction => vec![run_contraction(&params)?],
        Command::LinearCheck => vec![run_linear_check(&params)?],
        Command::Manufactured => vec![run_manufactured(&params)?],
        Command::Lemmas => vec![run_lemmas(&params, out)?],
    };

    for r in &reports {
        for v in &r.verdicts {
            println!("[{}] {} — {}", if v.passed { "pass" } else { "FAIL" }, v.criterion, v.detail);
        }
    }
    if let Some(dir) = out {
        let path = dir.join("summary.csv");
        write_summary_csv(&reports, &path)?;
        println!("summary written to {}", path.display());
    }
    Ok(reports.iter().all(|r| r.passed()))
}
