use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use htl_edge::experiment::{compare, list_presets, read_summary, run_experiment, ExperimentConfig};
use htl_edge::Result;

#[derive(Parser)]
#[command(name = "htl-edge", version, about = "Energy-aware HTL at the network edge: simulator and experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated experiment and write windows.csv and summary.json.
    Run {
        /// TOML configuration with dotted keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Preset applied before the configuration file.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<usize>,
        /// Write messages_r{r}.csv for every replication.
        #[arg(long)]
        emit_messages: bool,
        /// Summary of a reference run to report gains against.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the names of the built-in presets.
    ListPresets,
    /// Energy gain and accuracy loss of summary B relative to summary A.
    Compare { a: PathBuf, b: PathBuf },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            preset,
            seed,
            replications,
            emit_messages,
            baseline,
            out,
        } => {
            let mut cfg = ExperimentConfig::default();
            if let Some(p) = &preset {
                cfg.apply_preset(p)?;
            }
            if let Some(path) = &config {
                cfg.apply_file(path)?;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = replications {
                cfg.replications = r;
            }
            cfg.emit_messages |= emit_messages;
            if baseline.is_some() {
                cfg.baseline = baseline;
            }
            cfg.output_dir = Some(out.clone());
            let result = run_experiment(&cfg)?;
            let s = &result.summary;
            match s.convergence_f1 {
                Some(f1) => println!("convergence F1 {f1:.4}"),
                None => println!("final F1 {:.4}", s.final_f1),
            }
            println!(
                "total {:.1} mJ (collection {:.1}, learning {:.1})",
                s.total_mj, s.collection_mj, s.learning_mj
            );
            if let Some(g) = s.gain_vs_baseline_pct {
                println!("gain vs baseline {g:.1}%");
            }
            println!("wrote {}", out.display());
        }
        Command::ListPresets => {
            for name in list_presets() {
                println!("{name}");
            }
        }
        Command::Compare { a, b } => {
            let report = compare(&read_summary(&a)?, &read_summary(&b)?);
            println!("energy A {:.1} mJ, energy B {:.1} mJ", report.energy_a_mj, report.energy_b_mj);
            println!("gain {:.1}%", report.gain_pct);
            match report.accuracy_loss_pp {
                Some(pp) => println!("accuracy loss {pp:.2} pp"),
                None => println!("accuracy loss n/a"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
