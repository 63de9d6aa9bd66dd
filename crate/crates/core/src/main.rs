use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qram_repair::analytics::stats_row;
use qram_repair::flags::{basis_reduction, flag_qubit_minimization, Assigner, AssignerKind};
use qram_repair::harness::{
    emit_results, last_layer_lists, run_monte_carlo_with, write_csv, write_json, Algorithm,
    ExperimentConfig, OutputFormat, OutputSpec,
};
use qram_repair::iterative::{iterative_repair, RepairOutcome};
use qram_repair::oracle::verify_outcome;
use qram_repair::relabel::{best_relabel, relabel_repair};
use qram_repair::{QramTree, Result};

#[derive(Parser)]
#[command(name = "qram-repair", version, about = "Fault injection and repair for binary-tree QRAM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RepairAlgo {
    Relabel,
    Iterative,
    /// Flag minimization on the last layer only.
    Flagmin,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random tree and print it as JSON.
    Gen {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Let the top three routers fail too.
        #[arg(long)]
        unprotected: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic faulty-address statistics with a healthy top.
    Stats {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
    },
    /// Repair a tree read from a JSON file.
    Repair {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, value_enum, default_value = "iterative")]
        algo: RepairAlgo,
        /// Relabel depth; defaults to the largest feasible one.
        #[arg(long)]
        m: Option<u32>,
        #[arg(long, value_enum, default_value = "flagmin")]
        assigner: AssignerKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo sweep.
    Mc {
        /// JSON config; command-line flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        n: Vec<u32>,
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, value_delimiter = ',')]
        algos: Vec<Algorithm>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
    /// Check an iterative repair outcome against a tree.
    Verify {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        outcome: PathBuf,
    },
}

fn write_output(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read_tree(path: &PathBuf) -> Result<QramTree> {
    QramTree::from_json(&fs::read_to_string(path)?)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen {
            n,
            eps,
            seed,
            unprotected,
            out,
        } => {
            let tree = QramTree::generate(n, eps, seed, !unprotected)?;
            write_output(out.as_ref(), &(tree.to_json()? + "\n"))?;
        }
        Command::Stats { n, eps, format } => {
            let mut rows = Vec::new();
            for &n in &n {
                for &e in &eps {
                    rows.push(stats_row(n, e)?);
                }
            }
            match format {
                OutputFormat::Json => {
                    println!("{}", serde_json::to_string_pretty(&rows)?);
                }
                OutputFormat::Csv => {
                    let mut w = csv::Writer::from_writer(io::stdout());
                    for row in &rows {
                        w.serialize(row)?;
                    }
                    w.flush()?;
                }
            }
        }
        Command::Repair {
            tree,
            algo,
            m,
            assigner,
            out,
        } => {
            let tree = read_tree(&tree)?;
            let text = match algo {
                RepairAlgo::Relabel => {
                    let plan = match m {
                        Some(m) => relabel_repair(&tree, m)?,
                        None => best_relabel(&tree)
                            .ok_or(qram_repair::Error::RelabelFailure { m: 2 })?,
                    };
                    serde_json::to_string_pretty(&plan)?
                }
                RepairAlgo::Iterative => {
                    serde_json::to_string_pretty(&iterative_repair(&tree, &assigner)?)?
                }
                RepairAlgo::Flagmin => {
                    let (faulty, available) = last_layer_lists(&tree);
                    let res = match assigner {
                        AssignerKind::Flagmin => flag_qubit_minimization(tree.depth(), &faulty, &available)?,
                        AssignerKind::FlagminReduced => {
                            basis_reduction(&flag_qubit_minimization(tree.depth(), &faulty, &available)?)
                        }
                        AssignerKind::Mask => assigner.assign(tree.depth(), &faulty, &available)?,
                    };
                    serde_json::to_string_pretty(&serde_json::json!({
                        "pairs": res.assignment.iter().map(|(f, a)| serde_json::json!({
                            "from": f,
                            "to": a,
                            "pattern": qram_repair::gf2::BitFlipPattern::between(*f, *a),
                        })).collect::<Vec<_>>(),
                        "generating_set": res.generating_set,
                        "flag_count": res.flag_count,
                    }))?
                }
            };
            write_output(out.as_ref(), &(text + "\n"))?;
        }
        Command::Mc {
            config,
            n,
            eps,
            shots,
            seed,
            algos,
            workers,
            out,
            format,
        } => {
            let mut c = match config {
                Some(p) => ExperimentConfig::from_json(&fs::read_to_string(p)?)?,
                None => ExperimentConfig::new(Vec::new(), Vec::new(), 1000, 0, vec![Algorithm::Stats]),
            };
            if !n.is_empty() {
                c.n_values = n;
            }
            if !eps.is_empty() {
                c.epsilons = eps;
            }
            if let Some(s) = shots {
                c.shots = s;
            }
            if let Some(s) = seed {
                c.master_seed = s;
            }
            if !algos.is_empty() {
                c.algorithms = algos;
            }
            if let Some(w) = workers {
                c.workers = w;
            }
            if let Some(path) = out {
                c.output = Some(OutputSpec {
                    path,
                    format: format.unwrap_or_default(),
                });
            } else if let (Some(f), Some(o)) = (format, c.output.as_mut()) {
                o.format = f;
            }
            let result = run_monte_carlo_with(&c, |p, _| {
                eprintln!("n={} eps={} done ({} shots)", p.n, p.epsilon, p.shots);
            })?;
            match &c.output {
                Some(o) => emit_results(&result, &o.path, o.format)?,
                None => match format.unwrap_or_default() {
                    OutputFormat::Csv => write_csv(&result, io::stdout())?,
                    OutputFormat::Json => write_json(&result, io::stdout())?,
                },
            }
        }
        Command::Verify { tree, outcome } => {
            let tree = read_tree(&tree)?;
            let outcome: RepairOutcome = serde_json::from_str(&fs::read_to_string(outcome)?)?;
            let report = verify_outcome(&tree, &outcome);
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.all_ok() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
