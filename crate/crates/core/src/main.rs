use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use multiphase_mbo::config::parse_config;
use multiphase_mbo::experiments::{run_experiment, ExperimentOptions, EXPERIMENT_NAMES};
use multiphase_mbo::io::{read_labels, write_probes};
use multiphase_mbo::kernel::{compute_coefficients, suggest_scales, validate, MaterialSpec};
use multiphase_mbo::oracle::run_suite;
use multiphase_mbo::probes::{disk_radius, interface_length, junction_angles, ProbeRecord, JUNCTION_WINDOW};
use multiphase_mbo::runner::execute;
use multiphase_mbo::{Error, Result};

/// Multiphase mean curvature flow by two-Gaussian thresholding.
#[derive(Parser, Debug)]
#[command(name = "mbo", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for data-parallel work.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// RNG seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the configured simulation and write its artifacts.
    Run,
    /// Check the material and kernel scales; from --config or a uniform material.
    Validate {
        /// Phase count of a uniform material.
        #[arg(long)]
        phases: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Exhaustively verify thresholding against the minimizing movement.
    Oracle {
        #[arg(long, default_value_t = 100)]
        cases: usize,
        /// Grid shape such as 3x3.
        #[arg(long, default_value = "3x3")]
        grid: String,
        #[arg(long, default_value_t = 2)]
        phases: usize,
    },
    /// Measure radii, interface lengths and junctions of a label snapshot.
    Probe {
        snapshot: PathBuf,
        #[arg(long, default_value_t = JUNCTION_WINDOW)]
        window: usize,
    },
    /// Run a named acceptance experiment.
    Experiment {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(EXPERIMENT_NAMES))]
        name: String,
        /// Time step replacing the stored one.
        #[arg(long)]
        h: Option<f64>,
    },
}

enum Outcome {
    Pass,
    Fail,
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.render().to_string();
            eprint!("{text}");
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error kind=usage: {}", single_line(first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error kind={}: {}", e.kind(), single_line(&e.to_string()));
            let usage = matches!(e, Error::ConfigParse { .. } | Error::ConfigField { .. });
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::ConfigField {
                path: "--threads".into(),
                message: e.to_string(),
            })?;
    }
    match cli.command {
        Command::Run => {
            let path = cli.config.as_deref().ok_or_else(|| missing("--config", "run needs a configuration"))?;
            let mut cfg = parse_config(&fs::read_to_string(path)?)?;
            if let Some(seed) = cli.seed {
                cfg.override_seed(seed);
            }
            if let Some(out) = cli.out {
                cfg.set_output_dir(out);
            }
            let s = execute(&cfg)?;
            for w in &s.warnings {
                println!("warning: {w}");
            }
            println!(
                "steps={} E_h_initial={:.6} E_h_final={:.6} ledger_violations={} worst_ledger_excess={:.3e} probes={} dir={}",
                s.steps,
                s.initial_energy,
                s.final_energy,
                s.monitor.ledger_violations,
                s.monitor.worst_ledger,
                s.probes,
                s.dir.display()
            );
            Ok(if s.monitor.ledger_violations == 0 && s.monitor.partition_violations == 0 {
                Outcome::Pass
            } else {
                Outcome::Fail
            })
        }
        Command::Validate {
            phases,
            sigma,
            mu,
            gamma,
            beta,
        } => {
            let (spec, coeffs) = match (phases, cli.config.as_deref()) {
                (Some(n), _) => {
                    let spec = MaterialSpec::uniform(n, sigma, mu)?;
                    let (g, b) = match (gamma, beta) {
                        (Some(g), Some(b)) => (g, b),
                        (None, None) => suggest_scales(&spec)?,
                        _ => return Err(missing("--gamma", "give both --gamma and --beta or neither")),
                    };
                    let coeffs = compute_coefficients(&spec, g, b)?;
                    (spec, coeffs)
                }
                (None, Some(path)) => {
                    let cfg = parse_config(&fs::read_to_string(path)?)?;
                    (cfg.material, cfg.coeffs)
                }
                (None, None) => return Err(missing("--phases", "validate needs --config or --phases")),
            };
            let report = validate(&spec, &coeffs);
            println!("gamma={} beta={}", coeffs.gamma, coeffs.beta);
            println!("{report}");
            let pass = report.all_pass();
            println!("{}", if pass { "PASS validation" } else { "FAIL validation" });
            Ok(if pass { Outcome::Pass } else { Outcome::Fail })
        }
        Command::Oracle { cases, grid, phases } => {
            let sizes = parse_grid(&grid)?;
            let (summary, _) = run_suite(cases, &sizes, phases, cli.seed.unwrap_or(0))?;
            println!("{summary}");
            Ok(if summary.failures == 0 {
                Outcome::Pass
            } else {
                Outcome::Fail
            })
        }
        Command::Probe { snapshot, window } => {
            let records = probe(&snapshot, window)?;
            if let Some(out) = cli.out {
                fs::create_dir_all(&out)?;
                write_probes(&out.join("probes.csv"), &records)?;
            }
            Ok(Outcome::Pass)
        }
        Command::Experiment { name, h } => {
            let opts = ExperimentOptions {
                h,
                seed: cli.seed.unwrap_or(0),
            };
            let report = run_experiment(&name, &opts)?;
            for c in &report.checks {
                println!("{c}");
            }
            if let Some(out) = cli.out {
                fs::create_dir_all(&out)?;
                write_probes(&out.join("probes.csv"), &report.probes)?;
            }
            let pass = report.passed();
            println!(
                "{} experiment {} time={:.1}s",
                if pass { "PASS" } else { "FAIL" },
                report.name,
                report.elapsed.as_secs_f64()
            );
            Ok(if pass { Outcome::Pass } else { Outcome::Fail })
        }
    }
}

fn missing(path: &str, message: &str) -> Error {
    Error::ConfigField {
        path: path.into(),
        message: message.into(),
    }
}

fn parse_grid(text: &str) -> Result<Vec<usize>> {
    text.split('x')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| missing("--grid", &format!("expected sizes like 3x3, got {text:?}")))
}

fn probe(path: &Path, window: usize) -> Result<Vec<ProbeRecord>> {
    let (labels, header) = read_labels(path)?;
    let n = labels.num_phases();
    let step = header.step;
    let mut records = Vec::new();
    println!(
        "snapshot sizes={:?} phases={n} step={step} time={}",
        header.sizes, header.time
    );
    for (p, &v) in labels.volumes().iter().enumerate() {
        if v > 0 {
            let r = disk_radius(&labels, p)?;
            println!("radius phase={p} cells={v} value={r:.6}");
            records.push(ProbeRecord::new(format!("radius_{p}"), step, r, f64::NAN));
        }
    }
    if labels.grid().dim() == 2 || labels.grid().dim() == 3 {
        for i in 0..n {
            for j in i + 1..n {
                let m = interface_length(&labels, i, j)?;
                if m.length > 0.0 {
                    println!("interface pair=({i},{j}) length={:.6}", m.length);
                    records.push(ProbeRecord::new(format!("interface_length_{i}_{j}"), step, m.length, f64::NAN));
                }
            }
        }
    }
    if labels.grid().dim() == 2 {
        for j in junction_angles(&labels, window)? {
            println!(
                "junction at=[{:.4}, {:.4}] phases={:?} angles=[{:.2}, {:.2}, {:.2}]",
                j.location[0], j.location[1], j.phases, j.angles[0], j.angles[1], j.angles[2]
            );
            for (k, &p) in j.phases.iter().enumerate() {
                records.push(ProbeRecord::new(format!("junction_angle_{p}"), step, j.angles[k], f64::NAN));
            }
        }
    }
    Ok(records)
}
