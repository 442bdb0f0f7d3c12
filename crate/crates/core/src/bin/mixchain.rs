//! Command-line front end: compute mixing profiles, run condition
//! verifications, generate chains, simulate paths, and render combined
//! reports.
//!
//! Exit codes: 0 success / verification pass; 1 verification inconsistency;
//! 2 input or validation error; 3 state-space or subset size limit
//! exceeded. Standard output carries only the requested artifact;
//! diagnostics go to standard error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use mixchain::chain::{ChainFile, ChainModel};
use mixchain::error::Error;
use mixchain::generators::{self, GeneratorSpec};
use mixchain::{mixing, spectral, verify};

#[derive(Parser)]
#[command(name = "mixchain", version, about = "Exact mixing-coefficient and spectral analysis for finite-state stationary Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Check {
    Structure,
    R,
    A,
    B,
    Lattice,
    PowerLaw,
    RateMatching,
    SpectralBound,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the (alpha, rho, beta) profile of a chain
    Compute {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long, default_value_t = 32)]
        max_lag: u64,
        #[arg(long, default_value_t = 5)]
        max_doubling: u32,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run condition checks on a chain
    Verify {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long, default_value_t = 32)]
        max_lag: u64,
        #[arg(long, default_value_t = 5)]
        max_doubling: u32,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Checks to run (defaults to the full set)
        #[arg(long, value_enum)]
        check: Vec<Check>,
        /// Candidate rate for the rate-matching check
        #[arg(long, default_value_t = 0.5)]
        rate: f64,
    },
    /// Generate a chain file from a named family
    Generate {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        states: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a stationary path and optionally re-estimate the chain
    Simulate {
        #[arg(long)]
        chain: PathBuf,
        #[arg(short = 'T', long = "length")]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the re-estimated chain as JSON on standard output
        #[arg(long, default_value_t = false)]
        estimate: bool,
    },
    /// Combined dossier: profile plus verification table
    Report {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long, default_value_t = 32)]
        max_lag: u64,
        #[arg(long, default_value_t = 5)]
        max_doubling: u32,
    },
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::StateSpaceTooLarge { .. } | Error::SubsetTooLarge { .. } => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn load_chain(path: &Path) -> Result<(ChainModel, String), Error> {
    let bytes = std::fs::read(path)?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let file: ChainFile =
        serde_json::from_slice(&bytes).map_err(|e| Error::Parse(e.to_string()))?;
    Ok((ChainModel::from_file(file)?, digest))
}

fn header(digest: &str, config: &str) -> String {
    format!(
        "tool: mixchain {}\nconfig: {}\nchain-digest: sha256:{}\n",
        env!("CARGO_PKG_VERSION"),
        config,
        digest
    )
}

fn run() -> Result<ExitCode, Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Compute {
            chain,
            max_lag,
            max_doubling,
            format,
        } => {
            let (model, digest) = load_chain(&chain)?;
            let profile = mixing::mixing_profile(&model, max_lag, max_doubling)?;
            let config = format!("compute max-lag={max_lag} max-doubling={max_doubling}");
            match format {
                Format::Csv => {
                    for line in header(&digest, &config).lines() {
                        println!("# {line}");
                    }
                    print!("{}", profile.to_csv());
                }
                Format::Json | Format::Text => {
                    let doc = serde_json::json!({
                        "meta": {
                            "tool": format!("mixchain {}", env!("CARGO_PKG_VERSION")),
                            "config": config,
                            "chain_digest": format!("sha256:{digest}"),
                        },
                        "profile": profile,
                    });
                    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            chain,
            max_lag,
            max_doubling,
            format,
            check,
            rate,
        } => {
            let (model, digest) = load_chain(&chain)?;
            let checks: Vec<Check> = if check.is_empty() {
                vec![Check::Lattice]
            } else {
                check
            };
            let config = format!(
                "verify max-lag={max_lag} max-doubling={max_doubling} rate={rate} checks={checks:?}"
            );
            eprint!("{}", header(&digest, &config));
            let mut failed = false;
            for c in checks {
                match c {
                    Check::Structure => {
                        let s = model.check_structure();
                        emit(format, &s, |s| format!("{s:#?}\n"));
                    }
                    Check::R => {
                        let mut reports = vec![
                            verify::check_condition_r1(&model),
                            verify::check_condition_r2(&model, max_lag)?,
                        ];
                        let (r3, _) = verify::check_conditions_r3_a1(&model, max_lag)?;
                        reports.push(r3);
                        reports.push(verify::check_condition_r4(&model, max_lag));
                        emit(format, &reports, render_conditions);
                    }
                    Check::A => {
                        let (_, a1) = verify::check_conditions_r3_a1(&model, max_lag)?;
                        let (a2, a3) = verify::check_conditions_a2_a3(&model, max_doubling)?;
                        emit(format, &vec![a1, a2, a3], render_conditions);
                    }
                    Check::B => {
                        let (b1, b2, b3, b4) = verify::check_conditions_b(&model, max_lag)?;
                        emit(format, &vec![b1, b2, b3, b4], render_conditions);
                    }
                    Check::Lattice => {
                        let report = verify::run_verification(&model, max_lag, max_doubling)?;
                        if !report.overall_pass {
                            failed = true;
                        }
                        emit(format, &report, |r| r.to_text());
                    }
                    Check::PowerLaw => {
                        let report = verify::check_condition_r4(&model, max_lag);
                        // keyed on the identity rho(n) = rho(1)^n itself
                        // (negative margin), so a periodic reversible chain
                        // (identity at rho(1)=1) still exits 0
                        if report.margin < 0.0 {
                            failed = true;
                        }
                        emit(format, &report, |r| format!("{}: {}\n", r.label, r.witness));
                    }
                    Check::RateMatching => {
                        let report = verify::check_rate_matching(&model, rate, max_doubling)?;
                        if !report.agree || !report.beta_direction_consistent {
                            failed = true;
                        }
                        emit(format, &report, |r| {
                            format!(
                                "rate {}: rho1 {} rho(n) {} alpha(n) {} doubling {} agree {}\n",
                                r.r, r.rho1_bound, r.rho_n_bound, r.alpha_n_bound,
                                r.doubling_bound, r.agree
                            )
                        });
                    }
                    Check::SpectralBound => {
                        let report = spectral::slem_and_gap(&model);
                        let subset_rate = if report.reversible
                            && model.support().len() <= spectral::SUBSET_MAX_STATES
                        {
                            Some(spectral::max_subset_rate(&model, &model.support())?)
                        } else {
                            None
                        };
                        let doc = serde_json::json!({
                            "spectral": report,
                            "max_subset_rate": subset_rate,
                        });
                        match format {
                            Format::Text => println!(
                                "slem {} gap {} max-subset-rate {:?}",
                                report.slem, report.gap, subset_rate
                            ),
                            _ => println!("{}", serde_json::to_string_pretty(&doc).unwrap()),
                        }
                    }
                }
            }
            Ok(if failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Generate {
            kind,
            states,
            p,
            seed,
            out,
        } => {
            let spec = GeneratorSpec {
                kind,
                states,
                p,
                seed,
            };
            let model = generators::make_named(&spec)?;
            let json = serde_json::to_string_pretty(&model.to_file()).unwrap();
            match out {
                Some(path) => std::fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            chain,
            length,
            seed,
            out,
            estimate,
        } => {
            let (model, digest) = load_chain(&chain)?;
            eprint!(
                "{}",
                header(&digest, &format!("simulate T={length} seed={seed}"))
            );
            let path = generators::simulate_path(&model, length, seed)?;
            match out {
                Some(p) => std::fs::write(p, path.to_text())?,
                None if !estimate => print!("{}", path.to_text()),
                None => {}
            }
            if estimate {
                let est = generators::estimate_chain(&path)?;
                println!(
                    "{}",
                    serde_json::to_string_pretty(&est.to_file()).unwrap()
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report {
            chain,
            max_lag,
            max_doubling,
        } => {
            let (model, digest) = load_chain(&chain)?;
            let config = format!("report max-lag={max_lag} max-doubling={max_doubling}");
            println!("{}", header(&digest, &config));
            let profile = mixing::mixing_profile(&model, max_lag, max_doubling)?;
            println!("{}", profile.to_csv());
            let report = verify::run_verification(&model, max_lag, max_doubling)?;
            println!("{}", report.to_text());
            Ok(if report.overall_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn render_conditions(reports: &Vec<verify::ConditionReport>) -> String {
    let mut out = String::new();
    for c in reports {
        out.push_str(&format!(
            "{:<4} holds={:<5} margin={:<13.6e} {}\n",
            c.label, c.holds, c.margin, c.witness
        ));
    }
    out
}

fn emit<T: serde::Serialize>(format: Format, value: &T, text: impl Fn(&T) -> String) {
    match format {
        Format::Text => print!("{}", text(value)),
        _ => println!("{}", serde_json::to_string_pretty(value).unwrap()),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}
