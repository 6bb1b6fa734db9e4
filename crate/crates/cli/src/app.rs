use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use coilpose::measurement::NoiseMode;

use crate::config::{self, ConfigError, Suite};
use crate::exit;
use crate::output::{self, OutputError, ScenarioSummary};
use crate::recipes::{self, Overrides, RECIPES};

#[derive(Debug, Parser)]
#[command(
    name = "coilpose",
    version,
    about = "Monte Carlo studies of coil-based 6DoF positioning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NoiseModeArg {
    Fast,
    TimeDomain,
}

impl From<NoiseModeArg> for NoiseMode {
    fn from(m: NoiseModeArg) -> Self {
        match m {
            NoiseModeArg::Fast => NoiseMode::Fast,
            NoiseModeArg::TimeDomain => NoiseMode::TimeDomain,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a recipe or a configuration file.
    Run {
        /// Recipe name (see `coilpose recipes`).
        #[arg(conflicts_with_all = ["recipe", "config"])]
        name: Option<String>,
        #[arg(long, conflicts_with = "config")]
        recipe: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed for every scenario.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        /// Amplifier gain G.
        #[arg(long)]
        gain: Option<f64>,
        /// Fit the N strongest readings.
        #[arg(long)]
        top_n: Option<usize>,
        /// SNR selection threshold in dB.
        #[arg(long)]
        snr_th_db: Option<f64>,
        /// Trials per mobile pose.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_enum)]
        noise_mode: Option<NoiseModeArg>,
    },
    /// Check a configuration file and list every problem found.
    Validate { file: PathBuf },
    /// List the available recipes.
    Recipes,
}

fn config_exit(e: &ConfigError) -> i32 {
    match e {
        ConfigError::Unreadable { .. } => exit::UNREADABLE_CONFIG,
        ConfigError::Invalid(_) => exit::MALFORMED_CONFIG,
    }
}

fn print_scenario(s: &ScenarioSummary) {
    println!(
        "{:<22} P_d={:.4} P_alpha={:.4} P_d_alpha={:.4} e_d={:.5}±{:.5} m e_alpha={:.4}±{:.4} deg failed={}",
        s.label,
        s.rates.p_d,
        s.rates.p_alpha,
        s.rates.p_d_alpha,
        s.e_d_m.mean,
        s.e_d_m.std,
        s.e_alpha_deg.mean,
        s.e_alpha_deg.std,
        s.n_failed,
    );
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
        }
    };
    match cli.command {
        Command::Recipes => {
            for (name, about) in RECIPES {
                println!("{name:<22} {about}");
            }
            exit::OK
        }
        Command::Validate { file } => match config::load(&file) {
            Ok(suite) => {
                println!(
                    "OK ({} scenario{})",
                    suite.scenarios.len(),
                    if suite.scenarios.len() == 1 { "" } else { "s" }
                );
                exit::OK
            }
            Err(e) => {
                eprintln!("{e}");
                config_exit(&e)
            }
        },
        Command::Run {
            name,
            recipe,
            config,
            seed,
            out,
            gain,
            top_n,
            snr_th_db,
            trials,
            noise_mode,
        } => {
            let mut suite: Suite = match (name.or(recipe), &config) {
                (Some(r), None) => match recipes::recipe(&r) {
                    Some(s) => s,
                    None => {
                        let known: Vec<&str> = RECIPES.iter().map(|(n, _)| *n).collect();
                        eprintln!("unknown recipe `{r}`; known recipes: {}", known.join(", "));
                        return exit::UNKNOWN_RECIPE;
                    }
                },
                (None, Some(path)) => match config::load(path) {
                    Ok(s) => s,
                    Err(e) => {
                        eprintln!("{e}");
                        return config_exit(&e);
                    }
                },
                _ => {
                    eprintln!("give exactly one of a recipe name, --recipe or --config");
                    return exit::USAGE;
                }
            };
            Overrides {
                seed,
                gain,
                top_n,
                snr_th_db,
                trials,
                noise_mode: noise_mode.map(Into::into),
            }
            .apply(&mut suite);
            let problems = config::validate(&suite, true);
            if !problems.is_empty() {
                for p in problems {
                    eprintln!("{p}");
                }
                return exit::MALFORMED_CONFIG;
            }
            match output::run_suite(&suite, &out, config.as_deref(), print_scenario) {
                Ok(_) => exit::OK,
                Err(e @ OutputError::Unwritable { .. }) => {
                    eprintln!("{e}");
                    exit::UNWRITABLE_OUTPUT
                }
                Err(e) => {
                    eprintln!("{e}");
                    exit::RUNTIME
                }
            }
        }
    }
}
