use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use iga_cli::run::run_problem;
use iga_cli::study::{format_rates, run_study};
use iga_cli::THREADS_ENV;
use iga_core::verification::{BarLoad, Junction, MaterialPreset, StudyConfig, StudyId};

#[derive(Parser)]
#[command(
    name = "iga",
    version,
    about = "Immersed multi-material isogeometric analysis"
)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem described by a JSON configuration.
    Run {
        config: PathBuf,
        /// Output directory (default: the configured one, else out/<config stem>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark study: sliver, rotated-bar, junction, inclusion or multimaterial.
    Study {
        id: String,
        /// Spline degrees.
        #[arg(long, value_delimiter = ',')]
        p: Vec<usize>,
        /// Mesh sizes.
        #[arg(long, value_delimiter = ',')]
        h: Vec<f64>,
        #[arg(long = "gamma-g", value_delimiter = ',')]
        gamma_g: Vec<f64>,
        /// Integration grid sizes (inclusion study).
        #[arg(long = "h-int", value_delimiter = ',')]
        h_int: Vec<f64>,
        /// Bar load case for the sliver study: linear, quadratic, cubic, quartic.
        #[arg(long)]
        load: Option<String>,
        /// Sliver fractions of h (sliver study).
        #[arg(long, value_delimiter = ',')]
        delta: Vec<f64>,
        /// Rotation angles in degrees (rotated-bar study).
        #[arg(long, value_delimiter = ',')]
        angle: Vec<f64>,
        /// Junction configurations.
        #[arg(long, value_delimiter = ',')]
        junction: Vec<String>,
        /// Material presets (multimaterial study).
        #[arg(long, value_delimiter = ',')]
        preset: Vec<String>,
        /// Compute the Frobenius condition number (default depends on the study).
        #[arg(long, overrides_with = "no_cond")]
        cond: bool,
        #[arg(long = "no-cond")]
        no_cond: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Reference-solution cache (default: <out>/cache).
        #[arg(long)]
        cache: Option<PathBuf>,
    },
}

fn nonempty<T>(v: Vec<T>) -> Option<Vec<T>> {
    (!v.is_empty()).then_some(v)
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    Ok(())
}

fn real_main(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Run { config, out } => {
            let o = run_problem(&config, out.as_deref())?;
            let r = &o.report;
            println!("dofs {} residual {:e}", r.dofs, r.residual);
            if let (Some(l2), Some(h1)) = (r.l2, r.h1) {
                println!("L2 {l2:e} H1 {h1:e}");
            }
            if let Some(g) = r.e_geo {
                println!("e_geo {g:e}");
            }
            println!("wrote {}", o.out_dir.display());
        }
        Command::Study {
            id,
            p,
            h,
            gamma_g,
            h_int,
            load,
            delta,
            angle,
            junction,
            preset,
            cond,
            no_cond,
            out,
            cache,
        } => {
            let study = StudyId::parse(&id)?;
            let mut config = StudyConfig::default();
            if let Some(p) = nonempty(p) {
                config.degrees = p;
            }
            config.mesh_sizes = nonempty(h);
            config.gamma_g = nonempty(gamma_g);
            config.h_int = nonempty(h_int);
            config.load = load.as_deref().map(BarLoad::parse).transpose()?;
            config.slivers = nonempty(delta);
            config.angles = nonempty(angle);
            config.junctions = nonempty(
                junction
                    .iter()
                    .map(|s| Junction::parse(s))
                    .collect::<iga_core::Result<Vec<_>>>()?,
            );
            config.presets = nonempty(
                preset
                    .iter()
                    .map(|s| MaterialPreset::parse(s))
                    .collect::<iga_core::Result<Vec<_>>>()?,
            );
            config.condition = match (cond, no_cond) {
                (true, _) => Some(true),
                (_, true) => Some(false),
                _ => None,
            };
            let cache = cache.unwrap_or_else(|| out.join("cache"));
            let o = run_study(study, &config, &out, Some(&cache))?;
            print!("{}", format_rates(&o.rates));
            println!("{} runs", o.reports.len());
            for f in &o.files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
