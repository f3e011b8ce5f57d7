use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use saser_cli::config::{self, Format, Request};
use saser_cli::error::{exit, CliError, Result};
use saser_cli::fitcmd::{self, FitRequest};
use saser_cli::output::{infer_format, write_output};
use saser_cli::{presets, run};

#[derive(Parser)]
#[command(name = "saser", version, about = "Phonon-laser (SASER) simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Named preset; the configuration file, if any, overrides it.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output encoding; defaults to the --out extension, else csv.
    #[arg(long, value_name = "csv|json")]
    format: Option<Format>,
    /// Worker threads.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Override one setting, e.g. kappa=0.5, options.cutoff_check=false or
    /// axes.delta_ge.points=5. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn request(&self) -> Request {
        Request { config: self.config.clone(), preset: self.preset.clone(), overrides: self.overrides.clone() }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its grid.
    Run(Common),
    /// Check a configuration without running it.
    Validate(Common),
    /// List presets, or print one preset's resolved configuration.
    Presets {
        name: Option<String>,
    },
    /// Fit a line-shape model to a CSV curve.
    Fit {
        /// notch_ge, notch_gf, lorentzian or voigt.
        #[arg(long)]
        model: String,
        /// CSV with a unit-bearing frequency header and one or two value columns.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Starting value, name=value. Repeatable.
        #[arg(long, value_name = "NAME=VALUE")]
        init: Vec<String>,
        /// Hold a parameter at its starting value. Repeatable.
        #[arg(long, value_name = "NAME")]
        fix: Vec<String>,
        /// Free a parameter the model fixes by default. Repeatable.
        #[arg(long, value_name = "NAME")]
        free: Vec<String>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "csv|json")]
        format: Option<Format>,
    },
}

fn init_threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::validation("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation(format!("--threads: {e}")))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => {
            init_threads(c.threads)?;
            let spec = config::load(&c.request())?;
            let result = run::run_experiment(&spec)?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            let path = c.out.clone().or_else(|| spec.output.path.clone());
            let format = infer_format(c.format.or(spec.output.format), path.as_deref());
            write_output(&result, path.as_deref(), format)
        }
        Command::Validate(c) => {
            init_threads(c.threads)?;
            let spec = config::load(&c.request())?;
            spec.validate(rayon::current_num_threads())?;
            let fp = if spec.solver().full_quantum() {
                saser_cli::guard::check_spec(&spec, rayon::current_num_threads()).ok()
            } else {
                None
            };
            println!("ok: {} ({} solver)", spec.experiment, spec.solver());
            if let Some(fp) = fp {
                println!("  fock_cutoff {}: sector {} elements, ~{:.0} MiB", fp.cutoff, fp.sector_len, fp.megabytes());
            }
            Ok(())
        }
        Command::Presets { name: None } => {
            for p in presets::all() {
                println!("{:<12} {:<18} {}", p.name, p.spec.experiment.id(), p.description);
                println!("{:<12} {}", "", squash(p.solver_rationale));
            }
            Ok(())
        }
        Command::Presets { name: Some(name) } => {
            let p = presets::find(&name)?;
            let mut v = serde_json::to_value(&p.spec).expect("spec serializes");
            let obj = v.as_object_mut().expect("spec is an object");
            obj.remove("output");
            let doc = serde_json::json!({
                "description": p.description,
                "solver_rationale": squash(p.solver_rationale),
                "config": v,
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializes"));
            Ok(())
        }
        Command::Fit { model, data, init, fix, free, out, format } => {
            let req = FitRequest { model, data, init, fix, free };
            let result = fitcmd::fit_result(&req)?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            write_output(&result, out.as_deref(), infer_format(format, out.as_deref()))
        }
    }
}

/// Collapses the indentation of wrapped string literals.
fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::VALIDATION } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
