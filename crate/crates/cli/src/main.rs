use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use ymblow_cli::manifest::split_override;
use ymblow_cli::{resolve_output_dir, run, Command, Manifest, OUTPUT_DIR_ENV};

/// Numerical experiments on equivariant Yang-Mills blowup.
#[derive(Parser, Debug)]
#[command(name = "ymblow", version)]
struct Args {
    /// evolve, bisect, sweep-subcritical, departure-scaling, fit-lambda, shoot or cone-energy.
    #[arg(value_parser = str::parse::<Command>)]
    command: Command,
    /// Manifest file with `key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a manifest key (repeatable), e.g. `--set A=0.3`.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", value_parser = split_override)]
    overrides: Vec<(String, String)>,
    /// Output directory (otherwise $YMBLOW_OUTPUT_DIR, then `output_dir` from the manifest).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Print the resolved manifest and exit.
    #[arg(long)]
    print_manifest: bool,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    let args = Args::parse();
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let manifest = Manifest::parse(&text, Some(args.command), &args.overrides)?;
    if args.print_manifest {
        print!("{}", manifest.render());
        return Ok(ExitCode::SUCCESS);
    }
    let env = std::env::var(OUTPUT_DIR_ENV).ok();
    let dir = resolve_output_dir(args.output.as_deref(), env.as_deref(), &manifest);
    let summary = run(&manifest, &dir).with_context(|| format!("writing to {}", dir.display()))?;
    if let Some(e) = &summary.error {
        eprintln!("error ({}): {}", e.kind, e.message);
        return Ok(ExitCode::FAILURE);
    }
    println!("{} finished; results in {}", manifest.command, dir.display());
    Ok(ExitCode::SUCCESS)
}
