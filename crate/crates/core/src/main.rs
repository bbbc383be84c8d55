use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cascade_lab::config::{
    apply_overrides, default_config, parse_config_for, to_toml_string, ModelKind,
};
use cascade_lab::error::Error;
use cascade_lab::manifest::RunManifest;
use cascade_lab::runner::{self, RunSummary};
use cascade_lab::verify;

#[derive(Parser)]
#[command(name = "cascade-lab", version, about = "Multiscale cascade laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the GOY turbulence shell model and fit its inertial range
    Goy(RunArgs),
    /// Relax the finance shell model to steady state and extract exponents
    Finance(RunArgs),
    /// Kinetic wealth-exchange baseline with the exponential stationary law
    Equilibrium(RunArgs),
    /// Evaluate the closed-form spectrum/flux curves
    Pao(RunArgs),
    /// Fiscal-tree corollary (parameters from the [finance] section)
    Tree(RunArgs),
    /// Run the built-in verification suite
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file; documented defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory override
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Cartesian sweep over dotted config keys, repeatable:
    /// --sweep finance.alpha=-1,-0.5 --sweep seed=1,2
    #[arg(long = "sweep", value_name = "KEY=V1,V2,...")]
    sweep: Vec<String>,
    /// Also emit a gnuplot script per run
    #[arg(long)]
    emit_plots: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Directory for the verification run artifacts
    #[arg(long, default_value = "verify_out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Parse(_) | Error::Validation(_) => 1u8,
                _ => 2u8,
            })
        }
    }
}

fn execute(command: Command) -> Result<u8, Error> {
    match command {
        Command::Goy(args) => run_command(ModelKind::Goy, args, false),
        Command::Finance(args) => run_command(ModelKind::Finance, args, false),
        Command::Equilibrium(args) => run_command(ModelKind::Equilibrium, args, false),
        Command::Pao(args) => run_command(ModelKind::Pao, args, false),
        Command::Tree(args) => run_command(ModelKind::Finance, args, true),
        Command::Verify(args) => {
            std::fs::create_dir_all(&args.out)?;
            let outcomes = verify::run_all(&args.out);
            for o in &outcomes {
                println!("{}", o.line());
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            if failed == 0 {
                println!("verify: all {} criteria passed", outcomes.len());
                Ok(0)
            } else {
                println!("verify: {failed} of {} criteria FAILED", outcomes.len());
                Ok(3)
            }
        }
    }
}

fn parse_sweep(specs: &[String]) -> Result<Vec<(String, Vec<String>)>, Error> {
    specs
        .iter()
        .map(|spec| {
            let (key, values) = spec.split_once('=').ok_or_else(|| {
                Error::Validation(format!("--sweep expects KEY=V1,V2,..., got '{spec}'"))
            })?;
            let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
            if values.is_empty() || values.iter().any(|v| v.is_empty()) {
                return Err(Error::Validation(format!("--sweep '{key}' has an empty value")));
            }
            Ok((key.to_string(), values))
        })
        .collect()
}

fn cartesian(axes: &[(String, Vec<String>)]) -> Vec<Vec<(String, String)>> {
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in axes {
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for combo in &combos {
            for v in values {
                let mut extended = combo.clone();
                extended.push((key.clone(), v.clone()));
                next.push(extended);
            }
        }
        combos = next;
    }
    combos
}

fn run_one(
    model: ModelKind,
    tree: bool,
    base_text: &str,
    overrides: &[(String, String)],
    out_dir: PathBuf,
    seed: Option<u64>,
    emit_plots: bool,
) -> Result<RunSummary, Error> {
    let text = if overrides.is_empty() {
        base_text.to_string()
    } else {
        apply_overrides(base_text, overrides)?
    };
    let mut cfg = parse_config_for(&text, Some(model))?;
    cfg.output.dir = out_dir;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.output.emit_plots = cfg.output.emit_plots || emit_plots;
    if tree {
        runner::run_tree_artifacts(&cfg)
    } else {
        runner::run_model(&cfg)
    }
}

fn print_summary(summary: &RunSummary) {
    println!("wrote {} ({} files)", summary.out_dir.display(), summary.files.len());
    for (name, fit) in &summary.fits {
        println!(
            "  {name} = {:.6} (stderr {:.2e}, r2 {:.4}, {} points)",
            fit.slope, fit.slope_stderr, fit.r_squared, fit.n_points
        );
    }
    for key in ["converged", "residual_norm", "interior_flux_spread", "flux_spread", "injection_rate"] {
        if let Some(v) = summary.diagnostics.get(key) {
            println!("  {key} = {v}");
        }
    }
}

fn run_command(model: ModelKind, args: RunArgs, tree: bool) -> Result<u8, Error> {
    let base_text = match &args.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?,
        None => to_toml_string(&default_config(model)),
    };
    // resolve the default output directory from the config itself
    let base_out = match &args.out {
        Some(dir) => dir.clone(),
        None => parse_config_for(&base_text, Some(model))?.output.dir,
    };

    let axes = parse_sweep(&args.sweep)?;
    let combos = cartesian(&axes);
    if combos.len() == 1 {
        let summary = run_one(
            model,
            tree,
            &base_text,
            &combos[0],
            base_out,
            args.seed,
            args.emit_plots,
        )?;
        print_summary(&summary);
        return Ok(0);
    }

    // fan the sweep out over worker threads and join before writing the
    // parent manifest
    let labels: Vec<String> = combos
        .iter()
        .enumerate()
        .map(|(i, combo)| {
            let parts: Vec<String> =
                combo.iter().map(|(k, v)| format!("{k}={v}")).collect();
            format!("sweep_{i:03}_{}", parts.join("_"))
        })
        .collect();
    let mut results: Vec<Option<Result<RunSummary, Error>>> = Vec::new();
    results.resize_with(combos.len(), || None);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (i, combo) in combos.iter().enumerate() {
            let label = labels[i].clone();
            let out_dir = base_out.join(&label);
            let base_text = &base_text;
            handles.push((
                i,
                scope.spawn(move || {
                    run_one(model, tree, base_text, combo, out_dir, args.seed, args.emit_plots)
                }),
            ));
        }
        for (i, handle) in handles {
            results[i] = Some(handle.join().unwrap_or_else(|_| {
                Err(Error::Validation("sweep worker panicked".into()))
            }));
        }
    });

    let mut manifest = RunManifest::start(
        if tree { "tree" } else { model.as_str() },
        args.seed.unwrap_or(0),
        base_text.clone(),
    );
    let mut failures = 0;
    for (label, result) in labels.iter().zip(results.into_iter()) {
        match result.expect("worker result present") {
            Ok(summary) => {
                print_summary(&summary);
                manifest.files.push(format!("{label}/manifest.json"));
            }
            Err(e) => {
                eprintln!("sweep run {label} failed: {e}");
                failures += 1;
            }
        }
    }
    manifest.add_diagnostic("sweep_runs", labels.len());
    manifest.add_diagnostic("sweep_failures", failures);
    std::fs::create_dir_all(&base_out)?;
    manifest.finish(&base_out)?;
    if failures > 0 {
        Err(Error::Validation(format!("{failures} sweep runs failed")))
    } else {
        Ok(0)
    }
}
