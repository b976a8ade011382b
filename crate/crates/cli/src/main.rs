//! `ata` command-line interface.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure.

use ata_cli::{debug_env, plot, sweep};
use ata_core::config::ExperimentConfig;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const USAGE: &str = "\
usage: ata <command> [args]

commands:
  run <config> [--seed N]        train one seed, write its metrics CSV
  sweep <config>                 train every configured seed + aggregate CSV
  plot <csv...> --out <file>     render learning curves (SVG) from aggregate CSVs
       [--labels a,b,c] [--eval-interval N] [--smooth N]
  debug-env <config> [--steps N] print ASCII snapshots of the configured environment

configs are flat `key = value` files; '#' starts a comment.";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(command) = args.first() else {
        eprintln!("{USAGE}");
        return ExitCode::from(1);
    };
    match command.as_str() {
        "run" => cmd_run(&args[1..]),
        "sweep" => cmd_sweep(&args[1..]),
        "plot" => cmd_plot(&args[1..]),
        "debug-env" => cmd_debug_env(&args[1..]),
        "-h" | "--help" | "help" => {
            println!("{USAGE}");
            ExitCode::SUCCESS
        }
        other => {
            eprintln!("unknown command {other:?}\n{USAGE}");
            ExitCode::from(1)
        }
    }
}

fn load_config(path: &str) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {path}: {e}"))?;
    ExperimentConfig::parse(&text).map_err(|e| e.to_string())
}

fn cmd_run(args: &[String]) -> ExitCode {
    let (positional, flags) = split_flags(args);
    let Some(config_path) = positional.first() else {
        eprintln!("run: missing config path");
        return ExitCode::from(1);
    };
    let cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let seed = match flag_value(&flags, "--seed") {
        Some(v) => match v.parse::<u64>() {
            Ok(s) => s,
            Err(_) => {
                eprintln!("run: invalid --seed {v:?}");
                return ExitCode::from(1);
            }
        },
        None => cfg.seeds[0],
    };
    let out_dir = sweep::resolve_out_dir(&cfg);
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("cannot create {}: {e}", out_dir.display());
        return ExitCode::from(2);
    }
    if let Err(e) = std::fs::write(out_dir.join("config_resolved.cfg"), cfg.serialize()) {
        eprintln!("cannot write resolved config: {e}");
        return ExitCode::from(2);
    }
    match sweep::run_one_seed(&cfg, seed, &out_dir) {
        Ok(outcome) => {
            let window = outcome.metrics.len().div_ceil(10).max(1);
            let tail: f64 = outcome
                .metrics
                .iter()
                .rev()
                .take(window)
                .map(|r| r.env_return)
                .sum();
            println!(
                "seed {seed}: {} episodes, final-window mean return {:.4}",
                outcome.metrics.len(),
                tail / window as f64
            );
            println!("wrote {}", sweep::seed_csv_path(&out_dir, seed).display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("seed {seed} failed: {e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_sweep(args: &[String]) -> ExitCode {
    let Some(config_path) = args.first() else {
        eprintln!("sweep: missing config path");
        return ExitCode::from(1);
    };
    let cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    match sweep::run_sweep(&cfg) {
        Ok(report) => {
            for path in &report.seed_csvs {
                println!("wrote {}", path.display());
            }
            if let Some(agg) = &report.aggregate_csv {
                println!("wrote {}", agg.display());
            }
            if report.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for (seed, err) in &report.failures {
                    eprintln!("seed {seed} failed: {err}");
                }
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_plot(args: &[String]) -> ExitCode {
    let (positional, flags) = split_flags(args);
    if positional.is_empty() {
        eprintln!("plot: need at least one aggregate CSV");
        return ExitCode::from(1);
    }
    let Some(out) = flag_value(&flags, "--out") else {
        eprintln!("plot: missing --out <file>");
        return ExitCode::from(1);
    };
    let labels: Vec<String> = flag_value(&flags, "--labels")
        .map(|v| v.split(',').map(|s| s.trim().to_string()).collect())
        .unwrap_or_default();
    let eval_interval = match parse_flag_num(&flags, "--eval-interval", 50) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let smooth = match parse_flag_num(&flags, "--smooth", 10) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let paths: Vec<PathBuf> = positional.iter().map(PathBuf::from).collect();
    let path_refs: Vec<&Path> = paths.iter().map(|p| p.as_path()).collect();
    match plot::load_curves(&path_refs, &labels, eval_interval, smooth)
        .and_then(|curves| plot::render_curves(&curves, Path::new(&out)))
    {
        Ok(()) => {
            println!("wrote {out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_debug_env(args: &[String]) -> ExitCode {
    let (positional, flags) = split_flags(args);
    let Some(config_path) = positional.first() else {
        eprintln!("debug-env: missing config path");
        return ExitCode::from(1);
    };
    let cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let steps = match parse_flag_num(&flags, "--steps", 0) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    match debug_env(&cfg, steps) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}

fn split_flags(args: &[String]) -> (Vec<String>, Vec<(String, String)>) {
    let mut positional = Vec::new();
    let mut flags = Vec::new();
    let mut i = 0;
    while i < args.len() {
        if args[i].starts_with("--") {
            let value = args.get(i + 1).cloned().unwrap_or_default();
            flags.push((args[i].clone(), value));
            i += 2;
        } else {
            positional.push(args[i].clone());
            i += 1;
        }
    }
    (positional, flags)
}

fn flag_value(flags: &[(String, String)], name: &str) -> Option<String> {
    flags
        .iter()
        .find(|(k, _)| k == name)
        .map(|(_, v)| v.clone())
}

fn parse_flag_num(
    flags: &[(String, String)],
    name: &str,
    default: usize,
) -> Result<usize, String> {
    match flag_value(flags, name) {
        None => Ok(default),
        Some(v) => v
            .parse::<usize>()
            .map_err(|_| format!("invalid {name} value {v:?}")),
    }
}
