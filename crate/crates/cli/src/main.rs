use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tccp::interpreter::{run, run_with, ChoicePolicy, Status};
use tccp::{parse_program, with_entry, Program};

#[derive(Parser)]
#[command(name = "tccp", version, about = "Simulator for Timed Concurrent Constraint programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a program and print its trace
    Run {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Emit every M-th instant; 0 emits the final instant only
        #[arg(long, default_value_t = 1)]
        dump_every: u64,
    },
    /// Parse and scope-check a program
    Check {
        #[arg(long)]
        program: PathBuf,
    },
    /// Print store sizes and timings for one or more step counts
    Stats {
        #[arg(long)]
        program: PathBuf,
        #[arg(long, default_value = "skip")]
        entry: String,
        /// Comma-separated step counts
        #[arg(long, value_delimiter = ',', required = true)]
        steps: Vec<usize>,
        #[arg(long, value_enum, default_value = "first")]
        policy: PolicyArg,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(clap::Args)]
struct SimArgs {
    #[arg(long)]
    program: PathBuf,
    /// Entry agent, e.g. "initialize(MIdle) || tell(MIdle = 5)"
    #[arg(long)]
    entry: String,
    #[arg(long)]
    steps: usize,
    #[arg(long, value_enum, default_value = "first")]
    policy: PolicyArg,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    First,
    Last,
    Random,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Jsonl,
}

fn policy(p: PolicyArg, seed: Option<u64>) -> Result<ChoicePolicy> {
    match (p, seed) {
        (PolicyArg::Random, Some(s)) => Ok(ChoicePolicy::Random(s)),
        (PolicyArg::Random, None) => bail!("--policy random requires --seed"),
        (_, Some(_)) => bail!("--seed is only meaningful with --policy random"),
        (PolicyArg::First, None) => Ok(ChoicePolicy::First),
        (PolicyArg::Last, None) => Ok(ChoicePolicy::Last),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load(path: &Path, entry: &str) -> Result<Program> {
    let text = read(path)?;
    let program = parse_program(&text).map_err(|e| anyhow!("{}:{}", path.display(), e))?;
    with_entry(program, entry).map_err(|e| anyhow!("entry:{}", e))
}

fn cmd_run(sim: SimArgs, format: Format, dump_every: u64) -> Result<ExitCode> {
    let policy = policy(sim.policy, sim.seed)?;
    let program = load(&sim.program, &sim.entry)?;
    let trace = run(&program, sim.steps, policy)?;
    let out = io::stdout();
    let mut out = BufWriter::new(out.lock());
    let last = trace.elements.len() - 1;
    for (i, e) in trace.elements.iter().enumerate() {
        let selected = i == last || (dump_every > 0 && e.clock % dump_every == 0);
        if !selected {
            continue;
        }
        let dump = e.dump();
        match format {
            Format::Jsonl => writeln!(out, "{}", serde_json::to_string(&dump)?)?,
            Format::Text => writeln!(out, "{}", dump)?,
        }
    }
    if format == Format::Text {
        let fin = trace.last();
        writeln!(out, "{} after {} instants", fin.status, fin.clock)?;
        for (name, reg) in &trace.entry_vars {
            writeln!(out, "  {} = {}", name, fin.store.render(*reg))?;
        }
    }
    out.flush()?;
    Ok(match trace.status() {
        Status::Failed => ExitCode::from(2),
        _ => ExitCode::SUCCESS,
    })
}

fn cmd_check(path: &Path) -> Result<ExitCode> {
    let text = read(path)?;
    let program = parse_program(&text).map_err(|e| anyhow!("{}:{}", path.display(), e))?;
    println!("{}: ok, {} declarations", path.display(), program.decls.len());
    for (name, d) in &program.decls {
        println!("  {}/{}", name, d.formals.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_stats(path: &Path, entry: &str, steps: &[usize], policy: ChoicePolicy) -> Result<ExitCode> {
    let t0 = Instant::now();
    let program = load(path, entry)?;
    let parse_ms = t0.elapsed().as_secs_f64() * 1e3;
    let mut rows: Vec<[String; 6]> = Vec::new();
    for &n in steps {
        let mut last = (Status::Running, 0, 0, 0);
        let t0 = Instant::now();
        run_with(&program, n, policy, |cfg| {
            last = (
                cfg.status,
                cfg.store.node_count(),
                cfg.store.register_count(),
                cfg.store.dims(),
            );
        })?;
        let sim_ms = t0.elapsed().as_secs_f64() * 1e3;
        rows.push([
            last.0.to_string(),
            last.1.to_string(),
            last.2.to_string(),
            last.3.to_string(),
            format!("{:.2}", parse_ms),
            format!("{:.2}", sim_ms),
        ]);
    }
    let labels = [
        "status",
        "symbol table (nodes)",
        "global memory (registers)",
        "linear (dimensions)",
        "parse (ms)",
        "simulate (ms)",
    ];
    let width = labels.iter().map(|l| l.len()).max().unwrap_or(0);
    print!("{:width$}", "steps", width = width);
    for n in steps {
        print!(" {:>10}", n);
    }
    println!();
    for (i, label) in labels.iter().enumerate() {
        print!("{:width$}", label, width = width);
        for r in &rows {
            print!(" {:>10}", r[i]);
        }
        println!();
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            sim,
            format,
            dump_every,
        } => cmd_run(sim, format, dump_every),
        Command::Check { program } => cmd_check(&program),
        Command::Stats {
            program,
            entry,
            steps,
            policy: p,
            seed,
        } => policy(p, seed).and_then(|pol| cmd_stats(&program, &entry, &steps, pol)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(1)
        }
    }
}
