//! Command-line front end. Exit status: 0 success, 1 audit violations,
//! 2 invalid input or any other error.

use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qledger::audit::{builtin_table1_chain, run_audit, run_rebased_audit, InferenceChain};
use qledger::protocol::Protocol;
use qledger::runner::report;
use qledger::runner::{
    compare_modes, parse_record, run_exact, run_sampled, Engine, Mode, OutputFormat, ProtocolSource, RunConfig, Semantics,
};

#[derive(Parser)]
#[command(name = "qledger", version, about = "Observer-relative simulation and reasoning audit for measurement protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ProtocolArg {
    /// Protocol file, or builtin:wfr, builtin:wfr-synced, builtin:wigner, builtin:wigner-synced, builtin:epr.
    #[arg(long)]
    protocol: ProtocolSource,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the outcome tree exactly, or sample it.
    Run {
        #[command(flatten)]
        protocol: ProtocolArg,
        #[arg(long, value_parser = parse_mode)]
        mode: Mode,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated agents treated as external observers.
        #[arg(long, value_delimiter = ',')]
        external_agents: Option<Vec<String>>,
        /// Also trace one path and print every ledger, e.g. `r=tail,z=up,wbar=okbar,w=ok`.
        #[arg(long)]
        record: Option<String>,
        #[arg(long, default_value = "json", value_parser = parse_format)]
        format: OutputFormat,
    },
    /// Check an inference chain against the two information rules.
    Audit {
        #[command(flatten)]
        protocol: ProtocolArg,
        /// builtin:table1 or a chain file.
        #[arg(long)]
        chain: String,
        /// Re-base every statement on its holder's latest entry first.
        #[arg(long)]
        rebase: bool,
        #[arg(long, default_value = "json", value_parser = parse_format)]
        format: OutputFormat,
    },
    /// Compare external, per-step collapse and synchronised probabilities.
    Compare {
        #[command(flatten)]
        protocol: ProtocolArg,
        #[arg(long, value_delimiter = ',')]
        external_agents: Option<Vec<String>>,
        #[arg(long, default_value = "json", value_parser = parse_format)]
        format: OutputFormat,
    },
    /// Print a protocol as a document.
    Export {
        #[command(flatten)]
        protocol: ProtocolArg,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse()
}

type Failure = Box<dyn std::error::Error>;

fn load(arg: &ProtocolArg) -> Result<Protocol, Failure> {
    Ok(arg.protocol.load()?)
}

fn load_chain(spec: &str) -> Result<InferenceChain, Failure> {
    match spec.strip_prefix("builtin:") {
        Some("table1") => Ok(builtin_table1_chain()),
        Some(other) => Err(format!("unknown builtin chain `{other}`").into()),
        None => Ok(InferenceChain::from_json(&std::fs::read_to_string(spec)?)?),
    }
}

fn compile(p: &Protocol) -> Result<qledger::protocol::CompiledProtocol, Failure> {
    p.compile()
        .map_err(|d| d.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n").into())
}

fn run(cfg: &RunConfig, record: Option<&str>) -> Result<String, Failure> {
    cfg.check()?;
    let p = cfg.protocol.load()?;
    let compiled = compile(&p)?;
    let external = cfg.external_agents.as_deref();
    let semantics = match cfg.mode {
        Mode::ExactExternal => Semantics::External,
        Mode::ExactCollapse | Mode::Sample => Semantics::Collapse,
    };
    if cfg.mode == Mode::Sample {
        let table = run_sampled(&compiled, semantics, external, cfg.trials.unwrap_or_default(), cfg.seed)?;
        return Ok(match cfg.format {
            OutputFormat::Json => report::frequency_json(&table),
            OutputFormat::Table => report::frequency_table(&table),
        });
    }
    let tree = run_exact(&compiled, semantics, external)?;
    let engine = Engine::new(&compiled, semantics, external)?;
    let trace = match record {
        Some(r) => Some(engine.run_path(&parse_record(r)?)?),
        None => None,
    };
    Ok(match cfg.format {
        OutputFormat::Json => {
            let ext = (semantics == Semantics::External).then(|| engine.external_agents());
            report::tree_json(&cfg.mode.to_string(), ext, &tree, trace.as_ref())
        }
        OutputFormat::Table => {
            let mut out = report::tree_table(&tree);
            if let Some(t) = &trace {
                out.push_str(&format!("record probability {}\n", report::sig15(t.probability)));
            }
            out
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<(String, bool), Failure> = match cli.command {
        Command::Run { protocol, mode, trials, seed, external_agents, record, format } => {
            let cfg = RunConfig { protocol: protocol.protocol, mode, trials, seed, external_agents, format };
            run(&cfg, record.as_deref()).map(|s| (s, false))
        }
        Command::Audit { protocol, chain, rebase, format } => (|| {
            let p = load(&protocol)?;
            let chain = load_chain(&chain)?;
            let report = if rebase { run_rebased_audit(&p, &chain)?.1 } else { run_audit(&p, &chain)? };
            let text = match format {
                OutputFormat::Json => report::audit_json(&report),
                OutputFormat::Table => report::audit_table(&report),
            };
            Ok((text, !report.is_clean()))
        })(),
        Command::Compare { protocol, external_agents, format } => (|| {
            let p = load(&protocol)?;
            let table = compare_modes(&p, external_agents.as_deref())?;
            Ok((
                match format {
                    OutputFormat::Json => report::compare_json(&table),
                    OutputFormat::Table => report::compare_text(&table),
                },
                false,
            ))
        })(),
        Command::Export { protocol } => load(&protocol).map(|p| (p.to_json(), false)),
    };
    match result {
        Ok((text, violations)) => {
            let _ = writeln!(std::io::stdout().lock(), "{}", text.trim_end());
            if violations {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
