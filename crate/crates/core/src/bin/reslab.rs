//! Thin command line front end over the library.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.
//! `RESLAB_THREADS` sets the worker thread count.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use reslab::harness::{emit_report, run_experiment, ExperimentConfig, ExperimentKind, OutputFormat};
use reslab::network::{build_fractal_graph, read_network, write_network, FractalScheme, NetworkFormat};
use reslab::resistance::resistance_matrix;
use reslab::rng::stream;
use reslab::simulate::JumpChain;
use reslab::{Error, ResistanceNetwork, Result};

#[derive(Parser)]
#[command(name = "reslab", version, about = "Resistance networks, walks and scaling experiments on fractals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the level-n graph of a fractal scheme.
    Build {
        #[arg(long, default_value = "gasket")]
        scheme: String,
        #[arg(long)]
        level: usize,
        /// `.json` for JSON, anything else for the text format.
        #[arg(long)]
        out: PathBuf,
    },
    /// Effective resistances of a network as CSV `x,y,resistance`.
    Resist {
        #[arg(long)]
        net: PathBuf,
        /// `all`, `root`, or a list like `0-3,2-5`.
        #[arg(long, default_value = "all")]
        pairs: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Variable-speed walks from a vertex; writes `replica,final_state,jumps`.
    Simulate {
        #[arg(long)]
        net: PathBuf,
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long, default_value_t = 1)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fixed point and random iterates of the renormalization map.
    Homogenize {
        #[arg(long, default_value = "gasket")]
        scheme: String,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// `1..4` (inclusive) or `1,2,4`.
        #[arg(long, default_value = "1..4")]
        levels: String,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs an experiment described by a JSON configuration.
    Experiment {
        #[arg(long, required_unless_present = "schema")]
        config: Option<PathBuf>,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Prints the configuration schema and exits.
        #[arg(long)]
        schema: bool,
    },
}

fn config_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

fn load(path: &Path) -> Result<ResistanceNetwork> {
    let f = File::open(path).map_err(|e| config_error(path, e))?;
    read_network(NetworkFormat::from_path(path), BufReader::new(f))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| config_error(path, e))?))
}

fn parse_levels(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("cannot parse levels `{s}`"));
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
        return Ok((a..=b).collect());
    }
    s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}

fn parse_pairs(s: &str, net: &ResistanceNetwork) -> Result<Vec<(usize, usize)>> {
    let n = net.vertex_count();
    match s {
        "all" => Ok((0..n).flat_map(|x| (x + 1..n).map(move |y| (x, y))).collect()),
        "root" => Ok((0..n).filter(|x| *x != net.root()).map(|x| (net.root(), x)).collect()),
        list => list
            .split(',')
            .map(|p| {
                let (x, y) = p.split_once('-').ok_or_else(|| Error::Config(format!("bad pair `{p}`")))?;
                let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad vertex `{v}`")));
                let (x, y) = (parse(x)?, parse(y)?);
                net.check_vertex(x)?;
                net.check_vertex(y)?;
                Ok((x, y))
            })
            .collect(),
    }
}

fn emit(report: &reslab::harness::Report, out: Option<&Path>) -> Result<()> {
    match out {
        Some(dir) => {
            for p in emit_report(report, dir, &OutputFormat::ALL)? {
                println!("{}", p.display());
            }
        }
        None => println!("{}", serde_json::to_string_pretty(report)?),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build { scheme, level, out } => {
            let scheme = FractalScheme::by_name(&scheme).map_err(|e| Error::Config(e.to_string()))?;
            let g = build_fractal_graph(&scheme, level)?;
            let mut w = create(&out)?;
            write_network(&g.network, NetworkFormat::from_path(&out), &mut w)?;
            w.flush()?;
            log::info!("wrote {} vertices, {} edges", g.network.vertex_count(), g.network.edge_count());
        }
        Command::Resist { net, pairs, out } => {
            let net = load(&net)?;
            let pairs = parse_pairs(&pairs, &net)?;
            let r = resistance_matrix(&net)?;
            let mut w = create(&out)?;
            writeln!(w, "x,y,resistance")?;
            for (x, y) in pairs {
                writeln!(w, "{x},{y},{:?}", r.get(x, y))?;
            }
            w.flush()?;
        }
        Command::Simulate { net, start, horizon, replicas, seed, out } => {
            let net = load(&net)?;
            net.check_vertex(start)?;
            if !(horizon > 0.0) || !horizon.is_finite() {
                return Err(Error::Config(format!("T must be positive, got {horizon}")));
            }
            let chain = JumpChain::vsrw(&net)?;
            let rows: Vec<(usize, usize)> = (0..replicas)
                .into_par_iter()
                .map(|r| {
                    let mut rng = stream(seed, r as u64);
                    let t = chain.trajectory(start, horizon, &mut rng)?;
                    Ok((*t.states().last().expect("paths are nonempty"), t.jump_count()))
                })
                .collect::<Result<_>>()?;
            let mut w: Box<dyn Write> = match out {
                Some(p) => Box::new(create(&p)?),
                None => Box::new(std::io::stdout().lock()),
            };
            writeln!(w, "replica,final_state,jumps")?;
            for (r, (x, j)) in rows.iter().enumerate() {
                writeln!(w, "{r},{x},{j}")?;
            }
            w.flush()?;
        }
        Command::Homogenize { scheme, alpha, levels, samples, seed, out } => {
            let mut c = ExperimentConfig::new(ExperimentKind::Homogenize, parse_levels(&levels)?);
            c.scheme = scheme;
            c.alpha = Some(alpha);
            c.replicas = samples;
            c.seed = seed;
            c.output = out.clone();
            let report = run_experiment(&c)?;
            emit(&report, out.as_deref())?;
        }
        Command::Experiment { config, out, schema } => {
            if schema {
                println!("{}", serde_json::to_string_pretty(&ExperimentConfig::schema())?);
                return Ok(());
            }
            let path = config.expect("required by clap");
            let text = std::fs::read_to_string(&path).map_err(|e| config_error(&path, e))?;
            let c = ExperimentConfig::from_json(&text)?;
            let report = run_experiment(&c)?;
            emit(&report, out.as_deref().or(c.output.as_deref()))?;
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) | Error::NoConvergence { .. } | Error::EventCap(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Ok(v) = std::env::var("RESLAB_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("thread pool: {e}");
                }
            }
            _ => {
                eprintln!("error: RESLAB_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
