//! The `nestpoly` command line. Exit status is 0 on success, 1 when the
//! input has diagnostics (or two programs disagree), 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::hwconfig::{load_config, Config};
use crate::interp::{execute, read_store, write_store, BufferStore};
use crate::ir::{Program, Statement};
use crate::passes::{apply_pipeline, tile_cost, PassConfig, TileShape};
use crate::text::{parse_program, parse_syntax, print_program};
use crate::validate::{check_parallel_semantics, has_errors, validate_static_with_spans};

#[derive(Debug, Parser)]
#[command(name = "nestpoly", version, about = "Parse, check, run and optimize nested polyhedral programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the canonical form of a program.
    Parse { file: PathBuf },
    /// Report static diagnostics; with --dynamic also trace conflicts on real data.
    Validate {
        file: PathBuf,
        #[arg(long, requires = "data")]
        dynamic: bool,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Execute a program on a buffer directory.
    Run {
        file: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Write output buffers here instead of printing them.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep output contents from --data instead of resetting them.
        #[arg(long)]
        no_zero_init: bool,
    },
    /// Apply the pass pipeline of a config file and print the result.
    Opt {
        file: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Print per-pass report lines on stderr.
        #[arg(long)]
        emit_reports: bool,
        /// Pin every autotile pass to this shape, e.g. x=3,y=4.
        #[arg(long)]
        tiles: Option<String>,
    },
    /// Cost of one tile shape for the first tileable block.
    Cost {
        file: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        tiles: String,
    },
    /// Run two programs on the same data and compare their outputs.
    Diff {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

/// A failure already rendered for stderr, with its exit status.
struct Failure(i32, String);

type Outcome = Result<(), Failure>;

fn diag(msg: impl Into<String>) -> Failure {
    Failure(1, msg.into())
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| diag(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Program, Failure> {
    let text = read_text(path)?;
    parse_program(&text).map_err(|e| diag(format!("{}: {e}", path.display())))
}

fn load_cfg(path: &Path) -> Result<Config, Failure> {
    let text = read_text(path)?;
    load_config(&text).map_err(|e| diag(format!("{}: {e}", path.display())))
}

fn parse_tiles(s: &str) -> Result<TileShape, Failure> {
    s.parse().map_err(|e| Failure(2, format!("--tiles: {e}")))
}

/// Buffers for a run: zeros for everything, output identities unless
/// `keep_outputs`, then whatever `dir` supplies.
fn inputs(p: &Program, dir: &Path, keep_outputs: bool) -> Result<BufferStore, Failure> {
    let data = read_store(dir).map_err(|e| diag(e.to_string()))?;
    let outputs: Vec<String> = p.outputs().iter().map(|r| r.buffer.clone()).collect();
    let mut s = BufferStore::zeros_for(p);
    if !keep_outputs {
        s.init_outputs(p);
    }
    for (name, t) in data.iter() {
        if !p.buffers.contains_key(name) || (!keep_outputs && outputs.iter().any(|o| o == name)) {
            continue;
        }
        s.insert(name, t.clone());
    }
    Ok(s)
}

fn run_outputs(p: &Program, s: BufferStore) -> Result<BufferStore, Failure> {
    let mut done = execute(p, s).map_err(|e| diag(e.to_string()))?;
    let mut out = BufferStore::new();
    for r in p.outputs() {
        if let Some(t) = done.take(&r.buffer) {
            out.insert(r.buffer.clone(), t);
        }
    }
    Ok(out)
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let w = |r: std::io::Result<()>| r.map_err(|e| diag(e.to_string()));
    match cmd {
        Command::Parse { file } => {
            let p = load_program(&file)?;
            w(out.write_all(print_program(&p).as_bytes()))
        }
        Command::Validate { file, dynamic, data } => {
            let text = read_text(&file)?;
            let (p, spans) = parse_syntax(&text).map_err(|e| diag(format!("{}: {e}", file.display())))?;
            let diags = validate_static_with_spans(&p, &spans);
            for d in &diags {
                w(writeln!(err, "{}", d.render(&file.display().to_string())))?;
            }
            if has_errors(&diags) {
                return Err(diag(format!("{}: {} diagnostic(s)", file.display(), diags.len())));
            }
            if dynamic {
                let dir = data.expect("clap requires --data");
                let report = check_parallel_semantics(&p, inputs(&p, &dir, false)?).map_err(|e| diag(e.to_string()))?;
                for c in &report.conflicts {
                    w(writeln!(err, "{c}"))?;
                }
                if !report.is_empty() {
                    return Err(diag(format!("{}: {} conflict(s)", file.display(), report.conflicts.len())));
                }
            }
            w(writeln!(out, "ok"))
        }
        Command::Run {
            file,
            data,
            out: dest,
            no_zero_init,
        } => {
            let p = load_program(&file)?;
            let result = run_outputs(&p, inputs(&p, &data, no_zero_init)?)?;
            match dest {
                Some(dir) => write_store(&dir, &result).map_err(|e| diag(e.to_string())),
                None => {
                    for (name, t) in result.iter() {
                        let vals: Vec<String> = t.data.iter().map(i32::to_string).collect();
                        w(writeln!(out, "{name} {} {}: {}", t.dtype, t.len(), vals.join(" ")))?;
                    }
                    Ok(())
                }
            }
        }
        Command::Opt {
            file,
            config,
            emit_reports,
            tiles,
        } => {
            let p = load_program(&file)?;
            let mut cfg = load_cfg(&config)?;
            if let Some(t) = tiles {
                let shape = parse_tiles(&t)?.to_string();
                let mut pinned = false;
                for pc in cfg.pipeline.iter_mut().filter(|pc| pc.name == "autotile") {
                    pc.params.insert("tiles".into(), shape.clone());
                    pinned = true;
                }
                if !pinned {
                    cfg.pipeline.insert(0, PassConfig::new("autotile").with("tiles", shape));
                }
            }
            let (q, reports) = apply_pipeline(&p, &cfg).map_err(|e| diag(e.to_string()))?;
            if emit_reports {
                for r in &reports {
                    w(writeln!(err, "{r}"))?;
                }
            }
            w(out.write_all(print_program(&q).as_bytes()))
        }
        Command::Cost { file, config, tiles } => {
            let p = load_program(&file)?;
            let cfg = load_cfg(&config)?;
            let ts = parse_tiles(&tiles)?;
            let mem_name = cfg
                .pipeline
                .iter()
                .find(|pc| pc.name == "autotile")
                .and_then(|pc| pc.params.get("mem").cloned());
            let (_, mem) = cfg
                .hardware
                .mem(mem_name.as_deref())
                .ok_or_else(|| diag(format!("{}: no memory unit declared", config.display())))?;
            let block = p
                .root
                .statements
                .iter()
                .find_map(|s| match s {
                    Statement::Block(b) if b.ranged().any(|(_, r)| r > 1) => Some(b),
                    _ => None,
                })
                .ok_or_else(|| diag(format!("{}: no tileable block", file.display())))?;
            let report = tile_cost(block, &ts, &mem.cache_model(), mem.capacity).map_err(|e| diag(e.to_string()))?;
            w(writeln!(out, "{report}"))
        }
        Command::Diff { a, b, data } => {
            let (pa, pb) = (load_program(&a)?, load_program(&b)?);
            let ra = run_outputs(&pa, inputs(&pa, &data, false)?)?;
            let rb = run_outputs(&pb, inputs(&pb, &data, false)?)?;
            for (name, ta) in ra.iter() {
                let Some(tb) = rb.get(name) else {
                    w(writeln!(out, "{name}: missing from {}", b.display()))?;
                    return Err(Failure(1, String::new()));
                };
                if ta.len() != tb.len() {
                    w(writeln!(out, "{name}: {} elements vs {}", ta.len(), tb.len()))?;
                    return Err(Failure(1, String::new()));
                }
                if let Some(k) = (0..ta.len()).find(|&k| ta.data[k] != tb.data[k]) {
                    w(writeln!(out, "{name}[{k}]: {} vs {}", ta.data[k], tb.data[k]))?;
                    return Err(Failure(1, String::new()));
                }
            }
            w(writeln!(out, "identical"))
        }
    }
}

/// Runs the command line `args` (including the program name) and returns
/// the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(Failure(code, msg)) => {
            if !msg.is_empty() {
                let _ = writeln!(err, "{msg}");
            }
            code
        }
    }
}
