//! `specflow`: spectral flow of unitary paths and Levinson checks from the command line.
//!
//! Every computation emits one JSON line `{"version", "command", ...}` on
//! stdout (and in `<out>/records.jsonl` when `--out` is given). Failures emit
//! a record with an `error` object and exit with status 1; invalid usage exits
//! with status 2.

mod commands;
mod config;
mod matrix_io;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use config::{ConfigError, Options};
use specflow::scatter::PotentialSpec;

const RECORD_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "specflow", version, about = "Spectral flow of unitary paths and Levinson's theorem checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    options: Options,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral flow of the rank-k model loop.
    SfLoop {
        /// `k=<rank>,dim=<dimension>`
        #[arg(long)]
        model: String,
    },
    /// Spectral flow of a named path: `model:k:dim`, `geodesic:<matrix.json>`, `scattering:<potential.toml>`.
    SfPath {
        #[arg(long)]
        path: String,
    },
    /// Regularized determinant `Det_p` of a unitary from a JSON matrix file.
    Det {
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Cayley transform of a unitary, and the `F_p` distance to a second one.
    Cayley {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        other: Option<PathBuf>,
    },
    /// Levinson's theorem by the Phillips count and both integral routes.
    Levinson {
        #[arg(long, default_value_t = 1)]
        dim: u32,
        /// Square well on the line: `depth=<V0>,halfwidth=<a>`.
        #[arg(long, conflicts_with = "potential")]
        well: Option<String>,
        /// Constant ball in 3D: `depth=<V0>,radius=<R>`.
        #[arg(long, conflicts_with = "potential")]
        ball: Option<String>,
        /// Potential file (TOML); its `dimension` key overrides --dim.
        #[arg(long)]
        potential: Option<PathBuf>,
    },
    /// Fast invariant suite; exit status 0 when every check passes.
    Selftest,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SfLoop { .. } => "sf-loop",
            Command::SfPath { .. } => "sf-path",
            Command::Det { .. } => "det",
            Command::Cayley { .. } => "cayley",
            Command::Levinson { .. } => "levinson",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Path(#[from] specflow::upath::PathError),
    #[error(transparent)]
    Sflow(#[from] specflow::sflow::SflowError),
    #[error(transparent)]
    Determinant(#[from] specflow::rdet::RdetError),
    #[error(transparent)]
    Cayley(#[from] specflow::cayley::CayleyError),
    #[error(transparent)]
    Matrix(#[from] specflow::matcore::MatError),
    #[error(transparent)]
    Scatter(#[from] specflow::scatter::ScatterError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn input(msg: String) -> Self {
        CliError::Input(msg)
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Input(_) => "input",
            CliError::Config(_) => "config",
            CliError::Path(_) => "path",
            CliError::Sflow(_) => "spectral_flow",
            CliError::Determinant(_) => "determinant",
            CliError::Cayley(_) => "cayley",
            CliError::Matrix(_) => "matrix",
            CliError::Scatter(_) => "scattering",
            CliError::Io(_) => "io",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

struct Sink {
    file: Option<std::fs::File>,
    out_dir: Option<PathBuf>,
}

impl Sink {
    fn open(out: Option<&Path>) -> Result<Self, CliError> {
        let Some(dir) = out else {
            return Ok(Sink { file: None, out_dir: None });
        };
        std::fs::create_dir_all(dir)?;
        let file = std::fs::OpenOptions::new().create(true).append(true).open(dir.join("records.jsonl"))?;
        Ok(Sink { file: Some(file), out_dir: Some(dir.to_path_buf()) })
    }

    fn emit(&mut self, record: &Value) -> Result<(), CliError> {
        let line = serde_json::to_string(record).expect("records are plain JSON");
        println!("{line}");
        if let Some(f) = self.file.as_mut() {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }

    fn table(&self, name: &str, csv: &str) -> Result<PathBuf, CliError> {
        let dir = self.out_dir.as_ref().expect("--grid is validated to come with --out");
        let path = dir.join(name);
        std::fs::write(&path, csv)?;
        Ok(path)
    }
}

fn record(command: &str, body: Value) -> Value {
    let mut r = json!({ "version": RECORD_VERSION, "command": command });
    if let (Value::Object(dst), Value::Object(src)) = (&mut r, body) {
        dst.extend(src);
    }
    r
}

fn load_system(dim: u32, well: Option<&str>, ball: Option<&str>, potential: Option<&Path>) -> Result<PotentialSpec, CliError> {
    match potential {
        Some(p) => Ok(PotentialSpec::load(p)?),
        None => commands::inline_system(dim, well, ball),
    }
}

fn run(command: &Command, opts: &Options, sink: &mut Sink) -> Result<bool, CliError> {
    let name = command.name();
    let body = match command {
        Command::SfLoop { model } => commands::sf_loop(model, opts)?,
        Command::SfPath { path } => commands::sf_path(path, opts)?,
        Command::Det { matrix } => commands::det(matrix, opts)?,
        Command::Cayley { matrix, other } => commands::cayley_cmd(matrix, other.as_deref(), opts)?,
        Command::Levinson { dim, well, ball, potential } => {
            let system = load_system(*dim, well.as_deref(), ball.as_deref(), potential.as_deref())?;
            let (report, sweep) = commands::levinson(&system, opts)?;
            let mut body = json!({ "dimension": system.dimension(), "report": report });
            if let Some((file, csv)) = sweep {
                body["table"] = json!(sink.table(&file, &csv)?.display().to_string());
            }
            body
        }
        Command::Selftest => {
            let checks = commands::selftest(opts);
            let all = checks.iter().all(|c| c.1);
            for (check, pass, detail) in checks {
                sink.emit(&record(name, json!({ "check": check, "pass": pass, "detail": detail })))?;
            }
            sink.emit(&record(name, json!({ "summary": { "pass": all } })))?;
            return Ok(all);
        }
    };
    sink.emit(&record(name, json!({ "result": body })))?;
    Ok(true)
}

fn fail(name: &str, sink: Option<&mut Sink>, e: CliError) -> ExitCode {
    let rec = record(name, json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
    match sink {
        Some(sink) => {
            let _ = sink.emit(&rec);
        }
        None => println!("{rec}"),
    }
    log::error!("{e}");
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SPECFLOW_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return fail("", None, CliError::usage(e.kind().to_string()));
        }
    };
    let name = cli.command.name();
    let opts = match cli.options.clone().resolve() {
        Ok(o) => o,
        Err(e) => return fail(name, None, e.into()),
    };
    if let Some(jobs) = opts.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            return fail(name, None, CliError::usage(format!("cannot size the worker pool: {e}")));
        }
    }
    let mut sink = match Sink::open(opts.out.as_deref()) {
        Ok(s) => s,
        Err(e) => return fail(name, None, e),
    };
    match run(&cli.command, &opts, &mut sink) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => fail(name, Some(&mut sink), e),
    }
}
