//! Workspace parsing, subcommands and JSON reports for the `viewforge`
//! binary.

pub mod commands;
pub mod design;
pub mod lexer;
pub mod notation;
pub mod report;
pub mod verify;
pub mod workspace;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use design::DesignClass;
use report::{envelope, CliError, Outcome, Settings, EXIT_INPUT};

#[derive(Debug, Parser)]
#[command(name = "viewforge", version, about = "Design views over distributed sources that answer a query without disclosing secrets")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalFlags {
    /// Chase step budget per run.
    #[arg(long, global = true)]
    pub fuel: Option<usize>,
    /// Round limit of the determinacy procedure.
    #[arg(long, global = true)]
    pub max_rounds: Option<usize>,
    /// Domain size of the brute-force oracle.
    #[arg(long, global = true)]
    pub domain_size: Option<usize>,
    /// Facts per relation in oracle instances.
    #[arg(long, global = true)]
    pub max_facts: Option<usize>,
    /// Print the versioned JSON report instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Include intermediate chase rounds.
    #[arg(long, global = true)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct QueryArg {
    /// Query name (defaults to the only query).
    #[arg(long, short)]
    pub query: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a workspace and check instances against the schema.
    Validate { file: PathBuf },
    /// Canonical views of a query, one per source.
    Canonical {
        file: PathBuf,
        #[command(flatten)]
        q: QueryArg,
    },
    /// Minimize a query, under the workspace rules if any.
    Minimize {
        file: PathBuf,
        #[command(flatten)]
        q: QueryArg,
    },
    /// Shuffle views of a Boolean query.
    Shuffles {
        file: PathBuf,
        #[command(flatten)]
        q: QueryArg,
        #[arg(long)]
        source: Option<String>,
    },
    /// Compile views to relational algebra.
    #[command(name = "to-ra")]
    ToRa {
        file: PathBuf,
        /// Views to compile (defaults to all workspace views).
        #[arg(long = "view")]
        views: Vec<String>,
        /// Compile the shuffle views of the query instead.
        #[arg(long)]
        shuffles: bool,
        #[command(flatten)]
        q: QueryArg,
    },
    /// Does a d-view determine the query?
    Determinacy {
        file: PathBuf,
        #[command(flatten)]
        q: QueryArg,
        #[arg(long)]
        dview: String,
    },
    /// Is a d-view UN non-disclosing for each secret?
    Disclosure {
        file: PathBuf,
        #[arg(long)]
        dview: String,
        #[arg(long = "secret")]
        secrets: Vec<String>,
    },
    /// Do useful, non-disclosing d-views exist?
    Design {
        file: PathBuf,
        #[command(flatten)]
        q: QueryArg,
        #[arg(long = "secret")]
        secrets: Vec<String>,
        #[arg(long, value_enum, default_value = "cq")]
        class: DesignClass,
    },
    /// Iterate the Str transformation and check its properties.
    Replication {
        file: PathBuf,
        #[command(flatten)]
        q: QueryArg,
        #[arg(long = "secret")]
        secrets: Vec<String>,
        /// Start instance (defaults to the critical instance).
        #[arg(long)]
        instance: Option<String>,
        #[arg(long, default_value_t = 2)]
        steps: usize,
    },
    /// Brute-force checks over small instances.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Re-check the witnesses of a JSON report.
    Verify { report: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Exact (s,Q)-equivalence of two instances.
    Equiv {
        file: PathBuf,
        #[command(flatten)]
        q: QueryArg,
        #[arg(long)]
        source: String,
        left: String,
        right: String,
    },
    /// Search for a determinacy counterexample.
    Determinacy {
        file: PathBuf,
        #[command(flatten)]
        q: QueryArg,
        #[arg(long)]
        dview: String,
    },
    /// Search for a disclosure witness.
    Disclosure {
        file: PathBuf,
        #[arg(long)]
        dview: String,
        #[arg(long = "secret")]
        secrets: Vec<String>,
    },
}

/// Exit code and captured output of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate { .. } => "validate",
        Command::Canonical { .. } => "canonical",
        Command::Minimize { .. } => "minimize",
        Command::Shuffles { .. } => "shuffles",
        Command::ToRa { .. } => "to-ra",
        Command::Determinacy { .. } => "determinacy",
        Command::Disclosure { .. } => "disclosure",
        Command::Design { .. } => "design",
        Command::Replication { .. } => "replication",
        Command::Oracle(OracleCommand::Equiv { .. }) => "oracle equiv",
        Command::Oracle(OracleCommand::Determinacy { .. }) => "oracle determinacy",
        Command::Oracle(OracleCommand::Disclosure { .. }) => "oracle disclosure",
        Command::Verify { .. } => "verify",
    }
}

fn file_of(c: &Command) -> &PathBuf {
    match c {
        Command::Validate { file }
        | Command::Canonical { file, .. }
        | Command::Minimize { file, .. }
        | Command::Shuffles { file, .. }
        | Command::ToRa { file, .. }
        | Command::Determinacy { file, .. }
        | Command::Disclosure { file, .. }
        | Command::Design { file, .. }
        | Command::Replication { file, .. }
        | Command::Oracle(OracleCommand::Equiv { file, .. })
        | Command::Oracle(OracleCommand::Determinacy { file, .. })
        | Command::Oracle(OracleCommand::Disclosure { file, .. }) => file,
        Command::Verify { report } => report,
    }
}

/// Run a parsed command; returns the outcome and the embedded workspace
/// text.
pub fn execute(cli: &Cli) -> Result<(Outcome, String), CliError> {
    let g = &cli.global;
    let s = Settings {
        fuel: g.fuel,
        max_rounds: g.max_rounds,
        domain_size: g.domain_size,
        max_facts: g.max_facts,
        trace: g.trace,
    };
    let text = read(file_of(&cli.command))?;
    if let Command::Verify { .. } = cli.command {
        return Ok((verify::verify(&text)?, String::new()));
    }
    let ws = workspace::parse_workspace(&text).map_err(CliError::Workspace)?;
    let normalized = workspace::print_workspace(&ws);
    let q = |a: &QueryArg| a.query.clone();
    let o = match &cli.command {
        Command::Validate { .. } => commands::validate(&ws),
        Command::Canonical { q: a, .. } => commands::canonical(&ws, q(a).as_deref())?,
        Command::Minimize { q: a, .. } => commands::minimize_cmd(&ws, q(a).as_deref(), &s)?,
        Command::Shuffles { q: a, source, .. } => commands::shuffles(&ws, q(a).as_deref(), source.as_deref(), &s)?,
        Command::ToRa { views, shuffles, q: a, .. } => commands::to_ra(&ws, views, *shuffles, q(a).as_deref(), &s)?,
        Command::Determinacy { q: a, dview, .. } => commands::determinacy(&ws, q(a).as_deref(), dview, &s)?,
        Command::Disclosure { dview, secrets, .. } => commands::disclosure(&ws, dview, secrets, &s)?,
        Command::Design { q: a, secrets, class, .. } => design::design(&ws, q(a).as_deref(), secrets, *class, &s)?,
        Command::Replication {
            q: a,
            secrets,
            instance,
            steps,
            ..
        } => commands::replication(&ws, q(a).as_deref(), secrets, instance.as_deref(), *steps)?,
        Command::Oracle(OracleCommand::Equiv {
            q: a,
            source,
            left,
            right,
            ..
        }) => commands::oracle_equiv(&ws, q(a).as_deref(), source, left, right, &s)?,
        Command::Oracle(OracleCommand::Determinacy { q: a, dview, .. }) => {
            commands::oracle_determinacy(&ws, q(a).as_deref(), dview, &s)?
        }
        Command::Oracle(OracleCommand::Disclosure { dview, secrets, .. }) => {
            commands::oracle_disclosure(&ws, dview, secrets, &s)?
        }
        Command::Verify { .. } => unreachable!(),
    };
    Ok((o, normalized))
}

/// Parse arguments (including the program name) and run.
pub fn run<I, T>(args: I) -> RunOutput
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let rendered = e.render().to_string();
            let (stdout, stderr) = if e.use_stderr() { (String::new(), rendered) } else { (rendered, String::new()) };
            return RunOutput { code, stdout, stderr };
        }
    };
    match execute(&cli) {
        Ok((o, ws_text)) => {
            let stdout = if cli.global.json {
                let mut s = serde_json::to_string_pretty(&envelope(&o, &ws_text)).expect("reports serialize");
                s.push('\n');
                s
            } else {
                o.text.clone()
            };
            RunOutput {
                code: o.status.exit_code(),
                stdout,
                stderr: String::new(),
            }
        }
        Err(e) => {
            let name = command_name(&cli.command);
            if cli.global.json {
                let mut s = serde_json::to_string_pretty(&e.json(name)).expect("reports serialize");
                s.push('\n');
                RunOutput {
                    code: EXIT_INPUT,
                    stdout: s,
                    stderr: String::new(),
                }
            } else {
                RunOutput {
                    code: EXIT_INPUT,
                    stdout: String::new(),
                    stderr: format!("{}: {e}\n", file_of(&cli.command).display()),
                }
            }
        }
    }
}
