//! The `rybu` command: compile Rybu to Dedan, verify models for deadlocks,
//! draw state graphs, step through models interactively, and serve the
//! simulation API.
//!
//! Exit codes: 0 success (no deadlock), 1 input or usage error, 2 deadlock
//! found, 3 exploration limit reached before a verdict.

pub mod api;
mod commands;
pub mod input;
pub mod json;
pub mod session;
pub mod simulate;

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rybu_core::lts::ExplorationLimits;

use input::Lang;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_DEADLOCK: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

pub const DEFAULT_PORT: u16 = 7878;
pub const DEFAULT_GRAPH_CAP: usize = 2000;

#[derive(Debug, Parser)]
#[command(
    name = "rybu",
    version,
    about = "Rybu compiler and IMDS deadlock checker"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// A `.rybu` or `.dedan` file.
    pub input: PathBuf,
    /// Input language; guessed from the extension when absent.
    #[arg(long, value_enum)]
    pub lang: Option<Lang>,
    /// Give every Rybu thread an initial `start` message and `ini` state.
    #[arg(long)]
    pub bootstrap: bool,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    /// Stop exploring after this many configurations.
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_nodes: u64,
    /// Stop exploring below this breadth-first depth.
    #[arg(long)]
    pub max_depth: Option<usize>,
}

impl LimitArgs {
    pub fn limits(&self) -> ExplorationLimits {
        ExplorationLimits {
            max_nodes: usize::try_from(self.max_nodes).unwrap_or(usize::MAX),
            max_depth: self.max_depth,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Translate a Rybu program to Dedan text.
    Compile {
        /// The `.rybu` source.
        input: PathBuf,
        /// Start every thread in `ini`, waiting for a `start` message.
        #[arg(long)]
        bootstrap: bool,
        /// Write the Dedan text here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Explore the state space and report total and partial deadlocks.
    Verify {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        limits: LimitArgs,
        /// `text` report, `json` document, or `dot` drawing of the witness.
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Where to write the counterexample trace (default: `<input stem>.trace`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the reachable graph or a projection of one component.
    Graph {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        limits: LimitArgs,
        /// `dot` drawing, `json` node and edge lists, or one `text` line per node and edge.
        #[arg(long, value_enum, default_value_t = Format::Dot)]
        format: Format,
        /// Refuse to print full graphs with more nodes than this.
        #[arg(long, default_value_t = DEFAULT_GRAPH_CAP)]
        cap: usize,
        /// Draw only this server's automaton.
        #[arg(long, conflicts_with = "agent")]
        server: Option<String>,
        /// Draw only this agent's automaton.
        #[arg(long)]
        agent: Option<String>,
        /// Write the graph here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Step through the model in the terminal.
    Simulate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        limits: LimitArgs,
        /// Seed for random walks.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Queue the steps of a trace file for replay.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Serve the JSON simulation API on the loopback interface.
    Serve {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        limits: LimitArgs,
        /// TCP port on 127.0.0.1.
        #[arg(long, env = "RYBU_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
    },
}

/// Runs the command line `args` (program name first) against the given
/// streams and returns the exit code.
pub fn run<I, T>(
    args: I,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_ERROR
                }
            };
        }
    };
    commands::dispatch(cli.command, stdin, stdout, stderr)
}
