use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rybu_core::dedan::print_dedan;
use rybu_core::lts::{build_lts, check, Completeness, ExplorationLimits, Verdict};
use rybu_core::report::{render_dot, render_path_dot, render_trace, DotOptions, DotView};

use crate::input::{self, InputError, Loaded};
use crate::json::{GraphView, VerifyView};
use crate::{Command, Format, InputArgs, EXIT_DEADLOCK, EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_OK};

/// Failure of a command, reported on standard error with exit code 1.
struct Failure(String);

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Self(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self(format!("error: {e}"))
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, stdout: &mut dyn Write, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => write_file(path, text),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

fn load(args: &InputArgs, stderr: &mut dyn Write) -> Result<Loaded, Failure> {
    let loaded = input::load(&args.input, args.lang, args.bootstrap)?;
    for w in loaded.warnings() {
        writeln!(stderr, "{}:{w}", args.input.display())?;
    }
    Ok(loaded)
}

pub(crate) fn dispatch(
    command: Command,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let result = match command {
        Command::Compile {
            input,
            bootstrap,
            out,
        } => compile(&input, bootstrap, out.as_deref(), stdout, stderr),
        Command::Verify {
            input,
            limits,
            format,
            out,
        } => verify(&input, &limits.limits(), format, out, stdout, stderr),
        Command::Graph {
            input,
            limits,
            format,
            cap,
            server,
            agent,
            out,
        } => {
            let view = match (server, agent) {
                (Some(s), _) => DotView::Server(s),
                (None, Some(a)) => DotView::Agent(a),
                (None, None) => DotView::Full,
            };
            graph(
                &input,
                &limits.limits(),
                format,
                DotOptions { cap, view },
                out.as_deref(),
                stdout,
                stderr,
            )
        }
        Command::Simulate {
            input,
            limits,
            seed,
            replay,
        } => simulate(
            &input,
            &limits.limits(),
            seed,
            replay.as_deref(),
            stdin,
            stdout,
            stderr,
        ),
        Command::Serve {
            input,
            limits,
            port,
        } => serve(&input, &limits.limits(), port, stderr),
    };
    match result {
        Ok(code) => code,
        Err(Failure(message)) => {
            let _ = writeln!(stderr, "{message}");
            EXIT_ERROR
        }
    }
}

fn compile(
    path: &Path,
    bootstrap: bool,
    out: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    if input::detect_lang(path, None).ok() == Some(input::Lang::Dedan) {
        return Err(InputError::NotRybu(path.to_path_buf()).into());
    }
    let text = input::read(path)?;
    let lowered = input::compile_rybu(path, &text, bootstrap)?;
    for w in &lowered.warnings {
        writeln!(stderr, "{}:{w}", path.display())?;
    }
    let dedan = print_dedan(&lowered.dedan)
        .map_err(|e| Failure(format!("{}: error: {e}", path.display())))?;
    emit(out, stdout, &dedan)?;
    Ok(EXIT_OK)
}

fn verify(
    args: &InputArgs,
    limits: &ExplorationLimits,
    format: Format,
    out: Option<PathBuf>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let loaded = load(args, stderr)?;
    let model = &loaded.model;
    let (lts, report) = check(model, limits);
    let witness = report.primary_witness().map(|(_, p)| p.to_vec());

    match format {
        Format::Json => {
            let view = VerifyView::new(model, &lts, &report);
            let text = serde_json::to_string_pretty(&view).expect("views serialize");
            writeln!(stdout, "{text}")?;
        }
        Format::Dot => {
            if let Some(path) = &witness {
                let dot = render_path_dot(model, path).map_err(|e| Failure(e.to_string()))?;
                stdout.write_all(dot.as_bytes())?;
            }
        }
        Format::Text => {
            let s = &report.statistics;
            let status = match s.status {
                Completeness::Complete => "complete",
                Completeness::NodeLimit => "stopped at the node limit",
                Completeness::DepthLimit => "stopped at the depth limit",
            };
            writeln!(
                stdout,
                "model {}: {} nodes, {} edges, {status}",
                model.name(),
                s.nodes,
                s.edges
            )?;
            let verdict = match report.verdict {
                Verdict::NoDeadlock => "no deadlock",
                Verdict::Deadlock => "deadlock",
                Verdict::Inconclusive => "inconclusive",
            };
            writeln!(stdout, "verdict: {verdict}")?;
            if report.verdict != Verdict::Inconclusive {
                writeln!(stdout, "total deadlocks: {}", report.total_deadlocks.len())?;
                for t in &report.total_deadlocks {
                    let c = model.named_configuration(lts.node(t.node).expect("reported node"));
                    writeln!(
                        stdout,
                        "  node {} after {} steps: {c}",
                        t.node,
                        t.path.len()
                    )?;
                }
                writeln!(
                    stdout,
                    "partial deadlocks: {}",
                    report.partial_deadlocks.len()
                )?;
                for p in &report.partial_deadlocks {
                    writeln!(
                        stdout,
                        "  {} at node {} after {} steps",
                        model.agent_name(p.agent),
                        p.node,
                        p.path.len()
                    )?;
                }
            }
        }
    }

    if let Some(path) = &witness {
        let trace = render_trace(model, path).map_err(|e| Failure(e.to_string()))?;
        let file = out
            .unwrap_or_else(|| PathBuf::from(format!("{}.trace", input::system_name(&args.input))));
        write_file(&file, &trace)?;
        writeln!(stderr, "trace written to {}", file.display())?;
        if format == Format::Text {
            writeln!(stdout)?;
            stdout.write_all(trace.as_bytes())?;
        }
    }
    Ok(match report.verdict {
        Verdict::NoDeadlock => EXIT_OK,
        Verdict::Deadlock => EXIT_DEADLOCK,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    })
}

fn graph(
    args: &InputArgs,
    limits: &ExplorationLimits,
    format: Format,
    options: DotOptions,
    out: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let loaded = load(args, stderr)?;
    let model = &loaded.model;
    let full = options.view == DotView::Full;
    // Exploring one node past the cap is enough to refuse.
    let bounded = ExplorationLimits {
        max_nodes: if full {
            limits.max_nodes.min(options.cap.saturating_add(1))
        } else {
            1
        },
        ..*limits
    };
    let lts = build_lts(model, &bounded);
    if full && lts.node_count() > options.cap {
        return Err(Failure(format!(
            "{}",
            rybu_core::report::ReportError::TooLarge {
                nodes: lts.node_count(),
                cap: options.cap,
            }
        )));
    }
    let text = match format {
        Format::Dot => render_dot(model, &lts, &options).map_err(|e| Failure(e.to_string()))?,
        Format::Json if full => {
            serde_json::to_string_pretty(&GraphView::new(model, &lts)).expect("views serialize")
                + "\n"
        }
        Format::Text if full => {
            let mut text = String::new();
            for (id, c) in lts.nodes() {
                text.push_str(&format!("n{id} {}\n", model.named_configuration(c)));
            }
            for e in lts.edges() {
                text.push_str(&format!(
                    "n{} -> n{} {}\n",
                    e.from,
                    e.to,
                    model.fmt_action(lts.action(e.action))
                ));
            }
            text
        }
        _ => {
            return Err(Failure(
                "error: projections are only available as DOT".into(),
            ))
        }
    };
    emit(out, stdout, &text)?;
    if full && !lts.is_complete() {
        writeln!(
            stderr,
            "warning: the graph is incomplete ({:?})",
            lts.status()
        )?;
        return Ok(EXIT_INCONCLUSIVE);
    }
    Ok(EXIT_OK)
}

fn simulate(
    args: &InputArgs,
    limits: &ExplorationLimits,
    seed: u64,
    replay: Option<&Path>,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let loaded = load(args, stderr)?;
    let mut sim = crate::simulate::Simulator::new(Arc::new(loaded), *limits, seed);
    if let Some(path) = replay {
        let text = input::read(path)?;
        sim.queue_trace(&text)
            .map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    }
    sim.repl(stdin, stdout)?;
    Ok(EXIT_OK)
}

fn serve(
    args: &InputArgs,
    limits: &ExplorationLimits,
    port: u16,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let loaded = load(args, stderr)?;
    let state = crate::api::AppState::new(loaded, *limits);
    let runtime = tokio::runtime::Runtime::new()?;
    writeln!(stderr, "serving on http://127.0.0.1:{port}")?;
    runtime.block_on(crate::api::serve(state, port))?;
    Ok(EXIT_OK)
}
