//! Line-driven terminal simulator.
//!
//! After every command the current configuration and the numbered enabled
//! actions are printed. Commands:
//!
//! | input        | effect                                          |
//! |--------------|-------------------------------------------------|
//! | `N`          | take the N-th enabled action                    |
//! | `undo`, `u`  | step back                                       |
//! | `reset`      | return to the initial configuration             |
//! | `walk [K]`   | take up to K random steps (seeded)              |
//! | `deadlock`   | restart and walk the shortest deadlock witness  |
//! | `load FILE`  | restart and queue the steps of a trace file     |
//! | `next`, `n`  | take the next queued step                       |
//! | `trace`      | print the steps taken so far as a trace         |
//! | `quit`, `q`  | leave                                           |

use std::collections::VecDeque;
use std::io::{self, BufRead, Write};
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rybu_core::imds::{ActionId, AgentSlot};
use rybu_core::lts::{check, ExplorationLimits, Verdict};
use rybu_core::report::{parse_trace_actions, render_trace, ReportError};

use crate::input::Loaded;
use crate::session::Session;

const DEFAULT_WALK: usize = 100;

pub struct Simulator {
    loaded: Arc<Loaded>,
    session: Session,
    limits: ExplorationLimits,
    rng: StdRng,
    queue: VecDeque<ActionId>,
}

impl Simulator {
    pub fn new(loaded: Arc<Loaded>, limits: ExplorationLimits, seed: u64) -> Self {
        let session = Session::new(Arc::new(loaded.model.clone()));
        Self {
            loaded,
            session,
            limits,
            rng: StdRng::seed_from_u64(seed),
            queue: VecDeque::new(),
        }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    /// Restarts and queues the steps of a rendered trace. Returns the
    /// number of queued steps.
    pub fn queue_trace(&mut self, text: &str) -> Result<usize, ReportError> {
        let steps = parse_trace_actions(&self.loaded.model, text)?;
        self.session.reset();
        self.queue = steps.into();
        Ok(self.queue.len())
    }

    pub fn print_state(&self, out: &mut dyn Write) -> io::Result<()> {
        let model = self.session.model();
        let config = self.session.current();
        writeln!(out, "step {}", self.session.depth())?;
        for s in model.servers() {
            let name = model.server_name(s);
            let value = config.state(s).map(|v| model.value_name(v)).unwrap_or("?");
            match self.loaded.state_vars(name, value) {
                Some(vars) if !vars.is_empty() => {
                    let vars: Vec<String> =
                        vars.iter().map(|(k, v)| format!("{k} = {v}")).collect();
                    writeln!(out, "  {name} = {value}  ({})", vars.join(", "))?;
                }
                _ => writeln!(out, "  {name} = {value}")?,
            }
        }
        for a in model.agents() {
            match config.slot(a) {
                Some(AgentSlot::Pending { server, service }) => writeln!(
                    out,
                    "  {} -> {}.{}",
                    model.agent_name(a),
                    model.server_name(server),
                    model.service_name(service)
                )?,
                Some(AgentSlot::Terminated) => {
                    writeln!(out, "  {} terminated", model.agent_name(a))?
                }
                _ => {}
            }
        }
        let enabled = self.session.enabled();
        if enabled.is_empty() {
            if config.has_pending() {
                let blocked: Vec<&str> = config
                    .pending_messages()
                    .map(|m| model.agent_name(m.agent))
                    .collect();
                writeln!(out, "DEADLOCK: {} blocked", blocked.join(", "))?;
            } else {
                writeln!(out, "all agents terminated")?;
            }
        } else {
            writeln!(out, "enabled:")?;
            for (i, &id) in enabled.iter().enumerate() {
                let a = model.action(id).expect("enabled ids are valid");
                writeln!(out, "  {}) {}", i + 1, model.fmt_action(a))?;
            }
        }
        if !self.queue.is_empty() {
            writeln!(out, "{} queued steps; `next` takes one", self.queue.len())?;
        }
        Ok(())
    }

    fn take(&mut self, id: ActionId, out: &mut dyn Write) -> io::Result<bool> {
        match self.session.step(id) {
            Ok(_) => Ok(true),
            Err(e) => {
                writeln!(out, "{e}")?;
                Ok(false)
            }
        }
    }

    /// Executes one command line. Returns `false` when the user quits.
    pub fn command(&mut self, line: &str, out: &mut dyn Write) -> io::Result<bool> {
        let mut words = line.split_whitespace();
        let Some(word) = words.next() else {
            return Ok(true);
        };
        let arg = words.next();
        match word {
            "quit" | "q" | "exit" => return Ok(false),
            "help" | "h" | "?" => {
                writeln!(
                    out,
                    "N | undo | reset | walk [K] | deadlock | load FILE | next | trace | quit"
                )?;
                return Ok(true);
            }
            "undo" | "u" => {
                if !self.session.undo() {
                    writeln!(out, "already at the initial configuration")?;
                }
            }
            "reset" | "r" => {
                self.session.reset();
                self.queue.clear();
            }
            "walk" | "w" => {
                let limit = match arg.map(str::parse::<usize>) {
                    None => DEFAULT_WALK,
                    Some(Ok(k)) => k,
                    Some(Err(_)) => {
                        writeln!(out, "walk takes a step count")?;
                        return Ok(true);
                    }
                };
                for _ in 0..limit {
                    let enabled = self.session.enabled();
                    let Some(&id) = enabled.choose(&mut self.rng) else {
                        break;
                    };
                    self.take(id, out)?;
                }
            }
            "deadlock" | "d" => {
                let (_, report) = check(self.session.model(), &self.limits);
                match (report.verdict, report.primary_witness()) {
                    (Verdict::Deadlock, Some((_, path))) => {
                        let path = path.to_vec();
                        self.session.reset();
                        self.queue.clear();
                        for id in path {
                            self.take(id, out)?;
                        }
                    }
                    (Verdict::Inconclusive, _) => {
                        writeln!(out, "exploration limit reached; no verdict")?;
                        return Ok(true);
                    }
                    _ => {
                        writeln!(out, "no deadlock is reachable")?;
                        return Ok(true);
                    }
                }
            }
            "load" | "l" => {
                let Some(file) = arg else {
                    writeln!(out, "load takes a trace file")?;
                    return Ok(true);
                };
                let queued = std::fs::read_to_string(file)
                    .map_err(|e| e.to_string())
                    .and_then(|text| self.queue_trace(&text).map_err(|e| e.to_string()));
                match queued {
                    Ok(n) => writeln!(out, "queued {n} steps")?,
                    Err(e) => {
                        writeln!(out, "{file}: {e}")?;
                        return Ok(true);
                    }
                }
            }
            "next" | "n" => match self.queue.pop_front() {
                Some(id) => {
                    if !self.take(id, out)? {
                        self.queue.clear();
                    }
                }
                None => {
                    writeln!(out, "nothing queued")?;
                    return Ok(true);
                }
            },
            "trace" | "t" => {
                let text = render_trace(self.session.model(), &self.session.path())
                    .expect("session paths replay");
                out.write_all(text.as_bytes())?;
                return Ok(true);
            }
            other => match other.parse::<usize>() {
                Ok(k) if (1..=self.session.enabled().len()).contains(&k) => {
                    let id = self.session.enabled()[k - 1];
                    self.take(id, out)?;
                }
                _ => {
                    writeln!(out, "unknown choice `{other}`; type `help`")?;
                    return Ok(true);
                }
            },
        }
        self.print_state(out)?;
        Ok(true)
    }

    /// Reads commands until `quit` or end of input.
    pub fn repl(&mut self, input: &mut dyn BufRead, out: &mut dyn Write) -> io::Result<()> {
        self.print_state(out)?;
        let mut line = String::new();
        loop {
            write!(out, "> ")?;
            out.flush()?;
            line.clear();
            if input.read_line(&mut line)? == 0 {
                writeln!(out)?;
                return Ok(());
            }
            if !self.command(line.trim(), out)? {
                return Ok(());
            }
        }
    }
}
