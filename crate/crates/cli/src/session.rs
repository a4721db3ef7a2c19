//! Interactive stepping through a model, shared by the terminal simulator
//! and the HTTP API.

use std::sync::Arc;

use rybu_core::imds::{ActionId, Configuration, SystemModel};
use rybu_core::lts::{simulate_step, StepError};

#[derive(Clone, Debug)]
pub struct Session {
    model: Arc<SystemModel>,
    current: Configuration,
    history: Vec<(Configuration, ActionId)>,
}

impl Session {
    pub fn new(model: Arc<SystemModel>) -> Self {
        let current = model.initial().clone();
        Self {
            model,
            current,
            history: Vec::new(),
        }
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn current(&self) -> &Configuration {
        &self.current
    }

    /// Number of steps taken since the initial configuration.
    pub fn depth(&self) -> usize {
        self.history.len()
    }

    pub fn path(&self) -> Vec<ActionId> {
        self.history.iter().map(|(_, a)| *a).collect()
    }

    pub fn enabled(&self) -> Vec<ActionId> {
        self.model
            .enabled_actions(&self.current)
            .expect("session configurations belong to the model")
    }

    /// Takes `action` and returns the actions enabled afterwards.
    pub fn step(&mut self, action: ActionId) -> Result<Vec<ActionId>, StepError> {
        let (next, enabled) = simulate_step(&self.model, &self.current, action)?;
        let previous = std::mem::replace(&mut self.current, next);
        self.history.push((previous, action));
        Ok(enabled)
    }

    /// Steps back once. Returns false at the initial configuration.
    pub fn undo(&mut self) -> bool {
        match self.history.pop() {
            Some((previous, _)) => {
                self.current = previous;
                true
            }
            None => false,
        }
    }

    pub fn reset(&mut self) {
        self.history.clear();
        self.current = self.model.initial().clone();
    }

    /// Some agent is still pending but no action is enabled.
    pub fn is_deadlocked(&self) -> bool {
        self.current.has_pending() && self.enabled().is_empty()
    }
}
