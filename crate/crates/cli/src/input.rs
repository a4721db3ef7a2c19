//! Loading a model from a `.rybu` or `.dedan` file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rybu_core::dedan::{expand, parse_dedan, DedanError};
use rybu_core::imds::{validate_model, SystemModel};
use rybu_core::lower::{compile_source, LowerError, LowerOptions, LoweredProgram};
use rybu_core::rybu::{Diagnostic, Value};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Lang {
    Rybu,
    Dedan,
}

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: cannot tell the input language from the extension; use --lang", .0.display())]
    UnknownLanguage(PathBuf),
    #[error("{}", prefix_lines(path, &source.to_string()))]
    Rybu { path: PathBuf, source: LowerError },
    #[error("{}", prefix_lines(path, &source.to_string()))]
    Dedan { path: PathBuf, source: DedanError },
    #[error("{}: the model is not well formed:\n{}", path.display(), violations.join("\n"))]
    Invalid {
        path: PathBuf,
        violations: Vec<String>,
    },
    #[error("{}: only Rybu sources can be compiled", .0.display())]
    NotRybu(PathBuf),
}

/// Puts `path:` in front of every line. Lines that already start with a
/// position (`3:1: ...`) read as `file:3:1: ...`; others get `error:`.
fn prefix_lines(path: &Path, text: &str) -> String {
    text.lines()
        .map(|line| {
            let positioned = line
                .split(':')
                .next()
                .is_some_and(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_digit()));
            if positioned {
                format!("{}:{line}", path.display())
            } else {
                format!("{}: error: {line}", path.display())
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// A loaded model together with what its source language adds.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub path: PathBuf,
    pub lang: Lang,
    pub model: SystemModel,
    /// Present for Rybu input.
    pub lowered: Option<LoweredProgram>,
}

impl Loaded {
    pub fn warnings(&self) -> &[Diagnostic] {
        self.lowered.as_ref().map_or(&[], |l| &l.warnings)
    }

    /// State-variable values behind a server's state label, when the model
    /// came from Rybu.
    pub fn state_vars(&self, server: &str, label: &str) -> Option<BTreeMap<String, Value>> {
        let vars = self.lowered.as_ref()?.state_vars.get(server)?.get(label)?;
        Some(vars.iter().cloned().collect())
    }
}

pub fn detect_lang(path: &Path, lang: Option<Lang>) -> Result<Lang, InputError> {
    if let Some(lang) = lang {
        return Ok(lang);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("rybu") => Ok(Lang::Rybu),
        Some("dedan") => Ok(Lang::Dedan),
        _ => Err(InputError::UnknownLanguage(path.to_path_buf())),
    }
}

/// System name derived from the file name, reduced to identifier characters.
pub fn system_name(path: &Path) -> String {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("system");
    let mut name: String = stem
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if !name.starts_with(|c: char| c.is_ascii_alphabetic()) {
        name.insert(0, 's');
    }
    name
}

pub fn read(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn compile_rybu(
    path: &Path,
    text: &str,
    bootstrap: bool,
) -> Result<LoweredProgram, InputError> {
    let options = LowerOptions {
        system_name: system_name(path),
        bootstrap,
    };
    compile_source(text, &options).map_err(|source| InputError::Rybu {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load(path: &Path, lang: Option<Lang>, bootstrap: bool) -> Result<Loaded, InputError> {
    let lang = detect_lang(path, lang)?;
    let text = read(path)?;
    let (model, lowered) = match lang {
        Lang::Rybu => {
            let lowered = compile_rybu(path, &text, bootstrap)?;
            (lowered.model.clone(), Some(lowered))
        }
        Lang::Dedan => {
            let dedan = |source| InputError::Dedan {
                path: path.to_path_buf(),
                source,
            };
            let unit = parse_dedan(&text).map_err(dedan)?;
            (expand(&unit).map_err(dedan)?, None)
        }
    };
    let violations = validate_model(&model);
    if !violations.is_empty() {
        return Err(InputError::Invalid {
            path: path.to_path_buf(),
            violations: violations.iter().map(ToString::to_string).collect(),
        });
    }
    Ok(Loaded {
        path: path.to_path_buf(),
        lang,
        model,
        lowered,
    })
}
