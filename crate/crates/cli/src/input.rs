//! Problem-file formats.

use std::path::Path;

use convexpop::moment::MomentVector;
use convexpop::polyalg::{Polynomial, SemialgebraicSet, Term};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Optional settings stored with a problem; command-line flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileOptions {
    pub r_max: Option<usize>,
    pub d_max: Option<usize>,
    pub tol: Option<f64>,
    pub tau: Option<f64>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub waive_archimedean: Option<bool>,
    pub sample_box: Option<Vec<(f64, f64)>>,
}

/// `{n, variables?, objective?, constraints, ball_bound?, options?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    #[serde(default)]
    pub variables: Option<Vec<String>>,
    #[serde(default)]
    pub objective: Option<Vec<Term>>,
    pub constraints: Vec<Vec<Term>>,
    #[serde(default)]
    pub ball_bound: Option<f64>,
    #[serde(default)]
    pub options: FileOptions,
}

impl ProblemFile {
    pub fn variable_names(&self) -> Vec<String> {
        match &self.variables {
            Some(v) => v.clone(),
            None => (1..=self.n).map(|i| format!("x{i}")).collect(),
        }
    }

    fn check(&self) -> Result<(), CliError> {
        if let Some(v) = &self.variables {
            if v.len() != self.n {
                return Err(CliError::Parse(format!("{} variable names for n = {}", v.len(), self.n)));
            }
        }
        Ok(())
    }

    pub fn set(&self) -> Result<SemialgebraicSet, CliError> {
        let constraints = self
            .constraints
            .iter()
            .map(|t| Polynomial::from_term_list(self.n, t))
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::from_core)?;
        SemialgebraicSet::new(self.n, constraints, self.ball_bound).map_err(CliError::from_core)
    }

    pub fn objective(&self) -> Result<Polynomial, CliError> {
        let terms = self.objective.as_ref().ok_or_else(|| CliError::Parse("problem has no objective".into()))?;
        Polynomial::from_term_list(self.n, terms).map_err(CliError::from_core)
    }
}

/// `{n, f, y, g?}`: with `g`, `f` is univariate and the composed check runs.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JensenFile {
    pub n: usize,
    pub f: Vec<Term>,
    pub y: MomentVector,
    #[serde(default)]
    pub g: Option<Vec<Term>>,
}

/// `{n, p}`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SosFile {
    pub n: usize,
    pub p: Vec<Term>,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))
}

pub fn parse<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn problem(path: &Path) -> Result<ProblemFile, CliError> {
    let p: ProblemFile = parse(path)?;
    p.check()?;
    Ok(p)
}
