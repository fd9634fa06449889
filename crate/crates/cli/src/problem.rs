//! Problem files: JSON with complex numbers as `[re, im]` pairs and
//! matrices as row-major nested arrays.
//!
//! ```json
//! {
//!   "A": [[[0.5, 0.0]]],
//!   "B": [[[1.0, 0.0]]],
//!   "Sigma": [[[1.3333, 0.0]]],
//!   "Psi": "white",
//!   "grid_points": 512,
//!   "solver": { "tol": 1e-9, "max_iter": 200 }
//! }
//! ```
//!
//! `Psi` (and `synthesis.phi_true`) is `"white"`, `{"constant": c}` with `c`
//! a number or a matrix, or `{"grid": [...]}` with one sample per grid point.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use spectr_core::circle::DEFAULT_GRID_POINTS;
use spectr_core::linalg::{c, pairs_to_matrix};
use spectr_core::{CMat, HermitianMatrix, SolveOptions, SpectralDensity, SpectrumRole, StateSpaceFilter};

use crate::error::{CliError, CliResult};

pub type PairMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(rename = "A")]
    pub a: PairMatrix,
    #[serde(rename = "B")]
    pub b: PairMatrix,
    #[serde(rename = "Sigma", default)]
    pub sigma: Option<PairMatrix>,
    #[serde(rename = "Psi", default)]
    pub psi: Option<SpectrumSpec>,
    #[serde(default)]
    pub grid_points: Option<usize>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub experiment: ExperimentSpec,
    /// CSV of input samples, relative to the problem file.
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub synthesis: Option<SynthesisSpec>,
    #[serde(default)]
    pub burn_in: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SpectrumSpec {
    White,
    Constant(SampleValue),
    Grid(Vec<SampleValue>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum SampleValue {
    Scalar(f64),
    Matrix(PairMatrix),
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub t_list: Option<Vec<f64>>,
    pub n_list: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub taps: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSpec {
    pub phi_true: SpectrumSpec,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub taps: Option<usize>,
}

/// A parsed problem file together with its location.
#[derive(Clone, Debug)]
pub struct LoadedProblem {
    pub path: PathBuf,
    pub file: ProblemFile,
}

impl LoadedProblem {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file = parse_problem(&text).map_err(|(field, message)| CliError::Parse {
            path: path.to_path_buf(),
            field,
            message,
        })?;
        Ok(Self { path: path.to_path_buf(), file })
    }

    pub fn filter(&self) -> CliResult<StateSpaceFilter> {
        let a = matrix_field("A", &self.file.a)?;
        let b = matrix_field("B", &self.file.b)?;
        Ok(StateSpaceFilter::new(a, b)?)
    }

    /// `--grid` wins over the file, which wins over a `Psi` grid length.
    pub fn grid_points(&self, flag: Option<usize>) -> usize {
        let from_psi = match &self.file.psi {
            Some(SpectrumSpec::Grid(samples)) => Some(samples.len()),
            _ => None,
        };
        flag.or(self.file.grid_points).or(from_psi).unwrap_or(DEFAULT_GRID_POINTS)
    }

    pub fn sigma(&self) -> CliResult<Option<HermitianMatrix>> {
        self.file
            .sigma
            .as_ref()
            .map(|rows| HermitianMatrix::try_from(rows.clone()).map_err(|e| CliError::Invalid(format!("Sigma: {e}"))))
            .transpose()
    }

    /// The prior, white noise when absent.
    pub fn psi(&self, m: usize, grid_points: usize) -> CliResult<SpectralDensity> {
        match &self.file.psi {
            Some(spec) => spectrum_from_spec("Psi", spec, m, grid_points, SpectrumRole::Prior),
            None => Ok(SpectralDensity::identity(m, grid_points, SpectrumRole::Prior)?),
        }
    }

    pub fn solve_options(&self, tol: Option<f64>, max_iter: Option<usize>) -> CliResult<SolveOptions> {
        let mut options = SolveOptions::default();
        if let Some(t) = tol.or(self.file.solver.tol) {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Invalid(format!("solver tolerance must be positive, got {t}")));
            }
            options.tolerance = t;
        }
        if let Some(j) = max_iter.or(self.file.solver.max_iter) {
            options.max_iter = j;
        }
        Ok(options)
    }

    /// Resolves `data` relative to the problem file's directory.
    pub fn data_path(&self) -> Option<PathBuf> {
        self.file.data.as_ref().map(|p| {
            if p.is_absolute() {
                p.clone()
            } else {
                self.path.parent().unwrap_or(Path::new(".")).join(p)
            }
        })
    }
}

/// Parses problem JSON; on failure returns the offending field path and message.
pub fn parse_problem(text: &str) -> Result<ProblemFile, (String, String)> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        (field, e.into_inner().to_string())
    })
}

pub fn matrix_field(name: &str, rows: &PairMatrix) -> CliResult<CMat> {
    pairs_to_matrix(rows).map_err(|e| CliError::Invalid(format!("{name}: {e}")))
}

fn sample_matrix(name: &str, value: &SampleValue, m: usize) -> CliResult<CMat> {
    let out = match value {
        SampleValue::Scalar(x) => CMat::identity(m, m) * c(*x, 0.0),
        SampleValue::Matrix(rows) => matrix_field(name, rows)?,
    };
    if out.nrows() != m || out.ncols() != m {
        return Err(CliError::Invalid(format!(
            "{name}: expected a {m}x{m} sample, got {}x{}",
            out.nrows(),
            out.ncols()
        )));
    }
    Ok(out)
}

pub fn spectrum_from_spec(
    name: &str,
    spec: &SpectrumSpec,
    m: usize,
    grid_points: usize,
    role: SpectrumRole,
) -> CliResult<SpectralDensity> {
    let density = match spec {
        SpectrumSpec::White => SpectralDensity::identity(m, grid_points, role),
        SpectrumSpec::Constant(v) => SpectralDensity::constant(&sample_matrix(name, v, m)?, grid_points, role),
        SpectrumSpec::Grid(samples) => {
            if samples.len() != grid_points {
                return Err(CliError::Invalid(format!(
                    "{name}: grid has {} samples but the grid size is {grid_points}",
                    samples.len()
                )));
            }
            let mats = samples
                .iter()
                .enumerate()
                .map(|(k, v)| sample_matrix(&format!("{name}.grid[{k}]"), v, m))
                .collect::<CliResult<Vec<_>>>()?;
            SpectralDensity::new(mats, role)
        }
    };
    density.map_err(|e| CliError::Invalid(format!("{name}: {e}")))
}
