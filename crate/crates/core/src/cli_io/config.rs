//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap, ScalarField, TorusPoint, UniformGrid};
use crate::hamiltonian::{ContactHamiltonian, HamiltonianSpec};
use crate::oracle::oracle_w;
use crate::periodic::PeriodicOptions;
use crate::semigroup::{singular_field, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub n: usize,
    #[serde(rename = "N")]
    pub size: usize,
}

impl GridBlock {
    pub fn build(&self) -> Result<UniformGrid> {
        UniformGrid::new(self.n, self.size)
    }
}

/// Initial data for `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Constant { value: f64 },
    /// `(lambda/4) |x - x0|^2` (wrapped), the quadratic oracle at time zero.
    Point { x0: Vec<f64> },
    /// `u0` at the node nearest `x0`, `u0 + big` elsewhere.
    Singular { x0: Vec<f64>, u0: f64, big: Option<f64> },
    /// A ScalarField JSON file.
    File { path: PathBuf },
}

impl InitialData {
    pub fn build(&self, grid: UniformGrid, lambda: f64, base: &Path) -> Result<ScalarField> {
        match self {
            InitialData::Constant { value } => Ok(ScalarField::constant(grid, *value, 0.0)),
            InitialData::Point { x0 } => {
                let x0 = wrap(x0)?;
                let mut vals = Vec::with_capacity(grid.len());
                for i in 0..grid.len() {
                    vals.push(oracle_w(&x0, &wrap(&grid.node(i))?, 0.0, lambda, &[0.0; 3][..grid.n])?);
                }
                ScalarField::new(grid, vals, 0.0)
            }
            InitialData::Singular { x0, u0, big } => {
                singular_field(grid, &wrap(x0)?, *u0, big.unwrap_or(10.0 * (1.0 + u0.abs())))
            }
            InitialData::File { path } => {
                let p = if path.is_absolute() { path.clone() } else { base.join(path) };
                let f = ScalarField::from_json(&std::fs::read_to_string(&p)?)?;
                if f.grid != grid {
                    return Err(Error::GridMismatch(format!(
                        "{} holds {:?}, config grid is {:?}",
                        p.display(),
                        f.grid,
                        grid
                    )));
                }
                Ok(f)
            }
        }
    }
}

/// Subcommand parameters; command-line flags take precedence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// Certificate `(k_1..k_n, k_{n+1})` or normal `(k_1..k_n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<PeriodicOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub hamiltonian: HamiltonianSpec,
    pub grid: GridBlock,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub experiment: ExperimentBlock,
}

impl RunConfig {
    pub fn new(hamiltonian: HamiltonianSpec, grid: GridBlock) -> Self {
        RunConfig {
            seed: 0,
            output: None,
            hamiltonian,
            grid,
            solver: SolverConfig::default(),
            experiment: ExperimentBlock::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialization")
    }

    /// Builds every block once so errors surface before any computation.
    pub fn validate(&self) -> Result<()> {
        let h = self.hamiltonian.build()?;
        let g = self.grid.build()?;
        if h.dim() != g.n {
            return Err(Error::Config(format!(
                "hamiltonian has dimension {}, grid has n = {}",
                h.dim(),
                g.n
            )));
        }
        self.solver.validate(h.as_ref())?;
        if let Some(InitialData::Point { x0 } | InitialData::Singular { x0, .. }) = &self.experiment.initial {
            TorusPoint::new(x0)?;
            if x0.len() != g.n {
                return Err(Error::Config(format!("initial x0 has {} coordinates, n = {}", x0.len(), g.n)));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<(Box<dyn ContactHamiltonian>, UniformGrid)> {
        Ok((self.hamiltonian.build()?, self.grid.build()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7
output = "runs/a"

[hamiltonian]
kind = "quadratic"
lambda = 1.0
omega = [1.0, 1.4142135623730951]

[grid]
n = 2
N = 32

[solver]
dt = 0.001
window_radius = 1.2

[experiment]
T = 0.41421356237309515
k = [1, 1, 1]
snapshots = [0.5, 1.0]
initial = { kind = "point", x0 = [0.0, 0.0] }
"#;

    #[test]
    fn parse_and_round_trip() {
        let cfg = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.grid.size, 32);
        assert_eq!(cfg.solver.window_radius, 1.2);
        assert_eq!(cfg.experiment.k.as_deref(), Some(&[1, 1, 1][..]));
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::parse(&SAMPLE.replace("n = 2", "n = 1")).is_err());
        assert!(RunConfig::parse(&SAMPLE.replace("dt = 0.001", "dt = 0.9")).is_err());
        assert!(RunConfig::parse(&SAMPLE.replace("seed = 7", "seed = 7\nbogus = 1")).is_err());
        assert!(RunConfig::parse(&SAMPLE.replace("quadratic", "cubic")).is_err());
        assert!(RunConfig::parse(&SAMPLE.replace("x0 = [0.0, 0.0]", "x0 = [0.0]")).is_err());
        assert!(RunConfig::parse("[grid]\nn = 1\nN = 8\n").is_err());
    }

    #[test]
    fn initial_data_kinds() {
        let g = UniformGrid::new(1, 8).unwrap();
        let p = InitialData::Point { x0: vec![0.0] }.build(g, 1.0, Path::new(".")).unwrap();
        assert_eq!(p.values[0], 0.0);
        assert!((p.values[4] - 0.0625).abs() < 1e-15);
        let s = InitialData::Singular {
            x0: vec![0.5],
            u0: 0.0,
            big: Some(3.0),
        }
        .build(g, 1.0, Path::new("."))
        .unwrap();
        assert_eq!(s.values[4], 0.0);
        assert_eq!(s.values[0], 3.0);
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("f.json"), p.to_json()).unwrap();
        let f = InitialData::File { path: "f.json".into() }.build(g, 1.0, dir.path()).unwrap();
        assert_eq!(f, p);
        let g2 = UniformGrid::new(1, 16).unwrap();
        assert!(InitialData::File { path: "f.json".into() }.build(g2, 1.0, dir.path()).is_err());
    }
}
