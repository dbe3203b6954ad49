//! Subcommand configurations. Each is read from a JSON object with unknown
//! keys rejected, filled with defaults, overridden by flags and validated by
//! building the library objects it describes.

use bose_quasifree::condensate::Region;
use bose_quasifree::equilibrium::{Equilibrium, LimitParams, ThermalParams};
use bose_quasifree::single_particle::{HamiltonianModel, LimitKind, TestFunction};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Trap,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelChoice,
    pub dim: usize,
    /// Trap length; ignored by the free model.
    #[serde(default = "one")]
    pub length: f64,
}

impl ModelConfig {
    pub fn build(&self) -> CliResult<HamiltonianModel<f64>> {
        Ok(match self.kind {
            ModelChoice::Trap => HamiltonianModel::harmonic_trap(self.dim, self.length)?,
            ModelChoice::Free => HamiltonianModel::free(self.dim)?,
        })
    }

    pub fn limit_kind(&self) -> LimitKind {
        match self.kind {
            ModelChoice::Trap => LimitKind::TrapGround,
            ModelChoice::Free => LimitKind::FreeZeroMode,
        }
    }
}

/// One Hermite coefficient `coeff · h_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub index: Vec<usize>,
    #[serde(default = "unit_coeff")]
    pub coeff: [f64; 2],
}

/// Hermite expansion at basis width `scale`; defaults to the Gaussian
/// ground state of the model (width `L` for the trap, 1 in free space).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionConfig {
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
}

impl FunctionConfig {
    pub fn hermite(index: Vec<usize>) -> Self {
        Self {
            scale: None,
            terms: vec![TermConfig {
                index,
                coeff: unit_coeff(),
            }],
        }
    }

    pub fn build(&self, model: &ModelConfig) -> CliResult<TestFunction<f64>> {
        let scale = self.scale.unwrap_or(match model.kind {
            ModelChoice::Trap => model.length,
            ModelChoice::Free => 1.0,
        });
        let terms: Vec<(Vec<usize>, Complex<f64>)> = if self.terms.is_empty() {
            vec![(vec![0; model.dim], Complex::new(1.0, 0.0))]
        } else {
            self.terms
                .iter()
                .map(|t| {
                    if t.index.len() != model.dim {
                        return Err(CliError::config(format!(
                            "term index {:?} does not match dimension {}",
                            t.index, model.dim
                        )));
                    }
                    Ok((t.index.clone(), Complex::new(t.coeff[0], t.coeff[1])))
                })
                .collect::<CliResult<_>>()?
        };
        let f = TestFunction::from_coeffs(model.dim, scale, terms)?;
        if f.is_zero() {
            return Err(CliError::config("test function is zero"));
        }
        Ok(f)
    }
}

/// A Gibbs state at `mu`, or the boundary limit when `limit` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub model: ModelConfig,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub limit: bool,
}

impl StateConfig {
    pub fn build(&self) -> CliResult<Equilibrium<f64>> {
        let model = self.model.build()?;
        match (self.limit, self.mu) {
            (true, None) => Ok(LimitParams::new(self.beta, model, self.model.limit_kind())?.into()),
            (false, Some(mu)) => Ok(ThermalParams::new(self.beta, mu, model)?.into()),
            (true, Some(_)) => Err(CliError::config("state sets both mu and limit")),
            (false, None) => Err(CliError::config("state needs mu or limit = true")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl RegionConfig {
    pub fn build(&self) -> CliResult<Region<f64>> {
        Ok(Region::new(self.lower.clone(), self.upper.clone())?)
    }
}

/// Uniform grid `start, start + step, …` up to `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridConfig {
    pub fn points(&self) -> CliResult<Vec<f64>> {
        if !(self.step > 0.0) || !(self.stop >= self.start) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(CliError::config("grid needs step > 0 and stop >= start"));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        if count > 1_000_000 {
            return Err(CliError::config("grid has more than 10^6 points"));
        }
        Ok((0..count).map(|k| self.start + k as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityProfileConfig {
    pub beta: f64,
    pub dim: usize,
    /// Positions along the first axis; the other coordinates are zero.
    pub grid: GridConfig,
    /// Condensate density `|e(x)|²` added as a constant.
    pub shift_weight: f64,
}

impl Default for DensityProfileConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            dim: 3,
            grid: GridConfig {
                start: 0.0,
                stop: 2.0,
                step: 0.25,
            },
            shift_weight: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseScanConfig {
    pub beta: f64,
    pub dim: usize,
    pub length: f64,
    /// Chemical potentials strictly below the ground energy, increasing.
    pub mu_grid: Vec<f64>,
    /// Appends the boundary row `μ = ε₁` evaluated with the limit state.
    pub boundary: bool,
    pub eps_reg: f64,
    pub region: Option<RegionConfig>,
    pub basis_size: usize,
    pub probes: Vec<FunctionConfig>,
}

impl Default for PhaseScanConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            dim: 1,
            length: 1.0,
            mu_grid: vec![0.0, 0.5, 0.8, 0.9, 0.95],
            boundary: true,
            eps_reg: 1.0,
            region: None,
            basis_size: 40,
            probes: vec![FunctionConfig::default(), FunctionConfig::hermite(vec![1])],
        }
    }
}

impl PhaseScanConfig {
    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            kind: ModelChoice::Trap,
            dim: self.dim,
            length: self.length,
        }
    }

    pub fn region(&self) -> CliResult<Region<f64>> {
        match &self.region {
            Some(r) => r.build(),
            None => Ok(Region::cube(self.dim, self.length)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitScanConfig {
    pub beta: f64,
    pub mu: f64,
    pub dim: usize,
    pub f: FunctionConfig,
    pub g: Option<FunctionConfig>,
    pub t: f64,
    pub lengths: Vec<f64>,
    pub tol: f64,
}

impl Default for LimitScanConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            mu: -1.0,
            dim: 1,
            f: FunctionConfig::default(),
            g: None,
            t: 0.0,
            lengths: vec![2.0, 4.0, 8.0, 16.0, 32.0],
            tol: 1e-3,
        }
    }
}

impl LimitScanConfig {
    /// Test functions live on the free model; widths default to 1.
    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            kind: ModelChoice::Free,
            dim: self.dim,
            length: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KmsCheckConfig {
    pub state: StateConfig,
    pub f: FunctionConfig,
    pub g: Option<FunctionConfig>,
    pub times: Vec<f64>,
    pub tol: f64,
}

impl Default for KmsCheckConfig {
    fn default() -> Self {
        Self {
            state: StateConfig {
                model: ModelConfig {
                    kind: ModelChoice::Trap,
                    dim: 1,
                    length: 1.0,
                },
                beta: 1.0,
                mu: Some(1.0 - std::f64::consts::LN_2),
                limit: false,
            },
            f: FunctionConfig::default(),
            g: None,
            times: vec![0.0, 0.5, 1.0],
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterCheckConfig {
    pub state: StateConfig,
    pub f: FunctionConfig,
    pub g: Option<FunctionConfig>,
    pub times: Vec<f64>,
    pub tol: f64,
}

impl Default for ClusterCheckConfig {
    fn default() -> Self {
        Self {
            state: StateConfig {
                model: ModelConfig {
                    kind: ModelChoice::Free,
                    dim: 3,
                    length: 1.0,
                },
                beta: 1.0,
                mu: Some(-0.5),
                limit: false,
            },
            f: FunctionConfig::default(),
            g: None,
            times: vec![0.0, 5.0, 20.0, 80.0],
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainClassifyConfig {
    pub model: ModelConfig,
    pub functions: Vec<FunctionConfig>,
}

impl Default for DomainClassifyConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig {
                kind: ModelChoice::Trap,
                dim: 1,
                length: 1.0,
            },
            functions: vec![FunctionConfig::default(), FunctionConfig::hermite(vec![1])],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Check groups to run; all when empty.
    pub only: Vec<String>,
    /// Test hook negating the symplectic term; echoed only when set.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub inject_symplectic_flip: bool,
}

fn one() -> f64 {
    1.0
}

fn unit_coeff() -> [f64; 2] {
    [1.0, 0.0]
}
