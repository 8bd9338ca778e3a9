//! Run configuration: a versioned JSON document validated in full before
//! any computation starts. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use dispersive::potential::Potential;
use dispersive::propagator::BoxSpec;

pub const SCHEMA: &str = "dispersive-run/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// 0 = library default thread count.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_out")]
    pub output_dir: String,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub potential: Potential,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub rho_grid: RhoSpec,
    #[serde(default)]
    pub lambda_scan: ScanSpec,
    #[serde(default = "default_box")]
    pub box_spec: BoxSpec,
    #[serde(default)]
    pub tmop: TmopSpec,
    #[serde(default)]
    pub wiener: WienerSpec,
    #[serde(default)]
    pub evolve: EvolveSpec,
}

fn default_seed() -> u64 {
    7
}

fn default_out() -> String {
    "out".into()
}

fn default_box() -> BoxSpec {
    BoxSpec { side: 16.0, points_per_axis: 64, dirichlet: true }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub quadrature: f64,
    pub scan_threshold: f64,
    pub eps_target: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { quadrature: 1e-3, scan_threshold: 1e-3, eps_target: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub shells: usize,
    pub sphere_degree: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { shells: 256, sphere_degree: 17 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoSpec {
    pub h: f64,
    pub rho_max: f64,
}

impl Default for RhoSpec {
    fn default() -> Self {
        RhoSpec { h: 0.125, rho_max: 6.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    /// Operator grid for the scan (radial shells x sphere degree).
    pub shells: usize,
    pub sphere_degree: usize,
    pub weighted_alpha: f64,
}

impl Default for ScanSpec {
    fn default() -> Self {
        ScanSpec { min: 0.0, max: 20.0, points: 400, shells: 24, sphere_degree: 5, weighted_alpha: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TmopSpec {
    pub box_half_side: f64,
    pub box_points: usize,
    pub lambdas: Vec<f64>,
    pub probe_sigma: f64,
}

impl Default for TmopSpec {
    fn default() -> Self {
        TmopSpec { box_half_side: 2.0, box_points: 16, lambdas: vec![0.0, 1.0], probe_sigma: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WienerSpec {
    pub d: usize,
    pub h: f64,
    pub extent: f64,
    pub nnz: usize,
    pub self_test_elements: usize,
}

impl Default for WienerSpec {
    fn default() -> Self {
        WienerSpec { d: 2, h: 0.2, extent: 2.0, nnz: 12, self_test_elements: 8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSpec {
    /// Initial bump width in units of the box spacing.
    pub bump_sigma_cells: f64,
    pub time_points: usize,
}

impl Default for EvolveSpec {
    fn default() -> Self {
        EvolveSpec { bump_sigma_cells: 1.0, time_points: 16 }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        if cfg.schema != SCHEMA {
            anyhow::bail!("unsupported schema '{}', expected '{}'", cfg.schema, SCHEMA);
        }
        cfg.potential
            .validate()
            .map_err(|e| anyhow::anyhow!("potential: {e}"))?;
        cfg.box_spec
            .validate()
            .map_err(|e| anyhow::anyhow!("box: {e}"))?;
        if cfg.rho_grid.h <= 0.0 || cfg.rho_grid.rho_max <= cfg.rho_grid.h {
            anyhow::bail!("rho_grid needs h > 0 and rho_max > h");
        }
        if cfg.lambda_scan.points < 2 || cfg.lambda_scan.max <= cfg.lambda_scan.min {
            anyhow::bail!("lambda_scan needs points >= 2 and max > min");
        }
        Ok(cfg)
    }

    pub fn example() -> Self {
        RunConfig {
            schema: SCHEMA.into(),
            seed: 7,
            threads: 0,
            output_dir: "out".into(),
            tolerances: Tolerances::default(),
            potential: Potential::SquareWell { depth: -2.0, radius: 1.0 },
            grid: GridSpec::default(),
            rho_grid: RhoSpec::default(),
            lambda_scan: ScanSpec::default(),
            box_spec: default_box(),
            tmop: TmopSpec::default(),
            wiener: WienerSpec::default(),
            evolve: EvolveSpec::default(),
        }
    }
}
