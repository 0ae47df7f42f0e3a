//! Run configuration: one JSON document with a section per command.
//!
//! ```json
//! {
//!   "kernel": {"family": "gaussian"},
//!   "interval": {"a": 0, "b": {"breakpoint": "c1"}},
//!   "solver": {"grid_n": 401},
//!   "asymptotics": {"mc_n": 1000000, "seed": 20240601, "u": [3, 4, 5]},
//!   "verify": {"u": [3, 4, 5], "n": 1000000, "grid_m": 201, "seed": 7},
//!   "out": "results"
//! }
//! ```
//!
//! Every section and field except `kernel` and `interval` is optional.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gmin::asymptotics::AsymptoticOptions;
use gmin::solver::{breakpoint_for, Breakpoint};
use gmin::{Interval, Kernel, KernelSpec, SolverOptions};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub interval: IntervalSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub asymptotics: AsymptoticsSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSpec {
    pub a: f64,
    pub b: Endpoint,
}

/// Right endpoint: a number, or `a` plus a breakpoint of the kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Endpoint {
    Value(f64),
    Breakpoint {
        breakpoint: Breakpoint,
        #[serde(default)]
        offset: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticsSection {
    pub mc_n: usize,
    pub seed: u64,
    /// Levels at which the tail formula is tabulated.
    pub u: Vec<f64>,
}

impl Default for AsymptoticsSection {
    fn default() -> Self {
        let d = AsymptoticOptions::default();
        Self {
            mc_n: d.mc_n,
            seed: d.seed,
            u: vec![3.0, 4.0, 5.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub u: Vec<f64>,
    pub n: usize,
    pub grid_m: usize,
    pub seed: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            u: vec![3.0, 4.0, 5.0],
            n: 1_000_000,
            grid_m: 201,
            seed: 7,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Parses a config; errors carry serde's line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn kernel(&self) -> Result<Kernel> {
        Ok(Kernel::try_from(self.kernel.clone())?)
    }

    pub fn interval(&self, kernel: &Kernel) -> Result<Interval> {
        let b = match self.interval.b {
            Endpoint::Value(b) => b,
            Endpoint::Breakpoint { breakpoint, offset } => {
                if !kernel.is_stationary() {
                    bail!("interval.b: breakpoints are only defined for stationary kernels");
                }
                self.interval.a + breakpoint_for(kernel, breakpoint)? + offset
            }
        };
        Ok(Interval::new(self.interval.a, b)?)
    }

    pub fn asymptotic_options(&self) -> AsymptoticOptions {
        AsymptoticOptions {
            mc_n: self.asymptotics.mc_n,
            seed: self.asymptotics.seed,
            ..AsymptoticOptions::default()
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::Gaussian { length_scale: 1.0 },
            interval: IntervalSpec {
                a: 0.0,
                b: Endpoint::Value(1.0),
            },
            solver: SolverOptions::default(),
            asymptotics: AsymptoticsSection::default(),
            verify: VerifySection::default(),
            out: None,
        }
    }
}
