//! Run configuration: a flat TOML file with typed sections. Unknown keys
//! are hard errors; every effective value (defaults included) is echoed
//! into the run manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use antidot_core::model::{Dispersion, Params, Potential};

use crate::CliError;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dispersion: DispersionConfig,
    pub potential: PotentialConfig,
    pub run: RunSection,
    #[serde(default)]
    pub gap: GapSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub feshbach: FeshbachSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionConfig {
    /// dirac | power | multilayer
    pub kind: String,
    /// Growth exponent, required for kind = "power".
    #[serde(default)]
    pub d: Option<f64>,
    /// Layer count, required for kind = "multilayer".
    #[serde(default)]
    pub layers: Option<u32>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// square | disk | bump
    pub shape: String,
    /// Side of the square profile (in cell units), required for "square".
    #[serde(default)]
    pub side: Option<f64>,
    /// Radius of the disk/bump profile, required for those shapes.
    #[serde(default)]
    pub radius: Option<f64>,
    /// Per-component amplitudes (χ₁, χ₂, χ₃).
    pub amplitude: [f64; 3],
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub alpha: f64,
    pub beta: f64,
    /// Plane-wave cutoff N (modes |m_i| ≤ N).
    pub cutoff: u32,
    /// k-grid resolution n_k (n_k × n_k over the Brillouin zone).
    pub kgrid: usize,
    /// Seed for the randomized spot checks (verify).
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GapSection {
    /// Center energy the gap is detected around.
    #[serde(default)]
    pub center: f64,
}

impl Default for GapSection {
    fn default() -> Self {
        GapSection { center: 0.0 }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Cutoff override for sweep cells (default: run.cutoff).
    #[serde(default)]
    pub cutoff: Option<u32>,
    /// k-grid override for sweep cells (default: run.kgrid).
    #[serde(default)]
    pub kgrid: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FeshbachSection {
    /// Bloch momentum of the analyzed fiber.
    #[serde(default)]
    pub k: [f64; 2],
    /// z-window for the root check and singular-value scan; default is the
    /// empirical leading gap ±2 α²β |Φ⊥|.
    #[serde(default)]
    pub z_window: Option<[f64; 2]>,
    /// Cells for the remainder-scaling fit (default: a dyadic ladder).
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub betas: Option<Vec<f64>>,
}

impl Default for FeshbachSection {
    fn default() -> Self {
        FeshbachSection {
            k: [0.0, 0.0],
            z_window: None,
            alphas: None,
            betas: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_radii() -> Vec<f64> {
    vec![
        1e-3, 2.15e-3, 4.64e-3, 1e-2, 2.15e-2, 4.64e-2, 1e-1, 2.15e-1, 4.64e-1, 1.0, 2.0, 4.0,
        8.0,
    ]
}

fn default_eps() -> f64 {
    1e-3
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection {
            radii: default_radii(),
            eps: default_eps(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Lighter grid/cutoff for the invariant suite.
    #[serde(default = "default_verify_cutoff")]
    pub cutoff: u32,
    #[serde(default = "default_verify_kgrid")]
    pub kgrid: usize,
    /// Run the lattice-sum kernel identity (the slow check).
    #[serde(default = "default_true")]
    pub lattice: bool,
    #[serde(default = "default_gamma_max")]
    pub gamma_max: i32,
}

fn default_verify_cutoff() -> u32 {
    6
}
fn default_verify_kgrid() -> usize {
    12
}
fn default_true() -> bool {
    true
}
fn default_gamma_max() -> i32 {
    6
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            cutoff: default_verify_cutoff(),
            kgrid: default_verify_kgrid(),
            lattice: true,
            gamma_max: default_gamma_max(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; the --out flag overrides it.
    #[serde(default)]
    pub dir: Option<String>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("parsing config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.run.alpha > 0.0 && self.run.alpha <= 0.5) {
            return Err(CliError::Config(format!(
                "run.alpha must lie in (0, 0.5], got {}",
                self.run.alpha
            )));
        }
        if !(self.run.beta >= 0.0) || !self.run.beta.is_finite() {
            return Err(CliError::Config(format!(
                "run.beta must be nonnegative, got {}",
                self.run.beta
            )));
        }
        if self.run.kgrid < 2 {
            return Err(CliError::Config(format!(
                "run.kgrid must be at least 2, got {}",
                self.run.kgrid
            )));
        }
        if let Some(sweep) = &self.sweep {
            for &a in &sweep.alphas {
                if !(a > 0.0 && a <= 0.5) {
                    return Err(CliError::Config(format!(
                        "sweep.alphas entries must lie in (0, 0.5], got {a}"
                    )));
                }
            }
            for &b in &sweep.betas {
                if !(b > 0.0) {
                    return Err(CliError::Config(format!(
                        "sweep.betas entries must be positive, got {b}"
                    )));
                }
            }
        }
        for &r in &self.kernel.radii {
            if !(1e-3..=16.0).contains(&r) {
                return Err(CliError::Config(format!(
                    "kernel.radii entries must lie in [1e-3, 16], got {r}"
                )));
            }
        }
        if !(1e-4..=1.0).contains(&self.kernel.eps) {
            return Err(CliError::Config(format!(
                "kernel.eps must lie in [1e-4, 1], got {}",
                self.kernel.eps
            )));
        }
        self.build_dispersion()?;
        self.build_potential()?;
        Ok(())
    }

    pub fn build_dispersion(&self) -> Result<Dispersion, CliError> {
        match self.dispersion.kind.as_str() {
            "dirac" => Ok(Dispersion::dirac()),
            "power" => {
                let d = self.dispersion.d.ok_or_else(|| {
                    CliError::Config("dispersion.d is required for kind = \"power\"".into())
                })?;
                Dispersion::power(d).map_err(|e| CliError::Config(e.to_string()))
            }
            "multilayer" => {
                let n = self.dispersion.layers.ok_or_else(|| {
                    CliError::Config(
                        "dispersion.layers is required for kind = \"multilayer\"".into(),
                    )
                })?;
                Dispersion::multilayer(n).map_err(|e| CliError::Config(e.to_string()))
            }
            other => Err(CliError::Config(format!(
                "unknown dispersion.kind \"{other}\" (expected dirac | power | multilayer)"
            ))),
        }
    }

    pub fn build_potential(&self) -> Result<Potential, CliError> {
        let amp = self.potential.amplitude;
        match self.potential.shape.as_str() {
            "square" => {
                let side = self.potential.side.ok_or_else(|| {
                    CliError::Config("potential.side is required for shape = \"square\"".into())
                })?;
                Potential::square(side, amp).map_err(|e| CliError::Config(e.to_string()))
            }
            "disk" => {
                let r = self.potential.radius.ok_or_else(|| {
                    CliError::Config("potential.radius is required for shape = \"disk\"".into())
                })?;
                Potential::disk(r, amp).map_err(|e| CliError::Config(e.to_string()))
            }
            "bump" => {
                let r = self.potential.radius.ok_or_else(|| {
                    CliError::Config("potential.radius is required for shape = \"bump\"".into())
                })?;
                Potential::bump(r, amp).map_err(|e| CliError::Config(e.to_string()))
            }
            other => Err(CliError::Config(format!(
                "unknown potential.shape \"{other}\" (expected square | disk | bump)"
            ))),
        }
    }

    pub fn build_params(&self) -> Result<Params, CliError> {
        Params::new(self.run.alpha, self.run.beta).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[dispersion]
kind = "dirac"

[potential]
shape = "square"
side = 1.0
amplitude = [0.0, 0.0, 1.0]

[run]
alpha = 0.1
beta = 0.2
cutoff = 8
kgrid = 32
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = RunConfig::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.run.seed, 42);
        assert_eq!(cfg.gap.center, 0.0);
        cfg.build_dispersion().unwrap();
        cfg.build_potential().unwrap();
    }

    #[test]
    fn alpha_out_of_range_rejected() {
        let bad = MINIMAL.replace("alpha = 0.1", "alpha = 0.6");
        let err = RunConfig::from_str(&bad).unwrap_err();
        assert!(err.to_string().contains("alpha must lie in (0, 0.5]"), "{err}");
    }

    #[test]
    fn negative_beta_rejected() {
        let bad = MINIMAL.replace("beta = 0.2", "beta = -1.0");
        assert!(RunConfig::from_str(&bad).is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        let bad = format!("{MINIMAL}\n[run2]\nx = 1\n");
        assert!(RunConfig::from_str(&bad).is_err());
        let bad2 = MINIMAL.replace("alpha = 0.1", "alpha = 0.1\nalphaa = 0.2");
        assert!(RunConfig::from_str(&bad2).is_err());
    }

    #[test]
    fn unknown_preset_rejected() {
        let bad = MINIMAL.replace("kind = \"dirac\"", "kind = \"weyl\"");
        let err = RunConfig::from_str(&bad).unwrap_err();
        assert!(err.to_string().contains("unknown dispersion.kind"));
    }
}
