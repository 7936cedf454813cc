//! The strict JSON experiment schema, `--set` overrides and the translation
//! into library types.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use fracwave_core::lattice::{gaussian_bump, GridSpec};
use fracwave_core::model::{riesz_measure, Atom, ModelParams, RadialProfile, SpectralMeasure};
use fracwave_core::solver::{CoefficientFn, SolverConfig};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub measure: MeasureSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub k: f64,
    pub d: usize,
    #[serde(rename = "T", default = "one")]
    pub horizon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureSection {
    Riesz {
        beta: f64,
        /// `null` selects the Fourier-pair constant.
        #[serde(default)]
        constant: Option<f64>,
    },
    Flat {
        #[serde(default = "one")]
        level: f64,
    },
    Atoms {
        atoms: Vec<AtomSection>,
    },
    /// `constant · (1+|ξ|²)^{−s/2}`.
    Bessel {
        #[serde(default = "one")]
        constant: f64,
        s: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSection {
    pub location: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "L", default = "default_half_width")]
    pub half_width: f64,
    #[serde(rename = "N", default = "default_points")]
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            half_width: default_half_width(),
            n: default_points(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// `null` means `T/1024`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: CoefficientSection,
    #[serde(default)]
    pub b: CoefficientSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub alpha: f64,
    /// Initial position `v0`.
    #[serde(default)]
    pub position: InitialField,
    /// Initial velocity `ṽ0`.
    #[serde(default)]
    pub velocity: InitialField,
    #[serde(default = "one_usize")]
    pub noise_substeps: usize,
    /// Replace `σ(u)` by the Gaussian bump `e^{−|x|²/2}` (the linear, forced-`Z` model).
    #[serde(default)]
    pub forced_bump: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            dt: None,
            sigma: default_sigma(),
            b: CoefficientSection::Zero,
            seed: 0,
            alpha: 0.0,
            position: InitialField::Zero,
            velocity: InitialField::Zero,
            noise_substeps: 1,
            forced_bump: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum InitialField {
    #[default]
    Zero,
    Bump,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientSection {
    #[default]
    Zero,
    Linear {
        lambda: f64,
    },
    SineBounded {
        lambda: f64,
    },
    Named {
        name: String,
        #[serde(default = "one")]
        lambda: f64,
    },
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    #[default]
    Auto,
    Analytic,
    Quadrature,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingSource {
    #[default]
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Check {
        #[serde(default)]
        eta: Option<f64>,
        #[serde(default)]
        method: MethodChoice,
    },
    Exponents {
        #[serde(default = "half")]
        eta: f64,
        #[serde(default = "one")]
        delta: f64,
        #[serde(default)]
        gamma_ic: f64,
        #[serde(default = "two")]
        q: f64,
    },
    Isometry {
        #[serde(default = "default_isometry_paths")]
        n_paths: usize,
        #[serde(default = "default_isometry_tolerance")]
        tolerance: f64,
    },
    Scaling {
        #[serde(default = "half")]
        t1: f64,
        #[serde(default = "default_lags")]
        lags: Vec<f64>,
        #[serde(default = "two")]
        q: f64,
        #[serde(default)]
        source: ScalingSource,
        #[serde(default = "default_isometry_paths")]
        n_paths: usize,
        /// Allowed `|slope − theory|` for the quadrature source.
        #[serde(default = "default_slope_tolerance")]
        tolerance: f64,
    },
    Frontier {
        #[serde(default = "default_alphas")]
        alphas: Vec<f64>,
        #[serde(default = "default_levels")]
        levels: Vec<usize>,
        #[serde(default = "default_frontier_paths")]
        n_paths: usize,
    },
    Simulate {
        #[serde(default = "one_usize")]
        n_paths: usize,
        /// `null` means `[T]`.
        #[serde(default)]
        times: Option<Vec<f64>>,
    },
    ValidateNoise {
        #[serde(default = "default_noise_samples")]
        n_samples: usize,
        #[serde(default = "default_noise_dt")]
        dt: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn two() -> f64 {
    2.0
}
fn one_usize() -> usize {
    1
}
fn default_half_width() -> f64 {
    8.0
}
fn default_points() -> usize {
    256
}
fn default_sigma() -> CoefficientSection {
    CoefficientSection::Linear { lambda: 1.0 }
}
fn default_isometry_paths() -> usize {
    2000
}
fn default_isometry_tolerance() -> f64 {
    0.05
}
fn default_slope_tolerance() -> f64 {
    0.05
}
fn default_lags() -> Vec<f64> {
    (3..=10).map(|e| 2f64.powi(-e)).collect()
}
fn default_alphas() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.9, 0.95]
}
fn default_levels() -> Vec<usize> {
    vec![256, 512, 1024]
}
fn default_frontier_paths() -> usize {
    400
}
fn default_noise_samples() -> usize {
    10_000
}
fn default_noise_dt() -> f64 {
    2f64.powi(-10)
}

/// Parses `text`, applies the seed from `env_seed` and then each `key=value`
/// override, and deserializes strictly. Every default is materialized.
pub fn load(text: &str, env_seed: Option<&str>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut doc: Value =
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: invalid JSON: {e}")))?;
    if let Some(seed) = env_seed {
        let seed: u64 = seed
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("config: FRACWAVE_SEED is not an unsigned integer: {seed}")))?;
        set_path(&mut doc, "solver.seed", Value::from(seed))?;
    }
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("config: override must be key=value, got {o}")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut doc, key.trim(), value)?;
    }
    let mut cfg: ExperimentConfig =
        serde_json::from_value(doc).map_err(|e| CliError::Validation(format!("config: {e}")))?;
    cfg.materialize();
    Ok(cfg)
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| CliError::Validation(format!("config: cannot set {key}: {part} is not inside an object")))?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(CliError::Validation("config: empty override key".into()))
}

impl ExperimentConfig {
    fn materialize(&mut self) {
        if self.solver.dt.is_none() {
            self.solver.dt = Some(self.model.horizon / 1024.0);
        }
        if let Experiment::Simulate { times, .. } = &mut self.experiment {
            if times.is_none() {
                *times = Some(vec![self.model.horizon]);
            }
        }
    }

    pub fn params(&self) -> fracwave_core::Result<ModelParams> {
        ModelParams::new(self.model.k, self.model.d, self.model.horizon)
    }

    pub fn measure(&self) -> fracwave_core::Result<SpectralMeasure> {
        let d = self.model.d;
        match &self.measure {
            MeasureSection::Riesz { beta, constant } => riesz_measure(*beta, d, *constant),
            MeasureSection::Flat { level } => SpectralMeasure::flat(d, *level),
            MeasureSection::Atoms { atoms } => SpectralMeasure::atoms(
                d,
                atoms
                    .iter()
                    .map(|a| Atom {
                        location: a.location.clone(),
                        mass: a.mass,
                    })
                    .collect(),
            ),
            MeasureSection::Bessel { constant, s } => SpectralMeasure::radial(d, RadialProfile::bessel(*constant, *s)),
        }
    }

    /// The solver configuration on an `n`-point grid (the configured one when `None`).
    pub fn solver_config(&self, n: Option<usize>) -> fracwave_core::Result<SolverConfig> {
        let grid = GridSpec::new(self.model.d, self.grid.half_width, n.unwrap_or(self.grid.n))?;
        let mut c = SolverConfig::new(self.params()?, self.measure()?, grid);
        let s = &self.solver;
        c.dt = s.dt.unwrap_or(self.model.horizon / 1024.0);
        c.sigma = coefficient(&s.sigma);
        c.b = coefficient(&s.b);
        c.seed = s.seed;
        c.alpha = s.alpha;
        c.noise_substeps = s.noise_substeps;
        let bump = gaussian_bump(&grid).0;
        if s.position == InitialField::Bump {
            c.v0 = bump.clone();
        }
        if s.velocity == InitialField::Bump {
            c.v0_tilde = bump.clone();
        }
        if s.forced_bump {
            c.forced_z = Some(bump);
        }
        c.validate()?;
        Ok(c)
    }
}

fn coefficient(c: &CoefficientSection) -> CoefficientFn {
    match c {
        CoefficientSection::Zero => CoefficientFn::Zero,
        CoefficientSection::Linear { lambda } => CoefficientFn::Linear { lambda: *lambda },
        CoefficientSection::SineBounded { lambda } => CoefficientFn::SineBounded { lambda: *lambda },
        CoefficientSection::Named { name, lambda } => CoefficientFn::Named {
            name: name.clone(),
            lambda: *lambda,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"model":{"k":1,"d":1},"measure":{"type":"riesz","beta":0.5},"experiment":{"kind":"check"}}"#;

    #[test]
    fn defaults_are_materialized() {
        let cfg = load(MINIMAL, None, &[]).unwrap();
        let echoed = serde_json::to_value(&cfg).unwrap();
        assert_eq!(echoed["model"]["T"], 1.0);
        assert_eq!(echoed["grid"]["N"], 256);
        assert_eq!(echoed["solver"]["dt"], 1.0 / 1024.0);
        assert_eq!(echoed["solver"]["sigma"]["type"], "linear");
        assert_eq!(echoed["experiment"]["method"], "auto");
        // the echo parses back to the same document
        let again: ExperimentConfig = serde_json::from_value(echoed.clone()).unwrap();
        assert_eq!(serde_json::to_value(&again).unwrap(), echoed);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [
            r#"{"model":{"k":1,"d":1,"x":0},"measure":{"type":"flat"},"experiment":{"kind":"check"}}"#,
            r#"{"model":{"k":1,"d":1},"measure":{"type":"flat","beta":1},"experiment":{"kind":"check"}}"#,
            r#"{"model":{"k":1,"d":1},"measure":{"type":"flat"},"experiment":{"kind":"check","n_paths":3}}"#,
            r#"{"model":{"k":1,"d":1},"measure":{"type":"flat"},"experiment":{"kind":"check"},"extra":1}"#,
        ] {
            assert!(matches!(load(bad, None, &[]), Err(CliError::Validation(_))), "{bad}");
        }
    }

    #[test]
    fn seed_precedence_is_flag_then_env_then_config() {
        let text = r#"{"model":{"k":1,"d":1},"measure":{"type":"flat"},"solver":{"seed":1},"experiment":{"kind":"check"}}"#;
        assert_eq!(load(text, None, &[]).unwrap().solver.seed, 1);
        assert_eq!(load(text, Some("2"), &[]).unwrap().solver.seed, 2);
        let flag = vec!["solver.seed=3".to_string()];
        assert_eq!(load(text, Some("2"), &flag).unwrap().solver.seed, 3);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let o = vec!["grid.N=64".to_string(), "measure.beta=0.25".to_string()];
        let cfg = load(MINIMAL, None, &o).unwrap();
        assert_eq!(cfg.grid.n, 64);
        assert!(matches!(cfg.measure, MeasureSection::Riesz { beta, .. } if beta == 0.25));
        assert!(load(MINIMAL, None, &["nokey".to_string()]).is_err());
    }
}
