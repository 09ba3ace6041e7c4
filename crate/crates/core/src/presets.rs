//! Problem presets and their TOML schema.
//!
//! A preset pins everything the downstream experiments consume: the
//! eigenvalue rule, the mode split, the nonlinearity, the cutoff geometry,
//! and the certified constants `K₀`, `K₁`, `R`. Pinning the sampled
//! constants in the file (rather than re-sampling at load time) keeps every
//! derived rate reproducible; the `certify` path regenerates them so the
//! pins can be audited.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{
    estimate_constants, sample_raw_sup, NonlinearityKind, NonlinearitySpec, SpectralProblem,
};

/// How the eigenvalue sequence is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EigenvalueRule {
    /// `λ_k = scale · k`
    Linear { scale: f64 },
    /// `λ_k = scale · k²`
    Quadratic { scale: f64 },
    /// Explicit list (must have `modes` entries).
    Explicit { values: Vec<f64> },
}

impl EigenvalueRule {
    pub fn generate(&self, modes: usize) -> Result<Vec<f64>> {
        match self {
            EigenvalueRule::Linear { scale } => {
                Ok((1..=modes).map(|k| scale * k as f64).collect())
            }
            EigenvalueRule::Quadratic { scale } => {
                Ok((1..=modes).map(|k| scale * (k * k) as f64).collect())
            }
            EigenvalueRule::Explicit { values } => {
                if values.len() != modes {
                    return Err(Error::Config(format!(
                        "explicit eigenvalue list has {} entries, expected {modes}",
                        values.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }
}

/// Certified constants, pinned in the preset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnedConstants {
    pub k0: f64,
    pub k1: f64,
    pub r_trunc: f64,
    /// Sampling parameters that produced the pins, for regeneration.
    #[serde(default)]
    pub certify_samples: Option<usize>,
    #[serde(default)]
    pub certify_seed: Option<u64>,
}

/// The full declarative description of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub name: String,
    pub modes: usize,
    pub split_index: usize,
    pub eigenvalues: EigenvalueRule,
    pub nonlinearity: NonlinearitySpec,
    pub constants: PinnedConstants,
}

impl ProblemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Build the runtime problem, enforcing all structural invariants.
    pub fn build(&self) -> Result<SpectralProblem> {
        let eigenvalues = self.eigenvalues.generate(self.modes)?;
        SpectralProblem::new(
            eigenvalues,
            self.split_index,
            self.nonlinearity.clone(),
            self.constants.k0,
            self.constants.k1,
            self.constants.r_trunc,
        )
    }
}

/// Analytic long-time ball estimate per nonlinearity kind, used by the
/// truncation-radius rule.
fn ball_estimate(config: &ProblemConfig, eigenvalues: &[f64]) -> Result<f64> {
    let lambda1 = eigenvalues[0];
    Ok(match &config.nonlinearity.kind {
        NonlinearityKind::Zero => 0.0,
        NonlinearityKind::ConstantForcing { c } => crate::state::norm(c) / lambda1,
        NonlinearityKind::Decoupled { map } => {
            // The bounded dynamics live over the support of g with Q-values
            // up to sup|g| / lambda_{N+1}; the ball must cover that region
            // so the global cutoff stays inactive wherever g is nonzero.
            let provisional = SpectralProblem::new(
                eigenvalues.to_vec(),
                config.split_index,
                config.nonlinearity.clone(),
                0.0,
                0.0,
                map.support_radius().max(1.0) * 10.0,
            )?;
            let sup = sample_raw_sup(&provisional, map.support_radius(), 2000, 0xB411);
            let lambda_n1 = eigenvalues[config.split_index];
            let q_max = sup / lambda_n1;
            (map.support_radius().powi(2) + q_max * q_max)
                .sqrt()
                .max(sup / lambda1)
        }
        NonlinearityKind::ChafeeInfante { .. } => {
            // d|u|²/dt ≤ −2λ₁|u|² + π/2 pointwise for u − u³ on (0, π).
            (std::f64::consts::PI / (4.0 * lambda1)).sqrt()
        }
    })
}

/// Regenerated constants for a config: the truncation radius from
/// `R = 2 max(K₀_raw/λ₁, ball estimate)` and the sampled `K₀`, `K₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedConstants {
    pub k0: f64,
    pub k1: f64,
    pub r_trunc: f64,
    pub k0_raw: f64,
    pub ball_estimate: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Recompute the certified constants for a config. For the analytic kinds
/// this reproduces the closed forms; for sampled kinds it reruns the seeded
/// Monte-Carlo certification.
pub fn certify(config: &ProblemConfig, n_samples: usize, seed: u64) -> Result<CertifiedConstants> {
    let eigenvalues = config.eigenvalues.generate(config.modes)?;
    let lambda1 = eigenvalues[0];
    let ball = ball_estimate(config, &eigenvalues)?;
    let (k0_raw, r_trunc) = match &config.nonlinearity.kind {
        NonlinearityKind::Zero => (0.0, config.constants.r_trunc),
        _ => {
            let provisional = SpectralProblem::new(
                eigenvalues.clone(),
                config.split_index,
                config.nonlinearity.clone(),
                0.0,
                0.0,
                ball.max(1.0),
            )?;
            let k0_raw = sample_raw_sup(&provisional, ball, n_samples, seed);
            (k0_raw, 2.0 * (k0_raw / lambda1).max(ball))
        }
    };
    let probe = SpectralProblem::new(
        eigenvalues,
        config.split_index,
        config.nonlinearity.clone(),
        0.0,
        0.0,
        r_trunc,
    )?;
    let (k0, k1) = estimate_constants(&probe, n_samples, seed);
    Ok(CertifiedConstants {
        k0,
        k1,
        r_trunc,
        k0_raw,
        ball_estimate: ball,
        n_samples,
        seed,
    })
}

const PRESET_ZERO: &str = include_str!("../presets/zero.toml");
const PRESET_FORCED: &str = include_str!("../presets/forced.toml");
const PRESET_DECOUPLED: &str = include_str!("../presets/decoupled.toml");
const PRESET_CI: &str = include_str!("../presets/ci-16-2.toml");

/// Names of the built-in presets.
pub fn preset_names() -> &'static [&'static str] {
    &["zero", "forced", "decoupled", "ci-16-2"]
}

/// Load a built-in preset by name.
pub fn load_preset(name: &str) -> Result<ProblemConfig> {
    let text = match name {
        "zero" => PRESET_ZERO,
        "forced" => PRESET_FORCED,
        "decoupled" => PRESET_DECOUPLED,
        "ci-16-2" => PRESET_CI,
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    ProblemConfig::from_toml_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimates::rate_constants;
    use approx::assert_relative_eq;

    #[test]
    fn all_presets_build() {
        for name in preset_names() {
            let config = load_preset(name).unwrap();
            let problem = config.build().unwrap_or_else(|e| {
                panic!("preset {name} failed to build: {e}");
            });
            assert!(problem.k1() < problem.lambda_n1(), "preset {name}");
            assert!(problem.r_trunc() > problem.k0() / problem.lambda1());
        }
    }

    #[test]
    fn unknown_preset_rejected() {
        assert!(matches!(
            load_preset("nope"),
            Err(Error::UnknownPreset(_))
        ));
    }

    #[test]
    fn forced_preset_pins_match_analytics() {
        let config = load_preset("forced").unwrap();
        let problem = config.build().unwrap();
        let (k0, k1) = estimate_constants(&problem, 10, 0);
        assert_relative_eq!(k0, config.constants.k0, max_relative = 1e-12);
        assert_relative_eq!(k1, config.constants.k1, max_relative = 1e-12);
    }

    #[test]
    fn zero_preset_rate_equals_lambda_n1() {
        let problem = load_preset("zero").unwrap().build().unwrap();
        let constants = rate_constants(&problem).unwrap();
        assert_eq!(constants.rate, problem.lambda_n1());
        assert_eq!(constants.alpha, 0.0);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let config = load_preset("forced").unwrap();
        let text = config.to_toml_string();
        let back = ProblemConfig::from_toml_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn explicit_rule_validates_length() {
        let rule = EigenvalueRule::Explicit {
            values: vec![1.0, 2.0],
        };
        assert!(rule.generate(3).is_err());
        assert_eq!(rule.generate(2).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn quadratic_rule_matches_sine_spectrum() {
        let rule = EigenvalueRule::Quadratic { scale: 2.0 };
        assert_eq!(rule.generate(3).unwrap(), vec![2.0, 8.0, 18.0]);
    }
}
