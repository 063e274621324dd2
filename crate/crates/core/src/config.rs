//! JSON experiment configuration: system families, fan/mesh resolutions,
//! tolerances and seeds, shared by the CLI and the demos.

use serde::{Deserialize, Serialize};

use crate::flow::{conjugate_point_scan, FlowSettings, PhasePoint};
use crate::geometry::{
    Domain, MagneticSystem, MetricField, OneFormField, Poly2, ScalarField,
};
use crate::{Error, Result};

/// Scalar profile families usable in metric exponents and potentials.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProfileSpec {
    /// `amp · (1 − r²/R²)`.
    RadialBump { amp: f64, radius: f64 },
    /// `ax·x + ay·y`.
    Linear { ax: f64, ay: f64 },
    /// `−ln(1 + κ r²/4)`: constant curvature κ.
    LogConstCurvature { kappa: f64 },
    /// `(1 − r²/R²)^power · Σ c x^i y^j`.
    PolyBump {
        terms: Vec<(u32, u32, f64)>,
        power: u32,
        radius: f64,
    },
}

impl ProfileSpec {
    pub fn build(&self) -> ScalarField {
        match self {
            ProfileSpec::RadialBump { amp, radius } => ScalarField::radial_bump(*amp, *radius),
            ProfileSpec::Linear { ax, ay } => ScalarField::linear(*ax, *ay),
            ProfileSpec::LogConstCurvature { kappa } => ScalarField::log_const_curvature(*kappa),
            ProfileSpec::PolyBump {
                terms,
                power,
                radius,
            } => ScalarField::poly_bump(Poly2::new(terms.clone()), *power, *radius),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MetricSpec {
    Euclidean,
    Conformal { profile: ProfileSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum AlphaSpec {
    Zero,
    /// Constant-curl potential with `dα = λ dx∧dy`.
    Solenoid { lambda: f64 },
    /// Exact potential `α = dh` (zero Lorentz force).
    Exact { profile: ProfileSpec },
    /// Solenoid plus an exact part.
    SolenoidPlusExact { lambda: f64, profile: ProfileSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemSpec {
    pub metric: MetricSpec,
    pub alpha: AlphaSpec,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_radius() -> f64 {
    1.0
}

impl SystemSpec {
    pub fn build(&self) -> Result<MagneticSystem> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::Config {
                path: "system.radius".into(),
                message: format!("must be positive, got {}", self.radius),
            });
        }
        let metric = match &self.metric {
            MetricSpec::Euclidean => MetricField::euclidean(),
            MetricSpec::Conformal { profile } => MetricField::conformal(profile.build()),
        };
        let alpha = match &self.alpha {
            AlphaSpec::Zero => OneFormField::zero(),
            AlphaSpec::Solenoid { lambda } => OneFormField::solenoid(*lambda),
            AlphaSpec::Exact { profile } => OneFormField::exact(&profile.build()),
            AlphaSpec::SolenoidPlusExact { lambda, profile } => OneFormField::sum(
                &OneFormField::solenoid(*lambda),
                &OneFormField::exact(&profile.build()),
            ),
        };
        Ok(MagneticSystem::new(
            metric,
            alpha,
            Domain::disk(self.radius),
        ))
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FanSpec {
    pub stations: usize,
    pub angles: usize,
}

impl Default for FanSpec {
    fn default() -> Self {
        FanSpec {
            stations: 96,
            angles: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeshSpec {
    /// Concentric rings; vertex count ≈ 3·rings².
    pub rings: usize,
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec { rings: 52 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub flow_tol: f64,
    pub chord_quad: usize,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        ToleranceSpec {
            flow_tol: 1e-10,
            chord_quad: 48,
        }
    }
}

/// Top-level experiment configuration (JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub fan: FanSpec,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config {
            path: e.to_string(),
            message: "invalid config json".into(),
        })?;
        if cfg.fan.stations == 0 || cfg.fan.angles == 0 {
            return Err(Error::Config {
                path: "fan".into(),
                message: "resolutions must be positive".into(),
            });
        }
        if cfg.mesh.rings < 2 {
            return Err(Error::Config {
                path: "mesh.rings".into(),
                message: "need at least 2 rings".into(),
            });
        }
        Ok(cfg)
    }

    pub fn flow_settings(&self) -> FlowSettings {
        FlowSettings::with_tol(self.tolerances.flow_tol)
    }
}

/// Simplicity report: strict magnetic convexity margin over the boundary
/// fan plus a conjugate-point scan over boundary-to-boundary geodesics.
#[derive(Debug, Clone, Serialize)]
pub struct SimplicityReport {
    pub min_convexity_margin: f64,
    pub conjugate_point_free: bool,
    pub first_degeneracy: Option<f64>,
    pub simple: bool,
}

/// Check the standard simplicity proxy: strict convexity and no conjugate
/// points along a fan of chords.
pub fn simplicity_report(
    system: &MagneticSystem,
    stations: usize,
    angles: usize,
    settings: &FlowSettings,
) -> Result<SimplicityReport> {
    let min_margin = system.min_convexity_margin(stations.max(16))?;
    if min_margin <= 0.0 {
        return Ok(SimplicityReport {
            min_convexity_margin: min_margin,
            conjugate_point_free: false,
            first_degeneracy: None,
            simple: false,
        });
    }
    let mut fan = Vec::new();
    for i in 0..stations {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / stations as f64;
        let x = system.domain.boundary_point(phi);
        for k in 0..angles {
            let theta = -1.4 + 2.8 * (k as f64 + 0.5) / angles as f64;
            fan.push(PhasePoint {
                x,
                xi: system.boundary_dir(x, theta),
            });
        }
    }
    let reports = conjugate_point_scan(system, &fan, settings)?;
    let first = reports.iter().filter_map(|r| r.first_degeneracy).fold(
        None,
        |acc: Option<f64>, t| match acc {
            Some(a) => Some(a.min(t)),
            None => Some(t),
        },
    );
    Ok(SimplicityReport {
        min_convexity_margin: min_margin,
        conjugate_point_free: first.is_none(),
        first_degeneracy: first,
        simple: first.is_none(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;

    #[test]
    fn parse_and_build_roundtrip() {
        let text = r#"{
            "system": {
                "metric": {"family": "conformal",
                           "profile": {"kind": "radial-bump", "amp": 0.1, "radius": 1.0}},
                "alpha": {"family": "solenoid", "lambda": 0.3}
            },
            "fan": {"stations": 48, "angles": 32},
            "seed": 7
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.fan.stations, 48);
        assert_eq!(cfg.mesh.rings, 52);
        assert_eq!(cfg.seed, 7);
        let sys = cfg.system.build().unwrap();
        // λ(x) = Ω₁₂/√det g = 0.3·e^{−2u(x)} for the conformal factor u
        let p = Vec2::new(0.3, 0.1);
        let u = 0.1 * (1.0 - p.dot(p));
        assert!((sys.lambda(p) - 0.3 * (-2.0 * u as f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_config() {
        let text = r#"{"system": {"metric": {"family": "euclidean"},
                        "alpha": {"family": "zero"}, "radius": -1.0}}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert!(matches!(cfg.system.build(), Err(Error::Config { .. })));

        assert!(ExperimentConfig::from_json("{not json").is_err());
    }

    #[test]
    fn simplicity_gate_flags_non_convex_system() {
        let settings = FlowSettings::default();
        let simple = simplicity_report(
            &crate::geometry::euclidean_disk(0.3),
            16,
            4,
            &settings,
        )
        .unwrap();
        assert!(simple.simple);
        assert!(simple.min_convexity_margin > 0.69);

        let not_simple = simplicity_report(
            &crate::geometry::euclidean_disk(1.5),
            16,
            4,
            &settings,
        )
        .unwrap();
        assert!(!not_simple.simple);
        assert!(not_simple.min_convexity_margin < 0.0);
    }
}
