//! Strict JSON experiment configuration.
//!
//! Unknown keys are rejected with the exact JSON pointer of the offender;
//! silent typos are the dominant failure mode of numerical experiments.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CoreError, Result};
use crate::hamiltonian::{PotentialKind, Preset};
use crate::regularity::InitialDatum;

fn default_dim() -> usize {
    1
}
fn default_n() -> usize {
    512
}
fn default_tau() -> f64 {
    0.01
}
fn default_t() -> f64 {
    30.0
}
fn default_r_schedule() -> Vec<f64> {
    vec![4.0, 8.0]
}
fn default_preset() -> Preset {
    Preset::Mechanical
}
fn default_potential() -> PotentialKind {
    PotentialKind::Cosine
}

fn default_initial_data() -> Vec<InitialDatum> {
    vec![
        InitialDatum::SqrtCusp { x0: 0.5 },
        InitialDatum::Holder {
            x0: 0.5,
            gamma: 1.0 / 3.0,
        },
        InitialDatum::Cosine,
        InitialDatum::RandomNodal {
            seed: 271828,
            nodes: 32,
        },
    ]
}

/// Thresholds shared by the orchestrated checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Samples of the stabilization detector that must sit inside the band.
    pub t0_window: usize,
    /// Relative band around the terminal Lipschitz value.
    pub t0_flatness: f64,
    /// Allowed ratio between per-datum post-stabilization Lipschitz bounds.
    pub family_agreement_factor: f64,
    /// Normalized energy level of the orbit localization check.
    pub energy_level: f64,
    pub energy_tol: f64,
    /// The calibration slack must stay above `−calibration_min_slack`.
    pub calibration_min_slack: f64,
    /// Allowed gap between the two critical-value estimators.
    pub c_cross_method: f64,
    /// Allowed pairwise gap of `c_R` across the stable part of the schedule.
    pub c_r_stability: f64,
    /// Allowed post-stabilization gap between the pointwise-min value
    /// function and the largest-cutoff run.
    pub r_agreement: f64,
    /// Fraction of the horizon treated as burn-in for window-boundary hits.
    pub burn_in_fraction: f64,
    /// Kink filter of the calibration check (second difference bound).
    pub second_diff_bound: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            t0_window: 10,
            t0_flatness: 0.05,
            family_agreement_factor: 1.1,
            energy_level: 1.0,
            energy_tol: 0.1,
            calibration_min_slack: 5e-2,
            c_cross_method: 5e-2,
            c_r_stability: 1e-2,
            r_agreement: 1e-3,
            burn_in_fraction: 0.2,
            second_diff_bound: 200.0,
        }
    }
}

/// Full experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_preset")]
    pub preset: Preset,
    #[serde(default = "default_potential")]
    pub potential: PotentialKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(rename = "N", default = "default_n")]
    pub n: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(rename = "T", default = "default_t")]
    pub t_final: f64,
    #[serde(rename = "R_schedule", default = "default_r_schedule")]
    pub r_schedule: Vec<f64>,
    #[serde(default)]
    pub v_max_override: Option<f64>,
    #[serde(default = "default_initial_data")]
    pub initial_data: Vec<InitialDatum>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config populates defaults")
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| CoreError::config("/", format!("not valid JSON: {e}")))?;
        check_unknown_keys(&value)?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let pointer = path_to_pointer(&e.path().to_string());
            CoreError::config(pointer, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Largest cutoff of the schedule.
    pub fn largest_r(&self) -> f64 {
        *self
            .r_schedule
            .last()
            .expect("validated schedule is nonempty")
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > 2 {
            return Err(CoreError::config("/dim", "dim must be 1 or 2"));
        }
        if self.n < 8 {
            return Err(CoreError::config("/N", format!("N must be ≥ 8, got {}", self.n)));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(CoreError::config("/tau", "tau must be positive and finite"));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(CoreError::config("/T", "T must be nonnegative and finite"));
        }
        if self.r_schedule.is_empty() {
            return Err(CoreError::config("/R_schedule", "R_schedule must be nonempty"));
        }
        if self.r_schedule.iter().any(|r| !(*r > 1.0)) {
            return Err(CoreError::config(
                "/R_schedule",
                "all cutoff radii must exceed 1",
            ));
        }
        if self.r_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CoreError::config("/R_schedule", "R_schedule not ascending"));
        }
        if let Some(v) = self.v_max_override {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CoreError::config(
                    "/v_max_override",
                    "v_max_override must be positive",
                ));
            }
        }
        if self.potential == PotentialKind::CosineMix && self.dim != 2 {
            return Err(CoreError::config(
                "/potential",
                "cosine-mix potential requires dim = 2",
            ));
        }
        if self.initial_data.is_empty() {
            return Err(CoreError::config(
                "/initial_data",
                "at least one initial datum is required",
            ));
        }
        for (i, datum) in self.initial_data.iter().enumerate() {
            datum
                .validate()
                .map_err(|msg| CoreError::config(format!("/initial_data/{i}"), msg))?;
        }
        let t = &self.tolerances;
        if t.t0_window == 0
            || !(t.t0_flatness > 0.0)
            || !(t.family_agreement_factor >= 1.0)
            || !(t.burn_in_fraction >= 0.0 && t.burn_in_fraction <= 1.0)
        {
            return Err(CoreError::config("/tolerances", "inconsistent tolerance block"));
        }
        Ok(())
    }
}

/// `parse_config`: read, strictly parse and validate a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_json_str(&text)
}

/// Convert a serde_path_to_error path (`a.b[0].c`) into a JSON pointer.
fn path_to_pointer(path: &str) -> String {
    if path == "." || path.is_empty() {
        return "/".to_string();
    }
    let mut out = String::new();
    for seg in path.split('.') {
        // split off any [i] suffixes
        let mut rest = seg;
        while let Some(open) = rest.find('[') {
            let (head, tail) = rest.split_at(open);
            if !head.is_empty() {
                out.push('/');
                out.push_str(head);
            }
            let close = tail.find(']').unwrap_or(tail.len() - 1);
            out.push('/');
            out.push_str(&tail[1..close]);
            rest = &tail[close + 1..];
        }
        if !rest.is_empty() {
            out.push('/');
            out.push_str(rest);
        }
    }
    if out.is_empty() {
        "/".to_string()
    } else {
        out
    }
}

const TOP_KEYS: &[&str] = &[
    "preset",
    "potential",
    "dim",
    "N",
    "tau",
    "T",
    "R_schedule",
    "v_max_override",
    "initial_data",
    "tolerances",
    "output_dir",
];

const TOLERANCE_KEYS: &[&str] = &[
    "t0_window",
    "t0_flatness",
    "family_agreement_factor",
    "energy_level",
    "energy_tol",
    "calibration_min_slack",
    "c_cross_method",
    "c_r_stability",
    "r_agreement",
    "burn_in_fraction",
    "second_diff_bound",
];

fn datum_keys(kind: &str) -> Option<&'static [&'static str]> {
    match kind {
        "constant" => Some(&["kind", "value"]),
        "sqrt-cusp" | "sawtooth" => Some(&["kind", "x0"]),
        "holder" => Some(&["kind", "x0", "gamma"]),
        "cosine" => Some(&["kind"]),
        "random-nodal" => Some(&["kind", "seed", "nodes"]),
        _ => None,
    }
}

fn check_unknown_keys(value: &Value) -> Result<()> {
    let obj = match value.as_object() {
        Some(o) => o,
        None => return Err(CoreError::config("/", "config must be a JSON object")),
    };
    for key in obj.keys() {
        if !TOP_KEYS.contains(&key.as_str()) {
            return Err(CoreError::config(format!("/{key}"), "unknown key"));
        }
    }
    if let Some(tols) = obj.get("tolerances") {
        if let Some(t) = tols.as_object() {
            for key in t.keys() {
                if !TOLERANCE_KEYS.contains(&key.as_str()) {
                    return Err(CoreError::config(format!("/tolerances/{key}"), "unknown key"));
                }
            }
        }
    }
    if let Some(Value::Array(items)) = obj.get("initial_data") {
        for (i, item) in items.iter().enumerate() {
            let entry = match item.as_object() {
                Some(e) => e,
                None => {
                    return Err(CoreError::config(
                        format!("/initial_data/{i}"),
                        "initial datum must be an object",
                    ))
                }
            };
            let kind = entry
                .get("kind")
                .and_then(Value::as_str)
                .ok_or_else(|| {
                    CoreError::config(
                        format!("/initial_data/{i}/kind"),
                        "missing or non-string datum kind",
                    )
                })?;
            let allowed = datum_keys(kind).ok_or_else(|| {
                CoreError::config(
                    format!("/initial_data/{i}/kind"),
                    format!("unknown initial-data kind `{kind}`"),
                )
            })?;
            for key in entry.keys() {
                if !allowed.contains(&key.as_str()) {
                    return Err(CoreError::config(
                        format!("/initial_data/{i}/{key}"),
                        "unknown key",
                    ));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_populates_defaults() {
        let cfg = ExperimentConfig::from_json_str("{}").unwrap();
        assert_eq!(cfg.n, 512);
        assert_eq!(cfg.tau, 0.01);
        assert_eq!(cfg.t_final, 30.0);
        assert_eq!(cfg.r_schedule, vec![4.0, 8.0]);
        assert_eq!(cfg.preset, Preset::Mechanical);
        assert_eq!(cfg.potential, PotentialKind::Cosine);
        assert_eq!(cfg.initial_data.len(), 4);
    }

    #[test]
    fn descending_schedule_rejected() {
        let err = ExperimentConfig::from_json_str(r#"{"R_schedule": [8, 4]}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("/R_schedule"), "{msg}");
        assert!(msg.contains("not ascending"), "{msg}");
    }

    #[test]
    fn unknown_key_reported_with_pointer() {
        let err = ExperimentConfig::from_json_str(r#"{"taus": 0.01}"#).unwrap_err();
        assert!(err.to_string().contains("/taus"), "{err}");
        let err = ExperimentConfig::from_json_str(r#"{"tolerances": {"t0window": 3}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("/tolerances/t0window"), "{err}");
        let err = ExperimentConfig::from_json_str(
            r#"{"initial_data": [{"kind": "cosine", "x1": 0.2}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("/initial_data/0/x1"), "{err}");
    }

    #[test]
    fn random_datum_requires_seed() {
        let err = ExperimentConfig::from_json_str(
            r#"{"initial_data": [{"kind": "random-nodal"}]}"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("seed"), "{msg}");
        assert!(msg.contains("/initial_data/0"), "{msg}");
    }

    #[test]
    fn ill_typed_field_names_pointer() {
        let err = ExperimentConfig::from_json_str(r#"{"tau": "fast"}"#).unwrap_err();
        assert!(err.to_string().contains("/tau"), "{err}");
    }

    #[test]
    fn semantic_bounds_enforced() {
        assert!(ExperimentConfig::from_json_str(r#"{"N": 4}"#).is_err());
        assert!(ExperimentConfig::from_json_str(r#"{"tau": 0.0}"#).is_err());
        assert!(ExperimentConfig::from_json_str(r#"{"R_schedule": [0.5, 2]}"#).is_err());
        assert!(
            ExperimentConfig::from_json_str(r#"{"potential": "cosine-mix", "dim": 1}"#).is_err()
        );
    }

    #[test]
    fn roundtrips_through_json() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = ExperimentConfig::from_json_str(&text).unwrap();
        assert_eq!(back.n, cfg.n);
        assert_eq!(back.initial_data, cfg.initial_data);
    }
}
