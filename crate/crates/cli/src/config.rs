//! Loading and checking experiment configuration files.
//!
//! A file holds either a single experiment or a suite:
//!
//! ```json
//! { "recipe": "placement", "scenarios": [ { ... }, { ... } ] }
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use coilpose::constellation::{BeaconCoil, BeaconSpec, ConstellationSpec, PerturbationSpec};
use coilpose::estimator::FitOptions;
use coilpose::measurement::SelectionPolicy;
use coilpose::montecarlo::{ExperimentConfig, InitMode};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One or more experiments run together and written to one output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    #[serde(default)]
    pub recipe: String,
    pub scenarios: Vec<ExperimentConfig>,
}

impl Suite {
    pub fn single(config: ExperimentConfig) -> Self {
        Self {
            recipe: String::new(),
            scenarios: vec![config],
        }
    }
}

/// A problem located at a dotted path inside the configuration document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}", join(.0))]
    Invalid(Vec<Diagnostic>),
}

fn join(ds: &[Diagnostic]) -> String {
    ds.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Reads, parses and validates a configuration file.
pub fn load(path: &Path) -> Result<Suite, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text)
}

/// Parses and validates a configuration document.
pub fn parse(text: &str) -> Result<Suite, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
        ConfigError::Invalid(vec![Diagnostic::new(
            "",
            format!(
                "invalid JSON at line {} column {}: {e}",
                e.line(),
                e.column()
            ),
        )])
    })?;
    let is_suite = value.get("scenarios").is_some();
    let suite = if is_suite {
        structural::<Suite>(value, "")?
    } else {
        Suite::single(structural::<ExperimentConfig>(value, "")?)
    };
    let diags = validate(&suite, is_suite);
    if diags.is_empty() {
        Ok(suite)
    } else {
        Err(ConfigError::Invalid(diags))
    }
}

fn structural<T: for<'de> Deserialize<'de>>(
    value: serde_json::Value,
    prefix: &str,
) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let mut path = e.path().to_string();
        if path == "." {
            path.clear();
        }
        let message = e.inner().to_string();
        // serde reports a missing field at its parent; point at the field itself.
        if let Some(field) = message
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
        {
            path = join_path(&path, field);
        }
        ConfigError::Invalid(vec![Diagnostic::new(join_path(prefix, &path), message)])
    })
}

fn join_path(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a}.{b}"),
    }
}

/// Semantic checks on an already well-formed suite. An empty result means the
/// suite can be run.
pub fn validate(suite: &Suite, is_suite: bool) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if suite.scenarios.is_empty() {
        out.push(Diagnostic::new(
            "scenarios",
            "at least one scenario is required",
        ));
    }
    for (i, cfg) in suite.scenarios.iter().enumerate() {
        let prefix = if is_suite {
            format!("scenarios[{i}]")
        } else {
            String::new()
        };
        Checker {
            prefix: &prefix,
            out: &mut out,
        }
        .scenario(cfg);
    }
    out
}

struct Checker<'a> {
    prefix: &'a str,
    out: &'a mut Vec<Diagnostic>,
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl Checker<'_> {
    fn fail(&mut self, path: &str, message: impl Into<String>) {
        self.out
            .push(Diagnostic::new(join_path(self.prefix, path), message));
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.fail(path, format!("must be > 0, got {v}"));
        }
    }

    fn non_negative(&mut self, path: &str, v: f64) {
        if !(v.is_finite() && v >= 0.0) {
            self.fail(path, format!("must be >= 0, got {v}"));
        }
    }

    fn at_least_one(&mut self, path: &str, v: u64) {
        if v == 0 {
            self.fail(path, "must be at least 1");
        }
    }

    fn vector(&mut self, path: &str, v: &[f64; 3], nonzero: bool) {
        if !finite(v) {
            self.fail(path, "non-finite component");
        } else if nonzero && v.iter().all(|x| *x == 0.0) {
            self.fail(path, "must be a non-zero vector");
        }
    }

    fn scenario(&mut self, cfg: &ExperimentConfig) {
        let before = self.out.len();
        self.constellation(&cfg.constellation);

        let g = &cfg.mobile_grid;
        self.at_least_one("mobile_grid.side_points", g.side_points as u64);
        self.non_negative("mobile_grid.extent_m", g.extent_m);
        for (name, v) in [
            ("mobile_grid.plane_y_m", g.plane_y_m),
            ("mobile_grid.center_x_m", g.center_x_m),
            ("mobile_grid.center_z_m", g.center_z_m),
        ] {
            if !v.is_finite() {
                self.fail(name, "must be finite");
            }
        }

        let r = &cfg.receiver;
        self.at_least_one("receiver.windings", r.windings as u64);
        self.positive("receiver.radius_m", r.radius_m);
        self.positive("receiver.frequency_hz", r.frequency_hz);

        let n = &cfg.noise;
        self.non_negative("noise.sigma_volts", n.sigma_volts);
        self.at_least_one("noise.periods", n.periods as u64);
        if n.samples_per_measurement < 2 * n.periods.max(1) {
            self.fail(
                "noise.samples_per_measurement",
                "must be at least twice the number of periods",
            );
        }

        self.selection(&cfg.selection, &cfg.constellation);
        self.positive("gain", cfg.gain);
        self.init(&cfg.init);
        if let Some(p) = &cfg.perturbation {
            self.perturbation(p);
        }
        self.fit(&cfg.fit);
        self.at_least_one("trials_per_pose", cfg.trials_per_pose as u64);
        if !cfg.coverage_snr_db.is_finite() {
            self.fail("coverage_snr_db", "must be finite");
        }

        // Anything the field checks missed is caught by the library itself.
        if self.out.len() == before {
            if let Err(e) = cfg.validate().and_then(|_| cfg.poses().map(|_| ())) {
                self.fail("", e.to_string());
            }
        }
    }

    fn coil(&mut self, path: &str, c: &BeaconCoil) {
        self.at_least_one(&format!("{path}.windings"), c.windings as u64);
        self.positive(&format!("{path}.radius_m"), c.radius_m);
        self.non_negative(&format!("{path}.current_a"), c.current_a);
        self.positive(&format!("{path}.frequency_hz"), c.frequency_hz);
    }

    fn beacon(&mut self, path: &str, b: &BeaconSpec) {
        self.vector(&format!("{path}.center_m"), &b.center_m, false);
        self.vector(&format!("{path}.axis"), &b.axis, true);
        self.coil(
            path,
            &BeaconCoil {
                windings: b.windings,
                radius_m: b.radius_m,
                current_a: b.current_a,
                frequency_hz: b.frequency_hz,
            },
        );
    }

    fn constellation(&mut self, spec: &ConstellationSpec) {
        match spec {
            ConstellationSpec::Monoplanar(l) => {
                self.positive("constellation.extent_m", l.extent_m);
                self.at_least_one("constellation.rows", l.rows as u64);
                self.at_least_one("constellation.cols", l.cols as u64);
                self.vector("constellation.center_m", &l.center_m, false);
                self.coil("constellation.coil", &l.coil);
            }
            ConstellationSpec::Triplanar(l) => {
                self.positive("constellation.extent_m", l.extent_m);
                self.at_least_one("constellation.per_side", l.per_side as u64);
                self.positive("constellation.offset_m", l.offset_m);
                self.coil("constellation.coil", &l.coil);
            }
            ConstellationSpec::Custom { beacons, .. } => {
                if beacons.is_empty() {
                    self.fail("constellation.beacons", "at least one beacon is required");
                }
                for (i, b) in beacons.iter().enumerate() {
                    self.beacon(&format!("constellation.beacons[{i}]"), b);
                    if let Some(j) = beacons[..i].iter().position(|o| o.center_m == b.center_m) {
                        self.fail(
                            &format!("constellation.beacons[{i}].center_m"),
                            format!("same center as beacon {j}"),
                        );
                    }
                }
            }
        }
    }

    fn selection(&mut self, s: &SelectionPolicy, c: &ConstellationSpec) {
        match *s {
            SelectionPolicy::SnrThreshold {
                snr_threshold_db,
                max_count,
            } => {
                if snr_threshold_db.is_nan() {
                    self.fail("selection.snr_threshold_db", "must be a number");
                }
                if max_count == Some(0) {
                    self.fail("selection.max_count", "must be at least 1");
                }
            }
            SelectionPolicy::TopN { n } => {
                self.at_least_one("selection.n", n as u64);
                if let Ok(built) = c.build() {
                    if n > built.len() {
                        self.fail(
                            "selection.n",
                            format!("exceeds the {} beacons of the constellation", built.len()),
                        );
                    }
                }
            }
        }
    }

    fn init(&mut self, init: &InitMode) {
        match init {
            InitMode::Truth => {}
            InitMode::PerturbedTruth {
                position_bound_m,
                angle_bound_deg,
            } => {
                self.non_negative("init.position_bound_m", *position_bound_m);
                self.non_negative("init.angle_bound_deg", *angle_bound_deg);
            }
            InitMode::Fixed {
                position_m,
                attitude,
            } => {
                self.vector("init.position_m", position_m, false);
                self.vector("init.attitude", attitude, true);
            }
        }
    }

    fn perturbation(&mut self, p: &PerturbationSpec) {
        match *p {
            PerturbationSpec::AxisDirection { bound_deg } => {
                self.non_negative("perturbation.bound_deg", bound_deg)
            }
            PerturbationSpec::MomentMagnitude { bound_fraction } => {
                self.non_negative("perturbation.bound_fraction", bound_fraction);
                if bound_fraction > 1.0 {
                    self.fail("perturbation.bound_fraction", "must not exceed 1");
                }
            }
            PerturbationSpec::CenterPosition { bound_m } => {
                self.non_negative("perturbation.bound_m", bound_m)
            }
        }
    }

    fn fit(&mut self, f: &FitOptions) {
        self.at_least_one("fit.max_iterations", f.max_iterations as u64);
        self.positive("fit.simplex_tolerance", f.simplex_tolerance);
        self.positive("fit.f_tolerance", f.f_tolerance);
        self.positive("fit.initial_step_m", f.initial_step_m);
        self.positive("fit.initial_step_rad", f.initial_step_rad);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::to_value(ExperimentConfig::default()).unwrap()
    }

    fn paths(err: ConfigError) -> Vec<String> {
        match err {
            ConfigError::Invalid(ds) => ds.into_iter().map(|d| d.path).collect(),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn default_config_round_trips() {
        let suite = parse(&base().to_string()).unwrap();
        assert_eq!(suite.scenarios, vec![ExperimentConfig::default()]);
    }

    #[test]
    fn missing_sigma_names_the_field() {
        let mut v = base();
        v["noise"].as_object_mut().unwrap().remove("sigma_volts");
        let p = paths(parse(&v.to_string()).unwrap_err());
        assert_eq!(p, vec!["noise.sigma_volts"]);
    }

    #[test]
    fn missing_field_inside_suite_is_prefixed() {
        let mut v = base();
        v["noise"].as_object_mut().unwrap().remove("sigma_volts");
        let doc = serde_json::json!({ "scenarios": [base(), v] });
        let p = paths(parse(&doc.to_string()).unwrap_err());
        assert_eq!(p, vec!["scenarios[1].noise.sigma_volts"]);
    }

    #[test]
    fn negative_radius_names_the_beacon() {
        let mut v = base();
        let beacon = serde_json::json!({
            "center_m": [0.0, 0.0, 0.0], "axis": [0.0, 0.0, 1.0],
            "windings": 1, "radius_m": 0.5, "current_a": 1.0, "frequency_hz": 2e5
        });
        let mut beacons = vec![beacon; 5];
        for (i, b) in beacons.iter_mut().enumerate() {
            b["center_m"][0] = serde_json::json!(i as f64);
        }
        beacons[3]["radius_m"] = serde_json::json!(-0.1);
        v["constellation"] = serde_json::json!({ "kind": "custom", "beacons": beacons });
        let p = paths(parse(&v.to_string()).unwrap_err());
        assert_eq!(p, vec!["constellation.beacons[3].radius_m"]);
    }

    #[test]
    fn duplicate_centers_are_reported() {
        let mut v = base();
        let beacon = serde_json::json!({
            "center_m": [0.0, 0.0, 0.0], "axis": [0.0, 0.0, 1.0],
            "windings": 1, "radius_m": 0.5, "current_a": 1.0, "frequency_hz": 2e5
        });
        v["constellation"] =
            serde_json::json!({ "kind": "custom", "beacons": [beacon.clone(), beacon] });
        let p = paths(parse(&v.to_string()).unwrap_err());
        assert_eq!(p, vec!["constellation.beacons[1].center_m"]);
    }

    #[test]
    fn several_problems_are_all_listed() {
        let mut v = base();
        v["gain"] = serde_json::json!(0.0);
        v["trials_per_pose"] = serde_json::json!(0);
        v["receiver"]["radius_m"] = serde_json::json!(-1.0);
        let p = paths(parse(&v.to_string()).unwrap_err());
        assert_eq!(p, vec!["receiver.radius_m", "gain", "trials_per_pose"]);
    }

    #[test]
    fn unknown_field_is_rejected_with_its_parent() {
        let mut v = base();
        v["noise"]["sigma"] = serde_json::json!(1e-5);
        let p = paths(parse(&v.to_string()).unwrap_err());
        assert_eq!(p, vec!["noise.sigma"]);
    }

    #[test]
    fn top_n_larger_than_constellation() {
        let mut v = base();
        v["selection"] = serde_json::json!({ "kind": "top_n", "n": 40 });
        let p = paths(parse(&v.to_string()).unwrap_err());
        assert_eq!(p, vec!["selection.n"]);
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse("{ \"noise\": ").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn empty_suite_is_invalid() {
        let p = paths(parse(r#"{ "scenarios": [] }"#).unwrap_err());
        assert_eq!(p, vec!["scenarios"]);
    }
}
