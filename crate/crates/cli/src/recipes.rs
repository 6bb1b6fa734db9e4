//! Named experiment suites with the published study parameters.

use coilpose::constellation::{
    BeaconCoil, ConstellationSpec, MobileGrid, MonoplanarLayout, PerturbationSpec, TriplanarLayout,
};
use coilpose::measurement::{NoiseMode, NoiseModel, SelectionPolicy};
use coilpose::montecarlo::{ExperimentConfig, InitMode};

use crate::config::Suite;

pub const DEFAULT_SEED: u64 = 1;

/// Recipe names with a one-line description.
pub const RECIPES: &[(&str, &str)] = &[
    (
        "placement",
        "mono-planar vs tri-planar array, optimizer started at the true pose",
    ),
    (
        "placement-b",
        "mono-planar vs tri-planar array, optimizer started at a perturbed pose",
    ),
    (
        "snr-sweep",
        "tri-planar array, SNR threshold from 0 to 30 dB",
    ),
    (
        "sensitivity",
        "tri-planar array with perturbed beacon axes, magnitudes and centers",
    ),
    (
        "realistic",
        "realistic coils, amplifier gain 20, seven strongest readings",
    ),
    (
        "realistic-gain-sweep",
        "realistic coils, gain from 1 to 20, up to 12 readings above 15 dB",
    ),
];

pub const SNR_SWEEP_DB: [f64; 7] = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
pub const GAIN_SWEEP: [f64; 5] = [1.0, 5.0, 10.0, 15.0, 20.0];
pub const PERTURBATION_LEVELS: usize = 5;

/// Normalized study defaults: unit-moment beacons, 10 µV noise applied to the
/// sampled waveform, 10 dB selection threshold.
fn normalized(label: &str, constellation: ConstellationSpec) -> ExperimentConfig {
    ExperimentConfig {
        label: label.to_string(),
        constellation,
        noise: NoiseModel {
            sigma_volts: 1e-5,
            mode: NoiseMode::TimeDomain,
            ..NoiseModel::default()
        },
        selection: SelectionPolicy::snr_threshold(10.0),
        init: InitMode::Truth,
        master_seed: DEFAULT_SEED,
        ..ExperimentConfig::default()
    }
}

fn mono() -> ConstellationSpec {
    ConstellationSpec::Monoplanar(MonoplanarLayout::default())
}

fn tri() -> ConstellationSpec {
    ConstellationSpec::Triplanar(TriplanarLayout::default())
}

/// Mobile area closer to the tri-planar array used for the realistic studies.
pub fn reduced_area() -> MobileGrid {
    MobileGrid {
        side_points: 20,
        plane_y_m: 0.8,
        extent_m: 1.2,
        center_x_m: 0.7,
        center_z_m: 0.75,
    }
}

fn realistic_base(label: String, gain: f64, selection: SelectionPolicy) -> ExperimentConfig {
    ExperimentConfig {
        constellation: ConstellationSpec::Triplanar(TriplanarLayout {
            coil: BeaconCoil::realistic(),
            ..TriplanarLayout::default()
        }),
        mobile_grid: reduced_area(),
        gain,
        selection,
        init: InitMode::perturbed_default(),
        ..normalized(&label, tri())
    }
}

/// Builds the suite for a recipe name, or `None` if the name is unknown.
pub fn recipe(name: &str) -> Option<Suite> {
    let scenarios = match name {
        "placement" => vec![
            normalized("mono-planar", mono()),
            normalized("tri-planar", tri()),
        ],
        "placement-b" => [("mono-planar", mono()), ("tri-planar", tri())]
            .into_iter()
            .map(|(l, c)| ExperimentConfig {
                init: InitMode::perturbed_default(),
                ..normalized(l, c)
            })
            .collect(),
        "snr-sweep" => SNR_SWEEP_DB
            .iter()
            .map(|&th| ExperimentConfig {
                selection: SelectionPolicy::snr_threshold(th),
                init: InitMode::perturbed_default(),
                ..normalized(&format!("snr-th-{th}db"), tri())
            })
            .collect(),
        "sensitivity" => {
            let mut v = vec![normalized("unperturbed", tri())];
            for k in 1..=PERTURBATION_LEVELS {
                let k = k as f64;
                for (label, p) in [
                    (
                        format!("axis-{k}deg"),
                        PerturbationSpec::AxisDirection { bound_deg: k },
                    ),
                    (
                        format!("magnitude-{k}pct"),
                        PerturbationSpec::MomentMagnitude {
                            bound_fraction: k / 100.0,
                        },
                    ),
                    (
                        format!("position-{k}mm"),
                        PerturbationSpec::CenterPosition {
                            bound_m: k / 1000.0,
                        },
                    ),
                ] {
                    v.push(ExperimentConfig {
                        perturbation: Some(p),
                        ..normalized(&label, tri())
                    });
                }
            }
            v
        }
        "realistic" => vec![realistic_base(
            "realistic".into(),
            20.0,
            SelectionPolicy::TopN { n: 7 },
        )],
        "realistic-gain-sweep" => GAIN_SWEEP
            .iter()
            .map(|&g| {
                realistic_base(
                    format!("gain-{g}"),
                    g,
                    SelectionPolicy::SnrThreshold {
                        snr_threshold_db: 15.0,
                        max_count: Some(12),
                    },
                )
            })
            .collect(),
        _ => return None,
    };
    Some(Suite {
        recipe: name.to_string(),
        scenarios,
    })
}

/// Command-line overrides applied to every scenario of a suite.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub gain: Option<f64>,
    pub top_n: Option<usize>,
    pub snr_th_db: Option<f64>,
    pub trials: Option<usize>,
    pub noise_mode: Option<NoiseMode>,
}

impl Overrides {
    pub fn apply(&self, suite: &mut Suite) {
        for cfg in &mut suite.scenarios {
            if let Some(s) = self.seed {
                cfg.master_seed = s;
            }
            if let Some(g) = self.gain {
                cfg.gain = g;
            }
            if let Some(th) = self.snr_th_db {
                cfg.selection = match cfg.selection {
                    SelectionPolicy::SnrThreshold { max_count, .. } => {
                        SelectionPolicy::SnrThreshold {
                            snr_threshold_db: th,
                            max_count,
                        }
                    }
                    SelectionPolicy::TopN { .. } => SelectionPolicy::snr_threshold(th),
                };
            }
            if let Some(n) = self.top_n {
                cfg.selection = SelectionPolicy::TopN { n };
            }
            if let Some(t) = self.trials {
                cfg.trials_per_pose = t;
            }
            if let Some(m) = self.noise_mode {
                cfg.noise.mode = m;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config;

    #[test]
    fn every_recipe_builds_and_validates() {
        for (name, _) in RECIPES {
            let suite = recipe(name).unwrap();
            assert_eq!(suite.recipe, *name);
            assert!(config::validate(&suite, true).is_empty(), "{name}");
        }
        assert!(recipe("nope").is_none());
    }

    #[test]
    fn scenario_counts() {
        let count = |n| recipe(n).unwrap().scenarios.len();
        assert_eq!(count("placement"), 2);
        assert_eq!(count("placement-b"), 2);
        assert_eq!(count("snr-sweep"), 7);
        assert_eq!(count("sensitivity"), 1 + 3 * PERTURBATION_LEVELS);
        assert_eq!(count("realistic"), 1);
        assert_eq!(count("realistic-gain-sweep"), 5);
    }

    #[test]
    fn realistic_uses_top_seven_at_gain_twenty() {
        let s = recipe("realistic").unwrap();
        assert_eq!(s.scenarios[0].gain, 20.0);
        assert_eq!(s.scenarios[0].selection, SelectionPolicy::TopN { n: 7 });
    }

    #[test]
    fn overrides_reach_every_scenario() {
        let mut s = recipe("snr-sweep").unwrap();
        Overrides {
            seed: Some(9),
            gain: Some(3.0),
            trials: Some(2),
            noise_mode: Some(NoiseMode::Fast),
            ..Default::default()
        }
        .apply(&mut s);
        for c in &s.scenarios {
            assert_eq!((c.master_seed, c.gain, c.trials_per_pose), (9, 3.0, 2));
            assert_eq!(c.noise.mode, NoiseMode::Fast);
        }
    }

    #[test]
    fn threshold_override_keeps_the_cap() {
        let mut s = recipe("realistic-gain-sweep").unwrap();
        Overrides {
            snr_th_db: Some(12.0),
            ..Default::default()
        }
        .apply(&mut s);
        assert_eq!(
            s.scenarios[0].selection,
            SelectionPolicy::SnrThreshold {
                snr_threshold_db: 12.0,
                max_count: Some(12)
            }
        );
    }

    #[test]
    fn top_n_override_replaces_threshold() {
        let mut s = recipe("placement").unwrap();
        Overrides {
            top_n: Some(6),
            ..Default::default()
        }
        .apply(&mut s);
        assert_eq!(s.scenarios[1].selection, SelectionPolicy::TopN { n: 6 });
    }
}
