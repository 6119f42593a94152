//! Synthetic scenario generator.
//!
//! Produces datasets shaped like the gridded hourly-temperature collections
//! this crate targets: each record is a per-location mean offset plus a
//! per-scenario smooth shape plus white noise,
//!
//! ```text
//! values(l, s)[t] = m_l + amplitude * g_s(t) + eps_t
//! ```
//!
//! where `m_l ~ Normal(0, location_mean_spread^2)` per location and `g_s` is
//! a unit-RMS random-phase sum of low-frequency sinusoids plus a diurnal
//! harmonic, shared by every location of scenario `s`. With `shape_groups`
//! set, scenarios reuse shapes round-robin, planting that many shape
//! clusters; the assignment is reported in [`SyntheticTruth`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::data::{Dataset, TimeSeriesRecord};
use crate::error::{Error, Result};

/// Parameters of the synthetic generator. Fully deterministic given
/// `rng_seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_locations: usize,
    pub n_scenarios: usize,
    pub t: usize,
    /// Std of the per-location mean offsets m_l.
    pub location_mean_spread: f64,
    /// Amplitude multiplying the unit-RMS per-scenario shape.
    pub scenario_shape_amplitude: f64,
    pub noise_std: f64,
    pub rng_seed: u64,
    /// Number of distinct shapes; None gives every scenario its own shape.
    pub shape_groups: Option<usize>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_locations: 1,
            n_scenarios: 200,
            t: 2160,
            location_mean_spread: 5.0,
            scenario_shape_amplitude: 1.0,
            noise_std: 0.3,
            rng_seed: 0,
            shape_groups: None,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_locations == 0 || self.n_scenarios == 0 {
            return Err(Error::InvalidParam {
                name: "n_locations/n_scenarios",
                reason: "must be >= 1".into(),
            });
        }
        if self.n_locations * self.n_scenarios < 2 {
            return Err(Error::DatasetTooSmall {
                n: self.n_locations * self.n_scenarios,
            });
        }
        if self.t < 2 {
            return Err(Error::SeriesTooShort { t: self.t });
        }
        for (name, v) in [
            ("location_mean_spread", self.location_mean_spread),
            ("scenario_shape_amplitude", self.scenario_shape_amplitude),
            ("noise_std", self.noise_std),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParam {
                    name: match name {
                        "location_mean_spread" => "location_mean_spread",
                        "scenario_shape_amplitude" => "scenario_shape_amplitude",
                        _ => "noise_std",
                    },
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        if let Some(g) = self.shape_groups {
            if g == 0 || g > self.n_scenarios {
                return Err(Error::InvalidParam {
                    name: "shape_groups",
                    reason: format!("must be in 1..={}, got {g}", self.n_scenarios),
                });
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines (# starts a comment) into a spec.
    /// Unknown keys are an error so config typos do not silently vanish.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut spec = SyntheticSpec::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Format(format!(
                "line {}: expected key = value, got {:?}",
                lineno + 1,
                line
            )))?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &'static str| Error::Parse {
                path: "<config>".into(),
                row: lineno + 1,
                column: 1,
                what,
                value: value.to_string(),
            };
            match key {
                "n_locations" => spec.n_locations = value.parse().map_err(|_| bad("integer"))?,
                "n_scenarios" => spec.n_scenarios = value.parse().map_err(|_| bad("integer"))?,
                "t" => spec.t = value.parse().map_err(|_| bad("integer"))?,
                "location_mean_spread" => {
                    spec.location_mean_spread = value.parse().map_err(|_| bad("real"))?
                }
                "scenario_shape_amplitude" => {
                    spec.scenario_shape_amplitude = value.parse().map_err(|_| bad("real"))?
                }
                "noise_std" => spec.noise_std = value.parse().map_err(|_| bad("real"))?,
                "rng_seed" => spec.rng_seed = value.parse().map_err(|_| bad("integer"))?,
                "shape_groups" => {
                    spec.shape_groups = Some(value.parse().map_err(|_| bad("integer"))?)
                }
                other => {
                    return Err(Error::Format(format!(
                        "line {}: unknown key {:?}",
                        lineno + 1,
                        other
                    )))
                }
            }
        }
        Ok(spec)
    }
}

/// Ground truth behind a generated dataset, for experiments and tests.
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    /// m_l per location, in location order.
    pub location_means: Vec<f64>,
    /// Shape-group id per scenario, in scenario order.
    pub scenario_groups: Vec<usize>,
    /// Unit-RMS shape per group.
    pub shapes: Vec<Vec<f64>>,
}

// Seed salts keep the three random streams independent, so e.g. changing
// noise_std cannot shift the location offsets.
const LOC_STREAM: u64 = 0x6c6f_6361;
const SHAPE_STREAM: u64 = 0x7368_6170;
const NOISE_STREAM: u64 = 0x6e6f_6973;

/// Generates a dataset according to `spec`. Record order is scenario-major:
/// (s=0, l=0), (s=0, l=1), ..., matching the long-layout sort order.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    generate_synthetic_with_truth(spec).map(|(ds, _)| ds)
}

/// Like [`generate_synthetic`], also returning the planted structure.
pub fn generate_synthetic_with_truth(spec: &SyntheticSpec) -> Result<(Dataset, SyntheticTruth)> {
    spec.validate()?;
    let n_groups = spec.shape_groups.unwrap_or(spec.n_scenarios);

    let mut loc_rng = ChaCha8Rng::seed_from_u64(spec.rng_seed ^ LOC_STREAM);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let location_means: Vec<f64> = (0..spec.n_locations)
        .map(|_| spec.location_mean_spread * std_normal.sample(&mut loc_rng))
        .collect();

    let mut shape_rng = ChaCha8Rng::seed_from_u64(spec.rng_seed ^ SHAPE_STREAM);
    let shapes: Vec<Vec<f64>> = (0..n_groups)
        .map(|_| scenario_shape(spec.t, &mut shape_rng))
        .collect();
    let scenario_groups: Vec<usize> = (0..spec.n_scenarios).map(|s| s % n_groups).collect();

    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.rng_seed ^ NOISE_STREAM);
    let mut records = Vec::with_capacity(spec.n_locations * spec.n_scenarios);
    for s in 0..spec.n_scenarios {
        let shape = &shapes[scenario_groups[s]];
        for l in 0..spec.n_locations {
            let mut values = Vec::with_capacity(spec.t);
            for t in 0..spec.t {
                let noise = if spec.noise_std > 0.0 {
                    spec.noise_std * std_normal.sample(&mut noise_rng)
                } else {
                    // Keep the noise stream position independent of noise_std.
                    0.0
                };
                values.push(
                    location_means[l] + spec.scenario_shape_amplitude * shape[t] + noise,
                );
            }
            records.push(TimeSeriesRecord::new(s as u64, l as u64, values));
        }
    }
    let ds = Dataset::from_records(records)?;
    Ok((
        ds,
        SyntheticTruth {
            location_means,
            scenario_groups,
            shapes,
        },
    ))
}

const N_LOW_FREQ: usize = 4;
/// Nominal diurnal period in samples (hourly data).
const DIURNAL_PERIOD: f64 = 24.0;

/// A smooth shape: random-amplitude, random-phase low-frequency sinusoids
/// plus a diurnal harmonic, normalized to unit RMS. All component
/// frequencies are integer cycle counts over T so the sample mean is zero.
fn scenario_shape(t_len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let freq_range = Uniform::new_inclusive(1u32, 8).expect("static range");
    let amp_range = Uniform::new(0.5f64, 1.5).expect("static range");
    let phase_range = Uniform::new(0.0f64, std::f64::consts::TAU).expect("static range");

    let mut components: Vec<(f64, f64, f64)> = (0..N_LOW_FREQ)
        .map(|_| {
            (
                f64::from(freq_range.sample(rng)),
                amp_range.sample(rng),
                phase_range.sample(rng),
            )
        })
        .collect();
    let diurnal_cycles = ((t_len as f64 / DIURNAL_PERIOD).round()).max(1.0);
    components.push((diurnal_cycles, 0.7, phase_range.sample(rng)));

    let mut shape: Vec<f64> = (0..t_len)
        .map(|t| {
            components
                .iter()
                .map(|&(freq, amp, phase)| {
                    amp * (std::f64::consts::TAU * freq * t as f64 / t_len as f64 + phase).sin()
                })
                .sum()
        })
        .collect();
    let rms = (shape.iter().map(|v| v * v).sum::<f64>() / t_len as f64).sqrt();
    if rms > 0.0 {
        for v in &mut shape {
            *v /= rms;
        }
    }
    shape
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    #[test]
    fn degenerate_spec_gives_zeros() {
        let spec = SyntheticSpec {
            n_locations: 2,
            n_scenarios: 2,
            t: 8,
            location_mean_spread: 0.0,
            scenario_shape_amplitude: 0.0,
            noise_std: 0.0,
            rng_seed: 1,
            shape_groups: None,
        };
        let ds = generate_synthetic(&spec).unwrap();
        for rec in ds.records() {
            assert!(rec.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = SyntheticSpec {
            n_locations: 3,
            n_scenarios: 4,
            t: 32,
            location_mean_spread: 2.0,
            scenario_shape_amplitude: 1.0,
            noise_std: 0.5,
            rng_seed: 99,
            shape_groups: None,
        };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spread_dominates_location_means() {
        // spread=5, amplitude=1, noise=0.1: across-scenario mean differences
        // per location stay near zero, across-location differences track m_l.
        let spec = SyntheticSpec {
            n_locations: 10,
            n_scenarios: 10,
            t: 256,
            location_mean_spread: 5.0,
            scenario_shape_amplitude: 1.0,
            noise_std: 0.1,
            rng_seed: 7,
            shape_groups: None,
        };
        let (ds, truth) = generate_synthetic_with_truth(&spec).unwrap();
        for rec in ds.records() {
            let expected = truth.location_means[rec.location_id as usize];
            // Shapes have exactly zero sample mean; only noise moves the mean.
            assert!(
                (rec.mean() - expected).abs() < 0.1,
                "record mean {} far from m_l {}",
                rec.mean(),
                expected
            );
        }
        let loc_std = stats::population_std(&truth.location_means);
        assert!((loc_std - 5.0).abs() < 2.5, "location spread {loc_std}");
    }

    #[test]
    fn noiseless_same_scenario_records_differ_by_constant() {
        let spec = SyntheticSpec {
            n_locations: 3,
            n_scenarios: 2,
            t: 64,
            location_mean_spread: 4.0,
            scenario_shape_amplitude: 1.5,
            noise_std: 0.0,
            rng_seed: 3,
            shape_groups: None,
        };
        let (ds, truth) = generate_synthetic_with_truth(&spec).unwrap();
        let a = &ds.records()[0]; // (s=0, l=0)
        let b = &ds.records()[1]; // (s=0, l=1)
        let offset = truth.location_means[0] - truth.location_means[1];
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!(((x - y) - offset).abs() < 1e-12);
        }
    }

    #[test]
    fn planted_groups_reuse_shapes() {
        let spec = SyntheticSpec {
            n_locations: 1,
            n_scenarios: 6,
            t: 32,
            location_mean_spread: 0.0,
            scenario_shape_amplitude: 1.0,
            noise_std: 0.0,
            rng_seed: 11,
            shape_groups: Some(3),
        };
        let (ds, truth) = generate_synthetic_with_truth(&spec).unwrap();
        assert_eq!(truth.scenario_groups, vec![0, 1, 2, 0, 1, 2]);
        // Scenarios 0 and 3 share a shape and have no noise: identical series.
        assert_eq!(ds.records()[0].values, ds.records()[3].values);
        assert_ne!(ds.records()[0].values, ds.records()[1].values);
    }

    #[test]
    fn shapes_have_unit_rms_and_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = scenario_shape(240, &mut rng);
        let rms = (shape.iter().map(|v| v * v).sum::<f64>() / 240.0).sqrt();
        assert!((rms - 1.0).abs() < 1e-12);
        assert!(stats::mean(&shape).abs() < 1e-12);
    }

    #[test]
    fn key_value_config_round_trip() {
        let text = "n_locations = 4\nn_scenarios = 8\nt = 128\n\
                    location_mean_spread = 2.5\nscenario_shape_amplitude = 1.0\n\
                    noise_std = 0.25\nrng_seed = 42\nshape_groups = 2\n# comment\n";
        let spec = SyntheticSpec::from_key_values(text).unwrap();
        assert_eq!(spec.n_locations, 4);
        assert_eq!(spec.n_scenarios, 8);
        assert_eq!(spec.t, 128);
        assert_eq!(spec.shape_groups, Some(2));
        assert!(SyntheticSpec::from_key_values("nope = 1").is_err());
    }
}
