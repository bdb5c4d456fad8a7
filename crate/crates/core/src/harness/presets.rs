//! The four benchmark experiments, at desk-scale chain lengths.

use super::spec::{ExperimentSpec, SamplerKind};
use super::HarnessError;

pub const PRESET_NAMES: [&str; 4] = ["gamma", "binormal", "mixture", "eightschools"];

fn hmc(model: &str, epsilon: f64, steps: usize, n: usize, seed: u64, init: Vec<f64>) -> ExperimentSpec {
    ExperimentSpec {
        epsilon: Some(epsilon),
        steps: Some(steps),
        n,
        seed,
        init: Some(init),
        ..ExperimentSpec::new(model, SamplerKind::Hmc)
    }
}

fn rwmh(model: &str, sigma: f64, n: usize, record_every: usize, seed: u64, init: Vec<f64>) -> ExperimentSpec {
    ExperimentSpec {
        sigma: Some(sigma),
        n,
        record_every,
        seed,
        init: Some(init),
        ..ExperimentSpec::new(model, SamplerKind::Rwmh)
    }
}

fn twalk(model: &str, n: usize, record_every: usize, seed: u64, init: Vec<f64>, init2: Vec<f64>) -> ExperimentSpec {
    ExperimentSpec {
        n,
        record_every,
        seed,
        init: Some(init),
        init2: Some(init2),
        ..ExperimentSpec::new(model, SamplerKind::Twalk)
    }
}

/// Specs for a named experiment, in HMC, RWMH, t-walk order. The mixture
/// experiment runs the trio twice, once from each starting region.
///
/// RWMH and t-walk record every L-th iteration where the original
/// experiment thinned them to match the HMC trajectory length.
pub fn preset(name: &str, seed: u64) -> Result<Vec<ExperimentSpec>, HarnessError> {
    let specs = match name {
        "gamma" => {
            let n = 20_000;
            vec![
                hmc("gamma51", 0.09, 47, n, seed, vec![500.0]),
                rwmh("gamma51", 5.0, n, 1, seed, vec![500.0]),
                twalk("gamma51", n, 1, seed, vec![500.0], vec![501.0]),
            ]
        }
        "binormal" => {
            let n = 50_000;
            vec![
                hmc("binormal", 0.15, 35, n, seed, vec![-7.0, -7.0]),
                rwmh("binormal", 0.15, n, 35, seed, vec![-7.0, -7.0]),
                twalk("binormal", n, 35, seed, vec![-7.0, -7.0], vec![-6.5, -6.5]),
            ]
        }
        "mixture" => {
            let n = 5_000;
            let mut specs = Vec::new();
            for (a, b) in [(-9.0, -8.0), (2.5, 3.5)] {
                specs.push(hmc("mixture", 0.2, 30, n, seed, vec![a, a]));
                specs.push(rwmh("mixture", 0.2, n, 30, seed, vec![a, a]));
                specs.push(twalk("mixture", n, 30, seed, vec![a, a], vec![b, b]));
            }
            specs
        }
        "eightschools" => {
            let n = 50_000;
            vec![
                hmc("eightschools", 0.08, 60, n, seed, vec![2.0; 10]),
                rwmh("eightschools", 0.32, n, 1, seed, vec![2.0; 10]),
                twalk("eightschools", n, 1, seed, vec![2.0; 10], vec![3.0; 10]),
            ]
        }
        other => {
            return Err(HarnessError::config(
                "preset",
                format!("unknown preset `{other}` (expected one of {})", PRESET_NAMES.join(", ")),
            ))
        }
    };
    Ok(specs)
}
