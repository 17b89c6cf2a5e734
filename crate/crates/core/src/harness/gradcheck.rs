//! Finite-difference validation of the analytic cost gradients.
//!
//! Sweeps architectures L ∈ {1,2,3} × H ∈ {1,5,10} for both methods, drawing
//! random weight vectors and comparing the analytic gradient against the
//! double-double central-difference oracle with h = 1e-6. For single-layer
//! networks the reverse-accumulation path is additionally compared against
//! the closed-form gradient families.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::fd;
use crate::form::{CostFn, Method};
use crate::net::{closed_form_gradients, Architecture, Evaluator, NetworkParameters, PointEval};
use crate::ode::{Grid, StiffLinearIvp};
use crate::Result;

#[derive(Debug, Clone)]
pub struct GradcheckOptions {
    /// Scaled-error threshold; the check fails above it.
    pub tolerance: f64,
    /// Random weight draws per architecture and method.
    pub draws: usize,
    pub seed: u64,
    /// Test hook: offset added to the first analytic gradient entry, to
    /// prove the detector actually detects.
    pub corrupt: Option<f64>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            draws: 5,
            seed: 1,
            corrupt: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradcheckCase {
    pub layers: usize,
    pub neurons: usize,
    pub method: Method,
    /// Worst scaled error over all draws and coordinates.
    pub max_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub cases: Vec<GradcheckCase>,
    pub max_err: f64,
    /// Worst absolute deviation between the closed-form and the
    /// reverse-accumulation gradients for single-layer networks.
    pub closed_form_max_abs: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Relative error with an absolute floor: coordinates whose reference value
/// is below 1e-3 are judged on a 1e-3 scale, so the threshold 1e-6 demands
/// absolute agreement within 1e-9 there.
pub fn scaled_error(reference: f64, got: f64) -> f64 {
    (got - reference).abs() / reference.abs().max(1e-3)
}

pub fn run_gradcheck(opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let ivp = StiffLinearIvp::new(-5.0, 1.0, 2.0)?;
    let grid = Grid::uniform(2.0, 10)?;

    let mut case_specs = Vec::new();
    for layers in [1usize, 2, 3] {
        for neurons in [1usize, 5, 10] {
            for method in [Method::Tsm, Method::Mtsm] {
                case_specs.push((layers, neurons, method));
            }
        }
    }
    // seeds derive from the case index, so the parallel run stays
    // deterministic and schedule-independent
    let cases: Result<Vec<GradcheckCase>> = case_specs
        .par_iter()
        .enumerate()
        .map(|(case_idx, &(layers, neurons, method))| {
            let arch = Architecture::new(layers, neurons)?;
            let mut cost = CostFn::new(method, &ivp, &grid, arch)?;
            let mut case_err = 0.0f64;
            for draw in 0..opts.draws {
                let seed = opts
                    .seed
                    .wrapping_add((case_idx * opts.draws + draw) as u64 + 1);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let params = NetworkParameters::random(arch, -1.0, 1.0, &mut rng)?;
                let mut analytic = cost.evaluate(&params).gradient;
                if let Some(offset) = opts.corrupt {
                    analytic[0] += offset;
                }
                let reference = fd::fd_cost_gradient(method, &ivp, &grid, &params, 1e-6);
                for (a, r) in analytic.iter().zip(&reference) {
                    case_err = case_err.max(scaled_error(*r, *a));
                }
            }
            Ok(GradcheckCase {
                layers,
                neurons,
                method,
                max_err: case_err,
            })
        })
        .collect();
    let cases = cases?;
    let max_err = cases.iter().fold(0.0f64, |m, c| m.max(c.max_err));

    let closed_form_max_abs = closed_form_deviation(opts.draws, opts.seed)?;

    let passed = max_err < opts.tolerance && closed_form_max_abs <= 1e-12;
    Ok(GradcheckReport {
        cases,
        max_err,
        closed_form_max_abs,
        tolerance: opts.tolerance,
        passed,
    })
}

/// Dual route for one hidden layer: worst absolute deviation between the
/// closed-form gradient families and reverse accumulation, over random
/// draws at every training point.
pub fn closed_form_deviation(draws: usize, seed: u64) -> Result<f64> {
    let grid = Grid::uniform(2.0, 10)?;
    let mut worst = 0.0f64;
    let mut counter = 0u64;
    for neurons in [1usize, 5, 10] {
        let arch = Architecture::new(1, neurons)?;
        let mut ev = Evaluator::new(arch);
        let mut pe = PointEval::zeros(arch.param_count());
        for _ in 0..draws {
            counter += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed).wrapping_add(counter));
            let params = NetworkParameters::random(arch, -1.0, 1.0, &mut rng)?;
            for &x in grid.points() {
                ev.eval(&params, x, &mut pe);
                let cf = closed_form_gradients(&params, x);
                for i in 0..arch.param_count() {
                    worst = worst
                        .max((cf.grad_output[i] - pe.grad_output[i]).abs())
                        .max((cf.grad_output_dx[i] - pe.grad_output_dx[i]).abs());
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let report = run_gradcheck(&GradcheckOptions {
            draws: 2,
            ..GradcheckOptions::default()
        })
        .unwrap();
        assert!(report.passed, "max_err = {}", report.max_err);
        assert!(report.max_err < 1e-6);
        assert!(report.closed_form_max_abs <= 1e-12);
        assert_eq!(report.cases.len(), 18);
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let report = run_gradcheck(&GradcheckOptions {
            draws: 1,
            corrupt: Some(1e-3),
            ..GradcheckOptions::default()
        })
        .unwrap();
        assert!(!report.passed);
        assert!(report.max_err > 1e-6);
    }
}
