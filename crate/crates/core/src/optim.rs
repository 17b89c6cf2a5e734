//! First-order optimisers and the training loop.
//!
//! One epoch is one full-batch cost gradient over all training points
//! followed by one optimiser step. Momentum backpropagation runs with a
//! constant learning rate (cBP) or a linearly decaying one (vBP); Adam keeps
//! bias-corrected first and second moment estimates per weight.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::form::{CostFn, Method};
use crate::metrics::{numeric_error, HistoryPoint, RunRecord};
use crate::net::{Architecture, Evaluator, NetworkParameters};
use crate::ode::{Grid, StiffLinearIvp};
use crate::{Error, Result};

/// Learning-rate schedule for momentum backpropagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRateSchedule {
    Constant { alpha: f64 },
    /// `α(k) = α0 - (α0-αe)/kc · k` for `k <= kc`, then `αe`.
    LinearDecay { alpha0: f64, alpha_e: f64, k_c: u64 },
}

impl LearningRateSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LearningRateSchedule::Constant { alpha } => {
                if !(alpha > 0.0) || !alpha.is_finite() {
                    return Err(Error::config("alpha", "learning rate must be positive"));
                }
            }
            LearningRateSchedule::LinearDecay { alpha0, alpha_e, k_c } => {
                if !(alpha_e > 0.0) || !(alpha0 >= alpha_e) || !alpha0.is_finite() {
                    return Err(Error::config(
                        "alpha",
                        "decay schedule requires alpha0 >= alpha_e > 0",
                    ));
                }
                if k_c == 0 {
                    return Err(Error::config("k_c", "epoch cap must be at least 1"));
                }
            }
        }
        Ok(())
    }

    /// Learning rate at epoch `k`; non-increasing in `k`.
    pub fn rate(&self, k: u64) -> f64 {
        match *self {
            LearningRateSchedule::Constant { alpha } => alpha,
            LearningRateSchedule::LinearDecay { alpha0, alpha_e, k_c } => {
                if k <= k_c {
                    // clamped so rounding at the k = kc seam cannot dip
                    // below the final rate
                    (alpha0 - (alpha0 - alpha_e) / k_c as f64 * k as f64).max(alpha_e)
                } else {
                    alpha_e
                }
            }
        }
    }
}

/// Momentum buffer: the previous update `Δp(k-1)` and the epoch counter.
#[derive(Debug, Clone)]
pub struct MomentumState {
    prev_update: Vec<f64>,
    epoch: u64,
}

impl MomentumState {
    pub fn new(param_count: usize) -> Self {
        Self {
            prev_update: vec![0.0; param_count],
            epoch: 0,
        }
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn prev_update(&self) -> &[f64] {
        &self.prev_update
    }
}

/// `p(k+1) = p(k) - α ∂E/∂p(k) + β Δp(k-1)`, storing the combined update as
/// `Δp(k)` for the next epoch.
pub fn step_momentum(
    params: &mut NetworkParameters,
    grad: &[f64],
    state: &mut MomentumState,
    rate: f64,
    beta: f64,
) {
    let weights = params.weights_mut();
    assert_eq!(grad.len(), weights.len(), "gradient/parameter mismatch");
    assert_eq!(
        state.prev_update.len(),
        weights.len(),
        "state/parameter mismatch"
    );
    for i in 0..weights.len() {
        let d = -rate * grad[i] + beta * state.prev_update[i];
        state.prev_update[i] = d;
        weights[i] += d;
    }
    state.epoch += 1;
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moment estimates and timestep.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        Self {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }
}

/// Bias-corrected Adam update.
pub fn step_adam(
    params: &mut NetworkParameters,
    grad: &[f64],
    state: &mut AdamState,
    hyper: &AdamHyper,
) {
    let weights = params.weights_mut();
    assert_eq!(grad.len(), weights.len(), "gradient/parameter mismatch");
    assert_eq!(state.m.len(), weights.len(), "state/parameter mismatch");
    state.t += 1;
    let bc1 = 1.0 - hyper.beta1.powi(state.t as i32);
    let bc2 = 1.0 - hyper.beta2.powi(state.t as i32);
    for i in 0..weights.len() {
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grad[i];
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        weights[i] -= hyper.alpha * m_hat / (v_hat.sqrt() + hyper.epsilon);
    }
}

/// Optimiser choice with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerConfig {
    Momentum {
        schedule: LearningRateSchedule,
        beta: f64,
    },
    Adam(AdamHyper),
}

impl OptimizerConfig {
    /// Momentum backpropagation with constant rate: α = 1e-3, β = 0.9.
    pub fn cbp() -> Self {
        OptimizerConfig::Momentum {
            schedule: LearningRateSchedule::Constant { alpha: 1e-3 },
            beta: 0.9,
        }
    }

    /// Momentum backpropagation with linear decay: α0 = 1e-2, αe = 1e-3,
    /// kc = 1e4, β = 0.9.
    pub fn vbp() -> Self {
        OptimizerConfig::Momentum {
            schedule: LearningRateSchedule::LinearDecay {
                alpha0: 1e-2,
                alpha_e: 1e-3,
                k_c: 10_000,
            },
            beta: 0.9,
        }
    }

    /// Adam with α = 1e-3, β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn adam() -> Self {
        OptimizerConfig::Adam(AdamHyper::default())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerConfig::Momentum { schedule, beta } => {
                schedule.validate()?;
                if !beta.is_finite() || *beta < 0.0 || *beta >= 1.0 {
                    return Err(Error::config("beta", "momentum must lie in [0, 1)"));
                }
            }
            OptimizerConfig::Adam(h) => {
                if !(h.alpha > 0.0) || !(h.epsilon > 0.0) {
                    return Err(Error::config("alpha", "Adam needs alpha > 0 and epsilon > 0"));
                }
                if !(0.0..1.0).contains(&h.beta1) || !(0.0..1.0).contains(&h.beta2) {
                    return Err(Error::config("beta", "Adam betas must lie in [0, 1)"));
                }
            }
        }
        Ok(())
    }
}

/// How the weight vector is initialised before training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitSpec {
    Constant { value: f64 },
    /// i.i.d. uniform on `[lo, hi)`, drawn from a ChaCha8 stream seeded with
    /// the run seed.
    Uniform { lo: f64, hi: f64 },
}

/// Everything a single training run needs besides the problem and the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub method: Method,
    pub optimizer: OptimizerConfig,
    pub arch: Architecture,
    pub init: InitSpec,
    pub seed: u64,
    pub k_max: u64,
    /// Weight of the mTSM initial-condition term in the training cost.
    /// `None` accumulates the condition once per training point (weight
    /// ntP), which keeps it commensurate with the unnormalised residual sum.
    pub condition_weight: Option<f64>,
    pub record_history: bool,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::config("kmax", "epoch budget must be at least 1"));
        }
        self.optimizer.validate()?;
        if let InitSpec::Uniform { lo, hi } = self.init {
            if !(lo < hi) {
                return Err(Error::config("init", format!("uniform range [{lo}, {hi}) is empty")));
            }
        }
        if let Some(w) = self.condition_weight {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::config(
                    "icweight",
                    "condition weight must be finite and non-negative",
                ));
            }
        }
        Ok(())
    }

    /// Stable textual serialisation of the full run setup, hashed to a
    /// 16-hex-digit fingerprint. Identical configurations hash identically
    /// on every platform.
    pub fn fingerprint(&self, ivp: &StiffLinearIvp, grid: &Grid) -> String {
        let optimizer = match self.optimizer {
            OptimizerConfig::Momentum {
                schedule: LearningRateSchedule::Constant { alpha },
                beta,
            } => format!("cbp:alpha={alpha:?},beta={beta:?}"),
            OptimizerConfig::Momentum {
                schedule: LearningRateSchedule::LinearDecay { alpha0, alpha_e, k_c },
                beta,
            } => format!("vbp:alpha0={alpha0:?},alphae={alpha_e:?},kc={k_c},beta={beta:?}"),
            OptimizerConfig::Adam(h) => format!(
                "adam:alpha={:?},beta1={:?},beta2={:?},eps={:?}",
                h.alpha, h.beta1, h.beta2, h.epsilon
            ),
        };
        let init = match self.init {
            InitSpec::Constant { value } => format!("const:{value:?}"),
            InitSpec::Uniform { lo, hi } => format!("rand:{lo:?}:{hi:?}"),
        };
        let text = format!(
            "method={};optimizer={};layers={};neurons={};init={};seed={};kmax={};icw={:?};lambda={:?};u0={:?};xend={:?};ntp={}",
            self.method.as_str(),
            optimizer,
            self.arch.hidden_layers(),
            self.arch.neurons_per_layer(),
            init,
            self.seed,
            self.k_max,
            self.condition_weight.unwrap_or(grid.len() as f64),
            ivp.lambda(),
            ivp.u0(),
            ivp.x_end(),
            grid.len(),
        );
        format!("{:016x}", fnv1a64(text.as_bytes()))
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

enum OptimizerState {
    Momentum {
        state: MomentumState,
        schedule: LearningRateSchedule,
        beta: f64,
    },
    Adam {
        state: AdamState,
        hyper: AdamHyper,
    },
}

/// History epochs: every integer up to 10, then every multiple of the
/// leading decade (10, 20, ..., 100, 200, ...).
fn is_log_epoch(k: u64) -> bool {
    let mut decade = 1;
    while decade * 10 <= k {
        decade *= 10;
    }
    k % decade == 0
}

/// Trains for exactly `k_max` epochs (no early stopping) and reports the
/// final numeric error and cost.
///
/// A non-finite cost or gradient marks the run as diverged; the record is
/// still returned and the non-finite values never leak past the epoch that
/// produced them.
pub fn train(config: &TrainingConfig, ivp: &StiffLinearIvp, grid: &Grid) -> Result<RunRecord> {
    train_full(config, ivp, grid).map(|(record, _)| record)
}

/// Like [`train`], but also hands back the final weight vector.
pub fn train_full(
    config: &TrainingConfig,
    ivp: &StiffLinearIvp,
    grid: &Grid,
) -> Result<(RunRecord, NetworkParameters)> {
    config.validate()?;
    let start = Instant::now();
    let arch = config.arch;

    let mut params = match config.init {
        InitSpec::Constant { value } => NetworkParameters::constant(arch, value),
        InitSpec::Uniform { lo, hi } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            NetworkParameters::random(arch, lo, hi, &mut rng)?
        }
    };

    let condition_weight = config.condition_weight.unwrap_or(grid.len() as f64);
    let mut cost = CostFn::with_condition_weight(config.method, ivp, grid, arch, condition_weight)?;
    let exact: Vec<f64> = grid.points().iter().map(|&x| ivp.exact_solution(x)).collect();

    let mut opt = match config.optimizer {
        OptimizerConfig::Momentum { schedule, beta } => OptimizerState::Momentum {
            state: MomentumState::new(arch.param_count()),
            schedule,
            beta,
        },
        OptimizerConfig::Adam(hyper) => OptimizerState::Adam {
            state: AdamState::new(arch.param_count()),
            hyper,
        },
    };

    let mut history: Option<Vec<HistoryPoint>> = config.record_history.then(Vec::new);
    let mut diverged = false;

    for k in 0..config.k_max {
        let report = cost.evaluate(&params);
        if !report.value.is_finite() || report.gradient.iter().any(|g| !g.is_finite()) {
            diverged = true;
            break;
        }
        match &mut opt {
            OptimizerState::Momentum { state, schedule, beta } => {
                step_momentum(&mut params, &report.gradient, state, schedule.rate(k), *beta);
            }
            OptimizerState::Adam { state, hyper } => {
                step_adam(&mut params, &report.gradient, state, hyper);
            }
        }
        if let Some(hist) = &mut history {
            let epoch = k + 1;
            if is_log_epoch(epoch) || epoch == config.k_max {
                let cost_now = cost.value(&params);
                let trial = trial_on_grid(config.method, ivp, &params, grid);
                let delta_u = numeric_error(&exact, &trial)?;
                hist.push(HistoryPoint {
                    epoch,
                    cost: cost_now,
                    delta_u,
                });
            }
        }
    }

    let (final_cost, delta_u) = if diverged {
        (f64::NAN, f64::NAN)
    } else {
        let value = cost.value(&params);
        let trial = trial_on_grid(config.method, ivp, &params, grid);
        let du = numeric_error(&exact, &trial)?;
        if !value.is_finite() || !du.is_finite() {
            diverged = true;
            (f64::NAN, f64::NAN)
        } else {
            (value, du)
        }
    };

    let record = RunRecord {
        fingerprint: config.fingerprint(ivp, grid),
        seed: config.seed,
        delta_u,
        final_cost,
        diverged,
        wall: start.elapsed(),
        history,
    };
    Ok((record, params))
}

fn trial_on_grid(
    method: Method,
    ivp: &StiffLinearIvp,
    params: &NetworkParameters,
    grid: &Grid,
) -> Vec<f64> {
    let mut ev = Evaluator::new(params.arch());
    grid.points()
        .iter()
        .map(|&x| {
            let (n, _) = ev.forward(params, x);
            match method {
                Method::Tsm => ivp.u0() + x * n,
                Method::Mtsm => n,
            }
        })
        .collect()
}
