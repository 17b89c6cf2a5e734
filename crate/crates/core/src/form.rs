//! Trial solutions, residuals, cost values and cost gradients for TSM and
//! mTSM over a training grid.
//!
//! TSM constrains the ansatz `u_t(x,p) = u0 + x·N(x,p)` so the initial
//! condition holds by construction and minimises the squared ODE residual.
//! mTSM takes the raw network output as the candidate solution and adds the
//! initial condition as a penalty term evaluated at the first grid point.
//!
//! Costs are plain sums over the grid with a factor 1/2 and no `1/n`
//! normalisation, and every accumulation runs in ascending grid order so
//! repeated runs stay bit-identical.

use crate::net::{Architecture, Evaluator, NetworkParameters, PointEval};
use crate::ode::{Grid, StiffLinearIvp};
use crate::{Error, Result};

/// Which cost construction a training run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Trial solution method: `u_t = u0 + x·N`, hard initial condition.
    Tsm,
    /// Modified trial solution method: `u_t = N`, penalised initial condition.
    Mtsm,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Tsm => "tsm",
            Method::Mtsm => "mtsm",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsm" => Ok(Method::Tsm),
            "mtsm" => Ok(Method::Mtsm),
            other => Err(Error::config(
                "method",
                format!("expected `tsm` or `mtsm`, got `{other}`"),
            )),
        }
    }
}

/// Cost value, its gradient w.r.t. `p`, and the per-point residuals.
#[derive(Debug, Clone)]
pub struct CostReport {
    /// `E[p] = ½ Σ_i r_i²` plus, for mTSM, `½·(N(0) - u0)²`.
    pub value: f64,
    /// Gradient aligned with the canonical weight order.
    pub gradient: Vec<f64>,
    /// ODE residual at each grid point, in grid order.
    pub residuals: Vec<f64>,
    /// mTSM initial-condition residual `N(0) - u0`; `None` for TSM.
    pub condition_residual: Option<f64>,
}

/// Reusable cost evaluator for one `(method, problem, grid)` triple.
///
/// Training calls this once per epoch; the network workspace and the
/// penalty-gradient buffer live here so the hot loop does not reallocate.
///
/// The mTSM initial-condition term carries a weight: the displayed cost uses
/// weight 1, while training accumulates the condition once per training
/// point (weight ntP), which balances it against the unnormalised residual
/// sum. See [`CostFn::with_condition_weight`].
pub struct CostFn<'a> {
    method: Method,
    ivp: &'a StiffLinearIvp,
    grid: &'a Grid,
    condition_weight: f64,
    ev: Evaluator,
    pe: PointEval,
    penalty_grad: Vec<f64>,
}

impl<'a> CostFn<'a> {
    /// Cost with unit condition weight, exactly as displayed:
    /// `E = ½Σr² (+ ½(N(0)-u0)² for mTSM)`.
    pub fn new(
        method: Method,
        ivp: &'a StiffLinearIvp,
        grid: &'a Grid,
        arch: Architecture,
    ) -> Result<Self> {
        Self::with_condition_weight(method, ivp, grid, arch, 1.0)
    }

    /// Cost whose mTSM condition term is `weight·½(N(0)-u0)²`. The weight is
    /// ignored for TSM.
    pub fn with_condition_weight(
        method: Method,
        ivp: &'a StiffLinearIvp,
        grid: &'a Grid,
        arch: Architecture,
        condition_weight: f64,
    ) -> Result<Self> {
        if method == Method::Mtsm && grid.points()[0] != 0.0 {
            return Err(Error::InvalidGrid(format!(
                "mTSM evaluates the initial condition at the first grid point, which must be 0, got {}",
                grid.points()[0]
            )));
        }
        if !(condition_weight >= 0.0) || !condition_weight.is_finite() {
            return Err(Error::config(
                "icweight",
                "condition weight must be finite and non-negative",
            ));
        }
        let m = arch.param_count();
        Ok(Self {
            method,
            ivp,
            grid,
            condition_weight,
            ev: Evaluator::new(arch),
            pe: PointEval::zeros(m),
            penalty_grad: vec![0.0; m],
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Full cost report: value, gradient and residuals.
    pub fn evaluate(&mut self, params: &NetworkParameters) -> CostReport {
        let m = params.arch().param_count();
        let lambda = self.ivp.lambda();
        let u0 = self.ivp.u0();
        let mut gradient = vec![0.0; m];
        let mut residuals = Vec::with_capacity(self.grid.len());
        let mut acc = 0.0;
        let mut condition_residual = None;

        match self.method {
            Method::Tsm => {
                for &x in self.grid.points() {
                    self.ev.eval(params, x, &mut self.pe);
                    let n = self.pe.output;
                    let nx = self.pe.output_dx;
                    // r = N + x N_x - λ (u0 + x N)
                    let r = n + x * nx - lambda * (u0 + x * n);
                    residuals.push(r);
                    acc += r * r;
                    let cn = r * (1.0 - lambda * x);
                    let cx = r * x;
                    for k in 0..m {
                        gradient[k] +=
                            cn * self.pe.grad_output[k] + cx * self.pe.grad_output_dx[k];
                    }
                }
            }
            Method::Mtsm => {
                let mut c0 = 0.0;
                for (i, &x) in self.grid.points().iter().enumerate() {
                    self.ev.eval(params, x, &mut self.pe);
                    let n = self.pe.output;
                    let nx = self.pe.output_dx;
                    if i == 0 {
                        c0 = n - u0;
                        self.penalty_grad.copy_from_slice(&self.pe.grad_output);
                    }
                    // r = N_x - λ N
                    let r = nx - lambda * n;
                    residuals.push(r);
                    acc += r * r;
                    for k in 0..m {
                        gradient[k] +=
                            r * (self.pe.grad_output_dx[k] - lambda * self.pe.grad_output[k]);
                    }
                }
                let w = self.condition_weight;
                acc += w * c0 * c0;
                for k in 0..m {
                    gradient[k] += w * c0 * self.penalty_grad[k];
                }
                condition_residual = Some(c0);
            }
        }

        CostReport {
            value: 0.5 * acc,
            gradient,
            residuals,
            condition_residual,
        }
    }

    /// Cost value only; skips the gradient work.
    pub fn value(&mut self, params: &NetworkParameters) -> f64 {
        let lambda = self.ivp.lambda();
        let u0 = self.ivp.u0();
        let mut acc = 0.0;
        let mut c0 = 0.0;
        for (i, &x) in self.grid.points().iter().enumerate() {
            let (n, nx) = self.ev.forward(params, x);
            if i == 0 {
                c0 = n - u0;
            }
            let r = match self.method {
                Method::Tsm => n + x * nx - lambda * (u0 + x * n),
                Method::Mtsm => nx - lambda * n,
            };
            acc += r * r;
        }
        if self.method == Method::Mtsm {
            acc += self.condition_weight * c0 * c0;
        }
        0.5 * acc
    }
}

/// Trial solution value at `x`: `u0 + x·N` for TSM, `N` for mTSM.
pub fn trial_value(
    method: Method,
    ivp: &StiffLinearIvp,
    params: &NetworkParameters,
    x: f64,
) -> f64 {
    let mut ev = Evaluator::new(params.arch());
    let (n, _) = ev.forward(params, x);
    match method {
        Method::Tsm => ivp.u0() + x * n,
        Method::Mtsm => n,
    }
}

/// TSM cost over the grid. See [`CostFn`] for the formulas.
pub fn cost_tsm(params: &NetworkParameters, grid: &Grid, ivp: &StiffLinearIvp) -> CostReport {
    let mut f = CostFn::new(Method::Tsm, ivp, grid, params.arch())
        .expect("TSM imposes no grid constraint");
    f.evaluate(params)
}

/// mTSM cost over the grid; the grid must start at 0 so the penalty can be
/// evaluated there.
pub fn cost_mtsm(
    params: &NetworkParameters,
    grid: &Grid,
    ivp: &StiffLinearIvp,
) -> Result<CostReport> {
    let mut f = CostFn::new(Method::Mtsm, ivp, grid, params.arch())?;
    Ok(f.evaluate(params))
}

/// Trial solution sampled at every grid point, in grid order.
pub fn evaluate_on_grid(
    method: Method,
    ivp: &StiffLinearIvp,
    params: &NetworkParameters,
    grid: &Grid,
) -> Vec<(f64, f64)> {
    let mut ev = Evaluator::new(params.arch());
    grid.points()
        .iter()
        .map(|&x| {
            let (n, _) = ev.forward(params, x);
            let u = match method {
                Method::Tsm => ivp.u0() + x * n,
                Method::Mtsm => n,
            };
            (x, u)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;
    use crate::net::Architecture;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ivp() -> StiffLinearIvp {
        StiffLinearIvp::new(-5.0, 1.0, 2.0).unwrap()
    }

    fn grid10() -> Grid {
        Grid::uniform(2.0, 10).unwrap()
    }

    fn random_params(l: usize, h: usize, seed: u64) -> NetworkParameters {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NetworkParameters::random(Architecture::new(l, h).unwrap(), -1.0, 1.0, &mut rng).unwrap()
    }

    #[test]
    fn trial_value_examples() {
        let ivp = ivp();
        let p = random_params(1, 5, 3);
        assert_eq!(trial_value(Method::Tsm, &ivp, &p, 0.0), 1.0);

        let zero = NetworkParameters::constant(Architecture::new(1, 5).unwrap(), 0.0);
        assert_eq!(trial_value(Method::Mtsm, &ivp, &zero, 1.3), 0.0);
        assert_eq!(trial_value(Method::Tsm, &ivp, &zero, 2.0), 1.0);
    }

    #[test]
    fn tsm_hard_constraint_holds_for_all_parameters() {
        // u_t(0) = u0 exactly, for 1e4 random weight vectors
        let ivp = ivp();
        let arch = Architecture::new(1, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10_000 {
            let p = NetworkParameters::random(arch, -10.0, 10.0, &mut rng).unwrap();
            assert_eq!(trial_value(Method::Tsm, &ivp, &p, 0.0), 1.0);
        }
    }

    #[test]
    fn tsm_cost_zero_params() {
        // every residual is -λ = 5, so E = ½·10·25 = 125 exactly
        let p = NetworkParameters::constant(Architecture::new(1, 5).unwrap(), 0.0);
        let report = cost_tsm(&p, &grid10(), &ivp());
        assert_eq!(report.value, 125.0);
        assert!(report.residuals.iter().all(|&r| r == 5.0));
        assert!(report.condition_residual.is_none());
    }

    #[test]
    fn tsm_cost_scales_with_grid_size() {
        // zero parameters: E = ntP·λ²/2
        let p = NetworkParameters::constant(Architecture::new(1, 5).unwrap(), 0.0);
        let ivp = ivp();
        for n in [2, 10, 20, 40] {
            let grid = Grid::uniform(2.0, n).unwrap();
            let report = cost_tsm(&p, &grid, &ivp);
            assert_eq!(report.value, n as f64 * 25.0 / 2.0);
        }
    }

    #[test]
    fn mtsm_cost_zero_params() {
        // residual term vanishes, penalty is ½(0-1)² = 0.5; only the v
        // entries of the gradient are non-zero: (0-1)·σ(0) = -0.5
        let p = NetworkParameters::constant(Architecture::new(1, 5).unwrap(), 0.0);
        let report = cost_mtsm(&p, &grid10(), &ivp()).unwrap();
        assert_eq!(report.value, 0.5);
        assert_eq!(report.condition_residual, Some(-1.0));
        for j in 0..5 {
            assert_eq!(report.gradient[j], 0.0);
            assert_eq!(report.gradient[5 + j], 0.0);
            assert_eq!(report.gradient[10 + j], -0.5);
        }
    }

    #[test]
    fn mtsm_rejects_grid_not_starting_at_zero() {
        let p = NetworkParameters::constant(Architecture::new(1, 5).unwrap(), 0.0);
        let grid = Grid::from_points(vec![0.5, 1.0, 1.5]).unwrap();
        assert!(cost_mtsm(&p, &grid, &ivp()).is_err());
    }

    #[test]
    fn cost_gradients_match_finite_differences() {
        let ivp = ivp();
        let grid = grid10();
        for (l, h, seed) in [(1, 5, 21), (2, 4, 22), (3, 3, 23)] {
            let p = random_params(l, h, seed);
            for method in [Method::Tsm, Method::Mtsm] {
                let mut f = CostFn::new(method, &ivp, &grid, p.arch()).unwrap();
                let report = f.evaluate(&p);
                let fd = fd::fd_cost_gradient(method, &ivp, &grid, &p, 1e-6);
                for i in 0..fd.len() {
                    let err = (report.gradient[i] - fd[i]).abs() / fd[i].abs().max(1e-3);
                    assert!(
                        err < 1e-6,
                        "{method:?} L={l} H={h} coord {i}: {} vs {}",
                        report.gradient[i],
                        fd[i]
                    );
                }
            }
        }
    }

    #[test]
    fn weighted_condition_cost_and_gradient() {
        let ivp = ivp();
        let grid = grid10();
        let p = random_params(1, 5, 31);
        let mut unit = CostFn::new(Method::Mtsm, &ivp, &grid, p.arch()).unwrap();
        let mut weighted =
            CostFn::with_condition_weight(Method::Mtsm, &ivp, &grid, p.arch(), 10.0).unwrap();
        let a = unit.evaluate(&p);
        let b = weighted.evaluate(&p);
        let c0 = a.condition_residual.unwrap();
        assert!((b.value - (a.value + 9.0 * 0.5 * c0 * c0)).abs() <= b.value.abs() * 1e-12);
        assert_eq!(b.value, weighted.value(&p));

        let fd = fd::fd_cost_gradient_weighted(Method::Mtsm, &ivp, &grid, &p, 1e-6, 10.0);
        for i in 0..fd.len() {
            let err = (b.gradient[i] - fd[i]).abs() / fd[i].abs().max(1e-3);
            assert!(err < 1e-6, "coord {i}: {} vs {}", b.gradient[i], fd[i]);
        }
    }

    #[test]
    fn value_matches_evaluate() {
        let ivp = ivp();
        let grid = grid10();
        for method in [Method::Tsm, Method::Mtsm] {
            let p = random_params(2, 5, 77);
            let mut f = CostFn::new(method, &ivp, &grid, p.arch()).unwrap();
            assert_eq!(f.value(&p), f.evaluate(&p).value);
        }
    }

    #[test]
    fn evaluate_on_grid_examples() {
        let ivp = ivp();
        let grid = grid10();
        let zero = NetworkParameters::constant(Architecture::new(1, 5).unwrap(), 0.0);
        let tsm = evaluate_on_grid(Method::Tsm, &ivp, &zero, &grid);
        assert!(tsm.iter().all(|&(_, u)| u == 1.0));
        let mtsm = evaluate_on_grid(Method::Mtsm, &ivp, &zero, &grid);
        assert!(mtsm.iter().all(|&(_, u)| u == 0.0));
        assert_eq!(tsm.len(), grid.len());
        for (i, &(x, _)) in tsm.iter().enumerate() {
            assert_eq!(x, grid.points()[i]);
        }
    }

    #[test]
    fn zero_cost_iff_zero_residuals() {
        // λ = 0 with zero parameters: TSM residual N + xN_x vanishes
        let ivp = StiffLinearIvp::new(0.0, 1.0, 2.0).unwrap();
        let p = NetworkParameters::constant(Architecture::new(1, 5).unwrap(), 0.0);
        let report = cost_tsm(&p, &grid10(), &ivp);
        assert_eq!(report.value, 0.0);
        assert!(report.residuals.iter().all(|&r| r == 0.0));
    }

    proptest! {
        #[test]
        fn cost_is_nonnegative(seed in 0u64..500, method_pick in 0u8..2) {
            let method = if method_pick == 0 { Method::Tsm } else { Method::Mtsm };
            let p = random_params(2, 3, seed);
            let ivp = ivp();
            let grid = grid10();
            let mut f = CostFn::new(method, &ivp, &grid, p.arch()).unwrap();
            let report = f.evaluate(&p);
            prop_assert!(report.value >= 0.0);
            // value decomposes exactly into the residual and penalty terms
            let mut acc: f64 = report.residuals.iter().map(|r| r * r).sum();
            if let Some(c) = report.condition_residual {
                acc += c * c;
            }
            prop_assert!((report.value - 0.5 * acc).abs() <= report.value.abs() * 1e-12);
        }

        #[test]
        fn tsm_constraint_fuzz(seed in 0u64..1000) {
            let p = random_params(2, 4, seed);
            prop_assert_eq!(trial_value(Method::Tsm, &ivp(), &p, 0.0), 1.0);
        }
    }
}
