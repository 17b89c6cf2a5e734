//! Feedforward network with sigmoid hidden layers and one linear output
//! neuron, for scalar input `x`.
//!
//! The first hidden layer receives `z_j = w_j·x + u_j`, deeper hidden layers
//! receive `z = W·a + b`, and the output is the linear combination
//! `N(x,p) = Σ_j v_j σ(z_j)` over the last hidden layer. The output neuron
//! carries no bias.
//!
//! All weights live in one flat vector `p` with a fixed canonical order:
//!
//! ```text
//! [ w (H) | u (H) | W2 row-major (H×H) | b2 (H) | ... | WL | bL | v (H) ]
//! ```
//!
//! where row `j` of a weight matrix holds the incoming weights of neuron `j`.
//! Optimiser state vectors align with this order, so saved parameters stay
//! compatible with momentum and Adam buffers.
//!
//! Besides the output `N` itself the module computes the input derivative
//! `N_x = ∂N/∂x` (forward tangent propagation) and the gradients of both
//! w.r.t. every weight (reverse accumulation over the value and tangent
//! channels). For a single hidden layer the closed-form gradient families
//! are available as an independent second route.

use rand::Rng;

use crate::{Error, Result};

/// Logistic sigmoid `1/(1+e^{-z})`, sign-branched so `e^{|z|}` never
/// overflows for finite input.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// First derivative `σ'(z) = σ(z)(1-σ(z))`.
pub fn sigmoid_d1(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s)
}

/// Second derivative `σ''(z) = σ(z)(1-σ(z))(1-2σ(z))`.
pub fn sigmoid_d2(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s) * (1.0 - 2.0 * s)
}

/// Network shape: `L` hidden layers of `H` neurons each, one input, one
/// linear output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    hidden_layers: usize,
    neurons_per_layer: usize,
}

impl Architecture {
    pub fn new(hidden_layers: usize, neurons_per_layer: usize) -> Result<Self> {
        if hidden_layers == 0 {
            return Err(Error::InvalidArchitecture("hidden_layers must be at least 1"));
        }
        if neurons_per_layer == 0 {
            return Err(Error::InvalidArchitecture("neurons_per_layer must be at least 1"));
        }
        Ok(Self {
            hidden_layers,
            neurons_per_layer,
        })
    }

    pub fn hidden_layers(&self) -> usize {
        self.hidden_layers
    }

    pub fn neurons_per_layer(&self) -> usize {
        self.neurons_per_layer
    }

    /// Total number of weights in the flat parameter vector.
    ///
    /// Layer 1 holds `H` input weights and `H` biases, every deeper hidden
    /// layer holds `H×H` weights and `H` biases (one bias per neuron), and
    /// the output layer holds `H` weights and no bias.
    pub fn param_count(&self) -> usize {
        let h = self.neurons_per_layer;
        2 * h + (self.hidden_layers - 1) * (h * h + h) + h
    }

    /// Input weights `w` of the first hidden layer.
    pub(crate) fn first_weights(&self) -> std::ops::Range<usize> {
        0..self.neurons_per_layer
    }

    /// Biases `u` of the first hidden layer.
    pub(crate) fn first_biases(&self) -> std::ops::Range<usize> {
        self.neurons_per_layer..2 * self.neurons_per_layer
    }

    /// Row-major weight matrix of hidden layer `layer` (2-based up to `L`).
    pub(crate) fn hidden_weights(&self, layer: usize) -> std::ops::Range<usize> {
        debug_assert!((2..=self.hidden_layers).contains(&layer));
        let h = self.neurons_per_layer;
        let base = 2 * h + (layer - 2) * (h * h + h);
        base..base + h * h
    }

    /// Bias vector of hidden layer `layer` (2-based up to `L`).
    pub(crate) fn hidden_biases(&self, layer: usize) -> std::ops::Range<usize> {
        let h = self.neurons_per_layer;
        let end = self.hidden_weights(layer).end;
        end..end + h
    }

    /// Output weights `v`.
    pub(crate) fn output_weights(&self) -> std::ops::Range<usize> {
        let m = self.param_count();
        m - self.neurons_per_layer..m
    }
}

/// Flat weight vector `p` together with the architecture it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParameters {
    arch: Architecture,
    weights: Vec<f64>,
}

impl NetworkParameters {
    /// Wraps an existing weight vector, checking length and finiteness.
    pub fn from_vec(arch: Architecture, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != arch.param_count() {
            return Err(Error::LengthMismatch {
                expected: arch.param_count(),
                got: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "weight {i} is not finite"
            )));
        }
        Ok(Self { arch, weights })
    }

    /// Every weight set to the same constant.
    pub fn constant(arch: Architecture, value: f64) -> Self {
        assert!(value.is_finite(), "constant init requires a finite value");
        Self {
            arch,
            weights: vec![value; arch.param_count()],
        }
    }

    /// Every weight drawn i.i.d. uniform on `[lo, hi)` from the given
    /// generator. The same generator state always yields the same vector.
    pub fn random<R: Rng + ?Sized>(
        arch: Architecture,
        lo: f64,
        hi: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameters(format!(
                "uniform init requires lo < hi, got [{lo}, {hi})"
            )));
        }
        let weights = (0..arch.param_count())
            .map(|_| rng.random_range(lo..hi))
            .collect();
        Ok(Self { arch, weights })
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mutable access for optimiser steps. Steps may drive weights
    /// non-finite; the training loop detects that through the cost value.
    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }
}

/// Everything one forward pass produces at a single input `x`.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Pre-activations `z` per hidden layer.
    pub pre_activations: Vec<Vec<f64>>,
    /// Activations `σ(z)` per hidden layer.
    pub activations: Vec<Vec<f64>>,
    /// Input tangents `dz/dx` per hidden layer.
    pub input_tangents: Vec<Vec<f64>>,
    /// Network output `N(x,p)`.
    pub output: f64,
    /// Input derivative `N_x = ∂N/∂x`.
    pub output_dx: f64,
}

/// Output, input derivative, and the gradients of both w.r.t. `p`.
#[derive(Debug, Clone)]
pub struct PointEval {
    pub output: f64,
    pub output_dx: f64,
    pub grad_output: Vec<f64>,
    pub grad_output_dx: Vec<f64>,
}

impl PointEval {
    pub fn zeros(param_count: usize) -> Self {
        Self {
            output: 0.0,
            output_dx: 0.0,
            grad_output: vec![0.0; param_count],
            grad_output_dx: vec![0.0; param_count],
        }
    }
}

/// Reusable forward/backward workspace. Training loops evaluate the same
/// architecture millions of times; keeping the per-layer buffers here avoids
/// reallocating them at every grid point.
#[derive(Debug, Clone)]
pub struct Evaluator {
    arch: Architecture,
    // forward state per hidden layer
    z: Vec<Vec<f64>>,  // pre-activations
    a: Vec<Vec<f64>>,  // activations σ(z)
    s: Vec<Vec<f64>>,  // input tangents dz/dx
    t: Vec<Vec<f64>>,  // activation tangents da/dx
    // reverse-mode scratch
    delta: Vec<f64>,
    abar: Vec<f64>,
    tbar: Vec<f64>,
    zbar: Vec<f64>,
    sbar: Vec<f64>,
    delta_next: Vec<f64>,
    abar_next: Vec<f64>,
    tbar_next: Vec<f64>,
}

impl Evaluator {
    pub fn new(arch: Architecture) -> Self {
        let h = arch.neurons_per_layer();
        let l = arch.hidden_layers();
        Self {
            arch,
            z: vec![vec![0.0; h]; l],
            a: vec![vec![0.0; h]; l],
            s: vec![vec![0.0; h]; l],
            t: vec![vec![0.0; h]; l],
            delta: vec![0.0; h],
            abar: vec![0.0; h],
            tbar: vec![0.0; h],
            zbar: vec![0.0; h],
            sbar: vec![0.0; h],
            delta_next: vec![0.0; h],
            abar_next: vec![0.0; h],
            tbar_next: vec![0.0; h],
        }
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    /// Forward pass: fills the layer buffers and returns `(N, N_x)`.
    ///
    /// The tangent channel carries `da/dx` through the layers starting from
    /// `dx/dx = 1`: `s = W·t_prev`, `t = σ'(z) ⊙ s`.
    pub fn forward(&mut self, params: &NetworkParameters, x: f64) -> (f64, f64) {
        assert_eq!(params.arch(), self.arch, "parameters do not match evaluator architecture");
        let h = self.arch.neurons_per_layer();
        let l = self.arch.hidden_layers();
        let p = params.weights();

        let w = &p[self.arch.first_weights()];
        let u = &p[self.arch.first_biases()];
        for j in 0..h {
            let zj = w[j] * x + u[j];
            let aj = sigmoid(zj);
            self.z[0][j] = zj;
            self.a[0][j] = aj;
            self.s[0][j] = w[j];
            self.t[0][j] = aj * (1.0 - aj) * w[j];
        }

        for layer in 2..=l {
            let wm = &p[self.arch.hidden_weights(layer)];
            let b = &p[self.arch.hidden_biases(layer)];
            let (done, rest) = self.a.split_at_mut(layer - 1);
            let a_prev = &done[layer - 2];
            let a_cur = &mut rest[0];
            let (tdone, trest) = self.t.split_at_mut(layer - 1);
            let t_prev = &tdone[layer - 2];
            let t_cur = &mut trest[0];
            for j in 0..h {
                let row = &wm[j * h..(j + 1) * h];
                let mut zj = b[j];
                let mut sj = 0.0;
                for i in 0..h {
                    zj += row[i] * a_prev[i];
                    sj += row[i] * t_prev[i];
                }
                let aj = sigmoid(zj);
                self.z[layer - 1][j] = zj;
                a_cur[j] = aj;
                self.s[layer - 1][j] = sj;
                t_cur[j] = aj * (1.0 - aj) * sj;
            }
        }

        let v = &p[self.arch.output_weights()];
        let mut output = 0.0;
        let mut output_dx = 0.0;
        for j in 0..h {
            output += v[j] * self.a[l - 1][j];
            output_dx += v[j] * self.t[l - 1][j];
        }
        (output, output_dx)
    }

    /// Forward pass plus reverse accumulation of `∇N` and `∇N_x` into `out`.
    ///
    /// The value channel is ordinary backpropagation of `δ = ∂N/∂z`. The
    /// tangent channel tracks the pair `(a, t)` through each layer, with
    /// adjoints `ā = ∂N_x/∂a` and `t̄ = ∂N_x/∂t`:
    ///
    /// ```text
    /// s̄ = σ'(z) ⊙ t̄
    /// z̄ = σ'(z) ⊙ ā + σ''(z) ⊙ s ⊙ t̄
    /// ∂N_x/∂W = z̄ a_prevᵀ + s̄ t_prevᵀ,   ∂N_x/∂b = z̄
    /// ā_prev = Wᵀ z̄,                      t̄_prev = Wᵀ s̄
    /// ```
    pub fn eval(&mut self, params: &NetworkParameters, x: f64, out: &mut PointEval) {
        let (n, nx) = self.forward(params, x);
        out.output = n;
        out.output_dx = nx;

        let h = self.arch.neurons_per_layer();
        let l = self.arch.hidden_layers();
        let m = self.arch.param_count();
        assert_eq!(out.grad_output.len(), m);
        assert_eq!(out.grad_output_dx.len(), m);
        let p = params.weights();
        let v = &p[self.arch.output_weights()];

        // output layer: ∂N/∂v = a_L, ∂N_x/∂v = t_L
        let vrange = self.arch.output_weights();
        out.grad_output[vrange.clone()].copy_from_slice(&self.a[l - 1]);
        out.grad_output_dx[vrange].copy_from_slice(&self.t[l - 1]);

        // top-layer adjoints
        for j in 0..h {
            let aj = self.a[l - 1][j];
            self.delta[j] = aj * (1.0 - aj) * v[j];
            self.tbar[j] = v[j];
            self.abar[j] = 0.0;
        }

        for layer in (2..=l).rev() {
            let a_cur = &self.a[layer - 1];
            let s_cur = &self.s[layer - 1];
            let a_prev = &self.a[layer - 2];
            let t_prev = &self.t[layer - 2];
            for j in 0..h {
                let aj = a_cur[j];
                let sp = aj * (1.0 - aj);
                let spp = sp * (1.0 - 2.0 * aj);
                self.sbar[j] = sp * self.tbar[j];
                self.zbar[j] = sp * self.abar[j] + spp * s_cur[j] * self.tbar[j];
            }
            let wrange = self.arch.hidden_weights(layer);
            let brange = self.arch.hidden_biases(layer);
            let wm = &p[wrange.clone()];
            for j in 0..h {
                for i in 0..h {
                    let k = j * h + i;
                    out.grad_output[wrange.start + k] = self.delta[j] * a_prev[i];
                    out.grad_output_dx[wrange.start + k] =
                        self.zbar[j] * a_prev[i] + self.sbar[j] * t_prev[i];
                }
                out.grad_output[brange.start + j] = self.delta[j];
                out.grad_output_dx[brange.start + j] = self.zbar[j];
            }
            // propagate adjoints to layer-1 quantities of the previous layer
            for i in 0..h {
                let mut dn = 0.0;
                let mut ab = 0.0;
                let mut tb = 0.0;
                for j in 0..h {
                    let wji = wm[j * h + i];
                    dn += wji * self.delta[j];
                    ab += wji * self.zbar[j];
                    tb += wji * self.sbar[j];
                }
                let ai = a_prev[i];
                self.delta_next[i] = ai * (1.0 - ai) * dn;
                self.abar_next[i] = ab;
                self.tbar_next[i] = tb;
            }
            std::mem::swap(&mut self.delta, &mut self.delta_next);
            std::mem::swap(&mut self.abar, &mut self.abar_next);
            std::mem::swap(&mut self.tbar, &mut self.tbar_next);
        }

        // first hidden layer: z = w·x + u, s = w
        let wrange = self.arch.first_weights();
        let brange = self.arch.first_biases();
        for j in 0..h {
            let aj = self.a[0][j];
            let sp = aj * (1.0 - aj);
            let spp = sp * (1.0 - 2.0 * aj);
            let sbar = sp * self.tbar[j];
            let zbar = sp * self.abar[j] + spp * self.s[0][j] * self.tbar[j];
            out.grad_output[wrange.start + j] = self.delta[j] * x;
            out.grad_output[brange.start + j] = self.delta[j];
            out.grad_output_dx[wrange.start + j] = zbar * x + sbar;
            out.grad_output_dx[brange.start + j] = zbar;
        }
    }
}

/// Runs one forward pass and returns the full trace.
pub fn forward(params: &NetworkParameters, x: f64) -> ForwardTrace {
    let mut ev = Evaluator::new(params.arch());
    let (output, output_dx) = ev.forward(params, x);
    ForwardTrace {
        pre_activations: ev.z.clone(),
        activations: ev.a.clone(),
        input_tangents: ev.s.clone(),
        output,
        output_dx,
    }
}

/// Gradient `∇_p N(x,p)`, aligned with the canonical weight order.
pub fn grad_output(params: &NetworkParameters, x: f64) -> Vec<f64> {
    let mut ev = Evaluator::new(params.arch());
    let mut out = PointEval::zeros(params.arch().param_count());
    ev.eval(params, x, &mut out);
    out.grad_output
}

/// Gradient `∇_p (∂N/∂x)`, aligned with the canonical weight order.
pub fn grad_output_derivative(params: &NetworkParameters, x: f64) -> Vec<f64> {
    let mut ev = Evaluator::new(params.arch());
    let mut out = PointEval::zeros(params.arch().param_count());
    ev.eval(params, x, &mut out);
    out.grad_output_dx
}

/// Closed-form gradient families for a single hidden layer:
///
/// ```text
/// ∂N/∂w_j  = v_j x σ'(z_j)          ∂N_x/∂w_j = v_j σ'(z_j) + v_j w_j x σ''(z_j)
/// ∂N/∂u_j  = v_j σ'(z_j)            ∂N_x/∂u_j = v_j w_j σ''(z_j)
/// ∂N/∂v_j  = σ(z_j)                 ∂N_x/∂v_j = w_j σ'(z_j)
/// ```
///
/// This is an independent second route for validating the reverse-mode path.
///
/// # Panics
/// Panics if the architecture has more than one hidden layer.
pub fn closed_form_gradients(params: &NetworkParameters, x: f64) -> PointEval {
    let arch = params.arch();
    assert_eq!(
        arch.hidden_layers(),
        1,
        "closed-form gradients exist only for a single hidden layer"
    );
    let h = arch.neurons_per_layer();
    let p = params.weights();
    let w = &p[arch.first_weights()];
    let u = &p[arch.first_biases()];
    let v = &p[arch.output_weights()];

    let mut out = PointEval::zeros(arch.param_count());
    for j in 0..h {
        let zj = w[j] * x + u[j];
        let s = sigmoid(zj);
        let sp = s * (1.0 - s);
        let spp = sp * (1.0 - 2.0 * s);
        out.output += v[j] * s;
        out.output_dx += v[j] * w[j] * sp;
        out.grad_output[j] = v[j] * x * sp;
        out.grad_output[h + j] = v[j] * sp;
        out.grad_output[2 * h + j] = s;
        out.grad_output_dx[j] = v[j] * sp + v[j] * w[j] * x * spp;
        out.grad_output_dx[h + j] = v[j] * w[j] * spp;
        out.grad_output_dx[2 * h + j] = w[j] * sp;
    }
    out
}
