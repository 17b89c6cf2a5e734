//! Central finite-difference reference gradients, evaluated in double-double
//! arithmetic.
//!
//! The cost is an unnormalised sum of squared residuals and can reach values
//! around 1e3 for random weights. A plain f64 evaluation of
//! `(E(p+h) - E(p-h)) / 2h` with `h = 1e-6` then carries rounding noise of
//! order `eps·E/h ≈ 1e-7`, which drowns the tolerances the gradient checks
//! assert. Evaluating the perturbed costs in ~31-digit double-double
//! precision and subtracting before rounding removes that noise entirely,
//! leaving only the `O(h²)` truncation term.
//!
//! Everything here is an independent re-implementation of the network and
//! cost formulas: it shares no code with [`crate::net`] or [`crate::form`],
//! so it can serve as an oracle for both.

use crate::form::Method;
use crate::net::NetworkParameters;
use crate::ode::{Grid, StiffLinearIvp};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Requires |a| >= |b|.
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

// Dekker splitting; no FMA so it stays fast on baseline x86-64 targets.
const SPLIT: f64 = 134_217_729.0; // 2^27 + 1

fn split(a: f64) -> (f64, f64) {
    let t = SPLIT * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ahi, alo) = split(a);
    let (bhi, blo) = split(b);
    let err = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo;
    (p, err)
}

const LN2: Dd = Dd {
    hi: 0.693_147_180_559_945_3,
    lo: 2.319_046_813_846_299_6e-17,
};

impl Dd {
    pub(crate) fn from(a: f64) -> Self {
        Dd { hi: a, lo: 0.0 }
    }

    pub(crate) fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub(crate) fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    pub(crate) fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub(crate) fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub(crate) fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub(crate) fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul_f64(q1));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul_f64(q2));
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from(q3))
    }

    /// `e^self` via range reduction `a = m·ln2 + 512·r` and a Taylor series
    /// of `e^r - 1`, squared back up nine times.
    pub(crate) fn exp(self) -> Dd {
        if self.hi <= -709.0 {
            return Dd::from(0.0);
        }
        if self.hi >= 709.0 {
            return Dd::from(f64::INFINITY);
        }
        let m = (self.hi / LN2.hi + 0.5).floor();
        let r = self.sub(LN2.mul_f64(m)).mul_f64(1.0 / 512.0);

        // s = e^r - 1, |r| <= ln2/1024
        let mut term = r.mul(r).mul_f64(0.5);
        let mut s = r.add(term);
        let mut k = 3.0;
        while term.hi.abs() > 1e-35 && k < 24.0 {
            term = term.mul(r).div(Dd::from(k));
            s = s.add(term);
            k += 1.0;
        }
        // e^{2x} - 1 = s² + 2s
        for _ in 0..9 {
            s = s.mul(s).add(s.mul_f64(2.0));
        }
        let scale = 2.0f64.powi(m as i32); // exact power of two
        s.add(Dd::from(1.0)).mul_f64(scale)
    }
}

fn sigmoid_dd(z: Dd) -> Dd {
    let one = Dd::from(1.0);
    if z.hi >= 0.0 {
        one.div(one.add(z.neg().exp()))
    } else {
        let e = z.exp();
        e.div(one.add(e))
    }
}

/// Network output and its input derivative, both in double-double precision.
fn forward_dd(params: &NetworkParameters, x: f64) -> (Dd, Dd) {
    let arch = params.arch();
    let h = arch.neurons_per_layer();
    let l = arch.hidden_layers();
    let p = params.weights();
    let x = Dd::from(x);

    let w = &p[arch.first_weights()];
    let u = &p[arch.first_biases()];
    let mut a = Vec::with_capacity(h);
    let mut t = Vec::with_capacity(h);
    for j in 0..h {
        let z = Dd::from(w[j]).mul(x).add(Dd::from(u[j]));
        let s = sigmoid_dd(z);
        let sp = s.mul(Dd::from(1.0).sub(s));
        a.push(s);
        t.push(sp.mul(Dd::from(w[j])));
    }

    for layer in 2..=l {
        let wm = &p[arch.hidden_weights(layer)];
        let b = &p[arch.hidden_biases(layer)];
        let mut a_next = Vec::with_capacity(h);
        let mut t_next = Vec::with_capacity(h);
        for j in 0..h {
            let mut z = Dd::from(b[j]);
            let mut s = Dd::from(0.0);
            for i in 0..h {
                let wji = Dd::from(wm[j * h + i]);
                z = z.add(wji.mul(a[i]));
                s = s.add(wji.mul(t[i]));
            }
            let act = sigmoid_dd(z);
            let sp = act.mul(Dd::from(1.0).sub(act));
            a_next.push(act);
            t_next.push(sp.mul(s));
        }
        a = a_next;
        t = t_next;
    }

    let v = &p[arch.output_weights()];
    let mut n = Dd::from(0.0);
    let mut nx = Dd::from(0.0);
    for j in 0..h {
        n = n.add(Dd::from(v[j]).mul(a[j]));
        nx = nx.add(Dd::from(v[j]).mul(t[j]));
    }
    (n, nx)
}

/// Cost value in double-double precision, mirroring the TSM/mTSM formulas
/// with a weighted condition term.
fn cost_value_dd(
    method: Method,
    ivp: &StiffLinearIvp,
    grid: &Grid,
    params: &NetworkParameters,
    condition_weight: f64,
) -> Dd {
    let lambda = Dd::from(ivp.lambda());
    let u0 = Dd::from(ivp.u0());
    let mut acc = Dd::from(0.0);
    let mut n_first = Dd::from(0.0);
    for (i, &x) in grid.points().iter().enumerate() {
        let (n, nx) = forward_dd(params, x);
        if i == 0 {
            n_first = n;
        }
        let xd = Dd::from(x);
        let r = match method {
            // r = N + x N_x - λ (u0 + x N)
            Method::Tsm => n
                .add(xd.mul(nx))
                .sub(lambda.mul(u0.add(xd.mul(n)))),
            // r = N_x - λ N
            Method::Mtsm => nx.sub(lambda.mul(n)),
        };
        acc = acc.add(r.mul(r));
    }
    let mut value = acc.mul_f64(0.5);
    if method == Method::Mtsm {
        let c = n_first.sub(u0);
        value = value.add(c.mul(c).mul_f64(0.5).mul_f64(condition_weight));
    }
    value
}

/// Central finite difference of `N` w.r.t. `x`.
#[cfg(test)]
pub(crate) fn fd_output_dx(params: &NetworkParameters, x: f64, h: f64) -> f64 {
    let xp = x + h;
    let xm = x - h;
    let np = forward_dd(params, xp).0;
    let nm = forward_dd(params, xm).0;
    np.sub(nm).to_f64() / (xp - xm)
}

/// Central finite differences of `(N, N_x)` w.r.t. every parameter.
#[cfg(test)]
pub(crate) fn fd_output_gradients(
    params: &NetworkParameters,
    x: f64,
    h: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut work = params.clone();
    let m = params.weights().len();
    let mut gn = vec![0.0; m];
    let mut gx = vec![0.0; m];
    for i in 0..m {
        let orig = work.weights()[i];
        let wp = orig + h;
        let wm = orig - h;
        work.weights_mut()[i] = wp;
        let (np, nxp) = forward_dd(&work, x);
        work.weights_mut()[i] = wm;
        let (nm, nxm) = forward_dd(&work, x);
        work.weights_mut()[i] = orig;
        let denom = wp - wm;
        gn[i] = np.sub(nm).to_f64() / denom;
        gx[i] = nxp.sub(nxm).to_f64() / denom;
    }
    (gn, gx)
}

/// Central finite difference of the cost w.r.t. every parameter.
pub(crate) fn fd_cost_gradient(
    method: Method,
    ivp: &StiffLinearIvp,
    grid: &Grid,
    params: &NetworkParameters,
    h: f64,
) -> Vec<f64> {
    fd_cost_gradient_weighted(method, ivp, grid, params, h, 1.0)
}

/// Same with a weighted mTSM condition term.
pub(crate) fn fd_cost_gradient_weighted(
    method: Method,
    ivp: &StiffLinearIvp,
    grid: &Grid,
    params: &NetworkParameters,
    h: f64,
    condition_weight: f64,
) -> Vec<f64> {
    let mut work = params.clone();
    let m = params.weights().len();
    let mut g = vec![0.0; m];
    for i in 0..m {
        let orig = work.weights()[i];
        let wp = orig + h;
        let wm = orig - h;
        work.weights_mut()[i] = wp;
        let ep = cost_value_dd(method, ivp, grid, &work, condition_weight);
        work.weights_mut()[i] = wm;
        let em = cost_value_dd(method, ivp, grid, &work, condition_weight);
        work.weights_mut()[i] = orig;
        g[i] = ep.sub(em).to_f64() / (wp - wm);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{forward, sigmoid, Architecture};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dd_exp_matches_reference() {
        // e = 2.71828182845904523536028747135266...
        let e = Dd::from(1.0).exp();
        let reference = Dd {
            hi: 2.718281828459045,
            lo: 1.4456468917292502e-16,
        };
        let err = e.sub(reference).to_f64().abs();
        assert!(err < 1e-30, "exp(1) error {err}");

        for x in [-20.0, -3.7, -0.2, 0.0, 0.4, 5.9, 30.0] {
            let got = Dd::from(x).exp().to_f64();
            let want = x.exp();
            assert!(
                (got - want).abs() <= want.abs() * 1e-15,
                "exp({x}): {got} vs {want}"
            );
        }
    }

    #[test]
    fn dd_arithmetic_identities() {
        let a = Dd::from(0.1).add(Dd::from(0.2));
        // 0.1 + 0.2 in double-double keeps the residual the f64 sum drops
        assert!((a.to_f64() - 0.3).abs() < 1e-16);
        let b = Dd::from(3.0).div(Dd::from(7.0)).mul(Dd::from(7.0));
        assert!(b.sub(Dd::from(3.0)).to_f64().abs() < 1e-30);
    }

    #[test]
    fn dd_sigmoid_matches_f64_sigmoid() {
        for z in [-30.0, -2.0, 0.0, 0.5, 10.0] {
            let got = sigmoid_dd(Dd::from(z)).to_f64();
            let want = sigmoid(z);
            assert!((got - want).abs() <= want.abs() * 1e-14 + 1e-300);
        }
    }

    #[test]
    fn dd_forward_matches_f64_forward() {
        let arch = Architecture::new(3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = NetworkParameters::random(arch, -1.0, 1.0, &mut rng).unwrap();
        for x in [0.0, 0.9, 2.0] {
            let tr = forward(&p, x);
            let (n, nx) = forward_dd(&p, x);
            assert!((n.to_f64() - tr.output).abs() <= tr.output.abs() * 1e-13 + 1e-13);
            assert!((nx.to_f64() - tr.output_dx).abs() <= tr.output_dx.abs() * 1e-13 + 1e-13);
        }
    }
}
