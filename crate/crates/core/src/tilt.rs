//! The tilted-information model shared by the two- and three-source engines.
//!
//! An auxiliary joint `J(u, x) = q_U(u) q_{X|U}(x|u)` (row-major, `nu x nx`) is
//! extended by a pinned channel `W(o|x)` whose output `o` has one or more
//! components `y_k(o)`. The weight of a support triple is
//!
//! ```text
//! ω(u,x,o) = d log(q_X(x)/p_X(x)) + i log(q_{X|U}(x|u)/q_X(x))
//!          + Σ_k h_k log(1/q_{Y_k|U}(y_k(o)|u))
//! ```
//!
//! with coefficients `(d, i, h)` supplied by the caller.

use crate::simplex::{multistart, random_simplex_point, rng_for, OptimizerOptions, SimplexProduct};
use rand::Rng;

const TINY: f64 = 1e-300;

#[inline]
fn ln_clamped(v: f64) -> f64 {
    v.max(TINY).ln()
}

/// One output component of the pinned channel.
#[derive(Debug, Clone)]
pub(crate) struct Component {
    pub size: usize,
    /// `y_k(o)` for every joint output `o`.
    pub of_out: Vec<usize>,
    /// Marginal channel `W_k(y|x)`, row-major in x.
    pub chan: Vec<f64>,
}

/// Coefficients of the weight function.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Coeffs {
    pub d: f64,
    pub i: f64,
    pub h: Vec<f64>,
}

impl Coeffs {
    /// `d = (1+μ)ᾱ`, `i = αμ̄`, `h_k = α w_k` where `w` are the output weights
    /// (`[μ]` for two sources, `[μγ̄, μγ]` for three).
    pub fn tilted(alpha: f64, mu: f64, weights: &[f64]) -> Self {
        Coeffs {
            d: (1.0 + mu) * (1.0 - alpha),
            i: alpha * (1.0 - mu),
            h: weights.iter().map(|w| alpha * w).collect(),
        }
    }

    pub fn as_vec(&self) -> Vec<f64> {
        let mut v = vec![self.d, self.i];
        v.extend(&self.h);
        v
    }
}

/// Derived marginals of a joint.
pub(crate) struct Derived {
    pub q_u: Vec<f64>,
    pub q_x: Vec<f64>,
    /// `t_k(u, y) = Σ_x J(u,x) W_k(y|x)`, one `nu x size_k` table per component.
    pub t: Vec<Vec<f64>>,
}

/// `log q` and the feature vector of every support triple of a fixed `q`.
pub(crate) struct Terms {
    ln_q: Vec<f64>,
    feats: Vec<f64>,
    width: usize,
}

impl Terms {
    /// `ω` of every term under coefficients `c` (in [`Coeffs::as_vec`] order).
    pub fn omegas(&self, c: &[f64]) -> Vec<f64> {
        self.feats.chunks(self.width).map(|f| f.iter().zip(c).map(|(a, b)| a * b).sum()).collect()
    }

    /// `Ω(q)` at `λ` from precomputed `omegas`.
    pub fn objective(&self, omegas: &[f64], lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        let max = self.ln_q.iter().zip(omegas).map(|(l, w)| l - lambda * w).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return -max;
        }
        let s: f64 = self.ln_q.iter().zip(omegas).map(|(l, w)| (l - lambda * w - max).exp()).sum();
        -(max + s.ln())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct PinnedModel {
    pub nx: usize,
    pub p_x: Vec<f64>,
    pub n_out: usize,
    /// `W(o|x)`, row-major in x.
    pub chan: Vec<f64>,
    pub comps: Vec<Component>,
}

impl PinnedModel {
    pub fn nu(&self) -> usize {
        self.nx
    }

    pub fn joint_len(&self) -> usize {
        self.nx * self.nx
    }

    #[inline]
    pub fn w(&self, x: usize, o: usize) -> f64 {
        self.chan[x * self.n_out + o]
    }

    pub fn derive(&self, j: &[f64]) -> Derived {
        let (nu, nx) = (self.nu(), self.nx);
        let mut q_u = vec![0.0; nu];
        let mut q_x = vec![0.0; nx];
        for u in 0..nu {
            for x in 0..nx {
                let v = j[u * nx + x];
                q_u[u] += v;
                q_x[x] += v;
            }
        }
        let t = self
            .comps
            .iter()
            .map(|c| {
                let mut t = vec![0.0; nu * c.size];
                for u in 0..nu {
                    for x in 0..nx {
                        let v = j[u * nx + x];
                        if v > 0.0 {
                            for y in 0..c.size {
                                t[u * c.size + y] += v * c.chan[x * c.size + y];
                            }
                        }
                    }
                }
                t
            })
            .collect();
        Derived { q_u, q_x, t }
    }

    /// Whether `(u, x, o)` has positive probability under `q`.
    pub fn on_support(&self, j: &[f64], u: usize, x: usize, o: usize) -> bool {
        j[u * self.nx + x] > 0.0 && self.w(x, o) > 0.0
    }

    /// `ω(u,x,o)`; the caller guarantees `(u,x,o)` is on the support.
    pub fn omega(&self, j: &[f64], der: &Derived, c: &Coeffs, u: usize, x: usize, o: usize) -> f64 {
        let jux = j[u * self.nx + x];
        let lqx = der.q_x[x].ln();
        let lqu = der.q_u[u].ln();
        let mut w = c.d * (lqx - self.p_x[x].ln()) + c.i * (jux.ln() - lqu - lqx);
        for (k, comp) in self.comps.iter().enumerate() {
            w += c.h[k] * (lqu - der.t[k][u * comp.size + comp.of_out[o]].ln());
        }
        w
    }

    /// Features `(log q_X/p_X, log q_{X|U}/q_X, log 1/q_{Y_k|U} ...)` of a support triple.
    pub fn features(&self, j: &[f64], der: &Derived, u: usize, x: usize, o: usize, out: &mut [f64]) {
        let jux = j[u * self.nx + x];
        let lqx = der.q_x[x].ln();
        let lqu = der.q_u[u].ln();
        out[0] = lqx - self.p_x[x].ln();
        out[1] = jux.ln() - lqu - lqx;
        for (k, comp) in self.comps.iter().enumerate() {
            out[2 + k] = lqu - der.t[k][u * comp.size + comp.of_out[o]].ln();
        }
    }

    /// Calls `f(u, x, o, q(u,x,o))` for every support triple in index order.
    pub fn for_each_support(&self, j: &[f64], mut f: impl FnMut(usize, usize, usize, f64)) {
        for u in 0..self.nu() {
            for x in 0..self.nx {
                let jux = j[u * self.nx + x];
                if jux <= 0.0 {
                    continue;
                }
                for o in 0..self.n_out {
                    let w = self.w(x, o);
                    if w > 0.0 {
                        f(u, x, o, jux * w);
                    }
                }
            }
        }
    }

    /// Support terms of `q` for repeated evaluation of `Ω(q)` under varying coefficients.
    pub fn terms(&self, j: &[f64]) -> Terms {
        let der = self.derive(j);
        let width = 2 + self.comps.len();
        let mut ln_q = Vec::new();
        let mut feats = Vec::new();
        let mut buf = vec![0.0; width];
        self.for_each_support(j, |u, x, o, q| {
            self.features(j, &der, u, x, o, &mut buf);
            ln_q.push(q.ln());
            feats.extend_from_slice(&buf);
        });
        Terms { ln_q, feats, width }
    }

    /// Information parts `(D(q_X||p_X), I(X;U), [H(Y_k|U)])` in closed form.
    pub fn info_parts(&self, j: &[f64]) -> (f64, f64, Vec<f64>) {
        let der = self.derive(j);
        self.info_parts_with(j, &der)
    }

    fn info_parts_with(&self, j: &[f64], der: &Derived) -> (f64, f64, Vec<f64>) {
        let nx = self.nx;
        let mut d = 0.0;
        for x in 0..nx {
            let q = der.q_x[x];
            if q > 0.0 {
                d += q * (q / self.p_x[x]).ln();
            }
        }
        let mut i = 0.0;
        for u in 0..self.nu() {
            for x in 0..nx {
                let v = j[u * nx + x];
                if v > 0.0 {
                    i += v * (v / (der.q_u[u] * der.q_x[x])).ln();
                }
            }
        }
        let h = self
            .comps
            .iter()
            .enumerate()
            .map(|(k, comp)| {
                let mut h = 0.0;
                for u in 0..self.nu() {
                    for y in 0..comp.size {
                        let t = der.t[k][u * comp.size + y];
                        if t > 0.0 {
                            h -= t * (t / der.q_u[u]).ln();
                        }
                    }
                }
                h.max(0.0)
            })
            .collect();
        (d.max(0.0), i.max(0.0), h)
    }

    /// `E_q[ω]` in closed form, with its gradient with respect to `J`.
    pub fn mean_omega(&self, j: &[f64], c: &Coeffs, grad: Option<&mut [f64]>) -> f64 {
        let der = self.derive(j);
        let (d, i, h) = self.info_parts_with(j, &der);
        let value = c.d * d + c.i * i + c.h.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
        if let Some(g) = grad {
            let nx = self.nx;
            for u in 0..self.nu() {
                let lqu = ln_clamped(der.q_u[u]);
                for x in 0..nx {
                    let lqx = ln_clamped(der.q_x[x]);
                    let mut gv = c.d * (lqx - self.p_x[x].ln() + 1.0)
                        + c.i * (ln_clamped(j[u * nx + x]) - lqu - lqx - 1.0);
                    for (k, comp) in self.comps.iter().enumerate() {
                        let mut s = 0.0;
                        for y in 0..comp.size {
                            let wk = comp.chan[x * comp.size + y];
                            if wk > 0.0 {
                                s += wk * (lqu - ln_clamped(der.t[k][u * comp.size + y]));
                            }
                        }
                        gv += c.h[k] * s;
                    }
                    g[u * nx + x] = gv;
                }
            }
        }
        value
    }

    /// `E_q[ω]` by direct summation over the support (independent of the closed form).
    #[cfg(test)]
    pub fn mean_omega_by_sum(&self, j: &[f64], c: &Coeffs) -> f64 {
        let der = self.derive(j);
        let mut s = 0.0;
        self.for_each_support(j, |u, x, o, q| s += q * self.omega(j, &der, c, u, x, o));
        s
    }

    /// `log E_q[exp(-λω)]`, computed stably.
    fn log_mgf(&self, j: &[f64], der: &Derived, c: &Coeffs, lambda: f64) -> (f64, Vec<(usize, usize, usize, f64)>) {
        let mut terms = Vec::with_capacity(self.joint_len() * self.n_out);
        let mut max = f64::NEG_INFINITY;
        self.for_each_support(j, |u, x, o, q| {
            let lt = q.ln() - lambda * self.omega(j, der, c, u, x, o);
            max = max.max(lt);
            terms.push((u, x, o, lt));
        });
        if max == f64::INFINITY {
            return (f64::INFINITY, terms);
        }
        let s: f64 = terms.iter().map(|t| (t.3 - max).exp()).sum();
        (max + s.ln(), terms)
    }

    /// `Ω(q) = -log E_q[exp(-λω)]`; zero-probability triples contribute nothing.
    pub fn omega_objective(&self, j: &[f64], c: &Coeffs, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        let der = self.derive(j);
        -self.log_mgf(j, &der, c, lambda).0
    }

    /// `Ω(q)` and its gradient with respect to `J`.
    pub fn omega_objective_grad(&self, j: &[f64], c: &Coeffs, lambda: f64, g: &mut [f64]) -> f64 {
        let der = self.derive(j);
        let (lme, terms) = self.log_mgf(j, &der, c, lambda);
        let nx = self.nx;
        let nu = self.nu();
        if !lme.is_finite() {
            g.iter_mut().for_each(|v| *v = 0.0);
            return -lme;
        }
        // Tilted marginals.
        let mut w_ux = vec![0.0; nu * nx];
        let mut w_x = vec![0.0; nx];
        let mut w_u = vec![0.0; nu];
        let mut w_k: Vec<Vec<f64>> = self.comps.iter().map(|c| vec![0.0; nu * c.size]).collect();
        for &(u, x, o, lt) in &terms {
            let w = (lt - lme).exp();
            w_ux[u * nx + x] += w;
            w_x[x] += w;
            w_u[u] += w;
            for (k, comp) in self.comps.iter().enumerate() {
                w_k[k][u * comp.size + comp.of_out[o]] += w;
            }
        }
        let hsum: f64 = c.h.iter().sum();
        for u in 0..nu {
            for x in 0..nx {
                let jux = j[u * nx + x];
                let mut dl = if jux > 0.0 {
                    (1.0 - lambda * c.i) * w_ux[u * nx + x] / jux
                } else {
                    // One-sided limit of the vanishing term as J(u,x) grows from zero.
                    self.zero_entry_slope(&der, c, lambda, lme, u, x)
                };
                if der.q_x[x] > 0.0 {
                    dl -= lambda * (c.d - c.i) * w_x[x] / der.q_x[x];
                }
                if der.q_u[u] > 0.0 {
                    dl += lambda * (c.i - hsum) * w_u[u] / der.q_u[u];
                }
                for (k, comp) in self.comps.iter().enumerate() {
                    let mut s = 0.0;
                    for y in 0..comp.size {
                        let wk = comp.chan[x * comp.size + y];
                        let t = der.t[k][u * comp.size + y];
                        if wk > 0.0 && t > 0.0 {
                            s += w_k[k][u * comp.size + y] * wk / t;
                        }
                    }
                    dl += lambda * c.h[k] * s;
                }
                g[u * nx + x] = -dl;
            }
        }
        -lme
    }

    fn zero_entry_slope(&self, der: &Derived, c: &Coeffs, lambda: f64, lme: f64, u: usize, x: usize) -> f64 {
        let eps = 1e-12_f64;
        let lqx = ln_clamped(der.q_x[x]).max(eps.ln());
        let lqu = ln_clamped(der.q_u[u]).max(eps.ln());
        let mut s = 0.0;
        for o in 0..self.n_out {
            let w = self.w(x, o);
            if w <= 0.0 {
                continue;
            }
            let mut om = c.d * (lqx - self.p_x[x].ln()) + c.i * (eps.ln() - lqu - lqx);
            for (k, comp) in self.comps.iter().enumerate() {
                let t = der.t[k][u * comp.size + comp.of_out[o]].max(eps * comp.chan[x * comp.size + comp.of_out[o]]);
                om += c.h[k] * (lqu - ln_clamped(t));
            }
            s += w * (-lambda * om - lme).exp();
        }
        (1.0 - lambda * c.i) * s
    }

    /// Tilted distribution over support triples `(u, x, o, prob)`, in index order.
    pub fn tilt(&self, j: &[f64], c: &Coeffs, lambda: f64) -> Vec<(usize, usize, usize, f64)> {
        let der = self.derive(j);
        let (lme, terms) = self.log_mgf(j, &der, c, lambda);
        terms.into_iter().map(|(u, x, o, lt)| (u, x, o, (lt - lme).exp())).collect()
    }

    /// Mean and variance of ω under the tilted distribution at `λ`.
    pub fn tilted_moments(&self, j: &[f64], c: &Coeffs, lambda: f64) -> (f64, f64) {
        let der = self.derive(j);
        let tilt = self.tilt(j, c, lambda);
        let mean: f64 = tilt.iter().map(|&(u, x, o, w)| w * self.omega(j, &der, c, u, x, o)).sum();
        let var: f64 = tilt
            .iter()
            .map(|&(u, x, o, w)| w * (self.omega(j, &der, c, u, x, o) - mean).powi(2))
            .sum();
        (mean, var)
    }

    /// Covariance matrix of the feature vector under `q`.
    pub fn feature_covariance(&self, j: &[f64]) -> Vec<Vec<f64>> {
        let der = self.derive(j);
        let m = 2 + self.comps.len();
        let mut f = vec![0.0; m];
        let mut mean = vec![0.0; m];
        let mut second = vec![vec![0.0; m]; m];
        self.for_each_support(j, |u, x, o, q| {
            self.features(j, &der, u, x, o, &mut f);
            for a in 0..m {
                mean[a] += q * f[a];
                for b in a..m {
                    second[a][b] += q * f[a] * f[b];
                }
            }
        });
        let mut cov = vec![vec![0.0; m]; m];
        for a in 0..m {
            for b in a..m {
                let v = second[a][b] - mean[a] * mean[b];
                cov[a][b] = v;
                cov[b][a] = v;
            }
        }
        cov
    }
}

/// `cᵀ Σ c`.
pub(crate) fn quad_form(cov: &[Vec<f64>], c: &[f64]) -> f64 {
    let mut s = 0.0;
    for a in 0..c.len() {
        for b in 0..c.len() {
            s += c[a] * cov[a][b] * c[b];
        }
    }
    s.max(0.0)
}

/// How an optimizer vector maps onto the auxiliary joint.
#[derive(Debug, Clone)]
pub(crate) enum Param {
    /// `[q_U | q_{X|U} rows]`; `q_X` is free.
    Forward { nu: usize, nx: usize },
    /// Rows `q_{U|X}(.|x)`; `q_X = p_X` is pinned.
    Backward { nu: usize, nx: usize, p_x: Vec<f64> },
}

impl Param {
    pub fn space(&self) -> SimplexProduct {
        match self {
            Param::Forward { nu, nx } => {
                let mut blocks = vec![*nu];
                blocks.extend(std::iter::repeat_n(*nx, *nu));
                SimplexProduct::new(&blocks)
            }
            Param::Backward { nu, nx, .. } => SimplexProduct::new(&vec![*nu; *nx]),
        }
    }

    pub fn joint(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Param::Forward { nu, nx } => {
                let mut j = vec![0.0; nu * nx];
                for u in 0..*nu {
                    for x in 0..*nx {
                        j[u * nx + x] = v[u] * v[nu + u * nx + x];
                    }
                }
                j
            }
            Param::Backward { nu, nx, p_x } => {
                let mut j = vec![0.0; nu * nx];
                for x in 0..*nx {
                    for u in 0..*nu {
                        j[u * nx + x] = p_x[x] * v[x * nu + u];
                    }
                }
                j
            }
        }
    }

    /// Pulls a joint gradient back to parameter space.
    pub fn chain(&self, v: &[f64], gj: &[f64], g: &mut [f64]) {
        match self {
            Param::Forward { nu, nx } => {
                for u in 0..*nu {
                    let mut s = 0.0;
                    for x in 0..*nx {
                        s += v[nu + u * nx + x] * gj[u * nx + x];
                        g[nu + u * nx + x] = v[u] * gj[u * nx + x];
                    }
                    g[u] = s;
                }
            }
            Param::Backward { nu, nx, p_x } => {
                for x in 0..*nx {
                    for u in 0..*nu {
                        g[x * nu + u] = p_x[x] * gj[u * nx + x];
                    }
                }
            }
        }
    }

    /// Parameter vector reproducing `j` as closely as the parametrization allows.
    pub fn from_joint(&self, j: &[f64]) -> Vec<f64> {
        match self {
            Param::Forward { nu, nx } => {
                let mut v = vec![0.0; nu + nu * nx];
                for u in 0..*nu {
                    let qu: f64 = (0..*nx).map(|x| j[u * nx + x]).sum();
                    v[u] = qu;
                    for x in 0..*nx {
                        v[nu + u * nx + x] = if qu > 0.0 { j[u * nx + x] / qu } else { 1.0 / *nx as f64 };
                    }
                }
                v
            }
            Param::Backward { nu, nx, .. } => {
                let mut v = vec![0.0; nu * nx];
                for x in 0..*nx {
                    let qx: f64 = (0..*nu).map(|u| j[u * nx + x]).sum();
                    for u in 0..*nu {
                        v[x * nu + u] = if qx > 0.0 { j[u * nx + x] / qx } else { 1.0 / *nu as f64 };
                    }
                }
                v
            }
        }
    }

    /// The "U constant" and "U = X" starting points.
    pub fn structured_starts(&self, p_x: &[f64]) -> Vec<Vec<f64>> {
        let (nu, nx) = match self {
            Param::Forward { nu, nx } | Param::Backward { nu, nx, .. } => (*nu, *nx),
        };
        let mut constant = vec![0.0; nu * nx];
        let mut identity = vec![0.0; nu * nx];
        for x in 0..nx {
            constant[x] = p_x[x];
            identity[(x % nu) * nx + x] = p_x[x];
        }
        vec![self.from_joint(&constant), self.from_joint(&identity)]
    }

    pub fn random_start<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Param::Forward { nu, nx } => {
                let mut v = random_simplex_point(rng, *nu);
                for _ in 0..*nu {
                    v.extend(random_simplex_point(rng, *nx));
                }
                v
            }
            Param::Backward { nu, nx, .. } => {
                let mut v = Vec::with_capacity(nu * nx);
                for _ in 0..*nx {
                    v.extend(random_simplex_point(rng, *nu));
                }
                v
            }
        }
    }
}

/// Best point found by a multistart solve.
#[derive(Debug, Clone)]
pub(crate) struct Solved {
    pub value: f64,
    pub joint: Vec<f64>,
    pub converged: bool,
}

fn starts_for(model: &PinnedModel, param: &Param, opts: &OptimizerOptions, warm: &[Vec<f64>], stream: u64) -> Vec<Vec<f64>> {
    let mut starts: Vec<Vec<f64>> = warm.iter().map(|j| param.from_joint(j)).collect();
    starts.extend(param.structured_starts(&model.p_x));
    let mut rng = rng_for(opts.seed, stream);
    for _ in 0..opts.starts {
        starts.push(param.random_start(&mut rng));
    }
    starts
}

/// Minimizes `E_q[ω]`; with `pinned` the search keeps `q_X = p_X`.
pub(crate) fn solve_mean(model: &PinnedModel, c: &Coeffs, pinned: bool, opts: &OptimizerOptions, warm: &[Vec<f64>]) -> Solved {
    let param = if pinned {
        Param::Backward { nu: model.nu(), nx: model.nx, p_x: model.p_x.clone() }
    } else {
        Param::Forward { nu: model.nu(), nx: model.nx }
    };
    let space = param.space();
    let mut gj = vec![0.0; model.joint_len()];
    let gj = std::cell::RefCell::new(&mut gj);
    let f = |v: &[f64], g: Option<&mut [f64]>| {
        let j = param.joint(v);
        match g {
            Some(g) => {
                let mut gj = gj.borrow_mut();
                let val = model.mean_omega(&j, c, Some(&mut gj[..]));
                param.chain(v, &gj[..], g);
                val
            }
            None => model.mean_omega(&j, c, None),
        }
    };
    let m = multistart(&f, &space, starts_for(model, &param, opts, warm, 11), opts);
    Solved { value: m.value, joint: param.joint(&m.x), converged: m.converged }
}

/// Minimizes `Ω(q)` over the free auxiliary joint.
pub(crate) fn solve_omega(model: &PinnedModel, c: &Coeffs, lambda: f64, opts: &OptimizerOptions, warm: &[Vec<f64>]) -> Solved {
    let param = Param::Forward { nu: model.nu(), nx: model.nx };
    let space = param.space();
    let mut gj = vec![0.0; model.joint_len()];
    let gj = std::cell::RefCell::new(&mut gj);
    let f = |v: &[f64], g: Option<&mut [f64]>| {
        let j = param.joint(v);
        match g {
            Some(g) => {
                let mut gj = gj.borrow_mut();
                let val = model.omega_objective_grad(&j, c, lambda, &mut gj[..]);
                param.chain(v, &gj[..], g);
                val
            }
            None => model.omega_objective(&j, c, lambda),
        }
    };
    let m = multistart(&f, &space, starts_for(model, &param, opts, warm, 13), opts);
    Solved { value: m.value, joint: param.joint(&m.x), converged: m.converged }
}
