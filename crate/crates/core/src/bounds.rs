//! Scalar bound machinery: `ϑ` and its inverse, the variance proxy `ρ`, the
//! positivity floor of the exponent and the finite-blocklength shrinkage `κ_n`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exponent::model_for;
use crate::prob::JointSource;
use crate::region::{region_membership, AuxChannel, MuGrid, RatePoint, SandwichConstants};
use crate::search::{Cell, Family};
use crate::simplex::{linspace, multistart, rng_for, OptimizerOptions};
use crate::tilt::{quad_form, Param, PinnedModel};

/// `ϑ(a) = a + a²`.
pub fn theta(a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("theta needs a > 0, got {a}")));
    }
    Ok(a + a * a)
}

/// Positive root of `a + a² = b`.
pub fn g_inv(b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::Domain(format!("g needs b > 0, got {b}")));
    }
    // 2b / (1 + √(1+4b)) avoids cancellation for small b.
    Ok(2.0 * b / (1.0 + (1.0 + 4.0 * b).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoStrategy {
    /// Grid (binary X) or random sample, then local ascent from the best candidates.
    MeshAndAscent,
    MeshOnly,
    /// Local ascent from random starts only.
    AscentOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoOptions {
    /// Mesh step on each simplex coordinate when `|X| = 2`.
    pub mesh_step: f64,
    /// Random candidates when `|X| > 2`.
    pub samples: usize,
    pub ascent_starts: usize,
    /// Points per axis of the tilt-parameter grid.
    pub grid_points: usize,
    pub strategy: RhoStrategy,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for RhoOptions {
    fn default() -> Self {
        RhoOptions {
            mesh_step: 0.02,
            samples: 2000,
            ascent_starts: 8,
            grid_points: 21,
            strategy: RhoStrategy::MeshAndAscent,
            seed: 0x5eed_0002,
            max_iter: 400,
        }
    }
}

/// A lower bound on `ρ = max_{q, α, μ} Var_q[ω]` with the search that produced it.
#[derive(Debug, Clone)]
pub struct RhoEstimate {
    pub value: f64,
    pub argmax: AuxChannel,
    pub alpha: f64,
    pub mu: f64,
    /// Set for three-source estimates.
    pub gamma: Option<f64>,
    pub search_spec: String,
}

/// `ρ(p_XY)` by search; see [`RhoOptions`].
pub fn rho(src: &JointSource, opts: &RhoOptions) -> RhoEstimate {
    rho_search(&model_for(src), Family::TWO, opts)
}

fn tilt_grid(family: Family, points: usize) -> Vec<Cell> {
    let axis = linspace(0.0, 1.0, points.max(2));
    let gammas = if family.three { axis.clone() } else { vec![0.0] };
    let mut cells = Vec::new();
    for &alpha in &axis {
        for &mu in &axis {
            for &gamma in &gammas {
                cells.push(Cell { alpha, mu, gamma });
            }
        }
    }
    cells
}

/// Coefficient vectors at the vertices of the tilt box. The variance is convex
/// along each coordinate, so its maximum over the box sits at a vertex.
fn corner_coeffs(family: Family) -> Vec<Vec<f64>> {
    tilt_grid(family, 2).iter().map(|c| family.coeffs(c).as_vec()).collect()
}

fn max_var(model: &PinnedModel, j: &[f64], corners: &[Vec<f64>]) -> f64 {
    let cov = model.feature_covariance(j);
    corners.iter().map(|c| quad_form(&cov, c)).fold(0.0, f64::max)
}

fn mesh_candidates(param: &Param, nx: usize, step: f64) -> Vec<Vec<f64>> {
    let k = (1.0 / step).round() as usize;
    let pts: Vec<[f64; 2]> = (0..=k).map(|i| [i as f64 / k as f64, 1.0 - i as f64 / k as f64]).collect();
    debug_assert_eq!(nx, 2);
    let mut out = Vec::with_capacity(pts.len().pow(3));
    for a in &pts {
        for b in &pts {
            for c in &pts {
                let v = vec![a[0], a[1], b[0], b[1], c[0], c[1]];
                out.push(param.joint(&v));
            }
        }
    }
    out
}

/// Ascends `Var_q[ω]` at coefficients `c` from `v0` with finite-difference gradients.
fn ascend(model: &PinnedModel, param: &Param, c: &[f64], v0: Vec<f64>, opts: &OptimizerOptions) -> (f64, Vec<f64>) {
    let var = |v: &[f64]| quad_form(&model.feature_covariance(&param.joint(v)), c);
    let f = |v: &[f64], g: Option<&mut [f64]>| {
        let fx = -var(v);
        if let Some(g) = g {
            let h = 1e-7;
            let mut w = v.to_vec();
            for i in 0..v.len() {
                let orig = w[i];
                if orig > h {
                    w[i] = orig + h;
                    let up = -var(&w);
                    w[i] = orig - h;
                    let down = -var(&w);
                    g[i] = (up - down) / (2.0 * h);
                } else {
                    w[i] = orig + h;
                    g[i] = (-var(&w) - fx) / h;
                }
                w[i] = orig;
            }
        }
        fx
    };
    let m = multistart(&f, &param.space(), vec![v0], opts);
    (-m.value, param.joint(&m.x))
}

pub(crate) fn rho_search(model: &PinnedModel, family: Family, opts: &RhoOptions) -> RhoEstimate {
    let nx = model.nx;
    let param = Param::Forward { nu: model.nu(), nx };
    let corners = corner_coeffs(family);
    let mut rng = rng_for(opts.seed, 17);

    let use_mesh = opts.strategy != RhoStrategy::AscentOnly;
    let mesh = use_mesh && nx == 2;
    let candidates: Vec<Vec<f64>> = if !use_mesh {
        Vec::new()
    } else if mesh {
        mesh_candidates(&param, nx, opts.mesh_step)
    } else {
        (0..opts.samples).map(|_| param.joint(&param.random_start(&mut rng))).collect()
    };
    let scores: Vec<f64> = candidates.par_iter().map(|j| max_var(model, j, &corners)).collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut best_j = order.first().map(|&i| candidates[i].clone()).unwrap_or_else(|| param.joint(&param.structured_starts(&model.p_x)[0]));
    let mut best = max_var(model, &best_j, &corners);

    if opts.strategy != RhoStrategy::MeshOnly {
        let mut starts: Vec<Vec<f64>> = order.iter().take(opts.ascent_starts).map(|&i| param.from_joint(&candidates[i])).collect();
        starts.extend(param.structured_starts(&model.p_x));
        for _ in 0..opts.ascent_starts {
            starts.push(param.random_start(&mut rng));
        }
        let local = OptimizerOptions { max_iter: opts.max_iter, tol: 1e-12, ..OptimizerOptions::default() };
        let results: Vec<(f64, Vec<f64>)> = starts
            .par_iter()
            .map(|v0| {
                let j0 = param.joint(v0);
                let cov = model.feature_covariance(&j0);
                let k = (0..corners.len())
                    .fold(0, |k, i| if quad_form(&cov, &corners[i]) > quad_form(&cov, &corners[k]) { i } else { k });
                let (_, j) = ascend(model, &param, &corners[k], v0.clone(), &local);
                (max_var(model, &j, &corners), j)
            })
            .collect();
        for (v, j) in results {
            if v > best {
                best = v;
                best_j = j;
            }
        }
    }

    // Report the tilt parameters from the full grid at the winning channel.
    let cov = model.feature_covariance(&best_j);
    let grid = tilt_grid(family, opts.grid_points);
    let mut arg = grid[0];
    let mut value = f64::NEG_INFINITY;
    for cell in &grid {
        let v = quad_form(&cov, &family.coeffs(cell).as_vec());
        if v > value {
            value = v;
            arg = *cell;
        }
    }
    let axes = if family.three { "(alpha,mu,gamma)" } else { "(alpha,mu)" };
    let cand = match (opts.strategy, mesh) {
        (RhoStrategy::AscentOnly, _) => "no candidate set".to_string(),
        (_, true) => format!("simplex mesh step {}", opts.mesh_step),
        (_, false) => format!("{} random channels", opts.samples),
    };
    let ascent = if opts.strategy == RhoStrategy::MeshOnly {
        "no ascent".to_string()
    } else {
        format!("ascent from {} best + {} random starts", opts.ascent_starts, opts.ascent_starts)
    };
    RhoEstimate {
        value: value.max(0.0),
        argmax: AuxChannel::from_joint(&best_j, nx),
        alpha: arg.alpha,
        mu: arg.mu,
        gamma: family.three.then_some(arg.gamma),
        search_spec: format!(
            "{cand}; {ascent}; {axes} grid {}^{}; seed {:#x}",
            opts.grid_points,
            if family.three { 3 } else { 2 },
            opts.seed
        ),
    }
}

/// `(ρ/2) g²(τ^(3+δ) / (2ρ))`.
pub fn positivity_floor(rho: f64, tau: f64, delta: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain("floor not applicable: rho = 0".into()));
    }
    if !(tau > 0.0) || delta < 0.0 {
        return Err(Error::Domain(format!("need tau > 0 and delta >= 0, got tau = {tau}, delta = {delta}")));
    }
    let g = g_inv(tau.powf(3.0 + delta) / (2.0 * rho))?;
    Ok(0.5 * rho * g * g)
}

/// Whether `α = τ^(2+δ)` lies in `(0, α0]` with sandwich gap at most `τ/2`.
pub fn nu_criterion(consts: &SandwichConstants, tau: f64, delta: f64) -> bool {
    tau > 0.0 && nu_criterion_ln(consts, tau.ln(), delta)
}

fn nu_criterion_ln(consts: &SandwichConstants, ln_tau: f64, delta: f64) -> bool {
    let ln_alpha = (2.0 + delta) * ln_tau;
    ln_alpha <= consts.alpha0.ln() && consts.log_gap(ln_alpha) <= ln_tau - std::f64::consts::LN_2
}

/// The largest `τ ≤ 1` meeting [`nu_criterion`], by bisection in `log τ`; `0` if none is found.
pub fn nu_threshold(consts: &SandwichConstants, delta: f64) -> f64 {
    nu_threshold_ln(consts, delta).exp()
}

/// `log` of [`nu_threshold`], finite even when the threshold underflows.
pub fn nu_threshold_ln(consts: &SandwichConstants, delta: f64) -> f64 {
    let (mut lo, mut hi) = (-1e4f64, -1e-12f64);
    if !nu_criterion_ln(consts, lo, delta) {
        return f64::NEG_INFINITY;
    }
    if nu_criterion_ln(consts, hi, delta) {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if nu_criterion_ln(consts, mid, delta) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub(crate) fn kappa_with(n: u64, eps: f64, delta: f64, rho: f64, leading: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps = {eps} outside (0,1)")));
    }
    if delta < 0.0 {
        return Err(Error::Domain(format!("delta = {delta} is negative")));
    }
    if !(rho > 0.0) {
        return Err(Error::Domain("kappa not applicable: rho = 0".into()));
    }
    let l = (leading / (1.0 - eps)).ln();
    let n = n as f64;
    let inner = (8.0 * rho / n * l).sqrt() + 4.0 / n * l;
    Ok(inner.powf(1.0 / (3.0 + delta)))
}

/// `κ_n = {√(8ρ/n · log(5/(1-ε))) + (4/n) log(5/(1-ε))}^(1/(3+δ))`.
pub fn kappa_n(n: u64, eps: f64, delta: f64, rho: f64) -> Result<f64> {
    kappa_with(n, eps, delta, rho, 5.0)
}

/// Outcome of shifting a boundary point down by `κ` in both rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftCheck {
    pub kappa: f64,
    pub point: RatePoint,
    /// `point - κ(1,1)`; coordinates may be negative.
    pub shifted: RatePoint,
    /// `point ∈ R`, equivalently `shifted ∈ R - κ(1,1)`.
    pub in_shrunk_region: bool,
    /// `shifted ∉ R`: the shift leaves the region.
    pub shifted_outside: bool,
}

impl ShiftCheck {
    pub fn passed(&self) -> bool {
        self.in_shrunk_region && self.shifted_outside
    }
}

pub fn shift_check(
    src: &JointSource,
    point: RatePoint,
    kappa: f64,
    grid: MuGrid,
    opts: &OptimizerOptions,
) -> Result<ShiftCheck> {
    let shifted = RatePoint { r1: point.r1 - kappa, r2: point.r2 - kappa };
    Ok(ShiftCheck {
        kappa,
        point,
        shifted,
        in_shrunk_region: region_membership(src, point, grid, opts)?.is_inside(),
        shifted_outside: !region_membership(src, shifted, grid, opts)?.is_inside(),
    })
}
