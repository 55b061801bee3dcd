//! The one-helper rate region through its supporting hyperplanes.
//!
//! The region is `{(R1, R2): μ̄R1 + μR2 ≥ R^(μ) for all μ ∈ [0,1]}` where
//! `R^(μ) = min μ̄ I(X;U) + μ H(Y|U)` over Markov chains `U — X — Y` with the
//! source marginal `p_XY` and `|U| ≤ |X|`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exponent::model_for;
use crate::fmt::sig;
use crate::prob::{self, JointSource, Pmf};
use crate::simplex::{linspace, random_simplex_point, OptimizerOptions};
use crate::tilt::{solve_mean, Coeffs, PinnedModel};
use rand::Rng;

/// An auxiliary decomposition `(q_U, q_{X|U})`; the channel to `Y` is the source's.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxChannel {
    q_u: Pmf,
    q_x_given_u: Vec<Pmf>,
}

impl AuxChannel {
    pub fn new(q_u: Pmf, q_x_given_u: Vec<Pmf>) -> Result<Self> {
        if q_u.len() != q_x_given_u.len() {
            return Err(Error::Dimension(format!("{} weights for {} rows", q_u.len(), q_x_given_u.len())));
        }
        let nx = q_x_given_u[0].len();
        if q_x_given_u.iter().any(|r| r.len() != nx) {
            return Err(Error::Dimension("rows of q_X|U differ in length".into()));
        }
        if q_u.len() > nx {
            return Err(Error::Domain(format!("|U| = {} exceeds |X| = {nx}", q_u.len())));
        }
        Ok(AuxChannel { q_u, q_x_given_u })
    }

    /// `U` constant with `q_X = p_X`.
    pub fn constant(p_x: &Pmf) -> Self {
        AuxChannel { q_u: Pmf::delta(1, 0), q_x_given_u: vec![p_x.clone()] }
    }

    /// `U = X` with `q_U = p_X`.
    pub fn identity(p_x: &Pmf) -> Self {
        let n = p_x.len();
        AuxChannel { q_u: p_x.clone(), q_x_given_u: (0..n).map(|x| Pmf::delta(n, x)).collect() }
    }

    /// Uniformly random weights and rows with `nu = nx`.
    pub fn random<R: Rng>(rng: &mut R, nx: usize) -> Self {
        let q_u = Pmf::from_weights(random_simplex_point(rng, nx));
        let rows = (0..nx).map(|_| Pmf::from_weights(random_simplex_point(rng, nx))).collect();
        AuxChannel { q_u, q_x_given_u: rows }
    }

    pub fn nu(&self) -> usize {
        self.q_u.len()
    }

    pub fn nx(&self) -> usize {
        self.q_x_given_u[0].len()
    }

    pub fn q_u(&self) -> &Pmf {
        &self.q_u
    }

    pub fn q_x_given_u(&self) -> &[Pmf] {
        &self.q_x_given_u
    }

    pub fn q_x(&self) -> Pmf {
        prob::mix(&self.q_u, &self.q_x_given_u)
    }

    /// `I(X;U)`.
    pub fn mutual_information(&self) -> f64 {
        prob::mutual_information(&self.q_u, &self.q_x_given_u)
    }

    /// `H(Y|U)` through `channel` rows `p_{Y|X}(.|x)`.
    pub fn conditional_entropy(&self, channel: &[Pmf]) -> f64 {
        prob::conditional_entropy(&self.q_u, &self.q_x_given_u, channel)
    }

    /// The rate pair `(I(X;U), H(Y|U))` this channel achieves for `src`.
    pub fn rate_point(&self, src: &JointSource) -> Result<RatePoint> {
        let chan = src.conditional_y_given_x()?;
        RatePoint::new(self.mutual_information(), self.conditional_entropy(&chan))
    }

    /// The joint `J(u,x)` padded to `nx` auxiliary symbols, row-major.
    pub(crate) fn padded_joint(&self) -> Vec<f64> {
        let nx = self.nx();
        let mut j = vec![0.0; nx * nx];
        for (u, row) in self.q_x_given_u.iter().enumerate() {
            for x in 0..nx {
                j[u * nx + x] = self.q_u[u] * row[x];
            }
        }
        j
    }

    pub(crate) fn from_joint(j: &[f64], nx: usize) -> Self {
        let nu = j.len() / nx;
        let weights: Vec<f64> = (0..nu).map(|u| j[u * nx..(u + 1) * nx].iter().sum()).collect();
        let rows = (0..nu)
            .map(|u| {
                if weights[u] > 0.0 {
                    Pmf::from_weights(j[u * nx..(u + 1) * nx].to_vec())
                } else {
                    Pmf::uniform(nx)
                }
            })
            .collect();
        AuxChannel { q_u: Pmf::from_weights(weights), q_x_given_u: rows }
    }
}

/// A rate pair in nats per symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub r1: f64,
    pub r2: f64,
}

impl RatePoint {
    pub fn new(r1: f64, r2: f64) -> Result<Self> {
        if !(r1 >= 0.0 && r2 >= 0.0) {
            return Err(Error::Domain(format!("rates must be nonnegative, got ({r1}, {r2})")));
        }
        Ok(RatePoint { r1, r2 })
    }

    /// `μ̄ R1 + μ R2`.
    pub fn combine(&self, mu: f64) -> f64 {
        (1.0 - mu) * self.r1 + mu * self.r2
    }

    pub fn shifted(&self, by: f64) -> RatePoint {
        RatePoint { r1: (self.r1 + by).max(0.0), r2: (self.r2 + by).max(0.0) }
    }
}

/// Constants `(α0, c1, c2)` of the tilted/untilted hyperplane sandwich.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichConstants {
    pub alpha0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl SandwichConstants {
    /// `c1 √(α/ᾱ) log(c2 ᾱ/α)`, the gap between `R^(μ)` and `R̃^(α,μ)/α`.
    pub fn gap(&self, alpha: f64) -> f64 {
        let ab = 1.0 - alpha;
        self.c1 * (alpha / ab).sqrt() * (self.c2 * ab / alpha).ln()
    }

    /// `log gap` as a function of `log α`, usable where `α` underflows.
    pub fn log_gap(&self, ln_alpha: f64) -> f64 {
        let ln_ab = (-ln_alpha.exp()).ln_1p();
        let inner = self.c2.ln() + ln_ab - ln_alpha;
        if inner <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.c1.ln() + 0.5 * (ln_alpha - ln_ab) + inner.ln()
    }
}

/// `α0 = 1/(8 log(nx ny) + 1)`, `c1 = (3/2) log(nx ny)`, `c2 = (nx⁴ ny)^(2/3) / log(nx ny)²`.
pub fn sandwich_constants(nx: usize, ny: usize) -> Result<SandwichConstants> {
    if nx < 2 || ny < 2 {
        return Err(Error::Domain(format!("alphabet sizes must be at least 2, got {nx}x{ny}")));
    }
    let xi = ((nx * ny) as f64).ln();
    Ok(SandwichConstants {
        alpha0: 1.0 / (8.0 * xi + 1.0),
        c1: 1.5 * xi,
        c2: ((nx as f64).powi(4) * ny as f64).powf(2.0 / 3.0) / (xi * xi),
    })
}

/// A support-function value together with the channel attaining it.
#[derive(Debug, Clone)]
pub struct SupportValue {
    pub value: f64,
    pub argmin: AuxChannel,
    /// False when the optimizer hit its iteration cap; `value` is still the best found.
    pub converged: bool,
}

pub(crate) fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {v} outside [0,1]")))
    }
}

pub(crate) fn solve_support(model: &PinnedModel, mu: f64, weights: &[f64], opts: &OptimizerOptions) -> SupportValue {
    let s = solve_mean(model, &Coeffs::tilted(1.0, mu, weights), true, opts, &[]);
    SupportValue { value: s.value, argmin: AuxChannel::from_joint(&s.joint, model.nx), converged: s.converged }
}

pub(crate) fn solve_tilted_support(
    model: &PinnedModel,
    alpha: f64,
    mu: f64,
    weights: &[f64],
    opts: &OptimizerOptions,
) -> SupportValue {
    let s = solve_mean(model, &Coeffs::tilted(alpha, mu, weights), false, opts, &[]);
    SupportValue { value: s.value, argmin: AuxChannel::from_joint(&s.joint, model.nx), converged: s.converged }
}

/// `R^(μ)(p_XY)`: the minimum of `μ̄ I(X;U) + μ H(Y|U)` over `U — X — Y` with `q_X = p_X`.
pub fn support_value(src: &JointSource, mu: f64, opts: &OptimizerOptions) -> Result<SupportValue> {
    check_unit("mu", mu)?;
    Ok(solve_support(&model_for(src), mu, &[mu], opts))
}

/// `R̃^(α,μ)(p_XY)`: the minimum of `(1+μ)ᾱ D(q_X||p_X) + α[μ̄ I(X;U) + μ H(Y|U)]`
/// over auxiliary channels with a free `q_X`.
pub fn tilted_support_value(src: &JointSource, alpha: f64, mu: f64, opts: &OptimizerOptions) -> Result<SupportValue> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} outside (0,1]")));
    }
    check_unit("mu", mu)?;
    Ok(solve_tilted_support(&model_for(src), alpha, mu, &[mu], opts))
}

/// The μ values at which hyperplanes are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MuGrid {
    /// Uniform points on `[0, 1]`, endpoints included.
    pub points: usize,
    /// Extra points placed around the most violated hyperplane.
    pub refine: usize,
}

impl Default for MuGrid {
    fn default() -> Self {
        MuGrid { points: 65, refine: 9 }
    }
}

impl MuGrid {
    pub fn new(points: usize, refine: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::Domain("mu grid needs at least the endpoints 0 and 1".into()));
        }
        Ok(MuGrid { points, refine })
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(0.0, 1.0, self.points)
    }
}

/// Membership ties within this tolerance count as inside (the region is closed).
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Membership {
    Inside,
    /// `margin = max_μ R^(μ) − (μ̄R1 + μR2)`, attained at `mu`.
    Outside { margin: f64, mu: f64 },
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        matches!(self, Membership::Inside)
    }
}

/// Tests `pt` against every hyperplane on the grid.
pub fn region_membership(src: &JointSource, pt: RatePoint, grid: MuGrid, opts: &OptimizerOptions) -> Result<Membership> {
    let model = model_for(src);
    let violation = |mu: f64| solve_support(&model, mu, &[mu], opts).value - pt.combine(mu);
    let mus = grid.values();
    // Lowest grid index wins ties.
    let (mut worst_mu, mut worst) = (mus[0], f64::NEG_INFINITY);
    for &mu in &mus {
        let v = violation(mu);
        if v > worst {
            worst = v;
            worst_mu = mu;
        }
    }
    if grid.refine > 0 {
        let step = 1.0 / (grid.points - 1) as f64;
        let lo = (worst_mu - step).max(0.0);
        let hi = (worst_mu + step).min(1.0);
        for mu in linspace(lo, hi, grid.refine) {
            let v = violation(mu);
            if v > worst {
                worst = v;
                worst_mu = mu;
            }
        }
    }
    Ok(if worst > MEMBERSHIP_TOL {
        Membership::Outside { margin: worst, mu: worst_mu }
    } else {
        Membership::Inside
    })
}

/// One row of a traced boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRow {
    pub mu: f64,
    pub r_mu: f64,
    /// `(I(X;U), H(Y|U))` of the minimizing channel, a point on the hyperplane.
    pub r1: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub rows: Vec<BoundaryRow>,
    pub converged: bool,
}

impl BoundaryCurve {
    /// CSV with header `mu,R_mu,r1,r2`; values are divided by `unit` (1 for nats, ln 2 for bits).
    pub fn to_csv(&self, unit: f64) -> String {
        let mut out = String::from("mu,R_mu,r1,r2\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", sig(r.mu), sig(r.r_mu / unit), sig(r.r1 / unit), sig(r.r2 / unit));
        }
        out
    }
}

/// Tabulates `R^(μ)` and the induced boundary points over the grid.
pub fn trace_boundary(src: &JointSource, grid: MuGrid, opts: &OptimizerOptions) -> Result<BoundaryCurve> {
    use rayon::prelude::*;
    let model = model_for(src);
    let chan = src.conditional_y_given_x()?;
    let rows: Vec<(BoundaryRow, bool)> = grid
        .values()
        .into_par_iter()
        .map(|mu| {
            let s = solve_support(&model, mu, &[mu], opts);
            let row = BoundaryRow {
                mu,
                r_mu: s.value,
                r1: s.argmin.mutual_information(),
                r2: s.argmin.conditional_entropy(&chan),
            };
            (row, s.converged)
        })
        .collect();
    Ok(BoundaryCurve { converged: rows.iter().all(|r| r.1), rows: rows.into_iter().map(|r| r.0).collect() })
}
