//! The tilted weight `ω`, the objective `Ω`, its slices and the exponent `F`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::prob::JointSource;
use crate::region::{check_unit, AuxChannel, RatePoint};
use crate::search::{Best, Cell, Family, SliceEngine};
use crate::simplex::OptimizerOptions;
use crate::tilt::{solve_omega, Coeffs, Component, PinnedModel};

pub use crate::search::ExponentOptions;

/// The pinned model of a two-source problem: `W = p_{Y|X}` with one output component.
pub(crate) fn model_for(src: &JointSource) -> PinnedModel {
    let (nx, ny) = (src.nx(), src.ny());
    let p_x = src.marginal_x().probs().to_vec();
    let mut chan = vec![0.0; nx * ny];
    for x in 0..nx {
        for y in 0..ny {
            chan[x * ny + y] = src.p(x, y) / p_x[x];
        }
    }
    PinnedModel {
        nx,
        p_x,
        n_out: ny,
        chan: chan.clone(),
        comps: vec![Component { size: ny, of_out: (0..ny).collect(), chan }],
    }
}

/// Tilt parameters `(α, μ, λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltParams {
    pub alpha: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl TiltParams {
    /// `α, μ ∈ [0,1]` and `λ ≥ 0`.
    pub fn new(alpha: f64, mu: f64, lambda: f64) -> Result<Self> {
        check_unit("alpha", alpha)?;
        check_unit("mu", mu)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda = {lambda} must be finite and nonnegative")));
        }
        Ok(TiltParams { alpha, mu, lambda })
    }

    fn coeffs(&self) -> Coeffs {
        Coeffs::tilted(self.alpha, self.mu, &[self.mu])
    }

    fn positive_lambda(&self) -> Result<()> {
        if self.lambda > 0.0 {
            Ok(())
        } else {
            Err(Error::Domain("slices need lambda > 0".into()))
        }
    }
}

/// A pmf over `(u, x, y)`, row-major with `y` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedJoint {
    pub nu: usize,
    pub nx: usize,
    pub ny: usize,
    pub probs: Vec<f64>,
}

impl TiltedJoint {
    pub fn prob(&self, u: usize, x: usize, y: usize) -> f64 {
        self.probs[(u * self.nx + x) * self.ny + y]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

fn checked_joint(src: &JointSource, q: &AuxChannel) -> Result<Vec<f64>> {
    if q.nx() != src.nx() {
        return Err(Error::Dimension(format!("channel has |X| = {}, source has {}", q.nx(), src.nx())));
    }
    Ok(q.padded_joint())
}

/// `ω(x,y|u) = (1+μ)ᾱ log(q_X/p_X) + α[μ̄ log(q_{X|U}/q_X) + μ log(1/q_{Y|U})]`.
pub fn eval_omega(src: &JointSource, q: &AuxChannel, tp: TiltParams, u: usize, x: usize, y: usize) -> Result<f64> {
    let j = checked_joint(src, q)?;
    let model = model_for(src);
    if u >= q.nu() || x >= src.nx() || y >= src.ny() || !model.on_support(&j, u, x, y) {
        return Err(Error::OffSupport { u, x, y });
    }
    let der = model.derive(&j);
    Ok(model.omega(&j, &der, &tp.coeffs(), u, x, y))
}

/// `Ω(q) = -log E_q[exp(-λω)]`.
pub fn omega_objective(src: &JointSource, q: &AuxChannel, tp: TiltParams) -> Result<f64> {
    let j = checked_joint(src, q)?;
    Ok(model_for(src).omega_objective(&j, &tp.coeffs(), tp.lambda))
}

/// The tilted distribution `q^(λ) ∝ q exp(-λω)`.
pub fn tilt_distribution(src: &JointSource, q: &AuxChannel, tp: TiltParams) -> Result<TiltedJoint> {
    let j = checked_joint(src, q)?;
    let model = model_for(src);
    let (nx, ny) = (src.nx(), src.ny());
    let mut probs = vec![0.0; nx * nx * ny];
    for (u, x, y, w) in model.tilt(&j, &tp.coeffs(), tp.lambda) {
        probs[(u * nx + x) * ny + y] = w;
    }
    Ok(TiltedJoint { nu: nx, nx, ny, probs })
}

/// `(dΩ/dλ, d²Ω/dλ²) = (E[ω], -Var[ω])` under the tilted distribution.
pub fn omega_derivatives(src: &JointSource, q: &AuxChannel, tp: TiltParams) -> Result<(f64, f64)> {
    let j = checked_joint(src, q)?;
    let (mean, var) = model_for(src).tilted_moments(&j, &tp.coeffs(), tp.lambda);
    Ok((mean, -var))
}

/// `Ω(p_XY)`: the minimum of `Ω(q)` over auxiliary channels with `|U| = |X|`.
#[derive(Debug, Clone)]
pub struct OmegaMin {
    pub value: f64,
    pub argmin: AuxChannel,
    pub converged: bool,
}

pub fn min_omega(src: &JointSource, tp: TiltParams, opts: &OptimizerOptions) -> Result<OmegaMin> {
    tp.positive_lambda()?;
    let model = model_for(src);
    let s = solve_omega(&model, &tp.coeffs(), tp.lambda, opts, &[]);
    Ok(OmegaMin { value: s.value, argmin: AuxChannel::from_joint(&s.joint, src.nx()), converged: s.converged })
}

/// `F^(α,μ,λ) = [Ω(p) - αλ(μ̄R1 + μR2)] / (1 + λ(1+μ))` for a given `Ω(p)`.
pub fn f_slice_from(omega: f64, tp: TiltParams, pt: RatePoint) -> f64 {
    let cell = Cell { alpha: tp.alpha, mu: tp.mu, gamma: 0.0 };
    Family::TWO.slice(&cell, tp.lambda, omega, pt.combine(tp.mu))
}

/// The slice at `tp`, with `Ω(p)` from [`min_omega`].
pub fn f_slice(src: &JointSource, tp: TiltParams, pt: RatePoint, opts: &OptimizerOptions) -> Result<f64> {
    let m = min_omega(src, tp, opts)?;
    Ok(f_slice_from(m.value, tp, pt))
}

/// The exponent `F(R1,R2)` as the best slice over the search set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentResult {
    /// A lower bound on the supremum; never negative.
    pub value: f64,
    /// `lambda = 0` means no slice was positive and the value is the `λ → 0` limit.
    pub argmax: TiltParams,
    pub converged: bool,
    /// The best slice sits on the largest λ searched.
    pub lambda_at_cap: bool,
    pub cells_evaluated: usize,
}

impl From<Best> for ExponentResult {
    fn from(b: Best) -> Self {
        ExponentResult {
            value: b.value,
            argmax: TiltParams { alpha: b.cell.alpha, mu: b.cell.mu, lambda: b.lambda },
            converged: b.converged,
            lambda_at_cap: b.lambda_at_cap,
            cells_evaluated: b.cells_evaluated,
        }
    }
}

/// Reusable exponent search for one source.
///
/// Inner minima do not depend on the rate point and are cached, so evaluating
/// many points with one solver is much cheaper than separate [`exponent`] calls.
pub struct ExponentSolver {
    engine: SliceEngine,
}

impl ExponentSolver {
    pub fn new(src: &JointSource, opts: ExponentOptions) -> Self {
        ExponentSolver { engine: SliceEngine::new(model_for(src), Family::TWO, opts) }
    }

    pub fn exponent(&self, pt: RatePoint) -> ExponentResult {
        self.engine.search(&[pt.r1, pt.r2]).into()
    }

    /// Every grid slice plus the search result.
    pub fn surface(&self, pt: RatePoint) -> Surface {
        let rows = self
            .engine
            .surface(&[pt.r1, pt.r2])
            .into_iter()
            .map(|(c, lambda, omega, f_slice)| SurfaceRow { alpha: c.alpha, mu: c.mu, lambda, omega, f_slice })
            .collect();
        Surface { rows, result: self.exponent(pt) }
    }
}

pub fn exponent(src: &JointSource, pt: RatePoint, opts: &ExponentOptions) -> ExponentResult {
    ExponentSolver::new(src, opts.clone()).exponent(pt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceRow {
    pub alpha: f64,
    pub mu: f64,
    pub lambda: f64,
    pub omega: f64,
    pub f_slice: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub rows: Vec<SurfaceRow>,
    pub result: ExponentResult,
}

impl Surface {
    /// CSV with header `alpha,mu,lambda,omega,f_slice` and a final `F,...` line.
    /// `omega` and `f_slice` are divided by `unit`.
    pub fn to_csv(&self, unit: f64) -> String {
        let mut out = String::from("alpha,mu,lambda,omega,f_slice\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                sig(r.alpha),
                sig(r.mu),
                sig(r.lambda),
                sig(r.omega / unit),
                sig(r.f_slice / unit)
            );
        }
        let a = self.result.argmax;
        let _ = writeln!(out, "F,{},{},{},{}", sig(self.result.value / unit), sig(a.alpha), sig(a.mu), sig(a.lambda));
        out
    }
}
