//! Wyner's three-source variant: the helper message is shared by two decoders,
//! one reconstructing `Y` and one reconstructing `Z`.
//!
//! The pinned channel is `p_{YZ|X}`. Support functions carry an extra weight `γ`
//! between `H(Y|U)` and `H(Z|U)`. The default [`WynerForm::Consistent`] puts `μ̄`
//! on the information term and `λ` on the rate term, as in the two-source case;
//! [`WynerForm::Strict`] drops both.

use std::fmt;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use crate::bounds::{kappa_with, rho_search, RhoEstimate, RhoOptions};
use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::oracle::{first_max, iid_table, set_partitions, stirling2, BoundReport, OracleMode, CANDIDATE_LIMIT};
use crate::prob::{checksum_of, prune_tensor, JointSource, Pmf};
use crate::region::{check_unit, sandwich_constants, solve_support, solve_tilted_support, AuxChannel, MuGrid, SandwichConstants, SupportValue, MEMBERSHIP_TOL};
use crate::search::{Cell, ExponentOptions, Family, SliceEngine};
use crate::simplex::{linspace, rng_for, OptimizerOptions};
use crate::tilt::{Component, PinnedModel};

/// A joint pmf `p_XYZ`, stored row-major with `z` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSource3 {
    nx: usize,
    ny: usize,
    nz: usize,
    pmf: Vec<f64>,
}

impl JointSource3 {
    /// Builds a source from `t[x][y][z]`; symbols with zero marginal are removed.
    pub fn new(t: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let nx = t.len();
        let ny = t.first().map_or(0, Vec::len);
        let nz = t.first().and_then(|r| r.first()).map_or(0, Vec::len);
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidPmf("empty alphabet".into()));
        }
        if t.iter().any(|r| r.len() != ny || r.iter().any(|c| c.len() != nz)) {
            return Err(Error::Dimension("ragged pmf tensor".into()));
        }
        let flat = Pmf::new(t.into_iter().flatten().flatten().collect())?;
        let p = prune_tensor(flat.probs(), &[nx, ny, nz]);
        Ok(JointSource3 { nx: p.dims[0], ny: p.dims[1], nz: p.dims[2], pmf: p.probs })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    #[inline]
    pub fn p(&self, x: usize, y: usize, z: usize) -> f64 {
        self.pmf[(x * self.ny + y) * self.nz + z]
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn marginal_x(&self) -> Pmf {
        Pmf::from_weights((0..self.nx).map(|x| self.pmf[x * self.ny * self.nz..(x + 1) * self.ny * self.nz].iter().sum()).collect())
    }

    /// The `(X, Y)` marginal source.
    pub fn marginal_xy(&self) -> Result<JointSource> {
        JointSource::new((0..self.nx).map(|x| (0..self.ny).map(|y| (0..self.nz).map(|z| self.p(x, y, z)).sum()).collect()).collect())
    }

    /// The `(X, Z)` marginal source.
    pub fn marginal_xz(&self) -> Result<JointSource> {
        JointSource::new((0..self.nx).map(|x| (0..self.nz).map(|z| (0..self.ny).map(|y| self.p(x, y, z)).sum()).collect()).collect())
    }

    pub fn checksum(&self) -> String {
        checksum_of(&[self.nx, self.ny, self.nz], &self.pmf)
    }
}

impl fmt::Display for JointSource3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {} {}", self.nx, self.ny, self.nz)?;
        for x in 0..self.nx {
            let row: Vec<String> = self.pmf[x * self.ny * self.nz..(x + 1) * self.ny * self.nz].iter().map(|p| format!("{p}")).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Pinned model with output `o = y * nz + z` and components `Y` and `Z`.
pub(crate) fn model3(src: &JointSource3) -> PinnedModel {
    let (nx, ny, nz) = (src.nx, src.ny, src.nz);
    let p_x = src.marginal_x().probs().to_vec();
    let n_out = ny * nz;
    let mut chan = vec![0.0; nx * n_out];
    let mut cy = vec![0.0; nx * ny];
    let mut cz = vec![0.0; nx * nz];
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                let w = src.p(x, y, z) / p_x[x];
                chan[x * n_out + y * nz + z] = w;
                cy[x * ny + y] += w;
                cz[x * nz + z] += w;
            }
        }
    }
    PinnedModel {
        nx,
        p_x,
        n_out,
        chan,
        comps: vec![
            Component { size: ny, of_out: (0..n_out).map(|o| o / nz).collect(), chan: cy },
            Component { size: nz, of_out: (0..n_out).map(|o| o % nz).collect(), chan: cz },
        ],
    }
}

/// Which reading of the three-source weight and slice is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WynerForm {
    /// `μ̄` on the information term and `αλ[μ̄R1 + μ(γ̄R2 + γR3)]` as rate term.
    #[default]
    Consistent,
    /// Information term `α log(q_{X|U}/q_X)` and rate term `α[R1 + μ(γ̄R2 + γR3)]`.
    Strict,
}

impl WynerForm {
    fn family(self) -> Family {
        Family { three: true, strict: self == WynerForm::Strict }
    }
}

/// Tilt parameters `(α, μ, γ, λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltParams3 {
    pub alpha: f64,
    pub mu: f64,
    pub gamma: f64,
    pub lambda: f64,
}

impl TiltParams3 {
    pub fn new(alpha: f64, mu: f64, gamma: f64, lambda: f64) -> Result<Self> {
        check_unit("alpha", alpha)?;
        check_unit("mu", mu)?;
        check_unit("gamma", gamma)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda = {lambda} must be finite and nonnegative")));
        }
        Ok(TiltParams3 { alpha, mu, gamma, lambda })
    }

    fn cell(&self) -> Cell {
        Cell { alpha: self.alpha, mu: self.mu, gamma: self.gamma }
    }
}

/// A rate triple in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint3 {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl RatePoint3 {
    pub fn new(r1: f64, r2: f64, r3: f64) -> Result<Self> {
        if !(r1 >= 0.0 && r2 >= 0.0 && r3 >= 0.0) {
            return Err(Error::Domain(format!("rates must be nonnegative, got ({r1}, {r2}, {r3})")));
        }
        Ok(RatePoint3 { r1, r2, r3 })
    }

    /// `μ̄R1 + μ(γ̄R2 + γR3)`.
    pub fn combine(&self, mu: f64, gamma: f64) -> f64 {
        (1.0 - mu) * self.r1 + mu * ((1.0 - gamma) * self.r2 + gamma * self.r3)
    }

    fn as_vec(&self) -> [f64; 3] {
        [self.r1, self.r2, self.r3]
    }
}

fn weights(mu: f64, gamma: f64) -> [f64; 2] {
    [mu * (1.0 - gamma), mu * gamma]
}

/// `R^(μ,γ)`: the minimum of `μ̄I(X;U) + μ(γ̄H(Y|U) + γH(Z|U))` with `q_X = p_X`.
pub fn support_value3(src: &JointSource3, mu: f64, gamma: f64, opts: &OptimizerOptions) -> Result<SupportValue> {
    check_unit("mu", mu)?;
    check_unit("gamma", gamma)?;
    Ok(solve_support(&model3(src), mu, &weights(mu, gamma), opts))
}

/// `R̃^(α,μ,γ)`: the minimum of `(1+μ)ᾱD(q_X||p_X) + α[μ̄I + μ(γ̄H(Y|U) + γH(Z|U))]`.
pub fn tilted_support_value3(src: &JointSource3, alpha: f64, mu: f64, gamma: f64, opts: &OptimizerOptions) -> Result<SupportValue> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} outside (0,1]")));
    }
    check_unit("mu", mu)?;
    check_unit("gamma", gamma)?;
    Ok(solve_tilted_support(&model3(src), alpha, mu, &weights(mu, gamma), opts))
}

/// `H(Y|U)` and `H(Z|U)` of an auxiliary channel.
pub fn conditional_entropies3(src: &JointSource3, q: &AuxChannel) -> Result<(f64, f64)> {
    if q.nx() != src.nx {
        return Err(Error::Dimension(format!("channel has |X| = {}, source has {}", q.nx(), src.nx)));
    }
    let (_, _, h) = model3(src).info_parts(&q.padded_joint());
    Ok((h[0], h[1]))
}

fn checked_joint(src: &JointSource3, q: &AuxChannel) -> Result<Vec<f64>> {
    if q.nx() != src.nx {
        return Err(Error::Dimension(format!("channel has |X| = {}, source has {}", q.nx(), src.nx)));
    }
    Ok(q.padded_joint())
}

/// `ω(x,y,z|u)` under `form`.
pub fn eval_omega3(src: &JointSource3, q: &AuxChannel, tp: TiltParams3, form: WynerForm, u: usize, x: usize, y: usize, z: usize) -> Result<f64> {
    let j = checked_joint(src, q)?;
    let model = model3(src);
    let o = y * src.nz + z;
    if u >= q.nu() || x >= src.nx || y >= src.ny || z >= src.nz || !model.on_support(&j, u, x, o) {
        return Err(Error::OffSupport { u, x, y });
    }
    let der = model.derive(&j);
    Ok(model.omega(&j, &der, &form.family().coeffs(&tp.cell()), u, x, o))
}

/// `Ω(q) = -log E_q[exp(-λω)]` under `form`.
pub fn omega_objective3(src: &JointSource3, q: &AuxChannel, tp: TiltParams3, form: WynerForm) -> Result<f64> {
    let j = checked_joint(src, q)?;
    Ok(model3(src).omega_objective(&j, &form.family().coeffs(&tp.cell()), tp.lambda))
}

/// `(E[ω], -Var[ω])` under the tilted distribution.
pub fn omega_derivatives3(src: &JointSource3, q: &AuxChannel, tp: TiltParams3, form: WynerForm) -> Result<(f64, f64)> {
    let j = checked_joint(src, q)?;
    let (m, v) = model3(src).tilted_moments(&j, &form.family().coeffs(&tp.cell()), tp.lambda);
    Ok((m, -v))
}

/// Membership in the three-source region, tested on a `(μ, γ)` grid.
pub fn region_membership3(src: &JointSource3, pt: RatePoint3, grid: MuGrid, gamma_points: usize, opts: &OptimizerOptions) -> Result<crate::region::Membership> {
    let model = model3(src);
    let mut worst = (f64::NEG_INFINITY, 0.0);
    for mu in grid.values() {
        for gamma in linspace(0.0, 1.0, gamma_points.max(2)) {
            let v = solve_support(&model, mu, &weights(mu, gamma), opts).value - pt.combine(mu, gamma);
            if v > worst.0 {
                worst = (v, mu);
            }
        }
    }
    Ok(if worst.0 > MEMBERSHIP_TOL {
        crate::region::Membership::Outside { margin: worst.0, mu: worst.1 }
    } else {
        crate::region::Membership::Inside
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRow3 {
    pub mu: f64,
    pub gamma: f64,
    pub value: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve3 {
    pub rows: Vec<BoundaryRow3>,
    pub converged: bool,
}

impl BoundaryCurve3 {
    /// CSV with header `mu,gamma,R_mu_gamma,r1,r2,r3`.
    pub fn to_csv(&self, unit: f64) -> String {
        let mut out = String::from("mu,gamma,R_mu_gamma,r1,r2,r3\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                sig(r.mu),
                sig(r.gamma),
                sig(r.value / unit),
                sig(r.r1 / unit),
                sig(r.r2 / unit),
                sig(r.r3 / unit)
            );
        }
        out
    }
}

/// Tabulates `R^(μ,γ)` with the rate triple of each minimizer.
pub fn trace_boundary3(src: &JointSource3, grid: MuGrid, gamma_points: usize, opts: &OptimizerOptions) -> BoundaryCurve3 {
    let model = model3(src);
    let pairs: Vec<(f64, f64)> =
        grid.values().into_iter().flat_map(|m| linspace(0.0, 1.0, gamma_points.max(2)).into_iter().map(move |g| (m, g))).collect();
    let rows: Vec<(BoundaryRow3, bool)> = pairs
        .par_iter()
        .map(|&(mu, gamma)| {
            let s = solve_support(&model, mu, &weights(mu, gamma), opts);
            let (_, i, h) = model.info_parts(&s.argmin.padded_joint());
            (BoundaryRow3 { mu, gamma, value: s.value, r1: i, r2: h[0], r3: h[1] }, s.converged)
        })
        .collect();
    BoundaryCurve3 { converged: rows.iter().all(|r| r.1), rows: rows.into_iter().map(|r| r.0).collect() }
}

/// Result of the three-source exponent search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent3Result {
    pub value: f64,
    pub argmax: TiltParams3,
    pub converged: bool,
    pub lambda_at_cap: bool,
    pub cells_evaluated: usize,
}

/// Reusable exponent search for one three-source problem.
pub struct ExponentSolver3 {
    engine: SliceEngine,
}

impl ExponentSolver3 {
    pub fn new(src: &JointSource3, opts: ExponentOptions, form: WynerForm) -> Self {
        ExponentSolver3 { engine: SliceEngine::new(model3(src), form.family(), opts) }
    }

    /// Restricts the search to one value of `γ`.
    pub fn with_fixed_gamma(src: &JointSource3, opts: ExponentOptions, form: WynerForm, gamma: f64) -> Result<Self> {
        check_unit("gamma", gamma)?;
        Ok(ExponentSolver3 { engine: SliceEngine::new(model3(src), form.family(), opts).with_gammas(vec![gamma]) })
    }

    pub fn exponent(&self, pt: RatePoint3) -> Exponent3Result {
        let b = self.engine.search(&pt.as_vec());
        Exponent3Result {
            value: b.value,
            argmax: TiltParams3 { alpha: b.cell.alpha, mu: b.cell.mu, gamma: b.cell.gamma, lambda: b.lambda },
            converged: b.converged,
            lambda_at_cap: b.lambda_at_cap,
            cells_evaluated: b.cells_evaluated,
        }
    }
}

pub fn exponent3(src: &JointSource3, pt: RatePoint3, opts: &ExponentOptions, form: WynerForm) -> Exponent3Result {
    ExponentSolver3::new(src, opts.clone(), form).exponent(pt)
}

/// The slice at `tp` for a given inner minimum `Ω(p)`.
pub fn f_slice3_from(omega: f64, tp: TiltParams3, pt: RatePoint3, form: WynerForm) -> f64 {
    let f = form.family();
    let cell = tp.cell();
    f.slice(&cell, tp.lambda, omega, f.rate_combo(&cell, &pt.as_vec()))
}

/// Sandwich constants with `|Y|` replaced by `|Y||Z|`.
pub fn sandwich_constants3(nx: usize, ny: usize, nz: usize) -> Result<SandwichConstants> {
    sandwich_constants(nx, ny * nz)
}

/// `ρ(p_XYZ)` by search over channels and `(α, μ, γ)`.
pub fn rho3(src: &JointSource3, opts: &RhoOptions, form: WynerForm) -> RhoEstimate {
    rho_search(&model3(src), form.family(), opts)
}

/// `κ̃_n`, the three-source shrinkage with `7` in place of `5`.
pub fn kappa3_n(n: u64, eps: f64, delta: f64, rho: f64) -> Result<f64> {
    kappa_with(n, eps, delta, rho, 7.0)
}

/// Blocklength and the three message-set sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeSpec3 {
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    pub m3: usize,
}

impl CodeSpec3 {
    pub fn new(n: usize, m1: usize, m2: usize, m3: usize) -> Result<Self> {
        if n == 0 || m1 == 0 || m2 == 0 || m3 == 0 {
            return Err(Error::Domain("need n and all message sizes >= 1".into()));
        }
        Ok(CodeSpec3 { n, m1, m2, m3 })
    }

    pub fn rates(&self) -> RatePoint3 {
        let n = self.n as f64;
        RatePoint3 { r1: (self.m1 as f64).ln() / n, r2: (self.m2 as f64).ln() / n, r3: (self.m3 as f64).ln() / n }
    }
}

/// Encoders `φ1, φ2, φ3` and decoders `ψ(m1,m2) → y^n`, `φ(m1,m3) → z^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Code3 {
    pub phi1: Vec<usize>,
    pub phi2: Vec<usize>,
    pub phi3: Vec<usize>,
    /// Indexed by `m1 * m2_count + m2`.
    pub psi: Vec<usize>,
    /// Indexed by `m1 * m3_count + m3`.
    pub phi: Vec<usize>,
    pub m: [usize; 3],
}

/// `P(ŷ^n = y^n and ẑ^n = z^n)`.
pub fn correct_probability3(src: &JointSource3, n: usize, code: &Code3) -> Result<f64> {
    let p = iid_table(&src.pmf, &[src.nx, src.ny, src.nz], n)?;
    let (nx, ny, nz) = (src.nx.pow(n as u32), src.ny.pow(n as u32), src.nz.pow(n as u32));
    let [m1, m2, m3] = code.m;
    if code.phi1.len() != nx || code.phi2.len() != ny || code.phi3.len() != nz || code.psi.len() != m1 * m2 || code.phi.len() != m1 * m3 {
        return Err(Error::Dimension("code does not match the source and blocklength".into()));
    }
    let mut pc = 0.0;
    for x in 0..nx {
        let a = code.phi1[x];
        for y in 0..ny {
            if code.psi[a * m2 + code.phi2[y]] != y {
                continue;
            }
            for z in 0..nz {
                if code.phi[a * m3 + code.phi3[z]] == z {
                    pc += p[(x * ny + y) * nz + z];
                }
            }
        }
    }
    Ok(pc)
}

fn classes(phi: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut c = vec![Vec::new(); k];
    for (i, &m) in phi.iter().enumerate() {
        c[m].push(i);
    }
    c
}

/// Best decoders for fixed encoders and the resulting correct-decoding probability.
fn best_decoders(p: &[f64], dims: [usize; 3], phi1: &[usize], phi2: &[usize], phi3: &[usize], m: [usize; 3]) -> (Vec<usize>, Vec<usize>, f64) {
    let [_, ny, nz] = dims;
    let (c2, c3) = (classes(phi2, m[1]), classes(phi3, m[2]));
    let mut psi = vec![0usize; m[0] * m[1]];
    let mut phi = vec![0usize; m[0] * m[2]];
    let mut total = 0.0;
    for a in 0..m[0] {
        let mut t = vec![0.0; ny * nz];
        for (x, &b) in phi1.iter().enumerate() {
            if b == a {
                for (k, v) in t.iter_mut().enumerate() {
                    *v += p[x * ny * nz + k];
                }
            }
        }
        // Enumerate one y per Y-class; each Z-class then picks its best z independently.
        let mut pick = vec![0usize; m[1]];
        let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
        loop {
            let ys: Vec<usize> = (0..m[1]).map(|b| c2[b].get(pick[b]).copied().unwrap_or(0)).collect();
            let mut score = 0.0;
            let mut zs = vec![0usize; m[2]];
            for (c, class) in c3.iter().enumerate() {
                let mut bz = (f64::NEG_INFINITY, 0usize);
                for &z in class {
                    let s: f64 = (0..m[1]).filter(|&b| !c2[b].is_empty()).map(|b| t[ys[b] * nz + z]).sum();
                    if s > bz.0 {
                        bz = (s, z);
                    }
                }
                if bz.0.is_finite() {
                    score += bz.0;
                    zs[c] = bz.1;
                }
            }
            if best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, ys, zs));
            }
            // Odometer over the Y-class choices.
            let mut i = 0;
            while i < m[1] {
                pick[i] += 1;
                if pick[i] < c2[i].len().max(1) {
                    break;
                }
                pick[i] = 0;
                i += 1;
            }
            if i == m[1] {
                break;
            }
        }
        let (score, ys, zs) = best.expect("at least one choice");
        total += score;
        psi[a * m[1]..(a + 1) * m[1]].copy_from_slice(&ys);
        phi[a * m[2]..(a + 1) * m[2]].copy_from_slice(&zs);
    }
    (psi, phi, total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalCode3 {
    pub pc: f64,
    pub code: Code3,
    pub exact: bool,
    pub candidates: f64,
}

/// Maximum joint correct-decoding probability over codes with the given message sets.
pub fn optimal_pc3(src: &JointSource3, spec: CodeSpec3, mode: OracleMode) -> Result<OptimalCode3> {
    let n = spec.n as u32;
    let dims = [src.nx, src.ny, src.nz];
    let sizes = [src.nx.pow(n), src.ny.pow(n), src.nz.pow(n)];
    let p = iid_table(&src.pmf, &dims, spec.n)?;
    let k = [spec.m1.min(sizes[0]), spec.m2.min(sizes[1]), spec.m3.min(sizes[2])];
    let seq_dims = [sizes[0], sizes[1], sizes[2]];
    let build = |phi1: Vec<usize>, phi2: Vec<usize>, phi3: Vec<usize>| {
        let (psi, phi, pc) = best_decoders(&p, seq_dims, &phi1, &phi2, &phi3, k);
        (pc, Code3 { phi1, phi2, phi3, psi, phi, m: k })
    };
    match mode {
        OracleMode::Exhaustive => {
            let candidates = (0..3).map(|i| stirling2(sizes[i], k[i])).product::<f64>();
            if candidates > CANDIDATE_LIMIT {
                return Err(Error::BudgetExceeded { candidates, limit: CANDIDATE_LIMIT });
            }
            let parts: Vec<Vec<Vec<usize>>> = (0..3).map(|i| set_partitions(sizes[i], k[i])).collect();
            let per_phi1: Vec<(usize, f64)> = parts[0]
                .par_iter()
                .map(|phi1| {
                    let inner = parts[1].iter().flat_map(|phi2| parts[2].iter().map(move |phi3| (phi2, phi3)));
                    first_max(inner.enumerate().map(|(i, (phi2, phi3))| (i, best_decoders(&p, seq_dims, phi1, phi2, phi3, k).2)))
                        .expect("at least one partition")
                })
                .collect();
            let (i1, _) = first_max(per_phi1.iter().map(|r| r.1).enumerate()).expect("at least one partition");
            let (j, _) = per_phi1[i1];
            let (i2, i3) = (j / parts[2].len(), j % parts[2].len());
            let (pc, code) = build(parts[0][i1].clone(), parts[1][i2].clone(), parts[2][i3].clone());
            Ok(OptimalCode3 { pc, code, exact: true, candidates })
        }
        OracleMode::Sampled { seed, samples } => {
            let draws: Vec<(f64, Code3)> = (0..samples.max(1))
                .into_par_iter()
                .map(|s| {
                    let mut rng = rng_for(seed, s as u64);
                    let mut draw = |i: usize| (0..sizes[i]).map(|_| rng.gen_range(0..k[i])).collect::<Vec<_>>();
                    let (a, b, c) = (draw(0), draw(1), draw(2));
                    build(a, b, c)
                })
                .collect();
            let (i, pc) = first_max(draws.iter().map(|d| d.0).enumerate()).expect("at least one sample");
            Ok(OptimalCode3 { pc, code: draws[i].1.clone(), exact: false, candidates: samples as f64 })
        }
    }
}

/// Checks `pc_opt ≤ 7 exp(-nF)` with `F` computed at the code's rates.
pub fn verify_theorem6(src: &JointSource3, spec: CodeSpec3, exponent_f: f64, mode: OracleMode) -> Result<BoundReport> {
    let opt = optimal_pc3(src, spec, mode)?;
    Ok(BoundReport::new(spec.n, vec![spec.m1, spec.m2, spec.m3], opt.pc, opt.exact, exponent_f, 7.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::support_value;

    fn src3() -> JointSource3 {
        JointSource3::new(vec![
            vec![vec![0.2, 0.05], vec![0.05, 0.1]],
            vec![vec![0.05, 0.1], vec![0.15, 0.3]],
        ])
        .unwrap()
    }

    fn opts() -> OptimizerOptions {
        OptimizerOptions::default().with_starts(8)
    }

    #[test]
    fn marginals_and_pruning() {
        let s = src3();
        let xy = s.marginal_xy().unwrap();
        assert!((xy.p(1, 1) - 0.45).abs() < 1e-15);
        let xz = s.marginal_xz().unwrap();
        assert!((xz.p(0, 0) - 0.25).abs() < 1e-15);
        let pruned = JointSource3::new(vec![vec![vec![0.5, 0.0]], vec![vec![0.5, 0.0]]]).unwrap();
        assert_eq!((pruned.nx(), pruned.ny(), pruned.nz()), (2, 1, 1));
    }

    #[test]
    fn gamma_endpoints_reduce_to_two_sources() {
        let s = src3();
        for mu in [0.0, 0.4, 1.0] {
            let a = support_value3(&s, mu, 0.0, &opts()).unwrap().value;
            let b = support_value(&s.marginal_xy().unwrap(), mu, &opts()).unwrap().value;
            assert!((a - b).abs() < 1e-8, "gamma=0 mu={mu}: {a} vs {b}");
            let a = support_value3(&s, mu, 1.0, &opts()).unwrap().value;
            let b = support_value(&s.marginal_xz().unwrap(), mu, &opts()).unwrap().value;
            assert!((a - b).abs() < 1e-8, "gamma=1 mu={mu}: {a} vs {b}");
        }
        assert!(support_value3(&s, 0.0, 0.3, &opts()).unwrap().value.abs() < 1e-9);
    }

    #[test]
    fn mean_identity_three_sources() {
        let s = src3();
        let m = model3(&s);
        let mut rng = rng_for(4, 4);
        for form in [WynerForm::Consistent, WynerForm::Strict] {
            for _ in 0..10 {
                let q = AuxChannel::random(&mut rng, 2);
                let cell = Cell { alpha: rng.gen(), mu: rng.gen(), gamma: rng.gen() };
                let c = form.family().coeffs(&cell);
                let j = q.padded_joint();
                assert!((m.mean_omega(&j, &c, None) - m.mean_omega_by_sum(&j, &c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn strict_form_drops_mu_bar() {
        let s = src3();
        let q = AuxChannel::random(&mut rng_for(1, 1), 2);
        let tp = TiltParams3::new(1.0, 0.5, 0.0, 0.3).unwrap();
        let a = eval_omega3(&s, &q, tp, WynerForm::Consistent, 0, 1, 1, 0).unwrap();
        let b = eval_omega3(&s, &q, tp, WynerForm::Strict, 0, 1, 1, 0).unwrap();
        let ratio = (q.q_x_given_u()[0][1] / q.q_x()[1]).ln();
        assert!((b - a - 0.5 * ratio).abs() < 1e-12);
        let pt = RatePoint3::new(1.0, 0.5, 0.25).unwrap();
        let fs = f_slice3_from(0.2, tp, pt, WynerForm::Strict);
        assert!((fs - (0.2 - (1.0 + 0.5 * 0.5)) / 1.45).abs() < 1e-12);
    }

    #[test]
    fn kappa3_example() {
        let k = kappa3_n(100, 0.5, 0.0, 1.0).unwrap();
        assert!((k - 0.826725).abs() < 1e-6, "{k}");
        assert!(k > crate::bounds::kappa_n(100, 0.5, 0.0, 1.0).unwrap());
    }

    #[test]
    fn oracle3_examples() {
        let s = src3();
        let full = optimal_pc3(&s, CodeSpec3::new(1, 2, 2, 2).unwrap(), OracleMode::Exhaustive).unwrap();
        assert!((full.pc - 1.0).abs() < 1e-15);
        let r = verify_theorem6(&s, CodeSpec3::new(1, 2, 2, 2).unwrap(), 0.0, OracleMode::Exhaustive).unwrap();
        assert!(r.pass && (r.bound - 7.0).abs() < 1e-15);

        // Constant decoders: pc is the largest p_YZ(y, z).
        let none = optimal_pc3(&s, CodeSpec3::new(1, 1, 1, 1).unwrap(), OracleMode::Exhaustive).unwrap();
        let mut best = 0.0f64;
        for y in 0..2 {
            for z in 0..2 {
                best = best.max((0..2).map(|x| s.p(x, y, z)).sum());
            }
        }
        assert!((none.pc - best).abs() < 1e-15);

        // With the helper only, each x picks the best (y, z) jointly.
        let helper = optimal_pc3(&s, CodeSpec3::new(1, 2, 1, 1).unwrap(), OracleMode::Exhaustive).unwrap();
        let want: f64 = (0..2).map(|x| (0..4).map(|o| s.p(x, o / 2, o % 2)).fold(0.0, f64::max)).sum();
        assert!((helper.pc - want).abs() < 1e-15);
        assert!((correct_probability3(&s, 1, &helper.code).unwrap() - helper.pc).abs() < 1e-15);
    }

    #[test]
    fn oracle3_matches_brute_force_decoders() {
        let s = src3();
        let spec = CodeSpec3::new(2, 2, 2, 2).unwrap();
        let opt = optimal_pc3(&s, spec, OracleMode::Exhaustive).unwrap();
        assert!((correct_probability3(&s, 2, &opt.code).unwrap() - opt.pc).abs() < 1e-14);
        // Random full codes never beat the optimum.
        let mut rng = rng_for(5, 5);
        for _ in 0..200 {
            let mut d = |len: usize, k: usize| (0..len).map(|_| rng.gen_range(0..k)).collect::<Vec<_>>();
            let code = Code3 { phi1: d(4, 2), phi2: d(4, 2), phi3: d(4, 2), psi: d(4, 4), phi: d(4, 4), m: [2, 2, 2] };
            assert!(correct_probability3(&s, 2, &code).unwrap() <= opt.pc + 1e-15);
        }
    }
}
