//! Branch-and-bound search for the supremum of the slices over the tilt parameters.
//!
//! The inner minimum `Ω(λ)` depends on the cell `(α, μ, γ)` and on `λ` but not on
//! the rate point, so a column of values over the λ grid is computed once per cell
//! and cached. A cell is skipped when an upper bound on its slices, obtained from
//! a feasible anchor channel, cannot beat the best value found so far.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::simplex::{golden_section_max, linspace, logspace, OptimizerOptions};
use crate::tilt::{solve_mean, solve_omega, Coeffs, PinnedModel, Terms};

/// Grid and optimizer settings of the exponent search.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentOptions {
    pub alpha_points: usize,
    pub mu_points: usize,
    /// Only used by the three-source search.
    pub gamma_points: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_points: usize,
    /// Levels of local grid refinement around the best cell.
    pub refine_levels: usize,
    pub golden_iters: usize,
    /// Number of top cells whose best λ bracket is refined by golden section.
    pub golden_cells: usize,
    /// Cells evaluated together before the pruning bound is re-checked.
    pub chunk: usize,
    /// Inner minimization of `Ω(q)` over `q`.
    pub inner: OptimizerOptions,
    /// Pinned minimizations giving the anchor channels.
    pub anchor: OptimizerOptions,
}

impl Default for ExponentOptions {
    fn default() -> Self {
        ExponentOptions {
            alpha_points: 33,
            mu_points: 33,
            gamma_points: 17,
            lambda_min: 1e-4,
            lambda_max: 100.0,
            lambda_points: 25,
            refine_levels: 2,
            golden_iters: 24,
            golden_cells: 3,
            chunk: 8,
            inner: OptimizerOptions::default().with_starts(6),
            anchor: OptimizerOptions::default().with_starts(8),
        }
    }
}

impl ExponentOptions {
    /// Smaller grids for quick runs and tests.
    pub fn coarse() -> Self {
        ExponentOptions {
            alpha_points: 17,
            mu_points: 17,
            gamma_points: 9,
            lambda_points: 19,
            refine_levels: 1,
            golden_iters: 20,
            golden_cells: 2,
            inner: OptimizerOptions::default().with_starts(4),
            anchor: OptimizerOptions::default().with_starts(6),
            ..Default::default()
        }
    }

    pub(crate) fn lambdas(&self) -> Vec<f64> {
        logspace(self.lambda_min, self.lambda_max, self.lambda_points)
    }
}

/// A point `(α, μ, γ)` of the tilt-parameter grid; `γ = 0` for two sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Cell {
    pub alpha: f64,
    pub mu: f64,
    pub gamma: f64,
}

impl Cell {
    fn key(&self) -> [u64; 3] {
        [self.alpha.to_bits(), self.mu.to_bits(), self.gamma.to_bits()]
    }
}

/// Which slice family is searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Family {
    pub three: bool,
    /// Evaluate the three-source formulas exactly as printed: no `μ̄` on the
    /// information term and no `λ` on the rate term.
    pub strict: bool,
}

impl Family {
    pub const TWO: Family = Family { three: false, strict: false };

    pub fn weights(&self, mu: f64, gamma: f64) -> Vec<f64> {
        if self.three {
            vec![mu * (1.0 - gamma), mu * gamma]
        } else {
            vec![mu]
        }
    }

    pub fn coeffs(&self, cell: &Cell) -> Coeffs {
        let mut c = Coeffs::tilted(cell.alpha, cell.mu, &self.weights(cell.mu, cell.gamma));
        if self.strict {
            c.i = cell.alpha;
        }
        c
    }

    /// The rate combination multiplying `α` in the numerator.
    pub fn rate_combo(&self, cell: &Cell, rates: &[f64]) -> f64 {
        let lead = if self.strict { rates[0] } else { (1.0 - cell.mu) * rates[0] };
        lead + self.weights(cell.mu, cell.gamma).iter().zip(&rates[1..]).map(|(w, r)| w * r).sum::<f64>()
    }

    pub fn slice(&self, cell: &Cell, lambda: f64, omega: f64, combo: f64) -> f64 {
        let rate = if self.strict { cell.alpha * combo } else { cell.alpha * lambda * combo };
        (omega - rate) / (1.0 + lambda * (1.0 + cell.mu))
    }
}

/// Inner minima over the λ grid for one cell.
pub(crate) struct Column {
    pub omega: Vec<f64>,
    pub argmin: Vec<Vec<f64>>,
    pub converged: bool,
}

/// The best slice found by a search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Best {
    /// `max(0, best slice)`.
    pub value: f64,
    pub cell: Cell,
    /// `0` when no slice was positive, i.e. the value is the `λ → 0` limit.
    pub lambda: f64,
    pub converged: bool,
    pub lambda_at_cap: bool,
    pub cells_evaluated: usize,
}

// Bounds within this distance of the incumbent are pruned.
const PRUNE_SLACK: f64 = 1e-10;
// Runs stop once Ω drops below this; such slices are negative and never win.
const OMEGA_FLOOR: f64 = -1e-6;

pub(crate) struct SliceEngine {
    model: PinnedModel,
    family: Family,
    opts: ExponentOptions,
    alphas: Vec<f64>,
    mus: Vec<f64>,
    gammas: Vec<f64>,
    lambdas: Vec<f64>,
    /// Pinned minimizers indexed by `mu_index * gammas.len() + gamma_index`.
    anchors: Vec<Vec<f64>>,
    anchor_terms: Vec<Terms>,
    columns: Mutex<HashMap<[u64; 3], Arc<Column>>>,
}

impl SliceEngine {
    pub fn new(model: PinnedModel, family: Family, opts: ExponentOptions) -> Self {
        let gammas = if family.three { linspace(0.0, 1.0, opts.gamma_points.max(2)) } else { vec![0.0] };
        Self::with_gamma_grid(model, family, opts, gammas)
    }

    /// Rebuilds the engine with the γ axis replaced by `gammas`.
    pub fn with_gammas(self, gammas: Vec<f64>) -> Self {
        Self::with_gamma_grid(self.model, self.family, self.opts, gammas)
    }

    fn with_gamma_grid(model: PinnedModel, family: Family, opts: ExponentOptions, gammas: Vec<f64>) -> Self {
        let alphas = linspace(0.0, 1.0, opts.alpha_points.max(2));
        let mus = linspace(0.0, 1.0, opts.mu_points.max(2));
        let lambdas = opts.lambdas();
        let pairs: Vec<(f64, f64)> = mus.iter().flat_map(|&m| gammas.iter().map(move |&g| (m, g))).collect();
        let anchors = pairs
            .par_iter()
            .map(|&(mu, gamma)| {
                let c = family.coeffs(&Cell { alpha: 1.0, mu, gamma });
                solve_mean(&model, &c, true, &opts.anchor, &[]).joint
            })
            .collect::<Vec<Vec<f64>>>();
        let anchor_terms = anchors.iter().map(|j| model.terms(j)).collect();
        SliceEngine {
            model,
            family,
            opts,
            alphas,
            mus,
            gammas,
            lambdas,
            anchors,
            anchor_terms,
            columns: Mutex::new(HashMap::new()),
        }
    }

    /// Every grid cell, `α = 0` included, in `(α, μ, γ)` index order.
    pub fn all_cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &alpha in &self.alphas {
            for &mu in &self.mus {
                for &gamma in &self.gammas {
                    cells.push(Cell { alpha, mu, gamma });
                }
            }
        }
        cells
    }

    fn nearest(grid: &[f64], v: f64) -> usize {
        let mut k = 0;
        for (i, g) in grid.iter().enumerate() {
            if (g - v).abs() < (grid[k] - v).abs() {
                k = i;
            }
        }
        k
    }

    fn anchor_ids(&self, cell: &Cell) -> Vec<usize> {
        let m = Self::nearest(&self.mus, cell.mu);
        let g = Self::nearest(&self.gammas, cell.gamma);
        let ng = self.gammas.len();
        let lo = m.saturating_sub(1);
        let hi = (m + 1).min(self.mus.len() - 1);
        let mut ids = vec![m * ng + g];
        ids.extend((lo..=hi).filter(|&i| i != m).map(|i| i * ng + g));
        ids
    }

    fn anchors_for(&self, cell: &Cell) -> Vec<&Vec<f64>> {
        self.anchor_ids(cell).into_iter().map(|i| &self.anchors[i]).collect()
    }

    pub fn column(&self, cell: &Cell) -> Arc<Column> {
        if let Some(c) = self.columns.lock().expect("column cache").get(&cell.key()) {
            return Arc::clone(c);
        }
        let col = Arc::new(self.compute_column(cell));
        self.columns.lock().expect("column cache").entry(cell.key()).or_insert_with(|| Arc::clone(&col));
        col
    }

    fn inner_opts(&self) -> OptimizerOptions {
        OptimizerOptions { floor: OMEGA_FLOOR, ..self.opts.inner.clone() }
    }

    fn compute_column(&self, cell: &Cell) -> Column {
        let c = self.family.coeffs(cell);
        let anchors: Vec<Vec<f64>> = self.anchors_for(cell).into_iter().cloned().collect();
        let opts = self.inner_opts();
        let mut omega = Vec::with_capacity(self.lambdas.len());
        let mut argmin: Vec<Vec<f64>> = Vec::with_capacity(self.lambdas.len());
        let mut converged = true;
        // (λ, Ω) of the first value below the floor.
        let mut below: Option<(f64, f64)> = None;
        for &lambda in &self.lambdas {
            if let Some((l0, om0)) = below {
                // Ω is concave with Ω(0) = 0, so Ω(λ) ≤ (λ/λ0) Ω(λ0) < 0 from here on.
                omega.push(om0 * lambda / l0);
                argmin.push(argmin.last().cloned().unwrap_or_default());
                continue;
            }
            let mut warm = anchors.clone();
            if let Some(prev) = argmin.last() {
                warm.insert(0, prev.clone());
            }
            let s = solve_omega(&self.model, &c, lambda, &opts, &warm);
            converged &= s.converged;
            if s.value <= OMEGA_FLOOR {
                below = Some((lambda, s.value));
            }
            omega.push(s.value);
            argmin.push(s.joint);
        }
        Column { omega, argmin, converged }
    }

    /// Upper bound on every slice of `cell`, from `Ω(p) ≤ Ω(q)` at the anchors.
    fn bound(&self, cell: &Cell, combo: f64) -> f64 {
        let c = self.family.coeffs(cell).as_vec();
        let terms: Vec<(&Terms, Vec<f64>)> = self
            .anchor_ids(cell)
            .into_iter()
            .map(|i| {
                let t = &self.anchor_terms[i];
                (t, t.omegas(&c))
            })
            .collect();
        let f = |lambda: f64| {
            let om = terms.iter().map(|(t, w)| t.objective(w, lambda)).fold(f64::INFINITY, f64::min);
            self.family.slice(cell, lambda, om, combo)
        };
        let vals: Vec<f64> = self.lambdas.iter().map(|&l| f(l)).collect();
        let k = argmax(&vals);
        let (lo, hi) = self.bracket(k);
        let (_, g) = golden_section_max(|t| f(t.exp()), lo, hi, self.opts.golden_iters);
        vals[k].max(g)
    }

    /// Log-λ bracket around grid index `k`.
    fn bracket(&self, k: usize) -> (f64, f64) {
        let n = self.lambdas.len();
        (self.lambdas[k.saturating_sub(1)].ln(), self.lambdas[(k + 1).min(n - 1)].ln())
    }

    fn slices(&self, cell: &Cell, col: &Column, combo: f64) -> Vec<f64> {
        self.lambdas.iter().zip(&col.omega).map(|(&l, &om)| self.family.slice(cell, l, om, combo)).collect()
    }

    /// Best grid slice of `cell`: `(value, λ index)`.
    fn grid_best(&self, cell: &Cell, combo: f64) -> (f64, usize) {
        let col = self.column(cell);
        let s = self.slices(cell, &col, combo);
        let k = argmax(&s);
        (s[k], k)
    }

    /// Golden-section refinement of λ around the grid maxima of `cell`.
    /// Returns `(value, λ, converged)`.
    fn golden(&self, cell: &Cell, combo: f64) -> (f64, f64, bool) {
        let col = self.column(cell);
        let s = self.slices(cell, &col, combo);
        let c = self.family.coeffs(cell);
        let opts = self.inner_opts();
        let mut best = (f64::NEG_INFINITY, 0.0, col.converged);
        for k in local_maxima(&s).into_iter().take(2) {
            let (lo, hi) = self.bracket(k);
            let mut warm: Vec<Vec<f64>> = Vec::new();
            for i in [k, k.saturating_sub(1), (k + 1).min(s.len() - 1)] {
                if col.omega[i] > OMEGA_FLOOR {
                    warm.push(col.argmin[i].clone());
                }
            }
            warm.extend(self.anchors_for(cell).into_iter().cloned());
            let mut ok = true;
            let (t, v) = golden_section_max(
                |t| {
                    let lambda = t.exp();
                    let m = solve_omega(&self.model, &c, lambda, &opts, &warm);
                    ok &= m.converged;
                    self.family.slice(cell, lambda, m.value, combo)
                },
                lo,
                hi,
                self.opts.golden_iters,
            );
            if s[k] > best.0 {
                best = (s[k], self.lambdas[k], col.converged);
            }
            if v > best.0 {
                best = (v, t.exp(), col.converged && ok);
            }
        }
        best
    }

    fn neighbours(&self, cell: &Cell, level: usize) -> Vec<Cell> {
        let scale = 0.5f64.powi(level as i32);
        let da = scale / (self.alphas.len() - 1) as f64;
        let dm = scale / (self.mus.len() - 1) as f64;
        let free_gamma = self.gammas.len() > 1;
        let dg = if free_gamma { scale / (self.gammas.len() - 1) as f64 } else { 0.0 };
        let steps = [-1.0, 0.0, 1.0];
        let mut out = Vec::new();
        for &sa in &steps {
            for &sm in &steps {
                for &sg in if free_gamma { &steps[..] } else { &steps[1..2] } {
                    if sa == 0.0 && sm == 0.0 && sg == 0.0 {
                        continue;
                    }
                    let c = Cell { alpha: cell.alpha + sa * da, mu: cell.mu + sm * dm, gamma: cell.gamma + sg * dg };
                    let inside = |v: f64| (0.0..=1.0).contains(&v);
                    if c.alpha > 0.0 && c.alpha <= 1.0 && inside(c.mu) && inside(c.gamma) {
                        out.push(c);
                    }
                }
            }
        }
        out
    }

    /// Sup of the slices at the rate vector `rates` over the search set.
    pub fn search(&self, rates: &[f64]) -> Best {
        let cells: Vec<Cell> = self.all_cells().into_iter().filter(|c| c.alpha > 0.0).collect();
        let combo = |c: &Cell| self.family.rate_combo(c, rates);
        let bounds: Vec<f64> = cells.par_iter().map(|c| self.bound(c, combo(c))).collect();
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by(|&a, &b| bounds[b].total_cmp(&bounds[a]).then(a.cmp(&b)));

        let mut best = Best {
            value: 0.0,
            cell: cells[order[0]],
            lambda: 0.0,
            converged: true,
            lambda_at_cap: false,
            cells_evaluated: 0,
        };
        // (grid value, cell) of every evaluated cell, in evaluation order.
        let mut evaluated: Vec<(f64, Cell)> = Vec::new();
        let chunk = self.opts.chunk.max(1);
        let mut pos = 0;
        while pos < order.len() && bounds[order[pos]] > best.value + PRUNE_SLACK {
            let batch: Vec<Cell> = order[pos..(pos + chunk).min(order.len())]
                .iter()
                .filter(|&&i| bounds[i] > best.value + PRUNE_SLACK)
                .map(|&i| cells[i])
                .collect();
            pos += chunk;
            self.evaluate(&batch, rates, &mut best, &mut evaluated);
        }

        if !evaluated.is_empty() {
            for level in 1..=self.opts.refine_levels {
                let around = best_cell(&evaluated);
                let batch: Vec<Cell> = self
                    .neighbours(&around, level)
                    .into_iter()
                    .filter(|c| !evaluated.iter().any(|e| e.1 == *c))
                    .collect();
                let nb: Vec<f64> = batch.par_iter().map(|c| self.bound(c, combo(c))).collect();
                let batch: Vec<Cell> =
                    batch.into_iter().zip(nb).filter(|(_, b)| *b > best.value + PRUNE_SLACK).map(|(c, _)| c).collect();
                self.evaluate(&batch, rates, &mut best, &mut evaluated);
            }

            let mut ranked = evaluated.clone();
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
            let top: Vec<Cell> = ranked.iter().take(self.opts.golden_cells).map(|e| e.1).collect();
            let refined: Vec<(f64, f64, bool)> = top.par_iter().map(|c| self.golden(c, combo(c))).collect();
            for (cell, (v, lambda, ok)) in top.iter().zip(refined) {
                if v > best.value {
                    best.value = v;
                    best.cell = *cell;
                    best.lambda = lambda;
                    best.converged = ok;
                }
            }
        }
        best.cells_evaluated = evaluated.len();
        best.lambda_at_cap = best.lambda >= self.opts.lambda_max * (1.0 - 1e-9);
        best
    }

    fn evaluate(&self, batch: &[Cell], rates: &[f64], best: &mut Best, evaluated: &mut Vec<(f64, Cell)>) {
        let results: Vec<(f64, usize)> =
            batch.par_iter().map(|c| self.grid_best(c, self.family.rate_combo(c, rates))).collect();
        for (cell, (v, k)) in batch.iter().zip(results) {
            evaluated.push((v, *cell));
            if v > best.value {
                best.value = v;
                best.cell = *cell;
                best.lambda = self.lambdas[k];
                best.converged = self.column(cell).converged;
            }
        }
    }

    /// `(cell, λ, Ω, slice)` over the full grid, without pruning.
    pub fn surface(&self, rates: &[f64]) -> Vec<(Cell, f64, f64, f64)> {
        let cells = self.all_cells();
        let cols: Vec<Arc<Column>> = cells.par_iter().map(|c| self.column(c)).collect();
        let mut rows = Vec::with_capacity(cells.len() * self.lambdas.len());
        for (cell, col) in cells.iter().zip(cols) {
            let combo = self.family.rate_combo(cell, rates);
            for (k, &lambda) in self.lambdas.iter().enumerate() {
                let om = col.omega[k];
                rows.push((*cell, lambda, om, self.family.slice(cell, lambda, om, combo)));
            }
        }
        rows
    }
}

/// First index of the maximum.
fn argmax(v: &[f64]) -> usize {
    let mut k = 0;
    for i in 1..v.len() {
        if v[i] > v[k] {
            k = i;
        }
    }
    k
}

/// Indices of local maxima, highest first.
fn local_maxima(v: &[f64]) -> Vec<usize> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n)
        .filter(|&i| (i == 0 || v[i] >= v[i - 1]) && (i + 1 == n || v[i] > v[i + 1]) && v[i].is_finite())
        .collect();
    if idx.is_empty() {
        idx.push(argmax(v));
    }
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx
}

fn best_cell(evaluated: &[(f64, Cell)]) -> Cell {
    let mut b = evaluated[0];
    for e in &evaluated[1..] {
        if e.0 > b.0 {
            b = *e;
        }
    }
    b.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_maxima_ranks_peaks() {
        let v = [0.0, 2.0, 1.0, 3.0, 0.5];
        assert_eq!(local_maxima(&v), vec![3, 1]);
        assert_eq!(local_maxima(&[1.0, 1.0, 1.0]), vec![2]);
    }

    #[test]
    fn family_rate_terms() {
        let cell = Cell { alpha: 0.5, mu: 0.4, gamma: 0.25 };
        let two = Family::TWO;
        assert!((two.rate_combo(&cell, &[1.0, 2.0]) - (0.6 + 0.8)).abs() < 1e-15);
        let three = Family { three: true, strict: false };
        let want = 0.6 * 1.0 + 0.4 * 0.75 * 2.0 + 0.4 * 0.25 * 3.0;
        assert!((three.rate_combo(&cell, &[1.0, 2.0, 3.0]) - want).abs() < 1e-15);
        let strict = Family { three: true, strict: true };
        assert!((strict.rate_combo(&cell, &[1.0, 2.0, 3.0]) - (want + 0.4)).abs() < 1e-15);
        assert_eq!(strict.coeffs(&cell).i, 0.5);
        // λ drops out of the strict rate term.
        let s = strict.slice(&cell, 2.0, 1.0, 1.0);
        assert!((s - (1.0 - 0.5) / (1.0 + 2.0 * 1.4)).abs() < 1e-15);
    }
}
