//! Optimization on products of probability simplices, plus a golden-section
//! line search used for the one-dimensional tilt parameter.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Settings shared by every multistart projected-gradient run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOptions {
    /// Number of random starting points (structured starts are added on top).
    pub starts: usize,
    pub max_iter: usize,
    /// Stop once the objective improved by less than `tol` over `window` iterations.
    pub tol: f64,
    pub window: usize,
    pub seed: u64,
    /// A run stops as soon as the objective drops to `floor` or below.
    pub floor: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions { starts: 32, max_iter: 4000, tol: 1e-10, window: 50, seed: 0x5eed_0001, floor: f64::NEG_INFINITY }
    }
}

impl OptimizerOptions {
    pub fn with_starts(mut self, starts: usize) -> Self {
        self.starts = starts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Deterministic RNG for stream `stream` under `seed`.
pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Euclidean projection of `v` onto the probability simplex, in place.
pub fn project_simplex(v: &mut [f64]) {
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    // Clean up rounding so the block sums to one exactly enough for logs.
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        for x in v.iter_mut() {
            *x /= total;
        }
    }
}

/// Uniform (flat Dirichlet) sample on the simplex.
pub fn random_simplex_point<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = v.iter().sum();
    for x in &mut v {
        *x /= total;
    }
    v
}

/// A product of simplices laid out as consecutive blocks of one flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplexProduct {
    blocks: Vec<(usize, usize)>,
    dim: usize,
}

impl SimplexProduct {
    pub fn new(block_lens: &[usize]) -> Self {
        let mut blocks = Vec::with_capacity(block_lens.len());
        let mut at = 0;
        for &len in block_lens {
            blocks.push((at, len));
            at += len;
        }
        SimplexProduct { blocks, dim: at }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn project(&self, x: &mut [f64]) {
        for &(s, l) in &self.blocks {
            project_simplex(&mut x[s..s + l]);
        }
    }

}

/// Result of a local or multistart minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Objective with optional gradient output.
pub trait Objective {
    /// Returns `f(x)`; when `grad` is given it receives `∇f(x)`.
    fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64;
}

impl<F: Fn(&[f64], Option<&mut [f64]>) -> f64> Objective for F {
    fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        self(x, grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
/// Projected gradient descent with Barzilai-Borwein steps and Armijo backtracking.
pub fn projected_gradient<O: Objective + ?Sized>(
    f: &O,
    space: &SimplexProduct,
    x: Vec<f64>,
    opts: &OptimizerOptions,
) -> Minimum {
    descend(f, space, x, opts, f64::INFINITY)
}

// Every `ABANDON_AFTER` iterations a start above the incumbent is dropped when it is still
// `ABANDON_GAP` (relative) behind, or cannot close the gap at its current rate.
const ABANDON_AFTER: usize = 100;
const ABANDON_GAP: f64 = 1e-3;

fn descend<O: Objective + ?Sized>(
    f: &O,
    space: &SimplexProduct,
    mut x: Vec<f64>,
    opts: &OptimizerOptions,
    incumbent: f64,
) -> Minimum {
    let n = space.dim();
    space.project(&mut x);
    let mut g = vec![0.0; n];
    let mut fx = f.eval(&x, Some(&mut g));
    sanitize(&mut g);
    let mut history = Vec::with_capacity(opts.max_iter + 1);
    history.push(fx);
    let mut step = 1.0;
    let mut trial = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    if !fx.is_finite() {
        return Minimum { x, value: fx, iterations, converged: fx == f64::NEG_INFINITY };
    }
    while iterations < opts.max_iter {
        iterations += 1;
        let mut accepted = false;
        let mut s = step;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = x[i] - s * g[i];
            }
            space.project(&mut trial);
            let moved: f64 = trial.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if moved < 1e-16 {
                break;
            }
            let decrease = dot(&g, &trial) - dot(&g, &x);
            let ft = f.eval(&trial, None);
            if ft.is_nan() {
                s *= 0.5;
                continue;
            }
            if ft <= fx + 1e-4 * decrease || ft == f64::NEG_INFINITY {
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            converged = true;
            break;
        }
        let ft = f.eval(&trial, Some(&mut g_new));
        sanitize(&mut g_new);
        // Barzilai-Borwein step for the next iteration.
        let mut sy = 0.0;
        let mut ss = 0.0;
        for i in 0..n {
            let dx = trial[i] - x[i];
            ss += dx * dx;
            sy += dx * (g_new[i] - g[i]);
        }
        step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e8) } else { (s * 4.0).min(1e8) };
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        fx = ft;
        history.push(fx);
        if fx <= opts.floor {
            converged = true;
            break;
        }
        if iterations % ABANDON_AFTER == 0 && fx > incumbent {
            let gap = fx - incumbent;
            let rate = (history[history.len() - 1 - ABANDON_AFTER] - fx) / ABANDON_AFTER as f64;
            let left = (opts.max_iter - iterations) as f64;
            if gap > ABANDON_GAP * incumbent.abs().max(1.0) || rate * left < gap {
                converged = true;
                break;
            }
        }
        if !fx.is_finite() {
            converged = fx == f64::NEG_INFINITY;
            break;
        }
        if history.len() > opts.window {
            let past = history[history.len() - 1 - opts.window];
            if past - fx < opts.tol {
                converged = true;
                break;
            }
        }
    }
    Minimum { x, value: fx, iterations, converged }
}

fn sanitize(g: &mut [f64]) {
    for v in g.iter_mut() {
        if v.is_nan() {
            *v = 0.0;
        } else if v.is_infinite() {
            *v = v.signum() * 1e12;
        }
    }
}

/// Runs [`projected_gradient`] from every start; ties go to the lowest start index.
/// Starts that lag far behind the best value so far are abandoned early.
pub fn multistart<O: Objective + ?Sized>(
    f: &O,
    space: &SimplexProduct,
    starts: Vec<Vec<f64>>,
    opts: &OptimizerOptions,
) -> Minimum {
    let mut best: Option<Minimum> = None;
    for x0 in starts {
        let incumbent = best.as_ref().map_or(f64::INFINITY, |b| b.value);
        let m = descend(f, space, x0, opts, incumbent);
        best = match best {
            Some(b) if !(m.value < b.value) => Some(b),
            _ => Some(m),
        };
        if best.as_ref().is_some_and(|b| b.value <= opts.floor) {
            break;
        }
    }
    best.expect("multistart needs at least one start")
}

/// Golden-section maximization of a unimodal `f` on `[lo, hi]`.
/// Returns the best `(t, f(t))` seen, including the endpoints' interior probes.
pub fn golden_section_max(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fd > fc { (d, fd) } else { (c, fc) };
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd > best.1 {
                best = (d, fd);
            }
        }
    }
    best
}

/// `points` values evenly spaced on `[lo, hi]` (both ends included).
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

/// `points` values evenly spaced in log scale on `[lo, hi]`.
pub fn logspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), points).into_iter().map(f64::exp).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn projection_fixes_simplex_points() {
        let mut v = vec![0.2, 0.3, 0.5];
        project_simplex(&mut v);
        assert!((v[0] - 0.2).abs() < 1e-15 && (v[2] - 0.5).abs() < 1e-15);
        let mut v = vec![2.0, 0.0];
        project_simplex(&mut v);
        assert_eq!(v, vec![1.0, 0.0]);
        let mut v = vec![0.0, 0.0, 0.0];
        project_simplex(&mut v);
        assert!(v.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    proptest! {
        #[test]
        fn projection_is_closest_point(v in proptest::collection::vec(-3.0f64..3.0, 2..6), seed in 0u64..1000) {
            let mut p = v.clone();
            project_simplex(&mut p);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            let mut rng = rng_for(seed, 1);
            let d0: f64 = p.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum();
            for _ in 0..20 {
                let q = random_simplex_point(&mut rng, v.len());
                let d: f64 = q.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum();
                prop_assert!(d0 <= d + 1e-12);
            }
        }
    }

    #[test]
    fn pgd_minimizes_quadratic_on_product() {
        let space = SimplexProduct::new(&[3, 2]);
        let target = [0.6, 0.3, 0.1, 1.4, -0.4];
        let f = |x: &[f64], g: Option<&mut [f64]>| {
            if let Some(g) = g {
                for i in 0..5 {
                    g[i] = 2.0 * (x[i] - target[i]);
                }
            }
            x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        };
        let m = projected_gradient(&f, &space, vec![0.2, 0.2, 0.6, 0.5, 0.5], &OptimizerOptions::default());
        assert!(m.converged);
        let want = [0.6, 0.3, 0.1, 1.0, 0.0];
        for (a, b) in m.x.iter().zip(&want) {
            assert!((a - b).abs() < 1e-7, "{:?}", m.x);
        }
    }

    #[test]
    fn multistart_keeps_global_minimum() {
        // Two local minima at the vertices; the second vertex is lower.
        let space = SimplexProduct::new(&[2]);
        let f = |x: &[f64], g: Option<&mut [f64]>| {
            let t = x[1];
            if let Some(g) = g {
                g[0] = 0.0;
                g[1] = -8.0 * (t - 0.45);
            }
            -4.0 * (t - 0.45).powi(2)
        };
        let starts = vec![vec![0.9, 0.1], vec![0.1, 0.9]];
        let m = multistart(&f, &space, starts, &OptimizerOptions::default());
        assert!((m.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden_section_finds_peak() {
        let (t, v) = golden_section_max(|t| -(t - 0.3).powi(2), -1.0, 2.0, 60);
        assert!((t - 0.3).abs() < 1e-6 && v <= 0.0);
    }

    #[test]
    fn grids() {
        assert_eq!(linspace(0.0, 1.0, 5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let l = logspace(1e-4, 100.0, 25);
        assert!((l[0] - 1e-4).abs() < 1e-18 && (l[24] - 100.0).abs() < 1e-9);
    }
}
