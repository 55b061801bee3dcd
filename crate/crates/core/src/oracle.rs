//! Brute-force optimal codes at tiny blocklengths.
//!
//! Sequences are indexed in base `|X|` (or `|Y|`) with the first symbol most
//! significant. Encoders are enumerated as set partitions of the sequence set,
//! since the correct-decoding probability does not depend on message labels.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::prob::JointSource;
use crate::simplex::rng_for;

/// Enumeration budget on candidate encoder pairs.
pub const CANDIDATE_LIMIT: f64 = 1e8;
/// Largest i.i.d. table `|X|^n |Y|^n` that is materialized.
pub const TABLE_LIMIT: usize = 10_000_000;

/// Blocklength and message-set sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeSpec {
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
}

impl CodeSpec {
    pub fn new(n: usize, m1: usize, m2: usize) -> Result<Self> {
        if n == 0 || m1 == 0 || m2 == 0 {
            return Err(Error::Domain(format!("need n, m1, m2 >= 1, got ({n}, {m1}, {m2})")));
        }
        Ok(CodeSpec { n, m1, m2 })
    }

    /// Rates `(1/n) log m_i` in nats.
    pub fn rates(&self) -> (f64, f64) {
        let n = self.n as f64;
        ((self.m1 as f64).ln() / n, (self.m2 as f64).ln() / n)
    }
}

/// Encoders `φ1, φ2` and decoder `ψ(m1, m2)`, stored at index `m1 * m2_count + m2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeTriple {
    pub phi1: Vec<usize>,
    pub phi2: Vec<usize>,
    pub psi: Vec<usize>,
    pub m1: usize,
    pub m2: usize,
}

/// `p^n(x^n, y^n)` as a dense `|X|^n x |Y|^n` table.
pub(crate) fn iid_table(pmf: &[f64], dims: &[usize], n: usize) -> Result<Vec<f64>> {
    let sizes: Vec<usize> = dims.iter().map(|d| d.pow(n as u32)).collect();
    let total: usize = sizes.iter().product();
    if total > TABLE_LIMIT {
        return Err(Error::BudgetExceeded { candidates: total as f64, limit: TABLE_LIMIT as f64 });
    }
    let strides: Vec<usize> = (0..dims.len()).map(|a| dims[a + 1..].iter().product()).collect();
    let mut out = vec![0.0; total];
    let mut digits = vec![vec![0usize; n]; dims.len()];
    for (flat, slot) in out.iter_mut().enumerate() {
        // Split the flat index into one sequence index per variable.
        let mut rest = flat;
        for a in (0..dims.len()).rev() {
            let mut s = rest % sizes[a];
            rest /= sizes[a];
            for t in (0..n).rev() {
                digits[a][t] = s % dims[a];
                s /= dims[a];
            }
        }
        let mut p = 1.0;
        for t in 0..n {
            let idx: usize = (0..dims.len()).map(|a| digits[a][t] * strides[a]).sum();
            p *= pmf[idx];
        }
        *slot = p;
    }
    Ok(out)
}

fn seq_count(base: usize, n: usize) -> Result<usize> {
    base.checked_pow(n as u32).ok_or_else(|| Error::Domain("sequence space too large".into()))
}

/// `Σ P(x^n, y^n) 1{ψ(φ1(x^n), φ2(y^n)) = y^n}`.
pub fn correct_probability(src: &JointSource, n: usize, code: &CodeTriple) -> Result<f64> {
    let (nx, ny) = (seq_count(src.nx(), n)?, seq_count(src.ny(), n)?);
    if code.phi1.len() != nx || code.phi2.len() != ny || code.psi.len() != code.m1 * code.m2 {
        return Err(Error::Dimension("code does not match the source and blocklength".into()));
    }
    if code.phi1.iter().any(|&m| m >= code.m1) || code.phi2.iter().any(|&m| m >= code.m2) || code.psi.iter().any(|&y| y >= ny) {
        return Err(Error::Dimension("code value out of range".into()));
    }
    let p = iid_table(src.pmf(), &[src.nx(), src.ny()], n)?;
    let mut pc = 0.0;
    for x in 0..nx {
        for y in 0..ny {
            if code.psi[code.phi1[x] * code.m2 + code.phi2[y]] == y {
                pc += p[x * ny + y];
            }
        }
    }
    Ok(pc)
}

/// `A[a][y] = Σ_{x: φ1(x) = a} P(x, y)`.
fn class_sums(p: &[f64], ny: usize, phi1: &[usize], m1: usize) -> Vec<f64> {
    let mut a = vec![0.0; m1 * ny];
    for (x, &m) in phi1.iter().enumerate() {
        for y in 0..ny {
            a[m * ny + y] += p[x * ny + y];
        }
    }
    a
}

/// Per-cell MAP decoder and its correct-decoding probability.
fn map_decode(a: &[f64], ny: usize, m1: usize, phi2: &[usize], m2: usize) -> (Vec<usize>, f64) {
    let mut psi = vec![0usize; m1 * m2];
    let mut best = vec![f64::NEG_INFINITY; m1 * m2];
    for r in 0..m1 {
        for y in 0..ny {
            let cell = r * m2 + phi2[y];
            if a[r * ny + y] > best[cell] {
                best[cell] = a[r * ny + y];
                psi[cell] = y;
            }
        }
    }
    (psi, best.iter().filter(|v| v.is_finite()).sum())
}

/// The decoder maximizing the correct-decoding probability for fixed encoders.
pub fn optimal_decoder(src: &JointSource, n: usize, phi1: &[usize], m1: usize, phi2: &[usize], m2: usize) -> Result<Vec<usize>> {
    let (nx, ny) = (seq_count(src.nx(), n)?, seq_count(src.ny(), n)?);
    if phi1.len() != nx || phi2.len() != ny {
        return Err(Error::Dimension("encoder domains do not match the blocklength".into()));
    }
    let p = iid_table(src.pmf(), &[src.nx(), src.ny()], n)?;
    Ok(map_decode(&class_sums(&p, ny, phi1, m1), ny, m1, phi2, m2).0)
}

/// Set partitions of `{0..len}` into exactly `blocks` blocks, as restricted growth strings.
pub fn set_partitions(len: usize, blocks: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if blocks == 0 || blocks > len {
        return out;
    }
    let mut s = vec![0usize; len];
    fn rec(s: &mut Vec<usize>, i: usize, used: usize, blocks: usize, out: &mut Vec<Vec<usize>>) {
        let len = s.len();
        if i == len {
            if used == blocks {
                out.push(s.clone());
            }
            return;
        }
        // Not enough positions left to open the missing blocks.
        if blocks - used > len - i {
            return;
        }
        for v in 0..=used.min(blocks - 1) {
            s[i] = v;
            rec(s, i + 1, used.max(v + 1), blocks, out);
        }
    }
    s[0] = 0;
    rec(&mut s, 1, 1, blocks, &mut out);
    out
}

/// Stirling number of the second kind as a float.
pub fn stirling2(n: usize, k: usize) -> f64 {
    let mut row = vec![0.0f64; k + 1];
    row[0] = 1.0;
    for i in 1..=n {
        for j in (1..=k.min(i)).rev() {
            row[j] = j as f64 * row[j] + row[j - 1];
        }
        row[0] = 0.0;
    }
    row[k]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    Exhaustive,
    /// Best of `samples` seeded random labeled encoder pairs; a lower bound on the optimum.
    Sampled { seed: u64, samples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalCode {
    pub pc: f64,
    pub code: CodeTriple,
    /// False for sampled mode.
    pub exact: bool,
    pub candidates: f64,
}

impl OptimalCode {
    /// `G^(n) = -(1/n) log P_c`.
    pub fn g_n(&self, n: usize) -> f64 {
        -self.pc.ln() / n as f64
    }
}

/// Best `(index, value)`; the first index wins ties.
pub(crate) fn first_max(values: impl IntoIterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values {
        if best.is_none_or(|b| v > b.1) {
            best = Some((i, v));
        }
    }
    best
}

/// Maximum correct-decoding probability over codes with the given message sets.
pub fn optimal_pc(src: &JointSource, spec: CodeSpec, mode: OracleMode) -> Result<OptimalCode> {
    let (nx, ny) = (seq_count(src.nx(), spec.n)?, seq_count(src.ny(), spec.n)?);
    let (k1, k2) = (spec.m1.min(nx), spec.m2.min(ny));
    let p = iid_table(src.pmf(), &[src.nx(), src.ny()], spec.n)?;
    match mode {
        OracleMode::Exhaustive => {
            let candidates = stirling2(nx, k1) * stirling2(ny, k2);
            if candidates > CANDIDATE_LIMIT {
                return Err(Error::BudgetExceeded { candidates, limit: CANDIDATE_LIMIT });
            }
            let phi1s = set_partitions(nx, k1);
            let phi2s = set_partitions(ny, k2);
            let per_phi1: Vec<(usize, f64)> = phi1s
                .par_iter()
                .map(|phi1| {
                    let a = class_sums(&p, ny, phi1, k1);
                    first_max(phi2s.iter().enumerate().map(|(i, phi2)| (i, map_decode(&a, ny, k1, phi2, k2).1)))
                        .expect("at least one partition")
                })
                .collect();
            let (i1, _) = first_max(per_phi1.iter().map(|p| p.1).enumerate()).expect("at least one partition");
            let (i2, pc) = per_phi1[i1];
            let (phi1, phi2) = (phi1s[i1].clone(), phi2s[i2].clone());
            let psi = map_decode(&class_sums(&p, ny, &phi1, k1), ny, k1, &phi2, k2).0;
            Ok(OptimalCode { pc, code: CodeTriple { phi1, phi2, psi, m1: k1, m2: k2 }, exact: true, candidates })
        }
        OracleMode::Sampled { seed, samples } => {
            let draws: Vec<(f64, CodeTriple)> = (0..samples.max(1))
                .into_par_iter()
                .map(|s| {
                    let mut rng = rng_for(seed, s as u64);
                    let phi1: Vec<usize> = (0..nx).map(|_| rng.gen_range(0..k1)).collect();
                    let phi2: Vec<usize> = (0..ny).map(|_| rng.gen_range(0..k2)).collect();
                    let (psi, pc) = map_decode(&class_sums(&p, ny, &phi1, k1), ny, k1, &phi2, k2);
                    (pc, CodeTriple { phi1, phi2, psi, m1: k1, m2: k2 })
                })
                .collect();
            let (i, pc) = first_max(draws.iter().map(|d| d.0).enumerate()).expect("at least one sample");
            Ok(OptimalCode { pc, code: draws[i].1.clone(), exact: false, candidates: samples as f64 })
        }
    }
}

/// Comparison of the optimal correct-decoding probability with `c exp(-nF)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub n: usize,
    /// Message-set sizes, one per encoder.
    pub m: Vec<usize>,
    /// Rates `(1/n) log m_i` in nats.
    pub rates: Vec<f64>,
    pub pc_opt: f64,
    pub exact: bool,
    pub f: f64,
    pub constant: f64,
    pub bound: f64,
    pub pass: bool,
}

impl BoundReport {
    pub(crate) fn new(n: usize, m: Vec<usize>, pc_opt: f64, exact: bool, f: f64, constant: f64) -> Self {
        let rates = m.iter().map(|&k| (k as f64).ln() / n as f64).collect();
        let bound = constant * (-(n as f64) * f).exp();
        BoundReport { n, m, rates, pc_opt, exact, f, constant, bound, pass: pc_opt <= bound + 1e-12 }
    }

    pub fn verdict(&self) -> &'static str {
        if self.pass {
            "pass"
        } else {
            "FAIL"
        }
    }

    fn columns(&self, unit: f64) -> Vec<(String, String)> {
        let mut cols = vec![("n".to_string(), self.n.to_string())];
        for (i, m) in self.m.iter().enumerate() {
            cols.push((format!("m{}", i + 1), m.to_string()));
        }
        for (i, r) in self.rates.iter().enumerate() {
            cols.push((format!("R{}", i + 1), sig(r / unit)));
        }
        cols.push(("pc_opt".into(), sig(self.pc_opt)));
        cols.push(("F".into(), sig(self.f / unit)));
        cols.push(("bound".into(), sig(self.bound)));
        cols.push(("verdict".into(), self.verdict().into()));
        cols
    }

    /// `key: value` lines; rates and `F` are divided by `unit`.
    pub fn to_text(&self, unit: f64) -> String {
        let mut out = String::new();
        for (k, v) in self.columns(unit) {
            let _ = writeln!(out, "{k}: {v}");
        }
        if !self.exact {
            out.push_str("note: pc_opt is a sampled lower bound\n");
        }
        out
    }

    pub fn to_csv(&self, unit: f64) -> String {
        let cols = self.columns(unit);
        let head: Vec<&str> = cols.iter().map(|c| c.0.as_str()).collect();
        let vals: Vec<&str> = cols.iter().map(|c| c.1.as_str()).collect();
        format!("{}\n{}\n", head.join(","), vals.join(","))
    }
}

/// Checks `pc_opt ≤ 5 exp(-nF)` with `F` computed at the code's rates.
pub fn verify_theorem3(src: &JointSource, spec: CodeSpec, exponent_f: f64, mode: OracleMode) -> Result<BoundReport> {
    let opt = optimal_pc(src, spec, mode)?;
    Ok(BoundReport::new(spec.n, vec![spec.m1, spec.m2], opt.pc, opt.exact, exponent_f, 5.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Pmf;

    fn dsbs01() -> JointSource {
        JointSource::dsbs(0.1).unwrap()
    }

    #[test]
    fn partitions_count_matches_stirling() {
        for n in 1..=7 {
            for k in 1..=n {
                assert_eq!(set_partitions(n, k).len() as f64, stirling2(n, k), "S({n},{k})");
            }
        }
        assert_eq!(stirling2(4, 2), 7.0);
        assert!(set_partitions(3, 4).is_empty());
        // Restricted growth: first use of each label in increasing order.
        for s in set_partitions(5, 3) {
            let mut seen = 0;
            for &v in &s {
                assert!(v <= seen);
                seen = seen.max(v + 1);
            }
        }
    }

    #[test]
    fn iid_table_multiplies() {
        let d = dsbs01();
        let t = iid_table(d.pmf(), &[2, 2], 2).unwrap();
        // x^n = (1,0) is index 2, y^n = (1,1) is index 3.
        assert!((t[2 * 4 + 3] - 0.45 * 0.05).abs() < 1e-15);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correct_probability_examples() {
        let d = dsbs01();
        let lossless = CodeTriple { phi1: vec![0, 1], phi2: vec![0, 1], psi: vec![0, 1, 0, 1], m1: 2, m2: 2 };
        assert!((correct_probability(&d, 1, &lossless).unwrap() - 1.0).abs() < 1e-15);
        let helper_only = CodeTriple { phi1: vec![0, 1], phi2: vec![0, 0], psi: vec![0, 1], m1: 2, m2: 1 };
        assert!((correct_probability(&d, 1, &helper_only).unwrap() - 0.9).abs() < 1e-15);
        let src = JointSource::new(vec![vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        let constant = CodeTriple { phi1: vec![0, 0, 0, 0], phi2: vec![0; 4], psi: vec![3], m1: 1, m2: 1 };
        let py = src.marginal_y();
        assert!((correct_probability(&src, 2, &constant).unwrap() - py[1] * py[1]).abs() < 1e-15);
        let bad = CodeTriple { phi1: vec![0], ..helper_only };
        assert!(correct_probability(&d, 1, &bad).is_err());
    }

    #[test]
    fn optimal_decoder_examples() {
        let d = dsbs01();
        assert_eq!(optimal_decoder(&d, 1, &[0, 1], 2, &[0, 1], 2).unwrap(), vec![0, 1, 0, 1]);
        let src = JointSource::new(vec![vec![0.1, 0.2, 0.05], vec![0.3, 0.15, 0.2]]).unwrap();
        let psi = optimal_decoder(&src, 1, &[0, 0], 1, &[0, 1, 0], 2).unwrap();
        // Class {0, 2}: p_Y = (0.4, 0.35, 0.25) picks y = 0; class {1} is y = 1.
        assert_eq!(psi, vec![0, 1]);
    }

    #[test]
    fn decoder_beats_random_decoders() {
        let src = JointSource::new(vec![vec![0.3, 0.1], vec![0.2, 0.4]]).unwrap();
        let phi1 = vec![0, 1, 1, 0];
        let phi2 = vec![0, 1, 0, 1];
        let psi = optimal_decoder(&src, 2, &phi1, 2, &phi2, 2).unwrap();
        let best = correct_probability(&src, 2, &CodeTriple { phi1: phi1.clone(), phi2: phi2.clone(), psi, m1: 2, m2: 2 }).unwrap();
        let mut rng = rng_for(7, 0);
        for _ in 0..100 {
            let psi: Vec<usize> = (0..4).map(|_| rng.gen_range(0..4)).collect();
            let code = CodeTriple { phi1: phi1.clone(), phi2: phi2.clone(), psi, m1: 2, m2: 2 };
            assert!(correct_probability(&src, 2, &code).unwrap() <= best + 1e-15);
        }
    }

    #[test]
    fn optimal_pc_examples() {
        let d = dsbs01();
        let full = optimal_pc(&d, CodeSpec::new(1, 2, 2).unwrap(), OracleMode::Exhaustive).unwrap();
        assert!((full.pc - 1.0).abs() < 1e-15);
        let helper = optimal_pc(&d, CodeSpec::new(1, 2, 1).unwrap(), OracleMode::Exhaustive).unwrap();
        assert!((helper.pc - 0.9).abs() < 1e-15);
        assert!((helper.g_n(1) - 0.105361).abs() < 1e-6);
        let n2 = optimal_pc(&d, CodeSpec::new(2, 2, 2).unwrap(), OracleMode::Exhaustive).unwrap();
        assert_eq!(n2.candidates, 49.0);
        let code = &n2.code;
        assert!((correct_probability(&d, 2, code).unwrap() - n2.pc).abs() < 1e-15);
        let sampled = optimal_pc(&d, CodeSpec::new(2, 2, 2).unwrap(), OracleMode::Sampled { seed: 3, samples: 200 }).unwrap();
        assert!(sampled.pc <= n2.pc + 1e-15 && !sampled.exact);
    }

    #[test]
    fn budget_is_enforced() {
        let src = JointSource::independent(&Pmf::uniform(3), &Pmf::uniform(3)).unwrap();
        let e = optimal_pc(&src, CodeSpec::new(3, 5, 5).unwrap(), OracleMode::Exhaustive).unwrap_err();
        assert!(matches!(e, Error::BudgetExceeded { .. }));
        assert!(optimal_pc(&src, CodeSpec::new(3, 5, 5).unwrap(), OracleMode::Sampled { seed: 1, samples: 10 }).is_ok());
    }

    #[test]
    fn monotone_in_message_sets() {
        let src = JointSource::new(vec![vec![0.35, 0.1], vec![0.15, 0.4]]).unwrap();
        let pc = |m1, m2| optimal_pc(&src, CodeSpec::new(2, m1, m2).unwrap(), OracleMode::Exhaustive).unwrap().pc;
        for m1 in 1..4 {
            for m2 in 1..4 {
                assert!(pc(m1, m2) <= pc(m1 + 1, m2) + 1e-15);
                assert!(pc(m1, m2) <= pc(m1, m2 + 1) + 1e-15);
            }
        }
    }

    #[test]
    fn finite_n_exponent_is_subadditive() {
        for src in [dsbs01(), JointSource::new(vec![vec![0.35, 0.1], vec![0.15, 0.4]]).unwrap()] {
            let g = |n: usize, m1: usize, m2: usize| {
                optimal_pc(&src, CodeSpec::new(n, m1, m2).unwrap(), OracleMode::Exhaustive).unwrap().g_n(n)
            };
            // Rates (log 2, 0): m = 2^n helper messages, one message for Y.
            let (g1, g2, g3) = (g(1, 2, 1), g(2, 4, 1), g(3, 8, 1));
            assert!(2.0 * g2 <= 2.0 * g1 + 1e-9);
            assert!(3.0 * g3 <= g1 + 2.0 * g2 + 1e-9);
        }
    }

    #[test]
    fn report_formats() {
        let d = dsbs01();
        let r = verify_theorem3(&d, CodeSpec::new(1, 2, 2).unwrap(), 0.0, OracleMode::Exhaustive).unwrap();
        assert!(r.pass && (r.bound - 5.0).abs() < 1e-15);
        assert_eq!(r.to_csv(1.0).lines().next().unwrap(), "n,m1,m2,R1,R2,pc_opt,F,bound,verdict");
        assert!(r.to_text(1.0).contains("verdict: pass"));
    }
}
