//! Finite-alphabet probability primitives.
//!
//! Every information quantity is in nats. The conventions `0 log 0 = 0` and
//! `0 log(0/0) = 0` are used throughout.

use std::fmt;
use std::ops::Index;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tolerance on the total mass of user supplied distributions.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A probability mass function over `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    /// Validates `probs` (nonnegative, mass within [`SUM_TOLERANCE`] of one) and
    /// renormalizes it exactly.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPmf("empty probability vector".into()));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidPmf(format!("entry {i} is {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidPmf(format!("entries sum to {total}")));
        }
        Ok(Self::from_weights(probs))
    }

    /// Normalizes nonnegative weights without checking the total.
    pub(crate) fn from_weights(mut probs: Vec<f64>) -> Self {
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        Pmf { probs }
    }

    pub fn uniform(len: usize) -> Self {
        Pmf { probs: vec![1.0 / len as f64; len] }
    }

    /// Point mass at `index`.
    pub fn delta(len: usize, index: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        Pmf { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }
}

impl Index<usize> for Pmf {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// `-p log p` with `0 log 0 = 0`.
#[inline]
pub(crate) fn neg_plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// Shannon entropy in nats.
pub fn entropy(p: &Pmf) -> f64 {
    entropy_of(p.probs())
}

pub(crate) fn entropy_of(p: &[f64]) -> f64 {
    p.iter().map(|&v| neg_plogp(v)).sum()
}

/// Kullback-Leibler divergence `D(q || p)` in nats.
pub fn kl_divergence(q: &Pmf, p: &Pmf) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::Dimension(format!("pmf lengths {} and {}", q.len(), p.len())));
    }
    let mut d = 0.0;
    for (i, (&qi, &pi)) in q.probs().iter().zip(p.probs()).enumerate() {
        if qi > 0.0 {
            if pi <= 0.0 {
                return Err(Error::AbsoluteContinuity { index: i, q: qi });
            }
            d += qi * (qi / pi).ln();
        }
    }
    Ok(d.max(0.0))
}

/// `q_X(x) = sum_u q_U(u) q_{X|U}(x|u)`.
pub fn mix(q_u: &Pmf, rows: &[Pmf]) -> Pmf {
    let n = rows[0].len();
    let mut out = vec![0.0; n];
    for (w, row) in q_u.probs().iter().zip(rows) {
        for (o, r) in out.iter_mut().zip(row.probs()) {
            *o += w * r;
        }
    }
    Pmf::from_weights(out)
}

/// `I(X;U)` for the decomposition `(q_U, q_{X|U})`.
pub fn mutual_information(q_u: &Pmf, q_x_given_u: &[Pmf]) -> f64 {
    let q_x = mix(q_u, q_x_given_u);
    let cond: f64 = q_u
        .probs()
        .iter()
        .zip(q_x_given_u)
        .map(|(w, row)| w * entropy(row))
        .sum();
    (entropy(&q_x) - cond).max(0.0)
}

/// `H(Y|U)` where `Y` is produced from `X` by `channel` (rows indexed by x).
pub fn conditional_entropy(q_u: &Pmf, q_x_given_u: &[Pmf], channel: &[Pmf]) -> f64 {
    q_u.probs()
        .iter()
        .zip(q_x_given_u)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, row)| w * entropy(&mix(row, channel)))
        .sum()
}

/// Which input symbols survived support pruning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneReport {
    /// Original indices of the retained symbols, one list per variable.
    pub kept: Vec<Vec<usize>>,
    /// Original alphabet sizes.
    pub original: Vec<usize>,
}

impl PruneReport {
    pub fn is_identity(&self) -> bool {
        self.kept.iter().zip(&self.original).all(|(k, &n)| k.len() == n)
    }
}

/// A joint pmf `p_XY` on a finite product alphabet, stored row-major in x.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSource {
    nx: usize,
    ny: usize,
    pmf: Vec<f64>,
    pruning: PruneReport,
}

impl JointSource {
    /// Builds a source from `rows[x][y]`. Zero rows and columns are removed.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nx = rows.len();
        let ny = rows.first().map_or(0, Vec::len);
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidPmf("empty alphabet".into()));
        }
        if rows.iter().any(|r| r.len() != ny) {
            return Err(Error::Dimension("ragged pmf rows".into()));
        }
        let flat = Pmf::new(rows.into_iter().flatten().collect())?;
        let tensor = prune_tensor(flat.probs(), &[nx, ny]);
        Ok(JointSource {
            nx: tensor.dims[0],
            ny: tensor.dims[1],
            pmf: tensor.probs,
            pruning: tensor.report,
        })
    }

    /// Doubly symmetric binary source with crossover `p`.
    pub fn dsbs(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("crossover {p} outside [0,1]")));
        }
        Self::new(vec![vec![0.5 * (1.0 - p), 0.5 * p], vec![0.5 * p, 0.5 * (1.0 - p)]])
    }

    /// Product source `p_X x p_Y`.
    pub fn independent(p_x: &Pmf, p_y: &Pmf) -> Result<Self> {
        Self::new(p_x.probs().iter().map(|a| p_y.probs().iter().map(|b| a * b).collect()).collect())
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn p(&self, x: usize, y: usize) -> f64 {
        self.pmf[x * self.ny + y]
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn pruning(&self) -> &PruneReport {
        &self.pruning
    }

    pub fn marginal_x(&self) -> Pmf {
        marginal_x(self)
    }

    pub fn marginal_y(&self) -> Pmf {
        Pmf::from_weights((0..self.ny).map(|y| (0..self.nx).map(|x| self.p(x, y)).sum()).collect())
    }

    pub fn conditional_y_given_x(&self) -> Result<Vec<Pmf>> {
        conditional_y_given_x(self)
    }

    /// Hex SHA-256 of the pruned pmf bytes, used to tag output files.
    pub fn checksum(&self) -> String {
        checksum_of(&[self.nx, self.ny], &self.pmf)
    }

    /// Same source with symbols of X and Y relabeled: new x is `perm_x[x]`.
    pub fn relabel(&self, perm_x: &[usize], perm_y: &[usize]) -> Result<Self> {
        let mut rows = vec![vec![0.0; self.ny]; self.nx];
        for x in 0..self.nx {
            for y in 0..self.ny {
                rows[perm_x[x]][perm_y[y]] = self.p(x, y);
            }
        }
        Self::new(rows)
    }
}

impl fmt::Display for JointSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.nx, self.ny)?;
        for x in 0..self.nx {
            let row: Vec<String> = (0..self.ny).map(|y| format!("{}", self.p(x, y))).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

pub(crate) fn checksum_of(dims: &[usize], probs: &[f64]) -> String {
    let mut h = Sha256::new();
    for d in dims {
        h.update((*d as u64).to_le_bytes());
    }
    for p in probs {
        h.update(p.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// `p_X(x) = sum_y p_XY(x, y)`.
pub fn marginal_x(src: &JointSource) -> Pmf {
    Pmf::from_weights((0..src.nx).map(|x| (0..src.ny).map(|y| src.p(x, y)).sum()).collect())
}

/// Rows `p_{Y|X}(.|x)`.
pub fn conditional_y_given_x(src: &JointSource) -> Result<Vec<Pmf>> {
    let p_x = marginal_x(src);
    (0..src.nx)
        .map(|x| {
            if p_x[x] <= 0.0 {
                return Err(Error::DegenerateSupport { index: x });
            }
            Ok(Pmf::from_weights((0..src.ny).map(|y| src.p(x, y) / p_x[x]).collect()))
        })
        .collect()
}

pub(crate) struct PrunedTensor {
    pub dims: Vec<usize>,
    pub probs: Vec<f64>,
    pub report: PruneReport,
}

/// Drops every index with zero marginal along each axis of a row-major tensor.
pub(crate) fn prune_tensor(probs: &[f64], dims: &[usize]) -> PrunedTensor {
    let strides: Vec<usize> = (0..dims.len()).map(|a| dims[a + 1..].iter().product()).collect();
    let mut marg: Vec<Vec<f64>> = dims.iter().map(|&d| vec![0.0; d]).collect();
    for (flat, &p) in probs.iter().enumerate() {
        for a in 0..dims.len() {
            marg[a][(flat / strides[a]) % dims[a]] += p;
        }
    }
    let kept: Vec<Vec<usize>> = marg
        .iter()
        .map(|m| m.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, _)| i).collect())
        .collect();
    let new_dims: Vec<usize> = kept.iter().map(Vec::len).collect();
    let total: usize = new_dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; dims.len()];
    for _ in 0..total {
        let flat: usize = idx.iter().enumerate().map(|(a, &i)| kept[a][i] * strides[a]).sum();
        out.push(probs[flat]);
        for a in (0..dims.len()).rev() {
            idx[a] += 1;
            if idx[a] < new_dims[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    PrunedTensor {
        dims: new_dims,
        probs: Pmf::from_weights(out).probs,
        report: PruneReport { kept, original: dims.to_vec() },
    }
}

/// Contents of a source file: a two- or three-variable joint pmf.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceFile {
    Two(JointSource),
    Three(crate::wyner::JointSource3),
}

/// Parses the plain-text source format.
///
/// The first non-comment line holds `nx ny` or `nx ny nz`; it is followed by `nx`
/// lines with `ny` (or `ny*nz`, row-major in `(y, z)`) probabilities. Lines whose
/// first non-blank character is `#` are comments.
pub fn parse_source(text: &str) -> Result<SourceFile> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or(Error::Parse { line: 0, msg: "empty source file".into() })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Parse { line: hline, msg: format!("bad alphabet size `{t}`") })
        })
        .collect::<Result<_>>()?;
    if !(2..=3).contains(&dims.len()) || dims.contains(&0) {
        return Err(Error::Parse { line: hline, msg: "expected `nx ny` or `nx ny nz` with positive sizes".into() });
    }
    let width: usize = dims[1..].iter().product();
    let mut rows = Vec::with_capacity(dims[0]);
    for (line, l) in lines.by_ref() {
        if rows.len() == dims[0] {
            return Err(Error::Parse { line, msg: "more rows than nx".into() });
        }
        let row: Vec<f64> = l
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or(Error::Parse { line, msg: format!("bad probability `{t}`") })
            })
            .collect::<Result<_>>()?;
        if row.len() != width {
            return Err(Error::Parse { line, msg: format!("expected {width} entries, found {}", row.len()) });
        }
        rows.push(row);
    }
    if rows.len() != dims[0] {
        return Err(Error::Parse { line: text.lines().count(), msg: format!("expected {} rows, found {}", dims[0], rows.len()) });
    }
    let total: f64 = rows.iter().flatten().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::Parse { line: hline, msg: format!("probabilities sum to {total}, not 1") });
    }
    if dims.len() == 2 {
        Ok(SourceFile::Two(JointSource::new(rows)?))
    } else {
        let (ny, nz) = (dims[1], dims[2]);
        let tensor = rows
            .into_iter()
            .map(|r| r.chunks(nz).map(<[f64]>::to_vec).collect::<Vec<_>>())
            .collect::<Vec<_>>();
        debug_assert!(tensor.iter().all(|r| r.len() == ny));
        Ok(SourceFile::Three(crate::wyner::JointSource3::new(tensor)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn marginals_and_conditionals() {
        let u = JointSource::new(vec![vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap();
        assert_eq!(u.marginal_x().probs(), &[0.5, 0.5]);

        let d = JointSource::dsbs(0.1).unwrap();
        assert!(close(d.marginal_x()[0], 0.5, 1e-15));
        let rows = d.conditional_y_given_x().unwrap();
        assert!(close(rows[0][0], 0.9, 1e-12) && close(rows[1][1], 0.9, 1e-12));

        let s = JointSource::new(vec![vec![0.4, 0.1], vec![0.2, 0.3]]).unwrap();
        assert!(close(s.marginal_x()[0], 0.5, 1e-12));
        let rows = s.conditional_y_given_x().unwrap();
        assert!(close(rows[0][0], 0.8, 1e-12) && close(rows[1][0], 0.4, 1e-12));
        let p_x = s.marginal_x();
        for x in 0..2 {
            for y in 0..2 {
                assert!(close(p_x[x] * rows[x][y], s.p(x, y), 1e-12));
            }
        }

        let ind = JointSource::independent(&Pmf::new(vec![0.3, 0.7]).unwrap(), &Pmf::new(vec![0.2, 0.5, 0.3]).unwrap())
            .unwrap();
        for row in ind.conditional_y_given_x().unwrap() {
            assert!(close(row[1], 0.5, 1e-12));
        }
    }

    #[test]
    fn entropy_and_divergence_values() {
        assert_eq!(entropy(&Pmf::new(vec![1.0, 0.0]).unwrap()), 0.0);
        assert!(close(entropy(&Pmf::uniform(2)), 0.693147, 1e-6));
        assert!(close(entropy(&Pmf::new(vec![0.9, 0.1]).unwrap()), 0.325083, 1e-6));

        let half = Pmf::uniform(2);
        assert_eq!(kl_divergence(&half, &half).unwrap(), 0.0);
        assert!(close(kl_divergence(&Pmf::delta(2, 0), &half).unwrap(), 0.693147, 1e-6));
        assert!(close(kl_divergence(&Pmf::new(vec![0.9, 0.1]).unwrap(), &half).unwrap(), 0.368064, 1e-6));
        assert_eq!(
            kl_divergence(&half, &Pmf::delta(2, 0)),
            Err(Error::AbsoluteContinuity { index: 1, q: 0.5 })
        );
    }

    #[test]
    fn information_of_decompositions() {
        let d = JointSource::dsbs(0.1).unwrap();
        let chan = d.conditional_y_given_x().unwrap();
        let p_x = d.marginal_x();

        let constant = [p_x.clone()];
        assert!(mutual_information(&Pmf::delta(1, 0), &constant).abs() < 1e-15);
        assert!(close(conditional_entropy(&Pmf::delta(1, 0), &constant, &chan), entropy(&d.marginal_y()), 1e-12));

        let ident = [Pmf::delta(2, 0), Pmf::delta(2, 1)];
        assert!(close(mutual_information(&p_x, &ident), 0.693147, 1e-6));
        assert!(close(conditional_entropy(&p_x, &ident, &chan), 0.325083, 1e-6));
    }

    #[test]
    fn construction_errors_and_pruning() {
        assert!(matches!(Pmf::new(vec![0.5, 0.4]), Err(Error::InvalidPmf(_))));
        assert!(matches!(Pmf::new(vec![1.2, -0.2]), Err(Error::InvalidPmf(_))));
        let s = JointSource::new(vec![vec![0.5, 0.0, 0.2], vec![0.0, 0.0, 0.0], vec![0.1, 0.0, 0.2]]).unwrap();
        assert_eq!((s.nx(), s.ny()), (2, 2));
        assert_eq!(s.pruning().kept, vec![vec![0, 2], vec![0, 2]]);
        assert!(close(s.p(1, 1), 0.2, 1e-15));
        // Renormalized after acceptance.
        let s = JointSource::new(vec![vec![0.5 + 5e-10, 0.5]]).unwrap();
        assert!(close(s.pmf().iter().sum::<f64>(), 1.0, 1e-15));
    }

    #[test]
    fn parses_two_and_three_variable_files() {
        let text = "# dsbs\n2 2\n0.45 0.05\n# mid comment\n0.05 0.45\n";
        match parse_source(text).unwrap() {
            SourceFile::Two(s) => assert_eq!(s, JointSource::dsbs(0.1).unwrap()),
            _ => panic!("expected two-variable source"),
        }
        let text = "2 2 2\n0.1 0.1 0.1 0.2\n0.1 0.1 0.2 0.1\n";
        match parse_source(text).unwrap() {
            SourceFile::Three(s) => {
                assert_eq!((s.nx(), s.ny(), s.nz()), (2, 2, 2));
                assert!(close(s.p(0, 1, 1), 0.2, 1e-15));
            }
            _ => panic!("expected three-variable source"),
        }
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = parse_source("2 2\n0.5 0.5\n0.x 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_source("2 2\n0.5 0.5 0.1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_source("2 2\n0.5 0.5\n0.5 0.5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(parse_source("# nothing\n").is_err());
    }
}
