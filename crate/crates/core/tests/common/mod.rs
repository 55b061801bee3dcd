//! Seeded sources, channels and tilt parameters shared by the integration tests.
#![allow(dead_code)]

use helper_exp::wyner::{JointSource3, TiltParams3};
use helper_exp::{AuxChannel, JointSource, Pmf, TiltParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn weights<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// A full-support `nx × ny` source.
pub fn random_source<R: Rng>(rng: &mut R, nx: usize, ny: usize) -> JointSource {
    let w = weights(rng, nx * ny);
    JointSource::new(w.chunks(ny).map(<[f64]>::to_vec).collect()).unwrap()
}

pub fn random_source3<R: Rng>(rng: &mut R, nx: usize, ny: usize, nz: usize) -> JointSource3 {
    let w = weights(rng, nx * ny * nz);
    let t = w.chunks(ny * nz).map(|row| row.chunks(nz).map(<[f64]>::to_vec).collect()).collect();
    JointSource3::new(t).unwrap()
}

/// A random channel whose `X` marginal is the source's, so its rate pair is achievable.
pub fn random_achievable<R: Rng>(rng: &mut R, src: &JointSource) -> AuxChannel {
    let p_x = src.marginal_x();
    let nx = src.nx();
    let back: Vec<Vec<f64>> = (0..nx).map(|_| weights(rng, nx)).collect();
    let q_u: Vec<f64> = (0..nx).map(|u| (0..nx).map(|x| p_x[x] * back[x][u]).sum()).collect();
    let rows = (0..nx)
        .map(|u| Pmf::new((0..nx).map(|x| p_x[x] * back[x][u] / q_u[u]).collect()).unwrap())
        .collect();
    AuxChannel::new(Pmf::new(q_u).unwrap(), rows).unwrap()
}

pub fn random_tilt<R: Rng>(rng: &mut R) -> TiltParams {
    TiltParams::new(rng.gen(), rng.gen(), rng.gen_range(0.01..3.0)).unwrap()
}

pub fn random_tilt3<R: Rng>(rng: &mut R) -> TiltParams3 {
    TiltParams3::new(rng.gen(), rng.gen(), rng.gen(), rng.gen_range(0.01..3.0)).unwrap()
}

const SHAPES: [(usize, usize); 4] = [(2, 2), (2, 3), (3, 2), (3, 3)];

/// `sources` random sources, each with `per_source` random channels and tilt parameters.
pub fn corpus(sources: usize, per_source: usize, seed: u64) -> Vec<(JointSource, Vec<(AuxChannel, TiltParams)>)> {
    let mut rng = rng(seed);
    (0..sources)
        .map(|i| {
            let (nx, ny) = SHAPES[i % SHAPES.len()];
            let src = random_source(&mut rng, nx, ny);
            let cases = (0..per_source).map(|_| (AuxChannel::random(&mut rng, nx), random_tilt(&mut rng))).collect();
            (src, cases)
        })
        .collect()
}

pub fn corpus3(sources: usize, per_source: usize, seed: u64) -> Vec<(JointSource3, Vec<(AuxChannel, TiltParams3)>)> {
    let mut rng = rng(seed);
    (0..sources)
        .map(|i| {
            let (nx, ny) = SHAPES[i % SHAPES.len()];
            let src = random_source3(&mut rng, nx, ny, 2);
            let cases = (0..per_source).map(|_| (AuxChannel::random(&mut rng, nx), random_tilt3(&mut rng))).collect();
            (src, cases)
        })
        .collect()
}

/// DSBS with crossover 0.05, 0.1, 0.2, 0.3 and one asymmetric binary source.
pub fn regression_set() -> Vec<(String, JointSource)> {
    let mut out: Vec<(String, JointSource)> =
        [0.05, 0.1, 0.2, 0.3].iter().map(|&p| (format!("DSBS({p})"), JointSource::dsbs(p).unwrap())).collect();
    out.push(("asym".into(), JointSource::new(vec![vec![0.35, 0.1], vec![0.15, 0.4]]).unwrap()));
    out
}

pub fn binary3() -> JointSource3 {
    JointSource3::new(vec![vec![vec![0.2, 0.05], vec![0.05, 0.1]], vec![vec![0.05, 0.1], vec![0.15, 0.3]]]).unwrap()
}
