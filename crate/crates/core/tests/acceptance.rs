//! Acceptance report: one line per criterion, with the measured quantity and runtime.
//!
//! Criteria listed in `KNOWN_RED` are reported faithfully but do not fail the
//! process; any other failure makes the target exit non-zero.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use helper_exp::bounds::{kappa_n, positivity_floor, rho, shift_check, RhoOptions};
use helper_exp::exponent::{eval_omega, omega_derivatives, omega_objective};
use helper_exp::oracle::{verify_theorem3, CodeSpec, OracleMode};
use helper_exp::prob::{entropy, kl_divergence};
use helper_exp::region::{
    region_membership, sandwich_constants, support_value, tilted_support_value, Membership, MuGrid,
};
use helper_exp::wyner::{
    conditional_entropies3, eval_omega3, support_value3, verify_theorem6, CodeSpec3, ExponentSolver3, RatePoint3,
    WynerForm,
};
use helper_exp::{ExponentOptions, ExponentSolver, JointSource, OptimizerOptions, RatePoint, TiltParams};
use rand::Rng;

/// Criteria that cannot pass as stated, with the reason.
const KNOWN_RED: &[(u32, &str)] = &[
    (
        3,
        "ρ bounds Var_q[ω] over the channel family, but the remainder term needs the variance under the \
         tilted q^(λ'), which leaves the family and can exceed ρ",
    ),
    (7, "the stated hand value 0.804795 is an arithmetic slip; the expression evaluates to 0.804813"),
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn main() {
    let criteria: Vec<(u32, &str, u64, fn() -> Outcome)> = vec![
        (1, "derivative identities", 10, derivative_identities),
        (2, "mean identity", 5, mean_identity),
        (3, "Taylor bound", 30, taylor_bound),
        (4, "hyperplane sandwich", 120, hyperplane_sandwich),
        (5, "factor-5 bound on the optimal code", 300, factor5_bound),
        (6, "exponent zero/positivity dichotomy", 600, dichotomy),
        (7, "kappa_n sanity", 1, kappa_sanity),
        (8, "factor-7 bound on the optimal three-encoder code", 300, factor7_bound),
        (9, "determinism across thread counts", 60, determinism),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = 0;
    for (id, name, limit, check) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let out = check();
        let elapsed = t.elapsed();
        let in_time = elapsed < Duration::from_secs(limit);
        let pass = out.pass && in_time;
        let red = KNOWN_RED.iter().find(|k| k.0 == id);
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id}: {name} ({:.1?} / {limit}s) {}", elapsed, out.detail);
        if !in_time {
            println!("       runtime limit exceeded");
        }
        match (pass, red) {
            (false, Some((_, why))) => println!("       known red: {why}"),
            (false, None) => unexpected += 1,
            (true, Some(_)) => println!("       listed as known red but passed"),
            (true, None) => {}
        }
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected failure(s)");
        std::process::exit(1);
    }
}

fn derivative_identities() -> Outcome {
    let h = 1e-5;
    let (mut worst_rel, mut worst_d2, mut worst_fd2) = (0.0f64, f64::NEG_INFINITY, 0.0f64);
    for (src, cases) in common::corpus(20, 10, 1) {
        for (q, tp) in cases {
            let om = |l: f64| omega_objective(&src, &q, TiltParams { lambda: l, ..tp }).unwrap();
            let (d1, d2) = omega_derivatives(&src, &q, tp).unwrap();
            let fd = (om(tp.lambda + h) - om(tp.lambda - h)) / (2.0 * h);
            worst_rel = worst_rel.max((d1 - fd).abs() / d1.abs());
            worst_d2 = worst_d2.max(d2);
            let h2 = 1e-3;
            let fd2 = (om(tp.lambda + h2) - 2.0 * om(tp.lambda) + om(tp.lambda - h2)) / (h2 * h2);
            worst_fd2 = worst_fd2.max((fd2 - d2).abs() / d2.abs().max(1.0));
        }
    }
    Outcome {
        pass: worst_rel <= 1e-6 && worst_d2 <= 1e-12 && worst_fd2 <= 1e-4,
        detail: format!(
            "max rel err dΩ/dλ = {worst_rel:.2e}, max d²Ω/dλ² = {worst_d2:.3e}, second-difference mismatch {worst_fd2:.1e}"
        ),
    }
}

fn mean_identity() -> Outcome {
    let mut worst2 = 0.0f64;
    for (src, cases) in common::corpus(20, 10, 1) {
        let chan = src.conditional_y_given_x().unwrap();
        let p_x = src.marginal_x();
        for (q, tp) in cases {
            let mut mean = 0.0;
            for (u, row) in q.q_x_given_u().iter().enumerate() {
                for x in 0..src.nx() {
                    for y in 0..src.ny() {
                        let w = q.q_u()[u] * row[x] * chan[x][y];
                        if w > 0.0 {
                            mean += w * eval_omega(&src, &q, tp, u, x, y).unwrap();
                        }
                    }
                }
            }
            let (a, m) = (tp.alpha, tp.mu);
            let d = kl_divergence(&q.q_x(), &p_x).unwrap();
            let want = (1.0 + m) * (1.0 - a) * d
                + a * ((1.0 - m) * q.mutual_information() + m * q.conditional_entropy(&chan));
            worst2 = worst2.max((mean - want).abs());
        }
    }
    let mut worst3 = 0.0f64;
    for (src, cases) in common::corpus3(20, 10, 2) {
        let p_x = src.marginal_x();
        for (q, tp) in cases {
            let mut mean = 0.0;
            for (u, row) in q.q_x_given_u().iter().enumerate() {
                for x in 0..src.nx() {
                    let px = p_x[x];
                    for y in 0..src.ny() {
                        for z in 0..src.nz() {
                            let w = q.q_u()[u] * row[x] * src.p(x, y, z) / px;
                            if w > 0.0 {
                                mean += w * eval_omega3(&src, &q, tp, WynerForm::Consistent, u, x, y, z).unwrap();
                            }
                        }
                    }
                }
            }
            let (a, m, g) = (tp.alpha, tp.mu, tp.gamma);
            let (hy, hz) = conditional_entropies3(&src, &q).unwrap();
            let d = kl_divergence(&q.q_x(), &p_x).unwrap();
            let want = (1.0 + m) * (1.0 - a) * d
                + a * ((1.0 - m) * q.mutual_information() + m * ((1.0 - g) * hy + g * hz));
            worst3 = worst3.max((mean - want).abs());
        }
    }
    Outcome {
        pass: worst2 <= 1e-10 && worst3 <= 1e-10,
        detail: format!("max |E_q[ω] − closed form| = {worst2:.2e} (two sources), {worst3:.2e} (three sources)"),
    }
}

fn taylor_bound() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut failures = 0;
    let mut total = 0;
    for (src, cases) in common::corpus(20, 10, 1) {
        let rho_hat = rho(&src, &RhoOptions::default()).value;
        for (q, tp) in cases {
            let mean = omega_derivatives(&src, &q, TiltParams { lambda: 0.0, ..tp }).unwrap().0;
            for k in 1..=10 {
                let l = 0.1 * k as f64;
                let om = omega_objective(&src, &q, TiltParams { lambda: l, ..tp }).unwrap();
                let slack = om - (l * mean - 0.5 * rho_hat * l * l);
                worst = worst.min(slack);
                total += 1;
                if slack < -1e-8 {
                    failures += 1;
                }
            }
        }
    }
    Outcome { pass: failures == 0, detail: format!("{failures}/{total} violations, min slack {worst:.3e}") }
}

fn hyperplane_sandwich() -> Outcome {
    let eps = 1e-6;
    let opts = OptimizerOptions::default();
    let (mut lower_fail, mut upper_fail, mut total) = (0, 0, 0);
    let (mut worst_upper, mut worst_lower) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (_, src) in common::regression_set() {
        let c = sandwich_constants(src.nx(), src.ny()).unwrap();
        for mu in MuGrid::new(9, 0).unwrap().values() {
            let r = support_value(&src, mu, &opts).unwrap().value;
            for alpha in [c.alpha0, c.alpha0 / 2.0, c.alpha0 / 4.0] {
                let rt = tilted_support_value(&src, alpha, mu, &opts).unwrap().value / alpha;
                let lo = r - c.gap(alpha) - 2.0 * eps;
                let hi = r + 2.0 * eps;
                total += 1;
                worst_lower = worst_lower.max(lo - rt);
                worst_upper = worst_upper.max(rt - hi);
                lower_fail += usize::from(rt < lo);
                upper_fail += usize::from(rt > hi);
            }
        }
    }
    Outcome {
        pass: lower_fail == 0 && upper_fail == 0,
        detail: format!(
            "{total} checks; lower violations {lower_fail} (worst {worst_lower:.2e}), upper violations {upper_fail} (worst {worst_upper:.2e})"
        ),
    }
}

fn factor5_bound() -> Outcome {
    let (mut fails, mut total, mut max_ratio) = (0, 0, 0.0f64);
    for (_, src) in common::regression_set() {
        let solver = ExponentSolver::new(&src, ExponentOptions::default());
        for n in 1..=2 {
            for m1 in 1..=2 {
                for m2 in 1..=2 {
                    let spec = CodeSpec::new(n, m1, m2).unwrap();
                    let (r1, r2) = spec.rates();
                    let f = solver.exponent(RatePoint::new(r1, r2).unwrap()).value;
                    let rep = verify_theorem3(&src, spec, f, OracleMode::Exhaustive).unwrap();
                    total += 1;
                    fails += usize::from(!rep.pass);
                    max_ratio = max_ratio.max(rep.pc_opt / rep.bound);
                }
            }
        }
    }
    Outcome { pass: fails == 0, detail: format!("{fails}/{total} failures, max pc_opt/bound = {max_ratio:.4}") }
}

/// An outside point with a known margin: a boundary point shifted down by `t`.
fn outside_point<R: Rng>(rng: &mut R, src: &JointSource, opts: &OptimizerOptions) -> Option<RatePoint> {
    let mu = rng.gen_range(0.05..0.95);
    let q = support_value(src, mu, opts).unwrap().argmin;
    let on = q.rate_point(src).unwrap();
    let t = rng.gen_range(0.005..0.2);
    RatePoint::new(on.r1 - t, on.r2 - t).ok()
}

fn dichotomy() -> Outcome {
    let opts = OptimizerOptions::default();
    let grid = MuGrid::default();
    let (mut inside_fail, mut outside_fail) = (0, 0);
    let (mut max_inside, mut worst_outside) = (0.0f64, f64::INFINITY);
    let mut rng = common::rng(6);
    for (_, src) in common::regression_set() {
        let solver = ExponentSolver::new(&src, ExponentOptions::default());
        let rho_hat = rho(&src, &RhoOptions::default()).value;
        for k in 0..50 {
            let q = common::random_achievable(&mut rng, &src);
            let mut pt = q.rate_point(&src).unwrap();
            if k % 2 == 1 {
                pt = RatePoint::new(pt.r1 + rng.gen_range(0.0..0.05), pt.r2 + rng.gen_range(0.0..0.05)).unwrap();
            }
            let f = solver.exponent(pt).value;
            max_inside = max_inside.max(f.abs());
            inside_fail += usize::from(f.abs() > 2e-6);
        }
        let mut found = 0;
        while found < 20 {
            let Some(pt) = outside_point(&mut rng, &src, &opts) else { continue };
            let Membership::Outside { margin, .. } = region_membership(&src, pt, grid, &opts).unwrap() else {
                continue;
            };
            found += 1;
            let f = solver.exponent(pt).value;
            let floor = positivity_floor(rho_hat, margin, 0.05).unwrap();
            worst_outside = worst_outside.min(f - floor);
            outside_fail += usize::from(f < floor - 1e-6);
        }
    }
    Outcome {
        pass: inside_fail == 0 && outside_fail == 0,
        detail: format!(
            "achievable: {inside_fail}/250 with |F| > 2e-6 (max {max_inside:.2e}); outside: {outside_fail}/100 below floor (min F − floor {worst_outside:.3e})"
        ),
    }
}

fn kappa_sanity() -> Outcome {
    let src = JointSource::dsbs(0.1).unwrap();
    let rho_hat = rho(&src, &RhoOptions::default()).value;
    let h_x = entropy(&src.marginal_x());
    let corner = RatePoint::new(h_x, joint_entropy(&src) - h_x).unwrap();
    let mut shifts_ok = true;
    let mut kappas = Vec::new();
    for n in [1_000u64, 1_000_000] {
        let k = kappa_n(n, 0.5, 0.05, rho_hat).unwrap();
        let chk = shift_check(&src, corner, k, MuGrid::new(17, 5).unwrap(), &OptimizerOptions::default().with_starts(8)).unwrap();
        shifts_ok &= chk.passed();
        kappas.push(k);
    }
    let hand = kappa_n(100, 0.5, 0.0, 1.0).unwrap();
    let hand_ok = (hand - 0.804795).abs() <= 1e-6;
    Outcome {
        pass: shifts_ok && hand_ok && kappas[1] < kappas[0],
        detail: format!(
            "shift test {} (kappa = {:.6}, {:.6}); kappa(100, ρ=1) = {hand:.6} vs stated 0.804795 (diff {:.1e})",
            if shifts_ok { "passed" } else { "failed" },
            kappas[0],
            kappas[1],
            (hand - 0.804795).abs()
        ),
    }
}

fn joint_entropy(src: &JointSource) -> f64 {
    entropy(&helper_exp::Pmf::new(src.pmf().to_vec()).unwrap())
}

fn factor7_bound() -> Outcome {
    let src = common::binary3();
    let opts = ExponentOptions::default();
    let solver = ExponentSolver3::new(&src, opts.clone(), WynerForm::Consistent);
    let (mut fails, mut total, mut max_ratio) = (0, 0, 0.0f64);
    for m1 in 1..=2 {
        for m2 in 1..=2 {
            for m3 in 1..=2 {
                let spec = CodeSpec3::new(1, m1, m2, m3).unwrap();
                let f = solver.exponent(spec.rates()).value;
                let rep = verify_theorem6(&src, spec, f, OracleMode::Exhaustive).unwrap();
                total += 1;
                fails += usize::from(!rep.pass);
                max_ratio = max_ratio.max(rep.pc_opt / rep.bound);
            }
        }
    }
    // At γ = 0 (γ = 1) the problem reduces to the pair (X,Y) ((X,Z)).
    let oopts = OptimizerOptions::default();
    let (xy, xz) = (src.marginal_xy().unwrap(), src.marginal_xz().unwrap());
    let mut worst_r = 0.0f64;
    for mu in MuGrid::new(9, 0).unwrap().values() {
        let a = support_value3(&src, mu, 0.0, &oopts).unwrap().value - support_value(&xy, mu, &oopts).unwrap().value;
        let b = support_value3(&src, mu, 1.0, &oopts).unwrap().value - support_value(&xz, mu, &oopts).unwrap().value;
        worst_r = worst_r.max(a.abs()).max(b.abs());
    }
    let mut worst_f = 0.0f64;
    let points = [(0.0, 0.0, 0.0), (0.1, 0.2, 0.3), (0.3, 0.05, 0.1)];
    for (gamma, pair) in [(0.0, &xy), (1.0, &xz)] {
        let s3 = ExponentSolver3::with_fixed_gamma(&src, opts.clone(), WynerForm::Consistent, gamma).unwrap();
        let s2 = ExponentSolver::new(pair, opts.clone());
        for (r1, r2, r3) in points {
            let f3 = s3.exponent(RatePoint3::new(r1, r2, r3).unwrap()).value;
            let r_other = if gamma == 0.0 { r2 } else { r3 };
            let f2 = s2.exponent(RatePoint::new(r1, r_other).unwrap()).value;
            worst_f = worst_f.max((f3 - f2).abs());
        }
    }
    Outcome {
        pass: fails == 0 && worst_r <= 2e-6 && worst_f <= 2e-6,
        detail: format!(
            "{fails}/{total} failures, max pc_opt/bound = {max_ratio:.4}; γ-endpoint gaps: support {worst_r:.2e}, exponent {worst_f:.2e}"
        ),
    }
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_helper-exp");
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.txt");
    let out_s = out.to_str().unwrap().to_string();
    let max = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).to_string();
    let commands: Vec<Vec<String>> = vec![
        vec!["region".into(), "--source".into(), format!("{data}/dsbs01.txt"), "--mu-grid".into(), "17".into()],
        vec!["surface".into(), "--source".into(), format!("{data}/dsbs01.txt"), "--r1".into(), "0.1".into(), "--r2".into(), "0.2".into(), "--alpha-grid".into(), "9".into(), "--mu-grid".into(), "9".into()],
        vec!["verify".into(), "--source".into(), format!("{data}/dsbs01.txt"), "--n".into(), "2".into(), "--m1".into(), "2".into(), "--m2".into(), "2".into(), "--csv".into()],
        vec!["bounds".into(), "--source".into(), format!("{data}/asym.txt")],
        vec!["wyner".into(), "region".into(), "--source".into(), format!("{data}/wyner3.txt"), "--mu-grid".into(), "5".into()],
    ];
    let mut mismatches = Vec::new();
    for cmd in &commands {
        let mut outputs = Vec::new();
        for threads in ["1", "4", max.as_str()] {
            let status = Command::new(bin)
                .args(cmd)
                .args(["--threads", threads, "--out", &out_s])
                .status()
                .expect("binary runs");
            if !status.success() {
                mismatches.push(format!("{} exited with {status}", cmd[0]));
            }
            outputs.push(std::fs::read(&out).unwrap_or_default());
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            mismatches.push(cmd.join(" "));
        }
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: if mismatches.is_empty() {
            format!("{} commands byte-identical at 1, 4 and {max} threads", commands.len())
        } else {
            format!("differences: {}", mismatches.join("; "))
        },
    }
}
