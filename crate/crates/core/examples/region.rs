//! Rate region of a doubly symmetric binary source: the supporting-hyperplane
//! boundary, a few membership queries, and the tilted sandwich around one
//! hyperplane.

use helper_exp::region::{region_membership, sandwich_constants, support_value, tilted_support_value, trace_boundary, MuGrid};
use helper_exp::{JointSource, OptimizerOptions, RatePoint};

fn main() -> helper_exp::Result<()> {
    let src = JointSource::dsbs(0.1)?;
    let opts = OptimizerOptions::default();

    let curve = trace_boundary(&src, MuGrid::new(9, 0)?, &opts)?;
    println!("{:>6} {:>10} {:>10} {:>10}", "mu", "R_mu", "I(X;U)", "H(Y|U)");
    for row in &curve.rows {
        println!("{:>6.3} {:>10.6} {:>10.6} {:>10.6}", row.mu, row.r_mu, row.r1, row.r2);
    }

    for (r1, r2) in [(0.1, 0.5), (0.3, 0.2), (0.05, 0.1)] {
        let m = region_membership(&src, RatePoint::new(r1, r2)?, MuGrid::default(), &opts)?;
        println!("({r1}, {r2}): {m:?}");
    }

    let consts = sandwich_constants(2, 2)?;
    let mu = 0.75;
    let r = support_value(&src, mu, &opts)?.value;
    println!("\nR^(mu) at mu = {mu}: {r:.6}");
    for alpha in [consts.alpha0, consts.alpha0 / 4.0, 1e-3] {
        let t = tilted_support_value(&src, alpha, mu, &opts)?.value / alpha;
        println!("alpha = {alpha:.3e}: R~/alpha = {t:.6}, lower end R - gap = {:.6}", r - consts.gap(alpha));
    }
    Ok(())
}
