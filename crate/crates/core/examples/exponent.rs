//! Strong-converse exponent of a doubly symmetric binary source at a few rate
//! pairs, with the regional positivity floor for comparison.

use std::time::Instant;

use helper_exp::bounds::{positivity_floor, rho, RhoOptions};
use helper_exp::region::{region_membership, MuGrid, Membership};
use helper_exp::{ExponentOptions, ExponentSolver, JointSource, OptimizerOptions, RatePoint};

fn main() -> helper_exp::Result<()> {
    let src = JointSource::dsbs(0.1)?;
    let solver = ExponentSolver::new(&src, ExponentOptions::default());
    let rho = rho(&src, &RhoOptions::default());
    println!("rho >= {:.6}  ({})", rho.value, rho.search_spec);

    let ln2 = 2f64.ln();
    for (r1, r2) in [(0.0, 0.0), (0.0, 0.2), (0.3, 0.1), (ln2, 0.1), (ln2, ln2)] {
        let pt = RatePoint::new(r1, r2)?;
        let t = Instant::now();
        let f = solver.exponent(pt);
        let floor = match region_membership(&src, pt, MuGrid::default(), &OptimizerOptions::default())? {
            Membership::Outside { margin, .. } => positivity_floor(rho.value, margin, 0.05)?,
            Membership::Inside => 0.0,
        };
        println!(
            "R = ({r1:.4}, {r2:.4})  F = {:.6}  floor = {floor:.3e}  at (alpha, mu, lambda) = ({:.4}, {:.4}, {:.4})  [{} cells, {:.2?}]",
            f.value,
            f.argmax.alpha,
            f.argmax.mu,
            f.argmax.lambda,
            f.cells_evaluated,
            t.elapsed()
        );
    }
    Ok(())
}
