//! Two decoders sharing one helper: the three-source region, the exponent at
//! a rate triple, and the factor-7 bound on optimal single-letter codes.

use std::time::Instant;

use helper_exp::region::MuGrid;
use helper_exp::wyner::{trace_boundary3, verify_theorem6, CodeSpec3, ExponentSolver3, JointSource3, WynerForm};
use helper_exp::oracle::OracleMode;
use helper_exp::{ExponentOptions, OptimizerOptions};

fn main() -> helper_exp::Result<()> {
    let src = JointSource3::new(vec![vec![vec![0.2, 0.05], vec![0.05, 0.1]], vec![vec![0.05, 0.1], vec![0.15, 0.3]]])?;
    let curve = trace_boundary3(&src, MuGrid::new(5, 0)?, 3, &OptimizerOptions::default());
    println!("{}", curve.to_csv(1.0));

    let solver = ExponentSolver3::new(&src, ExponentOptions::coarse(), WynerForm::Consistent);
    for (m2, m3) in [(1, 1), (2, 1), (2, 2)] {
        let spec = CodeSpec3::new(1, 2, m2, m3)?;
        let t = Instant::now();
        let f = solver.exponent(spec.rates());
        let rep = verify_theorem6(&src, spec, f.value, OracleMode::Exhaustive)?;
        println!(
            "m = (2, {m2}, {m3}): F3 = {:.6}, pc_opt = {:.4} <= {:.4}: {} [{:.2?}]",
            f.value,
            rep.pc_opt,
            rep.bound,
            rep.verdict(),
            t.elapsed()
        );
    }
    Ok(())
}
