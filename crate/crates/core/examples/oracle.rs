//! Brute-force optimal codes at tiny blocklengths against `5 exp(-nF)`.

use helper_exp::oracle::{set_partitions, stirling2, verify_theorem3, CodeSpec, OracleMode};
use helper_exp::{ExponentOptions, ExponentSolver, JointSource, RatePoint};

fn main() -> helper_exp::Result<()> {
    println!("partitions of 4 symbols into 2 blocks: {} (S(4,2) = {})", set_partitions(4, 2).len(), stirling2(4, 2));

    let src = JointSource::dsbs(0.1)?;
    let solver = ExponentSolver::new(&src, ExponentOptions::default());
    println!("{:>2} {:>3} {:>3} {:>10} {:>10} {:>10}  verdict", "n", "m1", "m2", "pc_opt", "F", "bound");
    for n in 1..=2 {
        for m1 in 1..=2 {
            for m2 in 1..=2 {
                let spec = CodeSpec::new(n, m1, m2)?;
                let (r1, r2) = spec.rates();
                let f = solver.exponent(RatePoint::new(r1, r2)?).value;
                let rep = verify_theorem3(&src, spec, f, OracleMode::Exhaustive)?;
                println!("{n:>2} {m1:>3} {m2:>3} {:>10.6} {:>10.6} {:>10.6}  {}", rep.pc_opt, rep.f, rep.bound, rep.verdict());
            }
        }
    }
    Ok(())
}
