//! The scalar constants around the exponent: sandwich constants, the pruning
//! limit ν, the positivity floor, and the finite-blocklength outer shift κ_n.

use helper_exp::bounds::{kappa_n, nu_threshold_ln, positivity_floor, rho, shift_check, RhoOptions};
use helper_exp::prob::entropy;
use helper_exp::region::{sandwich_constants, MuGrid};
use helper_exp::{JointSource, OptimizerOptions, RatePoint};

fn main() -> helper_exp::Result<()> {
    let src = JointSource::dsbs(0.1)?;
    let consts = sandwich_constants(src.nx(), src.ny())?;
    println!("alpha0 = {:.7}  c1 = {:.6}  c2 = {:.6}", consts.alpha0, consts.c1, consts.c2);
    println!("nu = exp({:.2})", nu_threshold_ln(&consts, 0.05));

    let rho = rho(&src, &RhoOptions::default()).value;
    println!("rho >= {rho:.6}");
    for tau in [0.01, 0.1, 0.3] {
        println!("floor(tau = {tau}) = {:.6e}", positivity_floor(rho, tau, 0.05)?);
    }

    let h_x = entropy(&src.marginal_x());
    let h_xy = entropy(&helper_exp::Pmf::new(src.pmf().to_vec())?);
    let corner = RatePoint::new(h_x, h_xy - h_x)?;
    for n in [100, 1_000, 1_000_000, 100_000_000] {
        let k = kappa_n(n, 0.5, 0.05, rho)?;
        let chk = shift_check(&src, corner, k, MuGrid::new(17, 5)?, &OptimizerOptions::default().with_starts(8))?;
        println!("n = {n:>9}: kappa = {k:.6}, shift test {}", if chk.passed() { "passes" } else { "fails" });
    }
    Ok(())
}
