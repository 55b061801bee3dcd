//! The tilted objective `Ω` for one auxiliary channel: its λ-derivatives, the
//! tilted distribution, and the Taylor lower bound built from `ρ`.

use helper_exp::bounds::{rho, RhoOptions};
use helper_exp::exponent::{min_omega, omega_derivatives, omega_objective, tilt_distribution};
use helper_exp::{AuxChannel, JointSource, OptimizerOptions, TiltParams};

fn main() -> helper_exp::Result<()> {
    let src = JointSource::new(vec![vec![0.35, 0.1], vec![0.15, 0.4]])?;
    let q = AuxChannel::identity(&src.marginal_x());
    let rho = rho(&src, &RhoOptions::default()).value;
    println!("rho >= {rho:.6}");

    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "lambda", "Omega", "dOmega", "d2Omega", "taylor");
    for lambda in [0.1, 0.5, 1.0, 2.0] {
        let tp = TiltParams::new(0.5, 0.5, lambda)?;
        let om = omega_objective(&src, &q, tp)?;
        let (d1, d2) = omega_derivatives(&src, &q, tp)?;
        // At λ → 0 the slope is E_q[ω]; the Taylor bound uses it with ρ.
        let mean = omega_derivatives(&src, &q, TiltParams::new(0.5, 0.5, 1e-12)?)?.0;
        println!("{lambda:>6.2} {om:>10.6} {d1:>10.6} {d2:>10.6} {:>10.6}", lambda * mean - 0.5 * rho * lambda * lambda);
    }

    let tp = TiltParams::new(0.5, 0.5, 1.0)?;
    let tilted = tilt_distribution(&src, &q, tp)?;
    println!("\ntilted q at lambda = 1 (total {:.12}):", tilted.total());
    for u in 0..tilted.nu {
        for x in 0..tilted.nx {
            let row: Vec<String> = (0..tilted.ny).map(|y| format!("{:.4}", tilted.prob(u, x, y))).collect();
            println!("  u={u} x={x}: {}", row.join(" "));
        }
    }

    let m = min_omega(&src, tp, &OptimizerOptions::default())?;
    println!("\nmin over channels: Omega = {:.6} (converged: {})", m.value, m.converged);
    Ok(())
}
