//! Sticky evolution as the gradient flow of `−½W₂²(·, ρ₀)` in logarithmic
//! time, integrated by implicit Euler.

use adhesion1d::gradflow::{geometric_eps, limit_construction, monotone_horizon, rescaled_flow_error};
use adhesion1d::{LagrangianState, MassVelocityState};

fn main() -> adhesion1d::Result<()> {
    let mu = MassVelocityState::new(&[(0.25, 0.0, 1.0), (0.25, 0.4, -0.2), (0.25, 0.6, 0.5), (0.25, 1.0, -1.0)])?;
    let s0 = LagrangianState::from_state(&mu);
    let t = 1.0;

    println!("{:>7} {:>12}", "h", "error");
    for h in [0.04, 0.02, 0.01, 0.005] {
        println!("{h:>7} {:>12.4e}", rescaled_flow_error(&s0, t / 8.0, t, h)?);
    }

    println!("\ncollision-free up to eps = {:.4}", monotone_horizon(&mu));
    println!("{:>10} {:>12} {:>12} {:>10}", "eps", "W2", "integrator", "bound");
    for r in limit_construction(&mu, t, &geometric_eps(t, 6), 1e-3)? {
        println!("{:>10.5} {:>12.4e} {:>12.4e} {:>10.4}", r.eps, r.w2, r.integrator_error, r.bound);
    }
    Ok(())
}
