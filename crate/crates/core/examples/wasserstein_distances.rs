//! One-dimensional optimal transport through quantile functions.

use adhesion1d::measures::{d_dist, quantile, transport_cost, u_dist, wasserstein, Cost};
use adhesion1d::{DiscreteMeasure, MassVelocityState};

fn main() -> adhesion1d::Result<()> {
    let a = DiscreteMeasure::new(&[(0.5, 0.0), (0.5, 2.0)])?;
    let b = DiscreteMeasure::new(&[(0.25, 1.0), (0.75, 1.5)])?;
    println!("quantile of a: {:?}", quantile(&a).cells().collect::<Vec<_>>());
    for p in [1.0, 2.0, 4.0] {
        println!("W_{p} = {:.6}", wasserstein(&a, &b, p)?);
    }
    println!("cost |r|^3 = {:.6}", transport_cost(&a, &b, &Cost::power(3.0)?));

    let mu = MassVelocityState::new(&[(0.5, 0.0, 1.0), (0.5, 2.0, -1.0)])?;
    let nu = MassVelocityState::new(&[(0.25, 1.0, 0.0), (0.75, 1.5, 0.5)])?;
    println!("U_2 = {:.6}, D_2 = {:.6}", u_dist(&mu, &nu, 2.0)?, d_dist(&mu, &nu, 2.0)?);
    Ok(())
}
