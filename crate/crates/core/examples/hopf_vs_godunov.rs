//! The cumulative mass `M(t, x)` three ways: Legendre transforms, particles,
//! and a Godunov scheme on a grid.

use adhesion1d::eulerian::{godunov_oracle, hopf_solution, CdfSolution};
use adhesion1d::harness::cdf_gap;
use adhesion1d::measures::{discretize, VelocityField};
use adhesion1d::ParticleSystem;

fn main() -> adhesion1d::Result<()> {
    let v = |x: f64| -(2.0 * std::f64::consts::PI * x).sin();
    let mu = discretize(&|w| w, VelocityField::OfPosition(&v), 32)?;
    let t = 0.3;

    let hopf = hopf_solution(&mu, t)?;
    let mut sys = ParticleSystem::new(&mu);
    sys.evolve(t)?;
    let particles = CdfSolution::of_measure(t, &sys.state().density());
    println!("{} atoms at t={t}; Hopf vs particles gap {:.1e}", hopf.positions.len(), cdf_gap(&hopf, &particles)?);

    println!("{:>8} {:>12}", "dx", "L1 error");
    for cells in [50.0, 100.0, 200.0, 400.0] {
        let grid = godunov_oracle(&mu, t, 1.0 / cells, 0.9)?;
        println!("{:>8.5} {:>12.4e}", 1.0 / cells, grid.l1_distance(&hopf));
    }
    Ok(())
}
