//! Event-driven sticky particles: four particles, two collisions, one of
//! them a triple merge.

use adhesion1d::particles::{trajectory, write_events_csv};
use adhesion1d::{MassVelocityState, ParticleSystem};

fn main() -> adhesion1d::Result<()> {
    let mu = MassVelocityState::new(&[
        (0.25, -1.0, 1.0),
        (0.25, 0.0, 0.0),
        (0.25, 1.0, -1.0),
        (0.25, 3.0, -0.5),
    ])?;
    let traj = trajectory(&ParticleSystem::new(&mu), &[0.0, 0.5, 1.0, 2.0, 6.0])?;
    for t in traj.times() {
        let clusters: Vec<String> = traj.snapshot(t).map(|r| format!("(m={:.2} x={:+.3} v={:+.3})", r.m, r.x, r.v)).collect();
        println!("t={t:<4} {}", clusters.join(" "));
    }

    let sys = &traj.last;
    println!("\nmomentum {:.6}  kinetic energy {:.6} (initially {:.6})", sys.momentum(), sys.kinetic_energy(), mu.kinetic_energy());
    println!("collision log:");
    write_events_csv(sys.events(), std::io::stdout())?;
    Ok(())
}
