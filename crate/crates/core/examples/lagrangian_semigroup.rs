//! The semigroup in quantile coordinates: `X(t) = Proj_K(X₀ + tV₀)`, the
//! velocity projected onto the plateaus of `X(t)`.

use adhesion1d::measures::Cost;
use adhesion1d::semigroup::{energy, oleinik_violation, step, step_from, transport_map};
use adhesion1d::step_fn::lp_distance;
use adhesion1d::{LagrangianState, MassVelocityState};

fn main() -> adhesion1d::Result<()> {
    let mu = MassVelocityState::new(&[(0.3, 0.0, 1.0), (0.2, 0.5, 0.2), (0.5, 1.0, -0.6)])?;
    let s0 = LagrangianState::from_state(&mu).with_origin("demo");
    let sq = Cost::power(2.0)?;

    for t in [0.0, 0.3, 0.625, 1.0, 2.0] {
        let st = step(&s0, t)?;
        println!("t={t:<5} atoms {:?}", st.atoms());
        if t > 0.0 {
            println!("        energy {:.5}, Oleinik excess {:.1e}", energy(&st, &sq), oleinik_violation(&st)?);
        }
    }

    // going through an intermediate time changes nothing
    let direct = step(&s0, 2.0)?;
    let via = step_from(&step(&s0, 0.7)?, 2.0)?;
    println!("\n|X direct - X via t=0.7|_inf = {:.1e}", lp_distance(direct.x(), via.x(), f64::INFINITY)?);

    let map = transport_map(&s0, &direct)?;
    println!("assignment {:?}, identity residuals {:?}", map.assignment, map.identity_residuals());
    Ok(())
}
