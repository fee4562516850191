//! Projection of a step function onto the nondecreasing functions, through
//! the convex envelope of its primitive.
//!
//! ```text
//! cargo run --example projection
//! ```

use adhesion1d::cone::{in_subdifferential, omega, proj_k, subdifferential_tol};
use adhesion1d::step_fn::{lower_convex_envelope, primitive};
use adhesion1d::StepFn;

fn main() -> adhesion1d::Result<()> {
    let f = StepFn::from_widths(&[0.2, 0.3, 0.1, 0.4], &[1.0, -0.5, 2.0, 0.0])?;
    let env = lower_convex_envelope(&primitive(&f))?;
    let p = proj_k(&f);

    println!("f:");
    for (a, b, v) in f.cells() {
        println!("  [{a:.2}, {b:.2})  {v:+.4}");
    }
    println!("envelope knots: {:?}", env.knots());
    println!("projection:");
    for (a, b, v) in p.cells() {
        println!("  [{a:.2}, {b:.2})  {v:+.4}");
    }

    let r = f.sub(&p);
    println!("<f - P f, P f> = {:.2e}", r.dot(&p));
    println!("plateaus of P f: {:?}", omega(&p).intervals());
    println!("f - P f is a normal vector at P f: {}", in_subdifferential(&r, &p, subdifferential_tol(&r))?);
    Ok(())
}
