//! Loading a scenario and running the verification suites from code, as the
//! `adhesion1d` binary does.
//!
//! ```text
//! cargo run --example scenario_runner -- scenarios/three_body.json
//! ```

use std::path::PathBuf;

use adhesion1d::harness::{all_passed, cmd_run, cmd_verify, write_report, Format};
use adhesion1d::scenario::{LoadedScenario, Scenario};

const FALLBACK: &str = r#"{"version": 1, "id": "example",
    "initial": {"family": {"name": "two_stream", "n": 8}},
    "times": [0.05, 0.1, 0.5], "seed": 3}"#;

fn main() -> adhesion1d::Result<()> {
    let loaded = match std::env::args().nth(1) {
        Some(path) => Scenario::load(&PathBuf::from(path))?,
        None => LoadedScenario { scenario: Scenario::from_json(FALLBACK)?, base_dir: PathBuf::new() },
    };
    let out = std::env::temp_dir().join("adhesion1d-example");
    for path in cmd_run(&loaded, &out, false)? {
        println!("wrote {}", path.display());
    }
    let records = cmd_verify(&loaded, &out, &[], None, false)?;
    write_report(&records, Format::Csv, std::io::stdout())?;
    println!("all passed: {}", all_passed(&records));
    Ok(())
}
