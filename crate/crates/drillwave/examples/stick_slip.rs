//! Nonlinear simulation of the blue scenario: the open loop falls into
//! slip-stick from a 60% speed deficit, and switching the controller on
//! at t = 10 recovers steady drilling. Writes CSV, JSON and SVG.
//!
//! ```text
//! cargo run --release --example stick_slip -- out_dir
//! ```

use std::path::PathBuf;

use drillwave::scenario::ScenarioParams;
use drillwave::simulate::{self, DisturbanceSpec, SimConfig};
use drillwave::ssmodel::Controller;

fn main() -> drillwave::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "stick_slip_out".into()));
    std::fs::create_dir_all(&dir)?;
    let sp = ScenarioParams::fixture("blue")?;
    let k = Controller::fixture("blue")?;

    let open = simulate::run(&sp, None, &SimConfig::default())?;
    println!("open loop: {} stick intervals", open.stick_intervals.len());
    for (a, b) in open.stick_intervals.iter().take(5) {
        println!("  stuck on [{a:.2}, {b:.2}]");
    }

    let cfg = SimConfig {
        controller_on_at: Some(10.0),
        disturbance: DisturbanceSpec::square(25.0, 1.0, 0.3),
        ..Default::default()
    };
    let closed = simulate::run(&sp, Some(&k), &cfg)?;
    println!(
        "controller on at 10: last stick ends at {:.2}, y1(end) = {:.2e}",
        closed.stick_intervals.last().map_or(0.0, |s| s.1),
        closed.y1.last().copied().unwrap_or_default()
    );

    let csv = dir.join("blue_closed.csv");
    simulate::write_csv(&closed, &csv)?;
    simulate::write_sidecar(&closed, &sp, Some(&k), &cfg, &csv.with_extension("json"))?;
    simulate::write_svg(&closed, &csv.with_extension("svg"))?;
    simulate::write_svg(&open, &dir.join("blue_open.svg"))?;
    println!("wrote {}", dir.display());
    Ok(())
}
