//! Dimensionless parameters, steady states and pole counts for the five
//! bundled drilling scenarios.
//!
//! ```text
//! cargo run --example derive_table
//! ```

use drillwave::scenario::{self, ScenarioParams};
use drillwave::spectra;
use drillwave::xfer::XferParams;

fn main() -> drillwave::Result<()> {
    println!(
        "{:<8} {:>7} {:>8} {:>8} {:>7} {:>7} {:>8} {:>6} {:>3}",
        "scenario", "Ω₀", "kink", "λ", "α", "q", "p", "τ/t", "n_p"
    );
    for name in ScenarioParams::fixture_names() {
        let sp = ScenarioParams::fixture(name)?;
        let d = scenario::derive_dimensionless(&sp)?;
        let ss = scenario::steady_state(&sp)?;
        let (n_p, _) = spectra::count_unstable_poles_auto(&XferParams::from(d))?;
        println!(
            "{:<8} {:>7.2} {:>8.4} {:>8.4} {:>7.4} {:>7.4} {:>8.4} {:>6.4} {:>3}",
            name, ss.omega0, d.kink, d.lambda, d.alpha, d.q, d.p, d.time_scale, n_p
        );
    }

    // Some scenarios list a second damping value.
    for name in ScenarioParams::fixture_names() {
        if let Some(alt) = ScenarioParams::fixture(name)?.with_beta_alt() {
            let d = scenario::derive_dimensionless(&alt)?;
            let (n_p, _) = spectra::count_unstable_poles_auto(&XferParams::from(d))?;
            println!("{name} with β = {}: λ = {:.4}, n_p = {n_p}", alt.beta, d.lambda);
        }
    }
    Ok(())
}
