//! Stability zones in the (q, α) plane: the pole pattern each scenario
//! follows as damping grows, and the traced zone boundaries.
//!
//! ```text
//! cargo run --release --example zone_map
//! ```

use drillwave::scenario::{self, ScenarioParams};
use drillwave::spectra;

fn main() -> drillwave::Result<()> {
    for name in ScenarioParams::fixture_names() {
        let d = scenario::derive_dimensionless(&ScenarioParams::fixture(name)?)?;
        let z = spectra::classify_zone(d.q, d.alpha)?;
        let thresholds: Vec<String> = z.thresholds.iter().map(|t| format!("{t:.4}")).collect();
        println!(
            "{name:<8} (q = {:.4}, α = {:.4}) zone {:?}: pattern {:?}, λ breakpoints [{}]",
            d.q,
            d.alpha,
            z.zone,
            z.scanned_pattern,
            thresholds.join(", ")
        );
    }

    let (m, b) = spectra::trace_zone_curves(2.0, 1.0, 11);
    println!("\nboundary α = m(q):");
    for (q, a) in m {
        println!("  q = {q:.2}  α = {a:.4}");
    }
    println!("boundary q = b(α):");
    for (q, a) in b {
        println!("  α = {a:.2}  q = {q:.4}");
    }
    Ok(())
}
