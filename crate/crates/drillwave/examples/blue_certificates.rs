//! Certificates of the blue controller under the large-magnitude sector:
//! peak gain and H2 of the shifted closed loop on a discretized plant,
//! and how they move with the grid size.
//!
//! ```text
//! cargo run --release --example blue_certificates -- 50 100 200
//! ```

use drillwave::certify::{self, LargeMagConfig};
use drillwave::scenario::{self, ScenarioParams, SectorMode};
use drillwave::ssmodel::Controller;
use drillwave::xfer::XferParams;

fn main() -> drillwave::Result<()> {
    let mut grids: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if grids.is_empty() {
        grids = vec![50, 200];
    }
    let sp = ScenarioParams::fixture("blue")?;
    let p = XferParams::from(scenario::derive_dimensionless(&sp)?);
    let k = Controller::fixture("blue")?;
    let sb = scenario::fit_sector(&sp, -3.0, -0.1, SectorMode::LargeMagnitude)?;
    println!(
        "large-magnitude sector: c = {:.3}, r = {:.3}, M = {:?}, L = {:?}",
        sb.c, sb.r, sb.m_mag, sb.l_mag
    );

    for n in grids {
        let cfg = LargeMagConfig { n, ..Default::default() };
        let pk = certify::large_mag_certificate(&p, &k, &sb, &cfg)?;
        let h2 = certify::h2_surrogate_certificate(&p, &k, &sb, 1.3, n)?;
        println!(
            "N = {n:>3}: peak gain {:.5} ± {:.1e} (< {:.4}: {}), H2 {:.5} (≤ 1.3: {})",
            pk.computed, pk.tolerance, pk.threshold, pk.pass, h2.computed, h2.pass
        );
    }

    let w = certify::weight_certificate(&p, &k)?;
    println!("‖W_u T_uw‖∞ = {:.4} (≤ 1: {})", w.computed, w.pass);
    Ok(())
}
