//! Global stability of the gray loop by loop shifting and small gain:
//! fit the friction sector, then bound the shifted closed loop.
//!
//! ```text
//! cargo run --release --example sector_certificate
//! ```

use drillwave::certify::{self, DesignSpec, LargeMagConfig};
use drillwave::scenario::{self, ScenarioParams, SectorMode};
use drillwave::ssmodel::Controller;

fn main() -> drillwave::Result<()> {
    let sp = ScenarioParams::fixture("gray")?;
    let k = Controller::fixture("gray")?;

    match scenario::fit_sector(&sp, -4.8, 0.48, SectorMode::Global) {
        Ok(sb) => println!("ψ lies in [{}, {}]: c = {:.3}, r = {:.3}", sb.q_l, sb.q_u, sb.c, sb.r),
        Err(e) => println!("sector check: {e}"),
    }

    let bundle = certify::certify_bundle(&sp, &k, &DesignSpec::for_scenario("gray")?, &LargeMagConfig::default())?;
    for c in &bundle.certificates {
        println!(
            "{:<22} {:.5} {:?} {:.5}  {}",
            format!("{:?}", c.kind),
            c.computed,
            c.relation,
            c.threshold,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    println!("bundle: {}", if bundle.pass { "pass" } else { "FAIL" });
    Ok(())
}
