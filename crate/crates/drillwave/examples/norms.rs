//! Closed-loop norms of the published controllers: H∞ on the irrational
//! plant and on the grid, H2 by Gramian, and the peak gain.
//!
//! ```text
//! cargo run --release --example norms
//! ```

use drillwave::certify;
use drillwave::norms::{self, PeakGainConfig};
use drillwave::scenario::{self, ScenarioParams};
use drillwave::ssmodel::Controller;
use drillwave::xfer::XferParams;

fn main() -> drillwave::Result<()> {
    for (name, q_l, q_u) in [("gray", -4.8, 0.48), ("blue", -3.0, -0.1)] {
        let p = XferParams::from(scenario::derive_dimensionless(&ScenarioParams::fixture(name)?)?);
        let k = Controller::fixture(name)?;
        let c = 0.5 * (q_l + q_u);
        let shifted = p.shifted(c);

        let irr = norms::hinf_irrational(|w| certify::tze_response(&shifted, &k, w))?;
        let t = certify::tze_discretized(&p, &k, c, 100)?;
        let grid = norms::hinf(&t)?;
        let h2 = norms::h2(&t)?;
        let pk = norms::peak_gain(&t, &PeakGainConfig::default())?;
        println!("{name}: shifted closed loop w → z (c = {c})");
        println!("  H∞ irrational {:.5} at ω = {:?}", irr.value, irr.argmax);
        println!("  H∞ N=100      {:.5}", grid.value);
        println!("  H2 N=100      {:.5}", h2.value);
        println!("  peak gain     {:.5} ± {:.1e}", pk.value, pk.tolerance);
    }
    Ok(())
}
