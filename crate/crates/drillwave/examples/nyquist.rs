//! Nyquist certificates of the published controllers on the irrational
//! plant, with the image curve of 1 + K·G written as CSV.
//!
//! ```text
//! cargo run --example nyquist -- blue nyquist_blue.csv
//! ```

use drillwave::certify;
use drillwave::scenario::{self, ScenarioParams};
use drillwave::ssmodel::Controller;
use drillwave::xfer::XferParams;

fn main() -> drillwave::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "blue".into());
    let out = args.next();

    let p = XferParams::from(scenario::derive_dimensionless(&ScenarioParams::fixture(&name)?)?);
    let k = Controller::fixture(&name)?;
    let cert = certify::nyquist_certify(&p, &k, None)?;
    println!("{}", serde_json::to_string_pretty(&cert)?);

    if let Some(path) = out {
        let run = certify::nyquist_run(&p, &k, None)?;
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["s_re", "s_im", "re", "im"])?;
        for (s, f) in run.s.iter().zip(&run.image) {
            w.write_record([s.re, s.im, f.re, f.im].map(|v| v.to_string()))?;
        }
        w.flush()?;
        println!("image curve: {} points in {path}", run.image.len());
    }
    Ok(())
}
