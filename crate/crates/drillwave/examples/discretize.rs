//! Finite-difference state-space models of the plant: order, minimal
//! realization and convergence of the frequency response.
//!
//! ```text
//! cargo run --example discretize
//! ```

use drillwave::ssmodel;
use drillwave::xfer::{self, XferParams};
use num_complex::Complex64;

fn main() -> drillwave::Result<()> {
    let p = XferParams::new(0.0019, 0.7994, 0.1957)?;
    let freqs = [0.01, 0.1, 1.0, 3.0, 10.0];

    let mut prev: Option<f64> = None;
    for n in [25, 50, 100, 200, 400] {
        let raw = ssmodel::discretize(&p, n, 0.0)?.plant;
        let red = ssmodel::minreal(&raw, None);
        let ev = red.evaluator();
        let mut worst: f64 = 0.0;
        for &w in &freqs {
            let s = Complex64::new(0.0, w);
            let g = ev.eval(s)?;
            let exact = xfer::eval_g(&p, s)?;
            worst = worst.max((g[(red.output_index("y1")?, red.input_index("u")?)] - exact.g1).norm() / exact.g1.norm());
        }
        let rate = prev.map(|e| format!("{:.2}", (e / worst).log2())).unwrap_or_default();
        println!(
            "N = {n:>3}: order {} → {}, abscissa {:+.2e}, max rel. error {worst:.2e} {rate}",
            raw.order(),
            red.order(),
            red.spectral_abscissa()?
        );
        prev = Some(worst);
    }
    Ok(())
}
