//! Argument-principle pole counting with winding diagnostics, compared
//! against the eigenvalues of a fine finite-difference model.
//!
//! ```text
//! cargo run --example pole_count -- 2 1 0
//! ```

use drillwave::spectra::{self, ContourSpec};
use drillwave::ssmodel;
use drillwave::xfer::{self, XferParams};

fn main() -> drillwave::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (q, alpha, lambda) = match args[..] {
        [q, a, l] => (q, a, l),
        _ => (0.9796, 0.1828, 0.5477),
    };
    let p = XferParams::new(q, alpha, lambda)?;
    let radius = xfer::analytic_exclusion_radius(&p)?;
    let (n_p, w) = spectra::count_unstable_poles(&p, &ContourSpec::with_radius(radius))?;
    println!("q = {q}, α = {alpha}, λ = {lambda}");
    println!("contour radius {radius:.3}: n_p = {n_p}");
    println!(
        "  {} samples, min |d| = {:.3e}, largest phase step {:.3} rad",
        w.samples_used, w.min_modulus, w.max_phase_step
    );

    if alpha > 0.0 {
        let plant = ssmodel::discretize(&p, 400, 0.0)?.plant;
        let mut unstable: Vec<_> = plant
            .eigenvalues()?
            .into_iter()
            .filter(|z| z.re > 0.0 && z.norm() > 1e-7)
            .collect();
        unstable.sort_by(|a, b| b.re.total_cmp(&a.re));
        println!("N = 400 model: {} unstable eigenvalues", unstable.len());
        for z in unstable {
            println!("  {:.5} {:+.5}j", z.re, z.im);
        }
    }
    Ok(())
}
