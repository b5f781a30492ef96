//! Fixed-order controller synthesis for the blue scenario: find a
//! stabilizing start, then minimize the penalized objective.
//!
//! ```text
//! cargo run --release --example synthesize -- 800
//! ```

use drillwave::certify;
use drillwave::synth::{self, ControllerStructure, SynthProblem};

fn main() -> drillwave::Result<()> {
    let max_evals = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(800);
    let prob = SynthProblem::from_json(
        r#"{
            "scenario": "blue",
            "program": "overshoot_h2",
            "sector": {"q_l": -3, "q_u": -0.1},
            "rho": 1.3
        }"#,
    )?;
    let prepared = prob.prepare()?;
    let structure = ControllerStructure::default();

    let x0 = synth::stabilize_first(&prepared, &structure, prob.seed)?;
    println!("stabilizing start: margin {:.4}", synth::stability_margin(&prepared, &structure, &x0));

    let res = synth::optimize(&prepared, &structure, &x0, max_evals)?;
    let e = &res.evaluation;
    println!("objective {:.5}, slacks {:?}, penalty {:.5}", e.value, e.slacks, e.penalty);
    for h in res.history.iter().step_by((res.history.len() / 10).max(1)) {
        println!("  iter {:>4} evals {:>5} step {:.2e} merit {:.5}", h.iteration, h.evals, h.step, h.merit);
    }

    let p = prob.scenario.params()?;
    let cert = certify::nyquist_certify(&p, &res.controller, None)?;
    println!("Nyquist on the irrational plant: winding {} (need {}), pass {}", cert.computed, cert.threshold, cert.pass);
    println!("{}", res.controller.to_json()?);
    Ok(())
}
