//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use drillwave::certify::{self, LargeMagConfig};
use drillwave::norms::{self, PeakGainConfig};
use drillwave::scenario::{self, ScenarioParams, SectorBounds};
use drillwave::simulate::{self, DisturbanceSpec, SimConfig};
use drillwave::ssmodel::{self, Controller, StateSpace};
use drillwave::synth::{self, ControllerStructure, SynthProblem};
use drillwave::xfer::{self, XferParams};
use drillwave::{linalg, spectra};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, u64);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn params(name: &str) -> XferParams {
    let sp = ScenarioParams::fixture(name).unwrap();
    XferParams::from(scenario::derive_dimensionless(&sp).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn table_regeneration() -> Outcome {
    // omega0, kink, lambda, alpha, q, p, time ratio
    let rows: [(&str, [f64; 7]); 5] = [
        ("gray", [15.02, -3.7186, 0.1957, 0.7994, 0.0019, -0.0048, 2.6892]),
        ("blue", [19.75, -6.5044, 0.5477, 0.1828, 0.9796, -0.1506, 1.5374]),
        ("magenta", [21.94, -3.7186, 0.9786, 0.3197, 1.0885, -0.2927, 2.6892]),
        ("red", [20.50, -6.5044, 0.03423, 0.1828, 1.2559, -0.1931, 1.5374]),
        ("green", [19.13, -3.7186, 0.0391, 0.7994, 1.0885, -0.2927, 2.6892]),
    ];
    let labels = ["omega0", "kink", "lambda", "alpha", "q", "p", "time"];
    let mut worst = (0.0, String::new());
    let mut bad = Vec::new();
    for (name, expect) in rows {
        let sp = ScenarioParams::fixture(name).map_err(|e| e.to_string())?;
        let dim = scenario::derive_dimensionless(&sp).map_err(|e| e.to_string())?;
        let ss = scenario::steady_state(&sp).map_err(|e| e.to_string())?;
        let got = [ss.omega0, dim.kink, dim.lambda, dim.alpha, dim.q, dim.p, dim.time_scale];
        for i in 0..7 {
            let err = rel(got[i], expect[i]);
            let limit = if name == "gray" && labels[i] == "q" { 0.25 } else { 0.02 };
            if err > worst.0 {
                worst = (err, format!("{name}.{}", labels[i]));
            }
            if err > limit {
                bad.push(format!("{name}.{} = {:.5} vs {}", labels[i], got[i], expect[i]));
            }
        }
    }
    check(
        bad.is_empty(),
        format!("worst relative error {:.2}% at {} {}", 100.0 * worst.0, worst.1, bad.join(", ")),
    )
}

fn pole_counts() -> Outcome {
    let mut got = Vec::new();
    for name in ["gray", "blue", "magenta", "red", "green"] {
        let (n, _) = spectra::count_unstable_poles_auto(&params(name)).map_err(|e| e.to_string())?;
        got.push(n);
    }
    check(got == [0, 2, 2, 1, 1], format!("n_p = {got:?}"))
}

fn nyquist_certificates() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, expect) in [("gray", 0), ("blue", 2)] {
        let p = params(name);
        let k = Controller::fixture(name).map_err(|e| e.to_string())?;
        let run = certify::nyquist_run(&p, &k, None).map_err(|e| e.to_string())?;
        let cert = certify::nyquist_certify(&p, &k, None).map_err(|e| e.to_string())?;
        ok &= run.result.winding == expect && cert.pass;
        detail.push(format!("{name}: winding {} pass {}", run.result.winding, cert.pass));
    }
    check(ok, detail.join("; "))
}

fn gray_sector() -> Outcome {
    let p = params("gray");
    let k = Controller::fixture("gray").map_err(|e| e.to_string())?;
    let sb = SectorBounds::from_slopes(-4.8, 0.48).map_err(|e| e.to_string())?;
    let cert = certify::sector_certificate(&p, &k, &sb).map_err(|e| e.to_string())?;
    check(
        (cert.computed - 0.281).abs() <= 0.01 && cert.pass && (cert.threshold - 1.0 / 2.64).abs() < 1e-9,
        format!("‖T̃ze‖∞ = {:.5} < {:.4}: {}", cert.computed, cert.threshold, cert.pass),
    )
}

fn blue_certificates() -> Outcome {
    let p = params("blue");
    let k = Controller::fixture("blue").map_err(|e| e.to_string())?;
    let sb = SectorBounds::from_slopes(-3.0, -0.1).map_err(|e| e.to_string())?;
    let h2 = certify::h2_surrogate_certificate(&p, &k, &sb, 1.3, 200).map_err(|e| e.to_string())?;
    let pk = certify::large_mag_certificate(&p, &k, &sb, &LargeMagConfig::default()).map_err(|e| e.to_string())?;
    let ok = h2.computed <= 1.3 && (pk.computed - 0.680).abs() <= 0.02 && pk.pass;
    check(
        ok,
        format!(
            "‖T̃ze‖₂ = {:.5} (≤ 1.3), ‖T̃ze‖pk = {:.5} ± {:.1e} (0.680 ± 0.02, < {:.4})",
            h2.computed, pk.computed, pk.tolerance, pk.threshold
        ),
    )
}

fn zone_patterns() -> Outcome {
    let expect: [(&str, &[usize]); 5] = [
        ("gray", &[0]),
        ("blue", &[0, 2, 0]),
        ("red", &[1, 2, 0]),
        ("magenta", &[1, 0, 2, 0]),
        ("green", &[1, 0]),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, pattern) in expect {
        let p = params(name);
        let z = spectra::classify_zone(p.q, p.alpha).map_err(|e| e.to_string())?;
        ok &= z.scanned_pattern == pattern && z.pattern == pattern;
        detail.push(format!("{name} {:?}", z.scanned_pattern));
    }
    check(ok, detail.join(", "))
}

fn peak_norm(ts: &simulate::TimeSeries, t0: f64, t1: f64) -> f64 {
    ts.t.iter()
        .zip(ts.y1.iter().zip(&ts.y2))
        .filter(|(t, _)| **t >= t0 && **t <= t1)
        .map(|(_, (a, b))| a.hypot(*b))
        .fold(0.0, f64::max)
}

fn slip_stick() -> Outcome {
    let blue = ScenarioParams::fixture("blue").map_err(|e| e.to_string())?;
    let kink = scenario::derive_dimensionless(&blue).map_err(|e| e.to_string())?.kink;
    let k_blue = Controller::fixture("blue").map_err(|e| e.to_string())?;
    let open = simulate::run(&blue, None, &SimConfig::default()).map_err(|e| e.to_string())?;
    let cfg = SimConfig {
        controller_on_at: Some(10.0),
        ..Default::default()
    };
    let closed = simulate::run(&blue, Some(&k_blue), &cfg).map_err(|e| e.to_string())?;
    let final_y1 = closed.y1.last().copied().unwrap_or(f64::NAN).abs();
    let last_stick_end = closed.stick_intervals.iter().map(|s| s.1).fold(0.0, f64::max);
    let mut ok = !open.stick_intervals.is_empty() && final_y1 < 0.01 * kink.abs() && last_stick_end < 20.0;
    let mut detail = vec![format!(
        "blue open-loop stick intervals {}, closed-loop last stick ends {:.2}, |y1(T)| = {:.2e}",
        open.stick_intervals.len(),
        last_stick_end,
        final_y1
    )];

    let gray = ScenarioParams::fixture("gray").map_err(|e| e.to_string())?;
    let k_gray = Controller::fixture("gray").map_err(|e| e.to_string())?;
    for text in ["square:5,3,0.3", "pulse:5,3,0.5", "exp:5,5,0.5,1", "osc:5,5,0.3,3"] {
        let d = DisturbanceSpec::parse(text).map_err(|e| e.to_string())?;
        let cfg = SimConfig {
            initial_offset: 0.0,
            controller_on_at: Some(0.0),
            disturbance: d,
            ..Default::default()
        };
        let ts = simulate::run(&gray, Some(&k_gray), &cfg).map_err(|e| e.to_string())?;
        let dev = simulate::linear_vs_nonlinear(&gray, Some(&k_gray), &cfg).map_err(|e| e.to_string())?;
        let rate = simulate::fitted_decay_rate(&ts, d.end() + 1.0, d.end() + 10.0).unwrap_or(f64::NAN);
        let decay = peak_norm(&ts, cfg.t_final - 2.0, cfg.t_final) / peak_norm(&ts, 0.0, cfg.t_final);
        ok &= rate > 0.1 && decay < 1e-3 && dev.max_deviation.is_finite();
        detail.push(format!(
            "gray {text}: rate {rate:.3}, residual {decay:.1e}, lin/nonlin deviation {:.2e}",
            dev.max_deviation
        ));
    }
    check(ok, detail.join("; "))
}

fn eigen_count(p: &XferParams, n: usize) -> Result<(usize, f64), String> {
    let plant = ssmodel::discretize(p, n, 0.0).map_err(|e| e.to_string())?.plant;
    let eig = plant.eigenvalues().map_err(|e| e.to_string())?;
    let moving: Vec<Complex64> = eig.into_iter().filter(|z| z.norm() > 1e-7).collect();
    let count = moving.iter().filter(|z| z.re > 0.0).count();
    let closest = moving.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    Ok((count, closest))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut compared, mut skipped, mut mismatches) = (0, 0, Vec::new());
    while compared < 20 {
        let p = XferParams::new(rng.gen_range(0.0..2.0), rng.gen_range(0.05..1.0), rng.gen_range(0.02..1.0))
            .map_err(|e| e.to_string())?;
        let Ok((np, _)) = spectra::count_unstable_poles_auto(&p) else {
            skipped += 1;
            continue;
        };
        let (fine, gap) = eigen_count(&p, 400)?;
        let (coarse, _) = eigen_count(&p, 200)?;
        if gap < 1e-3 || fine != coarse {
            skipped += 1;
            continue;
        }
        compared += 1;
        if fine != np {
            mismatches.push(format!("({:.3}, {:.3}, {:.3}): {np} vs {fine}", p.q, p.alpha, p.lambda));
        }
    }
    check(
        mismatches.is_empty(),
        format!("{compared} compared, {skipped} degenerate skipped {}", mismatches.join(", ")),
    )
}

fn random_stable(rng: &mut ChaCha8Rng, n: usize) -> StateSpace {
    let rows = |r: usize, c: usize, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..r).map(|_| (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    };
    let mut a = rows(n, n, rng);
    let shift = linalg::spectral_abscissa(&linalg::from_rows(&a).unwrap()).unwrap() + rng.gen_range(0.1..1.0);
    for (i, row) in a.iter_mut().enumerate() {
        row[i] -= shift;
    }
    let b = rows(n, 1, rng);
    let c = rows(1, n, rng);
    StateSpace::from_rows(&a, &b, &c, &[vec![0.0]]).unwrap()
}

fn max_response_gap(a: &StateSpace, b: &StateSpace) -> f64 {
    norms::log_grid(1e-3, 1e3, 60)
        .into_iter()
        .map(|w| {
            let s = Complex64::new(0.0, w);
            let ga = a.freq_response(s).unwrap();
            let gb = b.freq_response(s).unwrap();
            let mut worst: f64 = 0.0;
            for i in 0..ga.nrows() {
                for j in 0..ga.ncols() {
                    worst = worst.max((ga[(i, j)] - gb[(i, j)]).norm() / ga[(i, j)].norm().max(1e-12));
                }
            }
            worst
        })
        .fold(0.0, f64::max)
}

fn real_root(p: &XferParams, lo: f64, hi: f64) -> f64 {
    let f = |x: f64| xfer::scaled_denominator(p, Complex64::new(x, 0.0)).re;
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(a) * f(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut detail = Vec::new();
    let mut ok = true;

    let gap = (0..2000)
        .map(|_| {
            let r = xfer::SERIES_SWITCH * rng.gen_range(0.5..1.5);
            xfer::dual_path_gap(Complex64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU)))
        })
        .fold(0.0, f64::max);
    ok &= gap <= 1e-9;
    detail.push(format!("dual-path gap {gap:.1e}"));

    let mut h2_gap: f64 = 0.0;
    let mut pk_ok = true;
    let mut minreal_gap: f64 = 0.0;
    for _ in 0..10 {
        let ss = random_stable(&mut rng, 4);
        let h2 = norms::h2(&ss).map_err(|e| e.to_string())?.value;
        // ∫|G(jω)|² dω / π with ω = tan θ
        let m = 20_000;
        let quad: f64 = (0..=m)
            .map(|i| {
                let th = std::f64::consts::FRAC_PI_2 * i as f64 / m as f64;
                let weight = if i == 0 || i == m { 0.5 } else { 1.0 };
                let val = if i == m {
                    let cb = (0..4).map(|k| ss.c[(0, k)] * ss.b[(k, 0)]).sum::<f64>();
                    cb * cb
                } else {
                    let w = th.tan();
                    let g = ss.freq_response(Complex64::new(0.0, w)).unwrap()[(0, 0)];
                    g.norm_sqr() * (1.0 + w * w)
                };
                weight * val
            })
            .sum::<f64>()
            * (std::f64::consts::FRAC_PI_2 / m as f64)
            / std::f64::consts::PI;
        h2_gap = h2_gap.max((h2 * h2 - quad).abs() / quad);
        let hinf = norms::hinf(&ss).map_err(|e| e.to_string())?;
        let pk = norms::peak_gain(&ss, &PeakGainConfig::default()).map_err(|e| e.to_string())?;
        pk_ok &= pk.value + pk.tolerance >= hinf.value - hinf.tolerance;
        minreal_gap = minreal_gap.max(max_response_gap(&ss, &ssmodel::minreal(&ss, None)));
    }
    let p = params("gray");
    let raw = ssmodel::discretize(&p, 50, 0.0).map_err(|e| e.to_string())?.plant;
    let red = ssmodel::minreal(&raw, None);
    minreal_gap = minreal_gap.max(max_response_gap(&raw, &red));
    ok &= h2_gap <= 1e-6 && pk_ok && minreal_gap <= 1e-6;
    detail.push(format!(
        "H2 vs quadrature {h2_gap:.1e}, pk ≥ H∞ {pk_ok}, minreal gap {minreal_gap:.1e} ({} → {})",
        raw.order(),
        red.order()
    ));

    let freqs = norms::log_grid(1e-2, 10.0, 30);
    let mut errs = Vec::new();
    for n in [50, 100, 200] {
        let ev = ssmodel::discretize(&p, n, 0.0).map_err(|e| e.to_string())?.plant.evaluator();
        let mut worst: f64 = 0.0;
        for &w in &freqs {
            let s = Complex64::new(0.0, w);
            let g = ev.eval(s).map_err(|e| e.to_string())?;
            let exact = xfer::eval_g(&p, s).map_err(|e| e.to_string())?;
            worst = worst.max((g[(1, 1)] - exact.g1).norm() / exact.g1.norm());
        }
        errs.push(worst);
    }
    let disc_order = (errs[0] / errs[1]).log2().min((errs[1] / errs[2]).log2());
    ok &= disc_order >= 1.5;
    detail.push(format!("discretization order {disc_order:.2}"));

    let gray = ScenarioParams::fixture("gray").map_err(|e| e.to_string())?;
    let at = |dt: f64, stride: usize| -> Result<Vec<f64>, String> {
        let cfg = SimConfig {
            n: 50,
            dt,
            t_final: 2.0,
            linear: true,
            record_stride: stride,
            // A speed-step start excites modes that coarse steps do not resolve.
            initial_offset: 0.0,
            disturbance: DisturbanceSpec::parse("pulse:0.2,1,0.5").unwrap(),
            ..Default::default()
        };
        Ok(simulate::run(&gray, None, &cfg).map_err(|e| e.to_string())?.y1)
    };
    let sup = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let (a, b, c) = (at(0.02, 1)?, at(0.01, 2)?, at(0.005, 4)?);
    let int_order = (sup(&a, &b) / sup(&b, &c)).log2();
    ok &= int_order >= 1.8;
    detail.push(format!("integrator order {int_order:.2}"));

    let (q, alpha) = (2.0, 0.5);
    let lc = spectra::lambda_crit(q).ok_or("no critical damping")?;
    let h = 1e-3;
    let before = real_root(&XferParams::new(q, alpha, lc - h).unwrap(), -0.2, 0.2);
    let after = real_root(&XferParams::new(q, alpha, lc + h).unwrap(), -0.2, 0.2);
    let slope = (after - before) / (2.0 * h);
    let speed = spectra::crossing_speed(q, alpha);
    ok &= slope.signum() == speed.signum();
    detail.push(format!("s′(λ_crit) {speed:.4} vs continuation {slope:.4}"));

    check(ok, detail.join(", "))
}

fn synthesis_smoke() -> Outcome {
    let prob = SynthProblem::from_json(
        r#"{"scenario": "blue", "program": "overshoot_h2", "sector": {"q_l": -3, "q_u": -0.1}, "rho": 1.3}"#,
    )
    .map_err(|e| e.to_string())?;
    let prepared = prob.prepare().map_err(|e| e.to_string())?;
    let structure = ControllerStructure::default();
    let x0 = synth::stabilize_first(&prepared, &structure, 1).map_err(|e| e.to_string())?;
    let result = synth::optimize(&prepared, &structure, &x0, 600).map_err(|e| e.to_string())?;
    let cert = certify::nyquist_certify(&params("blue"), &result.controller, None).map_err(|e| e.to_string())?;
    check(
        cert.pass,
        format!(
            "order {} controller, objective {:.4}, Nyquist winding {} (need {})",
            result.controller.order(),
            result.evaluation.value,
            cert.computed,
            cert.threshold
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("table regeneration", table_regeneration, 1),
        ("pole counts", pole_counts, 30),
        ("nyquist certificates", nyquist_certificates, 30),
        ("gray sector certificate", gray_sector, 60),
        ("blue certificates", blue_certificates, 120),
        ("zone patterns", zone_patterns, 300),
        ("slip-stick phenomenology", slip_stick, 600),
        ("oracle equivalence", oracle_equivalence, 300),
        ("numerical property suites", property_suites, 600),
        ("synthesis smoke test", synthesis_smoke, 900),
    ];
    let mut failed = Vec::new();
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = run();
        let took = t0.elapsed();
        let within = took <= Duration::from_secs(*budget);
        let (pass, detail) = match outcome {
            Ok(d) => (within, d),
            Err(d) => (false, d),
        };
        let budget_note = if within { String::new() } else { format!(" over {budget} s budget") };
        println!(
            "criterion {:>2} {name}: {} [{:.1} s{budget_note}] {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
        if !pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
