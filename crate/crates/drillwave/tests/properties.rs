use drillwave::certify::Relation;
use drillwave::norms;
use drillwave::scenario::{self, ScenarioParams, SectorBounds};
use drillwave::simulate::DisturbanceSpec;
use drillwave::spectra::{self, ContourSpec};
use drillwave::ssmodel::{self, Controller, StateSpace};
use drillwave::synth::{ControllerStructure, Encoding};
use drillwave::xfer::{self, XferParams};
use num_complex::Complex64;
use proptest::prelude::*;

fn stable_system(n: usize) -> impl Strategy<Value = StateSpace> {
    (
        prop::collection::vec(-1.0..1.0f64, n * n),
        prop::collection::vec(-1.0..1.0f64, n),
        prop::collection::vec(-1.0..1.0f64, n),
        0.2..2.0f64,
    )
        .prop_map(move |(a, b, c, margin)| {
            let mut rows: Vec<Vec<f64>> = a.chunks(n).map(|r| r.to_vec()).collect();
            // Diagonal dominance keeps every eigenvalue left of −margin.
            for (i, row) in rows.iter_mut().enumerate() {
                let off: f64 = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v.abs()).sum();
                row[i] = -off - margin;
            }
            let b: Vec<Vec<f64>> = b.into_iter().map(|v| vec![v + 0.1]).collect();
            StateSpace::from_rows(&rows, &b, &[c], &[vec![0.0]]).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn series_and_exponential_blocks_agree(r in 0.05..0.5f64, th in 0.0..std::f64::consts::TAU) {
        prop_assert!(xfer::dual_path_gap(Complex64::from_polar(r, th)) <= 1e-9);
    }

    #[test]
    fn hinf_is_homogeneous(ss in stable_system(3), k in 0.1..10.0f64) {
        let base = norms::hinf(&ss).unwrap().value;
        let scaled = norms::hinf(&ss.scaled(k)).unwrap().value;
        prop_assert!((scaled - k * base).abs() <= 1e-6 * k * base);
    }

    #[test]
    fn minreal_keeps_the_response(ss in stable_system(4), w in 1e-2..1e2f64) {
        let red = ssmodel::minreal(&ss, None);
        let s = Complex64::new(0.0, w);
        let a = ss.freq_response(s).unwrap()[(0, 0)];
        let b = red.freq_response(s).unwrap()[(0, 0)];
        prop_assert!((a - b).norm() <= 1e-6 * a.norm().max(1e-9));
    }

    #[test]
    fn peak_gain_dominates_hinf(ss in stable_system(3)) {
        let hinf = norms::hinf(&ss).unwrap();
        let pk = norms::peak_gain(&ss, &Default::default()).unwrap();
        prop_assert!(pk.value + pk.tolerance >= hinf.value - hinf.tolerance);
        prop_assert!(norms::h2(&ss).unwrap().value > 0.0);
    }

    #[test]
    fn controller_json_round_trip(x in prop::collection::vec(-2.0..2.0f64, 20)) {
        let structure = ControllerStructure::StateSpaceOrderK { k: 3, encoding: Encoding::Full };
        let k = structure.decode(&x).unwrap();
        let back = Controller::from_json(&k.to_json().unwrap());
        if let Ok(back) = back {
            let s = Complex64::new(0.3, 1.7);
            let (a1, a2) = k.freq_response(s).unwrap();
            let (b1, b2) = back.freq_response(s).unwrap();
            prop_assert!((a1 - b1).norm() <= 1e-12 * (1.0 + a1.norm()));
            prop_assert!((a2 - b2).norm() <= 1e-12 * (1.0 + a2.norm()));
        }
    }

    #[test]
    fn tridiagonal_encoding_round_trip(x in prop::collection::vec(-2.0..2.0f64, 30)) {
        let structure = ControllerStructure::default();
        let k = structure.decode(&x).unwrap();
        let back = structure.encode(&k).unwrap();
        for (a, b) in x.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn relations_respect_tolerance(c in -5.0..5.0f64, t in -5.0..5.0f64, tol in 0.0..0.1f64) {
        prop_assert_eq!(Relation::LessThan.holds(c, t, tol), c + tol < t);
        prop_assert_eq!(Relation::LessEqual.holds(c, t, tol), c + tol <= t);
        if Relation::LessThan.holds(c, t, tol) {
            prop_assert!(Relation::LessEqual.holds(c, t, tol));
        }
    }

    #[test]
    fn sector_center_and_radius(a in -6.0..0.0f64, w in 0.01..6.0f64) {
        let sb = SectorBounds::from_slopes(a, a + w).unwrap();
        prop_assert!((sb.c - (2.0 * a + w) / 2.0).abs() < 1e-12);
        prop_assert!((sb.r - w / 2.0).abs() < 1e-12);
    }

    #[test]
    fn psi_is_quadratic_near_the_operating_point(v in -1e-3..1e-3f64) {
        for name in ScenarioParams::fixture_names() {
            let sp = ScenarioParams::fixture(name).unwrap();
            prop_assert!(scenario::psi(&sp, 0.0).abs() < 1e-12);
            prop_assert!(scenario::psi(&sp, v).abs() <= 1e-6);
        }
    }

    #[test]
    fn disturbance_is_zero_outside_its_window(start in 0.0..10.0f64, dur in 0.0..5.0f64, mag in -1.0..1.0f64, t in 0.0..20.0f64) {
        let d = DisturbanceSpec::square(start, dur, mag);
        let v = d.value(t, 2.0);
        if t < start || t > start + dur {
            prop_assert_eq!(v, 0.0);
        } else {
            prop_assert!((v - 2.0 * mag).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pole_count_ignores_the_contour_radius(q in 0.0..2.0f64, alpha in 0.1..1.0f64, lambda in 0.05..1.0f64) {
        let p = XferParams::new(q, alpha, lambda).unwrap();
        let r = xfer::analytic_exclusion_radius(&p).unwrap();
        let a = spectra::count_unstable_poles(&p, &ContourSpec::with_radius(r));
        let b = spectra::count_unstable_poles(&p, &ContourSpec::with_radius(3.0 * r));
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert_eq!(a.0, b.0);
        }
    }
}
