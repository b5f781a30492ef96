//! H∞, H2 and peak-gain norms for state-space systems and for channels
//! given only through their frequency response.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::ssmodel::StateSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    GridRefine,
    Gramian,
    ImpulseTrapezoid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormResult {
    pub value: f64,
    /// Frequency of the peak (H∞) or the integration horizon (peak gain).
    pub argmax: Option<f64>,
    pub method: NormMethod,
    pub tolerance: f64,
}

pub const GRID_POINTS: usize = 400;
pub const GRID_LO: f64 = 1e-4;
pub const GRID_HI: f64 = 1e5;
/// Upper end of the extra scan for irrational channels.
pub const EXTENDED_HI: f64 = 1e7;
const REFINE_REL_WIDTH: f64 = 1e-6;

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn spectral_abscissa(ss: &StateSpace) -> Result<f64> {
    if ss.order() == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    ss.spectral_abscissa()
}

fn require_stable(ss: &StateSpace) -> Result<f64> {
    let sa = spectral_abscissa(ss)?;
    if sa >= 0.0 {
        return Err(Error::UnstableSystem { abscissa: sa });
    }
    Ok(sa)
}

/// Maximizes `gain(ω)` on `[a, b]` (log scale) by golden section.
fn golden_max<F: Fn(f64) -> Result<f64>>(gain: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a.ln(), b.ln());
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = gain(x1.exp())?;
    let mut f2 = gain(x2.exp())?;
    while (hi - lo) > REFINE_REL_WIDTH {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = gain(x1.exp())?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = gain(x2.exp())?;
        }
    }
    Ok(if f1 >= f2 { (x1.exp(), f1) } else { (x2.exp(), f2) })
}

/// Grid-and-refine supremum of a scalar gain over ω ≥ 0.
pub fn sup_gain<F>(gain: F, extra: &[f64], extend: bool) -> Result<NormResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let mut grid = log_grid(GRID_LO, GRID_HI, GRID_POINTS);
    if extend {
        // Eighth-octave steps up to the extended limit.
        let mut w = GRID_HI;
        while w < EXTENDED_HI {
            w *= 2f64.powf(0.125);
            grid.push(w);
        }
    }
    grid.extend(extra.iter().copied().filter(|w| w.is_finite() && *w > GRID_LO));
    grid.push(0.0);
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let vals: Vec<f64> = grid.par_iter().map(|&w| gain(w)).collect::<Result<_>>()?;

    let mut best = (0.0, f64::NEG_INFINITY);
    for (&w, &v) in grid.iter().zip(&vals) {
        if v > best.1 {
            best = (w, v);
        }
    }
    let mut peaks: Vec<usize> = (1..grid.len() - 1)
        .filter(|&i| vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1])
        .collect();
    peaks.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    peaks.truncate(3);
    let refined: Vec<(f64, f64)> = peaks
        .par_iter()
        .map(|&i| golden_max(&gain, grid[i - 1].max(GRID_LO * 1e-3), grid[i + 1]))
        .collect::<Result<_>>()?;
    for (w, v) in refined {
        if v > best.1 {
            best = (w, v);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::Linalg("non-finite frequency response".into()));
    }
    Ok(NormResult {
        value: best.1,
        argmax: Some(best.0),
        method: NormMethod::GridRefine,
        tolerance: (1e-6 * best.1).max(1e-14),
    })
}

/// H∞ norm of a stable state-space system.
pub fn hinf(ss: &StateSpace) -> Result<NormResult> {
    let poles = if ss.order() > 0 { ss.eigenvalues()? } else { Vec::new() };
    hinf_with_poles(ss, &poles)
}

/// As `hinf`, reusing an already computed spectrum of `ss.a`.
pub fn hinf_with_poles(ss: &StateSpace, poles: &[Complex64]) -> Result<NormResult> {
    let sa = poles.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if sa >= 0.0 {
        return Err(Error::UnstableSystem { abscissa: sa });
    }
    let ev = ss.evaluator();
    let extra: Vec<f64> = poles.iter().map(|z| z.im.abs()).collect();
    sup_gain(
        |w| Ok(linalg::max_singular_value(&ev.eval(Complex64::new(0.0, w))?)),
        &extra,
        false,
    )
}

/// H∞ norm of a channel known only by its frequency response; the caller
/// vouches for stability (typically through a Nyquist certificate).
pub fn hinf_irrational<F>(response: F) -> Result<NormResult>
where
    F: Fn(f64) -> Result<Complex64> + Sync,
{
    let mut r = sup_gain(|w| Ok(response(w)?.norm()), &[], true)?;
    // The sampled tail beyond the extended scan is not covered.
    r.tolerance = r.tolerance.max(1e-4 * r.value);
    Ok(r)
}

/// H2 norm from the reachability gramian.
pub fn h2(ss: &StateSpace) -> Result<NormResult> {
    require_stable(ss)?;
    h2_of_stable(ss)
}

/// H2 norm when stability is already established by the caller.
pub fn h2_of_stable(ss: &StateSpace) -> Result<NormResult> {
    if (0..ss.d.nrows()).any(|i| (0..ss.d.ncols()).any(|j| ss.d[(i, j)] != 0.0)) {
        return Err(Error::NotStrictlyProper);
    }
    if ss.order() == 0 {
        return Ok(NormResult {
            value: 0.0,
            argmax: None,
            method: NormMethod::Gramian,
            tolerance: f64::MIN_POSITIVE,
        });
    }
    let bbt = &ss.b * linalg::transpose(&ss.b);
    let p = linalg::lyapunov(&ss.a, &bbt)?;
    let res = &ss.a * &p + &p * linalg::transpose(&ss.a) + &bbt;
    let cpc = &ss.c * &p * linalg::transpose(&ss.c);
    let tr: f64 = (0..cpc.nrows()).map(|i| cpc[(i, i)]).sum();
    if !(tr >= 0.0) {
        return Err(Error::Linalg(format!("negative gramian trace {tr}")));
    }
    let value = tr.sqrt();
    let rel_res = linalg::frobenius(&res) / linalg::frobenius(&bbt).max(f64::MIN_POSITIVE);
    Ok(NormResult {
        value,
        argmax: None,
        method: NormMethod::Gramian,
        tolerance: (value * rel_res.max(1e-12)).max(1e-15),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct PeakGainConfig {
    pub dt: f64,
    /// Initial horizon; `None` derives one from the spectral abscissa.
    pub horizon: Option<f64>,
    pub max_horizon: f64,
}

impl Default for PeakGainConfig {
    fn default() -> Self {
        PeakGainConfig {
            dt: 2e-3,
            horizon: None,
            max_horizon: 400.0,
        }
    }
}

/// L1 norm of the impulse response of a stable SISO system, which is its
/// peak-to-peak gain. The direct feedthrough adds |D|.
pub fn peak_gain(ss: &StateSpace, cfg: &PeakGainConfig) -> Result<NormResult> {
    if ss.n_inputs() != 1 || ss.n_outputs() != 1 {
        return Err(Error::DimensionMismatch("peak gain needs a SISO channel".into()));
    }
    if !(cfg.dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    let sigma = require_stable(ss)?;
    let feed = ss.d[(0, 0)].abs();
    if ss.order() == 0 {
        return Ok(NormResult {
            value: feed,
            argmax: Some(0.0),
            method: NormMethod::ImpulseTrapezoid,
            tolerance: f64::MIN_POSITIVE,
        });
    }
    let dt = cfg.dt;
    let mut horizon = cfg
        .horizon
        .unwrap_or_else(|| (20.0 / sigma.abs()).clamp(10.0, cfg.max_horizon));
    let step = linalg::expm(&(ss.a.clone() * faer::Scale(dt)));
    let mut x = ss.b.clone();
    let out = |x: &linalg::RMat| (&ss.c * x)[(0, 0)].abs();

    // Absolute output samples on the uniform time grid.
    let mut ys = vec![out(&x)];
    loop {
        let target = (horizon / dt).ceil() as usize;
        while ys.len() <= target {
            x = &step * &x;
            let y = out(&x);
            if !y.is_finite() || y > 1e12 {
                return Err(Error::Linalg("impulse response diverged".into()));
            }
            ys.push(y);
        }
        let t_end = (ys.len() - 1) as f64 * dt;
        let half = ys.len() / 2;
        let kappa = ys[half..]
            .iter()
            .enumerate()
            .map(|(i, y)| y * (-sigma * (half + i) as f64 * dt).exp())
            .fold(0.0, f64::max);
        let tail = kappa * (sigma * t_end).exp() / sigma.abs();
        let value = trapezoid(&ys, dt);
        if tail < 1e-4 * value || 2.0 * horizon > cfg.max_horizon {
            let coarse = trapezoid_every_other(&ys, dt);
            let disc = (value - coarse).abs() / 3.0;
            return Ok(NormResult {
                value: value + feed,
                argmax: Some(t_end),
                method: NormMethod::ImpulseTrapezoid,
                tolerance: (tail + disc).max(1e-12 * value.max(1.0)),
            });
        }
        horizon *= 2.0;
    }
}

fn trapezoid(ys: &[f64], dt: f64) -> f64 {
    if ys.len() < 2 {
        return 0.0;
    }
    let inner: f64 = ys[1..ys.len() - 1].iter().sum();
    dt * (inner + 0.5 * (ys[0] + ys[ys.len() - 1]))
}

fn trapezoid_every_other(ys: &[f64], dt: f64) -> f64 {
    let sub: Vec<f64> = ys.iter().step_by(2).copied().collect();
    trapezoid(&sub, 2.0 * dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RMat;
    use rand::{Rng, SeedableRng};

    fn lag() -> StateSpace {
        StateSpace::from_rows(&[vec![-1.0]], &[vec![1.0]], &[vec![1.0]], &[vec![0.0]]).unwrap()
    }

    pub(crate) fn random_stable(rng: &mut impl Rng, n: usize, m: usize, p: usize) -> StateSpace {
        loop {
            let a = RMat::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
            let sa = linalg::spectral_abscissa(&a).unwrap();
            let shift = sa + rng.gen_range(0.1..1.0);
            let a = RMat::from_fn(n, n, |i, j| a[(i, j)] - if i == j { shift } else { 0.0 });
            let b = RMat::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
            let c = RMat::from_fn(p, n, |_, _| rng.gen_range(-1.0..1.0));
            let ss = StateSpace::unlabeled(a, b, c, RMat::zeros(p, m)).unwrap();
            if ss.spectral_abscissa().unwrap() < -0.05 {
                return ss;
            }
        }
    }

    #[test]
    fn first_order_lag() {
        let r = hinf(&lag()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9);
        assert_eq!(r.argmax, Some(0.0));
        assert!((h2(&lag()).unwrap().value - 0.5f64.sqrt()).abs() < 1e-12);
        let pk = peak_gain(&lag(), &PeakGainConfig::default()).unwrap();
        assert!((pk.value - 1.0).abs() < 1e-5, "{pk:?}");
    }

    #[test]
    fn unstable_is_rejected() {
        let ss = StateSpace::from_rows(&[vec![0.5]], &[vec![1.0]], &[vec![1.0]], &[vec![0.0]]).unwrap();
        assert!(matches!(hinf(&ss), Err(Error::UnstableSystem { .. })));
        assert!(matches!(h2(&ss), Err(Error::UnstableSystem { .. })));
        let ss = StateSpace::from_rows(&[vec![-1.0]], &[vec![1.0]], &[vec![1.0]], &[vec![1.0]]).unwrap();
        assert!(matches!(h2(&ss), Err(Error::NotStrictlyProper)));
    }

    #[test]
    fn identity_abscissa() {
        let ss = StateSpace::unlabeled(
            RMat::from_fn(3, 3, |i, j| if i == j { -1.0 } else { 0.0 }),
            RMat::zeros(3, 1),
            RMat::zeros(1, 3),
            RMat::zeros(1, 1),
        )
        .unwrap();
        assert!((spectral_abscissa(&ss).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_refine_matches_dense_grid() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let ss = random_stable(&mut rng, 4, 1, 1);
            let r = hinf(&ss).unwrap();
            let ev = ss.evaluator();
            let dense = log_grid(GRID_LO, GRID_HI, 1_000_000)
                .par_iter()
                .map(|&w| linalg::max_singular_value(&ev.eval(Complex64::new(0.0, w)).unwrap()))
                .reduce(|| 0.0, f64::max);
            assert!(r.value >= dense * (1.0 - 1e-4), "{} vs {}", r.value, dense);
            assert!((r.value - dense).abs() <= 1e-4 * dense, "{} vs {}", r.value, dense);
        }
    }

    #[test]
    fn gramian_matches_quadrature() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..10 {
            let ss = random_stable(&mut rng, 4, 1, 1);
            let v = h2(&ss).unwrap().value;
            // ∫_0^∞ |H(jω)|² dω / π with ω = tan θ.
            let ev = ss.evaluator();
            let m = 200_000;
            let h = std::f64::consts::FRAC_PI_2 / m as f64;
            // |H(jω)|²(1+ω²) tends to (CB)² as ω grows.
            let cb = (&ss.c * &ss.b)[(0, 0)];
            let f = |th: f64| {
                if th >= std::f64::consts::FRAC_PI_2 {
                    return cb * cb;
                }
                let w = th.tan();
                let g = ev.eval(Complex64::new(0.0, w)).unwrap()[(0, 0)].norm_sqr();
                g * (1.0 + w * w)
            };
            let mut acc = f(0.0) + f(std::f64::consts::FRAC_PI_2);
            for i in 1..m {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
            }
            let quad = (acc * h / 3.0 / std::f64::consts::PI).sqrt();
            assert!((quad - v).abs() < 1e-6 * v, "{quad} vs {v}");
        }
    }

    #[test]
    fn peak_gain_bounds_hinf() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let ss = random_stable(&mut rng, 4, 1, 1);
            let pk = peak_gain(&ss, &PeakGainConfig::default()).unwrap();
            let hi = hinf(&ss).unwrap();
            assert!(pk.value + pk.tolerance >= hi.value * (1.0 - 1e-6), "{pk:?} {hi:?}");
        }
    }

    #[test]
    fn hinf_scales_linearly() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let ss = random_stable(&mut rng, 4, 2, 2);
        let base = hinf(&ss).unwrap().value;
        for k in [1e-3, 1e3] {
            let v = hinf(&ss.scaled(k)).unwrap().value;
            assert!((v / k - base).abs() < 1e-8 * base);
        }
    }

    #[test]
    fn h2_squares_add_over_stacked_outputs() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(9);
        let ss = random_stable(&mut rng, 4, 1, 2);
        let top = ss.select(&["y1"], &["u1"]).unwrap();
        let bot = ss.select(&["y2"], &["u1"]).unwrap();
        let all = h2(&ss).unwrap().value.powi(2);
        let parts = h2(&top).unwrap().value.powi(2) + h2(&bot).unwrap().value.powi(2);
        assert!((all - parts).abs() < 1e-10 * all);
    }

    #[test]
    fn peak_gain_refinement_within_tolerance() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(13);
        let ss = random_stable(&mut rng, 4, 1, 1);
        let cfg = PeakGainConfig {
            dt: 4e-3,
            ..Default::default()
        };
        let coarse = peak_gain(&ss, &cfg).unwrap();
        let fine = peak_gain(&ss, &PeakGainConfig { dt: 2e-3, ..cfg }).unwrap();
        assert!((coarse.value - fine.value).abs() <= coarse.tolerance + fine.tolerance);
    }
}
