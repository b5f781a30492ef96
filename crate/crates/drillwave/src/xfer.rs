//! The irrational transfer function of the damped wave equation.
//!
//! With σ² = s² + 2λs, S = sinh σ/σ and C = cosh σ the plant is
//!
//! ```text
//! d(s) = (s + 2λ + αs² − qs)·S + (αs − q + 1)·C
//! n(s) = C + (αs² − qs)·S
//! G1 = y1/u = 1/d,  G2 = y2/u = n/d
//! ```
//!
//! and the bit-side disturbance channels are `y1/w = (C + sS)/d`,
//! `y2/w = 1/d`. Everything is evaluated with the common factor e^{σ}
//! removed so large Re σ cannot overflow.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::DimParams;

/// Below this |σ²| the even power series is used.
pub const SERIES_SWITCH: f64 = 0.25;
const SERIES_TERMS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XferParams {
    pub q: f64,
    pub alpha: f64,
    pub lambda: f64,
}

impl XferParams {
    pub fn new(q: f64, alpha: f64, lambda: f64) -> Result<Self> {
        let p = XferParams { q, alpha, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q.is_finite() && self.alpha.is_finite() && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter("q, alpha, lambda must be finite".into()));
        }
        if self.alpha < 0.0 || self.lambda < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha and lambda must be >= 0 (got alpha = {}, lambda = {})",
                self.alpha, self.lambda
            )));
        }
        Ok(())
    }

    /// Same plant with the anti-damping coefficient moved by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        XferParams {
            q: self.q + c,
            ..*self
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        XferParams { lambda, ..*self }
    }
}

impl From<DimParams> for XferParams {
    fn from(d: DimParams) -> Self {
        XferParams {
            q: d.q,
            alpha: d.alpha,
            lambda: d.lambda,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Series,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XferValue {
    #[serde(rename = "G1")]
    pub g1: Complex64,
    #[serde(rename = "G2")]
    pub g2: Complex64,
    /// Unscaled denominator; infinite when e^{σ} overflows.
    pub d: Complex64,
    pub branch: Branch,
}

/// The four plant channels at one frequency point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channels {
    /// y1/u
    pub g1: Complex64,
    /// y2/u
    pub g2: Complex64,
    /// y1/w
    pub h1: Complex64,
    /// y2/w
    pub h2: Complex64,
}

/// The building blocks with the factor e^{σ} removed.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Scaled {
    pub sinhc: Complex64,
    pub cosh: Complex64,
    /// e^{−σ}
    pub decay: Complex64,
    pub branch: Branch,
}

/// σ with Re σ ≥ 0, continuous across the imaginary axis.
pub(crate) fn sigma(lambda: f64, s: Complex64) -> Complex64 {
    let s2 = s * s + 2.0 * lambda * s;
    let mut r = s2.sqrt();
    // On the imaginary axis with λ = 0 the principal root flips sign with ω;
    // follow s instead.
    if r.re.abs() <= 1e-14 * r.norm() && r.im * s.im < 0.0 {
        r = -r;
    }
    r
}

pub(crate) fn series_blocks(s2: Complex64) -> (Complex64, Complex64) {
    // S = Σ σ^{2k}/(2k+1)!, C = Σ σ^{2k}/(2k)!
    let mut sinhc = Complex64::new(0.0, 0.0);
    let mut cosh = Complex64::new(0.0, 0.0);
    let mut pow = Complex64::new(1.0, 0.0);
    let mut fact_even = 1.0;
    let mut fact_odd = 1.0;
    for k in 0..SERIES_TERMS {
        if k > 0 {
            fact_even *= (2 * k - 1) as f64 * (2 * k) as f64;
            fact_odd *= (2 * k) as f64 * (2 * k + 1) as f64;
        }
        cosh += pow / fact_even;
        sinhc += pow / fact_odd;
        pow *= s2;
    }
    (sinhc, cosh)
}

/// Unscaled sinh σ/σ and cosh σ from exponentials.
pub(crate) fn direct_blocks(sig: Complex64) -> (Complex64, Complex64) {
    let ep = sig.exp();
    let em = (-sig).exp();
    ((ep - em) / (2.0 * sig), (ep + em) * 0.5)
}

/// Largest relative gap between the power-series and exponential
/// evaluations of (sinh σ/σ, cosh σ) at σ² = `s2`.
pub fn dual_path_gap(s2: Complex64) -> f64 {
    let (s_ser, c_ser) = series_blocks(s2);
    let (s_dir, c_dir) = direct_blocks(s2.sqrt());
    ((s_ser - s_dir).norm() / s_dir.norm()).max((c_ser - c_dir).norm() / c_dir.norm())
}

pub(crate) fn scaled_blocks(lambda: f64, s: Complex64) -> Scaled {
    let s2 = s * s + 2.0 * lambda * s;
    let sig = sigma(lambda, s);
    let decay = (-sig).exp();
    if s2.norm() < SERIES_SWITCH {
        let (sinhc, cosh) = series_blocks(s2);
        Scaled {
            sinhc: sinhc * decay,
            cosh: cosh * decay,
            decay,
            branch: Branch::Series,
        }
    } else {
        let e2 = (-2.0 * sig).exp();
        Scaled {
            sinhc: (1.0 - e2) / (2.0 * sig),
            cosh: (1.0 + e2) * 0.5,
            decay,
            branch: Branch::Direct,
        }
    }
}

/// Denominator, numerator and the y1/w numerator, all scaled by e^{−σ}.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScaledParts {
    pub d: Complex64,
    pub n: Complex64,
    pub h1: Complex64,
    pub decay: Complex64,
    /// Size of the terms summed into `d`, for cancellation checks.
    pub d_scale: f64,
    pub branch: Branch,
}

pub(crate) fn scaled_parts(p: &XferParams, s: Complex64) -> ScaledParts {
    let b = scaled_blocks(p.lambda, s);
    let k = p.alpha * s * s - p.q * s;
    let t1 = (s + 2.0 * p.lambda + k) * b.sinhc;
    let t2 = (p.alpha * s - p.q + 1.0) * b.cosh;
    ScaledParts {
        d: t1 + t2,
        n: b.cosh + k * b.sinhc,
        h1: b.cosh + s * b.sinhc,
        decay: b.decay,
        d_scale: t1.norm() + t2.norm(),
        branch: b.branch,
    }
}

/// e^{−σ}·d(s); same zeros and winding as d on the closed right half-plane.
pub fn scaled_denominator(p: &XferParams, s: Complex64) -> Complex64 {
    scaled_parts(p, s).d
}

/// e^{−σ}·n(s), the scaled numerator of G2.
pub fn scaled_numerator(p: &XferParams, s: Complex64) -> Complex64 {
    scaled_parts(p, s).n
}

fn check_pole(parts: &ScaledParts, s: Complex64) -> Result<()> {
    if !(parts.d.norm() > 1e-15 * parts.d_scale) || parts.d.norm() < 1e-300 {
        return Err(Error::PoleHit { s });
    }
    Ok(())
}

pub fn eval_g(p: &XferParams, s: Complex64) -> Result<XferValue> {
    if !(s.re.is_finite() && s.im.is_finite()) {
        return Err(Error::InvalidParameter("s must be finite".into()));
    }
    let parts = scaled_parts(p, s);
    check_pole(&parts, s)?;
    let d = if parts.decay.norm() > 0.0 {
        parts.d / parts.decay
    } else {
        Complex64::new(f64::INFINITY, 0.0)
    };
    Ok(XferValue {
        g1: parts.decay / parts.d,
        g2: parts.n / parts.d,
        d,
        branch: parts.branch,
    })
}

/// All four plant channels (control and bit-disturbance inputs).
pub fn eval_channels(p: &XferParams, s: Complex64) -> Result<Channels> {
    let parts = scaled_parts(p, s);
    check_pole(&parts, s)?;
    let g1 = parts.decay / parts.d;
    Ok(Channels {
        g1,
        g2: parts.n / parts.d,
        h1: parts.h1 / parts.d,
        h2: g1,
    })
}

/// Φ(λ, s) = 2λ / (s + C/S); q − 1 − αs = Φ at every pole.
pub fn eval_phi(lambda: f64, s: Complex64) -> Result<Complex64> {
    if lambda == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let b = scaled_blocks(lambda, s);
    let den = s * b.sinhc + b.cosh;
    let size = (s * b.sinhc).norm() + b.cosh.norm();
    if !(den.norm() > 1e-15 * size) {
        return Err(Error::NumericalPole { s });
    }
    Ok(2.0 * lambda * b.sinhc / den)
}

/// Radius beyond which no pole or right half-plane transmission zero can
/// lie, assembled from explicit lower bounds on |d| and |n| on large arcs.
pub fn analytic_exclusion_radius(p: &XferParams) -> Result<f64> {
    p.validate()?;
    let (q, alpha, lambda) = (p.q, p.alpha, p.lambda);
    if q == 1.0 && alpha == 0.0 && lambda == 0.0 {
        return Err(Error::NotWellPosed {
            s: Complex64::new(0.0, 0.0),
        });
    }
    let qm = (q - 1.0).abs();
    if lambda == 0.0 {
        // d = (αs + 1 − q)·e^{s}: one pole at (q − 1)/α.
        let r = if alpha > 0.0 {
            2.0 * (1.0 + qm + q.abs()) / alpha + 2.0
        } else {
            2.0
        };
        return Ok(r);
    }
    let a0 = 0.5 * lambda;
    let r1 = real_part_radius(lambda, a0);
    let rho0 = (-2.0 * a0).exp();
    let theta0 = 2.0 / (1.0 + rho0);
    let eps = theta0 * (1.0 - rho0) / (2.0 * (1.0 + rho0));
    let m = (4.0 * lambda).max(2.0 * lambda / eps);
    let mut r = m.max(r1).max(1.0);
    if alpha > 0.0 {
        r = r
            .max(4.0 * lambda / (alpha * theta0))
            .max((1.0 + qm) / alpha)
            .max((2.0 + 2.0 * q.abs()) / alpha);
    } else {
        let gap = (1.0 - q).abs().max(1e-3);
        r = r.max((2.0 + 4.0 * lambda + qm) / gap);
    }
    Ok(r)
}

/// Smallest radius with Re σ ≥ a0 on every right half-plane point beyond it.
fn real_part_radius(lambda: f64, a0: f64) -> f64 {
    let ok = |r: f64| {
        (0..=64).all(|i| {
            let th = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / 64.0;
            sigma(lambda, Complex64::from_polar(r, th)).re >= a0
        })
    };
    let mut hi = 1.0;
    while !ok(hi) {
        hi *= 2.0;
        if hi > 1e9 {
            return hi;
        }
    }
    let mut lo = 0.0;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Exclusion radius, enlarged by doubling until the winding of d over the
/// contour is unchanged for two consecutive doublings.
pub fn pole_exclusion_radius(p: &XferParams) -> Result<f64> {
    let mut r = analytic_exclusion_radius(p)?;
    let wind = |r: f64| -> Result<i64> {
        let spec = crate::spectra::ContourSpec::with_radius(r);
        let run = crate::spectra::winding_number(|s| Ok(scaled_denominator(p, s)), &spec, 1e-12)?;
        Ok(run.result.winding)
    };
    let mut prev = wind(r)?;
    let mut stable = 0;
    let mut start = r;
    for _ in 0..12 {
        let next = wind(2.0 * r)?;
        if next == prev {
            stable += 1;
            if stable == 2 {
                return Ok(start);
            }
        } else {
            stable = 0;
            start = 2.0 * r;
        }
        prev = next;
        r *= 2.0;
    }
    Ok(start)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn delay_limit_value() {
        let p = XferParams::new(0.0, 1.0, 0.0).unwrap();
        let v = eval_g(&p, c(1.0, 0.0)).unwrap();
        assert!((v.g1 - c((-1.0f64).exp() / 2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn dc_gain() {
        let p = XferParams::new(0.0019, 0.7994, 0.1957).unwrap();
        let v = eval_g(&p, c(0.0, 0.0)).unwrap();
        let expect = 1.0 / (2.0 * 0.1957 - 0.0019 + 1.0);
        assert!((v.g1.re - expect).abs() < 1e-14 && v.g1.im.abs() < 1e-14);
        assert!((expect - 0.71968).abs() < 1e-5);
    }

    #[test]
    fn series_and_direct_agree_near_switch() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10_000 {
            let r = SERIES_SWITCH * (0.5 + next());
            let th = 2.0 * std::f64::consts::PI * next();
            let s2 = Complex64::from_polar(r, th);
            let (s_ser, c_ser) = series_blocks(s2);
            let (s_dir, c_dir) = direct_blocks(s2.sqrt());
            assert!((s_ser - s_dir).norm() <= 1e-9 * s_dir.norm());
            assert!((c_ser - c_dir).norm() <= 1e-9 * c_dir.norm());
        }
    }

    #[test]
    fn blocks_are_even_in_sigma() {
        for &(re, im) in &[(0.3, 2.0), (1.5, -4.0), (0.0, 7.0), (3.0, 0.5)] {
            let sig = c(re, im);
            let (s1, c1) = direct_blocks(sig);
            let (s2, c2) = direct_blocks(-sig);
            assert!((s1 - s2).norm() <= 1e-12 * s1.norm());
            assert!((c1 - c2).norm() <= 1e-12 * c1.norm());
        }
    }

    #[test]
    fn numerator_consistency() {
        let p = XferParams::new(0.9796, 0.1828, 0.5477).unwrap();
        for &(re, im) in &[(0.1, 0.3), (0.0, 5.0), (2.0, -1.0), (0.0, 40.0)] {
            let s = c(re, im);
            let v = eval_g(&p, s).unwrap();
            let sig = sigma(p.lambda, s);
            let (sh, ch) = direct_blocks(sig);
            let n = ch + (p.alpha * s * s - p.q * s) * sh;
            assert!((v.g2 * v.d - n).norm() <= 1e-10 * n.norm());
        }
    }

    #[test]
    fn phi_at_origin() {
        for &l in &[0.1, 1.0, 5.0] {
            let v = eval_phi(l, c(0.0, 0.0)).unwrap();
            assert!((v - c(2.0 * l, 0.0)).norm() < 1e-14);
        }
        assert_eq!(eval_phi(0.0, c(0.3, 2.0)).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn phi_residual_at_a_located_pole() {
        // Blue has two unstable poles; locate one by Newton from a coarse grid.
        let p = XferParams::new(0.9796, 0.1828, 0.5477).unwrap();
        let f = |s: Complex64| scaled_denominator(&p, s);
        let mut best = (f64::INFINITY, c(0.0, 0.0));
        for i in 0..200 {
            for j in 0..400 {
                let s = c(i as f64 * 0.01, j as f64 * 0.05);
                let v = f(s).norm();
                if v < best.0 {
                    best = (v, s);
                }
            }
        }
        let mut s = best.1;
        for _ in 0..50 {
            let h = 1e-7;
            let df = (f(s + h) - f(s - h)) / (2.0 * h);
            s -= f(s) / df;
        }
        assert!(s.re > 0.0);
        let phi = eval_phi(p.lambda, s).unwrap();
        let resid = p.q - 1.0 - p.alpha * s - phi;
        assert!(resid.norm() < 1e-8, "residual {resid}");
    }

    #[test]
    fn first_order_pole_on_critical_manifold() {
        let p = XferParams::new(2.0, 1.0, 0.5).unwrap();
        let s = c(1e-6, 0.0);
        let v = eval_g(&p, s).unwrap();
        assert!(((s * v.g1).re + 3.0).abs() < 1e-4);
    }

    #[test]
    fn high_frequency_behaviour() {
        let p = XferParams::new(0.9796, 0.1828, 0.5477).unwrap();
        let mut last = 0.0;
        for k in 0..=4 {
            let w = 10f64.powi(k);
            let v = eval_g(&p, c(0.0, w)).unwrap();
            assert!(v.g2.norm() < 10.0);
            if k > 1 {
                assert!(v.d.norm() > last);
            }
            last = v.d.norm();
        }
    }

    #[test]
    fn exceptional_point_is_rejected() {
        let p = XferParams::new(1.0, 0.0, 0.0).unwrap();
        assert!(matches!(analytic_exclusion_radius(&p), Err(Error::NotWellPosed { .. })));
    }

    #[test]
    fn delay_limit_pole_inside_radius() {
        let p = XferParams::new(2.0, 1.0, 0.0).unwrap();
        assert!(pole_exclusion_radius(&p).unwrap() > 1.0);
        assert!(scaled_denominator(&p, c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn dense_search_roots_lie_inside_radius() {
        for p in [
            XferParams::new(0.0019, 0.7994, 0.1957).unwrap(),
            XferParams::new(0.9796, 0.1828, 0.5477).unwrap(),
        ] {
            let r = pole_exclusion_radius(&p).unwrap();
            let f = |s: Complex64| scaled_denominator(&p, s);
            // Local minima of |d̂| on a grid over [0, 2R] × [−2R, 2R] that
            // refine to roots must satisfy |s| < R.
            let n = 160;
            let h = 2.0 * r / n as f64;
            for i in 1..n {
                for j in 1..2 * n {
                    let s = c(i as f64 * h, -2.0 * r + j as f64 * h);
                    let v = f(s).norm();
                    let nb = [c(h, 0.0), c(-h, 0.0), c(0.0, h), c(0.0, -h)];
                    if nb.iter().all(|d| f(s + d).norm() > v) {
                        let mut z = s;
                        for _ in 0..40 {
                            let e = 1e-7;
                            let df = (f(z + e) - f(z - e)) / (2.0 * e);
                            z -= f(z) / df;
                        }
                        if f(z).norm() < 1e-10 && z.re > 0.0 {
                            assert!(z.norm() < r, "root {z} outside R = {r}");
                        }
                    }
                }
            }
        }
    }
}
