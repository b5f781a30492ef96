//! Argument-principle pole counting, zero crossings and the zone map of
//! the (q, α) plane.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::xfer::{self, XferParams};

/// Default closest approach of an image curve to the origin.
pub const DEFAULT_MODULUS_TOL: f64 = 1e-10;

/// The contour D_R: the imaginary axis from −jR to +jR, then the right
/// half circle traversed clockwise back to −jR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    #[serde(rename = "R")]
    pub radius: f64,
    pub base_samples: usize,
    pub max_refinements: usize,
    pub phase_cap: f64,
}

impl ContourSpec {
    pub fn with_radius(radius: f64) -> Self {
        ContourSpec {
            radius,
            base_samples: 4000,
            max_refinements: 24,
            phase_cap: PI / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidParameter("contour radius must be > 0".into()));
        }
        if !(self.phase_cap > 0.0 && self.phase_cap < PI) {
            return Err(Error::InvalidParameter("phase cap must lie in (0, pi)".into()));
        }
        if self.base_samples < 8 {
            return Err(Error::InvalidParameter("need at least 8 base samples".into()));
        }
        Ok(())
    }

    /// Point on the contour for t ∈ [0, 1], proportional to arc length.
    pub fn point(&self, t: f64) -> Complex64 {
        let r = self.radius;
        let split = 2.0 / (2.0 + PI);
        if t <= split {
            Complex64::new(0.0, -r + 2.0 * r * t / split)
        } else {
            let th = PI / 2.0 - PI * (t - split) / (1.0 - split);
            Complex64::from_polar(r, th)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindingResult {
    /// Counterclockwise encirclements of the origin.
    pub winding: i64,
    pub samples_used: usize,
    pub min_modulus: f64,
    pub refined: bool,
    /// Largest phase increment between consecutive samples (radians).
    pub max_phase_step: f64,
    pub radius: f64,
}

/// Sampled contour with its image and the winding diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NyquistRun {
    pub s: Vec<Complex64>,
    pub image: Vec<Complex64>,
    pub result: WindingResult,
}

/// Winding number of `f` around the origin along the contour of `spec`.
///
/// Segments whose phase increment exceeds the cap are bisected until it
/// holds or the refinement depth runs out.
pub fn winding_number<F>(f: F, spec: &ContourSpec, tol: f64) -> Result<NyquistRun>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    spec.validate()?;
    let perimeter = (2.0 + PI) * spec.radius;
    let n = spec.base_samples.max((40.0 * perimeter).ceil() as usize);
    let base: Vec<(f64, Complex64)> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 / n as f64;
            let s = spec.point(t);
            f(s).map(|v| (t, v))
        })
        .collect::<Result<_>>()?;

    let mut ts = Vec::with_capacity(base.len());
    let mut vals = Vec::with_capacity(base.len());
    let mut refined = false;
    let mut unresolved: Option<f64> = None;
    ts.push(base[0].0);
    vals.push(base[0].1);
    for w in base.windows(2) {
        let mut stack = vec![(w[0], w[1], 0usize)];
        // Depth-first refinement keeping points ordered in t.
        let mut pending: Vec<(f64, Complex64)> = Vec::new();
        while let Some(((t0, f0), (t1, f1), depth)) = stack.pop() {
            let step = (f1 / f0).arg().abs();
            if step > spec.phase_cap && depth < spec.max_refinements {
                refined = true;
                let tm = 0.5 * (t0 + t1);
                let fm = f(spec.point(tm))?;
                stack.push(((tm, fm), (t1, f1), depth + 1));
                stack.push(((t0, f0), (tm, fm), depth + 1));
            } else {
                if step > spec.phase_cap && unresolved.is_none() {
                    unresolved = Some(t0);
                }
                pending.push((t1, f1));
            }
        }
        for (t, v) in pending {
            ts.push(t);
            vals.push(v);
        }
    }

    let mut min_modulus = f64::INFINITY;
    let mut min_at = 0usize;
    for (i, v) in vals.iter().enumerate() {
        let m = v.norm();
        if !m.is_finite() {
            return Err(Error::Linalg(format!("non-finite image value at s = {}", spec.point(ts[i]))));
        }
        if m < min_modulus {
            min_modulus = m;
            min_at = i;
        }
    }
    if min_modulus < tol {
        return Err(Error::ZeroCrossingOnContour {
            min_modulus,
            at: spec.point(ts[min_at]),
        });
    }
    if let Some(t) = unresolved {
        return Err(Error::ContourUnresolved { at: spec.point(t) });
    }
    let mut total = 0.0;
    let mut max_step: f64 = 0.0;
    for w in vals.windows(2) {
        let step = (w[1] / w[0]).arg();
        max_step = max_step.max(step.abs());
        total += step;
    }
    let turns = total / (2.0 * PI);
    let winding = turns.round();
    if (turns - winding).abs() > 1e-6 {
        return Err(Error::Linalg(format!("image curve does not close (turns = {turns})")));
    }
    let s: Vec<Complex64> = ts.iter().map(|t| spec.point(*t)).collect();
    Ok(NyquistRun {
        result: WindingResult {
            winding: winding as i64,
            samples_used: vals.len(),
            min_modulus,
            refined,
            max_phase_step: max_step,
            radius: spec.radius,
        },
        s,
        image: vals,
    })
}

/// Winding of the scaled denominator, checked against the doubled radius.
pub fn count_unstable_poles(p: &XferParams, spec: &ContourSpec) -> Result<(usize, WindingResult)> {
    count_unstable_poles_tol(p, spec, DEFAULT_MODULUS_TOL)
}

pub fn count_unstable_poles_tol(
    p: &XferParams,
    spec: &ContourSpec,
    tol: f64,
) -> Result<(usize, WindingResult)> {
    p.validate()?;
    let f = |s: Complex64| Ok(xfer::scaled_denominator(p, s));
    let run = winding_number(f, spec, tol)?;
    let doubled = ContourSpec {
        radius: 2.0 * spec.radius,
        ..*spec
    };
    let check = winding_number(f, &doubled, tol)?;
    if check.result.winding != run.result.winding {
        return Err(Error::RadiusTooSmall {
            at_r: run.result.winding,
            at_2r: check.result.winding,
        });
    }
    let w = run.result.winding;
    if w > 0 {
        return Err(Error::Linalg(format!(
            "denominator winding {w} is positive; d has no poles inside the contour"
        )));
    }
    Ok(((-w) as usize, run.result))
}

/// Pole count with the contour radius chosen from the exclusion bound.
pub fn count_unstable_poles_auto(p: &XferParams) -> Result<(usize, WindingResult)> {
    let r = xfer::analytic_exclusion_radius(p)?;
    let spec = ContourSpec::with_radius(r);
    match count_unstable_poles(p, &spec) {
        Err(Error::RadiusTooSmall { .. }) => {
            let r = xfer::pole_exclusion_radius(p)?;
            count_unstable_poles(p, &ContourSpec::with_radius(r))
        }
        other => other,
    }
}

/// Experimental: right half-plane zeros of n(s) by the same winding test.
pub fn count_unstable_zeros(p: &XferParams, spec: &ContourSpec) -> Result<(usize, WindingResult)> {
    let f = |s: Complex64| Ok(xfer::scaled_numerator(p, s));
    let run = winding_number(f, spec, DEFAULT_MODULUS_TOL)?;
    let w = run.result.winding;
    Ok((w.unsigned_abs() as usize, run.result))
}

/// Parameter points (q, α) that place a pole at jω, for each ω in the grid.
pub fn zero_crossing_pairs(lambda: f64, omega_grid: &[f64]) -> Vec<(f64, f64, f64)> {
    if lambda == 0.0 {
        return Vec::new();
    }
    omega_grid
        .iter()
        .filter(|w| **w != 0.0)
        .filter_map(|&w| {
            let phi = xfer::eval_phi(lambda, Complex64::new(0.0, w)).ok()?;
            let q = 1.0 + phi.re;
            let alpha = -phi.im / w;
            (q > 0.0 && alpha > 0.0 && q.is_finite() && alpha.is_finite()).then_some((q, alpha, w))
        })
        .collect()
}

pub fn lambda_crit(q: f64) -> Option<f64> {
    (q >= 1.0).then_some(0.5 * (q - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingDirection {
    LeftToRight,
    RightToLeft,
    Degenerate,
}

/// Direction in which the real pole passes the origin at λ = λ_crit.
pub fn crossing_direction(q: f64, alpha: f64) -> Result<CrossingDirection> {
    if q <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "crossing direction needs q > 1 (got {q})"
        )));
    }
    let m = q - 1.0;
    let v = m * m / 3.0 + m - alpha;
    let tol = 1e-12 * (1.0 + alpha.abs() + m * m);
    Ok(if v > tol {
        CrossingDirection::LeftToRight
    } else if v < -tol {
        CrossingDirection::RightToLeft
    } else {
        CrossingDirection::Degenerate
    })
}

/// Velocity ds/dλ of the real pole at λ_crit.
pub fn crossing_speed(q: f64, alpha: f64) -> f64 {
    let m = q - 1.0;
    2.0 / (m * m / 3.0 + m - alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Zone {
    Gray,
    Blue,
    Red,
    Magenta,
    Green,
}

impl Zone {
    /// Sequence of unstable-pole counts as λ grows from 0.
    pub fn pattern(self) -> Vec<usize> {
        match self {
            Zone::Gray => vec![0],
            Zone::Blue => vec![0, 2, 0],
            Zone::Red => vec![1, 2, 0],
            Zone::Magenta => vec![1, 0, 2, 0],
            Zone::Green => vec![1, 0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonePattern {
    pub zone: Zone,
    pub pattern: Vec<usize>,
    /// λ breakpoints between consecutive pattern entries.
    pub thresholds: Vec<f64>,
    /// Pattern observed by the λ scan that located the thresholds.
    pub scanned_pattern: Vec<usize>,
}

const CURVE_LAMBDAS: usize = 160;
const CURVE_OMEGAS: usize = 2500;
const CURVE_OMEGA_MAX: f64 = 50.0;

fn omega_grid() -> Vec<f64> {
    (1..=CURVE_OMEGAS)
        .map(|i| CURVE_OMEGA_MAX * i as f64 / CURVE_OMEGAS as f64)
        .collect()
}

fn phi_axis(lambda: f64, w: f64) -> Option<Complex64> {
    xfer::eval_phi(lambda, Complex64::new(0.0, w)).ok()
}

/// Roots in ω of `g` on the grid, refined by bisection.
fn grid_roots<G: Fn(f64) -> Option<f64>>(g: G, grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &w in grid {
        let v = match g(w) {
            Some(v) if v.is_finite() => v,
            _ => {
                prev = None;
                continue;
            }
        };
        if let Some((w0, v0)) = prev {
            if v0 == 0.0 || v0.signum() != v.signum() {
                let (mut a, mut b, mut fa) = (w0, w, v0);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    let fm = match g(m) {
                        Some(x) => x,
                        None => break,
                    };
                    if fm.signum() == fa.signum() {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                }
                // Reject jumps through poles of Φ.
                let mid = 0.5 * (a + b);
                if g(mid).is_some_and(|x| x.abs() < 1e-6 * (1.0 + v0.abs().min(v.abs()))) {
                    out.push(mid);
                }
            }
        }
        prev = Some((w, v));
    }
    out
}

fn alpha_max_at(lambda: f64, q: f64, grid: &[f64]) -> Option<f64> {
    let roots = grid_roots(|w| phi_axis(lambda, w).map(|p| p.re - (q - 1.0)), grid);
    roots
        .iter()
        .filter_map(|&w| phi_axis(lambda, w).map(|p| -p.im / w))
        .filter(|a| *a > 0.0)
        .fold(None, |acc: Option<f64>, a| Some(acc.map_or(a, |b| b.max(a))))
}

fn q_min_at(lambda: f64, alpha: f64, grid: &[f64]) -> Option<f64> {
    let roots = grid_roots(|w| phi_axis(lambda, w).map(|p| -p.im / w - alpha), grid);
    roots
        .iter()
        .filter_map(|&w| phi_axis(lambda, w).map(|p| 1.0 + p.re))
        .filter(|q| *q > 0.0)
        .fold(None, |acc: Option<f64>, q| Some(acc.map_or(q, |b| b.min(q))))
}

fn log_lambdas(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Envelope optimization over λ with two rounds of local refinement.
fn envelope<F: Fn(f64) -> Option<f64> + Sync>(f: F, maximize: bool) -> Option<f64> {
    let better = |a: f64, b: f64| if maximize { a > b } else { a < b };
    let mut lams = log_lambdas(1e-3, 5.0, CURVE_LAMBDAS);
    let mut best: Option<(f64, f64)> = None;
    for round in 0..3 {
        let vals: Vec<(f64, Option<f64>)> = lams.par_iter().map(|&l| (l, f(l))).collect();
        for (l, v) in vals {
            if let Some(v) = v {
                if best.is_none_or(|(_, b)| better(v, b)) {
                    best = Some((l, v));
                }
            }
        }
        let (l0, _) = best?;
        let width = if round == 0 {
            (5.0f64 / 1e-3).powf(1.0 / (CURVE_LAMBDAS - 1) as f64)
        } else {
            (5.0f64 / 1e-3).powf(1.0 / ((CURVE_LAMBDAS - 1) * 20usize.pow(round)) as f64)
        };
        lams = log_lambdas(l0 / width, l0 * width, 41);
    }
    best.map(|(_, v)| v)
}

/// m(q): largest α of a zero crossing with this q (q ≥ 1).
pub fn boundary_m(q: f64) -> Option<f64> {
    let grid = omega_grid();
    envelope(|l| alpha_max_at(l, q, &grid), true)
}

/// b(α): smallest q of a zero crossing with this α.
pub fn boundary_b(alpha: f64) -> Option<f64> {
    let grid = omega_grid();
    envelope(|l| q_min_at(l, alpha, &grid), false)
}

/// Zone of (q, α) without the λ scan.
pub fn zone_of(q: f64, alpha: f64, tol: f64) -> Result<Zone> {
    if q < 0.0 || alpha < 0.0 || !q.is_finite() || !alpha.is_finite() {
        return Err(Error::InvalidParameter("zones need q >= 0 and alpha >= 0".into()));
    }
    if q >= 1.0 {
        let m1 = q - 1.0;
        let parabola = m1 + m1 * m1 / 3.0;
        if (alpha - parabola).abs() <= tol * (1.0 + parabola) {
            return Err(Error::OnBoundary(format!("alpha = {alpha} on the parabola")));
        }
        if alpha < parabola {
            return Ok(Zone::Red);
        }
        let m = boundary_m(q).unwrap_or(parabola);
        if (alpha - m).abs() <= tol * (1.0 + m) {
            return Err(Error::OnBoundary(format!("alpha = {alpha} on m(q) = {m}")));
        }
        Ok(if alpha < m { Zone::Magenta } else { Zone::Green })
    } else {
        match boundary_b(alpha) {
            Some(b) if b < 1.0 => {
                if (q - b).abs() <= tol * (1.0 + b) {
                    return Err(Error::OnBoundary(format!("q = {q} on b(alpha) = {b}")));
                }
                Ok(if q > b { Zone::Blue } else { Zone::Gray })
            }
            _ => Ok(Zone::Gray),
        }
    }
}

/// n_p at one λ, nudging λ off a zero crossing when the contour hits one.
pub fn poles_at_lambda(q: f64, alpha: f64, lambda: f64) -> Result<usize> {
    let mut l = lambda;
    for attempt in 0..6 {
        let p = XferParams::new(q, alpha, l)?;
        match count_unstable_poles_auto(&p) {
            Ok((n, _)) => return Ok(n),
            Err(Error::ZeroCrossingOnContour { .. }) | Err(Error::ContourUnresolved { .. }) => {
                l = lambda + 1e-7 * (attempt + 1) as f64 * (1.0 + lambda);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::ZeroCrossingOnContour {
        min_modulus: 0.0,
        at: Complex64::new(0.0, 0.0),
    })
}

/// n_p along a λ grid.
pub fn lambda_scan(q: f64, alpha: f64, lambdas: &[f64]) -> Result<Vec<(f64, usize)>> {
    lambdas
        .par_iter()
        .map(|&l| poles_at_lambda(q, alpha, l).map(|n| (l, n)))
        .collect()
}

/// Collapses repeated counts.
pub fn pattern_of(scan: &[(f64, usize)]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &(_, n) in scan {
        if out.last() != Some(&n) {
            out.push(n);
        }
    }
    out
}

/// λ grid of spacing `step` on [0, hi], extended until the count has
/// settled at zero for a while.
pub fn scan_until_settled(q: f64, alpha: f64, step: f64, hi: f64) -> Result<Vec<(f64, usize)>> {
    let mut upper = hi;
    loop {
        let n = (upper / step).round() as usize;
        let lams: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
        let scan = lambda_scan(q, alpha, &lams)?;
        // Last breakpoint must sit in the first half of the range.
        let last_change = scan
            .windows(2)
            .rposition(|w| w[0].1 != w[1].1)
            .map(|i| scan[i + 1].0)
            .unwrap_or(0.0);
        // A late change can hide beyond the range, so probe twice as far.
        let tail = scan.last().map(|x| x.1).unwrap_or(0);
        let probe = poles_at_lambda(q, alpha, 2.0 * upper)?;
        if (2.0 * last_change <= upper && probe == tail) || upper > 64.0 {
            return Ok(scan);
        }
        upper = (2.0 * last_change).max(2.0 * upper);
    }
}

fn bisect_threshold(q: f64, alpha: f64, lo: (f64, usize), hi: (f64, usize)) -> f64 {
    let (mut a, mut b) = (lo.0, hi.0);
    while b - a > 1e-6 {
        let m = 0.5 * (a + b);
        match poles_at_lambda(q, alpha, m) {
            Ok(n) if n == lo.1 => a = m,
            Ok(_) => b = m,
            Err(_) => break,
        }
    }
    0.5 * (a + b)
}

/// Zone, pattern and λ breakpoints of (q, α).
pub fn classify_zone(q: f64, alpha: f64) -> Result<ZonePattern> {
    let zone = zone_of(q, alpha, 1e-6)?;
    let scan = scan_until_settled(q, alpha, 0.01, 3.0)?;
    let scanned = pattern_of(&scan);
    let mut thresholds = Vec::new();
    for w in scan.windows(2) {
        if w[0].1 != w[1].1 {
            thresholds.push(bisect_threshold(q, alpha, w[0], w[1]));
        }
    }
    Ok(ZonePattern {
        zone,
        pattern: zone.pattern(),
        thresholds,
        scanned_pattern: scanned,
    })
}

/// Sampled (q, α) points of a traced curve.
pub type Curve = Vec<(f64, f64)>;

/// Traced zone curves for plotting: m(q) on [1, q_max] and b(α) on (0, α_max].
pub fn trace_zone_curves(q_max: f64, alpha_max: f64, points: usize) -> (Curve, Curve) {
    let m: Vec<(f64, f64)> = (0..points)
        .into_par_iter()
        .filter_map(|i| {
            let q = 1.0 + (q_max - 1.0) * (i as f64 + 0.5) / points as f64;
            boundary_m(q).map(|a| (q, a))
        })
        .collect();
    let b: Vec<(f64, f64)> = (0..points)
        .into_par_iter()
        .filter_map(|i| {
            let a = alpha_max * (i as f64 + 0.5) / points as f64;
            boundary_b(a).map(|q| (q, a))
        })
        .collect();
    (m, b)
}
