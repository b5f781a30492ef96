//! Nonlinear closed-loop simulation by the method of lines with
//! implicit-midpoint time stepping and set-valued bit sticking.

use faer::prelude::Solve;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::scenario::{self, ScenarioParams};
use crate::ssmodel::{self, Controller};
use crate::xfer::XferParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    #[default]
    None,
    /// Constant level over the window.
    Square,
    /// Half-sine bump over the window.
    Pulse,
    /// Starts at full level and decays at `rate_a`.
    ExpDecayingPulse,
    /// Sine of angular frequency `omega_d` over the window.
    Oscillatory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    pub t_start: f64,
    pub duration: f64,
    /// Fraction of |kink| unless `absolute` is set.
    pub magnitude: f64,
    #[serde(default)]
    pub absolute: bool,
    #[serde(default)]
    pub rate_a: f64,
    #[serde(default = "default_omega_d")]
    pub omega_d: f64,
}

fn default_omega_d() -> f64 {
    2.0 * std::f64::consts::PI
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        DisturbanceSpec {
            kind: DisturbanceKind::None,
            t_start: 0.0,
            duration: 0.0,
            magnitude: 0.0,
            absolute: false,
            rate_a: 0.0,
            omega_d: default_omega_d(),
        }
    }
}

impl DisturbanceSpec {
    pub fn square(t_start: f64, duration: f64, magnitude: f64) -> Self {
        DisturbanceSpec {
            kind: DisturbanceKind::Square,
            t_start,
            duration,
            magnitude,
            ..Default::default()
        }
    }

    /// Parses `kind:start,duration,magnitude[,extra]`, where `extra` is the
    /// decay rate or the angular frequency.
    pub fn parse(text: &str) -> Result<Self> {
        if text == "none" {
            return Ok(Self::default());
        }
        let bad = || Error::InvalidParameter(format!("bad disturbance '{text}'"));
        let (kind, rest) = text.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if nums.len() < 3 {
            return Err(bad());
        }
        let mut d = DisturbanceSpec {
            t_start: nums[0],
            duration: nums[1],
            magnitude: nums[2],
            ..Default::default()
        };
        d.kind = match kind {
            "square" => DisturbanceKind::Square,
            "pulse" => DisturbanceKind::Pulse,
            "exp" | "exp_decaying_pulse" => {
                d.rate_a = *nums.get(3).ok_or_else(bad)?;
                DisturbanceKind::ExpDecayingPulse
            }
            "osc" | "oscillatory" => {
                d.omega_d = *nums.get(3).ok_or_else(bad)?;
                DisturbanceKind::Oscillatory
            }
            _ => return Err(bad()),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration >= 0.0) || !self.magnitude.is_finite() || !self.t_start.is_finite() {
            return Err(Error::InvalidParameter("disturbance window is invalid".into()));
        }
        if self.kind == DisturbanceKind::ExpDecayingPulse && !(self.rate_a > 0.0) {
            return Err(Error::InvalidParameter("decay rate must be positive".into()));
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.t_start + self.duration
    }

    /// Disturbance value at time `t` with the level scaled by `unit`.
    pub fn value(&self, t: f64, unit: f64) -> f64 {
        if self.kind == DisturbanceKind::None || t < self.t_start || t > self.end() {
            return 0.0;
        }
        let level = if self.absolute { self.magnitude } else { self.magnitude * unit };
        let tau = t - self.t_start;
        match self.kind {
            DisturbanceKind::None => 0.0,
            DisturbanceKind::Square => level,
            DisturbanceKind::Pulse => {
                if self.duration == 0.0 {
                    0.0
                } else {
                    level * (std::f64::consts::PI * tau / self.duration).sin()
                }
            }
            DisturbanceKind::ExpDecayingPulse => level * (-self.rate_a * tau).exp(),
            DisturbanceKind::Oscillatory => level * (self.omega_d * tau).sin(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Switch-on time of the controller; `None` keeps the loop open.
    pub controller_on_at: Option<f64>,
    /// Initial bit-speed deficit as a fraction of the steady rotary speed.
    pub initial_offset: f64,
    pub disturbance: DisturbanceSpec,
    pub record_stride: usize,
    /// Drop ψ and keep only the linearized boundary.
    #[serde(default)]
    pub linear: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 200,
            dt: 2e-3,
            t_final: 40.0,
            controller_on_at: None,
            initial_offset: 0.6,
            disturbance: DisturbanceSpec::default(),
            record_stride: 10,
            linear: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_final > 0.0) {
            return Err(Error::InvalidParameter("dt and t_final must be positive".into()));
        }
        if self.n < 50 {
            return Err(Error::InvalidParameter(format!("need N >= 50 (got {})", self.n)));
        }
        if let Some(t) = self.controller_on_at {
            if !(0.0..=self.t_final).contains(&t) {
                return Err(Error::InvalidParameter("controller_on_at outside [0, t_final]".into()));
            }
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter("record_stride must be >= 1".into()));
        }
        self.disturbance.validate()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub u: Vec<f64>,
    pub theta_dot_bit: Vec<f64>,
    pub omega_cmd: Vec<f64>,
    pub stick_intervals: Vec<(f64, f64)>,
}

impl TimeSeries {
    fn push(&mut self, t: f64, y1: f64, y2: f64, u: f64, bit: f64, cmd: f64) {
        self.t.push(t);
        self.y1.push(y1);
        self.y2.push(y2);
        self.u.push(u);
        self.theta_dot_bit.push(bit);
        self.omega_cmd.push(cmd);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// One phase of the loop: z' = A z + b (f + w) with implicit-midpoint
/// propagator Φ and input gain g.
struct Stepper {
    phi: RMat,
    g: RMat,
    u_row: Option<RMat>,
}

impl Stepper {
    fn new(a: &RMat, b: &RMat, u_row: Option<RMat>, dt: f64) -> Self {
        let n = a.nrows();
        let half = a.clone() * faer::Scale(0.5 * dt);
        let m = linalg::identity(n) - &half;
        let lu = m.partial_piv_lu();
        let phi = lu.solve(&(linalg::identity(n) + &half));
        let g = lu.solve(b) * faer::Scale(dt);
        Stepper { phi, g, u_row }
    }
}

/// Solves v = a + β·ψ(v), returning (v, effective ψ). When neither branch
/// has a root the bit sticks and ψ takes the value that pins v at the kink.
fn solve_boundary(
    psi: &dyn Fn(f64, f64) -> f64,
    kink: f64,
    a: f64,
    beta: f64,
    prefer_above: bool,
    t: f64,
) -> Result<(f64, f64)> {
    let f = |v: f64, side: f64| v - a - beta * psi(v, side);
    let above = f(kink, 1.0);
    let below = f(kink, -1.0);
    let root_above = above < 0.0;
    let root_below = below > 0.0;
    let side = match (root_above, root_below) {
        (false, false) => return Ok((kink, (kink - a) / beta)),
        (true, true) => {
            if prefer_above {
                1.0
            } else {
                -1.0
            }
        }
        (true, false) => 1.0,
        (false, true) => -1.0,
    };
    let mut inner = kink;
    let mut span = a.abs().max(kink.abs()).max(1.0);
    let mut outer = kink + side * span;
    let mut tries = 0;
    while f(outer, side) * side < 0.0 {
        inner = outer;
        span *= 2.0;
        outer = kink + side * span;
        tries += 1;
        if tries > 60 {
            return Err(Error::StepTooLarge { t });
        }
    }
    let (mut lo, mut hi) = (inner, outer);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid, side) * side < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= 1e-15 * mid.abs().max(1.0) {
            break;
        }
    }
    let v = 0.5 * (lo + hi);
    Ok((v, psi(v, side)))
}

/// Integrates the nonlinear loop for scenario `sp` and optional controller.
pub fn run(sp: &ScenarioParams, k: Option<&Controller>, cfg: &SimConfig) -> Result<TimeSeries> {
    let sp_c = sp.clone();
    let psi = move |v: f64, side: f64| scenario::psi_branch(&sp_c, v, side);
    run_with(sp, k, cfg, &psi)
}

/// As `run`, with the boundary nonlinearity supplied as ψ(v, branch side).
pub fn run_with(
    sp: &ScenarioParams,
    k: Option<&Controller>,
    cfg: &SimConfig,
    psi: &dyn Fn(f64, f64) -> f64,
) -> Result<TimeSeries> {
    cfg.validate()?;
    if cfg.controller_on_at.is_some() && k.is_none() {
        return Err(Error::InvalidParameter("controller_on_at set without a controller".into()));
    }
    let dim = scenario::derive_dimensionless(sp)?;
    let p = XferParams::from(dim);
    let kink = dim.kink;
    let unit = kink.abs();
    let plant = ssmodel::discretize(&p, cfg.n, 0.0)?.plant;
    let np = plant.order();
    let m = cfg.n + 1;
    let (iv0, ivn) = (m, m + cfg.n);
    let nk = k.map_or(0, |k| k.order());
    let dim_z = np + nk;

    let pad = |a: &RMat, rows: usize, cols: usize| {
        RMat::from_fn(rows, cols, |i, j| {
            if i < a.nrows() && j < a.ncols() {
                a[(i, j)]
            } else {
                0.0
            }
        })
    };
    let bw = RMat::from_fn(np, 1, |i, _| plant.b[(i, 0)]);
    // Controller off: plant alone, controller state frozen.
    let off = Stepper::new(&pad(&plant.a, dim_z, dim_z), &pad(&bw, dim_z, 1), None, cfg.dt);
    let on = match k {
        Some(k) if cfg.controller_on_at.is_some() => {
            let cl = ssmodel::close_loop_ss(&plant, k)?;
            let iu = cl.output_index("u")?;
            let u_row = RMat::from_fn(1, dim_z, |_, j| cl.c[(iu, j)]);
            Some(Stepper::new(&cl.a, &cl.b, Some(u_row), cfg.dt))
        }
        _ => None,
    };
    let on_at = cfg.controller_on_at.unwrap_or(f64::INFINITY);

    let mut z = RMat::zeros(dim_z, 1);
    for i in 0..m {
        z[(m + i, 0)] = -cfg.initial_offset * unit;
    }
    let steps = (cfg.t_final / cfg.dt).round() as usize;
    let mut ts = TimeSeries::default();
    let record = |ts: &mut TimeSeries, t: f64, z: &RMat, u: f64| -> Result<()> {
        let (y1, y2) = (z[(iv0, 0)], z[(ivn, 0)]);
        let cmd = scenario::control_backmap(sp, u, y2)?;
        ts.push(t, y1, y2, u, sp.omega + dim.time_scale * y1, cmd);
        Ok(())
    };
    let u_of = |z: &RMat, st: &Stepper| st.u_row.as_ref().map_or(0.0, |r| (r * z)[(0, 0)]);
    record(&mut ts, 0.0, &z, 0.0)?;
    for step in 0..steps {
        let t0 = step as f64 * cfg.dt;
        let tm = t0 + 0.5 * cfg.dt;
        let st = match &on {
            Some(s) if tm >= on_at => s,
            _ => &off,
        };
        let w = cfg.disturbance.value(tm, unit);
        let free = &st.phi * &z;
        let g0 = st.g[(iv0, 0)];
        let v_start = z[(iv0, 0)];
        let a = 0.5 * (v_start + free[(iv0, 0)] + g0 * w);
        let beta = 0.5 * g0;
        let forcing = if cfg.linear {
            0.0
        } else {
            solve_boundary(psi, kink, a, beta, v_start >= kink, tm)?.1
        };
        z = free + &st.g * faer::Scale(forcing + w);
        let norm = linalg::frobenius(&z);
        if !norm.is_finite() || norm > 1e9 {
            return Err(Error::BlowUp { t: t0 + cfg.dt });
        }
        if (step + 1) % cfg.record_stride == 0 || step + 1 == steps {
            let t1 = t0 + cfg.dt;
            let st1 = match &on {
                Some(s) if t1 >= on_at => s,
                _ => &off,
            };
            record(&mut ts, t1, &z, u_of(&z, st1))?;
        }
    }
    let eps_v = 0.02 * sp.omega;
    ts.stick_intervals = detect_stick(&ts, eps_v, 0.1);
    Ok(ts)
}

/// Maximal intervals where |θ̇_bit| < eps_v lasting at least `min_dur`.
pub fn detect_stick(ts: &TimeSeries, eps_v: f64, min_dur: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start: Option<f64> = None;
    for (i, (&t, &v)) in ts.t.iter().zip(&ts.theta_dot_bit).enumerate() {
        let inside = v.abs() < eps_v;
        match (inside, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                let end = ts.t[i - 1];
                if end - s >= min_dur - 1e-12 {
                    out.push((s, end));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let (Some(s), Some(&end)) = (start, ts.t.last()) {
        if end - s >= min_dur - 1e-12 {
            out.push((s, end));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviationReport {
    pub max_deviation: f64,
    pub at: f64,
    /// sup |y1| of the nonlinear run, for scale.
    pub amplitude: f64,
    pub relative: f64,
}

/// Sup-norm distance between the nonlinear and linearized y1 trajectories.
pub fn linear_vs_nonlinear(
    sp: &ScenarioParams,
    k: Option<&Controller>,
    cfg: &SimConfig,
) -> Result<DeviationReport> {
    let nl = run(sp, k, &SimConfig { linear: false, ..cfg.clone() })?;
    let lin = run(sp, k, &SimConfig { linear: true, ..cfg.clone() })?;
    Ok(deviation(&nl, &lin))
}

pub fn deviation(a: &TimeSeries, b: &TimeSeries) -> DeviationReport {
    let mut worst = (0.0, 0.0);
    for ((t, x), y) in a.t.iter().zip(&a.y1).zip(&b.y1) {
        let d = (x - y).abs();
        if d > worst.0 {
            worst = (d, *t);
        }
    }
    let amplitude = a.y1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    DeviationReport {
        max_deviation: worst.0,
        at: worst.1,
        amplitude,
        relative: if amplitude > 0.0 { worst.0 / amplitude } else { 0.0 },
    }
}

/// Least-squares decay rate of ln‖(y1, y2)‖ over [t0, t1].
pub fn fitted_decay_rate(ts: &TimeSeries, t0: f64, t1: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ts
        .t
        .iter()
        .zip(ts.y1.iter().zip(&ts.y2))
        .filter(|(t, _)| **t >= t0 && **t <= t1)
        .map(|(t, (a, b))| (*t, (a * a + b * b).sqrt()))
        .filter(|(_, n)| *n > 0.0)
        .map(|(t, n)| (t, n.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
    let (mt, my) = (st / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| {
        (a + (t - mt) * (y - my), b + (t - mt) * (t - mt))
    });
    Some(-num / den)
}

pub fn write_csv(ts: &TimeSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "y1", "y2", "u", "theta_dot_bit", "omega_cmd"])?;
    for i in 0..ts.len() {
        w.write_record(&[
            ts.t[i].to_string(),
            ts.y1[i].to_string(),
            ts.y2[i].to_string(),
            ts.u[i].to_string(),
            ts.theta_dot_bit[i].to_string(),
            ts.omega_cmd[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    scenario: &'a str,
    controller: Option<&'a str>,
    config: &'a SimConfig,
    stick_intervals: &'a [(f64, f64)],
}

pub fn write_sidecar(
    ts: &TimeSeries,
    sp: &ScenarioParams,
    k: Option<&Controller>,
    cfg: &SimConfig,
    path: &Path,
) -> Result<()> {
    let side = Sidecar {
        scenario: &sp.name,
        controller: k.map(|k| k.name.as_str()),
        config: cfg,
        stick_intervals: &ts.stick_intervals,
    };
    std::fs::write(path, serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

fn polyline(t: &[f64], y: &[f64], x0: f64, y0: f64, w: f64, h: f64) -> (String, f64, f64) {
    let (tmin, tmax) = (t[0], *t.last().unwrap());
    let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let tspan = if tmax > tmin { tmax - tmin } else { 1.0 };
    let pts: Vec<String> = t
        .iter()
        .zip(y)
        .map(|(ti, yi)| {
            format!(
                "{:.2},{:.2}",
                x0 + w * (ti - tmin) / tspan,
                y0 + h - h * (yi - lo) / span
            )
        })
        .collect();
    (pts.join(" "), lo, hi)
}

/// Two stacked line charts: bit speed (rad/s) and control input.
pub fn render_svg(ts: &TimeSeries) -> String {
    let (w, h) = (800.0, 220.0);
    let mut out = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"880\" height=\"520\" font-family=\"sans-serif\" font-size=\"12\">\n",
    );
    if ts.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    for (row, (label, y)) in [("bit speed [rad/s]", &ts.theta_dot_bit), ("u", &ts.u)]
        .into_iter()
        .enumerate()
    {
        let y0 = 20.0 + row as f64 * (h + 40.0);
        let (pts, lo, hi) = polyline(&ts.t, y, 60.0, y0, w, h);
        out.push_str(&format!(
            "<rect x=\"60\" y=\"{y0}\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"#888\"/>\n\
             <text x=\"65\" y=\"{}\">{label}</text>\n\
             <text x=\"5\" y=\"{}\">{hi:.3}</text><text x=\"5\" y=\"{}\">{lo:.3}</text>\n\
             <polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1\" points=\"{pts}\"/>\n",
            y0 + 14.0,
            y0 + 10.0,
            y0 + h
        ));
    }
    out.push_str(&format!(
        "<text x=\"60\" y=\"515\">t = {:.2} .. {:.2}</text>\n</svg>\n",
        ts.t[0],
        ts.t.last().unwrap()
    ));
    out
}

pub fn write_svg(ts: &TimeSeries, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(ts))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(t: &[f64], v: &[f64]) -> TimeSeries {
        TimeSeries {
            t: t.to_vec(),
            theta_dot_bit: v.to_vec(),
            ..Default::default()
        }
    }

    #[test]
    fn constant_speed_has_no_stick() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        assert!(detect_stick(&trace(&t, &vec![10.0; 100]), 0.2, 0.1).is_empty());
    }

    #[test]
    fn constructed_stick_interval() {
        let t: Vec<f64> = (0..=500).map(|i| i as f64 * 0.01).collect();
        let v: Vec<f64> = t
            .iter()
            .map(|&t| if (2.0..=3.0).contains(&t) { 0.0 } else { 5.0 })
            .collect();
        let iv = detect_stick(&trace(&t, &v), 0.2, 0.1);
        assert_eq!(iv.len(), 1);
        assert!((iv[0].0 - 2.0).abs() < 1e-9 && (iv[0].1 - 3.0).abs() < 1e-9);
    }

    #[test]
    fn equilibrium_stays_put() {
        let sp = ScenarioParams::fixture("gray").unwrap();
        let k = Controller::fixture("gray").unwrap();
        let cfg = SimConfig {
            n: 50,
            t_final: 5.0,
            controller_on_at: Some(1.0),
            initial_offset: 0.0,
            ..Default::default()
        };
        let ts = run(&sp, Some(&k), &cfg).unwrap();
        assert!(ts.y1.iter().chain(&ts.u).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn disturbance_parsing() {
        let d = DisturbanceSpec::parse("square:15,1,0.6").unwrap();
        assert_eq!(d.kind, DisturbanceKind::Square);
        assert_eq!(d.value(15.5, 2.0), 1.2);
        assert_eq!(d.value(16.5, 2.0), 0.0);
        assert!(DisturbanceSpec::parse("square:1,2").is_err());
        assert!(DisturbanceSpec::parse("exp:0,1,1").is_err());
        let e = DisturbanceSpec::parse("exp:0,10,1,0.5").unwrap();
        assert!((e.value(2.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn boundary_solve_sticks_between_branches() {
        // ψ jumps from +1 to −1 across a kink at 0.
        let psi = |_v: f64, side: f64| -side;
        let (v, f) = solve_boundary(&psi, 0.0, 0.05, 0.1, true, 0.0).unwrap();
        assert_eq!(v, 0.0);
        assert!((f + 0.5).abs() < 1e-12);
        let (v, _) = solve_boundary(&psi, 0.0, 1.0, 0.1, true, 0.0).unwrap();
        assert!((v - 0.9).abs() < 1e-12);
    }

    #[test]
    fn zero_nonlinearity_matches_linear_run() {
        let sp = ScenarioParams::fixture("gray").unwrap();
        let k = Controller::fixture("gray").unwrap();
        let cfg = SimConfig {
            n: 50,
            t_final: 5.0,
            controller_on_at: Some(1.0),
            ..Default::default()
        };
        let zero = |_v: f64, _s: f64| 0.0;
        let a = run_with(&sp, Some(&k), &cfg, &zero).unwrap();
        let b = run(&sp, Some(&k), &SimConfig { linear: true, ..cfg }).unwrap();
        let d = deviation(&a, &b);
        assert!(d.max_deviation < 1e-12, "{d:?}");
    }
}
