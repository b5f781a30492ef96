//! Fixed-structure controller synthesis on discretized design plants by
//! exact-penalty direct search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::RMat;
use crate::norms::{self, PeakGainConfig};
use crate::scenario::{self, ScenarioParams, SectorBounds};
use crate::ssmodel::{self, Controller, DesignPlants, StateSpace};
use crate::xfer::XferParams;

/// Integrator leak and derivative filter constant of the PID forms.
pub const PID_LEAK: f64 = 1e-2;
pub const PID_FILTER: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// Tridiagonal A with full B, C, D.
    #[default]
    Tridiagonal,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerStructure {
    StateSpaceOrderK {
        k: usize,
        #[serde(default)]
        encoding: Encoding,
    },
    /// PID on the bit speed only.
    PidSingle,
    /// Independent PIDs on both measurements, summed.
    PidSum,
}

impl Default for ControllerStructure {
    fn default() -> Self {
        ControllerStructure::StateSpaceOrderK {
            k: 5,
            encoding: Encoding::Tridiagonal,
        }
    }
}

impl ControllerStructure {
    pub fn order(k: usize) -> Self {
        ControllerStructure::StateSpaceOrderK {
            k,
            encoding: Encoding::Tridiagonal,
        }
    }

    pub fn parameter_count(&self) -> usize {
        match *self {
            ControllerStructure::StateSpaceOrderK { k, encoding } => {
                let a = match encoding {
                    Encoding::Full => k * k,
                    Encoding::Tridiagonal => (3 * k).saturating_sub(2),
                };
                a + 2 * k + k + 2
            }
            ControllerStructure::PidSingle => 3,
            ControllerStructure::PidSum => 6,
        }
    }

    /// Controller described by the parameter vector `x`.
    pub fn decode(&self, x: &[f64]) -> Result<Controller> {
        if x.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                x.len()
            )));
        }
        match *self {
            ControllerStructure::StateSpaceOrderK { k, encoding } => {
                let mut it = x.iter().copied();
                let mut a = RMat::zeros(k, k);
                match encoding {
                    Encoding::Full => {
                        for i in 0..k {
                            for j in 0..k {
                                a[(i, j)] = it.next().unwrap();
                            }
                        }
                    }
                    Encoding::Tridiagonal => {
                        for i in 0..k {
                            a[(i, i)] = it.next().unwrap();
                        }
                        for i in 1..k {
                            a[(i - 1, i)] = it.next().unwrap();
                        }
                        for i in 1..k {
                            a[(i, i - 1)] = it.next().unwrap();
                        }
                    }
                }
                let mut b = RMat::zeros(k, 2);
                for i in 0..k {
                    for j in 0..2 {
                        b[(i, j)] = it.next().unwrap();
                    }
                }
                let c = RMat::from_fn(1, k, |_, _| it.next().unwrap());
                let d = RMat::from_fn(1, 2, |_, _| it.next().unwrap());
                Controller::from_matrices("synth", a, b, c, d)
            }
            ControllerStructure::PidSingle => pid(&[(x[0], x[1], x[2]), (0.0, 0.0, 0.0)], 1),
            ControllerStructure::PidSum => pid(&[(x[0], x[1], x[2]), (x[3], x[4], x[5])], 2),
        }
    }

    /// Parameter vector of a controller with this structure.
    pub fn encode(&self, k: &Controller) -> Result<Vec<f64>> {
        let ControllerStructure::StateSpaceOrderK { k: order, encoding } = *self else {
            return Err(Error::InvalidParameter("only state-space structures can be encoded".into()));
        };
        let r = &k.realization;
        if r.order() != order {
            return Err(Error::DimensionMismatch(format!(
                "controller order {} != {order}",
                r.order()
            )));
        }
        let mut x = Vec::with_capacity(self.parameter_count());
        match encoding {
            Encoding::Full => {
                for i in 0..order {
                    for j in 0..order {
                        x.push(r.a[(i, j)]);
                    }
                }
            }
            Encoding::Tridiagonal => {
                for i in 0..order {
                    for j in 0..order {
                        if i.abs_diff(j) > 1 && r.a[(i, j)] != 0.0 {
                            return Err(Error::InvalidParameter("A is not tridiagonal".into()));
                        }
                    }
                }
                x.extend((0..order).map(|i| r.a[(i, i)]));
                x.extend((1..order).map(|i| r.a[(i - 1, i)]));
                x.extend((1..order).map(|i| r.a[(i, i - 1)]));
            }
        }
        for i in 0..order {
            x.push(r.b[(i, 0)]);
            x.push(r.b[(i, 1)]);
        }
        x.extend((0..order).map(|j| r.c[(0, j)]));
        x.push(r.d[(0, 0)]);
        x.push(r.d[(0, 1)]);
        Ok(x)
    }
}

/// Leaky PID with filtered derivative on each measurement:
/// kp + ki/(s + leak) + kd·s/(τs + 1).
fn pid(gains: &[(f64, f64, f64); 2], channels: usize) -> Result<Controller> {
    let n = 2 * channels;
    let tau = PID_FILTER;
    let mut a = RMat::zeros(n, n);
    let mut b = RMat::zeros(n, 2);
    let mut c = RMat::zeros(1, n);
    let mut d = RMat::zeros(1, 2);
    for (ch, &(kp, ki, kd)) in gains.iter().enumerate().take(channels) {
        let (i, f) = (2 * ch, 2 * ch + 1);
        a[(i, i)] = -PID_LEAK;
        a[(f, f)] = -1.0 / tau;
        b[(i, ch)] = 1.0;
        b[(f, ch)] = 1.0 / tau;
        c[(0, i)] = ki;
        c[(0, f)] = -kd / tau;
        d[(0, ch)] = kp + kd / tau;
    }
    Controller::from_matrices("pid", a, b, c, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Program {
    /// Minimize r‖T̃_ze‖_∞ subject to ‖W_u T_uw‖_∞ ≤ 1.
    SectorProgram,
    /// Minimize ‖T_y1w‖_∞ subject to r‖T̃_ze‖_pk < 1 and the weight bound.
    OvershootPk,
    /// As `OvershootPk` with the surrogate ‖T̃_ze‖₂ ≤ ρ.
    OvershootH2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Name(String),
    Params { q: f64, alpha: f64, lambda: f64 },
}

impl ScenarioRef {
    pub fn params(&self) -> Result<XferParams> {
        match self {
            ScenarioRef::Name(n) => {
                Ok(XferParams::from(scenario::derive_dimensionless(&ScenarioParams::fixture(n)?)?))
            }
            ScenarioRef::Params { q, alpha, lambda } => XferParams::new(*q, *alpha, *lambda),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SectorSlopes {
    pub q_l: f64,
    pub q_u: f64,
}

fn default_n_design() -> usize {
    50
}

fn default_max_evals() -> usize {
    6000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthProblem {
    pub scenario: ScenarioRef,
    pub program: Program,
    pub sector: SectorSlopes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default = "default_n_design")]
    pub n_design: usize,
    /// One weight per constraint; missing entries default to 10.
    #[serde(default)]
    pub penalty_weights: Vec<f64>,
    #[serde(default)]
    pub structure: ControllerStructure,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
}

impl SynthProblem {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: SynthProblem = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.program == Program::OvershootH2 && !self.rho.is_some_and(|r| r > 0.0) {
            return Err(Error::InvalidParameter("overshoot_h2 needs rho > 0".into()));
        }
        if self.n_design < 2 {
            return Err(Error::InvalidParameter("n_design must be >= 2".into()));
        }
        if self.penalty_weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidParameter("penalty weights must be positive".into()));
        }
        SectorBounds::from_slopes(self.sector.q_l, self.sector.q_u)?;
        Ok(())
    }

    /// Builds the design plants.
    pub fn prepare(&self) -> Result<Prepared> {
        self.validate()?;
        let p = self.scenario.params()?;
        let sb = SectorBounds::from_slopes(self.sector.q_l, self.sector.q_u)?;
        let plants = DesignPlants::new(&p, self.n_design, sb.c)?;
        Ok(Prepared {
            program: self.program,
            sector: sb,
            rho: self.rho.unwrap_or(f64::INFINITY),
            plants,
            weights: self.penalty_weights.clone(),
            params: Some(p),
        })
    }
}

/// A problem with its design plants built.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub program: Program,
    pub sector: SectorBounds,
    pub rho: f64,
    pub plants: DesignPlants,
    pub weights: Vec<f64>,
    pub params: Option<XferParams>,
}

impl Prepared {
    /// Problem on caller-supplied plants with inputs (w, u) and outputs
    /// (z, y1, y2).
    pub fn from_plants(program: Program, sector: SectorBounds, rho: f64, nominal: StateSpace, shifted: StateSpace) -> Self {
        Prepared {
            program,
            sector,
            rho,
            plants: DesignPlants {
                nominal,
                shifted,
                n: 0,
                shift_c: sector.c,
            },
            weights: Vec::new(),
            params: None,
        }
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.get(i).copied().unwrap_or(10.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    /// Program objective, +∞ when a loop is unstable.
    pub value: f64,
    /// Constraint slacks (bound − value); negative means violated.
    pub slacks: Vec<f64>,
    /// Worst spectral abscissa of the nominal and shifted loops.
    pub abscissa: f64,
    /// Exact-penalty merit.
    pub penalty: f64,
}

fn unstable(abscissa: f64) -> Evaluation {
    Evaluation {
        value: f64::INFINITY,
        slacks: Vec::new(),
        abscissa,
        penalty: f64::INFINITY,
    }
}

/// Objective and slacks of the program for the controller `k`.
pub fn evaluate_controller(prob: &Prepared, k: &Controller) -> Evaluation {
    let loops = match prob.plants.close(k) {
        Ok(l) => l,
        Err(_) => return unstable(f64::INFINITY),
    };
    let (nominal, shifted) = match (loops.nominal.eigenvalues(), loops.shifted.eigenvalues()) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return unstable(f64::INFINITY),
    };
    let abscissa = |v: &[num_complex::Complex64]| v.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let ab = abscissa(&nominal).max(abscissa(&shifted));
    if !(ab < 0.0) {
        return unstable(ab);
    }
    let r = prob.sector.r;
    let weighted = match ssmodel::series(&loops.t_uw, &ssmodel::weight_wu()) {
        Ok(w) => w,
        Err(_) => return unstable(ab),
    };
    // The loop spectra carry over to every channel; the weight adds its pole.
    let mut weighted_poles = nominal.clone();
    weighted_poles.push(num_complex::Complex64::new(-2e5, 0.0));
    let inner = || -> Result<(f64, Vec<f64>)> {
        let wu = norms::hinf_with_poles(&weighted, &weighted_poles)?.value;
        Ok(match prob.program {
            Program::SectorProgram => (
                r * norms::hinf_with_poles(&loops.t_ze_shifted, &shifted)?.value,
                vec![1.0 - wu],
            ),
            Program::OvershootPk => {
                let pk = norms::peak_gain(&loops.t_ze_shifted, &PeakGainConfig::default())?.value;
                (
                    norms::hinf_with_poles(&loops.t_y1w, &nominal)?.value,
                    vec![1.0 - r * pk, 1.0 - wu],
                )
            }
            Program::OvershootH2 => {
                let h2 = norms::h2_of_stable(&loops.t_ze_shifted)?.value;
                (
                    norms::hinf_with_poles(&loops.t_y1w, &nominal)?.value,
                    vec![prob.rho - h2, 1.0 - wu],
                )
            }
        })
    };
    match inner() {
        Ok((value, slacks)) => {
            let penalty = value
                + slacks
                    .iter()
                    .enumerate()
                    .map(|(i, s)| prob.weight(i) * (-s).max(0.0))
                    .sum::<f64>();
            Evaluation {
                value,
                slacks,
                abscissa: ab,
                penalty,
            }
        }
        Err(_) => unstable(ab),
    }
}

pub fn objective(prob: &Prepared, structure: &ControllerStructure, x: &[f64]) -> Result<Evaluation> {
    let k = structure.decode(x)?;
    Ok(evaluate_controller(prob, &k))
}

/// Largest of the closed-loop and controller spectral abscissae.
pub fn stability_margin(prob: &Prepared, structure: &ControllerStructure, x: &[f64]) -> f64 {
    let Ok(k) = structure.decode(x) else {
        return f64::INFINITY;
    };
    let own = if k.order() > 0 {
        k.spectral_abscissa().unwrap_or(f64::INFINITY)
    } else {
        f64::NEG_INFINITY
    };
    let Ok(loops) = prob.plants.close(&k) else {
        return f64::INFINITY;
    };
    let a = loops.nominal.spectral_abscissa().unwrap_or(f64::INFINITY);
    let b = loops.shifted.spectral_abscissa().unwrap_or(f64::INFINITY);
    let m = a.max(b).max(own);
    if m.is_nan() {
        f64::INFINITY
    } else {
        m
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_evals: usize,
    pub restarts: usize,
    /// Stop as soon as the merit drops below this value.
    pub target: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            initial_step: 0.25,
            min_step: 1e-6,
            max_evals: 4000,
            restarts: 2,
            target: f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub evals: usize,
    pub step: f64,
    pub merit: f64,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub x: Vec<f64>,
    pub merit: f64,
    pub evals: usize,
    pub history: Vec<HistoryEntry>,
}

/// Compass search with relative coordinate steps, pairwise-coordinate
/// diagonal moves, expansion on success and restarts. Polls are evaluated
/// in parallel; only strict improvements are accepted.
pub fn direct_search<F>(f: F, x0: &[f64], opts: &SearchOptions) -> SearchResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut evals = 1;
    let mut history = vec![HistoryEntry {
        iteration: 0,
        evals,
        step: opts.initial_step,
        merit: fx,
    }];
    let scale = |v: f64| v.abs().max(0.1);
    let mut iteration = 0;
    for _ in 0..=opts.restarts {
        let mut step = opts.initial_step;
        while step > opts.min_step && evals < opts.max_evals && !(fx < opts.target) {
            iteration += 1;
            let mut polls: Vec<Vec<f64>> = Vec::with_capacity(2 * n + 2);
            for i in 0..n {
                for sgn in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[i] += sgn * step * scale(x[i]);
                    polls.push(y);
                }
            }
            // Deterministic pairwise moves help on coupled valleys.
            for j in 0..n.min(8) {
                let (a, b) = ((iteration + j) % n, (iteration * 7 + 3 * j + 1) % n);
                if a != b {
                    let mut y = x.clone();
                    y[a] += step * scale(x[a]);
                    y[b] -= step * scale(x[b]);
                    polls.push(y);
                }
            }
            let vals: Vec<f64> = polls.par_iter().map(|y| f(y)).collect();
            evals += polls.len();
            let best = vals
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_nan())
                .min_by(|a, b| a.1.total_cmp(b.1));
            match best {
                Some((i, &v)) if v < fx => {
                    // Try a longer move in the same direction.
                    let dir: Vec<f64> = polls[i].iter().zip(&x).map(|(p, q)| p - q).collect();
                    let far: Vec<f64> = x.iter().zip(&dir).map(|(q, d)| q + 2.0 * d).collect();
                    let vf = f(&far);
                    evals += 1;
                    if vf < v {
                        x = far;
                        fx = vf;
                        step *= 2.0;
                    } else {
                        x = polls[i].clone();
                        fx = v;
                    }
                    history.push(HistoryEntry {
                        iteration,
                        evals,
                        step,
                        merit: fx,
                    });
                }
                _ => step *= 0.5,
            }
        }
    }
    SearchResult {
        x,
        merit: fx,
        evals,
        history,
    }
}

/// Finds parameters that stabilize both design loops with a stable
/// controller, trying x = 0 first and then random seeds.
pub fn stabilize_first(prob: &Prepared, structure: &ControllerStructure, seed: u64) -> Result<Vec<f64>> {
    stabilize_first_with(prob, structure, seed, 12, 3000)
}

pub fn stabilize_first_with(
    prob: &Prepared,
    structure: &ControllerStructure,
    seed: u64,
    seeds: usize,
    evals_per_seed: usize,
) -> Result<Vec<f64>> {
    const MARGIN: f64 = -1e-3;
    let np = structure.parameter_count();
    let f = |x: &[f64]| stability_margin(prob, structure, x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (f64::INFINITY, vec![0.0; np]);
    for attempt in 0..=seeds {
        let x0 = if attempt == 0 {
            zero_start(structure)
        } else {
            random_start(structure, &mut rng)
        };
        if f(&x0) < MARGIN {
            return Ok(x0);
        }
        let opts = SearchOptions {
            initial_step: 0.5,
            max_evals: evals_per_seed,
            target: 2.0 * MARGIN,
            restarts: 1,
            ..Default::default()
        };
        let res = direct_search(f, &x0, &opts);
        if res.merit < MARGIN {
            return Ok(res.x);
        }
        if res.merit < best.0 {
            best = (res.merit, res.x);
        }
    }
    Err(Error::NoStabilizerFound {
        best_abscissa: best.0,
    })
}

/// Parameters of a controller with no input-output action and stable
/// internal modes.
pub fn zero_start(structure: &ControllerStructure) -> Vec<f64> {
    let mut x = vec![0.0; structure.parameter_count()];
    if let ControllerStructure::StateSpaceOrderK { k, encoding } = *structure {
        for i in 0..k {
            match encoding {
                Encoding::Tridiagonal => x[i] = -1.0,
                Encoding::Full => x[i * k + i] = -1.0,
            }
        }
    }
    x
}

fn random_start(structure: &ControllerStructure, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let np = structure.parameter_count();
    match *structure {
        ControllerStructure::StateSpaceOrderK { k, encoding } => {
            let mut x: Vec<f64> = (0..np).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // Stable diagonal so the controller itself starts stable.
            match encoding {
                Encoding::Tridiagonal => {
                    for v in x.iter_mut().take(k) {
                        *v = -rng.gen_range(0.5..10.0);
                    }
                }
                Encoding::Full => {
                    for i in 0..k {
                        x[i * k + i] = -rng.gen_range(0.5..10.0) - 2.0 * k as f64;
                    }
                }
            }
            x
        }
        _ => (0..np).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub x: Vec<f64>,
    pub controller: Controller,
    pub evaluation: Evaluation,
    pub history: Vec<HistoryEntry>,
}

/// Exact-penalty direct search from a stabilizing start.
pub fn optimize(
    prob: &Prepared,
    structure: &ControllerStructure,
    x0: &[f64],
    max_evals: usize,
) -> Result<Synthesis> {
    let start = objective(prob, structure, x0)?;
    if !start.penalty.is_finite() {
        return Err(Error::InvalidParameter("optimize needs a stabilizing start".into()));
    }
    let merit = |x: &[f64]| {
        let Ok(k) = structure.decode(x) else {
            return f64::INFINITY;
        };
        // Keep the controller itself stable so the Nyquist test applies.
        if k.order() > 0 && !k.spectral_abscissa().is_ok_and(|a| a < 0.0) {
            return f64::INFINITY;
        }
        evaluate_controller(prob, &k).penalty
    };
    let res = direct_search(
        merit,
        x0,
        &SearchOptions {
            max_evals,
            ..Default::default()
        },
    );
    let controller = structure.decode(&res.x)?;
    let evaluation = evaluate_controller(prob, &controller);
    Ok(Synthesis {
        x: res.x,
        controller,
        evaluation,
        history: res.history,
    })
}

pub fn write_history(history: &[HistoryEntry], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for h in history {
        w.serialize(h)?;
    }
    w.flush()?;
    Ok(())
}
