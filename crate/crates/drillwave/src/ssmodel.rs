//! State-space models: finite-difference discretization of the wave
//! equation, minimal realization, controllers and interconnections.

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat};
use crate::xfer::XferParams;

/// Dense continuous-time system with labelled inputs and outputs.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub a: RMat,
    pub b: RMat,
    pub c: RMat,
    pub d: RMat,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{}", i + 1)).collect()
}

impl StateSpace {
    pub fn new(
        a: RMat,
        b: RMat,
        c: RMat,
        d: RMat,
        inputs: Vec<String>,
        outputs: Vec<String>,
    ) -> Result<Self> {
        let n = a.nrows();
        let ok = a.ncols() == n
            && b.nrows() == n
            && c.ncols() == n
            && d.nrows() == c.nrows()
            && d.ncols() == b.ncols()
            && inputs.len() == b.ncols()
            && outputs.len() == c.nrows();
        if !ok {
            return Err(Error::DimensionMismatch(format!(
                "A {}x{}, B {}x{}, C {}x{}, D {}x{}, {} inputs, {} outputs",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols(),
                inputs.len(),
                outputs.len()
            )));
        }
        Ok(StateSpace {
            a,
            b,
            c,
            d,
            inputs,
            outputs,
        })
    }

    /// Builds a system with default labels `u1..`, `y1..`.
    pub fn unlabeled(a: RMat, b: RMat, c: RMat, d: RMat) -> Result<Self> {
        let (m, p) = (b.ncols(), c.nrows());
        Self::new(a, b, c, d, labels("u", m), labels("y", p))
    }

    pub fn from_rows(
        a: &[Vec<f64>],
        b: &[Vec<f64>],
        c: &[Vec<f64>],
        d: &[Vec<f64>],
    ) -> Result<Self> {
        let a = linalg::from_rows(a)?;
        let n = a.nrows();
        let b = if b.is_empty() { Mat::zeros(n, 0) } else { linalg::from_rows(b)? };
        let c = if c.is_empty() { Mat::zeros(0, n) } else { linalg::from_rows(c)? };
        let d = linalg::from_rows(d)?;
        // An order-0 system still needs its B and C shapes.
        let b = if n == 0 { Mat::zeros(0, d.ncols()) } else { b };
        let c = if n == 0 { Mat::zeros(d.nrows(), 0) } else { c };
        Self::unlabeled(a, b, c, d)
    }

    /// Static gain `D`.
    pub fn gain(d: RMat) -> Self {
        let (p, m) = (d.nrows(), d.ncols());
        StateSpace {
            a: Mat::zeros(0, 0),
            b: Mat::zeros(0, m),
            c: Mat::zeros(p, 0),
            d,
            inputs: labels("u", m),
            outputs: labels("y", p),
        }
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn with_labels(mut self, inputs: &[&str], outputs: &[&str]) -> Result<Self> {
        if inputs.len() != self.n_inputs() || outputs.len() != self.n_outputs() {
            return Err(Error::DimensionMismatch("label count".into()));
        }
        self.inputs = inputs.iter().map(|s| s.to_string()).collect();
        self.outputs = outputs.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    pub fn input_index(&self, name: &str) -> Result<usize> {
        self.inputs
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::UnknownName(format!("input '{name}'")))
    }

    pub fn output_index(&self, name: &str) -> Result<usize> {
        self.outputs
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::UnknownName(format!("output '{name}'")))
    }

    /// Transfer matrix at `s` by a dense complex solve.
    pub fn freq_response(&self, s: Complex64) -> Result<CMat> {
        let n = self.order();
        let mut out = linalg::to_complex(&self.d);
        if n == 0 {
            return Ok(out);
        }
        let m = CMat::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - self.a[(i, j)]
        });
        let x = faer::prelude::Solve::solve(&m.partial_piv_lu(), &linalg::to_complex(&self.b));
        let cx = &linalg::to_complex(&self.c) * &x;
        for i in 0..out.nrows() {
            for j in 0..out.ncols() {
                out[(i, j)] += cx[(i, j)];
                if !out[(i, j)].re.is_finite() || !out[(i, j)].im.is_finite() {
                    return Err(Error::Linalg(format!("s = {s} is a pole")));
                }
            }
        }
        Ok(out)
    }

    /// Precomputes a Hessenberg form for fast repeated frequency evaluation.
    pub fn evaluator(&self) -> FreqEvaluator {
        let hs = linalg::hessenberg(&self.a);
        let qt = linalg::transpose(&hs.q);
        FreqEvaluator {
            h: hs.h,
            bq: linalg::to_complex(&(&qt * &self.b)),
            cq: linalg::to_complex(&(&self.c * &hs.q)),
            d: linalg::to_complex(&self.d),
        }
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        linalg::eigenvalues(&self.a)
    }

    pub fn spectral_abscissa(&self) -> Result<f64> {
        linalg::spectral_abscissa(&self.a)
    }

    /// Sub-system from the named inputs to the named outputs.
    pub fn select(&self, outputs: &[&str], inputs: &[&str]) -> Result<StateSpace> {
        let oi: Vec<usize> = outputs.iter().map(|o| self.output_index(o)).collect::<Result<_>>()?;
        let ii: Vec<usize> = inputs.iter().map(|i| self.input_index(i)).collect::<Result<_>>()?;
        let n = self.order();
        Ok(StateSpace {
            a: self.a.clone(),
            b: Mat::from_fn(n, ii.len(), |r, c| self.b[(r, ii[c])]),
            c: Mat::from_fn(oi.len(), n, |r, c| self.c[(oi[r], c)]),
            d: Mat::from_fn(oi.len(), ii.len(), |r, c| self.d[(oi[r], ii[c])]),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        })
    }

    /// Output scaled by `k`.
    pub fn scaled(&self, k: f64) -> StateSpace {
        let mut out = self.clone();
        out.c = Mat::from_fn(self.c.nrows(), self.c.ncols(), |i, j| k * self.c[(i, j)]);
        out.d = Mat::from_fn(self.d.nrows(), self.d.ncols(), |i, j| k * self.d[(i, j)]);
        out
    }

    pub fn is_finite(&self) -> bool {
        let fin = |m: &RMat| (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| m[(i, j)].is_finite()));
        fin(&self.a) && fin(&self.b) && fin(&self.c) && fin(&self.d)
    }
}

/// Frequency response through `C Q (sI − H)^{-1} Qᵀ B + D`.
#[derive(Debug, Clone)]
pub struct FreqEvaluator {
    h: RMat,
    bq: CMat,
    cq: CMat,
    d: CMat,
}

impl FreqEvaluator {
    pub fn eval(&self, s: Complex64) -> Result<CMat> {
        if self.h.nrows() == 0 {
            return Ok(self.d.clone());
        }
        let x = linalg::solve_shifted_hessenberg(&self.h, s, &self.bq)?;
        let mut out = &self.cq * &x;
        for i in 0..out.nrows() {
            for j in 0..out.ncols() {
                out[(i, j)] += self.d[(i, j)];
            }
        }
        Ok(out)
    }
}

/// Output-feedback controller from (y1, y2) to u.
#[derive(Debug, Clone)]
pub struct Controller {
    pub name: String,
    pub realization: StateSpace,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ControllerFile {
    name: String,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
}

impl Controller {
    pub fn new(name: &str, realization: StateSpace) -> Result<Self> {
        if realization.n_inputs() != 2 || realization.n_outputs() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "controller must map 2 measurements to 1 input (got {} -> {})",
                realization.n_inputs(),
                realization.n_outputs()
            )));
        }
        if !realization.is_finite() {
            return Err(Error::InvalidParameter("controller has non-finite entries".into()));
        }
        let realization = realization.with_labels(&["y1", "y2"], &["u"])?;
        Ok(Controller {
            name: name.to_string(),
            realization,
        })
    }

    pub fn from_matrices(name: &str, a: RMat, b: RMat, c: RMat, d: RMat) -> Result<Self> {
        Self::new(name, StateSpace::unlabeled(a, b, c, d)?)
    }

    /// Static output feedback u = −(d1·y1 + d2·y2).
    pub fn static_gain(name: &str, d1: f64, d2: f64) -> Self {
        let d = Mat::from_fn(1, 2, |_, j| if j == 0 { d1 } else { d2 });
        Controller::new(name, StateSpace::gain(d)).expect("static gain has valid shape")
    }

    pub fn zero() -> Self {
        Self::static_gain("zero", 0.0, 0.0)
    }

    /// Parses the JSON controller format and checks the realization can be
    /// stabilized and detected through its own ports.
    pub fn from_json(text: &str) -> Result<Self> {
        let f: ControllerFile = serde_json::from_str(text)?;
        let ss = StateSpace::from_rows(&f.a, &f.b, &f.c, &f.d)?;
        let k = Controller::new(&f.name, ss)?;
        if !is_stabilizable_detectable(&k.realization)? {
            return Err(Error::InvalidParameter(format!(
                "controller '{}' has unstable hidden modes",
                f.name
            )));
        }
        Ok(k)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let r = &self.realization;
        let f = ControllerFile {
            name: self.name.clone(),
            a: linalg::to_rows(&r.a),
            b: linalg::to_rows(&r.b),
            c: linalg::to_rows(&r.c),
            d: linalg::to_rows(&r.d),
        };
        Ok(serde_json::to_string_pretty(&f)?)
    }

    /// The published fifth-order controllers: "gray" or "blue".
    pub fn fixture(name: &str) -> Result<Self> {
        let text = match name {
            "gray" => include_str!("../fixtures/controllers/gray.json"),
            "blue" => include_str!("../fixtures/controllers/blue.json"),
            other => return Err(Error::UnknownName(format!("controller '{other}'"))),
        };
        Self::from_json(text)
    }

    pub fn order(&self) -> usize {
        self.realization.order()
    }

    /// (K1(s), K2(s)).
    pub fn freq_response(&self, s: Complex64) -> Result<(Complex64, Complex64)> {
        let m = self.realization.freq_response(s)?;
        Ok((m[(0, 0)], m[(0, 1)]))
    }

    pub fn spectral_abscissa(&self) -> Result<f64> {
        self.realization.spectral_abscissa()
    }
}

/// Finite-difference plant with inputs (w, u) and outputs (z, y1, y2).
#[derive(Debug, Clone)]
pub struct PlantChannels {
    pub plant: StateSpace,
    pub shift_c: f64,
    pub params: XferParams,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DiscretizeOptions {
    /// Accept α = 0, where the bit boundary row loses its inertia.
    pub allow_alpha_zero: bool,
}

/// Central differences on N intervals with ghost points at both ends;
/// states are ordered (x₀..x_N, ẋ₀..ẋ_N).
pub fn discretize(p: &XferParams, n: usize, shift_c: f64) -> Result<PlantChannels> {
    discretize_with(p, n, shift_c, DiscretizeOptions::default())
}

pub fn discretize_with(
    p: &XferParams,
    n: usize,
    shift_c: f64,
    opts: DiscretizeOptions,
) -> Result<PlantChannels> {
    p.validate()?;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need N >= 2 (got {n})")));
    }
    if p.alpha == 0.0 && !opts.allow_alpha_zero {
        return Err(Error::AlphaZeroUnsupported);
    }
    let q = p.q + shift_c;
    let h = 1.0 / n as f64;
    let h2 = h * h;
    let m = n + 1;
    let dim = 2 * m;
    let mut a = RMat::zeros(dim, dim);
    let mut b = RMat::zeros(dim, 2);
    for i in 0..m {
        a[(i, m + i)] = 1.0;
    }
    for i in 1..n {
        a[(m + i, i - 1)] = 1.0 / h2;
        a[(m + i, i)] = -2.0 / h2;
        a[(m + i, i + 1)] = 1.0 / h2;
        a[(m + i, m + i)] = -2.0 * p.lambda;
    }
    // Bit end: α x_tt = x_ξ + q x_t + w, ghost point from the boundary row.
    let den = 1.0 + 2.0 * p.alpha / h;
    a[(m, 0)] = -2.0 / h2 / den;
    a[(m, 1)] = 2.0 / h2 / den;
    a[(m, m)] = (2.0 * q / h - 2.0 * p.lambda) / den;
    b[(m, 0)] = 2.0 / h / den;
    // Top end: x_ξ = −x_t + u.
    a[(m + n, n)] = -2.0 / h2;
    a[(m + n, n - 1)] = 2.0 / h2;
    a[(m + n, m + n)] = -2.0 / h - 2.0 * p.lambda;
    b[(m + n, 1)] = 2.0 / h;
    let mut c = RMat::zeros(3, dim);
    c[(0, m)] = 1.0;
    c[(1, m)] = 1.0;
    c[(2, m + n)] = 1.0;
    let plant = StateSpace::new(
        a,
        b,
        c,
        RMat::zeros(3, 2),
        vec!["w".into(), "u".into()],
        vec!["z".into(), "y1".into(), "y2".into()],
    )?;
    Ok(PlantChannels {
        plant,
        shift_c,
        params: *p,
        n,
    })
}

fn default_tol(a: &RMat, other: &RMat) -> f64 {
    1e-8 * linalg::frobenius(a).max(linalg::frobenius(other)).max(f64::MIN_POSITIVE)
}

/// Removes unreachable and unobservable states with the orthogonal
/// staircase; `tol` defaults to 1e−8·‖A‖_F.
pub fn minreal(ss: &StateSpace, tol: Option<f64>) -> StateSpace {
    let n = ss.order();
    if n == 0 {
        return ss.clone();
    }
    let tol_c = tol.unwrap_or_else(|| default_tol(&ss.a, &ss.b));
    let (a1, b1, c1, k) = linalg::controllable_staircase(&ss.a, &ss.b, &ss.c, tol_c);
    let a1 = linalg::submatrix(&a1, 0..k, 0..k);
    let b1 = linalg::submatrix(&b1, 0..k, 0..ss.n_inputs());
    let c1 = linalg::submatrix(&c1, 0..ss.n_outputs(), 0..k);
    let tol_o = tol.unwrap_or_else(|| default_tol(&a1, &c1));
    let (a2, ct, bt, k2) = linalg::controllable_staircase(
        &linalg::transpose(&a1),
        &linalg::transpose(&c1),
        &linalg::transpose(&b1),
        tol_o,
    );
    StateSpace {
        a: linalg::transpose(&linalg::submatrix(&a2, 0..k2, 0..k2)),
        b: linalg::transpose(&linalg::submatrix(&bt, 0..ss.n_inputs(), 0..k2)),
        c: linalg::transpose(&linalg::submatrix(&ct, 0..k2, 0..ss.n_outputs())),
        d: ss.d.clone(),
        inputs: ss.inputs.clone(),
        outputs: ss.outputs.clone(),
    }
}

/// True when every hidden (unreachable or unobservable) mode is stable.
pub fn is_stabilizable_detectable(ss: &StateSpace) -> Result<bool> {
    let n = ss.order();
    if n == 0 {
        return Ok(true);
    }
    let tol = default_tol(&ss.a, &ss.b);
    let (a1, b1, c1, k) = linalg::controllable_staircase(&ss.a, &ss.b, &ss.c, tol);
    if k < n && linalg::spectral_abscissa(&linalg::submatrix(&a1, k..n, k..n))? >= 0.0 {
        return Ok(false);
    }
    let tol = default_tol(&ss.a, &ss.c);
    let (a2, _, _, k2) =
        linalg::controllable_staircase(&linalg::transpose(&ss.a), &linalg::transpose(&ss.c), &linalg::transpose(&ss.b), tol);
    let _ = (b1, c1);
    if k2 < n && linalg::spectral_abscissa(&linalg::submatrix(&a2, k2..n, k2..n))? >= 0.0 {
        return Ok(false);
    }
    Ok(true)
}

/// Closes u = −K·[y1; y2] around a plant with inputs (…, u) and outputs
/// (…, y1, y2). The closed loop keeps every other input and exposes all
/// plant outputs plus `u`; states are (plant, controller).
pub fn close_loop_ss(plant: &StateSpace, k: &Controller) -> Result<StateSpace> {
    let ui = plant.input_index("u")?;
    let y = [plant.output_index("y1")?, plant.output_index("y2")?];
    let exo: Vec<usize> = (0..plant.n_inputs()).filter(|&i| i != ui).collect();
    let n = plant.order();
    let kr = &k.realization;
    let nk = kr.order();
    let p = plant.n_outputs();
    let ne = exo.len();

    let cy = Mat::from_fn(2, n, |i, j| plant.c[(y[i], j)]);
    let dye = Mat::from_fn(2, ne, |i, j| plant.d[(y[i], exo[j])]);
    let dyu = Mat::from_fn(2, 1, |i, _| plant.d[(y[i], ui)]);
    let bu = Mat::from_fn(n, 1, |i, _| plant.b[(i, ui)]);
    let be = Mat::from_fn(n, ne, |i, j| plant.b[(i, exo[j])]);
    let du = Mat::from_fn(p, 1, |i, _| plant.d[(i, ui)]);
    let de = Mat::from_fn(p, ne, |i, j| plant.d[(i, exo[j])]);

    // (1 + D_K D_yu) u = −(D_K C_y x + C_K x_K + D_K D_ye e)
    let e = 1.0 + (&kr.d * &dyu)[(0, 0)];
    if e.abs() < 1e-12 {
        return Err(Error::IllPosedLoop);
    }
    let fx = (&kr.d * &cy) * faer::Scale(-1.0 / e);
    let fk = kr.c.clone() * faer::Scale(-1.0 / e);
    let fe = (&kr.d * &dye) * faer::Scale(-1.0 / e);

    let dim = n + nk;
    let mut a = RMat::zeros(dim, dim);
    let mut b = RMat::zeros(dim, ne);
    let mut c = RMat::zeros(p + 1, dim);
    let mut d = RMat::zeros(p + 1, ne);

    let axx = &plant.a + &bu * &fx;
    let axk = &bu * &fk;
    let bx = &be + &bu * &fe;
    // y = (C_y + D_yu F_x) x + D_yu F_k x_K + (D_ye + D_yu F_e) e
    let ycx = &cy + &dyu * &fx;
    let yck = &dyu * &fk;
    let yd = &dye + &dyu * &fe;
    let akx = &kr.b * &ycx;
    let akk = &kr.a + &kr.b * &yck;
    let bk = &kr.b * &yd;
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = axx[(i, j)];
        }
        for j in 0..nk {
            a[(i, n + j)] = axk[(i, j)];
        }
        for j in 0..ne {
            b[(i, j)] = bx[(i, j)];
        }
    }
    for i in 0..nk {
        for j in 0..n {
            a[(n + i, j)] = akx[(i, j)];
        }
        for j in 0..nk {
            a[(n + i, n + j)] = akk[(i, j)];
        }
        for j in 0..ne {
            b[(n + i, j)] = bk[(i, j)];
        }
    }
    let ocx = &plant.c + &du * &fx;
    let ock = &du * &fk;
    let od = &de + &du * &fe;
    for i in 0..p {
        for j in 0..n {
            c[(i, j)] = ocx[(i, j)];
        }
        for j in 0..nk {
            c[(i, n + j)] = ock[(i, j)];
        }
        for j in 0..ne {
            d[(i, j)] = od[(i, j)];
        }
    }
    for j in 0..n {
        c[(p, j)] = fx[(0, j)];
    }
    for j in 0..nk {
        c[(p, n + j)] = fk[(0, j)];
    }
    for j in 0..ne {
        d[(p, j)] = fe[(0, j)];
    }
    let mut outputs = plant.outputs.clone();
    outputs.push("u".into());
    let inputs = exo.iter().map(|&i| plant.inputs[i].clone()).collect();
    StateSpace::new(a, b, c, d, inputs, outputs)
}

pub fn close_loop(plant: &PlantChannels, k: &Controller) -> Result<StateSpace> {
    close_loop_ss(&plant.plant, k)
}

/// Control-effort weight 1e4·s/(s + 2e5).
pub fn weight_wu() -> StateSpace {
    let one = |v: f64| Mat::from_fn(1, 1, |_, _| v);
    StateSpace::new(
        one(-2e5),
        one(2e5),
        one(-1e4),
        one(1e4),
        vec!["u".into()],
        vec!["wu".into()],
    )
    .expect("1x1 weight")
}

/// `g2 ∘ g1`: the outputs of `g1` drive the inputs of `g2`.
pub fn series(g1: &StateSpace, g2: &StateSpace) -> Result<StateSpace> {
    if g1.n_outputs() != g2.n_inputs() {
        return Err(Error::DimensionMismatch(format!(
            "series: {} outputs feed {} inputs",
            g1.n_outputs(),
            g2.n_inputs()
        )));
    }
    let (n1, n2) = (g1.order(), g2.order());
    let b2c1 = &g2.b * &g1.c;
    let b2d1 = &g2.b * &g1.d;
    let d2c1 = &g2.d * &g1.c;
    let a = RMat::from_fn(n1 + n2, n1 + n2, |i, j| match (i < n1, j < n1) {
        (true, true) => g1.a[(i, j)],
        (true, false) => 0.0,
        (false, true) => b2c1[(i - n1, j)],
        (false, false) => g2.a[(i - n1, j - n1)],
    });
    let b = RMat::from_fn(n1 + n2, g1.n_inputs(), |i, j| {
        if i < n1 {
            g1.b[(i, j)]
        } else {
            b2d1[(i - n1, j)]
        }
    });
    let c = RMat::from_fn(g2.n_outputs(), n1 + n2, |i, j| {
        if j < n1 {
            d2c1[(i, j)]
        } else {
            g2.c[(i, j - n1)]
        }
    });
    let d = &g2.d * &g1.d;
    StateSpace::new(a, b, c, d, g1.inputs.clone(), g2.outputs.clone())
}

/// Sum of two systems with the same input and output dimensions.
pub fn parallel(g1: &StateSpace, g2: &StateSpace) -> Result<StateSpace> {
    if g1.n_inputs() != g2.n_inputs() || g1.n_outputs() != g2.n_outputs() {
        return Err(Error::DimensionMismatch("parallel: port counts differ".into()));
    }
    let (n1, n2) = (g1.order(), g2.order());
    let a = RMat::from_fn(n1 + n2, n1 + n2, |i, j| match (i < n1, j < n1) {
        (true, true) => g1.a[(i, j)],
        (false, false) => g2.a[(i - n1, j - n1)],
        _ => 0.0,
    });
    let b = RMat::from_fn(n1 + n2, g1.n_inputs(), |i, j| {
        if i < n1 {
            g1.b[(i, j)]
        } else {
            g2.b[(i - n1, j)]
        }
    });
    let c = RMat::from_fn(g1.n_outputs(), n1 + n2, |i, j| {
        if j < n1 {
            g1.c[(i, j)]
        } else {
            g2.c[(i, j - n1)]
        }
    });
    let d = &g1.d + &g2.d;
    StateSpace::new(a, b, c, d, g1.inputs.clone(), g1.outputs.clone())
}

pub fn channel_select(ss: &StateSpace, outputs: &[&str], inputs: &[&str]) -> Result<StateSpace> {
    ss.select(outputs, inputs)
}

/// The three closed-loop channels used by the design programs, each on a
/// minimal plant: T̃_ze on the shifted plant, and T_uw, T_y1w on the
/// nominal one.
#[derive(Debug, Clone)]
pub struct DesignLoops {
    pub t_ze_shifted: StateSpace,
    pub t_uw: StateSpace,
    pub t_y1w: StateSpace,
    pub nominal: StateSpace,
    pub shifted: StateSpace,
}

/// Minimal nominal and shifted plants for repeated loop closures.
#[derive(Debug, Clone)]
pub struct DesignPlants {
    pub nominal: StateSpace,
    pub shifted: StateSpace,
    pub n: usize,
    pub shift_c: f64,
}

impl DesignPlants {
    pub fn new(p: &XferParams, n: usize, shift_c: f64) -> Result<Self> {
        Ok(DesignPlants {
            nominal: minreal(&discretize(p, n, 0.0)?.plant, None),
            shifted: minreal(&discretize(p, n, shift_c)?.plant, None),
            n,
            shift_c,
        })
    }

    pub fn close(&self, k: &Controller) -> Result<DesignLoops> {
        let nominal = close_loop_ss(&self.nominal, k)?;
        let shifted = close_loop_ss(&self.shifted, k)?;
        Ok(DesignLoops {
            t_ze_shifted: shifted.select(&["z"], &["w"])?,
            t_uw: nominal.select(&["u"], &["w"])?,
            t_y1w: nominal.select(&["y1"], &["w"])?,
            nominal,
            shifted,
        })
    }
}
