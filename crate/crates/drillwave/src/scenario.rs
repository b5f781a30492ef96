//! Physical drill-string parameters, their dimensionless reduction, the
//! bit-rock friction nonlinearity and its sector data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bit radius originally listed for the gray scenario.
///
/// With this value the derived gray quantities come out as Ω₀ = 14.37,
/// q = 0.0016, p = −0.0041, which miss the reference gray row, while the
/// radius shared with blue reproduces it. The shipped gray fixture
/// therefore uses 0.18202275.
pub const GRAY_PRINTED_BIT_RADIUS: f64 = 0.155575;

/// Physical constants of one drilling scenario, SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    #[serde(default)]
    pub name: String,
    /// Shear modulus G (Pa).
    #[serde(rename = "G_shear")]
    pub g_shear: f64,
    /// Polar moment of area J (m⁴).
    #[serde(rename = "J_geom")]
    pub j_geom: f64,
    /// Polar inertia per unit length of the string (kg·m).
    #[serde(rename = "I_string")]
    pub i_string: f64,
    /// Bit inertia (kg·m²).
    #[serde(rename = "I_bit")]
    pub i_bit: f64,
    /// String length (m).
    #[serde(rename = "L")]
    pub length: f64,
    /// Rotary table speed (rad/s).
    #[serde(rename = "Omega")]
    pub omega: f64,
    /// Top-drive impedance coefficient.
    pub c_a: f64,
    /// Distributed viscous damping.
    pub beta: f64,
    /// Weight on bit (N).
    #[serde(rename = "W_ob")]
    pub w_ob: f64,
    /// Bit radius (m).
    #[serde(rename = "R_b")]
    pub r_b: f64,
    pub mu_sb: f64,
    pub mu_cb: f64,
    pub gamma_b: f64,
    pub nu_f: f64,
    /// Viscous mud damping at the bit.
    pub c_b: f64,
    /// Second damping value listed for some scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_alt: Option<f64>,
}

/// Dimensionless model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimParams {
    pub q: f64,
    pub alpha: f64,
    pub lambda: f64,
    /// Curvature of ψ at the origin.
    pub p: f64,
    /// Ratio of physical to dimensionless time, (1/L)·√(GJ/I).
    pub time_scale: f64,
    /// Dimensionless velocity offset at which the bit stands still.
    pub kink: f64,
}

/// Steady rotation: top speed and the quadratic twist profile
/// θ⁰(ξ, t) = rate·t + c₀ + c₁ ξ + c₂ ξ², with ξ in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub omega0: f64,
    pub rate: f64,
    pub xi_coeffs: [f64; 3],
}

/// Asymptotes ψ(ω) ≈ −q_s·ω + a± as ω → ±∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorAsymptotes {
    pub q_s: f64,
    pub a_plus: f64,
    pub a_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorMode {
    Global,
    LargeMagnitude,
}

/// Slopes bounding ψ, with center `c` and radius `r` of the shifted loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorBounds {
    pub q_l: f64,
    pub q_u: f64,
    pub c: f64,
    pub r: f64,
    /// Magnitude beyond which the sector holds (large-magnitude variant).
    #[serde(rename = "M_mag", default, skip_serializing_if = "Option::is_none")]
    pub m_mag: Option<f64>,
    /// Bound on |ψ(ω)/ω| for |ω| ≤ M_mag.
    #[serde(rename = "L_mag", default, skip_serializing_if = "Option::is_none")]
    pub l_mag: Option<f64>,
}

impl SectorBounds {
    /// Builds bounds from slopes without checking them against any ψ.
    pub fn from_slopes(q_l: f64, q_u: f64) -> Result<Self> {
        if !(q_l.is_finite() && q_u.is_finite()) || q_l > q_u {
            return Err(Error::InvalidParameter(format!(
                "sector slopes must satisfy q_l <= q_u (got {q_l}, {q_u})"
            )));
        }
        Ok(SectorBounds {
            q_l,
            q_u,
            c: 0.5 * (q_l + q_u),
            r: 0.5 * (q_u - q_l),
            m_mag: None,
            l_mag: None,
        })
    }

    /// Sign-aware sector membership: (ψ − q_l ω)(ψ − q_u ω) ≤ 0.
    pub fn contains(&self, omega: f64, psi: f64) -> bool {
        let prod = (psi - self.q_l * omega) * (psi - self.q_u * omega);
        let scale = (psi.abs() + omega.abs() * (1.0 + self.q_l.abs().max(self.q_u.abs()))).powi(2);
        prod <= 1e-12 * scale
    }
}

impl ScenarioParams {
    pub fn from_json(text: &str) -> Result<Self> {
        let sp: ScenarioParams = serde_json::from_str(text)?;
        sp.validate()?;
        Ok(sp)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One of the embedded scenarios: gray, blue, magenta, red or green.
    pub fn fixture(name: &str) -> Result<Self> {
        let text = match name {
            "gray" => include_str!("../fixtures/scenarios/gray.json"),
            "blue" => include_str!("../fixtures/scenarios/blue.json"),
            "magenta" => include_str!("../fixtures/scenarios/magenta.json"),
            "red" => include_str!("../fixtures/scenarios/red.json"),
            "green" => include_str!("../fixtures/scenarios/green.json"),
            other => return Err(Error::UnknownName(format!("scenario '{other}'"))),
        };
        Self::from_json(text)
    }

    pub fn fixture_names() -> [&'static str; 5] {
        ["gray", "blue", "magenta", "red", "green"]
    }

    /// Same scenario with `beta` replaced by `beta_alt`, when one is listed.
    pub fn with_beta_alt(&self) -> Option<Self> {
        self.beta_alt.map(|b| ScenarioParams {
            beta: b,
            beta_alt: Some(self.beta),
            ..self.clone()
        })
    }

    /// Checks the strict invariants of a physical scenario file.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("G_shear", self.g_shear),
            ("J_geom", self.j_geom),
            ("I_string", self.i_string),
            ("I_bit", self.i_bit),
            ("L", self.length),
            ("Omega", self.omega),
            ("c_a", self.c_a),
            ("beta", self.beta),
            ("W_ob", self.w_ob),
            ("R_b", self.r_b),
            ("mu_sb", self.mu_sb),
            ("mu_cb", self.mu_cb),
            ("gamma_b", self.gamma_b),
            ("nu_f", self.nu_f),
            ("c_b", self.c_b),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0 (got {v})"
                )));
            }
        }
        if self.mu_sb <= self.mu_cb {
            return Err(Error::InvalidParameter(
                "static friction mu_sb must exceed Coulomb friction mu_cb".into(),
            ));
        }
        if self.gamma_b >= 1.0 {
            return Err(Error::InvalidParameter("gamma_b must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Torsional stiffness G·J.
    pub fn gj(&self) -> f64 {
        self.g_shear * self.j_geom
    }

    pub fn sqrt_gji(&self) -> f64 {
        (self.gj() * self.i_string).sqrt()
    }

    pub fn time_scale(&self) -> f64 {
        (self.gj() / self.i_string).sqrt() / self.length
    }

    pub fn kink(&self) -> f64 {
        -self.omega * self.length * self.i_string.sqrt() / self.gj().sqrt()
    }

    fn rock_scale(&self) -> f64 {
        self.w_ob * self.r_b
    }

    /// Bit torque φ(v) = φ_mud + φ_rock at bit speed `v` (rad/s).
    pub fn friction(&self, v: f64) -> f64 {
        self.friction_signed(v, signum0(v))
    }

    fn friction_signed(&self, v: f64, sign: f64) -> f64 {
        let stribeck = self.mu_cb
            + (self.mu_sb - self.mu_cb) * (-self.gamma_b * v.abs() / self.nu_f).exp();
        self.c_b * v + self.rock_scale() * stribeck * sign
    }

    /// φ′(v) for v ≠ 0.
    pub fn friction_prime(&self, v: f64) -> f64 {
        let g = self.gamma_b / self.nu_f;
        self.c_b - self.rock_scale() * (self.mu_sb - self.mu_cb) * g * (-g * v.abs()).exp()
    }

    /// φ″(v) for v ≠ 0.
    pub fn friction_second(&self, v: f64) -> f64 {
        let g = self.gamma_b / self.nu_f;
        signum0(v) * self.rock_scale() * (self.mu_sb - self.mu_cb) * g * g * (-g * v.abs()).exp()
    }

    fn check_physical(&self) -> Result<()> {
        let must_be_positive = [
            ("G_shear", self.g_shear),
            ("J_geom", self.j_geom),
            ("I_string", self.i_string),
            ("L", self.length),
            ("c_a", self.c_a),
            ("nu_f", self.nu_f),
        ];
        for (name, v) in must_be_positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0 (got {v})")));
            }
        }
        Ok(())
    }
}

fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn derive_dimensionless(sp: &ScenarioParams) -> Result<DimParams> {
    sp.check_physical()?;
    let root = sp.sqrt_gji();
    Ok(DimParams {
        q: -sp.friction_prime(sp.omega) / root,
        alpha: sp.i_bit / (sp.length * sp.i_string),
        lambda: sp.beta * sp.length / (2.0 * root),
        p: -sp.friction_second(sp.omega) / (sp.length * sp.i_string),
        time_scale: sp.time_scale(),
        kink: sp.kink(),
    })
}

pub fn steady_state(sp: &ScenarioParams) -> Result<SteadyState> {
    sp.check_physical()?;
    let load = sp.friction(sp.omega) + sp.beta * sp.omega * sp.length;
    Ok(SteadyState {
        omega0: sp.omega + load / sp.c_a,
        rate: sp.omega,
        xi_coeffs: [0.0, -load / sp.gj(), sp.beta * sp.omega / (2.0 * sp.gj())],
    })
}

fn psi_with_sign(sp: &ScenarioParams, omega: f64, sign: f64) -> f64 {
    let root = sp.sqrt_gji();
    let q = -sp.friction_prime(sp.omega) / root;
    let v = sp.omega + sp.time_scale() * omega;
    sp.length / sp.gj() * (sp.friction(sp.omega) - sp.friction_signed(v, sign)) - q * omega
}

/// Boundary nonlinearity ψ(ω) in dimensionless units.
pub fn psi(sp: &ScenarioParams, omega: f64) -> f64 {
    let v = sp.omega + sp.time_scale() * omega;
    psi_with_sign(sp, omega, signum0(v))
}

/// One-sided limits of ψ at the kink: `(from below, from above)`.
pub fn psi_kink_limits(sp: &ScenarioParams) -> (f64, f64) {
    let k = sp.kink();
    (psi_with_sign(sp, k, -1.0), psi_with_sign(sp, k, 1.0))
}

/// ψ evaluated on the branch selected by `side` (−1 below the kink, +1 above),
/// which also defines the value exactly at the kink.
pub fn psi_branch(sp: &ScenarioParams, omega: f64, side: f64) -> f64 {
    psi_with_sign(sp, omega, side.signum())
}

/// ψ′(ω) away from the kink.
pub fn psi_prime(sp: &ScenarioParams, omega: f64) -> f64 {
    let root = sp.sqrt_gji();
    let q = -sp.friction_prime(sp.omega) / root;
    let v = sp.omega + sp.time_scale() * omega;
    -sp.friction_prime(v) / root - q
}

pub fn sector_asymptotes(sp: &ScenarioParams) -> SectorAsymptotes {
    let root = sp.sqrt_gji();
    let q = -sp.friction_prime(sp.omega) / root;
    let scale = sp.length * sp.rock_scale() / sp.gj();
    let decay = (-sp.gamma_b * sp.omega / sp.nu_f).exp();
    SectorAsymptotes {
        q_s: sp.c_b / root + q,
        a_plus: scale * (sp.mu_sb - sp.mu_cb) * decay,
        a_minus: scale * (2.0 * sp.mu_cb + (sp.mu_sb - sp.mu_cb) * decay),
    }
}

/// Offsets `(ω₊, ω₋)` beyond which ψ stays within `tol` of its asymptotes
/// (ω ≥ ω₊ and ω ≤ ω₋).
pub fn asymptote_onset(sp: &ScenarioParams, tol: f64) -> (f64, f64) {
    let amp = sp.length * sp.rock_scale() / sp.gj() * (sp.mu_sb - sp.mu_cb);
    let speed = if amp > tol {
        sp.nu_f / sp.gamma_b * (amp / tol).ln()
    } else {
        0.0
    };
    let ts = sp.time_scale();
    ((speed - sp.omega) / ts, (-speed - sp.omega) / ts)
}

/// Sample offsets used for sector checks: log-spaced magnitudes on both
/// sides plus clustering around the kink.
pub(crate) fn sector_samples(sp: &ScenarioParams) -> Vec<f64> {
    let k = sp.kink().abs();
    let mut w = Vec::with_capacity(60_000);
    let n = 20_000;
    for i in 0..n {
        let e = -6.0 + 9.0 * i as f64 / (n - 1) as f64;
        let m = k * 10f64.powf(e);
        w.push(m);
        w.push(-m);
    }
    for i in 0..5_000 {
        let e = -10.0 + 10.0 * i as f64 / 4999.0;
        let d = k * 10f64.powf(e);
        w.push(-k + d);
        w.push(-k - d);
    }
    w.retain(|x| *x != 0.0);
    w.sort_by(f64::total_cmp);
    w.dedup();
    w
}

fn sector_tail_ok(asym: &SectorAsymptotes, q_l: f64, q_u: f64) -> bool {
    // Both tails follow the slope −q_s, which must lie strictly inside.
    q_l < -asym.q_s && -asym.q_s < q_u
}

/// Verifies a sector for ψ and returns the bounds, or the worst violation.
pub fn fit_sector(
    sp: &ScenarioParams,
    q_l: f64,
    q_u: f64,
    mode: SectorMode,
) -> Result<SectorBounds> {
    let mut sb = SectorBounds::from_slopes(q_l, q_u)?;
    let asym = sector_asymptotes(sp);
    let k = sp.kink();
    let (below, above) = psi_kink_limits(sp);
    let mut points: Vec<(f64, f64)> = sector_samples(sp)
        .into_iter()
        .map(|w| (w, psi(sp, w)))
        .collect();
    points.push((k, below));
    points.push((k, above));
    let violation = |w: f64, v: f64| {
        let prod = (v - q_l * w) * (v - q_u * w);
        prod / (w * w).max(f64::MIN_POSITIVE)
    };
    let tail_ok = sector_tail_ok(&asym, q_l, q_u);
    match mode {
        SectorMode::Global => {
            let worst = points
                .iter()
                .filter(|(w, v)| !sb.contains(*w, *v))
                .max_by(|a, b| violation(a.0, a.1).total_cmp(&violation(b.0, b.1)));
            if let Some(&(w, v)) = worst {
                return Err(Error::SectorViolation { omega: w, psi: v });
            }
            if !tail_ok {
                return Err(Error::SectorViolation {
                    omega: f64::INFINITY,
                    psi: f64::NAN,
                });
            }
            Ok(sb)
        }
        SectorMode::LargeMagnitude => {
            if !tail_ok {
                return Err(Error::SectorViolation {
                    omega: f64::INFINITY,
                    psi: f64::NAN,
                });
            }
            let bad: Vec<f64> = points
                .iter()
                .filter(|(w, v)| !sb.contains(*w, *v))
                .map(|(w, _)| *w)
                .collect();
            let m = if bad.is_empty() {
                0.0
            } else {
                let far = bad.iter().cloned().fold(0.0f64, |a, w| if w.abs() > a.abs() { w } else { a });
                // Bisect between the outermost violation and the next sample outward.
                let side = far.signum();
                let mut lo = far.abs();
                let mut hi = points
                    .iter()
                    .map(|(w, _)| *w)
                    .filter(|w| w.signum() == side && w.abs() > lo)
                    .map(f64::abs)
                    .fold(f64::INFINITY, f64::min);
                if !hi.is_finite() {
                    hi = 2.0 * lo;
                }
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if sb.contains(side * mid, psi(sp, side * mid)) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                1.1 * hi
            };
            let l = points
                .iter()
                .filter(|(w, _)| w.abs() <= m)
                .map(|(w, v)| (v / w).abs())
                .fold(0.0, f64::max);
            sb.m_mag = Some(m);
            sb.l_mag = Some(l);
            Ok(sb)
        }
    }
}

/// Top-drive speed command that realizes the dimensionless input `u`.
pub fn control_backmap(sp: &ScenarioParams, u: f64, y2: f64) -> Result<f64> {
    let ss = steady_state(sp)?;
    let root = sp.sqrt_gji();
    Ok(ss.omega0 + (u + (sp.c_a / root - 1.0) * y2) * sp.gj() / (sp.c_a * sp.length))
}

/// Dimensionless input produced by the speed command `omega_cmd`.
pub fn control_forward(sp: &ScenarioParams, omega_cmd: f64, y2: f64) -> Result<f64> {
    let ss = steady_state(sp)?;
    let root = sp.sqrt_gji();
    Ok((1.0 - sp.c_a / root) * y2 + sp.c_a * sp.length / sp.gj() * (omega_cmd - ss.omega0))
}
