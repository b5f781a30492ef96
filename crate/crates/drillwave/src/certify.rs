//! Stability and performance certificates for a controller against the
//! irrational plant, and for the large-magnitude sector on a fine
//! discretization.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{self, NormResult, PeakGainConfig};
use crate::scenario::{self, ScenarioParams, SectorBounds, SectorMode};
use crate::spectra::{self, ContourSpec, NyquistRun, DEFAULT_MODULUS_TOL};
use crate::ssmodel::{self, Controller, DesignPlants};
use crate::xfer::{self, XferParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    NyquistClosedLoop,
    SectorHinf,
    LargeMagPk,
    WeightBound,
    H2Surrogate,
}

impl CertificateKind {
    pub fn relation(self) -> Relation {
        match self {
            CertificateKind::NyquistClosedLoop => Relation::Equal,
            CertificateKind::SectorHinf | CertificateKind::LargeMagPk => Relation::LessThan,
            CertificateKind::WeightBound | CertificateKind::H2Surrogate => Relation::LessEqual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Equal,
    LessThan,
    LessEqual,
}

impl Relation {
    /// Decision with the tolerance counted against the computed value.
    pub fn holds(self, computed: f64, threshold: f64, tol: f64) -> bool {
        match self {
            Relation::Equal => (computed - threshold).abs() < 0.5,
            Relation::LessThan => computed + tol < threshold,
            Relation::LessEqual => computed + tol <= threshold,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CertificateContext {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub controller: String,
    pub q: f64,
    pub alpha: f64,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sector: Option<SectorBounds>,
    /// Whether ψ of the scenario was checked to lie in `sector`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sector_verified: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discretization_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub computed: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub pass: bool,
    pub tolerance: f64,
    pub context: CertificateContext,
}

impl Certificate {
    fn new(
        kind: CertificateKind,
        computed: f64,
        threshold: f64,
        tolerance: f64,
        context: CertificateContext,
    ) -> Self {
        let relation = kind.relation();
        Certificate {
            kind,
            computed,
            threshold,
            relation,
            pass: relation.holds(computed, threshold, tolerance),
            tolerance,
            context,
        }
    }

    pub fn with_scenario(mut self, name: &str) -> Self {
        self.context.scenario = Some(name.to_string());
        self
    }

    fn from_norm(
        kind: CertificateKind,
        norm: &NormResult,
        threshold: f64,
        mut context: CertificateContext,
    ) -> Self {
        context.argmax = norm.argmax;
        Self::new(kind, norm.value, threshold, norm.tolerance, context)
    }
}

fn base_context(p: &XferParams, k: &Controller) -> CertificateContext {
    CertificateContext {
        controller: k.name.clone(),
        q: p.q,
        alpha: p.alpha,
        lambda: p.lambda,
        ..Default::default()
    }
}

/// 1 + K₁G₁ + K₂G₂ at `s`.
pub fn return_difference(p: &XferParams, k: &Controller, s: Complex64) -> Result<Complex64> {
    let g = xfer::eval_g(p, s)?;
    let (k1, k2) = k.freq_response(s)?;
    Ok(1.0 + k1 * g.g1 + k2 * g.g2)
}

/// Contour radius covering the open-loop poles and every closed-loop pole
/// the test must see: the loop gain is small beyond it.
fn nyquist_radius(p: &XferParams) -> Result<f64> {
    Ok(xfer::analytic_exclusion_radius(p)?.max(10.0))
}

/// Winding of the return difference with the radius-doubling check.
pub fn nyquist_run(p: &XferParams, k: &Controller, spec: Option<ContourSpec>) -> Result<NyquistRun> {
    let mut spec = match spec {
        Some(s) => s,
        None => ContourSpec::with_radius(nyquist_radius(p)?),
    };
    let f = |s: Complex64| return_difference(p, k, s);
    let near = |e: Error| match e {
        Error::ZeroCrossingOnContour { min_modulus, .. } => Error::ImageNearOrigin { min_modulus },
        other => other,
    };
    let mut run = spectra::winding_number(f, &spec, DEFAULT_MODULUS_TOL).map_err(near)?;
    for _ in 0..4 {
        let doubled = ContourSpec {
            radius: 2.0 * spec.radius,
            ..spec
        };
        let check = spectra::winding_number(f, &doubled, DEFAULT_MODULUS_TOL).map_err(near)?;
        if check.result.winding == run.result.winding {
            return Ok(run);
        }
        spec = doubled;
        run = check;
    }
    Err(Error::RadiusTooSmall {
        at_r: run.result.winding,
        at_2r: run.result.winding,
    })
}

/// Nyquist test of the loop (p, K): passes when the return difference
/// winds n_p times, n_p being the number of unstable plant poles.
pub fn nyquist_certify(p: &XferParams, k: &Controller, spec: Option<ContourSpec>) -> Result<Certificate> {
    let sa = k.spectral_abscissa()?;
    if k.order() > 0 && sa >= 0.0 {
        return Err(Error::UnstableController { abscissa: sa });
    }
    let (n_p, _) = match spec {
        Some(s) => spectra::count_unstable_poles(p, &s)?,
        None => spectra::count_unstable_poles_auto(p)?,
    };
    let run = nyquist_run(p, k, spec)?;
    let mut ctx = base_context(p, k);
    ctx.radius = Some(run.result.radius);
    ctx.note = Some(format!(
        "min |1+KG| = {:.3e}, {} samples",
        run.result.min_modulus, run.result.samples_used
    ));
    let tol = run.result.max_phase_step / (2.0 * std::f64::consts::PI);
    Ok(Certificate::new(
        CertificateKind::NyquistClosedLoop,
        run.result.winding as f64,
        n_p as f64,
        tol,
        ctx,
    ))
}

fn require_stabilizing(p: &XferParams, k: &Controller, which: &str) -> Result<()> {
    let c = nyquist_certify(p, k, None)?;
    if !c.pass {
        return Err(Error::NotStabilizing {
            which: which.to_string(),
            winding: c.computed as i64,
            expected: c.threshold as i64,
        });
    }
    Ok(())
}

/// T̃_ze(jω) = H₁ − G₁(K₁H₁ + K₂H₂)/(1 + K₁G₁ + K₂G₂) on the plant `p`.
pub fn tze_response(p: &XferParams, k: &Controller, w: f64) -> Result<Complex64> {
    let s = Complex64::new(0.0, w);
    let ch = xfer::eval_channels(p, s)?;
    let (k1, k2) = k.freq_response(s)?;
    let rd = 1.0 + k1 * ch.g1 + k2 * ch.g2;
    Ok(ch.h1 - ch.g1 * (k1 * ch.h1 + k2 * ch.h2) / rd)
}

/// T_uw(jω) = −(K₁H₁ + K₂H₂)/(1 + K₁G₁ + K₂G₂).
pub fn tuw_response(p: &XferParams, k: &Controller, w: f64) -> Result<Complex64> {
    let s = Complex64::new(0.0, w);
    let ch = xfer::eval_channels(p, s)?;
    let (k1, k2) = k.freq_response(s)?;
    let rd = 1.0 + k1 * ch.g1 + k2 * ch.g2;
    Ok(-(k1 * ch.h1 + k2 * ch.h2) / rd)
}

/// 1e4·s/(s + 2e5) at s = jω.
pub fn weight_response(w: f64) -> Complex64 {
    let s = Complex64::new(0.0, w);
    1e4 * s / (s + 2e5)
}

fn inverse_radius(sb: &SectorBounds) -> f64 {
    if sb.r > 0.0 {
        1.0 / sb.r
    } else {
        f64::INFINITY
    }
}

/// Small-gain certificate ‖T̃_ze‖_∞ < 1/r on the irrational shifted plant.
pub fn sector_certificate(p: &XferParams, k: &Controller, sb: &SectorBounds) -> Result<Certificate> {
    require_stabilizing(p, k, "nominal")?;
    let shifted = p.shifted(sb.c);
    require_stabilizing(&shifted, k, "shifted")?;
    let norm = norms::hinf_irrational(|w| tze_response(&shifted, k, w))?;
    let mut ctx = base_context(p, k);
    ctx.shift_c = Some(sb.c);
    ctx.sector = Some(*sb);
    Ok(Certificate::from_norm(
        CertificateKind::SectorHinf,
        &norm,
        inverse_radius(sb),
        ctx,
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct LargeMagConfig {
    pub n: usize,
    pub peak: PeakGainConfig,
}

impl Default for LargeMagConfig {
    fn default() -> Self {
        LargeMagConfig {
            n: 200,
            peak: PeakGainConfig::default(),
        }
    }
}

/// T̃_ze on an N-point discretization of the shifted plant.
pub fn tze_discretized(p: &XferParams, k: &Controller, shift_c: f64, n: usize) -> Result<ssmodel::StateSpace> {
    let plant = ssmodel::minreal(&ssmodel::discretize(p, n, shift_c)?.plant, None);
    ssmodel::close_loop_ss(&plant, k)?.select(&["z"], &["w"])
}

/// Peak-gain certificate ‖T̃_ze‖_pk < 1/r for the large-magnitude sector.
pub fn large_mag_certificate(
    p: &XferParams,
    k: &Controller,
    sb: &SectorBounds,
    cfg: &LargeMagConfig,
) -> Result<Certificate> {
    require_stabilizing(p, k, "nominal")?;
    require_stabilizing(&p.shifted(sb.c), k, "shifted")?;
    let t = tze_discretized(p, k, sb.c, cfg.n)?;
    let norm = norms::peak_gain(&t, &cfg.peak)?;
    let mut ctx = base_context(p, k);
    ctx.shift_c = Some(sb.c);
    ctx.sector = Some(*sb);
    ctx.discretization_n = Some(cfg.n);
    Ok(Certificate::from_norm(
        CertificateKind::LargeMagPk,
        &norm,
        inverse_radius(sb),
        ctx,
    ))
}

/// Control-effort bound ‖W_u T_uw‖_∞ ≤ 1 on the irrational plant.
pub fn weight_certificate(p: &XferParams, k: &Controller) -> Result<Certificate> {
    require_stabilizing(p, k, "nominal")?;
    let norm = norms::hinf_irrational(|w| Ok(weight_response(w) * tuw_response(p, k, w)?))?;
    Ok(Certificate::from_norm(
        CertificateKind::WeightBound,
        &norm,
        1.0,
        base_context(p, k),
    ))
}

/// Design surrogate ‖T̃_ze‖₂ ≤ ρ on an N-point discretization.
pub fn h2_surrogate_certificate(
    p: &XferParams,
    k: &Controller,
    sb: &SectorBounds,
    rho: f64,
    n: usize,
) -> Result<Certificate> {
    let t = tze_discretized(p, k, sb.c, n)?;
    let norm = norms::h2(&t)?;
    let mut ctx = base_context(p, k);
    ctx.shift_c = Some(sb.c);
    ctx.sector = Some(*sb);
    ctx.discretization_n = Some(n);
    Ok(Certificate::from_norm(CertificateKind::H2Surrogate, &norm, rho, ctx))
}

/// Synthesis program a controller was designed for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "program", rename_all = "snake_case")]
pub enum DesignSpec {
    /// Global sector with the small-gain test on T̃_ze.
    SectorProgram { q_l: f64, q_u: f64 },
    /// Large-magnitude sector with the peak-gain test and an H2 surrogate.
    Overshoot { q_l: f64, q_u: f64, rho: f64 },
}

impl DesignSpec {
    /// Published design sectors for the gray and blue scenarios.
    pub fn for_scenario(name: &str) -> Result<Self> {
        match name {
            "gray" => Ok(DesignSpec::SectorProgram { q_l: -4.8, q_u: 0.48 }),
            "blue" => Ok(DesignSpec::Overshoot {
                q_l: -3.0,
                q_u: -0.1,
                rho: 1.3,
            }),
            other => Err(Error::UnknownName(format!("no design spec for scenario '{other}'"))),
        }
    }

    pub fn sector(&self) -> Result<SectorBounds> {
        match *self {
            DesignSpec::SectorProgram { q_l, q_u } | DesignSpec::Overshoot { q_l, q_u, .. } => {
                SectorBounds::from_slopes(q_l, q_u)
            }
        }
    }

    pub fn mode(&self) -> SectorMode {
        match self {
            DesignSpec::SectorProgram { .. } => SectorMode::Global,
            DesignSpec::Overshoot { .. } => SectorMode::LargeMagnitude,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bundle {
    pub scenario: String,
    pub controller: String,
    pub design: DesignSpec,
    pub certificates: Vec<Certificate>,
    /// Kinds whose failure fails the bundle; the rest are reported.
    pub required: Vec<CertificateKind>,
    pub pass: bool,
}

/// Every certificate of the design program of `scenario` for `k`.
pub fn certify_bundle(
    sp: &ScenarioParams,
    k: &Controller,
    design: &DesignSpec,
    cfg: &LargeMagConfig,
) -> Result<Bundle> {
    let name = sp.name.clone();
    let p = XferParams::from(scenario::derive_dimensionless(sp)?);
    let fitted = scenario::fit_sector(sp, design.sector()?.q_l, design.sector()?.q_u, design.mode());
    let (sb, verified) = match fitted {
        Ok(sb) => (sb, true),
        Err(Error::SectorViolation { .. }) => (design.sector()?, false),
        Err(e) => return Err(e),
    };
    let mut certs = vec![nyquist_certify(&p, k, None)?];
    let mut required = vec![CertificateKind::NyquistClosedLoop, CertificateKind::WeightBound];
    if certs[0].pass {
        match *design {
            DesignSpec::SectorProgram { .. } => {
                certs.push(sector_certificate(&p, k, &sb)?);
                required.push(CertificateKind::SectorHinf);
            }
            DesignSpec::Overshoot { rho, .. } => {
                certs.push(large_mag_certificate(&p, k, &sb, cfg)?);
                certs.push(h2_surrogate_certificate(&p, k, &sb, rho, cfg.n)?);
                required.push(CertificateKind::LargeMagPk);
            }
        }
        certs.push(weight_certificate(&p, k)?);
    }
    for c in certs.iter_mut() {
        c.context.scenario = Some(name.clone());
        if c.context.sector.is_some() {
            c.context.sector_verified = Some(verified);
        }
    }
    let pass = certs.len() > 1
        && certs
            .iter()
            .filter(|c| required.contains(&c.kind))
            .all(|c| c.pass);
    Ok(Bundle {
        scenario: name,
        controller: k.name.clone(),
        design: *design,
        certificates: certs,
        required,
        pass,
    })
}

/// Design plants for the controller programs, shared with synthesis.
pub fn design_plants(p: &XferParams, sb: &SectorBounds, n: usize) -> Result<DesignPlants> {
    DesignPlants::new(p, n, sb.c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray() -> XferParams {
        XferParams::from(scenario::derive_dimensionless(&ScenarioParams::fixture("gray").unwrap()).unwrap())
    }

    fn blue() -> XferParams {
        XferParams::from(scenario::derive_dimensionless(&ScenarioParams::fixture("blue").unwrap()).unwrap())
    }

    #[test]
    fn published_controllers_pass_nyquist() {
        let c = nyquist_certify(&gray(), &Controller::fixture("gray").unwrap(), None).unwrap();
        assert!(c.pass && c.computed == 0.0, "{c:?}");
        let c = nyquist_certify(&blue(), &Controller::fixture("blue").unwrap(), None).unwrap();
        assert!(c.pass && c.computed == 2.0, "{c:?}");
    }

    #[test]
    fn zero_controller_fails_on_blue() {
        let c = nyquist_certify(&blue(), &Controller::zero(), None).unwrap();
        assert!(!c.pass);
        assert_eq!((c.computed, c.threshold), (0.0, 2.0));
    }

    #[test]
    fn unstable_controller_is_refused() {
        let k = Controller::from_matrices(
            "unstable",
            crate::linalg::from_rows(&[vec![0.5]]).unwrap(),
            crate::linalg::from_rows(&[vec![1.0, 0.0]]).unwrap(),
            crate::linalg::from_rows(&[vec![0.1]]).unwrap(),
            crate::linalg::from_rows(&[vec![0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            nyquist_certify(&gray(), &k, None),
            Err(Error::UnstableController { .. })
        ));
    }

    #[test]
    fn zero_controller_has_no_control_effort() {
        let c = weight_certificate(&gray(), &Controller::zero()).unwrap();
        assert_eq!(c.computed, 0.0);
        assert!(c.pass);
    }

    #[test]
    fn vanishing_radius_always_passes() {
        let sb = SectorBounds {
            q_l: 0.0,
            q_u: 0.0,
            c: 0.0,
            r: 0.0,
            m_mag: None,
            l_mag: None,
        };
        let c = sector_certificate(&gray(), &Controller::fixture("gray").unwrap(), &sb).unwrap();
        assert!(c.pass && c.threshold.is_infinite());
    }

    #[test]
    fn destabilized_shifted_plant_is_not_certified() {
        // A shift deep into the anti-damped region breaks K_gray.
        let sb = SectorBounds::from_slopes(3.0, 5.0).unwrap();
        let r = large_mag_certificate(
            &gray(),
            &Controller::fixture("gray").unwrap(),
            &sb,
            &LargeMagConfig { n: 50, ..Default::default() },
        );
        assert!(matches!(r, Err(Error::NotStabilizing { .. })), "{r:?}");
    }

    #[test]
    fn certificates_are_deterministic() {
        let k = Controller::fixture("gray").unwrap();
        let a = weight_certificate(&gray(), &k).unwrap();
        let b = weight_certificate(&gray(), &k).unwrap();
        assert_eq!(a.computed, b.computed);
    }
}
