//! Command-line front end. Exit codes: 0 success, 1 invalid input,
//! 2 failed certificate, 3 numerical failure.

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::certify::{self, DesignSpec, LargeMagConfig};
use crate::error::{Error, Result};
use crate::norms::{self, PeakGainConfig};
use crate::scenario::{self, ScenarioParams, SectorBounds};
use crate::simulate::{self, DisturbanceSpec, SimConfig};
use crate::spectra::{self, ContourSpec};
use crate::ssmodel::{self, Controller};
use crate::synth::{self, SynthProblem};
use crate::xfer::{self, XferParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_CERTIFICATE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "drillwave", version, about = "Drill-string torsional wave analysis and control")]
pub struct Cli {
    /// Closest allowed approach of image curves to the origin.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Spatial grid size N for discretized models.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Random seed for synthesis.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dimensionless parameters and steady state of a scenario.
    Derive {
        #[arg(long)]
        scenario: String,
    },
    /// Zone and pole pattern of (q, α) as λ grows.
    Classify {
        #[arg(long, allow_hyphen_values = true)]
        q: f64,
        #[arg(long)]
        alpha: f64,
    },
    /// Number of unstable open-loop poles.
    Np {
        #[arg(long, allow_hyphen_values = true)]
        q: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        lambda: f64,
        /// Contour radius; derived from an exclusion bound when omitted.
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Certificate bundle for a scenario and controller.
    Certify {
        #[arg(long)]
        scenario: String,
        /// Fixture name or path to a controller JSON file.
        #[arg(long)]
        controller: String,
        /// Design program; defaults to the published one for the scenario.
        #[arg(long)]
        design: Option<PathBuf>,
    },
    /// Nonlinear time-domain simulation.
    Simulate {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        controller: Option<String>,
        #[arg(long)]
        on_at: Option<f64>,
        /// kind:start,duration,magnitude[,rate|frequency] or "none".
        #[arg(long, default_value = "none")]
        disturb: String,
        #[arg(long, default_value_t = 40.0)]
        t_final: f64,
        #[arg(long, default_value_t = 2e-3)]
        dt: f64,
        #[arg(long, default_value_t = 0.6)]
        offset: f64,
        #[arg(long, default_value_t = 10)]
        stride: usize,
        /// Replace ψ by zero.
        #[arg(long)]
        linear: bool,
        /// CSV output; JSON and SVG siblings share its stem.
        #[arg(long)]
        out: PathBuf,
    },
    /// Norm of a closed-loop channel.
    Norms {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        controller: String,
        #[arg(long, value_enum)]
        channel: Channel,
        #[arg(long, value_enum)]
        norm: NormKind,
        /// Evaluate H∞ on the irrational plant instead of the grid.
        #[arg(long)]
        irrational: bool,
        #[arg(long, default_value_t = 2e-3)]
        dt: f64,
    },
    /// Fixed-structure controller synthesis.
    Synth {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        max_evals: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Channel {
    /// w → z on the sector-shifted plant.
    Tze,
    /// w → u.
    Tuw,
    /// w → y1.
    Ty1w,
    /// Weighted control effort W_u·T_uw.
    Wtuw,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormKind {
    Hinf,
    H2,
    Pk,
}

/// Runs the CLI on `args`, writing results to `out`; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
            let _ = write!(out, "{e}");
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        return EXIT_INPUT;
    }
    match e {
        Error::NotStabilizing { .. } | Error::UnstableController { .. } | Error::SectorViolation { .. } => {
            EXIT_CERTIFICATE
        }
        _ => EXIT_NUMERICAL,
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn load_scenario(name: &str) -> Result<ScenarioParams> {
    let path = Path::new(name);
    if path.extension().is_some_and(|e| e == "json") {
        ScenarioParams::load(path)
    } else {
        ScenarioParams::fixture(name)
    }
}

fn load_controller(name: &str) -> Result<Controller> {
    let path = Path::new(name);
    if path.extension().is_some_and(|e| e == "json") {
        Controller::load(path)
    } else if name == "none" || name == "zero" {
        Ok(Controller::zero())
    } else {
        Controller::fixture(name)
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("--{name} must be positive")))
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let tol = match cli.tol {
        Some(t) => positive("tol", t)?,
        None => spectra::DEFAULT_MODULUS_TOL,
    };
    if cli.n.is_some_and(|n| n < 2) {
        return Err(Error::InvalidParameter("--n must be >= 2".into()));
    }
    match &cli.command {
        Command::Derive { scenario } => {
            let sp = load_scenario(scenario)?;
            let d = scenario::derive_dimensionless(&sp)?;
            let ss = scenario::steady_state(&sp)?;
            let p = XferParams::from(d);
            let n_p = spectra::count_unstable_poles_auto(&p)?.0;
            emit(
                out,
                &json!({
                    "scenario": sp.name,
                    "omega0": ss.omega0,
                    "kink": d.kink,
                    "lambda": d.lambda,
                    "alpha": d.alpha,
                    "q": d.q,
                    "p": d.p,
                    "time_scale": d.time_scale,
                    "n_p": n_p,
                }),
            )?;
            Ok(EXIT_OK)
        }
        Command::Classify { q, alpha } => {
            let z = spectra::classify_zone(*q, *alpha)?;
            emit(out, &z)?;
            Ok(EXIT_OK)
        }
        Command::Np { q, alpha, lambda, radius } => {
            let p = XferParams::new(*q, *alpha, *lambda)?;
            let r = match radius {
                Some(r) => positive("radius", *r)?,
                None => xfer::analytic_exclusion_radius(&p)?,
            };
            let (n_p, w) = spectra::count_unstable_poles_tol(&p, &ContourSpec::with_radius(r), tol)?;
            emit(out, &json!({ "n_p": n_p, "winding": w }))?;
            Ok(EXIT_OK)
        }
        Command::Certify {
            scenario,
            controller,
            design,
        } => {
            let sp = load_scenario(scenario)?;
            let k = load_controller(controller)?;
            let design = match design {
                Some(path) => serde_json::from_str::<DesignSpec>(&std::fs::read_to_string(path)?)?,
                None => DesignSpec::for_scenario(&sp.name)?,
            };
            let cfg = LargeMagConfig {
                n: cli.n.unwrap_or(200),
                ..Default::default()
            };
            let bundle = certify::certify_bundle(&sp, &k, &design, &cfg)?;
            emit(out, &bundle)?;
            Ok(if bundle.pass { EXIT_OK } else { EXIT_CERTIFICATE })
        }
        Command::Simulate {
            scenario,
            controller,
            on_at,
            disturb,
            t_final,
            dt,
            offset,
            stride,
            linear,
            out: csv_path,
        } => {
            let sp = load_scenario(scenario)?;
            let k = controller.as_deref().map(load_controller).transpose()?;
            let on_at = match (on_at, &k) {
                (Some(t), _) => Some(*t),
                (None, Some(_)) => Some(0.0),
                (None, None) => None,
            };
            let cfg = SimConfig {
                n: cli.n.unwrap_or(200),
                dt: *dt,
                t_final: *t_final,
                controller_on_at: on_at,
                initial_offset: *offset,
                disturbance: DisturbanceSpec::parse(disturb)?,
                record_stride: *stride,
                linear: *linear,
            };
            let ts = simulate::run(&sp, k.as_ref(), &cfg)?;
            simulate::write_csv(&ts, csv_path)?;
            simulate::write_sidecar(&ts, &sp, k.as_ref(), &cfg, &csv_path.with_extension("json"))?;
            simulate::write_svg(&ts, &csv_path.with_extension("svg"))?;
            emit(
                out,
                &json!({
                    "samples": ts.len(),
                    "stick_intervals": ts.stick_intervals,
                    "final_y1": ts.y1.last(),
                    "csv": csv_path,
                }),
            )?;
            Ok(EXIT_OK)
        }
        Command::Norms {
            scenario,
            controller,
            channel,
            norm,
            irrational,
            dt,
        } => {
            let sp = load_scenario(scenario)?;
            let k = load_controller(controller)?;
            let p = XferParams::from(scenario::derive_dimensionless(&sp)?);
            let sb = DesignSpec::for_scenario(&sp.name)
                .and_then(|d| d.sector())
                .or_else(|_| SectorBounds::from_slopes(0.0, 0.0))?;
            let result = channel_norm(&p, &k, &sb, *channel, *norm, *irrational, cli.n.unwrap_or(200), *dt)?;
            emit(out, &result)?;
            Ok(EXIT_OK)
        }
        Command::Synth {
            problem,
            out_dir,
            max_evals,
        } => {
            let mut prob = SynthProblem::load(problem)?;
            if let Some(n) = cli.n {
                prob.n_design = n;
            }
            if let Some(s) = cli.seed {
                prob.seed = s;
            }
            let prep = prob.prepare()?;
            let x0 = synth::stabilize_first(&prep, &prob.structure, prob.seed)?;
            let res = synth::optimize(&prep, &prob.structure, &x0, max_evals.unwrap_or(prob.max_evals))?;
            std::fs::create_dir_all(out_dir)?;
            let kpath = out_dir.join("controller.json");
            std::fs::write(&kpath, res.controller.to_json()?)?;
            synth::write_history(&res.history, &out_dir.join("history.csv"))?;
            let p = prob.scenario.params()?;
            let cert = certify::nyquist_certify(&p, &res.controller, None)?;
            emit(
                out,
                &json!({
                    "controller": kpath,
                    "evaluation": res.evaluation,
                    "nyquist": cert,
                }),
            )?;
            Ok(if cert.pass { EXIT_OK } else { EXIT_CERTIFICATE })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn channel_norm(
    p: &XferParams,
    k: &Controller,
    sb: &SectorBounds,
    channel: Channel,
    norm: NormKind,
    irrational: bool,
    n: usize,
    dt: f64,
) -> Result<norms::NormResult> {
    if irrational {
        if !matches!(norm, NormKind::Hinf) {
            return Err(Error::InvalidParameter("--irrational supports --norm hinf only".into()));
        }
        let shifted = p.shifted(sb.c);
        return match channel {
            Channel::Tze => norms::hinf_irrational(|w| certify::tze_response(&shifted, k, w)),
            Channel::Tuw => norms::hinf_irrational(|w| certify::tuw_response(p, k, w)),
            Channel::Wtuw => {
                norms::hinf_irrational(|w| Ok(certify::weight_response(w) * certify::tuw_response(p, k, w)?))
            }
            // Same closure as T̃_ze, on the nominal plant.
            Channel::Ty1w => norms::hinf_irrational(|w| certify::tze_response(p, k, w)),
        };
    }
    let plants = ssmodel::DesignPlants::new(p, n, sb.c)?;
    let loops = plants.close(k)?;
    let ss = match channel {
        Channel::Tze => loops.t_ze_shifted,
        Channel::Tuw => loops.t_uw,
        Channel::Ty1w => loops.t_y1w,
        Channel::Wtuw => ssmodel::series(&loops.t_uw, &ssmodel::weight_wu())?,
    };
    match norm {
        NormKind::Hinf => norms::hinf(&ss),
        NormKind::H2 => norms::h2(&ss),
        NormKind::Pk => norms::peak_gain(
            &ss,
            &PeakGainConfig {
                dt: positive("dt", dt)?,
                ..Default::default()
            },
        ),
    }
}
