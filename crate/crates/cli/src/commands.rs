use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use vistomo_core::environment::DEFAULT_ENV_DIM;
use vistomo_core::fringes::{self, FringeFit, FringeRecord, ShotNoise};
use vistomo_core::interferometer::analytic_visibilities_mixed;
use vistomo_core::polarization::wrap_phase;
use vistomo_core::reconstruct::{
    enumerate_consistent_states, reconstruct, QEstimate, Scenario,
};
use vistomo_core::stokes::{
    bounds_check, consistency_ball, identities_check, visibility_ellipsoid,
    visibility_stokes_with, BlochVector, BoundsReport, ConsistencyBall, Ellipsoid,
    GeometrySurvey, IdentityReport, StokesOptions, VisibilityStokes,
};
use vistomo_core::{
    embed, Basis, CoherenceTriple, IdlerPrep, PolarizationState, SetupConfig, SignalPrep,
    Visibilities,
};

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::error::{CliError, CliResult};

pub const VISIBILITIES_FILE: &str = "visibilities.json";
pub const STATE_FILE: &str = "state.json";
pub const CHECK_FILE: &str = "check.json";

pub fn fringe_file_name(basis: Basis) -> String {
    format!("fringes_{}.csv", basis.as_str())
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(CliError::io(path))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).expect("report types serialize");
    w.write_all(b"\n").map_err(CliError::io(path))?;
    w.flush().map_err(CliError::io(path))
}

/// One CSV per basis with the unbiased signal preparation for that basis.
pub fn simulate(cfg: &RunConfig, seed: Option<u64>, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    let setup = cfg.setup_config()?;
    let grid = cfg.grid.phase_grid();
    let mut written = Vec::new();
    for (i, basis) in Basis::ALL.into_iter().enumerate() {
        let run = setup.with_signal(SignalPrep::unbiased_for(basis));
        // independent stream per basis, derived from one seed
        let noise = cfg.noise.map(|n| ShotNoise {
            counts: n.counts,
            seed: seed.unwrap_or(n.seed).wrapping_add(i as u64),
        });
        let rec = fringes::sweep(&run, &basis.vector(), basis.as_str(), &grid, noise)
            .map_err(|e| CliError::Usage(format!("{}: {e}", basis.as_str())))?;
        let path = out_dir.join(fringe_file_name(basis));
        let mut w = create(&path)?;
        fringes::write_csv(&[rec], &mut w)?;
        w.flush().map_err(CliError::io(&path))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FitEntry {
    Ok(FringeFit),
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumRule {
    /// `V_H²+V_V²`, `V_D²+V_A²`, `V_L²+V_R²`.
    pub sums: [f64; 3],
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractReport {
    pub schema_version: u32,
    /// Absent when any basis failed to fit.
    pub visibilities: Option<Visibilities>,
    pub fits: BTreeMap<String, FitEntry>,
    pub sum_rule: Option<SumRule>,
    pub stokes: Option<VisibilityStokes>,
    pub transmission: Option<f64>,
}

/// Inputs may be CSV files or directories holding `fringes_*.csv`.
fn collect_inputs(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            for basis in Basis::ALL {
                let p = input.join(fringe_file_name(basis));
                if p.exists() {
                    files.push(p);
                }
            }
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

fn load_records(inputs: &[PathBuf]) -> CliResult<BTreeMap<String, FringeRecord>> {
    let mut by_basis = BTreeMap::new();
    for path in collect_inputs(inputs)? {
        let file = File::open(&path).map_err(CliError::io(&path))?;
        let records = fringes::read_csv(BufReader::new(file)).map_err(|e| CliError::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        for rec in records {
            if rec.port_label != "upper" {
                continue;
            }
            let label = rec.basis_label.clone();
            if by_basis.insert(label.clone(), rec).is_some() {
                return Err(CliError::Usage(format!("basis {label} given more than once")));
            }
        }
    }
    let missing: Vec<&str> = Basis::ALL
        .iter()
        .map(|b| b.as_str())
        .filter(|b| !by_basis.contains_key(*b))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Usage(format!(
            "no fringe data for basis {}",
            missing.join(", ")
        )));
    }
    Ok(by_basis)
}

/// Fits every basis; the report is written even when some fits fail.
pub fn extract(
    inputs: &[PathBuf],
    transmission: Option<f64>,
    out_dir: &Path,
) -> CliResult<(PathBuf, ExtractReport)> {
    let records = load_records(inputs)?;
    let mut fits = BTreeMap::new();
    let mut failed = Vec::new();
    let mut vis = Visibilities::default();
    for basis in Basis::ALL {
        let label = basis.as_str();
        match fringes::fit(&records[label]) {
            Ok(fit) => {
                vis.set(basis, fit.visibility);
                fits.insert(label.to_owned(), FitEntry::Ok(fit));
            }
            Err(e) => {
                failed.push(label.to_owned());
                fits.insert(label.to_owned(), FitEntry::Failed { error: e.to_string() });
            }
        }
    }
    let mut report = ExtractReport {
        schema_version: SCHEMA_VERSION,
        visibilities: None,
        fits,
        sum_rule: None,
        stokes: None,
        transmission,
    };
    if failed.is_empty() {
        let opts = StokesOptions {
            sum_rule_tol: f64::INFINITY,
            transmission,
        };
        let est = visibility_stokes_with(&vis, &opts)?;
        report.visibilities = Some(vis);
        report.sum_rule = Some(SumRule {
            sums: est.sums,
            spread: est.spread,
        });
        report.stokes = Some(est.best());
    }
    let path = out_dir.join(VISIBILITIES_FILE);
    write_json(&path, &report)?;
    if failed.is_empty() {
        Ok((path, report))
    } else {
        Err(CliError::Fit { bases: failed })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistentSample {
    pub bloch: BlochVector,
    pub state: PolarizationState,
    pub triple: CoherenceTriple,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateReport {
    pub schema_version: u32,
    pub scenario: Scenario,
    /// Row-major `[re, im]` pairs of the 2×2 density matrix.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<[f64; 8]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bloch: Option<BlochVector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<QEstimate>,
    pub residuals: BTreeMap<String, f64>,
    pub stokes: VisibilityStokes,
    pub ball: ConsistencyBall,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistent_states: Option<Vec<ConsistentSample>>,
}

pub struct ReconstructOptions {
    pub tolerance: f64,
    pub sum_rule_tol: f64,
    /// Number of consistent states sampled when the scenario is unknown.
    pub samples: usize,
    pub seed: u64,
}

pub fn reconstruct_state(
    visibilities_json: &Path,
    scenario: Scenario,
    opts: &ReconstructOptions,
    out_dir: &Path,
) -> CliResult<(PathBuf, StateReport)> {
    let file = File::open(visibilities_json).map_err(CliError::io(visibilities_json))?;
    let input: ExtractReport =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::Parse {
            path: visibilities_json.to_owned(),
            message: e.to_string(),
        })?;
    let vis = input.visibilities.ok_or_else(|| {
        CliError::Usage(format!(
            "{} holds no visibilities (failed fits)",
            visibilities_json.display()
        ))
    })?;
    let est = visibility_stokes_with(
        &vis,
        &StokesOptions {
            sum_rule_tol: opts.sum_rule_tol,
            transmission: input.transmission,
        },
    )?;
    let vs = est.best();
    let mut report = StateReport {
        schema_version: SCHEMA_VERSION,
        scenario,
        rho: None,
        bloch: None,
        q: None,
        residuals: BTreeMap::from([("sum_rule_spread".to_owned(), est.spread)]),
        stokes: vs,
        ball: consistency_ball(&vs),
        consistent_states: None,
    };
    if scenario == Scenario::Unknown {
        let found = enumerate_consistent_states(&vs, opts.samples, opts.seed)?;
        report.consistent_states = Some(
            found
                .iter()
                .map(|s| ConsistentSample {
                    bloch: s.bloch(),
                    state: s.state,
                    triple: s.triple,
                })
                .collect(),
        );
    } else {
        let rec = reconstruct(&vs, scenario, opts.tolerance)?;
        report.rho = Some(rec.rho.to_reals());
        report.bloch = Some(rec.bloch);
        report.q = Some(rec.q);
        report.residuals.extend(rec.residuals);
    }
    let path = out_dir.join(STATE_FILE);
    write_json(&path, &report)?;
    Ok((path, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StokesGeometry {
    pub s0: f64,
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
    pub ball: ConsistencyBall,
    pub ellipsoid: Ellipsoid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub schema_version: u32,
    /// Fitted from noiseless fringes of the configured setup.
    pub visibilities: Visibilities,
    pub identities: IdentityReport,
    pub norm_defect: f64,
    /// Divided by the setup efficiency `(2PT/(1+P²))²`.
    pub stokes: StokesGeometry,
    /// Bloch vector of the idler as seen by the interferometer.
    pub bloch: BlochVector,
    pub bounds: BoundsReport,
    /// Random feasible environments for the configured idler polarization.
    pub survey: GeometrySurvey,
}

fn efficiency(setup: &SetupConfig) -> f64 {
    let p = setup.pump_ratio;
    2.0 * p * setup.transmission / (1.0 + p * p)
}

pub fn check(cfg: &RunConfig, seed: Option<u64>, out_dir: &Path) -> CliResult<(PathBuf, CheckReport)> {
    let setup = cfg.setup_config()?;
    let grid = cfg.grid.phase_grid();
    let vis = Visibilities::try_from_fn(|b| {
        let run = setup.with_signal(SignalPrep::unbiased_for(b));
        let rec = fringes::sweep(&run, &b.vector(), b.as_str(), &grid, None)?;
        Ok(fringes::fit(&rec).map(|f| f.visibility).unwrap_or(0.0))
    })
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let raw = visibility_stokes_with(
        &vis,
        &StokesOptions {
            sum_rule_tol: f64::INFINITY,
            transmission: None,
        },
    )?
    .raw;
    let eta2 = efficiency(&setup).powi(2);
    let vs = if eta2 > 0.0 {
        VisibilityStokes::new(raw.s0 / eta2, raw.sx / eta2, raw.sy / eta2, raw.sz / eta2)
    } else {
        raw
    };

    // θ enters exactly like a shift of ξ
    let pol = setup.idler.state;
    let seen = PolarizationState::new(pol.alpha, pol.beta, wrap_phase(pol.xi - setup.theta))?;
    let rho = IdlerPrep::new(seen, setup.idler.env.clone()).reduced_state();
    let r = BlochVector::from_array(rho.bloch())?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(cfg.check.seed));
    let mut survey = GeometrySurvey::default();
    for _ in 0..cfg.check.samples {
        let env = embed(&CoherenceTriple::sample_feasible(&mut rng), DEFAULT_ENV_DIM)?;
        let idler = IdlerPrep::new(pol, env);
        let sample = SetupConfig::reference(idler.clone());
        let s = visibility_stokes_with(
            &analytic_visibilities_mixed(&sample)?,
            &StokesOptions {
                sum_rule_tol: f64::INFINITY,
                transmission: None,
            },
        )?
        .raw;
        let rs = BlochVector::from_array(idler.reduced_state().bloch())?;
        survey.record(&bounds_check(&rs, &s));
    }

    let report = CheckReport {
        schema_version: SCHEMA_VERSION,
        identities: identities_check(&vis),
        norm_defect: raw.norm_defect(),
        stokes: StokesGeometry {
            s0: vs.s0,
            sx: vs.sx,
            sy: vs.sy,
            sz: vs.sz,
            ball: consistency_ball(&vs),
            ellipsoid: visibility_ellipsoid(&r),
        },
        bloch: r,
        bounds: bounds_check(&r, &vs),
        survey,
        visibilities: vis,
    };
    let path = out_dir.join(CHECK_FILE);
    write_json(&path, &report)?;
    Ok((path, report))
}
