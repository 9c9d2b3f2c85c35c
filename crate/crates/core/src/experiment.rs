//! JSON-configured experiment runs: full-order reference, LT-MOR sweeps,
//! time-domain POD baseline and spectral reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble_load, assemble_operators, interpolate, project_h1, FemOperators, NodalField};
use crate::forcing::{ForcingSpec, InitialConditionSpec};
use crate::laplace::{compute_snapshots, make_snapshot_plan};
use crate::mesh::StructuredMesh;
use crate::metrics::{ErrorReport, ErrorRow, RelativeErrorAccumulator};
use crate::pod::{pod, time_domain_pod, ReducedBasis, Truncation};
use crate::rom::{backward_euler, backward_euler_observe, project_model, SpaceTag, SteppingProblem, Trajectory};
use crate::spectral::{extreme_eigenvalues, optimal_beta, ContourParams, SpectralBounds};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingConfig {
    pub theta1: f64,
    pub theta2: f64,
    pub omega: f64,
    pub nu: f64,
    #[serde(rename = "lambda")]
    pub lambda_x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaKeyword {
    Optimal,
}

/// Either a fixed `beta` or `"optimal"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaChoice {
    Value(f64),
    Keyword(BetaKeyword),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourConfig {
    pub alpha: f64,
    pub beta: BetaChoice,
    pub m_list: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RomConfig {
    pub r_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "Nt")]
    pub n_steps: usize,
}

/// How the initial condition enters the discrete space.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IcProjection {
    #[default]
    Interpolation,
    H1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub mesh_n: usize,
    pub diffusion: f64,
    pub forcing: ForcingConfig,
    pub ic: InitialConditionSpec,
    #[serde(default)]
    pub ic_projection: IcProjection,
    pub contour: ContourConfig,
    pub rom: RomConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn forcing_spec(&self) -> ForcingSpec {
        let f = self.forcing;
        ForcingSpec {
            theta1: f.theta1,
            theta2: f.theta2,
            omega: f.omega,
            nu: f.nu,
            lambda_x: f.lambda_x,
            dim: self.dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim) {
            return Err(Error::config("dim", format!("must be 1 or 2, got {}", self.dim)));
        }
        if self.mesh_n < 2 {
            return Err(Error::config("mesh_n", "needs at least 2 cells per side"));
        }
        if !(self.diffusion > 0.0) || !self.diffusion.is_finite() {
            return Err(Error::config("diffusion", format!("must be positive, got {}", self.diffusion)));
        }
        self.forcing_spec()
            .validate()
            .map_err(|e| Error::config("forcing", e.to_string()))?;
        self.ic.validate(self.dim).map_err(|e| Error::config("ic", e.to_string()))?;
        let c = &self.contour;
        if !(c.alpha > self.forcing.nu) || !c.alpha.is_finite() {
            return Err(Error::config(
                "contour.alpha",
                format!("must exceed forcing.nu = {} (got {})", self.forcing.nu, c.alpha),
            ));
        }
        if !(c.alpha > 0.0) {
            return Err(Error::config("contour.alpha", "must be positive"));
        }
        if let BetaChoice::Value(b) = c.beta {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::config("contour.beta", format!("must be positive, got {b}")));
            }
        }
        if c.m_list.is_empty() {
            return Err(Error::config("contour.m_list", "must not be empty"));
        }
        for (k, &m) in c.m_list.iter().enumerate() {
            if m < 4 || m % 2 != 0 {
                return Err(Error::config(format!("contour.m_list[{k}]"), format!("must be even and >= 4, got {m}")));
            }
        }
        if self.rom.r_max == 0 {
            return Err(Error::config("rom.r_max", "must be at least 1"));
        }
        if self.time.n_steps == 0 {
            return Err(Error::config("time.Nt", "must be at least 1"));
        }
        if !(self.time.horizon > 0.0) || !self.time.horizon.is_finite() {
            return Err(Error::config("time.T", format!("must be positive, got {}", self.time.horizon)));
        }
        Ok(())
    }
}

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct TimingReport {
    pub assemble_fem: f64,
    pub solve_td_hf: f64,
    pub ld_hf: f64,
    pub build_rb: f64,
    pub solve_td_rb: f64,
}

impl TimingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,seconds\n");
        for (name, v) in [
            ("assemble_fem", self.assemble_fem),
            ("solve_td_hf", self.solve_td_hf),
            ("ld_hf", self.ld_hf),
            ("build_rb", self.build_rb),
            ("solve_td_rb", self.solve_td_rb),
        ] {
            let _ = writeln!(out, "{name},{}", sci(v));
        }
        out
    }
}

/// Scientific notation with 17 significant digits.
pub fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// Discretized problem shared by every run of one config.
pub struct Discretization {
    pub mesh: StructuredMesh,
    pub fem: FemOperators,
    pub forcing: ForcingSpec,
    pub g_h: NodalField,
    pub u0_h: NodalField,
}

impl Discretization {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let mesh = match config.dim {
            1 => StructuredMesh::interval(config.mesh_n)?,
            _ => StructuredMesh::square(config.mesh_n)?,
        };
        let fem = assemble_operators(&mesh, config.diffusion)?;
        let forcing = config.forcing_spec();
        let g_h = assemble_load(&mesh, &|x| forcing.eval_g(x));
        let ic = config.ic.clone();
        let u0_h = match config.ic_projection {
            IcProjection::Interpolation => interpolate(&mesh, &|x| ic.eval(x))?,
            IcProjection::H1 => project_h1(&mesh, &fem, &|x| ic.gradient(x))?,
        };
        Ok(Self {
            mesh,
            fem,
            forcing,
            g_h,
            u0_h,
        })
    }

    pub fn solve_fom(&self, horizon: f64, n_steps: usize) -> Result<Trajectory> {
        let b = |t: f64| self.forcing.eval_b(t);
        let problem = SteppingProblem {
            mass: &self.fem.mass,
            stiff: &self.fem.stiffness,
            load: &self.g_h.0,
            b_of_t: &b,
        };
        backward_euler(&problem, &self.u0_h.0, horizon, n_steps, SpaceTag::Full)
    }

    /// Runs the full-order stepper without storing states.
    pub fn step_fom_only(&self, horizon: f64, n_steps: usize) -> Result<DVector<f64>> {
        let b = |t: f64| self.forcing.eval_b(t);
        let problem = SteppingProblem {
            mass: &self.fem.mass,
            stiff: &self.fem.stiffness,
            load: &self.g_h.0,
            b_of_t: &b,
        };
        let mut last = self.u0_h.0.clone();
        backward_euler_observe(&problem, &self.u0_h.0, horizon, n_steps, &mut |_, _, u| {
            last.copy_from_slice(u)
        })?;
        Ok(last)
    }

    /// Relative L2 and H1 errors of the reduced model against `reference`.
    pub fn rom_errors(&self, basis: &ReducedBasis, reference: &Trajectory, horizon: f64, n_steps: usize) -> Result<(f64, f64)> {
        let model = project_model(&self.fem, basis, &self.g_h, &self.u0_h)?;
        let b = |t: f64| self.forcing.eval_b(t);
        let reduced = model.solve(&b, horizon, n_steps)?;
        let mut l2 = RelativeErrorAccumulator::default();
        let mut h1 = RelativeErrorAccumulator::default();
        for (u, c) in reference.states.iter().zip(&reduced.states) {
            let v = &basis.phi * c;
            l2.push(u, &v, &self.fem.mass);
            h1.push(u, &v, &self.fem.energy);
        }
        Ok((l2.value()?, h1.value()?))
    }
}

/// Resolved `beta` for a config, computing spectral bounds when `"optimal"`.
pub fn resolve_beta(config: &ExperimentConfig, fem: &FemOperators) -> Result<f64> {
    match config.contour.beta {
        BetaChoice::Value(b) => Ok(b),
        BetaChoice::Keyword(BetaKeyword::Optimal) => {
            let bounds = extreme_eigenvalues(fem)?;
            Ok(optimal_beta(bounds.lambda_min, bounds.lambda_max, config.contour.alpha)?.beta_opt)
        }
    }
}

pub struct FomRun {
    pub trajectory: Trajectory,
    pub timing: TimingReport,
}

pub fn run_fom(config: &ExperimentConfig) -> Result<FomRun> {
    let mut timing = TimingReport::default();
    let t0 = Instant::now();
    let disc = Discretization::new(config)?;
    timing.assemble_fem = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let trajectory = disc.solve_fom(config.time.horizon, config.time.n_steps)?;
    timing.solve_td_hf = t1.elapsed().as_secs_f64();
    Ok(FomRun { trajectory, timing })
}

pub struct LtmorRun {
    pub report: ErrorReport,
    pub timing: TimingReport,
}

/// `(M, R_max requested, numerical rank)`
type Truncated = Vec<(usize, usize, usize)>;

/// R-sweep over the given bases, ordered by `(M, R)`.
fn sweep_rows(
    disc: &Discretization,
    bases: &[(usize, ReducedBasis)],
    r_max: usize,
    reference: &Trajectory,
    config: &ExperimentConfig,
) -> Result<(Vec<ErrorRow>, Truncated)> {
    let mut cells = Vec::new();
    let mut truncated = Vec::new();
    for (k, (m, basis)) in bases.iter().enumerate() {
        let available = basis.dim();
        if available < r_max {
            truncated.push((*m, r_max, available));
        }
        cells.extend((1..=r_max.min(available)).map(|r| (k, *m, r)));
    }
    let (horizon, n_steps) = (config.time.horizon, config.time.n_steps);
    cells
        .par_iter()
        .map(|&(k, m, r)| {
            let basis = bases[k].1.truncated(r);
            disc.rom_errors(&basis, reference, horizon, n_steps)
                .map(|(err_l2, err_h1)| ErrorRow { m, r, err_l2, err_h1 })
                .map_err(|e| annotate(e, m, r))
        })
        .collect::<Result<Vec<_>>>()
        .map(|rows| (rows, truncated))
}

fn annotate(e: Error, m: usize, r: usize) -> Error {
    match e {
        Error::Numerical { message, residual, shift } => Error::Numerical {
            message: format!("M = {m}, R = {r}: {message}"),
            residual,
            shift,
        },
        Error::UndefinedRatio => e,
        other => Error::InvalidData(format!("M = {m}, R = {r}: {other}")),
    }
}

fn plateaus(rows: &[ErrorRow]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for row in rows {
        match out.iter_mut().find(|(m, _)| *m == row.m) {
            Some((_, p)) => *p = p.min(row.err_l2),
            None => out.push((row.m, row.err_l2)),
        }
    }
    out
}

pub fn run_ltmor(config: &ExperimentConfig) -> Result<LtmorRun> {
    let mut timing = TimingReport::default();
    let t0 = Instant::now();
    let disc = Discretization::new(config)?;
    timing.assemble_fem = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let reference = disc.solve_fom(config.time.horizon, config.time.n_steps)?;
    timing.solve_td_hf = t1.elapsed().as_secs_f64();

    let beta = resolve_beta(config, &disc.fem)?;
    let forcing = disc.forcing;
    let b_hat = move |s| forcing.eval_b_hat(s);
    let mut bases = Vec::new();
    let mut singular_values = Vec::new();
    for &m in &config.contour.m_list {
        let t2 = Instant::now();
        let plan = make_snapshot_plan(config.contour.alpha, beta, m)?;
        let set = compute_snapshots(&plan, &disc.fem, &disc.g_h, &disc.u0_h, &b_hat)?;
        timing.ld_hf += t2.elapsed().as_secs_f64();
        let t3 = Instant::now();
        let basis = pod(&set.columns, &set.weights(), &disc.fem.energy, Truncation::Rank(config.rom.r_max))?;
        timing.build_rb += t3.elapsed().as_secs_f64();
        singular_values.push((m, basis.sigma.clone()));
        bases.push((m, basis));
    }

    let t4 = Instant::now();
    let (rows, truncated) = sweep_rows(&disc, &bases, config.rom.r_max, &reference, config)?;
    timing.solve_td_rb = t4.elapsed().as_secs_f64();
    let report = ErrorReport {
        plateau: plateaus(&rows),
        rows,
        singular_values,
        truncated,
        alpha: config.contour.alpha,
        beta,
        mesh_n: config.mesh_n,
        n_steps: config.time.n_steps,
        horizon: config.time.horizon,
    };
    Ok(LtmorRun { report, timing })
}

/// Time-domain POD of the full-order trajectory, swept like [`run_ltmor`].
///
/// Rows carry `M = Nt + 1`, the number of time snapshots.
pub fn run_baseline_pod(config: &ExperimentConfig) -> Result<LtmorRun> {
    let mut timing = TimingReport::default();
    let t0 = Instant::now();
    let disc = Discretization::new(config)?;
    timing.assemble_fem = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let reference = disc.solve_fom(config.time.horizon, config.time.n_steps)?;
    timing.solve_td_hf = t1.elapsed().as_secs_f64();
    baseline_from_trajectory(config, &disc, &reference, timing)
}

fn baseline_from_trajectory(
    config: &ExperimentConfig,
    disc: &Discretization,
    reference: &Trajectory,
    mut timing: TimingReport,
) -> Result<LtmorRun> {
    let t2 = Instant::now();
    let basis = time_domain_pod(&reference.states, &disc.fem.energy, Truncation::Rank(config.rom.r_max))
        .map_err(|e| Error::config("time", e.to_string()))?;
    timing.build_rb = t2.elapsed().as_secs_f64();
    let m = reference.states.len();
    let singular_values = vec![(m, basis.sigma.clone())];
    let t3 = Instant::now();
    let (rows, truncated) = sweep_rows(disc, &[(m, basis)], config.rom.r_max, reference, config)?;
    timing.solve_td_rb = t3.elapsed().as_secs_f64();
    let report = ErrorReport {
        plateau: plateaus(&rows),
        rows,
        singular_values,
        truncated,
        alpha: config.contour.alpha,
        beta: f64::NAN,
        mesh_n: config.mesh_n,
        n_steps: config.time.n_steps,
        horizon: config.time.horizon,
    };
    Ok(LtmorRun { report, timing })
}

#[derive(Debug, Clone, Serialize)]
pub struct EigReport {
    pub bounds: SpectralBounds,
    pub contour: ContourParams,
    pub n_free: usize,
}

pub fn eig_report(config: &ExperimentConfig) -> Result<EigReport> {
    let disc = Discretization::new(config)?;
    let bounds = extreme_eigenvalues(&disc.fem)?;
    let contour = optimal_beta(bounds.lambda_min, bounds.lambda_max, config.contour.alpha)?;
    Ok(EigReport {
        bounds,
        contour,
        n_free: disc.fem.n_free,
    })
}

pub struct SweepRun {
    pub ltmor: LtmorRun,
    pub baseline: LtmorRun,
}

/// LT-MOR over every `M` and the time-domain baseline, sharing one reference run.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepRun> {
    let ltmor = run_ltmor(config)?;
    let disc = Discretization::new(config)?;
    let reference = disc.solve_fom(config.time.horizon, config.time.n_steps)?;
    let baseline = baseline_from_trajectory(config, &disc, &reference, TimingReport::default())?;
    Ok(SweepRun { ltmor, baseline })
}

pub fn errors_csv(report: &ErrorReport) -> String {
    let mut out = String::from("M,R,err_L2,err_H1\n");
    for row in &report.rows {
        let _ = writeln!(out, "{},{},{},{}", row.m, row.r, sci(row.err_l2), sci(row.err_h1));
    }
    out
}

pub fn singular_values_csv(report: &ErrorReport) -> String {
    let mut out = String::from("M,k,sigma\n");
    for (m, sigma) in &report.singular_values {
        for (k, s) in sigma.iter().enumerate() {
            let _ = writeln!(out, "{m},{},{}", k + 1, sci(*s));
        }
    }
    out
}

/// `t,u_0,...,u_{N-1}` per row.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t");
    for k in 0..traj.state_dim() {
        let _ = write!(out, ",u_{k}");
    }
    out.push('\n');
    for (t, u) in traj.t_grid.iter().zip(&traj.states) {
        out.push_str(&sci(*t));
        for v in u.iter() {
            out.push(',');
            out.push_str(&sci(*v));
        }
        out.push('\n');
    }
    out
}

/// Writes `name -> contents` pairs into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, contents) in files {
        fs::write(dir.join(name), contents)?;
    }
    Ok(())
}
