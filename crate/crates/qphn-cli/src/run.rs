//! Executes one configured experiment and writes its CSV result file.

use std::io;
use std::path::Path;

use qphn::classical::{classical_master_evolve, McChain};
use qphn::lindblad::{lindblad_evolve, DensityMatrix};
use qphn::meanfield::{hopf_scan, integrate, CollectiveState};
use qphn::model::{ModelParams, PatternSet, SpinConfig};
use qphn::phase::{
    hysteresis_scan, limit_cycle_map, orbit_section, phase_sweep, ClassifySettings, GridSpec,
    HysteresisSettings, IcFamily, OrbitSettings,
};
use qphn::{mix_seed, Error as QphnError};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::config::{ExperimentConfig, Mode};
use crate::output::{float_cells, indexed, trajectory_header, write_atomic, Cell, CsvBuilder};

/// A failed run, tagged with the process exit code it should produce.
#[derive(Debug)]
pub enum RunFailure {
    /// The configuration asked for something the model cannot express (exit 2).
    Config(String),
    /// A numerically valid request failed during integration (exit 3).
    Numeric(String),
    /// A hard resource cap was exceeded (exit 4).
    Capacity(String),
    /// The result could not be written (exit 1).
    Io(io::Error),
}

impl RunFailure {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunFailure::Io(_) => 1,
            RunFailure::Config(_) => 2,
            RunFailure::Numeric(_) => 3,
            RunFailure::Capacity(_) => 4,
        }
    }
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunFailure::Config(m) => write!(f, "configuration rejected: {m}"),
            RunFailure::Numeric(m) => write!(f, "numerical failure: {m}"),
            RunFailure::Capacity(m) => write!(f, "capacity exceeded: {m}"),
            RunFailure::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl From<QphnError> for RunFailure {
    fn from(e: QphnError) -> Self {
        match e {
            QphnError::InvalidParameter(_)
            | QphnError::DimensionMismatch(_)
            | QphnError::Unsupported(_) => RunFailure::Config(e.to_string()),
            QphnError::Capacity(_) => RunFailure::Capacity(e.to_string()),
            _ => RunFailure::Numeric(e.to_string()),
        }
    }
}

impl From<io::Error> for RunFailure {
    fn from(e: io::Error) -> Self {
        RunFailure::Io(e)
    }
}

type RunResult = Result<String, RunFailure>;

/// Runs the experiment described by `cfg`, writes the output file, and
/// returns a one-line summary for stdout.
pub fn run(cfg: &ExperimentConfig) -> RunResult {
    let (content, rows) = match cfg.mode {
        Mode::Meanfield => run_meanfield(cfg)?,
        Mode::Lindblad => run_lindblad(cfg)?,
        Mode::Mc => run_mc(cfg)?,
        Mode::ClassicalExact => run_classical_exact(cfg)?,
        Mode::Sweep => run_sweep(cfg)?,
        Mode::Hysteresis => run_hysteresis(cfg)?,
        Mode::Hopf => run_hopf(cfg)?,
        Mode::LcMap => run_lc_map(cfg)?,
        Mode::Orbit => run_orbit(cfg)?,
    };
    write_atomic(Path::new(&cfg.output), &content)?;
    Ok(format!("{}: wrote {} ({rows} rows)", cfg.mode, cfg.output))
}

fn params_for(cfg: &ExperimentConfig) -> Result<ModelParams, RunFailure> {
    let t = cfg.temperature.expect("validated: point mode has T");
    let lambda = cfg.lambda.unwrap_or(0.0);
    Ok(ModelParams::from_temperature(
        cfg.q, cfg.p, t, lambda, cfg.gamma,
    )?)
}

fn run_meanfield(cfg: &ExperimentConfig) -> Result<(String, usize), RunFailure> {
    let params = params_for(cfg)?;
    let state0 = CollectiveState::from_overlaps(&cfg.effective_mf_m0());
    let traj = integrate(&state0, &params, cfg.mf_t_end, cfg.dt, cfg.mf_record_every)?;
    let mut b = CsvBuilder::new(cfg);
    b.header(&trajectory_header(cfg.p));
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let mut cells = vec![Cell::F(*t)];
        cells.extend(float_cells(s.as_slice().iter().copied()));
        b.row(&cells);
    }
    Ok((b.finish(), traj.times.len()))
}

fn run_orbit(cfg: &ExperimentConfig) -> Result<(String, usize), RunFailure> {
    let params = params_for(cfg)?;
    let state0 = CollectiveState::from_overlaps(&cfg.effective_orbit_m0());
    let settings = OrbitSettings {
        dt: cfg.dt,
        t_end: cfg.orbit_t_end,
        window: (cfg.orbit_window_lo, cfg.orbit_window_hi),
        record_every: cfg.orbit_record_every,
        ..OrbitSettings::default()
    };
    let orbit = orbit_section(&state0, &params, &settings)?;
    let mut b = CsvBuilder::new(cfg);
    b.meta("closed", orbit.closed.to_string());
    b.meta("closure_distance", format!("{:.16e}", orbit.closure_distance));
    b.meta(
        "period",
        orbit
            .period
            .map_or_else(|| "none".to_string(), |p| format!("{p:.16e}")),
    );
    b.header(&trajectory_header(cfg.p));
    for (t, s) in orbit.times.iter().zip(&orbit.states) {
        let mut cells = vec![Cell::F(*t)];
        cells.extend(float_cells(s.as_slice().iter().copied()));
        b.row(&cells);
    }
    Ok((b.finish(), orbit.times.len()))
}

fn run_lindblad(cfg: &ExperimentConfig) -> Result<(String, usize), RunFailure> {
    let n = cfg.n_sites.expect("validated: lindblad has n");
    let patterns = PatternSet::generate(n, cfg.p, cfg.q, cfg.seed)?;
    let params = params_for(cfg)?;
    let rho0 = DensityMatrix::planted_mixture(&patterns, 0, cfg.lb_m0)?;
    let evo = lindblad_evolve(
        &rho0,
        &patterns,
        &params,
        cfg.lb_t_end,
        cfg.dt,
        cfg.lb_record_every,
    )?;
    let mut b = CsvBuilder::new(cfg);
    b.header(&trajectory_header(cfg.p));
    for (t, obs) in evo.times.iter().zip(&evo.observables) {
        let mut cells = vec![Cell::F(*t)];
        for fam in [&obs.m, &obs.x, &obs.xbar, &obs.y, &obs.ybar] {
            cells.extend(float_cells(fam.iter().copied()));
        }
        b.row(&cells);
    }
    Ok((b.finish(), evo.times.len()))
}

fn run_mc(cfg: &ExperimentConfig) -> Result<(String, usize), RunFailure> {
    let n = cfg.n_sites.expect("validated: mc has n");
    let patterns = PatternSet::generate(n, cfg.p, cfg.q, cfg.seed)?;
    let beta = 1.0 / cfg.temperature.expect("validated: mc has T");
    // Independent stream for the initial condition so it never aliases the
    // chain's own proposal stream.
    let mut ic_rng = ChaCha12Rng::seed_from_u64(mix_seed(cfg.seed, 1, 0));
    let config = SpinConfig::planted(&patterns, 0, cfg.mc_m0, &mut ic_rng)?;
    let mut chain = McChain::new(&patterns, config, beta, cfg.seed)?;
    for _ in 0..cfg.mc_burn_in {
        chain.sweep();
    }
    let mut b = CsvBuilder::new(cfg);
    let mut cols = vec!["t".to_string()];
    cols.extend(indexed("m", cfg.p));
    b.header(&cols);
    for sweep in 1..=cfg.mc_sweeps {
        chain.sweep();
        let mut cells = vec![Cell::F(sweep as f64)];
        cells.extend(float_cells(chain.overlaps()));
        b.row(&cells);
    }
    Ok((b.finish(), cfg.mc_sweeps))
}

fn run_classical_exact(cfg: &ExperimentConfig) -> Result<(String, usize), RunFailure> {
    let n = cfg.n_sites.expect("validated: classical-exact has n");
    let patterns = PatternSet::generate(n, cfg.p, cfg.q, cfg.seed)?;
    let params = params_for(cfg)?;
    // Product initial distribution: each site matches its pattern entry with
    // the probability that reproduces mean overlap m0.
    let q = cfg.q as usize;
    let a = ((q as f64 - 1.0) * cfg.cm_m0 + 1.0) / q as f64;
    let rest = (1.0 - a) / (q as f64 - 1.0);
    let dim = q.pow(n as u32);
    let mut p0 = vec![0.0; dim];
    for (idx, slot) in p0.iter_mut().enumerate() {
        let mut weight = 1.0;
        let mut rem = idx;
        for i in 0..n {
            let s = (rem % q) as u8;
            rem /= q;
            weight *= if s == patterns.row(0)[i] { a } else { rest };
        }
        *slot = weight;
    }
    let record = classical_master_evolve(
        &p0,
        &patterns,
        &params,
        cfg.cm_t_end,
        cfg.dt,
        cfg.cm_record_every,
    )?;
    let mut b = CsvBuilder::new(cfg);
    let mut cols = vec!["t".to_string()];
    cols.extend(indexed("m", cfg.p));
    b.header(&cols);
    for (t, m) in record.times.iter().zip(&record.mean_overlaps) {
        let mut cells = vec![Cell::F(*t)];
        cells.extend(float_cells(m.iter().copied()));
        b.row(&cells);
    }
    Ok((b.finish(), record.times.len()))
}

fn run_sweep(cfg: &ExperimentConfig) -> Result<(String, usize), RunFailure> {
    let g = &cfg.sweep_grid;
    let t_grid = GridSpec {
        lo: g.t_lo,
        hi: g.t_hi,
        n: g.t_n,
    };
    let l_grid = GridSpec {
        lo: g.lambda_lo,
        hi: g.lambda_hi,
        n: g.lambda_n,
    };
    let settings = ClassifySettings {
        dt: cfg.dt,
        ..ClassifySettings::default()
    };
    let points = phase_sweep(cfg.p, cfg.gamma, &t_grid, &l_grid, &settings)?;
    let mut b = CsvBuilder::new(cfg);
    let mut cols = vec!["T".to_string(), "lambda".to_string(), "label".to_string()];
    for fam in IcFamily::ALL {
        cols.extend(indexed(&format!("m_final_{}", family_slug(fam)), cfg.p));
    }
    cols.extend(indexed("sigma_m", cfg.p));
    b.header(&cols);
    let n_rows = points.len();
    for pt in points {
        let mut cells = vec![
            Cell::F(pt.temperature),
            Cell::F(pt.lambda),
            Cell::S(pt.classification.label.to_string()),
        ];
        for fam in IcFamily::ALL {
            let fr = pt
                .classification
                .families
                .iter()
                .find(|f| f.family == fam)
                .expect("every family is classified");
            cells.extend(float_cells(fr.final_overlaps.iter().copied()));
        }
        cells.extend(float_cells(pt.classification.sigma_max()));
        b.row(&cells);
    }
    Ok((b.finish(), n_rows))
}

fn family_slug(fam: IcFamily) -> &'static str {
    match fam {
        IcFamily::NearPattern => "near_pattern",
        IcFamily::Weak => "weak",
        IcFamily::Negative => "negative",
        IcFamily::ZeroPlus => "zero_plus",
    }
}

fn run_lc_map(cfg: &ExperimentConfig) -> Result<(String, usize), RunFailure> {
    let g = &cfg.lcmap_grid;
    let t_grid = GridSpec {
        lo: g.t_lo,
        hi: g.t_hi,
        n: g.t_n,
    };
    let l_grid = GridSpec {
        lo: g.lambda_lo,
        hi: g.lambda_hi,
        n: g.lambda_n,
    };
    let settings = ClassifySettings {
        dt: cfg.dt,
        ..ClassifySettings::default()
    };
    let points = limit_cycle_map(cfg.p, cfg.gamma, &t_grid, &l_grid, &settings)?;
    let mut b = CsvBuilder::new(cfg);
    let mut cols = vec!["T".to_string(), "lambda".to_string()];
    cols.extend(indexed("sigma_m", cfg.p));
    b.header(&cols);
    let n_rows = points.len();
    for pt in points {
        let mut cells = vec![Cell::F(pt.temperature), Cell::F(pt.lambda)];
        cells.extend(float_cells(pt.sigma));
        b.row(&cells);
    }
    Ok((b.finish(), n_rows))
}

fn run_hysteresis(cfg: &ExperimentConfig) -> Result<(String, usize), RunFailure> {
    let lambda = cfg.lambda.expect("validated: hysteresis has lambda");
    let n = cfg.hy_n;
    let temps: Vec<f64> = (0..n)
        .map(|i| cfg.hy_t_lo + (cfg.hy_t_hi - cfg.hy_t_lo) * i as f64 / (n - 1) as f64)
        .collect();
    let settings = HysteresisSettings {
        m_strong: cfg.hy_m_strong,
        m_weak: cfg.hy_m_weak,
        dt: cfg.dt,
        ..HysteresisSettings::default()
    };
    let scan = hysteresis_scan(lambda, cfg.gamma, &temps, &settings)?;
    let mut b = CsvBuilder::new(cfg);
    let fmt_drop = |d: Option<f64>| d.map_or_else(|| "none".to_string(), |t| format!("{t:.16e}"));
    b.meta("t_drop_weak", fmt_drop(scan.weak.t_drop));
    b.meta("t_drop_strong", fmt_drop(scan.strong.t_drop));
    b.header(&["T".to_string(), "m_weak".to_string(), "m_strong".to_string()]);
    for ((t, w), s) in scan
        .temperatures
        .iter()
        .zip(&scan.weak.stationary_overlaps)
        .zip(&scan.strong.stationary_overlaps)
    {
        b.row(&[Cell::F(*t), Cell::F(*w), Cell::F(*s)]);
    }
    Ok((b.finish(), scan.temperatures.len()))
}

fn run_hopf(cfg: &ExperimentConfig) -> Result<(String, usize), RunFailure> {
    let lambda = cfg.lambda.expect("validated: hopf has lambda");
    let scan = hopf_scan(
        cfg.p,
        lambda,
        cfg.gamma,
        (cfg.hopf_t_lo, cfg.hopf_t_hi),
        cfg.hopf_n,
    )?;
    let mut b = CsvBuilder::new(cfg);
    let crossings = if scan.crossings.is_empty() {
        "none".to_string()
    } else {
        scan.crossings
            .iter()
            .map(|t| format!("{t:.16e}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    b.meta("crossings", crossings);
    b.header(&[
        "T".to_string(),
        "re_zeta1".to_string(),
        "im_zeta1".to_string(),
        "re_zeta2".to_string(),
        "im_zeta2".to_string(),
    ]);
    for pt in &scan.points {
        b.row(&[
            Cell::F(pt.temperature),
            Cell::F(pt.leading[0].re),
            Cell::F(pt.leading[0].im),
            Cell::F(pt.leading[1].re),
            Cell::F(pt.leading[1].im),
        ]);
    }
    Ok((b.finish(), scan.points.len()))
}
