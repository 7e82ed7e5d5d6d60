//! Phase classification of the collective dynamics.
//!
//! A parameter point (T, λ) is probed by integrating the collective equations
//! from a small set of deterministic initial-condition families and examining
//! the attractor each lands on:
//!
//! * **paramagnetic** — every family reaches the all-zero fixed point;
//! * **retrieval** — some family reaches a fixed point with a macroscopic
//!   overlap and no family keeps oscillating;
//! * **coexistence** — different families settle on a paramagnetic and a
//!   retrieval fixed point at the same parameters;
//! * **limit_cycle** — some family keeps oscillating: the standard deviation
//!   σ of an overlap over a late time window stays above threshold.
//!
//! The protocol integrates up to `t_settle` in short chunks with an early
//! fixed-point exit (residual below `fp_residual`), and only runs the long
//! cycle-detection window when no fixed point has been reached.

use rayon::prelude::*;
use std::fmt;

use crate::error::{Error, Result};
use crate::meanfield::{collective_rhs, integrate, limit_cycle_sigma, CollectiveState};
use crate::model::ModelParams;

/// Phase of a parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseLabel {
    Paramagnetic,
    Retrieval,
    Coexistence,
    LimitCycle,
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PhaseLabel::Paramagnetic => "paramagnetic",
            PhaseLabel::Retrieval => "retrieval",
            PhaseLabel::Coexistence => "coexistence",
            PhaseLabel::LimitCycle => "limit_cycle",
        };
        f.write_str(name)
    }
}

/// What a single initial-condition family ended up on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttractorKind {
    FixedPointParamagnetic,
    FixedPointRetrieval,
    Cycle,
}

/// Deterministic initial-condition families (all coherences start at zero).
///
/// Per-pattern magnitudes are scaled by fixed multipliers so that no two
/// overlaps start equal, which keeps pattern symmetry from masking
/// out-of-phase attractors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcFamily {
    /// Strongly aligned with the first pattern (m₁ = 0.95, rest small).
    NearPattern,
    /// Weak positive overlaps, 0.05-scale.
    Weak,
    /// Equal negative overlaps, −0.2 for every pattern. The symmetric start
    /// reaches the out-of-phase oscillatory attractors that pattern-biased
    /// starts miss (they fall into single-pattern basins).
    Negative,
    /// Barely off the paramagnetic point, 1e−3-scale.
    ZeroPlus,
}

impl IcFamily {
    pub const ALL: [IcFamily; 4] = [
        IcFamily::NearPattern,
        IcFamily::Weak,
        IcFamily::Negative,
        IcFamily::ZeroPlus,
    ];

    /// Per-pattern scale factors (up to the six-pattern cap).
    const MULTIPLIERS: [f64; 6] = [1.0, 1.6, 0.7, 1.3, 0.85, 1.15];

    /// The family's representative state for `p` patterns.
    pub fn initial_state(&self, p: usize) -> CollectiveState {
        let m: Vec<f64> = match self {
            IcFamily::NearPattern => (0..p)
                .map(|mu| if mu == 0 { 0.95 } else { 0.01 * (1 + mu) as f64 })
                .collect(),
            IcFamily::Weak => (0..p).map(|mu| 0.05 * Self::MULTIPLIERS[mu]).collect(),
            IcFamily::Negative => vec![-0.2; p],
            IcFamily::ZeroPlus => (0..p).map(|mu| 1e-3 * Self::MULTIPLIERS[mu]).collect(),
        };
        CollectiveState::from_overlaps(&m)
    }
}

impl fmt::Display for IcFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            IcFamily::NearPattern => "near_pattern",
            IcFamily::Weak => "weak",
            IcFamily::Negative => "negative",
            IcFamily::ZeroPlus => "zero_plus",
        };
        f.write_str(name)
    }
}

/// Decision thresholds for attractor classes.
#[derive(Debug, Clone, Copy)]
pub struct Thresholds {
    /// A state is paramagnetic when its infinity norm is below this.
    pub para_max: f64,
    /// A fixed point is a retrieval state when some |m^μ| reaches this.
    pub retrieval_min: f64,
    /// An overlap with late-window σ at or above this is oscillating.
    pub sigma_min: f64,
    /// Two fixed points count as distinct attractors (coexistence) only when
    /// some overlap differs by more than this.
    pub coexistence_gap: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            para_max: 1e-3,
            retrieval_min: 0.05,
            sigma_min: 1e-6,
            coexistence_gap: 0.1,
        }
    }
}

/// Protocol parameters for classifying one point.
#[derive(Debug, Clone, Copy)]
pub struct ClassifySettings {
    pub thresholds: Thresholds,
    pub dt: f64,
    /// Settle horizon with early fixed-point exits.
    pub t_settle: f64,
    /// Full horizon used when no fixed point was reached.
    pub t_cycle: f64,
    /// Late window (in global time) over which σ is measured.
    pub window: (f64, f64),
    /// Number of uniformly spaced σ samples in the window.
    pub n_sigma_samples: usize,
    /// Steps between recorded states on the long run.
    pub record_every: usize,
    /// Residual below which a state counts as a fixed point.
    pub fp_residual: f64,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            dt: 0.01,
            t_settle: 500.0,
            t_cycle: 1e4,
            window: (9e3, 1e4),
            n_sigma_samples: 2000,
            record_every: 50,
            fp_residual: 1e-9,
        }
    }
}

/// Interval between early fixed-point checks during the settle phase.
const SETTLE_CHUNK: f64 = 25.0;

/// Outcome of one initial-condition family at one parameter point.
#[derive(Debug, Clone)]
pub struct FamilyResult {
    pub family: IcFamily,
    pub attractor: AttractorKind,
    /// Overlaps of the last integrated state.
    pub final_overlaps: Vec<f64>,
    /// Late-window σ per overlap (zero when a fixed point was reached early).
    pub sigma: Vec<f64>,
    /// Whether the settle phase already converged to a fixed point.
    pub converged_early: bool,
}

/// Classification of one parameter point.
#[derive(Debug, Clone)]
pub struct PointClassification {
    pub label: PhaseLabel,
    pub families: Vec<FamilyResult>,
}

impl PointClassification {
    /// Per-pattern maximum σ over all families.
    pub fn sigma_max(&self) -> Vec<f64> {
        let p = self
            .families
            .first()
            .map_or(0, |f| f.final_overlaps.len());
        (0..p)
            .map(|mu| {
                self.families
                    .iter()
                    .map(|f| f.sigma[mu])
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    pub fn family(&self, family: IcFamily) -> &FamilyResult {
        self.families
            .iter()
            .find(|f| f.family == family)
            .expect("all families are always present")
    }
}

fn run_family(
    initial: &CollectiveState,
    params: &ModelParams,
    settings: &ClassifySettings,
) -> Result<(CollectiveState, Vec<f64>, bool)> {
    let p = params.n_patterns;
    let mut state = initial.clone();
    let mut t = 0.0;
    while t + 1e-9 < settings.t_settle {
        let chunk = (settings.t_settle - t).min(SETTLE_CHUNK);
        let traj = integrate(&state, params, chunk, settings.dt, usize::MAX)?;
        state = traj.final_state().clone();
        t += chunk;
        if collective_rhs(&state, params)?.max_abs() < settings.fp_residual {
            return Ok((state, vec![0.0; p], true));
        }
    }
    let traj = integrate(
        &state,
        params,
        settings.t_cycle - settings.t_settle,
        settings.dt,
        settings.record_every,
    )?;
    let window = (
        settings.window.0 - settings.t_settle,
        settings.window.1 - settings.t_settle,
    );
    let sigma = limit_cycle_sigma(&traj, window, settings.n_sigma_samples)?;
    Ok((traj.final_state().clone(), sigma, false))
}

fn attractor_of(state: &CollectiveState, sigma: &[f64], thresholds: &Thresholds) -> AttractorKind {
    if sigma.iter().any(|&s| s >= thresholds.sigma_min) {
        return AttractorKind::Cycle;
    }
    if state.max_abs() < thresholds.para_max {
        return AttractorKind::FixedPointParamagnetic;
    }
    let m_max = (0..state.n_patterns())
        .map(|mu| state.m(mu).abs())
        .fold(0.0, f64::max);
    if m_max >= thresholds.retrieval_min {
        AttractorKind::FixedPointRetrieval
    } else {
        // Sub-threshold fixed points count as paramagnetic.
        AttractorKind::FixedPointParamagnetic
    }
}

pub(crate) fn label_from_families(
    families: &[FamilyResult],
    thresholds: &Thresholds,
) -> PhaseLabel {
    if families
        .iter()
        .any(|f| f.attractor == AttractorKind::Cycle)
    {
        return PhaseLabel::LimitCycle;
    }
    let retrievals: Vec<&FamilyResult> = families
        .iter()
        .filter(|f| f.attractor == AttractorKind::FixedPointRetrieval)
        .collect();
    let paras: Vec<&FamilyResult> = families
        .iter()
        .filter(|f| f.attractor == AttractorKind::FixedPointParamagnetic)
        .collect();
    let distinct = retrievals.iter().any(|r| {
        paras.iter().any(|pa| {
            r.final_overlaps
                .iter()
                .zip(&pa.final_overlaps)
                .any(|(a, b)| (a - b).abs() > thresholds.coexistence_gap)
        })
    });
    if !retrievals.is_empty() && !paras.is_empty() && distinct {
        PhaseLabel::Coexistence
    } else if !retrievals.is_empty() {
        PhaseLabel::Retrieval
    } else {
        PhaseLabel::Paramagnetic
    }
}

/// Classifies one parameter point by running every initial-condition family.
pub fn classify_point(
    params: &ModelParams,
    settings: &ClassifySettings,
) -> Result<PointClassification> {
    let mut families = Vec::with_capacity(IcFamily::ALL.len());
    for family in IcFamily::ALL {
        let initial = family.initial_state(params.n_patterns);
        let (state, sigma, converged_early) = run_family(&initial, params, settings)?;
        let attractor = attractor_of(&state, &sigma, &settings.thresholds);
        families.push(FamilyResult {
            family,
            attractor,
            final_overlaps: (0..params.n_patterns).map(|mu| state.m(mu)).collect(),
            sigma,
            converged_early,
        });
    }
    let label = label_from_families(&families, &settings.thresholds);
    Ok(PointClassification { label, families })
}

/// A uniform inclusive grid.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.n == 0 || self.hi < self.lo {
            return Err(Error::InvalidParameter(format!(
                "invalid grid [{}, {}] with {} points",
                self.lo, self.hi, self.n
            )));
        }
        if self.n == 1 {
            return Ok(vec![self.lo]);
        }
        Ok((0..self.n)
            .map(|j| self.lo + (self.hi - self.lo) * j as f64 / (self.n - 1) as f64)
            .collect())
    }
}

/// One classified point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub temperature: f64,
    pub lambda: f64,
    pub classification: PointClassification,
}

/// Classifies a (T, λ) grid; rows are ordered temperature-major, drive-minor.
pub fn phase_sweep(
    n_patterns: usize,
    gamma: f64,
    temperature_grid: &GridSpec,
    lambda_grid: &GridSpec,
    settings: &ClassifySettings,
) -> Result<Vec<SweepPoint>> {
    let temps = temperature_grid.values()?;
    let lambdas = lambda_grid.values()?;
    let points: Vec<(f64, f64)> = temps
        .iter()
        .flat_map(|&t| lambdas.iter().map(move |&l| (t, l)))
        .collect();
    points
        .par_iter()
        .map(|&(t, l)| {
            let params = ModelParams::from_temperature(3, n_patterns, t, l, gamma)?;
            Ok(SweepPoint {
                temperature: t,
                lambda: l,
                classification: classify_point(&params, settings)?,
            })
        })
        .collect()
}

/// One point of an oscillation-amplitude map.
#[derive(Debug, Clone)]
pub struct LimitCyclePoint {
    pub temperature: f64,
    pub lambda: f64,
    /// Late-window σ per overlap from the near-paramagnetic family.
    pub sigma: Vec<f64>,
}

/// Maps the late-window σ (from the near-zero initial-condition family, the
/// most sensitive cycle probe) over a (T, λ) grid.
pub fn limit_cycle_map(
    n_patterns: usize,
    gamma: f64,
    temperature_grid: &GridSpec,
    lambda_grid: &GridSpec,
    settings: &ClassifySettings,
) -> Result<Vec<LimitCyclePoint>> {
    let temps = temperature_grid.values()?;
    let lambdas = lambda_grid.values()?;
    let points: Vec<(f64, f64)> = temps
        .iter()
        .flat_map(|&t| lambdas.iter().map(move |&l| (t, l)))
        .collect();
    points
        .par_iter()
        .map(|&(t, l)| {
            let params = ModelParams::from_temperature(3, n_patterns, t, l, gamma)?;
            // Oscillatory attractors can coexist with fixed points; probe from
            // both the near-paramagnetic start and the symmetric negative one
            // and keep the larger σ per pattern.
            let mut sigma = vec![0.0f64; n_patterns];
            for family in [IcFamily::ZeroPlus, IcFamily::Negative] {
                let initial = family.initial_state(n_patterns);
                let (_, fam_sigma, _) = run_family(&initial, &params, settings)?;
                for (acc, s) in sigma.iter_mut().zip(&fam_sigma) {
                    *acc = (*acc).max(*s);
                }
            }
            Ok(LimitCyclePoint {
                temperature: t,
                lambda: l,
                sigma,
            })
        })
        .collect()
}

/// Settings for a two-branch hysteresis scan over temperature.
#[derive(Debug, Clone, Copy)]
pub struct HysteresisSettings {
    /// Initial overlap of the strongly aligned branch.
    pub m_strong: f64,
    /// Initial overlap of the weakly aligned branch.
    pub m_weak: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Length of the late window over which the stationary overlap is
    /// averaged.
    pub average_window: f64,
    /// A branch has lost retrieval when its stationary overlap drops below
    /// this.
    pub drop_threshold: f64,
}

impl Default for HysteresisSettings {
    fn default() -> Self {
        Self {
            m_strong: 0.95,
            m_weak: 0.1,
            t_end: 500.0,
            dt: 0.01,
            average_window: 20.0,
            drop_threshold: 0.05,
        }
    }
}

/// One branch of a hysteresis scan.
#[derive(Debug, Clone)]
pub struct HysteresisBranch {
    pub initial_overlap: f64,
    /// Stationary overlap (late-window average of m¹) per temperature.
    pub stationary_overlaps: Vec<f64>,
    /// First grid temperature at which the branch has lost retrieval.
    pub t_drop: Option<f64>,
}

/// Result of a single-pattern hysteresis scan: both branches over the same
/// ascending temperature grid.
#[derive(Debug, Clone)]
pub struct HysteresisScan {
    pub temperatures: Vec<f64>,
    pub strong: HysteresisBranch,
    pub weak: HysteresisBranch,
}

/// Runs the single-pattern dynamics from a strong and a weak initial overlap
/// independently at every temperature and locates where each branch loses
/// retrieval.  Bistability shows up as the strong branch persisting to
/// strictly higher temperature.
pub fn hysteresis_scan(
    lambda: f64,
    gamma: f64,
    temperatures: &[f64],
    settings: &HysteresisSettings,
) -> Result<HysteresisScan> {
    if temperatures.is_empty() {
        return Err(Error::InvalidParameter(
            "hysteresis scan needs at least one temperature".into(),
        ));
    }
    if temperatures.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "hysteresis temperatures must be strictly increasing".into(),
        ));
    }
    if settings.average_window <= 0.0 || settings.average_window >= settings.t_end {
        return Err(Error::InvalidParameter(format!(
            "average window {} must lie inside (0, t_end = {})",
            settings.average_window, settings.t_end
        )));
    }
    let stationary = |m0: f64| -> Result<Vec<f64>> {
        temperatures
            .par_iter()
            .map(|&t| {
                let params = ModelParams::from_temperature(3, 1, t, lambda, gamma)?;
                let traj = integrate(
                    &CollectiveState::from_overlaps(&[m0]),
                    &params,
                    settings.t_end,
                    settings.dt,
                    50,
                )?;
                let cut = settings.t_end - settings.average_window;
                let (mut sum, mut count) = (0.0, 0usize);
                for (j, &tj) in traj.times.iter().enumerate() {
                    if tj >= cut {
                        sum += traj.states[j].m(0);
                        count += 1;
                    }
                }
                Ok(sum / count as f64)
            })
            .collect()
    };
    let make_branch = |m0: f64, overlaps: Vec<f64>| -> HysteresisBranch {
        let t_drop = temperatures
            .iter()
            .zip(&overlaps)
            .find(|(_, &m)| m.abs() < settings.drop_threshold)
            .map(|(&t, _)| t);
        HysteresisBranch {
            initial_overlap: m0,
            stationary_overlaps: overlaps,
            t_drop,
        }
    };
    let strong = make_branch(settings.m_strong, stationary(settings.m_strong)?);
    let weak = make_branch(settings.m_weak, stationary(settings.m_weak)?);
    Ok(HysteresisScan {
        temperatures: temperatures.to_vec(),
        strong,
        weak,
    })
}

/// Settings for extracting a late-time orbit.
#[derive(Debug, Clone, Copy)]
pub struct OrbitSettings {
    pub dt: f64,
    pub t_end: f64,
    /// Window (in global time) kept as the orbit.
    pub window: (f64, f64),
    pub record_every: usize,
    /// Return candidates must be at least this much earlier than the final
    /// point.
    pub min_return_gap: f64,
    /// The orbit is closed when the best return distance is below this
    /// fraction of the window's bounding-box diameter.
    pub closure_fraction: f64,
}

impl Default for OrbitSettings {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_end: 1e4,
            window: (9e3, 1e4),
            record_every: 50,
            min_return_gap: 5.0,
            closure_fraction: 0.01,
        }
    }
}

/// A late-time orbit with closure and period diagnostics.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub times: Vec<f64>,
    pub states: Vec<CollectiveState>,
    /// Whether the trajectory returns to its final point within the window
    /// (always true for a fixed point).
    pub closed: bool,
    /// Best return distance of the final point, in units of the bounding-box
    /// diameter (zero for a fixed point).
    pub closure_distance: f64,
    pub bbox_diameter: f64,
    /// Mean spacing of upward mean-level crossings of m¹, when oscillating.
    pub period: Option<f64>,
}

/// Integrates from `initial` and returns the trajectory restricted to the
/// late window together with closure and period estimates.
pub fn orbit_section(
    initial: &CollectiveState,
    params: &ModelParams,
    settings: &OrbitSettings,
) -> Result<Orbit> {
    let (w_lo, w_hi) = settings.window;
    if !(w_lo < w_hi) || w_lo < 0.0 || w_hi > settings.t_end {
        return Err(Error::WindowOutOfRange {
            lo: w_lo,
            hi: w_hi,
            t_lo: 0.0,
            t_hi: settings.t_end,
        });
    }
    let traj = integrate(
        initial,
        params,
        settings.t_end,
        settings.dt,
        settings.record_every,
    )?;
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (j, &t) in traj.times.iter().enumerate() {
        if (w_lo..=w_hi).contains(&t) {
            times.push(t);
            states.push(traj.states[j].clone());
        }
    }
    if states.len() < 3 {
        return Err(Error::InvalidParameter(
            "orbit window contains fewer than 3 records; lower record_every".into(),
        ));
    }
    let dim = states[0].as_slice().len();
    let (mut lo, mut hi) = (vec![f64::INFINITY; dim], vec![f64::NEG_INFINITY; dim]);
    for s in &states {
        for (k, &v) in s.as_slice().iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let bbox_diameter = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    let last = states.last().unwrap();
    let t_last = *times.last().unwrap();
    let mut best = f64::INFINITY;
    for (j, s) in states.iter().enumerate() {
        if t_last - times[j] < settings.min_return_gap {
            break;
        }
        let d = s
            .as_slice()
            .iter()
            .zip(last.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        best = best.min(d);
    }
    let (closed, closure_distance) = if bbox_diameter < 1e-9 {
        // A fixed point: trivially closed.
        (true, 0.0)
    } else {
        let rel = best / bbox_diameter;
        (rel < settings.closure_fraction, rel)
    };
    let m_series: Vec<f64> = states.iter().map(|s| s.m(0)).collect();
    let period = mean_crossing_period(&times, &m_series);
    Ok(Orbit {
        times,
        states,
        closed,
        closure_distance,
        bbox_diameter,
        period,
    })
}

/// Mean spacing of upward crossings of the series mean — a simple period
/// estimate for an oscillating signal.  Returns `None` for (numerically)
/// constant series or fewer than two crossings.
pub fn mean_crossing_period(times: &[f64], values: &[f64]) -> Option<f64> {
    if values.len() < 3 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let spread = values.iter().fold(0.0f64, |a, &v| a.max((v - mean).abs()));
    if spread < 1e-12 {
        return None;
    }
    let mut crossings = Vec::new();
    for j in 1..values.len() {
        let (a, b) = (values[j - 1], values[j]);
        if a < mean && b >= mean {
            let w = (mean - a) / (b - a);
            crossings.push(times[j - 1] + w * (times[j] - times[j - 1]));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    Some((crossings.last().unwrap() - crossings[0]) / (crossings.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn family_initial_states_are_fixed() {
        let near = IcFamily::NearPattern.initial_state(2);
        assert_eq!(near.m(0), 0.95);
        assert_eq!(near.m(1), 0.02);
        let weak = IcFamily::Weak.initial_state(2);
        assert_eq!(weak.m(0), 0.05);
        assert_relative_eq!(weak.m(1), 0.08, epsilon = 1e-15);
        let neg = IcFamily::Negative.initial_state(2);
        assert_eq!(neg.m(0), -0.2);
        assert_eq!(neg.m(1), -0.2);
        let zp = IcFamily::ZeroPlus.initial_state(2);
        assert_eq!(zp.m(0), 1e-3);
        assert_relative_eq!(zp.m(1), 1.6e-3, epsilon = 1e-18);
        // Coherences always start at zero.
        assert_eq!(near.x(0), 0.0);
        assert_eq!(near.ybar(1), 0.0);
    }

    #[test]
    fn grid_values_hit_both_endpoints() {
        let g = GridSpec {
            lo: 0.5,
            hi: 1.5,
            n: 5,
        };
        let v = g.values().unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v[0], 0.5);
        assert_eq!(v[4], 1.5);
        assert_relative_eq!(v[2], 1.0, epsilon = 1e-15);
        let single = GridSpec {
            lo: 2.0,
            hi: 2.0,
            n: 1,
        };
        assert_eq!(single.values().unwrap(), vec![2.0]);
        assert!(GridSpec {
            lo: 2.0,
            hi: 1.0,
            n: 3
        }
        .values()
        .is_err());
    }

    #[test]
    fn crossing_period_recovers_a_sine_and_rejects_constants() {
        let omega = 0.7;
        let times: Vec<f64> = (0..2000).map(|j| j as f64 * 0.05).collect();
        let values: Vec<f64> = times.iter().map(|&t| 0.3 + 0.1 * (omega * t).sin()).collect();
        let period = mean_crossing_period(&times, &values).unwrap();
        assert_relative_eq!(
            period,
            2.0 * std::f64::consts::PI / omega,
            max_relative = 0.01
        );
        let flat = vec![0.25; times.len()];
        assert!(mean_crossing_period(&times, &flat).is_none());
    }

    #[test]
    fn label_logic_handles_gray_zones_and_gaps() {
        let thr = Thresholds::default();
        let fam = |attractor: AttractorKind, m: f64, sigma: f64| FamilyResult {
            family: IcFamily::Weak,
            attractor,
            final_overlaps: vec![m],
            sigma: vec![sigma],
            converged_early: true,
        };
        // Any cycling family dominates.
        let label = label_from_families(
            &[
                fam(AttractorKind::Cycle, 0.0, 1e-4),
                fam(AttractorKind::FixedPointRetrieval, 0.6, 0.0),
            ],
            &thr,
        );
        assert_eq!(label, PhaseLabel::LimitCycle);
        // Retrieval + paramagnet with a wide gap → coexistence.
        let label = label_from_families(
            &[
                fam(AttractorKind::FixedPointRetrieval, 0.6, 0.0),
                fam(AttractorKind::FixedPointParamagnetic, 0.0, 0.0),
            ],
            &thr,
        );
        assert_eq!(label, PhaseLabel::Coexistence);
        // Too-small separation falls back to retrieval.
        let label = label_from_families(
            &[
                fam(AttractorKind::FixedPointRetrieval, 0.06, 0.0),
                fam(AttractorKind::FixedPointParamagnetic, 0.01, 0.0),
            ],
            &thr,
        );
        assert_eq!(label, PhaseLabel::Retrieval);
        // All paramagnetic.
        let label = label_from_families(
            &[fam(AttractorKind::FixedPointParamagnetic, 0.0, 0.0)],
            &thr,
        );
        assert_eq!(label, PhaseLabel::Paramagnetic);
    }

    #[test]
    fn classifies_the_undriven_phases() {
        let settings = ClassifySettings::default();
        let hot = ModelParams::from_temperature(3, 1, 3.0, 0.0, 1.0).unwrap();
        let c = classify_point(&hot, &settings).unwrap();
        assert_eq!(c.label, PhaseLabel::Paramagnetic);
        assert!(c.families.iter().all(|f| f.converged_early));

        let cold = ModelParams::from_temperature(3, 1, 1.0, 0.0, 1.0).unwrap();
        let c = classify_point(&cold, &settings).unwrap();
        assert_eq!(c.label, PhaseLabel::Retrieval);
        assert!((c.family(IcFamily::NearPattern).final_overlaps[0] - 0.99225).abs() < 1e-3);

        let mid = ModelParams::from_temperature(3, 1, 2.1, 0.0, 1.0).unwrap();
        let c = classify_point(&mid, &settings).unwrap();
        assert_eq!(c.label, PhaseLabel::Coexistence);
        assert_eq!(
            c.family(IcFamily::ZeroPlus).attractor,
            AttractorKind::FixedPointParamagnetic
        );
        assert_eq!(
            c.family(IcFamily::NearPattern).attractor,
            AttractorKind::FixedPointRetrieval
        );
    }

    #[test]
    fn classification_is_deterministic() {
        let settings = ClassifySettings::default();
        let params = ModelParams::from_temperature(3, 2, 2.1, 0.3, 1.0).unwrap();
        let a = classify_point(&params, &settings).unwrap();
        let b = classify_point(&params, &settings).unwrap();
        assert_eq!(a.label, b.label);
        for (fa, fb) in a.families.iter().zip(&b.families) {
            assert_eq!(fa.final_overlaps, fb.final_overlaps);
            assert_eq!(fa.sigma, fb.sigma);
        }
    }

    #[test]
    fn hysteresis_bistability_shows_up_between_the_drop_points() {
        let settings = HysteresisSettings::default();
        let scan = hysteresis_scan(0.0, 1.0, &[2.12, 2.3], &settings).unwrap();
        // At 2.12 the basin boundary already lies above m(0) = 0.1, so the
        // weak branch falls to the paramagnet while the strong branch holds
        // retrieval up to the spinodal just below 2.2.
        assert_eq!(scan.weak.t_drop, Some(2.12));
        assert_eq!(scan.strong.t_drop, Some(2.3));
        assert!(scan.strong.stationary_overlaps[0] > 0.5);
        assert!(scan.weak.stationary_overlaps[0].abs() < 0.05);
    }

    #[test]
    fn orbit_of_a_fixed_point_is_trivially_closed() {
        let params = ModelParams::from_temperature(3, 1, 1.0, 0.0, 1.0).unwrap();
        let settings = OrbitSettings {
            t_end: 200.0,
            window: (100.0, 200.0),
            ..OrbitSettings::default()
        };
        let orbit = orbit_section(
            &CollectiveState::from_overlaps(&[0.8]),
            &params,
            &settings,
        )
        .unwrap();
        assert!(orbit.closed);
        assert_eq!(orbit.closure_distance, 0.0);
        assert!(orbit.period.is_none());
        assert!(orbit.bbox_diameter < 1e-9);
    }
}
