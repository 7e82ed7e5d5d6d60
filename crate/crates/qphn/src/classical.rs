//! Classical stochastic dynamics: heat-bath Monte Carlo on large networks and
//! the exact master equation on small ones.
//!
//! Both backends are thermal with respect to the classical network energy.
//! The Monte Carlo update draws a uniformly random site and resamples it from
//! the conditional Gibbs distribution of its local field (heat-bath rule),
//! which obeys detailed balance exactly.  The master equation uses the same
//! normalized jump rates as the dissipative quantum model restricted to the
//! diagonal, so the two coincide at zero drive.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mix_seed;
use crate::model::{
    pair_weight, pair_weight_int, pattern_accumulators, Channel, ModelParams, PatternSet,
    SpinConfig,
};
use crate::space::{Space, MAX_MASTER_DIM};

/// Monte Carlo run settings.  `sweeps` counts measurement sweeps taken after
/// `burn_in` equilibration sweeps; one sweep is N single-site updates.
#[derive(Debug, Clone, Copy)]
pub struct MCSettings {
    pub sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for MCSettings {
    fn default() -> Self {
        Self {
            sweeps: 200,
            burn_in: 100,
            seed: 0,
        }
    }
}

/// Local-field potential of site `i`: the energy contribution h(x) of placing
/// site `i` in state `x` against the rest of the configuration,
///
/// ```text
/// h(x) = −(1/N) Σ_μ u(ξ_i^μ, x) Σ_{j≠i} u(ξ_j^μ, σ_j)
/// ```
///
/// so that E(σ) decomposes as (energy of the others) + h(σ_i), and any
/// single-site move costs ΔE = h(new) − h(old).
pub fn potential(i: usize, config: &SpinConfig, patterns: &PatternSet) -> Result<Vec<f64>> {
    if i >= config.n_sites() {
        return Err(Error::InvalidParameter(format!(
            "site index {i} out of range (N = {})",
            config.n_sites()
        )));
    }
    let acc = pattern_accumulators(config, patterns);
    if config.q() != patterns.q() || config.n_sites() != patterns.n_sites() {
        return Err(Error::DimensionMismatch(
            "configuration and patterns disagree".into(),
        ));
    }
    Ok(site_fields(patterns, config.site(i), i, &acc))
}

/// h(x) for all q states of site `i`, given the pattern accumulators of the
/// full configuration (the site's own contribution is subtracted out).
pub(crate) fn site_fields(patterns: &PatternSet, current: u8, i: usize, acc: &[i64]) -> Vec<f64> {
    let q = patterns.q();
    let n = patterns.n_sites() as f64;
    let mut h = vec![0.0f64; q as usize];
    for mu in 0..patterns.n_patterns() {
        let k = patterns.exponent(mu, i);
        let rest = (acc[mu] - pair_weight_int(q, k, current)) as f64;
        for (x, hx) in h.iter_mut().enumerate() {
            *hx -= pair_weight(q, k, x as u8) * rest / n;
        }
    }
    h
}

/// Heat-bath conditional distribution P(x) ∝ exp(−β h(x)) over the q states,
/// computed with a max-shift so arbitrarily large β is safe.
pub fn heat_bath_probabilities(fields: &[f64], beta: f64) -> Vec<f64> {
    let min = fields.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut probs: Vec<f64> = fields.iter().map(|&h| (-beta * (h - min)).exp()).collect();
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    probs
}

/// One reference heat-bath update: draws a uniform site and resamples it from
/// its conditional Gibbs distribution.  Recomputes the local field from
/// scratch; use [`McChain`] for long runs.
pub fn mc_step<R: Rng + ?Sized>(
    config: &mut SpinConfig,
    patterns: &PatternSet,
    beta: f64,
    rng: &mut R,
) -> Result<()> {
    let i = rng.gen_range(0..config.n_sites());
    let h = potential(i, config, patterns)?;
    let probs = heat_bath_probabilities(&h, beta);
    config.set(i, sample_discrete(&probs, rng));
    Ok(())
}

fn sample_discrete<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> u8 {
    let mut r: f64 = rng.gen();
    for (x, &p) in probs.iter().enumerate() {
        r -= p;
        if r < 0.0 {
            return x as u8;
        }
    }
    (probs.len() - 1) as u8
}

/// A long-running heat-bath chain with O(pq) work per update.
///
/// The chain maintains the integer pattern accumulators A_μ = Σ_j u(ξ_j^μ, σ_j)
/// so local fields, overlaps, and the energy never require a full O(N p)
/// rescan.
pub struct McChain<'a> {
    patterns: &'a PatternSet,
    config: SpinConfig,
    acc: Vec<i64>,
    beta: f64,
    rng: ChaCha12Rng,
}

impl<'a> McChain<'a> {
    pub fn new(
        patterns: &'a PatternSet,
        config: SpinConfig,
        beta: f64,
        seed: u64,
    ) -> Result<Self> {
        if config.q() != patterns.q() || config.n_sites() != patterns.n_sites() {
            return Err(Error::DimensionMismatch(
                "configuration and patterns disagree".into(),
            ));
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta = {beta} must be finite and >= 0"
            )));
        }
        let acc = pattern_accumulators(&config, patterns);
        Ok(Self {
            patterns,
            config,
            acc,
            beta,
            rng: ChaCha12Rng::seed_from_u64(seed),
        })
    }

    /// One heat-bath update of a uniformly random site.
    pub fn step(&mut self) {
        let i = self.rng.gen_range(0..self.config.n_sites());
        let old = self.config.site(i);
        let h = site_fields(self.patterns, old, i, &self.acc);
        let probs = heat_bath_probabilities(&h, self.beta);
        let new = sample_discrete(&probs, &mut self.rng);
        if new != old {
            let q = self.patterns.q();
            for mu in 0..self.patterns.n_patterns() {
                let k = self.patterns.exponent(mu, i);
                self.acc[mu] += pair_weight_int(q, k, new) - pair_weight_int(q, k, old);
            }
            self.config.set(i, new);
        }
    }

    /// One sweep = N single-site updates.
    pub fn sweep(&mut self) {
        for _ in 0..self.config.n_sites() {
            self.step();
        }
    }

    /// Current overlaps with every pattern, from the integer accumulators.
    pub fn overlaps(&self) -> Vec<f64> {
        let scale =
            1.0 / (self.patterns.n_sites() as f64 * (f64::from(self.patterns.q()) - 1.0));
        self.acc.iter().map(|&a| a as f64 * scale).collect()
    }

    /// Current energy (recomputes the O(N p) self-term sum).
    pub fn energy(&self) -> f64 {
        crate::model::classical_energy(&self.config, self.patterns)
            .expect("chain invariants guarantee compatibility")
    }

    pub fn config(&self) -> &SpinConfig {
        &self.config
    }
}

/// One point of an equilibrium overlap curve.
#[derive(Debug, Clone, Copy)]
pub struct EquilibriumPoint {
    pub temperature: f64,
    /// Time-averaged overlap with the planted pattern after burn-in.
    pub mean_overlap: f64,
}

/// Sweep-averaged equilibrium overlap of pattern 0 over a temperature list.
///
/// Each temperature runs an independent chain (parallelized) started from a
/// configuration planted at overlap `m0` with pattern 0, using a seed derived
/// from `settings.seed` and the temperature index, so results are reproducible
/// regardless of thread scheduling.
pub fn mc_equilibrium_curve(
    patterns: &PatternSet,
    temperatures: &[f64],
    m0: f64,
    settings: &MCSettings,
) -> Result<Vec<EquilibriumPoint>> {
    if patterns.n_patterns() == 0 {
        return Err(Error::InvalidParameter(
            "equilibrium curve requires at least one pattern".into(),
        ));
    }
    if let Some(&bad) = temperatures.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "temperature {bad} must be finite and > 0"
        )));
    }
    temperatures
        .par_iter()
        .enumerate()
        .map(|(idx, &t)| {
            let seed = mix_seed(settings.seed, idx as u64, 1);
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let start = SpinConfig::planted(patterns, 0, m0, &mut rng)?;
            let mut chain = McChain::new(patterns, start, 1.0 / t, mix_seed(seed, 2, 3))?;
            for _ in 0..settings.burn_in {
                chain.sweep();
            }
            let mut sum = 0.0;
            for _ in 0..settings.sweeps.max(1) {
                chain.sweep();
                sum += chain.overlaps()[0];
            }
            Ok(EquilibriumPoint {
                temperature: t,
                mean_overlap: sum / settings.sweeps.max(1) as f64,
            })
        })
        .collect()
}

/// Exact master-equation generator on the q^N configuration space.
struct MasterGenerator {
    /// (from, to, rate) for every allowed single-site move.
    transitions: Vec<(u32, u32, f64)>,
    /// Total outgoing rate per configuration.
    out_rate: Vec<f64>,
    dim: usize,
}

fn build_generator(patterns: &PatternSet, params: &ModelParams) -> Result<MasterGenerator> {
    let q = patterns.q();
    let n = patterns.n_sites();
    let sp = Space::new(q, n, MAX_MASTER_DIM)?;
    let channels: Vec<Channel> = Channel::all(q).collect();
    let mut transitions = Vec::with_capacity(sp.dim * 2 * n);
    let mut out_rate = vec![0.0f64; sp.dim];
    let mut exps = vec![0.0f64; channels.len()];
    for idx in 0..sp.dim {
        let digits = sp.digits(idx);
        let cfg = SpinConfig::new(q, digits.clone())?;
        let acc = pattern_accumulators(&cfg, patterns);
        for i in 0..n {
            let cur = digits[i];
            let h = site_fields(patterns, cur, i, &acc);
            // Channel exponents β Δ(α, s) = β (h[source] − h[target]) / 2 for
            // all 2q channels of site i; the normalizer sums every channel.
            for (e, ch) in exps.iter_mut().zip(&channels) {
                *e = params.beta * (h[ch.source(q) as usize] - h[ch.target(q) as usize]) / 2.0;
            }
            let max = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = exps.iter().map(|&e| (e - max).exp()).sum();
            for ch in &channels {
                if ch.source(q) != cur {
                    continue;
                }
                let rate = params.gamma * (exps[ch.index()] - max).exp() / z;
                let to = sp.with_digit(idx, i, ch.target(q));
                transitions.push((idx as u32, to as u32, rate));
                out_rate[idx] += rate;
            }
        }
    }
    Ok(MasterGenerator {
        transitions,
        out_rate,
        dim: sp.dim,
    })
}

/// Recorded history of a master-equation run.
#[derive(Debug, Clone)]
pub struct MasterRecord {
    pub times: Vec<f64>,
    /// Mean overlaps ⟨m^μ⟩ at each recorded time (outer index: time).
    pub mean_overlaps: Vec<Vec<f64>>,
    pub final_distribution: Vec<f64>,
}

/// Evolves a probability distribution over all q^N configurations under the
/// exact jump dynamics (fixed-step fourth-order Runge-Kutta).
///
/// `p0` must be a probability vector of length q^N; `params.lambda` must be 0
/// (the classical dynamics has no coherent drive).  Probability is conserved
/// to integrator accuracy and monitored.
pub fn classical_master_evolve(
    p0: &[f64],
    patterns: &PatternSet,
    params: &ModelParams,
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<MasterRecord> {
    if params.lambda != 0.0 {
        return Err(Error::Unsupported(
            "classical master equation requires lambda = 0".into(),
        ));
    }
    if params.q != patterns.q() {
        return Err(Error::DimensionMismatch(format!(
            "params q = {} but patterns q = {}",
            params.q,
            patterns.q()
        )));
    }
    if !(dt.is_finite() && dt > 0.0) || !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and t_end >= 0 (got dt = {dt}, t_end = {t_end})"
        )));
    }
    let record_every = record_every.max(1);
    let gen = build_generator(patterns, params)?;
    if p0.len() != gen.dim {
        return Err(Error::DimensionMismatch(format!(
            "distribution has {} entries, state space has {}",
            p0.len(),
            gen.dim
        )));
    }
    let total: f64 = p0.iter().sum();
    if (total - 1.0).abs() > 1e-8 || p0.iter().any(|&v| !v.is_finite() || v < -1e-12) {
        return Err(Error::InvalidParameter(
            "p0 is not a probability vector".into(),
        ));
    }

    // Per-configuration overlap table for observable recording.
    let sp = Space::new(patterns.q(), patterns.n_sites(), MAX_MASTER_DIM)?;
    let p_pat = patterns.n_patterns();
    let scale = 1.0 / (patterns.n_sites() as f64 * (f64::from(patterns.q()) - 1.0));
    let mut m_table = vec![0.0f64; p_pat * gen.dim];
    for idx in 0..gen.dim {
        let cfg = SpinConfig::new(patterns.q(), sp.digits(idx))?;
        for (mu, &a) in pattern_accumulators(&cfg, patterns).iter().enumerate() {
            m_table[mu * gen.dim + idx] = a as f64 * scale;
        }
    }
    let record = |t: f64, p: &[f64], rec: &mut MasterRecord| {
        rec.times.push(t);
        rec.mean_overlaps.push(
            (0..p_pat)
                .map(|mu| {
                    p.iter()
                        .zip(&m_table[mu * gen.dim..(mu + 1) * gen.dim])
                        .map(|(&w, &m)| w * m)
                        .sum()
                })
                .collect(),
        );
    };

    let rhs = |p: &[f64], dp: &mut [f64]| {
        for (dpi, (&pi, &out)) in dp.iter_mut().zip(p.iter().zip(&gen.out_rate)) {
            *dpi = -out * pi;
        }
        for &(from, to, rate) in &gen.transitions {
            dp[to as usize] += rate * p[from as usize];
        }
    };

    let n_steps = (t_end / dt).round() as usize;
    let mut p = p0.to_vec();
    let mut rec = MasterRecord {
        times: Vec::new(),
        mean_overlaps: Vec::new(),
        final_distribution: Vec::new(),
    };
    record(0.0, &p, &mut rec);
    let dim = gen.dim;
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    );
    for step in 1..=n_steps {
        rhs(&p, &mut k1);
        for i in 0..dim {
            tmp[i] = p[i] + 0.5 * dt * k1[i];
        }
        rhs(&tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = p[i] + 0.5 * dt * k2[i];
        }
        rhs(&tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = p[i] + dt * k3[i];
        }
        rhs(&tmp, &mut k4);
        for i in 0..dim {
            p[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = step as f64 * dt;
        if step % record_every == 0 || step == n_steps {
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > 1e-6 {
                return Err(Error::IntegratorAccuracy {
                    t,
                    what: format!("probability drifted to {total}"),
                });
            }
            record(t, &p, &mut rec);
        }
    }
    rec.final_distribution = p;
    Ok(rec)
}
