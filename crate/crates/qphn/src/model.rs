//! Core definitions of the q-state Potts-Hopfield network.
//!
//! A network of `N` sites stores `p` quenched random patterns; each site
//! carries a q-state Potts variable identified with a power of the primitive
//! q-th root of unity ω = exp(2πi/q).  Patterns and configurations are stored
//! as integer exponents `0..q` so that all classical quantities are exact
//! integer sums scaled at the end.
//!
//! The central pair coupling is
//!
//! ```text
//! u(a, b) = q δ_{a,b} − 1
//! ```
//!
//! which satisfies Σ_{α=1..q−1} (ω^{b−a})^α = u(a, b).  The classical energy,
//! pattern overlaps, thermal jump exponents, and the normalized jump-rate
//! vector of the dissipative dynamics are all built from `u`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Default number of Potts states used throughout the phase-diagram work.
pub const DEFAULT_Q: u8 = 3;

/// Hard cap on the pattern count for exact disorder enumeration (q^p terms).
pub const MAX_PATTERNS_EXACT: usize = 6;

/// Pair coupling u(a, b) = q δ_{a,b} − 1 between two Potts exponents.
#[inline]
pub fn pair_weight(q: u8, a: u8, b: u8) -> f64 {
    if a == b {
        f64::from(q) - 1.0
    } else {
        -1.0
    }
}

/// Integer-valued pair coupling, used by accumulator bookkeeping.
#[inline]
pub(crate) fn pair_weight_int(q: u8, a: u8, b: u8) -> i64 {
    if a == b {
        i64::from(q) - 1
    } else {
        -1
    }
}

/// A set of `p` quenched patterns over `N` sites, stored as exponents in `0..q`.
///
/// Pattern entries are drawn independently and uniformly from the q states by
/// [`PatternSet::generate`]; a fixed seed reproduces the same set on every
/// platform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSet {
    q: u8,
    n_sites: usize,
    n_patterns: usize,
    /// Row-major storage: entry of pattern `mu` at site `i` is `entries[mu * n_sites + i]`.
    entries: Vec<u8>,
}

impl PatternSet {
    /// Draws `n_patterns >= 1` uniform random patterns over `n_sites >= 1` sites.
    pub fn generate(n_sites: usize, n_patterns: usize, q: u8, seed: u64) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidParameter(format!("q = {q} must be >= 2")));
        }
        if n_sites == 0 {
            return Err(Error::InvalidParameter("n_sites must be >= 1".into()));
        }
        if n_patterns == 0 {
            return Err(Error::InvalidParameter("n_patterns must be >= 1".into()));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let entries = (0..n_sites * n_patterns)
            .map(|_| rng.gen_range(0..q))
            .collect();
        Ok(Self {
            q,
            n_sites,
            n_patterns,
            entries,
        })
    }

    /// Builds a pattern set from explicit exponent rows (one row per pattern).
    pub fn from_rows(q: u8, n_sites: usize, rows: &[Vec<u8>]) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidParameter(format!("q = {q} must be >= 2")));
        }
        if n_sites == 0 {
            return Err(Error::InvalidParameter("n_sites must be >= 1".into()));
        }
        let mut entries = Vec::with_capacity(rows.len() * n_sites);
        for (mu, row) in rows.iter().enumerate() {
            if row.len() != n_sites {
                return Err(Error::DimensionMismatch(format!(
                    "pattern {mu} has {} entries, expected {n_sites}",
                    row.len()
                )));
            }
            if let Some(&bad) = row.iter().find(|&&v| v >= q) {
                return Err(Error::InvalidParameter(format!(
                    "pattern {mu} contains exponent {bad} >= q = {q}"
                )));
            }
            entries.extend_from_slice(row);
        }
        Ok(Self {
            q,
            n_sites,
            n_patterns: rows.len(),
            entries,
        })
    }

    /// A pattern-free network (`p = 0`): every configuration has zero energy
    /// and the dynamics reduces to unbiased state shuffling.
    pub fn empty(n_sites: usize, q: u8) -> Self {
        Self {
            q,
            n_sites,
            n_patterns: 0,
            entries: Vec::new(),
        }
    }

    pub fn q(&self) -> u8 {
        self.q
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_patterns(&self) -> usize {
        self.n_patterns
    }

    /// Exponent of pattern `mu` at site `i`.
    #[inline]
    pub fn exponent(&self, mu: usize, i: usize) -> u8 {
        self.entries[mu * self.n_sites + i]
    }

    /// All exponents of pattern `mu` as a slice over sites.
    pub fn row(&self, mu: usize) -> &[u8] {
        &self.entries[mu * self.n_sites..(mu + 1) * self.n_sites]
    }
}

/// A classical network configuration: one exponent in `0..q` per site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinConfig {
    q: u8,
    sites: Vec<u8>,
}

impl SpinConfig {
    /// Wraps explicit site exponents, validating them against `q`.
    pub fn new(q: u8, sites: Vec<u8>) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidParameter(format!("q = {q} must be >= 2")));
        }
        if let Some(&bad) = sites.iter().find(|&&v| v >= q) {
            return Err(Error::InvalidParameter(format!(
                "site exponent {bad} >= q = {q}"
            )));
        }
        Ok(Self { q, sites })
    }

    /// A uniformly random configuration.
    pub fn uniform_random<R: Rng + ?Sized>(n_sites: usize, q: u8, rng: &mut R) -> Self {
        Self {
            q,
            sites: (0..n_sites).map(|_| rng.gen_range(0..q)).collect(),
        }
    }

    /// The configuration exactly equal to pattern `mu`.
    pub fn aligned(patterns: &PatternSet, mu: usize) -> Result<Self> {
        if mu >= patterns.n_patterns() {
            return Err(Error::InvalidParameter(format!(
                "pattern index {mu} out of range (p = {})",
                patterns.n_patterns()
            )));
        }
        Ok(Self {
            q: patterns.q(),
            sites: patterns.row(mu).to_vec(),
        })
    }

    /// A configuration whose expected overlap with pattern `mu` is `m0`.
    ///
    /// A fraction f = (m0 (q−1) + 1)/q of sites (chosen at random) is aligned
    /// with the pattern; every other site is set uniformly to one of the q−1
    /// misaligned states, which contributes u = −1 and yields ⟨m⟩ = m0.
    pub fn planted<R: Rng + ?Sized>(
        patterns: &PatternSet,
        mu: usize,
        m0: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if mu >= patterns.n_patterns() {
            return Err(Error::InvalidParameter(format!(
                "pattern index {mu} out of range (p = {})",
                patterns.n_patterns()
            )));
        }
        let q = patterns.q();
        let qf = f64::from(q);
        let lo = -1.0 / (qf - 1.0);
        if !(lo..=1.0).contains(&m0) {
            return Err(Error::InvalidParameter(format!(
                "target overlap {m0} outside [{lo}, 1]"
            )));
        }
        let n = patterns.n_sites();
        let f = (m0 * (qf - 1.0) + 1.0) / qf;
        let n_aligned = (f * n as f64).round() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        // Fisher-Yates shuffle so the aligned sites are a random subset.
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut sites = vec![0u8; n];
        for (rank, &i) in order.iter().enumerate() {
            let k = patterns.exponent(mu, i);
            sites[i] = if rank < n_aligned {
                k
            } else {
                // uniform over the q−1 misaligned states
                let shift = rng.gen_range(1..q);
                (k + shift) % q
            };
        }
        Ok(Self { q, sites })
    }

    pub fn q(&self) -> u8 {
        self.q
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[u8] {
        &self.sites
    }

    #[inline]
    pub fn site(&self, i: usize) -> u8 {
        self.sites[i]
    }

    /// Sets site `i` to exponent `v < q`.
    pub fn set(&mut self, i: usize, v: u8) {
        debug_assert!(v < self.q);
        self.sites[i] = v;
    }
}

/// Model parameters shared by every dynamical backend.
///
/// `beta` is the inverse temperature of the thermal bath, `lambda` the
/// transverse drive amplitude, and `gamma` the overall dissipation rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub q: u8,
    pub n_patterns: usize,
    pub beta: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl ModelParams {
    pub fn new(q: u8, n_patterns: usize, beta: f64, lambda: f64, gamma: f64) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidParameter(format!("q = {q} must be >= 2")));
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta = {beta} must be finite and >= 0"
            )));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lambda = {lambda} must be finite and >= 0"
            )));
        }
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma = {gamma} must be finite and > 0"
            )));
        }
        Ok(Self {
            q,
            n_patterns,
            beta,
            lambda,
            gamma,
        })
    }

    /// Convenience constructor taking a temperature `t > 0` instead of `beta`.
    pub fn from_temperature(
        q: u8,
        n_patterns: usize,
        t: f64,
        lambda: f64,
        gamma: f64,
    ) -> Result<Self> {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "temperature = {t} must be finite and > 0"
            )));
        }
        Self::new(q, n_patterns, 1.0 / t, lambda, gamma)
    }

    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }
}

/// One dissipative jump channel: level shift `s = ±1` landing in state `alpha − 1`.
///
/// Channel `(alpha, s)` moves a site from the source state `(alpha − 1 + s) mod q`
/// into the target state `alpha − 1`.  There are `2q` channels per site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Channel {
    /// 1-based channel label, `1..=q`.
    pub alpha: u8,
    /// Level shift, `+1` or `-1`.
    pub s: i8,
}

impl Channel {
    /// All `2q` channels in the fixed order (1,+1), (1,−1), (2,+1), (2,−1), …
    pub fn all(q: u8) -> impl Iterator<Item = Channel> {
        (1..=q).flat_map(|alpha| [Channel { alpha, s: 1 }, Channel { alpha, s: -1 }])
    }

    /// Index of this channel in the [`Channel::all`] order.
    #[inline]
    pub fn index(&self) -> usize {
        (usize::from(self.alpha) - 1) * 2 + usize::from(self.s < 0)
    }

    /// State the channel jumps into: `alpha − 1`.
    #[inline]
    pub fn target(&self, q: u8) -> u8 {
        (self.alpha - 1) % q
    }

    /// State the channel jumps out of: `(alpha − 1 + s) mod q`.
    #[inline]
    pub fn source(&self, q: u8) -> u8 {
        (i16::from(self.alpha) - 1 + i16::from(self.s)).rem_euclid(i16::from(q)) as u8
    }
}

/// Normalized squared jump amplitudes Γ²(α, s) for the `2q` channels of one site.
///
/// The entries are positive and sum to exactly 1 (the channel-sum normalization
/// of the thermal rates).
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector {
    q: u8,
    values: Vec<f64>,
}

impl RateVector {
    pub fn q(&self) -> u8 {
        self.q
    }

    /// Γ² for channel `(alpha, s)`.
    #[inline]
    pub fn get(&self, channel: Channel) -> f64 {
        self.values[channel.index()]
    }

    /// All `2q` values in [`Channel::all`] order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Integer pattern-weighted site sums A_μ = Σ_i u(ξ_i^μ, σ_i).
///
/// These accumulators determine both the energy and all overlaps and are the
/// quantity Monte Carlo bookkeeping tracks incrementally.
pub(crate) fn pattern_accumulators(config: &SpinConfig, patterns: &PatternSet) -> Vec<i64> {
    let q = patterns.q();
    (0..patterns.n_patterns())
        .map(|mu| {
            patterns
                .row(mu)
                .iter()
                .zip(config.sites())
                .map(|(&k, &s)| pair_weight_int(q, k, s))
                .sum()
        })
        .collect()
}

fn check_compatible(config: &SpinConfig, patterns: &PatternSet) -> Result<()> {
    if config.q() != patterns.q() {
        return Err(Error::DimensionMismatch(format!(
            "configuration q = {} but patterns q = {}",
            config.q(),
            patterns.q()
        )));
    }
    if config.n_sites() != patterns.n_sites() {
        return Err(Error::DimensionMismatch(format!(
            "configuration has {} sites but patterns have {}",
            config.n_sites(),
            patterns.n_sites()
        )));
    }
    Ok(())
}

/// Classical Hopfield-Potts energy of a configuration.
///
/// ```text
/// E(σ) = −(1/2N) Σ_{i≠j} Σ_μ u(ξ_i^μ, σ_i) u(ξ_j^μ, σ_j)
///      = −(1/2N) Σ_μ (A_μ² − Σ_i u(ξ_i^μ, σ_i)²)
/// ```
///
/// The i = j self-terms are excluded, matching the all-to-all coupling with no
/// self-interaction.
pub fn classical_energy(config: &SpinConfig, patterns: &PatternSet) -> Result<f64> {
    check_compatible(config, patterns)?;
    let q = patterns.q();
    let n = patterns.n_sites() as f64;
    let mut total = 0.0;
    for mu in 0..patterns.n_patterns() {
        let mut a = 0i64;
        let mut self_sq = 0i64;
        for (&k, &s) in patterns.row(mu).iter().zip(config.sites()) {
            let u = pair_weight_int(q, k, s);
            a += u;
            self_sq += u * u;
        }
        total += (a * a - self_sq) as f64;
    }
    Ok(-total / (2.0 * n))
}

/// Overlap m^μ = (1/(N(q−1))) Σ_i u(ξ_i^μ, σ_i) of a configuration with every pattern.
///
/// Each overlap lies in [−1/(q−1), 1]; the value 1 means perfect retrieval of
/// the pattern and 0 an uncorrelated configuration.
pub fn overlap(config: &SpinConfig, patterns: &PatternSet) -> Result<Vec<f64>> {
    check_compatible(config, patterns)?;
    let scale = 1.0 / (patterns.n_sites() as f64 * (f64::from(patterns.q()) - 1.0));
    Ok(pattern_accumulators(config, patterns)
        .into_iter()
        .map(|a| a as f64 * scale)
        .collect())
}

/// Thermal jump exponent Δ(α, s) of one channel at collective overlap `m`,
/// for a site with pattern exponents `k` (three-state model only).
///
/// ```text
/// Δ(α, s) = 3 Σ_μ m^μ ( δ_{k^μ, α−1} − δ_{k^μ, (α−1+s) mod 3} )
/// ```
///
/// Δ is (twice the inverse temperature times) the log-ratio weight favouring
/// jumps that lower the mean-field energy: a channel whose target state
/// matches pattern μ gains +3 m^μ, one whose source state matches loses the
/// same amount.  The overall sign is fixed by requiring that the λ = 0
/// stationary state reproduce the classical Gibbs self-consistency for the
/// overlap (retrieval solutions below the classical critical temperature).
pub fn meanfield_delta_energy(channel: Channel, m: &[f64], k: &[u8]) -> Result<f64> {
    if m.len() != k.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} overlaps but {} pattern exponents",
            m.len(),
            k.len()
        )));
    }
    if channel.alpha < 1 || channel.alpha > 3 || (channel.s != 1 && channel.s != -1) {
        return Err(Error::InvalidParameter(format!(
            "channel ({}, {}) outside the three-state channel set",
            channel.alpha, channel.s
        )));
    }
    let tgt = channel.target(3);
    let src = channel.source(3);
    let mut delta = 0.0;
    for (&mv, &kv) in m.iter().zip(k) {
        if kv >= 3 {
            return Err(Error::InvalidParameter(format!(
                "pattern exponent {kv} >= 3"
            )));
        }
        let d_tgt = if kv == tgt { 1.0 } else { 0.0 };
        let d_src = if kv == src { 1.0 } else { 0.0 };
        delta += mv * (d_tgt - d_src);
    }
    Ok(3.0 * delta)
}

/// Normalized squared jump amplitudes for the six channels of a three-state site.
///
/// ```text
/// Γ²(α, s) = exp(β Δ(α, s)) / Σ_{α', s'} exp(β Δ(α', s'))
/// ```
///
/// The exponentials are shifted by the maximum exponent before exponentiation
/// so the result is finite for arbitrarily large β|m|; the six entries always
/// sum to exactly 1.
pub fn meanfield_rates(m: &[f64], k: &[u8], beta: f64) -> Result<RateVector> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "beta = {beta} must be finite and >= 0"
        )));
    }
    let mut exponents = [0.0f64; 6];
    for ch in Channel::all(3) {
        exponents[ch.index()] = beta * meanfield_delta_energy(ch, m, k)?;
    }
    let max = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut values = vec![0.0f64; 6];
    let mut z = 0.0;
    for (v, &e) in values.iter_mut().zip(&exponents) {
        *v = (e - max).exp();
        z += *v;
    }
    for v in &mut values {
        *v /= z;
    }
    Ok(RateVector { q: 3, values })
}

/// Visits every pattern-exponent assignment k ∈ {0, 1, 2}^p exactly once.
///
/// The closure receives the current assignment as a slice of length `p`.
/// Capacity-capped at `p <= MAX_PATTERNS_EXACT` (3^p terms).
pub(crate) fn for_each_assignment<F: FnMut(&[u8])>(p: usize, mut f: F) -> Result<()> {
    if p > MAX_PATTERNS_EXACT {
        return Err(Error::Capacity(format!(
            "exact disorder enumeration needs 3^{p} terms; capped at p <= {MAX_PATTERNS_EXACT}"
        )));
    }
    let mut k = [0u8; MAX_PATTERNS_EXACT];
    let total = 3usize.pow(p as u32);
    for idx in 0..total {
        let mut rest = idx;
        for slot in k.iter_mut().take(p) {
            *slot = (rest % 3) as u8;
            rest /= 3;
        }
        f(&k[..p]);
    }
    Ok(())
}

/// Exact disorder average ⟨⟨f⟩⟩ = 3^{−p} Σ_{k ∈ {0,1,2}^p} f(k) over the
/// uniform pattern-exponent distribution of a three-state model.
///
/// Enumeration is exact (no sampling); the pattern count is capped at
/// [`MAX_PATTERNS_EXACT`].
pub fn disorder_average<F: FnMut(&[u8]) -> f64>(p: usize, mut f: F) -> Result<f64> {
    let mut sum = 0.0;
    for_each_assignment(p, |k| sum += f(k))?;
    Ok(sum / 3f64.powi(p as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Literal quadruple-sum energy: E = −(1/2) Σ_{i≠j} Σ_{αβ} J_ij^{αβ}
    /// u(σ_i, α) u(σ_j, β) with J_ij^{αβ} = (1/(q²N)) Σ_μ u(ξ_i^μ, α) u(ξ_j^μ, β).
    fn energy_literal(config: &SpinConfig, patterns: &PatternSet) -> f64 {
        let q = patterns.q();
        let n = patterns.n_sites();
        let p = patterns.n_patterns();
        let mut e = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for a in 0..q {
                    for b in 0..q {
                        let mut coupling = 0.0;
                        for mu in 0..p {
                            coupling += pair_weight(q, patterns.exponent(mu, i), a)
                                * pair_weight(q, patterns.exponent(mu, j), b);
                        }
                        coupling /= f64::from(q) * f64::from(q) * n as f64;
                        e -= 0.5
                            * coupling
                            * pair_weight(q, config.site(i), a)
                            * pair_weight(q, config.site(j), b);
                    }
                }
            }
        }
        e
    }

    #[test]
    fn pattern_generation_is_deterministic_and_in_range() {
        let a = PatternSet::generate(50, 3, 3, 42).unwrap();
        let b = PatternSet::generate(50, 3, 3, 42).unwrap();
        assert_eq!(a, b);
        let c = PatternSet::generate(50, 3, 3, 43).unwrap();
        assert_ne!(a, c);
        for mu in 0..3 {
            assert!(a.row(mu).iter().all(|&v| v < 3));
        }
    }

    #[test]
    fn pattern_entries_are_roughly_uniform() {
        let pats = PatternSet::generate(100_000, 1, 3, 7).unwrap();
        let mut counts = [0usize; 3];
        for &v in pats.row(0) {
            counts[v as usize] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / 100_000.0;
            assert!((freq - 1.0 / 3.0).abs() < 0.01, "frequency {freq}");
        }
    }

    #[test]
    fn pattern_generate_rejects_bad_arguments() {
        assert!(PatternSet::generate(0, 1, 3, 0).is_err());
        assert!(PatternSet::generate(4, 0, 3, 0).is_err());
        assert!(PatternSet::generate(4, 1, 1, 0).is_err());
    }

    #[test]
    fn energy_matches_literal_quadruple_sum() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for &(n, p, q) in &[(4usize, 1usize, 3u8), (5, 2, 3), (6, 3, 3), (4, 2, 2), (5, 1, 4)] {
            let pats = PatternSet::generate(n, p, q, rng.gen()).unwrap();
            for _ in 0..5 {
                let cfg = SpinConfig::uniform_random(n, q, &mut rng);
                let fast = classical_energy(&cfg, &pats).unwrap();
                let slow = energy_literal(&cfg, &pats);
                assert_relative_eq!(fast, slow, max_relative = 1e-12, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn energy_of_stored_pattern() {
        // One stored pattern over N = 4 sites at q = 3: configuration equal to
        // the pattern has every u = q−1 = 2, so E = −(1/2N)(A² − Σu²)
        //   = −(1/8)(8² − 4·4) = −6.
        let pats = PatternSet::from_rows(3, 4, &[vec![0, 1, 2, 0]]).unwrap();
        let cfg = SpinConfig::aligned(&pats, 0).unwrap();
        assert_relative_eq!(classical_energy(&cfg, &pats).unwrap(), -6.0);
    }

    #[test]
    fn energy_is_gauge_invariant_under_global_rotation() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let pats = PatternSet::generate(6, 2, 3, 19).unwrap();
        for _ in 0..5 {
            let cfg = SpinConfig::uniform_random(6, 3, &mut rng);
            let e0 = classical_energy(&cfg, &pats).unwrap();
            // Rotate every site and every pattern entry by +1 (mod 3).
            let rot_rows: Vec<Vec<u8>> = (0..2)
                .map(|mu| pats.row(mu).iter().map(|&v| (v + 1) % 3).collect())
                .collect();
            let rot_pats = PatternSet::from_rows(3, 6, &rot_rows).unwrap();
            let rot_cfg =
                SpinConfig::new(3, cfg.sites().iter().map(|&v| (v + 1) % 3).collect()).unwrap();
            let e1 = classical_energy(&rot_cfg, &rot_pats).unwrap();
            assert_relative_eq!(e0, e1, epsilon = 1e-12);
        }
    }

    #[test]
    fn overlap_of_aligned_and_rotated_configurations() {
        let pats = PatternSet::generate(30, 1, 3, 5).unwrap();
        let cfg = SpinConfig::aligned(&pats, 0).unwrap();
        assert_relative_eq!(overlap(&cfg, &pats).unwrap()[0], 1.0);
        // A global +1 rotation of a q = 3 pattern has every u = −1, so m = −1/2.
        let rot =
            SpinConfig::new(3, pats.row(0).iter().map(|&v| (v + 1) % 3).collect()).unwrap();
        assert_relative_eq!(overlap(&rot, &pats).unwrap()[0], -0.5);
    }

    #[test]
    fn overlap_range_is_respected_exhaustively() {
        // All 3^4 configurations against a random 2-pattern set.
        let pats = PatternSet::generate(4, 2, 3, 23).unwrap();
        let lo = -0.5 - 1e-15;
        for idx in 0..81u32 {
            let sites: Vec<u8> = (0..4).map(|i| ((idx / 3u32.pow(i)) % 3) as u8).collect();
            let cfg = SpinConfig::new(3, sites).unwrap();
            for m in overlap(&cfg, &pats).unwrap() {
                assert!(m >= lo && m <= 1.0 + 1e-15, "overlap {m} out of range");
            }
        }
    }

    #[test]
    fn random_configuration_has_small_overlap() {
        let pats = PatternSet::generate(30_000, 1, 3, 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let cfg = SpinConfig::uniform_random(30_000, 3, &mut rng);
        assert!(overlap(&cfg, &pats).unwrap()[0].abs() < 0.02);
    }

    #[test]
    fn planted_configuration_hits_target_overlap() {
        let pats = PatternSet::generate(30_000, 1, 3, 9).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for &m0 in &[-0.3, 0.0, 0.1, 0.5, 0.95] {
            let cfg = SpinConfig::planted(&pats, 0, m0, &mut rng).unwrap();
            let m = overlap(&cfg, &pats).unwrap()[0];
            assert!((m - m0).abs() < 0.02, "target {m0}, got {m}");
        }
        assert!(SpinConfig::planted(&pats, 0, 1.5, &mut rng).is_err());
        assert!(SpinConfig::planted(&pats, 0, -0.9, &mut rng).is_err());
    }

    #[test]
    fn pair_weight_matches_root_of_unity_sum() {
        // Σ_{α=1..q−1} (ω^{b−a})^α = q δ_{a,b} − 1, checked for q = 2..5.
        use num_complex::Complex64;
        for q in 2u8..=5 {
            let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / f64::from(q));
            for a in 0..q {
                for b in 0..q {
                    let mut sum = Complex64::new(0.0, 0.0);
                    for alpha in 1..q {
                        sum += w.powi(i32::from(alpha) * (i32::from(b) - i32::from(a)));
                    }
                    assert!((sum.im).abs() < 1e-12);
                    assert_relative_eq!(sum.re, pair_weight(q, a, b), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn channel_geometry() {
        let all: Vec<Channel> = Channel::all(3).collect();
        assert_eq!(all.len(), 6);
        for (i, ch) in all.iter().enumerate() {
            assert_eq!(ch.index(), i);
        }
        // (alpha = 1, s = +1) jumps from state 1 into state 0.
        let ch = Channel { alpha: 1, s: 1 };
        assert_eq!(ch.target(3), 0);
        assert_eq!(ch.source(3), 1);
        // (alpha = 1, s = −1) jumps from state 2 into state 0.
        let ch = Channel { alpha: 1, s: -1 };
        assert_eq!(ch.target(3), 0);
        assert_eq!(ch.source(3), 2);
    }

    #[test]
    fn delta_energy_at_full_overlap() {
        // Single pattern, m = 1, site exponent 0: the channel into state 0
        // from state 1 is maximally favoured, Δ = +3.
        let d = meanfield_delta_energy(Channel { alpha: 1, s: 1 }, &[1.0], &[0]).unwrap();
        assert_relative_eq!(d, 3.0);
        assert_relative_eq!(d.abs(), 3.0);
        // The reverse move (out of the pattern state into state 1) costs −3.
        let d = meanfield_delta_energy(Channel { alpha: 2, s: -1 }, &[1.0], &[0]).unwrap();
        assert_relative_eq!(d, -3.0);
        // Channels not touching the pattern state are neutral.
        let d = meanfield_delta_energy(Channel { alpha: 2, s: 1 }, &[1.0], &[0]).unwrap();
        assert_relative_eq!(d, 0.0);
    }

    #[test]
    fn delta_energy_is_additive_over_patterns() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..20 {
            let m = [rng.gen_range(-0.5..1.0), rng.gen_range(-0.5..1.0)];
            let k = [rng.gen_range(0..3u8), rng.gen_range(0..3u8)];
            for ch in Channel::all(3) {
                let joint = meanfield_delta_energy(ch, &m, &k).unwrap();
                let split = meanfield_delta_energy(ch, &m[..1], &k[..1]).unwrap()
                    + meanfield_delta_energy(ch, &m[1..], &k[1..]).unwrap();
                assert_relative_eq!(joint, split, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rates_are_uniform_at_zero_overlap_or_zero_beta() {
        for rv in [
            meanfield_rates(&[0.0], &[1], 2.7).unwrap(),
            meanfield_rates(&[0.4, -0.2], &[0, 2], 0.0).unwrap(),
        ] {
            for ch in Channel::all(3) {
                assert_relative_eq!(rv.get(ch), 1.0 / 6.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn rates_normalize_to_one_everywhere() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for _ in 0..200 {
            let p = rng.gen_range(1..=3usize);
            let m: Vec<f64> = (0..p).map(|_| rng.gen_range(-0.5..1.0)).collect();
            let k: Vec<u8> = (0..p).map(|_| rng.gen_range(0..3)).collect();
            let beta = rng.gen_range(0.0..50.0);
            let rv = meanfield_rates(&m, &k, beta).unwrap();
            let sum: f64 = rv.values().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "sum = {sum}");
            assert!(rv.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn rates_survive_extreme_beta_and_concentrate_on_the_pattern() {
        let rv = meanfield_rates(&[1.0], &[0], 100.0).unwrap();
        assert!(rv.values().iter().all(|v| v.is_finite()));
        // Channels landing in the pattern state (target 0): (1, +1) and (1, −1).
        let into_pattern =
            rv.get(Channel { alpha: 1, s: 1 }) + rv.get(Channel { alpha: 1, s: -1 });
        assert!(into_pattern > 0.99, "got {into_pattern}");
    }

    #[test]
    fn disorder_average_basics() {
        // Constant function averages to itself.
        assert_relative_eq!(disorder_average(3, |_| 2.5).unwrap(), 2.5);
        // The real part of ω^{k} averages to 0 over k ∈ {0, 1, 2}.
        let w = [1.0, -0.5, -0.5];
        let avg = disorder_average(1, |k| w[k[0] as usize]).unwrap();
        assert!(avg.abs() < 1e-15);
        // p = 0 is the empty product: a single term.
        assert_relative_eq!(disorder_average(0, |_| 7.0).unwrap(), 7.0);
        // Capacity cap.
        assert!(disorder_average(7, |_| 0.0).is_err());
    }

    #[test]
    fn params_validate_domains() {
        assert!(ModelParams::new(3, 1, 1.0, 0.0, 1.0).is_ok());
        assert!(ModelParams::new(1, 1, 1.0, 0.0, 1.0).is_err());
        assert!(ModelParams::new(3, 1, -1.0, 0.0, 1.0).is_err());
        assert!(ModelParams::new(3, 1, 1.0, -0.1, 1.0).is_err());
        assert!(ModelParams::new(3, 1, 1.0, 0.0, 0.0).is_err());
        let p = ModelParams::from_temperature(3, 1, 2.0, 0.5, 1.0).unwrap();
        assert_relative_eq!(p.beta, 0.5);
        assert_relative_eq!(p.temperature(), 2.0);
        assert!(ModelParams::from_temperature(3, 1, 0.0, 0.0, 1.0).is_err());
    }
}
