//! Exact density-matrix dynamics of small driven-dissipative networks.
//!
//! The N-site, q-level system evolves under
//!
//! ```text
//! ρ̇ = −i[Ĥ, ρ] + Σ_c ( L_c ρ L_c† − ½{L_c†L_c, ρ} )
//! ```
//!
//! with a coherent drive Ĥ = λ Σ_i (P̂_i + P̂_i†) built from the cyclic shift
//! P̂|k⟩ = |k+1 mod q⟩, and 2qN thermal jump operators
//!
//! ```text
//! L^i_{α,s} = √γ  T̂^i_{α,s}  Γ̂^i_{α,s},     Γ̂²(σ) = e^{β Δ̂(σ)} / Ẑ_i(σ),
//! ```
//!
//! where T̂^i_{α,s} moves site i from exponent (α−1+s) mod q to (α−1) mod q,
//! Δ̂ is (half) the energy drop of that move against the self-excluded local
//! field, and Ẑ_i sums e^{βΔ̂} over all 2q channels of the site.  Because the
//! local field does not involve the site's own state, Ẑ_i is invariant under
//! the move and the diagonal part of the dynamics obeys detailed balance with
//! respect to the classical Gibbs state; at λ = 0 it reduces exactly to the
//! classical master equation of [`crate::classical`].
//!
//! Dimension caps keep dense matrices affordable: at most 6 sites and a
//! 729-dimensional Hilbert space.

use nalgebra::{Complex, DMatrix};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::classical::site_fields;
use crate::error::{Error, Result};
use crate::model::{pattern_accumulators, Channel, ModelParams, PatternSet, SpinConfig};
use crate::space::{Space, MAX_QUANTUM_DIM, MAX_QUANTUM_SITES};

const SQRT3: f64 = 1.732_050_807_568_877_2;

fn quantum_space(q: u8, n_sites: usize) -> Result<Space> {
    if n_sites > MAX_QUANTUM_SITES {
        return Err(Error::Capacity(format!(
            "density-matrix dynamics is capped at {MAX_QUANTUM_SITES} sites (asked for {n_sites})"
        )));
    }
    Space::new(q, n_sites, MAX_QUANTUM_DIM)
}

/// Dense density matrix on the q^N Hilbert space (basis states are labeled by
/// their base-q digit strings, site 0 least significant).
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    q: u8,
    n_sites: usize,
    rho: Array2<Complex64>,
}

impl DensityMatrix {
    /// Wraps an explicit matrix, validating dimensions.
    pub fn from_matrix(q: u8, n_sites: usize, rho: Array2<Complex64>) -> Result<Self> {
        let sp = quantum_space(q, n_sites)?;
        if rho.nrows() != sp.dim || rho.ncols() != sp.dim {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}×{}, expected {}×{}",
                rho.nrows(),
                rho.ncols(),
                sp.dim,
                sp.dim
            )));
        }
        Ok(Self { q, n_sites, rho })
    }

    /// Diagonal (classical) state from a probability vector.
    pub fn from_diagonal(q: u8, n_sites: usize, probabilities: &[f64]) -> Result<Self> {
        let sp = quantum_space(q, n_sites)?;
        if probabilities.len() != sp.dim {
            return Err(Error::DimensionMismatch(format!(
                "probability vector has {} entries, expected {}",
                probabilities.len(),
                sp.dim
            )));
        }
        let total: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!(
                "probabilities must be nonnegative and sum to 1 (sum = {total})"
            )));
        }
        let mut rho = Array2::zeros((sp.dim, sp.dim));
        for (a, &p) in probabilities.iter().enumerate() {
            rho[[a, a]] = Complex64::new(p, 0.0);
        }
        Ok(Self { q, n_sites, rho })
    }

    /// Pure basis state |σ⟩⟨σ| for a classical configuration.
    pub fn from_config(config: &SpinConfig) -> Result<Self> {
        let sp = quantum_space(config.q(), config.n_sites())?;
        let idx: usize = config
            .sites()
            .iter()
            .enumerate()
            .map(|(i, &d)| d as usize * (config.q() as usize).pow(i as u32))
            .sum();
        let mut rho = Array2::zeros((sp.dim, sp.dim));
        rho[[idx, idx]] = Complex64::new(1.0, 0.0);
        Ok(Self {
            q: config.q(),
            n_sites: config.n_sites(),
            rho,
        })
    }

    /// Pure state |ξ^μ⟩⟨ξ^μ| on stored pattern μ.
    pub fn pattern_pure(patterns: &PatternSet, mu: usize) -> Result<Self> {
        Self::from_config(&SpinConfig::aligned(patterns, mu)?)
    }

    /// Product mixture with exact overlap `m0` on pattern μ: each site is in
    /// its pattern state with probability f = (m0(q−1)+1)/q and uniformly in
    /// one of the other q−1 states otherwise.
    pub fn planted_mixture(patterns: &PatternSet, mu: usize, m0: f64) -> Result<Self> {
        let q = patterns.q();
        let qm1 = f64::from(q) - 1.0;
        if !(-1.0 / qm1..=1.0).contains(&m0) {
            return Err(Error::InvalidParameter(format!(
                "target overlap {m0} outside [{}, 1]",
                -1.0 / qm1
            )));
        }
        if mu >= patterns.n_patterns() {
            return Err(Error::InvalidParameter(format!(
                "pattern index {mu} out of range (p = {})",
                patterns.n_patterns()
            )));
        }
        let sp = quantum_space(q, patterns.n_sites())?;
        let f = (m0 * qm1 + 1.0) / f64::from(q);
        let other = (1.0 - f) / qm1;
        let mut rho = Array2::zeros((sp.dim, sp.dim));
        for a in 0..sp.dim {
            let mut w = 1.0f64;
            for i in 0..patterns.n_sites() {
                w *= if sp.digit(a, i) == patterns.exponent(mu, i) {
                    f
                } else {
                    other
                };
            }
            rho[[a, a]] = Complex64::new(w, 0.0);
        }
        Ok(Self {
            q,
            n_sites: patterns.n_sites(),
            rho,
        })
    }

    /// The infinite-temperature state 1/q^N.
    pub fn maximally_mixed(q: u8, n_sites: usize) -> Result<Self> {
        let sp = quantum_space(q, n_sites)?;
        let mut rho = Array2::zeros((sp.dim, sp.dim));
        let w = Complex64::new(1.0 / sp.dim as f64, 0.0);
        for a in 0..sp.dim {
            rho[[a, a]] = w;
        }
        Ok(Self { q, n_sites, rho })
    }

    /// The pure product state in which every site is an equal-amplitude
    /// superposition of its q levels (all matrix entries 1/q^N).
    pub fn uniform_superposition(q: u8, n_sites: usize) -> Result<Self> {
        let sp = quantum_space(q, n_sites)?;
        let w = Complex64::new(1.0 / sp.dim as f64, 0.0);
        Ok(Self {
            q,
            n_sites,
            rho: Array2::from_elem((sp.dim, sp.dim), w),
        })
    }

    /// A reproducible full-rank random state: ρ = AA†/tr(AA†) with the
    /// entries of A drawn uniformly from the complex unit square.
    pub fn random(q: u8, n_sites: usize, seed: u64) -> Result<Self> {
        let sp = quantum_space(q, n_sites)?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((sp.dim, sp.dim), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let mut rho = Array2::zeros((sp.dim, sp.dim));
        for r in 0..sp.dim {
            for c in 0..sp.dim {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..sp.dim {
                    s += a[[r, k]] * a[[c, k]].conj();
                }
                rho[[r, c]] = s;
            }
        }
        let tr: f64 = (0..sp.dim).map(|i| rho[[i, i]].re).sum();
        rho.mapv_inplace(|z| z / tr);
        Ok(Self { q, n_sites, rho })
    }

    pub fn q(&self) -> u8 {
        self.q
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.rho
    }

    /// Real parts of the diagonal (populations).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|a| self.rho[[a, a]].re).collect()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|a| self.rho[[a, a]]).sum()
    }

    /// Largest entrywise deviation from ρ = ρ†.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.dim() {
            for b in a..self.dim() {
                worst = worst.max((self.rho[[a, b]] - self.rho[[b, a]].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part (ρ+ρ†)/2; a valid state has
    /// this ≥ 0 up to integration error.
    pub fn min_eigenvalue(&self) -> f64 {
        let dim = self.dim();
        let herm = DMatrix::from_fn(dim, dim, |r, c| {
            let z = (self.rho[[r, c]] + self.rho[[c, r]].conj()) * 0.5;
            Complex::new(z.re, z.im)
        });
        herm.symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Diagonal of the half-energy-drop operator Δ̂^i_{α,s} over all basis states:
/// the value on |σ⟩ is (h_source − h_target)/2 where h is the self-excluded
/// local-field potential of site `site` in configuration σ.  Equivalently,
/// minus half the classical energy cost of the move the channel performs.
pub fn delta_operator_diagonal(
    patterns: &PatternSet,
    site: usize,
    channel: Channel,
) -> Result<Vec<f64>> {
    let q = patterns.q();
    if site >= patterns.n_sites() {
        return Err(Error::InvalidParameter(format!(
            "site index {site} out of range (N = {})",
            patterns.n_sites()
        )));
    }
    let sp = quantum_space(q, patterns.n_sites())?;
    let (src, tgt) = (channel.source(q) as usize, channel.target(q) as usize);
    let mut out = Vec::with_capacity(sp.dim);
    for a in 0..sp.dim {
        let cfg = SpinConfig::new(q, sp.digits(a))?;
        let acc = pattern_accumulators(&cfg, patterns);
        let h = site_fields(patterns, cfg.site(site), site, &acc);
        out.push((h[src] - h[tgt]) / 2.0);
    }
    Ok(out)
}

/// One thermal jump operator L^i_{α,s}: moves site `site` from the channel's
/// source exponent to its target, with configuration-dependent amplitude
/// √(γ e^{βΔ̂}/Ẑ) evaluated on the pre-jump state.
#[derive(Debug, Clone)]
pub struct JumpOperator {
    pub site: usize,
    pub channel: Channel,
    /// Basis states with the source exponent at `site` (the operator's
    /// support), their images, and the amplitudes ⟨tgt|L|src⟩.
    srcs: Vec<u32>,
    tgts: Vec<u32>,
    amps: Vec<f64>,
}

impl JumpOperator {
    /// Dense matrix form (for cross-checks; evolution never materializes it).
    pub fn dense(&self, dim: usize) -> Array2<Complex64> {
        let mut l = Array2::zeros((dim, dim));
        for ((&s, &t), &a) in self.srcs.iter().zip(&self.tgts).zip(&self.amps) {
            l[[t as usize, s as usize]] = Complex64::new(a, 0.0);
        }
        l
    }

    /// Amplitude ⟨jump(a)|L|a⟩, zero when the channel does not act on `a`.
    pub fn amplitude_on(&self, state: usize) -> f64 {
        match self.srcs.binary_search(&(state as u32)) {
            Ok(j) => self.amps[j],
            Err(_) => 0.0,
        }
    }
}

/// Builds all 2qN jump operators for a pattern set at the given parameters.
pub fn jump_operators(patterns: &PatternSet, params: &ModelParams) -> Result<Vec<JumpOperator>> {
    check_params(patterns, params)?;
    let q = patterns.q();
    let n = patterns.n_sites();
    let sp = quantum_space(q, n)?;
    let channels: Vec<Channel> = Channel::all(q).collect();
    let mut ops: Vec<JumpOperator> = Vec::with_capacity(n * channels.len());
    for i in 0..n {
        for &channel in &channels {
            ops.push(JumpOperator {
                site: i,
                channel,
                srcs: Vec::with_capacity(sp.dim / q as usize),
                tgts: Vec::with_capacity(sp.dim / q as usize),
                amps: Vec::with_capacity(sp.dim / q as usize),
            });
        }
    }
    let mut exps = vec![0.0f64; channels.len()];
    for a in 0..sp.dim {
        let cfg = SpinConfig::new(q, sp.digits(a))?;
        let acc = pattern_accumulators(&cfg, patterns);
        for i in 0..n {
            let cur = cfg.site(i);
            let h = site_fields(patterns, cur, i, &acc);
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
                let op = &mut ops[i * channels.len() + ch.index()];
                op.srcs.push(a as u32);
                op.tgts.push(sp.with_digit(a, i, ch.target(q)) as u32);
                op.amps.push(rate.sqrt());
            }
        }
    }
    Ok(ops)
}

/// Dense drive Hamiltonian Ĥ = λ Σ_i (P̂_i + P̂_i†).
pub fn hamiltonian_dense(q: u8, n_sites: usize, lambda: f64) -> Result<Array2<Complex64>> {
    let sp = quantum_space(q, n_sites)?;
    let mut h = Array2::zeros((sp.dim, sp.dim));
    let w = Complex64::new(lambda, 0.0);
    for a in 0..sp.dim {
        for i in 0..n_sites {
            let d = sp.digit(a, i);
            let up = sp.with_digit(a, i, (d + 1) % q);
            let down = sp.with_digit(a, i, (d + q - 1) % q);
            h[[up, a]] += w;
            h[[down, a]] += w;
        }
    }
    Ok(h)
}

fn check_params(patterns: &PatternSet, params: &ModelParams) -> Result<()> {
    if params.q != patterns.q() || params.n_patterns != patterns.n_patterns() {
        return Err(Error::DimensionMismatch(format!(
            "parameters (q = {}, p = {}) do not match the pattern set (q = {}, p = {})",
            params.q,
            params.n_patterns,
            patterns.q(),
            patterns.n_patterns()
        )));
    }
    Ok(())
}

/// Precomputed structure for the master-equation right-hand side.
struct QuantumSystem {
    dim: usize,
    n_sites: usize,
    lambda: f64,
    /// Per-site cyclic shift index maps: inc[i][a] has site i's exponent +1.
    inc: Vec<Vec<u32>>,
    dec: Vec<Vec<u32>>,
    ops: Vec<JumpOperator>,
    /// Total decay w[a] = Σ_c ⟨·|L_c†L_c|·⟩ on basis state a.
    decay: Vec<f64>,
    /// Per pattern, the classical overlap of each basis state.
    m_table: Vec<Vec<f64>>,
    space: Space,
    patterns_q: u8,
}

impl QuantumSystem {
    fn new(patterns: &PatternSet, params: &ModelParams) -> Result<Self> {
        let q = patterns.q();
        let n = patterns.n_sites();
        let sp = quantum_space(q, n)?;
        let ops = jump_operators(patterns, params)?;
        let mut decay = vec![0.0f64; sp.dim];
        for op in &ops {
            for (&s, &a) in op.srcs.iter().zip(&op.amps) {
                decay[s as usize] += a * a;
            }
        }
        let denom = (n as f64) * (f64::from(q) - 1.0);
        let m_table = (0..patterns.n_patterns())
            .map(|mu| {
                (0..sp.dim)
                    .map(|a| {
                        (0..n)
                            .map(|i| {
                                crate::model::pair_weight(q, patterns.exponent(mu, i), sp.digit(a, i))
                            })
                            .sum::<f64>()
                            / denom
                    })
                    .collect()
            })
            .collect();
        let mut inc = Vec::with_capacity(n);
        let mut dec = Vec::with_capacity(n);
        for i in 0..n {
            let mut up = Vec::with_capacity(sp.dim);
            let mut down = Vec::with_capacity(sp.dim);
            for a in 0..sp.dim {
                let d = sp.digit(a, i);
                up.push(sp.with_digit(a, i, (d + 1) % q) as u32);
                down.push(sp.with_digit(a, i, (d + q - 1) % q) as u32);
            }
            inc.push(up);
            dec.push(down);
        }
        Ok(Self {
            dim: sp.dim,
            n_sites: n,
            lambda: params.lambda,
            inc,
            dec,
            ops,
            decay,
            m_table,
            space: sp,
            patterns_q: q,
        })
    }

    /// out = −i[H, ρ] + Σ_c (L_c ρ L_c† − ½{L_c†L_c, ρ}), flat row-major.
    fn rhs(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let dim = self.dim;
        for a in 0..dim {
            let wa = self.decay[a];
            let row = a * dim;
            for b in 0..dim {
                out[row + b] = rho[row + b] * (-0.5 * (wa + self.decay[b]));
            }
        }
        if self.lambda != 0.0 {
            let lam = self.lambda;
            for i in 0..self.n_sites {
                let (inc, dec) = (&self.inc[i], &self.dec[i]);
                for a in 0..dim {
                    let row = a * dim;
                    let row_d = dec[a] as usize * dim;
                    let row_i = inc[a] as usize * dim;
                    for b in 0..dim {
                        let hrho = rho[row_d + b] + rho[row_i + b];
                        let rhoh = rho[row + inc[b] as usize] + rho[row + dec[b] as usize];
                        let diff = hrho - rhoh;
                        // −iλ (x + iy) = λ y − iλ x
                        out[row + b] += Complex64::new(lam * diff.im, -lam * diff.re);
                    }
                }
            }
        }
        for op in &self.ops {
            let n_src = op.srcs.len();
            for j in 0..n_src {
                let src_row = op.srcs[j] as usize * dim;
                let tgt_row = op.tgts[j] as usize * dim;
                let aj = op.amps[j];
                for k in 0..n_src {
                    let w = aj * op.amps[k];
                    out[tgt_row + op.tgts[k] as usize] += rho[src_row + op.srcs[k] as usize] * w;
                }
            }
        }
    }

    fn overlaps_from_diag(&self, diag: &[f64]) -> Vec<f64> {
        self.m_table
            .iter()
            .map(|table| table.iter().zip(diag).map(|(m, p)| m * p).sum())
            .collect()
    }

    /// ⟨T̂^i_{α,s}⟩ = Σ_{a: source} ρ[a, jump(a)].
    fn transition_expectation(&self, rho: &[Complex64], site: usize, channel: Channel) -> Complex64 {
        let q = self.patterns_q;
        let (src, tgt) = (channel.source(q), channel.target(q));
        let mut total = Complex64::new(0.0, 0.0);
        for a in 0..self.dim {
            if self.space.digit(a, site) == src {
                let b = self.space.with_digit(a, site, tgt);
                total += rho[a * self.dim + b];
            }
        }
        total
    }
}

/// Collective observables of a density matrix: overlaps and the four coherence
/// quadratures per pattern (the quantities the mean-field state tracks).
#[derive(Debug, Clone)]
pub struct CollectiveObservables {
    pub m: Vec<f64>,
    pub x: Vec<f64>,
    pub xbar: Vec<f64>,
    pub y: Vec<f64>,
    pub ybar: Vec<f64>,
}

fn collective_from_flat(
    sys: &QuantumSystem,
    patterns: &PatternSet,
    rho: &[Complex64],
    diag: &[f64],
) -> CollectiveObservables {
    let p = patterns.n_patterns();
    let n = patterns.n_sites();
    let m = sys.overlaps_from_diag(diag);
    let mut x = vec![0.0; p];
    let mut xbar = vec![0.0; p];
    let mut y = vec![0.0; p];
    let mut ybar = vec![0.0; p];
    if patterns.q() == 3 {
        // ω^k lookup tables for the phase ω^{α + k_i^μ}.
        const RE_W: [f64; 3] = [1.0, -0.5, -0.5];
        const IM_W: [f64; 3] = [0.0, 0.5 * SQRT3, -0.5 * SQRT3];
        let norm = 1.0 / (3.0 * n as f64);
        for i in 0..n {
            for alpha in 1..=3u8 {
                let t_minus = sys.transition_expectation(rho, i, Channel { alpha, s: -1 });
                let t_plus = sys.transition_expectation(rho, i, Channel { alpha, s: 1 });
                let x_obs = 2.0 * t_minus.re;
                let y_obs = 2.0 * t_plus.im;
                for mu in 0..p {
                    let phase = ((alpha + patterns.exponent(mu, i)) % 3) as usize;
                    x[mu] += norm * RE_W[phase] * x_obs;
                    xbar[mu] += norm * IM_W[phase] * x_obs;
                    y[mu] += norm * RE_W[phase] * y_obs;
                    ybar[mu] += norm * IM_W[phase] * y_obs;
                }
            }
        }
    }
    CollectiveObservables { m, x, xbar, y, ybar }
}

/// Expectation values of the pattern overlaps tr(ρ m̂^μ).
pub fn expectation_overlaps(rho: &DensityMatrix, patterns: &PatternSet) -> Result<Vec<f64>> {
    let params = ModelParams::new(patterns.q(), patterns.n_patterns().max(1), 1.0, 0.0, 1.0)?;
    let sys = system_for(rho, patterns, &params)?;
    Ok(sys.overlaps_from_diag(&rho.diagonal()))
}

/// tr(ρ T̂^i_{α,s}) for one site and channel.
pub fn transition_expectation(
    rho: &DensityMatrix,
    site: usize,
    channel: Channel,
) -> Result<Complex64> {
    let sp = quantum_space(rho.q(), rho.n_sites())?;
    if site >= rho.n_sites() {
        return Err(Error::InvalidParameter(format!(
            "site index {site} out of range (N = {})",
            rho.n_sites()
        )));
    }
    let q = rho.q();
    let (src, tgt) = (channel.source(q), channel.target(q));
    let mut total = Complex64::new(0.0, 0.0);
    for a in 0..sp.dim {
        if sp.digit(a, site) == src {
            total += rho.matrix()[[a, sp.with_digit(a, site, tgt)]];
        }
    }
    Ok(total)
}

/// All collective observables of a state.
pub fn expectation_collective(
    rho: &DensityMatrix,
    patterns: &PatternSet,
) -> Result<CollectiveObservables> {
    let params = ModelParams::new(patterns.q(), patterns.n_patterns().max(1), 1.0, 0.0, 1.0)?;
    let sys = system_for(rho, patterns, &params)?;
    let flat = rho.matrix().as_slice().expect("row-major density matrix");
    Ok(collective_from_flat(&sys, patterns, flat, &rho.diagonal()))
}

fn system_for(
    rho: &DensityMatrix,
    patterns: &PatternSet,
    params: &ModelParams,
) -> Result<QuantumSystem> {
    if rho.q() != patterns.q() || rho.n_sites() != patterns.n_sites() {
        return Err(Error::DimensionMismatch(format!(
            "state is {} sites of q = {}, patterns are {} sites of q = {}",
            rho.n_sites(),
            rho.q(),
            patterns.n_sites(),
            patterns.q()
        )));
    }
    QuantumSystem::new(patterns, params)
}

/// Master-equation right-hand side ρ̇ at a given state (mainly for
/// cross-checking the structured evolution against dense compositions).
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    patterns: &PatternSet,
    params: &ModelParams,
) -> Result<Array2<Complex64>> {
    let sys = system_for(rho, patterns, params)?;
    let flat = rho.matrix().as_slice().expect("row-major density matrix");
    let mut out = vec![Complex64::new(0.0, 0.0); flat.len()];
    sys.rhs(flat, &mut out);
    Ok(Array2::from_shape_vec((rho.dim(), rho.dim()), out).expect("shape"))
}

/// Checks the structural invariants of a recorded state and returns its
/// populations.  Trace and hermiticity are checked at every record; the
/// (cubic-cost) positivity check runs on every hundredth one.
fn validate_and_diag(state: &[Complex64], dim: usize, t: f64, count: usize) -> Result<Vec<f64>> {
    let mut trace = 0.0f64;
    let mut diag = Vec::with_capacity(dim);
    for a in 0..dim {
        let z = state[a * dim + a];
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::NonFinite(format!("density matrix at t = {t}")));
        }
        trace += z.re;
        diag.push(z.re);
    }
    if (trace - 1.0).abs() > 1e-6 {
        return Err(Error::IntegratorAccuracy {
            t,
            what: format!("trace drifted to {trace}"),
        });
    }
    let mut herm = 0.0f64;
    for a in 0..dim {
        for b in a..dim {
            herm = herm.max((state[a * dim + b] - state[b * dim + a].conj()).norm());
        }
    }
    if herm > 1e-6 {
        return Err(Error::IntegratorAccuracy {
            t,
            what: format!("hermiticity defect {herm:e}"),
        });
    }
    if count % 100 == 0 {
        let herm_m = DMatrix::from_fn(dim, dim, |r, c| {
            let z = (state[r * dim + c] + state[c * dim + r].conj()) * 0.5;
            Complex::new(z.re, z.im)
        });
        let min_eig = herm_m
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-6 {
            return Err(Error::IntegratorAccuracy {
                t,
                what: format!("negative population {min_eig:e}"),
            });
        }
    }
    Ok(diag)
}

/// Recorded history of a density-matrix evolution.
#[derive(Debug, Clone)]
pub struct LindbladEvolution {
    pub times: Vec<f64>,
    /// Collective observables at each record time.
    pub observables: Vec<CollectiveObservables>,
    /// Populations (diagonal of ρ) at each record time.
    pub diagonals: Vec<Vec<f64>>,
    pub final_state: DensityMatrix,
}

/// Integrates the master equation with fixed-step fourth-order Runge-Kutta,
/// recording every `record_every`-th step (plus the initial and final states).
///
/// Structural invariants are enforced on the recorded states: trace drift or
/// hermiticity defect beyond 1e−6 aborts with [`Error::IntegratorAccuracy`],
/// and every hundredth record must have smallest eigenvalue above −1e−6.
pub fn lindblad_evolve(
    rho0: &DensityMatrix,
    patterns: &PatternSet,
    params: &ModelParams,
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<LindbladEvolution> {
    if !(dt.is_finite() && dt > 0.0) || !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and t_end >= 0 (got dt = {dt}, t_end = {t_end})"
        )));
    }
    let tr = rho0.trace();
    if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "initial state has trace {tr}, expected 1"
        )));
    }
    let sys = system_for(rho0, patterns, params)?;
    let record_every = record_every.max(1);
    let dim = sys.dim;
    let len = dim * dim;
    let mut state: Vec<Complex64> = rho0.matrix().iter().cloned().collect();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![Complex64::new(0.0, 0.0); len],
        vec![Complex64::new(0.0, 0.0); len],
        vec![Complex64::new(0.0, 0.0); len],
        vec![Complex64::new(0.0, 0.0); len],
        vec![Complex64::new(0.0, 0.0); len],
    );
    let n_steps = (t_end / dt).round() as usize;
    let mut evo = LindbladEvolution {
        times: Vec::new(),
        observables: Vec::new(),
        diagonals: Vec::new(),
        final_state: rho0.clone(),
    };
    let mut n_records = 0usize;
    let diag = validate_and_diag(&state, dim, 0.0, n_records)?;
    evo.observables
        .push(collective_from_flat(&sys, patterns, &state, &diag));
    evo.times.push(0.0);
    evo.diagonals.push(diag);
    n_records += 1;
    for step in 1..=n_steps {
        sys.rhs(&state, &mut k1);
        for i in 0..len {
            tmp[i] = state[i] + k1[i] * (0.5 * dt);
        }
        sys.rhs(&tmp, &mut k2);
        for i in 0..len {
            tmp[i] = state[i] + k2[i] * (0.5 * dt);
        }
        sys.rhs(&tmp, &mut k3);
        for i in 0..len {
            tmp[i] = state[i] + k3[i] * dt;
        }
        sys.rhs(&tmp, &mut k4);
        for i in 0..len {
            state[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
        if step % record_every == 0 || step == n_steps {
            let t = step as f64 * dt;
            let diag = validate_and_diag(&state, dim, t, n_records)?;
            evo.observables
                .push(collective_from_flat(&sys, patterns, &state, &diag));
            evo.times.push(t);
            evo.diagonals.push(diag);
            n_records += 1;
        }
    }
    evo.final_state = DensityMatrix::from_matrix(
        rho0.q(),
        rho0.n_sites(),
        Array2::from_shape_vec((dim, dim), state).expect("shape"),
    )?;
    Ok(evo)
}

/// Largest violation of the two-level effective-field identity
///
/// ```text
/// d⟨σ̂_z^i⟩/dt = ⟨ −γ σ̂_z^i + γ tanh(β F̂_i) ⟩,     F̂_i = Δ̂^i_{1,+}
/// ```
///
/// over interior record times and sites, for an undriven q = 2 network
/// started in the planted product mixture with overlap `m0`.  Time
/// derivatives are centered differences on the record grid, so the deviation
/// is O(dt²) and vanishingly small when the identity holds.
pub fn q2_reduction_max_deviation(
    patterns: &PatternSet,
    params: &ModelParams,
    m0: f64,
    t_end: f64,
    dt: f64,
) -> Result<f64> {
    if patterns.q() != 2 {
        return Err(Error::Unsupported(format!(
            "the two-level reduction needs q = 2 (got q = {})",
            patterns.q()
        )));
    }
    if params.lambda != 0.0 {
        return Err(Error::Unsupported(
            "the two-level reduction holds for undriven dynamics (λ = 0)".into(),
        ));
    }
    let n = patterns.n_sites();
    let sp = quantum_space(2, n)?;
    let rho0 = DensityMatrix::planted_mixture(patterns, 0, m0)?;
    let evo = lindblad_evolve(&rho0, patterns, params, t_end, dt, 1)?;
    // Per site: σ_z diagonal (+1 on exponent 0) and tanh(β F̂_i) diagonal.
    let mut z_tables = Vec::with_capacity(n);
    let mut tanh_tables = Vec::with_capacity(n);
    for i in 0..n {
        let f = delta_operator_diagonal(patterns, i, Channel { alpha: 1, s: 1 })?;
        tanh_tables.push(
            f.iter()
                .map(|&d| (params.beta * d).tanh())
                .collect::<Vec<f64>>(),
        );
        z_tables.push(
            (0..sp.dim)
                .map(|a| if sp.digit(a, i) == 0 { 1.0 } else { -1.0 })
                .collect::<Vec<f64>>(),
        );
    }
    let expect = |diag: &[f64], table: &[f64]| -> f64 {
        diag.iter().zip(table).map(|(p, v)| p * v).sum()
    };
    let mut worst = 0.0f64;
    for j in 1..evo.times.len().saturating_sub(1) {
        let h2 = evo.times[j + 1] - evo.times[j - 1];
        for i in 0..n {
            let lhs = (expect(&evo.diagonals[j + 1], &z_tables[i])
                - expect(&evo.diagonals[j - 1], &z_tables[i]))
                / h2;
            let rhs = params.gamma
                * (expect(&evo.diagonals[j], &tanh_tables[i]) - expect(&evo.diagonals[j], &z_tables[i]));
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}
