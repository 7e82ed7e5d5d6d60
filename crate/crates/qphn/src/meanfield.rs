//! Mean-field collective dynamics of the driven-dissipative three-state
//! network.
//!
//! In the thermodynamic limit at zero load, the network is described by 5p
//! coupled real variables per stored pattern μ: the overlap m^μ and four
//! coherence variables x^μ, x̄^μ, y^μ, ȳ^μ generated by the transverse drive.
//! Their equations of motion close once site quantities are replaced by exact
//! averages over the pattern-exponent distribution (3^p terms, evaluated by
//! enumeration):
//!
//! ```text
//! ṁ^μ  = −(γ/2) m^μ (1 + 2⟨⟨Re[ξ^μ f₂]⟩⟩) − γ⟨⟨Re[ξ*^μ f₃]⟩⟩ − 3λ[(3/2) y^μ + (√3/2) ȳ^μ]
//! ẋ^μ  = −(γ/3) x^μ + λ[(3/2) y^μ + (√3/2) ȳ^μ]
//! ẋ̄^μ  = −(γ/3) x̄^μ + λ[(3/2) ȳ^μ − (√3/2) y^μ]
//! ẏ^μ  = −(γ/3) y^μ + λ[−(3/2) x^μ + (√3/2) x̄^μ + m^μ]
//! ẏ̄^μ  = −(γ/3) ȳ^μ + λ[−(3/2) x̄^μ − (√3/2) x^μ + m^μ/√3]
//! ```
//!
//! where f₂ and f₃ are channel-rate combinations of one site (see
//! [`f_coefficients`]) and ⟨⟨·⟩⟩ is the disorder average.  The coherence
//! damping uses the disorder-averaged decay constant γ/3 (the average of the
//! channel-sum damping h^s(α)/2 at vanishing order parameters, ⟨⟨h⟩⟩ = 2/3).

use nalgebra::{Complex, DMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{
    meanfield_rates, Channel, ModelParams, RateVector, MAX_PATTERNS_EXACT,
};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Guard bound for diverging trajectories.
pub const BLOW_UP_BOUND: f64 = 1e6;

/// Collective state of the mean-field dynamics: 5p reals laid out as
/// `[m^1..m^p, x^1..x^p, x̄^1..x̄^p, y^1..y^p, ȳ^1..ȳ^p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveState {
    n_patterns: usize,
    data: Vec<f64>,
}

impl CollectiveState {
    /// The all-zero (paramagnetic) state.
    pub fn zeros(n_patterns: usize) -> Self {
        Self {
            n_patterns,
            data: vec![0.0; 5 * n_patterns],
        }
    }

    /// A classical initial condition: given overlaps, all coherences zero.
    pub fn from_overlaps(m: &[f64]) -> Self {
        let mut s = Self::zeros(m.len());
        s.data[..m.len()].copy_from_slice(m);
        s
    }

    /// Wraps a raw 5p-vector in the documented layout.
    pub fn from_flat(n_patterns: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 5 * n_patterns {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for {} patterns, got {}",
                5 * n_patterns,
                n_patterns,
                data.len()
            )));
        }
        Ok(Self { n_patterns, data })
    }

    pub fn n_patterns(&self) -> usize {
        self.n_patterns
    }

    pub fn m(&self, mu: usize) -> f64 {
        self.data[mu]
    }

    pub fn x(&self, mu: usize) -> f64 {
        self.data[self.n_patterns + mu]
    }

    pub fn xbar(&self, mu: usize) -> f64 {
        self.data[2 * self.n_patterns + mu]
    }

    pub fn y(&self, mu: usize) -> f64 {
        self.data[3 * self.n_patterns + mu]
    }

    pub fn ybar(&self, mu: usize) -> f64 {
        self.data[4 * self.n_patterns + mu]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Infinity norm of the state vector.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, &v| a.max(v.abs()))
    }
}

/// The three complex channel-rate combinations entering the collective
/// equations, built from the six squared jump amplitudes Γ²(α, s) of one site:
///
/// ```text
/// f₁ = (i/2√3) [ Σ_α Γ²(α, +) − Σ_α Γ²(α, −) ]
/// f₂ = ½ [Γ²(3,+) − Γ²(3,−) − Γ²(2,+) + Γ²(2,−)]
///    + (i/2√3) [Γ²(3,+) − Γ²(3,−) + Γ²(2,+) − Γ²(2,−) − 2Γ²(1,+) + 2Γ²(1,−)]
/// f₃ = ½ [Γ²(3,+) + Γ²(2,−) − Γ²(1,+) − Γ²(1,−)]
///    + (i/2√3) [Γ²(3,+) − Γ²(2,−) + Γ²(1,+) − Γ²(1,−) − 2Γ²(2,+) + 2Γ²(3,−)]
/// ```
///
/// f₁ is always purely imaginary; all three vanish when the rates are uniform
/// (zero overlap or infinite temperature).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FCoefficients {
    pub f1: Complex64,
    pub f2: Complex64,
    pub f3: Complex64,
}

/// Evaluates the f-coefficients from a six-channel rate vector.
pub fn f_coefficients(rates: &RateVector) -> FCoefficients {
    let g = |alpha: u8, s: i8| rates.get(Channel { alpha, s });
    let h = 0.5 / SQRT3;
    let f1 = Complex64::new(
        0.0,
        h * (g(1, 1) + g(2, 1) + g(3, 1) - g(1, -1) - g(2, -1) - g(3, -1)),
    );
    let f2 = Complex64::new(
        0.5 * (g(3, 1) - g(3, -1) - g(2, 1) + g(2, -1)),
        h * (g(3, 1) - g(3, -1) + g(2, 1) - g(2, -1) - 2.0 * (g(1, 1) - g(1, -1))),
    );
    let f3 = Complex64::new(
        0.5 * (g(3, 1) + g(2, -1) - g(1, 1) - g(1, -1)),
        h * (g(3, 1) - g(2, -1) + g(1, 1) - g(1, -1) - 2.0 * (g(2, 1) - g(3, -1))),
    );
    FCoefficients { f1, f2, f3 }
}

/// Channel-sum damping weight h^s(α) = Σ_{s'} [Γ²(α−s', s') + Γ²(α−s'+s, s')]
/// of one site (1-based α arithmetic is cyclic over {1, 2, 3}).
///
/// Its disorder average at vanishing overlap is exactly 2/3, the constant
/// coherence damping used by the collective equations.
pub fn channel_weight_sum(rates: &RateVector, alpha: u8, s: i8) -> f64 {
    let wrap = |a: i16| -> u8 { ((a - 1).rem_euclid(3) + 1) as u8 };
    let mut total = 0.0;
    for sp in [1i8, -1i8] {
        let a1 = wrap(i16::from(alpha) - i16::from(sp));
        let a2 = wrap(i16::from(alpha) - i16::from(sp) + i16::from(s));
        total += rates.get(Channel { alpha: a1, s: sp }) + rates.get(Channel { alpha: a2, s: sp });
    }
    total
}

/// Scratch-free evaluation of the collective right-hand side.
///
/// `state` and `out` are flat 5p slices in the [`CollectiveState`] layout.
fn rhs_into(state: &[f64], params: &ModelParams, out: &mut [f64]) -> Result<()> {
    let p = params.n_patterns;
    if params.q != 3 {
        return Err(Error::Unsupported(format!(
            "collective dynamics is defined for q = 3 (got q = {})",
            params.q
        )));
    }
    if p == 0 || p > MAX_PATTERNS_EXACT {
        return Err(Error::Capacity(format!(
            "pattern count {p} outside 1..={MAX_PATTERNS_EXACT}"
        )));
    }
    if state.len() != 5 * p || out.len() != 5 * p {
        return Err(Error::DimensionMismatch(format!(
            "state length {} does not match 5p = {}",
            state.len(),
            5 * p
        )));
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("collective state".into()));
    }
    let (m, rest) = state.split_at(p);
    let (x, rest) = rest.split_at(p);
    let (xb, rest) = rest.split_at(p);
    let (y, yb) = rest.split_at(p);

    // Disorder averages a2^μ = ⟨⟨Re[ξ^μ f₂]⟩⟩ and a3^μ = ⟨⟨Re[ξ*^μ f₃]⟩⟩ by
    // exact enumeration of the 3^p pattern-exponent assignments.  ω^k has
    // real part {1, −1/2, −1/2} and imaginary part {0, √3/2, −√3/2}.
    const RE_W: [f64; 3] = [1.0, -0.5, -0.5];
    const IM_W: [f64; 3] = [0.0, 0.5 * SQRT3, -0.5 * SQRT3];
    let mut a2 = [0.0f64; MAX_PATTERNS_EXACT];
    let mut a3 = [0.0f64; MAX_PATTERNS_EXACT];
    let mut k = [0u8; MAX_PATTERNS_EXACT];
    let total = 3usize.pow(p as u32);
    for idx in 0..total {
        let mut rest_idx = idx;
        for slot in k.iter_mut().take(p) {
            *slot = (rest_idx % 3) as u8;
            rest_idx /= 3;
        }
        let rates = meanfield_rates(m, &k[..p], params.beta)?;
        let f = f_coefficients(&rates);
        for mu in 0..p {
            let (re, im) = (RE_W[k[mu] as usize], IM_W[k[mu] as usize]);
            // Re[ξ f₂] with ξ = ω^{k_μ}; Re[ξ* f₃] conjugates the phase.
            a2[mu] += re * f.f2.re - im * f.f2.im;
            a3[mu] += re * f.f3.re + im * f.f3.im;
        }
    }
    let norm = 1.0 / total as f64;
    let (gamma, lambda) = (params.gamma, params.lambda);
    for mu in 0..p {
        let drive = 1.5 * y[mu] + 0.5 * SQRT3 * yb[mu];
        out[mu] = -0.5 * gamma * m[mu] * (1.0 + 2.0 * a2[mu] * norm) - gamma * a3[mu] * norm
            - 3.0 * lambda * drive;
        out[p + mu] = -gamma / 3.0 * x[mu] + lambda * drive;
        out[2 * p + mu] =
            -gamma / 3.0 * xb[mu] + lambda * (1.5 * yb[mu] - 0.5 * SQRT3 * y[mu]);
        out[3 * p + mu] =
            -gamma / 3.0 * y[mu] + lambda * (-1.5 * x[mu] + 0.5 * SQRT3 * xb[mu] + m[mu]);
        out[4 * p + mu] = -gamma / 3.0 * yb[mu]
            + lambda * (-1.5 * xb[mu] - 0.5 * SQRT3 * x[mu] + m[mu] / SQRT3);
    }
    Ok(())
}

/// Right-hand side of the collective equations of motion.
pub fn collective_rhs(state: &CollectiveState, params: &ModelParams) -> Result<CollectiveState> {
    let mut out = CollectiveState::zeros(state.n_patterns());
    rhs_into(state.as_slice(), params, out.as_mut_slice())?;
    Ok(out)
}

/// A recorded trajectory of the collective dynamics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CollectiveState>,
}

impl Trajectory {
    pub fn n_patterns(&self) -> usize {
        self.states.first().map_or(0, CollectiveState::n_patterns)
    }

    pub fn final_state(&self) -> &CollectiveState {
        self.states.last().expect("trajectory is never empty")
    }

    /// Linear interpolation of the overlap m^μ at time `t` (within the
    /// recorded span).
    pub fn overlap_at(&self, mu: usize, t: f64) -> Result<f64> {
        let (t0, t1) = (self.times[0], *self.times.last().unwrap());
        if !(t0..=t1).contains(&t) {
            return Err(Error::WindowOutOfRange {
                lo: t,
                hi: t,
                t_lo: t0,
                t_hi: t1,
            });
        }
        let j = match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(j) => return Ok(self.states[j].m(mu)),
            Err(j) => j,
        };
        let (ta, tb) = (self.times[j - 1], self.times[j]);
        let w = (t - ta) / (tb - ta);
        Ok(self.states[j - 1].m(mu) * (1.0 - w) + self.states[j].m(mu) * w)
    }
}

/// Integrates the collective equations with fixed-step fourth-order
/// Runge-Kutta, recording every `record_every`-th step (plus the initial and
/// final states).
///
/// Trajectories whose infinity norm exceeds [`BLOW_UP_BOUND`] abort with
/// [`Error::BlowUp`] carrying the failure time.
pub fn integrate(
    state0: &CollectiveState,
    params: &ModelParams,
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<Trajectory> {
    if !(dt.is_finite() && dt > 0.0) || !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and t_end >= 0 (got dt = {dt}, t_end = {t_end})"
        )));
    }
    let record_every = record_every.max(1);
    let dim = state0.as_slice().len();
    let mut s = state0.clone();
    // Validate dimensions/parameters once up front.
    let mut k1 = vec![0.0; dim];
    rhs_into(s.as_slice(), params, &mut k1)?;
    if s.max_abs() > BLOW_UP_BOUND {
        return Err(Error::BlowUp {
            t: 0.0,
            bound: BLOW_UP_BOUND,
        });
    }

    let n_steps = (t_end / dt).round() as usize;
    let mut traj = Trajectory {
        times: Vec::with_capacity(n_steps / record_every + 2),
        states: Vec::with_capacity(n_steps / record_every + 2),
    };
    traj.times.push(0.0);
    traj.states.push(s.clone());
    let (mut k2, mut k3, mut k4, mut tmp) = (
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    );
    for step in 1..=n_steps {
        let y0 = s.as_slice().to_vec();
        rhs_into(&y0, params, &mut k1)?;
        for i in 0..dim {
            tmp[i] = y0[i] + 0.5 * dt * k1[i];
        }
        rhs_into(&tmp, params, &mut k2)?;
        for i in 0..dim {
            tmp[i] = y0[i] + 0.5 * dt * k2[i];
        }
        rhs_into(&tmp, params, &mut k3)?;
        for i in 0..dim {
            tmp[i] = y0[i] + dt * k3[i];
        }
        rhs_into(&tmp, params, &mut k4)?;
        {
            let out = s.as_mut_slice();
            for i in 0..dim {
                out[i] = y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let t = step as f64 * dt;
        if s.max_abs() > BLOW_UP_BOUND {
            return Err(Error::BlowUp {
                t,
                bound: BLOW_UP_BOUND,
            });
        }
        if step % record_every == 0 || step == n_steps {
            traj.times.push(t);
            traj.states.push(s.clone());
        }
    }
    Ok(traj)
}

/// Newton search for a stationary state of the collective equations.
///
/// Converges when |rhs|_inf < 1e-10; fails with [`Error::NoConvergence`]
/// after 200 iterations.  A simple backtracking safeguard halves the Newton
/// step (up to 10 times) whenever the residual would increase.
pub fn find_fixed_point(
    guess: &CollectiveState,
    params: &ModelParams,
) -> Result<CollectiveState> {
    const TOL: f64 = 1e-10;
    const MAX_ITER: usize = 200;
    let dim = guess.as_slice().len();
    let mut x = guess.clone();
    let mut res = vec![0.0; dim];
    rhs_into(x.as_slice(), params, &mut res)?;
    let norm_inf = |v: &[f64]| v.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut res_norm = norm_inf(&res);
    for _ in 0..MAX_ITER {
        if res_norm < TOL {
            return Ok(x);
        }
        let jac = jacobian(&x, params)?;
        let rhs_vec = nalgebra::DVector::from_iterator(dim, res.iter().map(|&v| -v));
        let delta = jac.lu().solve(&rhs_vec).ok_or(Error::NoConvergence {
            iterations: MAX_ITER,
            residual: res_norm,
        })?;
        let mut scale = 1.0;
        let mut best: Option<(Vec<f64>, f64)> = None;
        for _ in 0..10 {
            let trial: Vec<f64> = x
                .as_slice()
                .iter()
                .zip(delta.iter())
                .map(|(&xi, &di)| xi + scale * di)
                .collect();
            if rhs_into(&trial, params, &mut res).is_ok() {
                let trial_norm = norm_inf(&res);
                if trial_norm < res_norm {
                    best = Some((trial, trial_norm));
                    break;
                }
                if best.as_ref().map_or(true, |(_, n)| trial_norm < *n) {
                    best = Some((trial, trial_norm));
                }
            }
            scale *= 0.5;
        }
        let (next, next_norm) = best.ok_or(Error::NoConvergence {
            iterations: MAX_ITER,
            residual: res_norm,
        })?;
        x.as_mut_slice().copy_from_slice(&next);
        res_norm = next_norm;
    }
    if res_norm < TOL {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            iterations: MAX_ITER,
            residual: res_norm,
        })
    }
}

/// Jacobian of the collective right-hand side by central finite differences
/// (step 1e-6 per coordinate).
pub fn jacobian(point: &CollectiveState, params: &ModelParams) -> Result<DMatrix<f64>> {
    const H: f64 = 1e-6;
    let dim = point.as_slice().len();
    let mut jac = DMatrix::zeros(dim, dim);
    let mut plus = vec![0.0; dim];
    let mut minus = vec![0.0; dim];
    let mut probe = point.as_slice().to_vec();
    for j in 0..dim {
        let orig = probe[j];
        probe[j] = orig + H;
        rhs_into(&probe, params, &mut plus)?;
        probe[j] = orig - H;
        rhs_into(&probe, params, &mut minus)?;
        probe[j] = orig;
        for i in 0..dim {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * H);
        }
    }
    Ok(jac)
}

/// Eigenvalues of the Jacobian at a stationary point, sorted by descending
/// real part (ties by descending imaginary part).
///
/// `point` must satisfy |rhs|_inf < 1e-6, otherwise [`Error::NotAFixedPoint`]
/// is returned.
pub fn jacobian_eigenvalues(
    point: &CollectiveState,
    params: &ModelParams,
) -> Result<Vec<Complex64>> {
    const STATIONARY_TOL: f64 = 1e-6;
    let res = collective_rhs(point, params)?;
    let res_norm = res.max_abs();
    if res_norm >= STATIONARY_TOL {
        return Err(Error::NotAFixedPoint {
            residual: res_norm,
            tolerance: STATIONARY_TOL,
        });
    }
    let jac = jacobian(point, params)?;
    let mut eigs: Vec<Complex64> = jac
        .complex_eigenvalues()
        .iter()
        .map(|z: &Complex<f64>| Complex64::new(z.re, z.im))
        .collect();
    eigs.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap()
            .then(b.im.partial_cmp(&a.im).unwrap())
    });
    Ok(eigs)
}

/// Standard deviation of each overlap over `n_samples` uniformly spaced times
/// in `window`, interpolated from the recorded trajectory.
///
/// A fixed point yields (numerically) zero; a limit cycle yields a finite
/// value of the order of the oscillation amplitude.
pub fn limit_cycle_sigma(
    traj: &Trajectory,
    window: (f64, f64),
    n_samples: usize,
) -> Result<Vec<f64>> {
    let (lo, hi) = window;
    let (t0, t1) = (traj.times[0], *traj.times.last().unwrap());
    if !(lo < hi) || lo < t0 || hi > t1 {
        return Err(Error::WindowOutOfRange {
            lo,
            hi,
            t_lo: t0,
            t_hi: t1,
        });
    }
    if n_samples < 2 {
        return Err(Error::InvalidParameter(
            "sigma needs at least 2 samples".into(),
        ));
    }
    let p = traj.n_patterns();
    let mut sigma = Vec::with_capacity(p);
    for mu in 0..p {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for j in 0..n_samples {
            let t = lo + (hi - lo) * j as f64 / (n_samples - 1) as f64;
            let v = traj.overlap_at(mu, t)?;
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n_samples as f64;
        sigma.push((sum_sq / n_samples as f64 - mean * mean).max(0.0).sqrt());
    }
    Ok(sigma)
}

/// One temperature point of a Hopf scan: the leading complex-conjugate
/// eigenvalue pair of the paramagnetic Jacobian (or, when every eigenvalue is
/// real, the two largest real eigenvalues).
#[derive(Debug, Clone, Copy)]
pub struct HopfPoint {
    pub temperature: f64,
    pub leading: [Complex64; 2],
}

/// Result of scanning the paramagnetic Jacobian spectrum across temperature.
#[derive(Debug, Clone)]
pub struct HopfScan {
    pub points: Vec<HopfPoint>,
    /// Temperatures (linear interpolation between grid points) where the real
    /// part of the leading complex pair changes sign with nonzero imaginary
    /// part — Hopf bifurcation candidates.
    pub crossings: Vec<f64>,
}

/// Scans the eigenvalues of the paramagnetic Jacobian over a temperature
/// interval at fixed drive `lambda`, reporting the leading complex pair per
/// temperature and all real-part sign changes (Hopf crossings).
///
/// The paramagnetic state (all collective variables zero) is an exact fixed
/// point at every temperature, so no root finding is involved.
pub fn hopf_scan(
    n_patterns: usize,
    lambda: f64,
    gamma: f64,
    t_range: (f64, f64),
    n_points: usize,
) -> Result<HopfScan> {
    let (t_lo, t_hi) = t_range;
    if !(t_lo.is_finite() && t_hi.is_finite() && 0.0 < t_lo && t_lo < t_hi) {
        return Err(Error::InvalidParameter(format!(
            "invalid temperature range [{t_lo}, {t_hi}]"
        )));
    }
    if n_points < 2 {
        return Err(Error::InvalidParameter(
            "Hopf scan needs at least 2 temperature points".into(),
        ));
    }
    const IM_TOL: f64 = 1e-9;
    let para = CollectiveState::zeros(n_patterns);
    let mut points = Vec::with_capacity(n_points);
    for j in 0..n_points {
        let t = t_lo + (t_hi - t_lo) * j as f64 / (n_points - 1) as f64;
        let params = ModelParams::from_temperature(3, n_patterns, t, lambda, gamma)?;
        let eigs = jacobian_eigenvalues(&para, &params)?;
        // Leading complex pair: the complex eigenvalue of largest real part,
        // paired with its conjugate; fall back to the two largest real ones.
        let leading = match eigs.iter().find(|z| z.im.abs() > IM_TOL) {
            Some(&z) => [
                Complex64::new(z.re, z.im.abs()),
                Complex64::new(z.re, -z.im.abs()),
            ],
            None => [eigs[0], eigs[1]],
        };
        points.push(HopfPoint {
            temperature: t,
            leading,
        });
    }
    let mut crossings = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ra, rb) = (a.leading[0].re, b.leading[0].re);
        let complex_pair = a.leading[0].im.abs() > IM_TOL && b.leading[0].im.abs() > IM_TOL;
        if complex_pair && ra * rb < 0.0 {
            crossings
                .push(a.temperature + (b.temperature - a.temperature) * ra / (ra - rb));
        }
    }
    Ok(HopfScan { points, crossings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{mc_equilibrium_curve, MCSettings};
    use crate::model::{disorder_average, PatternSet};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn params(t: f64, lambda: f64, p: usize) -> ModelParams {
        ModelParams::from_temperature(3, p, t, lambda, 1.0).unwrap()
    }

    /// Independent single-pattern evaluation of the overlap drift at zero
    /// drive: with G± = e^{±3βm}/Z, G0 = 1/Z, Z = 2(1 + 2cosh 3βm),
    /// ṁ = −(γ/2) m [1 + 2(G− − G0)] − γ (G− − G+).
    fn single_pattern_drift(m: f64, beta: f64) -> f64 {
        let z = 2.0 * (1.0 + 2.0 * (3.0 * beta * m).cosh());
        let gp = (3.0 * beta * m).exp() / z;
        let gm = (-3.0 * beta * m).exp() / z;
        let g0 = 1.0 / z;
        -0.5 * m * (1.0 + 2.0 * (gm - g0)) - (gm - gp)
    }

    #[test]
    fn f_coefficients_match_frozen_oracle_values() {
        // Independently scripted evaluation at p = 1, m = 0.5, β = 1, site
        // exponent 0; f₂ and f₃ are real here and f₁ vanishes.
        let rates = meanfield_rates(&[0.5], &[0], 1.0).unwrap();
        let expect = [
            0.39279851729463788,
            0.39279851729463788,
            0.087645196070018333,
            0.019556286635343725,
            0.019556286635343725,
            0.087645196070018333,
        ];
        for (got, want) in rates.values().iter().zip(&expect) {
            assert_relative_eq!(got, want, epsilon = 1e-15);
        }
        let f = f_coefficients(&rates);
        assert_relative_eq!(f.f1.re, 0.0, epsilon = 1e-16);
        assert_relative_eq!(f.f1.im, 0.0, epsilon = 1e-16);
        assert_relative_eq!(f.f2.re, -0.068088909434674605, epsilon = 1e-15);
        assert!(f.f2.im.abs() < 1e-16);
        assert_relative_eq!(f.f3.re, -0.37324223065929418, epsilon = 1e-15);
        assert!(f.f3.im.abs() < 1e-16);
    }

    #[test]
    fn f1_is_always_purely_imaginary_and_f_vanish_at_uniform_rates() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..100 {
            let m = [rng.gen_range(-0.5..1.0), rng.gen_range(-0.5..1.0)];
            let k = [rng.gen_range(0..3u8), rng.gen_range(0..3u8)];
            let f = f_coefficients(&meanfield_rates(&m, &k, rng.gen_range(0.0..5.0)).unwrap());
            assert!(f.f1.re.abs() < 1e-15);
        }
        let f = f_coefficients(&meanfield_rates(&[0.0], &[2], 3.0).unwrap());
        for z in [f.f1, f.f2, f.f3] {
            assert!(z.norm() < 1e-15);
        }
    }

    #[test]
    fn disorder_averaged_damping_weight_is_two_thirds_at_zero_overlap() {
        for alpha in 1..=3u8 {
            for s in [1i8, -1] {
                let avg = disorder_average(1, |k| {
                    let rates = meanfield_rates(&[0.0], k, 1.7).unwrap();
                    channel_weight_sum(&rates, alpha, s)
                })
                .unwrap();
                assert_relative_eq!(avg, 2.0 / 3.0, epsilon = 1e-12);
            }
        }
        // Also exact for p = 2 at zero overlap.
        let avg = disorder_average(2, |k| {
            let rates = meanfield_rates(&[0.0, 0.0], k, 0.9).unwrap();
            channel_weight_sum(&rates, 2, -1)
        })
        .unwrap();
        assert_relative_eq!(avg, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn paramagnetic_state_is_an_exact_fixed_point() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for _ in 0..20 {
            let p = rng.gen_range(1..=3usize);
            let pars = params(rng.gen_range(0.2..3.0), rng.gen_range(0.0..5.0), p);
            let rhs = collective_rhs(&CollectiveState::zeros(p), &pars).unwrap();
            assert!(rhs.max_abs() < 1e-14, "residual {}", rhs.max_abs());
        }
    }

    #[test]
    fn zero_drive_overlap_drift_matches_the_closed_form() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..50 {
            let m = rng.gen_range(-0.45..0.95);
            let beta = rng.gen_range(0.1..3.0);
            let state = CollectiveState::from_overlaps(&[m]);
            let pars = ModelParams::new(3, 1, beta, 0.0, 1.0).unwrap();
            let got = collective_rhs(&state, &pars).unwrap();
            assert_relative_eq!(got.m(0), single_pattern_drift(m, beta), epsilon = 1e-12);
            // Coherences stay exactly zero at λ = 0.
            for mu in 0..1 {
                assert_eq!(got.x(mu), 0.0);
                assert_eq!(got.y(mu), 0.0);
            }
        }
    }

    #[test]
    fn zero_drive_coherences_decay_at_one_third_gamma() {
        let state = CollectiveState::from_flat(1, vec![0.0, 0.3, -0.2, 0.5, -0.4]).unwrap();
        let pars = ModelParams::new(3, 1, 0.8, 0.0, 2.0).unwrap();
        let rhs = collective_rhs(&state, &pars).unwrap();
        assert_relative_eq!(rhs.x(0), -2.0 / 3.0 * 0.3, epsilon = 1e-14);
        assert_relative_eq!(rhs.xbar(0), -2.0 / 3.0 * -0.2, epsilon = 1e-14);
        assert_relative_eq!(rhs.y(0), -2.0 / 3.0 * 0.5, epsilon = 1e-14);
        assert_relative_eq!(rhs.ybar(0), -2.0 / 3.0 * -0.4, epsilon = 1e-14);
    }

    #[test]
    fn gauge_covariance_of_the_disorder_average() {
        // The drift of m^μ must not depend on which exponent labels the
        // pattern: compare p = 2 states against the μ-swapped state.
        let pars = params(1.3, 2.0, 2);
        let s1 =
            CollectiveState::from_flat(2, vec![0.3, 0.1, 0.0, 0.0, 0.0, 0.0, 0.2, -0.1, 0.05, 0.0])
                .unwrap();
        let s2 =
            CollectiveState::from_flat(2, vec![0.1, 0.3, 0.0, 0.0, 0.0, 0.0, -0.1, 0.2, 0.0, 0.05])
                .unwrap();
        let r1 = collective_rhs(&s1, &pars).unwrap();
        let r2 = collective_rhs(&s2, &pars).unwrap();
        assert_relative_eq!(r1.m(0), r2.m(1), epsilon = 1e-12);
        assert_relative_eq!(r1.m(1), r2.m(0), epsilon = 1e-12);
        assert_relative_eq!(r1.y(0), r2.y(1), epsilon = 1e-12);
    }

    #[test]
    fn integrator_is_fourth_order() {
        // Global error against a dt/16 reference must shrink by ~2^4 per
        // halving.
        let pars = params(1.2, 1.5, 1);
        let s0 = CollectiveState::from_overlaps(&[0.4]);
        let t_end = 2.0;
        let reference = integrate(&s0, &pars, t_end, 0.02 / 16.0, usize::MAX)
            .unwrap()
            .final_state()
            .clone();
        let err = |dt: f64| -> f64 {
            let fin = integrate(&s0, &pars, t_end, dt, usize::MAX)
                .unwrap()
                .final_state()
                .clone();
            fin.as_slice()
                .iter()
                .zip(reference.as_slice())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        };
        let e1 = err(0.02);
        let e2 = err(0.01);
        let order = (e1 / e2).log2();
        assert!(
            (3.7..=4.3).contains(&order),
            "measured order {order} (e1 = {e1:e}, e2 = {e2:e})"
        );
    }

    #[test]
    fn zero_drive_dynamics_reproduces_the_classical_transition() {
        // T = 1: retrieval (m → 0.9923, the Gibbs self-consistency root);
        // T = 3: paramagnet.
        let s0 = CollectiveState::from_overlaps(&[0.6]);
        let cold = integrate(&s0, &params(1.0, 0.0, 1), 200.0, 0.01, 1000).unwrap();
        assert!((cold.final_state().m(0) - 0.992250043).abs() < 1e-4);
        let hot = integrate(&s0, &params(3.0, 0.0, 1), 200.0, 0.01, 1000).unwrap();
        assert!(hot.final_state().m(0).abs() < 1e-3);
    }

    #[test]
    fn meanfield_and_monte_carlo_agree_at_zero_drive() {
        // Stationary overlap at T = 1 from the collective equations vs a
        // 30 000-site heat-bath chain.
        let s0 = CollectiveState::from_overlaps(&[0.6]);
        let mf = integrate(&s0, &params(1.0, 0.0, 1), 300.0, 0.01, 10_000)
            .unwrap()
            .final_state()
            .m(0);
        let pats = PatternSet::generate(30_000, 1, 3, 33).unwrap();
        let settings = MCSettings {
            sweeps: 150,
            burn_in: 150,
            seed: 4,
        };
        let mc = mc_equilibrium_curve(&pats, &[1.0], 0.6, &settings).unwrap()[0].mean_overlap;
        assert!((mf - mc).abs() < 0.02, "meanfield {mf} vs MC {mc}");
    }

    #[test]
    fn blow_up_guard_reports_the_failure_time() {
        let huge = CollectiveState::from_overlaps(&[2e6]);
        match integrate(&huge, &params(1.0, 0.0, 1), 1.0, 0.01, 1) {
            Err(Error::BlowUp { t, .. }) => assert_eq!(t, 0.0),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn fixed_point_solver_finds_both_phases() {
        // Retrieval root at T = 1, λ = 0 from a rough guess.
        let pars = params(1.0, 0.0, 1);
        let fp = find_fixed_point(&CollectiveState::from_overlaps(&[0.8]), &pars).unwrap();
        assert!((fp.m(0) - 0.992250043).abs() < 1e-9);
        let res = collective_rhs(&fp, &pars).unwrap();
        assert!(res.max_abs() < 1e-10);
        // Paramagnetic root at T = 3 from a biased guess. The solver stops on
        // ‖rhs‖∞ < 1e−10; the slowest local rate is 1/6, so the state itself
        // is pinned to within a factor ~6 of that.
        let pars3 = params(3.0, 0.0, 1);
        let fp = find_fixed_point(&CollectiveState::from_overlaps(&[0.3]), &pars3).unwrap();
        assert!(collective_rhs(&fp, &pars3).unwrap().max_abs() < 1e-10);
        assert!(fp.max_abs() < 1e-8);
    }

    #[test]
    fn fixed_point_solver_agrees_with_long_integration() {
        let pars = params(0.9, 1.2, 1);
        let traj = integrate(
            &CollectiveState::from_overlaps(&[0.9]),
            &pars,
            1000.0,
            0.01,
            100_000,
        )
        .unwrap();
        let fp = find_fixed_point(traj.final_state(), &pars).unwrap();
        for (a, b) in fp.as_slice().iter().zip(traj.final_state().as_slice()) {
            assert!((a - b).abs() < 1e-6, "solver {a} vs integration {b}");
        }
    }

    #[test]
    fn jacobian_eigenvalues_require_stationarity() {
        let pars = params(1.0, 0.0, 1);
        let not_fp = CollectiveState::from_overlaps(&[0.5]);
        assert!(matches!(
            jacobian_eigenvalues(&not_fp, &pars),
            Err(Error::NotAFixedPoint { .. })
        ));
    }

    #[test]
    fn zero_drive_paramagnetic_spectrum_is_known_exactly() {
        // At λ = 0 the paramagnetic Jacobian is diagonal: the overlap mode has
        // eigenvalue γ(β − 1/2) and every coherence mode −γ/3.
        for (t, p) in [(3.0, 1usize), (1.5, 2)] {
            let pars = params(t, 0.0, p);
            let eigs = jacobian_eigenvalues(&CollectiveState::zeros(p), &pars).unwrap();
            assert_eq!(eigs.len(), 5 * p);
            for mu in 0..p {
                assert_relative_eq!(eigs[mu].re, 1.0 / t - 0.5, epsilon = 1e-8);
                assert!(eigs[mu].im.abs() < 1e-10);
            }
            for eig in &eigs[p..] {
                assert_relative_eq!(eig.re, -1.0 / 3.0, epsilon = 1e-8);
                assert!(eig.im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn jacobian_matches_a_wider_stencil() {
        // Cross-validate the 2-point central difference against a 4-point
        // stencil with a different step.
        let pars = params(0.8, 2.5, 1);
        let point = CollectiveState::zeros(1);
        let jac = jacobian(&point, &pars).unwrap();
        let h = 2e-6;
        let dim = 5;
        let mut probe = point.as_slice().to_vec();
        let mut buf = vec![0.0; dim];
        for j in 0..dim {
            let mut col = vec![0.0; dim];
            for (w, fac) in [(2.0, -1.0 / 12.0), (1.0, 8.0 / 12.0)] {
                for sign in [1.0, -1.0] {
                    probe[j] = w * h * sign;
                    rhs_into(&probe, &pars, &mut buf).unwrap();
                    for i in 0..dim {
                        col[i] += sign * fac * buf[i] / h;
                    }
                }
            }
            probe[j] = 0.0;
            for i in 0..dim {
                assert_relative_eq!(jac[(i, j)], col[i], epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn sigma_is_zero_on_a_fixed_point_and_window_is_validated() {
        let pars = params(3.0, 0.0, 1);
        let traj = integrate(
            &CollectiveState::from_overlaps(&[0.1]),
            &pars,
            250.0,
            0.01,
            50,
        )
        .unwrap();
        // m decays at rate 1/6, so by t = 230 the residual is ~e^{−38}.
        let sigma = limit_cycle_sigma(&traj, (230.0, 250.0), 500).unwrap();
        assert!(sigma[0] < 1e-9);
        assert!(matches!(
            limit_cycle_sigma(&traj, (230.0, 400.0), 500),
            Err(Error::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn hopf_scan_finds_no_crossing_without_drive() {
        let scan = hopf_scan(1, 0.0, 1.0, (0.5, 1.5), 11).unwrap();
        assert!(scan.crossings.is_empty());
        // All eigenvalues real at λ = 0.
        for pt in &scan.points {
            assert!(pt.leading[0].im.abs() < 1e-9);
        }
    }

    #[test]
    fn hopf_crossing_is_stable_under_grid_refinement() {
        let coarse = hopf_scan(1, 2.5, 1.0, (0.5, 1.5), 21).unwrap();
        let fine = hopf_scan(1, 2.5, 1.0, (0.5, 1.5), 41).unwrap();
        assert_eq!(coarse.crossings.len(), 1);
        assert_eq!(fine.crossings.len(), 1);
        assert!((coarse.crossings[0] - fine.crossings[0]).abs() < 0.05);
    }
}
