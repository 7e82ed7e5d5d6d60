//! Line-oriented experiment configuration: `key = value` pairs with `#`
//! comments and dotted keys namespaced by run mode (e.g. `meanfield.dt`).
//!
//! Parsing is strict: unknown keys, keys that do not apply to the selected
//! mode, type mismatches, and out-of-range values are all rejected with the
//! offending line number.  [`ExperimentConfig::canonical_text`] renders the
//! fully-resolved configuration (defaults included); parsing that text back
//! reproduces the same configuration.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Mc,
    ClassicalExact,
    Meanfield,
    Lindblad,
    Sweep,
    Hysteresis,
    Hopf,
    LcMap,
    Orbit,
}

impl Mode {
    pub const ALL: [Mode; 9] = [
        Mode::Mc,
        Mode::ClassicalExact,
        Mode::Meanfield,
        Mode::Lindblad,
        Mode::Sweep,
        Mode::Hysteresis,
        Mode::Hopf,
        Mode::LcMap,
        Mode::Orbit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Mc => "mc",
            Mode::ClassicalExact => "classical-exact",
            Mode::Meanfield => "meanfield",
            Mode::Lindblad => "lindblad",
            Mode::Sweep => "sweep",
            Mode::Hysteresis => "hysteresis",
            Mode::Hopf => "hopf",
            Mode::LcMap => "lc-map",
            Mode::Orbit => "orbit",
        }
    }

    fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.iter().copied().find(|m| m.as_str() == s)
    }

    /// Point modes take `T` (and `lambda`); scan modes take grids instead.
    fn takes_temperature(self) -> bool {
        matches!(
            self,
            Mode::Mc | Mode::ClassicalExact | Mode::Meanfield | Mode::Lindblad | Mode::Orbit
        )
    }

    fn takes_lambda(self) -> bool {
        !matches!(self, Mode::Sweep | Mode::LcMap)
    }

    fn takes_sites(self) -> bool {
        matches!(self, Mode::Mc | Mode::ClassicalExact | Mode::Lindblad)
    }

    /// Modes built on the collective equations require q = 3.
    fn needs_q3(self) -> bool {
        !matches!(self, Mode::Mc | Mode::ClassicalExact | Mode::Lindblad)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parse failure with the offending location.
#[derive(Debug, Clone)]
pub struct ConfigError {
    /// 1-based line number in the config file; `None` for whole-config
    /// problems and command-line overrides.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn err<T>(line: Option<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

/// Time-grid settings shared by the two scanning modes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridKeys {
    pub t_lo: f64,
    pub t_hi: f64,
    pub t_n: usize,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub lambda_n: usize,
}

impl Default for GridKeys {
    fn default() -> Self {
        Self {
            t_lo: 0.2,
            t_hi: 3.0,
            t_n: 60,
            lambda_lo: 0.0,
            lambda_hi: 5.0,
            lambda_n: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub q: u8,
    pub p: usize,
    pub temperature: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma: f64,
    pub n_sites: Option<usize>,
    pub seed: u64,
    pub dt: f64,
    pub output: String,

    // meanfield.*
    pub mf_t_end: f64,
    pub mf_record_every: usize,
    pub mf_m0: Vec<f64>,
    // lindblad.*
    pub lb_t_end: f64,
    pub lb_record_every: usize,
    pub lb_m0: f64,
    // mc.*
    pub mc_sweeps: usize,
    pub mc_burn_in: usize,
    pub mc_m0: f64,
    // classical-exact.*
    pub cm_t_end: f64,
    pub cm_record_every: usize,
    pub cm_m0: f64,
    // sweep.* / lc-map.*
    pub sweep_grid: GridKeys,
    pub lcmap_grid: GridKeys,
    // hysteresis.*
    pub hy_t_lo: f64,
    pub hy_t_hi: f64,
    pub hy_n: usize,
    pub hy_m_weak: f64,
    pub hy_m_strong: f64,
    // hopf.*
    pub hopf_t_lo: f64,
    pub hopf_t_hi: f64,
    pub hopf_n: usize,
    // orbit.*
    pub orbit_t_end: f64,
    pub orbit_window_lo: f64,
    pub orbit_window_hi: f64,
    pub orbit_record_every: usize,
    pub orbit_m0: Vec<f64>,
}

impl ExperimentConfig {
    fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            q: 3,
            p: 1,
            temperature: None,
            lambda: None,
            gamma: 1.0,
            n_sites: None,
            seed: 1,
            dt: 0.01,
            output: format!("{mode}.csv"),
            mf_t_end: 100.0,
            mf_record_every: 10,
            mf_m0: Vec::new(),
            lb_t_end: 10.0,
            lb_record_every: 100,
            lb_m0: 0.95,
            mc_sweeps: 2000,
            mc_burn_in: 500,
            mc_m0: 0.95,
            cm_t_end: 10.0,
            cm_record_every: 100,
            cm_m0: 0.95,
            sweep_grid: GridKeys::default(),
            lcmap_grid: GridKeys::default(),
            hy_t_lo: 1.9,
            hy_t_hi: 2.3,
            hy_n: 33,
            hy_m_weak: 0.1,
            hy_m_strong: 0.95,
            hopf_t_lo: 0.5,
            hopf_t_hi: 1.5,
            hopf_n: 101,
            orbit_t_end: 10_000.0,
            orbit_window_lo: 9000.0,
            orbit_window_hi: 10_000.0,
            orbit_record_every: 50,
            orbit_m0: Vec::new(),
        }
    }

    /// Default initial overlaps for collective trajectories: strong overlap
    /// with the first pattern, none with the rest.
    pub fn default_m0(p: usize) -> Vec<f64> {
        let mut v = vec![0.0; p];
        v[0] = 0.95;
        v
    }

    pub fn effective_mf_m0(&self) -> Vec<f64> {
        if self.mf_m0.is_empty() {
            Self::default_m0(self.p)
        } else {
            self.mf_m0.clone()
        }
    }

    pub fn effective_orbit_m0(&self) -> Vec<f64> {
        if self.orbit_m0.is_empty() {
            Self::default_m0(self.p)
        } else {
            self.orbit_m0.clone()
        }
    }

    /// The fully-resolved configuration in canonical `key = value` form.
    /// Every key that applies to the mode is listed, defaults included.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("mode", self.mode.to_string());
        push("q", self.q.to_string());
        push("p", self.p.to_string());
        if let Some(t) = self.temperature {
            push("T", t.to_string());
        }
        if let Some(l) = self.lambda {
            push("lambda", l.to_string());
        }
        push("gamma", self.gamma.to_string());
        if let Some(n) = self.n_sites {
            push("n", n.to_string());
        }
        push("seed", self.seed.to_string());
        push("dt", self.dt.to_string());
        push("output", self.output.clone());
        let list = |v: &[f64]| {
            v.iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        };
        match self.mode {
            Mode::Meanfield => {
                push("meanfield.t_end", self.mf_t_end.to_string());
                push("meanfield.record_every", self.mf_record_every.to_string());
                push("meanfield.m0", list(&self.effective_mf_m0()));
            }
            Mode::Lindblad => {
                push("lindblad.t_end", self.lb_t_end.to_string());
                push("lindblad.record_every", self.lb_record_every.to_string());
                push("lindblad.m0", self.lb_m0.to_string());
            }
            Mode::Mc => {
                push("mc.sweeps", self.mc_sweeps.to_string());
                push("mc.burn_in", self.mc_burn_in.to_string());
                push("mc.m0", self.mc_m0.to_string());
            }
            Mode::ClassicalExact => {
                push("classical-exact.t_end", self.cm_t_end.to_string());
                push(
                    "classical-exact.record_every",
                    self.cm_record_every.to_string(),
                );
                push("classical-exact.m0", self.cm_m0.to_string());
            }
            Mode::Sweep | Mode::LcMap => {
                let (ns, g) = if self.mode == Mode::Sweep {
                    ("sweep", &self.sweep_grid)
                } else {
                    ("lc-map", &self.lcmap_grid)
                };
                push(&format!("{ns}.t_lo"), g.t_lo.to_string());
                push(&format!("{ns}.t_hi"), g.t_hi.to_string());
                push(&format!("{ns}.t_n"), g.t_n.to_string());
                push(&format!("{ns}.lambda_lo"), g.lambda_lo.to_string());
                push(&format!("{ns}.lambda_hi"), g.lambda_hi.to_string());
                push(&format!("{ns}.lambda_n"), g.lambda_n.to_string());
            }
            Mode::Hysteresis => {
                push("hysteresis.t_lo", self.hy_t_lo.to_string());
                push("hysteresis.t_hi", self.hy_t_hi.to_string());
                push("hysteresis.n", self.hy_n.to_string());
                push("hysteresis.m_weak", self.hy_m_weak.to_string());
                push("hysteresis.m_strong", self.hy_m_strong.to_string());
            }
            Mode::Hopf => {
                push("hopf.t_lo", self.hopf_t_lo.to_string());
                push("hopf.t_hi", self.hopf_t_hi.to_string());
                push("hopf.n", self.hopf_n.to_string());
            }
            Mode::Orbit => {
                push("orbit.t_end", self.orbit_t_end.to_string());
                push("orbit.window_lo", self.orbit_window_lo.to_string());
                push("orbit.window_hi", self.orbit_window_hi.to_string());
                push("orbit.record_every", self.orbit_record_every.to_string());
                push("orbit.m0", list(&self.effective_orbit_m0()));
            }
        }
        out
    }
}

fn parse_f64(line: Option<usize>, key: &str, v: &str) -> Result<f64, ConfigError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => err(line, format!("{key} expects a finite number, got `{v}`")),
    }
}

fn parse_usize(line: Option<usize>, key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse::<usize>()
        .map_err(|_| ConfigError {
            line,
            message: format!("{key} expects a non-negative integer, got `{v}`"),
        })
}

fn parse_u64(line: Option<usize>, key: &str, v: &str) -> Result<u64, ConfigError> {
    v.parse::<u64>().map_err(|_| ConfigError {
        line,
        message: format!("{key} expects a non-negative integer, got `{v}`"),
    })
}

fn parse_f64_list(line: Option<usize>, key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',')
        .map(|part| parse_f64(line, key, part.trim()))
        .collect()
}

fn check_positive(line: Option<usize>, key: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 {
        Ok(x)
    } else {
        err(line, format!("{key} must be positive, got {x}"))
    }
}

fn check_non_negative(line: Option<usize>, key: &str, x: f64) -> Result<f64, ConfigError> {
    if x >= 0.0 {
        Ok(x)
    } else {
        err(line, format!("{key} must be >= 0, got {x}"))
    }
}

fn check_overlap(line: Option<usize>, key: &str, x: f64) -> Result<f64, ConfigError> {
    if (-0.5..=1.0).contains(&x) {
        Ok(x)
    } else {
        err(line, format!("{key} must lie in [-0.5, 1], got {x}"))
    }
}

fn check_at_least_one(line: Option<usize>, key: &str, n: usize) -> Result<usize, ConfigError> {
    if n >= 1 {
        Ok(n)
    } else {
        err(line, format!("{key} must be >= 1"))
    }
}

/// Parses a configuration text, then applies `KEY=VALUE` command-line
/// overrides before the final consistency check, so an override can supply a
/// key the file omits.  `mode_override`, when given (from the CLI
/// subcommand), supplies the mode; a conflicting `mode` key is an error.
pub fn load(
    text: &str,
    mode_override: Option<Mode>,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig, ConfigError> {
    // First pass: tokenize into (line number, key, value).
    let mut entries: Vec<(usize, &str, &str)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        let Some(eq) = stripped.find('=') else {
            return err(
                Some(line_no),
                format!("expected `key = value`, got `{stripped}`"),
            );
        };
        let key = stripped[..eq].trim();
        let value = stripped[eq + 1..].trim();
        if key.is_empty() {
            return err(Some(line_no), "missing key before `=`");
        }
        if value.is_empty() {
            return err(Some(line_no), format!("missing value for key `{key}`"));
        }
        entries.push((line_no, key, value));
    }

    // Resolve the mode first so namespaced keys can be validated against it.
    let mut mode_from_file: Option<(usize, Mode)> = None;
    for &(line_no, key, value) in &entries {
        if key == "mode" {
            if mode_from_file.is_some() {
                return err(Some(line_no), "duplicate key `mode`");
            }
            match Mode::parse(value) {
                Some(m) => mode_from_file = Some((line_no, m)),
                None => {
                    return err(
                        Some(line_no),
                        format!(
                            "unknown mode `{value}` (expected one of: {})",
                            Mode::ALL.map(Mode::as_str).join(", ")
                        ),
                    )
                }
            }
        }
    }
    let mode = match (mode_from_file, mode_override) {
        (Some((line_no, m)), Some(ovr)) if m != ovr => {
            return err(
                Some(line_no),
                format!("config sets mode = {m} but the {ovr} command was invoked"),
            )
        }
        (Some((_, m)), _) => m,
        (None, Some(ovr)) => ovr,
        (None, None) => return err(None, "missing required key `mode`"),
    };

    let mut cfg = ExperimentConfig::with_mode(mode);
    let mut seen: Vec<&str> = Vec::new();
    for (line_no, key, value) in entries {
        if key != "mode" && seen.contains(&key) {
            return err(Some(line_no), format!("duplicate key `{key}`"));
        }
        seen.push(key);
        apply_key(&mut cfg, Some(line_no), key, value)?;
    }
    for (key, value) in overrides {
        if key == "mode" {
            return err(None, "mode cannot be overridden with --set");
        }
        apply_key(&mut cfg, None, key, value)?;
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn apply_key(
    cfg: &mut ExperimentConfig,
    line: Option<usize>,
    key: &str,
    value: &str,
) -> Result<(), ConfigError> {
    let mode = cfg.mode;
    // Namespaced keys must match the active mode.
    if let Some(dot) = key.find('.') {
        let ns = &key[..dot];
        if Mode::parse(ns).is_some() && ns != mode.as_str() {
            return err(
                line,
                format!("key `{key}` does not apply to mode {mode}"),
            );
        }
    }
    match key {
        "mode" => {} // resolved in the first pass
        "q" => {
            let q = parse_usize(line, key, value)?;
            if q != 2 && q != 3 {
                return err(line, format!("q must be 2 or 3, got {q}"));
            }
            cfg.q = q as u8;
        }
        "p" => {
            let p = check_at_least_one(line, key, parse_usize(line, key, value)?)?;
            if p > 6 {
                return err(
                    line,
                    format!("p = {p} exceeds the exact disorder-enumeration limit of 6"),
                );
            }
            cfg.p = p;
        }
        "T" => {
            cfg.temperature = Some(check_positive(line, key, parse_f64(line, key, value)?)?);
        }
        "lambda" => {
            cfg.lambda = Some(check_non_negative(line, key, parse_f64(line, key, value)?)?);
        }
        "gamma" => {
            cfg.gamma = check_positive(line, key, parse_f64(line, key, value)?)?;
        }
        "n" => {
            cfg.n_sites = Some(check_at_least_one(line, key, parse_usize(line, key, value)?)?);
        }
        "seed" => cfg.seed = parse_u64(line, key, value)?,
        "dt" => cfg.dt = check_positive(line, key, parse_f64(line, key, value)?)?,
        "output" => cfg.output = value.to_string(),

        "meanfield.t_end" => {
            cfg.mf_t_end = check_positive(line, key, parse_f64(line, key, value)?)?;
        }
        "meanfield.record_every" => {
            cfg.mf_record_every = check_at_least_one(line, key, parse_usize(line, key, value)?)?;
        }
        "meanfield.m0" => {
            let v = parse_f64_list(line, key, value)?;
            for &x in &v {
                check_overlap(line, key, x)?;
            }
            cfg.mf_m0 = v;
        }
        "meanfield.dt" | "lindblad.dt" | "classical-exact.dt" | "orbit.dt" => {
            cfg.dt = check_positive(line, key, parse_f64(line, key, value)?)?;
        }

        "lindblad.t_end" => {
            cfg.lb_t_end = check_positive(line, key, parse_f64(line, key, value)?)?;
        }
        "lindblad.record_every" => {
            cfg.lb_record_every = check_at_least_one(line, key, parse_usize(line, key, value)?)?;
        }
        "lindblad.m0" => {
            cfg.lb_m0 = check_overlap(line, key, parse_f64(line, key, value)?)?;
        }

        "mc.sweeps" => {
            cfg.mc_sweeps = check_at_least_one(line, key, parse_usize(line, key, value)?)?;
        }
        "mc.burn_in" => cfg.mc_burn_in = parse_usize(line, key, value)?,
        "mc.m0" => cfg.mc_m0 = check_overlap(line, key, parse_f64(line, key, value)?)?,

        "classical-exact.t_end" => {
            cfg.cm_t_end = check_positive(line, key, parse_f64(line, key, value)?)?;
        }
        "classical-exact.record_every" => {
            cfg.cm_record_every = check_at_least_one(line, key, parse_usize(line, key, value)?)?;
        }
        "classical-exact.m0" => {
            cfg.cm_m0 = check_overlap(line, key, parse_f64(line, key, value)?)?;
        }

        "sweep.t_lo" | "lc-map.t_lo" => {
            let g = grid_of(cfg, key);
            g.t_lo = check_positive(line, key, parse_f64(line, key, value)?)?;
        }
        "sweep.t_hi" | "lc-map.t_hi" => {
            let g = grid_of(cfg, key);
            g.t_hi = check_positive(line, key, parse_f64(line, key, value)?)?;
        }
        "sweep.t_n" | "lc-map.t_n" => {
            let n = check_at_least_one(line, key, parse_usize(line, key, value)?)?;
            grid_of(cfg, key).t_n = n;
        }
        "sweep.lambda_lo" | "lc-map.lambda_lo" => {
            let x = check_non_negative(line, key, parse_f64(line, key, value)?)?;
            grid_of(cfg, key).lambda_lo = x;
        }
        "sweep.lambda_hi" | "lc-map.lambda_hi" => {
            let x = check_non_negative(line, key, parse_f64(line, key, value)?)?;
            grid_of(cfg, key).lambda_hi = x;
        }
        "sweep.lambda_n" | "lc-map.lambda_n" => {
            let n = check_at_least_one(line, key, parse_usize(line, key, value)?)?;
            grid_of(cfg, key).lambda_n = n;
        }

        "hysteresis.t_lo" => {
            cfg.hy_t_lo = check_positive(line, key, parse_f64(line, key, value)?)?;
        }
        "hysteresis.t_hi" => {
            cfg.hy_t_hi = check_positive(line, key, parse_f64(line, key, value)?)?;
        }
        "hysteresis.n" => {
            cfg.hy_n = check_at_least_one(line, key, parse_usize(line, key, value)?)?;
        }
        "hysteresis.m_weak" => {
            cfg.hy_m_weak = check_overlap(line, key, parse_f64(line, key, value)?)?;
        }
        "hysteresis.m_strong" => {
            cfg.hy_m_strong = check_overlap(line, key, parse_f64(line, key, value)?)?;
        }

        "hopf.t_lo" => cfg.hopf_t_lo = check_positive(line, key, parse_f64(line, key, value)?)?,
        "hopf.t_hi" => cfg.hopf_t_hi = check_positive(line, key, parse_f64(line, key, value)?)?,
        "hopf.n" => cfg.hopf_n = check_at_least_one(line, key, parse_usize(line, key, value)?)?,

        "orbit.t_end" => {
            cfg.orbit_t_end = check_positive(line, key, parse_f64(line, key, value)?)?;
        }
        "orbit.window_lo" => {
            cfg.orbit_window_lo = check_non_negative(line, key, parse_f64(line, key, value)?)?;
        }
        "orbit.window_hi" => {
            cfg.orbit_window_hi = check_positive(line, key, parse_f64(line, key, value)?)?;
        }
        "orbit.record_every" => {
            cfg.orbit_record_every = check_at_least_one(line, key, parse_usize(line, key, value)?)?;
        }
        "orbit.m0" => {
            let v = parse_f64_list(line, key, value)?;
            for &x in &v {
                check_overlap(line, key, x)?;
            }
            cfg.orbit_m0 = v;
        }

        _ => return err(line, format!("unknown key `{key}`")),
    }
    Ok(())
}

fn grid_of<'a>(cfg: &'a mut ExperimentConfig, key: &str) -> &'a mut GridKeys {
    if key.starts_with("sweep.") {
        &mut cfg.sweep_grid
    } else {
        &mut cfg.lcmap_grid
    }
}

/// Whole-config consistency checks (presence and cross-key constraints).
fn validate(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    let mode = cfg.mode;
    if mode.takes_temperature() && cfg.temperature.is_none() {
        return err(None, format!("mode {mode} requires key `T`"));
    }
    if !mode.takes_temperature() && cfg.temperature.is_some() {
        return err(None, format!("key `T` does not apply to mode {mode}"));
    }
    if !mode.takes_lambda() && cfg.lambda.is_some() {
        return err(None, format!("key `lambda` does not apply to mode {mode}"));
    }
    match mode {
        Mode::Meanfield | Mode::Lindblad | Mode::Orbit | Mode::Hysteresis | Mode::Hopf => {
            if cfg.lambda.is_none() {
                return err(None, format!("mode {mode} requires key `lambda`"));
            }
        }
        Mode::Mc | Mode::ClassicalExact => {
            if cfg.lambda.is_some_and(|l| l != 0.0) {
                return err(
                    None,
                    format!("mode {mode} is undriven; lambda must be 0 when given"),
                );
            }
        }
        _ => {}
    }
    if mode.takes_sites() {
        if cfg.n_sites.is_none() {
            return err(None, format!("mode {mode} requires key `n`"));
        }
    } else if cfg.n_sites.is_some() {
        return err(None, format!("key `n` does not apply to mode {mode}"));
    }
    if mode.needs_q3() && cfg.q != 3 {
        return err(
            None,
            format!("mode {mode} uses the collective equations, which require q = 3"),
        );
    }
    let check_grid = |ns: &str, g: &GridKeys| -> Result<(), ConfigError> {
        if g.t_hi < g.t_lo {
            return err(None, format!("{ns}.t_hi must be >= {ns}.t_lo"));
        }
        if g.lambda_hi < g.lambda_lo {
            return err(None, format!("{ns}.lambda_hi must be >= {ns}.lambda_lo"));
        }
        Ok(())
    };
    match mode {
        Mode::Sweep => check_grid("sweep", &cfg.sweep_grid)?,
        Mode::LcMap => check_grid("lc-map", &cfg.lcmap_grid)?,
        Mode::Hysteresis => {
            if cfg.hy_t_hi <= cfg.hy_t_lo {
                return err(None, "hysteresis.t_hi must be > hysteresis.t_lo");
            }
            if cfg.hy_n < 2 {
                return err(None, "hysteresis.n must be >= 2");
            }
        }
        Mode::Hopf => {
            if cfg.hopf_t_hi <= cfg.hopf_t_lo {
                return err(None, "hopf.t_hi must be > hopf.t_lo");
            }
            if cfg.hopf_n < 2 {
                return err(None, "hopf.n must be >= 2");
            }
        }
        Mode::Orbit => {
            if !(cfg.orbit_window_lo < cfg.orbit_window_hi
                && cfg.orbit_window_hi <= cfg.orbit_t_end)
            {
                return err(
                    None,
                    "orbit window must satisfy window_lo < window_hi <= t_end",
                );
            }
        }
        _ => {}
    }
    for (key, m0) in [("meanfield.m0", &cfg.mf_m0), ("orbit.m0", &cfg.orbit_m0)] {
        if !m0.is_empty() && m0.len() != cfg.p {
            return err(
                None,
                format!("{key} must list exactly p = {} overlaps, got {}", cfg.p, m0.len()),
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_meanfield_config_fills_defaults() {
        let cfg = load("mode = meanfield\nT = 1.0\nlambda = 0.0\np = 1\n", None, &[]).unwrap();
        assert_eq!(cfg.mode, Mode::Meanfield);
        assert_eq!(cfg.q, 3);
        assert_eq!(cfg.gamma, 1.0);
        assert_eq!(cfg.dt, 0.01);
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.output, "meanfield.csv");
        assert_eq!(cfg.effective_mf_m0(), vec![0.95]);
    }

    #[test]
    fn negative_temperature_cites_line() {
        let e = load("mode = meanfield\nlambda = 0\nT = -1\n", None, &[]).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("T must be positive"), "{}", e.message);
    }

    #[test]
    fn unknown_key_cites_line() {
        let e = load("mode = meanfield\nT = 1\nlambda = 0\nbogus = 7\n", None, &[]).unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(e.message.contains("unknown key `bogus`"));
    }

    #[test]
    fn namespaced_key_for_other_mode_rejected() {
        let e = load(
            "mode = sweep\nsweep.t_n = 3\nmeanfield.t_end = 5\n",
            None,
            &[],
        )
        .unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("does not apply to mode sweep"));
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = "# experiment\n\nmode = hopf   # trailing comment\nlambda = 2.5\n";
        let cfg = load(text, None, &[]).unwrap();
        assert_eq!(cfg.mode, Mode::Hopf);
        assert_eq!(cfg.lambda, Some(2.5));
    }

    #[test]
    fn duplicate_key_rejected() {
        let e = load("mode = hopf\nlambda = 1\nlambda = 2\n", None, &[]).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("duplicate"));
    }

    #[test]
    fn mode_conflict_with_subcommand_rejected() {
        let e = load("mode = hopf\nlambda = 1\n", Some(Mode::Sweep), &[]).unwrap_err();
        assert!(e.message.contains("sweep command"));
    }

    #[test]
    fn missing_required_keys_rejected() {
        let e = load("mode = meanfield\nT = 1\n", None, &[]).unwrap_err();
        assert!(e.message.contains("requires key `lambda`"));
        let e = load("mode = lindblad\nT = 1\nlambda = 0.1\n", None, &[]).unwrap_err();
        assert!(e.message.contains("requires key `n`"));
    }

    #[test]
    fn scan_modes_reject_point_temperature() {
        let e = load("mode = sweep\nT = 1.0\n", None, &[]).unwrap_err();
        assert!(e.message.contains("`T` does not apply"));
    }

    #[test]
    fn quantum_site_cap_is_not_a_parse_error() {
        // Capacity is enforced by the library at run time, not by the parser.
        let cfg = load("mode = lindblad\nT = 1\nlambda = 0.1\nn = 7\n", None, &[]).unwrap();
        assert_eq!(cfg.n_sites, Some(7));
    }

    #[test]
    fn round_trip_identity_full_sweep_config() {
        let text = "\
mode = sweep
q = 3
p = 2
gamma = 1.5
seed = 42
dt = 0.02
output = maps/sweep.csv
sweep.t_lo = 0.3
sweep.t_hi = 2.5
sweep.t_n = 12
sweep.lambda_lo = 0
sweep.lambda_hi = 5
sweep.lambda_n = 12
";
        let cfg = load(text, None, &[]).unwrap();
        let rendered = cfg.canonical_text();
        let cfg2 = load(&rendered, None, &[]).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(rendered, cfg2.canonical_text());
    }

    #[test]
    fn round_trip_identity_point_modes() {
        for text in [
            "mode = meanfield\nT = 0.86\nlambda = 4\np = 1\nmeanfield.m0 = 0.05\n",
            "mode = lindblad\nT = 2.5\nlambda = 0.1\nn = 2\n",
            "mode = mc\nT = 1\nn = 12\nseed = 7\n",
            "mode = classical-exact\nT = 1.3\nn = 3\n",
            "mode = hysteresis\nlambda = 0\n",
            "mode = hopf\nlambda = 2.5\n",
            "mode = orbit\nT = 0.8\nlambda = 4.5\np = 2\norbit.m0 = -0.2, -0.2\n",
            "mode = lc-map\nlc-map.t_n = 4\nlc-map.lambda_n = 4\n",
        ] {
            let cfg = load(text, None, &[]).unwrap();
            let rendered = cfg.canonical_text();
            let cfg2 = load(&rendered, None, &[]).unwrap();
            assert_eq!(cfg, cfg2, "round trip failed for {text}");
        }
    }

    #[test]
    fn override_applies_and_validates() {
        let text = "mode = meanfield\nT = 1\nlambda = 0\n";
        let over = |k: &str, v: &str| vec![(k.to_string(), v.to_string())];
        let cfg = load(text, None, &over("T", "2.0")).unwrap();
        assert_eq!(cfg.temperature, Some(2.0));
        let e = load(text, None, &over("T", "-3")).unwrap_err();
        assert!(e.line.is_none());
        assert!(e.message.contains("positive"));
        let e = load(text, None, &over("mode", "sweep")).unwrap_err();
        assert!(e.message.contains("cannot be overridden"));
    }

    #[test]
    fn override_can_supply_missing_required_key() {
        let cfg = load(
            "lambda = 0\n",
            Some(Mode::Meanfield),
            &[("T".to_string(), "1.5".to_string())],
        )
        .unwrap();
        assert_eq!(cfg.temperature, Some(1.5));
    }
}
