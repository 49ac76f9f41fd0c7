//! Hamiltonian families, sweep schedules, noise events and experiment
//! configuration shared by all engines.
//!
//! Two families of open-boundary spin-1/2 chains are supported:
//!
//! * `Zzxz`:        H = J Σ Z_i Z_{i+1} + Bx Σ X_i + Bz Σ Z_i
//! * `HeisenbergX`: H = (1/2) Σ (J X_i X_{i+1} + J Y_i Y_{i+1} + Jz Z_i Z_{i+1}) + Bx Σ X_i
//!
//! J > 0 is antiferromagnetic. Boundaries are open, ħ = 1, energies and
//! times are dimensionless.

use crate::error::{CoreError, Result};
use crate::C64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Zzxz,
    HeisenbergX,
}

impl ModelFamily {
    /// Name of the third coupling in exports ("Bz" or "Jz").
    pub fn axial_name(self) -> &'static str {
        match self {
            ModelFamily::Zzxz => "Bz",
            ModelFamily::HeisenbergX => "Jz",
        }
    }
}

/// Coupling values of one point in parameter space.
///
/// `axial` is Bz for `Zzxz` and Jz for `HeisenbergX`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    pub j: f64,
    pub bx: f64,
    pub axial: f64,
}

impl Couplings {
    pub fn zzxz(j: f64, bx: f64, bz: f64) -> Self {
        Couplings { j, bx, axial: bz }
    }

    pub fn heisenberg_x(j: f64, jz: f64, bx: f64) -> Self {
        Couplings { j, bx, axial: jz }
    }

    pub fn is_finite(&self) -> bool {
        self.j.is_finite() && self.bx.is_finite() && self.axial.is_finite()
    }

    fn lerp(a: &Couplings, b: &Couplings, x: f64) -> Couplings {
        Couplings {
            j: a.j + (b.j - a.j) * x,
            bx: a.bx + (b.bx - a.bx) * x,
            axial: a.axial + (b.axial - a.axial) * x,
        }
    }
}

/// A Hamiltonian family instantiated at one parameter point.
/// Boundary conditions are open (fixed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub n: usize,
    pub params: Couplings,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, n: usize, params: Couplings) -> Result<Self> {
        if n < 2 {
            return Err(CoreError::Invalid(format!("n must be ≥ 2, got {n}")));
        }
        if !params.is_finite() {
            return Err(CoreError::Invalid("non-finite coupling".into()));
        }
        Ok(ModelSpec { family, n, params })
    }

    /// Upper bound on the operator norm of H, used to set integrator substeps.
    pub fn norm_bound(&self) -> f64 {
        let n = self.n as f64;
        let p = &self.params;
        match self.family {
            ModelFamily::Zzxz => p.j.abs() * (n - 1.0) + (p.bx.abs() + p.axial.abs()) * n,
            ModelFamily::HeisenbergX => {
                (p.j.abs() + 0.5 * p.axial.abs()) * (n - 1.0) + p.bx.abs() * n
            }
        }
    }
}

/// Piecewise-linear path through parameter space.
///
/// Every leg lasts `leg_duration`; the total duration is
/// `(vertices.len() - 1) * leg_duration`. A closed loop repeats the first
/// vertex as the last one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSchedule {
    pub family: ModelFamily,
    pub n: usize,
    pub vertices: Vec<Couplings>,
    pub leg_duration: f64,
    pub dt: f64,
}

impl SweepSchedule {
    pub fn new(
        family: ModelFamily,
        n: usize,
        vertices: Vec<Couplings>,
        leg_duration: f64,
        dt: f64,
    ) -> Result<Self> {
        let s = SweepSchedule { family, n, vertices, leg_duration, dt };
        let diags = s.diagnostics();
        if let Some(d) = diags.first() {
            return Err(CoreError::Invalid(d.clone()));
        }
        Ok(s)
    }

    /// Straight sweep from `from` to `to`.
    pub fn line(
        family: ModelFamily,
        n: usize,
        from: Couplings,
        to: Couplings,
        duration: f64,
        dt: f64,
    ) -> Result<Self> {
        SweepSchedule::new(family, n, vec![from, to], duration, dt)
    }

    /// Closed loop visiting the given vertices and returning to the first.
    pub fn closed_loop(
        family: ModelFamily,
        n: usize,
        mut vertices: Vec<Couplings>,
        leg_duration: f64,
        dt: f64,
    ) -> Result<Self> {
        if let Some(first) = vertices.first().copied() {
            vertices.push(first);
        }
        SweepSchedule::new(family, n, vertices, leg_duration, dt)
    }

    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n < 2 {
            out.push(format!("n must be ≥ 2, got {}", self.n));
        }
        if self.vertices.len() < 2 {
            out.push("schedule needs at least two vertices".into());
        }
        if !(self.leg_duration > 0.0) || !self.leg_duration.is_finite() {
            out.push(format!("leg duration must be positive, got {}", self.leg_duration));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            out.push(format!("dt must be positive, got {}", self.dt));
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if !v.is_finite() {
                out.push(format!("vertex {i} has a non-finite coupling"));
            }
        }
        out
    }

    pub fn n_legs(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn total_duration(&self) -> f64 {
        self.n_legs() as f64 * self.leg_duration
    }

    pub fn is_closed(&self) -> bool {
        match (self.vertices.first(), self.vertices.last()) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }

    /// Interpolated parameters at time `t ∈ [0, total duration]`.
    ///
    /// Exact vertex values are returned at leg boundaries. Times outside the
    /// range by more than a rounding tolerance are a range error.
    pub fn params_at(&self, t: f64) -> Result<ModelSpec> {
        let total = self.total_duration();
        let tol = 1e-9 * (1.0 + total.abs());
        if t < -tol || t > total + tol {
            return Err(CoreError::Invalid(format!(
                "time {t} outside schedule range [0, {total}]"
            )));
        }
        Ok(self.params_at_clamped(t))
    }

    /// As `params_at` but clamping `t` into range (used by integrators whose
    /// midpoint may fall a rounding error outside the window).
    pub fn params_at_clamped(&self, t: f64) -> ModelSpec {
        let total = self.total_duration();
        let t = t.clamp(0.0, total);
        let leg_f = t / self.leg_duration;
        let mut leg = leg_f.floor() as usize;
        if leg >= self.n_legs() {
            leg = self.n_legs() - 1;
        }
        let x = ((t - leg as f64 * self.leg_duration) / self.leg_duration).clamp(0.0, 1.0);
        // Vertices are hit exactly so that closed loops close bitwise.
        let params = if x == 0.0 {
            self.vertices[leg]
        } else if x == 1.0 {
            self.vertices[leg + 1]
        } else {
            Couplings::lerp(&self.vertices[leg], &self.vertices[leg + 1], x)
        };
        ModelSpec { family: self.family, n: self.n, params }
    }
}

/// Number of integrator steps covering `[t0, t1]`, requiring that `dt`
/// divides the window within rounding.
pub fn window_steps(t0: f64, t1: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(CoreError::Invalid(format!("dt must be positive, got {dt}")));
    }
    let span = t1 - t0;
    if span < 0.0 {
        return Err(CoreError::Invalid(format!("window [{t0}, {t1}] is reversed")));
    }
    let steps = (span / dt).round();
    if (steps * dt - span).abs() > 1e-9 * (1.0 + span.abs()) {
        return Err(CoreError::Invalid(format!(
            "dt = {dt} does not divide the window [{t0}, {t1}]"
        )));
    }
    Ok(steps as usize)
}

/// The common sweep on the Bz = 0 line: J 0 → 3 at Bx = 1.
pub fn default_tfim_sweep(n: usize, duration: f64, dt: f64) -> Result<SweepSchedule> {
    SweepSchedule::line(
        ModelFamily::Zzxz,
        n,
        Couplings::zzxz(0.0, 1.0, 0.0),
        Couplings::zzxz(3.0, 1.0, 0.0),
        duration,
        dt,
    )
}

/// The mixed-field sweep from the product point into the ordered phase:
/// (J, Bx, Bz) = (0, 1, 0) → (3, 1, 1).
pub fn default_zzxz_sweep(n: usize, duration: f64, dt: f64) -> Result<SweepSchedule> {
    SweepSchedule::line(
        ModelFamily::Zzxz,
        n,
        Couplings::zzxz(0.0, 1.0, 0.0),
        Couplings::zzxz(3.0, 1.0, 1.0),
        duration,
        dt,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    /// 2×2 matrix, row-major [[a00, a01], [a10, a11]].
    pub fn matrix(self) -> [[C64; 2]; 2] {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            PauliAxis::X => [[zero, one], [one, zero]],
            PauliAxis::Y => [[zero, -i], [i, zero]],
            PauliAxis::Z => [[one, zero], [zero, -one]],
        }
    }
}

/// A single instantaneous Pauli applied at one site during the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseEvent {
    pub t_apply: f64,
    pub site: usize,
    pub axis: PauliAxis,
    pub enabled: bool,
}

/// Default error placement: σ^y on the middle site, 5% into the sweep.
pub fn default_noise(n: usize, total_duration: f64) -> NoiseEvent {
    NoiseEvent {
        t_apply: 0.05 * total_duration,
        site: n / 2,
        axis: PauliAxis::Y,
        enabled: true,
    }
}

/// Step boundary at which the event fires inside the window `[t0, t1]`
/// discretized into `steps` steps: the first boundary with t ≥ t_apply.
/// Index 0 fires before the first step; index `steps` after the last.
/// `None` if disabled or outside the window.
pub fn noise_step_index(t0: f64, t1: f64, steps: usize, ev: &NoiseEvent) -> Option<usize> {
    if !ev.enabled {
        return None;
    }
    let tol = 1e-9 * (1.0 + ev.t_apply.abs());
    if ev.t_apply < t0 - tol || ev.t_apply > t1 + tol {
        return None;
    }
    if steps == 0 {
        return Some(0);
    }
    let dt = (t1 - t0) / steps as f64;
    let x = (ev.t_apply - t0) / dt;
    Some(((x - 1e-9).ceil().max(0.0) as usize).min(steps))
}

/// Per-leg duration, either fixed or the symbolic rule "n^2/<den>".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TRule {
    Fixed(f64),
    /// T = n² / den.
    QuadraticOver(f64),
}

impl TRule {
    pub fn parse(s: &str) -> Result<TRule> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("n^2/") {
            let den: f64 = rest
                .trim()
                .parse()
                .map_err(|_| CoreError::Invalid(format!("bad T rule: {s:?}")))?;
            if !(den > 0.0) {
                return Err(CoreError::Invalid(format!("bad T rule denominator: {s:?}")));
            }
            return Ok(TRule::QuadraticOver(den));
        }
        let v: f64 = s
            .parse()
            .map_err(|_| CoreError::Invalid(format!("bad T rule: {s:?}")))?;
        if !(v > 0.0) {
            return Err(CoreError::Invalid(format!("T must be positive: {s:?}")));
        }
        Ok(TRule::Fixed(v))
    }

    pub fn evaluate(&self, n: usize) -> f64 {
        match *self {
            TRule::Fixed(t) => t,
            TRule::QuadraticOver(den) => (n * n) as f64 / den,
        }
    }
}

impl std::fmt::Display for TRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TRule::Fixed(t) => write!(f, "{t}"),
            TRule::QuadraticOver(den) => write!(f, "n^2/{den}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteRule {
    Center,
    Index(usize),
}

impl SiteRule {
    pub fn evaluate(&self, n: usize) -> usize {
        match *self {
            SiteRule::Center => n / 2,
            SiteRule::Index(i) => i,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeRule {
    /// Fraction of the total duration.
    Fraction(f64),
    Absolute(f64),
}

impl TimeRule {
    pub fn evaluate(&self, total_duration: f64) -> f64 {
        match *self {
            TimeRule::Fraction(f) => f * total_duration,
            TimeRule::Absolute(t) => t,
        }
    }
}

/// Noise block of a configuration, resolved per size into a `NoiseEvent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseTemplate {
    pub enabled: bool,
    pub site: SiteRule,
    pub time: TimeRule,
    pub axis: PauliAxis,
}

impl Default for NoiseTemplate {
    fn default() -> Self {
        NoiseTemplate {
            enabled: true,
            site: SiteRule::Center,
            time: TimeRule::Fraction(0.05),
            axis: PauliAxis::Y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    Exact,
    Mps,
    FreeFermion,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialStateChoice {
    /// Product ground state where the start point has one; engine ground
    /// state otherwise.
    Auto,
    /// Engine ground-state routine regardless of the start point.
    Ground,
    /// Néel product |↑↓↑↓…⟩.
    Neel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpsSettings {
    /// Relative discarded-weight cutoff per bond truncation.
    pub cutoff: f64,
    /// Hard bond-dimension cap; exceeding it is a capacity error.
    pub chi_cap: usize,
}

impl Default for MpsSettings {
    fn default() -> Self {
        MpsSettings { cutoff: 1e-8, chi_cap: 512 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservablePlan {
    /// Target number of recorded rows over the run (endpoints included).
    pub samples: usize,
    /// Largest excitation index reported individually; the tail goes to p_rest.
    pub k_max: usize,
    /// Record k-excitation populations (needs a product reference state).
    pub excitations: bool,
    /// Record ground-space fidelity (exact engine).
    pub fidelity: bool,
    /// Record full eigenbasis populations at sample times (exact engine).
    pub eigen_populations: bool,
    /// Target number of rows carrying populations (they cost more than energies).
    pub population_samples: usize,
}

impl Default for ObservablePlan {
    fn default() -> Self {
        ObservablePlan {
            samples: 100,
            k_max: 3,
            excitations: true,
            fidelity: false,
            eigen_populations: false,
            population_samples: 16,
        }
    }
}

/// Declarative description of a family of runs: one per entry of `sizes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: ModelFamily,
    pub sizes: Vec<usize>,
    /// Path vertices; a closed loop repeats the first vertex at the end.
    pub vertices: Vec<Couplings>,
    pub t_rule: TRule,
    pub dt: f64,
    pub noise: NoiseTemplate,
    pub engine: EngineChoice,
    pub initial: InitialStateChoice,
    pub mps: MpsSettings,
    pub observables: ObservablePlan,
    pub seed: u64,
}

/// A config instantiated at one size.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub schedule: SweepSchedule,
    pub noise: Option<NoiseEvent>,
    pub engine: EngineChoice,
}

/// Hard cap of the dense engine (see `exact`).
pub const DENSE_EVOLVE_CAP: usize = 14;

impl ExperimentConfig {
    /// All invariant violations, empty iff the config is runnable.
    /// Never fails; reports every problem found.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.sizes.is_empty() {
            out.push("sizes list is empty".into());
        }
        for &n in &self.sizes {
            if n < 2 {
                out.push(format!("n must be ≥ 2, got {n}"));
            }
        }
        if self.vertices.len() < 2 {
            out.push("schedule needs at least two vertices".into());
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if !v.is_finite() {
                out.push(format!("vertex {i} has a non-finite coupling"));
            }
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            out.push(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.mps.cutoff > 0.0 && self.mps.cutoff < 1.0) {
            out.push(format!("mps cutoff must be in (0, 1), got {}", self.mps.cutoff));
        }
        if self.mps.chi_cap < 2 {
            out.push(format!("mps chi cap must be ≥ 2, got {}", self.mps.chi_cap));
        }
        if self.observables.samples == 0 {
            out.push("observables.samples must be ≥ 1".into());
        }
        if matches!(self.engine, EngineChoice::FreeFermion) {
            if self.family != ModelFamily::Zzxz {
                out.push("free-fermion engine requires the ZZXZ family".into());
            }
            for (i, v) in self.vertices.iter().enumerate() {
                if v.axial != 0.0 {
                    out.push(format!("free-fermion engine requires Bz=0 (vertex {i} has Bz={})", v.axial));
                }
            }
            if self.initial == InitialStateChoice::Neel {
                out.push("free-fermion engine cannot start from the Néel state".into());
            }
        }
        if matches!(self.engine, EngineChoice::Exact) {
            for &n in &self.sizes {
                if n > DENSE_EVOLVE_CAP {
                    out.push(format!("exact engine capped at n ≤ {DENSE_EVOLVE_CAP}, got {n}"));
                }
            }
        }
        for &n in &self.sizes {
            if self.observables.k_max > n {
                out.push(format!("k_max {} exceeds n = {n}", self.observables.k_max));
            }
            let total = self.t_rule.evaluate(n) * (self.vertices.len() - 1).max(1) as f64;
            if !(self.t_rule.evaluate(n) > 0.0) {
                out.push(format!("leg duration must be positive at n = {n}"));
            }
            if self.noise.enabled {
                let t = self.noise.time.evaluate(total);
                if t < 0.0 || t > total + 1e-9 * (1.0 + total) {
                    out.push(format!("noise time {t} outside [0, {total}] at n = {n}"));
                }
                let site = self.noise.site.evaluate(n);
                if site >= n {
                    out.push(format!("noise site {site} out of range for n = {n}"));
                }
            }
        }
        out
    }

    /// Materialize the template at one size. The engine choice `Auto`
    /// resolves to: exact when it fits, else free-fermion on the Bz = 0
    /// ZZXZ line, else MPS.
    pub fn resolve(&self, n: usize) -> Result<ResolvedRun> {
        let diags = self.validate();
        if let Some(d) = diags.first() {
            return Err(CoreError::Invalid(d.clone()));
        }
        if !self.sizes.contains(&n) {
            return Err(CoreError::Invalid(format!("n = {n} not among configured sizes")));
        }
        let schedule = SweepSchedule::new(
            self.family,
            n,
            self.vertices.clone(),
            self.t_rule.evaluate(n),
            self.dt,
        )?;
        let noise = if self.noise.enabled {
            Some(NoiseEvent {
                t_apply: self.noise.time.evaluate(schedule.total_duration()),
                site: self.noise.site.evaluate(n),
                axis: self.noise.axis,
                enabled: true,
            })
        } else {
            None
        };
        let engine = match self.engine {
            EngineChoice::Auto => {
                let on_tfim_line = self.family == ModelFamily::Zzxz
                    && self.vertices.iter().all(|v| v.axial == 0.0);
                if n <= 12 {
                    EngineChoice::Exact
                } else if on_tfim_line {
                    EngineChoice::FreeFermion
                } else {
                    EngineChoice::Mps
                }
            }
            e => e,
        };
        Ok(ResolvedRun { schedule, noise, engine })
    }
}

/// One normalized local state per site; `[a, b]` means a|0⟩ + b|1⟩ with
/// |0⟩ = spin up (Z = +1).
pub type LocalSpinor = [C64; 2];

/// Spinor orthogonal to `s`, fixing the (same, flip) basis of a reference.
pub fn flip_spinor(s: &LocalSpinor) -> LocalSpinor {
    [-s[1].conj(), s[0].conj()]
}

/// Néel product state |↑↓↑↓…⟩ (up on even sites).
pub fn neel_product(n: usize) -> Vec<LocalSpinor> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    (0..n)
        .map(|i| if i % 2 == 0 { [one, zero] } else { [zero, one] })
        .collect()
}

/// Ground spinor of the single-site field term bx·X + bz·Z.
pub fn field_ground_spinor(bx: f64, bz: f64) -> Option<LocalSpinor> {
    let r = (bx * bx + bz * bz).sqrt();
    if r < 1e-14 {
        return None;
    }
    // Eigenvector for eigenvalue −r of [[bz, bx], [bx, −bz]]; the two
    // algebraically equivalent forms are chosen to avoid cancellation.
    let (a, b) = if bz > 0.0 { (bx, -r - bz) } else { (bz - r, bx) };
    let norm = (a * a + b * b).sqrt();
    Some([C64::new(a / norm, 0.0), C64::new(b / norm, 0.0)])
}

/// Exact product ground state of the schedule's start point, when one exists:
/// field-only points (J = 0, and Jz = 0 for Heisenberg) and the pure
/// antiferromagnetic point (Bx = Bz = 0, J > 0, Néel chosen within the
/// degenerate doublet). `Neel` forces the Néel product.
pub fn initial_product(
    schedule: &SweepSchedule,
    choice: InitialStateChoice,
) -> Option<Vec<LocalSpinor>> {
    match choice {
        InitialStateChoice::Ground => None,
        InitialStateChoice::Neel => Some(neel_product(schedule.n)),
        InitialStateChoice::Auto => {
            let start = schedule.params_at_clamped(0.0).params;
            match schedule.family {
                ModelFamily::Zzxz => {
                    if start.j == 0.0 {
                        let s = field_ground_spinor(start.bx, start.axial)?;
                        Some(vec![s; schedule.n])
                    } else if start.bx == 0.0 && start.axial == 0.0 && start.j > 0.0 {
                        Some(neel_product(schedule.n))
                    } else {
                        None
                    }
                }
                ModelFamily::HeisenbergX => {
                    if start.j == 0.0 && start.axial == 0.0 {
                        let s = field_ground_spinor(start.bx, 0.0)?;
                        Some(vec![s; schedule.n])
                    } else {
                        None
                    }
                }
            }
        }
    }
}
