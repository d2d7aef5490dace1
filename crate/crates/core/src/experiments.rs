//! Canned, reproducible experiments: conservation over long reaction runs,
//! the time-step degradation sweep, brute-force identity checks on small
//! lattices, order-of-accuracy fits, qualitative shape evolution and the
//! even/odd lattice comparison.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evolution::{
    euler_step, even_naive_step, exact_step_with, EulerPath, EvolutionConfig, Propagator, Scheme,
};
use crate::kernel::{kernel_f, kernel_f_spectral, kernel_f_squared_spectral, kernel_g, kernel_g_spectral, KernelTable};
use crate::lattice::{Lattice, Parity};
use crate::observables::{
    drift_velocity, gaussian_shape_residual, high_frequency_fraction, local_maxima,
    momentum_expectation_spectral, position_mean, position_spread,
};
use crate::spectral::SpectralBasis;
use crate::state::{gaussian_state, random_state, uniform_state, FieldState, Shape, StateSpec};

pub const DEFAULT_N_SITES: usize = 801;
pub const RUN_STEPS: usize = 1000;
pub const TABLE_TAUS: [f64; 3] = [1e-3, 5e-3, 1e-2];
pub const DEFAULT_SEED: u64 = 42;

/// Relative-variation bands for the 1000-step reaction runs.
pub mod bands {
    pub const GAUSSIAN_FINE: f64 = 1e-5;
    pub const UNIFORM_FINE: f64 = 4e-4;
    pub const RANDOM_FINE: (f64, f64) = (0.004, 0.4);
    pub const MEDIUM: f64 = 1e-2;
    pub const RANDOM_DEGRADATION: f64 = 10.0;
    pub const GAUSSIAN_COARSE: f64 = 1e-3;
}

pub const IDENTITY_TOLERANCE_M_DRIFT: f64 = 1e-10;
pub const IDENTITY_TOLERANCE_CONVOLUTION: f64 = 1e-8;
pub const IDENTITY_TOLERANCE_COMMUTATOR: f64 = 1e-8;
pub const IDENTITY_TOLERANCE_P_DRIFT: f64 = 1e-8;
pub const KERNEL_TOLERANCE: f64 = 1e-9;
pub const ORDER_TARGET: f64 = 2.0;
pub const ORDER_TOLERANCE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Limit {
    Below { max: f64 },
    Within { min: f64, max: f64 },
    AtLeast { min: f64 },
    /// Reported only.
    Info,
}

impl Limit {
    pub fn admits(&self, value: f64) -> bool {
        match *self {
            Limit::Below { max } => value < max,
            Limit::Within { min, max } => value >= min && value <= max,
            Limit::AtLeast { min } => value >= min,
            Limit::Info => true,
        }
    }

    fn describe(&self) -> String {
        match *self {
            Limit::Below { max } => format!("< {max:.3e}"),
            Limit::Within { min, max } => format!("in [{min:.3e}, {max:.3e}]"),
            Limit::AtLeast { min } => format!(">= {min:.3e}"),
            Limit::Info => "(info)".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: Limit,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, limit: Limit) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value.is_finite() && limit.admits(value) || matches!(limit, Limit::Info),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub n_sites: usize,
    pub lattice_constant: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub n_steps: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_variation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_variation: Option<f64>,
    pub checks: Vec<Check>,
}

impl ExperimentReport {
    fn new(scenario: impl Into<String>, lattice: &Lattice, n_steps: usize, seed: u64) -> Self {
        Self {
            scenario: scenario.into(),
            n_sites: lattice.n_sites(),
            lattice_constant: lattice.lattice_constant(),
            n_steps,
            seed,
            ..Default::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: impl Into<String>, value: f64, limit: Limit) {
        self.checks.push(Check::new(name, value, limit));
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{} (N={}, a={}", self.scenario, self.n_sites, self.lattice_constant);
        if let Some(tau) = self.tau {
            let _ = write!(out, ", tau={tau}");
        }
        let _ = writeln!(out, ", steps={}, seed={})", self.n_steps, self.seed);
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let status = match (c.limit, c.passed) {
                (Limit::Info, _) => "INFO",
                (_, true) => "PASS",
                (_, false) => "FAIL",
            };
            let _ = writeln!(
                out,
                "  {:<width$}  {:>14.6e}  {:<28}  {}",
                c.name,
                c.value,
                c.limit.describe(),
                status
            );
        }
        out
    }
}

pub fn reports_to_json(reports: &[ExperimentReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

/// Initial states used by the tolerance-table runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub n_sites: usize,
    pub lattice_constant: f64,
    pub gaussian: StateSpec,
    pub uniform: StateSpec,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            n_sites: DEFAULT_N_SITES,
            lattice_constant: 1.0,
            gaussian: StateSpec::gaussian(0, 10.0, 20),
            uniform: StateSpec::uniform(0, 50, 20),
        }
    }
}

impl ScenarioParams {
    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.n_sites, self.lattice_constant)
    }

    pub fn initial_state(&self, shape: Shape, seed: u64) -> Result<FieldState> {
        let lattice = self.lattice()?;
        match shape {
            Shape::Gaussian => self.gaussian.build(&lattice),
            Shape::Uniform => self.uniform.build(&lattice),
            Shape::Random => Ok(random_state(&lattice, seed)),
        }
    }
}

/// Tolerance for a 1000-step run at `tau`. The random row at the medium step
/// needs the fine-step random variation as its baseline.
pub fn table_band(shape: Shape, tau: f64, random_fine: Option<f64>) -> Limit {
    let is = |x: f64| (tau - x).abs() <= 1e-12 * x;
    match shape {
        Shape::Gaussian if is(1e-3) => Limit::Below { max: bands::GAUSSIAN_FINE },
        Shape::Uniform if is(1e-3) => Limit::Below { max: bands::UNIFORM_FINE },
        Shape::Random if is(1e-3) => Limit::Within {
            min: bands::RANDOM_FINE.0,
            max: bands::RANDOM_FINE.1,
        },
        Shape::Gaussian | Shape::Uniform if is(5e-3) => Limit::Below { max: bands::MEDIUM },
        Shape::Random if is(5e-3) => match random_fine {
            Some(base) => Limit::AtLeast {
                min: bands::RANDOM_DEGRADATION * base,
            },
            None => Limit::Info,
        },
        Shape::Gaussian if is(1e-2) => Limit::Below { max: bands::GAUSSIAN_COARSE },
        _ => Limit::Info,
    }
}

/// Relative variations of `M` and `<V>` over a reaction run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Variation {
    pub m: f64,
    pub v: f64,
}

impl Variation {
    pub fn worst(&self) -> f64 {
        self.m.max(self.v)
    }
}

/// Runs the reaction process and tracks `M` and `<V>` at every step.
pub fn conservation_run(state: &FieldState, tau: f64, n_steps: usize) -> Result<Variation> {
    let lattice = *state.lattice();
    let propagator = Propagator::new(&lattice, EvolutionConfig::new(tau, Scheme::Euler))?;
    let kernels = propagator.kernels();
    let m0 = state.norm_m();
    let v0 = drift_velocity(state, kernels)?;
    let (mut dm, mut dv) = (0.0f64, 0.0f64);
    let mut current = state.clone();
    for _ in 0..n_steps {
        current = propagator.step(&current)?;
        dm = dm.max((current.norm_m() - m0).abs());
        dv = dv.max((drift_velocity(&current, kernels)? - v0).abs());
    }
    Ok(Variation {
        m: dm / m0.abs(),
        v: if dv == 0.0 { 0.0 } else { dv / v0.abs() },
    })
}

/// One row of the tolerance table.
pub fn table_run(
    shape: Shape,
    tau: f64,
    n_steps: usize,
    seed: u64,
    params: &ScenarioParams,
) -> Result<ExperimentReport> {
    table_row(shape, tau, n_steps, seed, params, None)
}

fn table_row(
    shape: Shape,
    tau: f64,
    n_steps: usize,
    seed: u64,
    params: &ScenarioParams,
    random_fine: Option<f64>,
) -> Result<ExperimentReport> {
    let state = params.initial_state(shape, seed)?;
    let variation = conservation_run(&state, tau, n_steps)?;
    let mut report = ExperimentReport::new(format!("{shape} reaction run"), state.lattice(), n_steps, seed);
    report.tau = Some(tau);
    report.m_variation = Some(variation.m);
    report.v_variation = Some(variation.v);
    // Bands refer to the 1000-step horizon; other horizons are reported only.
    let limit = if n_steps == RUN_STEPS {
        table_band(shape, tau, random_fine)
    } else {
        Limit::Info
    };
    report.push("relative variation of M", variation.m, limit);
    report.push("relative variation of <V>", variation.v, limit);
    Ok(report)
}

/// The 3 shapes × 3 time steps grid, rows ordered by `tau` then shape.
pub fn conservation_table(n_steps: usize, seed: u64, params: &ScenarioParams) -> Result<Vec<ExperimentReport>> {
    let shapes = [Shape::Gaussian, Shape::Uniform, Shape::Random];
    let grid: Vec<(f64, Shape)> = TABLE_TAUS
        .iter()
        .flat_map(|&tau| shapes.iter().map(move |&s| (tau, s)))
        .collect();
    let rows: Vec<Result<ExperimentReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = grid
            .iter()
            .map(|&(tau, shape)| scope.spawn(move || table_row(shape, tau, n_steps, seed, params, None)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
    });
    let mut rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let random_fine = rows
        .iter()
        .find(|r| r.scenario.starts_with("random") && r.tau == Some(1e-3))
        .and_then(|r| r.m_variation.zip(r.v_variation))
        .map(|(m, v)| m.max(v));
    if n_steps == RUN_STEPS {
        for row in rows.iter_mut().filter(|r| r.scenario.starts_with("random") && r.tau == Some(5e-3)) {
            let limit = table_band(Shape::Random, 5e-3, random_fine);
            let (m, v) = (row.m_variation.unwrap(), row.v_variation.unwrap());
            row.checks = vec![
                Check::new("relative variation of M", m, limit),
                Check::new("relative variation of <V>", v, Limit::Info),
                Check::new("worst variation", m.max(v), limit),
            ];
        }
    }
    Ok(rows)
}

/// Larger time steps at 1000 steps: gaussian and uniform within 1% at
/// `τ = 0.005`, gaussian within 0.1% at `τ = 0.010`, random at least ten times
/// worse at `τ = 0.005` than at `τ = 0.001`.
pub fn tau_degradation_run(seed: u64, params: &ScenarioParams) -> Result<ExperimentReport> {
    let lattice = params.lattice()?;
    let mut report = ExperimentReport::new("time-step degradation", &lattice, RUN_STEPS, seed);
    let run = |shape, tau| -> Result<Variation> {
        conservation_run(&params.initial_state(shape, seed)?, tau, RUN_STEPS)
    };
    let random_fine = run(Shape::Random, 1e-3)?;
    for shape in [Shape::Gaussian, Shape::Uniform] {
        let v = run(shape, 5e-3)?;
        report.push(format!("{shape} tau=0.005 M"), v.m, Limit::Below { max: bands::MEDIUM });
        report.push(format!("{shape} tau=0.005 <V>"), v.v, Limit::Below { max: bands::MEDIUM });
    }
    let random_medium = run(Shape::Random, 5e-3)?;
    report.push("random tau=0.001 worst", random_fine.worst(), Limit::Info);
    report.push("random tau=0.005 worst", random_medium.worst(), Limit::Info);
    report.push(
        "random degradation factor (M)",
        random_medium.m / random_fine.m,
        Limit::AtLeast {
            min: bands::RANDOM_DEGRADATION,
        },
    );
    let coarse = run(Shape::Gaussian, 1e-2)?;
    report.push("gaussian tau=0.010 M", coarse.m, Limit::Below { max: bands::GAUSSIAN_COARSE });
    report.push("gaussian tau=0.010 <V>", coarse.v, Limit::Below { max: bands::GAUSSIAN_COARSE });
    for shape in [Shape::Uniform, Shape::Random] {
        report.push(format!("{shape} tau=0.010 worst"), run(shape, 1e-2)?.worst(), Limit::Info);
    }
    Ok(report)
}

/// Largest closed-form vs spectral-sum discrepancy over `d ∈ [-2L, 2L]`,
/// scaled by `F(0)` and `N` respectively. `perturbation` (in units of `F(0)`)
/// is added to the closed form of `F` as a negative control.
pub fn kernel_equivalence(lattice: &Lattice, perturbation: f64) -> Result<(f64, f64)> {
    let f0 = kernel_f(0, lattice);
    let n = lattice.n_sites() as f64;
    let reach = 2 * lattice.half_width();
    let (mut worst_f, mut worst_g) = (0.0f64, 0.0f64);
    for d in -reach..=reach {
        let f = kernel_f(d, lattice) + perturbation * f0;
        worst_f = worst_f.max((f - kernel_f_spectral(d, lattice)?).abs() / f0);
        worst_g = worst_g.max((kernel_g(d, lattice) - kernel_g_spectral(d, lattice)?).abs() / n);
    }
    Ok((worst_f, worst_g))
}

/// Dense `N × N` matrix `K(s - r)` over storage offsets.
fn kernel_matrix(lattice: &Lattice, kernel: impl Fn(i64, &Lattice) -> f64) -> Vec<Vec<f64>> {
    lattice
        .sites()
        .map(|s| lattice.sites().map(|r| kernel(s - r, lattice)).collect())
        .collect()
}

fn mat_mul(x: &[Vec<f64>], y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| x[i][k] * y[k][j]).sum()).collect())
        .collect()
}

/// `Σ_{r,u} c_r c*_u W(r, u)`.
fn quadratic_form(c: &[Complex64], w: &[Vec<f64>]) -> Complex64 {
    c.iter()
        .enumerate()
        .map(|(r, cr)| {
            c.iter()
                .enumerate()
                .map(|(u, cu)| cr * cu.conj() * w[r][u])
                .sum::<Complex64>()
        })
        .sum()
}

/// Brute-force prediction `τ² g⁴ Σ_{r,u} c_r c*_u Σ_s F(r-s) F(s-u)` of the
/// change of `M` in one reaction step.
pub fn predicted_m_drift(state: &FieldState, tau: f64) -> f64 {
    let lat = state.lattice();
    let f = kernel_matrix(lat, kernel_f);
    let ff = mat_mul(&f, &f);
    let g = lat.reciprocal_constant();
    (tau * tau * g.powi(4) * quadratic_form(&state.amplitudes(), &ff)).re
}

/// Brute-force prediction `-i τ² g⁵ Σ_{u,v} c*_u c_v (F G F)(u, v)` of the
/// change of `<P>` in one reaction step.
pub fn predicted_p_drift(state: &FieldState, tau: f64) -> f64 {
    let lat = state.lattice();
    let f = kernel_matrix(lat, kernel_f);
    let gm = kernel_matrix(lat, kernel_g);
    let fgf = mat_mul(&mat_mul(&f, &gm), &f);
    let g = lat.reciprocal_constant();
    let c = state.amplitudes();
    // Σ c*_u c_v W(u,v) is the conjugate of quadratic_form's ordering.
    let q = quadratic_form(&c, &fgf).conj();
    (-Complex64::i() * tau * tau * g.powi(5) * q).re
}

/// Large-`N` approximation `τ² π⁴/5 (2 Σ_{r≠u} c_r c*_u (-1)^{r-u}/(r-u)² + M)`
/// of the one-step change of `M`.
pub fn large_n_m_drift_estimate(state: &FieldState, tau: f64) -> f64 {
    let c = state.amplitudes();
    let sites: Vec<i64> = state.lattice().sites().collect();
    let mut cross = 0.0;
    for (i, cr) in c.iter().enumerate() {
        for (j, cu) in c.iter().enumerate() {
            if i != j {
                let d = sites[i] - sites[j];
                let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                cross += (cr * cu.conj()).re * sign / (d * d) as f64;
            }
        }
    }
    let pi4_5 = std::f64::consts::PI.powi(4) / 5.0;
    tau * tau * pi4_5 * (2.0 * cross + state.norm_m())
}

#[derive(Clone, Debug)]
pub struct IdentityOptions {
    /// Odd lattice sizes for the brute-force identities.
    pub n_sites_list: Vec<usize>,
    /// Odd lattice sizes for the kernel oracle comparison.
    pub kernel_sizes: Vec<usize>,
    pub n_states: usize,
    pub seed: u64,
    /// Added to the closed form of `F` (units of `F(0)`) in the kernel check.
    pub kernel_perturbation: f64,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        Self {
            n_sites_list: vec![3, 5, 7, 9, 11, 13, 15, 17, 19, 21],
            kernel_sizes: vec![3, 5, 7, 21, 101, 801],
            n_states: 50,
            seed: DEFAULT_SEED,
            kernel_perturbation: 0.0,
        }
    }
}

impl IdentityOptions {
    /// All odd sizes up to `max_n` for the identities; the kernel oracle also
    /// covers 101 and 801.
    pub fn up_to(max_n: usize) -> Self {
        let small: Vec<usize> = (3..=max_n).step_by(2).collect();
        let mut kernel_sizes = small.clone();
        kernel_sizes.extend([101, 801]);
        Self {
            n_sites_list: small,
            kernel_sizes,
            ..Self::default()
        }
    }
}

/// Residuals of the exact identities behind the process.
pub fn identity_suite(options: &IdentityOptions) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(
        "identity suite",
        &Lattice::new(*options.n_sites_list.iter().max().unwrap_or(&3), 1.0)?,
        1,
        options.seed,
    );
    for &n in &options.kernel_sizes {
        let lat = Lattice::new(n, 1.0)?;
        let (f, g) = kernel_equivalence(&lat, options.kernel_perturbation)?;
        report.push(format!("kernel equivalence F N={n}"), f, Limit::Below { max: KERNEL_TOLERANCE });
        report.push(format!("kernel equivalence G N={n}"), g, Limit::Below { max: KERNEL_TOLERANCE });
    }
    for &n in &options.n_sites_list {
        let lat = Lattice::new(n, 1.0)?;
        report.push(
            format!("convolution F*F N={n}"),
            convolution_residual(&lat)?,
            Limit::Below {
                max: IDENTITY_TOLERANCE_CONVOLUTION,
            },
        );
        report.push(
            format!("commutator [F,G] N={n}"),
            commutator_residual(&lat),
            Limit::Below {
                max: IDENTITY_TOLERANCE_COMMUTATOR,
            },
        );
        let (dm, dp) = drift_identity_residuals(&lat, options.n_states, options.seed)?;
        report.push(
            format!("M drift identity N={n}"),
            dm,
            Limit::Below {
                max: IDENTITY_TOLERANCE_M_DRIFT,
            },
        );
        report.push(
            format!("<P> drift identity N={n}"),
            dp,
            Limit::Below {
                max: IDENTITY_TOLERANCE_P_DRIFT,
            },
        );
    }
    Ok(report)
}

/// `max_{r,u} |Σ_s F(r-s)F(s-u) - (1/N) Σ_k k⁴ e^{i2πk(r-u)/N}|`, relative to
/// the largest entry of the right-hand side.
pub fn convolution_residual(lattice: &Lattice) -> Result<f64> {
    let scale = kernel_f_squared_spectral(0, lattice)?;
    let mut worst = 0.0f64;
    for r in lattice.sites() {
        for u in lattice.sites() {
            let lhs: f64 = lattice.sites().map(|s| kernel_f(r - s, lattice) * kernel_f(s - u, lattice)).sum();
            let rhs = kernel_f_squared_spectral(r - u, lattice)?;
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok(worst)
}

/// `max_{u,r} |Σ_s [F(u-s)G(s-r) - G(u-s)F(s-r)]|` in units of `F(0)²`.
pub fn commutator_residual(lattice: &Lattice) -> f64 {
    let f0 = kernel_f(0, lattice);
    let mut worst = 0.0f64;
    for u in lattice.sites() {
        for r in lattice.sites() {
            let sum: f64 = lattice
                .sites()
                .map(|s| {
                    kernel_f(u - s, lattice) * kernel_g(s - r, lattice)
                        - kernel_g(u - s, lattice) * kernel_f(s - r, lattice)
                })
                .sum();
            worst = worst.max(sum.abs() / (f0 * f0));
        }
    }
    worst
}

/// Worst relative mismatch between measured and predicted one-step changes
/// of `M` and of `<P>` over `n_states` random states, each evaluated at
/// `M = 1` and `M = 7`.
pub fn drift_identity_residuals(lattice: &Lattice, n_states: usize, seed: u64) -> Result<(f64, f64)> {
    let kernels = KernelTable::new(lattice);
    let basis = SpectralBasis::new(lattice);
    // Keeps τ g² N² = 1/4, well inside the admissible range.
    let tau = 0.25 / (lattice.reciprocal_constant() * lattice.n_sites() as f64).powi(2);
    let (mut worst_m, mut worst_p) = (0.0f64, 0.0f64);
    for i in 0..n_states {
        let base = random_state(lattice, seed.wrapping_add(i as u64));
        for scale in [1.0, 7f64.sqrt()] {
            let state = base.scaled(scale);
            let next = euler_step(&state, tau, &kernels)?;
            let measured_m = next.norm_m() - state.norm_m();
            let predicted_m = predicted_m_drift(&state, tau);
            worst_m = worst_m.max((measured_m - predicted_m).abs() / predicted_m.abs());

            let p0 = momentum_expectation_spectral(&basis.spectrum(&state));
            let p1 = momentum_expectation_spectral(&basis.spectrum(&next));
            let predicted_p = predicted_p_drift(&state, tau);
            let scale_p = predicted_p.abs().max(1e-3 * predicted_m.abs());
            worst_p = worst_p.max(((p1 - p0) - predicted_p).abs() / scale_p);
        }
    }
    Ok((worst_m, worst_p))
}

/// Compares the large-`N` estimate of the one-step `M` change with the exact
/// spectral value `τ² Σ_k (g k)⁴ |ĉ_k|²`. Reported only.
pub fn large_n_diagnostic(state: &FieldState, tau: f64) -> ExperimentReport {
    let lat = *state.lattice();
    let basis = SpectralBasis::new(&lat);
    let g = lat.reciprocal_constant();
    let exact: f64 = basis
        .spectrum(state)
        .coefficients()
        .iter()
        .zip(lat.momentum_labels())
        .map(|(c, k)| tau * tau * (g * k).powi(4) * c.norm_sqr())
        .sum();
    let estimate = large_n_m_drift_estimate(state, tau);
    let mut report = ExperimentReport::new("large-N M drift estimate", &lat, 1, 0);
    report.tau = Some(tau);
    report.push("exact one-step M change", exact, Limit::Info);
    report.push("large-N estimate", estimate, Limit::Info);
    report.push("estimate / exact", estimate / exact, Limit::Info);
    report
}

/// Least-squares slope of `ln(err)` against `ln(tau)`.
pub fn fitted_order(taus: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub const ORDER_TAUS: [f64; 4] = [4e-3, 2e-3, 1e-3, 5e-4];

/// One-step errors of the reaction step against the exact evolution.
#[derive(Clone, Debug, PartialEq)]
pub struct OneStepErrors {
    pub state_error: f64,
    pub m_change: f64,
    pub p_change: f64,
}

pub fn one_step_errors(state: &FieldState, tau: f64) -> Result<OneStepErrors> {
    let lat = *state.lattice();
    let kernels = KernelTable::new(&lat);
    let basis = SpectralBasis::new(&lat);
    let euler = euler_step(state, tau, &kernels)?;
    let exact = exact_step_with(state, tau, &basis);
    let p0 = momentum_expectation_spectral(&basis.spectrum(state));
    let p1 = momentum_expectation_spectral(&basis.spectrum(&euler));
    Ok(OneStepErrors {
        state_error: euler.distance(&exact) / state.norm_m().sqrt(),
        m_change: (euler.norm_m() - state.norm_m()).abs(),
        p_change: (p1 - p0).abs(),
    })
}

/// Fitted convergence orders under `τ`-halving on the default gaussian.
pub fn order_of_accuracy(params: &ScenarioParams) -> Result<ExperimentReport> {
    let state = params.initial_state(Shape::Gaussian, 0)?;
    let errors = ORDER_TAUS
        .iter()
        .map(|&tau| one_step_errors(&state, tau))
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport::new("order of accuracy", state.lattice(), 1, 0);
    let limit = Limit::Within {
        min: ORDER_TARGET - ORDER_TOLERANCE,
        max: ORDER_TARGET + ORDER_TOLERANCE,
    };
    let series: [(&str, Vec<f64>); 3] = [
        ("order |euler - exact|", errors.iter().map(|e| e.state_error).collect()),
        ("order |dM| per step", errors.iter().map(|e| e.m_change).collect()),
        ("order |d<P>| per step", errors.iter().map(|e| e.p_change).collect()),
    ];
    for (name, errs) in series {
        report.push(name, fitted_order(&ORDER_TAUS, &errs), limit);
    }
    Ok(report)
}

/// Shape evolution: a moving gaussian keeps its shape and spreads, a flat
/// window grows side lobes, and the smoothness of a random state is reported.
pub fn qualitative_shape_run(seed: u64) -> Result<ExperimentReport> {
    let lattice = Lattice::new(DEFAULT_N_SITES, 1.0)?;
    let mut report = ExperimentReport::new("qualitative shape", &lattice, RUN_STEPS, seed);

    // Moving gaussian under exact evolution to t = 50.
    let sigma = 10.0;
    let exact_cfg = EvolutionConfig::new(0.05, Scheme::Exact);
    let prop = Propagator::new(&lattice, exact_cfg)?;
    let mut state = gaussian_state(&lattice, 0, sigma, 20)?;
    let border = lattice.half_width() as f64 + 0.5;
    let (mut worst_residual, mut min_growth) = (0.0f64, f64::INFINITY);
    let mut last_spread = position_spread(&state)?;
    for step in 1..=RUN_STEPS {
        state = prop.step(&state)?;
        if step % 10 != 0 {
            continue;
        }
        let spread = position_spread(&state)?;
        let mean = position_mean(&state)?;
        if border - mean.abs() < 10.0 * spread {
            break;
        }
        worst_residual = worst_residual.max(gaussian_shape_residual(&state)?);
        min_growth = min_growth.min(spread - last_spread);
        last_spread = spread;
    }
    report.push("gaussian shape residual (max)", worst_residual, Limit::Below { max: 1e-2 });
    report.push("gaussian width growth (min increment)", min_growth, Limit::AtLeast { min: f64::MIN_POSITIVE });
    report.push("gaussian final width", last_spread, Limit::Info);

    // Resting gaussian stays put.
    let mut rest = gaussian_state(&lattice, 0, sigma, 0)?;
    let mut drift = 0.0f64;
    for _ in 0..100 {
        rest = prop.step(&rest)?;
        drift = drift.max(position_mean(&rest)?.abs());
    }
    report.push("resting gaussian mean shift", drift, Limit::Below { max: 1e-6 });

    // Flat window under the reaction process.
    let euler = Propagator::new(&lattice, EvolutionConfig::new(1e-3, Scheme::Euler))?;
    let window = uniform_state(&lattice, 0, 25, 0)?;
    let before = local_maxima(&window.combined_distribution(), 1e-6);
    let after_state = euler.advance(&window, RUN_STEPS)?;
    let after = local_maxima(&after_state.combined_distribution(), 1e-6);
    report.push("uniform local maxima before", before as f64, Limit::Info);
    report.push("uniform new local maxima", after as f64 - before as f64, Limit::AtLeast { min: 2.0 });

    // Random state: spectral and position-space roughness, reported only.
    let noisy = random_state(&lattice, seed);
    let smoothed = euler.advance(&noisy, RUN_STEPS)?;
    let basis = euler.basis();
    report.push("random high-k fraction before", high_frequency_fraction(&basis.spectrum(&noisy)), Limit::Info);
    report.push("random high-k fraction after", high_frequency_fraction(&basis.spectrum(&smoothed)), Limit::Info);
    report.push("random roughness before", roughness(&noisy), Limit::Info);
    report.push("random roughness after", roughness(&smoothed), Limit::Info);
    Ok(report)
}

/// `Σ_s (ρ_{s+1} - ρ_s)² / Σ_s ρ_s²` for the combined distribution `ρ`.
pub fn roughness(state: &FieldState) -> f64 {
    let rho = state.combined_distribution();
    let n = rho.len();
    let diff: f64 = (0..n).map(|i| (rho[(i + 1) % n] - rho[i]).powi(2)).sum();
    diff / rho.iter().map(|r| r * r).sum::<f64>()
}

/// Deviations of the two parities from their unitary references.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityDeviation {
    pub even: f64,
    pub odd: f64,
}

impl ParityDeviation {
    pub fn ratio(&self) -> f64 {
        self.even / self.odd
    }
}

/// Evolves the same gaussian on an even lattice with the naive step and on an
/// odd lattice with the reaction step, and measures each against the exact
/// evolution on its own lattice (half-integer momenta for the even one).
pub fn even_odd_comparison(
    n_even: usize,
    n_odd: usize,
    center: i64,
    sigma: f64,
    n_steps: usize,
    tau: f64,
) -> Result<ParityDeviation> {
    let deviation = |lattice: Lattice| -> Result<f64> {
        let kernels = KernelTable::new(&lattice);
        let basis = SpectralBasis::new(&lattice);
        let start = gaussian_state(&lattice, lattice.wrap_index(center), sigma, 0)?;
        let mut model = start.clone();
        for _ in 0..n_steps {
            model = match lattice.parity() {
                Parity::EvenNaive => even_naive_step(&model, tau, &kernels)?,
                Parity::Odd => euler_step(&model, tau, &kernels)?,
            };
        }
        let reference = exact_step_with(&start, tau * n_steps as f64, &basis);
        Ok(model.distance(&reference))
    };
    Ok(ParityDeviation {
        even: deviation(Lattice::even_naive(n_even, 1.0)?)?,
        odd: deviation(Lattice::new(n_odd, 1.0)?)?,
    })
}

pub const EVEN_ODD_STEPS: usize = 100;
pub const EVEN_ODD_SIGMA: f64 = 5.0;
pub const WRAPPED_RATIO_MIN: f64 = 1e3;
pub const CONFINED_RATIO_MAX: f64 = 2.0;

/// Confined packet at the lattice centre and wrapped packet on the border.
pub fn even_odd_demo(n_even: usize, n_odd: usize) -> Result<ExperimentReport> {
    let tau = 1e-3;
    let odd = Lattice::new(n_odd, 1.0)?;
    let mut report = ExperimentReport::new(format!("even/odd comparison (even N={n_even})"), &odd, EVEN_ODD_STEPS, 0);
    report.tau = Some(tau);
    let confined = even_odd_comparison(n_even, n_odd, 0, EVEN_ODD_SIGMA, EVEN_ODD_STEPS, tau)?;
    let border = (n_even / 2) as i64;
    let wrapped = even_odd_comparison(n_even, n_odd, border, EVEN_ODD_SIGMA, EVEN_ODD_STEPS, tau)?;
    report.push("confined even deviation", confined.even, Limit::Info);
    report.push("confined odd deviation", confined.odd, Limit::Info);
    report.push(
        "confined even/odd ratio",
        confined.ratio(),
        Limit::Within {
            min: 1.0 / CONFINED_RATIO_MAX,
            max: CONFINED_RATIO_MAX,
        },
    );
    report.push("wrapped even deviation", wrapped.even, Limit::Info);
    report.push("wrapped odd deviation", wrapped.odd, Limit::Info);
    report.push("wrapped even/odd ratio", wrapped.ratio(), Limit::AtLeast { min: WRAPPED_RATIO_MIN });
    Ok(report)
}

/// Per-record comparison of the reaction process with the exact evolution
/// from the same initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub step: usize,
    pub state_distance: f64,
    pub m_euler: f64,
    pub m_exact: f64,
    pub drift_euler: f64,
    pub drift_exact: f64,
}

pub fn compare_schemes(
    state: &FieldState,
    tau: f64,
    n_steps: usize,
    record_every: usize,
    euler_path: EulerPath,
) -> Result<Vec<ComparisonRow>> {
    let lattice = *state.lattice();
    let mut cfg = EvolutionConfig::new(tau, Scheme::Euler);
    cfg.euler_path = euler_path;
    let euler = Propagator::new(&lattice, cfg)?;
    let exact = Propagator::new(&lattice, EvolutionConfig::new(tau, Scheme::Exact))?;
    let kernels = euler.kernels();
    let record_every = record_every.max(1);
    let row = |step, e: &FieldState, x: &FieldState| -> Result<ComparisonRow> {
        Ok(ComparisonRow {
            step,
            state_distance: e.distance(x),
            m_euler: e.norm_m(),
            m_exact: x.norm_m(),
            drift_euler: drift_velocity(e, kernels)?,
            drift_exact: drift_velocity(x, kernels)?,
        })
    };
    let (mut e, mut x) = (state.clone(), state.clone());
    let mut rows = vec![row(0, &e, &x)?];
    for step in 1..=n_steps {
        e = euler.step(&e)?;
        x = exact.step(&x)?;
        if step % record_every == 0 || step == n_steps {
            rows.push(row(step, &e, &x)?);
        }
    }
    Ok(rows)
}
