//! Time evolution: the linearized two-field reaction step and the exact
//! unitary `exp(-i P² t)` (`ħ = 2m = 1`), plus translation and the even-`N`
//! variant.
//!
//! The reaction step, written per field, is
//!
//! ```text
//! a_s ← a_s + τ g² Σ_{d=-L}^{L} b_[s+d] F(d)
//! b_s ← b_s - τ g² Σ_{d=-L}^{L} a_[s+d] F(d)
//! ```
//!
//! Every A particle seeds an alternating `B̄ B B̄ …` pattern around itself and
//! every B particle an `A Ā A …` pattern, with strength `F(d)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelTable;
use crate::lattice::{Lattice, Parity};
use crate::observables::{Checkpoint, Observer, TimeSeries};
use crate::spectral::SpectralBasis;
use crate::state::FieldState;

/// Hard ceiling on `τ g² N²` for the reaction step.
pub const TAU_LIMIT: f64 = 0.5;
/// Above this `τ g² N²` the linearization is flagged.
pub const TAU_WARNING: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Linearized reaction process.
    Euler,
    /// Exact unitary evolution.
    Exact,
}

/// How the reaction step is evaluated on odd lattices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EulerPath {
    /// O(N²) circular correlation against the `F` table.
    Direct,
    /// Multiplication by `1 - i τ (g k)²` in the momentum basis.
    #[default]
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub tau: f64,
    pub scheme: Scheme,
    pub parity_mode: Parity,
    #[serde(default)]
    pub euler_path: EulerPath,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepCheck {
    Ok,
    /// Admitted, but `τ g² N²` exceeds [`TAU_WARNING`].
    Coarse,
}

impl EvolutionConfig {
    pub fn new(tau: f64, scheme: Scheme) -> Self {
        Self {
            tau,
            scheme,
            parity_mode: Parity::Odd,
            euler_path: EulerPath::default(),
        }
    }

    /// `τ g² N²`, the linearization parameter.
    pub fn step_size_parameter(&self, lattice: &Lattice) -> f64 {
        let gn = lattice.reciprocal_constant() * lattice.n_sites() as f64;
        self.tau * gn * gn
    }

    pub fn validate(&self, lattice: &Lattice) -> Result<StepCheck> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("must be positive and finite, got {}", self.tau),
            });
        }
        if lattice.parity() != self.parity_mode {
            return Err(Error::ParityMismatch {
                operation: "evolution",
                expected: match self.parity_mode {
                    Parity::Odd => "odd",
                    Parity::EvenNaive => "even",
                },
            });
        }
        if self.scheme == Scheme::Exact {
            return Ok(StepCheck::Ok);
        }
        let x = self.step_size_parameter(lattice);
        if x >= TAU_LIMIT {
            return Err(Error::TimeStepTooLarge {
                value: x,
                limit: TAU_LIMIT,
            });
        }
        if x > TAU_WARNING {
            return Ok(StepCheck::Coarse);
        }
        Ok(StepCheck::Ok)
    }
}

fn check_lattice(state: &FieldState, kernels: &KernelTable) -> Result<()> {
    if state.lattice().same_geometry(kernels.lattice()) {
        Ok(())
    } else {
        Err(Error::LatticeMismatch)
    }
}

/// `out_i = Σ_j row[(j - i) mod N] x_j`, split into two contiguous runs.
fn circulant_apply(row: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let head: f64 = row[..n - i].iter().zip(&x[i..]).map(|(k, v)| k * v).sum();
        let tail: f64 = row[n - i..].iter().zip(&x[..i]).map(|(k, v)| k * v).sum();
        *o = head + tail;
    }
}

/// `F` at every wrapped displacement `m = 0..N`.
fn circulant_row(kernels: &KernelTable) -> Vec<f64> {
    let lat = kernels.lattice();
    (0..lat.n_sites() as i64)
        .map(|m| kernels.f(lat.wrap_index(m)))
        .collect()
}

fn reaction_step(state: &FieldState, tau: f64, kernels: &KernelTable) -> FieldState {
    let lat = *state.lattice();
    let n = lat.n_sites();
    let g = lat.reciprocal_constant();
    let row = circulant_row(kernels);
    let mut fb = vec![0.0; n];
    let mut fa = vec![0.0; n];
    circulant_apply(&row, state.b_field(), &mut fb);
    circulant_apply(&row, state.a_field(), &mut fa);
    let w = tau * g * g;
    let a = state.a_field().iter().zip(&fb).map(|(a, f)| a + w * f).collect();
    let b = state.b_field().iter().zip(&fa).map(|(b, f)| b - w * f).collect();
    FieldState::from_fields_unchecked(lat, a, b)
}

/// Reference O(N²) reaction step on an odd lattice.
pub fn euler_step(state: &FieldState, tau: f64, kernels: &KernelTable) -> Result<FieldState> {
    check_lattice(state, kernels)?;
    if !state.lattice().is_odd() {
        return Err(Error::ParityMismatch {
            operation: "euler_step",
            expected: "odd",
        });
    }
    Ok(reaction_step(state, tau, kernels))
}

/// The same step evaluated as `ĉ_k ← (1 - i τ (g k)²) ĉ_k`.
pub fn euler_step_spectral(state: &FieldState, tau: f64, basis: &SpectralBasis) -> Result<FieldState> {
    if !state.lattice().same_geometry(basis.lattice()) {
        return Err(Error::LatticeMismatch);
    }
    if !state.lattice().is_odd() {
        return Err(Error::ParityMismatch {
            operation: "euler_step_spectral",
            expected: "odd",
        });
    }
    Ok(basis.apply_diagonal(state, |p| Complex64::new(1.0, -tau * p * p)))
}

/// Reaction step on an even lattice with sites `[-N/2, N/2 - 1]`, the sum over
/// `d ∈ [-N/2, N/2]` taken modulo `N` with `F(±N/2) = 0` and no sign change
/// across the border. This is not the quantum evolution; see
/// [`exact_step`] on the same lattice for the reference.
pub fn even_naive_step(state: &FieldState, tau: f64, kernels: &KernelTable) -> Result<FieldState> {
    check_lattice(state, kernels)?;
    if state.lattice().parity() != Parity::EvenNaive {
        return Err(Error::ParityMismatch {
            operation: "even_naive_step",
            expected: "even",
        });
    }
    Ok(reaction_step(state, tau, kernels))
}

/// `exp(-i P² t)` applied in the momentum basis; exact for any `t`. On even
/// lattices this uses half-integer momenta, i.e. the sign-corrected model.
pub fn exact_step(state: &FieldState, t: f64) -> FieldState {
    exact_step_with(state, t, &SpectralBasis::new(state.lattice()))
}

pub fn exact_step_with(state: &FieldState, t: f64, basis: &SpectralBasis) -> FieldState {
    basis.apply_diagonal(state, |p| Complex64::from_polar(1.0, -p * p * t))
}

/// Cyclic shift by `steps` sites: the amplitude at `s` moves to `s + steps`.
pub fn translate(state: &FieldState, steps: i64) -> FieldState {
    let lat = *state.lattice();
    let n = lat.n_sites();
    let shift = steps.rem_euclid(n as i64) as usize;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        let j = (i + shift) % n;
        a[j] = state.a_field()[i];
        b[j] = state.b_field()[i];
    }
    FieldState::from_fields_unchecked(lat, a, b)
}

/// `exp(-i a steps P)` applied in the momentum basis.
pub fn translate_spectral(state: &FieldState, steps: i64) -> FieldState {
    let shift = state.lattice().lattice_constant() * steps as f64;
    SpectralBasis::new(state.lattice()).apply_diagonal(state, |p| Complex64::from_polar(1.0, -p * shift))
}

/// A configured stepping engine for one lattice.
#[derive(Clone, Debug)]
pub struct Propagator {
    config: EvolutionConfig,
    kernels: KernelTable,
    basis: SpectralBasis,
}

impl Propagator {
    pub fn new(lattice: &Lattice, config: EvolutionConfig) -> Result<Self> {
        if config.validate(lattice)? == StepCheck::Coarse {
            log::warn!(
                "tau*g^2*N^2 = {:.3} exceeds {TAU_WARNING}; the linearized step is coarse",
                config.step_size_parameter(lattice)
            );
        }
        Ok(Self {
            config,
            kernels: KernelTable::new(lattice),
            basis: SpectralBasis::new(lattice),
        })
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.config
    }

    pub fn kernels(&self) -> &KernelTable {
        &self.kernels
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn observer(&self) -> Observer {
        Observer::new(self.kernels.clone(), self.basis.clone())
    }

    pub fn step(&self, state: &FieldState) -> Result<FieldState> {
        let tau = self.config.tau;
        match (self.config.scheme, self.config.parity_mode) {
            (Scheme::Exact, _) => Ok(exact_step_with(state, tau, &self.basis)),
            (Scheme::Euler, Parity::EvenNaive) => even_naive_step(state, tau, &self.kernels),
            (Scheme::Euler, Parity::Odd) => match self.config.euler_path {
                EulerPath::Direct => euler_step(state, tau, &self.kernels),
                EulerPath::Spectral => euler_step_spectral(state, tau, &self.basis),
            },
        }
    }

    /// Applies `n_steps` steps and returns the final state.
    pub fn advance(&self, state: &FieldState, n_steps: usize) -> Result<FieldState> {
        let mut current = state.clone();
        for step in 1..=n_steps {
            current = self.step(&current)?;
            if !current.is_finite() {
                return Err(Error::NonFinite { step });
            }
        }
        Ok(current)
    }
}

/// Options for [`run_with`] beyond the record cadence.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Store the full state every this many steps (and at step 0).
    pub checkpoint_every: Option<usize>,
}

/// Evolves `state` for `n_steps`, recording observables at step 0, every
/// `record_every` steps, and at the final step.
pub fn run(
    state: &FieldState,
    config: EvolutionConfig,
    n_steps: usize,
    record_every: usize,
) -> Result<TimeSeries> {
    run_with(state, config, n_steps, record_every, RunOptions::default()).map(|(ts, _)| ts)
}

/// Like [`run`], also returning the final state.
pub fn run_with(
    state: &FieldState,
    config: EvolutionConfig,
    n_steps: usize,
    record_every: usize,
    options: RunOptions,
) -> Result<(TimeSeries, FieldState)> {
    if record_every == 0 {
        return Err(Error::InvalidParameter {
            name: "record_every",
            reason: "must be at least 1".into(),
        });
    }
    let propagator = Propagator::new(state.lattice(), config)?;
    let observer = propagator.observer();
    let mut series = TimeSeries::default();
    let mut current = state.clone();
    let checkpoint = |series: &mut TimeSeries, step: usize, st: &FieldState| {
        if let Some(every) = options.checkpoint_every {
            if every > 0 && step.is_multiple_of(every) {
                series.checkpoints.push(Checkpoint {
                    step,
                    a: st.a_field().to_vec(),
                    b: st.b_field().to_vec(),
                });
            }
        }
    };
    series.snapshots.push(observer.snapshot(0, &current)?);
    checkpoint(&mut series, 0, &current);
    for step in 1..=n_steps {
        current = propagator.step(&current)?;
        if !current.is_finite() {
            return Err(Error::NonFinite { step });
        }
        if step % record_every == 0 || step == n_steps {
            series.snapshots.push(observer.snapshot(step, &current)?);
        }
        checkpoint(&mut series, step, &current);
    }
    Ok((series, current))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{gaussian_state, random_state};

    fn lat(n: usize) -> Lattice {
        Lattice::new(n, 1.0).unwrap()
    }

    #[test]
    fn zero_state_is_fixed() {
        let l = lat(11);
        let k = KernelTable::new(&l);
        let z = FieldState::zeros(l);
        assert_eq!(euler_step(&z, 1e-3, &k).unwrap(), z);
        let le = Lattice::even_naive(10, 1.0).unwrap();
        let ze = FieldState::zeros(le);
        assert_eq!(even_naive_step(&ze, 1e-3, &KernelTable::new(&le)).unwrap(), ze);
    }

    #[test]
    fn three_site_hand_value() {
        // b_s = -τ g² F(s), F = (-1/3, 2/3, -1/3), g = 2π/3.
        let l = lat(3);
        let k = KernelTable::new(&l);
        let st = FieldState::basis(l, 0);
        let next = euler_step(&st, 1e-3, &k).unwrap();
        assert_eq!(next.a_field(), st.a_field());
        // Four-digit literals: τg²/3 = 1.46216e-3.
        let want = [1.4622e-3, -2.9243e-3, 1.4622e-3];
        for (b, w) in next.b_field().iter().zip(want) {
            assert!((b - w).abs() < 1e-7, "{b} {w}");
        }
        let w = 1e-3 * (2.0 * std::f64::consts::PI / 3.0).powi(2) / 3.0;
        for (b, m) in next.b_field().iter().zip([1.0, -2.0, 1.0]) {
            assert!((b - m * w).abs() < 1e-16);
        }
    }

    #[test]
    fn spectral_path_agrees_with_direct() {
        for n in [3, 21, 801] {
            let l = lat(n);
            let k = KernelTable::new(&l);
            let basis = SpectralBasis::new(&l);
            let st = random_state(&l, n as u64);
            let direct = euler_step(&st, 1e-3, &k).unwrap();
            let fast = euler_step_spectral(&st, 1e-3, &basis).unwrap();
            assert!(direct.max_abs_diff(&fast) < 1e-12);
        }
    }

    #[test]
    fn single_step_oracle_bound() {
        let l = lat(801);
        let st = gaussian_state(&l, 0, 10.0, 20).unwrap();
        let tau = 1e-3;
        let e = euler_step(&st, tau, &KernelTable::new(&l)).unwrap();
        let x = exact_step(&st, tau);
        let p_max = l.reciprocal_constant() * l.half_width() as f64;
        let bound = (tau * p_max * p_max).powi(2) / 2.0;
        assert!(e.max_abs_diff(&x) <= bound);
    }

    #[test]
    fn parity_guards() {
        let odd = lat(5);
        let even = Lattice::even_naive(6, 1.0).unwrap();
        let ko = KernelTable::new(&odd);
        let ke = KernelTable::new(&even);
        assert!(even_naive_step(&FieldState::zeros(odd), 1e-3, &ko).is_err());
        assert!(euler_step(&FieldState::zeros(even), 1e-3, &ke).is_err());
        assert!(matches!(
            euler_step(&FieldState::zeros(odd), 1e-3, &ke),
            Err(Error::LatticeMismatch)
        ));
    }

    #[test]
    fn tau_limits() {
        let l = lat(801);
        let cfg = |tau| EvolutionConfig::new(tau, Scheme::Euler);
        assert_eq!(cfg(1e-3).validate(&l).unwrap(), StepCheck::Ok);
        assert_eq!(cfg(0.005).validate(&l).unwrap(), StepCheck::Coarse);
        assert_eq!(cfg(0.010).validate(&l).unwrap(), StepCheck::Coarse);
        assert!(matches!(cfg(0.02).validate(&l), Err(Error::TimeStepTooLarge { .. })));
        assert!(cfg(0.0).validate(&l).is_err());
        assert!(cfg(-1e-3).validate(&l).is_err());
        let exact = EvolutionConfig::new(10.0, Scheme::Exact);
        assert_eq!(exact.validate(&l).unwrap(), StepCheck::Ok);
    }

    #[test]
    fn translate_basis_states() {
        let l = lat(801);
        assert_eq!(translate(&FieldState::basis(l, 0), 1), FieldState::basis(l, 1));
        assert_eq!(translate(&FieldState::basis(l, 400), 1), FieldState::basis(l, -400));
        let st = random_state(&l, 1);
        assert_eq!(translate(&st, 801), st);
        assert_eq!(translate(&translate(&st, 5), -5), st);
    }

    #[test]
    fn run_records() {
        let l = lat(21);
        let st = gaussian_state(&l, 0, 2.0, 1).unwrap();
        let cfg = EvolutionConfig::new(1e-3, Scheme::Euler);
        let ts = run(&st, cfg, 0, 10).unwrap();
        assert_eq!(ts.snapshots.len(), 1);
        assert_eq!(ts.snapshots[0].step, 0);
        let ts = run(&st, cfg, 25, 10).unwrap();
        let steps: Vec<_> = ts.snapshots.iter().map(|s| s.step).collect();
        assert_eq!(steps, vec![0, 10, 20, 25]);
        assert!(run(&st, cfg, 5, 0).is_err());
    }

    #[test]
    fn checkpoints() {
        let l = lat(21);
        let st = gaussian_state(&l, 0, 2.0, 1).unwrap();
        let cfg = EvolutionConfig::new(1e-3, Scheme::Exact);
        let opts = RunOptions {
            checkpoint_every: Some(4),
        };
        let (ts, last) = run_with(&st, cfg, 8, 2, opts).unwrap();
        let steps: Vec<_> = ts.checkpoints.iter().map(|c| c.step).collect();
        assert_eq!(steps, vec![0, 4, 8]);
        assert_eq!(ts.checkpoints[2].a, last.a_field());
    }
}
