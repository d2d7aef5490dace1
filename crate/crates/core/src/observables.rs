//! Conserved and diagnostic quantities of a field state.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelTable;
use crate::spectral::{MomentumSpectrum, SpectralBasis};
use crate::state::FieldState;

/// Imaginary residue tolerated in the kernel form of `<P>`, per unit of `M`.
pub const MOMENTUM_RESIDUE: f64 = 1e-10;

fn check_lattice(state: &FieldState, kernels: &KernelTable) -> Result<()> {
    if state.lattice().same_geometry(kernels.lattice()) {
        Ok(())
    } else {
        Err(Error::LatticeMismatch)
    }
}

/// `G(s - r)` for storage offsets `i = s - s_min`, `j = r - s_min`, laid out
/// so that row `i` is the contiguous slice `rev[N-1-i .. 2N-1-i]` over `j`.
fn reversed_g(kernels: &KernelTable) -> Vec<f64> {
    kernels.g_values().iter().rev().copied().collect()
}

/// Drift velocity of the combined distribution,
/// `<V> = 4 g Σ_{s,r} a_s b_r G(s - r)` with unwrapped `s - r`.
pub fn drift_velocity(state: &FieldState, kernels: &KernelTable) -> Result<f64> {
    check_lattice(state, kernels)?;
    let n = state.lattice().n_sites();
    let g = state.lattice().reciprocal_constant();
    let rev = reversed_g(kernels);
    let b = state.b_field();
    let total: f64 = state
        .a_field()
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let row = &rev[n - 1 - i..2 * n - 1 - i];
            a * row.iter().zip(b).map(|(gv, bv)| gv * bv).sum::<f64>()
        })
        .sum();
    Ok(4.0 * g * total)
}

/// `<P> = -i g Σ_{s,r} c*_s c_r G(s - r)`, checked to be real.
pub fn momentum_expectation(state: &FieldState, kernels: &KernelTable) -> Result<f64> {
    check_lattice(state, kernels)?;
    let n = state.lattice().n_sites();
    let g = state.lattice().reciprocal_constant();
    let rev = reversed_g(kernels);
    let c = state.amplitudes();
    let total: Complex64 = c
        .iter()
        .enumerate()
        .map(|(i, cs)| {
            let row = &rev[n - 1 - i..2 * n - 1 - i];
            cs.conj() * row.iter().zip(&c).map(|(gv, cr)| cr * gv).sum::<Complex64>()
        })
        .sum();
    let value = -Complex64::i() * g * total;
    let tolerance = MOMENTUM_RESIDUE * state.norm_m().max(1.0);
    if value.im.abs() > tolerance {
        return Err(Error::ImaginaryResidue {
            quantity: "momentum expectation",
            residue: value.im.abs(),
            tolerance,
        });
    }
    Ok(value.re)
}

/// `<P> = g Σ_k k |ĉ_k|²`.
pub fn momentum_expectation_spectral(spectrum: &MomentumSpectrum) -> f64 {
    let lat = spectrum.lattice();
    let g = lat.reciprocal_constant();
    spectrum
        .coefficients()
        .iter()
        .zip(lat.momentum_labels())
        .map(|(c, k)| g * k * c.norm_sqr())
        .sum()
}

/// `|ĉ_k|²` by momentum slot.
pub fn momentum_distribution(spectrum: &MomentumSpectrum) -> Vec<f64> {
    spectrum.coefficients().iter().map(|c| c.norm_sqr()).collect()
}

/// Fraction of `M` carried by `|k| > L/2`.
pub fn high_frequency_fraction(spectrum: &MomentumSpectrum) -> f64 {
    let lat = spectrum.lattice();
    let cut = lat.half_width() as f64 / 2.0;
    let total = spectrum.norm_m();
    let high: f64 = spectrum
        .coefficients()
        .iter()
        .zip(lat.momentum_labels())
        .filter(|(_, k)| k.abs() > cut)
        .map(|(c, _)| c.norm_sqr())
        .sum();
    high / total
}

/// First circular moment `Σ_s ρ_s e^{iθ_s} / M` with `θ_s = 2π s / N`.
fn circular_moment(state: &FieldState) -> Result<Complex64> {
    let m = state.norm_m();
    if !(m > 0.0) {
        return Err(Error::DegenerateState);
    }
    let n = state.lattice().n_sites() as f64;
    let z: Complex64 = state
        .lattice()
        .sites()
        .zip(state.combined_distribution())
        .map(|(s, rho)| Complex64::from_polar(rho, 2.0 * PI * s as f64 / n))
        .sum();
    Ok(z / m)
}

/// Circular mean position of the combined distribution, in sites.
pub fn position_mean(state: &FieldState) -> Result<f64> {
    let z = circular_moment(state)?;
    Ok(z.arg() * state.lattice().n_sites() as f64 / (2.0 * PI))
}

/// Circular standard deviation `sqrt(-2 ln R) N / 2π`, in sites. Exact for a
/// wrapped normal distribution.
pub fn position_spread(state: &FieldState) -> Result<f64> {
    let r = circular_moment(state)?.norm();
    if r <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((-2.0 * r.ln()).max(0.0).sqrt() * state.lattice().n_sites() as f64 / (2.0 * PI))
}

/// RMS deviation (over all sites) between the combined distribution and the
/// cyclic gaussian with matching circular mean and spread and least-squares
/// amplitude, divided by the peak of the distribution.
pub fn gaussian_shape_residual(state: &FieldState) -> Result<f64> {
    let mean = position_mean(state)?;
    let spread = position_spread(state)?;
    let rho = state.combined_distribution();
    let peak = rho.iter().copied().fold(0.0, f64::max);
    let lat = state.lattice();
    if !spread.is_finite() || spread == 0.0 {
        return Ok(1.0);
    }
    let template: Vec<f64> = lat
        .sites()
        .map(|s| {
            let d = lat.cyclic_displacement(mean, s as f64);
            (-d * d / (2.0 * spread * spread)).exp()
        })
        .collect();
    let tt: f64 = template.iter().map(|t| t * t).sum();
    let amplitude = rho.iter().zip(&template).map(|(r, t)| r * t).sum::<f64>() / tt;
    let sq: f64 = rho
        .iter()
        .zip(&template)
        .map(|(r, t)| (r - amplitude * t).powi(2))
        .sum();
    Ok((sq / rho.len() as f64).sqrt() / peak)
}

/// Strict interior local maxima of `values` on the ring whose height is at
/// least `rel_floor` times the global maximum.
pub fn local_maxima(values: &[f64], rel_floor: f64) -> usize {
    let n = values.len();
    let floor = rel_floor * values.iter().copied().fold(0.0, f64::max);
    (0..n)
        .filter(|&i| {
            let v = values[i];
            v >= floor && v > values[(i + n - 1) % n] && v > values[(i + 1) % n]
        })
        .count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSnapshot {
    pub step: usize,
    pub m_total: f64,
    pub drift_velocity: f64,
    pub momentum_expectation: f64,
    pub position_mean: f64,
    pub position_spread: f64,
    pub shape_residual: f64,
}

/// Evaluates snapshots on one lattice. `drift_velocity` comes from the
/// `G`-kernel double sum and `momentum_expectation` from the momentum basis,
/// so `drift_velocity = 2 momentum_expectation` is a genuine cross-check.
#[derive(Clone, Debug)]
pub struct Observer {
    kernels: KernelTable,
    basis: SpectralBasis,
}

impl Observer {
    pub fn new(kernels: KernelTable, basis: SpectralBasis) -> Self {
        Self { kernels, basis }
    }

    pub fn snapshot(&self, step: usize, state: &FieldState) -> Result<ObservableSnapshot> {
        let spectrum = self.basis.spectrum(state);
        Ok(ObservableSnapshot {
            step,
            m_total: state.norm_m(),
            drift_velocity: drift_velocity(state, &self.kernels)?,
            momentum_expectation: momentum_expectation_spectral(&spectrum),
            position_mean: position_mean(state)?,
            position_spread: position_spread(state)?,
            shape_residual: gaussian_shape_residual(state)?,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub snapshots: Vec<ObservableSnapshot>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<Checkpoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TimeSeries {
    /// `max_t |X(t) - X(0)| / |X(0)|` for the selected observable.
    pub fn relative_variation(&self, select: impl Fn(&ObservableSnapshot) -> f64) -> f64 {
        let Some(first) = self.snapshots.first() else {
            return 0.0;
        };
        let x0 = select(first);
        self.snapshots
            .iter()
            .map(|s| (select(s) - x0).abs())
            .fold(0.0, f64::max)
            / x0.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::spectral::to_momentum_basis;
    use crate::state::{gaussian_state, random_state, uniform_state};

    fn default_lattice() -> (Lattice, KernelTable) {
        let lat = Lattice::new(801, 1.0).unwrap();
        (lat, KernelTable::new(&lat))
    }

    #[test]
    fn real_state_has_no_drift() {
        let (lat, k) = default_lattice();
        let st = uniform_state(&lat, 0, 25, 0).unwrap();
        assert_eq!(drift_velocity(&st, &k).unwrap(), 0.0);
        assert!(momentum_expectation(&st, &k).unwrap().abs() < 1e-14);
    }

    #[test]
    fn boosted_gaussian_drift() {
        let (lat, k) = default_lattice();
        let st = gaussian_state(&lat, 0, 10.0, 50).unwrap();
        let v = drift_velocity(&st, &k).unwrap();
        assert!((v - 2.0 * lat.reciprocal_constant() * 50.0).abs() < 1e-6);
    }

    #[test]
    fn plane_wave_momentum() {
        let lat = Lattice::new(101, 1.0).unwrap();
        let k = KernelTable::new(&lat);
        let k0 = 7.0;
        let c: Vec<Complex64> = lat
            .sites()
            .map(|s| Complex64::from_polar(1.0 / 101f64.sqrt(), 2.0 * PI * k0 * s as f64 / 101.0))
            .collect();
        let st = FieldState::from_amplitudes(lat, &c).unwrap();
        let p = momentum_expectation(&st, &k).unwrap();
        assert!((p - lat.reciprocal_constant() * k0).abs() < 1e-10);
        let dist = momentum_distribution(&to_momentum_basis(&st));
        for (kk, w) in lat.momentum_labels().zip(dist) {
            let want = if kk == k0 { 1.0 } else { 0.0 };
            assert!((w - want).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_and_spectral_momentum_agree() {
        let (lat, k) = default_lattice();
        let st = random_state(&lat, 2024);
        let kernel = momentum_expectation(&st, &k).unwrap();
        let spectral = momentum_expectation_spectral(&to_momentum_basis(&st));
        assert!((kernel - spectral).abs() <= 1e-10 * kernel.abs().max(1e-3));
    }

    #[test]
    fn lattice_mismatch() {
        let st = random_state(&Lattice::new(5, 1.0).unwrap(), 1);
        let k = KernelTable::new(&Lattice::new(7, 1.0).unwrap());
        assert!(matches!(drift_velocity(&st, &k), Err(Error::LatticeMismatch)));
    }

    #[test]
    fn uniform_mean_is_center() {
        let (lat, _) = default_lattice();
        for center in [0, 17, -300, 400] {
            let st = uniform_state(&lat, center, 25, 3).unwrap();
            let mean = position_mean(&st).unwrap();
            assert!((mean - center as f64).abs() < 1e-6, "{center} {mean}");
        }
    }

    #[test]
    fn gaussian_moments_and_residual() {
        let (lat, _) = default_lattice();
        let st = gaussian_state(&lat, 0, 10.0, 0).unwrap();
        assert!(gaussian_shape_residual(&st).unwrap() < 1e-3);
        assert!((position_spread(&st).unwrap() - 10.0).abs() < 1e-6);
        let window = uniform_state(&lat, 0, 25, 0).unwrap();
        assert!(gaussian_shape_residual(&window).unwrap() > 1e-2);
    }

    #[test]
    fn degenerate_moments() {
        let st = FieldState::zeros(Lattice::new(5, 1.0).unwrap());
        assert!(matches!(position_mean(&st), Err(Error::DegenerateState)));
        assert!(gaussian_shape_residual(&st).is_err());
    }

    #[test]
    fn maxima_counting() {
        assert_eq!(local_maxima(&[1.0, 1.0, 1.0, 0.0, 0.0], 0.0), 0);
        assert_eq!(local_maxima(&[0.0, 2.0, 0.0, 1.0, 0.0], 0.0), 2);
        assert_eq!(local_maxima(&[0.0, 2.0, 0.0, 1e-9, 0.0], 1e-6), 1);
    }

    #[test]
    fn relative_variation_from_first() {
        let snap = |step, m| ObservableSnapshot {
            step,
            m_total: m,
            drift_velocity: 0.0,
            momentum_expectation: 0.0,
            position_mean: 0.0,
            position_spread: 0.0,
            shape_residual: 0.0,
        };
        let ts = TimeSeries {
            snapshots: vec![snap(0, 2.0), snap(1, 2.5), snap(2, 1.8)],
            checkpoints: vec![],
        };
        assert_eq!(ts.relative_variation(|s| s.m_total), 0.25);
    }
}
