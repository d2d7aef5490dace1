//! Change of basis between position states and the unbiased (momentum)
//! basis `φ_k = N^{-1/2} Σ_s e^{i 2π k s / N} φ_s`.
//!
//! Coefficients are `ĉ_k = N^{-1/2} Σ_s e^{-i 2π k s / N} c_s`, stored by slot
//! `m = 0..N` with label `k = lattice.momentum_label(m)`. Even lattices use
//! half-integer labels, which is the basis in which translation across the
//! `±N/2` border picks up a sign.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::lattice::{Lattice, Parity};
use crate::state::FieldState;

#[derive(Clone, Debug, PartialEq)]
pub struct MomentumSpectrum {
    lattice: Lattice,
    coefficients: Vec<Complex64>,
}

impl MomentumSpectrum {
    pub fn new(lattice: Lattice, coefficients: Vec<Complex64>) -> Self {
        assert_eq!(coefficients.len(), lattice.n_sites());
        Self {
            lattice,
            coefficients,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Coefficient at momentum label `k`.
    pub fn at(&self, k: f64) -> Complex64 {
        let m = k - self.lattice.momentum_label(0);
        self.coefficients[m.round() as usize]
    }

    /// `Σ_k |ĉ_k|²`.
    pub fn norm_m(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Multiplies each coefficient by `phase(p)` with `p = g k`.
    pub fn map_momentum(&self, phase: impl Fn(f64) -> Complex64) -> Self {
        let g = self.lattice.reciprocal_constant();
        let coefficients = self
            .coefficients
            .iter()
            .zip(self.lattice.momentum_labels())
            .map(|(c, k)| c * phase(g * k))
            .collect();
        Self {
            lattice: self.lattice,
            coefficients,
        }
    }
}

/// `e^{i π q / N}` with `q` reduced modulo `2N` first.
fn half_turn_phase(q: i64, n: usize) -> Complex64 {
    let n = n as i64;
    let q = q.rem_euclid(2 * n);
    Complex64::from_polar(1.0, PI * q as f64 / n as f64)
}

/// Reusable FFT plans and twiddles for one lattice.
#[derive(Clone)]
pub struct SpectralBasis {
    lattice: Lattice,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `e^{-i 2π δ j / N}` for storage offset `j`, `δ = 0` or `1/2`.
    site_twist: Vec<Complex64>,
    /// `e^{-i 2π k s_min / N} / √N` per momentum slot.
    slot_phase: Vec<Complex64>,
    /// FFT bin holding slot `m`.
    slot_bin: Vec<usize>,
}

impl std::fmt::Debug for SpectralBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralBasis")
            .field("lattice", &self.lattice)
            .finish_non_exhaustive()
    }
}

impl SpectralBasis {
    pub fn new(lattice: &Lattice) -> Self {
        let n = lattice.n_sites();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let site_twist = (0..n)
            .map(|j| match lattice.parity() {
                Parity::Odd => Complex64::new(1.0, 0.0),
                Parity::EvenNaive => half_turn_phase(-(j as i64), n),
            })
            .collect();
        let scale = 1.0 / (n as f64).sqrt();
        let s_min = lattice.min_site();
        let slot_phase = lattice
            .momentum_labels()
            .map(|k| {
                let twice_k = (2.0 * k).round() as i64;
                half_turn_phase(-twice_k * s_min, n) * scale
            })
            .collect();
        let slot_bin = (0..n)
            .map(|m| (m as i64 - lattice.half_width()).rem_euclid(n as i64) as usize)
            .collect();
        Self {
            lattice: *lattice,
            forward,
            inverse,
            site_twist,
            slot_phase,
            slot_bin,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn to_momentum(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = c.iter().zip(&self.site_twist).map(|(x, t)| x * t).collect();
        self.forward.process(&mut buf);
        self.slot_bin
            .iter()
            .zip(&self.slot_phase)
            .map(|(&bin, ph)| buf[bin] * ph)
            .collect()
    }

    pub fn from_momentum(&self, c_hat: &[Complex64]) -> Vec<Complex64> {
        let n = self.lattice.n_sites();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for ((&bin, ph), x) in self.slot_bin.iter().zip(&self.slot_phase).zip(c_hat) {
            buf[bin] = x * ph.conj();
        }
        self.inverse.process(&mut buf);
        buf.iter().zip(&self.site_twist).map(|(x, t)| x * t.conj()).collect()
    }

    pub fn spectrum(&self, state: &FieldState) -> MomentumSpectrum {
        MomentumSpectrum::new(self.lattice, self.to_momentum(&state.amplitudes()))
    }

    pub fn state(&self, spectrum: &MomentumSpectrum) -> FieldState {
        FieldState::from_amplitudes_unchecked(self.lattice, &self.from_momentum(spectrum.coefficients()))
    }

    /// Applies the diagonal operator `phase(g k)` in the momentum basis.
    pub fn apply_diagonal(&self, state: &FieldState, phase: impl Fn(f64) -> Complex64) -> FieldState {
        self.state(&self.spectrum(state).map_momentum(phase))
    }
}

pub fn to_momentum_basis(state: &FieldState) -> MomentumSpectrum {
    SpectralBasis::new(state.lattice()).spectrum(state)
}

pub fn from_momentum_basis(spectrum: &MomentumSpectrum) -> FieldState {
    SpectralBasis::new(spectrum.lattice()).state(spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::random_state;

    /// Direct O(N²) evaluation of the coefficient formula.
    fn direct(state: &FieldState) -> Vec<Complex64> {
        let lat = state.lattice();
        let n = lat.n_sites() as f64;
        let c = state.amplitudes();
        lat.momentum_labels()
            .map(|k| {
                lat.sites()
                    .zip(&c)
                    .map(|(s, x)| x * Complex64::from_polar(1.0, -2.0 * PI * k * s as f64 / n))
                    .sum::<Complex64>()
                    / n.sqrt()
            })
            .collect()
    }

    #[test]
    fn matches_direct_sum() {
        for lat in [
            Lattice::new(3, 1.0).unwrap(),
            Lattice::new(21, 0.5).unwrap(),
            Lattice::new(801, 1.0).unwrap(),
            Lattice::even_naive(4, 1.0).unwrap(),
            Lattice::even_naive(20, 1.0).unwrap(),
        ] {
            let st = random_state(&lat, 5);
            let fast = to_momentum_basis(&st);
            for (x, y) in fast.coefficients().iter().zip(direct(&st)) {
                assert!((x - y).norm() < 1e-12, "{lat:?}");
            }
        }
    }

    #[test]
    fn position_delta_is_flat() {
        let lat = Lattice::new(11, 1.0).unwrap();
        let spec = to_momentum_basis(&FieldState::basis(lat, 0));
        let want = 1.0 / 11f64.sqrt();
        for c in spec.coefficients() {
            assert!((c - Complex64::new(want, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn plane_wave_is_delta() {
        let lat = Lattice::new(15, 1.0).unwrap();
        let k0 = 4.0;
        let c: Vec<Complex64> = lat
            .sites()
            .map(|s| Complex64::from_polar(1.0 / 15f64.sqrt(), 2.0 * PI * k0 * s as f64 / 15.0))
            .collect();
        let spec = to_momentum_basis(&FieldState::from_amplitudes(lat, &c).unwrap());
        for (k, x) in lat.momentum_labels().zip(spec.coefficients()) {
            let want = if k == k0 { 1.0 } else { 0.0 };
            assert!((x - Complex64::new(want, 0.0)).norm() < 1e-14);
        }
        assert!((spec.at(k0).re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn round_trip() {
        for lat in [Lattice::new(801, 1.0).unwrap(), Lattice::even_naive(800, 1.0).unwrap()] {
            let st = random_state(&lat, 11);
            let back = from_momentum_basis(&to_momentum_basis(&st));
            assert!(back.max_abs_diff(&st) < 1e-12);
            assert!((to_momentum_basis(&st).norm_m() - st.norm_m()).abs() < 1e-10);
        }
    }
}
