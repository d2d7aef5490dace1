//! The distance kernels `F` (matrix element of `P^2 / g^2`) and `G`
//! (matrix element of `i P / g`) between position states.
//!
//! Each kernel has a closed form, used on the fast path, and a direct
//! spectral sum over momentum labels, used only as an independent oracle.
//! For odd `N` both kernels are `N`-periodic in the displacement; on even
//! lattices (half-integer momenta) they are `N`-antiperiodic.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Parity};

/// Imaginary residue allowed in the spectral sum for `F`, in units of `N^2`.
pub const F_SPECTRAL_RESIDUE: f64 = 1e-9;
/// Imaginary residue allowed in the spectral sum for `G`, in units of `N`.
pub const G_SPECTRAL_RESIDUE: f64 = 1e-9;

/// Reduces `d` to its representative on the lattice's site range and the sign
/// picked up by doing so.
fn reduce(d: i64, lattice: &Lattice) -> (i64, f64) {
    let n = lattice.n_sites() as i64;
    let r = lattice.wrap_index(d);
    let wraps = (d - r) / n;
    let sign = match lattice.parity() {
        Parity::EvenNaive if wraps.rem_euclid(2) == 1 => -1.0,
        _ => 1.0,
    };
    (r, sign)
}

fn alternating(d: i64) -> f64 {
    if d.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `F(d) = (-1)^d cos(πd/N) / (2 sin²(πd/N))`, and `(N² - 1)/12` at `d ≡ 0`.
pub fn kernel_f(d: i64, lattice: &Lattice) -> f64 {
    let n = lattice.n_sites() as f64;
    let (r, sign) = reduce(d, lattice);
    if r == 0 {
        return sign * (n * n - 1.0) / 12.0;
    }
    if lattice.parity() == Parity::EvenNaive && r == lattice.min_site() {
        // cos(π/2) vanishes exactly here.
        return 0.0;
    }
    let x = PI * r as f64 / n;
    let s = x.sin();
    sign * alternating(r) * x.cos() / (2.0 * s * s)
}

/// `G(d) = (-1)^d / (2 sin(πd/N))`, and `0` at `d ≡ 0`.
pub fn kernel_g(d: i64, lattice: &Lattice) -> f64 {
    let n = lattice.n_sites() as f64;
    let (r, sign) = reduce(d, lattice);
    if r == 0 {
        return 0.0;
    }
    let x = PI * r as f64 / n;
    sign * alternating(r) / (2.0 * x.sin())
}

/// `Σ_k k^p e^{i 2π k d / N}` over the lattice's momentum labels.
fn momentum_power_sum(d: i64, power: i32, lattice: &Lattice) -> Complex64 {
    let n = lattice.n_sites() as i64;
    let two_n = 2 * n;
    lattice
        .momentum_labels()
        .map(|k| {
            // 2k is an integer for both integer and half-integer labels, so
            // the phase can be reduced exactly before calling sin/cos.
            let twice_k = (2.0 * k).round() as i64;
            let phase = (twice_k * d).rem_euclid(two_n);
            let angle = PI * phase as f64 / n as f64;
            Complex64::from_polar(k.powi(power), angle)
        })
        .sum()
}

/// Direct spectral sum `(1/N) Σ_k k^4 e^{i 2π k d / N}`; the kernel of `F∘F`.
pub fn kernel_f_squared_spectral(d: i64, lattice: &Lattice) -> Result<f64> {
    let n = lattice.n_sites() as f64;
    let sum = momentum_power_sum(d, 4, lattice) / n;
    let tolerance = F_SPECTRAL_RESIDUE * n.powi(4);
    check_real("F∘F spectral sum", sum, tolerance)
}

/// Direct spectral sum `(1/N) Σ_k k² e^{i 2π k d / N}`.
pub fn kernel_f_spectral(d: i64, lattice: &Lattice) -> Result<f64> {
    let n = lattice.n_sites() as f64;
    let sum = momentum_power_sum(d, 2, lattice) / n;
    check_real("F spectral sum", sum, F_SPECTRAL_RESIDUE * n * n)
}

/// Direct spectral sum `(i/N) Σ_k k e^{i 2π k d / N}`.
pub fn kernel_g_spectral(d: i64, lattice: &Lattice) -> Result<f64> {
    let n = lattice.n_sites() as f64;
    let sum = Complex64::i() * momentum_power_sum(d, 1, lattice) / n;
    check_real("G spectral sum", sum, G_SPECTRAL_RESIDUE * n)
}

fn check_real(quantity: &'static str, z: Complex64, tolerance: f64) -> Result<f64> {
    if z.im.abs() > tolerance {
        return Err(Error::ImaginaryResidue {
            quantity,
            residue: z.im.abs(),
            tolerance,
        });
    }
    Ok(z.re)
}

/// Closed-form `F` on `[-h, h]` and `G` on `[-(N-1), N-1]`, where `h` is the
/// lattice half width. The `G` range covers every unwrapped difference `s - r`
/// of two site labels.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTable {
    lattice: Lattice,
    f_values: Vec<f64>,
    g_values: Vec<f64>,
}

impl KernelTable {
    pub fn new(lattice: &Lattice) -> Self {
        let h = lattice.half_width();
        let g_reach = lattice.n_sites() as i64 - 1;
        Self {
            lattice: *lattice,
            f_values: (-h..=h).map(|d| kernel_f(d, lattice)).collect(),
            g_values: (-g_reach..=g_reach).map(|d| kernel_g(d, lattice)).collect(),
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Largest tabulated `|d|` for `F`.
    pub fn f_reach(&self) -> i64 {
        self.lattice.half_width()
    }

    /// Largest tabulated `|d|` for `G`.
    pub fn g_reach(&self) -> i64 {
        self.lattice.n_sites() as i64 - 1
    }

    /// `F(d)` for `|d| <= f_reach()`.
    #[inline]
    pub fn f(&self, d: i64) -> f64 {
        self.f_values[(d + self.f_reach()) as usize]
    }

    /// `G(d)` for `|d| <= g_reach()`.
    #[inline]
    pub fn g(&self, d: i64) -> f64 {
        self.g_values[(d + self.g_reach()) as usize]
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f_values
    }

    pub fn g_values(&self) -> &[f64] {
        &self.g_values
    }
}
