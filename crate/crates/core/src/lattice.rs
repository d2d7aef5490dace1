//! Cyclic lattice geometry.
//!
//! Sites are labelled by signed integers. For the standard odd lattice with
//! `N = 2L + 1` sites the labels run over `[-L, L]`. Even lattices exist only
//! for the even/odd demonstration and are labelled `[-N/2, N/2 - 1]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Site label on the ring.
pub type Site = i64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    /// Odd `N`; momentum labels are integers in `[-L, L]`.
    Odd,
    /// Even `N` evolved with the unmodified kernels. Momentum labels of the
    /// matching quantum reference are half-integers.
    EvenNaive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    n_sites: usize,
    half_width: i64,
    lattice_constant: f64,
    reciprocal_constant: f64,
    parity: Parity,
}

impl Lattice {
    /// Odd lattice with `n_sites >= 3` and spacing `lattice_constant`.
    pub fn new(n_sites: usize, lattice_constant: f64) -> Result<Self> {
        if n_sites < 3 || n_sites.is_multiple_of(2) {
            return Err(Error::EvenLattice(n_sites));
        }
        Self::build(n_sites, lattice_constant, Parity::Odd)
    }

    /// Even lattice for the naive even-`N` variant.
    pub fn even_naive(n_sites: usize, lattice_constant: f64) -> Result<Self> {
        if n_sites < 2 || n_sites % 2 == 1 {
            return Err(Error::OddLatticeInEvenMode(n_sites));
        }
        Self::build(n_sites, lattice_constant, Parity::EvenNaive)
    }

    /// Dispatches on `parity`.
    pub fn with_parity(n_sites: usize, lattice_constant: f64, parity: Parity) -> Result<Self> {
        match parity {
            Parity::Odd => Self::new(n_sites, lattice_constant),
            Parity::EvenNaive => Self::even_naive(n_sites, lattice_constant),
        }
    }

    fn build(n_sites: usize, lattice_constant: f64, parity: Parity) -> Result<Self> {
        if !(lattice_constant > 0.0 && lattice_constant.is_finite()) {
            return Err(Error::InvalidLatticeConstant(lattice_constant));
        }
        Ok(Self {
            n_sites,
            half_width: n_sites as i64 / 2,
            lattice_constant,
            reciprocal_constant: 2.0 * PI / (n_sites as f64 * lattice_constant),
            parity,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// `L = (N - 1) / 2` for odd lattices, `N / 2` for even ones.
    pub fn half_width(&self) -> i64 {
        self.half_width
    }

    pub fn lattice_constant(&self) -> f64 {
        self.lattice_constant
    }

    /// `g = 2π / (N a)`.
    pub fn reciprocal_constant(&self) -> f64 {
        self.reciprocal_constant
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn is_odd(&self) -> bool {
        self.parity == Parity::Odd
    }

    pub fn min_site(&self) -> Site {
        -self.half_width
    }

    pub fn max_site(&self) -> Site {
        self.min_site() + self.n_sites as i64 - 1
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> {
        self.min_site()..=self.max_site()
    }

    /// Storage offset of a (wrapped) site label.
    pub fn index_of(&self, site: Site) -> usize {
        (self.wrap_index(site) - self.min_site()) as usize
    }

    pub fn site_at(&self, index: usize) -> Site {
        self.min_site() + index as i64
    }

    /// The unique site label congruent to `s` modulo `N`.
    pub fn wrap_index(&self, s: i64) -> Site {
        let n = self.n_sites as i64;
        (s - self.min_site()).rem_euclid(n) + self.min_site()
    }

    /// Signed displacement of smallest magnitude from `from` to `to`.
    pub fn cyclic_displacement(&self, from: f64, to: f64) -> f64 {
        let n = self.n_sites as f64;
        let d = (to - from).rem_euclid(n);
        if d > n / 2.0 {
            d - n
        } else {
            d
        }
    }

    /// Momentum label of spectral slot `m`: integers `[-L, L]` for odd
    /// lattices, half-integers `[-N/2 + 1/2, N/2 - 1/2]` for even ones.
    pub fn momentum_label(&self, m: usize) -> f64 {
        match self.parity {
            Parity::Odd => (m as i64 - self.half_width) as f64,
            Parity::EvenNaive => (m as i64 - self.half_width) as f64 + 0.5,
        }
    }

    pub fn momentum_labels(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_sites).map(|m| self.momentum_label(m))
    }

    /// Largest momentum magnitude `g * max|k|`.
    pub fn max_momentum(&self) -> f64 {
        let k_max = match self.parity {
            Parity::Odd => self.half_width as f64,
            Parity::EvenNaive => self.half_width as f64 - 0.5,
        };
        self.reciprocal_constant * k_max
    }

    pub fn same_geometry(&self, other: &Lattice) -> bool {
        self.n_sites == other.n_sites
            && self.parity == other.parity
            && self.lattice_constant == other.lattice_constant
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_801() {
        let lat = Lattice::new(801, 1.0).unwrap();
        assert_eq!(lat.half_width(), 400);
        assert_eq!(lat.reciprocal_constant(), 2.0 * PI / 801.0);
        assert!((lat.reciprocal_constant() - 0.0078441).abs() < 1e-7);
    }

    #[test]
    fn smallest_lattice() {
        let lat = Lattice::new(3, 1.0).unwrap();
        assert_eq!(lat.half_width(), 1);
        assert_eq!(lat.reciprocal_constant(), 2.0 * PI / 3.0);
        assert_eq!(lat.sites().collect::<Vec<_>>(), vec![-1, 0, 1]);
    }

    #[test]
    fn rejects_even_and_tiny() {
        let err = Lattice::new(802, 1.0).unwrap_err();
        assert!(err.to_string().contains("odd"));
        assert!(Lattice::new(1, 1.0).is_err());
        assert!(Lattice::new(0, 1.0).is_err());
        assert!(Lattice::new(5, 0.0).is_err());
        assert!(Lattice::new(5, -1.0).is_err());
        assert!(Lattice::new(5, f64::NAN).is_err());
        assert!(Lattice::even_naive(801, 1.0).is_err());
    }

    #[test]
    fn wrap() {
        let lat = Lattice::new(801, 1.0).unwrap();
        assert_eq!(lat.wrap_index(401), -400);
        assert_eq!(lat.wrap_index(0), 0);
        assert_eq!(lat.wrap_index(-801), 0);
        assert_eq!(lat.wrap_index(-401), 400);
        assert_eq!(lat.wrap_index(801 * 5 + 7), 7);
    }

    #[test]
    fn even_layout() {
        let lat = Lattice::even_naive(4, 1.0).unwrap();
        assert_eq!(lat.sites().collect::<Vec<_>>(), vec![-2, -1, 0, 1]);
        assert_eq!(lat.wrap_index(2), -2);
        let k: Vec<f64> = lat.momentum_labels().collect();
        assert_eq!(k, vec![-1.5, -0.5, 0.5, 1.5]);
    }

    #[test]
    fn displacement_is_minimal() {
        let lat = Lattice::new(11, 1.0).unwrap();
        assert_eq!(lat.cyclic_displacement(4.0, -4.0), 3.0);
        assert_eq!(lat.cyclic_displacement(-4.0, 4.0), -3.0);
        assert_eq!(lat.cyclic_displacement(0.0, 2.0), 2.0);
    }
}
