//! The two real fields `a_s` (A particles) and `b_s` (B particles) on the
//! ring. Negative entries count antiparticles. Taken together they are the
//! real and imaginary parts of the amplitude `c_s = a_s + i b_s`.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Parity, Site};

#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    lattice: Lattice,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl FieldState {
    pub fn new(lattice: Lattice, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let n = lattice.n_sites();
        if a.len() != n || b.len() != n {
            return Err(Error::InvalidParameter {
                name: "fields",
                reason: format!("expected {n} entries, got a={} b={}", a.len(), b.len()),
            });
        }
        if a.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "fields",
                reason: "entries must be finite".into(),
            });
        }
        Ok(Self { lattice, a, b })
    }

    pub fn zeros(lattice: Lattice) -> Self {
        let n = lattice.n_sites();
        Self {
            lattice,
            a: vec![0.0; n],
            b: vec![0.0; n],
        }
    }

    /// A single A particle at `site`.
    pub fn basis(lattice: Lattice, site: Site) -> Self {
        let mut state = Self::zeros(lattice);
        let i = lattice.index_of(site);
        state.a[i] = 1.0;
        state
    }

    pub fn from_amplitudes(lattice: Lattice, c: &[Complex64]) -> Result<Self> {
        Self::new(
            lattice,
            c.iter().map(|z| z.re).collect(),
            c.iter().map(|z| z.im).collect(),
        )
    }

    pub(crate) fn from_amplitudes_unchecked(lattice: Lattice, c: &[Complex64]) -> Self {
        debug_assert_eq!(c.len(), lattice.n_sites());
        Self {
            lattice,
            a: c.iter().map(|z| z.re).collect(),
            b: c.iter().map(|z| z.im).collect(),
        }
    }

    pub(crate) fn from_fields_unchecked(lattice: Lattice, a: Vec<f64>, b: Vec<f64>) -> Self {
        Self { lattice, a, b }
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn a_field(&self) -> &[f64] {
        &self.a
    }

    pub fn b_field(&self) -> &[f64] {
        &self.b
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(&self.b).all(|x| x.is_finite())
    }

    /// `M = Σ_s (a_s² + b_s²)`.
    pub fn norm_m(&self) -> f64 {
        self.a.iter().zip(&self.b).map(|(a, b)| a * a + b * b).sum()
    }

    /// Per-site `a_s² + b_s²`.
    pub fn combined_distribution(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a * a + b * b).collect()
    }

    pub fn normalize(&self) -> Result<Self> {
        let m = self.norm_m();
        if !(m > 0.0) {
            return Err(Error::DegenerateState);
        }
        Ok(self.scaled(1.0 / m.sqrt()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            lattice: self.lattice,
            a: self.a.iter().map(|x| x * factor).collect(),
            b: self.b.iter().map(|x| x * factor).collect(),
        }
    }

    /// Site-local rotation of `(a_s, b_s)` by `v a s / 2`, i.e. multiplication
    /// of `c_s` by `exp(i v a s / 2)`. The combined distribution is unchanged.
    pub fn boost(&self, velocity: f64) -> Self {
        let half_va = 0.5 * velocity * self.lattice.lattice_constant();
        let (a, b) = self
            .lattice
            .sites()
            .zip(self.a.iter().zip(&self.b))
            .map(|(s, (&a, &b))| {
                let (sin, cos) = (half_va * s as f64).sin_cos();
                (a * cos - b * sin, a * sin + b * cos)
            })
            .unzip();
        Self {
            lattice: self.lattice,
            a,
            b,
        }
    }

    /// Boost by `v = 2 g m`, which shifts the momentum spectrum by exactly `m`
    /// slots.
    pub fn boost_quantized(&self, velocity_index: i64) -> Self {
        self.boost(quantized_velocity(&self.lattice, velocity_index))
    }

    /// Largest per-component difference to `other`.
    pub fn max_abs_diff(&self, other: &FieldState) -> f64 {
        self.a
            .iter()
            .zip(&other.a)
            .chain(self.b.iter().zip(&other.b))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Euclidean distance `(Σ_s |c_s - c'_s|²)^{1/2}`.
    pub fn distance(&self, other: &FieldState) -> f64 {
        self.a
            .iter()
            .zip(&other.a)
            .chain(self.b.iter().zip(&other.b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn quantized_velocity(lattice: &Lattice, velocity_index: i64) -> f64 {
    2.0 * lattice.reciprocal_constant() * velocity_index as f64
}

fn check_center(lattice: &Lattice, center: Site) -> Result<()> {
    if center < lattice.min_site() || center > lattice.max_site() {
        return Err(Error::InvalidParameter {
            name: "center",
            reason: format!(
                "{center} outside [{}, {}]",
                lattice.min_site(),
                lattice.max_site()
            ),
        });
    }
    Ok(())
}

/// Gaussian packet `a_s ∝ exp(-Δs² / 4σ²)` (so the combined distribution has
/// standard deviation `σ`), normalized to `M = 1` and boosted by `v = 2 g m`.
pub fn gaussian_state(
    lattice: &Lattice,
    center: Site,
    sigma: f64,
    velocity_index: i64,
) -> Result<FieldState> {
    check_center(lattice, center)?;
    if !(sigma > 0.0 && sigma <= lattice.half_width() as f64) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("{sigma} outside (0, {}]", lattice.half_width()),
        });
    }
    let a = lattice
        .sites()
        .map(|s| {
            let ds = lattice.cyclic_displacement(center as f64, s as f64);
            (-ds * ds / (4.0 * sigma * sigma)).exp()
        })
        .collect();
    let state = FieldState::from_fields_unchecked(*lattice, a, vec![0.0; lattice.n_sites()]);
    Ok(state.normalize()?.boost_quantized(velocity_index))
}

/// Flat window of `2W + 1` sites around `center`.
pub fn uniform_state(
    lattice: &Lattice,
    center: Site,
    half_width: i64,
    velocity_index: i64,
) -> Result<FieldState> {
    check_center(lattice, center)?;
    if half_width < 0 || half_width > lattice.half_width() {
        return Err(Error::InvalidParameter {
            name: "half_width",
            reason: format!("{half_width} outside [0, {}]", lattice.half_width()),
        });
    }
    let a = lattice
        .sites()
        .map(|s| {
            let ds = lattice.cyclic_displacement(center as f64, s as f64);
            if ds.abs() <= half_width as f64 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let state = FieldState::from_fields_unchecked(*lattice, a, vec![0.0; lattice.n_sites()]);
    Ok(state.normalize()?.boost_quantized(velocity_index))
}

/// Uniform deviate on `[-1, 1)` from the top 53 bits of one ChaCha20 word.
fn symmetric_unit(rng: &mut ChaCha20Rng) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    2.0 * u - 1.0
}

/// Random fields drawn from ChaCha20 (`seed_from_u64(seed)`): first all `N`
/// entries of `a` in site order, then all of `b`, each `2u - 1` with
/// `u = (next_u64 >> 11) / 2^53`. Normalized to `M = 1`.
pub fn random_state(lattice: &Lattice, seed: u64) -> FieldState {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = lattice.n_sites();
    let a: Vec<f64> = (0..n).map(|_| symmetric_unit(&mut rng)).collect();
    let b: Vec<f64> = (0..n).map(|_| symmetric_unit(&mut rng)).collect();
    FieldState::from_fields_unchecked(*lattice, a, b)
        .normalize()
        .expect("random draw has positive norm")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Gaussian,
    Uniform,
    Random,
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Shape::Gaussian => "gaussian",
            Shape::Uniform => "uniform",
            Shape::Random => "random",
        })
    }
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Shape::Gaussian),
            "uniform" => Ok(Shape::Uniform),
            "random" => Ok(Shape::Random),
            other => Err(Error::InvalidParameter {
                name: "shape",
                reason: format!("unknown shape `{other}`"),
            }),
        }
    }
}

/// Initial-state recipe. `width` is `σ` for gaussians and the window half
/// width `W` (a whole number) for uniform windows; random states ignore it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub shape: Shape,
    pub center: Site,
    pub width: f64,
    pub velocity_index: i64,
    pub seed: u64,
}

impl StateSpec {
    pub fn gaussian(center: Site, sigma: f64, velocity_index: i64) -> Self {
        Self {
            shape: Shape::Gaussian,
            center,
            width: sigma,
            velocity_index,
            seed: 0,
        }
    }

    pub fn uniform(center: Site, half_width: i64, velocity_index: i64) -> Self {
        Self {
            shape: Shape::Uniform,
            center,
            width: half_width as f64,
            velocity_index,
            seed: 0,
        }
    }

    pub fn random(seed: u64) -> Self {
        Self {
            shape: Shape::Random,
            center: 0,
            width: 0.0,
            velocity_index: 0,
            seed,
        }
    }

    pub fn build(&self, lattice: &Lattice) -> Result<FieldState> {
        match self.shape {
            Shape::Gaussian => gaussian_state(lattice, self.center, self.width, self.velocity_index),
            Shape::Uniform => {
                if self.width.fract() != 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "width",
                        reason: format!("uniform half width must be a whole number, got {}", self.width),
                    });
                }
                uniform_state(lattice, self.center, self.width as i64, self.velocity_index)
            }
            Shape::Random => Ok(random_state(lattice, self.seed)),
        }
    }
}

/// JSON form of a state: lattice description plus the three columns.
#[derive(Debug, Serialize, Deserialize)]
struct StateDocument {
    n_sites: usize,
    lattice_constant: f64,
    parity: Parity,
    site: Vec<Site>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl FieldState {
    /// CSV with header `site,a,b`, one row per site in ascending order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["site", "a", "b"])?;
        for (i, s) in self.lattice.sites().enumerate() {
            w.write_record([
                s.to_string(),
                format!("{:.16e}", self.a[i]),
                format!("{:.16e}", self.b[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `site,a,b` format. Every site of `lattice` must appear once.
    pub fn read_csv<R: Read>(lattice: Lattice, reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["site", "a", "b"] {
            return Err(Error::StateFormat(format!(
                "expected header `site,a,b`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let n = lattice.n_sites();
        let mut a = vec![f64::NAN; n];
        let mut b = vec![f64::NAN; n];
        let mut seen = vec![false; n];
        for record in rdr.records() {
            let record = record?;
            let parse_err = |what: &str| Error::StateFormat(format!("bad {what} in row {record:?}"));
            let site: Site = record[0].trim().parse().map_err(|_| parse_err("site"))?;
            if site < lattice.min_site() || site > lattice.max_site() {
                return Err(Error::StateFormat(format!("site {site} outside lattice")));
            }
            let i = lattice.index_of(site);
            if seen[i] {
                return Err(Error::StateFormat(format!("site {site} listed twice")));
            }
            seen[i] = true;
            a[i] = record[1].trim().parse().map_err(|_| parse_err("a"))?;
            b[i] = record[2].trim().parse().map_err(|_| parse_err("b"))?;
        }
        if let Some(missing) = seen.iter().position(|&x| !x) {
            return Err(Error::StateFormat(format!(
                "site {} missing",
                lattice.site_at(missing)
            )));
        }
        Self::new(lattice, a, b)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = StateDocument {
            n_sites: self.lattice.n_sites(),
            lattice_constant: self.lattice.lattice_constant(),
            parity: self.lattice.parity(),
            site: self.lattice.sites().collect(),
            a: self.a.clone(),
            b: self.b.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StateDocument = serde_json::from_str(text)?;
        let lattice = Lattice::with_parity(doc.n_sites, doc.lattice_constant, doc.parity)?;
        if doc.site != lattice.sites().collect::<Vec<_>>() {
            return Err(Error::StateFormat("site column does not match lattice".into()));
        }
        Self::new(lattice, doc.a, doc.b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat(n: usize) -> Lattice {
        Lattice::new(n, 1.0).unwrap()
    }

    #[test]
    fn normalize_simple() {
        let state = FieldState::new(lat(3), vec![2.0, 0.0, 0.0], vec![0.0; 3]).unwrap();
        assert_eq!(state.norm_m(), 4.0);
        let n = state.normalize().unwrap();
        assert_eq!(n.a_field(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn normalize_zero_fails() {
        let err = FieldState::zeros(lat(3)).normalize().unwrap_err();
        assert!(matches!(err, Error::DegenerateState));
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(FieldState::new(lat(3), vec![0.0; 2], vec![0.0; 3]).is_err());
        assert!(FieldState::new(lat(3), vec![f64::NAN, 0.0, 0.0], vec![0.0; 3]).is_err());
    }

    #[test]
    fn gaussian_unboosted() {
        let l = lat(801);
        let st = gaussian_state(&l, 0, 10.0, 0).unwrap();
        assert!(st.b_field().iter().all(|&b| b == 0.0));
        let peak = st
            .a_field()
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .unwrap()
            .0;
        assert_eq!(l.site_at(peak), 0);
        let total: f64 = st.combined_distribution().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_boost_keeps_shape() {
        let l = lat(801);
        let rest = gaussian_state(&l, 0, 10.0, 0).unwrap().combined_distribution();
        let moving = gaussian_state(&l, 0, 10.0, 50).unwrap().combined_distribution();
        for (x, y) in rest.iter().zip(&moving) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_wraps_around_ring() {
        let l = lat(101);
        let st = gaussian_state(&l, 50, 5.0, 0).unwrap();
        let a = st.a_field();
        // Sites 49 and -50 are both one step from the centre.
        assert_eq!(a[l.index_of(49)], a[l.index_of(-50)]);
    }

    #[test]
    fn width_validation() {
        let l = lat(801);
        assert!(gaussian_state(&l, 0, 0.0, 0).is_err());
        assert!(gaussian_state(&l, 0, 401.0, 0).is_err());
        assert!(gaussian_state(&l, 401, 10.0, 0).is_err());
        assert!(uniform_state(&l, 0, 401, 0).is_err());
        assert!(uniform_state(&l, 0, -1, 0).is_err());
    }

    #[test]
    fn uniform_window() {
        let st = uniform_state(&lat(801), 0, 25, 0).unwrap();
        let h = 1.0 / 51f64.sqrt();
        let l = st.lattice();
        for (i, &a) in st.a_field().iter().enumerate() {
            let s = l.site_at(i);
            let want = if s.abs() <= 25 { h } else { 0.0 };
            assert!((a - want).abs() < 1e-15);
        }
        assert!((st.norm_m() - 1.0).abs() < 1e-12);

        let full = uniform_state(&lat(3), 0, 1, 0).unwrap();
        let r = 1.0 / 3f64.sqrt();
        for &a in full.a_field() {
            assert!((a - r).abs() < 1e-15);
        }
    }

    #[test]
    fn random_is_deterministic() {
        let l = lat(801);
        let x = random_state(&l, 42);
        let y = random_state(&l, 42);
        let z = random_state(&l, 43);
        assert_eq!(x, y);
        assert_ne!(x.a_field(), z.a_field());
        assert!((x.norm_m() - 1.0).abs() < 1e-12);
        assert!(x.a_field().iter().chain(x.b_field()).any(|&v| v < 0.0));
    }

    #[test]
    fn boost_zero_is_identity() {
        let st = random_state(&lat(21), 3);
        assert_eq!(st.boost(0.0), st);
    }

    #[test]
    fn csv_round_trip() {
        let st = random_state(&lat(11), 9);
        let mut buf = Vec::new();
        st.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("site,a,b\n-5,"));
        let back = FieldState::read_csv(*st.lattice(), buf.as_slice()).unwrap();
        assert_eq!(back, st);
    }

    #[test]
    fn csv_rejects_gaps() {
        let text = "site,a,b\n-1,1,0\n0,0,0\n";
        let err = FieldState::read_csv(lat(3), text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("missing"));
        let text = "site,a,b\n-1,1,0\n-1,0,0\n1,0,0\n";
        assert!(FieldState::read_csv(lat(3), text.as_bytes()).is_err());
        let text = "s,a,b\n-1,1,0\n0,0,0\n1,0,0\n";
        assert!(FieldState::read_csv(lat(3), text.as_bytes()).is_err());
    }

    #[test]
    fn json_round_trip() {
        let st = gaussian_state(&lat(31), 3, 4.0, 2).unwrap();
        let back = FieldState::from_json(&st.to_json().unwrap()).unwrap();
        assert_eq!(back, st);
    }

    #[test]
    fn spec_builds_each_shape() {
        let l = lat(101);
        for spec in [
            StateSpec::gaussian(0, 5.0, 1),
            StateSpec::uniform(0, 5, 1),
            StateSpec::random(7),
        ] {
            let a = spec.build(&l).unwrap();
            let b = spec.build(&l).unwrap();
            assert_eq!(a, b);
        }
        let mut bad = StateSpec::uniform(0, 5, 0);
        bad.width = 2.5;
        assert!(bad.build(&l).is_err());
    }
}
