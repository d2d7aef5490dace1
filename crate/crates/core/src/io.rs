//! Run configuration files and time-series output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{EulerPath, EvolutionConfig, Scheme};
use crate::lattice::{Lattice, Parity, Site};
use crate::observables::TimeSeries;
use crate::state::{FieldState, Shape, StateSpec};

/// Flat TOML run description. Every key is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_sites: usize,
    pub lattice_constant: f64,
    pub shape: Shape,
    pub center: Site,
    pub width: f64,
    pub velocity_index: i64,
    pub seed: u64,
    pub scheme: Scheme,
    pub tau: f64,
    pub n_steps: usize,
    pub record_every: usize,
    pub parity_mode: Parity,
    pub euler_path: EulerPath,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_json: Option<PathBuf>,
    /// `site,a,b` CSV replacing the generated initial state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_state: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_sites: 801,
            lattice_constant: 1.0,
            shape: Shape::Gaussian,
            center: 0,
            width: 10.0,
            velocity_index: 20,
            seed: 42,
            scheme: Scheme::Euler,
            tau: 1e-3,
            n_steps: 1000,
            record_every: 10,
            parity_mode: Parity::Odd,
            euler_path: EulerPath::Spectral,
            output_csv: None,
            output_json: None,
            initial_state: None,
            final_state: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::with_parity(self.n_sites, self.lattice_constant, self.parity_mode)
    }

    pub fn evolution(&self) -> EvolutionConfig {
        EvolutionConfig {
            tau: self.tau,
            scheme: self.scheme,
            parity_mode: self.parity_mode,
            euler_path: self.euler_path,
        }
    }

    pub fn state_spec(&self) -> StateSpec {
        StateSpec {
            shape: self.shape,
            center: self.center,
            width: self.width,
            velocity_index: self.velocity_index,
            seed: self.seed,
        }
    }

    /// The initial state: read from `initial_state` if set, else generated.
    pub fn initial(&self, lattice: &Lattice) -> Result<FieldState> {
        match &self.initial_state {
            Some(path) => FieldState::read_csv(*lattice, fs::File::open(path)?),
            None => self.state_spec().build(lattice),
        }
    }

    /// Checks everything that does not need a state.
    pub fn validate(&self) -> Result<Lattice> {
        if self.record_every == 0 {
            return Err(Error::InvalidParameter {
                name: "record_every",
                reason: "must be at least 1".into(),
            });
        }
        let lattice = self.lattice()?;
        self.evolution().validate(&lattice)?;
        Ok(lattice)
    }
}

pub const SERIES_HEADER: [&str; 7] = [
    "step",
    "m_total",
    "drift_velocity",
    "momentum_expectation",
    "position_mean",
    "position_spread",
    "shape_residual",
];

pub fn write_series_csv<W: Write>(series: &TimeSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SERIES_HEADER)?;
    for s in &series.snapshots {
        let mut row = vec![s.step.to_string()];
        row.extend(
            [
                s.m_total,
                s.drift_velocity,
                s.momentum_expectation,
                s.position_mean,
                s.position_spread,
                s.shape_residual,
            ]
            .iter()
            .map(|x| format!("{x:.16e}")),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series_csv<R: std::io::Read>(reader: R) -> Result<TimeSeries> {
    let mut rdr = csv::Reader::from_reader(reader);
    if rdr.headers()?.iter().collect::<Vec<_>>() != SERIES_HEADER {
        return Err(Error::StateFormat("unexpected time-series header".into()));
    }
    let mut series = TimeSeries::default();
    for record in rdr.deserialize() {
        series.snapshots.push(record?);
    }
    Ok(series)
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    contents(tmp.as_file_mut())?;
    tmp.as_file_mut().flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn save_series_csv(series: &TimeSeries, path: &Path) -> Result<()> {
    write_atomic(path, |f| write_series_csv(series, f))
}

pub fn save_series_json(series: &TimeSeries, path: &Path) -> Result<()> {
    write_atomic(path, |f| {
        serde_json::to_writer_pretty(&mut *f, series)?;
        Ok(())
    })
}

pub fn save_state_csv(state: &FieldState, path: &Path) -> Result<()> {
    write_atomic(path, |f| state.write_csv(f))
}

pub fn save_text(text: &str, path: &Path) -> Result<()> {
    write_atomic(path, |f| Ok(f.write_all(text.as_bytes())?))
}
