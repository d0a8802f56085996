//! Time series produced by a closed-loop run, plus CSV serialization.
//!
//! `samples.csv` columns:
//!
//! | column | unit | meaning |
//! |---|---|---|
//! | `t` | s | time |
//! | `s` | m | interface position |
//! | `q_c` | W/m² | heat flux applied over the following step |
//! | `T_l0` | °C | liquid temperature at `x = 0` |
//! | `T_sL` | °C | solid temperature at `x = L` |
//! | `E` | J/m² | internal energy |
//! | `injected` | J/m² | cumulative `Σ q_c Δt` up to `t` |
//! | `s_dot` | m/s | interface velocity from the one-sided stencils |
//! | `liquid_ok`, `solid_ok`, `interface_ok`, `liquid_flux_ok`, `solid_flux_ok` | 0/1 | validity flags |
//!
//! `profiles.csv` columns: `snapshot`, `t`, `phase` (`liquid`/`solid`),
//! `node`, `coord` (ξ or η on `[0, 1]`), `x` (m), `T` (°C).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::StefanError;
use crate::physics::{PlantState, ValidityReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub s: f64,
    pub q_c: f64,
    /// `T_l(0) - T_m`.
    pub liquid_boundary: f64,
    /// `T_s(L) - T_m`.
    pub solid_boundary: f64,
    pub energy: f64,
    pub injected: f64,
    pub s_dot: f64,
    pub validity: ValidityReport,
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    Failed(StefanError),
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub melt_temp: f64,
    pub length: f64,
    pub samples: Vec<Sample>,
    pub snapshots: Vec<PlantState>,
    pub status: RunStatus,
    /// Non-fatal notes (e.g. oracle resolution warnings).
    pub warnings: Vec<String>,
}

impl Trace {
    pub fn new(melt_temp: f64, length: f64) -> Self {
        Self {
            melt_temp,
            length,
            samples: Vec::new(),
            snapshots: Vec::new(),
            status: RunStatus::Completed,
            warnings: Vec::new(),
        }
    }

    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.s).collect()
    }

    /// Linear interpolation of `s(t)` between samples.
    pub fn position_at(&self, t: f64) -> Option<f64> {
        let smp = &self.samples;
        if smp.is_empty() || t < smp[0].t || t > smp[smp.len() - 1].t {
            return None;
        }
        let i = smp.partition_point(|x| x.t < t);
        if i == 0 {
            return Some(smp[0].s);
        }
        let (a, b) = (&smp[i - 1], &smp[i]);
        let w = (t - a.t) / (b.t - a.t);
        Some(a.s + w * (b.s - a.s))
    }

    pub fn write_samples<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t",
            "s",
            "q_c",
            "T_l0",
            "T_sL",
            "E",
            "injected",
            "s_dot",
            "liquid_ok",
            "solid_ok",
            "interface_ok",
            "liquid_flux_ok",
            "solid_flux_ok",
        ])?;
        let flag = |b: bool| if b { "1" } else { "0" };
        for s in &self.samples {
            let v = &s.validity;
            w.write_record([
                fmt(s.t),
                fmt(s.s),
                fmt(s.q_c),
                fmt(self.melt_temp + s.liquid_boundary),
                fmt(self.melt_temp + s.solid_boundary),
                fmt(s.energy),
                fmt(s.injected),
                fmt(s.s_dot),
                flag(v.liquid_above_melting.ok).into(),
                flag(v.solid_below_melting.ok).into(),
                flag(v.interface_interior.ok).into(),
                flag(v.liquid_flux_sign.ok).into(),
                flag(v.solid_flux_sign.ok).into(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_profiles<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["snapshot", "t", "phase", "node", "coord", "x", "T"])?;
        for (k, st) in self.snapshots.iter().enumerate() {
            let nl = st.n_liquid();
            for (j, u) in st.liquid.iter().enumerate() {
                w.write_record([
                    k.to_string(),
                    fmt(st.t),
                    "liquid".into(),
                    j.to_string(),
                    fmt(j as f64 / (nl - 1) as f64),
                    fmt(st.liquid_x(j)),
                    fmt(self.melt_temp + u),
                ])?;
            }
            let ns = st.n_solid();
            for (j, v) in st.solid.iter().enumerate() {
                w.write_record([
                    k.to_string(),
                    fmt(st.t),
                    "solid".into(),
                    j.to_string(),
                    fmt(j as f64 / (ns - 1) as f64),
                    fmt(st.solid_x(j)),
                    fmt(self.melt_temp + v),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_samples(&self, path: &Path) -> std::io::Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_samples(f).map_err(std::io::Error::other)
    }

    pub fn save_profiles(&self, path: &Path) -> std::io::Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_profiles(f).map_err(std::io::Error::other)
    }
}

/// Shortest round-trip representation, so repeated runs are byte-identical.
pub(crate) fn fmt(x: f64) -> String {
    format!("{x:e}")
}
