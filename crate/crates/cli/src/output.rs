//! Artifact writers. Every CSV starts with a `#` line carrying the config
//! hash and the effective-unit constants.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use dqd_core::fields::{spectrum, ControlField};
use dqd_core::propagate::Trajectory;
use dqd_core::units::UnitSystem;
use serde_json::{json, Value};

pub struct Artifacts {
    dir: PathBuf,
    digest: String,
    units: UnitSystem,
}

impl Artifacts {
    pub fn new(dir: &Path, digest: String) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            digest,
            units: UnitSystem::gaas(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn header(&self) -> String {
        format!(
            "# config_sha256={} E_h_meV={} a0_nm={} t0_fs={}",
            self.digest, self.units.energy_mev, self.units.length_nm, self.units.time_fs
        )
    }

    pub fn units_json(&self) -> Value {
        json!({
            "E_h_meV": self.units.energy_mev,
            "a0_nm": self.units.length_nm,
            "t0_fs": self.units.time_fs,
        })
    }

    /// Opens `name` and writes the comment line and the column header.
    pub fn csv(&self, name: &str, columns: &str) -> io::Result<BufWriter<File>> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        writeln!(w, "{}", self.header())?;
        writeln!(w, "{columns}")?;
        Ok(w)
    }

    pub fn write_field(&self, name: &str, field: &ControlField) -> io::Result<()> {
        let mut w = self.csv(name, "t,epsilon")?;
        for (t, e) in field.mesh().times().iter().zip(field.samples()) {
            writeln!(w, "{t:.6},{e:.12e}")?;
        }
        w.flush()
    }

    /// Columns `p0..p{k-1}` for the eigenstates followed by `pL,pR`.
    pub fn write_occupations(&self, name: &str, traj: &Trajectory, n_states: usize) -> io::Result<()> {
        let mut columns = String::from("t");
        for j in 0..n_states {
            columns.push_str(&format!(",p{j}"));
        }
        columns.push_str(",pL,pR");
        let mut w = self.csv(name, &columns)?;
        for (t, row) in traj.times.iter().zip(&traj.occupations) {
            write!(w, "{t:.6}")?;
            for p in row {
                write!(w, ",{p:.12e}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    /// Fourier coefficients scaled by `dt`, sorted by frequency.
    pub fn write_spectrum(&self, name: &str, field: &ControlField) -> io::Result<()> {
        let dt = field.mesh().dt();
        let mut w = self.csv(name, "omega,re,im,abs")?;
        for (omega, a) in spectrum(field).sorted() {
            let a = a * dt;
            writeln!(w, "{omega:.12e},{:.12e},{:.12e},{:.12e}", a.re, a.im, a.norm())?;
        }
        w.flush()
    }

    pub fn write_json(&self, name: &str, value: &Value) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(self.path(name), text)
    }
}

/// `omega_th` as JSON: `null` when no filter is applied.
pub fn threshold_json(omega_th: f64) -> Value {
    if omega_th.is_finite() {
        json!(omega_th)
    } else {
        Value::Null
    }
}

/// `omega_th` for CSV cells.
pub fn threshold_cell(omega_th: f64) -> String {
    if omega_th.is_finite() {
        format!("{omega_th}")
    } else {
        "inf".to_string()
    }
}

/// Reads a field CSV written by [`Artifacts::write_field`].
pub fn read_field(path: &Path) -> Result<ControlField, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read base field {}: {e}", path.display()))?;
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("t,") {
            continue;
        }
        let (t, e) = line
            .split_once(',')
            .ok_or_else(|| format!("{}: malformed row `{line}`", path.display()))?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|err| format!("{}: `{s}`: {err}", path.display()));
        times.push(parse(t)?);
        samples.push(parse(e)?);
    }
    if samples.len() < 2 {
        return Err(format!("{}: need at least two samples", path.display()));
    }
    let t_final = times[times.len() - 1] - times[0];
    let mesh = dqd_core::fields::TimeMesh::new(t_final, samples.len() - 1).map_err(|e| e.to_string())?;
    ControlField::new(mesh, samples).map_err(|e| e.to_string())
}
