//! Append-only text store of unit-box spectra.
//!
//! `spectra.txt` in the cache directory starts with the line
//!
//! ```text
//! # szilard spectrum cache
//! ```
//!
//! and holds one record per line, as whitespace-separated `key=value` fields:
//!
//! ```text
//! format-version=1 n=3 g_eff=-0.05 M=9 E_cut=172.7 K=4 solver-tolerance=1e-9 \
//!     tau-max=1.2 modes=11 e-cut=259.1 dim=87 dlnz=3.1e-6 converged=1 energies=14.8,44.4,...
//! ```
//!
//! (shown wrapped; a record is a single line). `M` and `E_cut` are the requested
//! basis that keys the record; `modes`/`e-cut`/`dim` describe the basis actually used.
//! `K` counts the ascending `energies`. Floats use Rust's shortest round-trip form,
//! so a reloaded spectrum is bit-identical. Records with another `format-version`
//! are skipped. Writers hold an exclusive advisory lock on `spectra.lock`.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::spectrum::UnitSpectrum;
use crate::units::SubsystemKey;

pub const FORMAT_VERSION: u32 = 1;
const HEADER: &str = "# szilard spectrum cache";
const DATA_FILE: &str = "spectra.txt";
const LOCK_FILE: &str = "spectra.lock";

#[derive(Debug)]
pub struct DiskCache {
    dir: PathBuf,
}

impl DiskCache {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(DiskCache {
            dir: dir.to_path_buf(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn data_path(&self) -> PathBuf {
        self.dir.join(DATA_FILE)
    }

    fn lock(&self) -> Result<File> {
        let f = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(self.dir.join(LOCK_FILE))?;
        f.lock()?;
        Ok(f)
    }

    pub fn load(&self) -> Result<Vec<UnitSpectrum>> {
        let path = self.data_path();
        if !path.exists() {
            return Ok(Vec::new());
        }
        let _guard = self.lock()?;
        let reader = BufReader::new(File::open(&path)?);
        let mut out = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            if let Some(record) = parse_record(&line) {
                out.push(record);
            }
        }
        Ok(out)
    }

    pub fn append(&self, spectrum: &UnitSpectrum) -> Result<()> {
        let _guard = self.lock()?;
        let path = self.data_path();
        let fresh = !path.exists();
        let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut text = String::new();
        if fresh {
            text.push_str(HEADER);
            text.push('\n');
        }
        text.push_str(&format_record(spectrum));
        text.push('\n');
        f.write_all(text.as_bytes())?;
        Ok(())
    }

    pub fn clear(&self) -> Result<()> {
        let _guard = self.lock()?;
        let path = self.data_path();
        if path.exists() {
            fs::remove_file(path)?;
        }
        Ok(())
    }
}

pub fn format_record(s: &UnitSpectrum) -> String {
    let energies: Vec<String> = s.energies.iter().map(|e| e.to_string()).collect();
    format!(
        "format-version={} n={} g_eff={} M={} E_cut={} K={} solver-tolerance={} tau-max={} \
         modes={} e-cut={} dim={} dlnz={} converged={} energies={}",
        FORMAT_VERSION,
        s.key.n,
        s.key.g_eff,
        s.key.basis_size,
        s.key.energy_cutoff,
        s.energies.len(),
        s.solver_tolerance,
        s.max_temperature,
        s.modes,
        s.e_cut,
        s.dimension,
        s.delta_log_z,
        u8::from(s.converged),
        energies.join(",")
    )
}

pub fn parse_record(line: &str) -> Option<UnitSpectrum> {
    let fields: HashMap<&str, &str> = line
        .split_whitespace()
        .filter_map(|tok| tok.split_once('='))
        .collect();
    let version: u32 = fields.get("format-version")?.parse().ok()?;
    if version != FORMAT_VERSION {
        return None;
    }
    let f = |k: &str| -> Option<f64> { fields.get(k)?.parse().ok() };
    let u = |k: &str| -> Option<usize> { fields.get(k)?.parse().ok() };
    let energies: Vec<f64> = fields
        .get("energies")?
        .split(',')
        .map(|e| e.parse())
        .collect::<std::result::Result<_, _>>()
        .ok()?;
    if energies.len() != u("K")? || energies.is_empty() {
        return None;
    }
    Some(UnitSpectrum {
        key: SubsystemKey {
            n: u("n")?,
            g_eff: f("g_eff")?,
            basis_size: u("M")?,
            energy_cutoff: f("E_cut")?,
        },
        energies,
        max_temperature: f("tau-max")?,
        modes: u("modes")?,
        e_cut: f("e-cut")?,
        dimension: u("dim")?,
        delta_log_z: f("dlnz")?,
        converged: u("converged")? == 1,
        solver_tolerance: f("solver-tolerance")?,
    })
}
