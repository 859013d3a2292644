//! File plumbing shared by the subcommands: key = value documents,
//! transform and target files, atomic output writes, and the run
//! report.

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{Matrix3, Vector3};
use std::collections::HashMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use wallscan::{Point3, RigidTransform};

/// A parsed `key = value` document (config, scene spec).
#[derive(Debug, Default)]
pub struct KeyValues {
    path: PathBuf,
    map: HashMap<String, String>,
}

impl KeyValues {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let mut map = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                anyhow!("{}:{}: expected 'key = value'", path.display(), idx + 1)
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(KeyValues { path: path.to_path_buf(), map })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    /// Typed lookup; a present but unparsable value is an error naming
    /// the file and key.
    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                anyhow!("{}: bad value '{raw}' for key '{key}'", self.path.display())
            }),
        }
    }
}

/// Flag value if given, else config value, else the default.
pub fn pick<T: FromStr + Clone>(
    flag: &Option<T>,
    config: &Option<KeyValues>,
    key: &str,
    default: T,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v.clone());
    }
    if let Some(cfg) = config {
        if let Some(v) = cfg.parse::<T>(key)? {
            return Ok(v);
        }
    }
    Ok(default)
}

/// Like [`pick`] but without a default; `what` names the missing input.
pub fn pick_required<T: FromStr + Clone>(
    flag: &Option<T>,
    config: &Option<KeyValues>,
    key: &str,
    what: &str,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v.clone());
    }
    if let Some(cfg) = config {
        if let Some(v) = cfg.parse::<T>(key)? {
            return Ok(v);
        }
    }
    bail!("{what} is required (--{key} or config key '{key}')")
}

/// Writes `dest` via a temp file in the same directory plus a rename,
/// so a crash never leaves a half-written artifact.
pub fn atomic_write(
    dest: &Path,
    write: impl FnOnce(&Path) -> Result<()>,
) -> Result<()> {
    let mut name = dest
        .file_name()
        .ok_or_else(|| anyhow!("{}: not a file path", dest.display()))?
        .to_os_string();
    name.push(".tmp");
    let tmp = dest.with_file_name(name);
    write(&tmp)?;
    fs::rename(&tmp, dest)
        .with_context(|| format!("cannot move {} into place", dest.display()))?;
    Ok(())
}

const TRANSFORM_KEYS: [&str; 12] = [
    "r00", "r01", "r02", "r10", "r11", "r12", "r20", "r21", "r22", "tx", "ty", "tz",
];

/// Writes a rigid transform as `key = value` rows (r00..r22, tx..tz).
pub fn write_transform(path: &Path, transform: &RigidTransform) -> Result<()> {
    atomic_write(path, |tmp| {
        let r = transform.rotation();
        let t = transform.translation();
        let mut text = String::from("# rigid-transform\n");
        for row in 0..3 {
            for col in 0..3 {
                text.push_str(&format!("r{row}{col} = {}\n", r[(row, col)]));
            }
        }
        text.push_str(&format!("tx = {}\nty = {}\ntz = {}\n", t.x, t.y, t.z));
        fs::write(tmp, text).with_context(|| format!("cannot write {}", tmp.display()))
    })
}

/// Reads a transform written by [`write_transform`]; orthonormality is
/// revalidated.
pub fn read_transform(path: &Path) -> Result<RigidTransform> {
    let kv = KeyValues::read(path)?;
    let mut vals = [0.0f64; 12];
    for (slot, key) in vals.iter_mut().zip(TRANSFORM_KEYS) {
        *slot = kv
            .parse::<f64>(key)?
            .ok_or_else(|| anyhow!("{}: missing key '{key}'", path.display()))?;
    }
    let rotation = Matrix3::new(
        vals[0], vals[1], vals[2], vals[3], vals[4], vals[5], vals[6], vals[7], vals[8],
    );
    let translation = Vector3::new(vals[9], vals[10], vals[11]);
    RigidTransform::from_parts(rotation, translation)
        .with_context(|| format!("{}: not a rigid transform", path.display()))
}

/// Reads a corresponding-points file: one pair per line as
/// `rx ry rz qx qy qz`, `#` comments allowed.
pub fn read_targets(path: &Path) -> Result<Vec<(Point3, Point3)>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    anyhow!("{}:{}: bad number '{tok}'", path.display(), idx + 1)
                })
            })
            .collect::<Result<_>>()?;
        if fields.len() != 6 {
            bail!(
                "{}:{}: expected 6 numbers (rx ry rz qx qy qz), found {}",
                path.display(),
                idx + 1,
                fields.len()
            );
        }
        pairs.push((
            Point3::new(fields[0], fields[1], fields[2]),
            Point3::new(fields[3], fields[4], fields[5]),
        ));
    }
    Ok(pairs)
}

/// A run report: ordered `key = value` lines with a stable key set,
/// machine-readable, one file per command.
pub struct RunReport {
    lines: Vec<(String, String)>,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        let mut report = RunReport { lines: Vec::new() };
        report.push("tool", format!("wallscan {}", env!("CARGO_PKG_VERSION")));
        report.push("command", command);
        report
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, |tmp| {
            let mut text = String::new();
            for (key, value) in &self.lines {
                text.push_str(key);
                text.push_str(" = ");
                text.push_str(value);
                text.push('\n');
            }
            fs::write(tmp, text).with_context(|| format!("cannot write {}", tmp.display()))
        })
    }
}

/// mean/min/max over valid cells, in millimetres, plus coverage.
pub struct MapSummary {
    pub valid_cells: usize,
    pub total_cells: usize,
    pub mean_mm: f64,
    pub min_mm: f64,
    pub max_mm: f64,
}

pub fn summarize_map(map: &wallscan::DeformationMap) -> Option<MapSummary> {
    let (nx, nz) = map.dims();
    let mut count = 0usize;
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (_, _, v) in map.valid_cells() {
        count += 1;
        sum += v;
        min = min.min(v);
        max = max.max(v);
    }
    (count > 0).then(|| MapSummary {
        valid_cells: count,
        total_cells: nx * nz,
        mean_mm: sum / count as f64,
        min_mm: min,
        max_mm: max,
    })
}
