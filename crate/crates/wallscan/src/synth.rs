//! Synthetic scenes with exact ground truth: wavy walls, recessed
//! facades, smooth imposed deformation fields, and range noise.
//!
//! Geometry is deterministic; the seed drives only the noise
//! realization, so two specs differing in seed alone produce identical
//! noise-free coordinates.

use crate::cloud::{FrameTag, PointCloud};
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::scalar::{cast, to_f64, Real};
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Parameters of a wavy synthetic wall.
///
/// The surface is y = A sin(2 pi x / lambda) sin(2 pi z / lambda) plus
/// Gaussian range noise, sampled on an exact x-z grid starting at the
/// origin.
#[derive(Debug, Clone)]
pub struct WallSpec<S> {
    /// Wall length along x (metres).
    pub extent: S,
    /// Wall height along z (metres).
    pub height: S,
    /// Grid spacing (metres).
    pub spacing: S,
    /// Waviness amplitude A (metres); 0 gives a plane.
    pub amplitude: S,
    /// Waviness wavelength lambda (metres).
    pub wavelength: S,
    /// Gaussian range-noise sigma along y (metres); 0 disables noise.
    pub sigma: S,
    pub seed: u64,
}

impl<S: Real> Default for WallSpec<S> {
    fn default() -> Self {
        WallSpec {
            extent: cast(4.0),
            height: cast(2.0),
            spacing: cast(0.005),
            amplitude: cast(0.03),
            wavelength: cast(0.3),
            sigma: cast(0.0015),
            seed: 0,
        }
    }
}

impl<S: Real> WallSpec<S> {
    fn validate(&self) -> Result<()> {
        let positive = [self.extent, self.height, self.spacing, self.wavelength];
        if positive.iter().any(|v| !Float::is_finite(*v) || *v <= S::zero()) {
            return Err(Error::param(
                "wall extent, height, spacing and wavelength must be positive",
            ));
        }
        if !Float::is_finite(self.amplitude) || self.amplitude < S::zero() {
            return Err(Error::param("waviness amplitude must be non-negative"));
        }
        if !Float::is_finite(self.sigma) || self.sigma < S::zero() {
            return Err(Error::param("noise sigma must be non-negative"));
        }
        Ok(())
    }
}

/// Number of grid samples covering `[0, extent]` at `spacing`.
fn grid_count(extent: f64, spacing: f64) -> usize {
    (extent / spacing + 1e-9).floor() as usize + 1
}

/// Generates a wavy wall cloud in the wall-local frame.
pub fn gen_wall<S: Real>(spec: &WallSpec<S>) -> Result<PointCloud<S>> {
    spec.validate()?;
    let nx = grid_count(to_f64(spec.extent), to_f64(spec.spacing));
    let nz = grid_count(to_f64(spec.height), to_f64(spec.spacing));
    let two_pi = cast::<S>(2.0 * std::f64::consts::PI);
    let mut noise = if spec.sigma > S::zero() {
        let normal = Normal::new(0.0, to_f64(spec.sigma))
            .map_err(|_| Error::param("noise sigma must be finite"))?;
        Some((ChaCha8Rng::seed_from_u64(spec.seed), normal))
    } else {
        None
    };
    let mut points = Vec::with_capacity(nx * nz);
    for i in 0..nx {
        let x = cast::<S>(i as f64) * spec.spacing;
        let sx = Float::sin(two_pi * x / spec.wavelength);
        for j in 0..nz {
            let z = cast::<S>(j as f64) * spec.spacing;
            let mut y = spec.amplitude * sx * Float::sin(two_pi * z / spec.wavelength);
            if let Some((rng, normal)) = &mut noise {
                y += cast(normal.sample(rng));
            }
            points.push(Point3::new(x, y, z));
        }
    }
    PointCloud::new(points, FrameTag::WallLocal, "synthetic-wall")
}

/// A smooth y-displacement field over an x-z rectangle, stored as a
/// bicubic (Catmull-Rom) patch over a grid of control values. Border
/// tangents come from linearly extrapolated ghost values, so fields that
/// are linear in x and z are reproduced exactly.
#[derive(Debug, Clone)]
pub struct DeformationField<S> {
    x0: S,
    z0: S,
    dx: S,
    dz: S,
    nx: usize,
    nz: usize,
    /// Row-major control values, z-major: `values[j * nx + i]`.
    values: Vec<S>,
    max_magnitude: S,
}

impl<S: Real> DeformationField<S> {
    /// Builds a field from explicit control values (`nx * nz`, z-major).
    pub fn new(origin: [S; 2], cell: [S; 2], nx: usize, nz: usize, values: Vec<S>) -> Result<Self> {
        if nx < 2 || nz < 2 {
            return Err(Error::param("a deformation field needs at least 2x2 control values"));
        }
        if cell[0] <= S::zero() || cell[1] <= S::zero() {
            return Err(Error::param("control cell sizes must be positive"));
        }
        if values.len() != nx * nz {
            return Err(Error::param(format!(
                "expected {} control values, got {}",
                nx * nz,
                values.len()
            )));
        }
        if values.iter().any(|v| !Float::is_finite(*v))
            || origin.iter().any(|v| !Float::is_finite(*v))
        {
            return Err(Error::param("field control data must be finite"));
        }
        let peak = values.iter().fold(S::zero(), |m, v| Float::max(m, Float::abs(*v)));
        // separable interpolation bound: each 1D pass returns at most
        // max|value| + max|tangent| / 4 <= 1.5 max|value|
        let max_magnitude = cast::<S>(2.25) * peak;
        Ok(DeformationField {
            x0: origin[0],
            z0: origin[1],
            dx: cell[0],
            dz: cell[1],
            nx,
            nz,
            values,
            max_magnitude,
        })
    }

    /// Uniform field with the given value over `[min, max]`.
    pub fn constant(min: [S; 2], max: [S; 2], value: S) -> Result<Self> {
        if max[0] <= min[0] || max[1] <= min[1] {
            return Err(Error::param("field extent must be non-empty"));
        }
        DeformationField::new(
            min,
            [max[0] - min[0], max[1] - min[1]],
            2,
            2,
            vec![value; 4],
        )
    }

    /// Samples `f(x, z)` on an `nx` by `nz` control grid over
    /// `[min, max]`.
    pub fn from_fn(
        min: [S; 2],
        max: [S; 2],
        nx: usize,
        nz: usize,
        f: impl Fn(S, S) -> S,
    ) -> Result<Self> {
        if nx < 2 || nz < 2 {
            return Err(Error::param("a deformation field needs at least 2x2 control values"));
        }
        if max[0] <= min[0] || max[1] <= min[1] {
            return Err(Error::param("field extent must be non-empty"));
        }
        let dx = (max[0] - min[0]) / cast((nx - 1) as f64);
        let dz = (max[1] - min[1]) / cast((nz - 1) as f64);
        let mut values = Vec::with_capacity(nx * nz);
        for j in 0..nz {
            let z = min[1] + cast::<S>(j as f64) * dz;
            for i in 0..nx {
                let x = min[0] + cast::<S>(i as f64) * dx;
                values.push(f(x, z));
            }
        }
        DeformationField::new(min, [dx, dz], nx, nz, values)
    }

    /// The field with every control value negated; evaluates to exactly
    /// the negation of `self` everywhere.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = -*v;
        }
        out
    }

    /// Upper bound on |field| over its domain.
    pub fn max_magnitude(&self) -> S {
        self.max_magnitude
    }

    /// Domain rectangle as `(min, max)` corners.
    pub fn domain(&self) -> ([S; 2], [S; 2]) {
        (
            [self.x0, self.z0],
            [
                self.x0 + self.dx * cast((self.nx - 1) as f64),
                self.z0 + self.dz * cast((self.nz - 1) as f64),
            ],
        )
    }

    pub fn covers(&self, x: S, z: S) -> bool {
        self.offset(x, z).is_some()
    }

    /// Grid offsets of (x, z), or None outside the domain. A relative
    /// slack of 1e-6 cells absorbs round-off at the domain edges.
    fn offset(&self, x: S, z: S) -> Option<(f64, f64)> {
        let sx = to_f64((x - self.x0) / self.dx);
        let sz = to_f64((z - self.z0) / self.dz);
        let tol = 1e-6;
        let inside = |s: f64, n: usize| -> Option<f64> {
            let max = (n - 1) as f64;
            if s < -tol || s > max + tol {
                None
            } else {
                Some(s.clamp(0.0, max))
            }
        };
        Some((inside(sx, self.nx)?, inside(sz, self.nz)?))
    }

    /// Control value with ghost rows and columns linearly extrapolated
    /// one step past the border.
    fn control(&self, i: isize, j: isize) -> S {
        let two = cast::<S>(2.0);
        let fetch = |i: usize, j: usize| self.values[j * self.nx + i];
        let col = |j: usize| -> S {
            if i < 0 {
                two * fetch(0, j) - fetch(1, j)
            } else if i as usize >= self.nx {
                two * fetch(self.nx - 1, j) - fetch(self.nx - 2, j)
            } else {
                fetch(i as usize, j)
            }
        };
        if j < 0 {
            two * col(0) - col(1)
        } else if j as usize >= self.nz {
            two * col(self.nz - 1) - col(self.nz - 2)
        } else {
            col(j as usize)
        }
    }

    /// Displacement at (x, z) in metres; errors outside the domain.
    pub fn evaluate(&self, x: S, z: S) -> Result<S> {
        let (sx, sz) = self.offset(x, z).ok_or_else(|| {
            Error::param(format!(
                "({}, {}) lies outside the deformation field domain",
                to_f64(x),
                to_f64(z)
            ))
        })?;
        let ci = (sx.floor() as usize).min(self.nx - 2);
        let cj = (sz.floor() as usize).min(self.nz - 2);
        let tx = cast::<S>(sx - ci as f64);
        let tz = cast::<S>(sz - cj as f64);
        let mut rows = [S::zero(); 4];
        for (r, row) in rows.iter_mut().enumerate() {
            let j = cj as isize + r as isize - 1;
            *row = catmull_rom(
                self.control(ci as isize - 1, j),
                self.control(ci as isize, j),
                self.control(ci as isize + 1, j),
                self.control(ci as isize + 2, j),
                tx,
            );
        }
        Ok(catmull_rom(rows[0], rows[1], rows[2], rows[3], tz))
    }

    /// Writes the patch as structured text; `read` restores it exactly.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(out, "deformation-field")?;
            writeln!(out, "x0 = {}", to_f64(self.x0))?;
            writeln!(out, "z0 = {}", to_f64(self.z0))?;
            writeln!(out, "dx = {}", to_f64(self.dx))?;
            writeln!(out, "dz = {}", to_f64(self.dz))?;
            writeln!(out, "nx = {}", self.nx)?;
            writeln!(out, "nz = {}", self.nz)?;
            for j in 0..self.nz {
                write!(out, "row =")?;
                for i in 0..self.nx {
                    write!(out, " {}", to_f64(self.values[j * self.nx + i]))?;
                }
                writeln!(out)?;
            }
            out.flush()
        };
        write(&mut out).map_err(|e| Error::io(path, e))
    }

    /// Reads a patch written by [`DeformationField::write`].
    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut fields = (f64::NAN, f64::NAN, f64::NAN, f64::NAN, 0usize, 0usize);
        let mut seen = [false; 6];
        let mut rows: Vec<Vec<S>> = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if lineno == 1 {
                if line != "deformation-field" {
                    return Err(Error::parse(path, 1, "not a deformation field file"));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, lineno, "expected 'key = value'"))?;
            let (key, value) = (key.trim(), value.trim());
            let parse_f = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| Error::parse(path, lineno, format!("bad number '{v}'")))
            };
            let parse_n = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::parse(path, lineno, format!("bad count '{v}'")))
            };
            match key {
                "x0" => (fields.0, seen[0]) = (parse_f(value)?, true),
                "z0" => (fields.1, seen[1]) = (parse_f(value)?, true),
                "dx" => (fields.2, seen[2]) = (parse_f(value)?, true),
                "dz" => (fields.3, seen[3]) = (parse_f(value)?, true),
                "nx" => (fields.4, seen[4]) = (parse_n(value)?, true),
                "nz" => (fields.5, seen[5]) = (parse_n(value)?, true),
                "row" => {
                    let mut row = Vec::new();
                    for tok in value.split_whitespace() {
                        row.push(cast::<S>(parse_f(tok)?));
                    }
                    rows.push(row);
                }
                other => {
                    return Err(Error::parse(path, lineno, format!("unknown key '{other}'")));
                }
            }
        }
        if !seen.iter().all(|s| *s) {
            return Err(Error::parse(path, 1, "missing header keys"));
        }
        let (x0, z0, dx, dz, nx, nz) = fields;
        if rows.len() != nz || rows.iter().any(|r| r.len() != nx) {
            return Err(Error::parse(
                path,
                1,
                format!("expected {nz} rows of {nx} values"),
            ));
        }
        let values = rows.into_iter().flatten().collect();
        DeformationField::new([cast(x0), cast(z0)], [cast(dx), cast(dz)], nx, nz, values)
    }
}

/// Catmull-Rom interpolation of p1..p2 at t in [0, 1].
fn catmull_rom<S: Real>(p0: S, p1: S, p2: S, p3: S, t: S) -> S {
    let half = cast::<S>(0.5);
    let two = cast::<S>(2.0);
    let three = cast::<S>(3.0);
    let four = cast::<S>(4.0);
    let five = cast::<S>(5.0);
    let c0 = two * p1;
    let c1 = p2 - p0;
    let c2 = two * p0 - five * p1 + four * p2 - p3;
    let c3 = -p0 + three * p1 - three * p2 + p3;
    half * (c0 + t * (c1 + t * (c2 + t * c3)))
}

/// Shifts each point's y by the field value at its (x, z); x and z are
/// untouched. The cloud must be in the wall-local frame and fully inside
/// the field domain.
pub fn deform_wall<S: Real>(
    cloud: &PointCloud<S>,
    field: &DeformationField<S>,
) -> Result<PointCloud<S>> {
    if cloud.frame() != FrameTag::WallLocal {
        return Err(Error::param(format!(
            "deformation fields apply in the wall-local frame, cloud is in the {} frame",
            cloud.frame()
        )));
    }
    let mut points = Vec::with_capacity(cloud.len());
    for p in cloud.points() {
        let dy = field.evaluate(p.x, p.z)?;
        points.push(Point3::new(p.x, p.y + dy, p.z));
    }
    PointCloud::new(points, cloud.frame(), cloud.label())
}

/// Parameters of a synthetic facade: a plane with a grid of recessed
/// rectangular windows whose jambs constrain registration in all six
/// degrees of freedom.
#[derive(Debug, Clone)]
pub struct FacadeSpec<S> {
    /// Facade width along x (metres); the cloud is centred on the
    /// origin.
    pub width: S,
    /// Facade height along z (metres).
    pub height: S,
    /// Grid spacing (metres).
    pub spacing: S,
    /// Window grid rows (vertical count); 0 gives a pure plane.
    pub window_rows: usize,
    /// Window grid columns; 0 gives a pure plane.
    pub window_cols: usize,
    /// Window opening width along x (metres).
    pub window_width: S,
    /// Window opening height along z (metres).
    pub window_height: S,
    /// Recess depth along -y (metres); 0 degenerates to a plane.
    pub recess_depth: S,
    /// Gaussian range-noise sigma along y (metres).
    pub sigma: S,
    pub seed: u64,
}

impl<S: Real> Default for FacadeSpec<S> {
    fn default() -> Self {
        FacadeSpec {
            width: cast(4.0),
            height: cast(2.5),
            spacing: cast(0.02),
            window_rows: 3,
            window_cols: 3,
            window_width: cast(0.6),
            window_height: cast(0.5),
            recess_depth: cast(0.08),
            sigma: S::zero(),
            seed: 0,
        }
    }
}

impl<S: Real> FacadeSpec<S> {
    fn validate(&self) -> Result<()> {
        let positive = [self.width, self.height, self.spacing];
        if positive.iter().any(|v| !Float::is_finite(*v) || *v <= S::zero()) {
            return Err(Error::param("facade width, height and spacing must be positive"));
        }
        if !Float::is_finite(self.recess_depth) || self.recess_depth < S::zero() {
            return Err(Error::param("recess depth must be non-negative"));
        }
        if !Float::is_finite(self.sigma) || self.sigma < S::zero() {
            return Err(Error::param("noise sigma must be non-negative"));
        }
        if self.window_rows > 0 && self.window_cols > 0 {
            if self.window_width <= S::zero() || self.window_height <= S::zero() {
                return Err(Error::param("window dimensions must be positive"));
            }
            let pitch_x = self.width / cast((self.window_cols + 1) as f64);
            let pitch_z = self.height / cast((self.window_rows + 1) as f64);
            if self.window_width >= pitch_x || self.window_height >= pitch_z {
                return Err(Error::param(
                    "windows overlap each other or the facade edge; shrink them or the grid",
                ));
            }
        }
        Ok(())
    }
}

/// Generates a facade cloud centred on the origin, facade plane at
/// y = 0, recesses toward -y. Window jambs are sampled every grid step
/// of depth, so ICP sees surfaces normal to x, z and y.
pub fn gen_facade<S: Real>(spec: &FacadeSpec<S>) -> Result<PointCloud<S>> {
    spec.validate()?;
    let half = cast::<S>(0.5);
    let w2 = spec.width * half;
    let h2 = spec.height * half;
    let nx = grid_count(to_f64(spec.width), to_f64(spec.spacing));
    let nz = grid_count(to_f64(spec.height), to_f64(spec.spacing));
    let recessed = spec.window_rows > 0
        && spec.window_cols > 0
        && spec.recess_depth > S::zero();

    struct Window<S> {
        xlo: S,
        xhi: S,
        zlo: S,
        zhi: S,
    }
    let mut windows: Vec<Window<S>> = Vec::new();
    if recessed {
        let ww2 = spec.window_width * half;
        let wh2 = spec.window_height * half;
        for r in 0..spec.window_rows {
            let zc = -h2 + spec.height * cast::<S>((r + 1) as f64)
                / cast((spec.window_rows + 1) as f64);
            for c in 0..spec.window_cols {
                let xc = -w2 + spec.width * cast::<S>((c + 1) as f64)
                    / cast((spec.window_cols + 1) as f64);
                windows.push(Window {
                    xlo: xc - ww2,
                    xhi: xc + ww2,
                    zlo: zc - wh2,
                    zhi: zc + wh2,
                });
            }
        }
    }
    let in_window = |x: S, z: S| {
        windows
            .iter()
            .any(|w| x > w.xlo && x < w.xhi && z > w.zlo && z < w.zhi)
    };

    let mut points = Vec::with_capacity(nx * nz);
    for i in 0..nx {
        let x = -w2 + cast::<S>(i as f64) * spec.spacing;
        for j in 0..nz {
            let z = -h2 + cast::<S>(j as f64) * spec.spacing;
            let y = if in_window(x, z) { -spec.recess_depth } else { S::zero() };
            points.push(Point3::new(x, y, z));
        }
    }
    // jamb strips: one rectangle outline per intermediate depth step
    for w in &windows {
        let mut depth = spec.spacing;
        while depth < spec.recess_depth {
            let y = -depth;
            let mut x = w.xlo;
            while x <= w.xhi {
                points.push(Point3::new(x, y, w.zlo));
                points.push(Point3::new(x, y, w.zhi));
                x += spec.spacing;
            }
            let mut z = w.zlo + spec.spacing;
            while to_f64(z) < to_f64(w.zhi) - 1e-12 {
                points.push(Point3::new(w.xlo, y, z));
                points.push(Point3::new(w.xhi, y, z));
                z += spec.spacing;
            }
            depth += spec.spacing;
        }
    }

    if spec.sigma > S::zero() {
        let normal = Normal::new(0.0, to_f64(spec.sigma))
            .map_err(|_| Error::param("noise sigma must be finite"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for p in &mut points {
            p.y += cast(normal.sample(&mut rng));
        }
    }
    PointCloud::new(points, FrameTag::Site, "synthetic-facade")
}

/// Adds Gaussian noise along y to every point; sigma 0 returns the
/// cloud unchanged. Deterministic per seed.
pub fn add_y_noise<S: Real>(cloud: &PointCloud<S>, sigma: S, seed: u64) -> Result<PointCloud<S>> {
    if !Float::is_finite(sigma) || sigma < S::zero() {
        return Err(Error::param("noise sigma must be non-negative"));
    }
    if sigma == S::zero() {
        return PointCloud::new(cloud.points().to_vec(), cloud.frame(), cloud.label());
    }
    let normal =
        Normal::new(0.0, to_f64(sigma)).map_err(|_| Error::param("noise sigma must be finite"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = cloud
        .points()
        .iter()
        .map(|p| Point3::new(p.x, p.y + cast(normal.sample(&mut rng)), p.z))
        .collect();
    PointCloud::new(points, cloud.frame(), cloud.label())
}
