//! Deformation estimators between two epochs of a wall scan.
//!
//! All four estimators take wall-local clouds (same frame tag) and report
//! signed deformation in metres, negative toward the excavation (the -y
//! side). Results keep invalid entries with a reason instead of dropping
//! them, so coverage and occlusion remain visible downstream.
//!
//! Every estimator is deterministic for fixed inputs regardless of
//! evaluation order; inputs are never mutated.

use crate::cloud::{fit_plane_of, PointCloud};
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::mesh::delaunay_tin;
use crate::registration::{estimate_normals, icp_point_to_plane, IcpParams};
use crate::scalar::{cast, to_f64, Real};
use crate::spatial::SpatialIndex;
use nalgebra::Vector3;
use num_traits::Float;
use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Default map cell size in metres (20 mm).
pub const DEFAULT_CELL_SIZE_M: f64 = 0.020;
/// Default plausible-deformation filter bounds in metres.
pub const DEFAULT_FILTER_LO_M: f64 = -0.015;
pub const DEFAULT_FILTER_HI_M: f64 = 0.0;

/// Which estimator produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Cloud-to-mesh: signed distance from query points to a reference mesh.
    C2M,
    /// Mesh-to-mesh: height difference between both meshes on a shared grid.
    M2M,
    /// Normal-direction cylinder averaging between the clouds.
    M3C2,
    /// Nearest-correspondence y-difference after ICP fine alignment.
    Icp,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::C2M => "c2m",
            Method::M2M => "m2m",
            Method::M3C2 => "m3c2",
            Method::Icp => "icp",
        })
    }
}

impl Method {
    /// Parses the lowercase method tag used by files and CLI flags.
    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "c2m" => Ok(Method::C2M),
            "m2m" => Ok(Method::M2M),
            "m3c2" => Ok(Method::M3C2),
            "icp" => Ok(Method::Icp),
            other => Err(Error::param(format!(
                "unknown method '{other}' (expected c2m, m2m, m3c2 or icp)"
            ))),
        }
    }
}

/// Why a per-point result is (in)valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Valid,
    /// The point projects outside the reference mesh footprint.
    OutOfFootprint,
    /// No reference points fell inside the projection cylinder.
    EmptyReferenceCylinder,
    /// No query points fell inside the projection cylinder.
    EmptyQueryCylinder,
    /// The local normal could not be estimated.
    InvalidNormal,
    /// No usable correspondence was found.
    NoCorrespondence,
    /// Removed by a plausibility range filter.
    OutOfRange,
}

impl PointStatus {
    pub fn is_valid(self) -> bool {
        self == PointStatus::Valid
    }
}

impl fmt::Display for PointStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointStatus::Valid => "valid",
            PointStatus::OutOfFootprint => "out-of-footprint",
            PointStatus::EmptyReferenceCylinder => "empty reference cylinder",
            PointStatus::EmptyQueryCylinder => "empty query cylinder",
            PointStatus::InvalidNormal => "invalid normal",
            PointStatus::NoCorrespondence => "no correspondence",
            PointStatus::OutOfRange => "out-of-range",
        })
    }
}

/// Per-point signed deformation results from one estimator.
#[derive(Debug, Clone)]
pub struct PointwiseDeformation<S> {
    method: Method,
    points: Vec<Point3<S>>,
    values: Vec<S>,
    status: Vec<PointStatus>,
}

impl<S: Real> PointwiseDeformation<S> {
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Evaluation positions (wall frame, metres).
    pub fn points(&self) -> &[Point3<S>] {
        &self.points
    }

    /// Raw values in metres; meaningful only where the status is valid.
    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn statuses(&self) -> &[PointStatus] {
        &self.status
    }

    /// Value of entry `i` if it is valid.
    pub fn value(&self, i: usize) -> Option<S> {
        self.status[i].is_valid().then(|| self.values[i])
    }

    /// `(index, value)` over valid entries.
    pub fn valid_values(&self) -> impl Iterator<Item = (usize, S)> + '_ {
        self.status
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_valid())
            .map(|(i, _)| (i, self.values[i]))
    }

    pub fn valid_count(&self) -> usize {
        self.status.iter().filter(|s| s.is_valid()).count()
    }

    /// Marks valid entries outside `[lo, hi]` metres as out-of-range.
    /// Surviving values are byte-for-byte those of the input.
    pub fn filter_range(&self, lo: S, hi: S) -> Result<PointwiseDeformation<S>> {
        if lo > hi {
            return Err(Error::param("range filter bounds must satisfy lo <= hi"));
        }
        let mut out = self.clone();
        for (i, s) in out.status.iter_mut().enumerate() {
            if s.is_valid() && (out.values[i] < lo || out.values[i] > hi) {
                *s = PointStatus::OutOfRange;
            }
        }
        Ok(out)
    }
}

/// Rasterized deformation map over the wall x-z plane.
///
/// Values are millimetres; cells without samples are invalid and carry
/// count 0. Cell (i, j) covers
/// `[origin + (i, j) * cell, origin + (i+1, j+1) * cell)`.
#[derive(Debug, Clone)]
pub struct DeformationMap<S> {
    method: Method,
    origin: [S; 2],
    cell_size: S,
    nx: usize,
    nz: usize,
    values_mm: Vec<S>,
    counts: Vec<u32>,
    valid: Vec<bool>,
}

impl<S: Real> DeformationMap<S> {
    pub fn method(&self) -> Method {
        self.method
    }

    /// Grid minimum corner `(x, z)` in metres.
    pub fn origin(&self) -> [S; 2] {
        self.origin
    }

    pub fn cell_size(&self) -> S {
        self.cell_size
    }

    /// Grid dimensions `(nx, nz)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.nz)
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.valid[self.idx(i, j)]
    }

    /// Cell value in millimetres, when valid.
    pub fn value_mm(&self, i: usize, j: usize) -> Option<S> {
        let k = self.idx(i, j);
        self.valid[k].then(|| self.values_mm[k])
    }

    pub fn count(&self, i: usize, j: usize) -> u32 {
        self.counts[self.idx(i, j)]
    }

    /// Centre `(x, z)` of cell `(i, j)` in metres.
    pub fn cell_center(&self, i: usize, j: usize) -> (S, S) {
        let half = cast::<S>(0.5);
        (
            self.origin[0] + (cast::<S>(i as f64) + half) * self.cell_size,
            self.origin[1] + (cast::<S>(j as f64) + half) * self.cell_size,
        )
    }

    /// Cell indices containing wall coordinates `(x, z)`, if inside.
    pub fn cell_of(&self, x: S, z: S) -> Option<(usize, usize)> {
        let fx = to_f64((x - self.origin[0]) / self.cell_size).floor();
        let fz = to_f64((z - self.origin[1]) / self.cell_size).floor();
        if fx < 0.0 || fz < 0.0 {
            return None;
        }
        // points exactly on the top edges belong to the last cells
        let i = (fx as usize).min(self.nx.checked_sub(1)?);
        let j = (fz as usize).min(self.nz.checked_sub(1)?);
        (to_f64(x - self.origin[0]) <= self.nx as f64 * to_f64(self.cell_size)
            && to_f64(z - self.origin[1]) <= self.nz as f64 * to_f64(self.cell_size))
        .then_some((i, j))
    }

    /// `(i, j, value_mm)` over valid cells.
    pub fn valid_cells(&self) -> impl Iterator<Item = (usize, usize, S)> + '_ {
        (0..self.nz).flat_map(move |j| {
            (0..self.nx).filter_map(move |i| {
                let k = self.idx(i, j);
                self.valid[k].then(|| (i, j, self.values_mm[k]))
            })
        })
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.nz);
        j * self.nx + i
    }

    /// Marks valid cells outside `[lo, hi]` metres as invalid.
    /// Surviving values are byte-for-byte those of the input.
    pub fn filter_range(&self, lo: S, hi: S) -> Result<DeformationMap<S>> {
        if lo > hi {
            return Err(Error::param("range filter bounds must satisfy lo <= hi"));
        }
        let thousand = cast::<S>(1000.0);
        let (lo_mm, hi_mm) = (lo * thousand, hi * thousand);
        let mut out = self.clone();
        for k in 0..out.valid.len() {
            if out.valid[k] && (out.values_mm[k] < lo_mm || out.values_mm[k] > hi_mm) {
                out.valid[k] = false;
            }
        }
        Ok(out)
    }

    /// Writes the full grid as CSV, row-major (x fastest), millimetre
    /// values with 3 decimals, `nan` in invalid cells.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(out, "x_m,z_m,deformation_mm,count,valid")?;
            for j in 0..self.nz {
                for i in 0..self.nx {
                    let (x, z) = self.cell_center(i, j);
                    let k = self.idx(i, j);
                    let valid = self.valid[k];
                    if valid {
                        writeln!(
                            out,
                            "{},{},{:.3},{},1",
                            to_f64(x),
                            to_f64(z),
                            to_f64(self.values_mm[k]),
                            self.counts[k]
                        )?;
                    } else {
                        writeln!(out, "{},{},nan,{},0", to_f64(x), to_f64(z), self.counts[k])?;
                    }
                }
            }
            out.flush()
        };
        write(&mut out).map_err(|e| Error::io(path, e))
    }

    /// Reads a map written by [`DeformationMap::write_csv`]. The grid
    /// geometry is inferred from the cell-centre coordinates, which
    /// requires at least two distinct values on one axis.
    pub fn read_csv(path: &Path, method: Method) -> Result<DeformationMap<S>> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut rows: Vec<(f64, f64, f64, u32, bool)> = Vec::new();
        let mut lines = reader.lines().enumerate();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty file"))?
            .1
            .map_err(|e| Error::io(path, e))?;
        if header.trim() != "x_m,z_m,deformation_mm,count,valid" {
            return Err(Error::parse(path, 1, "unrecognized deformation map header"));
        }
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 5 {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected 5 comma-separated fields, found {}", fields.len()),
                ));
            }
            let num = |k: usize, name: &str| -> Result<f64> {
                fields[k].parse::<f64>().map_err(|_| {
                    Error::parse(path, lineno, format!("bad {name} value '{}'", fields[k]))
                })
            };
            let x = num(0, "x_m")?;
            let z = num(1, "z_m")?;
            let v = num(2, "deformation_mm")?;
            let count = fields[3].parse::<u32>().map_err(|_| {
                Error::parse(path, lineno, format!("bad count value '{}'", fields[3]))
            })?;
            let valid = match fields[4] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("bad valid flag '{other}' (expected 0 or 1)"),
                    ))
                }
            };
            if valid && !v.is_finite() {
                return Err(Error::parse(path, lineno, "valid cell with non-finite value"));
            }
            rows.push((x, z, v, count, valid));
        }
        if rows.is_empty() {
            return Err(Error::parse(path, 1, "no data rows"));
        }

        let cell = infer_cell(rows.iter().map(|r| r.0))
            .or_else(|| infer_cell(rows.iter().map(|r| r.1)))
            .ok_or_else(|| Error::parse(path, 1, "cannot infer grid cell size"))?;
        let min_x = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        let min_z = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let max_x = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
        let max_z = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        let nx = ((max_x - min_x) / cell).round() as usize + 1;
        let nz = ((max_z - min_z) / cell).round() as usize + 1;
        let mut map = DeformationMap {
            method,
            origin: [cast(min_x - cell / 2.0), cast(min_z - cell / 2.0)],
            cell_size: cast(cell),
            nx,
            nz,
            values_mm: vec![S::nan(); nx * nz],
            counts: vec![0; nx * nz],
            valid: vec![false; nx * nz],
        };
        for (x, z, v, count, valid) in rows {
            let i = ((x - min_x) / cell).round() as usize;
            let j = ((z - min_z) / cell).round() as usize;
            if i >= nx || j >= nz {
                return Err(Error::parse(path, 1, "inconsistent grid coordinates"));
            }
            let k = j * nx + i;
            map.values_mm[k] = cast(v);
            map.counts[k] = count;
            map.valid[k] = valid;
        }
        Ok(map)
    }
}

/// Smallest positive gap between sorted distinct coordinates.
fn infer_cell(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).fold(None, |acc, d| {
        Some(match acc {
            None => d,
            Some(a) => a.min(d),
        })
    })
}

fn check_frames<S: Real>(reference: &PointCloud<S>, query: &PointCloud<S>) -> Result<()> {
    if reference.frame() != query.frame() {
        return Err(Error::param(format!(
            "clouds are in different frames ({} vs {})",
            reference.frame(),
            query.frame()
        )));
    }
    Ok(())
}

/// Cloud-to-mesh deformation: the reference is meshed over its best-fit
/// plane and each query point reports its signed closest-point distance
/// (positive on the +y side of the surface). Points projecting outside
/// the footprint are flagged rather than dropped.
pub fn c2m<S: Real>(
    reference: &PointCloud<S>,
    query: &PointCloud<S>,
) -> Result<PointwiseDeformation<S>> {
    check_frames(reference, query)?;
    let plane = reference.fit_plane()?;
    let mesh = delaunay_tin(reference, &plane)?;
    let mut points = Vec::with_capacity(query.len());
    let mut values = Vec::with_capacity(query.len());
    let mut status = Vec::with_capacity(query.len());
    for p in query.points() {
        let d = mesh.signed_distance(*p);
        points.push(*p);
        values.push(d.distance);
        status.push(if d.in_footprint {
            PointStatus::Valid
        } else {
            PointStatus::OutOfFootprint
        });
    }
    Ok(PointwiseDeformation { method: Method::C2M, points, values, status })
}

/// Mesh-to-mesh deformation on a regular grid.
///
/// Both clouds are meshed over the reference cloud's best-fit plane, so
/// multi-epoch maps share one grid. Each cell centre is lifted onto that
/// plane, both surface heights are interpolated there, and the height
/// difference is converted into a y-direction gap. Cells where either
/// mesh lacks footprint are invalid.
pub fn m2m<S: Real>(
    reference: &PointCloud<S>,
    query: &PointCloud<S>,
    cell_size: S,
) -> Result<DeformationMap<S>> {
    check_frames(reference, query)?;
    if cell_size <= S::zero() {
        return Err(Error::param("map cell size must be positive"));
    }
    let plane = reference.fit_plane()?.oriented_toward(Vector3::y());
    let ny = plane.normal().y;
    if to_f64(ny) <= 1e-6 {
        return Err(Error::degenerate(
            "reference best-fit plane is parallel to the y axis",
        ));
    }
    let ref_mesh = delaunay_tin(reference, &plane)?;
    let qry_mesh = delaunay_tin(query, &plane)?;

    let bbox = reference.bounding_box()?;
    let origin = [bbox.min.x, bbox.min.z];
    let ext = bbox.extent();
    let nx = grid_cells(to_f64(ext.x), to_f64(cell_size));
    let nz = grid_cells(to_f64(ext.z), to_f64(cell_size));

    let n = plane.normal();
    let offset = plane.offset();
    let mut map = DeformationMap {
        method: Method::M2M,
        origin,
        cell_size,
        nx,
        nz,
        values_mm: vec![S::nan(); nx * nz],
        counts: vec![0; nx * nz],
        valid: vec![false; nx * nz],
    };
    let thousand = cast::<S>(1000.0);
    for j in 0..nz {
        for i in 0..nx {
            let (x, z) = map.cell_center(i, j);
            // lift the cell centre onto the grid plane
            let y = (offset - n.x * x - n.z * z) / ny;
            let (u, v) = ref_mesh.project_uv(Point3::new(x, y, z));
            let (Some(hr), Some(hq)) = (ref_mesh.height_at(u, v), qry_mesh.height_at(u, v))
            else {
                continue;
            };
            let k = j * nx + i;
            map.values_mm[k] = (hq - hr) / ny * thousand;
            map.counts[k] = 1;
            map.valid[k] = true;
        }
    }
    Ok(map)
}

fn grid_cells(extent: f64, cell: f64) -> usize {
    ((extent / cell).ceil() as usize).max(1)
}

/// Controls for normal-direction cylinder averaging.
#[derive(Debug, Clone)]
pub struct M3C2Params<S> {
    /// Diameter of the sphere used for local normal estimation (metres).
    pub normal_diameter: S,
    /// Diameter of the projection cylinder (metres).
    pub projection_diameter: S,
    /// Full height of the projection cylinder (metres).
    pub cylinder_height: S,
    /// Minimum spacing between core points; 0 evaluates every reference
    /// point.
    pub core_resolution: S,
}

impl<S: Real> Default for M3C2Params<S> {
    fn default() -> Self {
        M3C2Params {
            normal_diameter: cast(0.03),
            projection_diameter: cast(0.03),
            cylinder_height: cast(4.0),
            core_resolution: S::zero(),
        }
    }
}

impl<S: Real> M3C2Params<S> {
    fn validate(&self) -> Result<()> {
        if self.normal_diameter <= S::zero()
            || self.projection_diameter <= S::zero()
            || self.cylinder_height <= S::zero()
        {
            return Err(Error::param(
                "normal diameter, projection diameter and cylinder height must be positive",
            ));
        }
        if self.core_resolution < S::zero() {
            return Err(Error::param("core resolution must be non-negative"));
        }
        Ok(())
    }
}

/// Normal-direction cylinder-averaged deformation at core points.
///
/// Core points are the reference points (optionally thinned to
/// `core_resolution`). Each core point gets a normal from its reference
/// neighbourhood, flipped toward +y; reference and query points inside a
/// cylinder along that normal are averaged axially, and the deformation
/// is the query mean minus the reference mean.
pub fn m3c2<S: Real>(
    reference: &PointCloud<S>,
    query: &PointCloud<S>,
    params: &M3C2Params<S>,
) -> Result<PointwiseDeformation<S>> {
    check_frames(reference, query)?;
    params.validate()?;
    if reference.is_empty() || query.is_empty() {
        return Err(Error::empty("deformation input cloud"));
    }
    let ref_index = SpatialIndex::build(reference)?;
    let qry_index = SpatialIndex::build(query)?;
    let ref_pts = reference.points();

    let cores: Vec<u32> = if params.core_resolution > S::zero() {
        min_spacing_subsample(reference, params.core_resolution)
    } else {
        (0..reference.len() as u32).collect()
    };

    let normal_radius = params.normal_diameter / cast(2.0);
    let cyl_radius = params.projection_diameter / cast(2.0);
    let half_height = params.cylinder_height / cast(2.0);

    let mut points = Vec::with_capacity(cores.len());
    let mut values = Vec::with_capacity(cores.len());
    let mut status = Vec::with_capacity(cores.len());
    let mut hood: Vec<u32> = Vec::new();
    let mut local: Vec<Point3<S>> = Vec::new();
    for &ci in &cores {
        let p = ref_pts[ci as usize];
        points.push(p);
        ref_index.radius_search_into(p, normal_radius, &mut hood)?;
        if hood.len() < 3 {
            values.push(S::nan());
            status.push(PointStatus::InvalidNormal);
            continue;
        }
        local.clear();
        local.extend(hood.iter().map(|&j| ref_pts[j as usize]));
        let Ok(plane) = fit_plane_of(&local) else {
            values.push(S::nan());
            status.push(PointStatus::InvalidNormal);
            continue;
        };
        let mut n = plane.normal();
        if n.y < S::zero() {
            n = -n;
        }

        let mean_axial = |idx: &SpatialIndex<S>,
                          pts: &[Point3<S>],
                          buf: &mut Vec<u32>|
         -> Result<Option<S>> {
            idx.cylinder_search_into(p, n, cyl_radius, half_height, buf)?;
            if buf.is_empty() {
                return Ok(None);
            }
            let mut sum = S::zero();
            for &k in buf.iter() {
                sum += (pts[k as usize] - p).dot(&n);
            }
            Ok(Some(sum / cast(buf.len() as f64)))
        };

        let Some(ref_mean) = mean_axial(&ref_index, ref_pts, &mut hood)? else {
            values.push(S::nan());
            status.push(PointStatus::EmptyReferenceCylinder);
            continue;
        };
        let Some(qry_mean) = mean_axial(&qry_index, query.points(), &mut hood)? else {
            values.push(S::nan());
            status.push(PointStatus::EmptyQueryCylinder);
            continue;
        };
        values.push(qry_mean - ref_mean);
        status.push(PointStatus::Valid);
    }
    Ok(PointwiseDeformation { method: Method::M3C2, points, values, status })
}

/// Greedy thinning in original point order: a point survives when every
/// previously kept point is at least `spacing` away. The result is a
/// subset of the input indices, deterministic, order-stable.
fn min_spacing_subsample<S: Real>(cloud: &PointCloud<S>, spacing: S) -> Vec<u32> {
    let pts = cloud.points();
    let origin = pts[0];
    let inv = S::one() / spacing;
    let key = |p: Point3<S>| -> (i64, i64, i64) {
        (
            to_f64(Float::floor((p.x - origin.x) * inv)) as i64,
            to_f64(Float::floor((p.y - origin.y) * inv)) as i64,
            to_f64(Float::floor((p.z - origin.z) * inv)) as i64,
        )
    };
    let mut kept: Vec<u32> = Vec::new();
    let mut grid: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    let r2 = spacing * spacing;
    'outer: for (i, p) in pts.iter().enumerate() {
        let (kx, ky, kz) = key(*p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(cands) = grid.get(&(kx + dx, ky + dy, kz + dz)) {
                        for &c in cands {
                            if pts[c as usize].distance_squared(*p) < r2 {
                                continue 'outer;
                            }
                        }
                    }
                }
            }
        }
        kept.push(i as u32);
        grid.entry((kx, ky, kz)).or_default().push(i as u32);
    }
    kept
}

/// Correspondence-based deformation: point-to-plane ICP aligns the query
/// to the reference, each query point takes its nearest reference point
/// (after alignment) as correspondence, and the reported value is the
/// y-difference of the unaligned pair, so rigid wall motion is measured
/// rather than cancelled.
pub fn icp_deform<S: Real>(
    reference: &PointCloud<S>,
    query: &PointCloud<S>,
    params: &IcpParams<S>,
) -> Result<PointwiseDeformation<S>> {
    check_frames(reference, query)?;
    let spacing = reference.data_spacing()?;
    // sensor stand-in on the +y side; orientation does not affect the
    // point-to-plane solve
    let bbox = reference.bounding_box()?;
    let sensor = Point3::new(
        bbox.center().x,
        bbox.max.y + Float::max(bbox.diagonal(), S::one()),
        bbox.center().z,
    );
    let normals = estimate_normals(reference, spacing * cast(2.0), sensor)?;
    let result = icp_point_to_plane(query, reference, &normals, params)?;

    let index = SpatialIndex::build(reference)?;
    let ref_pts = reference.points();
    let mut points = Vec::with_capacity(query.len());
    let mut values = Vec::with_capacity(query.len());
    let mut status = Vec::with_capacity(query.len());
    for q in query.points() {
        let aligned = result.transform.apply(*q);
        let (ri, _) = index.nearest(aligned);
        points.push(*q);
        values.push(q.y - ref_pts[ri as usize].y);
        status.push(PointStatus::Valid);
    }
    Ok(PointwiseDeformation { method: Method::Icp, points, values, status })
}

/// Averages valid point deformations onto a regular x-z grid.
///
/// The grid covers the bounding box of the valid points; values are
/// converted to millimetres; cells without samples are invalid.
pub fn rasterize<S: Real>(
    d: &PointwiseDeformation<S>,
    cell_size: S,
) -> Result<DeformationMap<S>> {
    if cell_size <= S::zero() {
        return Err(Error::param("map cell size must be positive"));
    }
    let mut min_x = S::infinity();
    let mut min_z = S::infinity();
    let mut max_x = S::neg_infinity();
    let mut max_z = S::neg_infinity();
    let mut any = false;
    for (i, _) in d.valid_values() {
        let p = d.points[i];
        min_x = Float::min(min_x, p.x);
        max_x = Float::max(max_x, p.x);
        min_z = Float::min(min_z, p.z);
        max_z = Float::max(max_z, p.z);
        any = true;
    }
    if !any {
        return Err(Error::empty("rasterization input (no valid points)"));
    }
    let nx = grid_cells(to_f64(max_x - min_x), to_f64(cell_size));
    let nz = grid_cells(to_f64(max_z - min_z), to_f64(cell_size));
    let mut sums = vec![S::zero(); nx * nz];
    let mut counts = vec![0u32; nx * nz];
    for (i, v) in d.valid_values() {
        let p = d.points[i];
        let ci = (to_f64((p.x - min_x) / cell_size).floor() as usize).min(nx - 1);
        let cj = (to_f64((p.z - min_z) / cell_size).floor() as usize).min(nz - 1);
        let k = cj * nx + ci;
        sums[k] += v;
        counts[k] += 1;
    }
    let thousand = cast::<S>(1000.0);
    let mut values_mm = vec![S::nan(); nx * nz];
    let mut valid = vec![false; nx * nz];
    for k in 0..sums.len() {
        if counts[k] > 0 {
            values_mm[k] = sums[k] / cast(counts[k] as f64) * thousand;
            valid[k] = true;
        }
    }
    Ok(DeformationMap {
        method: d.method,
        origin: [min_x, min_z],
        cell_size,
        nx,
        nz,
        values_mm,
        counts,
        valid,
    })
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Builds a pointwise result directly, for tests in sibling modules.
    pub(crate) fn pointwise<S: Real>(
        method: Method,
        points: Vec<Point3<S>>,
        values: Vec<S>,
        status: PointStatus,
    ) -> PointwiseDeformation<S> {
        let status = vec![status; points.len()];
        PointwiseDeformation { method, points, values, status }
    }
}
