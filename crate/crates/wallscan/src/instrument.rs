//! Reference-instrument models used to cross-check scan results: the
//! total-station small-angle deformation estimate and the inclinometer
//! depth-profile accumulation, plus comparison of a profile against a
//! deformation map column.
//!
//! Conventions: depths are positive metres below ground level; a positive
//! inclinometer tilt means a pit-ward lean, so pit-ward movement carries a
//! positive sign in instrument space and a negative sign in the wall
//! frame (where -y points into the pit). [`compare_profile`] converts.

use crate::deform::DeformationMap;
use crate::error::{Error, Result};
use crate::scalar::{cast, to_f64, Real};
use num_traits::Float;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Arcseconds in one radian (648000 / pi).
pub const ARCSECONDS_PER_RADIAN: f64 = 648000.0 / std::f64::consts::PI;

/// Vertical travel between inclinometer readings (metres).
pub const READING_INTERVAL_M: f64 = 0.5;

/// Small-angle deformation at sight length `length` for an angle change
/// of `delta_arcsec`: (delta / rho) * L. The sign follows the angle
/// change; a zero change returns exactly zero.
pub fn small_angle_deformation<S: Real>(delta_arcsec: S, length: S) -> Result<S> {
    if length <= S::zero() {
        return Err(Error::param("sight length must be positive"));
    }
    Ok(delta_arcsec / cast(ARCSECONDS_PER_RADIAN) * length)
}

/// A monitored total-station sight: target at a fixed distance with a
/// recorded baseline angle.
#[derive(Debug, Clone)]
pub struct SmallAngleSetup<S> {
    sight_length: S,
    baseline_arcsec: S,
}

impl<S: Real> SmallAngleSetup<S> {
    pub fn new(sight_length: S, baseline_arcsec: S) -> Result<Self> {
        if sight_length <= S::zero() {
            return Err(Error::param("sight length must be positive"));
        }
        Ok(SmallAngleSetup { sight_length, baseline_arcsec })
    }

    pub fn sight_length(&self) -> S {
        self.sight_length
    }

    pub fn baseline_arcsec(&self) -> S {
        self.baseline_arcsec
    }

    /// Deformation implied by a new angle reading (arcseconds).
    pub fn deformation(&self, angle_arcsec: S) -> S {
        // length validated at construction
        small_angle_deformation(angle_arcsec - self.baseline_arcsec, self.sight_length)
            .expect("validated setup")
    }
}

/// One inclinometer run: tilt readings every 0.5 m of travel, ordered
/// from the tube bottom upward.
#[derive(Debug, Clone)]
pub struct InclinometerTrace<S> {
    readings_deg: Vec<S>,
}

impl<S: Real> InclinometerTrace<S> {
    /// `readings_deg` bottom to top; each |theta| must be below 90 deg.
    pub fn new(readings_deg: Vec<S>) -> Result<Self> {
        if readings_deg.is_empty() {
            return Err(Error::empty("inclinometer trace"));
        }
        for (i, t) in readings_deg.iter().enumerate() {
            if !Float::is_finite(*t) {
                return Err(Error::NonFinite { index: i });
            }
            if Float::abs(*t) >= cast(90.0) {
                return Err(Error::param(format!(
                    "tilt reading {i} is {} deg; the probe cannot lie past horizontal",
                    to_f64(*t)
                )));
            }
        }
        Ok(InclinometerTrace { readings_deg })
    }

    /// Tilt readings in degrees, bottom to top.
    pub fn readings_deg(&self) -> &[S] {
        &self.readings_deg
    }

    /// Tube depth implied by the reading count (metres).
    pub fn tube_depth(&self) -> S {
        cast::<S>(self.readings_deg.len() as f64) * cast(READING_INTERVAL_M)
    }

    /// Writes `depth_m,theta_deg` rows, shallowest first, deepest last.
    /// Row depth is the lower end of the 0.5 m interval the reading
    /// covers.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let n = self.readings_deg.len();
        let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(out, "depth_m,theta_deg")?;
            for k in 0..n {
                // shallowest interval first: reading n-1-k from the top
                let i = n - 1 - k;
                let depth = (n - i) as f64 * READING_INTERVAL_M;
                writeln!(out, "{},{}", depth, to_f64(self.readings_deg[i]))?;
            }
            out.flush()
        };
        write(&mut out).map_err(|e| Error::io(path, e))
    }

    /// Reads a trace written by [`InclinometerTrace::write_csv`]: rows at
    /// 0.5 m steps, shallowest first, deepest last.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut rows: Vec<(f64, f64)> = Vec::new();
        let mut lines = reader.lines().enumerate();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty file"))?
            .1
            .map_err(|e| Error::io(path, e))?;
        if header.trim() != "depth_m,theta_deg" {
            return Err(Error::parse(path, 1, "unrecognized inclinometer trace header"));
        }
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.trim().split(',');
            let (Some(d), Some(t), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::parse(path, lineno, "expected 2 comma-separated fields"));
            };
            let depth = d
                .parse::<f64>()
                .map_err(|_| Error::parse(path, lineno, format!("bad depth value '{d}'")))?;
            let theta = t
                .parse::<f64>()
                .map_err(|_| Error::parse(path, lineno, format!("bad tilt value '{t}'")))?;
            rows.push((depth, theta));
        }
        if rows.is_empty() {
            return Err(Error::parse(path, 1, "no data rows"));
        }
        let n = rows.len();
        for (k, (depth, _)) in rows.iter().enumerate() {
            let expected = (k + 1) as f64 * READING_INTERVAL_M;
            if (depth - expected).abs() > 1e-9 {
                return Err(Error::parse(
                    path,
                    k + 2,
                    format!("expected depth {expected} at a 0.5 m interval, found {depth}"),
                ));
            }
        }
        // file is shallowest first; readings are stored bottom to top
        let readings = (0..n).map(|k| cast(rows[n - 1 - k].1)).collect();
        InclinometerTrace::new(readings)
    }
}

/// Lateral deformation versus depth, anchored to zero at the stationary
/// tube bottom. Entries are ordered surface to bottom (strictly
/// increasing depth); values are metres, positive pit-ward in instrument
/// space.
#[derive(Debug, Clone)]
pub struct DepthProfile<S> {
    /// (depth below ground in metres, lateral deformation in metres)
    nodes: Vec<(S, S)>,
}

impl<S: Real> DepthProfile<S> {
    /// Nodes in any order; they are sorted by depth. The deepest node
    /// must carry exactly zero deformation.
    pub fn from_nodes(mut nodes: Vec<(S, S)>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::empty("depth profile"));
        }
        for (d, v) in &nodes {
            if !Float::is_finite(*d) || !Float::is_finite(*v) {
                return Err(Error::param("profile nodes must be finite"));
            }
        }
        nodes.sort_by(|a, b| to_f64(a.0).partial_cmp(&to_f64(b.0)).unwrap());
        if nodes.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::param("profile depths must be distinct"));
        }
        let bottom = nodes.last().unwrap();
        if bottom.1 != S::zero() {
            return Err(Error::param("the deepest profile node must be exactly zero"));
        }
        Ok(DepthProfile { nodes })
    }

    /// `(depth, deformation)` pairs, surface to bottom.
    pub fn nodes(&self) -> &[(S, S)] {
        &self.nodes
    }

    /// Deformation at the shallowest node (metres).
    pub fn surface_deformation(&self) -> S {
        self.nodes[0].1
    }

    /// Writes `depth_m,deformation_mm` rows, shallowest first.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(out, "depth_m,deformation_mm")?;
            for (d, v) in &self.nodes {
                writeln!(out, "{},{:.4}", to_f64(*d), to_f64(*v) * 1000.0)?;
            }
            out.flush()
        };
        write(&mut out).map_err(|e| Error::io(path, e))
    }

    /// Reads a profile written by [`DepthProfile::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut nodes: Vec<(S, S)> = Vec::new();
        let mut lines = reader.lines().enumerate();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty file"))?
            .1
            .map_err(|e| Error::io(path, e))?;
        if header.trim() != "depth_m,deformation_mm" {
            return Err(Error::parse(path, 1, "unrecognized depth profile header"));
        }
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.trim().split(',');
            let (Some(d), Some(v), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::parse(path, lineno, "expected 2 comma-separated fields"));
            };
            let depth = d
                .parse::<f64>()
                .map_err(|_| Error::parse(path, lineno, format!("bad depth value '{d}'")))?;
            let mm = v.parse::<f64>().map_err(|_| {
                Error::parse(path, lineno, format!("bad deformation value '{v}'"))
            })?;
            nodes.push((cast(depth), cast(mm * 1e-3)));
        }
        DepthProfile::from_nodes(nodes)
    }
}

/// Accumulates an inclinometer trace into a depth profile: each 0.5 m
/// interval contributes 0.5 * sin(theta), summed upward from the
/// stationary bottom. The result has one node per interval boundary,
/// bottom node exactly zero.
pub fn inclinometer_profile<S: Real>(trace: &InclinometerTrace<S>) -> DepthProfile<S> {
    let n = trace.readings_deg().len();
    let interval = cast::<S>(READING_INTERVAL_M);
    let tube_depth = trace.tube_depth();
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push((tube_depth, S::zero()));
    let mut acc = S::zero();
    for (k, theta) in trace.readings_deg().iter().enumerate() {
        acc += interval * Float::sin(theta.to_radians());
        let depth = tube_depth - cast::<S>((k + 1) as f64) * interval;
        nodes.push((depth, acc));
    }
    DepthProfile::from_nodes(nodes).expect("accumulation yields a valid profile")
}

/// One row of a profile-versus-map comparison.
#[derive(Debug, Clone)]
pub struct ProfileDiffRow<S> {
    /// Depth below ground (metres).
    pub depth: S,
    /// Profile deformation converted to the wall-frame sign (mm,
    /// negative toward the pit).
    pub profile_mm: S,
    /// Map cell value at this depth, when the cell exists and is valid.
    pub map_mm: Option<S>,
    /// `map_mm - profile_mm`, when the map value exists.
    pub difference_mm: Option<S>,
}

/// Profile-versus-map comparison along one vertical map column.
#[derive(Debug, Clone)]
pub struct ProfileComparison<S> {
    pub rows: Vec<ProfileDiffRow<S>>,
    /// Set when no profile node found a valid map cell.
    pub notice: Option<String>,
}

/// Compares a depth profile against the map column at wall coordinate
/// `x`. Each profile node at `depth` is looked up at height
/// `ground_z - depth`; the profile is negated into the wall-frame sign
/// (pit-ward is negative y) before differencing. Nodes without a valid
/// map cell are kept with the difference flagged missing.
pub fn compare_profile<S: Real>(
    map: &DeformationMap<S>,
    x: S,
    profile: &DepthProfile<S>,
    ground_z: S,
) -> ProfileComparison<S> {
    let thousand = cast::<S>(1000.0);
    let mut rows = Vec::with_capacity(profile.nodes().len());
    let mut hits = 0usize;
    for &(depth, defo) in profile.nodes() {
        let z = ground_z - depth;
        let profile_mm = -(defo * thousand);
        let map_mm = map.cell_of(x, z).and_then(|(i, j)| map.value_mm(i, j));
        let difference_mm = map_mm.map(|m| m - profile_mm);
        if map_mm.is_some() {
            hits += 1;
        }
        rows.push(ProfileDiffRow { depth, profile_mm, map_mm, difference_mm });
    }
    let notice = (hits == 0).then(|| {
        format!(
            "no valid map cells in the column at x = {} over the profile depth range",
            to_f64(x)
        )
    });
    ProfileComparison { rows, notice }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deform::{rasterize, Method, PointStatus};
    use approx::assert_relative_eq;

    #[test]
    fn zero_angle_change_is_exactly_zero() {
        let d: f64 = small_angle_deformation(0.0, 80.0).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(d.to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn ten_arcseconds_at_eighty_metres() {
        let d: f64 = small_angle_deformation(10.0, 80.0).unwrap();
        assert_relative_eq!(d, 3.8784e-3, max_relative = 1e-4);
        let exact = 80.0 * (10.0 / ARCSECONDS_PER_RADIAN).tan();
        assert!(((d - exact) / exact).abs() < 1e-7);
    }

    #[test]
    fn one_radian_worth_of_arcseconds_means_unity_ratio() {
        // rho arcseconds over 1 m is 1 m of deformation by definition
        let d: f64 = small_angle_deformation(ARCSECONDS_PER_RADIAN, 1.0).unwrap();
        assert_relative_eq!(d, 1.0, max_relative = 1e-12);
        let mm: f64 = small_angle_deformation(206.2648, 1.0).unwrap();
        assert_relative_eq!(mm, 1.0e-3, max_relative = 1e-6);
    }

    #[test]
    fn small_angle_matches_tangent_up_to_hundred_arcseconds() {
        for k in 1..=100 {
            let beta = k as f64;
            for length in [5.0, 80.0, 300.0] {
                let d: f64 = small_angle_deformation(beta, length).unwrap();
                let exact = length * (beta / ARCSECONDS_PER_RADIAN).tan();
                assert!(
                    ((d - exact) / exact).abs() < 1e-7,
                    "beta {beta}, L {length}"
                );
            }
        }
    }

    #[test]
    fn small_angle_is_linear() {
        let base: f64 = small_angle_deformation(7.0, 40.0).unwrap();
        assert_relative_eq!(
            small_angle_deformation(21.0, 40.0).unwrap(),
            3.0 * base,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            small_angle_deformation(7.0, 120.0).unwrap(),
            3.0 * base,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            small_angle_deformation(-7.0, 40.0).unwrap(),
            -base,
            max_relative = 1e-12
        );
    }

    #[test]
    fn nonpositive_sight_length_is_rejected() {
        assert!(small_angle_deformation(1.0, 0.0).is_err());
        assert!(small_angle_deformation(1.0, -5.0).is_err());
        assert!(SmallAngleSetup::new(0.0, 100.0).is_err());
    }

    #[test]
    fn setup_differences_against_baseline() {
        let setup = SmallAngleSetup::new(80.0, 5000.0).unwrap();
        assert_eq!(setup.deformation(5000.0), 0.0);
        assert_relative_eq!(
            setup.deformation(5010.0),
            small_angle_deformation(10.0, 80.0).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn straight_tube_profile_is_identically_zero() {
        let trace = InclinometerTrace::new(vec![0.0f64; 45]).unwrap();
        assert_relative_eq!(trace.tube_depth(), 22.5);
        let profile = inclinometer_profile(&trace);
        assert_eq!(profile.nodes().len(), 46);
        for &(_, v) in profile.nodes() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn two_small_tilts_accumulate() {
        // 0.01 deg over two intervals: 2 * 0.5 * sin(0.01 deg)
        let mut readings = vec![0.0f64; 10];
        readings[0] = 0.01;
        readings[1] = 0.01;
        let trace = InclinometerTrace::new(readings).unwrap();
        let profile = inclinometer_profile(&trace);
        let expected = 2.0 * 0.5 * (0.01f64.to_radians()).sin();
        assert_relative_eq!(profile.surface_deformation(), expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 0.1745e-3, max_relative = 1e-3);
    }

    #[test]
    fn profile_round_trips_a_smooth_curve() {
        // invert the increment formula for a smooth target curve, then
        // accumulate and compare at the nodes
        let tube_depth = 12.0;
        let n = 24;
        let curve = |depth: f64| 0.015 * (1.0 - depth / tube_depth).powi(2);
        let mut readings = Vec::with_capacity(n);
        for k in 0..n {
            let lower = tube_depth - k as f64 * 0.5;
            let upper = lower - 0.5;
            let inc = curve(upper) - curve(lower);
            readings.push((inc / 0.5).asin().to_degrees());
        }
        let trace = InclinometerTrace::new(readings).unwrap();
        let profile = inclinometer_profile(&trace);
        for &(depth, v) in profile.nodes() {
            assert!(
                (v - curve(depth)).abs() < 1e-9,
                "depth {depth}: {v} vs {}",
                curve(depth)
            );
        }
    }

    #[test]
    fn concatenated_traces_accumulate_like_prefix_sums() {
        let lower = InclinometerTrace::new(vec![0.02f64, -0.01, 0.03]).unwrap();
        let upper = InclinometerTrace::new(vec![0.01f64, 0.02]).unwrap();
        let mut all = lower.readings_deg().to_vec();
        all.extend_from_slice(upper.readings_deg());
        let full = inclinometer_profile(&InclinometerTrace::new(all).unwrap());

        let lower_profile = inclinometer_profile(&lower);
        let junction = lower_profile.surface_deformation();
        let upper_profile = inclinometer_profile(&upper);

        // full profile nodes: bottom segment matches the lower profile
        // (depth shifted by the upper tube length), upper segment is the
        // upper profile offset by the junction deformation
        let shift = upper.tube_depth();
        let lower_start = full.nodes().len() - lower_profile.nodes().len();
        for (k, &(d, v)) in lower_profile.nodes().iter().enumerate() {
            assert_node(full.nodes()[lower_start + k], (d + shift, v));
        }
        for (k, &(d, v)) in upper_profile.nodes().iter().enumerate() {
            assert_node(full.nodes()[k], (d, v + junction));
        }
    }

    fn assert_node(got: (f64, f64), want: (f64, f64)) {
        assert_relative_eq!(got.0, want.0, max_relative = 1e-12);
        assert!((got.1 - want.1).abs() < 1e-15, "{} vs {}", got.1, want.1);
    }

    #[test]
    fn bottom_is_always_zero() {
        let trace = InclinometerTrace::new(vec![0.5f64, -0.2, 0.8, 0.1]).unwrap();
        let profile = inclinometer_profile(&trace);
        let bottom = profile.nodes().last().unwrap();
        assert_eq!(bottom.1, 0.0);
        assert!(DepthProfile::from_nodes(vec![(1.0, 0.001), (2.0, 0.002)]).is_err());
    }

    #[test]
    fn trace_validation() {
        assert!(InclinometerTrace::<f64>::new(vec![]).is_err());
        assert!(InclinometerTrace::new(vec![0.0, 90.0]).is_err());
        assert!(InclinometerTrace::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn trace_csv_round_trip() {
        let trace = InclinometerTrace::new(vec![0.02f64, -0.01, 0.03, 0.0]).unwrap();
        let dir = std::env::temp_dir().join("wallscan_incl_csv");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("trace.csv");
        trace.write_csv(&p).unwrap();
        let back = InclinometerTrace::<f64>::read_csv(&p).unwrap();
        assert_eq!(back.readings_deg(), trace.readings_deg());
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "depth_m,theta_deg");
        // shallowest interval first, deepest last
        assert!(lines.next().unwrap().starts_with("0.5,"));
        assert!(text.lines().last().unwrap().starts_with("2,"));
    }

    #[test]
    fn profile_csv_round_trip() {
        let trace = InclinometerTrace::new(vec![0.3f64, -0.1, 0.2]).unwrap();
        let profile = inclinometer_profile(&trace);
        let dir = std::env::temp_dir().join("wallscan_profile_csv");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("profile.csv");
        profile.write_csv(&p).unwrap();
        let back = DepthProfile::<f64>::read_csv(&p).unwrap();
        assert_eq!(back.nodes().len(), profile.nodes().len());
        for (a, b) in back.nodes().iter().zip(profile.nodes()) {
            assert_relative_eq!(a.0, b.0, max_relative = 1e-9);
            assert!((a.1 - b.1).abs() < 1e-7); // 4 decimal places in mm
        }
    }

    /// Map whose column at x holds exactly the wall-frame profile values.
    fn map_from_profile(profile: &DepthProfile<f64>, ground_z: f64) -> DeformationMap<f64> {
        let mut points = Vec::new();
        let mut values = Vec::new();
        for &(depth, v) in profile.nodes() {
            points.push(crate::geom::Point3::new(0.05, 0.0, ground_z - depth));
            values.push(-v); // wall frame: pit-ward is negative
        }
        let d = crate::deform::test_support::pointwise(
            Method::C2M,
            points,
            values,
            PointStatus::Valid,
        );
        rasterize(&d, 0.1).unwrap()
    }

    #[test]
    fn comparison_of_matching_map_is_zero() {
        let trace = InclinometerTrace::new(vec![0.4f64, 0.2, -0.1, 0.3]).unwrap();
        let profile = inclinometer_profile(&trace);
        let ground_z = 2.0;
        let map = map_from_profile(&profile, ground_z);
        let cmp = compare_profile(&map, 0.05, &profile, ground_z);
        assert!(cmp.notice.is_none());
        let mut checked = 0;
        for row in &cmp.rows {
            if let Some(diff) = row.difference_mm {
                assert!(diff.abs() < 1e-9, "depth {}: {diff}", row.depth);
                checked += 1;
            }
        }
        assert!(checked >= profile.nodes().len() - 1);
    }

    #[test]
    fn uniform_map_offset_shows_in_differences() {
        let trace = InclinometerTrace::new(vec![0.4f64, 0.2, -0.1]).unwrap();
        let profile = inclinometer_profile(&trace);
        let ground_z = 1.5;
        let base = map_from_profile(&profile, ground_z);
        // shift every cell 2 mm more negative
        let shifted = {
            let mut points = Vec::new();
            let mut values = Vec::new();
            for &(depth, v) in profile.nodes() {
                points.push(crate::geom::Point3::new(0.05, 0.0, ground_z - depth));
                values.push(-v - 0.002);
            }
            let d = crate::deform::test_support::pointwise(
                Method::C2M,
                points,
                values,
                PointStatus::Valid,
            );
            rasterize(&d, 0.1).unwrap()
        };
        let _ = base;
        let cmp = compare_profile(&shifted, 0.05, &profile, ground_z);
        for row in &cmp.rows {
            if let Some(diff) = row.difference_mm {
                assert_relative_eq!(diff, -2.0, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn no_overlap_sets_a_notice() {
        let trace = InclinometerTrace::new(vec![0.1f64, 0.2]).unwrap();
        let profile = inclinometer_profile(&trace);
        let ground_z = 1.0;
        let map = map_from_profile(&profile, ground_z);
        let cmp = compare_profile(&map, 50.0, &profile, ground_z);
        assert!(cmp.notice.is_some());
        assert!(cmp.rows.iter().all(|r| r.map_mm.is_none()));
    }
}
