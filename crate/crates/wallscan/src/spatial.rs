//! Spatial indexing and subsampling primitives.
//!
//! The index is a static median-split kd-tree over a copy of the
//! coordinates. Every query is exact (results equal a brute-force scan);
//! pruning uses per-subtree bounding boxes. A built index is immutable and
//! can be queried from many threads.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::scalar::{cast, to_f64, Real};
use nalgebra::Vector3;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// Exact nearest-neighbour / radius / cylinder queries over a cloud.
pub struct SpatialIndex<S> {
    pts: Vec<[S; 3]>,
    orig: Vec<u32>,
    axis: Vec<u8>,
    bb_min: Vec<[S; 3]>,
    bb_max: Vec<[S; 3]>,
}

impl<S: Real> SpatialIndex<S> {
    /// Builds the index; errors on an empty cloud.
    pub fn build(cloud: &PointCloud<S>) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::empty("spatial index build"));
        }
        let n = cloud.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let coords: Vec<[S; 3]> =
            cloud.points().iter().map(|p| [p.x, p.y, p.z]).collect();

        let mut index = SpatialIndex {
            pts: vec![[S::zero(); 3]; n],
            orig: vec![0; n],
            axis: vec![0; n],
            bb_min: vec![[S::zero(); 3]; n],
            bb_max: vec![[S::zero(); 3]; n],
        };
        index.build_range(&coords, &mut order, 0, n);
        for (tree_pos, &o) in order.iter().enumerate() {
            index.pts[tree_pos] = coords[o as usize];
            index.orig[tree_pos] = o;
        }
        Ok(index)
    }

    fn build_range(&mut self, coords: &[[S; 3]], order: &mut [u32], lo: usize, hi: usize) {
        if lo >= hi {
            return;
        }
        let mut mn = coords[order[lo] as usize];
        let mut mx = mn;
        for &o in &order[lo + 1..hi] {
            let c = coords[o as usize];
            for k in 0..3 {
                mn[k] = Float::min(mn[k], c[k]);
                mx[k] = Float::max(mx[k], c[k]);
            }
        }
        let mid = lo + (hi - lo) / 2;
        self.bb_min[mid] = mn;
        self.bb_max[mid] = mx;

        // split on the widest axis for compact subtree boxes
        let ext = [mx[0] - mn[0], mx[1] - mn[1], mx[2] - mn[2]];
        let axis = if ext[0] >= ext[1] && ext[0] >= ext[2] {
            0
        } else if ext[1] >= ext[2] {
            1
        } else {
            2
        };
        self.axis[mid] = axis as u8;

        if hi - lo > 1 {
            order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
                let ca = coords[a as usize][axis];
                let cb = coords[b as usize][axis];
                ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
            });
            self.build_range(coords, order, lo, mid);
            self.build_range(coords, order, mid + 1, hi);
        }
    }

    #[inline]
    fn dist2(a: [S; 3], b: [S; 3]) -> S {
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        let dz = a[2] - b[2];
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    fn bbox_dist2(&self, node: usize, q: [S; 3]) -> S {
        let mn = self.bb_min[node];
        let mx = self.bb_max[node];
        let mut d = S::zero();
        for k in 0..3 {
            let c = Float::max(mn[k], Float::min(q[k], mx[k]));
            let dk = q[k] - c;
            d += dk * dk;
        }
        d
    }

    /// Index and distance of the point closest to `p` (ties resolved to
    /// the smallest original index).
    pub fn nearest(&self, p: Point3<S>) -> (u32, S) {
        let q = [p.x, p.y, p.z];
        let mut best = (u32::MAX, S::infinity());
        self.nearest_range(q, 0, self.pts.len(), &mut best);
        (best.0, Float::sqrt(best.1))
    }

    fn nearest_range(&self, q: [S; 3], lo: usize, hi: usize, best: &mut (u32, S)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        if best.1 < S::infinity() && self.bbox_dist2(mid, q) > best.1 {
            return;
        }
        let d = Self::dist2(self.pts[mid], q);
        let o = self.orig[mid];
        if d < best.1 || (d == best.1 && o < best.0) {
            *best = (o, d);
        }
        if hi - lo == 1 {
            return;
        }
        let axis = self.axis[mid] as usize;
        let delta = q[axis] - self.pts[mid][axis];
        let (first_lo, first_hi, second_lo, second_hi) = if delta < S::zero() {
            (lo, mid, mid + 1, hi)
        } else {
            (mid + 1, hi, lo, mid)
        };
        self.nearest_range(q, first_lo, first_hi, best);
        if delta * delta <= best.1 {
            self.nearest_range(q, second_lo, second_hi, best);
        }
    }

    /// All original indices within `r` of `center` (inclusive).
    pub fn radius_search(&self, center: Point3<S>, r: S) -> Result<Vec<u32>> {
        let mut out = Vec::new();
        self.radius_search_into(center, r, &mut out)?;
        Ok(out)
    }

    /// Allocation-reusing variant of [`SpatialIndex::radius_search`].
    pub fn radius_search_into(&self, center: Point3<S>, r: S, out: &mut Vec<u32>) -> Result<()> {
        if r < S::zero() {
            return Err(Error::param("search radius must be non-negative"));
        }
        out.clear();
        let q = [center.x, center.y, center.z];
        self.radius_range(q, r * r, 0, self.pts.len(), out);
        Ok(())
    }

    fn radius_range(&self, q: [S; 3], r2: S, lo: usize, hi: usize, out: &mut Vec<u32>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        if self.bbox_dist2(mid, q) > r2 {
            return;
        }
        if Self::dist2(self.pts[mid], q) <= r2 {
            out.push(self.orig[mid]);
        }
        self.radius_range(q, r2, lo, mid, out);
        self.radius_range(q, r2, mid + 1, hi, out);
    }

    /// All original indices inside the cylinder through `apex` along the
    /// unit `dir`: radial distance <= `radius` and |axial offset| <=
    /// `half_height` (both inclusive).
    pub fn cylinder_search(
        &self,
        apex: Point3<S>,
        dir: Vector3<S>,
        radius: S,
        half_height: S,
    ) -> Result<Vec<u32>> {
        let mut out = Vec::new();
        self.cylinder_search_into(apex, dir, radius, half_height, &mut out)?;
        Ok(out)
    }

    /// Allocation-reusing variant of [`SpatialIndex::cylinder_search`].
    pub fn cylinder_search_into(
        &self,
        apex: Point3<S>,
        dir: Vector3<S>,
        radius: S,
        half_height: S,
        out: &mut Vec<u32>,
    ) -> Result<()> {
        if Float::abs(dir.norm() - S::one()) > cast::<S>(1e-9) {
            return Err(Error::param("cylinder axis direction must be unit length"));
        }
        if radius <= S::zero() || half_height <= S::zero() {
            return Err(Error::param("cylinder radius and half height must be positive"));
        }
        out.clear();
        let a = [apex.x, apex.y, apex.z];
        let d = [dir.x, dir.y, dir.z];
        self.cylinder_range(a, d, radius, half_height, 0, self.pts.len(), out);
        Ok(())
    }

    #[allow(clippy::too_many_arguments)] // recursion carries the query unchanged
    fn cylinder_range(
        &self,
        a: [S; 3],
        d: [S; 3],
        radius: S,
        hh: S,
        lo: usize,
        hi: usize,
        out: &mut Vec<u32>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        // conservative prune: bounding sphere of the subtree box versus
        // the cylinder, split into axial and radial components
        let mn = self.bb_min[mid];
        let mx = self.bb_max[mid];
        let half = cast::<S>(0.5);
        let c = [
            (mn[0] + mx[0]) * half,
            (mn[1] + mx[1]) * half,
            (mn[2] + mx[2]) * half,
        ];
        let rb = Float::sqrt(Self::dist2(mx, c));
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let t = v[0] * d[0] + v[1] * d[1] + v[2] * d[2];
        let v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        let rad2 = Float::max(v2 - t * t, S::zero());
        if Float::abs(t) - rb > hh || Float::sqrt(rad2) - rb > radius {
            return;
        }

        let p = self.pts[mid];
        if cylinder_contains(p, a, d, radius, hh) {
            out.push(self.orig[mid]);
        }
        self.cylinder_range(a, d, radius, hh, lo, mid, out);
        self.cylinder_range(a, d, radius, hh, mid + 1, hi, out);
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }
}

/// Exact cylinder membership test shared by index traversal and callers.
#[inline]
pub fn cylinder_contains<S: Real>(p: [S; 3], a: [S; 3], d: [S; 3], radius: S, hh: S) -> bool {
    let v = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let t = v[0] * d[0] + v[1] * d[1] + v[2] * d[2];
    if Float::abs(t) > hh {
        return false;
    }
    let rx = v[0] - t * d[0];
    let ry = v[1] - t * d[1];
    let rz = v[2] - t * d[2];
    rx * rx + ry * ry + rz * rz <= radius * radius
}

/// Partition of a cloud into cubic voxels anchored at the bounding-box
/// min corner; each point belongs to exactly one voxel.
pub struct VoxelPartition<S> {
    size: S,
    origin: Point3<S>,
    voxels: Vec<((i64, i64, i64), Vec<u32>)>,
}

impl<S: Real> VoxelPartition<S> {
    pub fn build(cloud: &PointCloud<S>, size: S) -> Result<Self> {
        if size <= S::zero() {
            return Err(Error::param("voxel size must be positive"));
        }
        let origin = cloud.bounding_box()?.min;
        let mut map: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in cloud.points().iter().enumerate() {
            map.entry(Self::key_from(origin, size, *p)).or_default().push(i as u32);
        }
        let mut voxels: Vec<_> = map.into_iter().collect();
        voxels.sort_unstable_by_key(|(k, _)| *k);
        Ok(VoxelPartition { size, origin, voxels })
    }

    #[inline]
    fn key_from(origin: Point3<S>, size: S, p: Point3<S>) -> (i64, i64, i64) {
        let kx = Float::floor((p.x - origin.x) / size);
        let ky = Float::floor((p.y - origin.y) / size);
        let kz = Float::floor((p.z - origin.z) / size);
        (to_f64(kx) as i64, to_f64(ky) as i64, to_f64(kz) as i64)
    }

    /// Grid coordinates of the voxel containing `p`.
    pub fn key_of(&self, p: Point3<S>) -> (i64, i64, i64) {
        Self::key_from(self.origin, self.size, p)
    }

    /// Number of non-empty voxels.
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn size(&self) -> S {
        self.size
    }

    pub fn origin(&self) -> Point3<S> {
        self.origin
    }

    /// Voxels in ascending key order with their member point indices
    /// (original cloud indices, insertion order).
    pub fn iter(&self) -> impl Iterator<Item = (&(i64, i64, i64), &[u32])> {
        self.voxels.iter().map(|(k, v)| (k, v.as_slice()))
    }
}

/// Splits a cloud into two spatially uniform disjoint halves.
///
/// Points are sorted along a Morton (z-order) curve and assigned
/// alternately, which spreads both halves evenly over the surface; the
/// seed selects the alternation phase. Sizes differ by at most one.
pub fn split_half<S: Real>(
    cloud: &PointCloud<S>,
    seed: u64,
) -> Result<(PointCloud<S>, PointCloud<S>)> {
    if cloud.len() < 2 {
        return Err(Error::degenerate("split needs at least 2 points"));
    }
    let order = morton_order(cloud);
    let phase = (seed & 1) as usize;
    let mut a = Vec::with_capacity(cloud.len() / 2 + 1);
    let mut b = Vec::with_capacity(cloud.len() / 2 + 1);
    for (pos, &i) in order.iter().enumerate() {
        if (pos + phase).is_multiple_of(2) {
            a.push(i);
        } else {
            b.push(i);
        }
    }
    Ok((cloud.select(&a), cloud.select(&b)))
}

/// Point indices sorted by Morton code (ties by original index).
fn morton_order<S: Real>(cloud: &PointCloud<S>) -> Vec<u32> {
    let bbox = cloud.bounding_box().expect("caller checked non-empty");
    let mn = bbox.min;
    let ext = bbox.extent();
    let scale = |v: S, min: S, extent: S| -> u64 {
        if extent <= S::zero() {
            return 0;
        }
        let t = to_f64((v - min) / extent);
        let q = (t * ((1u64 << 21) - 1) as f64).round();
        (q.max(0.0) as u64).min((1 << 21) - 1)
    };
    let mut keyed: Vec<(u64, u32)> = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let qx = scale(p.x, mn.x, ext.x);
            let qy = scale(p.y, mn.y, ext.y);
            let qz = scale(p.z, mn.z, ext.z);
            (spread_bits(qx) | spread_bits(qy) << 1 | spread_bits(qz) << 2, i as u32)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Interleaves the low 21 bits of `v` with two zero bits between each.
#[inline]
fn spread_bits(mut v: u64) -> u64 {
    v &= (1 << 21) - 1;
    v = (v | v << 32) & 0x1f00000000ffff;
    v = (v | v << 16) & 0x1f0000ff0000ff;
    v = (v | v << 8) & 0x100f00f00f00f00f;
    v = (v | v << 4) & 0x10c30c30c30c30c3;
    v = (v | v << 2) & 0x1249249249249249;
    v
}

/// Keeps one randomly chosen original point per non-empty voxel.
///
/// No coordinates are synthesized: the output is a subset of the input.
/// Deterministic for a given seed.
pub fn random_in_voxel<S: Real>(
    cloud: &PointCloud<S>,
    voxel_size: S,
    seed: u64,
) -> Result<PointCloud<S>> {
    let partition = VoxelPartition::build(cloud, voxel_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(partition.len());
    for (_, members) in partition.iter() {
        let pick = if members.len() == 1 { 0 } else { rng.gen_range(0..members.len()) };
        chosen.push(members[pick]);
    }
    Ok(cloud.select(&chosen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::FrameTag;

    type P = Point3<f64>;

    fn random_cloud(n: usize, seed: u64, span: f64) -> PointCloud<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| {
                P::new(
                    rng.gen_range(0.0..span),
                    rng.gen_range(0.0..span),
                    rng.gen_range(0.0..span),
                )
            })
            .collect();
        PointCloud::new(pts, FrameTag::Site, "random").unwrap()
    }

    #[test]
    fn single_point_nearest() {
        let cloud =
            PointCloud::new(vec![P::new(1.0, 2.0, 3.0)], FrameTag::Site, "one").unwrap();
        let idx = SpatialIndex::build(&cloud).unwrap();
        let (i, d) = idx.nearest(P::new(-4.0, 0.0, 3.0));
        assert_eq!(i, 0);
        assert!((d - (25.0f64 + 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_radius_returns_exact_matches_only() {
        let cloud = PointCloud::new(
            vec![P::new(0.0, 0.0, 0.0), P::new(1.0, 0.0, 0.0), P::new(0.0, 1.0, 0.0)],
            FrameTag::Site,
            "three",
        )
        .unwrap();
        let idx = SpatialIndex::build(&cloud).unwrap();
        assert_eq!(idx.radius_search(P::new(1.0, 0.0, 0.0), 0.0).unwrap(), vec![1]);
        assert!(idx.radius_search(P::new(0.5, 0.0, 0.0), 0.0).unwrap().is_empty());
    }

    #[test]
    fn big_radius_returns_everything() {
        let cloud = random_cloud(500, 2, 1.0);
        let idx = SpatialIndex::build(&cloud).unwrap();
        let all = idx.radius_search(P::new(0.5, 0.5, 0.5), 10.0).unwrap();
        assert_eq!(all.len(), 500);
    }

    #[test]
    fn radius_search_equals_brute_force() {
        let cloud = random_cloud(5000, 3, 2.0);
        let idx = SpatialIndex::build(&cloud).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let c = P::new(
                rng.gen_range(-0.2..2.2),
                rng.gen_range(-0.2..2.2),
                rng.gen_range(-0.2..2.2),
            );
            let r: f64 = rng.gen_range(0.0..0.6);
            let mut got = idx.radius_search(c, r).unwrap();
            got.sort_unstable();
            let expected: Vec<u32> = cloud
                .points()
                .iter()
                .enumerate()
                .filter(|(_, p)| p.distance_squared(c) <= r * r)
                .map(|(i, _)| i as u32)
                .collect();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn nearest_equals_brute_force() {
        let cloud = random_cloud(3000, 4, 1.0);
        let idx = SpatialIndex::build(&cloud).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let q = P::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
            let (i, d) = idx.nearest(q);
            let (bi, bd) = cloud
                .points()
                .iter()
                .enumerate()
                .map(|(j, p)| (j as u32, p.distance(q)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
                .unwrap();
            assert_eq!(i, bi);
            assert!((d - bd).abs() < 1e-12);
        }
    }

    #[test]
    fn cylinder_search_equals_brute_force() {
        let cloud = random_cloud(4000, 5, 2.0);
        let idx = SpatialIndex::build(&cloud).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let a = P::new(
                rng.gen_range(0.0..2.0),
                rng.gen_range(0.0..2.0),
                rng.gen_range(0.0..2.0),
            );
            let dir = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalize();
            let radius: f64 = rng.gen_range(0.05..0.5);
            let hh: f64 = rng.gen_range(0.1..1.5);
            let mut got = idx.cylinder_search(a, dir, radius, hh).unwrap();
            got.sort_unstable();
            let av = [a.x, a.y, a.z];
            let dv = [dir.x, dir.y, dir.z];
            let expected: Vec<u32> = cloud
                .points()
                .iter()
                .enumerate()
                .filter(|(_, p)| cylinder_contains([p.x, p.y, p.z], av, dv, radius, hh))
                .map(|(i, _)| i as u32)
                .collect();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn cylinder_boundary_cases() {
        // plane of points around a vertical axis: everything within the
        // radial bound is returned; axial overshoot is excluded
        let mut pts = Vec::new();
        for i in -3..=3 {
            for j in -3..=3 {
                pts.push(P::new(i as f64 * 0.005, 0.0, j as f64 * 0.005));
            }
        }
        pts.push(P::new(0.0, 2.1, 0.0));
        let cloud = PointCloud::new(pts.clone(), FrameTag::Site, "disc").unwrap();
        let idx = SpatialIndex::build(&cloud).unwrap();
        let hits = idx
            .cylinder_search(P::new(0.0, 0.0, 0.0), Vector3::y(), 0.015, 2.0)
            .unwrap();
        let expected: Vec<u32> = pts
            .iter()
            .enumerate()
            .filter(|(_, p)| p.y == 0.0 && (p.x * p.x + p.z * p.z) <= 0.015 * 0.015 + 1e-18)
            .map(|(i, _)| i as u32)
            .collect();
        let mut hits_sorted = hits;
        hits_sorted.sort_unstable();
        assert_eq!(hits_sorted, expected);
        // the straggler at axial offset 2.1 m is outside the half height
        assert!(!hits_sorted.contains(&(pts.len() as u32 - 1)));
    }

    #[test]
    fn rejects_bad_cylinder_arguments() {
        let cloud = random_cloud(10, 6, 1.0);
        let idx = SpatialIndex::build(&cloud).unwrap();
        assert!(idx
            .cylinder_search(P::origin(), Vector3::new(1.0, 1.0, 0.0), 0.1, 0.1)
            .is_err());
        assert!(idx.cylinder_search(P::origin(), Vector3::y(), -0.1, 0.1).is_err());
        assert!(idx.radius_search(P::origin(), -1.0).is_err());
    }

    #[test]
    fn split_half_partitions() {
        for n in [2usize, 3, 101, 10_000] {
            let cloud = random_cloud(n, 7, 1.0);
            let (a, b) = split_half(&cloud, 9).unwrap();
            assert_eq!(a.len() + b.len(), n);
            assert!(a.len().abs_diff(b.len()) <= 1);
            // disjoint and covering: match multisets of coordinates
            let mut seen: Vec<[u64; 3]> = a
                .points()
                .iter()
                .chain(b.points())
                .map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])
                .collect();
            seen.sort_unstable();
            let mut orig: Vec<[u64; 3]> = cloud
                .points()
                .iter()
                .map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])
                .collect();
            orig.sort_unstable();
            assert_eq!(seen, orig);
        }
    }

    #[test]
    fn split_half_is_deterministic_and_spatially_uniform() {
        let cloud = random_cloud(10_000, 8, 1.0);
        let (a1, _) = split_half(&cloud, 42).unwrap();
        let (a2, _) = split_half(&cloud, 42).unwrap();
        assert_eq!(a1.points()[17], a2.points()[17]);
        assert_eq!(a1.len(), a2.len());

        // halving density scales the bounding-box spacing by about sqrt(2)
        let s0 = cloud.data_spacing().unwrap();
        let (a, b) = split_half(&cloud, 1).unwrap();
        for half in [&a, &b] {
            let s = half.data_spacing().unwrap();
            let ratio = s / (s0 * 2f64.sqrt());
            assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
        }
    }

    #[test]
    fn split_half_needs_two_points() {
        let cloud = PointCloud::new(vec![P::origin()], FrameTag::Site, "one").unwrap();
        assert!(split_half(&cloud, 0).is_err());
    }

    #[test]
    fn two_points_split_one_each() {
        let cloud = PointCloud::new(
            vec![P::new(0.0, 0.0, 0.0), P::new(1.0, 0.0, 0.0)],
            FrameTag::Site,
            "pair",
        )
        .unwrap();
        let (a, b) = split_half(&cloud, 0).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
    }

    #[test]
    fn voxel_keys_are_anchored_floor() {
        let cloud = PointCloud::new(
            vec![P::new(0.05, 0.0, 0.0), P::new(0.25, 0.0, 0.0), P::new(0.999, 0.0, 0.0)],
            FrameTag::Site,
            "keys",
        )
        .unwrap();
        let part = VoxelPartition::build(&cloud, 0.1).unwrap();
        assert_eq!(part.key_of(P::new(0.05, 0.0, 0.0)), (0, 0, 0));
        assert_eq!(part.key_of(P::new(0.25, 0.0, 0.0)), (2, 0, 0));
        assert_eq!(part.key_of(P::new(0.999, 0.0, 0.0)), (9, 0, 0));
    }

    #[test]
    fn every_point_in_exactly_one_voxel() {
        let cloud = random_cloud(5000, 9, 1.0);
        let part = VoxelPartition::build(&cloud, 0.07).unwrap();
        let mut counts = vec![0u32; cloud.len()];
        for (_, members) in part.iter() {
            for &m in members {
                counts[m as usize] += 1;
            }
        }
        assert!(counts.iter().all(|&c| c == 1));
    }

    #[test]
    fn random_in_voxel_output_is_subset_one_per_voxel() {
        let cloud = random_cloud(100_000, 10, 1.0);
        let sub = random_in_voxel(&cloud, 0.1, 3).unwrap();
        // count non-empty voxels with an independent hashing pass
        let origin = cloud.bounding_box().unwrap().min;
        let mut keys = std::collections::HashSet::new();
        for p in cloud.points() {
            keys.insert((
                ((p.x - origin.x) / 0.1).floor() as i64,
                ((p.y - origin.y) / 0.1).floor() as i64,
                ((p.z - origin.z) / 0.1).floor() as i64,
            ));
        }
        assert_eq!(sub.len(), keys.len());

        // membership: every output coordinate exists in the input
        let set: std::collections::HashSet<[u64; 3]> = cloud
            .points()
            .iter()
            .map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])
            .collect();
        assert!(sub
            .points()
            .iter()
            .all(|p| set.contains(&[p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])));
    }

    #[test]
    fn random_in_voxel_trivial_sizes() {
        let cloud = random_cloud(50, 11, 1.0);
        // voxel larger than the cloud: a single surviving point
        let one = random_in_voxel(&cloud, 100.0, 0).unwrap();
        assert_eq!(one.len(), 1);
        // voxel below the minimum pairwise distance: identity
        let all = random_in_voxel(&cloud, 1e-9, 0).unwrap();
        assert_eq!(all.len(), cloud.len());
        // determinism
        let s1 = random_in_voxel(&cloud, 0.2, 5).unwrap();
        let s2 = random_in_voxel(&cloud, 0.2, 5).unwrap();
        assert_eq!(s1.points().len(), s2.points().len());
        assert!(s1.points().iter().zip(s2.points()).all(|(a, b)| a == b));
    }

    #[test]
    fn rejects_nonpositive_voxel() {
        let cloud = random_cloud(10, 12, 1.0);
        assert!(random_in_voxel(&cloud, 0.0, 0).is_err());
    }
}
