//! Scan-to-scan alignment.
//!
//! Two routes produce a rigid transform mapping the query cloud onto the
//! reference: a closed-form least-squares fit over matched target pairs,
//! and point-to-plane ICP refined from nearest-neighbour correspondences.
//! Alignment quality is summarized by closest-point distance statistics
//! against a mesh of the reference.

use crate::cloud::{fit_plane_of, PointCloud};
use crate::deform;
use crate::error::{Error, Result};
use crate::geom::{BoundingBox, Point3, RigidTransform};
use crate::scalar::{cast, to_f64, Real};
use crate::spatial::SpatialIndex;
use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use num_traits::Float;

/// Per-point unit normals for a cloud, oriented toward the sensor.
pub struct NormalField<S> {
    normals: Vec<Vector3<S>>,
    valid: Vec<bool>,
    radius: S,
    sensor: Point3<S>,
}

impl<S: Real> NormalField<S> {
    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    /// Unit normal of point `i`, or `None` where estimation failed.
    pub fn normal(&self, i: usize) -> Option<Vector3<S>> {
        self.valid[i].then(|| self.normals[i])
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Neighbourhood radius the normals were estimated with.
    pub fn radius(&self) -> S {
        self.radius
    }

    /// Sensor position the normals are oriented toward.
    pub fn sensor(&self) -> Point3<S> {
        self.sensor
    }
}

/// Estimates per-point normals by local plane fits.
///
/// Each point's neighbourhood within `radius` (the point included) is fit
/// with a plane; the smallest-eigenvalue direction becomes the normal,
/// flipped so it faces `sensor`. Points whose neighbourhood has fewer
/// than 3 points or is collinear are flagged invalid rather than failing
/// the whole field.
pub fn estimate_normals<S: Real>(
    cloud: &PointCloud<S>,
    radius: S,
    sensor: Point3<S>,
) -> Result<NormalField<S>> {
    if radius <= S::zero() {
        return Err(Error::param("normal estimation radius must be positive"));
    }
    let index = SpatialIndex::build(cloud)?;
    let pts = cloud.points();
    let mut normals = vec![Vector3::zeros(); pts.len()];
    let mut valid = vec![false; pts.len()];
    let mut hood: Vec<u32> = Vec::new();
    let mut local: Vec<Point3<S>> = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        index.radius_search_into(*p, radius, &mut hood)?;
        if hood.len() < 3 {
            continue;
        }
        local.clear();
        local.extend(hood.iter().map(|&j| pts[j as usize]));
        let Ok(plane) = fit_plane_of(&local) else {
            continue;
        };
        let mut n = plane.normal();
        let view = sensor - *p;
        if n.dot(&view) < S::zero() {
            n = -n;
        }
        normals[i] = n;
        valid[i] = true;
    }
    Ok(NormalField { normals, valid, radius, sensor })
}

/// Extra weight applied to ICP correspondences whose reference point
/// falls inside a region (e.g. a stable structural feature).
#[derive(Debug, Clone)]
pub struct EmphasisRegion<S> {
    pub region: BoundingBox<S>,
    /// Weight for correspondences in the region; 1 means no emphasis.
    pub weight: S,
}

/// Point-to-plane ICP controls.
#[derive(Debug, Clone)]
pub struct IcpParams<S> {
    /// Hard iteration cap (>= 1).
    pub max_iterations: usize,
    /// Stop when the translation update falls below this (metres).
    pub translation_eps: S,
    /// Stop when the rotation update falls below this (radians).
    pub rotation_eps: S,
    /// Correspondences with |residual| above this multiple of the current
    /// residual scale are discarded each iteration (> 1). The scale is the
    /// median absolute residual, floored by how far the previous solve
    /// moved the cloud, so a cleanly fitting majority plane cannot starve
    /// still-converging relief features out of the solve; at convergence
    /// the floor vanishes and plain median trimming remains.
    pub rejection_factor: S,
    pub emphasis: Option<EmphasisRegion<S>>,
}

impl<S: Real> Default for IcpParams<S> {
    fn default() -> Self {
        IcpParams {
            max_iterations: 50,
            translation_eps: cast(1e-6),
            rotation_eps: cast(1e-7),
            rejection_factor: cast(3.0),
            emphasis: None,
        }
    }
}

impl<S: Real> IcpParams<S> {
    fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::param("ICP needs at least 1 iteration"));
        }
        if self.rejection_factor <= S::one() {
            return Err(Error::param("ICP rejection factor must exceed 1"));
        }
        if self.translation_eps <= S::zero() || self.rotation_eps <= S::zero() {
            return Err(Error::param("ICP convergence thresholds must be positive"));
        }
        if let Some(e) = &self.emphasis {
            if e.weight < S::one() {
                return Err(Error::param("emphasis weight must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Outcome of an alignment.
#[derive(Debug, Clone)]
pub struct RegistrationResult<S> {
    /// Maps query coordinates into the reference frame.
    pub transform: RigidTransform<S>,
    /// Root-mean-square residual over inlier correspondences (metres).
    pub rmse: S,
    /// Iterations actually executed (1 for the closed-form fit).
    pub iterations: usize,
    /// Inliers surviving rejection, as a fraction of all correspondences.
    pub inlier_fraction: f64,
    /// False when ICP hit the iteration cap before the thresholds.
    pub converged: bool,
}

/// Closed-form least-squares rigid fit over matched point pairs.
///
/// Each pair is (reference, query); the result maps query onto reference
/// minimizing the sum of squared pair distances. Pairs are accumulated in
/// a canonical sort order, so any relabeling of the input yields a
/// bit-identical transform.
pub fn register_targets<S: Real>(
    pairs: &[(Point3<S>, Point3<S>)],
) -> Result<RegistrationResult<S>> {
    if pairs.len() < 3 {
        return Err(Error::degenerate("target registration needs at least 3 pairs"));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        let ka = pair_key(&pairs[a]);
        let kb = pair_key(&pairs[b]);
        ka.partial_cmp(&kb).expect("finite target coordinates")
    });

    let inv_n = 1.0 / pairs.len() as f64;
    let mut rc = Vector3::<f64>::zeros();
    let mut qc = Vector3::<f64>::zeros();
    for &i in &order {
        rc += as_f64(pairs[i].0).coords;
        qc += as_f64(pairs[i].1).coords;
    }
    rc *= inv_n;
    qc *= inv_n;

    // cross-covariance of centered pairs; rank >= 2 requires both sets
    // to be non-collinear
    let mut h = Matrix3::<f64>::zeros();
    for &i in &order {
        let r = as_f64(pairs[i].0).coords - rc;
        let q = as_f64(pairs[i].1).coords - qc;
        h += q * r.transpose();
    }
    for collinear_check in [0, 1] {
        let mut cov = Matrix3::<f64>::zeros();
        for &i in &order {
            let d = if collinear_check == 0 {
                as_f64(pairs[i].0).coords - rc
            } else {
                as_f64(pairs[i].1).coords - qc
            };
            cov += d * d.transpose();
        }
        let mut eig: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if eig[1] <= eig[2] * 1e-12 {
            return Err(Error::degenerate("target pairs are collinear"));
        }
    }

    let svd = h.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let vt = svd.v_t.expect("svd requested v_t");
    let d = (vt.transpose() * u.transpose()).determinant();
    let mut s = Matrix3::<f64>::identity();
    s[(2, 2)] = if d < 0.0 { -1.0 } else { 1.0 };
    let r = vt.transpose() * s * u.transpose();
    let t = rc - r * qc;

    let transform = RigidTransform::from_parts(
        Matrix3::from_fn(|i, j| cast::<S>(r[(i, j)])),
        Vector3::new(cast::<S>(t.x), cast::<S>(t.y), cast::<S>(t.z)),
    )?;
    let mut sq = 0.0;
    for (rp, qp) in pairs {
        let m = transform.apply(*qp);
        sq += to_f64(m.distance_squared(*rp));
    }
    Ok(RegistrationResult {
        transform,
        rmse: cast((sq * inv_n).sqrt()),
        iterations: 1,
        inlier_fraction: 1.0,
        converged: true,
    })
}

fn pair_key<S: Real>(pair: &(Point3<S>, Point3<S>)) -> [f64; 6] {
    let (r, q) = pair;
    [to_f64(r.x), to_f64(r.y), to_f64(r.z), to_f64(q.x), to_f64(q.y), to_f64(q.z)]
}

fn as_f64<S: Real>(p: Point3<S>) -> nalgebra::Point3<f64> {
    nalgebra::Point3::new(to_f64(p.x), to_f64(p.y), to_f64(p.z))
}

/// Point-to-plane ICP aligning `query` to `reference`.
///
/// Starting from identity, each iteration matches transformed query
/// points to their nearest reference point, drops residuals beyond the
/// rejection threshold, and solves the linearized point-to-plane normal
/// equations. Correspondences against reference points with invalid
/// normals are skipped. The weighted objective is non-increasing per
/// iteration: a step that would increase it is reverted and iteration
/// stops at the current transform.
pub fn icp_point_to_plane<S: Real>(
    query: &PointCloud<S>,
    reference: &PointCloud<S>,
    normals: &NormalField<S>,
    params: &IcpParams<S>,
) -> Result<RegistrationResult<S>> {
    params.validate()?;
    if query.is_empty() || reference.is_empty() {
        return Err(Error::empty("ICP input cloud"));
    }
    if normals.len() != reference.len() {
        return Err(Error::param("normal field does not match the reference cloud"));
    }
    let index = SpatialIndex::build(reference)?;
    let ref_pts = reference.points();

    let mut transform = RigidTransform::<S>::identity();
    let mut iterations = 0;
    let mut converged = false;

    // lever arm bound: a rotation update of |w| moves points at most
    // |w| * lever, which floors the rejection scale while still moving
    let lever0 = query
        .points()
        .iter()
        .map(|p| to_f64(p.coords().norm()))
        .fold(0.0, f64::max);
    let mut motion_scale = 0.0;

    let mut matches: Vec<(u32, u32)> = Vec::new(); // (query idx, ref idx)
    let mut residuals: Vec<f64> = Vec::new();
    let mut keep: Vec<bool> = Vec::new();

    for _ in 0..params.max_iterations {
        iterations += 1;
        correspondences(
            query,
            &index,
            ref_pts,
            normals,
            &transform,
            params,
            motion_scale,
            &mut matches,
            &mut residuals,
            &mut keep,
        )?;

        // weighted normal equations over inliers: x = [rotation; translation]
        let mut n6 = Matrix6::<f64>::zeros();
        let mut g = Vector6::<f64>::zeros();
        let mut obj_before = 0.0;
        for (k, &(qi, ri)) in matches.iter().enumerate() {
            if !keep[k] {
                continue;
            }
            let w = emphasis_weight(params, ref_pts[ri as usize]);
            let qp = as_f64(transform.apply(query.points()[qi as usize])).coords;
            let n = normals.normal(ri as usize).expect("matched normals are valid");
            let nf = Vector3::new(to_f64(n.x), to_f64(n.y), to_f64(n.z));
            let c = Vector6::new(
                qp.cross(&nf).x,
                qp.cross(&nf).y,
                qp.cross(&nf).z,
                nf.x,
                nf.y,
                nf.z,
            );
            let res = residuals[k];
            n6 += c * c.transpose() * w;
            g -= c * (res * w);
            obj_before += w * res * res;
        }

        let x = solve_truncated(&n6, &g);
        let omega = Vector3::new(x[0], x[1], x[2]);
        let t = Vector3::new(x[3], x[4], x[5]);
        let delta = RigidTransform::from_parts(
            Matrix3::from_fn(|i, j| {
                cast::<S>(nalgebra::Rotation3::new(omega).matrix()[(i, j)])
            }),
            Vector3::new(cast::<S>(t.x), cast::<S>(t.y), cast::<S>(t.z)),
        )?;
        let candidate = delta.compose(&transform);

        // same-correspondence objective check guards the linearization
        let mut obj_after = 0.0;
        for (k, &(qi, ri)) in matches.iter().enumerate() {
            if !keep[k] {
                continue;
            }
            let w = emphasis_weight(params, ref_pts[ri as usize]);
            let m = candidate.apply(query.points()[qi as usize]);
            let n = normals.normal(ri as usize).expect("matched normals are valid");
            let res = to_f64((m - ref_pts[ri as usize]).dot(&n));
            obj_after += w * res * res;
        }
        if obj_after > obj_before {
            converged = true;
            break;
        }
        assert!(
            obj_after <= obj_before,
            "point-to-plane objective increased: {obj_before} -> {obj_after}"
        );
        transform = candidate;
        motion_scale =
            t.norm() + omega.norm() * (lever0 + to_f64(transform.translation().norm()));

        if t.norm() < to_f64(params.translation_eps)
            && omega.norm() < to_f64(params.rotation_eps)
        {
            converged = true;
            break;
        }
    }

    // final statistics with the settled transform
    correspondences(
        query,
        &index,
        ref_pts,
        normals,
        &transform,
        params,
        0.0,
        &mut matches,
        &mut residuals,
        &mut keep,
    )?;
    let mut sq = 0.0;
    let mut inliers = 0usize;
    for (k, r) in residuals.iter().enumerate() {
        if keep[k] {
            sq += r * r;
            inliers += 1;
        }
    }
    Ok(RegistrationResult {
        transform,
        rmse: cast((sq / inliers as f64).sqrt()),
        iterations,
        inlier_fraction: inliers as f64 / matches.len() as f64,
        converged,
    })
}

/// Matches transformed query points to nearest reference points with
/// valid normals and marks inliers by the median rejection rule, with
/// the residual scale floored at `scale_floor` (see
/// [`IcpParams::rejection_factor`]).
#[allow(clippy::too_many_arguments)]
fn correspondences<S: Real>(
    query: &PointCloud<S>,
    index: &SpatialIndex<S>,
    ref_pts: &[Point3<S>],
    normals: &NormalField<S>,
    transform: &RigidTransform<S>,
    params: &IcpParams<S>,
    scale_floor: f64,
    matches: &mut Vec<(u32, u32)>,
    residuals: &mut Vec<f64>,
    keep: &mut Vec<bool>,
) -> Result<()> {
    matches.clear();
    residuals.clear();
    for (qi, q) in query.points().iter().enumerate() {
        let m = transform.apply(*q);
        let (ri, _) = index.nearest(m);
        let Some(n) = normals.normal(ri as usize) else {
            continue;
        };
        let res = to_f64((m - ref_pts[ri as usize]).dot(&n));
        matches.push((qi as u32, ri));
        residuals.push(res);
    }
    if matches.is_empty() {
        return Err(Error::Registration {
            message: "no usable correspondences (no valid reference normals in range)".into(),
        });
    }
    let mut abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    let mid = abs.len() / 2;
    let (_, median, _) = abs.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
    let cutoff = to_f64(params.rejection_factor) * median.max(scale_floor);
    keep.clear();
    keep.extend(residuals.iter().map(|r| r.abs() <= cutoff));
    if !keep.iter().any(|&k| k) {
        return Err(Error::Registration {
            message: "all correspondences rejected as outliers".into(),
        });
    }
    Ok(())
}

#[inline]
fn emphasis_weight<S: Real>(params: &IcpParams<S>, ref_point: Point3<S>) -> f64 {
    match &params.emphasis {
        Some(e) if e.region.contains(ref_point) => to_f64(e.weight),
        _ => 1.0,
    }
}

/// Solves the symmetric system `n x = g`, truncating near-null
/// eigenvalues so degenerate geometry yields a minimum-norm update
/// instead of a wild one.
fn solve_truncated(n: &Matrix6<f64>, g: &Vector6<f64>) -> Vector6<f64> {
    let eig = n.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let tol = lmax * 1e-10;
    let mut x = Vector6::zeros();
    for i in 0..6 {
        let l = eig.eigenvalues[i];
        if l > tol {
            let v = eig.eigenvectors.column(i);
            x += v * (v.dot(g) / l);
        }
    }
    x
}

/// Closest-point distance statistics between a reference cloud and a
/// registered query cloud.
#[derive(Debug, Clone)]
pub struct QcReport<S> {
    /// Mean signed distance over valid points (metres).
    pub mean: S,
    /// Largest absolute distance (metres).
    pub max_abs: S,
    /// Per-query-point signed distances; NaN-free, invalid points absent.
    pub distances: Vec<S>,
}

/// Residual-misalignment check: signed closest-point distances from the
/// registered query to a mesh of the reference.
pub fn registration_qc<S: Real>(
    reference: &PointCloud<S>,
    registered_query: &PointCloud<S>,
) -> Result<QcReport<S>> {
    let field = deform::c2m(reference, registered_query)?;
    let distances: Vec<S> = field.valid_values().map(|(_, v)| v).collect();
    if distances.is_empty() {
        return Err(Error::empty("registration qc distance set"));
    }
    let mut sum = S::zero();
    let mut max_abs = S::zero();
    for d in &distances {
        sum += *d;
        max_abs = Float::max(max_abs, Float::abs(*d));
    }
    Ok(QcReport {
        mean: sum / cast(distances.len() as f64),
        max_abs,
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::FrameTag;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    type P = Point3<f64>;

    fn cloud_of(pts: Vec<P>) -> PointCloud<f64> {
        PointCloud::new(pts, FrameTag::Site, "test").unwrap()
    }

    #[test]
    fn planar_cloud_normals_point_up() {
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                pts.push(P::new(i as f64 * 0.05, j as f64 * 0.05, 0.0));
            }
        }
        let cloud = cloud_of(pts);
        let field = estimate_normals(&cloud, 0.12, P::new(0.5, 0.5, 10.0)).unwrap();
        assert_eq!(field.valid_count(), cloud.len());
        for i in 0..cloud.len() {
            let n = field.normal(i).unwrap();
            assert!((n - Vector3::z()).norm() < 1e-9, "normal {n:?}");
        }
    }

    #[test]
    fn cylinder_normals_are_radial() {
        // patch of a radius-2 cylinder about the z axis, fit radius 0.05
        let r = 2.0;
        let mut pts = Vec::new();
        for i in 0..60 {
            for j in 0..60 {
                let theta = -0.2 + 0.4 * i as f64 / 59.0;
                let z = j as f64 * 0.01;
                pts.push(P::new(r * theta.cos(), r * theta.sin(), z));
            }
        }
        let cloud = cloud_of(pts);
        let field = estimate_normals(&cloud, 0.05, P::new(10.0, 0.0, 0.3)).unwrap();
        let mut checked = 0;
        for (i, p) in cloud.points().iter().enumerate() {
            let Some(n) = field.normal(i) else { continue };
            let radial = Vector3::new(p.x, p.y, 0.0).normalize();
            let angle = n.dot(&radial).clamp(-1.0, 1.0).acos();
            assert!(angle < 2f64.to_radians(), "angle {}", angle.to_degrees());
            checked += 1;
        }
        assert!(checked > 3000);
    }

    #[test]
    fn isolated_point_is_flagged_invalid() {
        let mut pts = vec![P::new(100.0, 0.0, 0.0)];
        for i in 0..10 {
            for j in 0..10 {
                pts.push(P::new(i as f64 * 0.01, j as f64 * 0.01, 0.0));
            }
        }
        let cloud = cloud_of(pts);
        let field = estimate_normals(&cloud, 0.05, P::new(0.0, 0.0, 5.0)).unwrap();
        assert!(!field.is_valid(0));
        assert_eq!(field.valid_count(), cloud.len() - 1);
    }

    #[test]
    fn normals_are_unit_and_face_the_sensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<P> = (0..800)
            .map(|_| {
                P::new(
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..0.02),
                    rng.gen_range(0.0..1.0),
                )
            })
            .collect();
        let cloud = cloud_of(pts);
        let sensor = P::new(0.5, 8.0, 0.5);
        let field = estimate_normals(&cloud, 0.08, sensor).unwrap();
        for (i, p) in cloud.points().iter().enumerate() {
            let Some(n) = field.normal(i) else { continue };
            assert!((n.norm() - 1.0).abs() < 1e-9);
            assert!(n.dot(&(sensor - *p)) >= 0.0);
        }
    }

    #[test]
    fn rejects_nonpositive_radius() {
        let cloud = cloud_of(vec![P::origin()]);
        assert!(estimate_normals(&cloud, 0.0, P::origin()).is_err());
    }

    fn spread_targets() -> Vec<P> {
        vec![
            P::new(0.0, 0.0, 0.0),
            P::new(3.5, 0.2, 0.1),
            P::new(0.3, 2.8, 0.0),
            P::new(3.2, 2.5, 1.4),
            P::new(1.8, 0.1, 2.2),
            P::new(0.2, 2.6, 2.0),
        ]
    }

    #[test]
    fn coincident_targets_give_identity() {
        let pairs: Vec<(P, P)> = spread_targets().into_iter().map(|p| (p, p)).collect();
        let res = register_targets(&pairs).unwrap();
        assert!(res.rmse < 1e-12);
        assert!(res.transform.rotation_angle() < 1e-12);
        assert!(res.transform.translation().norm() < 1e-12);
        assert_eq!(res.inlier_fraction, 1.0);
    }

    #[test]
    fn exact_transform_is_recovered() {
        let truth = RigidTransform::rotation_about(
            Vector3::z(),
            30f64.to_radians(),
            Vector3::new(1.0, 2.0, 0.0),
        )
        .unwrap();
        let refs = &spread_targets()[..5];
        let pairs: Vec<(P, P)> = refs
            .iter()
            .map(|r| (*r, truth.inverse().apply(*r)))
            .collect();
        let res = register_targets(&pairs).unwrap();
        assert!(res.rmse < 1e-9);
        let err = res.transform.compose(&truth.inverse());
        assert!(err.rotation_angle() < 1e-9);
        assert!(err.translation().norm() < 1e-9);
    }

    #[test]
    fn noisy_targets_monte_carlo() {
        let truth = RigidTransform::rotation_about(
            Vector3::new(0.1, 0.2, 1.0).normalize(),
            12f64.to_radians(),
            Vector3::new(0.4, -0.7, 0.2),
        )
        .unwrap();
        let noise = Normal::new(0.0, 0.001).unwrap();
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pairs: Vec<(P, P)> = spread_targets()
                .iter()
                .map(|r| {
                    let noisy = P::new(
                        r.x + noise.sample(&mut rng),
                        r.y + noise.sample(&mut rng),
                        r.z + noise.sample(&mut rng),
                    );
                    (noisy, truth.inverse().apply(*r))
                })
                .collect();
            let res = register_targets(&pairs).unwrap();
            assert!(
                res.rmse > 0.3e-3 && res.rmse < 3.0e-3,
                "seed {seed}: rmse {}",
                res.rmse
            );
            let err = res.transform.compose(&truth.inverse());
            assert!(err.rotation_angle() < 0.5f64.to_radians(), "seed {seed}");
            assert!(err.translation().norm() < 5.0e-3, "seed {seed}");
        }
    }

    #[test]
    fn relabeling_is_bit_exact() {
        let truth = RigidTransform::rotation_about(
            Vector3::y(),
            5f64.to_radians(),
            Vector3::new(0.1, 0.0, -0.3),
        )
        .unwrap();
        let mut pairs: Vec<(P, P)> = spread_targets()
            .iter()
            .map(|r| (*r, truth.inverse().apply(*r)))
            .collect();
        let a = register_targets(&pairs).unwrap();
        pairs.reverse();
        pairs.swap(1, 4);
        let b = register_targets(&pairs).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(
                    a.transform.rotation()[(i, j)].to_bits(),
                    b.transform.rotation()[(i, j)].to_bits()
                );
            }
            assert_eq!(
                a.transform.translation()[i].to_bits(),
                b.transform.translation()[i].to_bits()
            );
        }
    }

    #[test]
    fn joint_rigid_motion_conjugates_the_result() {
        let truth = RigidTransform::rotation_about(
            Vector3::z(),
            9f64.to_radians(),
            Vector3::new(0.3, 0.1, 0.0),
        )
        .unwrap();
        let pairs: Vec<(P, P)> = spread_targets()
            .iter()
            .map(|r| (*r, truth.inverse().apply(*r)))
            .collect();
        let base = register_targets(&pairs).unwrap();

        let g = RigidTransform::rotation_about(
            Vector3::new(1.0, 1.0, 0.2).normalize(),
            40f64.to_radians(),
            Vector3::new(-2.0, 1.0, 5.0),
        )
        .unwrap();
        let moved: Vec<(P, P)> = pairs.iter().map(|(r, q)| (g.apply(*r), g.apply(*q))).collect();
        let conj = register_targets(&moved).unwrap();
        let expected = g.compose(&base.transform).compose(&g.inverse());
        let err = conj.transform.compose(&expected.inverse());
        assert!(err.rotation_angle() < 1e-9);
        assert!(err.translation().norm() < 1e-9);
    }

    #[test]
    fn degenerate_target_sets_error() {
        let two = vec![(P::origin(), P::origin()), (P::new(1.0, 0.0, 0.0), P::new(1.0, 0.0, 0.0))];
        assert!(register_targets(&two).is_err());
        let collinear: Vec<(P, P)> = (0..5)
            .map(|i| {
                let p = P::new(i as f64, 0.0, 0.0);
                (p, p)
            })
            .collect();
        assert!(register_targets(&collinear).is_err());
    }

    /// Flat wall with two recessed windows, jamb strips included so all
    /// six degrees of freedom are constrained.
    fn recessed_facade(noise: f64, seed: u64) -> PointCloud<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(0.0, noise).unwrap();
        let mut pts = Vec::new();
        let step = 0.02;
        let windows = [(0.8, 1.6, 1.0, 2.0), (2.4, 3.2, 1.0, 2.0)];
        let depth = 0.08;
        let inside =
            |x: f64, z: f64| windows.iter().any(|w| x >= w.0 && x <= w.1 && z >= w.2 && z <= w.3);
        let mut push = |x: f64, y: f64, z: f64, rng: &mut ChaCha8Rng| {
            let dy = if noise > 0.0 { dist.sample(rng) } else { 0.0 };
            pts.push(P::new(x, y + dy, z));
        };
        let mut x = 0.0;
        while x < 4.0 {
            let mut z = 0.0;
            while z < 2.5 {
                let y = if inside(x, z) { -depth } else { 0.0 };
                push(x, y, z, &mut rng);
                z += step;
            }
            x += step;
        }
        // jamb strips: side faces of each recess
        for w in windows {
            let mut d = step / 2.0;
            while d < depth {
                let mut z = w.2;
                while z <= w.3 {
                    push(w.0, -d, z, &mut rng);
                    push(w.1, -d, z, &mut rng);
                    z += step;
                }
                let mut xx = w.0;
                while xx <= w.1 {
                    push(xx, -d, w.2, &mut rng);
                    push(xx, -d, w.3, &mut rng);
                    xx += step;
                }
                d += step;
            }
        }
        cloud_of(pts)
    }

    fn facade_normals(cloud: &PointCloud<f64>) -> NormalField<f64> {
        estimate_normals(cloud, 0.03, P::new(2.0, 10.0, 1.2)).unwrap()
    }

    #[test]
    fn icp_identity_stays_identity() {
        let wall = recessed_facade(0.0, 0);
        let normals = facade_normals(&wall);
        let res =
            icp_point_to_plane(&wall, &wall, &normals, &IcpParams::default()).unwrap();
        assert!(res.converged);
        assert!(res.rmse < 1e-12);
        assert!(res.transform.rotation_angle() < 1e-12);
        assert!(res.transform.translation().norm() < 1e-12);
        assert_eq!(res.inlier_fraction, 1.0);
    }

    #[test]
    fn icp_recovers_noise_free_displacement() {
        let wall = recessed_facade(0.0, 0);
        let normals = facade_normals(&wall);
        let truth = RigidTransform::rotation_about(
            Vector3::new(0.3, 1.0, 0.2).normalize(),
            2f64.to_radians(),
            Vector3::new(0.03, -0.02, 0.03),
        )
        .unwrap();
        let displaced = wall.apply_transform(&truth.inverse());
        let res =
            icp_point_to_plane(&displaced, &wall, &normals, &IcpParams::default()).unwrap();
        assert!(res.converged, "no convergence in {} iterations", res.iterations);
        let err = res.transform.compose(&truth.inverse());
        assert!(err.rotation_angle() < 1e-4, "rot err {}", err.rotation_angle());
        assert!(err.translation().norm() < 1e-4, "t err {}", err.translation().norm());
        assert!(res.rmse < 1e-6);
    }

    #[test]
    fn icp_with_range_noise_converges_close() {
        let wall = recessed_facade(0.0, 0);
        let normals = facade_normals(&wall);
        let noisy = recessed_facade(0.001, 42);
        let truth = RigidTransform::rotation_about(
            Vector3::y(),
            1.5f64.to_radians(),
            Vector3::new(0.02, 0.01, -0.04),
        )
        .unwrap();
        let displaced = noisy.apply_transform(&truth.inverse());
        let res =
            icp_point_to_plane(&displaced, &wall, &normals, &IcpParams::default()).unwrap();
        let err = res.transform.compose(&truth.inverse());
        assert!(
            err.translation().norm() < 0.2e-3,
            "residual translation {}",
            err.translation().norm()
        );
        assert!(err.rotation_angle() < 1e-3);
        assert_relative_eq!(res.rmse, 0.001, max_relative = 0.35);
    }

    #[test]
    fn emphasis_weight_one_is_bit_identical() {
        let wall = recessed_facade(0.001, 7);
        let normals = facade_normals(&wall);
        let truth = RigidTransform::rotation_about(
            Vector3::x(),
            1f64.to_radians(),
            Vector3::new(0.01, 0.02, 0.0),
        )
        .unwrap();
        let displaced = recessed_facade(0.001, 8).apply_transform(&truth.inverse());
        let plain =
            icp_point_to_plane(&displaced, &wall, &normals, &IcpParams::default()).unwrap();
        let emphasized = icp_point_to_plane(
            &displaced,
            &wall,
            &normals,
            &IcpParams {
                emphasis: Some(EmphasisRegion {
                    region: BoundingBox {
                        min: P::new(0.5, -1.0, 0.5),
                        max: P::new(2.0, 1.0, 2.0),
                    },
                    weight: 1.0,
                }),
                ..IcpParams::default()
            },
        )
        .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(
                    plain.transform.rotation()[(i, j)].to_bits(),
                    emphasized.transform.rotation()[(i, j)].to_bits()
                );
            }
            assert_eq!(
                plain.transform.translation()[i].to_bits(),
                emphasized.transform.translation()[i].to_bits()
            );
        }
        assert_eq!(plain.rmse.to_bits(), emphasized.rmse.to_bits());
    }

    #[test]
    fn icp_convergence_basin_offsets() {
        let wall = recessed_facade(0.0, 0);
        let normals = facade_normals(&wall);
        for (deg, off) in [(5.0, 0.05), (3.0, 0.2), (5.0, 0.15)] {
            let truth = RigidTransform::rotation_about(
                Vector3::new(0.2, 1.0, -0.4).normalize(),
                deg.to_radians(),
                Vector3::new(off, -off / 2.0, off / 3.0),
            )
            .unwrap();
            let displaced = wall.apply_transform(&truth.inverse());
            let res =
                icp_point_to_plane(&displaced, &wall, &normals, &IcpParams::default()).unwrap();
            let err = res.transform.compose(&truth.inverse());
            assert!(err.rotation_angle() < 1e-4, "basin ({deg}, {off})");
            assert!(err.translation().norm() < 1e-4, "basin ({deg}, {off})");
        }
    }

    #[test]
    fn icp_rejects_bad_params() {
        let wall = recessed_facade(0.0, 0);
        let normals = facade_normals(&wall);
        let bad = IcpParams { max_iterations: 0, ..IcpParams::default() };
        assert!(icp_point_to_plane(&wall, &wall, &normals, &bad).is_err());
        let bad = IcpParams { rejection_factor: 1.0, ..IcpParams::default() };
        assert!(icp_point_to_plane(&wall, &wall, &normals, &bad).is_err());
        let bad = IcpParams {
            emphasis: Some(EmphasisRegion {
                region: BoundingBox { min: P::origin(), max: P::origin() },
                weight: 0.5,
            }),
            ..IcpParams::default()
        };
        assert!(icp_point_to_plane(&wall, &wall, &normals, &bad).is_err());
    }

    #[test]
    fn icp_errors_without_valid_normals() {
        // sparse points so every neighbourhood is just the point itself
        let pts: Vec<P> = (0..10).map(|i| P::new(i as f64 * 10.0, 0.0, 0.0)).collect();
        let cloud = cloud_of(pts);
        let normals = estimate_normals(&cloud, 0.01, P::new(0.0, 5.0, 0.0)).unwrap();
        assert_eq!(normals.valid_count(), 0);
        let err = icp_point_to_plane(&cloud, &cloud, &normals, &IcpParams::default());
        assert!(matches!(err, Err(Error::Registration { .. })));
    }

    #[test]
    fn qc_identical_clouds_is_zero() {
        let wall = recessed_facade(0.0, 0);
        let qc = registration_qc(&wall, &wall).unwrap();
        assert!(qc.mean.abs() < 1e-12);
        assert!(qc.max_abs < 1e-12);
        assert_eq!(qc.distances.len(), wall.len());
    }

    #[test]
    fn qc_uniform_offset_reports_the_offset() {
        // planar cloud so the surface normal is the offset direction
        // everywhere; recess side faces would dilute the mean
        let mut pts = Vec::new();
        for i in 0..60 {
            for j in 0..40 {
                pts.push(P::new(i as f64 * 0.02, 0.0, j as f64 * 0.02));
            }
        }
        let wall = cloud_of(pts);
        let shifted = cloud_of(
            wall.points().iter().map(|p| P::new(p.x, p.y + 0.001, p.z)).collect(),
        );
        let qc = registration_qc(&wall, &shifted).unwrap();
        assert_relative_eq!(qc.mean, 0.001, max_relative = 1e-6);
    }

    #[test]
    fn qc_noise_averages_out() {
        let wall = recessed_facade(0.0, 0);
        let noisy = recessed_facade(0.001, 21);
        let qc = registration_qc(&wall, &noisy).unwrap();
        assert!(qc.mean.abs() < 0.1e-3, "mean {}", qc.mean);
    }
}
