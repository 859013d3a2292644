//! Point clouds: the container every estimator consumes, plus plane
//! fitting and the bounding-box data-spacing estimate.

use crate::error::{Error, Result};
use crate::geom::{BoundingBox, Plane, Point3, RigidTransform, WallFrame};
use crate::scalar::{cast, to_f64, Real};
use nalgebra::{Matrix3, Rotation3, Vector3};
use num_traits::Float;

/// Coordinate frame a cloud lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameTag {
    /// Raw scanner coordinates of one setup.
    Scanner,
    /// Site coordinates shared by all epochs after registration.
    Site,
    /// Wall-local frame (x along wall, y outward, z up).
    WallLocal,
}

impl std::fmt::Display for FrameTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FrameTag::Scanner => write!(f, "scanner"),
            FrameTag::Site => write!(f, "site"),
            FrameTag::WallLocal => write!(f, "wall-local"),
        }
    }
}

/// Ordered point sequence in a tagged frame.
///
/// May be empty as a constructor output, never as estimator input; the
/// estimators check and report `EmptyInput`.
#[derive(Debug, Clone)]
pub struct PointCloud<S> {
    points: Vec<Point3<S>>,
    frame: FrameTag,
    label: String,
}

impl<S: Real> PointCloud<S> {
    /// Builds a cloud, rejecting non-finite coordinates by index.
    pub fn new(points: Vec<Point3<S>>, frame: FrameTag, label: impl Into<String>) -> Result<Self> {
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(PointCloud { points, frame, label: label.into() })
    }

    #[inline]
    pub fn points(&self) -> &[Point3<S>] {
        &self.points
    }

    #[inline]
    pub fn frame(&self) -> FrameTag {
        self.frame
    }

    #[inline]
    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// New cloud holding the points at `indices`, same frame and label.
    pub fn select(&self, indices: &[u32]) -> Self {
        let points = indices.iter().map(|&i| self.points[i as usize]).collect();
        PointCloud { points, frame: self.frame, label: self.label.clone() }
    }

    /// Smallest axis-aligned box containing the cloud.
    pub fn bounding_box(&self) -> Result<BoundingBox<S>> {
        BoundingBox::from_points(&self.points).ok_or_else(|| Error::empty("bounding_box"))
    }

    /// Mean point-to-point spacing `S = sqrt(L_x * L_y) / (sqrt(N) - 1)`.
    ///
    /// The cloud is first levelled: rotated so its best-fit plane becomes
    /// the x-y plane, and `L_x`, `L_y` are the axis-aligned extents in that
    /// levelled frame. When no plane can be fitted (fewer than 3 points or
    /// a collinear set) the raw x-y extents are used, which keeps the
    /// estimate defined down to N = 2.
    pub fn data_spacing(&self) -> Result<S> {
        let n = self.points.len();
        if n < 2 {
            return Err(Error::degenerate("data spacing needs at least 2 points"));
        }
        let (lx, ly) = match self.fit_plane() {
            Ok(plane) => {
                let normal = plane.oriented_toward(Vector3::z()).normal();
                let bbox = match Rotation3::rotation_between(&normal, &Vector3::z()) {
                    Some(rot) => BoundingBox::from_points(
                        self.points
                            .iter()
                            .map(|p| Point3::from_coords(rot * p.coords()))
                            .collect::<Vec<_>>()
                            .iter(),
                    ),
                    // antiparallel corner case cannot occur after orientation
                    None => BoundingBox::from_points(&self.points),
                }
                .expect("nonempty cloud has a bounding box");
                let e = bbox.extent();
                (e.x, e.y)
            }
            Err(_) => {
                let e = self.bounding_box()?.extent();
                (e.x, e.y)
            }
        };
        if lx <= S::zero() || ly <= S::zero() {
            return Err(Error::degenerate(
                "data spacing needs a non-degenerate levelled bounding box",
            ));
        }
        let count = cast::<S>(n as f64);
        Ok(Float::sqrt(lx * ly) / (Float::sqrt(count) - S::one()))
    }

    /// Least-squares plane through the cloud.
    ///
    /// The normal is the eigenvector of the point covariance with the
    /// smallest eigenvalue, with a deterministic sign (largest component
    /// positive). Collinear or too-small clouds are rejected.
    pub fn fit_plane(&self) -> Result<Plane<S>> {
        fit_plane_of(&self.points)
    }

    /// Applies `p -> R p + t` to every point; frame tag is preserved
    /// (callers use [`PointCloud::to_wall_frame`] for frame changes).
    pub fn apply_transform(&self, t: &RigidTransform<S>) -> Self {
        PointCloud {
            points: self.points.iter().map(|&p| t.apply(p)).collect(),
            frame: self.frame,
            label: self.label.clone(),
        }
    }

    /// Expresses the cloud in the given wall frame and retags it.
    pub fn to_wall_frame(&self, frame: &WallFrame<S>) -> Self {
        PointCloud {
            points: self.points.iter().map(|&p| frame.to_frame(p)).collect(),
            frame: FrameTag::WallLocal,
            label: self.label.clone(),
        }
    }
}

/// Plane fit over a point slice; shared by cloud-level and local
/// (normal-estimation) fits.
pub(crate) fn fit_plane_of<S: Real>(points: &[Point3<S>]) -> Result<Plane<S>> {
    if points.len() < 3 {
        return Err(Error::degenerate("plane fit needs at least 3 points"));
    }
    let inv_n = S::one() / cast::<S>(points.len() as f64);
    let mut cx = S::zero();
    let mut cy = S::zero();
    let mut cz = S::zero();
    for p in points {
        cx += p.x;
        cy += p.y;
        cz += p.z;
    }
    let centroid = Point3::new(cx * inv_n, cy * inv_n, cz * inv_n);

    let mut xx = S::zero();
    let mut xy = S::zero();
    let mut xz = S::zero();
    let mut yy = S::zero();
    let mut yz = S::zero();
    let mut zz = S::zero();
    for p in points {
        let dx = p.x - centroid.x;
        let dy = p.y - centroid.y;
        let dz = p.z - centroid.z;
        xx += dx * dx;
        xy += dx * dy;
        xz += dx * dz;
        yy += dy * dy;
        yz += dy * dz;
        zz += dz * dz;
    }
    let cov = Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz);
    let eig = cov.symmetric_eigen();

    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        to_f64(eig.eigenvalues[a]).partial_cmp(&to_f64(eig.eigenvalues[b])).unwrap()
    });
    let [lo, mid, hi] = order;
    let l_max = eig.eigenvalues[hi];
    // collinear (or all-identical) sets leave two near-zero eigenvalues
    if l_max <= S::zero() || eig.eigenvalues[mid] <= l_max * cast::<S>(1e-12) {
        return Err(Error::degenerate("plane fit is degenerate (collinear points)"));
    }

    let mut normal: Vector3<S> = eig.eigenvectors.column(lo).into_owned();
    // deterministic sign: largest-magnitude component positive
    let ax = Float::abs(normal.x);
    let ay = Float::abs(normal.y);
    let az = Float::abs(normal.z);
    let lead = if ax >= ay && ax >= az {
        normal.x
    } else if ay >= az {
        normal.y
    } else {
        normal.z
    };
    if lead < S::zero() {
        normal = -normal;
    }
    Plane::from_point_normal(centroid, normal)
}
