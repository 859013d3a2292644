//! Geometric primitives: points, boxes, planes, rigid motions, and the
//! wall-local coordinate frame.
//!
//! Conventions used across the crate:
//! * lengths are metres;
//! * the wall frame has z vertical up, y perpendicular to the wall with
//!   negative y pointing into the excavation pit, x along the wall;
//! * a plane is `n . p = offset` with `n` unit length.

use crate::error::{Error, Result};
use crate::scalar::{cast, Real};
use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use num_traits::Float;

/// A 3D point. Plain fields keep hot loops free of wrapper noise.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Real> Point3<S> {
    #[inline]
    pub fn new(x: S, y: S, z: S) -> Self {
        Point3 { x, y, z }
    }

    #[inline]
    pub fn origin() -> Self {
        Point3 { x: S::zero(), y: S::zero(), z: S::zero() }
    }

    #[inline]
    pub fn coords(self) -> Vector3<S> {
        Vector3::new(self.x, self.y, self.z)
    }

    #[inline]
    pub fn from_coords(v: Vector3<S>) -> Self {
        Point3 { x: v.x, y: v.y, z: v.z }
    }

    #[inline]
    pub fn distance(self, other: Self) -> S {
        Float::sqrt(self.distance_squared(other))
    }

    #[inline]
    pub fn distance_squared(self, other: Self) -> S {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        Float::is_finite(self.x) && Float::is_finite(self.y) && Float::is_finite(self.z)
    }
}

impl<S: Real> std::ops::Sub for Point3<S> {
    type Output = Vector3<S>;
    #[inline]
    fn sub(self, rhs: Self) -> Vector3<S> {
        Vector3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<S: Real> std::ops::Add<Vector3<S>> for Point3<S> {
    type Output = Point3<S>;
    #[inline]
    fn add(self, rhs: Vector3<S>) -> Point3<S> {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<S: Real> std::ops::Sub<Vector3<S>> for Point3<S> {
    type Output = Point3<S>;
    #[inline]
    fn sub(self, rhs: Vector3<S>) -> Point3<S> {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

/// Axis-aligned bounding box; `min <= max` componentwise by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox<S> {
    pub min: Point3<S>,
    pub max: Point3<S>,
}

impl<S: Real> BoundingBox<S> {
    /// Smallest box containing all points; `None` on an empty iterator.
    pub fn from_points<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a Point3<S>>,
        S: 'a,
    {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut min = first;
        let mut max = first;
        for p in it {
            min.x = Float::min(min.x, p.x);
            min.y = Float::min(min.y, p.y);
            min.z = Float::min(min.z, p.z);
            max.x = Float::max(max.x, p.x);
            max.y = Float::max(max.y, p.y);
            max.z = Float::max(max.z, p.z);
        }
        Some(BoundingBox { min, max })
    }

    /// Extents per axis (L_x, L_y, L_z).
    #[inline]
    pub fn extent(&self) -> Vector3<S> {
        self.max - self.min
    }

    /// Inclusive containment test.
    #[inline]
    pub fn contains(&self, p: Point3<S>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    #[inline]
    pub fn center(&self) -> Point3<S> {
        let half = cast::<S>(0.5);
        Point3::new(
            (self.min.x + self.max.x) * half,
            (self.min.y + self.max.y) * half,
            (self.min.z + self.max.z) * half,
        )
    }

    #[inline]
    pub fn diagonal(&self) -> S {
        self.min.distance(self.max)
    }
}

/// Rotation + translation, `p -> R p + t`. `R` is orthonormal with
/// determinant +1 (checked on construction within 1e-9).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform<S> {
    rotation: Matrix3<S>,
    translation: Vector3<S>,
}

impl<S: Real> RigidTransform<S> {
    pub fn identity() -> Self {
        RigidTransform { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Validates orthonormality and determinant before accepting the parts.
    pub fn from_parts(rotation: Matrix3<S>, translation: Vector3<S>) -> Result<Self> {
        let tol = cast::<S>(1e-9);
        let gram = rotation.transpose() * rotation;
        let dev = (gram - Matrix3::identity()).norm();
        if dev > tol {
            return Err(Error::param(format!(
                "rotation is not orthonormal (deviation {})",
                crate::scalar::to_f64(dev)
            )));
        }
        let det = rotation.determinant();
        if Float::abs(det - S::one()) > tol {
            return Err(Error::param(format!(
                "rotation determinant {} is not +1",
                crate::scalar::to_f64(det)
            )));
        }
        Ok(RigidTransform { rotation, translation })
    }

    /// Rotation about a (non-zero) axis followed by a translation.
    pub fn rotation_about(axis: Vector3<S>, angle: S, translation: Vector3<S>) -> Result<Self> {
        let axis = Unit::try_new(axis, cast::<S>(1e-12))
            .ok_or_else(|| Error::param("rotation axis must be non-zero".to_string()))?;
        let rot = Rotation3::from_axis_angle(&axis, angle);
        Ok(RigidTransform { rotation: rot.into_inner(), translation })
    }

    pub fn translation_of(translation: Vector3<S>) -> Self {
        RigidTransform { rotation: Matrix3::identity(), translation }
    }

    #[inline]
    pub fn rotation(&self) -> &Matrix3<S> {
        &self.rotation
    }

    #[inline]
    pub fn translation(&self) -> Vector3<S> {
        self.translation
    }

    #[inline]
    pub fn apply(&self, p: Point3<S>) -> Point3<S> {
        Point3::from_coords(self.rotation * p.coords() + self.translation)
    }

    #[inline]
    pub fn apply_vector(&self, v: Vector3<S>) -> Vector3<S> {
        self.rotation * v
    }

    /// `self` after `inner`: `(self ∘ inner)(p) = self(inner(p))`.
    pub fn compose(&self, inner: &Self) -> Self {
        RigidTransform {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -(rt * self.translation) }
    }

    /// Rotation angle in radians, from the trace.
    pub fn rotation_angle(&self) -> S {
        let t = self.rotation.trace();
        let c = (t - S::one()) * cast::<S>(0.5);
        Float::acos(Float::min(Float::max(c, -S::one()), S::one()))
    }
}

/// Plane `n . p = offset` with unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane<S> {
    normal: Vector3<S>,
    offset: S,
}

impl<S: Real> Plane<S> {
    /// Normalizes the given normal; rejects near-zero vectors.
    pub fn new(normal: Vector3<S>, offset: S) -> Result<Self> {
        let n = normal.norm();
        if n < cast::<S>(1e-12) {
            return Err(Error::degenerate("plane normal must be non-zero"));
        }
        Ok(Plane { normal: normal / n, offset: offset / n })
    }

    pub fn from_point_normal(p: Point3<S>, normal: Vector3<S>) -> Result<Self> {
        let n = normal.norm();
        if n < cast::<S>(1e-12) {
            return Err(Error::degenerate("plane normal must be non-zero"));
        }
        let unit = normal / n;
        Ok(Plane { normal: unit, offset: unit.dot(&p.coords()) })
    }

    #[inline]
    pub fn normal(&self) -> Vector3<S> {
        self.normal
    }

    #[inline]
    pub fn offset(&self) -> S {
        self.offset
    }

    /// Signed distance of `p`; positive on the normal side.
    #[inline]
    pub fn signed_distance(&self, p: Point3<S>) -> S {
        self.normal.dot(&p.coords()) - self.offset
    }

    /// Orthogonal projection of `p` onto the plane.
    pub fn project(&self, p: Point3<S>) -> Point3<S> {
        p - self.normal * self.signed_distance(p)
    }

    /// A point on the plane (foot of the origin).
    pub fn point_on(&self) -> Point3<S> {
        Point3::from_coords(self.normal * self.offset)
    }

    /// Flips the normal if needed so `n . dir >= 0`.
    pub fn oriented_toward(mut self, dir: Vector3<S>) -> Self {
        if self.normal.dot(&dir) < S::zero() {
            self.normal = -self.normal;
            self.offset = -self.offset;
        }
        self
    }

    /// Deterministic in-plane orthonormal axes `(u, v)` with `u x v = n`.
    pub fn basis(&self) -> (Vector3<S>, Vector3<S>) {
        let n = self.normal;
        // helper axis least aligned with the normal, ties toward x
        let ax = Float::abs(n.x);
        let ay = Float::abs(n.y);
        let az = Float::abs(n.z);
        let h = if ax <= ay && ax <= az {
            Vector3::x()
        } else if ay <= az {
            Vector3::y()
        } else {
            Vector3::z()
        };
        let u = h.cross(&n).normalize();
        let v = n.cross(&u);
        (u, v)
    }
}

/// Wall-local frame: orthonormal right-handed triad with z equal to global
/// up, y the outward wall normal (negative y faces the excavation pit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallFrame<S> {
    origin: Point3<S>,
    x_axis: Vector3<S>,
    y_axis: Vector3<S>,
    z_axis: Vector3<S>,
}

impl<S: Real> WallFrame<S> {
    /// Frame at `origin` whose y axis is the horizontal component of
    /// `outward` (the wall normal pointing away from the pit).
    pub fn new(origin: Point3<S>, outward: Vector3<S>) -> Result<Self> {
        let z = Vector3::z();
        let mut y = outward - z * outward.dot(&z);
        let n = y.norm();
        if n < cast::<S>(1e-9) {
            return Err(Error::degenerate(
                "wall outward direction is vertical; no horizontal normal",
            ));
        }
        y /= n;
        let x = y.cross(&z);
        Ok(WallFrame { origin, x_axis: x, y_axis: y, z_axis: z })
    }

    /// Global frame (axes aligned, origin at zero).
    pub fn global() -> Self {
        WallFrame {
            origin: Point3::origin(),
            x_axis: Vector3::x(),
            y_axis: Vector3::y(),
            z_axis: Vector3::z(),
        }
    }

    pub fn origin(&self) -> Point3<S> {
        self.origin
    }

    pub fn axes(&self) -> (Vector3<S>, Vector3<S>, Vector3<S>) {
        (self.x_axis, self.y_axis, self.z_axis)
    }

    /// Express a global point in frame coordinates.
    #[inline]
    pub fn to_frame(&self, p: Point3<S>) -> Point3<S> {
        let d = p - self.origin;
        Point3::new(d.dot(&self.x_axis), d.dot(&self.y_axis), d.dot(&self.z_axis))
    }

    /// Map frame coordinates back to a global point.
    #[inline]
    pub fn from_frame(&self, p: Point3<S>) -> Point3<S> {
        self.origin + (self.x_axis * p.x + self.y_axis * p.y + self.z_axis * p.z)
    }

    /// The global-to-frame motion as a rigid transform.
    pub fn as_transform(&self) -> RigidTransform<S> {
        let rotation = Matrix3::from_rows(&[
            self.x_axis.transpose(),
            self.y_axis.transpose(),
            self.z_axis.transpose(),
        ]);
        let translation = -(rotation * self.origin.coords());
        RigidTransform { rotation, translation }
    }
}
