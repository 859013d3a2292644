//! 2.5D triangulated surface models.
//!
//! A cloud is projected onto a plane, the projections are Delaunay
//! triangulated, and the triangles are lifted back to the original 3D
//! points. The resulting mesh answers signed closest-point distances and
//! interpolated surface heights. Construction is single-threaded; a built
//! mesh is immutable and can be queried concurrently.
//!
//! Predicates run in exact arithmetic (adaptive, via the `robust` crate),
//! so co-circular and on-edge configurations from regular grids are
//! handled without perturbation.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geom::{Plane, Point3};
use crate::scalar::{cast, to_f64, Real};
use nalgebra::Vector3;
use robust::{incircle, orient2d, Coord};
use std::collections::HashMap;
use std::io::Write;

/// Ghost vertex sentinel used while triangulating; never in output.
const GHOST: i32 = -1;

/// Signed distance from a query point to a mesh surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedDistance<S> {
    /// Distance to the closest surface point; positive on the side the
    /// surface normals face (local +y), negative behind it.
    pub distance: S,
    /// False when the query projects outside the triangulated footprint.
    pub in_footprint: bool,
}

/// Triangulated irregular network lifted over a projection plane.
pub struct TinMesh<S> {
    vertices: Vec<Point3<S>>,
    triangles: Vec<[u32; 3]>,
    plane: Plane<S>,
    basis_u: Vector3<S>,
    basis_v: Vector3<S>,
    uv: Vec<[f64; 2]>,
    heights: Vec<S>,
    grid: LocateGrid,
    bvh: Bvh,
}

impl<S: Real> TinMesh<S> {
    /// Original (deduplicated) vertex coordinates.
    pub fn vertices(&self) -> &[Point3<S>] {
        &self.vertices
    }

    /// Vertex index triples, counter-clockwise in plane coordinates.
    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    /// The projection plane the triangulation was built over.
    pub fn plane(&self) -> &Plane<S> {
        &self.plane
    }

    /// In-plane coordinates of a 3D point.
    pub fn project_uv(&self, p: Point3<S>) -> (S, S) {
        let d = p - self.plane.point_on();
        (d.dot(&self.basis_u), d.dot(&self.basis_v))
    }

    /// 3D location of plane coordinates `(u, v)` lifted by `height`.
    pub fn unproject(&self, u: S, v: S, height: S) -> Point3<S> {
        self.plane.point_on()
            + self.basis_u * u
            + self.basis_v * v
            + self.plane.normal() * height
    }

    /// Out-of-plane coordinate of vertex `i` (signed offset from the
    /// projection plane).
    pub fn vertex_height(&self, i: u32) -> S {
        self.heights[i as usize]
    }

    /// Surface height above the projection plane at `(u, v)`, by
    /// barycentric interpolation; `None` outside the footprint.
    pub fn height_at(&self, u: S, v: S) -> Option<S> {
        let (tri, w) = self.locate(to_f64(u), to_f64(v))?;
        let [a, b, c] = self.triangles[tri as usize];
        let h = w[0] * to_f64(self.heights[a as usize])
            + w[1] * to_f64(self.heights[b as usize])
            + w[2] * to_f64(self.heights[c as usize]);
        Some(cast(h))
    }

    /// Signed Euclidean distance from `p` to the closest surface point;
    /// positive means `p` lies on the +y side of the surface.
    ///
    /// Inside the footprint the sign comes from the height difference
    /// between `p` and the surface, which stays stable when the closest
    /// point sits on a crease edge shared by opposing triangles. Outside
    /// it falls back to the closest triangle's oriented normal.
    pub fn signed_distance(&self, p: Point3<S>) -> SignedDistance<S> {
        let q = [to_f64(p.x), to_f64(p.y), to_f64(p.z)];
        let (tri, closest, d2) = self.bvh.closest(q, |t| self.tri_coords(t));
        let (u, v) = self.project_uv(p);
        let located = self.locate(to_f64(u), to_f64(v));
        let below = match located {
            Some((t, w)) => {
                let [a, b, c] = self.triangles[t as usize];
                let h = w[0] * to_f64(self.heights[a as usize])
                    + w[1] * to_f64(self.heights[b as usize])
                    + w[2] * to_f64(self.heights[c as usize]);
                let hp = to_f64(self.plane.signed_distance(p));
                (hp - h) * self.upward() < 0.0
            }
            None => {
                let n = self.oriented_normal(tri);
                let dvec = [q[0] - closest[0], q[1] - closest[1], q[2] - closest[2]];
                dvec[0] * n[0] + dvec[1] * n[1] + dvec[2] * n[2] < 0.0
            }
        };
        let dist = if below { -d2.sqrt() } else { d2.sqrt() };
        SignedDistance { distance: cast(dist), in_footprint: located.is_some() }
    }

    /// +1 when the projection-plane normal points toward +y (ties +z,
    /// then +x), else -1; pins the caller-facing sign convention
    /// independently of the fitted plane's arbitrary orientation.
    fn upward(&self) -> f64 {
        let n = self.plane.normal();
        let (ny, nz, nx) = (to_f64(n.y), to_f64(n.z), to_f64(n.x));
        let decisive = if ny != 0.0 { ny } else if nz != 0.0 { nz } else { nx };
        if decisive < 0.0 { -1.0 } else { 1.0 }
    }

    fn tri_coords(&self, t: u32) -> [[f64; 3]; 3] {
        let [a, b, c] = self.triangles[t as usize];
        let f = |i: u32| {
            let p = self.vertices[i as usize];
            [to_f64(p.x), to_f64(p.y), to_f64(p.z)]
        };
        [f(a), f(b), f(c)]
    }

    /// Unit normal of triangle `t` flipped toward +y (then +z, then +x).
    fn oriented_normal(&self, t: u32) -> [f64; 3] {
        let [a, b, c] = self.tri_coords(t);
        let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let ac = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let mut n = [
            ab[1] * ac[2] - ab[2] * ac[1],
            ab[2] * ac[0] - ab[0] * ac[2],
            ab[0] * ac[1] - ab[1] * ac[0],
        ];
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if len > 0.0 {
            n = [n[0] / len, n[1] / len, n[2] / len];
        }
        let flip = if n[1] != 0.0 {
            n[1] < 0.0
        } else if n[2] != 0.0 {
            n[2] < 0.0
        } else {
            n[0] < 0.0
        };
        if flip {
            [-n[0], -n[1], -n[2]]
        } else {
            n
        }
    }

    /// Containing triangle and barycentric weights for plane coordinates
    /// `(u, v)`; boundary points count as inside. On shared edges the
    /// lowest-index candidate wins, which is harmless because adjacent
    /// triangles interpolate identically along the edge.
    fn locate(&self, u: f64, v: f64) -> Option<(u32, [f64; 3])> {
        for &t in self.grid.candidates(u, v) {
            let [a, b, c] = self.triangles[t as usize];
            let pa = self.uv[a as usize];
            let pb = self.uv[b as usize];
            let pc = self.uv[c as usize];
            let p = Coord { x: u, y: v };
            let ca = Coord { x: pa[0], y: pa[1] };
            let cb = Coord { x: pb[0], y: pb[1] };
            let cc = Coord { x: pc[0], y: pc[1] };
            let w0 = orient2d(cb, cc, p);
            let w1 = orient2d(cc, ca, p);
            let w2 = orient2d(ca, cb, p);
            if w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0 {
                let sum = w0 + w1 + w2;
                return Some((t, [w0 / sum, w1 / sum, w2 / sum]));
            }
        }
        None
    }

    /// Writes the mesh as ASCII OBJ (`v`/`f` lines) for inspection.
    pub fn write_obj<W: Write>(&self, mut out: W) -> Result<()> {
        let write = |out: &mut W| -> std::io::Result<()> {
            for p in &self.vertices {
                writeln!(out, "v {} {} {}", to_f64(p.x), to_f64(p.y), to_f64(p.z))?;
            }
            for t in &self.triangles {
                writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
            }
            Ok(())
        };
        write(&mut out).map_err(|e| Error::io("<obj stream>", e))
    }
}

/// Signed distance from `p` to the surface of `mesh`.
pub fn point_to_mesh_distance<S: Real>(p: Point3<S>, mesh: &TinMesh<S>) -> SignedDistance<S> {
    mesh.signed_distance(p)
}

/// Delaunay-triangulates the cloud's projections onto `plane` and lifts
/// the triangles back to the original points.
///
/// Points with bitwise-identical projections are collapsed, keeping the
/// first occurrence. Fails if fewer than 3 distinct projections remain or
/// all projections are collinear.
pub fn delaunay_tin<S: Real>(cloud: &PointCloud<S>, plane: &Plane<S>) -> Result<TinMesh<S>> {
    let (basis_u, basis_v) = plane.basis();
    let origin = plane.point_on();

    // project, deduplicate keeping first
    let mut uv: Vec<[f64; 2]> = Vec::new();
    let mut vertices: Vec<Point3<S>> = Vec::new();
    let mut heights: Vec<S> = Vec::new();
    let mut seen: HashMap<(u64, u64), ()> = HashMap::new();
    for p in cloud.points() {
        let d = *p - origin;
        let u = to_f64(d.dot(&basis_u));
        let v = to_f64(d.dot(&basis_v));
        if seen.insert((u.to_bits(), v.to_bits()), ()).is_none() {
            uv.push([u, v]);
            vertices.push(*p);
            heights.push(plane.signed_distance(*p));
        }
    }
    if uv.len() < 3 {
        return Err(Error::degenerate(
            "triangulation needs at least 3 distinct projected points",
        ));
    }

    let triangles = triangulate(&uv)?;
    let grid = LocateGrid::build(&uv, &triangles);
    let bvh = Bvh::build(triangles.len() as u32, |t| {
        let [a, b, c] = triangles[t as usize];
        let f = |i: u32| {
            let p = vertices[i as usize];
            [to_f64(p.x), to_f64(p.y), to_f64(p.z)]
        };
        [f(a), f(b), f(c)]
    });

    Ok(TinMesh {
        vertices,
        triangles,
        plane: *plane,
        basis_u,
        basis_v,
        uv,
        heights,
        grid,
        bvh,
    })
}

// ---------------------------------------------------------------------
// Bowyer-Watson triangulation with ghost triangles
// ---------------------------------------------------------------------

struct Triangulator<'a> {
    uv: &'a [[f64; 2]],
    verts: Vec<[i32; 3]>,
    adj: Vec<[u32; 3]>,
    alive: Vec<bool>,
    free: Vec<u32>,
    stamp: Vec<u32>,
    epoch: u32,
    last_real: u32,
    rng: u64,
    // reusable insertion buffers
    cavity: Vec<u32>,
    boundary: Vec<(i32, i32, u32, u8)>,
    pending: Vec<(i32, i32, u32, u8)>,
}

/// Delaunay triangulation of distinct 2D points; triples are CCW.
fn triangulate(uv: &[[f64; 2]]) -> Result<Vec<[u32; 3]>> {
    let order = morton_order_2d(uv);

    // seed triangle: first two points plus the first non-collinear one
    let (i0, i1) = (order[0], order[1]);
    let mut seed2 = None;
    for (pos, &k) in order.iter().enumerate().skip(2) {
        if orient(uv, i0 as i32, i1 as i32, uv[k as usize]) != 0.0 {
            seed2 = Some((pos, k));
            break;
        }
    }
    let Some((seed_pos, i2)) = seed2 else {
        return Err(Error::degenerate("all projected points are collinear"));
    };

    let mut t = Triangulator {
        uv,
        verts: Vec::with_capacity(uv.len() * 2 + 8),
        adj: Vec::with_capacity(uv.len() * 2 + 8),
        alive: Vec::with_capacity(uv.len() * 2 + 8),
        free: Vec::new(),
        stamp: Vec::with_capacity(uv.len() * 2 + 8),
        epoch: 0,
        last_real: 0,
        rng: 0x9e3779b97f4a7c15,
        cavity: Vec::new(),
        boundary: Vec::new(),
        pending: Vec::new(),
    };
    t.seed(i0 as i32, i1 as i32, i2 as i32);
    for (pos, &k) in order.iter().enumerate() {
        if pos == 0 || pos == 1 || pos == seed_pos {
            continue;
        }
        t.insert(k as i32)?;
    }

    let mut out = Vec::new();
    for (i, v) in t.verts.iter().enumerate() {
        if t.alive[i] && v[2] != GHOST {
            out.push([v[0] as u32, v[1] as u32, v[2] as u32]);
        }
    }
    Ok(out)
}

#[inline]
fn coord(uv: &[[f64; 2]], i: i32) -> Coord<f64> {
    let p = uv[i as usize];
    Coord { x: p[0], y: p[1] }
}

#[inline]
fn orient(uv: &[[f64; 2]], a: i32, b: i32, p: [f64; 2]) -> f64 {
    orient2d(coord(uv, a), coord(uv, b), Coord { x: p[0], y: p[1] })
}

impl<'a> Triangulator<'a> {
    fn alloc(&mut self, v: [i32; 3]) -> u32 {
        if let Some(slot) = self.free.pop() {
            self.verts[slot as usize] = v;
            self.adj[slot as usize] = [u32::MAX; 3];
            self.alive[slot as usize] = true;
            slot
        } else {
            self.verts.push(v);
            self.adj.push([u32::MAX; 3]);
            self.alive.push(true);
            self.stamp.push(0);
            (self.verts.len() - 1) as u32
        }
    }

    fn seed(&mut self, a: i32, b: i32, c: i32) {
        let (b, c) = if orient(self.uv, a, b, self.uv[c as usize]) > 0.0 {
            (b, c)
        } else {
            (c, b)
        };
        let t0 = self.alloc([a, b, c]);
        let g0 = self.alloc([b, a, GHOST]);
        let g1 = self.alloc([c, b, GHOST]);
        let g2 = self.alloc([a, c, GHOST]);
        self.link_group(&[t0, g0, g1, g2]);
        self.last_real = t0;
    }

    /// Mates every directed edge among `tris` (used only for the seed).
    fn link_group(&mut self, tris: &[u32]) {
        let mut open: Vec<(i32, i32, u32, u8)> = Vec::new();
        for &t in tris {
            let v = self.verts[t as usize];
            for k in 0..3u8 {
                let e = (v[(k as usize + 1) % 3], v[(k as usize + 2) % 3]);
                if let Some(pos) = open.iter().position(|&(a, b, _, _)| (a, b) == (e.1, e.0)) {
                    let (_, _, ot, ok) = open.swap_remove(pos);
                    self.adj[t as usize][k as usize] = ot;
                    self.adj[ot as usize][ok as usize] = t;
                } else {
                    open.push((e.0, e.1, t, k));
                }
            }
        }
        debug_assert!(open.is_empty());
    }

    /// True when point `k` falls inside the circumscribed region of
    /// triangle `t`: the open circumdisk for real triangles, the open
    /// outer half-plane (or the open hull edge itself) for ghosts.
    fn in_circum(&self, t: u32, k: i32) -> bool {
        let v = self.verts[t as usize];
        let p = self.uv[k as usize];
        if v[2] == GHOST {
            let s = orient(self.uv, v[0], v[1], p);
            if s > 0.0 {
                return true;
            }
            if s < 0.0 {
                return false;
            }
            // collinear: inside the open segment of the hull edge
            let a = self.uv[v[0] as usize];
            let b = self.uv[v[1] as usize];
            let (lo, hi, x) = if (b[0] - a[0]).abs() >= (b[1] - a[1]).abs() {
                (a[0], b[0], p[0])
            } else {
                (a[1], b[1], p[1])
            };
            (x > lo.min(hi)) && (x < lo.max(hi))
        } else {
            incircle(
                coord(self.uv, v[0]),
                coord(self.uv, v[1]),
                coord(self.uv, v[2]),
                Coord { x: p[0], y: p[1] },
            ) > 0.0
        }
    }

    /// Finds any triangle whose circumscribed region contains point `k`,
    /// walking from the last insertion, with a linear scan fallback.
    fn locate(&mut self, k: i32) -> Result<u32> {
        let p = self.uv[k as usize];
        let mut t = self.last_real;
        if !self.alive[t as usize] || self.verts[t as usize][2] == GHOST {
            t = match (0..self.verts.len())
                .find(|&i| self.alive[i] && self.verts[i][2] != GHOST)
            {
                Some(i) => i as u32,
                None => return Err(Error::degenerate("triangulation lost all triangles")),
            };
        }
        let max_steps = 4 * self.verts.len() + 16;
        for _ in 0..max_steps {
            let v = self.verts[t as usize];
            // rotate the starting edge pseudo-randomly to avoid cycles
            self.rng = self.rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let start = (self.rng >> 33) as usize % 3;
            let mut moved = false;
            for i in 0..3 {
                let k_edge = (start + i) % 3;
                let a = v[(k_edge + 1) % 3];
                let b = v[(k_edge + 2) % 3];
                if orient(self.uv, a, b, p) < 0.0 {
                    let next = self.adj[t as usize][k_edge];
                    if self.verts[next as usize][2] == GHOST {
                        // crossing the hull: the ghost's half-plane test
                        // succeeds by construction
                        return Ok(next);
                    }
                    t = next;
                    moved = true;
                    break;
                }
            }
            if !moved {
                return Ok(t);
            }
        }
        // degenerate walk: fall back to scanning every live triangle
        for i in 0..self.verts.len() {
            if self.alive[i] && self.in_circum(i as u32, k) {
                return Ok(i as u32);
            }
        }
        Err(Error::degenerate("point location failed; duplicate projected point?"))
    }

    fn insert(&mut self, k: i32) -> Result<()> {
        let seed = self.locate(k)?;
        debug_assert!(self.in_circum(seed, k));

        // grow the cavity of triangles whose circumscribed region holds k;
        // each boundary record keeps the outer triangle's slot facing the
        // cavity, captured before any slot is freed and reused
        self.epoch += 1;
        self.cavity.clear();
        self.boundary.clear();
        self.cavity.push(seed);
        self.stamp[seed as usize] = self.epoch;
        let mut head = 0;
        while head < self.cavity.len() {
            let t = self.cavity[head];
            head += 1;
            let v = self.verts[t as usize];
            for slot in 0..3 {
                let n = self.adj[t as usize][slot];
                if self.stamp[n as usize] == self.epoch {
                    continue;
                }
                if self.in_circum(n, k) {
                    self.stamp[n as usize] = self.epoch;
                    self.cavity.push(n);
                } else {
                    let a = v[(slot + 1) % 3];
                    let b = v[(slot + 2) % 3];
                    let back = (0..3)
                        .find(|&s| self.adj[n as usize][s] == t)
                        .expect("adjacency is mutual");
                    self.boundary.push((a, b, n, back as u8));
                }
            }
        }
        for i in 0..self.cavity.len() {
            let t = self.cavity[i];
            self.alive[t as usize] = false;
            self.free.push(t);
        }

        // retriangulate the cavity as a fan around k
        self.pending.clear();
        let boundary = std::mem::take(&mut self.boundary);
        for &(u, w, outer, back) in &boundary {
            // cyclic rotation keeps orientation while pinning GHOST last
            let (tri, p_slot): ([i32; 3], u8) = if u == GHOST {
                ([w, k, GHOST], 1)
            } else if w == GHOST {
                ([k, u, GHOST], 0)
            } else {
                ([u, w, k], 2)
            };
            let nt = self.alloc(tri);
            // outer neighbour link across the boundary edge
            self.adj[nt as usize][p_slot as usize] = outer;
            self.adj[outer as usize][back as usize] = nt;

            // mate the two fan edges with siblings as they appear
            for slot in 0..3u8 {
                if slot == p_slot {
                    continue;
                }
                let a = tri[(slot as usize + 1) % 3];
                let b = tri[(slot as usize + 2) % 3];
                if let Some(pos) =
                    self.pending.iter().position(|&(x, y, _, _)| (x, y) == (b, a))
                {
                    let (_, _, ot, os) = self.pending.swap_remove(pos);
                    self.adj[nt as usize][slot as usize] = ot;
                    self.adj[ot as usize][os as usize] = nt;
                } else {
                    self.pending.push((a, b, nt, slot));
                }
            }
            if tri[2] != GHOST {
                self.last_real = nt;
            }
        }
        self.boundary = boundary;
        if !self.pending.is_empty() {
            return Err(Error::degenerate("triangulation cavity was not closed"));
        }
        Ok(())
    }
}

/// Indices sorted along a 2D Morton curve for insertion locality.
fn morton_order_2d(uv: &[[f64; 2]]) -> Vec<u32> {
    let (mut mnx, mut mny) = (f64::INFINITY, f64::INFINITY);
    let (mut mxx, mut mxy) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in uv {
        mnx = mnx.min(p[0]);
        mny = mny.min(p[1]);
        mxx = mxx.max(p[0]);
        mxy = mxy.max(p[1]);
    }
    let ex = (mxx - mnx).max(f64::MIN_POSITIVE);
    let ey = (mxy - mny).max(f64::MIN_POSITIVE);
    let scale = |t: f64| -> u64 {
        let q = (t * (u32::MAX as f64)).round();
        (q.max(0.0) as u64).min(u32::MAX as u64)
    };
    let mut keyed: Vec<(u64, u32)> = uv
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let qx = scale((p[0] - mnx) / ex);
            let qy = scale((p[1] - mny) / ey);
            (interleave2(qx) | interleave2(qy) << 1, i as u32)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Spreads the low 32 bits of `v` with one zero bit between each.
#[inline]
fn interleave2(mut v: u64) -> u64 {
    v &= 0xffff_ffff;
    v = (v | v << 16) & 0x0000_ffff_0000_ffff;
    v = (v | v << 8) & 0x00ff_00ff_00ff_00ff;
    v = (v | v << 4) & 0x0f0f_0f0f_0f0f_0f0f;
    v = (v | v << 2) & 0x3333_3333_3333_3333;
    v = (v | v << 1) & 0x5555_5555_5555_5555;
    v
}

// ---------------------------------------------------------------------
// Uniform grid over (u, v) for point location
// ---------------------------------------------------------------------

struct LocateGrid {
    min: [f64; 2],
    inv_cell: [f64; 2],
    dims: [u32; 2],
    offsets: Vec<u32>,
    items: Vec<u32>,
}

impl LocateGrid {
    fn build(uv: &[[f64; 2]], triangles: &[[u32; 3]]) -> LocateGrid {
        let (mut mn, mut mx) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in uv {
            for k in 0..2 {
                mn[k] = mn[k].min(p[k]);
                mx[k] = mx[k].max(p[k]);
            }
        }
        let ext = [(mx[0] - mn[0]).max(1e-300), (mx[1] - mn[1]).max(1e-300)];
        let target = (triangles.len().max(1) as f64).min(4.0e6);
        let aspect = ext[0] / ext[1];
        let nx = ((target * aspect).sqrt().round() as u32).max(1);
        let ny = ((target / aspect).sqrt().round() as u32).max(1);
        let dims = [nx, ny];
        let inv_cell = [dims[0] as f64 / ext[0], dims[1] as f64 / ext[1]];

        let cell_of = |x: f64, k: usize| -> u32 {
            let c = ((x - mn[k]) * inv_cell[k]).floor();
            (c.max(0.0) as u32).min(dims[k] - 1)
        };
        let ncells = dims[0] as usize * dims[1] as usize;
        let mut counts = vec![0u32; ncells + 1];
        let span = |t: &[u32; 3]| {
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for &i in t {
                for k in 0..2 {
                    lo[k] = lo[k].min(uv[i as usize][k]);
                    hi[k] = hi[k].max(uv[i as usize][k]);
                }
            }
            (
                cell_of(lo[0], 0),
                cell_of(hi[0], 0),
                cell_of(lo[1], 1),
                cell_of(hi[1], 1),
            )
        };
        for t in triangles {
            let (x0, x1, y0, y1) = span(t);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    counts[(y as usize * dims[0] as usize + x as usize) + 1] += 1;
                }
            }
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let offsets = counts;
        let mut items = vec![0u32; *offsets.last().unwrap() as usize];
        let mut cursor = offsets.clone();
        // triangles fill in index order, so candidate lists stay sorted
        for (ti, t) in triangles.iter().enumerate() {
            let (x0, x1, y0, y1) = span(t);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let c = y as usize * dims[0] as usize + x as usize;
                    items[cursor[c] as usize] = ti as u32;
                    cursor[c] += 1;
                }
            }
        }
        LocateGrid { min: mn, inv_cell, dims, offsets, items }
    }

    fn candidates(&self, u: f64, v: f64) -> &[u32] {
        if !u.is_finite() || !v.is_finite() {
            return &[];
        }
        // clamp into range: membership is decided by exact predicates, so
        // border cells safely serve bbox-edge and outside queries
        let cx = (((u - self.min[0]) * self.inv_cell[0]).floor().max(0.0) as u64)
            .min(self.dims[0] as u64 - 1) as usize;
        let cy = (((v - self.min[1]) * self.inv_cell[1]).floor().max(0.0) as u64)
            .min(self.dims[1] as u64 - 1) as usize;
        let c = cy * self.dims[0] as usize + cx;
        &self.items[self.offsets[c] as usize..self.offsets[c + 1] as usize]
    }
}

// ---------------------------------------------------------------------
// Bounding-volume hierarchy over triangles for closest-point queries
// ---------------------------------------------------------------------

struct BvhNode {
    min: [f64; 3],
    max: [f64; 3],
    // leaf when count > 0: [start, start+count) into tri_order;
    // otherwise left/right are child node indices
    left: u32,
    right: u32,
    start: u32,
    count: u32,
}

struct Bvh {
    nodes: Vec<BvhNode>,
    tri_order: Vec<u32>,
}

const BVH_LEAF: u32 = 8;

impl Bvh {
    fn build(ntris: u32, tri: impl Fn(u32) -> [[f64; 3]; 3]) -> Bvh {
        let mut order: Vec<u32> = (0..ntris).collect();
        let boxes: Vec<([f64; 3], [f64; 3], [f64; 3])> = (0..ntris)
            .map(|t| {
                let [a, b, c] = tri(t);
                let mut mn = a;
                let mut mx = a;
                for p in [b, c] {
                    for k in 0..3 {
                        mn[k] = mn[k].min(p[k]);
                        mx[k] = mx[k].max(p[k]);
                    }
                }
                let cen = [
                    (mn[0] + mx[0]) * 0.5,
                    (mn[1] + mx[1]) * 0.5,
                    (mn[2] + mx[2]) * 0.5,
                ];
                (mn, mx, cen)
            })
            .collect();
        let mut bvh = Bvh { nodes: Vec::new(), tri_order: Vec::new() };
        if ntris > 0 {
            bvh.build_range(&boxes, &mut order, 0);
        }
        bvh.tri_order = order;
        bvh
    }

    fn build_range(
        &mut self,
        boxes: &[([f64; 3], [f64; 3], [f64; 3])],
        order: &mut [u32],
        base: u32,
    ) -> u32 {
        let mut mn = [f64::INFINITY; 3];
        let mut mx = [f64::NEG_INFINITY; 3];
        for &t in order.iter() {
            for k in 0..3 {
                mn[k] = mn[k].min(boxes[t as usize].0[k]);
                mx[k] = mx[k].max(boxes[t as usize].1[k]);
            }
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(BvhNode { min: mn, max: mx, left: 0, right: 0, start: 0, count: 0 });
        if order.len() as u32 <= BVH_LEAF {
            self.nodes[id as usize].start = base;
            self.nodes[id as usize].count = order.len() as u32;
            return id;
        }
        let mut axis = 0;
        let mut widest = f64::NEG_INFINITY;
        for k in 0..3 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &t in order.iter() {
                lo = lo.min(boxes[t as usize].2[k]);
                hi = hi.max(boxes[t as usize].2[k]);
            }
            if hi - lo > widest {
                widest = hi - lo;
                axis = k;
            }
        }
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            boxes[a as usize].2[axis]
                .partial_cmp(&boxes[b as usize].2[axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        let (lo, hi) = order.split_at_mut(mid);
        let l = self.build_range(boxes, lo, base);
        let r = self.build_range(boxes, hi, base + mid as u32);
        self.nodes[id as usize].left = l;
        self.nodes[id as usize].right = r;
        id
    }

    #[inline]
    fn box_dist2(node: &BvhNode, q: [f64; 3]) -> f64 {
        let mut d = 0.0;
        for ((&qk, &lo), &hi) in q.iter().zip(&node.min).zip(&node.max) {
            let dk = qk - qk.clamp(lo, hi);
            d += dk * dk;
        }
        d
    }

    /// Closest triangle to `q`: (triangle id, closest point, distance^2).
    /// Distance ties resolve to the smallest triangle id.
    fn closest(&self, q: [f64; 3], tri: impl Fn(u32) -> [[f64; 3]; 3]) -> (u32, [f64; 3], f64) {
        let mut best = (u32::MAX, [0.0; 3], f64::INFINITY);
        let mut stack: Vec<u32> = vec![0];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if Self::box_dist2(node, q) > best.2 {
                continue;
            }
            if node.count > 0 {
                for &t in &self.tri_order[node.start as usize..(node.start + node.count) as usize]
                {
                    let [a, b, c] = tri(t);
                    let cp = closest_point_on_triangle(q, a, b, c);
                    let d2 = dist2_3(q, cp);
                    if d2 < best.2 || (d2 == best.2 && t < best.0) {
                        best = (t, cp, d2);
                    }
                }
            } else {
                // visit the nearer child first so pruning bites sooner
                let dl = Self::box_dist2(&self.nodes[node.left as usize], q);
                let dr = Self::box_dist2(&self.nodes[node.right as usize], q);
                if dl <= dr {
                    stack.push(node.right);
                    stack.push(node.left);
                } else {
                    stack.push(node.left);
                    stack.push(node.right);
                }
            }
        }
        best
    }
}

#[inline]
fn dist2_3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

#[inline]
fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Closest point to `p` on triangle `abc` (Voronoi-region walk).
fn closest_point_on_triangle(p: [f64; 3], a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> [f64; 3] {
    let ab = sub3(b, a);
    let ac = sub3(c, a);
    let ap = sub3(p, a);
    let d1 = dot3(ab, ap);
    let d2 = dot3(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub3(p, b);
    let d3 = dot3(ab, bp);
    let d4 = dot3(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return [a[0] + ab[0] * t, a[1] + ab[1] * t, a[2] + ab[2] * t];
    }
    let cp = sub3(p, c);
    let d5 = dot3(ab, cp);
    let d6 = dot3(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return [a[0] + ac[0] * t, a[1] + ac[1] * t, a[2] + ac[2] * t];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [
            b[0] + (c[0] - b[0]) * t,
            b[1] + (c[1] - b[1]) * t,
            b[2] + (c[2] - b[2]) * t,
        ];
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [
        a[0] + ab[0] * v + ac[0] * w,
        a[1] + ab[1] * v + ac[1] * w,
        a[2] + ab[2] * v + ac[2] * w,
    ]
}
