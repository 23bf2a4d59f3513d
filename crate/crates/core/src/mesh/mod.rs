//! Triangle meshes: OBJ loading, nearest surface points with inward
//! normals, signed distance and area-weighted surface sampling.

mod bvh;
pub mod obj;
pub mod primitives;

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{GwsError, Result, Vec3};
use bvh::{Aabb, Bvh};

/// Triangles with area below this fraction of the squared bounding
/// diagonal are dropped at load.
const DEGENERATE_AREA: f64 = 1e-14;

/// A point on the mesh surface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub position: Vec3,
    /// Unit normal pointing into the object (negated facet or pseudo-normal).
    pub inward_normal: Vec3,
    pub triangle: u32,
    pub bary: [f64; 3],
}

/// Closest feature of a triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Feature {
    Face,
    /// Edge from local vertex `k` to `k + 1`.
    Edge(usize),
    Vertex(usize),
}

/// Indexed triangle mesh, immutable after construction.
#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    face_normals: Vec<Vec3>,
    areas: Vec<f64>,
    /// Neighbouring triangle across each edge; `None` on boundary or
    /// non-manifold edges.
    adjacency: Vec<[Option<u32>; 3]>,
    vertex_normals: Vec<Vec3>,
    edge_normals: HashMap<(u32, u32), Vec3>,
    bvh: Bvh,
    bounds: (Vec3, Vec3),
    watertight: bool,
    dropped: usize,
    warnings: Vec<String>,
}

fn edge_key(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

fn corner_angle(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let (u, v) = (a - p, b - p);
    u.cross(&v).norm().atan2(u.dot(&v))
}

/// Closest point on triangle `(a, b, c)` to `p` with barycentric
/// coordinates and the feature it lies on.
fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, [f64; 3], Feature) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0], Feature::Vertex(0));
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0], Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0], Feature::Edge(0));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0], Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w], Feature::Edge(2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w], Feature::Edge(1));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w], Feature::Face)
}

impl TriMesh {
    /// Builds a mesh from raw vertices and triangles: welds exactly
    /// coincident vertices, drops degenerate triangles, checks manifoldness
    /// and orients a closed mesh outward.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(t) = triangles
            .iter()
            .find(|t| t.iter().any(|&i| i as usize >= vertices.len()))
        {
            return Err(GwsError::invalid(format!(
                "triangle {t:?} references a vertex beyond {}",
                vertices.len()
            )));
        }
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(GwsError::invalid(format!("non-finite vertex {v:?}")));
        }
        let mut warnings = Vec::new();

        let mut remap = Vec::with_capacity(vertices.len());
        let mut welded: Vec<Vec3> = Vec::new();
        let mut seen: HashMap<[u64; 3], u32> = HashMap::new();
        for v in &vertices {
            let key = [
                (v.x + 0.0).to_bits(),
                (v.y + 0.0).to_bits(),
                (v.z + 0.0).to_bits(),
            ];
            let id = *seen.entry(key).or_insert_with(|| {
                welded.push(*v);
                welded.len() as u32 - 1
            });
            remap.push(id);
        }
        let vertices = welded;

        let mut bounds = Aabb::empty();
        for v in &vertices {
            bounds.grow(v);
        }
        let diag2 = (bounds.max - bounds.min).norm_squared();

        let mut tris = Vec::with_capacity(triangles.len());
        let mut dropped = 0;
        for t in &triangles {
            let t = [
                remap[t[0] as usize],
                remap[t[1] as usize],
                remap[t[2] as usize],
            ];
            let [a, b, c] = t.map(|i| vertices[i as usize]);
            let area = 0.5 * (b - a).cross(&(c - a)).norm();
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] || area <= DEGENERATE_AREA * diag2 {
                dropped += 1;
            } else {
                tris.push(t);
            }
        }
        if dropped > 0 {
            warnings.push(format!("dropped {dropped} degenerate triangles"));
        }
        if tris.is_empty() {
            return Err(GwsError::invalid("mesh has no non-degenerate triangles"));
        }

        let mut directed: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for (ti, t) in tris.iter().enumerate() {
            for k in 0..3 {
                directed
                    .entry((t[k], t[(k + 1) % 3]))
                    .or_default()
                    .push(ti as u32);
            }
        }
        let watertight = directed.iter().all(|(&(a, b), faces)| {
            faces.len() == 1 && directed.get(&(b, a)).is_some_and(|o| o.len() == 1)
        });
        if !watertight {
            warnings.push(
                "mesh is not a closed consistently wound manifold; signed distance is unsigned"
                    .into(),
            );
        } else {
            let volume: f64 = tris
                .iter()
                .map(|t| {
                    let [a, b, c] = t.map(|i| vertices[i as usize]);
                    a.dot(&b.cross(&c))
                })
                .sum();
            if volume < 0.0 {
                for t in &mut tris {
                    t.swap(1, 2);
                }
                directed = directed
                    .into_iter()
                    .map(|((a, b), f)| ((b, a), f))
                    .collect();
                warnings.push("mesh was wound inward; flipped".into());
            }
        }

        let mut face_normals = Vec::with_capacity(tris.len());
        let mut areas = Vec::with_capacity(tris.len());
        let mut vertex_normals = vec![Vec3::zeros(); vertices.len()];
        let mut tri_boxes = Vec::with_capacity(tris.len());
        for t in &tris {
            let [a, b, c] = t.map(|i| vertices[i as usize]);
            let cr = (b - a).cross(&(c - a));
            let n = cr.normalize();
            face_normals.push(n);
            areas.push(0.5 * cr.norm());
            vertex_normals[t[0] as usize] += n * corner_angle(&a, &b, &c);
            vertex_normals[t[1] as usize] += n * corner_angle(&b, &c, &a);
            vertex_normals[t[2] as usize] += n * corner_angle(&c, &a, &b);
            let mut bx = Aabb::empty();
            for p in [a, b, c] {
                bx.grow(&p);
            }
            tri_boxes.push(bx);
        }
        for n in &mut vertex_normals {
            if n.norm() > 0.0 {
                n.normalize_mut();
            }
        }

        let mut edge_sum: HashMap<(u32, u32), Vec3> = HashMap::new();
        for (ti, t) in tris.iter().enumerate() {
            for k in 0..3 {
                *edge_sum
                    .entry(edge_key(t[k], t[(k + 1) % 3]))
                    .or_insert_with(Vec3::zeros) += face_normals[ti];
            }
        }
        let edge_normals = edge_sum
            .into_iter()
            .map(|(k, n)| (k, if n.norm() > 0.0 { n.normalize() } else { n }))
            .collect();

        let adjacency = tris
            .iter()
            .enumerate()
            .map(|(ti, t)| {
                std::array::from_fn(|k| {
                    let (a, b) = (t[k], t[(k + 1) % 3]);
                    match (directed.get(&(a, b)), directed.get(&(b, a))) {
                        (Some(f), Some(o)) if f.len() == 1 && o.len() == 1 && o[0] != ti as u32 => {
                            Some(o[0])
                        }
                        _ => None,
                    }
                })
            })
            .collect();

        let bvh = Bvh::build(&tri_boxes);
        Ok(TriMesh {
            vertices,
            triangles: tris,
            face_normals,
            areas,
            adjacency,
            vertex_normals,
            edge_normals,
            bvh,
            bounds: (bounds.min, bounds.max),
            watertight,
            dropped,
            warnings,
        })
    }

    /// Parses OBJ text into a mesh.
    pub fn from_obj_str(text: &str, source: &str) -> Result<Self> {
        let d = obj::parse_obj(text, source)?;
        Self::new(d.vertices, d.triangles)
    }

    /// Loads an OBJ file (positions and faces only).
    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self> {
        let d = obj::read_obj(path.as_ref())?;
        Self::new(d.vertices, d.triangles)
    }

    pub fn from_raw((vertices, triangles): primitives::RawMesh) -> Result<Self> {
        Self::new(vertices, triangles)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Outward unit normal of triangle `t`.
    pub fn face_normal(&self, t: u32) -> Vec3 {
        self.face_normals[t as usize]
    }

    pub fn adjacency(&self) -> &[[Option<u32>; 3]] {
        &self.adjacency
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        self.bounds
    }

    /// Largest vertex distance from the bounding-box centre.
    pub fn bounding_radius(&self) -> f64 {
        let c = (self.bounds.0 + self.bounds.1) * 0.5;
        self.vertices
            .iter()
            .map(|v| (v - c).norm())
            .fold(0.0, f64::max)
    }

    pub fn surface_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Whether signed distance is available (closed, consistently wound).
    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn dropped_degenerate(&self) -> usize {
        self.dropped
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Copy of the mesh with every vertex moved by `t`.
    pub fn translated(&self, t: &Vec3) -> Result<Self> {
        let v = self.vertices.iter().map(|p| p + t).collect();
        Self::new(v, self.triangles.clone())
    }

    pub fn to_obj(&self) -> String {
        obj::to_obj(&self.vertices, &self.triangles)
    }

    fn closest_on(&self, t: u32, x: &Vec3) -> (f64, (Vec3, [f64; 3], Feature)) {
        let [a, b, c] = self.triangles[t as usize].map(|i| self.vertices[i as usize]);
        let r = closest_on_triangle(x, &a, &b, &c);
        ((r.0 - x).norm_squared(), r)
    }

    fn outward_pseudo_normal(&self, t: u32, f: Feature) -> Vec3 {
        let tri = self.triangles[t as usize];
        match f {
            Feature::Face => self.face_normals[t as usize],
            Feature::Edge(k) => self.edge_normals[&edge_key(tri[k], tri[(k + 1) % 3])],
            Feature::Vertex(k) => self.vertex_normals[tri[k] as usize],
        }
    }

    fn surface_point(&self, t: u32, (p, bary, f): (Vec3, [f64; 3], Feature)) -> SurfacePoint {
        SurfacePoint {
            position: p,
            inward_normal: -self.outward_pseudo_normal(t, f),
            triangle: t,
            bary,
        }
    }

    /// Globally nearest surface point to `x`; ties go to the lowest
    /// triangle id.
    pub fn nearest_point(&self, x: &Vec3) -> SurfacePoint {
        let (t, _, r) = self
            .bvh
            .nearest(x, |t| self.closest_on(t, x))
            .expect("mesh has at least one triangle");
        self.surface_point(t, r)
    }

    /// Exhaustive-scan version of [`TriMesh::nearest_point`].
    pub fn nearest_point_brute(&self, x: &Vec3) -> SurfacePoint {
        let mut best: Option<(u32, f64, (Vec3, [f64; 3], Feature))> = None;
        for t in 0..self.triangles.len() as u32 {
            let (d, r) = self.closest_on(t, x);
            if best.as_ref().is_none_or(|(_, bd, _)| d < *bd) {
                best = Some((t, d, r));
            }
        }
        let (t, _, r) = best.expect("mesh has at least one triangle");
        self.surface_point(t, r)
    }

    /// Distance to the surface, negative inside. On meshes that are not
    /// watertight the unsigned distance is returned.
    pub fn signed_distance(&self, x: &Vec3) -> f64 {
        let sp = self.nearest_point(x);
        let diff = x - sp.position;
        let d = diff.norm();
        if self.watertight && diff.dot(&sp.inward_normal) > 0.0 {
            -d
        } else {
            d
        }
    }

    /// `n` area-weighted uniform surface samples; deterministic per seed.
    pub fn sample_surface(&self, n: usize, seed: u64) -> Vec<SurfacePoint> {
        let mut cum = Vec::with_capacity(self.areas.len());
        let mut acc = 0.0;
        for a in &self.areas {
            acc += a;
            cum.push(acc);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let r = rng.gen::<f64>() * acc;
                let t = cum.partition_point(|&c| c <= r).min(cum.len() - 1);
                let s = rng.gen::<f64>().sqrt();
                let r2 = rng.gen::<f64>();
                let bary = [1.0 - s, s * (1.0 - r2), s * r2];
                let [a, b, c] = self.triangles[t].map(|i| self.vertices[i as usize]);
                SurfacePoint {
                    position: a * bary[0] + b * bary[1] + c * bary[2],
                    inward_normal: -self.face_normals[t],
                    triangle: t as u32,
                    bary,
                }
            })
            .collect()
    }

    /// Inward normal at `sp` interpolated from the angle-weighted vertex
    /// normals of its triangle. Continuous across edges, unlike the facet
    /// normal, so it has a usable derivative along the surface.
    pub fn interpolated_inward_normal(&self, sp: &SurfacePoint) -> Vec3 {
        let tri = self.triangles[sp.triangle as usize];
        let n = (0..3).fold(Vec3::zeros(), |acc, k| acc + self.vertex_normals[tri[k] as usize] * sp.bary[k]);
        let len = n.norm();
        if len > 1e-12 {
            -n / len
        } else {
            sp.inward_normal
        }
    }

    /// Position of barycentric `bary` on triangle `t`.
    pub fn point_on(&self, t: u32, bary: [f64; 3]) -> Vec3 {
        let [a, b, c] = self.triangles[t as usize].map(|i| self.vertices[i as usize]);
        a * bary[0] + b * bary[1] + c * bary[2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use primitives::{cuboid, cylinder, icosphere, torus};
    use proptest::prelude::*;
    use rand::Rng;

    fn sphere() -> TriMesh {
        TriMesh::from_raw(icosphere(1.0, 3)).unwrap()
    }

    fn random_point(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
        Vec3::new(
            rng.gen_range(-r..r),
            rng.gen_range(-r..r),
            rng.gen_range(-r..r),
        )
    }

    #[test]
    fn cube_obj_bounds() {
        let (v, t) = cuboid(Vec3::repeat(0.5));
        let m = TriMesh::from_obj_str(&obj::to_obj(&v, &t), "cube.obj").unwrap();
        assert_eq!(m.triangle_count(), 12);
        assert_eq!(m.bounds(), (Vec3::repeat(-0.5), Vec3::repeat(0.5)));
        assert!(m.is_watertight());
        assert!(m.warnings().is_empty());
        assert!((m.surface_area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn primitives_are_closed_and_outward() {
        for (name, raw, n) in [
            ("ico3", icosphere(1.0, 3), 1280),
            ("cyl", cylinder(0.5, 1.0, 32), 128),
            ("torus", torus(1.0, 0.3, 24, 12), 576),
            ("box", cuboid(Vec3::new(1.0, 2.0, 3.0)), 12),
            ("grid box", primitives::cuboid_grid(Vec3::new(1.0, 2.0, 3.0), 4), 192),
            ("ringed cyl", primitives::cylinder_rings(0.5, 1.0, 16, 3, 2), 16 * 6 + 2 * (16 * 2 + 16)),
        ] {
            let m = TriMesh::from_raw(raw).unwrap();
            assert_eq!(m.triangle_count(), n, "{name}");
            assert!(m.is_watertight(), "{name}");
            assert!(m.warnings().is_empty(), "{name}: {:?}", m.warnings());
            assert!(
                m.adjacency().iter().all(|a| a.iter().all(Option::is_some)),
                "{name}"
            );
        }
    }

    #[test]
    fn inverted_winding_is_flipped_and_welding() {
        let (v, mut t) = cuboid(Vec3::repeat(0.5));
        for tri in &mut t {
            tri.swap(0, 1);
        }
        let m = TriMesh::new(v.clone(), t).unwrap();
        assert!(m.warnings().iter().any(|w| w.contains("flipped")));
        assert!(m.signed_distance(&Vec3::zeros()) < 0.0);

        // split every triangle into its own vertices; welding restores closure
        let (v, t) = cuboid(Vec3::repeat(0.5));
        let mut sv = Vec::new();
        let mut st = Vec::new();
        for tri in &t {
            let base = sv.len() as u32;
            sv.extend(tri.iter().map(|&i| v[i as usize]));
            st.push([base, base + 1, base + 2]);
        }
        let m = TriMesh::new(sv, st).unwrap();
        assert!(m.is_watertight());
        assert_eq!(m.vertices().len(), 8);
    }

    #[test]
    fn degenerate_triangles_dropped() {
        let (mut v, mut t) = cuboid(Vec3::repeat(0.5));
        v.push(Vec3::new(0.0, 0.0, 0.0));
        t.push([0, 0, 1]);
        t.push([0, 1, 8]);
        v.push((v[0] + v[1]) * 0.5);
        t.push([0, 1, 9]);
        let m = TriMesh::new(v, t).unwrap();
        assert_eq!(m.dropped_degenerate(), 2);
        assert_eq!(m.triangle_count(), 13);
        assert!(!m.is_watertight());
        assert!(TriMesh::new(vec![Vec3::zeros()], vec![[0, 0, 1]]).is_err());
    }

    #[test]
    fn sphere_queries() {
        let m = sphere();
        let sp = m.nearest_point(&Vec3::new(2.0, 0.0, 0.0));
        // chord deviation of a subdivision-3 icosphere is below 0.01
        assert!((sp.position - Vec3::x()).norm() < 0.05, "{:?}", sp.position);
        assert!((sp.inward_normal + Vec3::x()).norm() < 0.05);
        assert!((m.signed_distance(&Vec3::zeros()) + 1.0).abs() < 0.02);
        assert!((m.signed_distance(&Vec3::new(2.0, 0.0, 0.0)) - 1.0).abs() < 0.02);
    }

    #[test]
    fn bvh_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for raw in [
            icosphere(1.0, 3),
            torus(1.0, 0.3, 24, 12),
            cylinder(0.5, 1.0, 32),
        ] {
            let m = TriMesh::from_raw(raw).unwrap();
            for _ in 0..1000 {
                let x = random_point(&mut rng, 2.0);
                let a = m.nearest_point(&x);
                let b = m.nearest_point_brute(&x);
                assert_eq!(a, b, "query {x:?}");
            }
        }
    }

    #[test]
    fn nearest_point_on_vertex_ties_take_lowest_triangle() {
        let (v, t) = cuboid(Vec3::repeat(0.5));
        let m = TriMesh::new(v, t).unwrap();
        let corner = Vec3::repeat(1.0);
        let sp = m.nearest_point(&corner);
        assert!((sp.position - Vec3::repeat(0.5)).norm() < 1e-15);
        let lowest = m
            .triangles()
            .iter()
            .position(|t| {
                t.iter()
                    .any(|&i| m.vertices()[i as usize] == Vec3::repeat(0.5))
            })
            .unwrap();
        assert_eq!(sp.triangle as usize, lowest);
        // vertex pseudo-normal of a cube corner is the diagonal
        assert!((sp.inward_normal + Vec3::repeat(1.0).normalize()).norm() < 1e-12);
    }

    #[test]
    fn idempotence_and_on_triangle() {
        let m = TriMesh::from_raw(torus(1.0, 0.3, 24, 12)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let x = random_point(&mut rng, 1.6);
            let sp = m.nearest_point(&x);
            assert!((m.point_on(sp.triangle, sp.bary) - sp.position).norm() < 1e-9);
            assert!((sp.inward_normal.norm() - 1.0).abs() < 1e-12);
            let again = m.nearest_point(&sp.position);
            assert!((again.position - sp.position).norm() < 1e-9);
        }
    }

    #[test]
    fn sign_flips_across_faces() {
        let m = sphere();
        let samples = m.sample_surface(200, 1);
        for s in samples {
            let out = -s.inward_normal;
            assert!(m.signed_distance(&(s.position + out * 1e-3)) > 0.0);
            assert!(m.signed_distance(&(s.position - out * 1e-3)) < 0.0);
        }
    }

    #[test]
    fn cube_sampling_area_weights() {
        let (v, t) = cuboid(Vec3::repeat(0.5));
        let m = TriMesh::new(v, t).unwrap();
        let n = 100_000;
        let s = m.sample_surface(n, 7);
        let mut counts = [0usize; 6];
        for p in &s {
            let o = -p.inward_normal;
            let axis = (0..3)
                .max_by(|&a, &b| o[a].abs().total_cmp(&o[b].abs()))
                .unwrap();
            counts[2 * axis + usize::from(o[axis] > 0.0)] += 1;
            assert!((p.inward_normal.norm() - 1.0).abs() < 1e-12);
            assert!(p.position.abs().max() <= 0.5 + 1e-12);
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 1.0 / 6.0).abs() < 0.02 / 6.0, "{counts:?}");
        }
        assert_eq!(s, m.sample_surface(n, 7));
        assert_ne!(s[0], m.sample_surface(1, 8)[0]);
    }

    #[test]
    fn interpolated_normal_is_continuous() {
        let m = sphere();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..300 {
            let x = random_point(&mut rng, 2.0);
            let sp = m.nearest_point(&x);
            let n = m.interpolated_inward_normal(&sp);
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!((n + sp.position.normalize()).norm() < 0.02);
            let y = x + Vec3::new(1e-7, -2e-7, 1e-7);
            let n2 = m.interpolated_inward_normal(&m.nearest_point(&y));
            assert!((n - n2).norm() < 1e-5);
        }
    }

    #[test]
    fn open_mesh_uses_unsigned_distance() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let m = TriMesh::new(v, vec![[0, 1, 2]]).unwrap();
        assert!(!m.is_watertight());
        assert!((m.signed_distance(&Vec3::new(0.2, 0.2, -0.5)) - 0.5).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn signed_distance_is_lipschitz(
            a in prop::array::uniform3(-1.5f64..1.5),
            b in prop::array::uniform3(-1.5f64..1.5),
        ) {
            let m = TORUS.with(|t| t.clone());
            let (x, y) = (Vec3::from(a), Vec3::from(b));
            let lhs = (m.signed_distance(&x) - m.signed_distance(&y)).abs();
            prop_assert!(lhs <= (x - y).norm() + 1e-12);
        }
    }

    thread_local! {
        static TORUS: TriMesh = TriMesh::from_raw(torus(1.0, 0.3, 24, 12)).unwrap();
    }
}
