//! Procedural closed meshes with outward winding.

use std::collections::HashMap;
use std::f64::consts::TAU;

use crate::Vec3;

/// Vertex and triangle lists of a generated mesh.
pub type RawMesh = (Vec<Vec3>, Vec<[u32; 3]>);

fn push_quad(tris: &mut Vec<[u32; 3]>, q: [u32; 4]) {
    tris.push([q[0], q[1], q[2]]);
    tris.push([q[0], q[2], q[3]]);
}

/// Icosahedron subdivided `subdiv` times and projected to a sphere;
/// `20·4^subdiv` triangles.
pub fn icosphere(radius: f64, subdiv: u32) -> RawMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut tris: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdiv {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, c] in tris {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    for v in &mut verts {
        *v *= radius;
    }
    (verts, tris)
}

/// Axis-aligned box centred at the origin; 12 triangles.
pub fn cuboid(half: Vec3) -> RawMesh {
    let verts = (0..8)
        .map(|i| {
            let s = |bit: i32| if i & bit != 0 { 1.0 } else { -1.0 };
            Vec3::new(s(1) * half.x, s(2) * half.y, s(4) * half.z)
        })
        .collect();
    let mut tris = Vec::with_capacity(12);
    for q in [
        [0, 4, 6, 2],
        [1, 3, 7, 5],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 2, 3, 1],
        [4, 5, 7, 6],
    ] {
        push_quad(&mut tris, q);
    }
    (verts, tris)
}

/// Axis-aligned box centred at the origin with every face split into an
/// `n × n` grid of quads; `12·n²` triangles.
pub fn cuboid_grid(half: Vec3, n: u32) -> RawMesh {
    let n = n.max(1);
    let coord = |h: f64, i: u32| -h + 2.0 * h * i as f64 / n as f64;
    let mut verts = Vec::new();
    let mut tris = Vec::new();
    // (normal axis, sign, first in-plane axis, second in-plane axis) with
    // first × second along the outward normal
    for (axis, sign, a, b) in [
        (0, 1.0, 1, 2),
        (0, -1.0, 2, 1),
        (1, 1.0, 2, 0),
        (1, -1.0, 0, 2),
        (2, 1.0, 0, 1),
        (2, -1.0, 1, 0),
    ] {
        let base = verts.len() as u32;
        for i in 0..=n {
            for j in 0..=n {
                let mut v = Vec3::zeros();
                v[axis] = sign * half[axis];
                v[a] = coord(half[a], i);
                v[b] = coord(half[b], j);
                verts.push(v);
            }
        }
        let id = |i: u32, j: u32| base + i * (n + 1) + j;
        for i in 0..n {
            for j in 0..n {
                push_quad(&mut tris, [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
    }
    (verts, tris)
}

/// Closed cylinder along z with `segments` sides and capped ends.
pub fn cylinder(radius: f64, half_height: f64, segments: u32) -> RawMesh {
    cylinder_rings(radius, half_height, segments, 1, 1)
}

/// Cylinder with the side split into `bands` rows and each cap into
/// `rings` concentric rings.
pub fn cylinder_rings(radius: f64, half_height: f64, segments: u32, bands: u32, rings: u32) -> RawMesh {
    let n = segments.max(3);
    let (bands, rings) = (bands.max(1), rings.max(1));
    let ring_of = |z: f64, r: f64, verts: &mut Vec<Vec3>| -> u32 {
        let start = verts.len() as u32;
        for i in 0..n {
            let a = TAU * i as f64 / n as f64;
            verts.push(Vec3::new(r * a.cos(), r * a.sin(), z));
        }
        start
    };
    let mut verts = Vec::new();
    let mut tris = Vec::new();
    // side rows from bottom to top
    let side: Vec<u32> = (0..=bands)
        .map(|b| ring_of(-half_height + 2.0 * half_height * b as f64 / bands as f64, radius, &mut verts))
        .collect();
    for b in 0..bands as usize {
        for i in 0..n {
            let j = (i + 1) % n;
            push_quad(&mut tris, [side[b] + i, side[b] + j, side[b + 1] + j, side[b + 1] + i]);
        }
    }
    for (z, rim, outward_up) in [(-half_height, side[0], false), (half_height, side[bands as usize], true)] {
        let mut outer = rim;
        for k in (1..rings).rev() {
            let inner = ring_of(z, radius * k as f64 / rings as f64, &mut verts);
            for i in 0..n {
                let j = (i + 1) % n;
                if outward_up {
                    push_quad(&mut tris, [outer + i, outer + j, inner + j, inner + i]);
                } else {
                    push_quad(&mut tris, [outer + j, outer + i, inner + i, inner + j]);
                }
            }
            outer = inner;
        }
        let c = verts.len() as u32;
        verts.push(Vec3::new(0.0, 0.0, z));
        for i in 0..n {
            let j = (i + 1) % n;
            if outward_up {
                tris.push([c, outer + i, outer + j]);
            } else {
                tris.push([c, outer + j, outer + i]);
            }
        }
    }
    (verts, tris)
}

/// Torus around z with major radius `major` and tube radius `minor`.
pub fn torus(major: f64, minor: f64, nu: u32, nv: u32) -> RawMesh {
    let (nu, nv) = (nu.max(3), nv.max(3));
    let mut verts = Vec::with_capacity((nu * nv) as usize);
    for i in 0..nu {
        let u = TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let v = TAU * j as f64 / nv as f64;
            let rr = major + minor * v.cos();
            verts.push(Vec3::new(rr * u.cos(), rr * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: u32, j: u32| (i % nu) * nv + (j % nv);
    let mut tris = Vec::new();
    for i in 0..nu {
        for j in 0..nv {
            push_quad(
                &mut tris,
                [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)],
            );
        }
    }
    (verts, tris)
}
