//! Synthetic meshes and initial states used by tests, benchmarks and the demos.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::{AffineRow, ConstraintSet};
use crate::error::Result;
use crate::mesh::{DeformationState, SimplicialMesh};

/// A mesh with an initial state and constraints, ready to optimize.
#[derive(Clone, Debug)]
pub struct Problem {
    pub mesh: SimplicialMesh,
    pub initial: DeformationState,
    pub constraints: ConstraintSet,
}

/// Vertices and triangles of an `nx × ny` grid over `[0,1]²`.
pub fn grid_arrays(nx: usize, ny: usize) -> (Vec<[f64; 2]>, Vec<[usize; 3]>) {
    let mut v = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            v.push([i as f64 / nx as f64, j as f64 / ny as f64]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut t = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            t.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            t.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    (v, t)
}

pub fn grid(nx: usize, ny: usize) -> Result<SimplicialMesh> {
    let (v, t) = grid_arrays(nx, ny);
    SimplicialMesh::triangles(v, t)
}

fn lock_boundary(mesh: &SimplicialMesh, state: &DeformationState) -> ConstraintSet {
    let mut c = ConstraintSet::new(state.dim());
    for v in mesh.boundary_vertices() {
        c.lock(v, state.point(v));
    }
    c
}

/// An `n × n` grid with a `fraction` of interior vertices moved by up to two cells
/// per axis, boundary locked.
pub fn tangled_grid(n: usize, fraction: f64, seed: u64) -> Result<Problem> {
    let mesh = grid(n, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = DeformationState::identity(&mesh)?;
    let h = 1.0 / n as f64;
    let boundary: std::collections::HashSet<usize> = mesh.boundary_vertices().into_iter().collect();
    for v in 0..mesh.vertex_count() {
        if !boundary.contains(&v) && rng.gen_bool(fraction) {
            let p = state.point_mut(v);
            p[0] += rng.gen_range(-2.0 * h..2.0 * h);
            p[1] += rng.gen_range(-2.0 * h..2.0 * h);
        }
    }
    let constraints = lock_boundary(&mesh, &state);
    Ok(Problem {
        mesh,
        initial: state,
        constraints,
    })
}

fn orient_up(vertices: &[[f64; 3]], t: [usize; 3]) -> [usize; 3] {
    let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
    let z = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    if z < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}

/// Joins two concentric rings of points (sorted by angle) with a triangle strip.
fn zip_rings(inner: &[usize], outer: &[usize], angle: impl Fn(usize) -> f64, out: &mut Vec<[usize; 3]>) {
    let (m, n) = (inner.len(), outer.len());
    let unwrapped = |ring: &[usize], i: usize| {
        let base = angle(ring[0]);
        if i == ring.len() {
            base + TAU
        } else {
            base + (angle(ring[i]) - base).rem_euclid(TAU)
        }
    };
    let (mut i, mut j) = (0, 0);
    while i < m || j < n {
        if j < n && (i == m || unwrapped(outer, j + 1) <= unwrapped(inner, i + 1)) {
            out.push([inner[i % m], outer[j], outer[(j + 1) % n]]);
            j += 1;
        } else {
            out.push([inner[i], outer[j % n], inner[(i + 1) % m]]);
            i += 1;
        }
    }
}

/// Unit half-sphere `z ≥ 0` with `rings` latitude rings of `6i` points (`6·rings²`
/// triangles), initialized by orthographic projection onto the plane `z = 0`.
pub fn half_sphere(rings: usize) -> Result<Problem> {
    let mut vertices = vec![[0.0, 0.0, 1.0]];
    let mut ring_ids: Vec<Vec<usize>> = vec![vec![0]];
    let mut angles = vec![0.0];
    for i in 1..=rings {
        let phi = 0.5 * PI * i as f64 / rings as f64;
        let count = 6 * i;
        let offset = if i % 2 == 0 { 0.0 } else { PI / count as f64 };
        let mut ids = Vec::with_capacity(count);
        for j in 0..count {
            let a = offset + TAU * j as f64 / count as f64;
            ids.push(vertices.len());
            vertices.push([phi.sin() * a.cos(), phi.sin() * a.sin(), phi.cos()]);
            angles.push(a);
        }
        ring_ids.push(ids);
    }
    let mut tris = Vec::with_capacity(6 * rings * rings);
    for i in 1..=rings {
        if i == 1 {
            let r = &ring_ids[1];
            for j in 0..r.len() {
                tris.push([0, r[j], r[(j + 1) % r.len()]]);
            }
        } else {
            zip_rings(&ring_ids[i - 1], &ring_ids[i], |v| angles[v], &mut tris);
        }
    }
    let tris: Vec<[usize; 3]> = tris.into_iter().map(|t| orient_up(&vertices, t)).collect();
    let planar: Vec<[f64; 2]> = vertices.iter().map(|p| [p[0], p[1]]).collect();
    let mesh = SimplicialMesh::surface(vertices, tris)?;
    Ok(Problem {
        mesh,
        initial: DeformationState::from_points(&planar)?,
        constraints: ConstraintSet::new(2),
    })
}

/// Splits every triangle into four at edge midpoints.
pub fn subdivide(vertices: &[[f64; 2]], triangles: &[[usize; 3]]) -> (Vec<[f64; 2]>, Vec<[usize; 3]>) {
    let mut v = vertices.to_vec();
    let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, v: &mut Vec<[f64; 2]>| {
        *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
            v.push([(v[a][0] + v[b][0]) / 2.0, (v[a][1] + v[b][1]) / 2.0]);
            v.len() - 1
        })
    };
    let mut t = Vec::with_capacity(4 * triangles.len());
    for &[a, b, c] in triangles {
        let ab = midpoint(a, b, &mut v);
        let bc = midpoint(b, c, &mut v);
        let ca = midpoint(c, a, &mut v);
        t.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
    }
    (v, t)
}

/// Height of the smooth bump used by [`lifted_patch`].
pub fn bump(x: f64, y: f64) -> f64 {
    0.6 * (-6.0 * ((x - 0.5).powi(2) + (y - 0.5).powi(2))).exp()
}

/// A base `n × n` grid refined `level` times, lifted onto the graph of [`bump`].
/// The initial state is the planar parameter domain; the boundary is free.
pub fn lifted_patch(n: usize, level: usize) -> Result<Problem> {
    let (mut v, mut t) = grid_arrays(n, n);
    for _ in 0..level {
        (v, t) = subdivide(&v, &t);
    }
    let surface: Vec<[f64; 3]> = v.iter().map(|p| [p[0], p[1], bump(p[0], p[1])]).collect();
    let mesh = SimplicialMesh::surface(surface, t)?;
    Ok(Problem {
        mesh,
        initial: DeformationState::from_points(&v)?,
        constraints: ConstraintSet::new(2),
    })
}

/// A unit square whose top edge bulges into the arc `y = 1 + a·sin(πx)`, mapped to
/// the unit square. Corners are locked and the other boundary vertices slide along
/// their side of the square. The initial state is the regular grid.
pub fn arc_square(n: usize, amplitude: f64) -> Result<Problem> {
    let (v, t) = grid_arrays(n, n);
    let curved: Vec<[f64; 2]> = v
        .iter()
        .map(|p| [p[0], p[1] * (1.0 + amplitude * (PI * p[0]).sin())])
        .collect();
    let mesh = SimplicialMesh::triangles(curved, t)?;
    let initial = DeformationState::from_points(&v)?;
    let mut constraints = ConstraintSet::new(2);
    for b in mesh.boundary_vertices() {
        let p = initial.point(b);
        let on_x = p[0] == 0.0 || p[0] == 1.0;
        let on_y = p[1] == 0.0 || p[1] == 1.0;
        if on_x && on_y {
            constraints.lock(b, p);
        } else if on_x {
            constraints.add_row(AffineRow::new(vec![(b, 0, 1.0)], p[0]));
        } else {
            constraints.add_row(AffineRow::new(vec![(b, 1, 1.0)], p[1]));
        }
    }
    Ok(Problem {
        mesh,
        initial,
        constraints,
    })
}

/// Twelve unit equilateral triangles around vertex 0, lifted into an alternating
/// saddle so the surface is intrinsically flat everywhere except a `4π` cone at the center.
/// The initial state wraps the ring twice around the origin (each triangle a 60° wedge).
pub fn twelve_triangle_saddle() -> Result<Problem> {
    let r = (3.0 / (2.0 + 3f64.sqrt())).sqrt();
    let h = (1.0 - r * r).sqrt();
    let mut vertices = vec![[0.0, 0.0, 0.0]];
    let mut planar = vec![[0.0, 0.0]];
    for i in 0..12 {
        let a = TAU * i as f64 / 12.0;
        let z = if i % 2 == 0 { h } else { -h };
        vertices.push([r * a.cos(), r * a.sin(), z]);
        let b = TAU * i as f64 / 6.0;
        planar.push([b.cos(), b.sin()]);
    }
    let tris = (0..12).map(|i| [0, 1 + i, 1 + (i + 1) % 12]).collect();
    let mesh = SimplicialMesh::surface(vertices, tris)?;
    Ok(Problem {
        mesh,
        initial: DeformationState::from_points(&planar)?,
        constraints: ConstraintSet::new(2),
    })
}

/// An `nx × ny × nz` box over `[0, length] × [0,1] × [0,1]`, each cube split into six
/// tetrahedra, with both end faces locked and the far end twisted by `twist` radians.
/// Interior vertices start at their reference positions.
pub fn twisted_bar(nx: usize, ny: usize, nz: usize, length: f64, twist: f64) -> Result<Problem> {
    let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let mut v = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                v.push([
                    length * i as f64 / nx as f64,
                    j as f64 / ny as f64,
                    k as f64 / nz as f64,
                ]);
            }
        }
    }
    let mut tets = Vec::with_capacity(6 * nx * ny * nz);
    // Kuhn subdivision: paths from corner 000 to 111 through the six axis orders
    const ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for order in ORDERS {
                    let mut c = [i, j, k];
                    let mut tet = [id(c[0], c[1], c[2]), 0, 0, 0];
                    for (s, &axis) in order.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = id(c[0], c[1], c[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    let mesh = SimplicialMesh::tetrahedra(v.clone(), tets)?;
    let mut state = DeformationState::identity(&mesh)?;
    let mut constraints = ConstraintSet::new(3);
    for k in 0..=nz {
        for j in 0..=ny {
            let near = id(0, j, k);
            constraints.lock(near, &v[near]);
            let far = id(nx, j, k);
            let (y, z) = (v[far][1] - 0.5, v[far][2] - 0.5);
            let (s, c) = twist.sin_cos();
            let p = [v[far][0], 0.5 + c * y - s * z, 0.5 + s * y + c * z];
            constraints.lock(far, &p);
            state.point_mut(far).copy_from_slice(&p);
        }
    }
    Ok(Problem {
        mesh,
        initial: state,
        constraints,
    })
}
