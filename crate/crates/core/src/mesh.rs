//! Simplicial mesh data model and the piecewise-affine map it carries.
//!
//! A [`SimplicialMesh`] holds the reference (rest) shape: vertex coordinates in the
//! parametric domain and the simplices connecting them. Triangle meshes may have 3D
//! reference coordinates (a surface to flatten); each such triangle is laid out in its
//! own orthonormal 2D frame so every element has a `d × d` Jacobian.
//!
//! A [`DeformationState`] is the optimization variable: target coordinates for every
//! vertex, flattened as `[x0, y0, (z0), x1, ...]`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Reference volumes below this fraction of `scale^d` are rejected at load time.
const DEGENERATE_VOLUME_RATIO: f64 = 1e-14;

/// Per-simplex data cached at construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementGeometry {
    /// Inverse of the reference edge matrix `[p1 - p0, ..., pd - p0]`.
    pub inv_edge_matrix: Mat,
    /// Signed volume of the reference simplex; positive after orientation normalization.
    pub ref_volume: f64,
}

#[derive(Clone, Debug)]
pub struct SimplicialMesh {
    dim: usize,
    ambient_dim: usize,
    ref_vertices: Vec<[f64; 3]>,
    simplices: Vec<[usize; 4]>,
    geometry: Vec<ElementGeometry>,
}

impl SimplicialMesh {
    /// Planar triangle mesh.
    pub fn triangles(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let verts = vertices.into_iter().map(|[x, y]| [x, y, 0.0]).collect();
        let simplices = triangles.into_iter().map(|[a, b, c]| [a, b, c, 0]).collect();
        Self::build(2, 2, verts, simplices)
    }

    /// Triangle mesh embedded in 3D; the map is computed in per-element local frames.
    pub fn surface(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let simplices = triangles.into_iter().map(|[a, b, c]| [a, b, c, 0]).collect();
        Self::build(2, 3, vertices, simplices)
    }

    pub fn tetrahedra(vertices: Vec<[f64; 3]>, tets: Vec<[usize; 4]>) -> Result<Self> {
        Self::build(3, 3, vertices, tets)
    }

    fn build(
        dim: usize,
        ambient_dim: usize,
        ref_vertices: Vec<[f64; 3]>,
        mut simplices: Vec<[usize; 4]>,
    ) -> Result<Self> {
        let n = ref_vertices.len();
        if simplices.is_empty() {
            return Err(Error::InvalidMesh("mesh has no simplices".into()));
        }
        if let Some(i) = ref_vertices.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidMesh(format!("vertex {i} is not finite")));
        }
        for (k, s) in simplices.iter().enumerate() {
            let s = &s[..=dim];
            for (a, &i) in s.iter().enumerate() {
                if i >= n {
                    return Err(Error::InvalidMesh(format!(
                        "simplex {k} references vertex {i}, but there are only {n} vertices"
                    )));
                }
                if s[..a].contains(&i) {
                    return Err(Error::InvalidMesh(format!("simplex {k} repeats vertex {i}")));
                }
            }
        }

        let scale = bounding_diagonal(&ref_vertices[..], ambient_dim).max(f64::MIN_POSITIVE);
        let min_volume = DEGENERATE_VOLUME_RATIO * scale.powi(dim as i32);
        let mut geometry = Vec::with_capacity(simplices.len());
        for (k, s) in simplices.iter_mut().enumerate() {
            let mut edges = reference_edge_matrix(&ref_vertices, s, dim, ambient_dim);
            let mut volume = edges.det() / factorial(dim);
            if volume < 0.0 {
                // only reachable for flat meshes: surface frames are positive by construction
                s.swap(dim - 1, dim);
                edges = reference_edge_matrix(&ref_vertices, s, dim, ambient_dim);
                volume = edges.det() / factorial(dim);
            }
            if !(volume > min_volume) {
                return Err(Error::DegenerateElement { index: k, volume });
            }
            let inv_edge_matrix = edges.inverse().ok_or(Error::DegenerateElement { index: k, volume })?;
            geometry.push(ElementGeometry {
                inv_edge_matrix,
                ref_volume: volume,
            });
        }

        Ok(SimplicialMesh {
            dim,
            ambient_dim,
            ref_vertices,
            simplices,
            geometry,
        })
    }

    /// Dimension of the map (2 for triangles, 3 for tetrahedra).
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the reference coordinates.
    #[inline]
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// True for triangle meshes with 3D reference coordinates.
    pub fn is_surface(&self) -> bool {
        self.ambient_dim != self.dim
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.ref_vertices.len()
    }

    #[inline]
    pub fn simplex_count(&self) -> usize {
        self.simplices.len()
    }

    pub fn ref_vertex(&self, i: usize) -> &[f64] {
        &self.ref_vertices[i][..self.ambient_dim]
    }

    #[inline]
    pub fn simplex(&self, k: usize) -> &[usize] {
        &self.simplices[k][..=self.dim]
    }

    pub fn simplices(&self) -> impl ExactSizeIterator<Item = &[usize]> + '_ {
        self.simplices.iter().map(move |s| &s[..=self.dim])
    }

    #[inline]
    pub fn geometry(&self, k: usize) -> &ElementGeometry {
        &self.geometry[k]
    }

    pub fn total_volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.ref_volume).sum()
    }

    /// Diagonal of the reference bounding box.
    pub fn scale(&self) -> f64 {
        bounding_diagonal(&self.ref_vertices, self.ambient_dim)
    }

    /// Boundary facets (edges for triangle meshes, faces for tetrahedral meshes).
    /// Boundary edges of triangle meshes keep the orientation of their triangle.
    pub fn boundary_facets(&self) -> Vec<Vec<usize>> {
        let mut count: HashMap<Vec<usize>, (usize, Vec<usize>)> = HashMap::new();
        for s in self.simplices() {
            for skip in 0..s.len() {
                let mut facet: Vec<usize> = Vec::with_capacity(self.dim);
                // keep cyclic orientation: facet opposite vertex `skip`
                for o in 1..s.len() {
                    facet.push(s[(skip + o) % s.len()]);
                }
                let mut key = facet.clone();
                key.sort_unstable();
                count.entry(key).or_insert((0, facet)).0 += 1;
            }
        }
        let mut out: Vec<Vec<usize>> = count.into_values().filter(|(c, _)| *c == 1).map(|(_, f)| f).collect();
        out.sort();
        out
    }

    /// Vertices lying on the mesh boundary, sorted.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.boundary_facets().into_iter().flatten().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Closed boundary loops of a triangle mesh, each ordered along the boundary
    /// orientation induced by the triangles.
    pub fn boundary_loops(&self) -> Vec<Vec<usize>> {
        assert_eq!(self.dim, 2, "boundary loops are defined for triangle meshes");
        let mut next: HashMap<usize, usize> = HashMap::new();
        for e in self.boundary_facets() {
            next.insert(e[0], e[1]);
        }
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut visited = std::collections::HashSet::new();
        let mut loops = Vec::new();
        for s in starts {
            if visited.contains(&s) {
                continue;
            }
            let mut lp = vec![s];
            visited.insert(s);
            let mut cur = next[&s];
            while cur != s {
                if !visited.insert(cur) {
                    break;
                }
                lp.push(cur);
                match next.get(&cur) {
                    Some(&n) => cur = n,
                    None => break,
                }
            }
            loops.push(lp);
        }
        loops
    }
}

fn factorial(d: usize) -> f64 {
    (1..=d).product::<usize>() as f64
}

fn bounding_diagonal(points: &[[f64; 3]], ambient_dim: usize) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..ambient_dim {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (0..ambient_dim).map(|a| (hi[a] - lo[a]).powi(2)).sum::<f64>().sqrt()
}

fn reference_edge_matrix(verts: &[[f64; 3]], s: &[usize; 4], dim: usize, ambient_dim: usize) -> Mat {
    let p0 = verts[s[0]];
    if dim == ambient_dim {
        let mut e = Mat::zeros(dim);
        for j in 0..dim {
            let p = verts[s[j + 1]];
            for i in 0..dim {
                e[(i, j)] = p[i] - p0[i];
            }
        }
        return e;
    }
    // surface triangle in its local frame: x along the first edge, y in-plane
    let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let e1 = sub(verts[s[1]], p0);
    let e2 = sub(verts[s[2]], p0);
    let l1 = dot(e1, e1).sqrt();
    let n = cross(e1, e2);
    let ln = dot(n, n).sqrt();
    if l1 == 0.0 || ln == 0.0 {
        return Mat::zeros(2);
    }
    let x = [e1[0] / l1, e1[1] / l1, e1[2] / l1];
    let y = cross([n[0] / ln, n[1] / ln, n[2] / ln], x);
    Mat::from_columns(&[&[l1, 0.0], &[dot(e2, x), dot(e2, y)]])
}

/// Target coordinates of every vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformationState {
    dim: usize,
    coords: Vec<f64>,
}

impl DeformationState {
    /// Wraps a flat coordinate vector (`dim` entries per vertex).
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParameter(format!(
                "state dimension must be 2 or 3, got {dim}"
            )));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "coordinate count {} is not a multiple of {dim}",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "coordinate {} of vertex {} is not finite",
                i % dim,
                i / dim
            )));
        }
        Ok(DeformationState { dim, coords })
    }

    pub fn from_points<const D: usize>(points: &[[f64; D]]) -> Result<Self> {
        Self::new(D, points.iter().flatten().copied().collect())
    }

    /// The rest shape itself; unavailable for surface meshes.
    pub fn identity(mesh: &SimplicialMesh) -> Result<Self> {
        if mesh.is_surface() {
            return Err(Error::InvalidParameter(
                "a surface mesh has no identity map into the plane; an initial state is required".into(),
            ));
        }
        let d = mesh.dim();
        let coords = (0..mesh.vertex_count())
            .flat_map(|i| mesh.ref_vertex(i)[..d].to_vec())
            .collect();
        Self::new(d, coords)
    }

    /// Checks that the state matches the mesh's vertex count and map dimension.
    pub fn check_against(&self, mesh: &SimplicialMesh) -> Result<()> {
        if self.dim != mesh.dim() || self.vertex_count() != mesh.vertex_count() {
            return Err(Error::InvalidParameter(format!(
                "state has {} vertices in {}D, mesh expects {} vertices in {}D",
                self.vertex_count(),
                self.dim,
                mesh.vertex_count(),
                mesh.dim()
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Applies `x ↦ A·x + b` to every vertex.
    pub fn transformed(&self, a: &Mat, b: &[f64]) -> Self {
        let d = self.dim;
        let mut out = self.clone();
        for i in 0..self.vertex_count() {
            let p = self.point(i);
            let q = out.point_mut(i);
            for r in 0..d {
                q[r] = b[r] + (0..d).map(|c| a[(r, c)] * p[c]).sum::<f64>();
            }
        }
        out
    }
}

/// Jacobian of the affine map on simplex `k`.
#[inline]
pub fn jacobian(mesh: &SimplicialMesh, state: &DeformationState, k: usize) -> Mat {
    jacobian_from_coords(mesh, state.coords(), k)
}

#[inline]
pub(crate) fn jacobian_from_coords(mesh: &SimplicialMesh, coords: &[f64], k: usize) -> Mat {
    let d = mesh.dim();
    let s = mesh.simplex(k);
    let x0 = &coords[s[0] * d..s[0] * d + d];
    let mut t = Mat::zeros(d);
    for j in 0..d {
        let xj = &coords[s[j + 1] * d..s[j + 1] * d + d];
        for i in 0..d {
            t[(i, j)] = xj[i] - x0[i];
        }
    }
    t * mesh.geometry(k).inv_edge_matrix
}

/// Signed volume of the simplex spanned by `d + 1` points in `R^d`.
pub fn signed_volume(points: &[&[f64]]) -> f64 {
    let d = points.len() - 1;
    assert!(d == 2 || d == 3, "signed_volume expects a triangle or tetrahedron");
    let mut e = Mat::zeros(d);
    for j in 0..d {
        for i in 0..d {
            e[(i, j)] = points[j + 1][i] - points[0][i];
        }
    }
    e.det() / factorial(d)
}

/// Smallest Jacobian determinant over the mesh; positive iff no element is inverted.
pub fn min_det_ratio(mesh: &SimplicialMesh, state: &DeformationState) -> f64 {
    (0..mesh.simplex_count())
        .map(|k| jacobian(mesh, state, k).det())
        .fold(f64::INFINITY, f64::min)
}

/// Number of elements with `det J <= 0`.
pub fn inverted_count(mesh: &SimplicialMesh, state: &DeformationState) -> usize {
    (0..mesh.simplex_count())
        .filter(|&k| jacobian(mesh, state, k).det() <= 0.0)
        .count()
}
