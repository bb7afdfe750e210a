//! Affine equality constraints on vertex coordinates.
//!
//! Constraints are linear rows `Σ a_i·x_i = b` over the flattened coordinate vector.
//! [`ConstraintSet::build_reduction`] eliminates them once, producing a [`Reduction`]
//! `full = M·free + c` in which every free variable is one of the original coordinates
//! and every eliminated coordinate is an affine combination of free ones.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::SimplicialMesh;

/// One linear equation over vertex coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineRow {
    /// `(vertex, axis, coefficient)` triples.
    pub terms: Vec<(usize, usize, f64)>,
    pub rhs: f64,
}

impl AffineRow {
    pub fn new(terms: Vec<(usize, usize, f64)>, rhs: f64) -> Self {
        AffineRow { terms, rhs }
    }

    pub fn residual(&self, coords: &[f64], dim: usize) -> f64 {
        self.terms.iter().map(|&(v, a, c)| c * coords[v * dim + a]).sum::<f64>() - self.rhs
    }
}

/// A singularity index `num/den`, as produced by frame-field tools.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FractionalIndex {
    pub num: i64,
    pub den: i64,
}

impl FractionalIndex {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidParameter("index denominator is zero".into()));
        }
        Ok(FractionalIndex { num, den })
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for FractionalIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for FractionalIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("expected <num>/<den>, got {s:?}"));
        let (n, d) = s.split_once('/').ok_or_else(bad)?;
        let num = n.trim().parse().map_err(|_| bad())?;
        let den = d.trim().parse().map_err(|_| bad())?;
        FractionalIndex::new(num, den)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstraintSet {
    dim: usize,
    locked: Vec<(usize, Vec<f64>)>,
    rows: Vec<AffineRow>,
}

impl ConstraintSet {
    pub fn new(dim: usize) -> Self {
        ConstraintSet {
            dim,
            locked: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.locked.is_empty() && self.rows.is_empty()
    }

    pub fn locked(&self) -> &[(usize, Vec<f64>)] {
        &self.locked
    }

    pub fn rows(&self) -> &[AffineRow] {
        &self.rows
    }

    /// Pins a vertex to a fixed target position.
    pub fn lock(&mut self, vertex: usize, position: &[f64]) {
        assert_eq!(position.len(), self.dim, "locked position has wrong dimension");
        self.locked.push((vertex, position.to_vec()));
    }

    pub fn add_row(&mut self, row: AffineRow) {
        self.rows.push(row);
    }

    pub fn extend_rows(&mut self, rows: impl IntoIterator<Item = AffineRow>) {
        self.rows.extend(rows);
    }

    /// Grid-preserving cut transition `x_b = R(k·π/2)·x_a + translation`.
    pub fn add_transition(&mut self, a: usize, b: usize, quarter_turns: i32, translation: [f64; 2]) {
        assert_eq!(self.dim, 2, "transitions are planar");
        let (c, s) = match quarter_turns.rem_euclid(4) {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
        self.rows
            .push(AffineRow::new(vec![(b, 0, 1.0), (a, 0, -c), (a, 1, s)], translation[0]));
        self.rows.push(AffineRow::new(
            vec![(b, 1, 1.0), (a, 0, -s), (a, 1, -c)],
            translation[1],
        ));
    }

    /// Adds the one-ring rows of [`index_preservation_constraints`].
    pub fn add_index_preservation(
        &mut self,
        mesh: &SimplicialMesh,
        vertex: usize,
        index: FractionalIndex,
    ) -> Result<()> {
        let rows = index_preservation_constraints(mesh, vertex, index)?;
        self.rows.extend(rows);
        Ok(())
    }

    /// Validates vertex and axis indices against a mesh size.
    pub fn check_indices(&self, vertex_count: usize) -> Result<()> {
        for (v, p) in &self.locked {
            if *v >= vertex_count || p.len() != self.dim {
                return Err(Error::InvalidParameter(format!(
                    "lock references vertex {v} of {vertex_count}"
                )));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            for &(v, a, _) in &row.terms {
                if v >= vertex_count || a >= self.dim {
                    return Err(Error::InvalidParameter(format!(
                        "affine row {i} references vertex {v} axis {a}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest absolute residual of any constraint at `coords`.
    pub fn max_residual(&self, coords: &[f64]) -> f64 {
        let d = self.dim;
        let locks = self
            .locked
            .iter()
            .flat_map(|(v, p)| p.iter().enumerate().map(move |(a, x)| (coords[v * d + a] - x).abs()));
        let rows = self.rows.iter().map(|r| r.residual(coords, d).abs());
        locks.chain(rows).fold(0.0, f64::max)
    }

    /// Eliminates the constraints by Gaussian elimination with partial pivoting.
    ///
    /// Redundant rows are dropped; a row contradicting the preceding ones is an error
    /// naming that row.
    pub fn build_reduction(&self, vertex_count: usize) -> Result<Reduction> {
        self.check_indices(vertex_count)?;
        let d = self.dim;
        let n = d * vertex_count;
        let mut rows: Vec<(String, BTreeMap<usize, f64>, f64)> = Vec::new();
        for (v, p) in &self.locked {
            for (a, x) in p.iter().enumerate() {
                rows.push((format!("lock of vertex {v}"), BTreeMap::from([(v * d + a, 1.0)]), *x));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            let mut terms = BTreeMap::new();
            for &(v, a, c) in &row.terms {
                *terms.entry(v * d + a).or_insert(0.0) += c;
            }
            rows.push((format!("affine row {i}"), terms, row.rhs));
        }

        // pivot coordinate -> (constant, coefficients over non-pivot coordinates)
        let mut pivots: HashMap<usize, (f64, BTreeMap<usize, f64>)> = HashMap::new();
        for (origin, terms, rhs) in rows {
            let scale = terms.values().fold(0.0f64, |m, c| m.max(c.abs()));
            let mut reduced: BTreeMap<usize, f64> = BTreeMap::new();
            let mut b = rhs;
            let mut magnitude = rhs.abs();
            for (coord, coef) in terms {
                match pivots.get(&coord) {
                    Some((c0, expr)) => {
                        b -= coef * c0;
                        magnitude += (coef * c0).abs();
                        for (&j, &e) in expr {
                            *reduced.entry(j).or_insert(0.0) += coef * e;
                        }
                    }
                    None => *reduced.entry(coord).or_insert(0.0) += coef,
                }
            }
            reduced.retain(|_, c| c.abs() > 1e-10 * scale);
            let Some((&p, &ap)) = reduced
                .iter()
                .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()).then(y.0.cmp(x.0)))
            else {
                if b.abs() > 1e-9 * (1.0 + magnitude) {
                    return Err(Error::InconsistentConstraint { origin });
                }
                continue;
            };
            let c0 = b / ap;
            let expr: BTreeMap<usize, f64> = reduced
                .iter()
                .filter(|(&j, _)| j != p)
                .map(|(&j, &c)| (j, -c / ap))
                .collect();
            for (k0, kexpr) in pivots.values_mut() {
                if let Some(w) = kexpr.remove(&p) {
                    *k0 += w * c0;
                    for (&j, &e) in &expr {
                        *kexpr.entry(j).or_insert(0.0) += w * e;
                    }
                    kexpr.retain(|_, c| *c != 0.0);
                }
            }
            pivots.insert(p, (c0, expr));
        }

        let mut free_of_coord = vec![None; n];
        let mut free_coords = Vec::with_capacity(n - pivots.len());
        for (coord, slot) in free_of_coord.iter_mut().enumerate() {
            if !pivots.contains_key(&coord) {
                *slot = Some(free_coords.len());
                free_coords.push(coord);
            }
        }
        let mut dependent: Vec<Dependent> = pivots
            .into_iter()
            .map(|(coord, (constant, expr))| Dependent {
                coord,
                constant,
                terms: expr
                    .into_iter()
                    .map(|(j, c)| (free_of_coord[j].expect("expression over free coordinates"), c))
                    .collect(),
            })
            .collect();
        dependent.sort_by_key(|dep| dep.coord);
        Ok(Reduction {
            full_len: n,
            free_coords,
            dependent,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Dependent {
    coord: usize,
    constant: f64,
    terms: Vec<(usize, f64)>,
}

/// Affine parameterization `full = M·free + c` of the constraint solution set.
#[derive(Clone, Debug, PartialEq)]
pub struct Reduction {
    full_len: usize,
    free_coords: Vec<usize>,
    dependent: Vec<Dependent>,
}

impl Reduction {
    /// No constraints: every coordinate is free.
    pub fn identity(full_len: usize) -> Self {
        Reduction {
            full_len,
            free_coords: (0..full_len).collect(),
            dependent: Vec::new(),
        }
    }

    pub fn full_len(&self) -> usize {
        self.full_len
    }

    pub fn free_len(&self) -> usize {
        self.free_coords.len()
    }

    /// Writes `M·free + c` into `full`.
    pub fn expand_into(&self, free: &[f64], full: &mut [f64]) {
        debug_assert_eq!(free.len(), self.free_len());
        for (i, &coord) in self.free_coords.iter().enumerate() {
            full[coord] = free[i];
        }
        for dep in &self.dependent {
            full[dep.coord] = dep.constant + dep.terms.iter().map(|&(j, c)| c * free[j]).sum::<f64>();
        }
    }

    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.full_len];
        self.expand_into(free, &mut full);
        full
    }

    /// Free-variable values read from a full coordinate vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_coords.iter().map(|&c| full[c]).collect()
    }

    /// The nearest point of the solution set in the sense of keeping free coordinates
    /// and recomputing eliminated ones.
    pub fn project(&self, full: &[f64]) -> Vec<f64> {
        self.expand(&self.restrict(full))
    }

    /// `Mᵀ·g` for a gradient over full coordinates.
    pub fn project_gradient(&self, full_grad: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = self.free_coords.iter().map(|&c| full_grad[c]).collect();
        for dep in &self.dependent {
            let gd = full_grad[dep.coord];
            for &(j, c) in &dep.terms {
                g[j] += c * gd;
            }
        }
        g
    }
}

/// Vertices around `vertex` in the order induced by triangle orientation.
pub fn one_ring(mesh: &SimplicialMesh, vertex: usize) -> Result<Vec<usize>> {
    if mesh.dim() != 2 {
        return Err(Error::InvalidParameter(
            "one-rings are defined for triangle meshes".into(),
        ));
    }
    let mut next: HashMap<usize, usize> = HashMap::new();
    for s in mesh.simplices() {
        if let Some(p) = s.iter().position(|&v| v == vertex) {
            let a = s[(p + 1) % 3];
            let b = s[(p + 2) % 3];
            if next.insert(a, b).is_some() {
                return Err(Error::InvalidMesh(format!("non-manifold one-ring at vertex {vertex}")));
            }
        }
    }
    if next.is_empty() {
        return Err(Error::InvalidParameter(format!("vertex {vertex} is isolated")));
    }
    let start = *next.keys().min().expect("non-empty");
    let mut ring = vec![start];
    let mut cur = start;
    loop {
        cur = *next.get(&cur).ok_or(Error::OpenOneRing(vertex))?;
        if cur == start {
            break;
        }
        if ring.len() > next.len() {
            return Err(Error::InvalidMesh(format!("non-manifold one-ring at vertex {vertex}")));
        }
        ring.push(cur);
    }
    if ring.len() != next.len() {
        return Err(Error::InvalidMesh(format!("non-manifold one-ring at vertex {vertex}")));
    }
    Ok(ring)
}

fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// One-ring rows forcing the image around `vertex` to turn by `(1 - index)·2π`.
///
/// The reference one-ring is flattened (angles rescaled to sum to 2π); each pair of
/// consecutive neighbours `(u_i, u_{i+1})` yields the complex-linear relation
/// `x(u_{i+1}) - x(v) = s_i·R(α_i)·(x(u_i) - x(v))`, with `s_i` the flattened length
/// ratio and `α_i` the flattened angle scaled by `1 - index`. Two scalar rows per pair.
pub fn index_preservation_constraints(
    mesh: &SimplicialMesh,
    vertex: usize,
    index: FractionalIndex,
) -> Result<Vec<AffineRow>> {
    let ring = one_ring(mesh, vertex)?;
    let v = mesh.ref_vertex(vertex);
    let offset = |u: usize| -> Vec<f64> { mesh.ref_vertex(u).iter().zip(v).map(|(a, b)| a - b).collect() };
    let n = ring.len();
    let lengths: Vec<f64> = ring
        .iter()
        .map(|&u| offset(u).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let angles: Vec<f64> = (0..n)
        .map(|i| angle_between(&offset(ring[i]), &offset(ring[(i + 1) % n])))
        .collect();
    let total: f64 = angles.iter().sum();
    let scale = mesh.scale();
    if !(total > 1e-12) || lengths.iter().any(|&l| !(l > 1e-12 * scale)) {
        return Err(Error::DegenerateOneRing(vertex));
    }

    let turning = 1.0 - index.value();
    let mut rows = Vec::with_capacity(2 * n);
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let alpha = turning * TAU * angles[i] / total;
        let s = lengths[(i + 1) % n] / lengths[i];
        let (sn, cs) = alpha.sin_cos();
        let (sc, ss) = (s * cs, s * sn);
        rows.push(AffineRow::new(
            vec![
                (b, 0, 1.0),
                (vertex, 0, sc - 1.0),
                (vertex, 1, -ss),
                (a, 0, -sc),
                (a, 1, ss),
            ],
            0.0,
        ));
        rows.push(AffineRow::new(
            vec![
                (b, 1, 1.0),
                (vertex, 1, sc - 1.0),
                (vertex, 0, ss),
                (a, 0, -ss),
                (a, 1, -sc),
            ],
            0.0,
        ));
    }
    Ok(rows)
}
