//! Reading and writing meshes (MEDIT `.mesh`, Wavefront `.obj`), constraint files and
//! continuation reports.
//!
//! All parsers are strict: unknown keywords, wrong token counts, out-of-range indices and
//! non-finite numbers are errors carrying the offending line. Floating-point output uses
//! 17 significant digits so every value round-trips exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::constraints::{AffineRow, ConstraintSet, FractionalIndex};
use crate::error::{Error, Result};
use crate::mesh::{DeformationState, SimplicialMesh};
use crate::quality::{Histogram, QualityStats};
use crate::report::{ContinuationReport, ReportRow, Summary};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Medit,
    Obj,
}

impl MeshFormat {
    /// Picks the format from the file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("mesh") => Ok(MeshFormat::Medit),
            Some("obj") => Ok(MeshFormat::Obj),
            _ => Err(Error::InvalidParameter(format!(
                "{}: unknown mesh format (expected .mesh or .obj)",
                path.display()
            ))),
        }
    }
}

/// A parsed mesh file: the reference mesh plus the state stored alongside it, if any.
#[derive(Clone, Debug)]
pub struct MeshFile {
    pub mesh: SimplicialMesh,
    /// OBJ texture coordinates, when there is one per vertex.
    pub state: Option<DeformationState>,
    /// Vertex positions exactly as written in the file.
    pub positions: DeformationState,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_finite(path: &Path, line: usize, token: &str) -> Result<f64> {
    match f64::from_str(token) {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(
            path,
            line,
            format!("expected a finite number, got {token:?}"),
        )),
    }
}

fn parse_usize(path: &Path, line: usize, token: &str) -> Result<usize> {
    if !token.bytes().all(|b| b.is_ascii_digit()) || token.is_empty() {
        return Err(parse_error(
            path,
            line,
            format!("expected a non-negative integer, got {token:?}"),
        ));
    }
    token
        .parse()
        .map_err(|_| parse_error(path, line, format!("integer out of range: {token:?}")))
}

fn parse_i64(path: &Path, line: usize, token: &str) -> Result<i64> {
    token
        .parse()
        .map_err(|_| parse_error(path, line, format!("expected an integer, got {token:?}")))
}

fn mesh_error(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { .. } | Error::Io { .. } => e,
        other => parse_error(path, 0, other.to_string()),
    }
}

/// Loads a mesh in the given format.
pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<MeshFile> {
    let text = read(path)?;
    match format {
        MeshFormat::Medit => parse_medit(&text, path),
        MeshFormat::Obj => parse_obj(&text, path),
    }
}

/// Writes `mesh` with `state` as vertex positions (MEDIT) or texture coordinates (OBJ).
pub fn store_mesh(
    path: &Path,
    mesh: &SimplicialMesh,
    state: Option<&DeformationState>,
    format: MeshFormat,
) -> Result<()> {
    let text = match format {
        MeshFormat::Medit => write_medit(mesh, state)?,
        MeshFormat::Obj => write_obj(mesh, state)?,
    };
    write(path, &text)
}

struct Tokens<'a> {
    path: &'a Path,
    items: Vec<(&'a str, usize)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str, path: &'a Path) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(i, l)| {
                let l = l.split('#').next().unwrap_or("");
                l.split_whitespace().map(move |t| (t, i + 1))
            })
            .collect();
        Tokens { path, items, pos: 0 }
    }

    fn peek(&self) -> Option<(&'a str, usize)> {
        self.items.get(self.pos).copied()
    }

    fn line(&self) -> usize {
        self.items
            .get(self.pos)
            .or_else(|| self.items.last())
            .map_or(1, |t| t.1)
    }

    fn next(&mut self, section: &str) -> Result<(&'a str, usize)> {
        let t = self.peek().ok_or_else(|| {
            parse_error(
                self.path,
                self.line(),
                format!("unexpected end of file in section {section}"),
            )
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn usize(&mut self, section: &str) -> Result<usize> {
        let (t, l) = self.next(section)?;
        parse_usize(self.path, l, t).map_err(|_| {
            parse_error(
                self.path,
                l,
                format!("expected an integer in section {section}, got {t:?}"),
            )
        })
    }

    fn f64(&mut self, section: &str) -> Result<f64> {
        let (t, l) = self.next(section)?;
        parse_finite(self.path, l, t).map_err(|_| {
            parse_error(
                self.path,
                l,
                format!("expected a number in section {section}, got {t:?}"),
            )
        })
    }

    fn int(&mut self, section: &str) -> Result<i64> {
        let (t, l) = self.next(section)?;
        parse_i64(self.path, l, t).map_err(|_| {
            parse_error(
                self.path,
                l,
                format!("expected an integer in section {section}, got {t:?}"),
            )
        })
    }
}

/// Parses MEDIT text. Coordinates become the reference mesh (triangles in `Dimension 3`
/// form a surface); they are also returned as `positions`.
pub fn parse_medit(text: &str, path: &Path) -> Result<MeshFile> {
    let mut tk = Tokens::new(text, path);
    let mut dim = None;
    let mut version = false;
    let mut vertices: Option<Vec<f64>> = None;
    let mut triangles: Option<Vec<[usize; 3]>> = None;
    let mut tets: Option<Vec<[usize; 4]>> = None;
    let mut ended = false;

    while let Some((kw, line)) = tk.peek() {
        tk.pos += 1;
        match kw {
            "MeshVersionFormatted" => {
                if version {
                    return Err(parse_error(path, line, "duplicate MeshVersionFormatted"));
                }
                let v = tk.int(kw)?;
                if !(1..=3).contains(&v) {
                    return Err(parse_error(path, line, format!("unsupported MeshVersionFormatted {v}")));
                }
                version = true;
            }
            "Dimension" => {
                if dim.is_some() {
                    return Err(parse_error(path, line, "duplicate Dimension"));
                }
                let d = tk.usize(kw)?;
                if d != 2 && d != 3 {
                    return Err(parse_error(path, line, format!("Dimension must be 2 or 3, got {d}")));
                }
                dim = Some(d);
            }
            "Vertices" => {
                let d = dim.ok_or_else(|| parse_error(path, line, "Vertices before Dimension"))?;
                if vertices.is_some() {
                    return Err(parse_error(path, line, "duplicate Vertices section"));
                }
                let n = tk.usize(kw)?;
                let mut v = Vec::with_capacity(n.min(1 << 24) * d);
                for _ in 0..n {
                    for _ in 0..d {
                        v.push(tk.f64(kw)?);
                    }
                    tk.int(kw)?;
                }
                vertices = Some(v);
            }
            "Triangles" | "Tetrahedra" => {
                let per = if kw == "Triangles" { 3 } else { 4 };
                let n = tk.usize(kw)?;
                let mut cells = Vec::with_capacity(n.min(1 << 24));
                for _ in 0..n {
                    let mut c = [0usize; 4];
                    for slot in c.iter_mut().take(per) {
                        let (t, l) = tk.next(kw)?;
                        let i = parse_usize(path, l, t)?;
                        if i == 0 {
                            return Err(parse_error(path, l, "MEDIT indices are 1-based"));
                        }
                        *slot = i - 1;
                    }
                    tk.int(kw)?;
                    cells.push(c);
                }
                if per == 3 {
                    if triangles.is_some() {
                        return Err(parse_error(path, line, "duplicate Triangles section"));
                    }
                    triangles = Some(cells.into_iter().map(|c| [c[0], c[1], c[2]]).collect());
                } else {
                    if tets.is_some() {
                        return Err(parse_error(path, line, "duplicate Tetrahedra section"));
                    }
                    tets = Some(cells);
                }
            }
            "Edges" | "Corners" | "Ridges" | "RequiredVertices" => {
                let per = if kw == "Edges" { 3 } else { 1 };
                let n = tk.usize(kw)?;
                for _ in 0..n * per {
                    tk.int(kw)?;
                }
            }
            "End" => {
                ended = true;
                if let Some((t, l)) = tk.peek() {
                    return Err(parse_error(path, l, format!("unexpected {t:?} after End")));
                }
                break;
            }
            other => return Err(parse_error(path, line, format!("unknown keyword {other:?}"))),
        }
    }
    let end_line = tk.line();
    if !ended {
        return Err(parse_error(path, end_line, "missing End"));
    }
    if !version {
        return Err(parse_error(path, 1, "missing MeshVersionFormatted"));
    }
    let d = dim.ok_or_else(|| parse_error(path, 1, "missing Dimension"))?;
    let coords = vertices.ok_or_else(|| parse_error(path, end_line, "missing Vertices section"))?;
    let nv = coords.len() / d;
    let check = |mut cells: std::slice::Iter<'_, usize>| -> Result<()> {
        match cells.find(|&&i| i >= nv) {
            Some(i) => Err(parse_error(
                path,
                end_line,
                format!("element references vertex {} of {nv}", i + 1),
            )),
            None => Ok(()),
        }
    };
    let positions = DeformationState::new(d, coords.clone()).map_err(|e| mesh_error(path, e))?;
    let mesh = match (triangles, tets) {
        (Some(_), Some(_)) => {
            return Err(parse_error(
                path,
                end_line,
                "mixed Triangles and Tetrahedra are not supported",
            ))
        }
        (None, None) => return Err(parse_error(path, end_line, "no Triangles or Tetrahedra section")),
        (Some(t), None) => {
            check(t.as_flattened().iter())?;
            if d == 2 {
                let v = coords.chunks(2).map(|c| [c[0], c[1]]).collect();
                SimplicialMesh::triangles(v, t)
            } else {
                let v = coords.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
                SimplicialMesh::surface(v, t)
            }
        }
        (None, Some(t)) => {
            if d != 3 {
                return Err(parse_error(path, end_line, "Tetrahedra require Dimension 3"));
            }
            check(t.as_flattened().iter())?;
            let v = coords.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            SimplicialMesh::tetrahedra(v, t)
        }
    }
    .map_err(|e| mesh_error(path, e))?;
    Ok(MeshFile {
        mesh,
        state: None,
        positions,
    })
}

fn element_order(mesh: &SimplicialMesh, k: usize) -> Vec<usize> {
    mesh.simplex(k).to_vec()
}

/// MEDIT text with `state` (or the reference coordinates) as vertex positions.
pub fn write_medit(mesh: &SimplicialMesh, state: Option<&DeformationState>) -> Result<String> {
    let (dim, coords): (usize, Vec<f64>) = match state {
        Some(s) => {
            s.check_against(mesh)?;
            (s.dim(), s.coords().to_vec())
        }
        None => (
            mesh.ambient_dim(),
            (0..mesh.vertex_count())
                .flat_map(|i| mesh.ref_vertex(i).to_vec())
                .collect(),
        ),
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "MeshVersionFormatted 2\nDimension {dim}\nVertices\n{}",
        mesh.vertex_count()
    );
    for p in coords.chunks(dim) {
        let line: Vec<String> = p.iter().map(|&x| fmt_f64(x)).collect();
        let _ = writeln!(out, "{} 0", line.join(" "));
    }
    let kw = if mesh.dim() == 2 { "Triangles" } else { "Tetrahedra" };
    let _ = writeln!(out, "{kw}\n{}", mesh.simplex_count());
    for k in 0..mesh.simplex_count() {
        let ids: Vec<String> = element_order(mesh, k).iter().map(|i| (i + 1).to_string()).collect();
        let _ = writeln!(out, "{} 0", ids.join(" "));
    }
    out.push_str("End\n");
    Ok(out)
}

/// Comment written first in every OBJ file, followed by the `v`, `vt` and `f` counts.
const OBJ_COUNTS: &str = "# lowdist-counts";

/// Parses OBJ text with `v`, `vt` and triangular `f` records. Planar files (every
/// `z = 0`) give a planar mesh, others a surface. Texture coordinates, when there is
/// one per vertex and faces pair them with the same indices, become `state`.
///
/// A `# lowdist-counts <v> <vt> <f>` comment, as written by [`write_obj`], is checked
/// against the records read.
pub fn parse_obj(text: &str, path: &Path) -> Result<MeshFile> {
    let mut declared: Option<([usize; 3], usize)> = None;
    let mut v: Vec<[f64; 3]> = Vec::new();
    let mut vt: Vec<[f64; 2]> = Vec::new();
    let mut faces: Vec<([usize; 3], Option<[usize; 3]>, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix(OBJ_COUNTS) {
            let c: Vec<&str> = rest.split_whitespace().collect();
            if c.len() != 3 || declared.is_some() {
                return Err(parse_error(path, line, "malformed counts comment"));
            }
            declared = Some((
                [
                    parse_usize(path, line, c[0])?,
                    parse_usize(path, line, c[1])?,
                    parse_usize(path, line, c[2])?,
                ],
                line,
            ));
            continue;
        }
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        match tokens[0] {
            "v" => {
                if tokens.len() != 4 {
                    return Err(parse_error(path, line, "v needs exactly three coordinates"));
                }
                v.push([
                    parse_finite(path, line, tokens[1])?,
                    parse_finite(path, line, tokens[2])?,
                    parse_finite(path, line, tokens[3])?,
                ]);
            }
            "vt" => {
                if tokens.len() != 3 {
                    return Err(parse_error(path, line, "vt needs exactly two coordinates"));
                }
                vt.push([
                    parse_finite(path, line, tokens[1])?,
                    parse_finite(path, line, tokens[2])?,
                ]);
            }
            "f" => {
                if tokens.len() != 4 {
                    return Err(parse_error(path, line, "only triangular faces are supported"));
                }
                let mut pos = [0usize; 3];
                let mut tex = [0usize; 3];
                let mut with_tex = None;
                for (c, tok) in tokens[1..].iter().enumerate() {
                    let parts: Vec<&str> = tok.split('/').collect();
                    let has = match parts.len() {
                        1 => false,
                        2 => true,
                        _ => return Err(parse_error(path, line, format!("unsupported face vertex {tok:?}"))),
                    };
                    if *with_tex.get_or_insert(has) != has {
                        return Err(parse_error(path, line, "face mixes v and v/vt references"));
                    }
                    let a = parse_usize(path, line, parts[0])?;
                    if a == 0 {
                        return Err(parse_error(path, line, "OBJ indices are 1-based"));
                    }
                    pos[c] = a - 1;
                    if has {
                        let b = parse_usize(path, line, parts[1])?;
                        if b == 0 {
                            return Err(parse_error(path, line, "OBJ indices are 1-based"));
                        }
                        tex[c] = b - 1;
                    }
                }
                faces.push((pos, with_tex.unwrap_or(false).then_some(tex), line));
            }
            other => return Err(parse_error(path, line, format!("unsupported record {other:?}"))),
        }
    }
    if let Some((counts, line)) = declared {
        if counts != [v.len(), vt.len(), faces.len()] {
            return Err(parse_error(
                path,
                line,
                format!(
                    "counts comment declares {counts:?} v/vt/f records, file has [{}, {}, {}]",
                    v.len(),
                    vt.len(),
                    faces.len()
                ),
            ));
        }
    }
    if faces.is_empty() {
        return Err(parse_error(path, text.lines().count().max(1), "no faces"));
    }
    let textured = faces[0].1.is_some();
    for (pos, tex, line) in &faces {
        if tex.is_some() != textured {
            return Err(parse_error(path, *line, "faces disagree on texture coordinates"));
        }
        if let Some(&i) = pos.iter().find(|&&i| i >= v.len()) {
            return Err(parse_error(
                path,
                *line,
                format!("face references vertex {} of {}", i + 1, v.len()),
            ));
        }
        if let Some(t) = tex {
            if let Some(&i) = t.iter().find(|&&i| i >= vt.len()) {
                return Err(parse_error(
                    path,
                    *line,
                    format!("face references vt {} of {}", i + 1, vt.len()),
                ));
            }
            if t != pos {
                return Err(parse_error(path, *line, "vt indices must match v indices"));
            }
        }
    }
    if textured && vt.len() != v.len() {
        return Err(parse_error(
            path,
            1,
            format!("{} vt records for {} vertices", vt.len(), v.len()),
        ));
    }
    if !textured && !vt.is_empty() {
        return Err(parse_error(
            path,
            1,
            "vt records present but faces do not reference them",
        ));
    }
    let tris: Vec<[usize; 3]> = faces.iter().map(|f| f.0).collect();
    let planar = v.iter().all(|p| p[2] == 0.0);
    let (mesh, positions) = if planar {
        let v2: Vec<[f64; 2]> = v.iter().map(|p| [p[0], p[1]]).collect();
        let pos = DeformationState::from_points(&v2);
        (SimplicialMesh::triangles(v2, tris), pos)
    } else {
        let pos = DeformationState::from_points(&v);
        (SimplicialMesh::surface(v, tris), pos)
    };
    let mesh = mesh.map_err(|e| mesh_error(path, e))?;
    let positions = positions.map_err(|e| mesh_error(path, e))?;
    let state = if textured {
        Some(DeformationState::from_points(&vt).map_err(|e| mesh_error(path, e))?)
    } else {
        None
    };
    Ok(MeshFile { mesh, state, positions })
}

/// OBJ text with reference positions as `v` and `state` (2D) as `vt`.
pub fn write_obj(mesh: &SimplicialMesh, state: Option<&DeformationState>) -> Result<String> {
    if mesh.dim() != 2 {
        return Err(Error::InvalidParameter("OBJ output holds triangle meshes only".into()));
    }
    if let Some(s) = state {
        if s.dim() != 2 {
            return Err(Error::InvalidParameter(
                "OBJ texture coordinates are 2D; use MEDIT for 3D states".into(),
            ));
        }
        s.check_against(mesh)?;
    }
    let mut out = String::new();
    let nvt = if state.is_some() { mesh.vertex_count() } else { 0 };
    let _ = writeln!(
        out,
        "{OBJ_COUNTS} {} {nvt} {}",
        mesh.vertex_count(),
        mesh.simplex_count()
    );
    for i in 0..mesh.vertex_count() {
        let p = mesh.ref_vertex(i);
        let z = p.get(2).copied().unwrap_or(0.0);
        let _ = writeln!(out, "v {} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(z));
    }
    if let Some(s) = state {
        for i in 0..mesh.vertex_count() {
            let p = s.point(i);
            let _ = writeln!(out, "vt {} {}", fmt_f64(p[0]), fmt_f64(p[1]));
        }
    }
    for k in 0..mesh.simplex_count() {
        let ids = element_order(mesh, k);
        if state.is_some() {
            let _ = writeln!(out, "f {0}/{0} {1}/{1} {2}/{2}", ids[0] + 1, ids[1] + 1, ids[2] + 1);
        } else {
            let _ = writeln!(out, "f {} {} {}", ids[0] + 1, ids[1] + 1, ids[2] + 1);
        }
    }
    Ok(out)
}

/// Reads an initial state for `mesh` from a mesh file with the same vertex count:
/// OBJ texture coordinates if present, otherwise the stored vertex positions.
pub fn load_state(path: &Path, mesh: &SimplicialMesh) -> Result<DeformationState> {
    let file = load_mesh(path, MeshFormat::from_path(path)?)?;
    let state = file.state.unwrap_or(file.positions);
    state.check_against(mesh).map_err(|e| {
        Error::InvalidParameter(format!("{}: initial state does not fit the mesh: {e}", path.display()))
    })?;
    Ok(state)
}

/// Constraints as read from a file; singularity entries need the mesh to expand.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstraintFile {
    pub set: ConstraintSet,
    pub singularities: Vec<(usize, FractionalIndex)>,
}

impl ConstraintFile {
    /// Validates indices against `mesh` and expands singularities into one-ring rows.
    pub fn resolve(&self, mesh: &SimplicialMesh) -> Result<ConstraintSet> {
        let mut set = self.set.clone();
        set.check_indices(mesh.vertex_count())?;
        for &(v, index) in &self.singularities {
            if v >= mesh.vertex_count() {
                return Err(Error::InvalidParameter(format!(
                    "singularity at vertex {v} of {}",
                    mesh.vertex_count()
                )));
            }
            set.add_index_preservation(mesh, v, index)?;
        }
        Ok(set)
    }
}

/// Parses the line-oriented constraint format (0-based vertex indices):
/// `lock v x y [z]`, `affine b n (coef v axis)×n`, `singularity v num/den`.
/// An optional `counts locks affines singularities` line is checked against the entries read.
pub fn parse_constraints(text: &str, dim: usize, path: &Path) -> Result<ConstraintFile> {
    let mut declared: Option<([usize; 3], usize)> = None;
    let mut file = ConstraintFile {
        set: ConstraintSet::new(dim),
        singularities: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let t: Vec<&str> = trimmed.split_whitespace().collect();
        match t[0] {
            "lock" => {
                if t.len() != 2 + dim {
                    return Err(parse_error(
                        path,
                        line,
                        format!("lock needs a vertex and {dim} coordinates"),
                    ));
                }
                let v = parse_usize(path, line, t[1])?;
                let p: Vec<f64> = t[2..]
                    .iter()
                    .map(|s| parse_finite(path, line, s))
                    .collect::<Result<_>>()?;
                file.set.lock(v, &p);
            }
            "affine" => {
                if t.len() < 3 {
                    return Err(parse_error(
                        path,
                        line,
                        "affine needs a right-hand side and a term count",
                    ));
                }
                let b = parse_finite(path, line, t[1])?;
                let n = parse_usize(path, line, t[2])?;
                if n == 0 || t.len() != 3 + 3 * n {
                    return Err(parse_error(
                        path,
                        line,
                        format!("affine declares {n} terms but has {} tokens", t.len() - 3),
                    ));
                }
                let mut terms = Vec::with_capacity(n);
                for c in t[3..].chunks(3) {
                    let coef = parse_finite(path, line, c[0])?;
                    let v = parse_usize(path, line, c[1])?;
                    let axis = parse_usize(path, line, c[2])?;
                    if axis >= dim {
                        return Err(parse_error(
                            path,
                            line,
                            format!("axis {axis} out of range for dimension {dim}"),
                        ));
                    }
                    terms.push((v, axis, coef));
                }
                file.set.add_row(AffineRow::new(terms, b));
            }
            "singularity" => {
                if t.len() != 3 {
                    return Err(parse_error(
                        path,
                        line,
                        "singularity needs a vertex and an index num/den",
                    ));
                }
                let v = parse_usize(path, line, t[1])?;
                let (n, d) = t[2]
                    .split_once('/')
                    .ok_or_else(|| parse_error(path, line, format!("expected num/den, got {:?}", t[2])))?;
                let index = FractionalIndex::new(parse_i64(path, line, n)?, parse_i64(path, line, d)?)
                    .map_err(|e| parse_error(path, line, e.to_string()))?;
                file.singularities.push((v, index));
            }
            "counts" => {
                if t.len() != 4 || declared.is_some() {
                    return Err(parse_error(
                        path,
                        line,
                        "counts needs three integers and may appear once",
                    ));
                }
                declared = Some((
                    [
                        parse_usize(path, line, t[1])?,
                        parse_usize(path, line, t[2])?,
                        parse_usize(path, line, t[3])?,
                    ],
                    line,
                ));
            }
            other => return Err(parse_error(path, line, format!("unknown constraint {other:?}"))),
        }
    }
    if let Some((counts, line)) = declared {
        let found = [file.set.locked().len(), file.set.rows().len(), file.singularities.len()];
        if counts != found {
            return Err(parse_error(
                path,
                line,
                format!("counts declares {counts:?} entries, file has {found:?}"),
            ));
        }
    }
    Ok(file)
}

pub fn load_constraints(path: &Path, dim: usize) -> Result<ConstraintFile> {
    parse_constraints(&read(path)?, dim, path)
}

pub fn write_constraints(file: &ConstraintFile) -> String {
    let mut out = format!(
        "counts {} {} {}\n",
        file.set.locked().len(),
        file.set.rows().len(),
        file.singularities.len()
    );
    for (v, p) in file.set.locked() {
        let coords: Vec<String> = p.iter().map(|&x| fmt_f64(x)).collect();
        let _ = writeln!(out, "lock {v} {}", coords.join(" "));
    }
    for row in file.set.rows() {
        let terms: Vec<String> = row
            .terms
            .iter()
            .map(|&(v, a, c)| format!("{} {v} {a}", fmt_f64(c)))
            .collect();
        let _ = writeln!(
            out,
            "affine {} {} {}",
            fmt_f64(row.rhs),
            row.terms.len(),
            terms.join(" ")
        );
    }
    for (v, index) in &file.singularities {
        let _ = writeln!(out, "singularity {v} {index}");
    }
    out
}

pub const REPORT_HEADER: &str = "iter,param,objective,f_max,d_min,inner_iters,sigma";
pub const HISTOGRAM_HEADER: &str = "bin_lo,bin_hi,count_condition,count_det";

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// The report CSV: header, one row per record, then the summary comment line if given.
pub fn format_report<'a>(rows: impl IntoIterator<Item = &'a ReportRow>, summary: Option<&Summary>) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.iter,
            fmt_f64(r.param),
            fmt_f64(r.objective),
            fmt_f64(r.f_max),
            fmt_f64(r.d_min),
            r.inner_iters,
            fmt_opt(r.sigma)
        );
    }
    if let Some(s) = summary {
        out.push_str(&summary_line(s));
    }
    out
}

pub fn format_histogram(h: &Histogram) -> String {
    let mut out = String::from(HISTOGRAM_HEADER);
    out.push('\n');
    for i in 0..h.bins() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(h.edges[i]),
            fmt_f64(h.edges[i + 1]),
            h.count_condition[i],
            h.count_det[i]
        );
    }
    out
}

/// Path of the histogram CSV written next to a report: `run.csv` → `run.hist.csv`.
pub fn histogram_path(report: &Path) -> PathBuf {
    let stem = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    report.with_file_name(format!("{stem}.hist.csv"))
}

/// Writes the report CSV and, when statistics are given, the companion histogram CSV.
pub fn write_report(
    path: &Path,
    reports: &[&ContinuationReport],
    stats: Option<&QualityStats>,
    summary: Option<&Summary>,
) -> Result<()> {
    let text = format_report(reports.iter().flat_map(|r| r.rows()), summary);
    write(path, &text)?;
    if let Some(stats) = stats {
        write(&histogram_path(path), &format_histogram(&stats.histogram))?;
    }
    Ok(())
}

pub const QUALITY_HEADER: &str = "element,sigma_max,sigma_min,condition,det";

/// Per-element quality CSV, followed by the summary line if given.
pub fn format_quality(stats: &QualityStats, summary: Option<&Summary>) -> String {
    let mut out = String::from(QUALITY_HEADER);
    out.push('\n');
    for (k, q) in stats.elements.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k},{},{},{},{}",
            fmt_f64(q.sigma_max),
            fmt_f64(q.sigma_min),
            fmt_f64(q.condition),
            fmt_f64(q.det)
        );
    }
    if let Some(s) = summary {
        out.push_str(&summary_line(s));
    }
    out
}

fn summary_line(s: &Summary) -> String {
    format!(
        "# summary gamma={} gamma_bound={} t={} f_max={} d_min={}\n",
        fmt_opt(s.gamma),
        fmt_opt(s.gamma_bound),
        fmt_opt(s.t),
        fmt_f64(s.f_max),
        fmt_f64(s.d_min)
    )
}

/// Writes the per-element quality CSV and its companion histogram CSV.
pub fn write_quality(path: &Path, stats: &QualityStats, summary: Option<&Summary>) -> Result<()> {
    write(path, &format_quality(stats, summary))?;
    write(&histogram_path(path), &format_histogram(&stats.histogram))
}

fn parse_optional(path: &Path, line: usize, token: &str) -> Result<Option<f64>> {
    if token.is_empty() {
        Ok(None)
    } else {
        parse_number(path, line, token).map(Some)
    }
}

/// Like [`parse_finite`] but accepts `inf`, which the drivers report for inverted states.
fn parse_number(path: &Path, line: usize, token: &str) -> Result<f64> {
    match f64::from_str(token) {
        Ok(v) if !v.is_nan() && token.bytes().all(|b| b.is_ascii_digit() || b".+-eEinf".contains(&b)) => Ok(v),
        _ => Err(parse_error(path, line, format!("expected a number, got {token:?}"))),
    }
}

/// Parses a report CSV back into rows and its summary line.
pub fn parse_report(text: &str, path: &Path) -> Result<(Vec<ReportRow>, Option<Summary>)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == REPORT_HEADER => {}
        _ => return Err(parse_error(path, 1, "missing report header")),
    }
    let mut rows = Vec::new();
    let mut summary = None;
    for (i, l) in lines {
        let line = i + 1;
        if summary.is_some() {
            return Err(parse_error(path, line, "content after the summary line"));
        }
        if let Some(rest) = l.strip_prefix("# summary ") {
            let fields: Vec<&str> = rest.split(' ').collect();
            let keys = ["gamma", "gamma_bound", "t", "f_max", "d_min"];
            if fields.len() != keys.len() {
                return Err(parse_error(path, line, "malformed summary line"));
            }
            let mut values = Vec::with_capacity(5);
            for (f, k) in fields.iter().zip(keys) {
                let v = f
                    .strip_prefix(k)
                    .and_then(|s| s.strip_prefix('='))
                    .ok_or_else(|| parse_error(path, line, format!("expected {k}=")))?;
                values.push(parse_optional(path, line, v)?);
            }
            let need = |v: Option<f64>, k: &str| v.ok_or_else(|| parse_error(path, line, format!("{k} is required")));
            summary = Some(Summary {
                gamma: values[0],
                gamma_bound: values[1],
                t: values[2],
                f_max: need(values[3], "f_max")?,
                d_min: need(values[4], "d_min")?,
            });
            continue;
        }
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 7 {
            return Err(parse_error(path, line, format!("expected 7 fields, got {}", f.len())));
        }
        rows.push(ReportRow {
            iter: parse_usize(path, line, f[0])?,
            param: parse_number(path, line, f[1])?,
            objective: parse_number(path, line, f[2])?,
            f_max: parse_number(path, line, f[3])?,
            d_min: parse_number(path, line, f[4])?,
            inner_iters: parse_usize(path, line, f[5])?,
            sigma: parse_optional(path, line, f[6])?,
        });
    }
    Ok((rows, summary))
}

pub fn load_report(path: &Path) -> Result<(Vec<ReportRow>, Option<Summary>)> {
    parse_report(&read(path)?, path)
}

/// Parses a histogram CSV.
pub fn parse_histogram(text: &str, path: &Path) -> Result<Histogram> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HISTOGRAM_HEADER => {}
        _ => return Err(parse_error(path, 1, "missing histogram header")),
    }
    let mut edges = Vec::new();
    let mut count_condition = Vec::new();
    let mut count_det = Vec::new();
    for (i, l) in lines {
        let line = i + 1;
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 4 {
            return Err(parse_error(path, line, format!("expected 4 fields, got {}", f.len())));
        }
        let lo = parse_finite(path, line, f[0])?;
        let hi = parse_finite(path, line, f[1])?;
        match edges.last() {
            None => edges.push(lo),
            Some(&prev) if prev == lo => {}
            Some(_) => return Err(parse_error(path, line, "bins are not contiguous")),
        }
        if !(hi > lo) {
            return Err(parse_error(path, line, "empty bin"));
        }
        edges.push(hi);
        count_condition.push(parse_usize(path, line, f[2])?);
        count_det.push(parse_usize(path, line, f[3])?);
    }
    Ok(Histogram {
        edges,
        count_condition,
        count_det,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::report::{IterationRecord, Phase, RunStatus};

    fn p() -> &'static Path {
        Path::new("test")
    }

    const MINIMAL: &str =
        "MeshVersionFormatted 2\nDimension 2\nVertices\n3\n0 0 0\n1 0 0\n0 1 0\nTriangles\n1\n1 2 3 0\nEnd\n";

    #[test]
    fn minimal_medit() {
        let f = parse_medit(MINIMAL, p()).unwrap();
        assert_eq!(f.mesh.simplex_count(), 1);
        assert_eq!(f.mesh.vertex_count(), 3);
    }

    #[test]
    fn truncated_medit_names_section() {
        let cut = &MINIMAL[..MINIMAL.find("0 1 0").unwrap()];
        match parse_medit(cut, p()) {
            Err(Error::Parse { message, line, .. }) => {
                assert!(message.contains("Vertices"), "{message}");
                assert_eq!(line, 6);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn medit_rejects_bad_input() {
        let mixed = MINIMAL.replace("End", "Tetrahedra\n1\n1 2 3 3 0\nEnd");
        assert!(parse_medit(&mixed, p()).is_err());
        assert!(parse_medit(&MINIMAL.replace("End\n", ""), p()).is_err());
        assert!(parse_medit(&MINIMAL.replace("1 2 3 0", "0 1 2 0"), p()).is_err());
        assert!(parse_medit(&MINIMAL.replace("1 2 3 0", "1 2 4 0"), p()).is_err());
        assert!(parse_medit(&MINIMAL.replace("Vertices", "Vertexes"), p()).is_err());
        assert!(parse_medit(&MINIMAL.replace("1 0 0", "inf 0 0"), p()).is_err());
        let with_edges = MINIMAL.replace("End", "Edges\n1\n1 2 0\nCorners\n1\n1\nEnd");
        assert!(parse_medit(&with_edges, p()).is_ok());
    }

    #[test]
    fn medit_round_trip_is_exact() {
        let prob = generators::twisted_bar(3, 2, 2, 2.0, 0.3).unwrap();
        let text = write_medit(&prob.mesh, Some(&prob.initial)).unwrap();
        let back = parse_medit(&text, p()).unwrap();
        assert_eq!(back.positions, prob.initial);
        assert_eq!(back.mesh.simplex_count(), prob.mesh.simplex_count());
        for k in 0..prob.mesh.simplex_count() {
            assert_eq!(back.mesh.simplex(k), prob.mesh.simplex(k));
        }
        let reference = write_medit(&prob.mesh, None).unwrap();
        let again = parse_medit(&reference, p()).unwrap();
        assert_eq!(write_medit(&again.mesh, None).unwrap(), reference);
    }

    #[test]
    fn obj_square_with_uv() {
        let text = "# square\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvt 2 0\nvt 2 2\nvt 0 2\nf 1/1 2/2 3/3\nf 1/1 3/3 4/4\n";
        let f = parse_obj(text, p()).unwrap();
        assert_eq!(f.mesh.simplex_count(), 2);
        assert!(!f.mesh.is_surface());
        let s = f.state.unwrap();
        assert_eq!(s.point(2), &[2.0, 2.0]);
        let out = write_obj(&f.mesh, Some(&s)).unwrap();
        let back = parse_obj(&out, p()).unwrap();
        assert_eq!(back.state.unwrap(), s);
        assert_eq!(back.positions, f.positions);
    }

    #[test]
    fn obj_errors() {
        assert!(parse_obj("v 0 0 0\nv 1 0 0\nf 1 2 3\n", p()).is_err());
        assert!(parse_obj("v 0 0\nf 1 1 1\n", p()).is_err());
        assert!(parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 3/1\n", p()).is_err());
        assert!(parse_obj("o x\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n", p()).is_err());
        assert!(parse_obj("# lowdist-counts 3 0 2\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n", p()).is_err());
        let surface = generators::half_sphere(2).unwrap();
        let text = write_obj(&surface.mesh, Some(&surface.initial)).unwrap();
        let back = parse_obj(&text, p()).unwrap();
        assert!(back.mesh.is_surface());
        let bar = generators::twisted_bar(1, 1, 1, 1.0, 0.0).unwrap();
        assert!(write_obj(&bar.mesh, None).is_err());
        let m = generators::grid(2, 2).unwrap();
        let s3 = DeformationState::new(3, vec![0.0; 27]).unwrap();
        assert!(write_obj(&m, Some(&s3)).is_err());
    }

    #[test]
    fn constraint_file_round_trip() {
        let text = "# comment\nlock 0 0.5 1\naffine 1 2 1 3 0 -1 4 1\nsingularity 4 -1/4\n";
        let f = parse_constraints(text, 2, p()).unwrap();
        assert_eq!(f.set.locked().len(), 1);
        assert_eq!(f.set.rows()[0].terms, vec![(3, 0, 1.0), (4, 1, -1.0)]);
        assert_eq!(f.singularities, vec![(4, FractionalIndex::new(-1, 4).unwrap())]);
        let back = parse_constraints(&write_constraints(&f), 2, p()).unwrap();
        assert_eq!(back, f);
        match parse_constraints("lock 0 1\n", 2, p()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        assert!(parse_constraints("affine 1 2 1 0 0\n", 2, p()).is_err());
        assert!(parse_constraints("affine 1 1 1 0 2\n", 2, p()).is_err());
        assert!(parse_constraints("singularity 1 1/0\n", 2, p()).is_err());
        assert!(parse_constraints("counts 1 0 0\n# lock 0 1 1\n", 2, p()).is_err());
        assert!(parse_constraints("counts 1 0 0\nlock 0 1 1\n", 2, p()).is_ok());
    }

    #[test]
    fn constraint_indices_are_validated_against_mesh() {
        let m = generators::grid(2, 2).unwrap();
        let f = parse_constraints("lock 9 0 0\n", 2, p()).unwrap();
        assert!(f.resolve(&m).is_err());
        let f = parse_constraints("singularity 4 0/1\n", 2, p()).unwrap();
        assert_eq!(f.resolve(&m).unwrap().rows().len(), 12);
    }

    fn record(iter: usize, sigma: Option<f64>) -> IterationRecord {
        IterationRecord {
            row: ReportRow {
                iter,
                param: 0.25,
                objective: 1.5,
                f_max: 1.1,
                d_min: 0.3,
                inner_iters: 12,
                sigma,
            },
            start_objective: 2.0,
            next_param: 0.5,
            next_objective: 1.7,
        }
    }

    #[test]
    fn report_round_trip() {
        assert_eq!(format_report(std::iter::empty(), None), format!("{REPORT_HEADER}\n"));
        let rep = ContinuationReport {
            phase: Phase::Stiffen,
            records: vec![record(0, Some(0.1))],
            status: RunStatus::Converged,
        };
        let summary = Summary {
            gamma: None,
            gamma_bound: None,
            t: Some(0.5),
            f_max: 1.1,
            d_min: 0.3,
        };
        let text = format_report(rep.rows(), Some(&summary));
        assert_eq!(text.lines().count(), 3);
        assert!(text
            .lines()
            .last()
            .unwrap()
            .starts_with("# summary gamma= gamma_bound= t="));
        let (rows, s) = parse_report(&text, p()).unwrap();
        assert_eq!(rows, vec![rep.records[0].row]);
        assert_eq!(s.unwrap(), summary);
        let untangle = format_report([record(0, None).row].iter(), None);
        assert_eq!(parse_report(&untangle, p()).unwrap().0[0].sigma, None);
    }

    #[test]
    fn histogram_round_trip() {
        let prob = generators::tangled_grid(6, 0.3, 2).unwrap();
        let stats =
            crate::quality::quality_stats(&prob.mesh, &prob.initial, crate::energy::Density::MixedShapeVolume, 0.5)
                .unwrap();
        let text = format_histogram(&stats.histogram);
        assert_eq!(parse_histogram(&text, p()).unwrap(), stats.histogram);
    }

    #[test]
    fn files_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let prob = generators::half_sphere(3).unwrap();
        let path = dir.path().join("hs.obj");
        store_mesh(
            &path,
            &prob.mesh,
            Some(&prob.initial),
            MeshFormat::from_path(&path).unwrap(),
        )
        .unwrap();
        let back = load_mesh(&path, MeshFormat::Obj).unwrap();
        assert_eq!(back.state.unwrap(), prob.initial);
        assert_eq!(load_state(&path, &prob.mesh).unwrap(), prob.initial);
        assert!(matches!(
            load_mesh(&dir.path().join("missing.mesh"), MeshFormat::Medit),
            Err(Error::Io { .. })
        ));
        assert!(MeshFormat::from_path(Path::new("a.vtk")).is_err());
    }
}
