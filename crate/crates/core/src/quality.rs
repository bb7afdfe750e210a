//! Element quality: singular values, condition numbers, the measured quasi-isometry
//! constant and the certified bounds implied by `f < 1/t`.

use std::f64::consts::TAU;

use nalgebra::Matrix3;

use crate::assembly::map_indexed;
use crate::energy::{distortion, Density};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::mesh::{jacobian, DeformationState, SimplicialMesh};

/// Singular values in decreasing order.
pub fn singular_values(j: &Mat) -> Vec<f64> {
    if j.dim() == 2 {
        let (a, b, c, d) = (j[(0, 0)], j[(0, 1)], j[(1, 0)], j[(1, 1)]);
        let q = (0.5 * (a + d)).hypot(0.5 * (c - b));
        let r = (0.5 * (a - d)).hypot(0.5 * (c + b));
        vec![q + r, (q - r).abs()]
    } else {
        let m = Matrix3::from_fn(|r, c| j[(r, c)]);
        let mut s: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
        s.sort_by(|x, y| y.total_cmp(x));
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementQuality {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub condition: f64,
    pub det: f64,
}

impl ElementQuality {
    pub fn of(j: &Mat) -> Self {
        let s = singular_values(j);
        let (sigma_max, sigma_min) = (s[0], s[s.len() - 1]);
        ElementQuality {
            sigma_max,
            sigma_min,
            condition: sigma_max / sigma_min,
            det: j.det(),
        }
    }
}

/// Log-binned counts over `[2⁻¹⁰, 2¹⁰]`; out-of-range values land in the end bins.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub count_condition: Vec<usize>,
    pub count_det: Vec<usize>,
}

pub const HISTOGRAM_MIN_EXP: i32 = -10;
pub const HISTOGRAM_MAX_EXP: i32 = 10;

fn log2_bin(value: f64) -> usize {
    let bins = (HISTOGRAM_MAX_EXP - HISTOGRAM_MIN_EXP) as usize;
    if !(value > 0.0) {
        return 0;
    }
    let e = value.log2().floor() - HISTOGRAM_MIN_EXP as f64;
    e.clamp(0.0, (bins - 1) as f64) as usize
}

impl Histogram {
    pub fn from_elements(elements: &[ElementQuality]) -> Self {
        let edges: Vec<f64> = (HISTOGRAM_MIN_EXP..=HISTOGRAM_MAX_EXP).map(|e| 2f64.powi(e)).collect();
        let bins = edges.len() - 1;
        let mut count_condition = vec![0; bins];
        let mut count_det = vec![0; bins];
        for q in elements {
            let c = if q.condition.is_finite() { q.condition } else { f64::MAX };
            count_condition[log2_bin(c)] += 1;
            count_det[log2_bin(q.det)] += 1;
        }
        Histogram {
            edges,
            count_condition,
            count_det,
        }
    }

    pub fn bins(&self) -> usize {
        self.count_condition.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityStats {
    pub elements: Vec<ElementQuality>,
    /// Largest density value; `+∞` with inverted elements.
    pub f_max: f64,
    pub d_min: f64,
    pub max_condition: f64,
    pub inverted: usize,
    /// `sqrt(max σ₁ / min σ_d)`, absent with inverted elements.
    pub measured_gamma: Option<f64>,
    pub histogram: Histogram,
}

/// Computes per-element and global statistics for `state`.
pub fn quality_stats(
    mesh: &SimplicialMesh,
    state: &DeformationState,
    density: Density,
    theta: f64,
) -> Result<QualityStats> {
    state.check_against(mesh)?;
    let per = map_indexed(mesh.simplex_count(), |k| {
        let j = jacobian(mesh, state, k);
        (
            ElementQuality::of(&j),
            distortion(&j, density, theta).unwrap_or(f64::INFINITY),
        )
    });
    let elements: Vec<ElementQuality> = per.iter().map(|p| p.0).collect();
    let f_max = per.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let d_min = elements.iter().map(|q| q.det).fold(f64::INFINITY, f64::min);
    let max_condition = elements.iter().map(|q| q.condition).fold(0.0, f64::max);
    let inverted = elements.iter().filter(|q| q.det <= 0.0).count();
    let histogram = Histogram::from_elements(&elements);
    let mut stats = QualityStats {
        elements,
        f_max,
        d_min,
        max_condition,
        inverted,
        measured_gamma: None,
        histogram,
    };
    stats.measured_gamma = measured_gamma(&stats).ok();
    Ok(stats)
}

/// Best-scaling quasi-isometry estimate `sqrt(max σ₁ / min σ_d)`.
pub fn measured_gamma(stats: &QualityStats) -> Result<f64> {
    if stats.inverted > 0 {
        return Err(Error::InvertedElements(stats.inverted));
    }
    let smax = stats.elements.iter().map(|q| q.sigma_max).fold(0.0, f64::max);
    let smin = stats.elements.iter().map(|q| q.sigma_min).fold(f64::INFINITY, f64::min);
    Ok((smax / smin).sqrt())
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("t must lie in (0, 1), got {t}")))
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 2 || d == 3 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {d}")))
    }
}

fn arccosh_exp(c: f64) -> f64 {
    c + (c * c - 1.0).max(0.0).sqrt()
}

/// Upper bound on `Γ` for any map with mixed density `f < 1/t`.
pub fn gamma_bound_mixed(t: f64, theta: f64, d: usize) -> Result<f64> {
    check_t(t)?;
    check_dim(d)?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "the distortion bound needs 0 < theta < 1, got {theta}"
        )));
    }
    let df = d as f64;
    let c1 = ((1.0 - t * theta) / (t * (1.0 - theta))).powf(df / 2.0);
    let c2 = 1.0 + (1.0 - t) / (t * theta);
    Ok(arccosh_exp(c1).powf((df - 1.0) / df) * arccosh_exp(c2).powf(1.0 / df))
}

/// Upper bound on `Γ` for any map with symmetric Dirichlet density `f < 1/t`.
pub fn gamma_bound_sd(t: f64, d: usize) -> Result<f64> {
    check_t(t)?;
    check_dim(d)?;
    let c3 = 1.0 + d as f64 * (1.0 - t) / t;
    Ok(arccosh_exp(c3))
}

pub fn gamma_bound(density: Density, t: f64, theta: f64, d: usize) -> Result<f64> {
    match density {
        Density::MixedShapeVolume => gamma_bound_mixed(t, theta, d),
        Density::SymmetricDirichlet => gamma_bound_sd(t, d),
    }
}

/// Elements whose singular values leave `[1/bound, bound]`.
pub fn bound_violations(stats: &QualityStats, bound: f64) -> usize {
    stats
        .elements
        .iter()
        .filter(|q| q.sigma_max > bound || q.sigma_min < 1.0 / bound || q.det <= 0.0)
        .count()
}

/// Number of turns a closed polygon makes around `point`.
pub fn winding_number(polygon: &[[f64; 2]], point: [f64; 2]) -> f64 {
    let n = polygon.len();
    let mut total = 0.0;
    for i in 0..n {
        let a = [polygon[i][0] - point[0], polygon[i][1] - point[1]];
        let b = [polygon[(i + 1) % n][0] - point[0], polygon[(i + 1) % n][1] - point[1]];
        total += (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
    }
    total / TAU
}

/// Total turning of the tangent of a closed polygon, in turns.
pub fn turning_number(polygon: &[[f64; 2]]) -> f64 {
    let n = polygon.len();
    let mut total = 0.0;
    for i in 0..n {
        let p = polygon[i];
        let q = polygon[(i + 1) % n];
        let r = polygon[(i + 2) % n];
        let a = [q[0] - p[0], q[1] - p[1]];
        let b = [r[0] - q[0], r[1] - q[1]];
        total += (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
    }
    total / TAU
}

/// Discrete index at an interior vertex of a planar map: `1 - (image angle sum)/2π`.
pub fn vertex_index(mesh: &SimplicialMesh, state: &DeformationState, vertex: usize) -> f64 {
    let mut sum = 0.0;
    for s in mesh.simplices() {
        if let Some(p) = s.iter().position(|&v| v == vertex) {
            let o = state.point(vertex);
            let a = state.point(s[(p + 1) % 3]);
            let b = state.point(s[(p + 2) % 3]);
            let u = [a[0] - o[0], a[1] - o[1]];
            let w = [b[0] - o[0], b[1] - o[1]];
            sum += (u[0] * w[1] - u[1] * w[0]).atan2(u[0] * w[0] + u[1] * w[1]);
        }
    }
    1.0 - sum / TAU
}
