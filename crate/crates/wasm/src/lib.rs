//! Browser demo: untangle a random grid, stiffen a flattening, and plot the distortion
//! bound against `t`. Geometry crosses the boundary as flat `f64`/`u32` arrays.

use lowdist::generators::{self, Problem};
use lowdist::quality::{gamma_bound, quality_stats};
use lowdist::{stiffen, untangle, Density, StiffenConfig, Summary, UntangleConfig};
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Demo {
    problem: Problem,
    state: lowdist::DeformationState,
    t: Option<f64>,
    iterations: Vec<f64>,
}

#[wasm_bindgen]
impl Demo {
    /// An `n × n` grid with a `fraction` of interior vertices scattered, boundary held.
    #[wasm_bindgen(js_name = tangledGrid)]
    pub fn tangled_grid(n: usize, fraction: f64, seed: u32) -> Result<Demo, String> {
        let problem = generators::tangled_grid(n.clamp(2, 60), fraction, seed as u64).map_err(|e| e.to_string())?;
        Ok(Demo::from_problem(problem))
    }

    /// A half-sphere with `rings` latitude rings, starting from its vertical projection.
    #[wasm_bindgen(js_name = halfSphere)]
    pub fn half_sphere(rings: usize) -> Result<Demo, String> {
        let problem = generators::half_sphere(rings.clamp(2, 30)).map_err(|e| e.to_string())?;
        Ok(Demo::from_problem(problem))
    }

    /// A square with one bulging side mapped onto the unit square.
    #[wasm_bindgen(js_name = arcSquare)]
    pub fn arc_square(n: usize, amplitude: f64) -> Result<Demo, String> {
        let problem = generators::arc_square(n.clamp(2, 60), amplitude).map_err(|e| e.to_string())?;
        Ok(Demo::from_problem(problem))
    }

    fn from_problem(problem: Problem) -> Demo {
        let state = problem.initial.clone();
        Demo {
            problem,
            state,
            t: None,
            iterations: Vec::new(),
        }
    }

    /// Runs the untangling continuation and returns the summary line.
    pub fn untangle(&mut self, theta: f64) -> Result<String, String> {
        let config = UntangleConfig {
            theta,
            ..Default::default()
        };
        let p = &self.problem;
        let out = untangle(&p.mesh, &self.state, &p.constraints, &config).map_err(|e| e.to_string())?;
        self.iterations = out.report.rows().map(|r| r.d_min).collect();
        self.state = out.state;
        self.t = None;
        self.summary(theta)
    }

    /// Runs stiffening from the current (untangled) map and returns the summary line.
    pub fn stiffen(&mut self, theta: f64) -> Result<String, String> {
        let config = StiffenConfig {
            theta,
            ..Default::default()
        };
        let p = &self.problem;
        let out = stiffen(&p.mesh, &self.state, &p.constraints, &config).map_err(|e| e.to_string())?;
        self.iterations = out.report.rows().map(|r| r.param).collect();
        self.state = out.state;
        self.t = Some(out.terminal_t);
        self.summary(theta)
    }

    pub fn reset(&mut self) {
        self.state = self.problem.initial.clone();
        self.t = None;
        self.iterations.clear();
    }

    fn summary(&self, theta: f64) -> Result<String, String> {
        let density = Density::MixedShapeVolume;
        let p = &self.problem;
        let stats = quality_stats(&p.mesh, &self.state, density, theta).map_err(|e| e.to_string())?;
        Ok(Summary::new(&stats, density, theta, p.mesh.dim(), self.t).line())
    }

    /// Current map as `x0, y0, x1, y1, ...`.
    pub fn positions(&self) -> Vec<f64> {
        self.state.coords().to_vec()
    }

    /// Triangle corners as vertex indices, three per triangle.
    pub fn triangles(&self) -> Vec<u32> {
        self.problem.mesh.simplices().flatten().map(|&v| v as u32).collect()
    }

    /// Per-triangle condition number of the current map; `-1` marks inverted triangles.
    pub fn conditions(&self) -> Vec<f64> {
        let p = &self.problem;
        match quality_stats(&p.mesh, &self.state, Density::MixedShapeVolume, 0.5) {
            Ok(stats) => stats
                .elements
                .iter()
                .map(|q| if q.det > 0.0 { q.condition } else { -1.0 })
                .collect(),
            Err(_) => Vec::new(),
        }
    }

    /// `d_min` per untangling iteration or `t` per stiffening iteration of the last run.
    pub fn trace(&self) -> Vec<f64> {
        self.iterations.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn t(&self) -> Option<f64> {
        self.t
    }
}

/// Samples `gamma_bound` on `t ∈ (0, 1)`, returning `t0, Γ0, t1, Γ1, ...`.
/// Undefined points (θ at the ends of `[0, 1]` for the mixed density) are skipped.
#[wasm_bindgen(js_name = boundCurve)]
pub fn bound_curve(theta: f64, symmetric_dirichlet: bool, samples: usize) -> Vec<f64> {
    let density = if symmetric_dirichlet {
        Density::SymmetricDirichlet
    } else {
        Density::MixedShapeVolume
    };
    let n = samples.clamp(2, 2000);
    (1..n)
        .map(|i| i as f64 / n as f64)
        .filter_map(|t| gamma_bound(density, t, theta, 2).ok().map(|g| [t, g]))
        .flatten()
        .collect()
}
