//! Total energies over a mesh and their gradients with respect to free variables.
//!
//! Element contributions are computed independently (in parallel with the `parallel`
//! feature) and combined in element order with a pairwise sum, so results do not depend
//! on the thread count.

use crate::constraints::Reduction;
use crate::energy::{self, Density, EnergyParams};
use crate::error::{Error, Result};
use crate::mesh::{jacobian_from_coords, DeformationState, SimplicialMesh};

#[derive(Clone, Debug)]
pub struct ObjectiveValue {
    pub value: f64,
    /// Gradient over free variables; empty when only the value was requested.
    pub gradient: Vec<f64>,
    pub finite: bool,
    /// Largest unstiffened, unregularized element distortion (`+∞` if any element is inverted).
    pub f_max: f64,
    /// Smallest Jacobian determinant.
    pub d_min: f64,
}

/// Maps `f` over `0..n`, returning results in index order.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sum with a fixed pairwise association order.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        values.iter().sum()
    } else {
        let (a, b) = values.split_at(values.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

struct ElementTerm {
    value: f64,
    finite: bool,
    f: f64,
    det: f64,
    vertex_grad: [[f64; 3]; 4],
}

/// An energy over a mesh, parameterized by the free variables of a [`Reduction`].
#[derive(Clone, Copy, Debug)]
pub struct Objective<'a> {
    mesh: &'a SimplicialMesh,
    reduction: &'a Reduction,
    params: EnergyParams,
}

impl<'a> Objective<'a> {
    pub fn new(mesh: &'a SimplicialMesh, reduction: &'a Reduction, params: EnergyParams) -> Result<Self> {
        params.validate()?;
        if reduction.full_len() != mesh.dim() * mesh.vertex_count() {
            return Err(Error::InvalidParameter(format!(
                "reduction covers {} coordinates, mesh has {}",
                reduction.full_len(),
                mesh.dim() * mesh.vertex_count()
            )));
        }
        Ok(Objective {
            mesh,
            reduction,
            params,
        })
    }

    pub fn mesh(&self) -> &'a SimplicialMesh {
        self.mesh
    }

    pub fn reduction(&self) -> &'a Reduction {
        self.reduction
    }

    pub fn params(&self) -> &EnergyParams {
        &self.params
    }

    pub fn with_params(&self, params: EnergyParams) -> Result<Self> {
        Objective::new(self.mesh, self.reduction, params)
    }

    /// Value and free-variable gradient.
    pub fn evaluate(&self, free: &[f64]) -> ObjectiveValue {
        let full = self.reduction.expand(free);
        let mut v = self.evaluate_full(&full, true);
        if v.finite {
            v.gradient = self.reduction.project_gradient(&v.gradient);
        } else {
            v.gradient.clear();
        }
        v
    }

    /// Value only; `gradient` is left empty.
    pub fn value(&self, free: &[f64]) -> ObjectiveValue {
        self.evaluate_full(&self.reduction.expand(free), false)
    }

    /// Evaluates at full coordinates; the gradient, if requested, is over full coordinates.
    pub fn evaluate_full(&self, coords: &[f64], with_gradient: bool) -> ObjectiveValue {
        let mesh = self.mesh;
        let params = self.params;
        let dim = mesh.dim();
        let terms = map_indexed(mesh.simplex_count(), |k| {
            let j = jacobian_from_coords(mesh, coords, k);
            let det = j.det();
            let dv = energy::evaluate(&j, &params);
            let f = if params.epsilon == 0.0 {
                dv.base
            } else {
                energy::distortion(&j, params.density, params.theta).unwrap_or(f64::INFINITY)
            };
            let geo = mesh.geometry(k);
            let vol = geo.ref_volume;
            let mut vertex_grad = [[0.0; 3]; 4];
            if with_gradient && dv.finite {
                // ∂/∂(edge matrix) = G·Bᵀ, columns belong to vertices 1..=d
                let g = dv.grad * geo.inv_edge_matrix.transpose();
                for c in 0..dim {
                    for r in 0..dim {
                        let e = vol * g[(r, c)];
                        vertex_grad[c + 1][r] = e;
                        vertex_grad[0][r] -= e;
                    }
                }
            }
            ElementTerm {
                value: dv.value * vol,
                finite: dv.finite,
                f,
                det,
                vertex_grad,
            }
        });

        let finite = terms.iter().all(|t| t.finite);
        let f_max = terms.iter().map(|t| t.f).fold(f64::NEG_INFINITY, f64::max);
        let d_min = terms.iter().map(|t| t.det).fold(f64::INFINITY, f64::min);
        let value = if finite {
            pairwise_sum(&terms.iter().map(|t| t.value).collect::<Vec<_>>())
        } else {
            f64::INFINITY
        };
        let mut gradient = Vec::new();
        if with_gradient && finite {
            gradient = vec![0.0; coords.len()];
            for (k, t) in terms.iter().enumerate() {
                for (local, &v) in mesh.simplex(k).iter().enumerate() {
                    for r in 0..dim {
                        gradient[v * dim + r] += t.vertex_grad[local][r];
                    }
                }
            }
        }
        ObjectiveValue {
            value,
            gradient,
            finite,
            f_max,
            d_min,
        }
    }
}

fn evaluate_state(mesh: &SimplicialMesh, state: &DeformationState, params: EnergyParams) -> Result<ObjectiveValue> {
    state.check_against(mesh)?;
    let reduction = Reduction::identity(state.coords().len());
    let objective = Objective::new(mesh, &reduction, params)?;
    Ok(objective.evaluate(state.coords()))
}

/// `Σ f_ε(J_k)·vol(T_k)` for the mixed density, free boundary.
pub fn eval_regularized(
    mesh: &SimplicialMesh,
    state: &DeformationState,
    theta: f64,
    epsilon: f64,
) -> Result<ObjectiveValue> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    evaluate_state(mesh, state, EnergyParams::mixed(theta).regularized(epsilon))
}

/// `Σ f(J_k)/(1 - t·f(J_k))·vol(T_k)`, free boundary.
pub fn eval_stiffened(
    mesh: &SimplicialMesh,
    state: &DeformationState,
    density: Density,
    theta: f64,
    t: f64,
) -> Result<ObjectiveValue> {
    evaluate_state(mesh, state, EnergyParams::new(density, theta).stiffened(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{mixed_density, regularized_density};
    use crate::mesh::jacobian;

    fn square() -> SimplicialMesh {
        SimplicialMesh::triangles(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn identity_has_unit_density() {
        let mesh = square();
        let id = DeformationState::identity(&mesh).unwrap();
        let v = eval_regularized(&mesh, &id, 0.5, 1e-12).unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
        assert!(v.gradient.iter().all(|g| g.abs() < 1e-10));
        let w = eval_stiffened(&mesh, &id, Density::MixedShapeVolume, 0.5, 0.5).unwrap();
        assert!((w.value - 2.0).abs() < 1e-12);
        assert_eq!(w.f_max, 1.0);
        assert_eq!(w.d_min, 1.0);
    }

    #[test]
    fn one_inverted_triangle_sums_hand_values() {
        let mesh = square();
        // vertex 3 moved to (1, 0.5): triangle [0,2,3] flips
        let state = DeformationState::from_points(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [1.0, 0.5]]).unwrap();
        let v = eval_regularized(&mesh, &state, 0.5, 1.0).unwrap();
        assert!(v.finite);
        // first triangle: J = I, ‖J‖² = 2, D = 1
        let chi0 = (1.0 + 2f64.sqrt()) / 2.0;
        let f0 = 0.5 * (2.0 / (2.0 * chi0)) + 0.5 * (2.0 / (2.0 * chi0));
        // second: J·(1,1)ᵀ = (1,1)ᵀ and J·(0,1)ᵀ = (1,0.5)ᵀ, so J = [[0,1],[0.5,0.5]], ‖J‖² = 1.5, D = -0.5
        let d = -0.5f64;
        let chi1 = (d + (1.0 + d * d).sqrt()) / 2.0;
        let f1 = 0.5 * (1.5 / (2.0 * chi1)) + 0.5 * ((1.0 + d * d) / (2.0 * chi1));
        assert!(
            (v.value - 0.5 * (f0 + f1)).abs() < 1e-12,
            "{} vs {}",
            v.value,
            0.5 * (f0 + f1)
        );
        assert_eq!(v.d_min, -0.5);
        assert_eq!(v.f_max, f64::INFINITY);

        let w = eval_stiffened(&mesh, &state, Density::MixedShapeVolume, 0.5, 0.0).unwrap();
        assert!(!w.finite);
    }

    #[test]
    fn stiffening_zero_is_plain_energy() {
        let mesh = square();
        let state = DeformationState::from_points(&[[0.0, 0.0], [1.2, 0.1], [1.0, 0.9], [-0.1, 1.3]]).unwrap();
        let w = eval_stiffened(&mesh, &state, Density::MixedShapeVolume, 0.3, 0.0).unwrap();
        let expect: f64 = (0..2)
            .map(|k| mixed_density(&jacobian(&mesh, &state, k), 0.3).unwrap() * mesh.geometry(k).ref_volume)
            .sum();
        assert!((w.value - expect).abs() < 1e-14);
        let r = eval_regularized(&mesh, &state, 0.3, 1e-3).unwrap();
        let expect_r: f64 = (0..2)
            .map(|k| regularized_density(&jacobian(&mesh, &state, k), 0.3, 1e-3) * mesh.geometry(k).ref_volume)
            .sum();
        assert!((r.value - expect_r).abs() < 1e-14);
    }

    #[test]
    fn pairwise_sum_is_order_fixed() {
        let v: Vec<f64> = (0..1000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let a = pairwise_sum(&v);
        let b = pairwise_sum(&v);
        assert_eq!(a.to_bits(), b.to_bits());
        assert!((a - v.iter().sum::<f64>()).abs() < 1e-12);
    }
}
