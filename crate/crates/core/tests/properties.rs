use std::path::Path;

use lowdist::constraints::ConstraintSet;
use lowdist::energy::{self, Density, EnergyParams};
use lowdist::generators;
use lowdist::io;
use lowdist::mesh::{jacobian, min_det_ratio};
use lowdist::quality::{self, singular_values};
use lowdist::solver::{minimize, FnObjective, SolverConfig};
use lowdist::stiffen::{boundedness_violations, stiffen, validate_report, StiffenConfig};
use lowdist::untangle::{untangle, UntangleConfig};
use lowdist::{AffineRow, DeformationState, Mat, Objective, Reduction, SimplicialMesh};
use proptest::prelude::*;

fn grid3() -> SimplicialMesh {
    generators::grid(3, 3).unwrap()
}

fn jitter(mesh: &SimplicialMesh, offsets: &[f64], amount: f64) -> DeformationState {
    let mut s = DeformationState::identity(mesh).unwrap();
    let coords: Vec<f64> = s
        .coords()
        .iter()
        .zip(offsets.iter().cycle())
        .map(|(x, o)| x + amount * o)
        .collect();
    s = DeformationState::new(s.dim(), coords).unwrap();
    s
}

fn mat_from(dim: usize, entries: &[f64]) -> Mat {
    let rows: Vec<&[f64]> = entries.chunks(dim).take(dim).collect();
    Mat::from_rows(&rows)
}

fn rotation(angle: f64) -> Mat {
    let (s, c) = angle.sin_cos();
    Mat::from_rows(&[&[c, -s], &[s, c]])
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn offsets(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobian_is_exact_on_affine_maps(a in prop::collection::vec(-2.0..2.0f64, 4), b in prop::collection::vec(-5.0..5.0f64, 2)) {
        let mesh = grid3();
        let am = mat_from(2, &a);
        let state = DeformationState::identity(&mesh).unwrap().transformed(&am, &b);
        let scale = am.max_abs().max(1e-3);
        for k in 0..mesh.simplex_count() {
            let j = jacobian(&mesh, &state, k);
            for r in 0..2 {
                for c in 0..2 {
                    prop_assert!((j[(r, c)] - am[(r, c)]).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn jacobian_is_exact_on_affine_tet_maps(a in prop::collection::vec(-2.0..2.0f64, 9), b in prop::collection::vec(-5.0..5.0f64, 3)) {
        let bar = generators::twisted_bar(2, 1, 1, 2.0, 0.0).unwrap();
        let am = mat_from(3, &a);
        let state = DeformationState::identity(&bar.mesh).unwrap().transformed(&am, &b);
        let scale = am.max_abs().max(1e-3);
        for k in 0..bar.mesh.simplex_count() {
            let j = jacobian(&bar.mesh, &state, k);
            for r in 0..3 {
                for c in 0..3 {
                    prop_assert!((j[(r, c)] - am[(r, c)]).abs() <= 1e-11 * scale);
                }
            }
        }
    }

    #[test]
    fn d_min_is_invariant_under_rigid_motions(o in offsets(32), angle in 0.0..std::f64::consts::TAU, b in prop::collection::vec(-10.0..10.0f64, 2)) {
        let mesh = grid3();
        let state = jitter(&mesh, &o, 0.1);
        let moved = state.transformed(&rotation(angle), &b);
        prop_assert!(rel(min_det_ratio(&mesh, &state), min_det_ratio(&mesh, &moved)) < 1e-12 * 1e3);
    }

    #[test]
    fn element_geometry_is_reproducible(o in offsets(32)) {
        let (v, t) = generators::grid_arrays(3, 3);
        let v: Vec<[f64; 2]> = v.iter().zip(o.chunks(2)).map(|(p, d)| [p[0] + 0.05 * d[0], p[1] + 0.05 * d[1]]).collect();
        let a = SimplicialMesh::triangles(v.clone(), t.clone()).unwrap();
        let b = SimplicialMesh::triangles(v, t).unwrap();
        for k in 0..a.simplex_count() {
            prop_assert_eq!(a.geometry(k), b.geometry(k));
        }
    }

    #[test]
    fn translation_leaves_free_boundary_energy_unchanged(o in offsets(32), shift in prop::collection::vec(-3.0..3.0f64, 2), stiff in any::<bool>()) {
        let mesh = grid3();
        let state = jitter(&mesh, &o, 0.05);
        let red = Reduction::identity(state.coords().len());
        let params = if stiff { EnergyParams::mixed(0.5).stiffened(0.3) } else { EnergyParams::mixed(0.5).regularized(1e-2) };
        let obj = Objective::new(&mesh, &red, params).unwrap();
        let base = obj.evaluate(state.coords());
        let moved = state.transformed(&Mat::identity(2), &shift);
        let after = obj.evaluate(moved.coords());
        prop_assert!(base.finite && after.finite);
        prop_assert!(rel(base.value, after.value) < 1e-12);
        for axis in 0..2 {
            let sum: f64 = base.gradient.iter().skip(axis).step_by(2).sum();
            let norm: f64 = base.gradient.iter().map(|g| g.abs()).sum();
            prop_assert!(sum.abs() <= 1e-12 * norm.max(1.0));
        }
    }

    #[test]
    fn stiffened_objective_increases_with_t(o in offsets(32), t1 in 0.0..0.5f64, dt in 1e-3..0.3f64, sd in any::<bool>()) {
        let mesh = grid3();
        let state = jitter(&mesh, &o, 0.03);
        let red = Reduction::identity(state.coords().len());
        let density = if sd { Density::SymmetricDirichlet } else { Density::MixedShapeVolume };
        let base = EnergyParams::new(density, 0.5);
        let objective_at = |t: f64| Objective::new(&mesh, &red, base.stiffened(t)).unwrap().value(state.coords());
        let f_max = objective_at(0.0).f_max;
        let t2 = t1 + dt;
        prop_assume!(f_max * t2 < 0.999);
        let (w1, w2) = (objective_at(t1), objective_at(t2));
        prop_assert!(w1.finite && w2.finite);
        prop_assert!(w1.value < w2.value);
    }

    #[test]
    fn f_max_matches_independent_recomputation(o in offsets(32), theta in 0.05..0.95f64) {
        let mesh = grid3();
        let state = jitter(&mesh, &o, 0.08);
        prop_assume!(min_det_ratio(&mesh, &state) > 0.0);
        let red = Reduction::identity(state.coords().len());
        let v = Objective::new(&mesh, &red, EnergyParams::mixed(theta).stiffened(0.0)).unwrap().value(state.coords());
        let expect = (0..mesh.simplex_count())
            .map(|k| energy::mixed_density(&jacobian(&mesh, &state, k), theta).unwrap())
            .fold(0.0f64, f64::max);
        prop_assert!(rel(v.f_max, expect) < 1e-14);
    }

    #[test]
    fn reduced_states_satisfy_constraints(locks in prop::collection::btree_set(0usize..16, 0..4), rows in prop::collection::vec((0usize..16, 0usize..2, 0usize..16, 0usize..2, -2.0..2.0f64, -1.0..1.0f64), 0..6), free_values in offsets(32)) {
        let mut set = ConstraintSet::new(2);
        for &v in &locks {
            set.lock(v, &[v as f64 * 0.1, 1.0 - v as f64 * 0.05]);
        }
        for &(a, ax, b, bx, c, rhs) in &rows {
            prop_assume!((a, ax) != (b, bx));
            set.add_row(AffineRow::new(vec![(a, ax, 1.0), (b, bx, c)], rhs));
        }
        let Ok(red) = set.build_reduction(16) else { return Ok(()) };
        let free: Vec<f64> = free_values.iter().take(red.free_len()).copied().collect();
        let full = red.expand(&free);
        let scale = full.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        prop_assert!(set.max_residual(&full) < 1e-10 * scale);

        // Mᵀ·∇g against finite differences of g(M·free + c) for a fixed quadratic g
        let weights: Vec<f64> = (0..32).map(|i| 1.0 + (i % 5) as f64).collect();
        let g = |x: &[f64]| x.iter().zip(&weights).map(|(x, w)| w * x * x).sum::<f64>();
        let grad_full: Vec<f64> = full.iter().zip(&weights).map(|(x, w)| 2.0 * w * x).collect();
        let grad = red.project_gradient(&grad_full);
        for i in 0..free.len() {
            let h = 1e-6;
            let mut p = free.clone();
            let mut m = free.clone();
            p[i] += h;
            m[i] -= h;
            let fd = (g(&red.expand(&p)) - g(&red.expand(&m))) / (2.0 * h);
            prop_assert!((fd - grad[i]).abs() <= 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn inner_solves_descend_and_stay_feasible(diag in prop::collection::vec(0.5..20.0f64, 4), start in prop::collection::vec(0.2..3.0f64, 4)) {
        // Σ dᵢ(xᵢ - 1)² - Σ log xᵢ, infinite for xᵢ ≤ 0
        let objective = FnObjective(|x: &[f64]| {
            if x.iter().any(|&v| v <= 0.0) {
                return None;
            }
            let value = x.iter().zip(&diag).map(|(x, d)| d * (x - 1.0).powi(2) - x.ln()).sum();
            let grad = x.iter().zip(&diag).map(|(x, d)| 2.0 * d * (x - 1.0) - 1.0 / x).collect();
            Some((value, grad))
        });
        let r = minimize(&objective, &start, &SolverConfig::default()).unwrap();
        prop_assert!(r.value_history.iter().all(|v| v.is_finite()));
        prop_assert!(r.value_history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(r.x.iter().all(|&v| v > 0.0));
        for (x, d) in r.x.iter().zip(&diag) {
            let exact = (2.0 * d + (4.0 * d * d + 8.0 * d).sqrt()) / (4.0 * d);
            prop_assert!((x - exact).abs() < 1e-4);
        }
    }

    #[test]
    fn mixed_bound_is_sound(entries in prop::collection::vec(-3.0..3.0f64, 9), three in any::<bool>(), theta in 0.05..0.95f64, slack in 1e-9..0.5f64) {
        let d = if three { 3 } else { 2 };
        let j = mat_from(d, &entries);
        prop_assume!(j.det() > 1e-3);
        let f = energy::mixed_density(&j, theta).unwrap();
        let t = (1.0 - slack) / f;
        let b = quality::gamma_bound_mixed(t, theta, d).unwrap();
        let s = singular_values(&j);
        prop_assert!(s[0] <= b * (1.0 + 1e-9), "σ₁ = {} > B = {}", s[0], b);
        prop_assert!(s[d - 1] >= (1.0 - 1e-9) / b, "σ_d = {} < 1/B = {}", s[d - 1], 1.0 / b);
    }

    #[test]
    fn symmetric_dirichlet_bound_is_sound(entries in prop::collection::vec(-3.0..3.0f64, 9), three in any::<bool>(), slack in 1e-9..0.5f64) {
        let d = if three { 3 } else { 2 };
        let j = mat_from(d, &entries);
        prop_assume!(j.det() > 1e-3);
        let f = energy::symmetric_dirichlet_density(&j).unwrap();
        let t = (1.0 - slack) / f;
        let b = quality::gamma_bound_sd(t, d).unwrap();
        let s = singular_values(&j);
        prop_assert!(s[0] <= b * (1.0 + 1e-9));
        prop_assert!(s[d - 1] >= (1.0 - 1e-9) / b);
    }

    #[test]
    fn histogram_counts_every_element(seed in 0u64..1000, fraction in 0.0..0.6f64) {
        let p = generators::tangled_grid(6, fraction, seed).unwrap();
        let stats = quality::quality_stats(&p.mesh, &p.initial, Density::MixedShapeVolume, 0.5).unwrap();
        prop_assert_eq!(stats.histogram.count_condition.iter().sum::<usize>(), p.mesh.simplex_count());
        prop_assert_eq!(stats.histogram.count_det.iter().sum::<usize>(), p.mesh.simplex_count());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn epsilon_sequence_is_positive_and_non_increasing(seed in 0u64..10_000) {
        let p = generators::tangled_grid(8, 0.3, seed).unwrap();
        let config = UntangleConfig::default();
        let out = untangle(&p.mesh, &p.initial, &p.constraints, &config).unwrap();
        let eps: Vec<f64> = out.report.rows().map(|r| r.param).collect();
        prop_assert!(eps.iter().all(|&e| e >= config.epsilon_floor && e > 0.0));
        prop_assert!(eps.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(out.converged());
        prop_assert!(min_det_ratio(&p.mesh, &out.state) > 0.0);
        let last = out.report.last().unwrap();
        prop_assert!(last.row.d_min > 0.0);
        prop_assert!(last.next_objective > (1.0 - config.relative_stagnation) * last.start_objective);
        prop_assert_eq!(out.report.outer_iterations(), out.report.rows().count());
    }

    #[test]
    fn stiffening_traces_satisfy_their_invariants(o in offsets(50), sd in any::<bool>(), theta in 0.2..0.8f64) {
        let mesh = generators::grid(5, 5).unwrap();
        let state = jitter(&mesh, &o, 0.04);
        prop_assume!(min_det_ratio(&mesh, &state) > 0.0);
        let mut constraints = ConstraintSet::new(2);
        constraints.lock(0, state.point(0));
        constraints.lock(24, state.point(24));
        let density = if sd { Density::SymmetricDirichlet } else { Density::MixedShapeVolume };
        let config = StiffenConfig { theta, density, ..Default::default() };
        let out = stiffen(&mesh, &state, &constraints, &config).unwrap();
        prop_assert!(out.converged());
        prop_assert_eq!(validate_report(&out.report), Vec::<String>::new());
        prop_assert_eq!(boundedness_violations(&mesh, &out, &config).unwrap(), Vec::<String>::new());
        let stats = quality::quality_stats(&mesh, &out.state, density, theta).unwrap();
        prop_assert!(stats.f_max * out.terminal_t < 1.0);
        let bound = quality::gamma_bound(density, out.terminal_t, theta, 2).unwrap();
        prop_assert_eq!(quality::bound_violations(&stats, bound), 0);
    }
}

fn mutate(text: &str, pos: usize, byte: u8) -> Option<String> {
    let mut bytes = text.as_bytes().to_vec();
    let i = pos % bytes.len();
    if bytes[i] == byte {
        return None;
    }
    bytes[i] = byte;
    String::from_utf8(bytes).ok()
}

fn byte() -> impl Strategy<Value = u8> {
    prop_oneof![
        4 => prop::sample::select(b"0123456789.-+eE ,/\n#".to_vec()),
        1 => 0x20u8..0x7f,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn corrupted_medit_is_rejected_or_keeps_counts(pos in any::<usize>(), b in byte(), tets in any::<bool>()) {
        let p = if tets { generators::twisted_bar(2, 1, 1, 2.0, 0.2).unwrap() } else { generators::tangled_grid(3, 0.3, 1).unwrap() };
        let text = io::write_medit(&p.mesh, Some(&p.initial)).unwrap();
        let Some(bad) = mutate(&text, pos, b) else { return Ok(()) };
        if let Ok(f) = io::parse_medit(&bad, Path::new("fuzz")) {
            prop_assert_eq!(f.mesh.vertex_count(), p.mesh.vertex_count());
            prop_assert_eq!(f.mesh.simplex_count(), p.mesh.simplex_count());
            prop_assert_eq!(f.mesh.dim(), p.mesh.dim());
        }
    }

    #[test]
    fn corrupted_obj_is_rejected_or_keeps_counts(pos in any::<usize>(), b in byte()) {
        let p = generators::half_sphere(2).unwrap();
        let text = io::write_obj(&p.mesh, Some(&p.initial)).unwrap();
        let Some(bad) = mutate(&text, pos, b) else { return Ok(()) };
        if let Ok(f) = io::parse_obj(&bad, Path::new("fuzz")) {
            prop_assert_eq!(f.mesh.vertex_count(), p.mesh.vertex_count());
            prop_assert_eq!(f.mesh.simplex_count(), p.mesh.simplex_count());
            prop_assert!(f.state.is_some());
        }
    }

    #[test]
    fn corrupted_constraints_are_rejected_or_keep_counts(pos in any::<usize>(), b in byte()) {
        let p = generators::arc_square(4, 0.3).unwrap();
        let file = io::ConstraintFile {
            set: p.constraints.clone(),
            singularities: vec![(5, lowdist::FractionalIndex::new(-1, 4).unwrap())],
        };
        let text = io::write_constraints(&file);
        let Some(bad) = mutate(&text, pos, b) else { return Ok(()) };
        if let Ok(back) = io::parse_constraints(&bad, 2, Path::new("fuzz")) {
            prop_assert_eq!(back.set.locked().len(), file.set.locked().len());
            prop_assert_eq!(back.set.rows().len(), file.set.rows().len());
            prop_assert_eq!(back.singularities.len(), 1);
        }
    }

    #[test]
    fn corrupted_reports_are_rejected_or_keep_counts(pos in any::<usize>(), b in byte()) {
        let p = generators::tangled_grid(5, 0.3, 4).unwrap();
        let out = untangle(&p.mesh, &p.initial, &p.constraints, &UntangleConfig::default()).unwrap();
        let stats = quality::quality_stats(&p.mesh, &out.state, Density::MixedShapeVolume, 0.5).unwrap();
        let summary = lowdist::Summary::new(&stats, Density::MixedShapeVolume, 0.5, 2, None);
        let text = io::format_report(out.report.rows(), Some(&summary));
        let Some(bad) = mutate(&text, pos, b) else { return Ok(()) };
        if let Ok((rows, s)) = io::parse_report(&bad, Path::new("fuzz")) {
            prop_assert_eq!(rows.len(), out.report.outer_iterations());
            prop_assert!(s.is_some());
        }
    }
}

#[test]
fn round_trips_are_exact() {
    let p = generators::tangled_grid(5, 0.3, 9).unwrap();
    let text = io::write_medit(&p.mesh, Some(&p.initial)).unwrap();
    let back = io::parse_medit(&text, Path::new("x")).unwrap();
    assert_eq!(back.positions, p.initial);
    let file = io::ConstraintFile {
        set: p.constraints.clone(),
        singularities: Vec::new(),
    };
    let again = io::parse_constraints(&io::write_constraints(&file), 2, Path::new("x")).unwrap();
    assert_eq!(again, file);
}
