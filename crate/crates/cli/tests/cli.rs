use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lowdist::generators;
use lowdist::io::{self, ConstraintFile, MeshFormat};
use lowdist::mesh::min_det_ratio;
use lowdist::quality::gamma_bound_sd;
use lowdist::{DeformationState, SimplicialMesh};
use tempfile::TempDir;

fn lowdist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowdist")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary_field(o: &Output, key: &str) -> String {
    let last = stdout(o).lines().last().unwrap_or_default().to_string();
    last.split(' ')
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")).map(str::to_string))
        .unwrap_or_else(|| panic!("no {key} in {last:?}"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Fixture {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Writes the tangled grid: reference mesh, initial state and boundary locks.
    fn tangled_grid(&self, n: usize, seed: u64) -> (PathBuf, PathBuf, PathBuf) {
        let p = generators::tangled_grid(n, 0.3, seed).unwrap();
        let mesh = self.path("grid.mesh");
        let init = self.path("grid_init.mesh");
        let constraints = self.path("grid.constraints");
        io::store_mesh(&mesh, &p.mesh, None, MeshFormat::Medit).unwrap();
        io::store_mesh(&init, &p.mesh, Some(&p.initial), MeshFormat::Medit).unwrap();
        let file = ConstraintFile {
            set: p.constraints,
            singularities: Vec::new(),
        };
        fs::write(&constraints, io::write_constraints(&file)).unwrap();
        (mesh, init, constraints)
    }
}

fn load(path: &Path) -> (SimplicialMesh, DeformationState) {
    let f = io::load_mesh(path, MeshFormat::from_path(path).unwrap()).unwrap();
    let state = f.state.unwrap_or(f.positions);
    (f.mesh, state)
}

#[test]
fn untangle_tangled_grid() {
    let fx = Fixture::new();
    let (mesh, init, constraints) = fx.tangled_grid(10, 3);
    let out = fx.path("out.mesh");
    let report = fx.path("run.csv");
    let o = lowdist(&[
        "untangle",
        "--mesh",
        s(&mesh),
        "--init",
        s(&init),
        "--constraints",
        s(&constraints),
        "--out",
        s(&out),
        "--report",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (ref_mesh, _) = load(&mesh);
    let (_, state) = load(&out);
    assert!(min_det_ratio(&ref_mesh, &state) > 0.0);
    let (rows, summary) = io::load_report(&report).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.sigma.is_none()));
    let summary = summary.unwrap();
    assert!(summary.d_min > 0.0 && summary.t.is_none());
    assert_eq!(summary_field(&o, "t"), "n/a");
    assert!(io::parse_histogram(&fs::read_to_string(io::histogram_path(&report)).unwrap(), &report).is_ok());
}

#[test]
fn untangle_feasible_input_is_quick() {
    let fx = Fixture::new();
    let mesh = fx.path("square.mesh");
    io::store_mesh(&mesh, &generators::grid(4, 4).unwrap(), None, MeshFormat::Medit).unwrap();
    let report = fx.path("r.csv");
    let o = lowdist(&[
        "untangle",
        "--mesh",
        s(&mesh),
        "--out",
        s(&fx.path("o.mesh")),
        "--report",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(io::load_report(&report).unwrap().0.len() <= 2);
}

#[test]
fn missing_file_exits_with_input_error() {
    let fx = Fixture::new();
    let o = lowdist(&[
        "untangle",
        "--mesh",
        s(&fx.path("nope.mesh")),
        "--out",
        s(&fx.path("o.mesh")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.mesh"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(lowdist(&["untangle"]).status.code(), Some(1));
    assert_eq!(lowdist(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(lowdist(&["--help"]).status.code(), Some(0));
}

#[test]
fn surface_without_initial_map_is_rejected() {
    let fx = Fixture::new();
    let p = generators::half_sphere(3).unwrap();
    let mesh = fx.path("hs.obj");
    io::store_mesh(&mesh, &p.mesh, None, MeshFormat::Obj).unwrap();
    let o = lowdist(&["pipeline", "--mesh", s(&mesh), "--out", s(&fx.path("o.obj"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--init"), "{}", stderr(&o));
}

#[test]
fn stiffen_identity_keeps_geometry() {
    let fx = Fixture::new();
    let mesh = fx.path("square.mesh");
    let grid = generators::grid(3, 3).unwrap();
    io::store_mesh(&mesh, &grid, None, MeshFormat::Medit).unwrap();
    let out = fx.path("o.mesh");
    let o = lowdist(&["stiffen", "--mesh", s(&mesh), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let t: f64 = summary_field(&o, "t").parse().unwrap();
    assert!(t > 0.99);
    let (_, state) = load(&out);
    let id = DeformationState::identity(&grid).unwrap();
    for (a, b) in state.coords().iter().zip(id.coords()) {
        assert!((a - b).abs() < 1e-8);
    }
    assert!((summary_field(&o, "gamma").parse::<f64>().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn stiffen_rejects_tangled_input() {
    let fx = Fixture::new();
    let (mesh, init, constraints) = fx.tangled_grid(6, 1);
    let o = lowdist(&[
        "stiffen",
        "--mesh",
        s(&mesh),
        "--init",
        s(&init),
        "--constraints",
        s(&constraints),
        "--out",
        s(&fx.path("o.mesh")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("untangle"), "{}", stderr(&o));
}

#[test]
fn symmetric_dirichlet_uses_its_own_bound() {
    let fx = Fixture::new();
    let p = generators::lifted_patch(4, 0).unwrap();
    let mesh = fx.path("patch.obj");
    io::store_mesh(&mesh, &p.mesh, Some(&p.initial), MeshFormat::Obj).unwrap();
    let o = lowdist(&[
        "stiffen",
        "--mesh",
        s(&mesh),
        "--density",
        "sd",
        "--out",
        s(&fx.path("o.obj")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let t: f64 = summary_field(&o, "t").parse().unwrap();
    let bound: f64 = summary_field(&o, "gamma_bound").parse().unwrap();
    assert_eq!(bound, gamma_bound_sd(t, 2).unwrap());
    let gamma: f64 = summary_field(&o, "gamma").parse().unwrap();
    assert!(gamma <= bound);
}

#[test]
fn pipeline_logs_both_phases_and_is_deterministic() {
    let fx = Fixture::new();
    let (mesh, init, constraints) = fx.tangled_grid(10, 7);
    let run = |name: &str| {
        let report = fx.path(name);
        let o = lowdist(&[
            "pipeline",
            "--mesh",
            s(&mesh),
            "--init",
            s(&init),
            "--constraints",
            s(&constraints),
            "--out",
            s(&fx.path("o.mesh")),
            "--report",
            s(&report),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read(&report).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b);
    let (rows, summary) = io::parse_report(std::str::from_utf8(&a).unwrap(), Path::new("a.csv")).unwrap();
    assert!(rows.iter().any(|r| r.sigma.is_none()));
    assert!(rows.iter().any(|r| r.sigma.is_some()));
    let summary = summary.unwrap();
    assert!(summary.gamma.unwrap() <= summary.gamma_bound.unwrap());
}

#[test]
fn pipeline_skips_stiffening_when_untangling_runs_out() {
    let fx = Fixture::new();
    let (mesh, init, constraints) = fx.tangled_grid(12, 2);
    let report = fx.path("r.csv");
    let out = fx.path("o.mesh");
    let o = lowdist(&[
        "pipeline",
        "--mesh",
        s(&mesh),
        "--init",
        s(&init),
        "--constraints",
        s(&constraints),
        "--out",
        s(&out),
        "--report",
        s(&report),
        "--max-outer",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("stiffen: skipped"));
    assert!(out.exists());
    let (rows, _) = io::load_report(&report).unwrap();
    assert!(rows.iter().all(|r| r.sigma.is_none()));
}

#[test]
fn pipeline_flattens_half_sphere() {
    let fx = Fixture::new();
    let p = generators::half_sphere(12).unwrap();
    let mesh = fx.path("hs.obj");
    io::store_mesh(&mesh, &p.mesh, Some(&p.initial), MeshFormat::Obj).unwrap();
    let o = lowdist(&["pipeline", "--mesh", s(&mesh), "--out", s(&fx.path("flat.obj"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let gamma: f64 = summary_field(&o, "gamma").parse().unwrap();
    let bound: f64 = summary_field(&o, "gamma_bound").parse().unwrap();
    assert!(gamma <= 1.32 && gamma <= bound, "Γ = {gamma}, bound {bound}");
}

#[test]
fn quality_of_identity_and_stretch() {
    let fx = Fixture::new();
    let mesh = fx.path("tri.obj");
    fs::write(
        &mesh,
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 2 0\nvt 0 0.5\nf 1/1 2/2 3/3\n",
    )
    .unwrap();
    let report = fx.path("q.csv");
    let o = lowdist(&["quality", "--mesh", s(&mesh), "--report", s(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("max_condition=4 "), "{}", stdout(&o));
    assert_eq!(summary_field(&o, "d_min"), "1");
    let csv = fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with(io::QUALITY_HEADER));
    assert!(io::histogram_path(&report).exists());

    let square = fx.path("sq.mesh");
    io::store_mesh(&square, &generators::grid(2, 2).unwrap(), None, MeshFormat::Medit).unwrap();
    let o = lowdist(&["quality", "--mesh", s(&square), "--state", s(&square)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(summary_field(&o, "gamma"), "1");
    assert!(stdout(&o).contains("max_condition=1 "));
}

#[test]
fn quality_of_tangled_map_omits_gamma() {
    let fx = Fixture::new();
    let (mesh, init, _) = fx.tangled_grid(6, 5);
    let o = lowdist(&["quality", "--mesh", s(&mesh), "--state", s(&init)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(summary_field(&o, "gamma"), "n/a");
    assert!(summary_field(&o, "d_min").parse::<f64>().unwrap() < 0.0);
    assert!(stderr(&o).contains("inverted"));
}
