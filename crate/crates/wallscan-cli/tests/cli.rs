//! End-to-end tests driving the compiled binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use wallscan::deform::Method;
use wallscan::DeformationMap;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wallscan"))
}

/// Fresh per-test scratch directory under target/tmp.
fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn wallscan");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Value of `key = value` in a report file.
fn report_value(path: &Path, key: &str) -> String {
    let text = fs::read_to_string(path).unwrap();
    let prefix = format!("{key} = ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("{} has no key '{key}'", path.display()))
        .to_string()
}

fn report_f64(path: &Path, key: &str) -> f64 {
    report_value(path, key).parse().unwrap()
}

fn write_scene(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

/// No in-progress temp files may survive a successful run.
fn assert_no_temp_files(dir: &Path) {
    for entry in fs::read_dir(dir).unwrap() {
        let name = entry.unwrap().file_name();
        assert!(
            !name.to_string_lossy().ends_with(".tmp"),
            "leftover temp file {name:?} in {}",
            dir.display()
        );
    }
}

const PLANE_SCENE: &str = "kind = wall\nextent = 1.0\nheight = 0.8\nspacing = 0.02\n\
                           amplitude = 0\nsigma = 0\nfield = none\nquery_sigma = 0\n";

#[test]
fn identical_clouds_give_all_zero_maps() {
    let dir = scratch("identity");
    let scene = write_scene(&dir, "plane.scene", PLANE_SCENE);
    run(bin().args(["synth", "--scene"]).arg(&scene).arg("--out-dir").arg(&dir));

    let reference = dir.join("reference.xyz");
    let out = dir.join("maps");
    run(bin()
        .args(["deform", "--method", "all", "--m3c2-diameter-m", "0.1", "--reference"])
        .arg(&reference)
        .arg("--query")
        .arg(&reference)
        .arg("--out-dir")
        .arg(&out));

    for method in [Method::C2M, Method::M2M, Method::M3C2, Method::Icp] {
        let map = DeformationMap::read_csv(&out.join(format!("map-{method}.csv")), method)
            .unwrap();
        assert!(map.valid_count() > 0, "{method}: no valid cells");
        for (_, _, v) in map.valid_cells() {
            assert!(v.abs() < 1e-9, "{method}: nonzero cell {v}");
        }
    }
    assert_no_temp_files(&out);
}

#[test]
fn shifted_plane_reports_minus_ten_for_every_method() {
    let dir = scratch("shifted");
    let scene = write_scene(
        &dir,
        "shift.scene",
        "kind = wall\nextent = 1.0\nheight = 0.8\nspacing = 0.02\namplitude = 0\n\
         sigma = 0\nfield = constant\nfield_mm = -10\nquery_sigma = 0\n",
    );
    run(bin().args(["synth", "--scene"]).arg(&scene).arg("--out-dir").arg(&dir));

    let out = dir.join("maps");
    run(bin()
        .args(["deform", "--method", "all", "--m3c2-diameter-m", "0.1", "--reference"])
        .arg(dir.join("reference.xyz"))
        .arg("--query")
        .arg(dir.join("query.xyz"))
        .arg("--out-dir")
        .arg(&out));

    let report = out.join("report-deform.txt");
    for method in ["c2m", "m2m", "m3c2", "icp"] {
        let mean = report_f64(&report, &format!("stage.{method}.mean_mm"));
        assert!(
            (mean + 10.0).abs() < 1e-6,
            "{method}: mean {mean} mm, expected -10"
        );
    }
}

#[test]
fn register_rejects_two_target_pairs() {
    let dir = scratch("two-pairs");
    let targets = dir.join("pairs.txt");
    fs::write(&targets, "0 0 0 0.1 0 0\n1 0 0 1.1 0 0\n").unwrap();
    let out = bin()
        .args(["register", "--targets"])
        .arg(&targets)
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(!out.status.success(), "2-pair registration must fail");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("degenerate"), "stderr: {stderr}");
    assert!(stderr.contains("at least 3 pairs"), "stderr: {stderr}");
    assert!(
        stderr.contains("pairs.txt"),
        "error must name the input file, got: {stderr}"
    );
}

#[test]
fn register_recovers_facade_displacement() {
    let dir = scratch("register");
    let scene = write_scene(
        &dir,
        "facade.scene",
        "kind = facade\nwidth = 2.0\nheight = 1.5\nspacing = 0.02\nrows = 2\ncols = 2\n\
         window_width = 0.4\nwindow_height = 0.35\ndepth = 0.08\n\
         rot_deg = 0.5\naxis_x = 0\naxis_y = 0\naxis_z = 1\n\
         tx = 0.02\nty = 0.01\ntz = 0.005\nsigma = 0.001\nseed = 7\n",
    );
    run(bin().args(["synth", "--scene"]).arg(&scene).arg("--out-dir").arg(&dir));

    let out = dir.join("reg");
    run(bin()
        .args(["register", "--reference"])
        .arg(dir.join("reference.xyz"))
        .arg("--query")
        .arg(dir.join("query.xyz"))
        .arg("--out-dir")
        .arg(&out));

    let report = out.join("report-register.txt");
    assert_eq!(report_value(&report, "stage.register.converged"), "true");
    assert!(report_f64(&report, "stage.qc.mean_mm").abs() < 0.1);

    // recovered transform maps query back onto reference, so composing
    // with the applied displacement must give the identity
    let truth = read_transform(&dir.join("truth-transform.txt"));
    let recovered = read_transform(&out.join("transform.txt"));
    let residual = recovered.compose(&truth);
    assert!(residual.rotation_angle() < 1e-3, "rotation residual too large");
    assert!(residual.translation().norm() < 5e-4, "translation residual too large");
}

fn read_transform(path: &Path) -> wallscan::RigidTransform {
    let text = fs::read_to_string(path).unwrap();
    let field = |key: &str| -> f64 {
        let prefix = format!("{key} = ");
        text.lines()
            .find_map(|l| l.strip_prefix(&prefix))
            .unwrap_or_else(|| panic!("missing {key}"))
            .parse()
            .unwrap()
    };
    let rotation = nalgebra::Matrix3::new(
        field("r00"),
        field("r01"),
        field("r02"),
        field("r10"),
        field("r11"),
        field("r12"),
        field("r20"),
        field("r21"),
        field("r22"),
    );
    let translation = nalgebra::Vector3::new(field("tx"), field("ty"), field("tz"));
    wallscan::RigidTransform::from_parts(rotation, translation).unwrap()
}

#[test]
fn lod_rerun_is_byte_identical() {
    let dir = scratch("lod");
    let scene = write_scene(
        &dir,
        "wavy.scene",
        "kind = wall\nextent = 0.8\nheight = 0.6\nspacing = 0.008\namplitude = 0.02\n\
         wavelength = 0.5\nsigma = 0.0008\nseed = 3\nfield = none\nquery_sigma = 0\n",
    );
    run(bin().args(["synth", "--scene"]).arg(&scene).arg("--out-dir").arg(&dir));

    let config = dir.join("lod.cfg");
    fs::write(
        &config,
        format!(
            "reference = {}\nmethod = c2m,m3c2\nlevels = 3\nseed = 5\n",
            dir.join("reference.xyz").display()
        ),
    )
    .unwrap();

    let (a, b) = (dir.join("a"), dir.join("b"));
    run(bin().args(["lod", "--config"]).arg(&config).arg("--out-dir").arg(&a));
    run(bin().args(["lod", "--config"]).arg(&config).arg("--out-dir").arg(&b));

    let csv_a = fs::read(a.join("lod.csv")).unwrap();
    let csv_b = fs::read(b.join("lod.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "rerun with a fixed seed must be byte-identical");
    assert!(String::from_utf8(csv_a)
        .unwrap()
        .starts_with("level,voxel_size_m,spacing_m,method,mae_mm,count\n"));
}

#[test]
fn flags_override_config_values() {
    let dir = scratch("override");
    let scene = write_scene(&dir, "plane.scene", PLANE_SCENE);
    run(bin().args(["synth", "--scene"]).arg(&scene).arg("--out-dir").arg(&dir));

    let out = dir.join("maps");
    let config = dir.join("deform.cfg");
    fs::write(
        &config,
        format!(
            "reference = {r}\nquery = {r}\nmethod = c2m\nout-dir = {o}\n",
            r = dir.join("reference.xyz").display(),
            o = out.display()
        ),
    )
    .unwrap();

    run(bin()
        .args(["deform", "--config"])
        .arg(&config)
        .args(["--method", "m3c2", "--m3c2-diameter-m", "0.1"]));

    assert!(out.join("map-m3c2.csv").exists(), "flag method must win");
    assert!(!out.join("map-c2m.csv").exists(), "config method must be overridden");
}

#[test]
fn inclinometer_then_compare_gives_zero_differences() {
    let dir = scratch("incline");
    let trace = dir.join("trace.csv");
    fs::write(&trace, "depth_m,theta_deg\n0.5,0.05\n1.0,0.03\n1.5,0.01\n2.0,0.0\n").unwrap();
    run(bin().args(["inclinometer", "--trace"]).arg(&trace).arg("--out-dir").arg(&dir));

    let profile = dir.join("profile.csv");
    assert!(fs::read_to_string(&profile)
        .unwrap()
        .starts_with("depth_m,deformation_mm\n0,0.7854\n"));

    // a one-column map holding exactly the wall-frame profile values
    let map = dir.join("map.csv");
    fs::write(
        &map,
        "x_m,z_m,deformation_mm,count,valid\n\
         0.25,2.25,-0.7854,1,1\n\
         0.25,1.75,-0.3491,1,1\n\
         0.25,1.25,-0.0873,1,1\n\
         0.25,0.75,-0.0000,1,1\n\
         0.25,0.25,0.0000,1,1\n",
    )
    .unwrap();

    let out = dir.join("cmp");
    run(bin()
        .args(["compare", "--method", "c2m", "--x", "0.25", "--ground-z", "2.25", "--map"])
        .arg(&map)
        .arg("--profile")
        .arg(&profile)
        .arg("--out-dir")
        .arg(&out));

    let csv = fs::read_to_string(out.join("compare.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let difference = line.rsplit(',').next().unwrap();
        assert_eq!(difference, "0.0000", "row '{line}'");
        rows += 1;
    }
    assert_eq!(rows, 5);
    let report = fs::read_to_string(out.join("report-compare.txt")).unwrap();
    assert!(!report.contains("notice"), "full overlap must not warn");
}

#[test]
fn smallangle_matches_the_tangent_form() {
    let out = run(bin().args(["smallangle", "--delta-arcsec", "10", "--length-m", "80"]));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let line = stdout
        .lines()
        .find_map(|l| l.strip_prefix("deformation_m = "))
        .expect("deformation_m line");
    let got: f64 = line.parse().unwrap();
    let want = 80.0 * (10.0 * std::f64::consts::PI / 648000.0).tan();
    assert!(((got - want) / want).abs() < 1e-7, "got {got}, want {want}");

    let zero = run(bin().args(["smallangle", "--delta-arcsec", "0", "--length-m", "10"]));
    assert!(String::from_utf8(zero.stdout).unwrap().contains("deformation_m = 0\n"));
}

#[test]
fn fatal_errors_name_the_offending_input() {
    let dir = scratch("badinput");
    let out = bin()
        .args(["deform", "--reference", "/nonexistent/ref.xyz", "--query", "/nonexistent/q.xyz"])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/nonexistent/ref.xyz"), "stderr: {stderr}");

    // a config key that exists nowhere gives the flag/key spelling
    let missing = bin().args(["lod"]).arg("--out-dir").arg(&dir).output().unwrap();
    assert!(!missing.status.success());
    let stderr = String::from_utf8_lossy(&missing.stderr);
    assert!(stderr.contains("--reference"), "stderr: {stderr}");
}
