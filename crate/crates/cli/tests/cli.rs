use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wilflow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wilflow"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let c = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(c).unwrap().parse().unwrap_or(f64::NAN)).collect()
}

#[test]
fn zero_length_run_writes_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", "geometry = circle\ndt = 0.01\nt_end = 0\noutput_dir = out\n");
    let o = wilflow(&["run", &cfg], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/diagnostics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "step,time,energy,dissipation,mesh_ratio,min_element,stability_slack");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,"));
}

#[test]
fn segment_energy_decays_and_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let body = "geometry = circle_segment\ngeometry.circle_segment.segments = 128\n\
                kappa_bar = -0.5\ndt = 1e-3\nt_end = 0.2\nanalytic_sphere_radius = 1\n\
                boundary.default = navier\nframe_every = 50\n";
    let a = write_config(dir.path(), "a.cfg", &format!("{body}output_dir = a\n"));
    let b = write_config(dir.path(), "b.cfg", &format!("{body}output_dir = b\n"));
    for cfg in [&a, &b] {
        let o = wilflow(&["run", cfg], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ca = fs::read(dir.path().join("a/diagnostics.csv")).unwrap();
    let cb = fs::read(dir.path().join("b/diagnostics.csv")).unwrap();
    assert_eq!(ca, cb);
    let energy = csv_column(std::str::from_utf8(&ca).unwrap(), "energy");
    assert_eq!(energy.len(), 201);
    for w in energy.windows(2) {
        assert!(w[1] <= w[0], "{} > {}", w[1], w[0]);
    }
    for step in [0, 50, 100, 150, 200] {
        let frame = dir.path().join(format!("a/frame_{step}.vtk"));
        assert!(frame.exists(), "{}", frame.display());
        assert_eq!(fs::read(&frame).unwrap(), fs::read(dir.path().join(format!("b/frame_{step}.vtk"))).unwrap());
    }
}

#[test]
fn missing_mesh_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "m.cfg",
        "geometry = file\ngeometry.file.path = nowhere.off\ndt = 0.01\nt_end = 0.1\n",
    );
    let o = wilflow(&["run", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("nowhere.off"), "{err}");
    assert!(err.starts_with("error: kind=io step=- time=- message=\""), "{err}");
}

#[test]
fn unknown_keys_and_bad_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "u.cfg", "geometry = circle\ndt = 0.01\nt_end = 0.1\nspeed = 3\n");
    let o = wilflow(&["run", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown key 'speed'"));
    let cfg = write_config(dir.path(), "v.cfg", "geometry = circle\ndt = 0.03\nt_end = 0.1\n");
    assert_eq!(wilflow(&["run", &cfg], dir.path()).status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_1_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.cfg",
        "geometry = circle\ndt = 0.01\nt_end = 0.1\nsolver_tol = 1e-300\n",
    );
    let o = wilflow(&["run", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error: kind=singular_matrix step=0 time=0e0"), "{err}");
}

#[test]
fn validate_reports_mesh_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.cfg", "geometry = torus\ndt = 1e-3\nt_end = 1\n");
    let o = wilflow(&["validate", &cfg], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.starts_with("OK\n"));
    assert!(out.contains("J (elements): 10952"), "{out}");
    assert!(out.contains("K (vertices): 5476"));
    assert!(out.contains("boundary: empty"));
    assert!(out.contains("assumption A1: satisfied"));

    let seg = write_config(
        dir.path(),
        "s.cfg",
        "geometry = circle_segment\ndt = 1e-3\nt_end = 1\nboundary.1 = clamped\n",
    );
    let out = String::from_utf8(wilflow(&["validate", &seg], dir.path()).stdout).unwrap();
    assert!(out.contains("boundary part 0: 1 vertices, navier"), "{out}");
    assert!(out.contains("boundary part 1: 1 vertices, clamped"), "{out}");

    let bad = write_config(
        dir.path(),
        "b.cfg",
        "geometry = sphere\nw_mode = kappa_squared\ndt = 1e-3\nt_end = 1\n",
    );
    let o = wilflow(&["validate", &bad], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kappa_squared"));
}

#[test]
fn converge_closed_circle_is_second_order() {
    let dir = tempfile::tempdir().unwrap();
    let o = wilflow(&["converge", "closed_circle", "--kappa-bar=-0.5", "--levels=4"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("closed_circle.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 5);
    for col in ["eoc_x", "eoc_k1", "eoc_k2"] {
        let eoc = csv_column(&csv, col);
        assert!(eoc[0].is_nan());
        for e in &eoc[1..] {
            assert!((e - 2.0).abs() < 0.3, "{col}: {eoc:?}");
        }
    }
}

#[test]
fn converge_clamped_segment_errors_shrink_about_fourfold() {
    let dir = tempfile::tempdir().unwrap();
    let o = wilflow(
        &["converge", "segment_clamped", "--levels=3", "--base-segments=64", "--output=seg.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("seg.csv")).unwrap();
    assert!(csv.starts_with("# h = arc_length / J"));
    let md = csv_column(&csv, "md");
    assert_eq!(md.len(), 3);
    for w in md.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.0..6.5).contains(&ratio), "{md:?}");
    }
}

#[test]
fn converge_needs_two_levels() {
    let dir = tempfile::tempdir().unwrap();
    let o = wilflow(&["converge", "closed_circle", "--levels=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("need ≥ 2 levels for EOC"));
    let o = wilflow(&["converge", "ellipse"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
