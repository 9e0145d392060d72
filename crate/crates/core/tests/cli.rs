use std::path::Path;
use std::process::{Command, Output};

use hgnd::mesh::ply::write_ply;
use hgnd::{shapes, Point3, Triangle, TriangleMesh};

fn hgnd(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hgnd"))
        .args(args)
        .current_dir(dir)
        .env("HGND_LOG", "warn")
        .output()
        .unwrap()
}

fn tetrahedron() -> TriangleMesh {
    let v = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.2, 0.0),
        Point3::new(0.1, 0.2, 0.9),
    ];
    let t = vec![
        Triangle::new(0, 2, 1),
        Triangle::new(0, 1, 3),
        Triangle::new(1, 2, 3),
        Triangle::new(0, 3, 2),
    ];
    TriangleMesh::new(v, t).unwrap()
}

#[test]
fn describe_tetrahedron() {
    let dir = tempfile::tempdir().unwrap();
    write_ply(&tetrahedron(), dir.path().join("tet.ply")).unwrap();
    let out = hgnd(&["describe", "tet.ply", "--out", "tet.csv", "--radius-mr", "20"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = hgnd::descriptor::io::read_descriptors(dir.path().join("tet.csv")).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r.values.len() == 96));
}

#[test]
fn empty_patch_is_logged_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    write_ply(&tetrahedron(), dir.path().join("tet.ply")).unwrap();
    std::fs::write(dir.path().join("kp.txt"), "0.2 0.2 0.1\n100 100 100\n").unwrap();
    let out = hgnd(
        &["describe", "tet.ply", "--out", "d.bin", "--keypoint-file", "kp.txt", "--radius-mr", "20", "--drop-log", "drops.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let drops = std::fs::read_to_string(dir.path().join("drops.csv")).unwrap();
    assert_eq!(drops.lines().count(), 2);
    assert!(drops.lines().nth(1).unwrap().starts_with("1,") && drops.contains("empty_patch"));
    assert_eq!(hgnd::descriptor::io::read_descriptors(dir.path().join("d.bin")).unwrap().len(), 1);
}

#[test]
fn describe_and_match_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = shapes::rescaled_to_resolution(&shapes::bumpy_sphere(20, 30, 1.0, 0.3, 5), 1.0);
    write_ply(&mesh, dir.path().join("m.ply")).unwrap();
    for name in ["a.csv", "b.csv"] {
        let out = hgnd(&["describe", "m.ply", "--out", name, "--keypoints", "50", "--seed", "3"], dir.path());
        assert!(out.status.success());
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());

    let out = hgnd(&["match", "a.csv", "b.csv", "--eps", "0.8"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("scene_index,model_index,scene_keypoint,model_keypoint,d1,d2,ratio"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 50);
    assert!(rows.iter().all(|r| r[0] == r[1] && r[4] == "0"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| hgnd(args, dir.path()).status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["--version"]), Some(0));
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["describe", "missing.ply", "--out", "x.csv"]), Some(2));

    std::fs::write(dir.path().join("bad.ply"), "ply\nformat ascii 1.0\nelement vertex 1\nend_header\n").unwrap();
    assert_eq!(code(&["describe", "bad.ply", "--out", "x.csv"]), Some(3));

    write_ply(&tetrahedron(), dir.path().join("tet.ply")).unwrap();
    assert_eq!(code(&["describe", "tet.ply", "--out", "x.csv", "--radius-mr", "-1"]), Some(1));

    std::fs::write(dir.path().join("bad.cfg"), "model = builtin:torus\nseed = many\n").unwrap();
    assert_eq!(code(&["bench", "bad.cfg"]), Some(1));
}

#[test]
fn synth_writes_scene_and_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    write_ply(&tetrahedron(), dir.path().join("tet.ply")).unwrap();
    std::fs::write(
        dir.path().join("s.cfg"),
        "model = tet.ply\nmodel = tet.ply\ntransform = 1 0 0 10 0 1 0 0 0 0 1 0\nkeypoints_per_model = 4\nout = scene\n",
    )
    .unwrap();
    let out = hgnd(&["synth", "s.cfg"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let scene = hgnd::mesh::ply::load_ply(dir.path().join("scene/scene.ply")).unwrap();
    assert_eq!(scene.vertex_count(), 8);
    assert!(dir.path().join("scene/ground_truth.txt").exists());
}
