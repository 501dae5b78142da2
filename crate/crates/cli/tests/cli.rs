//! End-to-end tests of the `lidarkit` binary on synthetic fixtures.

use lidarkit::dataset::kitti::{
    lidar_box_to_camera, write_calib_file, write_detection_file, write_velodyne_bin, CalibBundle,
};
use lidarkit::dataset::DetectionRecord;
use lidarkit::geometry::{Box3D, PointCloud};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lidarkit")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

/// Writes a 15-field ground-truth label line at high precision so the
/// parsed box matches `box3d` to well below the containment epsilon.
fn gt_label_line(class: &str, box3d: &Box3D, calib: &CalibBundle) -> String {
    let cam = lidar_box_to_camera(box3d, calib);
    let alpha = cam.ry - cam.loc[0].atan2(cam.loc[2]);
    format!(
        "{class} 0.00 0 {alpha:.12} 100.0 100.0 200.0 150.0 {:.12} {:.12} {:.12} {:.12} {:.12} {:.12} {:.12}",
        cam.h, cam.w, cam.l, cam.loc[0], cam.loc[1], cam.loc[2], cam.ry
    )
}

/// Cloud covering a fraction of the box along local X (full width and
/// height), inset 1 mm from the faces to survive the f32 storage format.
fn cloud_for(box3d: &Box3D, cover: f64) -> PointCloud {
    let mut cloud = PointCloud::new();
    let inset = 1e-3;
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                let p = box3d.to_world([
                    sx * (0.5 * box3d.l * cover - inset),
                    sy * (0.5 * box3d.w - inset),
                    sz * (0.5 * box3d.h - inset),
                ]);
                cloud.push(p[0], p[1], p[2], 0.3);
            }
        }
    }
    cloud
}

struct Fixture {
    root: PathBuf,
    _dir: tempfile::TempDir,
}

/// Two frames: 000000 has two cars (full and half coverage), 000001 has
/// one quarter-coverage car.
fn kitti_fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    for sub in ["velodyne", "label_2", "calib"] {
        fs::create_dir_all(root.join(sub)).unwrap();
    }
    let calib = CalibBundle::canonical();
    let frames: &[(&str, &[(Box3D, f64)])] = &[
        (
            "000000",
            &[
                (Box3D::new(10.0, 2.0, -0.8, 4.0, 1.6, 1.5, 0.3), 1.0),
                (Box3D::new(20.0, -5.0, -0.7, 4.0, 1.6, 1.5, -0.5), 0.5),
            ],
        ),
        (
            "000001",
            &[(Box3D::new(15.0, 0.0, -0.9, 4.0, 1.6, 1.5, 1.0), 0.25)],
        ),
    ];
    for (frame_id, boxes) in frames {
        let mut lines = Vec::new();
        let mut cloud = PointCloud::new();
        cloud.push(60.0, 20.0, 0.5, 0.1);
        for (box3d, cover) in boxes.iter() {
            lines.push(gt_label_line("Car", box3d, &calib));
            let object_cloud = cloud_for(box3d, *cover);
            for i in 0..object_cloud.len() {
                let [x, y, z] = object_cloud.point(i);
                cloud.push(x, y, z, object_cloud.intensity(i));
            }
        }
        fs::write(
            root.join("label_2").join(format!("{frame_id}.txt")),
            lines.join("\n") + "\n",
        )
        .unwrap();
        write_calib_file(&calib, &root.join("calib").join(format!("{frame_id}.txt"))).unwrap();
        write_velodyne_bin(&cloud, &root.join("velodyne").join(format!("{frame_id}.bin"))).unwrap();
    }
    Fixture { root, _dir: dir }
}

#[test]
fn pcs_stats_reports_expected_scores() {
    let fixture = kitti_fixture();
    let out = tempfile::tempdir().unwrap();
    let output = run(&[
        "pcs-stats",
        "--dataset-root",
        fixture.root.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let rows = data_rows(&out.path().join("pcs_scores.tsv"));
    assert_eq!(rows.len(), 3);
    // Inset of 1 mm per face shrinks each spanned extent by 2 mm.
    let expected = |l: f64, cover: f64| {
        ((l * cover - 2e-3) / l) * ((1.6 - 2e-3) / 1.6) * ((1.5 - 2e-3) / 1.5)
    };
    let q: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!((q[0] - expected(4.0, 1.0)).abs() < 1e-4, "{}", q[0]);
    assert!((q[1] - expected(4.0, 0.5)).abs() < 1e-4, "{}", q[1]);
    assert!((q[2] - expected(4.0, 0.25)).abs() < 1e-4, "{}", q[2]);
    assert_eq!(rows[0][5], "Complete");
    assert_eq!(rows[1][5], "Modest");
    assert_eq!(rows[2][5], "Sparse");

    let hist = data_rows(&out.path().join("pcs_histogram.tsv"));
    let count: usize = hist.iter().map(|r| r[2].parse::<usize>().unwrap()).sum();
    assert_eq!(count, 3);
    // Fractions are formatted at 6 decimals, so the parsed sum carries up
    // to one rounding quantum per bin.
    let total: f64 = hist.iter().map(|r| r[3].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-5 * hist.len() as f64);
}

#[test]
fn eval_of_ground_truth_as_detections_is_perfect() {
    let fixture = kitti_fixture();
    let out = tempfile::tempdir().unwrap();
    let label_dir = fixture.root.join("label_2");
    let output = run(&[
        "eval",
        "--dataset-root",
        fixture.root.to_str().unwrap(),
        "--results",
        label_dir.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let rows = data_rows(&out.path().join("eval_ap.tsv"));
    assert_eq!(rows.len(), 3); // Easy / Moderate / Hard
    for row in rows {
        assert_eq!(row[6], "1.000000", "stratum {}", row[0]);
    }
}

#[test]
fn eval_partial_detections_match_hand_ap() {
    let fixture = kitti_fixture();
    let results = tempfile::tempdir().unwrap();
    let calib = CalibBundle::canonical();
    // Detect only the first car of frame 000000; 3 counted GTs total, so
    // recall tops out at 1/3 with precision 1: AP11 = 4/11.
    let record = DetectionRecord {
        frame_id: "000000".into(),
        box3d: Box3D::new(10.0, 2.0, -0.8, 4.0, 1.6, 1.5, 0.3),
        class_name: "Car".into(),
        score: 0.9,
    };
    write_detection_file(&[record], &calib, &results.path().join("000000.txt")).unwrap();
    write_detection_file(&[], &calib, &results.path().join("000001.txt")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let output = run(&[
        "eval",
        "--dataset-root",
        fixture.root.to_str().unwrap(),
        "--results",
        results.path().to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--metric",
        "ap11",
        "--stratifier",
        "none",
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let rows = data_rows(&out.path().join("eval_ap.tsv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "All");
    assert_eq!(rows[0][5], "3");
    let ap: f64 = rows[0][6].parse().unwrap();
    assert!((ap - 4.0 / 11.0).abs() < 1e-6, "{ap}");
}

#[test]
fn eval_rejects_frame_id_mismatch() {
    let fixture = kitti_fixture();
    let results = tempfile::tempdir().unwrap();
    let calib = CalibBundle::canonical();
    // Result file for an unknown frame and none for the known ones.
    write_detection_file(&[], &calib, &results.path().join("999999.txt")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let output = run(&[
        "eval",
        "--dataset-root",
        fixture.root.to_str().unwrap(),
        "--results",
        results.path().to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("frame-id mismatch"), "{stderr}");
    assert!(stderr.contains("999999"), "{stderr}");
}

#[test]
fn voxel_stats_echoes_kitti_dims() {
    let fixture = kitti_fixture();
    let out = tempfile::tempdir().unwrap();
    let output = run(&[
        "voxel-stats",
        "--dataset-root",
        fixture.root.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("dims (1408, 1600, 40)"), "{stdout}");
    let rows = data_rows(&out.path().join("voxel_stats.tsv"));
    let aggregate = rows.last().unwrap();
    assert_eq!(aggregate[0], "aggregate");
    let empty_fraction: f64 = aggregate[5].parse().unwrap();
    assert!(empty_fraction > 0.99);
}

#[test]
fn convert_reproduces_lidar_boxes() {
    let fixture = kitti_fixture();
    let out = tempfile::tempdir().unwrap();
    let output = run(&[
        "convert",
        "--dataset-root",
        fixture.root.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let rows = data_rows(&out.path().join("lidar_boxes.tsv"));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][2], "10.000000");
    assert_eq!(rows[0][3], "2.000000");
    assert_eq!(rows[0][8], "0.300000");
    assert_eq!(rows[0][9], "Easy");
}

#[test]
fn cascade_sim_is_deterministic_and_identity_is_flat() {
    let out = tempfile::tempdir().unwrap();
    let args = [
        "cascade-sim",
        "--out",
        out.path().to_str().unwrap(),
        "--refiner",
        "identity",
        "--proposals",
        "50",
        "--stages",
        "1,3",
        "--iou-grid",
        "0.4,0.7",
        "--seed",
        "21",
    ];
    assert!(run(&args).status.success());
    let first = fs::read(out.path().join("cascade_iou_gain.tsv")).unwrap();
    assert!(run(&args).status.success());
    let second = fs::read(out.path().join("cascade_iou_gain.tsv")).unwrap();
    assert_eq!(first, second, "same seed must produce identical bytes");

    for row in data_rows(&out.path().join("cascade_iou_gain.tsv")) {
        let input: f64 = row[0].parse().unwrap();
        let mean: f64 = row[2].parse().unwrap();
        assert!((mean - input).abs() <= 0.02, "identity refiner moved the curve: {row:?}");
    }
}

#[test]
fn missing_cloud_reports_error_but_continues() {
    let fixture = kitti_fixture();
    fs::remove_file(fixture.root.join("velodyne/000001.bin")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let output = run(&[
        "pcs-stats",
        "--dataset-root",
        fixture.root.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("000001.bin"), "{stderr}");
    // Frame 000000 still produced rows.
    let rows = data_rows(&out.path().join("pcs_scores.tsv"));
    assert!(rows.iter().any(|r| r[0] == "000000"));
}

#[test]
fn config_file_applies_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.toml");
    fs::write(&config_path, "seed = 5\nproposals = 10\nstages = [1]\niou_grid = [0.5]\nrefiner = \"identity\"\n").unwrap();
    let out = tempfile::tempdir().unwrap();
    let output = run(&[
        "cascade-sim",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--seed",
        "9",
    ]);
    assert!(output.status.success());
    let text = fs::read_to_string(out.path().join("cascade_iou_gain.tsv")).unwrap();
    assert!(text.contains("# seed: 9"), "flag must override config file");
    assert!(text.contains("proposals=10"), "config file value must apply");
}
