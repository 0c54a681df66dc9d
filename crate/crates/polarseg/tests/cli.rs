//! End-to-end checks of the command-line surface: exit codes, file outputs
//! and cross-command roundtrips.

use std::path::Path;
use std::process::{Command, Output};

use polarseg::codec::{AngleGrid, PolarInstance};
use polarseg::geometry::Point;
use polarseg::io::{load_instances, save_candidates, save_instances, InstanceRecord};
use polarseg::postprocess::Candidate;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polarseg"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn polarseg")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_ngon_instances(path: &Path, n: usize) {
    let grid = AngleGrid::new(n).unwrap();
    let mut polygon = Vec::with_capacity(2 * n);
    for t in grid.angles() {
        polygon.push(64.0 + 20.0 * t.cos());
        polygon.push(64.0 + 20.0 * t.sin());
    }
    let rec = InstanceRecord {
        id: format!("ngon-{n}"),
        image_size: [128, 128],
        polygon,
        category: 0,
    };
    save_instances(&[rec], path).unwrap();
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(exit_code(&run(&["--help"])), 0);
    assert_eq!(exit_code(&run(&["no-such-command"])), 1);
    assert_eq!(exit_code(&run(&["encode", "--bogus-flag"])), 1);
}

#[test]
fn missing_input_is_a_data_error() {
    let out = run(&[
        "encode",
        "--input",
        "/nonexistent/file.json",
        "--out",
        "/tmp/x.json",
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn invalid_polygon_reports_id_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.json");
    std::fs::write(
        &input,
        r#"[{"id": "two-points", "image_size": [8, 8], "polygon": [0, 0, 1, 1]}]"#,
    )
    .unwrap();
    let out = run(&[
        "encode",
        "--input",
        input.to_str().unwrap(),
        "--out",
        dir.path().join("out.json").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("two-points"), "stderr: {stderr}");
}

#[test]
fn upperbound_synthetic_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ub.csv");
    let out = run(&[
        "upperbound",
        "--synthetic",
        "star,10,1",
        "--rays",
        "18,36,72",
        "--center",
        "both",
        "--raster",
        "256x256",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(
        exit_code(&out),
        0,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    // Header plus 3 ray counts x 2 center modes.
    assert_eq!(lines.len(), 7, "{text}");
    assert_eq!(
        lines[0],
        "ray_count,center_mode,mean_iou,median_iou,instance_count,wall_time_ms"
    );
    assert!(lines[1].starts_with("18,mass,"));
    assert!(lines[2].starts_with("18,box,"));
}

#[test]
fn upperbound_deterministic_up_to_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for csv in [&a, &b] {
        let out = run(&[
            "upperbound",
            "--synthetic",
            "ellipse,5,7",
            "--rays",
            "18,36",
            "--center",
            "mass",
            "--raster",
            "256x256",
            "--out",
            csv.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0);
    }
    // wall_time_ms is the last column and excluded from the guarantee.
    let strip = |path: &Path| -> Vec<String> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn encode_then_decode_roundtrips_aligned_ngon() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("ngon.json");
    write_ngon_instances(&input, 36);
    let encoded = dir.path().join("encoded.json");
    let out = run(&[
        "encode",
        "--input",
        input.to_str().unwrap(),
        "--rays",
        "36",
        "--center",
        "mass",
        "--out",
        encoded.to_str().unwrap(),
    ]);
    assert_eq!(
        exit_code(&out),
        0,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let decoded = dir.path().join("decoded.json");
    let out = run(&[
        "decode",
        "--input",
        encoded.to_str().unwrap(),
        "--raster",
        "128x128",
        "--out",
        decoded.to_str().unwrap(),
    ]);
    assert_eq!(
        exit_code(&out),
        0,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let original = load_instances(&input).unwrap();
    let roundtrip = load_instances(&decoded).unwrap();
    assert_eq!(roundtrip.instances.len(), 1);
    let a = original.instances[0].contour.points();
    let b = roundtrip.instances[0].contour.points();
    assert_eq!(a.len(), b.len());
    for (p, q) in a.iter().zip(b) {
        assert!(
            (p.x - q.x).abs() < 1e-6 && (p.y - q.y).abs() < 1e-6,
            "({}, {}) vs ({}, {})",
            p.x,
            p.y,
            q.x,
            q.y
        );
    }
}

#[test]
fn exact_flag_switches_encoder() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("ngon.json");
    write_ngon_instances(&input, 8);
    for exact in [false, true] {
        let encoded = dir.path().join(format!("enc-{exact}.json"));
        let mut args = vec![
            "encode",
            "--input",
            input.to_str().unwrap(),
            "--rays",
            "8",
            "--out",
            encoded.to_str().unwrap(),
        ];
        if exact {
            args.push("--exact");
        }
        assert_eq!(exit_code(&run(&args)), 0);
        let cands = polarseg::io::load_candidates(&encoded).unwrap();
        assert_eq!(cands.len(), 1);
        for &r in cands[0].instance.rays() {
            assert!((r - 20.0).abs() < 1e-6, "ray {r}");
        }
    }
}

#[test]
fn nms_collapses_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let grid = AngleGrid::new(12).unwrap();
    let dup = |score: f64| {
        let inst = PolarInstance::new(Point::new(64.0, 64.0), grid, vec![10.0; 12]).unwrap();
        Candidate::new(inst, score, 1.0, 0, 0).unwrap()
    };
    let input = dir.path().join("dups.json");
    save_candidates(&[dup(0.9), dup(0.8), dup(0.7)], &input).unwrap();
    let output = dir.path().join("kept.json");
    let out = run(&[
        "nms",
        "--candidates",
        input.to_str().unwrap(),
        "--raster",
        "128x128",
        "--out",
        output.to_str().unwrap(),
    ]);
    assert_eq!(
        exit_code(&out),
        0,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let kept = polarseg::io::load_candidates(&output).unwrap();
    assert_eq!(kept.len(), 1);
    assert!((kept[0].class_score - 0.9).abs() < 1e-12);
}

#[test]
fn iou_modes() {
    let dir = tempfile::tempdir().unwrap();

    // Pixel mode on identical instance files.
    let inst = dir.path().join("inst.json");
    write_ngon_instances(&inst, 16);
    let out = run(&[
        "iou",
        "--a",
        inst.to_str().unwrap(),
        "--b",
        inst.to_str().unwrap(),
        "--mode",
        "pixel",
    ]);
    assert_eq!(exit_code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.trim().ends_with("1.000000"), "{stdout}");

    // Polar modes on candidate files with known rays.
    let grid = AngleGrid::new(4).unwrap();
    let make = |rays: Vec<f64>, path: &Path| {
        let inst = PolarInstance::new(Point::new(0.0, 0.0), grid, rays).unwrap();
        save_candidates(&[Candidate::new(inst, 1.0, 1.0, 0, 0).unwrap()], path).unwrap();
    };
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    make(vec![1.0; 4], &a);
    make(vec![2.0; 4], &b);
    let out = run(&[
        "iou",
        "--a",
        a.to_str().unwrap(),
        "--b",
        b.to_str().unwrap(),
        "--mode",
        "polar-simplified",
    ]);
    assert_eq!(exit_code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("0.500000"));
    let out = run(&[
        "iou",
        "--a",
        a.to_str().unwrap(),
        "--b",
        b.to_str().unwrap(),
        "--mode",
        "polar-power",
    ]);
    assert_eq!(exit_code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("0.250000"));
}

#[test]
fn decode_mask_dump_writes_pbm() {
    let dir = tempfile::tempdir().unwrap();
    let grid = AngleGrid::new(12).unwrap();
    let inst = PolarInstance::new(Point::new(16.0, 16.0), grid, vec![8.0; 12]).unwrap();
    let input = dir.path().join("c.json");
    save_candidates(&[Candidate::new(inst, 1.0, 1.0, 0, 0).unwrap()], &input).unwrap();
    let masks = dir.path().join("masks");
    let out = run(&[
        "decode",
        "--input",
        input.to_str().unwrap(),
        "--raster",
        "32x32",
        "--out",
        dir.path().join("d.json").to_str().unwrap(),
        "--masks-out",
        masks.to_str().unwrap(),
    ]);
    assert_eq!(
        exit_code(&out),
        0,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let pbm = std::fs::read_to_string(masks.join("0.pbm")).unwrap();
    assert!(pbm.starts_with("P1\n32 32\n"), "{}", &pbm[..20]);
    assert!(pbm.contains('1'));
}

#[test]
fn fit_writes_per_instance_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("shapes.json");
    write_ngon_instances(&input, 24);
    let csv = dir.path().join("fit.csv");
    let out = run(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--loss",
        "polar-iou",
        "--steps",
        "200",
        "--rays",
        "18",
        "--seed",
        "5",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(
        exit_code(&out),
        0,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "id,loss,alpha,rays,steps,final_loss,polar_iou,pixel_iou,wall_time_ms"
    );
    assert!(lines[1].starts_with("ngon-24,polar-iou,1,18,200,"));
}
