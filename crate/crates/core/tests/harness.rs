use std::process::Command;

use sparse_precoding::harness::{
    read_fer_csv, run_fer_point, run_sweep, snr_at_fer, DetectorKind, FerCsvRow, FerRecord,
    LinkConfig,
};
use sparse_precoding::precode::PrecoderKind;

fn spsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spsim"))
}

fn small(detector: DetectorKind, precoder: PrecoderKind) -> LinkConfig {
    LinkConfig {
        n: 64,
        q: 8,
        precoder,
        detector,
        n_tau: 3,
        max_frames: 40,
        min_frame_errors: 10,
        ..LinkConfig::default()
    }
}

#[test]
fn noiseless_links_are_error_free() {
    for (det, pre, j) in [
        (DetectorKind::SwhMaxLog, PrecoderKind::Swh, 4),
        (DetectorKind::SwhLog, PrecoderKind::Swh, 16),
        (DetectorKind::SwhExact, PrecoderKind::Swh, 4),
        (DetectorKind::Epic, PrecoderKind::Dft, 64),
        (DetectorKind::Vamp, PrecoderKind::Sdft, 16),
    ] {
        let mut cfg = small(det, pre);
        cfg.n = 256;
        cfg.j = j;
        cfg.q = if j == 16 && det.map_variant().is_some() {
            4
        } else {
            8
        };
        cfg.max_frames = 100;
        let r = run_fer_point(&cfg, 40.0).unwrap();
        assert_eq!(r.frames, 100);
        assert_eq!(r.frame_errors, 0, "{det} {pre} J={j}");
        assert!(r.mean_ti < 2.0, "{det} {pre} J={j}: {}", r.mean_ti);
    }
}

#[test]
fn fer_points_are_reproducible() {
    let cfg = small(DetectorKind::Epic, PrecoderKind::Sdft);
    let a = run_fer_point(&cfg, 2.0).unwrap();
    let b = run_fer_point(&cfg, 2.0).unwrap();
    assert_eq!(a, b);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let c = pool.install(|| run_fer_point(&cfg, 2.0).unwrap());
    assert_eq!(a, c);
}

#[test]
fn stop_rule_is_exact() {
    let mut cfg = small(DetectorKind::SwhMaxLog, PrecoderKind::Swh);
    cfg.min_frame_errors = 7;
    cfg.max_frames = 1000;
    let r = run_fer_point(&cfg, -2.0).unwrap();
    assert_eq!(r.frame_errors, 7);
    assert!(r.frames >= 7);
    assert!((r.fer - 7.0 / r.frames as f64).abs() < 1e-15);
}

#[test]
fn sweep_writes_and_reads_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fer.csv");
    let mut cfg = small(DetectorKind::SwhMaxLog, PrecoderKind::Swh);
    cfg.ebn0_db = vec![0.0, 6.0];
    cfg.output = Some(path.clone());
    let recs = run_sweep(&cfg).unwrap();
    assert_eq!(recs.len(), 2);
    assert!(recs[1].fer <= recs[0].fer);
    let header = std::fs::read_to_string(&path).unwrap();
    assert!(header.starts_with("scheme,detector,Q,J,ebn0_db,frames,frame_errors,fer,ber,mean_ti\n"));
    let rows = read_fer_csv(&path).unwrap();
    let want: Vec<FerCsvRow> = recs.iter().map(FerCsvRow::from).collect();
    assert_eq!(rows, want);

    cfg.ebn0_db = vec![3.0];
    assert_eq!(run_sweep(&cfg).unwrap().len(), 1);
    cfg.output = Some(dir.path().join("missing").join("x.csv"));
    assert!(matches!(
        run_sweep(&cfg),
        Err(sparse_precoding::Error::Csv(_) | sparse_precoding::Error::Io(_))
    ));
}

#[test]
fn interpolated_crossing() {
    let rec = |e: f64, fer: f64| FerRecord {
        scheme: String::new(),
        detector: String::new(),
        q: 4,
        j: 4,
        ebn0_db: e,
        frames: 1000,
        frame_errors: (fer * 1000.0) as u64,
        bit_errors: 0,
        fer,
        ber: 0.0,
        mean_ti: 1.0,
    };
    let s = snr_at_fer(&[rec(1.0, 0.1), rec(2.0, 0.001)], 0.01).unwrap();
    assert!((s - 1.5).abs() < 1e-12);
    assert!(snr_at_fer(&[rec(1.0, 0.1)], 0.01).is_none());
}

#[test]
fn cli_complexity_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = spsim()
        .args(["complexity", "--preset", "table4", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with(
        "scheme,detector,Q,J,Ns,adds_analytic,mults_analytic,adds_measured,mults_measured\n"
    ));
    assert_eq!(text.lines().count(), 22);
}

#[test]
fn cli_errors() {
    let o = spsim()
        .args(["simulate", "--config", "/nonexistent/missing.toml"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(
        spsim().arg("frobnicate").output().unwrap().status.code(),
        Some(1)
    );
    assert_eq!(
        spsim()
            .args(["simulate", "--bogus"])
            .output()
            .unwrap()
            .status
            .code(),
        Some(1)
    );

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("big.toml");
    std::fs::write(&cfg, "j = 64\nq = 8\ndetector = \"swh-log\"\n").unwrap();
    let o = spsim()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn cli_simulate_and_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "n = 64\nq = 8\nn_tau = 2\nebn0_db = [4.0]\nmax_frames = 10\nmin_frame_errors = 5\nexit_frames = 4\n",
    )
    .unwrap();
    let out = dir.path().join("fer.csv");
    let o = spsim()
        .args(["simulate", "--seed", "3", "--threads", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 1);
    assert!(out.exists());

    let ex = dir.path().join("exit.csv");
    let o = spsim()
        .args(["exit", "--ebn0", "4", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&ex)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&ex).unwrap();
    assert!(text.starts_with("ti,IA_det,IE_det,IA_dec,IE_dec\n"));
    assert_eq!(text.lines().count(), 4);
    assert!(dir.path().join("exit_decoder.csv").exists());
}

#[test]
fn cli_selftest() {
    let o = spsim().arg("selftest").output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}
