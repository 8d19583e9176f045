use gradpred::projection::{load_projection, save_projection};
use gradpred::rng::CounterRng;
use gradpred::trace::{encode_binary, meta_path};
use gradpred::*;

fn random_trace(dim: usize, steps: usize, seed: u64) -> GradientTrace {
    GradientTrace::new(dim, CounterRng::new(seed, 21).normal_vec(dim * steps)).unwrap()
}

#[test]
fn binary_file_roundtrip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    for (d, n) in [(16, 100), (8, 32), (1, 1)] {
        let t = random_trace(d, n, d as u64);
        let path = dir.path().join(format!("t{d}.gtrc"));
        save_trace(&t, &path, TraceFormat::Binary).unwrap();
        let back = load_trace(&path, TraceFormat::Binary).unwrap();
        assert_eq!(encode_binary(&back), encode_binary(&t));
    }
    let zero = GradientTrace::new(1, vec![0.0]).unwrap();
    let path = dir.path().join("zero.gtrc");
    save_trace(&zero, &path, TraceFormat::Binary).unwrap();
    assert_eq!(
        load_trace(&path, TraceFormat::Binary).unwrap().values(),
        &[0.0]
    );
}

#[test]
fn csv_file_roundtrip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let t = random_trace(5, 40, 3);
    let path = dir.path().join("t.csv");
    save_trace(&t, &path, TraceFormat::from_path(&path)).unwrap();
    let back = load_trace(&path, TraceFormat::Csv).unwrap();
    let worst = t
        .values()
        .iter()
        .zip(back.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert_eq!(worst, 0.0);
}

#[test]
fn hand_written_csv_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.csv");
    std::fs::write(&path, "1.0,0.0\n0.0,1.0\n").unwrap();
    let t = load_trace(&path, TraceFormat::Csv).unwrap();
    assert_eq!((t.dim(), t.steps()), (2, 2));
    assert_eq!(t.column(0), &[1.0, 0.0]);
    assert_eq!(t.column(1), &[0.0, 1.0]);
}

#[test]
fn metadata_travels_in_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.gtrc");
    let mut t = random_trace(3, 4, 1);
    t.insert_meta("run", "demo");
    t.insert_meta("interval", "10");
    save_trace(&t, &path, TraceFormat::Binary).unwrap();
    assert!(meta_path(&path).exists());
    let back = load_trace(&path, TraceFormat::Binary).unwrap();
    assert_eq!(back.meta(), t.meta());

    let bare = random_trace(3, 4, 2);
    save_trace(&bare, &path, TraceFormat::Binary).unwrap();
    assert!(!meta_path(&path).exists());
    assert!(load_trace(&path, TraceFormat::Binary)
        .unwrap()
        .meta()
        .is_empty());
}

#[test]
fn missing_and_malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.gtrc");
    let err = load_trace(&missing, TraceFormat::Binary).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.exit_code(), 2);

    let junk = dir.path().join("junk.gtrc");
    std::fs::write(&junk, b"NOPE0000000000000000000000000000").unwrap();
    assert!(matches!(
        load_trace(&junk, TraceFormat::Binary),
        Err(Error::Format(_))
    ));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1.0,NaN\n").unwrap();
    assert!(matches!(
        load_trace(&bad, TraceFormat::Csv),
        Err(Error::NonFinite { row: 1, step: 0 })
    ));
}

#[test]
fn projection_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.gprj");
    let p = make_projection(33, 7, 5).unwrap();
    save_projection(&p, &path).unwrap();
    let first = std::fs::read(&path).unwrap();
    let q = load_projection(&path).unwrap();
    assert_eq!(q.matrix().as_slice(), p.matrix().as_slice());
    assert_eq!(
        (q.k, q.d, q.seed, q.generator_id),
        (p.k, p.d, p.seed, p.generator_id)
    );
    save_projection(&q, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}
