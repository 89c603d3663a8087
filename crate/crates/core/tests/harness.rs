use std::io::Write;

use sdafc::federation::Method;
use sdafc::harness::*;
use sdafc::Error;

fn quick(out: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        dataset: "toy".into(),
        methods: vec![Method::KmCentral],
        p: vec![1.0],
        rates: vec![0.0],
        seeds: vec![0, 1, 2],
        out: out.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

fn row(method: Method, p: f64, rate: f64, seed: u64, nmi: f64) -> RunResult {
    RunResult {
        dataset: "toy".into(),
        method,
        p,
        rate,
        seed,
        k: 2,
        m: 2,
        fuzzy_degree: 1.1,
        nmi: Some(nmi),
        kappa: Some(nmi),
        wall_time_s: 0.0,
        uploads: 2,
        broadcasts: 1,
        error: String::new(),
    }
}

#[test]
fn one_cell_per_seed_and_central_km_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let rows = run_grid(&quick(dir.path())).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.nmi == Some(1.0) && r.is_ok()));
    assert_eq!(read_results(dir.path().join("results.csv")).unwrap(), rows);
    let echo: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(echo["resolved_k"], 2);
    assert_eq!(echo["seeds_per_cell"], 3);
    assert_eq!(echo["resolved_gan"]["epochs"], 500);
}

#[test]
fn csv_header_is_fixed() {
    let dir = tempfile::tempdir().unwrap();
    run_grid(&quick(dir.path())).unwrap();
    let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "dataset,method,p,rate,seed,k,m,fuzzy_degree,nmi,kappa,wall_time_s,uploads,broadcasts,error"
    );
}

#[test]
fn rerun_reproduces_metric_columns() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick(dir.path());
    cfg.methods = vec![Method::SdaFcKm, Method::KFed, Method::Ffcm, Method::Oracle];
    cfg.p = vec![0.5];
    cfg.rates = vec![0.0, 0.5];
    cfg.seeds = vec![4];
    cfg.gan.epochs = Some(2);
    let strip = |rows: Vec<RunResult>| -> Vec<RunResult> {
        rows.into_iter().map(|r| RunResult { wall_time_s: 0.0, ..r }).collect()
    };
    let a = strip(run_grid(&cfg).unwrap());
    cfg.protocol.parallel_clients = true;
    let b = strip(run_grid(&cfg).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.len(), 8);
    for r in &a {
        assert!(r.is_ok(), "{}", r.error);
        if r.method.is_federated() {
            assert_eq!(r.broadcasts, 1);
            assert_eq!(r.uploads, if r.rate == 0.0 { 2 } else { 1 });
        }
    }
}

#[test]
fn failures_become_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick(dir.path());
    cfg.methods = vec![Method::KFed];
    // Two clients cannot both be disconnected.
    cfg.rates = vec![1.0];
    cfg.seeds = vec![0];
    let rows = run_grid(&cfg).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(!rows[0].is_ok());
    assert_eq!(rows[0].nmi, None);
    let back = read_results(dir.path().join("results.csv")).unwrap();
    assert_eq!(back[0].error, rows[0].error);
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick(dir.path());
    cfg.p = vec![1.5];
    assert!(matches!(run_grid(&cfg), Err(Error::Domain(_))));
    let mut cfg = quick(dir.path());
    cfg.seeds.clear();
    assert!(run_grid(&cfg).is_err());
    assert!(ExperimentConfig::from_json(r#"{"datset": "toy"}"#).is_err());
}

#[test]
fn config_json_fills_defaults() {
    let cfg = ExperimentConfig::from_json(
        r#"{"dataset": "pendigits", "methods": ["sda-fc-km", "k-fed"], "p": [0, 0.25],
            "gan": {"learning_rate": 0.001},
            "partition_scheme": {"kind": "non_iid"}}"#,
    )
    .unwrap();
    assert_eq!(cfg.fuzzy_degree, 1.1);
    assert_eq!(cfg.seeds, vec![0, 1, 2]);
    let gan = cfg.gan_config(10, 16);
    assert_eq!(gan.epochs, 200);
    assert_eq!(gan.learning_rate, 1e-3);
    assert_eq!(gan.latent.noise_dim, 8);
    let split = ExperimentConfig::from_json(
        r#"{"dataset": "toy-split", "partition_scheme": {"kind": "half_plane", "angle": 0.8, "offset": 0}}"#,
    )
    .unwrap();
    assert_eq!(split.partition_scheme, PartitionScheme::HalfPlane { angle: 0.8, offset: 0.0 });
}

#[test]
fn csv_dataset_uses_last_column_as_label() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pts.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    for i in 0..20 {
        let (x, c) = if i % 2 == 0 { (0.0, "a") } else { (10.0, "b") };
        writeln!(f, "{},{},{}", x + i as f64 * 0.01, 1.0, c).unwrap();
    }
    drop(f);
    // Text labels are not numeric; give the column explicitly.
    let mut cfg = quick(dir.path());
    cfg.dataset = path.to_string_lossy().into_owned();
    cfg.label_column = Some(2);
    let ds = cfg.load_dataset(0).unwrap();
    assert_eq!((ds.n(), ds.d(), ds.k_true), (20, 2, 2));

    let num = dir.path().join("num.csv");
    std::fs::write(&num, "0.0,1.0,3\n0.1,1.0,3\n5.0,5.0,7\n").unwrap();
    cfg.dataset = num.to_string_lossy().into_owned();
    cfg.label_column = None;
    let ds = cfg.load_dataset(0).unwrap();
    assert_eq!(ds.d(), 2);
    assert_eq!(ds.labels().unwrap(), &[0, 0, 1]);
}

#[test]
fn summary_counts_family_wins() {
    let mut rows = Vec::new();
    let sda = [0.9, 0.8, 0.7, 0.5, 0.4];
    let kfed = [0.8, 0.7, 0.6, 0.6, 0.5];
    for (i, p) in [0.0, 0.25, 0.5, 0.75, 1.0].into_iter().enumerate() {
        rows.push(row(Method::SdaFcKm, p, 0.0, 0, sda[i]));
        rows.push(row(Method::KFed, p, 0.0, 0, kfed[i]));
    }
    let s = summarize_rows(&rows);
    assert_eq!(s.cells.len(), 10);
    let nmi_counts: Vec<(Method, usize)> = s
        .counts
        .iter()
        .filter(|c| c.metric == "nmi")
        .map(|c| (c.method, c.count))
        .collect();
    assert_eq!(nmi_counts, vec![(Method::SdaFcKm, 3), (Method::KFed, 2)]);
    let text = render_summary(&s);
    assert!(text.contains("count        sda-fc-km=3 k-fed=2"), "{text}");
}

#[test]
fn summary_of_single_row_and_bad_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    write_results(&[row(Method::KmCentral, 1.0, 0.0, 0, 1.0)], &path).unwrap();
    let text = summarize(&path).unwrap();
    assert!(text.contains("km-central"));
    assert!(!text.contains("count"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        "dataset,method,p,rate,seed,k,m,fuzzy_degree,nmi,kappa,wall_time_s,uploads,broadcasts,error\n\
         toy,km-central,1,0,0,2,1,1.1,1,1,0.1,0,0,\n\
         toy,not-a-method,1,0,0,2,1,1.1,1,1,0.1,0,0,\n",
    )
    .unwrap();
    match summarize(&bad) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn failure_curve_averages_seeds_per_rate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let rows = vec![
        row(Method::SdaFcKm, 1.0, 0.0, 0, 1.0),
        row(Method::SdaFcKm, 1.0, 0.0, 1, 0.8),
        row(Method::SdaFcKm, 1.0, 0.5, 0, 0.6),
        row(Method::SdaFcKm, 1.0, 0.5, 1, 0.4),
        row(Method::SdaFcKm, 0.0, 0.5, 0, 0.9),
        row(Method::KFed, 1.0, 0.5, 0, 0.1),
    ];
    write_results(&rows, &path).unwrap();
    let curve = emit_failure_curve(&path, "toy", Method::SdaFcKm, Some(1.0)).unwrap();
    assert_eq!(curve.len(), 2);
    assert!((curve[0].mean_nmi - 0.9).abs() < 1e-12);
    assert!((curve[1].mean_nmi - 0.5).abs() < 1e-12);
    assert_eq!(curve[1].runs, 2);
    let out = dir.path().join("curve.csv");
    write_failure_curve(&curve, &out).unwrap();
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 3);

    assert!(matches!(
        emit_failure_curve(&path, "toy", Method::Ffcm, None),
        Err(Error::EmptySelection(_))
    ));
    assert!(matches!(
        emit_failure_curve(&path, "toy", Method::KFed, None),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn dumps_synthetic_data_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick(dir.path());
    cfg.methods = vec![Method::SdaFcKm];
    cfg.seeds = vec![0];
    cfg.gan.epochs = Some(1);
    cfg.dump_synthetic = true;
    cfg.save_runs = true;
    run_grid(&cfg).unwrap();
    let dumped = dir.path().join("synthetic/toy_sda-fc-km_p1_r0_s0.csv");
    assert_eq!(std::fs::read_to_string(dumped).unwrap().lines().count(), 400);
    assert!(dir.path().join("runs/toy_sda-fc-km_p1_r0_s0.json").exists());
}
