use std::fs;

use hfion::dscale::HamiltonianKind;
use hfion::sweep::{
    curve_table, emit_curves, read_curve_csv, run_sweep, write_curve_csv, CurveFormat, Method, SweepResult, SweepSpec,
    RESULTS_FILE,
};

fn small_spec() -> SweepSpec {
    let mut spec = SweepSpec::new(1.0, 2, vec![3.0, 6.0, 9.0]);
    spec.restarts = 6;
    spec.seed = 3;
    spec
}

#[test]
fn coulomb_limit_binding_energy() {
    let mut spec = SweepSpec::new(1.0, 1, vec![0.0]);
    spec.restarts = 4;
    let res = run_sweep(&spec, None).unwrap();
    let p = res.get(&Method::Dscale(HamiltonianKind::Planar), 1, 0.0).unwrap();
    assert!((p.binding_energy.unwrap() + 0.5).abs() < 1e-6);
    assert_eq!(p.mass, 1.0);
}

#[test]
fn missing_points_are_recomputed_identically() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec();
    let full = run_sweep(&spec, Some(dir.path())).unwrap();
    let path = dir.path().join(RESULTS_FILE);
    let original = fs::read_to_string(&path).unwrap();

    let mut partial: SweepResult = serde_json::from_str(&original).unwrap();
    let dropped = partial.points.remove(partial.points.len() / 2);
    fs::write(&path, partial.to_json().unwrap()).unwrap();

    let resumed = run_sweep(&spec, Some(dir.path())).unwrap();
    assert_eq!(resumed, full);
    assert_eq!(resumed.get(&dropped.method, dropped.n, dropped.alpha0), Some(&dropped));
    assert_eq!(fs::read_to_string(&path).unwrap(), original);
}

#[test]
fn curve_csv_round_trips() {
    let res = run_sweep(&small_spec(), None).unwrap();
    let (header, rows) = curve_table(&res, &Method::Dscale(HamiltonianKind::Planar));
    let mut buf = Vec::new();
    write_curve_csv(&mut buf, &header, &rows).unwrap();
    let (h2, r2) = read_curve_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(h2, header);
    assert_eq!(r2.len(), rows.len());
    for (a, b) in rows.iter().flatten().zip(r2.iter().flatten()) {
        match (a, b) {
            (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300), "{x} vs {y}"),
            (None, None) => {}
            _ => panic!("cell presence differs"),
        }
    }
}

#[test]
fn empty_result_emits_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let res = SweepResult {
        spec: small_spec(),
        version: "test".into(),
        points: vec![],
    };
    let paths = emit_curves(&res, dir.path(), CurveFormat::Csv).unwrap();
    assert_eq!(paths.len(), 1);
    let text = fs::read_to_string(&paths[0]).unwrap();
    assert_eq!(text, "alpha0,E_1,E_2,BE_1,BE_2,BEnorm_1,BEnorm_2\n");
}
