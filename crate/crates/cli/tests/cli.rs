use std::path::Path;
use std::process::{Command, Output};

use dclab::dcgauge::{dc_sum, umd_ratio};
use dclab::io::{read_matrices, read_witness};
use dclab::quadform::{counterexample_form, duality_form, NormedSpace, QuadraticForm, SymOperator, Variant};
use nalgebra::DMatrix;

const HEADER: &str = "scenario,p,dim,depth,kind,value,seed,restarts,wall_ms,witness";

fn dclab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dclab"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("DCLAB_THREADS", t),
        None => cmd.env_remove("DCLAB_THREADS"),
    };
    cmd.output().unwrap()
}

struct Row {
    fields: Vec<String>,
}

impl Row {
    fn get(&self, name: &str) -> &str {
        let idx = HEADER.split(',').position(|h| h == name).unwrap();
        &self.fields[idx]
    }

    fn value(&self) -> f64 {
        self.get("value").parse().unwrap()
    }
}

fn rows(out: &Output, header: bool) -> Vec<Row> {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    if header {
        assert_eq!(lines.next(), Some(HEADER));
    }
    lines.map(|l| Row { fields: l.split(',').map(str::to_string).collect() }).collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn estimate_dc_scalar_square() {
    let out = dclab(&["estimate-dc", "--form", "identity", "--dim", "1", "--depth", "6"], None);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = rows(&out, false);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].get("kind"), "dc");
    assert!(r[0].value() >= 1.999 && r[0].value() <= 2.0 + 1e-9);
}

#[test]
fn gamma2_identity() {
    let out = dclab(&["gamma2", "--form", "identity", "--dim", "4"], None);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!((rows(&out, false)[0].value() - 1.0).abs() <= 1e-6);
}

#[test]
fn dominate_half_swap_with_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = dclab(&["dominate", "--form", "swap", "--objective", "spectral", "--out", out_dir], None);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = &rows(&out, false)[0];
    assert!((r.value() - 0.5).abs() <= 1e-4);
    let s = read_matrices(std::fs::read(r.get("witness")).unwrap().as_slice()).unwrap().remove(0);
    let t = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
    for m in [&s - &t, &s + &t] {
        assert!(m.symmetric_eigen().eigenvalues.min() >= -1e-9);
    }
    assert!((s.symmetric_eigen().eigenvalues.amax() - r.value()).abs() <= 1e-9);
    assert!(Path::new(out_dir).join("dominate.csv").exists());
}

#[test]
fn dominate_matrix_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    std::fs::write(&path, "2,2\n1,0\n0,-1\n").unwrap();
    let out = dclab(&["dominate", "--matrix", path.to_str().unwrap(), "--p", "1"], None);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!((rows(&out, false)[0].value() - 1.0).abs() <= 1e-6);
}

#[test]
fn estimate_umd_predictable_not_below_fixed() {
    let base = ["estimate-umd", "--form", "identity", "--dim", "2", "--p", "1", "--py", "inf", "--depth", "3", "--restarts", "4"];
    let fixed = dclab(&base, None);
    let mut args = base.to_vec();
    args.extend(["--mode", "predictable"]);
    let pred = dclab(&args, None);
    assert!(fixed.status.success() && pred.status.success(), "{}", stderr(&pred));
    let (f, p) = (&rows(&fixed, false)[0], &rows(&pred, false)[0]);
    assert_eq!(f.get("kind"), "umd_fixed");
    assert_eq!(p.get("kind"), "umd_predictable");
    assert!(p.value() >= f.value() - 1e-12);
}

#[test]
fn trichotomy_hilbert_rows_respect_ceilings() {
    let out = dclab(
        &["trichotomy", "--p", "2", "--dim", "2,4,8", "--depth", "4", "--restarts", "4", "--steps", "100"],
        None,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let r = rows(&out, true);
    assert_eq!(r.len(), 6);
    for row in &r {
        match row.get("kind") {
            // duality form on l2 + l2 has ‖T‖₂ = 1/2
            "dc" => assert!(row.value() <= 1.0 + 1e-9),
            "dominate" => assert!(row.value() <= 1.0 + 1e-6),
            other => panic!("unexpected kind {other}"),
        }
    }
}

#[test]
fn trichotomy_l1_growth_with_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = dclab(
        &[
            "trichotomy", "--p", "1", "--dim", "2,4,8", "--depth", "5", "--restarts", "8", "--steps", "400", "--out", out_dir,
            "--svg",
        ],
        None,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let r = rows(&out, true);
    let dc: Vec<&Row> = r.iter().filter(|row| row.get("kind") == "dc").collect();
    assert_eq!(dc.len(), 3);
    for w in dc.windows(2) {
        assert!(w[1].value() > 0.98 * w[0].value());
    }
    for row in &dc {
        let m: usize = row.get("dim").parse().unwrap();
        let (q, space) = counterexample_form(m, Variant::Hadamard).unwrap();
        let file = std::fs::File::open(row.get("witness")).unwrap();
        let witness = read_witness(std::io::BufReader::new(file)).unwrap();
        let again = dc_sum(&q, &space, &witness.martingale).unwrap().ratio;
        assert!((again - row.value()).abs() <= 1e-9);
    }
    let dom: Vec<&Row> = r.iter().filter(|row| row.get("kind") == "dominate").collect();
    for w in dom.windows(2) {
        assert!(w[1].value() > 0.98 * w[0].value());
    }
    assert!(Path::new(out_dir).join("trichotomy.svg").exists());
    assert!(Path::new(out_dir).join("trichotomy.csv").exists());
}

#[test]
fn duality_rows_and_reproducibility_across_workers() {
    let args = ["duality", "--p", "1,2", "--dim", "2,4", "--depth", "3", "--restarts", "4", "--steps", "80", "--seed", "5"];
    let one = dclab(&args, Some("1"));
    let two = dclab(&args, Some("2"));
    assert!(one.status.success(), "{}", stderr(&one));
    assert!(two.status.success(), "{}", stderr(&two));
    let (a, b) = (rows(&one, true), rows(&two, true));
    assert_eq!(a.len(), 4);
    let order: Vec<(String, String)> = a.iter().map(|r| (r.get("p").to_string(), r.get("dim").to_string())).collect();
    assert_eq!(order, [("1", "2"), ("1", "4"), ("2", "2"), ("2", "4")].map(|(p, d)| (p.to_string(), d.to_string())));
    for (x, y) in a.iter().zip(&b) {
        assert!((x.value() - y.value()).abs() <= 1e-9);
    }
    for row in a.iter().filter(|r| r.get("p") == "2") {
        assert!(row.value() <= 1.0 + 1e-9);
    }
}

#[test]
fn duality_single_dim_one_row() {
    let out = dclab(&["duality", "--p", "2", "--dim", "4", "--depth", "3", "--restarts", "2", "--steps", "50"], None);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(rows(&out, true).len(), 1);
}

#[test]
fn umd_witness_reevaluates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dclab(
        &[
            "estimate-umd", "--form", "ones", "--dim", "2", "--p", "2", "--depth", "3", "--restarts", "2", "--mode",
            "predictable", "--out", dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let r = &rows(&out, false)[0];
    let file = std::fs::File::open(r.get("witness")).unwrap();
    let w = read_witness(std::io::BufReader::new(file)).unwrap();
    let x = NormedSpace::lp(2, 2.0).unwrap();
    let again = umd_ratio(&DMatrix::from_element(2, 2, 1.0), &x, &x, &w.martingale, &w.signs.unwrap()).unwrap();
    assert!((again - r.value()).abs() <= 1e-9);
}

#[test]
fn config_file_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.cfg");
    std::fs::write(&good, "p = 2\ndim = 1\ndepth = 2\nrestarts = 2\nsteps = 20\n").unwrap();
    let out = dclab(&["duality", "--config", good.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = rows(&out, true);
    assert_eq!((r.len(), r[0].get("depth")), (1, "2"));

    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "p = 2\ncolour = blue\n").unwrap();
    let out = dclab(&["duality", "--config", bad.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown key"));

    let out = dclab(&["trichotomy", "--dim", ""], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("dim list is empty"));

    let out = dclab(&["trichotomy", "--p", "1", "--dim", "3"], None);
    assert_eq!(out.status.code(), Some(2));

    let out = dclab(&["gamma2", "--dim", "2"], Some("zero"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn violated_expectation_exits_one_and_names_it() {
    let out = dclab(&["control-fn", "--rho-scale", "0.1"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("control function exists within the budget"));
}

#[test]
fn control_fn_square_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = dclab(&["control-fn", "--out", dir.path().to_str().unwrap()], None);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = &rows(&out, false)[0];
    assert!((r.value() - 0.5).abs() <= 1e-9);
    let text = std::fs::read_to_string(r.get("witness")).unwrap();
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        if v[0].abs() <= 3.0 {
            assert!((v[1] - v[0] * v[0]).abs() <= 1e-6);
        }
    }
}

#[test]
fn scalar_duality_form_is_half_swap() {
    let (q, _) = duality_form(&NormedSpace::lp(1, 2.0).unwrap()).unwrap();
    let swap = QuadraticForm::new(SymOperator::new(DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0])).unwrap());
    assert_eq!(q, swap);
}
