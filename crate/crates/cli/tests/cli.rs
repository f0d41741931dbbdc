use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gwish::io::load_matrix_csv;

fn gwish(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwish"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn assert_ok(o: &Output) {
    assert_eq!(code(o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn csv_files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    v.sort();
    v
}

fn assert_csvs_load(dir: &Path) {
    for f in csv_files(dir) {
        load_matrix_csv(&f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
    }
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn square_lattice(dir: &Path) {
    write(dir, "sq.txt", "# four regions on a ring\n1 2\n2 3\n3 4\n4 1\n");
}

#[test]
fn help_and_usage_errors() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(code(&gwish(&["--help"], t.path())), 0);
    assert_eq!(code(&gwish(&["ggm", "--help"], t.path())), 0);
    assert_eq!(code(&gwish(&[], t.path())), 1);
    assert_eq!(code(&gwish(&["frobnicate"], t.path())), 1);
    assert_eq!(code(&gwish(&["ggm", "--iters", "2"], t.path())), 1);
    assert_eq!(
        code(&gwish(&["ggm", "--data", "missing.csv", "--out-dir", "o"], t.path())),
        1
    );
    assert_eq!(
        code(&gwish(
            &["sample-gwishart", "--p", "2", "--delta", "1.5", "--out", "k.csv"],
            t.path()
        )),
        1
    );
    assert_eq!(
        code(&gwish(
            &[
                "sample-gwishart",
                "--p",
                "2",
                "--iters",
                "5",
                "--burnin",
                "5",
                "--out",
                "k.csv"
            ],
            t.path()
        )),
        1
    );
    assert_eq!(
        code(&gwish(
            &["report", "--config", "absent.cfg", "--traces", "x.csv"],
            t.path()
        )),
        1
    );
}

#[test]
fn overflowing_data_is_a_numeric_failure() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "big.csv", "1e160,1\n2,1e160\n3,4\n");
    let o = gwish(
        &[
            "ggm",
            "--data",
            "big.csv",
            "--iters",
            "20",
            "--burnin",
            "1",
            "--mc-const-n",
            "10",
            "--out-dir",
            "o",
        ],
        t.path(),
    );
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sample_gwishart_writes_upper_triangle_draws() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "path.txt", "1 2\n2 3\n");
    let o = gwish(
        &[
            "sample-gwishart",
            "--graph",
            "path.txt",
            "--delta",
            "4",
            "--iters",
            "60",
            "--burnin",
            "10",
            "--thin",
            "5",
            "--constrain-11",
            "--out",
            "k.csv",
        ],
        t.path(),
    );
    assert_ok(&o);
    let text = fs::read_to_string(t.path().join("k.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "K_1_1,K_1_2,K_1_3,K_2_2,K_2_3,K_3_3");
    let m = load_matrix_csv(&t.path().join("k.csv")).unwrap();
    assert_eq!(m.nrows(), 10);
    for r in 0..m.nrows() {
        assert_eq!(m[(r, 0)], 1.0);
        assert_eq!(m[(r, 2)], 0.0);
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("ChaCha8"));
}

#[test]
fn ggm_outputs_are_reproducible() {
    let t = tempfile::tempdir().unwrap();
    write(
        t.path(),
        "x.csv",
        "a,b,c\n1.0,0.5,-0.2\n0.3,-1.1,0.4\n-0.7,0.2,1.5\n0.9,0.8,-0.6\n",
    );
    let args = |out: &'static str| {
        vec![
            "ggm",
            "--data",
            "x.csv",
            "--iters",
            "300",
            "--burnin",
            "50",
            "--thin",
            "10",
            "--chains",
            "2",
            "--mc-const-n",
            "200",
            "--seed",
            "9",
            "--out-dir",
            out,
        ]
    };
    assert_ok(&gwish(&args("a"), t.path()));
    assert_ok(&gwish(&args("b"), t.path()));
    let names: Vec<String> = ["edge_probs.csv", "k_mean.csv", "trace_k.csv", "summary.txt"]
        .map(String::from)
        .to_vec();
    for n in &names {
        let a = fs::read(t.path().join("a").join(n)).unwrap();
        let b = fs::read(t.path().join("b").join(n)).unwrap();
        assert_eq!(a, b, "{n} differs between identical runs");
    }
    let e = load_matrix_csv(&t.path().join("a/edge_probs.csv")).unwrap();
    assert_eq!(e.shape(), (3, 3));
    for i in 0..3 {
        assert_eq!(e[(i, i)], 0.0);
        for j in 0..3 {
            assert_eq!(e[(i, j)], e[(j, i)]);
        }
    }
    let tr = load_matrix_csv(&t.path().join("a/trace_k.csv")).unwrap();
    assert_eq!(tr.shape(), (2 * 25, 7));
    let summary = fs::read_to_string(t.path().join("a/summary.txt")).unwrap();
    assert!(summary.contains("rng: ChaCha8"));
    assert!(summary.contains("edge frequencies: 1-2:"));
    assert_csvs_load(&t.path().join("a"));
}

#[test]
fn config_file_supplies_options_and_flags_win() {
    let t = tempfile::tempdir().unwrap();
    write(
        t.path(),
        "run.cfg",
        "# manifest\np = 2\niters = 40\nburnin = 10\nconstrain_11 = true\nout = cfg.csv\n",
    );
    assert_ok(&gwish(&["sample-gwishart", "--config", "run.cfg"], t.path()));
    let m = load_matrix_csv(&t.path().join("cfg.csv")).unwrap();
    assert_eq!(m.nrows(), 30);
    assert!(m.column(0).iter().all(|&v| v == 1.0));
    assert_ok(&gwish(
        &[
            "sample-gwishart",
            "--config",
            "run.cfg",
            "--iters",
            "20",
            "--out",
            "flag.csv",
        ],
        t.path(),
    ));
    assert_eq!(load_matrix_csv(&t.path().join("flag.csv")).unwrap().nrows(), 10);
    write(t.path(), "bad.cfg", "iters 40\n");
    assert_eq!(code(&gwish(&["sample-gwishart", "--config", "bad.cfg"], t.path())), 1);
}

#[test]
fn simulate_matrix_and_report_round_trip() {
    let t = tempfile::tempdir().unwrap();
    assert_ok(&gwish(&["simulate", "--seed", "4", "--out-dir", "sim"], t.path()));
    let data = load_matrix_csv(&t.path().join("sim/data.csv")).unwrap();
    assert_eq!(data.shape(), (500, 10));
    let kr = load_matrix_csv(&t.path().join("sim/true_kr.csv")).unwrap();
    assert_eq!(kr[(0, 1)], 0.4);
    assert_eq!(
        fs::read_to_string(t.path().join("sim/col_graph.txt"))
            .unwrap()
            .lines()
            .count(),
        10
    );

    let o = gwish(
        &[
            "matrix-ggm",
            "--data",
            "sim/data.csv",
            "--pr",
            "5",
            "--pc",
            "10",
            "--n",
            "100",
            "--fixed-row-graph",
            "sim/row_graph.txt",
            "--iters",
            "120",
            "--burnin",
            "20",
            "--chains",
            "2",
            "--mc-const-n",
            "100",
            "--out-dir",
            "mg",
        ],
        t.path(),
    );
    assert_ok(&o);
    let dir = t.path().join("mg");
    for n in [
        "row_edge_probs.csv",
        "col_edge_probs.csv",
        "kr_mean.csv",
        "kc_mean.csv",
        "z_trace.csv",
        "summary.txt",
    ] {
        assert!(dir.join(n).exists(), "{n} missing");
    }
    let row = load_matrix_csv(&dir.join("row_edge_probs.csv")).unwrap();
    assert_eq!(row[(0, 1)], 1.0);
    assert_eq!(row[(1, 3)], 0.0);
    let kc = load_matrix_csv(&dir.join("kc_mean.csv")).unwrap();
    assert_eq!(kc[(0, 0)], 1.0);
    let z = load_matrix_csv(&dir.join("z_trace.csv")).unwrap();
    assert_eq!(z.shape(), (100, 2));
    assert!(fs::read_to_string(dir.join("summary.txt"))
        .unwrap()
        .contains("running mean of z"));
    assert_csvs_load(&dir);

    let o = gwish(&["report", "--traces", "mg/z_trace.csv", "--out", "conv.csv"], t.path());
    assert_ok(&o);
    assert!(String::from_utf8_lossy(&o.stdout).contains("final relative spread"));
    let conv = load_matrix_csv(&t.path().join("conv.csv")).unwrap();
    assert_eq!(conv.ncols(), 3);
    assert_eq!(conv[(conv.nrows() - 1, 0)], 100.0);

    assert_ok(&gwish(&["simulate", "--seed", "4", "--out-dir", "sim2"], t.path()));
    assert_eq!(
        fs::read(t.path().join("sim/data.csv")).unwrap(),
        fs::read(t.path().join("sim2/data.csv")).unwrap()
    );
    assert_eq!(
        code(&gwish(
            &["matrix-ggm", "--data", "sim/data.csv", "--pr", "7", "--out-dir", "x"],
            t.path()
        )),
        1
    );
    assert_eq!(code(&gwish(&["report", "--traces", "sim/true_kr.csv"], t.path())), 0);
    write(t.path(), "one.csv", "1\n2\n3\n");
    assert_eq!(code(&gwish(&["report", "--traces", "one.csv"], t.path())), 1);
}

#[test]
fn spatial_gaussian_outputs() {
    let t = tempfile::tempdir().unwrap();
    square_lattice(t.path());
    write(t.path(), "y.csv", "verbal,math\n560,540\n530,520\n500,510\n480,470\n");
    write(t.path(), "z.csv", "5\n20\n50\n80\n");
    let o = gwish(
        &[
            "spatial-gaussian",
            "--adjacency",
            "sq.txt",
            "--data",
            "y.csv",
            "--covariate",
            "z.csv",
            "--iters",
            "200",
            "--burnin",
            "50",
            "--thin",
            "5",
            "--mc-const-n",
            "100",
            "--out-dir",
            "o",
        ],
        t.path(),
    );
    assert_ok(&o);
    let dir = t.path().join("o");
    let beta = load_matrix_csv(&dir.join("beta_trace.csv")).unwrap();
    assert_eq!(beta.shape(), (30, 7));
    let head = fs::read_to_string(dir.join("beta_trace.csv")).unwrap();
    assert!(head.starts_with("chain,beta_0_1,beta_1_1,beta_2_1,beta_0_2"));
    assert_eq!(load_matrix_csv(&dir.join("fitted.csv")).unwrap().shape(), (4, 2));
    let kr = load_matrix_csv(&dir.join("kr_mean.csv")).unwrap();
    assert_eq!(kr[(0, 2)], 0.0);
    assert_csvs_load(&dir);
    let s = fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(s.contains("tau2: 2") && s.contains("beta_1_2"));

    let bad = gwish(
        &[
            "spatial-gaussian",
            "--adjacency",
            "sq.txt",
            "--data",
            "y.csv",
            "--covariate",
            "z.csv",
            "--rho",
            "1.5",
            "--out-dir",
            "o2",
        ],
        t.path(),
    );
    assert_eq!(code(&bad), 1);
    write(t.path(), "iso.txt", "1 2\n2 3\n");
    let iso = gwish(
        &[
            "spatial-gaussian",
            "--adjacency",
            "iso.txt",
            "--data",
            "y.csv",
            "--covariate",
            "z.csv",
            "--out-dir",
            "o3",
        ],
        t.path(),
    );
    assert_eq!(code(&iso), 1);
    assert!(String::from_utf8_lossy(&iso.stderr).contains("region 4 has no neighbors"));
}

#[test]
fn spatial_poisson_outputs() {
    let t = tempfile::tempdir().unwrap();
    square_lattice(t.path());
    write(t.path(), "y.csv", "30,10\n5,40\n22,3\n60,27\n");
    write(t.path(), "m.csv", "1000\n2000\n1500\n3000\n");
    let run = |threshold: &'static str, out: &'static str| {
        gwish(
            &[
                "spatial-poisson",
                "--adjacency",
                "sq.txt",
                "--data",
                "y.csv",
                "--populations",
                "m.csv",
                "--iters",
                "200",
                "--burnin",
                "50",
                "--chains",
                "2",
                "--mc-const-n",
                "100",
                "--censor-threshold",
                threshold,
                "--out-dir",
                out,
            ],
            t.path(),
        )
    };
    assert_ok(&run("25", "o"));
    let dir = t.path().join("o");
    let imp = load_matrix_csv(&dir.join("imputations.csv")).unwrap();
    assert_eq!(imp.shape(), (4, 6));
    for r in 0..4 {
        assert!(imp[(r, 5)] < 25.0 && imp[(r, 4)] <= imp[(r, 3)] && imp[(r, 3)] <= imp[(r, 5)]);
    }
    assert_eq!((imp[(0, 0)], imp[(0, 1)], imp[(0, 2)]), (1.0, 2.0, 10.0));
    assert_eq!(load_matrix_csv(&dir.join("mu_trace.csv")).unwrap().shape(), (300, 3));
    let fitted = load_matrix_csv(&dir.join("fitted.csv")).unwrap();
    assert!(fitted.iter().all(|&r| r > 0.0 && r < 0.1));
    assert_csvs_load(&dir);

    assert_ok(&run("0", "none"));
    let s = fs::read_to_string(t.path().join("none/summary.txt")).unwrap();
    assert!(s.contains("censored cells: 0"));

    write(t.path(), "frac.csv", "3.5,1\n1,1\n1,1\n1,1\n");
    let o = gwish(
        &[
            "spatial-poisson",
            "--adjacency",
            "sq.txt",
            "--data",
            "frac.csv",
            "--populations",
            "m.csv",
            "--out-dir",
            "f",
        ],
        t.path(),
    );
    assert_eq!(code(&o), 1);
}
