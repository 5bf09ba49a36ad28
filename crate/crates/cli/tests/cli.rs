use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_angcong");

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn angcong")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, scenario_file: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join("sim");
    let sc = scenario(scenario_file);
    let mut args = vec!["simulate", "--scenario", s(&sc), "--out", s(&out)];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

/// Small single-area input: 20 trips on a loose star, fewer than 25 parameters.
fn handmade(dir: &Path) -> (PathBuf, PathBuf) {
    let mut trips = String::from("origin_x,origin_y,dest_x,dest_y,duration_s,distance_km\n");
    for i in 0..20 {
        let t = i as f64 * 0.37;
        let (dx, dy) = (1000.0 * t.cos(), 1000.0 * t.sin());
        trips.push_str(&format!("0,0,{dx},{dy},{},1\n", 100 + (i * 7) % 50));
    }
    let network = "ax,ay,bx,by,class\n0,0,100,0,primary\n0,0,0,100,trunk\n0,0,70,70,motorway\n0,0,50,0,other\n";
    let tp = dir.join("trips.csv");
    let np = dir.join("network.csv");
    fs::write(&tp, trips).unwrap();
    fs::write(&np, network).unwrap();
    (tp, np)
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["hist", "fit", "simulate", "predict"] {
        let o = run(&[sub, "--help"]);
        assert_eq!(code(&o), 0);
        assert!(stdout(&o).contains("Usage"), "{sub}");
    }
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["bogus"])), 2);
}

#[test]
fn simulate_is_deterministic_and_sized() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = simulate(a.path(), "two_areas.json", &["--seed", "42"]);
    let sb = simulate(b.path(), "two_areas.json", &["--seed", "42", "--sequential"]);
    let ta = fs::read(sa.join("trips.csv")).unwrap();
    assert_eq!(ta, fs::read(sb.join("trips.csv")).unwrap());
    assert_eq!(fs::read(sa.join("network.csv")).unwrap(), fs::read(sb.join("network.csv")).unwrap());
    // 2 areas × 400 trips
    assert_eq!(String::from_utf8(ta).unwrap().lines().count(), 1 + 800);
    let c = tempfile::tempdir().unwrap();
    let sc = simulate(c.path(), "two_areas.json", &["--seed", "43"]);
    assert_ne!(fs::read(sa.join("trips.csv")).unwrap(), fs::read(sc.join("trips.csv")).unwrap());
}

#[test]
fn noiseless_simulate_then_fit_recovers_truth() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "two_areas.json", &[]);
    let out = dir.path().join("fit");
    let o = run(&[
        "fit",
        "--trips",
        s(&sim.join("trips.csv")),
        "--network",
        s(&sim.join("network.csv")),
        "-K",
        "2",
        "--bins",
        "16",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("R²: 1.000"), "{summary}");
    assert!(summary.contains("Prob(F-statistic): 0.000"));
    let truth = [150.0, 120.0, -30.0, 20.0, 10.0, -15.0, 25.0];
    let report = fs::read_to_string(out.join("fit_report.csv")).unwrap();
    let rows: Vec<&str> = report.lines().skip(1).collect();
    assert_eq!(rows.len(), truth.len());
    for (row, t) in rows.iter().zip(truth) {
        let coef: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!((coef - t).abs() < 1e-6, "{row} vs {t}");
    }
    for f in ["alpha_curve.csv", "beta_curve.csv", "alpha_curve.svg", "beta_curve.svg", "model.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(stdout(&o).contains("alpha(0)"));
}

#[test]
fn full_shape_report_has_25_rows() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "three_areas.json", &[]);
    let out = dir.path().join("fit");
    let o = run(&["fit", "--trips", s(&sim.join("trips.csv")), "--network", s(&sim.join("network.csv")), "--out", s(&out), "--dump-design"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(out.join("fit_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 25);
    let design = fs::read_to_string(out.join("design.csv")).unwrap();
    let header = design.lines().next().unwrap();
    assert!(header.starts_with("a_c1,a_s1,"));
    assert!(header.ends_with("b_s8,pace"));
}

#[test]
fn single_area_full_model_is_rank_deficient() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "two_areas.json", &[]);
    let trips = fs::read_to_string(sim.join("trips.csv")).unwrap();
    let one: String = trips.lines().filter(|l| !l.ends_with(",b")).map(|l| format!("{l}\n")).collect();
    let tp = dir.path().join("one.csv");
    fs::write(&tp, one).unwrap();
    let np = sim.join("network.csv");
    let args = ["fit", "--trips", s(&tp), "--network", s(&np), "-K", "2", "--bins", "16", "--out", s(dir.path())];
    let o = run(&args);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("b_c2"), "{}", stderr(&o));
    let mut dropped = args.to_vec();
    dropped.extend(["--aliased", "drop"]);
    assert_eq!(code(&run(&dropped)), 0);
}

#[test]
fn too_few_trips_is_insufficient_data() {
    let dir = tempfile::tempdir().unwrap();
    let (tp, np) = handmade(dir.path());
    let o = run(&["fit", "--trips", s(&tp), "--network", s(&np), "--out", s(dir.path())]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("underdetermined"));
}

#[test]
fn hist_outputs_and_bins() {
    let dir = tempfile::tempdir().unwrap();
    let (tp, np) = handmade(dir.path());
    let out = dir.path().join("h");
    let o = run(&["hist", "--trips", s(&tp), "--network", s(&np), "--bins", "16", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["demand_hist.csv", "network_hist.csv", "pace_by_direction.csv"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert_eq!(text.lines().count(), 1 + 16, "{f}");
    }
    let svgs = fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg"))
        .count();
    assert_eq!(svgs, 3);
    let rose = fs::read_to_string(out.join("demand_rose.svg")).unwrap();
    assert!(rose.contains("<title>") && rose.contains("counterclockwise"));
}

#[test]
fn empty_trip_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (_, np) = handmade(dir.path());
    let tp = dir.path().join("empty.csv");
    fs::write(&tp, "origin_x,origin_y,dest_x,dest_y,duration_s,distance_km\n").unwrap();
    let o = run(&["hist", "--trips", s(&tp), "--network", s(&np), "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no trips"));
    let o = run(&["hist", "--trips", s(&dir.path().join("missing.csv")), "--network", s(&np)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let (tp, np) = handmade(dir.path());
    let out = dir.path().join("h");
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, format!("trips = {}\nnetwork = {}\nbins = 12\nout = {}\n", s(&tp), s(&np), s(&out))).unwrap();
    let rows = |o: &Path| fs::read_to_string(o.join("demand_hist.csv")).unwrap().lines().count() - 1;
    assert_eq!(code(&run(&["hist", "--config", s(&cfg)])), 0);
    assert_eq!(rows(&out), 12);
    assert_eq!(code(&run(&["hist", "--config", s(&cfg), "--bins", "8"])), 0);
    assert_eq!(rows(&out), 8);
    fs::write(&cfg, "bins = many\n").unwrap();
    assert_eq!(code(&run(&["hist", "--config", s(&cfg)])), 2);
}

fn uniform_model(dir: &Path) -> PathBuf {
    // demand spread evenly over 8 bins, network a symmetric 8-way star
    let mut trips = String::from("origin_x,origin_y,dest_x,dest_y,duration_s,distance_km\n");
    let mut network = String::from("ax,ay,bx,by,class\n");
    for i in 0..64 {
        let t = (i % 8) as f64 * std::f64::consts::FRAC_PI_4 + 0.1;
        trips.push_str(&format!("0,0,{},{},{},1\n", 1000.0 * t.cos(), 1000.0 * t.sin(), 100 + i));
    }
    for j in 0..4 {
        let t = j as f64 * std::f64::consts::FRAC_PI_4 + 0.1;
        network.push_str(&format!("0,0,{},{},primary\n", 100.0 * t.cos(), 100.0 * t.sin()));
    }
    fs::write(dir.join("u_trips.csv"), trips).unwrap();
    fs::write(dir.join("u_net.csv"), network).unwrap();
    let out = dir.join("u");
    let o = run(&[
        "fit",
        "--trips",
        s(&dir.join("u_trips.csv")),
        "--network",
        s(&dir.join("u_net.csv")),
        "-K",
        "2",
        "--bins",
        "8",
        "--lower-cut",
        "0",
        "--upper-cut",
        "0",
        "--aliased",
        "drop",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out.join("model.json")
}

#[test]
fn predict_uniform_model_returns_gamma_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let model = uniform_model(dir.path());
    let thetas = "0,0.5,1,1.5,2,3,4,6";
    let o = run(&["predict", "--model", s(&model), "--theta", thetas]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 8);
    // mean of 100..=163
    for (line, t) in lines.iter().zip(thetas.split(',')) {
        let (theta, pace) = line.split_once(',').unwrap();
        assert_eq!(theta.parse::<f64>().unwrap(), t.parse::<f64>().unwrap());
        assert!((pace.parse::<f64>().unwrap() - 131.5).abs() < 1e-9, "{line}");
    }
}

#[test]
fn predict_degrees_matches_radians() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "two_areas.json", &[]);
    let out = dir.path().join("fit");
    let o = run(&["fit", "--trips", s(&sim.join("trips.csv")), "--network", s(&sim.join("network.csv")), "-K", "2", "--bins", "16", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let model = out.join("model.json");
    let deg = run(&["predict", "--model", s(&model), "--area", "a", "--degrees", "--theta", "90deg"]);
    let rad = run(&["predict", "--model", s(&model), "--area", "a", "--theta", &std::f64::consts::FRAC_PI_2.to_string()]);
    assert_eq!(code(&deg), 0, "{}", stderr(&deg));
    assert_eq!(stdout(&deg), stdout(&rad));
    // two areas, no area chosen
    assert_eq!(code(&run(&["predict", "--model", s(&model), "--theta", "0"])), 2);
}

#[test]
fn predict_rejects_mismatched_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = uniform_model(dir.path());
    let text = fs::read_to_string(&model).unwrap();
    let broken = text.replacen("\"harmonics\": 2", "\"harmonics\": 3", 1);
    assert_ne!(text, broken);
    fs::write(&model, broken).unwrap();
    let o = run(&["predict", "--model", s(&model), "--theta", "0"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn invalid_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("two_areas.json")).unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, text.replace("\"symmetric\": true", "\"symmetric\": false")).unwrap();
    let o = run(&["simulate", "--scenario", s(&bad), "--out", s(dir.path())]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    fs::write(&bad, "{").unwrap();
    assert_eq!(code(&run(&["simulate", "--scenario", s(&bad), "--out", s(dir.path())])), 2);
}

#[test]
fn fit_outputs_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "two_areas.json", &[]);
    let fit = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let (tp, np) = (sim.join("trips.csv"), sim.join("network.csv"));
        let mut args = vec!["fit", "--trips", s(&tp), "--network", s(&np)];
        args.extend(["-K", "2", "--bins", "16"]);
        let out_s = out.to_str().unwrap().to_string();
        args.extend(["--out", &out_s]);
        args.extend_from_slice(extra);
        assert_eq!(code(&run(&args)), 0);
        out
    };
    let a = fit("a", &[]);
    let b = fit("b", &["--sequential"]);
    for f in ["fit_report.csv", "alpha_curve.csv", "beta_curve.csv", "summary.txt", "model.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
