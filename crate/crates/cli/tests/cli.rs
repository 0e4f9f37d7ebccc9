use std::process::{Command, Output};

use coupled_opo_core::{stability_eigenvalues, SystemParams};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coupled-opo"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Header and rows of a CSV with `#` comment lines.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn spectrum_schema_and_columns() {
    let o = run(&["spectrum", "--set", "omega.points=5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("# schema: coupled-opo/spectrum/1\n"));
    assert!(text.contains("# config: {"));
    let (h, rows) = table(&text);
    assert_eq!(
        h[..8],
        [
            "omega",
            "theta_deg",
            "S_X",
            "S_Y",
            "cov_XY",
            "duan_sum",
            "epr_product",
            "flags"
        ]
    );
    assert_eq!(rows.len(), 5);
}

#[test]
fn unpumped_config_is_vacuum() {
    let o = run(&[
        "spectrum",
        "--set",
        "system.j_a=2",
        "--set",
        "system.j_b=1",
        "--set",
        "omega.points=41",
    ]);
    assert!(o.status.success());
    let (h, rows) = table(&stdout(&o));
    for r in &rows {
        for (name, v) in [
            ("S_X", 1.0),
            ("S_Y", 1.0),
            ("duan_sum", 4.0),
            ("epr_product", 1.0),
            ("S_Xp", 2.0),
            ("S_Yp", 2.0),
            ("S_Xm", 2.0),
            ("S_Ym", 2.0),
        ] {
            assert_eq!(num(&r[col(&h, name)]), v, "{name}");
        }
        assert!(num(&r[col(&h, "cov_XY")]).abs() < 1e-15);
        assert_eq!(r[col(&h, "flags")], "none");
    }
}

#[test]
fn fig1_dip_sits_near_the_mode_splitting() {
    let o = run(&["spectrum", "--preset", "fig1"]);
    assert!(o.status.success());
    let (h, rows) = table(&stdout(&o));
    let (w, s) = rows
        .iter()
        .filter(|r| r[col(&h, "series")] == "J_a=10")
        .map(|r| (num(&r[0]), num(&r[col(&h, "S_X")])))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let p = SystemParams::symmetric(1.0, 10.0, 1.0, 0.01).with_pump_fraction(0.5);
    let split = stability_eigenvalues(&p)
        .unwrap()
        .iter()
        .map(|z| z.im.abs())
        .fold(0.0, f64::max);
    assert!((split - 8.646).abs() < 1e-3, "{split}");
    assert!(s < 1.0);
    assert!((w.abs() - split).abs() < 0.25 * split, "minimum {s} at {w}");
    let theta: Vec<f64> = rows
        .iter()
        .filter(|r| r[col(&h, "series")] == "J_a=1")
        .map(|r| num(&r[1]))
        .collect();
    assert!(theta.iter().all(|t| (t - 113.0).abs() < 1e-9));
}

#[test]
fn fig1_spectra_are_even_in_frequency() {
    let o = run(&["spectrum", "--preset", "fig1"]);
    let (h, rows) = table(&stdout(&o));
    let s = col(&h, "S_X");
    let ja1: Vec<&Vec<String>> = rows.iter().filter(|r| r[12] == "J_a=2").collect();
    let n = ja1.len();
    for k in 0..n / 2 {
        assert_eq!(num(&ja1[k][0]), -num(&ja1[n - 1 - k][0]));
        assert!((num(&ja1[k][s]) - num(&ja1[n - 1 - k][s])).abs() < 1e-12);
    }
}

#[test]
fn fig4_headline_squeezing() {
    let o = run(&["spectrum", "--preset", "fig4"]);
    assert!(o.status.success());
    let (h, rows) = table(&stdout(&o));
    let zero = rows.iter().find(|r| num(&r[0]) == 0.0).unwrap();
    assert!((num(&zero[col(&h, "S_Yp")]) - 2.0 / 9.0).abs() < 1e-6);
    assert!((num(&zero[col(&h, "duan_sum")]) - 2.2123).abs() < 1e-4);
    assert!((num(&zero[col(&h, "epr_product")]) - 0.3587).abs() < 1e-3);
    assert_eq!(zero[col(&h, "flags")], "squeezed|entangled|epr");
}

#[test]
fn every_preset_runs() {
    for f in ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6"] {
        let o = run(&["spectrum", "--preset", f]);
        assert!(
            o.status.success(),
            "{f}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn output_is_deterministic_and_written_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = run(&["spectrum", "--preset", "fig2", "--out", p.to_str().unwrap()]);
        assert!(o.status.success());
        assert!(o.stdout.is_empty());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn stability_rows() {
    let o = run(&[
        "stability",
        "--set",
        "stability.j_a=[0,1,2,5]",
        "--set",
        "stability.j_b=[0,1]",
        "--set",
        "system.pump_fraction=0.5",
    ]);
    assert!(o.status.success());
    let (h, rows) = table(&stdout(&o));
    assert_eq!(rows.len(), 8);
    for r in &rows {
        let (ja, jb) = (num(&r[0]), num(&r[1]));
        let eps_c = num(&r[col(&h, "eps_c")]);
        let bisect = num(&r[col(&h, "eps_c_bisection")]);
        assert!((eps_c - bisect).abs() / eps_c < 1e-6);
        assert!(num(&r[col(&h, "min_re_eig")]) > 0.0);
        if ja == 0.0 && jb == 0.0 {
            assert!((eps_c - 100.0).abs() < 1e-9);
        }
        if ja == 1.0 && jb == 1.0 {
            assert!((eps_c - 200.0).abs() < 1e-9);
        }
    }

    let o = run(&[
        "stability",
        "--set",
        "stability.j_a=[0.5,1,10,20]",
        "--set",
        "system.j_b=1",
        "--set",
        "stability.match_detuning=true",
    ]);
    let (h, rows) = table(&stdout(&o));
    for r in &rows {
        assert!((num(&r[col(&h, "eps_c")]) - 100.0).abs() < 1e-9);
        assert_eq!(r[col(&h, "delta_a")], r[0]);
    }
}

#[test]
fn optimize_angle_recovers_caption_angles() {
    for (ja, target) in [("1", 113.0), ("10", 22.0)] {
        let o = run(&[
            "optimize-angle",
            "--set",
            &format!("system.j_a={ja}"),
            "--set",
            "system.j_b=1",
            "--set",
            "system.pump_fraction=0.5",
        ]);
        assert!(o.status.success());
        let (h, rows) = table(&stdout(&o));
        let deg = num(&rows[0][col(&h, "theta_deg")]);
        assert!((deg - target).abs() <= 1.0, "J_a={ja}: {deg}");
    }
}

#[test]
fn above_threshold_exits_2_and_names_threshold() {
    let o = run(&["spectrum", "--set", "system.pump_fraction=1.2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("eps_c"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(
        run(&["spectrum", "--set", "system.nope=1"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["spectrum", "--set", "noequals"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        run(&["spectrum", "--preset", "fig9"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["sde-dump"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(
        &path,
        r#"{"system": {"j_a": 1, "j_b": 1, "pump_fraction": 0.5}, "omega": {"min": 0, "max": 0, "points": 1}}"#,
    )
    .unwrap();
    let o = run(&[
        "spectrum",
        "--config",
        path.to_str().unwrap(),
        "--set",
        "theta.degrees=67",
    ]);
    assert!(o.status.success());
    let (_, rows) = table(&stdout(&o));
    assert_eq!(num(&rows[0][1]), 67.0);
    std::fs::write(&path, r#"{"system": {"j_a": 1}, "bogus": 3}"#).unwrap();
    let o = run(&["spectrum", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

const SHORT_SDE: [&str; 6] = [
    "--set",
    "sde.n_traj=512",
    "--set",
    "sde.t_transient=10",
    "--set",
    "sde.t_measure=60",
];

#[test]
fn verify_single_opo_passes_and_is_reproducible() {
    let mut args = vec!["verify", "--set", "system.eps=50", "--seed", "7"];
    args.extend(SHORT_SDE);
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    let (h, rows) = table(&stdout(&a));
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| num(&r[col(&h, "z")]).abs() < 3.0));
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_detuned_preset_passes() {
    let mut args = vec!["verify", "--preset", "fig4", "--seed", "11"];
    args.extend(SHORT_SDE);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn verify_rejects_corrupted_drift() {
    let mut args = vec![
        "verify",
        "--set",
        "system.eps=50",
        "--set",
        "verify.corrupt_drift=true",
    ];
    args.extend(SHORT_SDE);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(3));
    let (h, rows) = table(&stdout(&o));
    assert!(rows.iter().any(|r| num(&r[col(&h, "z")]).abs() > 3.0));
}

#[test]
fn sde_dump_writes_binary_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ens.bin");
    let o = run(&[
        "sde-dump",
        "--set",
        "system.eps=50",
        "--set",
        "sde.n_traj=4",
        "--set",
        "sde.t_transient=1",
        "--set",
        "sde.t_measure=0",
        "--set",
        "dump.stride=10",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // 100 steps at stride 10 plus the initial state, 8 complex doubles each
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 4 * 11 * 16 * 8);
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ens.bin.json")).unwrap())
            .unwrap();
    assert_eq!(side["trajectories"], 4);
    assert_eq!(side["samples_per_trajectory"], 11);
}
