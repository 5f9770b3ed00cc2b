use std::path::Path;
use std::process::{Command, Output};

fn scsat(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scsat"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn de_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let o = scsat(&["de", "--system", "bec36", "--eps", "0.47", "--L", "100", "--W", "8"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("verdict: saturated"), "{}", stdout(&o));
    let o = scsat(&["de", "--system", "bec36", "--eps", "0.47", "--L", "100", "--W", "1"], dir.path());
    assert!(stdout(&o).contains("verdict: stalled at u_BP"), "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("de_trajectory.csv")).unwrap();
    assert!(csv.starts_with("# scsat "));
    assert_eq!(csv.lines().nth(1), Some("iteration,section,u,v"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(scsat(&["de", "--W", "0"], dir.path()).status.code(), Some(2));
    assert_eq!(scsat(&["de", "--set", "nope=1"], dir.path()).status.code(), Some(2));
    assert_eq!(scsat(&["de", "--eps", "abc"], dir.path()).status.code(), Some(2));
    assert_eq!(scsat(&["potential", "--system", "bicm", "--mapping", "tan"], dir.path()).status.code(), Some(2));
    // The potential does not switch inside this bracket.
    let o = scsat(&["thresholds", "--system", "bec36", "--set", "eps_lo=0.3", "--set", "eps_hi=0.4"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn csv_output_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["exit-chart", "--mapping", "id-optimized", "--snr", "5.76"];
    let oa = scsat(&args, a.path());
    let ob = scsat(&args, b.path());
    assert!(oa.status.success() && ob.status.success());
    let ca = std::fs::read(a.path().join("exit_chart.csv")).unwrap();
    let cb = std::fs::read(b.path().join("exit_chart.csv")).unwrap();
    assert_eq!(ca, cb);
    let text = stdout(&oa);
    assert!(text.contains("stable crossings: 2"), "{text}");
    let residual: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("rate-loss residual: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(residual.abs() <= 5e-3);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# interleaver run\nL = 8\nW = 4\nM = 12\nseed = 3\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = scsat(&["interleaver", "--config", cfg], dir.path());
    assert!(stdout(&o).contains("uniformity: exact (3 bits per offset)"), "{}", stdout(&o));
    let o = scsat(&["interleaver", "--config", cfg, "--M", "13"], dir.path());
    assert!(stdout(&o).contains("max deviation 1"));
    let o = scsat(&["interleaver", "--config", cfg, "--set", "W=2", "--dump-config"], dir.path());
    let dump = stdout(&o);
    assert!(dump.contains("W = 2\n") && dump.contains("seed = 3\n"), "{dump}");
}

#[test]
fn potential_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = scsat(&["potential", "--system", "identity"], dir.path());
    assert!(stdout(&o).contains("all points marginal; V ≡ 0"));
    let o = scsat(&["potential", "--system", "bec36", "--eps", "0.45"], dir.path());
    assert!(stdout(&o).contains("minima: 2"), "{}", stdout(&o));
}

#[test]
fn sampled_table_system() {
    let dir = tempfile::tempdir().unwrap();
    let phi: String = (0..=20).map(|k| {
        let x = k as f64 / 20.0;
        format!("{x} {}\n", 0.1 + 0.8 * x)
    }).collect();
    let psi: String = (0..=20).map(|k| {
        let x = k as f64 / 20.0;
        format!("{x} {}\n", x * x)
    }).collect();
    let (pp, qp) = (dir.path().join("phi.txt"), dir.path().join("psi.txt"));
    std::fs::write(&pp, phi).unwrap();
    std::fs::write(&qp, psi).unwrap();
    let o = scsat(
        &[
            "de",
            "--system",
            "table",
            "--set",
            &format!("phi_table={}", pp.display()),
            "--set",
            &format!("psi_table={}", qp.display()),
            "--L",
            "20",
            "--W",
            "3",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("verdict:"));
}
