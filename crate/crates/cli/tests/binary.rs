use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnls")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn classify_text_and_json() {
    let tmp = tempfile::tempdir().unwrap();
    let f = write(tmp.path(), "weak.coeffs", "# example\nlambda4 = 0,-1\n");
    let o = dnls(&["classify", &f]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("class: WeaklyDissipative"), "{text}");
    assert!(text.contains("c0 = 1e0"));

    let o = dnls(&["classify", &f, "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["report"]["class"], "WeaklyDissipative");
    assert_eq!(v["report"]["xi0"], 0.0);

    let o = dnls(&["classify", "--nu", "-1,0;0,0;0,-1", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["report"]["class"], "WeaklyDissipative");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(dnls(&["classify", "/definitely/missing"]).status.code(), Some(2));
    let bad = write(tmp.path(), "bad.coeffs", "mu1 = 1,0\n");
    let o = dnls(&["classify", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mu1"));
    assert_eq!(dnls(&["pipeline"]).status.code(), Some(2));
    assert_eq!(dnls(&["no-such-command"]).status.code(), Some(2));

    // A fit whose exponent misses the expectation is a verdict failure.
    let mut curve = String::from("t,value\n");
    for k in 0..20 {
        let t = (3.0 + k as f64).exp();
        curve.push_str(&format!("{t:e},{:e}\n", t.ln().powf(-0.25)));
    }
    let c = write(tmp.path(), "curve.csv", &curve);
    let ok = dnls(&["fit", &c, "--expect", "-0.25"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).starts_with("exponent,"));
    assert_eq!(dnls(&["fit", &c, "--expect", "-0.5"]).status.code(), Some(1));
}

#[test]
fn decay_certificates() {
    let o = dnls(&["decay", "--theta", "indicator", "--width", "1", "--taus", "1:1e6:13"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "tau,s,sqrt_tau_s,upper_ratio,lower_ratio");
    assert_eq!(rows.len(), 14);
    for r in &rows[1..] {
        let cols: Vec<f64> = r.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(cols[3] <= 1.0 && cols[4] >= 1.0, "{r}");
    }
}

#[test]
fn simulate_writes_manifest_and_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let f = write(tmp.path(), "c.coeffs", "lambda4 = 0,-1\n");
    let out = tmp.path().join("run");
    let o = dnls(&[
        "simulate", "--coeffs", &f, "--tmax", "5", "--dt", "0.05", "--snapshots", "lin:0:tmax:3", "--out",
        out.to_str().unwrap(), "--seed", "11", "--threads", "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["boundary_ok"], true);
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["run"]["n"], 4096);
    let diag = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(diag.starts_with("t,l2,h3,j_h2,mass_flux,alpha_env\n"));
    assert_eq!(diag.lines().count(), 102);
    for k in 0..3 {
        let a = fs::read_to_string(out.join(format!("alpha/alpha_{k:04}.csv"))).unwrap();
        assert!(a.starts_with("xi,re,im\n"));
    }

    let o = dnls(&["simulate", "--coeffs", &f, "--tmax", "1000", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("boundary check"));
}

#[test]
fn pipeline_from_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "null.coeffs", "lambda1 = 1,0\n");
    let cfg = write(
        tmp.path(),
        "null.toml",
        "out = \"result\"\n[nonlinearity]\nfile = \"null.coeffs\"\n[solver]\nt_max = 50.0\n",
    );
    let o = dnls(&["pipeline", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("class: NullImaginary"));
    let dir = tmp.path().join("result");
    for f in ["report.csv", "report.json", "decay_overlay.gp", "nu_parabola.gp", "alpha_envelope.gp"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let o = dnls(&["plots", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 3);

    let strict_gap = write(
        tmp.path(),
        "weak.toml",
        "out = \"weak\"\n[nonlinearity]\nlambda4 = \"0,-1\"\n[solver]\nt_max = 50.0\n[verdict]\ngap_tol = 1e-9\n",
    );
    assert_eq!(dnls(&["pipeline", "--config", &strict_gap]).status.code(), Some(1));
}
