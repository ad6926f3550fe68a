use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const COARSE: &str = r#"
[market]
r = 0.03
mu = 0.09
sigma = 0.2
horizon = 1.0

[discount]
kind = "exponential"
rate = 0.1

[utility]
kind = "crra"
gamma = 0.5

[grid]
n_t = 41
n_y = 41
x_lo = 0.2
x_hi = 5.0
x0 = 1.0

[mc]
n_paths = 400
dt = 1e-2
seed = 5
export_paths = 3
stride = 10

[verify]
identity_paths = 200
f_paths = 200
perturbation_paths = 200
perturbation_dt = 1e-2
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcmerton"))
        .args(args)
        .env_remove("TCMERTON_OUT_DIR")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn meta(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("meta.json")).unwrap()).unwrap()
}

#[test]
fn solve_writes_surfaces_and_meta() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", COARSE);
    let out = tmp.path().join("out");
    let o = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let headers = [
        ("rho_bar.csv", "t,y,rho_bar"),
        ("pbar.csv", "t,y,pbar,pbar_y"),
        ("strategy.csv", "t,y,pbar,pi_star,c_star"),
        ("value.csv", "t,x,y,g,v"),
    ];
    for (file, header) in headers {
        let text = fs::read_to_string(out.join(file)).unwrap();
        assert_eq!(text.lines().next().unwrap(), header);
    }
    let rows = fs::read_to_string(out.join("strategy.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 41 * 41 + 1);
    let m = meta(&out);
    assert_eq!(m["iterations"], 1);
    assert_eq!(m["converged"], true);
    // 17 significant digits
    let line = fs::read_to_string(out.join("rho_bar.csv"))
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .to_string();
    let last = line.split(',').next_back().unwrap();
    assert_eq!(last.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
}

#[test]
fn hyperbolic_solve_converges_in_few_iterations() {
    let tmp = TempDir::new().unwrap();
    let text = COARSE.replace(
        "kind = \"exponential\"\nrate = 0.1",
        "kind = \"hyperbolic\"\nalpha = 1.0\nbeta = 2.0",
    );
    let cfg = write_config(tmp.path(), "h.toml", &text);
    let out = tmp.path().join("out");
    let o = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let m = meta(&out);
    let it = m["iterations"].as_u64().unwrap();
    assert!((2..10).contains(&it), "{it}");
    assert!(m["residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn rerun_from_written_config_is_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", COARSE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap()
    ])
    .status
    .success());
    let again = a.join("config.toml");
    assert!(run(&[
        "solve",
        "--config",
        again.to_str().unwrap(),
        "--out",
        b.to_str().unwrap()
    ])
    .status
    .success());
    for f in [
        "rho_bar.csv",
        "pbar.csv",
        "strategy.csv",
        "value.csv",
        "config.toml",
    ] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn invalid_sigma_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &COARSE.replace("sigma = 0.2", "sigma = 0.0"),
    );
    let o = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("market.sigma"));
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &COARSE.replace("seed = 5", "seed = 5\nthreads = 4"),
    );
    let o = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("threads"));
}

#[test]
fn overstated_risk_aversion_fails_validation() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &COARSE.replace("gamma = 0.5", "gamma = 0.5\nr1 = 0.6"),
    );
    let o = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn non_convergence_writes_history() {
    let tmp = TempDir::new().unwrap();
    let text = COARSE
        .replace(
            "kind = \"exponential\"\nrate = 0.1",
            "kind = \"hyperbolic\"\nalpha = 1.0\nbeta = 2.0",
        )
        .replace("[mc]", "[solver]\nmax_iter = 2\n\n[mc]");
    let cfg = write_config(tmp.path(), "c.toml", &text);
    let out = tmp.path().join("out");
    let o = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let m = meta(&out);
    assert_eq!(m["converged"], false);
    // residuals at phi_0, phi_1 and phi_2
    assert_eq!(m["residual_history"].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_is_reproducible_and_seeded() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", COARSE);
    let dirs: Vec<_> = ["a", "b", "c"].iter().map(|d| tmp.path().join(d)).collect();
    for (d, seed) in dirs.iter().zip(["11", "11", "12"]) {
        let o = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            d.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["paths.csv", "summary.json"] {
        assert_eq!(
            fs::read(dirs[0].join(f)).unwrap(),
            fs::read(dirs[1].join(f)).unwrap()
        );
        assert_ne!(
            fs::read(dirs[0].join(f)).unwrap(),
            fs::read(dirs[2].join(f)).unwrap()
        );
    }
    let paths = fs::read_to_string(dirs[0].join("paths.csv")).unwrap();
    assert_eq!(paths.lines().next().unwrap(), "path,t,y,x,c,pi,pbar");
    // 3 paths, 100 steps, every 10th step
    assert_eq!(paths.lines().count(), 1 + 3 * 11);
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dirs[0].join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["n_paths"], 400);
    assert!(s["j"]["se"].as_f64().unwrap() > 0.0);
}

#[test]
fn simulate_rejects_uncovered_wealth() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", COARSE);
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--x0",
        "50",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.x0"));
}

#[test]
fn coarse_verify_warns_but_exits_zero_unless_strict() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", COARSE);
    let out = tmp.path().join("out");
    let o = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let table = String::from_utf8_lossy(&o.stdout).to_string();
    assert!(table.contains("hjb.residual") && table.contains("WARN"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let names: Vec<&str> = report["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap())
        .collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert!(names.contains(&"merton.rho_bar"));
    let strict = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--strict",
    ]);
    assert_eq!(strict.status.code(), Some(4));
}

#[test]
fn output_directory_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", COARSE);
    let env_out = tmp.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_tcmerton"))
        .args(["solve", "--config", cfg.to_str().unwrap()])
        .env("TCMERTON_OUT_DIR", &env_out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(env_out.join("meta.json").exists());
}
