use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deepgeom"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("DEEPGEOM_THREADS").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("deepgeom-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn length_map_format() {
    let o = run(&["length-map", "--sigma-w", "4", "--sigma-b", "0.3", "--depth", "10", "--q0", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "layer,q_theory");
    assert_eq!(data.len(), 11);
    assert!(text.lines().any(|l| l.starts_with("# q_star = ")));
    assert!(text.starts_with("# tool = \"deepgeom "));
    assert!(text.contains("# command = \"length-map\""));
    // 17 significant digits
    let q1 = data[1].split(',').nth(1).unwrap();
    assert_eq!(q1.split('e').next().unwrap().replace('.', "").len(), 17);
}

#[test]
fn phase_grid_shape_and_boundary_file() {
    let dir = scratch("phase");
    let out = dir.join("grid.csv");
    let o = run(&["phase-grid", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let grid = std::fs::read_to_string(&out).unwrap();
    let rows = grid.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 50 * 25);
    let boundary = std::fs::read_to_string(dir.join("grid.boundary.csv")).unwrap();
    let rows: Vec<&str> = boundary.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "sigma_b,sigma_w_star,status");
    assert_eq!(rows.len(), 1 + 25);
}

#[test]
fn simulation_output_is_deterministic() {
    let args = ["curvature", "--width", "60", "--depth", "3", "--n-theta", "32", "--seeds", "2", "--seed", "7"];
    let a = run(&args);
    let b = bin().args(args).env("DEEPGEOM_THREADS", "1").output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn outputs_reproduce_from_their_own_config() {
    let dir = scratch("roundtrip");
    for (ext, args) in [
        ("csv", vec!["weight-chaos", "--width", "50", "--depth", "3", "--deltas", "0:1:3", "--n-theta", "16"]),
        ("json", vec!["fourier", "--depths", "1,2", "--width", "30", "--omega-max", "2", "--n-theta", "32"]),
    ] {
        let first = dir.join(format!("first.{ext}"));
        let second = dir.join(format!("second.{ext}"));
        let mut a = args.clone();
        a.extend(["-o", first.to_str().unwrap()]);
        assert_eq!(run(&a).status.code(), Some(0));
        let b = [args[0], "--config", first.to_str().unwrap(), "-o", second.to_str().unwrap()];
        assert_eq!(run(&b).status.code(), Some(0));
        assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap(), "{ext}");
    }
}

#[test]
fn json_layout() {
    let o = run(&["c-map", "--depth", "3", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["columns"], serde_json::json!(["layer", "c_theory"]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["config"]["command"], "c-map");
    assert!(v["summary"]["chi1"].as_f64().unwrap() > 1.0);
}

#[test]
fn flags_override_config_file() {
    let dir = scratch("override");
    let cfg = dir.join("cfg.toml");
    std::fs::write(&cfg, "sigma_w = 1.5\ndepth = 4\n").unwrap();
    let text = stdout(&run(&["length-map", "--config", cfg.to_str().unwrap(), "--depth", "2"]));
    assert!(text.contains("# sigma_w = 1.5"));
    assert!(text.contains("# depth = 2"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["length-map", "--sigma-w", "-1"]).status.code(), Some(1));
    assert_eq!(run(&["length-map", "--nonlinearity", "softsign"]).status.code(), Some(1));
    assert_eq!(run(&["phase-grid", "--sw", "0:1"]).status.code(), Some(1));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["validate-all", "--criteria", "11"]).status.code(), Some(1));

    let dir = scratch("foreign");
    let cfg = dir.join("cfg.toml");
    std::fs::write(&cfg, "omega_max = 3\n").unwrap();
    assert_eq!(run(&["length-map", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn validate_all_subset_passes() {
    let o = run(&["validate-all", "--criteria", "1,2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("id,name,passed,detail"));
    assert!(text.contains("# failed = 0"));
}

#[test]
fn help_exits_0() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for cmd in ["length-map", "phase-grid", "weight-chaos", "validate-all"] {
        assert!(text.contains(cmd), "{cmd}");
    }
}
