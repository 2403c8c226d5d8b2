use std::fs;
use std::process::Command;

fn evochns() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evochns"))
}

#[test]
fn presets_lists_every_preset() {
    let out = evochns().arg("presets").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["stationary_sphere", "oscillating_harmonic_sphere", "custom_normal_field"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn missing_config_exits_1_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("absent.toml");
    let out = evochns()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.toml"));
}

#[test]
fn invalid_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[numerics]\ndt = -1\n").unwrap();
    let out = evochns()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("numerics.dt"));
}

#[test]
fn run_writes_a_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[geometry]\npreset = \"oscillating_harmonic_sphere\"\nsubdivisions = 2\n\n\
         [numerics]\ndt = 0.01\nt_end = 0.03\n\n[output]\ncadence = 1\n\n\
         [initial]\nphi0 = \"0.2*z\"\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = evochns()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["manifest.toml", "diagnostics.csv", "energy_balance.csv", "snapshot_000003.vtk"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(out_dir.join("diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
}

#[test]
fn numerical_abort_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("abort.toml");
    // amplitude large enough to invert triangles within the run
    fs::write(
        &cfg,
        "[geometry]\npreset = \"oscillating_harmonic_sphere\"\nsubdivisions = 1\namplitude = 5.0\n\n\
         [numerics]\ndt = 0.05\nt_end = 0.5\n\n[output]\nvtk = false\n",
    )
    .unwrap();
    let out = evochns()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(dir.path().join("o/manifest.toml")).unwrap();
    assert!(manifest.contains("[abort]"), "{manifest}");
}

#[test]
fn verify_laplace_passes() {
    let out = evochns().args(["verify", "--suite", "laplace"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
}

#[test]
fn unknown_suite_is_rejected() {
    let out = evochns().args(["verify", "--suite", "everything"]).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
}
