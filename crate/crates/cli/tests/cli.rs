//! End-to-end runs of the `dram-edp` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dram_edp::config::load_network;
use dram_edp::workload::{enumerate_partitions, Granularity};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn toy(file: &str) -> String {
    root().join("configs/toy").join(file).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dram-edp"))
        .args(args)
        .env_remove("DRAM_EDP_THREADS")
        .output()
        .unwrap()
}

fn toy_args<'a>(cmd: &'a str, net: &'a str, geo: &'a str, prof: &'a str) -> Vec<&'a str> {
    vec![cmd, "--network", net, "--geometry", geo, "--profile", prof]
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn explore_matches_golden_file() {
    let (n, g, p) = (
        toy("network.toml"),
        toy("geometry.toml"),
        toy("profile.toml"),
    );
    let out = run(&toy_args("explore", &n, &g, &p));
    assert!(out.status.success(), "{}", stderr(&out));
    let golden = std::fs::read(toy("golden_explore.csv")).unwrap();
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(golden).unwrap()
    );
}

#[test]
fn evaluate_matches_golden_file() {
    let (n, g, p, d) = (
        toy("network.toml"),
        toy("geometry.toml"),
        toy("profile.toml"),
        toy("design.toml"),
    );
    let mut args = toy_args("evaluate", &n, &g, &p);
    args.extend(["--design", &d]);
    let out = run(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let golden = std::fs::read_to_string(toy("golden_evaluate.csv")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden);
}

#[test]
fn evaluate_resolves_adaptive_schedule() {
    let golden = std::fs::read_to_string(toy("golden_evaluate.csv")).unwrap();
    let conv2 = golden.lines().find(|l| l.starts_with("conv2")).unwrap();
    let schedule = conv2.split(',').nth(3).unwrap();
    assert!(
        ["ifms-reuse", "wghs-reuse", "ofms-reuse"].contains(&schedule),
        "{schedule}"
    );
}

#[test]
fn thread_count_does_not_change_output() {
    let (n, g, p) = (
        toy("network.toml"),
        toy("geometry.toml"),
        toy("profile.toml"),
    );
    let mut one = toy_args("explore", &n, &g, &p);
    one.extend(["--threads", "1"]);
    let mut many = toy_args("explore", &n, &g, &p);
    many.extend(["--threads", "5"]);
    assert_eq!(run(&one).stdout, run(&many).stdout);
}

#[test]
fn json_output_carries_full_precision() {
    let (n, g, p) = (
        toy("network.toml"),
        toy("geometry.toml"),
        toy("profile.toml"),
    );
    let mut args = toy_args("explore", &n, &g, &p);
    args.extend(["--format", "json"]);
    let out = run(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["edp"].as_f64().unwrap(), 398.0 * 131.0);
    assert_eq!(rows[2]["layer"], "TOTAL");
    assert!(rows[2]["policy"].is_null());
}

#[test]
fn full_sweep_has_one_row_per_feasible_point() {
    let (n, g, p) = (
        toy("network.toml"),
        toy("geometry.toml"),
        toy("profile.toml"),
    );
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.csv");
    let sweep_arg = sweep.display().to_string();
    let mut args = toy_args("explore", &n, &g, &p);
    args.extend(["--keep-full-sweep", &sweep_arg, "--policies", "1,3,5"]);
    let out = run(&args);
    assert!(out.status.success(), "{}", stderr(&out));

    let net = load_network(Path::new(&n)).unwrap();
    let buffers = net.buffers.unwrap();
    let expected: usize = net
        .layers
        .iter()
        .map(|l| {
            enumerate_partitions(l, &buffers, Granularity::Divisors)
                .unwrap()
                .len()
                * 4
                * 3
        })
        .sum();
    let text = std::fs::read_to_string(&sweep).unwrap();
    assert_eq!(text.lines().count() - 1, expected);
}

#[test]
fn missing_profile_exits_1_naming_the_file() {
    let (n, g) = (toy("network.toml"), toy("geometry.toml"));
    let out = run(&toy_args("explore", &n, &g, "no/such/profile.toml"));
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("no/such/profile.toml"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn profile_for_wrong_architecture_exits_1() {
    let (n, g) = (toy("network.toml"), toy("geometry.toml"));
    let tl = root()
        .join("configs/profiles/tldram.toml")
        .display()
        .to_string();
    let out = run(&toy_args("explore", &n, &g, &tl));
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("no profile given for DDR3"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn oversized_design_tile_exits_2_naming_the_buffer() {
    let (n, g, p) = (
        toy("network.toml"),
        toy("geometry.toml"),
        toy("profile.toml"),
    );
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("design.toml");
    std::fs::write(
        &design,
        "[[point]]\nlayer = \"conv1\"\nt_m = 4\nt_c = 1\nt_h = 8\nt_w = 8\nschedule = \"ifms-reuse\"\nmapping = 3\n\n[[point]]\nlayer = \"conv2\"\nt_m = 1\nt_c = 1\nt_h = 1\nt_w = 1\nschedule = \"adaptive\"\nmapping = 1\n",
    )
    .unwrap();
    let d = design.display().to_string();
    let mut args = toy_args("evaluate", &n, &g, &p);
    args.extend(["--design", &d]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(
        err.contains("ofms tile of 256 B overflows its 64 B buffer"),
        "{err}"
    );
}

#[test]
fn empty_partition_space_exits_2() {
    let (n, g, p) = (
        toy("network.toml"),
        toy("geometry.toml"),
        toy("profile.toml"),
    );
    let mut args = toy_args("explore", &n, &g, &p);
    args.extend(["--wb-bytes", "8"]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("no feasible partition"),
        "{}",
        stderr(&out)
    );

    args.push("--skip-infeasible-layers");
    let out = run(&args);
    assert!(out.status.success());
    assert!(stderr(&out).contains("warning"));
    assert!(String::from_utf8(out.stdout).unwrap().contains("TOTAL"));
}

#[test]
fn small_chip_exits_3() {
    let (n, p) = (toy("network.toml"), toy("profile.toml"));
    let dir = tempfile::tempdir().unwrap();
    let geometry = dir.path().join("tiny.toml");
    let text = std::fs::read_to_string(toy("geometry.toml"))
        .unwrap()
        .replace("rows_near = 64", "rows_near = 1");
    std::fs::write(&geometry, text).unwrap();
    let g = geometry.display().to_string();
    let out = run(&toy_args("explore", &n, &g, &p));
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("capacity"), "{}", stderr(&out));
}

#[test]
fn unordered_profile_needs_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(toy("profile.toml"))
        .unwrap()
        .replace("bank = 6", "bank = 12");
    std::fs::write(&bad, text).unwrap();
    let b = bad.display().to_string();
    let out = run(&["profiles", "validate", &b]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("bank"));
    assert!(
        run(&["profiles", "validate", &b, "--allow-unordered-profile"])
            .status
            .success()
    );
}

#[test]
fn shipped_profiles_validate() {
    let dir = root().join("configs/profiles");
    let files: Vec<String> = ["ddr3", "salp1", "salp2", "salp_masa", "tldram"]
        .iter()
        .map(|f| dir.join(format!("{f}.toml")).display().to_string())
        .collect();
    let mut args = vec!["profiles", "validate"];
    args.extend(files.iter().map(String::as_str));
    let out = run(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 5);
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(run(&["explore", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let (n, g, p) = (
        toy("network.toml"),
        toy("geometry.toml"),
        toy("profile.toml"),
    );
    let mut args = toy_args("explore", &n, &g, &p);
    args.extend(["--policies", "Mapping-9"]);
    assert_eq!(run(&args).status.code(), Some(1));
}

#[test]
fn architecture_sweep_names_the_winner() {
    let cfg = root().join("configs");
    let n = toy("network.toml");
    let geos: Vec<String> = ["ddr3", "salp_masa"]
        .iter()
        .map(|g| {
            cfg.join(format!("geometries/{g}.toml"))
                .display()
                .to_string()
        })
        .collect();
    let profs: Vec<String> = ["ddr3", "salp_masa"]
        .iter()
        .map(|g| cfg.join(format!("profiles/{g}.toml")).display().to_string())
        .collect();
    let out = run(&[
        "explore",
        "--network",
        &n,
        "--geometry",
        &geos[0],
        "--geometry",
        &geos[1],
        "--profile",
        &profs[0],
        "--profile",
        &profs[1],
        "--format",
        "table",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("TOTAL")).count(), 2);
    assert!(stderr(&out).contains("lowest network EDP: "));
}
