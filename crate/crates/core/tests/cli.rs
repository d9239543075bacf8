use std::path::Path;
use std::process::{Command, Output};

use scimap::community::read_partition_csv;

fn scimap(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scimap"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SCIMAP_CONFIG")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&scimap(&[], dir.path())), 1);
    assert_eq!(code(&scimap(&["cluster", "--bogus"], dir.path())), 1);
    assert_eq!(
        code(&scimap(
            &["generate", "--manifest", "m.toml", "--pipeline", "nope"],
            dir.path()
        )),
        1
    );
    assert_eq!(code(&scimap(&["--help"], dir.path())), 0);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = scimap(&["ingest", "--manifest", "missing.toml"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));

    std::fs::write(dir.path().join("bad.toml"), "instance_id = 3\n").unwrap();
    assert_eq!(code(&scimap(&["ingest", "--manifest", "bad.toml"], dir.path())), 2);
}

#[test]
fn offline_rejects_remote_generator() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[generator]\nbackend = \"http\"\n").unwrap();
    let out = scimap(
        &["--offline", "--config", "c.toml", "generate", "--manifest", "m.toml"],
        dir.path(),
    );
    assert_ne!(code(&out), 0);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("offline"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn synth_graph_cluster_hits_target_k() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let out = scimap(
        &[
            "--seed",
            "3",
            "synth",
            "--out-dir",
            "fx",
            "--instances",
            "1",
            "--blocks",
            "5",
            "--noise",
            "0.05",
        ],
        root,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let inst = std::fs::read_dir(root.join("fx"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.is_dir())
        .unwrap();
    let manifest = inst.join("manifest.toml");
    let manifest = manifest.to_str().unwrap();

    let ingest = scimap(&["ingest", "--manifest", manifest], root);
    assert_eq!(code(&ingest), 0, "{}", String::from_utf8_lossy(&ingest.stderr));

    for step in [vec!["graph"], vec!["cluster", "--target-k", "5"]] {
        let mut args = step.clone();
        args.extend(["--seed", "3", "--manifest", manifest, "--work-dir", "w"]);
        let out = scimap(&args, root);
        assert_eq!(code(&out), 0, "{step:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let id = inst.file_name().unwrap();
    let bc = root.join("w").join(id).join("bc");
    for f in [
        "edges.csv",
        "link_strength.csv",
        "partition.csv",
        "resolution_trace.csv",
        "cluster.json",
    ] {
        assert!(bc.join(f).is_file(), "{f} missing");
    }
    let partition = read_partition_csv(bc.join("partition.csv")).unwrap();
    assert_eq!(partition.k(), 5);
    assert_eq!(partition.len(), 50);
    let sizes: Vec<usize> = partition.clusters().values().map(Vec::len).collect();
    assert!(
        sizes.windows(2).all(|w| w[0] >= w[1]),
        "labels follow decreasing size: {sizes:?}"
    );
}
