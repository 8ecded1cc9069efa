use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn tickbench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tickbench"))
}

fn run(args: &[&str]) -> Output {
    tickbench().args(args).output().expect("spawn tickbench")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_writes_log_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.jsonl");
    let o = run(&[
        "simulate",
        "--policy",
        "pursuit",
        "--mode",
        "direct",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = std::fs::read_to_string(&out).unwrap();
    assert_eq!(log.lines().count(), 181);
    assert!(dir.path().join("run.meta.json").exists());
    let metrics: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(metrics["cra_a"], 0.0);
}

#[test]
fn bench_report_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results");
    let o = run(&["bench", "--out", p(&results)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let md = run(&["report", "--in", p(&results), "--format", "md"]);
    assert!(md.status.success());
    let md = String::from_utf8(md.stdout).unwrap();
    for env in ["sim", "twin", "lab"] {
        assert!(
            md.lines()
                .any(|l| l.starts_with(&format!("| {env} |")) && l.ends_with("| 27 |")),
            "{md}"
        );
    }

    let json = run(&["report", "--in", p(&results), "--format", "json"]);
    let _: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();

    let csv = dir.path().join("traj.csv");
    let o = run(&[
        "export",
        "--in",
        p(&results),
        "--select",
        "closest-cd",
        "--out",
        p(&csv),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("agent,step,x,y"));
    assert_eq!(text.lines().count(), 1 + 3 * 181);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"H_c": 9, "H_p": 8}"#).unwrap();
    let out = dir.path().join("x.jsonl");
    assert_eq!(
        run(&["simulate", "--config", p(&bad), "--out", p(&out)])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["simulate", "--policy", "nope", "--out", p(&out)])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["report", "--in", p(dir.path())]).status.code(),
        Some(2)
    );
    assert!(!out.exists());
}

// A planner that answers the first tick with a one-point trajectory.
#[test]
fn invalid_plan_is_an_episode_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("one.json");
    std::fs::write(&cfg, r#"{"n_agent": 1, "steps": 5}"#).unwrap();
    let out = dir.path().join("x.jsonl");
    let mut child = tickbench()
        .args([
            "simulate",
            "--config",
            p(&cfg),
            "--policy",
            "stdio",
            "--out",
            p(&out),
        ])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let hello: serde_json::Value = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
    assert_eq!(hello["type"], "hello");
    writeln!(stdin, r#"{{"type":"ready","version":1}}"#).unwrap();
    let tick: serde_json::Value = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
    assert_eq!(tick["type"], "tick");
    writeln!(
        stdin,
        r#"{{"type":"plan","step":0,"trajectories":[{{"id":0,"t0":0.0,"dt":0.1,"points":[{{"x":0.0,"y":0.0,"yaw":0.0,"speed":0.0,"steer":0.0}}]}}]}}"#
    )
    .unwrap();
    let status = child.wait().unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn garbage_from_server_exits_4() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let server = std::thread::spawn(move || {
        let (mut s, _) = listener.accept().unwrap();
        s.write_all(b"this is not json\n").unwrap();
    });
    let o = run(&["policy-client", "--connect", &addr]);
    server.join().unwrap();
    assert_eq!(
        o.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn wire_episode_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let wire = dir.path().join("wire.jsonl");
    let local = dir.path().join("local.jsonl");
    let mut sim = tickbench()
        .args([
            "simulate",
            "--policy",
            "wire:127.0.0.1:0",
            "--preset",
            "lab",
            "--mode",
            "follow",
        ])
        .args(["--out", p(&wire)])
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(sim.stderr.take().unwrap());
    let mut line = String::new();
    stderr.read_line(&mut line).unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .expect(&line)
        .to_string();
    let client = run(&["policy-client", "--connect", &addr, "--policy", "pursuit"]);
    assert!(
        client.status.success(),
        "{}",
        String::from_utf8_lossy(&client.stderr)
    );
    assert!(sim.wait().unwrap().success());

    let o = run(&[
        "simulate",
        "--preset",
        "lab",
        "--mode",
        "follow",
        "--out",
        p(&local),
    ]);
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(&wire).unwrap(),
        std::fs::read(&local).unwrap()
    );
}

#[test]
fn serve_once_runs_one_episode() {
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("episodes");
    let mut server = tickbench()
        .args(["serve", "--port", "0", "--once", "--out", p(&logs)])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(server.stderr.take().unwrap());
    let mut line = String::new();
    stderr.read_line(&mut line).unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .expect(&line)
        .to_string();
    let client = run(&["policy-client", "--connect", &addr]);
    assert!(
        client.status.success(),
        "{}",
        String::from_utf8_lossy(&client.stderr)
    );
    let out = server.wait_with_output().unwrap();
    assert!(out.status.success());
    assert!(logs.join("episode_0000.jsonl").exists());
}
