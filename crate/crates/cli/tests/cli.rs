use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_logparse");

fn logparse(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("LUNAR_API_KEY")
        .env_remove("LUNAR_ENDPOINT")
        .env_remove("LUNAR_MODEL")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn corpus(dir: &Path, templates: &str, per: &str, seed: &str) {
    let out = logparse(&[
        "generate",
        "--templates",
        templates,
        "--logs-per-template",
        per,
        "--seed",
        seed,
        "--out",
        p(dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generate_is_byte_identical_under_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    corpus(&a, "10", "100", "7");
    corpus(&b, "10", "100", "7");
    for f in ["logs.txt", "truth.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    let logs = std::fs::read_to_string(a.join("logs.txt")).unwrap();
    assert_eq!(logs.lines().count(), 1000);
    assert_eq!(std::fs::read_to_string(a.join("truth.csv")).unwrap().lines().count(), 1001);
}

#[test]
fn generate_single_line() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path(), "1", "1", "3");
    let logs = std::fs::read_to_string(tmp.path().join("logs.txt")).unwrap();
    assert_eq!(logs.lines().count(), 1);
}

#[test]
fn generate_rejects_zero_logs_per_template() {
    let tmp = tempfile::tempdir().unwrap();
    let out = logparse(&["generate", "--logs-per-template", "0", "--out", p(tmp.path())]);
    assert_eq!(code(&out), 2);
    assert!(!tmp.path().join("logs.txt").exists());
}

#[test]
fn parse_then_evaluate_with_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    let eval = tmp.path().join("eval");
    corpus(&data, "10", "100", "7");
    let truth = data.join("truth.csv");

    let out = logparse(&[
        "parse",
        "--input",
        p(&data.join("logs.txt")),
        "--mock-oracle",
        p(&truth),
        "--out",
        p(&run),
        "--workers",
        "1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("templates:           10"));
    assert!(run.join("assignments.csv").is_file());
    assert!(run.join("templates.csv").is_file());

    let out = logparse(&[
        "evaluate",
        "--pred",
        p(&run.join("assignments.csv")),
        "--truth",
        p(&truth),
        "--out",
        p(&eval),
    ]);
    assert_eq!(code(&out), 0);
    let report = std::fs::read_to_string(eval.join("report.txt")).unwrap();
    for m in ["GA", "PA", "FGA", "FTA"] {
        assert!(report.contains(&format!("{m}: 1.000000")), "{report}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["fta"], 1.0);
    assert!(eval.join("breakdown.csv").is_file());
}

#[test]
fn evaluate_identical_files_scores_one() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path(), "4", "10", "2");
    let truth = tmp.path().join("truth.csv");
    let out = logparse(&["evaluate", "--pred", p(&truth), "--truth", p(&truth)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).matches(": 1.000000").count(), 4);
}

#[test]
fn evaluate_rejects_mismatched_line_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    corpus(&a, "2", "5", "1");
    corpus(&b, "2", "6", "1");
    let out = logparse(&["evaluate", "--pred", p(&a.join("truth.csv")), "--truth", p(&b.join("truth.csv"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_input_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = logparse(&["parse", "--input", p(&tmp.path().join("absent.log")), "--mock-oracle", "x.csv"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn http_without_endpoint_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path(), "1", "3", "1");
    let out = logparse(&["parse", "--input", p(&tmp.path().join("logs.txt")), "--backend", "http"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn mock_without_oracle_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path(), "1", "3", "1");
    let out = logparse(&["parse", "--input", p(&tmp.path().join("logs.txt"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn invalid_values_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path(), "1", "3", "1");
    let input = tmp.path().join("logs.txt");
    let truth = tmp.path().join("truth.csv");
    for extra in [["--lambda", "1.5"], ["--min-sim", "-0.1"], ["--workers", "0"], ["--k", "0"], ["--format", "xml"]] {
        let mut args = vec!["parse", "--input", p(&input), "--mock-oracle", p(&truth)];
        args.extend(extra);
        assert_eq!(code(&logparse(&args)), 2, "{extra:?}");
    }
    assert_eq!(code(&logparse(&["parse", "--bogus"])), 2);
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path(), "2", "5", "1");
    let input = tmp.path().join("logs.txt");
    let truth = tmp.path().join("truth.csv");
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"lambda": 3.0, "workers": 2}"#).unwrap();
    let base = ["parse", "--input", p(&input), "--mock-oracle", p(&truth), "--config", p(&cfg)];

    assert_eq!(code(&logparse(&base)), 2);
    let run = tmp.path().join("run");
    let mut fixed = base.to_vec();
    fixed.extend(["--lambda", "0.5", "--out", p(&run)]);
    assert_eq!(code(&logparse(&fixed)), 0);

    std::fs::write(&cfg, r#"{"lamda": 0.5}"#).unwrap();
    assert_eq!(code(&logparse(&base)), 2);
}

#[test]
fn unreachable_endpoint_fails_with_recovery_file() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path(), "2", "5", "1");
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let run = tmp.path().join("run");
    let out = logparse(&[
        "parse",
        "--input",
        p(&tmp.path().join("logs.txt")),
        "--backend",
        "http",
        "--endpoint",
        &format!("http://127.0.0.1:{port}/v1/chat/completions"),
        "--max-retries",
        "0",
        "--out",
        p(&run),
    ]);
    assert_eq!(code(&out), 1);
    assert!(run.join("recovery.csv").is_file());
    assert!(String::from_utf8_lossy(&out.stderr).contains("recovery.csv"));
}

#[test]
fn api_key_from_environment_is_sent() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("logs.txt"), "disk sda full\n").unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = std::thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let (mut auth, mut len) = (String::new(), 0usize);
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let lower = line.to_ascii_lowercase();
            if lower.starts_with("authorization:") {
                auth = line.trim()["authorization:".len()..].trim().to_owned();
            }
            if let Some(v) = lower.strip_prefix("content-length:") {
                len = v.trim().parse().unwrap();
            }
            if line == "\r\n" {
                break;
            }
        }
        let mut body = vec![0; len];
        reader.read_exact(&mut body).unwrap();
        let payload = r#"{"choices":[{"message":{"content":"LogTemplate[1]: `disk {device} full`"}}]}"#;
        let resp = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
            payload.len()
        );
        stream.write_all(resp.as_bytes()).unwrap();
        (auth, String::from_utf8(body).unwrap())
    });

    let run = tmp.path().join("run");
    let out = Command::new(BIN)
        .args([
            "parse",
            "--input",
            p(&tmp.path().join("logs.txt")),
            "--backend",
            "http",
            "--model",
            "test-model",
            "--out",
            p(&run),
        ])
        .env("LUNAR_API_KEY", "sekret")
        .env("LUNAR_ENDPOINT", format!("http://{addr}/v1/chat/completions"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (auth, body) = server.join().unwrap();
    assert_eq!(auth, "Bearer sekret");
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["model"], "test-model");
    assert_eq!(v["temperature"], 0.0);
    let templates = std::fs::read_to_string(run.join("templates.csv")).unwrap();
    assert!(templates.contains("disk <*> full,1"), "{templates}");
}

#[test]
fn help_lists_every_parse_flag() {
    let out = logparse(&["parse", "--help"]);
    assert_eq!(code(&out), 0);
    let help = stdout(&out);
    for flag in [
        "--input", "--format", "--out", "--k", "--min-bucket", "--lcu-size", "--min-sim", "--lambda",
        "--workers", "--seed", "--backend", "--endpoint", "--model", "--mock-oracle",
    ] {
        assert!(help.contains(flag), "missing {flag}");
    }
    assert!(help.contains("LUNAR_API_KEY"));
}
