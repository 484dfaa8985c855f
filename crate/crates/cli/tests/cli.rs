use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

fn agriprice(data_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agriprice"))
        .arg("--data-dir")
        .arg(data_dir)
        .args(args)
        .env_remove("AGRIPRICE_DATA_DIR")
        .env_remove("AGRIPRICE_BIND")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Failing commands print exactly one `error[kind]: ...` line.
fn assert_error(o: &Output, code: i32, kind: &str) {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", stderr(o));
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with(&format!("error[{kind}]: ")), "{err}");
}

fn seeded(weeks: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let o = agriprice(dir.path(), &["synth", "--ingest", "--weeks", weeks]);
    assert!(o.status.success(), "{}", stderr(&o));
    dir
}

#[test]
fn synth_presets_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = agriprice(dir.path(), &["--seed", "7", "synth", "--commodity", "chicken", "--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let text = std::fs::read(a.join("chicken.csv")).unwrap();
    assert_eq!(text, std::fs::read(b.join("chicken.csv")).unwrap());
    assert_eq!(String::from_utf8(text).unwrap().lines().count(), 589);

    let o = agriprice(dir.path(), &["--seed", "8", "synth", "--commodity", "chicken", "--out-dir", b.to_str().unwrap()]);
    assert!(o.status.success());
    assert_ne!(std::fs::read(a.join("chicken.csv")).unwrap(), std::fs::read(b.join("chicken.csv")).unwrap());

    assert_error(&agriprice(dir.path(), &["synth", "--commodity", "chicken", "--stddev", "-1"]), 2, "usage");
    assert_error(&agriprice(dir.path(), &["synth", "--commodity", "durian"]), 2, "usage");
    let o = agriprice(
        dir.path(),
        &["synth", "--commodity", "durian", "--mean", "20", "--min", "12", "--max", "30", "--stddev", "3", "--weeks", "60"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn ingest_reports_counts_and_row_errors() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("synthetic");
    assert!(agriprice(dir.path(), &["synth", "--commodity", "tomato", "--weeks", "100"]).status.success());
    let file = csv.join("tomato.csv");
    let first = agriprice(dir.path(), &["ingest", file.to_str().unwrap()]);
    assert!(first.status.success(), "{}", stderr(&first));
    let summary = stdout(&first);
    assert!(summary.starts_with("tomato: 100 rows, 2 missing prices (2.00%)"), "{summary}");
    let again = agriprice(dir.path(), &["ingest", file.to_str().unwrap()]);
    assert_eq!(stdout(&again), summary);

    let bad = dir.path().join("bad.csv");
    let mut text = std::fs::read_to_string(&file).unwrap();
    text = text.replacen("\n2009-01-05,tomato,", "\n2009-01-05,tomato,abc", 1);
    std::fs::write(&bad, text).unwrap();
    let o = agriprice(dir.path(), &["ingest", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("row"), "{}", stderr(&o));

    // one good file among bad ones still succeeds
    let o = agriprice(dir.path(), &["ingest", bad.to_str().unwrap(), file.to_str().unwrap()]);
    assert!(o.status.success());
    assert_error(&agriprice(dir.path(), &["ingest"]), 2, "usage");
}

#[test]
fn benchmark_series_shapes_and_determinism() {
    let dir = seeded("160");
    let fast = ["--no-tune", "--family", "arima", "--family", "trend", "--family", "gbt"];
    let run = |series: &str| {
        let mut args = vec!["benchmark", "--series", series];
        args.extend(fast);
        let o = agriprice(dir.path(), &args);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(dir.path().join(format!("reports/series{series}.csv"))).unwrap()
    };
    let s1 = run("1");
    let rows: Vec<&str> = s1.lines().collect();
    assert_eq!(rows[0], "commodity,family,mode,mse,train_rows,test_rows,warnings");
    assert_eq!(rows.len(), 1 + 3 * 3);
    assert!(rows[1..].iter().all(|r| r.contains(",univariate,")));
    assert_eq!(run("1"), s1, "deterministic rerun");

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("reports/series1.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 0);
    assert_eq!(json["series"], 1);

    let s2 = run("2");
    let rows: Vec<&str> = s2.lines().skip(1).collect();
    // arima is univariate only
    assert_eq!(rows.len(), 3 * (3 + 2));
    assert_eq!(rows.iter().filter(|r| r.contains(",multivariate,")).count(), 6);

    // a price-only commodity cannot enter series 2
    let price_only = dir.path().join("plain.csv");
    let mut text = String::from("date,commodity,price_myr,temperature_c,humidity_pct,precipitation_mm,crude_oil_usd\n");
    for w in 0..60 {
        let d = chrono::NaiveDate::from_ymd_opt(2015, 1, 5).unwrap() + chrono::Duration::weeks(w);
        text.push_str(&format!("{d},okra,{},,,,\n", 3.0 + (w as f64 * 0.3).sin()));
    }
    std::fs::write(&price_only, text).unwrap();
    assert!(agriprice(dir.path(), &["ingest", price_only.to_str().unwrap()]).status.success());
    let o = agriprice(dir.path(), &["benchmark", "--series", "2", "--commodity", "okra", "--no-tune"]);
    assert_error(&o, 3, "data");
    for col in ["temperature", "humidity", "precipitation", "crude_oil"] {
        assert!(stderr(&o).contains(col));
    }
    assert_error(&agriprice(dir.path(), &["benchmark", "--series", "3"]), 2, "usage");
}

#[test]
fn forecast_writes_two_segments() {
    let dir = seeded("160");
    let out = dir.path().join("plot.csv");
    let o = agriprice(
        dir.path(),
        &["forecast", "--commodity", "chili", "--mode", "uni", "--horizon", "52", "--no-tune", "--family", "arima", "--family", "trend", "--out", out.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let history: Vec<_> = rows.iter().filter(|r| r[2] == "0").collect();
    let forecast: Vec<_> = rows.iter().filter(|r| r[2] == "1").collect();
    assert_eq!(forecast.len(), 52);
    assert_eq!(history.len(), 160);
    let hist_dates: std::collections::HashSet<&str> = history.iter().map(|r| r[0]).collect();
    assert!(forecast.iter().all(|r| !hist_dates.contains(r[0])));
    assert!(history.last().unwrap()[0] < forecast[0][0]);

    let o = agriprice(dir.path(), &["forecast", "--commodity", "durian", "--no-tune"]);
    assert_error(&o, 3, "data");
    assert_error(&agriprice(dir.path(), &["forecast", "--commodity", "chili", "--horizon", "0"]), 2, "usage");
    assert_error(
        &agriprice(dir.path(), &["--train-fraction", "1.5", "forecast", "--commodity", "chili"]),
        2,
        "usage",
    );
}

fn get(port: u16, path: &str) -> Option<String> {
    let mut s = TcpStream::connect(("127.0.0.1", port)).ok()?;
    s.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    write!(s, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
    let mut buf = String::new();
    s.read_to_string(&mut buf).ok()?;
    Some(buf)
}

#[cfg(unix)]
#[test]
fn serve_answers_health_and_stops_on_signal() {
    let dir = tempfile::tempdir().unwrap();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_agriprice"))
        .arg("--data-dir")
        .arg(dir.path())
        .args(["serve", "--bind", &format!("127.0.0.1:{port}")])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let reply = loop {
        if let Some(r) = get(port, "/api/v1/health") {
            break r;
        }
        assert!(Instant::now() < deadline, "server did not come up");
        std::thread::sleep(Duration::from_millis(50));
    };
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.contains("\"ok\""));
    let unauth = get(port, "/api/v1/commodities").unwrap();
    assert!(unauth.starts_with("HTTP/1.1 401"));

    let killed = Command::new("kill").args(["-TERM", &child.id().to_string()]).status().unwrap();
    assert!(killed.success());
    let deadline = Instant::now() + Duration::from_secs(20);
    let status = loop {
        if let Some(s) = child.try_wait().unwrap() {
            break s;
        }
        assert!(Instant::now() < deadline, "server did not stop");
        std::thread::sleep(Duration::from_millis(50));
    };
    assert!(status.success());
}
