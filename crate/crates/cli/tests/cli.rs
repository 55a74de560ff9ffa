use std::process::{Command, Output};

fn calib(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calib"))
        .args(args)
        .env("CALIB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn sweep_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("fb.cfg");
    std::fs::write(
        &config,
        "# small sweep\nname = fb\nT = 100, 400, 1600\ntrials = 12\nseed = 5\n\
         forecaster = fixed-bias:auto\nadversary = bernoulli:0.5\nmetrics = smce, ece\n",
    )
    .unwrap();
    for format in ["csv", "json"] {
        let mut bytes = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{format}-{run}"));
            let o = calib(&[
                "sweep",
                "--config",
                config.to_str().unwrap(),
                "--format",
                format,
                "--out",
                out.to_str().unwrap(),
            ]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            bytes.push(std::fs::read(&out).unwrap());
        }
        assert_eq!(bytes[0], bytes[1], "{format}");
    }
    let csv = std::fs::read_to_string(dir.path().join("csv-0")).unwrap();
    assert!(csv.starts_with("experiment,T,metric,trials,mean,stderr\n"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn sweep_flags_override_and_print() {
    let o = calib(&[
        "sweep", "--T", "8,16,32", "--trials", "3", "--forecaster", "constant-half", "--adversary",
        "fixed:10110011101100111011001110110011", "--metrics", "ece,lower-caldist", "--grid-K", "200",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains(",32,lower-caldist:200,3,"), "{text}");
}

#[test]
fn simulate_then_metrics_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("game.txt");
    let o = calib(&[
        "simulate", "--T", "10", "--seed", "3", "--forecaster", "fixed-bias:0.25", "--metrics",
        "ece,smce,caldist-exact", "--out", file.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let from_game = stdout(&o);
    let o = calib(&["metrics", file.to_str().unwrap(), "--metrics", "ece,smce,caldist-exact"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), from_game);
    assert!(from_game.contains("# caldist-exact = "));
}

#[test]
fn simulate_prints_parseable_transcript() {
    let o = calib(&["simulate", "--T", "5", "--forecaster", "constant:0.25"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let steps: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(steps.len(), 5);
    assert!(steps.iter().all(|l| l.ends_with(",0.25")));
}

#[test]
fn verify_small_budget() {
    let o = calib(&["verify", "--cases", "10", "--binomial-samples", "2000", "--seed", "1"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6, "{text}");
}

#[test]
fn errors_exit_with_code_two() {
    for args in [
        vec!["simulate", "--T", "5", "--forecaster", "oracle"],
        vec!["sweep", "--T", "20", "--metrics", "caldist-exact", "--trials", "1"],
        vec!["metrics", "/nonexistent/transcript.txt"],
        vec!["verify", "--suite", "nope"],
    ] {
        let o = calib(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}
