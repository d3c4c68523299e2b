use mdmlink::ExperimentConfig;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mdmlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdmlink"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// A five-mode link that runs in well under a second.
const SMALL: &str = r#"
[signal]
format = "qpsk"
payload_symbols = 4096
rrc_span = 256

[channel]
modes = 5
wavelengths_nm = [1550.0]
decorrelation_delay = 1e-9

[impairments]
snr_db = [inf]

[equalizer]
num_taps = 32
training_symbols = 4096
"#;

fn write_config(dir: &Path, extra: &str) -> String {
    let p = dir.join("small.toml");
    fs::write(&p, format!("{SMALL}{extra}")).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn schema_parses_back_to_defaults() {
    let o = mdmlink(&["print-config-schema"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), ExperimentConfig::default());
}

#[test]
fn simulate_writes_reproducible_results() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "");
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    for out in [&a, &b] {
        let o = mdmlink(&[
            "simulate",
            "--config",
            &cfg,
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in [
        "ber.csv",
        "summary.txt",
        "config.toml",
        "constellation.csv",
        "impulse_response.csv",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let echoed = ExperimentConfig::load(a.join("config.toml")).unwrap();
    assert_eq!(echoed.seeds.master, 42);
    assert_eq!(echoed.channel.modes, 5);
    let ber = fs::read_to_string(a.join("ber.csv")).unwrap();
    assert_eq!(ber.lines().count(), 1 + 5);
    assert!(ber.lines().skip(1).all(|l| l.contains(",8192,0,0,below_fec,")), "{ber}");
}

#[test]
fn unknown_key_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "\n[receiver]\nphase_trackin = \"off\"\n");
    let o = mdmlink(&["simulate", "--config", &cfg, "--out", d.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("phase_trackin"));
}

#[test]
fn missing_config_file_and_bad_arguments_exit_1() {
    assert_eq!(code(&mdmlink(&["simulate", "--config", "/nonexistent/cfg.toml"])), 1);
    assert_eq!(code(&mdmlink(&["sweep", "--axis", "colour", "--values", "1"])), 1);
    assert_eq!(code(&mdmlink(&["sweep", "--axis", "snr", "--values", "1,x"])), 1);
    assert_eq!(code(&mdmlink(&["frobnicate"])), 1);
}

#[test]
fn divergence_is_a_runtime_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "step = 50.0\nnormalized = false\n");
    let o = mdmlink(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        d.path().join("r").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
}

#[test]
fn snr_sweep_and_plots() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "");
    let out = d.path().join("sweep");
    let o = mdmlink(&[
        "sweep",
        "--config",
        &cfg,
        "--axis",
        "snr",
        "--values",
        "inf,30",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().filter(|l| l.contains(",ok,")).count(), 2);
    assert!(out.join("point_1").join("ber.csv").is_file());

    let plots = d.path().join("plots");
    let o = mdmlink(&["plot", out.to_str().unwrap(), "--out", plots.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for name in [
        "constellation.svg",
        "ber_vs_wavelength.svg",
        "impulse_response.svg",
        "intensity_matrix.svg",
    ] {
        let svg = fs::read_to_string(plots.join(name)).unwrap();
        assert!(svg.starts_with("<svg"), "{name}");
    }
    let cons = fs::read_to_string(plots.join("constellation.svg")).unwrap();
    assert_eq!(cons.matches("class=\"panel\"").count(), 5);
}

#[test]
fn plot_lists_missing_sections() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "");
    let run = d.path().join("run");
    assert_eq!(
        code(&mdmlink(&[
            "simulate",
            "--config",
            &cfg,
            "--out",
            run.to_str().unwrap()
        ])),
        0
    );
    fs::remove_file(run.join("constellation.csv")).unwrap();
    let o = mdmlink(&["plot", run.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing section constellation"));
    assert!(run.join("plots").join("impulse_response.svg").is_file());
    assert!(!run.join("plots").join("constellation.svg").exists());

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(code(&mdmlink(&["plot", empty.path().to_str().unwrap()])), 1);
}

fn matrix_csv(wavelength: f64, worst: Option<(usize, usize, f64)>) -> String {
    let n = 11;
    let mut s = format!("# wavelength_nm = {wavelength}\nmode");
    for j in 0..n {
        s += &format!(",TE{j}");
    }
    s.push('\n');
    for i in 0..n {
        s += &format!("TE{i}");
        for j in 0..n {
            let v = match worst {
                _ if i == j => -1.0,
                Some((r, c, v)) if (r, c) == (i, j) => v,
                _ => -30.0,
            };
            s += &format!(",{v}");
        }
        s.push('\n');
    }
    s
}

#[test]
fn characterize_flags_worst_mode() {
    let d = tempfile::tempdir().unwrap();
    let a = d.path().join("m1532.csv");
    let b = d.path().join("m1550.csv");
    fs::write(&a, matrix_csv(1532.0, Some((8, 7, -8.0)))).unwrap();
    fs::write(&b, matrix_csv(1550.0, None)).unwrap();
    let out = d.path().join("char");
    let o = mdmlink(&[
        "characterize",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("characterization.csv")).unwrap();
    assert!(
        table
            .lines()
            .any(|l| l.starts_with("1532,TE8,-7,") && l.ends_with(",true")),
        "{table}"
    );

    fs::write(&a, "mode,TE0\nTE0,abc\n").unwrap();
    let o = mdmlink(&["characterize", a.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2, column 2"));
}
