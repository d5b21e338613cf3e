use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use railfso::config::{ConfigFile, ResolvedConfig};
use railfso::divergence_control::ControllerMode;
use railfso::scenario::{evaluate_mode_at_range, max_distance};

const FIG8_REDUCED_RANGES: &str = "75:2000:125";
const PARSE_BACK_REL_TOL: f64 = 1e-9;

fn railfso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_railfso"))
        .args(args)
        .env_remove("RAILFSO_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let body = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, body)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: {s}"))
}

fn rel_close(a: f64, b: f64) -> bool {
    a == b || ((a - b) / b).abs() <= PARSE_BACK_REL_TOL
}

#[test]
fn link_inside_fixed_threshold_is_up() {
    let o = railfso(&[
        "link",
        "--range",
        "224",
        "--visibility",
        "1",
        "--mode",
        "fixed",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("link_up         true"));
}

#[test]
fn link_beyond_fixed_threshold_is_down() {
    let c = ResolvedConfig::from_preset("table1").unwrap().scenario;
    let threshold = max_distance(&c, 1.0, ControllerMode::Fixed)
        .unwrap()
        .distance_m;
    let beyond = format!("{}", threshold + 10.0);
    let o = railfso(&[
        "link",
        "--range",
        &beyond,
        "--visibility",
        "1",
        "--mode",
        "fixed",
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stdout(&o).contains("link_up         false"));
}

#[test]
fn config_errors_exit_one_and_name_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let malformed = write(dir.path(), "bad.toml", "[optical\nsystem_loss = ");
    let o = railfso(&["-c", malformed.to_str().unwrap(), "link", "--range", "100"]);
    assert_eq!(code(&o), 1);

    let invalid = write(
        dir.path(),
        "invalid.toml",
        "[receiver]\nbandwidth_hz = -1.0\n",
    );
    let o = railfso(&["-c", invalid.to_str().unwrap(), "link", "--range", "100"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("bandwidth_hz"), "{}", stderr(&o));

    let o = railfso(&["-c", "/nonexistent/config.toml", "link", "--range", "100"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn usage_exit_codes() {
    assert_eq!(code(&railfso(&["--help"])), 0);
    assert_eq!(code(&railfso(&["--version"])), 0);
    assert_eq!(code(&railfso(&[])), 1);
    assert_eq!(code(&railfso(&["link"])), 1);
    assert_eq!(code(&railfso(&["link", "--range", "abc"])), 1);
    assert_eq!(
        code(&railfso(&["link", "--range", "100", "--mode", "warp"])),
        1
    );
    assert_eq!(
        code(&railfso(&["--preset", "nope", "link", "--range", "100"])),
        1
    );
    assert_eq!(code(&railfso(&["link", "--range", "2"])), 1);
}

#[test]
fn sweep_cardinality_order_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = railfso(&[
        "sweep",
        "--ranges",
        "300,100,200",
        "--visibilities",
        "1,0.5",
        "--modes",
        "fixed,adaptive",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, body) = rows(&out);
    assert_eq!(
        header,
        [
            "mode",
            "visibility_km",
            "range_m",
            "divergence_rad",
            "p_rx_dbm",
            "snr_db",
            "ber"
        ]
    );
    assert_eq!(body.len(), 12);
    let keys: Vec<(String, f64, f64)> = body
        .iter()
        .map(|r| (r[0].clone(), num(&r[1]), num(&r[2])))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
    });
    assert_eq!(keys, sorted);

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("sweep.csv.manifest.json")).unwrap())
            .unwrap();
    let digest = ResolvedConfig::from_preset("table1").unwrap().digest();
    assert_eq!(manifest["config_digest"], digest.as_str());
    assert_eq!(manifest["tool_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["rows"], 12);
    for key in ["command", "started_at", "finished_at", "grids", "config"] {
        assert!(!manifest[key].is_null(), "{key}");
    }
}

#[test]
fn manifest_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pass.csv");
    let o = railfso(&["--preset", "fig9", "pass", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("pass.csv.manifest.json")).unwrap())
            .unwrap();
    let echoed: ConfigFile = serde_json::from_value(manifest["config"].clone()).unwrap();
    let resolved = echoed.resolve().unwrap();
    let original = ResolvedConfig::from_preset("fig9").unwrap();
    assert_eq!(resolved, original);
    assert_eq!(manifest["config_digest"], original.digest().as_str());
}

#[test]
fn digest_stable_under_key_reordering() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(
        dir.path(),
        "a.toml",
        "[channel]\nvisibility_km = 0.7\n\n[optical]\ntx_power_mw = 10.0\nsystem_loss = 0.5\n",
    );
    let b = write(
        dir.path(),
        "b.toml",
        "[optical]\nsystem_loss = 0.5\ntx_power_mw = 10.0\n\n[channel]\nvisibility_km = 0.7\n",
    );
    let digest = |p: &Path| {
        let o = railfso(&["-c", p.to_str().unwrap(), "config"]);
        assert_eq!(code(&o), 0);
        stdout(&o).lines().last().unwrap().to_string()
    };
    assert_eq!(digest(&a), digest(&b));
}

#[test]
fn sweep_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: Option<&str>| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_railfso"));
        cmd.args([
            "--preset",
            "fig8",
            "sweep",
            "--ranges",
            "75:2000:5",
            "--out",
            out.to_str().unwrap(),
        ]);
        match threads {
            Some(t) => cmd.env("RAILFSO_THREADS", t),
            None => cmd.env_remove("RAILFSO_THREADS"),
        };
        assert!(cmd.output().unwrap().status.success());
        std::fs::read(out).unwrap()
    };
    let first = run("a.csv", None);
    assert_eq!(first, run("b.csv", None));
    assert_eq!(first, run("c.csv", Some("1")));
}

#[test]
fn fig8_matches_golden_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig8.csv");
    let o = railfso(&[
        "--preset",
        "fig8",
        "sweep",
        "--ranges",
        FIG8_REDUCED_RANGES,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/fig8_reduced.csv");
    assert_eq!(
        std::fs::read_to_string(out).unwrap(),
        std::fs::read_to_string(golden).unwrap()
    );
}

#[test]
fn csv_values_parse_back_to_model_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = railfso(&[
        "--preset",
        "fig10",
        "sweep",
        "--ranges",
        "75:2000:35",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let c = ResolvedConfig::from_preset("fig10").unwrap().scenario;
    let (_, body) = rows(&out);
    assert!(!body.is_empty());
    for r in body {
        let mode: ControllerMode = r[0].parse().unwrap();
        let e = evaluate_mode_at_range(&c, num(&r[1]), mode, num(&r[2])).unwrap();
        assert!(rel_close(num(&r[3]), e.divergence_rad), "{r:?}");
        assert!(rel_close(num(&r[4]), e.p_rx_dbm), "{r:?}");
        assert!(rel_close(num(&r[5]), e.snr_db), "{r:?}");
        assert!(rel_close(num(&r[6]), e.ber), "{r:?}");
    }
}

#[test]
fn maxdist_schema_and_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("maxdist.csv");
    let o = railfso(&[
        "maxdist",
        "--visibilities",
        "0.5,1",
        "--modes",
        "adaptive,fixed",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, body) = rows(&out);
    assert_eq!(
        header,
        ["mode", "visibility_km", "max_distance_m", "saturated"]
    );
    assert_eq!(body.len(), 4);
    let find = |mode: &str, v: f64| {
        body.iter()
            .find(|r| r[0] == mode && num(&r[1]) == v)
            .unwrap()
            .clone()
    };
    let a1 = find("adaptive", 1.0);
    assert_eq!(num(&a1[2]), 2000.0);
    assert_eq!(a1[3], "true");
    let a05 = find("adaptive", 0.5);
    assert!((num(&a05[2]) - 994.0).abs() <= 10.0, "{a05:?}");
    assert_eq!(a05[3], "false");
    let c = ResolvedConfig::from_preset("table1").unwrap().scenario;
    let f1 = find("fixed", 1.0);
    let core = max_distance(&c, 1.0, ControllerMode::Fixed).unwrap();
    assert!(rel_close(num(&f1[2]), core.distance_m));
}

#[test]
fn pass_cardinality() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pass.csv");
    let o = railfso(&["pass", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, body) = rows(&out);
    assert_eq!(
        header,
        [
            "t_s",
            "transceiver_id",
            "station_id",
            "range_m",
            "divergence_rad",
            "p_rx_dbm",
            "snr_db",
            "ber",
            "link_up"
        ]
    );
    assert_eq!(body.len(), 601);
}

#[test]
fn stationary_pass_rows_are_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "still.toml",
        "[controller]\nmode = \"motorized\"\n[train]\nspeed_kmh = 0.0\nstart_position_m = 120.0\n[simulation]\nduration_s = 10.0\n",
    );
    let out = dir.path().join("still.csv");
    let o = railfso(&[
        "-c",
        cfg.to_str().unwrap(),
        "pass",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, body) = rows(&out);
    assert_eq!(body.len(), 101);
    assert!(body.iter().all(|r| r[1..] == body[0][1..]));
}

#[test]
fn motorized_pass_never_exceeds_ideal() {
    let dir = tempfile::tempdir().unwrap();
    let preset = railfso::config::preset("fig9").unwrap();
    let ideal_cfg = write(
        dir.path(),
        "ideal.toml",
        &preset.replace("mode = \"motorized\"", "mode = \"adaptive\""),
    );
    let m_out = dir.path().join("m.csv");
    let i_out = dir.path().join("i.csv");
    assert_eq!(
        code(&railfso(&[
            "--preset",
            "fig9",
            "pass",
            "--out",
            m_out.to_str().unwrap()
        ])),
        0
    );
    assert_eq!(
        code(&railfso(&[
            "-c",
            ideal_cfg.to_str().unwrap(),
            "pass",
            "--out",
            i_out.to_str().unwrap()
        ])),
        0
    );
    let (_, m) = rows(&m_out);
    let (_, i) = rows(&i_out);
    assert_eq!(m.len(), i.len());
    assert!(m.len() > 100);
    for (a, b) in m.iter().zip(&i) {
        assert_eq!(a[0], b[0]);
        assert!(num(&a[5]) <= num(&b[5]), "t = {}", a[0]);
    }
}

#[test]
fn unwritable_output_exits_one() {
    let o = railfso(&[
        "sweep",
        "--ranges",
        "100",
        "--out",
        "/nonexistent/dir/out.csv",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn auxiliary_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("placement.csv");
    let o = railfso(&[
        "--preset",
        "fig2",
        "placement",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, body) = rows(&out);
    assert_eq!(
        header,
        [
            "longitudinal_m",
            "gantry_p_rx_dbm",
            "trackside_p_rx_dbm",
            "gap_db"
        ]
    );
    assert!(body.iter().all(|r| num(&r[3]) >= 0.0));

    let out = dir.path().join("wavelengths.csv");
    let o = railfso(&[
        "--preset",
        "fig5",
        "wavelengths",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, body) = rows(&out);
    assert_eq!(
        header,
        ["wavelength_nm", "visibility_km", "range_m", "p_rx_dbm"]
    );
    assert_eq!(body.len(), 3 * 70);

    let o = railfso(&["presets"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 7);
}

#[test]
fn dense_fog_warns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "fog.toml", "[channel]\nvisibility_km = 0.01\n");
    let o = railfso(&["-c", cfg.to_str().unwrap(), "link", "--range", "100"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("WARN"), "{}", stderr(&o));
}
