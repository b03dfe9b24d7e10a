use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn exe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_resochain"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(sub: &str, config: &Path, out: &Path) -> Output {
    exe()
        .args([sub, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--threads", "2"])
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        o.status,
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(String::from).collect()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn fig2_band_reports_both_gap_types() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("band", &example("fig2_band.toml"), tmp.path());
    ok(&o);
    let band = tmp.path().join("band.csv");
    assert_eq!(header(&band), ["alpha", "band_index", "re_omega", "im_omega"]);
    assert_eq!(rows(&band).len(), 101 * 3);
    let gaps = rows(&tmp.path().join("gaps.csv"));
    assert!(gaps.iter().any(|r| r[0] == "frequency"));
    assert!(gaps.iter().any(|r| r[0] == "momentum"));
    let svg = fs::read_to_string(tmp.path().join("band.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn unmodulated_chain_has_no_momentum_gap() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[solver]\nalpha_count = 21\n");
    let out = tmp.path().join("out");
    ok(&run("gaps", &cfg, &out));
    let gaps = rows(&out.join("gaps.csv"));
    assert!(gaps.iter().all(|r| r[0] != "momentum"));
    assert!(!out.join("band.csv").exists());
}

#[test]
fn fig3_static_single_localised_mode() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&run("modes", &example("fig3_static.toml"), tmp.path()));
    let modes = rows(&tmp.path().join("modes.csv"));
    assert_eq!(modes.len(), 60);
    let d: Vec<f64> = modes.iter().map(|r| r[4].parse().unwrap()).collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    assert_eq!(d.iter().filter(|x| **x > 0.9 * max).count(), 1);
    assert_eq!(modes.iter().filter(|r| r[5] == "true").count(), 1);
}

#[test]
fn fig3_modulated_several_localised_modes() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&run("modes", &example("fig3_modulated.toml"), tmp.path()));
    let modes = rows(&tmp.path().join("modes.csv"));
    assert!(modes.iter().filter(|r| r[5] == "true").count() > 1);
    assert_eq!(rows(&tmp.path().join("multipliers.csv")).len(), 120);
}

#[test]
fn defect_free_chain_is_delocalised() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[geometry]\nlengths = [1.0, 1.0, 1.0]\ngaps = [2.0, 2.0, 2.0]\n");
    let out = tmp.path().join("out");
    ok(&run("modes", &cfg, &out));
    for r in rows(&out.join("modes.csv")) {
        assert!(r[4].parse::<f64>().unwrap() < 0.35);
    }
}

#[test]
fn fig4_time_defect_lambdas_below_one() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&run("modes", &example("fig4_time_defect.toml"), tmp.path()));
    let lambdas: Vec<f64> = rows(&tmp.path().join("multipliers.csv"))
        .iter()
        .map(|r| r[3].parse().unwrap())
        .collect();
    assert!(lambdas.iter().cloned().fold(f64::INFINITY, f64::min) < 1.0 - 1e-3);
}

#[test]
fn fig5_space_time_peak() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&run("evolve", &example("fig5_dstar.toml"), tmp.path()));
    let trace = rows(&tmp.path().join("dstar.csv"));
    assert_eq!(trace.len(), 1001);
    let mut d: Vec<f64> = trace.iter().map(|r| r[1].parse().unwrap()).collect();
    let (k, max) = d.iter().cloned().enumerate().fold((0, 0.0), |a, (i, x)| if x > a.1 { (i, x) } else { a });
    let peak_t = trace[k][0].clone();
    d.sort_by(f64::total_cmp);
    let median = (d[499] + d[500]) / 2.0;
    assert!(max / median > 2.0, "ratio {}", max / median);

    // the snapshot at the d_* argmax concentrates its mass near cell 0
    let snaps = rows(&tmp.path().join("snapshots.csv"));
    let at_peak: Vec<&Vec<String>> = snaps.iter().filter(|r| r[0] == peak_t).collect();
    assert_eq!(at_peak.len(), 75);
    let (mut near, mut total) = (0.0, 0.0);
    for r in at_peak {
        let cell: i64 = r[2].parse().unwrap();
        let a: f64 = r[4].parse().unwrap();
        total += a * a;
        if cell.abs() <= 2 {
            near += a * a;
        }
    }
    assert!(near / total > 0.5, "mass {}", near / total);
    assert!(tmp.path().join("snapshots.svg").exists());
    assert!(tmp.path().join("dstar.svg").exists());
}

#[test]
fn static_root_matches_supercell_and_deduplicates() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&run("roots", &example("roots_static.toml"), tmp.path()));
    let roots = rows(&tmp.path().join("roots.csv"));
    assert_eq!(header(&tmp.path().join("roots.csv"))[6], "status");
    // two guesses, one root
    assert_eq!(roots.len(), 1);
    assert_eq!(roots[0][6], "converged");
    let im: f64 = roots[0][3].parse().unwrap();

    // 41-cell static super-cell oracle through the modes command
    let cfg = write_config(
        tmp.path(),
        "[geometry]\nlengths = [1.0]\ngaps = [1.0]\n[[defect.space]]\nresonator = 1\neta = 0.5\n[solver]\ncells = 41\nalpha_sc = 0.0\n",
    );
    let out = tmp.path().join("sc");
    ok(&run("modes", &cfg, &out));
    let top = rows(&out.join("modes.csv"))
        .iter()
        .map(|r| r[1].parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!((im - top).abs() < 1e-3 * top, "{im} vs {top}");
}

#[test]
fn all_zero_eta_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[geometry]\nlengths = [1.0]\ngaps = [1.0]\n[[defect.space]]\nresonator = 1\neta = 0.0\n",
    );
    let o = run("roots", &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("out").join("roots.csv").exists());
}

#[test]
fn unknown_key_fails_with_its_name() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[solver]\nalpha_count = 11\nfrobnicate = 1\n");
    let o = run("band", &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("frobnicate"));
}

#[test]
fn numerical_failure_exit_code() {
    // a time defect driving 1/kappa negative
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[solver]\ncells = 3\nsample_count = 50\n[[defect.time]]\nresonator = 1\nc = -3.0\n",
    );
    let o = run("evolve", &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("positivity"));
}

#[test]
fn outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[modulation]\neps_kappa = 0.4\neps_s = 0.2\n[solver]\nalpha_count = 15\n",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&run("band", &cfg, &a));
    let o = exe().args(["band", "--config"]).arg(&cfg).arg("--out").arg(&b).output().unwrap();
    ok(&o);
    for f in ["band.csv", "gaps.csv", "band.svg"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn every_shipped_config_parses() {
    for entry in fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let cfg = resochain_cli::config::Config::load(&p).unwrap();
            cfg.geometry().unwrap();
            cfg.contrast().unwrap();
            cfg.profile().unwrap();
            cfg.space_defect().unwrap();
            cfg.time_defect().unwrap();
            let again = resochain_cli::config::Config::parse(&cfg.to_canonical()).unwrap();
            assert_eq!(cfg, again, "{}", p.display());
        }
    }
}
