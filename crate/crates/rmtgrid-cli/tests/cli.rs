use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::Rng;
use rand_distr::StandardNormal;
use rmtgrid::ensembles::rng_for;
use rmtgrid::gridsim::{ieee118_default_script, simulate};
use rmtgrid::laws::{convergence_gap, esd_from_spectrum, mp_density, LawSpec};
use rmtgrid::linalg::{eig_hermitian, DataMatrix};
use rmtgrid::ensembles::{sample, EnsembleSpec};
use rmtgrid_cli::commands::ustat;
use rmtgrid_cli::config::RunConfig;
use rmtgrid_cli::stream::{read_stream, sidecar_path, write_stream, StreamFile};
use rmtgrid_cli::Outcome;
use tempfile::TempDir;

fn rmtgrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmtgrid")).args(args).env_remove("RMTGRID_SEED").output().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn gaussian_stream(p: usize, len: usize, scale_from: Option<(usize, f64)>, seed: u64) -> StreamFile {
    let mut rng = rng_for(seed, 3);
    let data = DataMatrix::from_fn_real(p, len, |_, _| rng.sample::<f64, _>(StandardNormal)).unwrap();
    let data = match scale_from {
        None => data,
        Some((start, s)) => DataMatrix::from_fn_real(p, len, |i, k| {
            let v = data.get(i, k).re;
            if k >= start {
                v * s
            } else {
                v
            }
        })
        .unwrap(),
    };
    StreamFile::numbered("s", (0..len).map(|k| k as f64 / 50.0).collect(), data).unwrap()
}

#[test]
fn simulate_is_deterministic_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let o = rmtgrid(&["simulate", "--preset", "ieee118", "--seed", "7", "--output", path_str(p)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 119);
    assert_eq!(lines.count(), 2500);
    assert!(sidecar_path(&a).exists());

    let back = read_stream(&a).unwrap();
    let sim = simulate(&ieee118_default_script(), 7).unwrap();
    assert_eq!(back.times, sim.times);
    assert_eq!(back.data, sim.voltages);
}

#[test]
fn env_seed_matches_flag() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    rmtgrid(&["simulate", "--seed", "3", "--output", path_str(&a)]);
    let o = Command::new(env!("CARGO_BIN_EXE_rmtgrid"))
        .args(["simulate", "--output", path_str(&b)])
        .env("RMTGRID_SEED", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    rmtgrid(&["simulate", "--seed", "4", "--output", path_str(&c)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn lawcheck_flags_the_step_at_its_first_window() {
    let dir = TempDir::new().unwrap();
    let full = simulate(&ieee118_default_script(), 7).unwrap();
    // samples t = 661..1300: the first window ends at 900, the step to 120 MW is at 901
    let (lo, hi) = (660, 1300);
    let s = StreamFile::numbered("bus", full.times[lo..hi].to_vec(), full.voltages.column_range(lo, hi).unwrap()).unwrap();
    let input = dir.path().join("s.csv");
    write_stream(&input, &s).unwrap();
    let report = dir.path().join("r.json");
    let o = rmtgrid(&["lawcheck", "--input", path_str(&input), "--output", path_str(&report), "--seed", "7"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["first_flag_t_end"].as_f64(), Some(901.0));
    assert_eq!(r["longest_flagged_run"].as_u64(), Some(239));
    let curves = fs::read_to_string(report.with_extension("windows.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 401);
    assert!(curves.lines().next().unwrap().starts_with("t_end,anomaly,"));
    assert!(report.with_extension("esd.csv").exists());
}

#[test]
fn lawcheck_noise_only_is_clean() {
    let dir = TempDir::new().unwrap();
    let mut script = ieee118_default_script();
    script.stages.clear();
    let sim = simulate(&script, 11).unwrap();
    let s = StreamFile::numbered("bus", sim.times[..1000].to_vec(), sim.voltages.column_range(0, 1000).unwrap()).unwrap();
    let input = dir.path().join("n.csv");
    write_stream(&input, &s).unwrap();
    let report = dir.path().join("n.json");
    let o = rmtgrid(&["lawcheck", "--input", path_str(&input), "--output", path_str(&report), "--indicator", "msr,moment-2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r["flagged_fraction"].as_f64().unwrap() <= 0.01, "{r}");
    let curves = fs::read_to_string(report.with_extension("windows.csv")).unwrap();
    assert!(curves.lines().next().unwrap().ends_with(",moment-2"));
}

#[test]
fn malformed_inputs_are_errors() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("e.csv");
    fs::write(&empty, "").unwrap();
    let out = dir.path().join("r.json");
    let o = rmtgrid(&["lawcheck", "--input", path_str(&empty), "--output", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
    assert!(!out.exists());

    let bad = dir.path().join("b.csv");
    fs::write(&bad, "t,a,b\n0,1,2\n1,x,3\n").unwrap();
    let o = rmtgrid(&["ustat", "--input", path_str(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let o = rmtgrid(&["simulate", "--output", path_str(&dir.path().join("missing/dir/x.csv"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ustat_exit_codes() {
    let dir = TempDir::new().unwrap();
    let null = dir.path().join("null.csv");
    write_stream(&null, &gaussian_stream(34, 250, None, 1)).unwrap();
    let o = rmtgrid(&["ustat", "--input", path_str(&null), "--q", "5", "--ng", "50", "--alpha", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["decision"], "H0");

    // third window onward has covariance 2I
    let shifted = dir.path().join("h1.csv");
    write_stream(&shifted, &gaussian_stream(34, 250, Some((100, 2f64.sqrt())), 2)).unwrap();
    let out = dir.path().join("h1.json");
    let o = rmtgrid(&["ustat", "--input", path_str(&shifted), "--output", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(out.exists());

    let o = rmtgrid(&["ustat", "--input", path_str(&null), "--q", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = rmtgrid(&["ustat", "--input", path_str(&null), "--q", "6"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("insufficient samples"));
}

#[test]
fn ustat_null_keeps_h0_in_most_seeds() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("s.csv");
    let cfg = RunConfig::default();
    let seeds = 100;
    let mut clean = 0;
    for s in 0..seeds {
        write_stream(&path, &gaussian_stream(34, 250, None, 100 + s)).unwrap();
        let out = dir.path().join("r.json");
        clean += (ustat(&path, &cfg, Some(&out)).unwrap().1 == Outcome::Clean) as usize;
    }
    assert!(clean >= 92, "{clean}/{seeds}");
}

#[test]
fn freeprob_anticommutator_matches_monte_carlo() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fp.csv");
    let o = rmtgrid(&[
        "freeprob", "--polynomial", "anticommutator", "--laws", "semicircle", "--n", "400", "--reps", "4", "--output",
        path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let ks: f64 = stdout(&o).trim().strip_prefix("KS ").unwrap().parse().unwrap();
    assert!(ks < 0.05, "{ks}");
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,density_algorithm,density_mc"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 400);
    // the grid pads the Monte-Carlo support by one unit on each side
    assert_eq!(rows[0][2], 0.0);
    assert_eq!(rows[399][2], 0.0);
}

#[test]
fn freeprob_rejects_unknown_polynomial() {
    let dir = TempDir::new().unwrap();
    let o = rmtgrid(&["freeprob", "--polynomial", "cubic", "--output", path_str(&dir.path().join("x.csv"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid value"));
}

#[test]
fn spectrum_gap_delegates_to_the_library() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("gue.csv");
    let o = rmtgrid(&["spectrum", "--ensemble", "gue", "--n", "300", "--seed", "5", "--output", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let printed: f64 = stdout(&o).trim().strip_prefix("sup_gap ").unwrap().parse().unwrap();
    let h = sample(&EnsembleSpec::gue(300, 5)).unwrap().scaled(1.0 / 300f64.sqrt());
    let esd = esd_from_spectrum(&eig_hermitian(&h).unwrap(), 50).unwrap();
    assert_eq!(printed, convergence_gap(&esd, &LawSpec::semicircle(1.0).unwrap()));
    assert!(printed < 0.05);
    assert!(fs::read_to_string(&out).unwrap().starts_with("x,esd_density,law_density,esd_cdf,law_cdf\n"));
}

#[test]
fn spectrum_lue_overlays_marchenko_pastur() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("lue.csv");
    let o = rmtgrid(&["spectrum", "--ensemble", "lue", "--n", "200", "--t", "400", "--output", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[2] - mp_density(v[0], 0.5)).abs() < 1e-12);
    }
}
