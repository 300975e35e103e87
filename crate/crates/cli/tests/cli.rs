//! End-to-end runs of the `twosite` binary.

use std::path::Path;
use std::process::{Command, Output};

use twosite_cli::csvio::{parse_timeseries, timeseries_csv, TIMESERIES_HEADER};

fn twosite(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twosite"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    for args in [&["--help"][..], &["--version"], &["mc", "--help"], &["plot", "--help"]] {
        let o = twosite(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}");
    }
    let help = String::from_utf8(twosite(&["mc", "--help"]).stdout).unwrap();
    assert!(help.contains("[default: 1000]"), "{help}");
}

#[test]
fn too_few_monomers_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = twosite(&["mc", "--n0", "1", "--n1", "0", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("need at least two monomers"));
    assert!(!out.exists());
}

#[test]
fn bad_flags_exit_one() {
    assert_eq!(twosite(&["mc", "--kappa", "abc"]).status.code(), Some(1));
    assert_eq!(twosite(&["mc", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(twosite(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(twosite(&[]).status.code(), Some(1));
}

#[test]
fn mc_writes_timeseries_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = twosite(&[
        "mc", "--n0", "1000000", "--kappa", "0.29", "--t-end", "0.2", "--seed", "7", "--snapshots", "4", "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ts = read(&out.join("timeseries.csv"));
    assert!(ts.starts_with(&format!("{TIMESERIES_HEADER}\n")));
    assert_eq!(ts.lines().count(), 1 + 2 * 4);
    assert!(!ts.contains('\r'));
    // re-serializing the parsed file gives the same bytes
    let parsed = parse_timeseries(&ts).unwrap();
    assert_eq!(timeseries_csv(&parsed).as_str(), ts);

    let manifest = read(&out.join("manifest.txt"));
    for key in [
        "version = ",
        "subcommand = mc",
        "param.n0 = 1000000",
        "param.n1 = 0",
        "param.kappa = 0.29",
        "param.seed = 7",
        "rng = ChaCha12",
        "start_unix = ",
        "end_unix = ",
        "output.timeseries.csv = sha256:",
        "output.spectrum.csv = sha256:",
        "output.gel.csv = sha256:",
    ] {
        assert!(manifest.contains(key), "missing {key:?} in\n{manifest}");
    }
}

#[test]
fn same_seed_same_bytes_and_manifest_replays() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    let args = ["mc", "--n0", "30000", "--n1", "10000", "--kappa", "0.5", "--t-end", "2", "--seed", "11"];
    for out in [&a, &b] {
        let mut v = args.to_vec();
        v.extend(["-o", out.to_str().unwrap()]);
        assert_eq!(twosite(&v).status.code(), Some(0));
    }
    let manifest = a.join("manifest.txt");
    let o = twosite(&["mc", "--config", manifest.to_str().unwrap(), "-o", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["timeseries.csv", "spectrum.csv", "gel.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(x, std::fs::read(c.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_with_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# moment run\nlambda = 1\nkappa = 0.3\n").unwrap();
    let out = dir.path().join("m");
    let o = twosite(&["moments", "--config", cfg.to_str().unwrap(), "--lambda", "0", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest = read(&out.join("manifest.txt"));
    assert!(manifest.contains("param.lambda = 0\n"));
    assert!(manifest.contains("param.kappa = 0.3\n"));
    let tg: f64 = manifest
        .lines()
        .find_map(|l| l.strip_prefix("result.t_gel_hat = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(tg > 1.0 && tg < 1.3, "{tg}");
    assert!(read(&out.join("moments.csv")).starts_with("t,x,y\n"));

    std::fs::write(&cfg, "lambda = 1\ncolour = blue\n").unwrap();
    let o = twosite(&["moments", "--config", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("colour"));
}

#[test]
fn every_subcommand_writes_its_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    let runs: [(&[&str], &[(&str, &str)]); 4] = [
        (
            &["ode", "--lambda", "0.5", "--kappa", "0.3", "--cutoff", "32", "--t-end", "0.5", "--points", "5", "--spectrum"],
            &[
                ("ode_summary.csv", "t,site,finite_mass,sigma,exact_mass,c_b0,total_mass"),
                ("ode_spectrum.csv", "t,site,mass,concentration"),
            ],
        ),
        (
            &["meanfield", "--points", "10", "--grid", "4"],
            &[
                ("meanfield.csv", "t,u,gel_fraction,sigma"),
                ("borel.csv", "t,mass,coeff"),
                ("u_grid.csv", "x,t,u"),
            ],
        ),
        (
            &["postgel", "--kappa", "0.5", "--cutoff", "32", "--t-end", "3", "--dt", "0.1"],
            &[
                ("postgel.csv", "t,site,zeta_inf,sigma,rho,finite_mass"),
                ("jumps.csv", "t,from,mass"),
            ],
        ),
        (
            &["compare", "--n0", "20000", "--n1", "10000", "--kappa", "0.3", "--cutoff", "64", "--at", "0.5"],
            &[("compare.csv", "t,site,deviation,c_b0")],
        ),
    ];
    for (k, (args, files)) in runs.iter().enumerate() {
        let out = path(&format!("r{k}"));
        let mut v = args.to_vec();
        v.extend(["-o", &out]);
        let o = twosite(&v);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        let manifest = read(&Path::new(&out).join("manifest.txt"));
        for (f, header) in *files {
            let body = read(&Path::new(&out).join(f));
            assert_eq!(body.lines().next(), Some(*header), "{f}");
            assert!(manifest.contains(&format!("output.{f} = sha256:")), "{f}");
        }
    }
}

#[test]
fn compare_refuses_post_gel_times() {
    let dir = tempfile::tempdir().unwrap();
    let o = twosite(&["compare", "--n0", "2000", "--times", "0.5,1.2", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gelation time"));
}

#[test]
fn plot_is_deterministic_and_checks_input() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = twosite(&["mc", "--n0", "20000", "--t-end", "1.5", "--snapshots", "30", "-o", run.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = run.join("timeseries.csv");
    let svg = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut v = vec!["plot", "--input", csv.to_str().unwrap(), "--output", out.to_str().unwrap()];
        v.extend_from_slice(extra);
        (twosite(&v), out)
    };
    let (o1, p1) = svg("a.svg", &["--y", "sigma_hat"]);
    let (o2, p2) = svg("b.svg", &["--y", "sigma_hat"]);
    assert_eq!(o1.status.code(), Some(0), "{}", stderr(&o1));
    assert_eq!(o2.status.code(), Some(0));
    let a = read(&p1);
    assert_eq!(a, read(&p2));
    assert!(a.starts_with("<svg"));
    assert_eq!(a.matches("<polyline").count(), 2);

    let (o, _) = svg("c.svg", &["--y", "no_such_column"]);
    assert_eq!(o.status.code(), Some(1));
    // site 1 is empty throughout, so its mass fraction is zero
    let (o, _) = svg("d.svg", &["--y", "mass_frac", "--log-y"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("log scale"));
}
