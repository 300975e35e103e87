//! Statistical checks of the particle engine against exactly known laws.

use twosite_coag::mc::{apply_event, next_event, run_mc, run_replicas, EventKind};
use twosite_coag::meanfield::borel_coeff;
use twosite_coag::stats::{ks_p_value, ks_statistic, mean_and_std_err};
use twosite_coag::{ParticleSystem, SimConfig, Site};

/// Three monomers on one site: in rescaled time the first merge happens at
/// rate 1 (three pairs, unit rate each, divided by N = 3) and the final (2, 1)
/// merge at rate 2/3. The absorption time is hypoexponential with
/// `F(t) = 1 - 3 e^{-2t/3} + 2 e^{-t}`.
#[test]
fn three_monomer_absorption_time() {
    let cfg = SimConfig::new(3, 0, 0.0, 1.0, 2024);
    let times: Vec<f64> = (0..10_000u64)
        .map(|r| {
            let mut sys = ParticleSystem::with_stream(&cfg, r).unwrap();
            while sys.particle_count() > 1 {
                let ev = next_event(&mut sys, 0.0);
                apply_event(&mut sys, &ev).unwrap();
            }
            sys.time()
        })
        .collect();
    let cdf = |t: f64| 1.0 - 3.0 * (-2.0 * t / 3.0).exp() + 2.0 * (-t).exp();
    let d = ks_statistic(&times, cdf);
    let p = ks_p_value(d, times.len());
    assert!(p > 0.01, "KS d = {d}, p = {p}");
}

#[test]
fn every_event_conserves_mass_and_counts() {
    let cfg = SimConfig::new(300, 200, 0.7, 1.0, 5);
    let mut sys = ParticleSystem::new(&cfg).unwrap();
    for _ in 0..20_000 {
        let before = sys.particle_count();
        let ev = next_event(&mut sys, cfg.kappa);
        apply_event(&mut sys, &ev).unwrap();
        let expected = match ev.kind {
            EventKind::Coalescence { .. } => before - 1,
            _ => before,
        };
        assert_eq!(sys.particle_count(), expected);
    }
    sys.audit().unwrap();
    let spectrum = sys.spectrum();
    assert_eq!(spectrum.total_mass(), 500);
    for site in Site::BOTH {
        let recomputed = spectrum.aggregates(site);
        let cached = sys.aggregates(site);
        assert_eq!(recomputed.total_mass, cached.total_mass);
        assert_eq!(recomputed.particle_count, cached.particle_count);
        assert_eq!(recomputed.sum_sq, cached.sum_sq);
        assert_eq!(recomputed.max_mass, cached.max_mass);
    }
}

#[test]
fn borel_spectrum_before_gelation() {
    let cfg = SimConfig::new(200_000, 0, 0.0, 0.6, 77).with_snapshots(vec![0.6]);
    let summary = run_replicas(&cfg, 8).unwrap();
    for m in 1..=6u64 {
        let xs: Vec<f64> = summary
            .runs
            .iter()
            .map(|r| r.final_spectrum.count(Site::Zero, m) as f64 / 200_000.0)
            .collect();
        let (mean, se) = mean_and_std_err(&xs);
        let c = borel_coeff(0.6, m);
        assert!((mean - c).abs() <= 5.0 * se.max(1e-6), "m = {m}: {mean} vs {c} (se {se})");
    }
}

#[test]
fn sites_are_exchangeable() {
    let a = SimConfig::new(3000, 1000, 0.5, 1.0, 1).with_snapshots(vec![1.0]);
    let b = SimConfig::new(1000, 3000, 0.5, 1.0, 2).with_snapshots(vec![1.0]);
    let (ra, rb) = (run_replicas(&a, 200).unwrap(), run_replicas(&b, 200).unwrap());
    let (sa, sb) = (&ra.snapshots[0], &rb.snapshots[0]);
    for (x, y) in [(Site::Zero, Site::One), (Site::One, Site::Zero)] {
        let (p, q) = (&sa.sites[x.index()], &sb.sites[y.index()]);
        for (name, u, v) in [
            ("mass_frac", p.mass_frac, q.mass_frac),
            ("sigma_hat", p.sigma_hat, q.sigma_hat),
            ("particle_count", p.particle_count, q.particle_count),
        ] {
            let z = (u.mean - v.mean).abs() / (u.std_err.powi(2) + v.std_err.powi(2)).sqrt();
            assert!(z < 5.0, "{name}: {} vs {} (z = {z})", u.mean, v.mean);
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let cfg = SimConfig::new(20_000, 5_000, 0.3, 2.0, 99).with_uniform_snapshots(8);
    let a = run_mc(&cfg).unwrap();
    let b = run_mc(&cfg).unwrap();
    assert_eq!(a.snapshots, b.snapshots);
    assert_eq!(a.final_spectrum, b.final_spectrum);
    assert_eq!(a.gel, b.gel);
    let r1 = run_replicas(&cfg, 3).unwrap();
    let r2 = run_replicas(&cfg, 3).unwrap();
    assert_eq!(r1.snapshots, r2.snapshots);
    assert_eq!(r1.delays, r2.delays);
}
