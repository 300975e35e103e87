//! Event-driven simulation of the two-site Marcus–Lushnikov process.
//!
//! Time is rescaled by `N`, so the total event rate is
//! `R = (N - 1)/2 + kappa * P` with `P` the current number of particles. An
//! event is a migration with probability `kappa P / R`; otherwise an unordered
//! pair of distinct monomers is drawn and their particles coalesce when they are
//! different particles on the same site. Drawing monomers rather than particles
//! gives a same-site pair of masses `m, n` the coalescence rate `m n`. Draws that
//! hit one particle twice or straddle the sites are kept as fictitious events.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, SimConfig};
use crate::particles::{InvariantViolation, MassSpectrum, ParticleSystem, Site, SnapshotRecord};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Coalescence {
        site: Site,
        roots: (u32, u32),
        masses: (u64, u64),
    },
    Migration {
        from: Site,
        root: u32,
        mass: u64,
    },
    Fictitious,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("event budget of {cap} exhausted at t = {t}")]
    Budget { cap: u64, t: f64 },
    #[error("internal invariant violated at t = {t}: {source}")]
    Invariant {
        t: f64,
        #[source]
        source: InvariantViolation,
    },
    #[error("replica {index} failed: {source}")]
    Replica {
        index: u64,
        #[source]
        source: Box<SimError>,
    },
}

/// Total rescaled event rate of the current state.
pub fn event_rate(sys: &ParticleSystem, kappa: f64) -> f64 {
    (sys.monomers() - 1) as f64 / 2.0 + kappa * sys.particle_count() as f64
}

/// Draw the next event from the current state without changing it.
pub fn next_event(sys: &mut ParticleSystem, kappa: f64) -> Event {
    let n = sys.monomers();
    let pair_rate = (n - 1) as f64 / 2.0;
    let migration_rate = kappa * sys.particle_count() as f64;
    let rate = pair_rate + migration_rate;
    let wait: f64 = sys.rng.sample(Exp1);
    let t = sys.time() + wait / rate;

    if migration_rate > 0.0 && sys.rng.gen::<f64>() * rate < migration_rate {
        let k = sys.rng.gen_range(0..sys.particle_count());
        let root = sys.root_at(k);
        return Event {
            t,
            kind: EventKind::Migration {
                from: sys.site_of_root(root),
                root,
                mass: sys.mass_of_root(root),
            },
        };
    }

    let n32 = n as u32;
    let a = sys.rng.gen_range(0..n32);
    let mut b = sys.rng.gen_range(0..n32 - 1);
    if b >= a {
        b += 1;
    }
    let (ra, rb) = (sys.find(a), sys.find(b));
    let site = sys.site_of_root(ra);
    let kind = if ra == rb || site != sys.site_of_root(rb) {
        EventKind::Fictitious
    } else {
        EventKind::Coalescence {
            site,
            roots: (ra, rb),
            masses: (sys.mass_of_root(ra), sys.mass_of_root(rb)),
        }
    };
    Event { t, kind }
}

/// Apply an event drawn from the current state and advance the clock to `ev.t`.
pub fn apply_event(sys: &mut ParticleSystem, ev: &Event) -> Result<(), SimError> {
    match ev.kind {
        EventKind::Coalescence { roots: (a, b), .. } => {
            sys.merge(a, b);
        }
        EventKind::Migration { root, .. } => sys.migrate(root),
        EventKind::Fictitious => {}
    }
    sys.set_time(ev.t);
    sys.check_mass().map_err(|source| SimError::Invariant { t: ev.t, source })
}

/// First threshold crossings per site.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GelReport {
    pub threshold: u64,
    /// First rescaled time at which the site's largest particle reached the threshold.
    pub gel_time: [Option<f64>; 2],
    /// `(sigma_hat_0, sigma_hat_1)` right after the crossing event of each site.
    pub sigma_at_gel: [Option<[f64; 2]>; 2],
    /// Running maximum of `sigma_hat_j` over the run.
    pub sigma_peak: [f64; 2],
}

impl GelReport {
    /// `t_gel,1 - t_gel,0`, defined only when both sites gelled.
    pub fn delay(&self) -> Option<f64> {
        match self.gel_time {
            [Some(t0), Some(t1)] => Some(t1 - t0),
            _ => None,
        }
    }
}

/// Event tallies of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EventCounts {
    pub coalescences: u64,
    pub migrations: u64,
    pub fictitious: u64,
}

impl EventCounts {
    pub fn total(&self) -> u64 {
        self.coalescences + self.migrations + self.fictitious
    }
}

/// A running simulation that can be advanced to arbitrary times.
#[derive(Debug)]
pub struct Simulation {
    sys: ParticleSystem,
    kappa: f64,
    cap: u64,
    pending: Option<Event>,
    gel: GelReport,
    counts: EventCounts,
}

impl Simulation {
    pub fn new(config: &SimConfig) -> Result<Self, SimError> {
        Self::with_stream(config, 0)
    }

    pub fn with_stream(config: &SimConfig, stream: u64) -> Result<Self, SimError> {
        let sys = ParticleSystem::with_stream(config, stream)?;
        let gel = GelReport {
            threshold: config.gel_threshold(),
            sigma_peak: [sys.sigma_hat(Site::Zero), sys.sigma_hat(Site::One)],
            ..GelReport::default()
        };
        Ok(Self {
            sys,
            kappa: config.kappa,
            cap: config.event_budget(),
            pending: None,
            gel,
            counts: EventCounts::default(),
        })
    }

    pub fn system(&self) -> &ParticleSystem {
        &self.sys
    }

    pub fn gel_report(&self) -> &GelReport {
        &self.gel
    }

    pub fn counts(&self) -> &EventCounts {
        &self.counts
    }

    pub fn snapshot(&self) -> SnapshotRecord {
        self.sys.snapshot(self.gel.threshold)
    }

    /// Apply every event with time `<= t`; the state is then the right-continuous
    /// value at `t` and the reported time is set to `t`.
    pub fn advance_to(&mut self, t: f64) -> Result<(), SimError> {
        loop {
            let ev = match self.pending.take() {
                Some(ev) => ev,
                None => {
                    if self.sys.particle_count() < 2 && self.kappa == 0.0 {
                        break;
                    }
                    next_event(&mut self.sys, self.kappa)
                }
            };
            if ev.t > t {
                self.pending = Some(ev);
                break;
            }
            if self.counts.total() >= self.cap {
                return Err(SimError::Budget {
                    cap: self.cap,
                    t: ev.t,
                });
            }
            apply_event(&mut self.sys, &ev)?;
            match ev.kind {
                EventKind::Coalescence { site, .. } => {
                    self.counts.coalescences += 1;
                    self.observe(site);
                }
                EventKind::Migration { from, .. } => {
                    self.counts.migrations += 1;
                    self.observe(from.other());
                }
                EventKind::Fictitious => self.counts.fictitious += 1,
            }
        }
        self.sys.set_time(t.max(self.sys.time()));
        Ok(())
    }

    /// Update gel bookkeeping after an event that may have grown `site`.
    fn observe(&mut self, site: Site) {
        let j = site.index();
        for s in Site::BOTH {
            let v = self.sys.sigma_hat(s);
            let peak = &mut self.gel.sigma_peak[s.index()];
            if v > *peak {
                *peak = v;
            }
        }
        if self.gel.gel_time[j].is_none()
            && self.sys.aggregates(site).max_mass >= self.gel.threshold
        {
            self.gel.gel_time[j] = Some(self.sys.time());
            self.gel.sigma_at_gel[j] = Some([
                self.sys.sigma_hat(Site::Zero),
                self.sys.sigma_hat(Site::One),
            ]);
        }
    }
}

/// Output of one Monte Carlo run.
#[derive(Debug, Clone)]
pub struct McRun {
    pub snapshots: Vec<SnapshotRecord>,
    pub gel: GelReport,
    pub final_spectrum: MassSpectrum,
    pub counts: EventCounts,
}

/// Run to `config.t_end`, recording a snapshot at every configured time.
pub fn run_mc(config: &SimConfig) -> Result<McRun, SimError> {
    run_mc_stream(config, 0)
}

/// [`run_mc`] on RNG stream `stream` of the seed's key.
pub fn run_mc_stream(config: &SimConfig, stream: u64) -> Result<McRun, SimError> {
    let mut sim = Simulation::with_stream(config, stream)?;
    let mut snapshots = Vec::with_capacity(config.snapshot_times.len());
    for &t in &config.snapshot_times {
        sim.advance_to(t)?;
        snapshots.push(sim.snapshot());
    }
    sim.advance_to(config.t_end)?;
    if cfg!(debug_assertions) {
        let t = sim.sys.time();
        sim.sys
            .audit()
            .map_err(|source| SimError::Invariant { t, source })?;
    }
    Ok(McRun {
        snapshots,
        gel: sim.gel,
        final_spectrum: sim.sys.spectrum(),
        counts: sim.counts,
    })
}

/// Mean and standard error of one scalar observable across replicas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteStats {
    pub particle_count: Estimate,
    pub mass_frac: Estimate,
    pub sigma_hat: Estimate,
    pub rho_hat: Estimate,
    pub max_mass: Estimate,
    /// Fraction of replicas flagged as gelled.
    pub gelled: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotStats {
    pub t: f64,
    pub sites: [SiteStats; 2],
}

/// Aggregated output of independent replicas.
#[derive(Debug, Clone)]
pub struct ReplicaSummary {
    pub runs: Vec<McRun>,
    pub snapshots: Vec<SnapshotStats>,
    /// Gel delay of every replica in which both sites gelled, in replica order.
    pub delays: Vec<f64>,
}

/// Run `n_replicas` independent copies; replica `r` uses stream `r` of the
/// key derived from `config.seed`, so replica 0 is exactly [`run_mc`].
pub fn run_replicas(config: &SimConfig, n_replicas: u64) -> Result<ReplicaSummary, SimError> {
    config.validate()?;
    let runs = (0..n_replicas.max(1))
        .into_par_iter()
        .map(|r| {
            run_mc_stream(config, r).map_err(|e| SimError::Replica {
                index: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(runs))
}

fn summarize(runs: Vec<McRun>) -> ReplicaSummary {
    let n_snap = runs.first().map_or(0, |r| r.snapshots.len());
    let snapshots = (0..n_snap)
        .map(|k| {
            let t = runs[0].snapshots[k].t;
            let sites = Site::BOTH.map(|s| {
                let field = |f: &dyn Fn(&crate::particles::SiteSnapshot) -> f64| {
                    let xs: Vec<f64> = runs.iter().map(|r| f(r.snapshots[k].site(s))).collect();
                    let (mean, std_err) = stats::mean_and_std_err(&xs);
                    Estimate { mean, std_err }
                };
                SiteStats {
                    particle_count: field(&|x| x.particle_count as f64),
                    mass_frac: field(&|x| x.mass_frac),
                    sigma_hat: field(&|x| x.sigma_hat),
                    rho_hat: field(&|x| x.rho_hat),
                    max_mass: field(&|x| x.max_mass as f64),
                    gelled: runs
                        .iter()
                        .filter(|r| r.snapshots[k].site(s).gelled)
                        .count() as f64
                        / runs.len() as f64,
                }
            });
            SnapshotStats { t, sites }
        })
        .collect();
    let delays = runs.iter().filter_map(|r| r.gel.delay()).collect();
    ReplicaSummary {
        runs,
        snapshots,
        delays,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_monomers_always_coalesce() {
        let cfg = SimConfig::new(2, 0, 0.0, 1.0, 3);
        let mut sys = ParticleSystem::new(&cfg).unwrap();
        for _ in 0..100 {
            let ev = next_event(&mut sys, 0.0);
            assert!(matches!(
                ev.kind,
                EventKind::Coalescence {
                    site: Site::Zero,
                    masses: (1, 1),
                    ..
                }
            ));
        }
    }

    #[test]
    fn cross_site_state_is_all_fictitious() {
        // mass 2 at site 0, mass 1 at site 1
        let cfg = SimConfig::new(2, 1, 0.0, 1.0, 5);
        let mut sys = ParticleSystem::new(&cfg).unwrap();
        let (a, b) = (sys.find(0), sys.find(1));
        sys.merge(a, b);
        for _ in 0..1000 {
            assert_eq!(next_event(&mut sys, 0.0).kind, EventKind::Fictitious);
        }
    }

    #[test]
    fn no_migration_without_kappa() {
        let cfg = SimConfig::new(50, 50, 0.0, 1.0, 9);
        let mut sys = ParticleSystem::new(&cfg).unwrap();
        for _ in 0..2000 {
            let ev = next_event(&mut sys, 0.0);
            assert!(!matches!(ev.kind, EventKind::Migration { .. }));
            apply_event(&mut sys, &ev).unwrap();
        }
        sys.audit().unwrap();
    }

    #[test]
    fn fictitious_only_moves_time() {
        let cfg = SimConfig::new(2, 1, 0.0, 1.0, 5);
        let mut sys = ParticleSystem::new(&cfg).unwrap();
        let before = sys.spectrum();
        apply_event(
            &mut sys,
            &Event {
                t: 0.25,
                kind: EventKind::Fictitious,
            },
        )
        .unwrap();
        assert_eq!(sys.spectrum(), before);
        assert_eq!(sys.time(), 0.25);
    }

    #[test]
    fn migration_event_moves_mass() {
        let cfg = SimConfig::new(3, 0, 1.0, 1.0, 5);
        let mut sys = ParticleSystem::new(&cfg).unwrap();
        let r = sys.find(0);
        let r1 = sys.find(1);
        let r = sys.merge(r, r1);
        let r2 = sys.find(2);
        let r = sys.merge(r, r2);
        let ev = Event {
            t: 0.1,
            kind: EventKind::Migration {
                from: Site::Zero,
                root: r,
                mass: 3,
            },
        };
        apply_event(&mut sys, &ev).unwrap();
        assert_eq!(sys.aggregates(Site::One).sum_sq, 9);
        assert_eq!(sys.aggregates(Site::Zero).total_mass, 0);
    }

    #[test]
    fn budget_cap_is_enforced() {
        let mut cfg = SimConfig::new(1000, 0, 0.0, 1.0, 1);
        cfg.event_cap = Some(10);
        assert!(matches!(run_mc(&cfg), Err(SimError::Budget { cap: 10, .. })));
    }

    #[test]
    fn snapshots_conserve_mass_and_flags_latch() {
        let cfg = SimConfig::new(10_000, 10_000, 0.3, 3.0, 11).with_uniform_snapshots(30);
        let run = run_mc(&cfg).unwrap();
        let mut gelled = [false; 2];
        for snap in &run.snapshots {
            let total: f64 = snap.sites.iter().map(|s| s.mass_frac).sum();
            assert!((total - 1.0).abs() < 1e-12);
            for s in Site::BOTH {
                let g = snap.site(s).gelled;
                assert!(g || !gelled[s.index()]);
                gelled[s.index()] = g;
                assert!(snap.site(s).sigma_hat >= snap.site(s).mass_frac);
            }
        }
        assert_eq!(run.final_spectrum.total_mass(), 20_000);
    }

    #[test]
    fn single_replica_matches_run_mc() {
        let cfg = SimConfig::new(2000, 500, 0.5, 1.5, 42).with_uniform_snapshots(3);
        let a = run_mc(&cfg).unwrap();
        let b = run_replicas(&cfg, 1).unwrap();
        assert_eq!(a.snapshots, b.runs[0].snapshots);
        assert_eq!(a.final_spectrum, b.runs[0].final_spectrum);
        assert_eq!(b.snapshots[0].sites[0].mass_frac.mean, a.snapshots[0].sites[0].mass_frac);
    }
}
