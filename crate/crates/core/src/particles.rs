//! Monomer-level particle state of the two-site coalescent.
//!
//! Every monomer carries an id in `0..N`; particles are the classes of a
//! disjoint-set forest over those ids. Roots hold the particle's mass and site
//! and sit in a dense index so that a uniformly random particle can be drawn in
//! O(1). Per-site moment sums are maintained incrementally.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::config::{ConfigError, SimConfig};

/// Identifier of the generator family used for every Monte Carlo stream.
pub const RNG_ID: &str = "ChaCha12 (rand_chacha 0.3), key = seed_from_u64(seed), stream = replica index";

/// One of the two spatial sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    Zero = 0,
    One = 1,
}

impl Site {
    pub const BOTH: [Site; 2] = [Site::Zero, Site::One];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn other(self) -> Site {
        match self {
            Site::Zero => Site::One,
            Site::One => Site::Zero,
        }
    }

    #[inline]
    fn from_u8(v: u8) -> Site {
        if v == 0 {
            Site::Zero
        } else {
            Site::One
        }
    }
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Incrementally maintained per-site sums.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SiteAggregates {
    pub total_mass: u64,
    pub particle_count: u64,
    /// Sum of squared particle masses.
    pub sum_sq: u128,
    /// Sum of cubed particle masses.
    pub sum_cube: u128,
    pub max_mass: u64,
    /// Largest `max_mass` ever observed at this site.
    pub peak_max_mass: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvariantViolation {
    #[error("mass not conserved: S0 + S1 = {actual}, expected {expected}")]
    Mass { expected: u64, actual: u64 },
    #[error("site {site} aggregate `{field}` is {cached}, recomputed {actual}")]
    Aggregate {
        site: usize,
        field: &'static str,
        cached: u128,
        actual: u128,
    },
    #[error("root index inconsistent: {0}")]
    RootIndex(String),
}

/// Live Monte Carlo state.
#[derive(Debug, Clone)]
pub struct ParticleSystem {
    n: u32,
    parent: Vec<u32>,
    /// Particle mass, valid at roots only.
    mass: Vec<u32>,
    /// Particle site, valid at roots only.
    site: Vec<u8>,
    /// Position of a root inside `roots`, valid at roots only.
    slot: Vec<u32>,
    roots: Vec<u32>,
    agg: [SiteAggregates; 2],
    /// Per-site histogram of particle masses, indexed by mass; used for `max_mass`.
    hist: [Vec<u32>; 2],
    t: f64,
    pub(crate) rng: ChaCha12Rng,
}

impl ParticleSystem {
    /// Monodisperse start: monomers `0..n0` at site 0, the rest at site 1.
    pub fn new(config: &SimConfig) -> Result<Self, ConfigError> {
        Self::with_stream(config, 0)
    }

    /// Same as [`ParticleSystem::new`] but drawing from RNG stream `stream`
    /// of the key derived from `config.seed`.
    pub fn with_stream(config: &SimConfig, stream: u64) -> Result<Self, ConfigError> {
        config.validate()?;
        let n = config.total() as u32;
        let n0 = config.n0 as u32;
        let mut hist = [vec![0u32; n as usize + 1], vec![0u32; n as usize + 1]];
        hist[0][1] = n0;
        hist[1][1] = n - n0;
        let site_agg = |count: u64| SiteAggregates {
            total_mass: count,
            particle_count: count,
            sum_sq: count as u128,
            sum_cube: count as u128,
            max_mass: count.min(1),
            peak_max_mass: count.min(1),
        };
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        rng.set_stream(stream);
        Ok(Self {
            n,
            parent: (0..n).collect(),
            mass: vec![1; n as usize],
            site: (0..n).map(|i| u8::from(i >= n0)).collect(),
            slot: (0..n).collect(),
            roots: (0..n).collect(),
            agg: [site_agg(config.n0), site_agg(config.n1)],
            hist,
            t: 0.0,
            rng,
        })
    }

    pub fn monomers(&self) -> u64 {
        self.n as u64
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub(crate) fn set_time(&mut self, t: f64) {
        self.t = t;
    }

    pub fn aggregates(&self, site: Site) -> &SiteAggregates {
        &self.agg[site.index()]
    }

    /// Number of particles on both sites.
    pub fn particle_count(&self) -> usize {
        self.roots.len()
    }

    /// Root id of the particle stored at dense index `k`.
    #[inline]
    pub(crate) fn root_at(&self, k: usize) -> u32 {
        self.roots[k]
    }

    #[inline]
    pub fn mass_of_root(&self, root: u32) -> u64 {
        self.mass[root as usize] as u64
    }

    #[inline]
    pub fn site_of_root(&self, root: u32) -> Site {
        Site::from_u8(self.site[root as usize])
    }

    /// Root of the particle containing monomer `x` (path halving).
    #[inline]
    pub fn find(&mut self, mut x: u32) -> u32 {
        loop {
            let p = self.parent[x as usize];
            if p == x {
                return x;
            }
            let gp = self.parent[p as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
    }

    /// Merge two distinct roots at the same site. Returns the surviving root.
    pub(crate) fn merge(&mut self, a: u32, b: u32) -> u32 {
        debug_assert_ne!(a, b);
        let site = self.site[a as usize];
        debug_assert_eq!(site, self.site[b as usize]);
        let (ma, mb) = (self.mass[a as usize], self.mass[b as usize]);
        // union by size, ties go to the smaller id
        let (keep, gone) = if ma > mb || (ma == mb && a < b) {
            (a, b)
        } else {
            (b, a)
        };
        let merged = ma + mb;
        self.parent[gone as usize] = keep;
        self.mass[keep as usize] = merged;
        self.retire_root(gone);

        let j = site as usize;
        let (m, n, s) = (ma as u128, mb as u128, merged as u128);
        let hist = &mut self.hist[j];
        hist[ma as usize] -= 1;
        hist[mb as usize] -= 1;
        hist[merged as usize] += 1;
        let agg = &mut self.agg[j];
        agg.particle_count -= 1;
        agg.sum_sq += 2 * m * n;
        agg.sum_cube += 3 * m * n * s;
        agg.max_mass = agg.max_mass.max(merged as u64);
        agg.peak_max_mass = agg.peak_max_mass.max(agg.max_mass);
        keep
    }

    /// Move the particle rooted at `root` to the opposite site.
    pub(crate) fn migrate(&mut self, root: u32) {
        let from = self.site[root as usize] as usize;
        let to = 1 - from;
        self.site[root as usize] = to as u8;
        let m = self.mass[root as usize];
        let (m64, m128) = (m as u64, m as u128);

        self.hist[from][m as usize] -= 1;
        self.hist[to][m as usize] += 1;

        let src = &mut self.agg[from];
        src.total_mass -= m64;
        src.particle_count -= 1;
        src.sum_sq -= m128 * m128;
        src.sum_cube -= m128 * m128 * m128;
        if src.max_mass == m64 && self.hist[from][m as usize] == 0 {
            let hist = &self.hist[from];
            let mut k = m as usize;
            while k > 0 && hist[k] == 0 {
                k -= 1;
            }
            self.agg[from].max_mass = k as u64;
        }

        let dst = &mut self.agg[to];
        dst.total_mass += m64;
        dst.particle_count += 1;
        dst.sum_sq += m128 * m128;
        dst.sum_cube += m128 * m128 * m128;
        dst.max_mass = dst.max_mass.max(m64);
        dst.peak_max_mass = dst.peak_max_mass.max(dst.max_mass);
    }

    fn retire_root(&mut self, root: u32) {
        let k = self.slot[root as usize] as usize;
        self.roots.swap_remove(k);
        if let Some(&moved) = self.roots.get(k) {
            self.slot[moved as usize] = k as u32;
        }
    }

    /// O(1) check that total mass equals N.
    pub fn check_mass(&self) -> Result<(), InvariantViolation> {
        let actual = self.agg[0].total_mass + self.agg[1].total_mass;
        if actual != self.n as u64 {
            return Err(InvariantViolation::Mass {
                expected: self.n as u64,
                actual,
            });
        }
        Ok(())
    }

    /// Full O(N) recomputation of every cached aggregate.
    pub fn audit(&self) -> Result<(), InvariantViolation> {
        self.check_mass()?;
        let mut fresh = [SiteAggregates::default(); 2];
        for (k, &r) in self.roots.iter().enumerate() {
            if self.parent[r as usize] != r {
                return Err(InvariantViolation::RootIndex(format!("{r} is not a root")));
            }
            if self.slot[r as usize] as usize != k {
                return Err(InvariantViolation::RootIndex(format!(
                    "slot of {r} is {}, expected {k}",
                    self.slot[r as usize]
                )));
            }
            let m = self.mass[r as usize] as u128;
            let a = &mut fresh[self.site[r as usize] as usize];
            a.total_mass += m as u64;
            a.particle_count += 1;
            a.sum_sq += m * m;
            a.sum_cube += m * m * m;
            a.max_mass = a.max_mass.max(m as u64);
        }
        let root_total: u64 = (0..self.n).filter(|&i| self.parent[i as usize] == i).count() as u64;
        if root_total != self.roots.len() as u64 {
            return Err(InvariantViolation::RootIndex(format!(
                "{root_total} roots in forest, {} indexed",
                self.roots.len()
            )));
        }
        for j in 0..2 {
            let (c, f) = (&self.agg[j], &fresh[j]);
            let fields: [(&'static str, u128, u128); 5] = [
                ("total_mass", c.total_mass as u128, f.total_mass as u128),
                ("particle_count", c.particle_count as u128, f.particle_count as u128),
                ("sum_sq", c.sum_sq, f.sum_sq),
                ("sum_cube", c.sum_cube, f.sum_cube),
                ("max_mass", c.max_mass as u128, f.max_mass as u128),
            ];
            for (field, cached, actual) in fields {
                if cached != actual {
                    return Err(InvariantViolation::Aggregate {
                        site: j,
                        field,
                        cached,
                        actual,
                    });
                }
            }
        }
        Ok(())
    }

    /// Exact per-site histogram of particle masses, built from the root index.
    pub fn spectrum(&self) -> MassSpectrum {
        let mut per_site: [Vec<u64>; 2] = [Vec::new(), Vec::new()];
        for &r in &self.roots {
            per_site[self.site[r as usize] as usize].push(self.mass[r as usize] as u64);
        }
        let sites = per_site.map(|mut masses| {
            masses.sort_unstable();
            let mut out: Vec<(u64, u64)> = Vec::new();
            for m in masses {
                match out.last_mut() {
                    Some((last, count)) if *last == m => *count += 1,
                    _ => out.push((m, 1)),
                }
            }
            out
        });
        MassSpectrum {
            monomers: self.n as u64,
            sites,
        }
    }

    /// Observables at the current time. `gel_threshold` is compared against the
    /// historical per-site maximum so the flag never reverts within a run.
    pub fn snapshot(&self, gel_threshold: u64) -> SnapshotRecord {
        let n = self.n as f64;
        let sites = Site::BOTH.map(|s| {
            let a = &self.agg[s.index()];
            SiteSnapshot {
                particle_count: a.particle_count,
                mass_frac: a.total_mass as f64 / n,
                sigma_hat: a.sum_sq as f64 / n,
                rho_hat: a.sum_cube as f64 / n,
                max_mass: a.max_mass,
                gelled: a.peak_max_mass >= gel_threshold,
            }
        });
        SnapshotRecord { t: self.t, sites }
    }

    /// Empirical second moment `M2_j / N`.
    #[inline]
    pub fn sigma_hat(&self, site: Site) -> f64 {
        self.agg[site.index()].sum_sq as f64 / self.n as f64
    }
}

/// Per-site `mass -> count` table, sorted by mass, nonzero counts only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MassSpectrum {
    pub monomers: u64,
    pub sites: [Vec<(u64, u64)>; 2],
}

impl MassSpectrum {
    pub fn site(&self, site: Site) -> &[(u64, u64)] {
        &self.sites[site.index()]
    }

    /// Number of particles of mass `m` at `site`.
    pub fn count(&self, site: Site, m: u64) -> u64 {
        let s = self.site(site);
        s.binary_search_by_key(&m, |&(mass, _)| mass)
            .map(|k| s[k].1)
            .unwrap_or(0)
    }

    pub fn total_mass(&self) -> u64 {
        self.sites
            .iter()
            .flat_map(|s| s.iter())
            .map(|&(m, c)| m * c)
            .sum()
    }

    /// Aggregates recomputed from the histogram (peak fields mirror `max_mass`).
    pub fn aggregates(&self, site: Site) -> SiteAggregates {
        let mut a = SiteAggregates::default();
        for &(m, c) in self.site(site) {
            let (m, c) = (m as u128, c as u128);
            a.total_mass += (m * c) as u64;
            a.particle_count += c as u64;
            a.sum_sq += m * m * c;
            a.sum_cube += m * m * m * c;
            a.max_mass = a.max_mass.max(m as u64);
        }
        a.peak_max_mass = a.max_mass;
        a
    }
}

/// Observables of one site at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteSnapshot {
    pub particle_count: u64,
    /// Total mass at the site divided by N.
    pub mass_frac: f64,
    /// `sum m^2 / N`.
    pub sigma_hat: f64,
    /// `sum m^3 / N`.
    pub rho_hat: f64,
    pub max_mass: u64,
    pub gelled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotRecord {
    pub t: f64,
    pub sites: [SiteSnapshot; 2],
}

impl SnapshotRecord {
    pub fn site(&self, site: Site) -> &SiteSnapshot {
        &self.sites[site.index()]
    }
}
