//! One function per run subcommand. Each writes its CSV files through
//! [`Outputs`] and returns what goes into the manifest besides the files.

use twosite_coag::compare::{compare, gel_time, CompareError};
use twosite_coag::mc::{run_mc, run_replicas, GelReport, McRun, SimError};
use twosite_coag::meanfield::{borel_coeff, gel_fraction, sigma_meanfield, solve_u};
use twosite_coag::moments::{solve_moments_from, Extrapolation, MomentPair};
use twosite_coag::postgel::{simulate_limit, LimitConfig};
use twosite_coag::truncated::{integrate_truncated, zeta_star_exact, TruncatedState};
use twosite_coag::{MassSpectrum, SimConfig, Site};

use crate::args::{
    CompareArgs, ExtrapolationArg, McArgs, MeanfieldArgs, MomentsArgs, OdeArgs, PostgelArgs,
};
use crate::csvio::{fmt_num, timeseries_csv, Csv};
use crate::manifest::Outputs;
use crate::CliError;

/// Manifest entries produced by a run.
#[derive(Debug, Default)]
pub struct Report {
    pub seeds: String,
    pub results: Vec<(String, String)>,
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::Config(c) => CliError::Usage(c.to_string()),
        e => CliError::Runtime(e.to_string()),
    }
}

fn grid(t_end: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
}

fn lambda_fractions(lambda: f64) -> Result<(f64, f64), CliError> {
    if !(lambda >= 0.0) {
        return Err(CliError::Usage(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(if lambda.is_infinite() {
        (0.0, 1.0)
    } else {
        (1.0 / (1.0 + lambda), lambda / (1.0 + lambda))
    })
}

impl McArgs {
    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        let mut cfg = SimConfig::new(self.n0, self.n1, self.kappa, self.t_end, self.seed);
        cfg = if self.times.is_empty() {
            cfg.with_uniform_snapshots(self.snapshots)
        } else {
            cfg.with_snapshots(self.times.clone())
        };
        cfg.gel_threshold_factor = self.threshold_factor;
        cfg.event_cap = self.event_cap;
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if self.replicas == 0 {
            return Err(CliError::Usage("replicas must be >= 1".into()));
        }
        Ok(cfg)
    }
}

pub fn spectrum_csv(spectrum: &MassSpectrum) -> Csv {
    let mut csv = Csv::new("site,mass,count");
    for site in Site::BOTH {
        for &(m, c) in spectrum.site(site) {
            csv.row([site.into(), m.into(), c.into()]);
        }
    }
    csv
}

fn gel_rows(csv: &mut Csv, replica: u64, gel: &GelReport) {
    for site in Site::BOTH {
        let j = site.index();
        let at = gel.sigma_at_gel[j];
        csv.row([
            replica.into(),
            site.into(),
            gel.gel_time[j].into(),
            at.map(|s| s[0]).into(),
            at.map(|s| s[1]).into(),
            gel.sigma_peak[j].into(),
        ]);
    }
}

const GEL_HEADER: &str = "replica,site,gel_time,sigma0_at_gel,sigma1_at_gel,sigma_peak";

pub fn mc(args: &McArgs, out: &mut Outputs) -> Result<Report, CliError> {
    let cfg = args.sim_config()?;
    let mut gel = Csv::new(GEL_HEADER);
    let mut report = Report::default();
    let mut results = Vec::new();
    let describe = |run: &McRun| run.gel.delay().map_or("none".to_string(), fmt_num);
    if args.replicas == 1 {
        let run = run_mc(&cfg).map_err(sim_error)?;
        out.write("timeseries.csv", &timeseries_csv(&run.snapshots).into_bytes())?;
        out.write("spectrum.csv", &spectrum_csv(&run.final_spectrum).into_bytes())?;
        gel_rows(&mut gel, 0, &run.gel);
        results.push(("gel_delay".to_string(), describe(&run)));
        results.push(("events".to_string(), run.counts.total().to_string()));
        report.seeds = cfg.seed.to_string();
    } else {
        let summary = run_replicas(&cfg, args.replicas).map_err(sim_error)?;
        for (r, run) in summary.runs.iter().enumerate() {
            out.write(&format!("timeseries_r{r:03}.csv"), &timeseries_csv(&run.snapshots).into_bytes())?;
            out.write(&format!("spectrum_r{r:03}.csv"), &spectrum_csv(&run.final_spectrum).into_bytes())?;
            gel_rows(&mut gel, r as u64, &run.gel);
        }
        let mut csv = Csv::new(
            "t,site,particle_count,particle_count_se,mass_frac,mass_frac_se,sigma_hat,sigma_hat_se,rho_hat,rho_hat_se,max_mass,max_mass_se,gelled_frac",
        );
        for snap in &summary.snapshots {
            for site in Site::BOTH {
                let s = &snap.sites[site.index()];
                csv.row([
                    snap.t.into(),
                    site.into(),
                    s.particle_count.mean.into(),
                    s.particle_count.std_err.into(),
                    s.mass_frac.mean.into(),
                    s.mass_frac.std_err.into(),
                    s.sigma_hat.mean.into(),
                    s.sigma_hat.std_err.into(),
                    s.rho_hat.mean.into(),
                    s.rho_hat.std_err.into(),
                    s.max_mass.mean.into(),
                    s.max_mass.std_err.into(),
                    s.gelled.into(),
                ]);
            }
        }
        out.write("summary.csv", &csv.into_bytes())?;
        results.push(("replicas_with_delay".to_string(), summary.delays.len().to_string()));
        report.seeds = format!("{} (streams 0..{})", cfg.seed, args.replicas);
    }
    out.write("gel.csv", &gel.into_bytes())?;
    results.push(("gel_threshold".to_string(), cfg.gel_threshold().to_string()));
    report.results = results;
    Ok(report)
}

pub fn ode(args: &OdeArgs, out: &mut Outputs) -> Result<Report, CliError> {
    if args.cutoff < 2 {
        return Err(CliError::Usage(format!("cutoff must be >= 2, got {}", args.cutoff)));
    }
    if !(args.kappa >= 0.0 && args.kappa.is_finite() && args.t_end >= 0.0 && args.t_end.is_finite()) {
        return Err(CliError::Usage("kappa and t_end must be finite and >= 0".into()));
    }
    let (f0, f1) = lambda_fractions(args.lambda)?;
    let times = if args.times.is_empty() {
        grid(args.t_end, args.points)
    } else {
        args.times.clone()
    };
    let init = TruncatedState::from_fractions(args.cutoff, f0, f1);
    let states = integrate_truncated(&init, args.kappa, &times, args.rtol, args.atol).map_err(|e| match e {
        twosite_coag::truncated::TruncatedError::Integration(e) => CliError::Runtime(e.to_string()),
        e => CliError::Usage(e.to_string()),
    })?;

    let mut summary = Csv::new("t,site,finite_mass,sigma,exact_mass,c_b0,total_mass");
    let mut drift: f64 = 0.0;
    for s in &states {
        let (m0, m1) = s.per_site_mass();
        let (s0, s1) = s.sigma();
        drift = drift.max((s.total_mass() - (f0 + f1)).abs());
        for (site, m, sig) in [(Site::Zero, m0, s0), (Site::One, m1, s1)] {
            summary.row([
                s.t.into(),
                site.into(),
                m.into(),
                sig.into(),
                zeta_star_exact(s.t, args.lambda, args.kappa, site).into(),
                s.c_b0.into(),
                s.total_mass().into(),
            ]);
        }
    }
    out.write("ode_summary.csv", &summary.into_bytes())?;
    if args.spectrum {
        let mut spec = Csv::new("t,site,mass,concentration");
        for s in &states {
            for site in Site::BOTH {
                for i in 1..args.cutoff {
                    spec.row([s.t.into(), site.into(), i.into(), s.concentration(site, i).into()]);
                }
            }
        }
        out.write("ode_spectrum.csv", &spec.into_bytes())?;
    }
    Ok(Report {
        seeds: "none".into(),
        results: vec![("max_mass_drift".into(), fmt_num(drift))],
    })
}

pub fn moments(args: &MomentsArgs, out: &mut Outputs) -> Result<Report, CliError> {
    let (x, y) = lambda_fractions(args.lambda)?;
    let method = match args.extrapolation {
        ExtrapolationArg::Reciprocal => Extrapolation::Reciprocal,
        ExtrapolationArg::TwoPoint => Extrapolation::TwoPoint,
    };
    let (traj, est) = solve_moments_from(MomentPair { x, y }, args.kappa, args.cap, args.rtol, method).map_err(|e| {
        match e {
            twosite_coag::moments::MomentError::Cap(_) | twosite_coag::moments::MomentError::Input { .. } => {
                CliError::Usage(e.to_string())
            }
            e => CliError::Runtime(e.to_string()),
        }
    })?;
    let mut csv = Csv::new("t,x,y");
    for k in 0..traj.len() {
        csv.row([traj.t[k].into(), traj.x[k].into(), traj.y[k].into()]);
    }
    out.write("moments.csv", &csv.into_bytes())?;
    println!("t_gel_hat = {}", fmt_num(est.t_gel_hat));
    Ok(Report {
        seeds: "none".into(),
        results: vec![
            ("t_gel_hat".into(), fmt_num(est.t_gel_hat)),
            ("t_stop".into(), fmt_num(est.t_stop)),
        ],
    })
}

pub fn meanfield(args: &MeanfieldArgs, out: &mut Outputs) -> Result<Report, CliError> {
    if !(args.t_end >= 0.0 && args.t_end.is_finite()) || args.max_mass == 0 {
        return Err(CliError::Usage("t_end must be finite and >= 0, max_mass >= 1".into()));
    }
    if args.borel_times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(CliError::Usage("borel times must be finite and >= 0".into()));
    }
    let runtime = |e: twosite_coag::meanfield::MeanFieldError| CliError::Runtime(e.to_string());
    let mut curves = Csv::new("t,u,gel_fraction,sigma");
    for t in grid(args.t_end, args.points) {
        curves.row([
            t.into(),
            solve_u(1.0, t).map_err(runtime)?.into(),
            gel_fraction(t).into(),
            sigma_meanfield(t).into(),
        ]);
    }
    out.write("meanfield.csv", &curves.into_bytes())?;

    let mut borel = Csv::new("t,mass,coeff");
    for &t in &args.borel_times {
        for m in 1..=args.max_mass {
            borel.row([t.into(), m.into(), borel_coeff(t, m).into()]);
        }
    }
    out.write("borel.csv", &borel.into_bytes())?;

    let n = args.grid.max(1);
    let mut u = Csv::new("x,t,u");
    for i in 0..=n {
        let x = i as f64 / n as f64;
        for t in grid(args.t_end, n) {
            u.row([x.into(), t.into(), solve_u(x, t).map_err(runtime)?.into()]);
        }
    }
    out.write("u_grid.csv", &u.into_bytes())?;
    Ok(Report {
        seeds: "none".into(),
        results: Vec::new(),
    })
}

pub fn postgel(args: &PostgelArgs, out: &mut Outputs) -> Result<Report, CliError> {
    if !(args.dt > 0.0 && args.dt.is_finite()) {
        return Err(CliError::Usage(format!("dt must be > 0, got {}", args.dt)));
    }
    let mut cfg = LimitConfig::new(args.lambda, args.kappa, args.cutoff, args.t_end, args.seed).with_output_step(args.dt);
    cfg.rtol = args.rtol;
    cfg.atol = args.atol;
    let run = simulate_limit(&cfg).map_err(|e| match e {
        twosite_coag::postgel::LimitError::Integration { .. } | twosite_coag::postgel::LimitError::JumpBudget(_) => {
            CliError::Runtime(e.to_string())
        }
        e => CliError::Usage(e.to_string()),
    })?;
    let mut csv = Csv::new("t,site,zeta_inf,sigma,rho,finite_mass");
    for s in &run.samples {
        for site in Site::BOTH {
            let j = site.index();
            csv.row([
                s.t.into(),
                site.into(),
                s.zeta_inf[j].into(),
                s.sigma[j].into(),
                s.rho[j].into(),
                s.finite_mass[j].into(),
            ]);
        }
    }
    out.write("postgel.csv", &csv.into_bytes())?;
    let mut jumps = Csv::new("t,from,mass");
    for j in &run.jumps {
        jumps.row([j.t.into(), j.from.into(), j.mass.into()]);
    }
    out.write("jumps.csv", &jumps.into_bytes())?;
    Ok(Report {
        seeds: args.seed.to_string(),
        results: vec![("jumps".into(), run.jumps.len().to_string())],
    })
}

pub fn compare_cmd(args: &CompareArgs, out: &mut Outputs) -> Result<Report, CliError> {
    let mut cfg = SimConfig::new(args.n0, args.n1, args.kappa, 0.0, args.seed);
    cfg.cutoff_b = args.cutoff;
    cfg.rtol = args.rtol;
    cfg.atol = args.atol;
    let times = if args.times.is_empty() {
        if args.at.is_empty() {
            return Err(CliError::Usage("give comparison times with --times or --at".into()));
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let tg = gel_time(&cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
        args.at.iter().map(|f| f * tg).collect()
    } else {
        args.times.clone()
    };
    cfg.t_end = times.iter().copied().fold(0.0, f64::max);
    cfg.snapshot_times = times;
    let report = compare(&cfg).map_err(|e| match e {
        CompareError::PostGel { .. } | CompareError::NoTimes => CliError::Usage(e.to_string()),
        CompareError::Sim(e) => sim_error(e),
        e => CliError::Runtime(e.to_string()),
    })?;
    let mut csv = Csv::new("t,site,deviation,c_b0");
    for r in &report.rows {
        csv.row([r.t.into(), r.site.into(), r.deviation.into(), r.c_b0.into()]);
    }
    out.write("compare.csv", &csv.into_bytes())?;
    Ok(Report {
        seeds: args.seed.to_string(),
        results: vec![("t_gel_hat".into(), fmt_num(report.t_gel_hat))],
    })
}

