// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use szilard::baselines::{
    peak_temperature_estimate, ClassicalModel, IdealGasModel, PerturbativeModel,
    PerturbativeValidity, Statistics,
};
use szilard::cache::DiskCache;
use szilard::engine::{
    bifurcation_onset, find_peak, optimal_work, optimize_insertion, scan, InsertionChoice,
    ScanAxis, SearchOptions,
};
use szilard::spectrum::SpectrumStore;
use szilard::thermo::{ExactModel, SubsystemModel};
use szilard::units::{EngineParams, E1};

mod config;
mod output;

use config::{Baseline, RunConfig, RunFlags, CACHE_ENV};
use output::Record;

/// Quasi-static Szilard engine with interacting bosons in a 1D box.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Work of one cycle with optimal removal points
    Work(WorkArgs),
    /// Sweep temperature, coupling or insertion point (exactly one range flag)
    Scan(ScanArgs),
    /// Maximize W/W1 over temperature, insertion point, or both
    Optimize(OptimizeArgs),
    /// Inspect, clear or prewarm the spectrum cache
    Cache(CacheArgs),
}

#[derive(Args)]
struct WorkArgs {
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args, Clone)]
struct ScanArgs {
    #[command(flatten)]
    run: RunFlags,
    /// Optimize the insertion point at every temperature or coupling
    #[arg(long = "optimize-ins")]
    optimize_ins: bool,
    /// Smallest converged fraction for a zero exit status
    #[arg(long = "min-converged", default_value_t = 0.9)]
    min_converged: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Free {
    T,
    Ins,
    Both,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    run: RunFlags,
    #[arg(long, value_enum)]
    free: Free,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CacheAction {
    Inspect,
    Clear,
    /// Compute every spectrum a scan with the same flags would need
    Prewarm,
}

#[derive(Args)]
struct CacheArgs {
    #[arg(value_enum)]
    action: CacheAction,
    #[command(flatten)]
    scan: ScanArgs,
}

/// Result of a subcommand before it is written out.
struct Report {
    records: Vec<Record>,
    summary: BTreeMap<String, String>,
    /// Diagnostic for a nonzero exit status.
    failure: Option<String>,
}

struct Setup {
    cfg: RunConfig,
    params: EngineParams,
    model: Box<dyn SubsystemModel>,
    store: Option<Arc<SpectrumStore>>,
}

impl Setup {
    /// `max_temperature` is the largest k_BT (natural units) the run may request.
    fn new(cfg: RunConfig, max_temperature: f64) -> Result<Self> {
        let params = EngineParams::new(cfg.n, cfg.g, cfg.t)?;
        let mut store = None;
        let model: Box<dyn SubsystemModel> = match cfg.baseline {
            Baseline::Exact => {
                let s = Arc::new(match &cfg.cache_dir {
                    Some(dir) => SpectrumStore::with_disk(cfg.policy(), dir)
                        .with_context(|| format!("opening cache {}", dir.display()))?,
                    None => SpectrumStore::new(cfg.policy()),
                });
                store = Some(Arc::clone(&s));
                Box::new(ExactModel::new(s, max_temperature))
            }
            Baseline::Classical => Box::new(ClassicalModel),
            Baseline::IdealBose => Box::new(IdealGasModel {
                statistics: Statistics::Bose,
            }),
            Baseline::IdealFermi => Box::new(IdealGasModel {
                statistics: Statistics::Fermi,
            }),
            Baseline::Perturbative => Box::new(PerturbativeModel),
        };
        Ok(Setup {
            cfg,
            params,
            model,
            store,
        })
    }

    fn warn_perturbative(&self, points: impl IntoIterator<Item = EngineParams>) {
        if self.cfg.baseline != Baseline::Perturbative {
            return;
        }
        let warnings: BTreeSet<String> = points
            .into_iter()
            .flat_map(|p| PerturbativeValidity::check(&p).warnings())
            .collect();
        for w in warnings {
            eprintln!("warning: {w}");
        }
    }

    fn report_diagonalizations(&self) {
        if let Some(store) = &self.store {
            eprintln!("diagonalizations: {}", store.diagonalizations());
        }
    }
}

fn unconverged(records: &[Record]) -> Option<String> {
    let bad: Vec<String> = records
        .iter()
        .filter(|r| !r.converged)
        .map(|r| match &r.error {
            Some(e) => format!("{} t={} g={}: {e}", r.label, r.t, r.g),
            None => format!(
                "{} t={} g={}: residual {}",
                r.label,
                r.t,
                r.g,
                r.residual.unwrap_or(f64::NAN)
            ),
        })
        .collect();
    if bad.is_empty() {
        None
    } else {
        Some(format!("not converged:\n  {}", bad.join("\n  ")))
    }
}

fn run_work(args: &WorkArgs) -> Result<(RunConfig, Report)> {
    let cfg = args.run.resolve()?;
    let setup = Setup::new(cfg.clone(), cfg.t * E1)?;
    setup.warn_perturbative([setup.params]);
    let w = optimal_work(
        setup.model.as_ref(),
        cfg.ins,
        &setup.params,
        &SearchOptions::default(),
    )?;
    setup.report_diagonalizations();
    let records = vec![Record::from_breakdown(
        "work",
        setup.params.temperature,
        cfg.g,
        &w,
    )];
    let failure = unconverged(&records);
    Ok((
        cfg,
        Report {
            records,
            summary: BTreeMap::new(),
            failure,
        },
    ))
}

/// Axis, values in natural units, and the largest temperature a scan touches.
fn scan_plan(cfg: &RunConfig) -> Result<(ScanAxis, Vec<f64>, f64)> {
    let given = [
        cfg.t_range.is_some(),
        cfg.g_range.is_some(),
        cfg.ins_range.is_some(),
    ];
    if given.iter().filter(|&&b| b).count() != 1 {
        bail!("scan needs exactly one of --t-range, --g-range, --ins-range");
    }
    let base_t = cfg.t * E1;
    Ok(if let Some(r) = cfg.t_range {
        (
            ScanAxis::Temperature,
            r.values().into_iter().map(|t| t * E1).collect(),
            r.hi * E1,
        )
    } else if let Some(r) = cfg.g_range {
        (ScanAxis::Coupling, r.values(), base_t)
    } else {
        let r = cfg.ins_range.expect("checked above");
        (ScanAxis::Insertion, r.values(), base_t)
    })
}

fn run_scan(args: &ScanArgs) -> Result<(RunConfig, Report)> {
    let cfg = args.run.resolve()?;
    let (axis, values, t_max) = scan_plan(&cfg)?;
    let setup = Setup::new(cfg.clone(), t_max)?;
    let params = setup.params;
    let point_params = |v: f64| match axis {
        ScanAxis::Temperature => params.with_temperature(v),
        ScanAxis::Coupling => params.with_coupling(v),
        ScanAxis::Insertion => params,
    };
    setup.warn_perturbative(values.iter().map(|&v| point_params(v)));
    let insertion = if args.optimize_ins {
        InsertionChoice::Optimize
    } else {
        InsertionChoice::Fixed(cfg.ins)
    };
    let points = scan(
        setup.model.as_ref(),
        &params,
        axis,
        &values,
        insertion,
        &SearchOptions::default(),
    );
    setup.report_diagonalizations();

    let records: Vec<Record> = points
        .iter()
        .map(|pt| {
            let p = point_params(pt.axis_value);
            match &pt.outcome {
                Ok(w) => Record::from_breakdown("scan", p.temperature, p.coupling, w),
                Err(e) => {
                    let ins = match (axis, insertion) {
                        (ScanAxis::Insertion, _) => Some(pt.axis_value),
                        (_, InsertionChoice::Fixed(x)) => Some(x),
                        _ => None,
                    };
                    Record::failed("scan", p.temperature, p.coupling, ins, e.clone())
                }
            }
        })
        .collect();
    let converged = records.iter().filter(|r| r.converged).count();
    let fraction = converged as f64 / records.len() as f64;
    let mut summary = BTreeMap::new();
    summary.insert(
        "converged".to_string(),
        format!("{converged}/{}", records.len()),
    );
    let failure = if fraction >= args.min_converged {
        None
    } else {
        unconverged(&records).map(|d| {
            format!(
                "only {converged} of {} points converged; {d}",
                records.len()
            )
        })
    };
    Ok((
        cfg,
        Report {
            records,
            summary,
            failure,
        },
    ))
}

fn run_optimize(args: &OptimizeArgs) -> Result<(RunConfig, Report)> {
    let cfg = args.run.resolve()?;
    let opts = SearchOptions::default();
    let mut summary = BTreeMap::new();
    let mut records = Vec::new();
    let setup;
    match args.free {
        Free::T | Free::Both => {
            let estimate = if cfg.g < 0.0 {
                peak_temperature_estimate(cfg.n, cfg.g)?
            } else {
                cfg.t * E1
            };
            setup = Setup::new(cfg.clone(), 6.0 * estimate)?;
            setup.warn_perturbative([setup.params.with_temperature(estimate)]);
            let insertion = if args.free == Free::Both {
                InsertionChoice::Optimize
            } else {
                InsertionChoice::Fixed(cfg.ins)
            };
            let peak = find_peak(
                setup.model.as_ref(),
                &setup.params,
                estimate,
                insertion,
                &opts,
            )?;
            summary.insert("t_estimate".to_string(), (estimate / E1).to_string());
            summary.insert("t_peak".to_string(), (peak.temperature / E1).to_string());
            records.push(Record::from_breakdown(
                "peak",
                peak.temperature,
                cfg.g,
                &peak.breakdown,
            ));
        }
        Free::Ins => {
            let temps: Vec<f64> = match cfg.t_range {
                Some(r) => r.values().into_iter().map(|t| t * E1).collect(),
                None => vec![cfg.t * E1],
            };
            let t_max = temps.iter().copied().fold(f64::MIN, f64::max);
            setup = Setup::new(cfg.clone(), t_max)?;
            setup.warn_perturbative(temps.iter().map(|&t| setup.params.with_temperature(t)));
            let mut flags = Vec::new();
            for &t in &temps {
                let p = setup.params.with_temperature(t);
                let opt = optimize_insertion(setup.model.as_ref(), &p, &opts)?;
                flags.push(opt.asymmetric);
                records.push(Record::from_breakdown("best", t, cfg.g, &opt.best));
                if temps.len() == 1 {
                    for m in &opt.maxima {
                        records.push(Record::from_breakdown("maximum", t, cfg.g, m));
                    }
                    summary.insert("asymmetric".to_string(), opt.asymmetric.to_string());
                }
            }
            if temps.len() > 1 {
                let onset = flags.windows(2).position(|w| !w[0] && w[1]);
                match onset {
                    Some(i) => {
                        let t = bifurcation_onset(
                            setup.model.as_ref(),
                            &setup.params,
                            temps[i],
                            temps[i + 1],
                            1e-2 * E1,
                            &opts,
                        )?;
                        summary.insert("onset".to_string(), (t / E1).to_string());
                        let at = optimize_insertion(
                            setup.model.as_ref(),
                            &setup.params.with_temperature(t),
                            &opts,
                        )?;
                        records.push(Record::from_breakdown("onset", t, cfg.g, &at.best));
                    }
                    None => {
                        summary.insert("onset".to_string(), "none".to_string());
                    }
                }
            }
        }
    }
    setup.report_diagonalizations();
    let failure = unconverged(&records);
    Ok((
        cfg,
        Report {
            records,
            summary,
            failure,
        },
    ))
}

fn run_cache(args: &CacheArgs) -> Result<ExitCode> {
    match args.action {
        CacheAction::Inspect | CacheAction::Clear => {
            let cfg = args.scan.run.resolve()?;
            let dir = cfg.cache_dir.ok_or_else(|| {
                anyhow!("no cache directory; pass --cache-dir or set {CACHE_ENV}")
            })?;
            let disk = DiskCache::open(&dir)?;
            if args.action == CacheAction::Clear {
                disk.clear()?;
                eprintln!("cleared {}", dir.display());
                return Ok(ExitCode::SUCCESS);
            }
            let records = disk.load()?;
            println!("# cache {} records={}", dir.display(), records.len());
            println!("n,g_eff,M,E_cut,tau_max,modes,e_cut,dim,levels,dlnz,converged");
            for s in &records {
                println!(
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    s.key.n,
                    s.key.g_eff,
                    s.key.basis_size,
                    s.key.energy_cutoff,
                    s.max_temperature,
                    s.modes,
                    s.e_cut,
                    s.dimension,
                    s.energies.len(),
                    s.delta_log_z,
                    s.converged
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        CacheAction::Prewarm => {
            let cfg = args.scan.run.resolve()?;
            if cfg.cache_dir.is_none() {
                bail!("no cache directory; pass --cache-dir or set {CACHE_ENV}");
            }
            if cfg.baseline != Baseline::Exact {
                bail!("only the exact baseline uses the spectrum cache");
            }
            let (_, report) = run_scan(&args.scan)?;
            eprintln!("prewarmed {} scan points", report.records.len());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn finish(command: &str, result: Result<(RunConfig, Report)>) -> Result<ExitCode> {
    let (cfg, report) = result?;
    output::emit(command, &cfg, &report.summary, &report.records)?;
    Ok(match report.failure {
        None => ExitCode::SUCCESS,
        Some(diag) => {
            eprintln!("error: {diag}");
            ExitCode::from(2)
        }
    })
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Work(a) => finish("work", run_work(a)),
        Command::Scan(a) => finish("scan", run_scan(a)),
        Command::Optimize(a) => finish("optimize", run_optimize(a)),
        Command::Cache(a) => run_cache(a),
    }
}
