//! Command implementations.

use std::path::{Path, PathBuf};

use serde::Serialize;
use v2g_core::engine::Mode;
use v2g_core::montecarlo::{battery_cost_study, fit_battery_cost, load_cost_history, run_population_study, sample_users, sweep_efficiency_rate};
use v2g_core::optimizer::optimize_plan;
use v2g_core::population::{load_commute_distribution, load_ev_catalog, load_work_distribution, user_seeds, CommuteDistribution, EvCatalog, WorkDistribution};
use v2g_core::synth::{self, PriceModel};
use v2g_core::timeseries::{parse_price_csv, smooth_values, write_price_csv, EdgeMode};
use v2g_core::{Aggregates, CostProjection, OptimizerConfig, PopulationSampler, PriceSeries, StudyContext, StudyResult, UserProfile, WorkCalendar, YearPlan};

use crate::config::{LoadedConfig, RunConfig};
use crate::output::{self, num, profile_row, result_row, PROFILE_HEADER, RESULT_HEADER};
use crate::{CliError, Edges, SimulateArgs, SmoothArgs, StudyArgs, SynthArgs};

/// Everything the data section of a config points at, parsed.
pub struct Bundle {
    pub prices: PriceSeries,
    pub calendar: WorkCalendar,
    pub commute: CommuteDistribution,
    pub work: WorkDistribution,
    pub catalog: EvCatalog,
    pub cost_history: Vec<(i32, f64)>,
}

impl Bundle {
    pub fn load(loaded: &LoadedConfig) -> Result<Self, CliError> {
        let read = |p: &Path| -> Result<Vec<u8>, CliError> {
            let path = loaded.resolve(p);
            std::fs::read(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
        };
        let in_file = |p: &Path| {
            let shown = loaded.resolve(p).display().to_string();
            move |e: &dyn std::fmt::Display| CliError::Data(format!("{shown}: {e}"))
        };
        let d = &loaded.config.data;
        let city_id = match &d.city_id {
            Some(id) => id.clone(),
            None => d.prices.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "city".into()),
        };
        let prices = parse_price_csv(&read(&d.prices)?, &city_id).map_err(|e| in_file(&d.prices)(&e))?;
        let year = loaded.config.engine.year;
        if prices.year_slice(year).is_none() {
            return Err(CliError::Data(format!("{} does not cover every hour of {year}", loaded.resolve(&d.prices).display())));
        }
        let commute = load_commute_distribution(&read(&d.commute)?).map_err(|e| in_file(&d.commute)(&e))?;
        let work = load_work_distribution(&read(&d.work_arrival)?, &read(&d.work_hours)?).map_err(|e| in_file(&d.work_arrival)(&e))?;
        let catalog = load_ev_catalog(&read(&d.ev_catalog)?).map_err(|e| in_file(&d.ev_catalog)(&e))?;
        let cost_history = load_cost_history(&read(&d.battery_cost_history)?).map_err(|e| in_file(&d.battery_cost_history)(&e))?;
        Ok(Self { prices, calendar: WorkCalendar::us_federal(year), commute, work, catalog, cost_history })
    }

    pub fn sampler(&self, config: &RunConfig) -> Result<PopulationSampler<'_>, CliError> {
        Ok(PopulationSampler::new(&self.commute, &self.work, &self.catalog, config.feasibility())?)
    }

    pub fn context(&self, config: &RunConfig) -> StudyContext<'_> {
        StudyContext { prices: &self.prices, calendar: &self.calendar, template: config.template(), optimizer: config.optimizer }
    }
}

fn load(path: &Path) -> Result<(LoadedConfig, Bundle), CliError> {
    let loaded = RunConfig::load(path)?;
    let bundle = Bundle::load(&loaded)?;
    Ok((loaded, bundle))
}

fn population_size(config: &RunConfig, over: Option<usize>) -> Result<usize, CliError> {
    match over {
        Some(0) => Err(CliError::Config("--population must be at least 1".into())),
        Some(m) => Ok(m),
        None => Ok(config.study.population_size),
    }
}

fn users(bundle: &Bundle, config: &RunConfig, m: usize) -> Result<Vec<UserProfile>, CliError> {
    Ok(sample_users(&bundle.sampler(config)?, m, config.study.master_seed)?)
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let (loaded, bundle) = load(&args.config)?;
    let config = &loaded.config;
    if args.p.is_some() && args.mode != Mode::Osp {
        return Err(CliError::Config(format!("--p only applies to osp, not {}", args.mode)));
    }
    if let Some(p) = args.p {
        if !(p >= 0.0) {
            return Err(CliError::Config(format!("--p {p} must be nonnegative")));
        }
    }
    let seed = args.user_seed.unwrap_or_else(|| user_seeds(1, config.study.master_seed)[0]);
    let profile = bundle.sampler(config)?.sample(seed)?;
    let plan = YearPlan::new(&profile, &bundle.prices, &bundle.calendar)?;
    let template = config.template();
    let baseline = plan.run(&template.with_mode(Mode::CommuteOnly))?;
    let scenario = match (args.mode, args.p) {
        (Mode::Osp, Some(p)) => template.with_selling_price(p),
        (Mode::Osp, None) => {
            let opt = optimize_plan(&plan, &template, &OptimizerConfig { seed: config.optimizer.seed ^ profile.rng_seed, ..config.optimizer })?;
            template.with_selling_price(opt.p_star)
        }
        (mode, _) => template.with_mode(mode),
    };
    let result = plan.run(&scenario)?;
    let text = output::csv_string(&RESULT_HEADER, [result_row(0, &result, result.net - baseline.net)])?;
    let dir = loaded.output_dir(args.out_dir.as_deref());
    output::write_text(&dir.join("simulate.csv"), &text)?;
    output::write_csv(&dir.join("simulate_profile.csv"), &PROFILE_HEADER, [profile_row(0, &profile)])?;
    print!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct Seeds<'a> {
    master_seed: u64,
    optimizer_seed: u64,
    user_seeds: &'a [u64],
}

#[derive(Serialize)]
struct ScenarioSummary {
    mode: Mode,
    aggregates: Aggregates,
    /// Users whose optimizer saw a flat objective.
    degenerate_users: usize,
    mean_selling_price: Option<f64>,
}

#[derive(Serialize)]
struct Summary<'a> {
    city_id: &'a str,
    year: i32,
    population_size: usize,
    seeds: Seeds<'a>,
    baseline_net: Aggregates,
    scenarios: Vec<ScenarioSummary>,
    config: &'a RunConfig,
}

pub fn study(args: &StudyArgs) -> Result<(), CliError> {
    let (loaded, bundle) = load(&args.config)?;
    let config = &loaded.config;
    let m = population_size(config, args.population)?;
    let users = users(&bundle, config, m)?;
    let result = run_population_study(&bundle.context(config), &users, &config.study.scenarios)?;
    let dir = loaded.output_dir(args.out_dir.as_deref());
    write_study(&dir, &bundle, config, &result)
}

/// Writes the per-user tables, optimizer traces, plot tables and summary of a study.
pub fn write_study(dir: &Path, bundle: &Bundle, config: &RunConfig, result: &StudyResult) -> Result<(), CliError> {
    let n = result.users.len();
    let mut rows = Vec::with_capacity(n * (1 + result.distributions.len()));
    for i in 0..n {
        rows.push(result_row(i, &result.baselines[i], 0.0));
        for d in &result.distributions {
            rows.push(result_row(i, &d.rows[i].result, d.rows[i].savings));
        }
    }
    output::write_csv(&dir.join("users.csv"), &RESULT_HEADER, rows)?;
    output::write_csv(&dir.join("profiles.csv"), &PROFILE_HEADER, result.users.iter().enumerate().map(|(i, u)| profile_row(i, u)))?;

    let trace = result
        .distributions
        .iter()
        .filter(|d| d.mode == Mode::Osp)
        .flat_map(|d| d.rows.iter())
        .flat_map(|row| row.trace.iter().map(move |t| vec![row.user_id.to_string(), t.iteration.to_string(), num(t.p), num(t.objective)]));
    output::write_csv(&dir.join("trace.csv"), &["user_id", "iteration", "p", "objective"], trace)?;

    let main = result.distribution(Mode::Osp).unwrap_or(&result.distributions[0]);
    output::write_csv(
        &dir.join("savings_vs_schedule.csv"),
        &["t_w", "commute_time", "savings"],
        main.rows.iter().map(|r| {
            let u = &result.users[r.user_id];
            vec![u.work_start_hour.to_string(), num(u.commute_time_hours), num(r.savings)]
        }),
    )?;
    output::write_csv(
        &dir.join("savings_vs_hours.csv"),
        &["mode", "hours_per_week", "capacity_kwh", "savings"],
        result.distributions.iter().flat_map(|d| {
            d.rows.iter().map(move |r| {
                let u = &result.users[r.user_id];
                vec![d.mode.to_string(), num(u.weekly_hours), num(u.ev_capacity_kwh), num(r.savings)]
            })
        }),
    )?;

    let seeds: Vec<u64> = result.users.iter().map(|u| u.rng_seed).collect();
    let baseline_net: Vec<f64> = result.baselines.iter().map(|b| b.net).collect();
    let summary = Summary {
        city_id: bundle.prices.city_id(),
        year: config.engine.year,
        population_size: n,
        seeds: Seeds { master_seed: config.study.master_seed, optimizer_seed: config.optimizer.seed, user_seeds: &seeds },
        baseline_net: Aggregates::from_values(&baseline_net).expect("nonempty population"),
        scenarios: result
            .distributions
            .iter()
            .map(|d| {
                let prices: Vec<f64> = d.rows.iter().filter_map(|r| r.result.selling_price).collect();
                ScenarioSummary {
                    mode: d.mode,
                    aggregates: d.aggregates,
                    degenerate_users: d.rows.iter().filter(|r| r.degenerate).count(),
                    mean_selling_price: (!prices.is_empty()).then(|| prices.iter().sum::<f64>() / prices.len() as f64),
                }
            })
            .collect(),
        config,
    };
    output::write_json(&dir.join("summary.json"), &summary)
}

pub fn sweep(args: &StudyArgs) -> Result<(), CliError> {
    let (loaded, bundle) = load(&args.config)?;
    let config = &loaded.config;
    let m = population_size(config, args.population)?;
    let users = users(&bundle, config, m)?;
    let s = &config.study;
    let cells = sweep_efficiency_rate(&bundle.context(config), &users, s.sweep_mode, &s.etas, &s.rates_kw)?;
    let dir = loaded.output_dir(args.out_dir.as_deref());
    output::write_csv(
        &dir.join("sweep.csv"),
        &["eta", "r_ch", "mean_savings", "q25", "q50", "q75"],
        cells.iter().map(|c| vec![num(c.eta), num(c.rate_kw), num(c.aggregates.mean), num(c.aggregates.q25), num(c.aggregates.q50), num(c.aggregates.q75)]),
    )
}

#[derive(Serialize)]
struct CostFit<'a> {
    projection: CostProjection,
    history: &'a [(i32, f64)],
}

pub fn cost_study(args: &StudyArgs) -> Result<(), CliError> {
    let (loaded, bundle) = load(&args.config)?;
    let config = &loaded.config;
    let m = population_size(config, args.population)?;
    let projection = fit_battery_cost(&bundle.cost_history)?;
    let users = users(&bundle, config, m)?;
    let (from, to) = config.study.cost_years;
    let rows = battery_cost_study(&bundle.context(config), &users, &projection, from, to)?;
    let dir = loaded.output_dir(args.out_dir.as_deref());
    output::write_json(&dir.join("cost_fit.json"), &CostFit { projection, history: &bundle.cost_history })?;
    output::write_csv(
        &dir.join("cost_study.csv"),
        &["year", "c_b", "mean_savings"],
        rows.iter().map(|r| vec![r.year.to_string(), num(r.c_b), num(r.aggregates.mean)]),
    )
}

/// Path of the smoothed copy of `input`.
pub fn smoothed_path(input: &Path, out_dir: Option<&Path>) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "prices".into());
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| input.parent().map(Path::to_path_buf).unwrap_or_default());
    dir.join(format!("{stem}_smoothed.csv"))
}

pub fn smooth(args: &SmoothArgs) -> Result<(), CliError> {
    let bytes = std::fs::read(&args.prices).map_err(|e| CliError::Data(format!("{}: {e}", args.prices.display())))?;
    let stem = args.prices.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let series = parse_price_csv(&bytes, &stem).map_err(|e| CliError::Data(format!("{}: {e}", args.prices.display())))?;
    let edges = match args.edges {
        Edges::Fit => EdgeMode::PolynomialFit,
        Edges::Mirror => EdgeMode::Mirror,
    };
    let values = smooth_values(series.prices(), args.window, args.order, edges).map_err(|e| CliError::Config(e.to_string()))?;
    let smoothed = series.with_prices(format!("{stem}_smoothed"), values)?;
    output::write_text(&smoothed_path(&args.prices, args.out_dir.as_deref()), &write_price_csv(&smoothed))
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let dir = &args.out_dir;
    let y = args.year;
    let prices = dir.join("prices");
    output::write_text(&prices.join(format!("synth_flat_{y}.csv")), &write_price_csv(&PriceModel::flat().generate(y, args.seed)))?;
    output::write_text(&prices.join(format!("synth_nightpeak_{y}.csv")), &write_price_csv(&PriceModel::night_peak().generate(y, args.seed.wrapping_add(1))))?;
    output::write_text(&prices.join(format!("two_regime_{y}.csv")), &write_price_csv(&synth::two_regime_prices(y)))?;
    output::write_text(&dir.join("commute.csv"), &synth::to_csv(&synth::commute_records(args.commute_rows, args.seed.wrapping_add(2))))?;
    output::write_text(&dir.join("work_arrival.csv"), &synth::to_csv(&synth::arrival_records()))?;
    output::write_text(&dir.join("work_hours.csv"), &synth::to_csv(&synth::weekly_hours_records()))?;
    output::write_text(&dir.join("ev_catalog.csv"), &synth::to_csv(&synth::ev_models()))?;
    output::write_text(&dir.join("battery_cost_history.csv"), &synth::cost_history_csv(&synth::battery_cost_history()))
}
