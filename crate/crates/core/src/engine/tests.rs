use super::*;
use crate::population::FeasibilityRules;
use chrono::{Datelike, NaiveDate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const YEAR: i32 = 2019;
const HOURS: usize = 8760;

fn profile(t_w: u32, weekly: f64, commute_h: f64, miles: f64) -> UserProfile {
    UserProfile {
        rng_seed: 0,
        commute_distance_miles: miles,
        commute_time_hours: commute_h,
        work_start_hour: t_w,
        weekly_hours: weekly,
        vacation_weeks: 2,
        vacation_start_week: 20,
        ev_model: "test".into(),
        ev_capacity_kwh: 60.0,
        ev_range_miles: 240.0,
    }
}

fn series(prices: Vec<f64>) -> PriceSeries {
    PriceSeries::new("test", NaiveDate::from_ymd_opt(YEAR, 1, 1).unwrap(), prices).unwrap()
}

fn constant(price: f64) -> PriceSeries {
    series(vec![price; HOURS])
}

fn two_level() -> PriceSeries {
    series((0..HOURS).map(|h| if (9..17).contains(&(h % 24)) { 0.30 } else { 0.02 }).collect())
}

fn noisy(seed: u64) -> PriceSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    series((0..HOURS).map(|h| 0.03 + 0.02 * ((h % 24) as f64 / 24.0 * std::f64::consts::TAU).sin() + rng.random_range(0.0..0.04)).collect())
}

fn scenario(mode: Mode) -> ScenarioConfig {
    ScenarioConfig::new(mode, YEAR)
}

fn no_fade(mode: Mode) -> ScenarioConfig {
    ScenarioConfig { degradation: DegradationParams::none(), ..scenario(mode) }
}

fn cal() -> WorkCalendar {
    WorkCalendar::us_federal(YEAR)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Independent reimplementation with zero degradation: hour labels are found
/// by testing each hour against every duty window instead of stamping
/// windows, and working days come from a literal holiday list.
struct Oracle {
    revenue: f64,
    energy_cost: f64,
    sold: f64,
    bought: f64,
    driven: f64,
    soc: f64,
    min_soc: f64,
    max_soc: f64,
}

fn oracle(p: &UserProfile, prices: &[f64], mode: Mode, threshold: f64, eta: f64, rate: f64) -> Oracle {
    let holidays = [(1, 1), (1, 21), (2, 18), (5, 27), (7, 4), (9, 2), (10, 14), (11, 11), (11, 28), (12, 25)];
    let first_monday = 7; // 2019-01-07
    let vac_from = first_monday - 1 + 7 * p.vacation_start_week as i64;
    let vac_to = vac_from + 7 * p.vacation_weeks as i64;
    let w = ((p.weekly_hours / 5.0).round() as i64).max(1);
    let c = {
        let q = (p.commute_time_hours * 4.0).round() / 4.0;
        let s = q.ceil() as i64;
        if s == 0 && p.commute_distance_miles > 0.0 { 1 } else { s }
    };
    let e_max = p.ev_capacity_kwh;
    let leg = p.commute_distance_miles * e_max / p.ev_range_miles;
    let floor = 0.1 + leg / e_max;
    let n = prices.len() as i64;

    let mut windows = Vec::new();
    for d in 0..365i64 {
        let date = NaiveDate::from_yo_opt(YEAR, d as u32 + 1).unwrap();
        let weekend = date.weekday().num_days_from_monday() >= 5;
        let holiday = holidays.contains(&(date.month(), date.day()));
        if weekend || holiday || (vac_from..vac_to).contains(&d) {
            continue;
        }
        windows.push(d * 24 + p.work_start_hour as i64);
    }
    let label = |h: i64| {
        for &start in &windows {
            let rel = (h - start + c).rem_euclid(n);
            if rel < c {
                return SlotState::Commuting;
            }
            if rel < c + w {
                return SlotState::AtWork;
            }
            if rel < 2 * c + w {
                return SlotState::Commuting;
            }
        }
        SlotState::AtHome
    };

    let mut o = Oracle { revenue: 0.0, energy_cost: 0.0, sold: 0.0, bought: 0.0, driven: 0.0, soc: 1.0, min_soc: 1.0, max_soc: 1.0 };
    for h in 0..n {
        let price = prices[h as usize];
        match label(h) {
            SlotState::AtWork => {
                let open = match mode {
                    Mode::PriceTaker => true,
                    Mode::Osp => price > threshold,
                    Mode::CommuteOnly => false,
                };
                if open {
                    let out = rate.min(((o.soc - floor) * e_max).max(0.0));
                    o.soc -= out / e_max;
                    o.sold += eta * out;
                    o.revenue += eta * out * price;
                }
            }
            SlotState::AtHome => {
                let charged = rate.min(((1.0 - o.soc) * e_max).max(0.0));
                o.soc += charged / e_max;
                o.bought += charged / eta;
                o.energy_cost += charged / eta * price;
            }
            SlotState::Commuting => {
                o.soc -= leg / c as f64 / e_max;
                o.driven += leg / c as f64;
            }
            SlotState::Idle => {}
        }
        o.min_soc = o.min_soc.min(o.soc);
        o.max_soc = o.max_soc.max(o.soc);
    }
    o
}

#[test]
fn sells_full_rate_at_work() {
    let sc = scenario(Mode::Osp).with_selling_price(0.05);
    let f = step_power(SlotState::AtWork, 1.0, 0.10, &sc, 0.225, 0.0).unwrap();
    assert!(rel_close(f.battery_kwh, -11.5, 1e-12));
    assert!(rel_close(f.grid_kwh, 11.5 * 0.837, 1e-12));
    assert!(rel_close(f.grid_kwh, 9.6255, 1e-9));
    assert!(rel_close(f.cash, 0.96255, 1e-9));
}

#[test]
fn charge_truncated_at_full() {
    let sc = scenario(Mode::PriceTaker);
    let f = step_power(SlotState::AtHome, 0.99, 0.04, &sc, 0.225, 0.0).unwrap();
    assert!(rel_close(f.battery_kwh, 0.6, 1e-9));
    assert!(rel_close(-f.grid_kwh, 0.6 / 0.837, 1e-12));
    assert!((-f.grid_kwh - 0.7168).abs() < 1e-4);
    assert!(rel_close(f.cash, -0.04 * 0.6 / 0.837, 1e-12));
}

#[test]
fn no_headroom_at_floor() {
    let sc = scenario(Mode::PriceTaker);
    let f = step_power(SlotState::AtWork, 0.225, 0.5, &sc, 0.225, 0.0).unwrap();
    assert_eq!(f, StepFlow::default());
}

#[test]
fn gate_is_strict_and_commute_only_never_sells() {
    let osp = scenario(Mode::Osp).with_selling_price(0.10);
    assert_eq!(step_power(SlotState::AtWork, 1.0, 0.10, &osp, 0.1, 0.0).unwrap(), StepFlow::default());
    let co = scenario(Mode::CommuteOnly);
    assert_eq!(step_power(SlotState::AtWork, 1.0, 9.0, &co, 0.1, 0.0).unwrap(), StepFlow::default());
    let pt = scenario(Mode::PriceTaker);
    assert!(step_power(SlotState::AtWork, 1.0, -0.5, &pt, 0.1, 0.0).unwrap().cash < 0.0);
}

#[test]
fn commuting_and_idle_steps() {
    let sc = scenario(Mode::PriceTaker);
    let f = step_power(SlotState::Commuting, 0.8, 0.3, &sc, 0.1, 2.5).unwrap();
    assert_eq!(f, StepFlow { grid_kwh: 0.0, battery_kwh: -2.5, cash: 0.0 });
    assert_eq!(step_power(SlotState::Idle, 0.5, 0.3, &sc, 0.1, 2.5).unwrap(), StepFlow::default());
}

#[test]
fn step_rejects_out_of_range_soc() {
    let sc = scenario(Mode::PriceTaker);
    assert!(matches!(step_power(SlotState::AtHome, 0.05, 0.1, &sc, 0.1, 0.0), Err(EngineError::SocOutOfBounds { .. })));
    assert!(matches!(step_power(SlotState::AtHome, 1.01, 0.1, &sc, 0.1, 0.0), Err(EngineError::SocOutOfBounds { .. })));
}

#[test]
fn idle_commuter_only_pays_calendar_fade() {
    let r = simulate_year(&profile(9, 40.0, 0.0, 0.0), &constant(0.1), &cal(), &scenario(Mode::CommuteOnly)).unwrap();
    assert_eq!(r.energy_cost, 0.0);
    assert_eq!(r.kwh_sold, 0.0);
    let d = DegradationParams::default();
    let expected = 156.0 * 60.0 * (-d.b1) * 365f64.powf(d.z) / 0.2;
    assert!(rel_close(r.deg_cost, expected, 1e-9), "{} vs {expected}", r.deg_cost);
    assert!(rel_close(r.net, -expected, 1e-9));
    assert_eq!(r.net, r.revenue - r.energy_cost - r.deg_cost);
}

#[test]
fn closed_gate_matches_commute_only() {
    let p = profile(8, 40.0, 0.5, 12.0);
    let prices = noisy(3);
    let max = prices.prices().iter().cloned().fold(f64::MIN, f64::max);
    let plan = YearPlan::new(&p, &prices, &cal()).unwrap();
    let osp = plan.run(&scenario(Mode::Osp).with_selling_price(max + 0.01)).unwrap();
    let base = plan.run(&scenario(Mode::CommuteOnly)).unwrap();
    assert_eq!(osp.kwh_sold, 0.0);
    assert_eq!(osp.net, base.net);
    assert_eq!(osp.kwh_bought, base.kwh_bought);
    let s = plan.savings(&scenario(Mode::Osp).with_selling_price(f64::INFINITY)).unwrap();
    assert_eq!(s.savings, 0.0);
}

#[test]
fn matches_independent_oracle() {
    let prices = noisy(11);
    for (i, p) in [profile(9, 40.0, 0.5, 10.0), profile(22, 40.0, 0.75, 20.0), profile(0, 55.0, 1.2, 30.0), profile(6, 8.0, 0.2, 3.0)]
        .into_iter()
        .enumerate()
    {
        for (mode, threshold) in [(Mode::PriceTaker, 0.0), (Mode::Osp, 0.05), (Mode::CommuteOnly, 0.0)] {
            let sc = ScenarioConfig { selling_price: threshold, ..no_fade(mode) };
            let r = simulate_year(&p, &prices, &cal(), &sc).unwrap();
            let o = oracle(&p, prices.prices(), mode, threshold, 0.837, 11.5);
            let ctx = format!("profile {i} {mode}");
            assert!(rel_close(r.revenue, o.revenue, 1e-9), "{ctx}: revenue {} vs {}", r.revenue, o.revenue);
            assert!(rel_close(r.energy_cost, o.energy_cost, 1e-9), "{ctx}");
            assert!(rel_close(r.kwh_sold, o.sold, 1e-9), "{ctx}");
            assert!(rel_close(r.kwh_bought, o.bought, 1e-9), "{ctx}");
            assert!(rel_close(r.kwh_commute, o.driven, 1e-9), "{ctx}");
            assert!(rel_close(r.final_soc, o.soc, 1e-9), "{ctx}");
            assert!(o.min_soc >= 0.1 - 1e-9 && o.max_soc <= 1.0 + 1e-9, "{ctx}");
            assert_eq!(r.deg_cost, 0.0);
        }
    }
}

#[test]
fn constant_price_energy_balance() {
    let price = 0.10;
    let eta: f64 = 0.837;
    let p = profile(9, 40.0, 0.5, 15.0);
    let r = simulate_year(&p, &constant(price), &cal(), &no_fade(Mode::PriceTaker)).unwrap();
    assert!(r.kwh_sold > 0.0);
    assert!(rel_close(r.net, price * (r.kwh_sold - r.kwh_bought), 1e-12));
    let delta_soc_kwh = (r.final_soc - 1.0) * 60.0;
    let bought = r.kwh_sold / (eta * eta) + (r.kwh_commute + delta_soc_kwh) / eta;
    assert!(rel_close(r.kwh_bought, bought, 1e-9), "{} vs {bought}", r.kwh_bought);
}

#[test]
fn price_taker_savings_under_constant_price() {
    // Ending the year on days off lets both runs finish full, so the closed form is exact.
    let mut holidays: Vec<NaiveDate> = cal().holidays().iter().cloned().collect();
    holidays.extend([NaiveDate::from_ymd_opt(YEAR, 12, 30).unwrap(), NaiveDate::from_ymd_opt(YEAR, 12, 31).unwrap()]);
    let calendar = WorkCalendar::with_holidays(YEAR, holidays).unwrap();
    let eta: f64 = 0.837;
    let p = profile(9, 40.0, 0.5, 15.0);
    let plan = YearPlan::new(&p, &constant(0.10), &calendar).unwrap();
    let s = plan.savings(&no_fade(Mode::PriceTaker)).unwrap();
    assert!((s.v2g.final_soc - 1.0).abs() < 1e-12 && (s.baseline.final_soc - 1.0).abs() < 1e-12);
    let expected = s.v2g.kwh_sold * 0.10 * (1.0 - 1.0 / (eta * eta));
    assert!(rel_close(s.savings, expected, 1e-9), "{} vs {expected}", s.savings);
    assert!(s.savings < 0.0);
}

#[test]
fn two_level_day_pays_the_spread() {
    // 09:00-17:00 at 0.30, otherwise 0.02; no commute, so each working day
    // sells the whole usable 54 kWh at 0.30 and buys it back at 0.02.
    let p = profile(9, 40.0, 0.0, 0.0);
    let plan = YearPlan::new(&p, &two_level(), &cal()).unwrap();
    let s = plan.savings(&no_fade(Mode::Osp).with_selling_price(0.10)).unwrap();
    let eta = 0.837;
    let per_day = 54.0 * (0.30 * eta - 0.02 / eta);
    let expected = plan.duty_days() as f64 * per_day;
    assert!(rel_close(s.savings, expected, 1e-9), "{} vs {expected}", s.savings);
    assert!(s.savings > 0.0);
    assert_eq!(plan.duty_days(), 242);
}

#[test]
fn night_shift_wraps_into_next_day_and_year_start() {
    let p = profile(22, 40.0, 0.0, 0.0);
    let plan = YearPlan::new(&p, &constant(0.1), &cal()).unwrap();
    assert_eq!(plan.work_hours(), 8 * plan.duty_days());
    // 2019-12-31 is a working Tuesday; its shift ends in the first hours of the year.
    assert!(plan.labels()[..6].iter().all(|&s| s == SlotState::AtWork));
    assert_eq!(plan.labels()[6], SlotState::AtHome);
    // 2019-01-02 shift: 22:00 Wednesday to 06:00 Thursday.
    assert!(plan.labels()[24 + 22..48 + 6].iter().all(|&s| s == SlotState::AtWork));
}

#[test]
fn vacation_and_weekends_are_home() {
    let p = profile(9, 40.0, 0.5, 10.0);
    let plan = YearPlan::new(&p, &constant(0.1), &cal()).unwrap();
    // Week 20 after the first Monday (Jan 7) starts on May 27.
    let may_28 = NaiveDate::from_ymd_opt(YEAR, 5, 28).unwrap().ordinal0() as usize;
    assert!(plan.labels()[may_28 * 24..may_28 * 24 + 24].iter().all(|&s| s == SlotState::AtHome));
    let saturday = NaiveDate::from_ymd_opt(YEAR, 3, 2).unwrap().ordinal0() as usize;
    assert!(plan.labels()[saturday * 24..saturday * 24 + 24].iter().all(|&s| s == SlotState::AtHome));
    assert_eq!(plan.duty_days(), 251 - 10 + 1); // Memorial Day is already a holiday
}

#[test]
fn errors() {
    let p = profile(9, 40.0, 0.5, 10.0);
    let short = PriceSeries::new("short", NaiveDate::from_ymd_opt(YEAR, 1, 1).unwrap(), vec![0.1; 240]).unwrap();
    assert!(matches!(simulate_year(&p, &short, &cal(), &scenario(Mode::PriceTaker)), Err(EngineError::PriceSeriesTooShort { .. })));
    assert!(matches!(
        simulate_year(&p, &constant(0.1), &cal(), &ScenarioConfig::new(Mode::PriceTaker, 2020)),
        Err(EngineError::YearMismatch { .. })
    ));
    assert!(matches!(
        simulate_year(&p, &constant(0.1), &cal(), &scenario(Mode::Osp).with_selling_price(-0.01)),
        Err(EngineError::InvalidScenario(_))
    ));
    assert!(matches!(
        simulate_year(&p, &constant(0.1), &cal(), &ScenarioConfig { reserve_legs: 3, ..scenario(Mode::PriceTaker) }),
        Err(EngineError::InvalidScenario(_))
    ));
    // 30 miles each way on a 60 kWh/240 mi car is 7.5 kWh; 13 h at home at 1 kW cannot restore 15 kWh.
    let long = profile(6, 45.0, 1.0, 30.0);
    let slow = ScenarioConfig { battery: BatteryParams { charge_rate_kw: 1.0, ..BatteryParams::default() }, ..scenario(Mode::PriceTaker) };
    assert!(matches!(simulate_year(&long, &constant(0.1), &cal(), &slow), Err(EngineError::UnrechargeableSchedule { .. })));
    let far = profile(9, 40.0, 1.0, 120.0);
    assert!(matches!(simulate_year(&far, &constant(0.1), &cal(), &scenario(Mode::CommuteOnly)), Err(EngineError::Battery(BatteryError::InfeasibleCommute { .. }))));
    let overlong = profile(9, 120.0, 0.5, 10.0);
    assert!(matches!(YearPlan::new(&overlong, &constant(0.1), &cal()), Err(EngineError::DayDoesNotClose { .. })));
}

#[test]
fn two_leg_reserve_sells_less() {
    let p = profile(9, 40.0, 0.5, 20.0);
    let plan = YearPlan::new(&p, &constant(0.1), &cal()).unwrap();
    let one = plan.run(&scenario(Mode::PriceTaker)).unwrap();
    let two = plan.run(&ScenarioConfig { reserve_legs: 2, ..scenario(Mode::PriceTaker) }).unwrap();
    assert!(two.kwh_sold < one.kwh_sold);
}

#[test]
fn deterministic_bits() {
    let p = profile(7, 42.0, 0.6, 18.0);
    let prices = noisy(5);
    let sc = scenario(Mode::Osp).with_selling_price(0.045);
    let a = simulate_year(&p, &prices, &cal(), &sc).unwrap();
    let b = simulate_year(&p, &prices, &cal(), &sc).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    assert_eq!(a.net.to_bits(), b.net.to_bits());
}

#[test]
fn mode_round_trips_through_strings() {
    for m in [Mode::PriceTaker, Mode::Osp, Mode::CommuteOnly] {
        assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
    }
    assert!("v2g".parse::<Mode>().is_err());
}

fn arb_profile() -> impl Strategy<Value = UserProfile> {
    (0u32..24, 1.0f64..70.0, 0.0f64..2.0, 0.0f64..45.0, prop::sample::select(vec![(40.0, 150.0), (60.0, 238.0), (75.0, 310.0), (100.0, 370.0)]), 1u32..=3, 0u32..49)
        .prop_map(|(t_w, weekly, ct, miles, (cap, range), vw, vs)| UserProfile {
            rng_seed: 0,
            commute_distance_miles: miles,
            commute_time_hours: ct,
            work_start_hour: t_w,
            weekly_hours: weekly,
            vacation_weeks: vw,
            vacation_start_week: vs,
            ev_model: "arb".into(),
            ev_capacity_kwh: cap,
            ev_range_miles: range,
        })
        .prop_filter("feasible", |p| p.check(&FeasibilityRules { dod: 0.9, min_charge_rate_kw: Some(3.3) }).is_ok())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn soc_stays_in_bounds_and_energy_balances(
        p in arb_profile(),
        seed in 0u64..1000,
        mode in prop::sample::select(vec![Mode::PriceTaker, Mode::Osp, Mode::CommuteOnly]),
        threshold in 0.0f64..0.08,
        rate in prop::sample::select(vec![3.3, 11.5, 15.0]),
        eta in prop::sample::select(vec![0.837, 0.9, 0.99]),
        legs in 1u8..=2,
    ) {
        let battery = BatteryParams { one_way_efficiency: eta, charge_rate_kw: rate, discharge_rate_kw: rate, ..BatteryParams::default() };
        let sc = ScenarioConfig { battery, reserve_legs: legs, selling_price: threshold, ..scenario(mode) };
        let plan = YearPlan::new(&p, &noisy(seed), &cal()).unwrap();
        let mut worst = (f64::MAX, f64::MIN);
        let r = plan.run_with(&sc, |_, s| worst = (worst.0.min(s.soc), worst.1.max(s.soc))).unwrap();
        prop_assert!(worst.0 >= 0.1 - 1e-9 && worst.1 <= 1.0 + 1e-9, "soc range {:?}", worst);
        let lhs = (r.final_soc - 1.0) * p.ev_capacity_kwh;
        let rhs = eta * r.kwh_bought - r.kwh_sold / eta - r.kwh_commute;
        prop_assert!((lhs - rhs).abs() < 1e-6, "{} vs {}", lhs, rhs);
        prop_assert_eq!(r.net, r.revenue - r.energy_cost - r.deg_cost);
        if mode == Mode::CommuteOnly {
            prop_assert_eq!(r.kwh_sold, 0.0);
        }
    }

    #[test]
    fn sold_energy_falls_with_selling_price(p in arb_profile(), seed in 0u64..100, a in 0.0f64..0.08, b in 0.0f64..0.08) {
        let plan = YearPlan::new(&p, &noisy(seed), &cal()).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let s_lo = plan.run(&scenario(Mode::Osp).with_selling_price(lo)).unwrap();
        let s_hi = plan.run(&scenario(Mode::Osp).with_selling_price(hi)).unwrap();
        prop_assert!(s_hi.kwh_sold <= s_lo.kwh_sold + 1e-9);
    }

    #[test]
    fn net_falls_with_capital_cost(p in arb_profile(), seed in 0u64..100, c1 in 0.0f64..500.0, c2 in 0.0f64..500.0) {
        let plan = YearPlan::new(&p, &noisy(seed), &cal()).unwrap();
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        let with = |c: f64| ScenarioConfig { battery: BatteryParams { capital_cost_usd_per_kwh: c, ..BatteryParams::default() }, ..scenario(Mode::PriceTaker) };
        prop_assert!(plan.run(&with(hi)).unwrap().net <= plan.run(&with(lo)).unwrap().net);
    }
}
