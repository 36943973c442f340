use serde::{Deserialize, Serialize};

use super::StudyError;

/// Exponential battery-cost trend `c(y) = a * exp(-k * (y - y0))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostProjection {
    /// Cost at the base year, $/kWh.
    pub a: f64,
    /// Decay rate per year.
    pub k: f64,
    pub y0: i32,
}

impl CostProjection {
    pub fn cost(&self, year: i32) -> f64 {
        self.a * (-self.k * (year - self.y0) as f64).exp()
    }

    /// `(year, cost)` for every year in `from..=to`.
    pub fn project(&self, from: i32, to: i32) -> Vec<(i32, f64)> {
        (from..=to).map(|y| (y, self.cost(y))).collect()
    }
}

/// Least-squares fit of `ln c = ln a - k (y - y0)` with `y0` the latest year
/// in `history`.
pub fn fit_battery_cost(history: &[(i32, f64)]) -> Result<CostProjection, StudyError> {
    if history.len() < 3 {
        return Err(StudyError::TooFewPoints(history.len()));
    }
    if let Some(&(year, cost)) = history.iter().find(|(_, c)| !(*c > 0.0 && c.is_finite())) {
        return Err(StudyError::NonPositiveCost { year, cost });
    }
    let y0 = history.iter().map(|&(y, _)| y).max().unwrap();
    let n = history.len() as f64;
    let xs: Vec<f64> = history.iter().map(|&(y, _)| (y - y0) as f64).collect();
    let ls: Vec<f64> = history.iter().map(|&(_, c)| c.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let ml = ls.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(StudyError::TooFewPoints(1));
    }
    let sxl: f64 = xs.iter().zip(&ls).map(|(x, l)| (x - mx) * (l - ml)).sum();
    let slope = sxl / sxx;
    let intercept = ml - slope * mx;
    Ok(CostProjection { a: intercept.exp(), k: -slope, y0 })
}

/// Reads `year,cost_usd_per_kwh` rows.
pub fn load_cost_history(content: &[u8]) -> Result<Vec<(i32, f64)>, StudyError> {
    #[derive(Deserialize)]
    struct Row {
        year: i32,
        cost_usd_per_kwh: f64,
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(content);
    let headers = reader.headers().map_err(|e| StudyError::MalformedHistory { line: 1, reason: e.to_string() })?.clone();
    if headers.iter().collect::<Vec<_>>() != ["year", "cost_usd_per_kwh"] {
        return Err(StudyError::MalformedHistory { line: 1, reason: "expected header `year,cost_usd_per_kwh`".into() });
    }
    reader
        .deserialize::<Row>()
        .enumerate()
        .map(|(i, row)| {
            row.map(|r| (r.year, r.cost_usd_per_kwh)).map_err(|e| StudyError::MalformedHistory { line: i + 2, reason: e.to_string() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    #[test]
    fn recovers_exact_exponential() {
        let truth = CostProjection { a: 156.0, k: 0.18, y0: 2019 };
        let history = truth.project(2010, 2019);
        let fit = fit_battery_cost(&history).unwrap();
        assert!((fit.a - 156.0).abs() < 1e-9 * 156.0);
        assert!((fit.k - 0.18).abs() < 1e-9);
        assert_eq!(fit.y0, 2019);
        for (y, c) in history {
            assert!((fit.cost(y) - c).abs() < 1e-9 * c);
        }
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let history = [(2010, 1183.0), (2011, 917.0), (2012, 721.0), (2013, 663.0), (2014, 588.0), (2015, 384.0), (2016, 290.0), (2017, 219.0), (2018, 180.0), (2019, 156.0)];
        let fit = fit_battery_cost(&history).unwrap();
        let a = DMatrix::from_fn(10, 2, |r, c| if c == 0 { 1.0 } else { (history[r].0 - 2019) as f64 });
        let b = DVector::from_iterator(10, history.iter().map(|h| h.1.ln()));
        let coef = (a.transpose() * &a).try_inverse().unwrap() * a.transpose() * b;
        assert!((fit.a.ln() - coef[0]).abs() < 1e-10);
        assert!((fit.k + coef[1]).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_history() {
        assert!(matches!(fit_battery_cost(&[(2018, 1.0), (2019, 1.0)]), Err(StudyError::TooFewPoints(2))));
        assert!(matches!(fit_battery_cost(&[(2017, 3.0), (2018, 0.0), (2019, 1.0)]), Err(StudyError::NonPositiveCost { year: 2018, .. })));
    }

    #[test]
    fn loads_history_csv() {
        let h = load_cost_history(b"year,cost_usd_per_kwh\n2018,180\n2019,156\n").unwrap();
        assert_eq!(h, vec![(2018, 180.0), (2019, 156.0)]);
        assert!(load_cost_history(b"yr,cost\n2019,1\n").is_err());
        assert!(matches!(load_cost_history(b"year,cost_usd_per_kwh\n2019,abc\n"), Err(StudyError::MalformedHistory { line: 2, .. })));
    }

    proptest! {
        #[test]
        fn projection_decreases_when_k_positive(a in 1.0f64..2000.0, k in 1e-4f64..1.0) {
            let p = CostProjection { a, k, y0: 2019 };
            let rows = p.project(2020, 2050);
            prop_assert_eq!(rows.len(), 31);
            prop_assert!(rows.windows(2).all(|w| w[1].1 < w[0].1 && w[1].1 > 0.0));
        }
    }
}
