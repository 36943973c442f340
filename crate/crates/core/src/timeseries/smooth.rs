//! Savitzky-Golay smoothing for reporting-quality price curves.
//!
//! Smoothed prices never feed the cash-flow simulation.

use super::{PriceSeries, TimeseriesError};

/// How points within half a window of either end are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeMode {
    /// Evaluate the least-squares polynomial of the first (last) full window
    /// at the edge point. Exact on polynomials up to the filter order.
    #[default]
    PolynomialFit,
    /// Reflect the series about its end samples (without repeating them) and
    /// filter the padded series.
    Mirror,
}

/// Weights `h` such that `sum(h[j] * y[j])` over a window of length `window`
/// is the order-`poly_order` least-squares fit evaluated at `target`
/// (an offset from the window centre, in samples).
pub fn savitzky_golay_coefficients(window: usize, poly_order: usize, target: isize) -> Vec<f64> {
    let half = (window / 2) as isize;
    let scale = half.max(1) as f64;
    let xs: Vec<f64> = (-half..=half).map(|j| j as f64 / scale).collect();
    let terms = poly_order + 1;

    // Normal equations (A^T A) z = a(target), then h = A z.
    let mut gram = vec![vec![0.0; terms]; terms];
    for &x in &xs {
        let powers = monomials(x, terms);
        for r in 0..terms {
            for c in 0..terms {
                gram[r][c] += powers[r] * powers[c];
            }
        }
    }
    let z = solve(gram, monomials(target as f64 / scale, terms));
    xs.iter().map(|&x| monomials(x, terms).iter().zip(&z).map(|(p, zi)| p * zi).sum()).collect()
}

fn monomials(x: f64, terms: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(terms);
    let mut p = 1.0;
    for _ in 0..terms {
        out.push(p);
        p *= x;
    }
    out
}

/// Gaussian elimination with partial pivoting; `a` is small and non-singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

fn check_window(window: usize, poly_order: usize, len: usize) -> Result<(), TimeseriesError> {
    if window % 2 == 0 || window <= poly_order || window > len {
        return Err(TimeseriesError::InvalidWindow { window, poly_order, len });
    }
    Ok(())
}

/// Savitzky-Golay filter of a raw sample vector; output has the input length.
pub fn smooth_values(values: &[f64], window: usize, poly_order: usize, edges: EdgeMode) -> Result<Vec<f64>, TimeseriesError> {
    check_window(window, poly_order, values.len())?;
    let n = values.len();
    let half = window / 2;
    let centre = savitzky_golay_coefficients(window, poly_order, 0);
    let dot = |h: &[f64], from: usize| h.iter().zip(&values[from..from + window]).map(|(a, b)| a * b).sum::<f64>();

    let mut out = vec![0.0; n];
    for i in half..n - half {
        out[i] = dot(&centre, i - half);
    }
    match edges {
        EdgeMode::PolynomialFit => {
            for i in 0..half {
                let head = savitzky_golay_coefficients(window, poly_order, i as isize - half as isize);
                out[i] = dot(&head, 0);
                let tail = savitzky_golay_coefficients(window, poly_order, half as isize - i as isize);
                out[n - 1 - i] = dot(&tail, n - window);
            }
        }
        EdgeMode::Mirror => {
            let at = |k: isize| -> f64 {
                let last = n as isize - 1;
                let idx = if k < 0 {
                    -k
                } else if k > last {
                    2 * last - k
                } else {
                    k
                };
                values[idx.clamp(0, last) as usize]
            };
            for i in (0..half).chain(n - half..n) {
                out[i] = centre.iter().enumerate().map(|(j, h)| h * at(i as isize + j as isize - half as isize)).sum();
            }
        }
    }
    Ok(out)
}

/// Smoothed copy of `series`, tagged with a `_smoothed` city suffix.
pub fn smooth_prices(series: &PriceSeries, window: usize, poly_order: usize) -> Result<PriceSeries, TimeseriesError> {
    let smoothed = smooth_values(series.prices(), window, poly_order, EdgeMode::PolynomialFit)?;
    series.with_prices(format!("{}_smoothed", series.city_id()), smoothed)
}
