//! Zero-mean Gaussian process on the unit interval with a squared-exponential kernel.

use statrs::function::erf::erfc;

const MAX_JITTER_TRIES: usize = 8;

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    xs: Vec<f64>,
    length_scale: f64,
    chol: Vec<Vec<f64>>,
    alpha: Vec<f64>,
}

impl GaussianProcess {
    /// Fits the GP to standardized targets `ys` observed at `xs`.
    ///
    /// The diagonal gets `noise` added; if the factorization still fails the
    /// regularizer is raised tenfold a few times before giving up.
    pub fn fit(xs: &[f64], ys: &[f64], length_scale: f64, noise: f64) -> Option<Self> {
        let mut jitter = noise.max(f64::EPSILON);
        for _ in 0..MAX_JITTER_TRIES {
            let k: Vec<Vec<f64>> = xs
                .iter()
                .enumerate()
                .map(|(i, &a)| xs.iter().enumerate().map(|(j, &b)| kernel(a, b, length_scale) + if i == j { jitter } else { 0.0 }).collect())
                .collect();
            if let Some(chol) = cholesky(&k) {
                let alpha = back_substitute(&chol, &forward_substitute(&chol, ys));
                return Some(Self { xs: xs.to_vec(), length_scale, chol, alpha });
            }
            jitter *= 10.0;
        }
        None
    }

    /// Posterior mean and standard deviation at `x`.
    pub fn predict(&self, x: f64) -> (f64, f64) {
        let k: Vec<f64> = self.xs.iter().map(|&xi| kernel(x, xi, self.length_scale)).collect();
        let mean = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = forward_substitute(&self.chol, &k);
        let var = 1.0 - v.iter().map(|t| t * t).sum::<f64>();
        (mean, var.max(0.0).sqrt())
    }
}

pub fn kernel(a: f64, b: f64, length_scale: f64) -> f64 {
    let d = (a - b) / length_scale;
    (-0.5 * d * d).exp()
}

/// Median of all pairwise distances; `floor` when fewer than two points.
pub fn median_pairwise_distance(xs: &[f64], floor: f64) -> f64 {
    let mut d: Vec<f64> = Vec::with_capacity(xs.len() * xs.len().saturating_sub(1) / 2);
    for (i, a) in xs.iter().enumerate() {
        for b in &xs[i + 1..] {
            d.push((a - b).abs());
        }
    }
    if d.is_empty() {
        return floor;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    median.max(floor)
}

/// Expected improvement of a maximization over `best`.
pub fn expected_improvement(mean: f64, sd: f64, best: f64) -> f64 {
    let gain = mean - best;
    if sd <= 0.0 {
        return gain.max(0.0);
    }
    let z = gain / sd;
    let cdf = 0.5 * erfc(-z / std::f64::consts::SQRT_2);
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (gain * cdf + sd * pdf).max(0.0)
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solves `L y = b`.
fn forward_substitute(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; b.len()];
    for i in 0..b.len() {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    y
}

/// Solves `L^T x = y`.
fn back_substitute(l: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}
