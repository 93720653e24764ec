//! Closed-form ground truth on diagonal Gaussians.
//!
//! Convolving `N(μ, Σ)` with isotropic noise `N(0, σ² I)` gives
//! `N(μ, Σ + σ² I)`, so spread density ratios stay exact. Finite mixtures are
//! handled by log-sum-exp over components.

use crate::datasets::{gen_gaussian, Dataset, DatasetTag, GaussianSpec};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `(p_in, p_base)` plus the spread noise standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct OraclePair<T> {
    pub p_in: GaussianSpec<T>,
    pub p_base: GaussianSpec<T>,
    pub sigma: T,
}

impl<T: Scalar> OraclePair<T> {
    pub fn new(p_in: GaussianSpec<T>, p_base: GaussianSpec<T>, sigma: T) -> Result<Self> {
        p_in.validate()?;
        p_base.validate()?;
        if p_in.dim() != p_base.dim() {
            return Err(Error::Dimension(format!(
                "p_in has dimension {}, p_base {}",
                p_in.dim(),
                p_base.dim()
            )));
        }
        if !(sigma >= T::zero() && sigma.is_finite()) {
            return Err(Error::Domain(format!("sigma {sigma} must be finite and >= 0")));
        }
        Ok(Self { p_in, p_base, sigma })
    }

    pub fn dim(&self) -> usize {
        self.p_in.dim()
    }

    /// The pair actually seen by the classifier: both variances increased by `σ²`.
    pub fn spread(&self) -> (GaussianSpec<T>, GaussianSpec<T>) {
        (self.p_in.spread(self.sigma), self.p_base.spread(self.sigma))
    }
}

fn check_dim<T: Scalar>(x: &[T], spec: &GaussianSpec<T>) -> Result<()> {
    if x.len() != spec.dim() {
        return Err(Error::Dimension(format!(
            "point has dimension {}, Gaussian {}",
            x.len(),
            spec.dim()
        )));
    }
    Ok(())
}

/// `Σ_d −½·log(2π·var_d) − (x_d − mean_d)² / (2·var_d)`.
pub fn gaussian_logpdf<T: Scalar>(x: &[T], spec: &GaussianSpec<T>) -> Result<T> {
    check_dim(x, spec)?;
    let half = T::of(0.5);
    let two_pi = T::of(2.0 * std::f64::consts::PI);
    Ok(x.iter()
        .zip(&spec.mean)
        .zip(&spec.variance)
        .map(|((&xd, &m), &v)| {
            let d = xd - m;
            -half * (two_pi * v).ln() - d * d / (v + v)
        })
        .sum())
}

/// `log p̃_in(x) − log p̃_base(x)`; with `use_spread` both variances carry `+σ²`.
pub fn analytic_log_ratio<T: Scalar>(x: &[T], pair: &OraclePair<T>, use_spread: bool) -> Result<T> {
    if use_spread {
        let (a, b) = pair.spread();
        Ok(gaussian_logpdf(x, &a)? - gaussian_logpdf(x, &b)?)
    } else {
        Ok(gaussian_logpdf(x, &pair.p_in)? - gaussian_logpdf(x, &pair.p_base)?)
    }
}

/// Bayes-optimal posterior `σ(log-ratio + log(prior / (1 − prior)))`.
pub fn bayes_posterior<T: Scalar>(x: &[T], pair: &OraclePair<T>, prior_p1: T, use_spread: bool) -> Result<T> {
    if !(prior_p1 > T::zero() && prior_p1 < T::one()) {
        return Err(Error::Domain(format!("prior {prior_p1} not in (0,1)")));
    }
    let logit = analytic_log_ratio(x, pair, use_spread)? + (prior_p1 / (T::one() - prior_p1)).ln();
    Ok(crate::classifier::sigmoid(logit))
}

/// Quadratic pairwise AUROC with ½ credit for ties; inputs up to 10⁴ each.
pub fn brute_force_auroc<T: Scalar>(id: &[T], ood: &[T]) -> Result<f64> {
    const MAX: usize = 10_000;
    if id.is_empty() || ood.is_empty() {
        return Err(Error::Empty("brute-force AUROC needs non-empty inputs".into()));
    }
    if id.len() > MAX || ood.len() > MAX {
        return Err(Error::Range(format!(
            "brute-force AUROC limited to {MAX} scores per side, got {} and {}",
            id.len(),
            ood.len()
        )));
    }
    let mut doubled_wins: u64 = 0;
    for &a in id {
        for &b in ood {
            doubled_wins += if a > b {
                2
            } else if a == b {
                1
            } else {
                0
            };
        }
    }
    Ok(doubled_wins as f64 / 2.0 / (id.len() * ood.len()) as f64)
}

/// Finite mixture of diagonal Gaussians with positive weights summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture<T> {
    components: Vec<(T, GaussianSpec<T>)>,
}

impl<T: Scalar> GaussianMixture<T> {
    pub fn new(components: Vec<(T, GaussianSpec<T>)>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Empty("mixture with no components".into()))?;
        let dim = first.1.dim();
        let mut total = T::zero();
        for (w, c) in &components {
            c.validate()?;
            if c.dim() != dim {
                return Err(Error::Dimension("mixture components differ in dimension".into()));
            }
            if !(*w > T::zero()) {
                return Err(Error::Domain(format!("mixture weight {w} must be positive")));
            }
            total += *w;
        }
        if (total - T::one()).abs() > T::of(1e-9) {
            return Err(Error::Domain(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self { components })
    }

    pub fn single(spec: GaussianSpec<T>) -> Result<Self> {
        Self::new(vec![(T::one(), spec)])
    }

    pub fn components(&self) -> &[(T, GaussianSpec<T>)] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].1.dim()
    }

    /// `log Σ_k w_k N(x; μ_k, Σ_k)` by log-sum-exp.
    pub fn log_pdf(&self, x: &[T]) -> Result<T> {
        let terms = self
            .components
            .iter()
            .map(|(w, c)| Ok(w.ln() + gaussian_logpdf(x, c)?))
            .collect::<Result<Vec<T>>>()?;
        let m = terms.iter().copied().fold(T::neg_infinity(), T::max);
        Ok(m + terms.iter().map(|&t| (t - m).exp()).sum::<T>().ln())
    }

    /// Every component convolved with `N(0, σ² I)`.
    pub fn spread(&self, sigma: T) -> Self {
        Self {
            components: self.components.iter().map(|(w, c)| (*w, c.spread(sigma))).collect(),
        }
    }

    /// Mixture of `self` and `other` with weights `a` and `1 − a`.
    pub fn blend(&self, a: T, other: &Self) -> Result<Self> {
        let mut comps: Vec<_> = self.components.iter().map(|(w, c)| (*w * a, c.clone())).collect();
        comps.extend(other.components.iter().map(|(w, c)| (*w * (T::one() - a), c.clone())));
        Self::new(comps)
    }

    /// `n` draws; the component is picked first, then the point.
    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Result<Dataset<T>> {
        if n == 0 {
            return Err(Error::Empty("mixture sample with n = 0".into()));
        }
        let mut items: Vec<Tensor<T>> = Vec::with_capacity(n);
        for _ in 0..n {
            let u = rng.uniform();
            let mut acc = 0.0;
            let mut pick = self.components.len() - 1;
            for (k, (w, _)) in self.components.iter().enumerate() {
                acc += w.as_f64();
                if u < acc {
                    pick = k;
                    break;
                }
            }
            let d = gen_gaussian(&self.components[pick].1, 1, rng)?;
            items.extend(d.into_items());
        }
        Dataset::new("mixture", DatasetTag::Synthetic, items)
    }
}

/// `log p̃_in(x) − log p̃_base(x)` for mixtures spread by `sigma`.
pub fn mixture_log_ratio<T: Scalar>(
    x: &[T],
    p_in: &GaussianMixture<T>,
    p_base: &GaussianMixture<T>,
    sigma: T,
) -> Result<T> {
    Ok(p_in.spread(sigma).log_pdf(x)? - p_base.spread(sigma).log_pdf(x)?)
}

/// Lattice over the box `[min μ_d − 3 s, max μ_d + 3 s]` per dimension, where
/// `s` is the largest component standard deviation. Rows vary the last
/// coordinate fastest.
pub fn test_grid<T: Scalar>(pair: &OraclePair<T>, points_per_axis: usize) -> Result<Vec<Vec<T>>> {
    lattice(&[&pair.p_in, &pair.p_base], points_per_axis)
}

/// [`test_grid`] over every component of both mixtures.
pub fn mixture_test_grid<T: Scalar>(
    p_in: &GaussianMixture<T>,
    p_base: &GaussianMixture<T>,
    points_per_axis: usize,
) -> Result<Vec<Vec<T>>> {
    let specs: Vec<&GaussianSpec<T>> = p_in.components.iter().chain(&p_base.components).map(|(_, c)| c).collect();
    lattice(&specs, points_per_axis)
}

/// Upper bound on the number of lattice points a test grid may hold.
pub const MAX_GRID_POINTS: usize = 4_000_000;

fn lattice<T: Scalar>(specs: &[&GaussianSpec<T>], points_per_axis: usize) -> Result<Vec<Vec<T>>> {
    if points_per_axis < 2 {
        return Err(Error::Range("grid needs at least 2 points per axis".into()));
    }
    let dim = specs[0].dim();
    if specs.iter().any(|s| s.dim() != dim) {
        return Err(Error::Dimension("grid specs differ in dimension".into()));
    }
    let total = u32::try_from(dim)
        .ok()
        .and_then(|d| points_per_axis.checked_pow(d))
        .filter(|&n| n <= MAX_GRID_POINTS);
    if total.is_none() {
        return Err(Error::Range(format!(
            "grid of {points_per_axis}^{dim} points exceeds the limit of {MAX_GRID_POINTS}"
        )));
    }
    let s_max = specs
        .iter()
        .flat_map(|s| &s.variance)
        .map(|v| v.sqrt())
        .fold(T::zero(), T::max);
    let three = T::of(3.0);
    let axes: Vec<Vec<T>> = (0..dim)
        .map(|d| {
            let lo = specs.iter().map(|s| s.mean[d]).fold(T::infinity(), T::min) - three * s_max;
            let hi = specs.iter().map(|s| s.mean[d]).fold(T::neg_infinity(), T::max) + three * s_max;
            let step = (hi - lo) / T::of((points_per_axis - 1) as f64);
            (0..points_per_axis).map(|i| lo + step * T::of(i as f64)).collect()
        })
        .collect();
    let mut grid = vec![Vec::new()];
    for axis in &axes {
        grid = grid
            .into_iter()
            .flat_map(|prefix: Vec<T>| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    Ok(grid)
}

/// Oracle comparison rows: `x0..,analytic_log_ratio,estimated_log_ratio,abs_err`.
pub fn write_oracle_report_csv<W: std::io::Write>(
    grid: &[Vec<f64>],
    analytic: &[f64],
    estimated: &[f64],
    mut w: W,
) -> std::io::Result<()> {
    let dim = grid.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (0..dim).map(|d| format!("x{d}")).collect();
    header.extend(["analytic_log_ratio", "estimated_log_ratio", "abs_err"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for ((x, a), e) in grid.iter().zip(analytic).zip(estimated) {
        for v in x {
            write!(w, "{v},")?;
        }
        writeln!(w, "{a},{e},{}", (a - e).abs())?;
    }
    Ok(())
}

/// Mean of `|a_i − e_i|`.
pub fn mean_abs_error(analytic: &[f64], estimated: &[f64]) -> Result<f64> {
    if analytic.is_empty() || analytic.len() != estimated.len() {
        return Err(Error::Length {
            context: "mean absolute error".into(),
            detail: format!("{} analytic vs {} estimated values", analytic.len(), estimated.len()),
        });
    }
    Ok(analytic.iter().zip(estimated).map(|(a, e)| (a - e).abs()).sum::<f64>() / analytic.len() as f64)
}
