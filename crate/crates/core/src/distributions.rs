//! Positive-integer duration laws: geometric, discrete Weibull and a
//! zeta-tailed (discrete Pareto) family.
//!
//! Every family is defined through its tail `P(X >= k)`; the pmf is the
//! difference of consecutive tail values (for the geometric law, the exact
//! product `p P(X >= k)`).
//! The residual (equilibrium) law has pmf `ccdf(k) / mean`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};
use thiserror::Error;

/// Relative size of the last summed tail term at which series are cut off.
pub const SERIES_REL_TOL: f64 = 1e-13;
/// Terms summed directly before the remaining Weibull tail is closed by an
/// Euler-Maclaurin integral.
pub const DIRECT_TERMS: u64 = 4096;
/// Smallest admissible zeta exponent.
pub const ZETA_MIN_ALPHA: f64 = 1.05;

const INVERT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("invalid {family} parameter: {reason}")]
    InvalidParameter {
        family: &'static str,
        reason: String,
    },
    #[error("mean series for {0} did not converge")]
    NonconvergentMean(String),
    #[error("target mean {target} outside the attainable range {range} of the {family} family")]
    MeanOutOfRange {
        family: &'static str,
        target: f64,
        range: String,
    },
    #[error("inconsistent moments: {0}")]
    InconsistentMoments(String),
}

/// A validated duration law on `{1, 2, ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistSpec", into = "RawDistSpec")]
pub enum DistSpec {
    /// `P(X >= k) = (1 - p)^(k - 1)`.
    Geometric { p: f64 },
    /// `P(X >= k) = exp(-lambda (k - 1)^alpha)`.
    DiscreteWeibull { lambda: f64, alpha: f64 },
    /// `P(X >= k) = k^(-alpha)`, so that the mean equals `zeta(alpha)`.
    Zeta { alpha: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "lowercase")]
#[serde(deny_unknown_fields)]
enum RawDistSpec {
    Geometric {
        p: f64,
    },
    Weibull {
        lambda: f64,
        alpha: f64,
    },
    Zeta {
        alpha: f64,
    },
}

impl TryFrom<RawDistSpec> for DistSpec {
    type Error = DistError;

    fn try_from(raw: RawDistSpec) -> Result<Self, Self::Error> {
        match raw {
            RawDistSpec::Geometric { p } => DistSpec::geometric(p),
            RawDistSpec::Weibull { lambda, alpha } => DistSpec::weibull(lambda, alpha),
            RawDistSpec::Zeta { alpha } => DistSpec::zeta(alpha),
        }
    }
}

impl From<DistSpec> for RawDistSpec {
    fn from(d: DistSpec) -> Self {
        match d {
            DistSpec::Geometric { p } => RawDistSpec::Geometric { p },
            DistSpec::DiscreteWeibull { lambda, alpha } => RawDistSpec::Weibull { lambda, alpha },
            DistSpec::Zeta { alpha } => RawDistSpec::Zeta { alpha },
        }
    }
}

fn invalid(family: &'static str, reason: impl Into<String>) -> DistError {
    DistError::InvalidParameter {
        family,
        reason: reason.into(),
    }
}

impl DistSpec {
    pub fn geometric(p: f64) -> Result<Self, DistError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid("geometric", format!("p = {p} not in (0, 1)")));
        }
        Ok(DistSpec::Geometric { p })
    }

    pub fn weibull(lambda: f64, alpha: f64) -> Result<Self, DistError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("weibull", format!("lambda = {lambda} must be positive")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("weibull", format!("alpha = {alpha} must be positive")));
        }
        Ok(DistSpec::DiscreteWeibull { lambda, alpha })
    }

    pub fn zeta(alpha: f64) -> Result<Self, DistError> {
        if !(alpha >= ZETA_MIN_ALPHA && alpha.is_finite()) {
            return Err(invalid(
                "zeta",
                format!("alpha = {alpha} must be at least {ZETA_MIN_ALPHA}"),
            ));
        }
        Ok(DistSpec::Zeta { alpha })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            DistSpec::Geometric { .. } => "geometric",
            DistSpec::DiscreteWeibull { .. } => "weibull",
            DistSpec::Zeta { .. } => "zeta",
        }
    }

    /// `P(X >= k)`. `k = 0` is treated as `k = 1`.
    pub fn ccdf(&self, k: u64) -> f64 {
        if k <= 1 {
            return 1.0;
        }
        let km1 = (k - 1) as f64;
        match *self {
            DistSpec::Geometric { p } => (1.0 - p).powf(km1),
            DistSpec::DiscreteWeibull { lambda, alpha } => (-lambda * km1.powf(alpha)).exp(),
            DistSpec::Zeta { alpha } => (k as f64).powf(-alpha),
        }
    }

    /// `P(X = k)`, zero for `k = 0`.
    pub fn pmf(&self, k: u64) -> f64 {
        match *self {
            _ if k == 0 => 0.0,
            // same expression as the residual pmf, so the two agree exactly
            DistSpec::Geometric { p } => p * self.ccdf(k),
            _ => self.ccdf(k) - self.ccdf(k + 1),
        }
    }

    /// `E X = sum_{k >= 1} P(X >= k)`.
    pub fn mean(&self) -> Result<f64, DistError> {
        match *self {
            DistSpec::Geometric { p } => Ok(1.0 / p),
            DistSpec::DiscreteWeibull { lambda, alpha } => weibull_tail_sum(lambda, alpha, f64::INFINITY, None)
                .map_err(|_| DistError::NonconvergentMean(self.to_string())),
            DistSpec::Zeta { alpha } => Ok(zeta(alpha)),
        }
    }

    /// Equilibrium pmf `ccdf(k) / mean`.
    pub fn residual_pmf(&self, k: u64) -> Result<f64, DistError> {
        match *self {
            _ if k == 0 => Ok(0.0),
            DistSpec::Geometric { p } => Ok(p * self.ccdf(k)),
            _ => Ok(self.ccdf(k) / self.mean()?),
        }
    }

    /// Draws a duration by inverting the tail on a uniform in `(0, 1]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u = open_uniform(rng);
        match *self {
            DistSpec::Geometric { p } => {
                let x = u.ln() / (1.0 - p).ln();
                1 + to_count(x.floor())
            }
            DistSpec::DiscreteWeibull { lambda, alpha } => {
                let x = (-u.ln() / lambda).powf(1.0 / alpha);
                1 + to_count(x.floor())
            }
            DistSpec::Zeta { alpha } => to_count(u.powf(-1.0 / alpha).floor()).max(1),
        }
    }

    /// Draws from the residual law. Prefer [`ResidualView`] when sampling
    /// repeatedly, since this rebuilds the view on every call.
    pub fn sample_residual<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64, DistError> {
        Ok(ResidualView::new(*self)?.sample_residual(rng))
    }
}

impl std::fmt::Display for DistSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DistSpec::Geometric { p } => write!(f, "G({p})"),
            DistSpec::DiscreteWeibull { lambda, alpha } => write!(f, "W({lambda}, {alpha})"),
            DistSpec::Zeta { alpha } => write!(f, "Zeta({alpha})"),
        }
    }
}

fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Saturating float to count conversion; durations beyond `2^62` are frozen
/// for any practical horizon.
fn to_count(x: f64) -> u64 {
    const CAP: f64 = (1u64 << 62) as f64;
    if x.is_nan() || x <= 0.0 {
        0
    } else if x >= CAP {
        1 << 62
    } else {
        x as u64
    }
}

/// Sums `exp(-lambda (k-1)^alpha)` over `k >= 1`. When `prefix` is given,
/// the directly summed partial sums are recorded. Once the sum passes `cap`,
/// or the tail is not finite, returns the (possibly infinite) sum so far as
/// the error value.
fn weibull_tail_sum(
    lambda: f64,
    alpha: f64,
    cap: f64,
    mut prefix: Option<&mut Vec<f64>>,
) -> Result<f64, f64> {
    let mut sum = 0.0;
    let mut k: u64 = 1;
    loop {
        let km1 = (k - 1) as f64;
        let term = (-lambda * km1.powf(alpha)).exp();
        sum += term;
        if let Some(p) = prefix.as_deref_mut() {
            p.push(sum);
        }
        if sum > cap {
            return Err(sum);
        }
        if k >= 2 {
            // integral tail of exp(-lambda x^alpha) beyond x = k-1 is roughly
            // term * x^(1-alpha) / (lambda alpha) when alpha < 1
            let spread = if alpha < 1.0 {
                (km1.powf(1.0 - alpha) / (lambda * alpha)).max(1.0)
            } else {
                1.0 / (1.0 - (-lambda).exp()).max(1e-300)
            };
            if term * spread < SERIES_REL_TOL * sum {
                return Ok(sum);
            }
        }
        if k >= DIRECT_TERMS {
            let total = sum + weibull_tail_from(lambda, alpha, k as f64);
            return if total.is_finite() && total <= cap {
                Ok(total)
            } else {
                Err(if total.is_nan() { f64::INFINITY } else { total })
            };
        }
        k += 1;
    }
}

/// `sum_{x = a, a+1, ...} exp(-lambda x^alpha)` by Euler-Maclaurin: the
/// integral (an upper incomplete gamma function) plus
/// `f(a)/2 - f'(a)/12 + f'''(a)/720`. Accurate for large `a`.
pub fn weibull_tail_from(lambda: f64, alpha: f64, a: f64) -> f64 {
    let y = lambda * a.powf(alpha);
    let f = (-y).exp();
    // derivatives of y = lambda x^alpha at a
    let d1 = alpha * y / a;
    let d2 = (alpha - 1.0) * d1 / a;
    let d3 = (alpha - 2.0) * d2 / a;
    let f1 = -d1 * f;
    let f3 = (-d1.powi(3) + 3.0 * d1 * d2 - d3) * f;
    let s = 1.0 / alpha;
    let q = gamma_ur(s, y);
    let integral = if q > 0.0 {
        (ln_gamma(s) + q.ln() - s * lambda.ln()).exp() / alpha
    } else {
        0.0
    };
    integral + 0.5 * f - f1 / 12.0 + f3 / 720.0
}

/// `sum_{j >= start} j^(-alpha)` for `alpha > 1` by direct summation up to a
/// cut-off followed by the Euler-Maclaurin tail.
pub fn hurwitz_tail(alpha: f64, start: u64) -> f64 {
    const CUT: u64 = 32;
    let mut head = 0.0;
    let mut j = start.max(1);
    while j < CUT {
        head += (j as f64).powf(-alpha);
        j += 1;
    }
    let m = j as f64;
    let a = alpha;
    let mut tail = m.powf(1.0 - a) / (a - 1.0) + 0.5 * m.powf(-a);
    // Bernoulli corrections B2/2!, B4/4!, B6/6!
    let mut rising = a;
    tail += rising * m.powf(-a - 1.0) / 12.0;
    rising *= (a + 1.0) * (a + 2.0);
    tail -= rising * m.powf(-a - 3.0) / 720.0;
    rising *= (a + 3.0) * (a + 4.0);
    tail += rising * m.powf(-a - 5.0) / 30240.0;
    head + tail
}

/// Riemann zeta for real `alpha > 1`.
pub fn zeta(alpha: f64) -> f64 {
    hurwitz_tail(alpha, 1)
}

/// A duration law together with its mean and the data needed to draw from
/// its residual (equilibrium) law.
#[derive(Debug, Clone)]
pub struct ResidualView {
    base: DistSpec,
    mean: f64,
    /// Cumulative tail sums `sum_{j <= k} ccdf(j)`; populated for Weibull only.
    prefix: Vec<f64>,
}

impl ResidualView {
    pub fn new(base: DistSpec) -> Result<Self, DistError> {
        let mut prefix = Vec::new();
        let mean = match base {
            DistSpec::DiscreteWeibull { lambda, alpha } => {
                weibull_tail_sum(lambda, alpha, f64::INFINITY, Some(&mut prefix))
                    .map_err(|_| DistError::NonconvergentMean(base.to_string()))?
            }
            _ => base.mean()?,
        };
        Ok(ResidualView { base, mean, prefix })
    }

    pub fn base(&self) -> &DistSpec {
        &self.base
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `f-bar(k) = ccdf(k) / mean`; `f-bar(1) = 1 / mean` exactly, except
    /// for the geometric law where it is `p` itself.
    pub fn residual_pmf(&self, k: u64) -> f64 {
        match k {
            0 => 0.0,
            _ if matches!(self.base, DistSpec::Geometric { .. }) => self.base.pmf(k),
            1 => 1.0 / self.mean,
            _ => self.base.ccdf(k) / self.mean,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.base.sample(rng)
    }

    pub fn sample_residual<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self.base {
            // memoryless: the residual law is the law itself
            DistSpec::Geometric { .. } => self.base.sample(rng),
            DistSpec::DiscreteWeibull { lambda, alpha } => {
                let target = open_uniform(rng) * self.mean;
                let idx = self.prefix.partition_point(|&s| s < target);
                if idx < self.prefix.len() {
                    return idx as u64 + 1;
                }
                // smallest k whose remaining tail sum_{x >= k} fits the budget
                let budget = self.mean - target;
                let fits = |k: u64| weibull_tail_from(lambda, alpha, k as f64) <= budget;
                let (mut lo, mut hi) = (self.prefix.len() as u64, 2 * self.prefix.len() as u64);
                while !fits(hi) {
                    if hi >= 1 << 61 {
                        return 1 << 62;
                    }
                    lo = hi;
                    hi *= 2;
                }
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if fits(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
            DistSpec::Zeta { alpha } => {
                // smallest k with sum_{j > k} j^-alpha <= (1 - u) zeta(alpha)
                let budget = (1.0 - open_uniform(rng)) * self.mean;
                if budget <= 0.0 {
                    return 1;
                }
                let fits = |k: u64| hurwitz_tail(alpha, k + 1) <= budget;
                if fits(1) {
                    return 1;
                }
                let (mut lo, mut hi) = (1u64, 2u64);
                while !fits(hi) {
                    if hi >= 1 << 61 {
                        return 1 << 62;
                    }
                    lo = hi;
                    hi *= 2;
                }
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if fits(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    }
}

/// A parametric family with any fixed parameters, used to map an estimated
/// mean back to a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum Family {
    Geometric,
    /// `lambda: None` means the scale is unknown and must be estimated jointly
    /// with the shape from the mean and `f-bar(2)`.
    Weibull {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
    },
    Zeta,
}

impl Family {
    pub fn of(d: &DistSpec, free_lambda: bool) -> Family {
        match *d {
            DistSpec::Geometric { .. } => Family::Geometric,
            DistSpec::DiscreteWeibull { lambda, .. } => Family::Weibull {
                lambda: (!free_lambda).then_some(lambda),
            },
            DistSpec::Zeta { .. } => Family::Zeta,
        }
    }

    pub fn has_free_scale(&self) -> bool {
        matches!(self, Family::Weibull { lambda: None })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Geometric => "geometric",
            Family::Weibull { .. } => "weibull",
            Family::Zeta => "zeta",
        }
    }
}

/// Finds the member of `family` whose mean equals `target_mean`.
pub fn invert_mean(family: &Family, target_mean: f64) -> Result<DistSpec, DistError> {
    if !target_mean.is_finite() {
        return Err(DistError::MeanOutOfRange {
            family: family.name(),
            target: target_mean,
            range: "finite".into(),
        });
    }
    match *family {
        Family::Geometric => {
            if target_mean <= 1.0 {
                return Err(DistError::MeanOutOfRange {
                    family: "geometric",
                    target: target_mean,
                    range: "(1, inf)".into(),
                });
            }
            DistSpec::geometric(1.0 / target_mean)
        }
        Family::Weibull { lambda: Some(lambda) } => {
            let alpha = weibull_alpha_for_mean(lambda, target_mean)?;
            DistSpec::weibull(lambda, alpha)
        }
        Family::Weibull { lambda: None } => Err(DistError::InconsistentMoments(
            "weibull scale is free; use weibull_from_mean_and_tail".into(),
        )),
        Family::Zeta => {
            let top = zeta(ZETA_MIN_ALPHA);
            if target_mean <= 1.0 || target_mean > top {
                return Err(DistError::MeanOutOfRange {
                    family: "zeta",
                    target: target_mean,
                    range: format!("(1, {top}]"),
                });
            }
            // zeta is decreasing in alpha
            let mut lo = ZETA_MIN_ALPHA;
            let mut hi = 2.0;
            while zeta(hi) > target_mean {
                lo = hi;
                hi *= 2.0;
            }
            let alpha = bisect_decreasing(lo, hi, target_mean, |a| Ok(zeta(a)))?;
            DistSpec::zeta(alpha)
        }
    }
}

/// Shape `alpha` such that `mean(W(lambda, alpha)) = target`.
fn weibull_alpha_for_mean(lambda: f64, target: f64) -> Result<f64, DistError> {
    let floor = 1.0 + (-lambda).exp();
    if target <= floor {
        return Err(DistError::MeanOutOfRange {
            family: "weibull",
            target,
            range: format!("({floor}, inf) at lambda = {lambda}"),
        });
    }
    // Budget exhaustion only happens for tiny shapes, where the mean is
    // enormous; report it as exceeding the target when the partial sum does.
    let mean_at = |a: f64| match weibull_tail_sum(lambda, a, target, None) {
        Ok(m) => Ok(m),
        Err(partial) if partial > target => Ok(f64::INFINITY),
        Err(_) => Err(DistError::NonconvergentMean(format!("W({lambda}, {a})"))),
    };
    let mut lo = 1.0;
    while mean_at(lo)? <= target {
        lo /= 2.0;
        if lo < 1e-3 {
            return Err(DistError::MeanOutOfRange {
                family: "weibull",
                target,
                range: format!("attainable means at lambda = {lambda} with alpha >= 1e-3"),
            });
        }
    }
    let mut hi = lo * 2.0;
    while mean_at(hi)? > target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(DistError::MeanOutOfRange {
                family: "weibull",
                target,
                range: format!("({floor}, inf) at lambda = {lambda}"),
            });
        }
    }
    bisect_decreasing(lo, hi, target, mean_at)
}

/// Bisection for a strictly decreasing `f` with `f(lo) > target >= f(hi)`.
fn bisect_decreasing<F>(mut lo: f64, mut hi: f64, target: f64, f: F) -> Result<f64, DistError>
where
    F: Fn(f64) -> Result<f64, DistError>,
{
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) <= INVERT_TOL * mid * 1e-3 {
            break;
        }
        if f(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Recovers `(lambda, alpha)` of a discrete Weibull law from its mean and its
/// residual pmf at 2, using `f-bar(2) = exp(-lambda) / mean`.
pub fn weibull_from_mean_and_tail(mu: f64, fbar2: f64) -> Result<(f64, f64), DistError> {
    if !(mu > 1.0) {
        return Err(DistError::InconsistentMoments(format!("mean {mu} must exceed 1")));
    }
    let survival = fbar2 * mu;
    if !(survival > 0.0 && survival < 1.0) {
        return Err(DistError::InconsistentMoments(format!(
            "f-bar(2) * mean = {survival} must lie in (0, 1)"
        )));
    }
    let lambda = -survival.ln();
    let alpha = weibull_alpha_for_mean(lambda, mu).map_err(|e| match e {
        DistError::MeanOutOfRange { .. } => DistError::InconsistentMoments(format!(
            "no shape attains mean {mu} at lambda = {lambda}"
        )),
        other => other,
    })?;
    Ok((lambda, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brute_zeta(a: f64) -> f64 {
        // pairwise-ish summation from the small end plus integral remainder
        let n = 2_000_000u64;
        let mut s = 0.0;
        for k in (1..=n).rev() {
            s += (k as f64).powf(-a);
        }
        s + (n as f64 + 0.5).powf(1.0 - a) / (a - 1.0)
    }

    #[test]
    fn ccdf_examples() {
        assert_eq!(DistSpec::geometric(0.5).unwrap().ccdf(3), 0.25);
        let w = DistSpec::weibull(1.5, 0.5).unwrap();
        assert_eq!(w.ccdf(1), 1.0);
        assert!((w.ccdf(2) - 0.22313016014842982).abs() < 1e-15);
    }

    #[test]
    fn pmf_examples() {
        let g = DistSpec::geometric(0.4).unwrap();
        assert!((g.pmf(1) - 0.4).abs() < 1e-15);
        assert!((g.pmf(2) - 0.24).abs() < 1e-15);
        // tail k^-2: P(X = 1) = 1 - 1/4
        let z = DistSpec::zeta(2.0).unwrap();
        assert!((z.pmf(1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn mean_examples() {
        assert!((DistSpec::geometric(0.3).unwrap().mean().unwrap() - 10.0 / 3.0).abs() < 1e-14);
        let w = DistSpec::weibull(1.5, 0.5).unwrap().mean().unwrap();
        let oracle: f64 = (1..200_000u64).map(|k| (-1.5 * ((k - 1) as f64).sqrt()).exp()).sum();
        assert!((w - oracle).abs() < 1e-12, "{w} vs {oracle}");
        let z3 = DistSpec::zeta(3.0).unwrap().mean().unwrap();
        assert!((z3 - 1.2020569031595942).abs() < 1e-13);
    }

    #[test]
    fn zeta_matches_brute_force() {
        for a in [1.05, 1.3, 2.0, 3.5] {
            let z = zeta(a);
            let b = brute_zeta(a);
            assert!((z - b).abs() < 1e-9 * b, "alpha={a}: {z} vs {b}");
        }
        assert!((zeta(2.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-14);
    }

    #[test]
    fn residual_examples() {
        let g = DistSpec::geometric(0.5).unwrap();
        assert!((g.residual_pmf(1).unwrap() - 0.5).abs() < 1e-15);
        let w = DistSpec::weibull(1.5, 0.5).unwrap();
        let mu = w.mean().unwrap();
        assert!((w.residual_pmf(2).unwrap() - (-1.5f64).exp() / mu).abs() < 1e-15);
        for d in [g, w, DistSpec::zeta(1.7).unwrap()] {
            let view = ResidualView::new(d).unwrap();
            assert_eq!(view.residual_pmf(1), 1.0 / d.mean().unwrap());
        }
    }

    #[test]
    fn residual_pmf_normalizes() {
        for d in [
            DistSpec::geometric(0.3).unwrap(),
            DistSpec::weibull(1.5, 0.5).unwrap(),
            DistSpec::weibull(0.5, 2.0).unwrap(),
        ] {
            let view = ResidualView::new(d).unwrap();
            let total: f64 = (1..100_000).map(|k| view.residual_pmf(k)).sum();
            assert!((total - 1.0).abs() < 1e-10, "{d}: {total}");
        }
    }

    #[test]
    fn invert_mean_examples() {
        let g = invert_mean(&Family::Geometric, 2.5).unwrap();
        assert_eq!(g, DistSpec::Geometric { p: 0.4 });

        let target = DistSpec::weibull(1.5, 0.5).unwrap().mean().unwrap();
        match invert_mean(&Family::Weibull { lambda: Some(1.5) }, target).unwrap() {
            DistSpec::DiscreteWeibull { alpha, .. } => assert!((alpha - 0.5).abs() < 1e-9),
            other => panic!("{other}"),
        }

        let target = brute_zeta(2.0);
        match invert_mean(&Family::Zeta, target).unwrap() {
            DistSpec::Zeta { alpha } => assert!((alpha - 2.0).abs() < 1e-8, "{alpha}"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn invert_mean_rejects_unreachable_targets() {
        let fam = Family::Weibull { lambda: Some(1.5) };
        assert!(matches!(
            invert_mean(&fam, 1.0 + (-1.5f64).exp()),
            Err(DistError::MeanOutOfRange { .. })
        ));
        assert!(matches!(invert_mean(&Family::Geometric, 1.0), Err(DistError::MeanOutOfRange { .. })));
        assert!(matches!(invert_mean(&Family::Zeta, 50.0), Err(DistError::MeanOutOfRange { .. })));
    }

    #[test]
    fn weibull_joint_recovery() {
        let mu = DistSpec::weibull(1.5, 0.5).unwrap().mean().unwrap();
        let (l, a) = weibull_from_mean_and_tail(mu, (-1.5f64).exp() / mu).unwrap();
        assert!((l - 1.5).abs() < 1e-9);
        assert!((a - 0.5).abs() < 1e-9);
        assert!(matches!(
            weibull_from_mean_and_tail(2.0, 0.5),
            Err(DistError::InconsistentMoments(_))
        ));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(DistSpec::geometric(0.0).is_err());
        assert!(DistSpec::geometric(1.0).is_err());
        assert!(DistSpec::weibull(-1.0, 0.5).is_err());
        assert!(DistSpec::zeta(1.01).is_err());
    }

    #[test]
    fn json_schema() {
        let d: DistSpec = serde_json::from_str(r#"{"family":"weibull","params":{"lambda":1.5,"alpha":0.5}}"#).unwrap();
        assert_eq!(d, DistSpec::DiscreteWeibull { lambda: 1.5, alpha: 0.5 });
        assert_eq!(
            serde_json::to_string(&DistSpec::Geometric { p: 0.3 }).unwrap(),
            r#"{"family":"geometric","params":{"p":0.3}}"#
        );
        assert!(serde_json::from_str::<DistSpec>(r#"{"family":"geometric","params":{"p":1.5}}"#).is_err());
        assert!(serde_json::from_str::<DistSpec>(r#"{"family":"geometric","params":{"p":0.5,"q":1}}"#).is_err());
    }

    #[test]
    fn degenerate_samplers() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = DistSpec::geometric(1.0 - 1e-12).unwrap();
        assert!((0..1000).all(|_| g.sample(&mut rng) == 1));
        let w = ResidualView::new(DistSpec::weibull(800.0, 1.0).unwrap()).unwrap();
        assert!((0..1000).all(|_| w.sample_residual(&mut rng) == 1));
    }

    #[test]
    fn zeta_residual_sampler_hits_small_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let view = ResidualView::new(DistSpec::zeta(3.0).unwrap()).unwrap();
        let n = 200_000;
        let ones = (0..n).filter(|_| view.sample_residual(&mut rng) == 1).count();
        let p = view.residual_pmf(1);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!(((ones as f64 / n as f64) - p).abs() < 4.0 * se);
    }
}
