//! Closed-form moments of the observed subgraph counts and streaming
//! estimators of their empirical counterparts.
//!
//! All formulas take plain probabilities ([`DynamicProfile`]) rather than
//! distributions, so the estimator can solve for those probabilities
//! directly.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph_dynamics::{PreparedModel, StationaryProfile};
use crate::subgraph_counts::{a_coeff, binomial, edges_in_clique, SubgraphKind};

/// Number of batches used for batch-means standard errors.
pub const BATCH_COUNT: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentError {
    #[error("no closed form for {0}")]
    Unsupported(MomentSpec),
    #[error("{0} requires {1}, which the profile does not carry")]
    MissingQuantity(MomentSpec, &'static str),
    #[error("{kind} needs order {order} but the graph has only {n} vertices")]
    OrderTooLarge {
        kind: SubgraphKind,
        order: usize,
        n: usize,
    },
    #[error("series of length {t} is too short for lag {lag}")]
    InsufficientData { t: usize, lag: u8 },
}

/// A subgraph count at a lag: lag 0 is the mean count, lag `d` the mean of
/// `count(k) * count(k + d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSpec {
    pub kind: SubgraphKind,
    pub lag: u8,
}

impl MomentSpec {
    pub fn new(kind: SubgraphKind, lag: u8) -> Self {
        MomentSpec {
            kind: kind.canonical(),
            lag,
        }
    }
}

impl fmt::Display for MomentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind, self.lag)
    }
}

/// Mode persistence over one tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimePersistence {
    /// Probability that different graphs are observed at `k` and `k + 1`.
    pub r_neq: f64,
    /// Probability that graph 1 is observed at both `k` and `k + 1`.
    pub r1: f64,
    pub r2: f64,
    pub hbar1_1: f64,
    pub hbar2_1: f64,
}

impl RegimePersistence {
    pub fn new(pi1: f64, hbar1_1: f64, hbar2_1: f64) -> Self {
        let pi2 = 1.0 - pi1;
        RegimePersistence {
            r_neq: pi1 * hbar1_1 + pi2 * hbar2_1,
            r1: pi1 * (1.0 - hbar1_1),
            r2: pi2 * (1.0 - hbar2_1),
            hbar1_1,
            hbar2_1,
        }
    }

    pub fn r(&self, i: usize) -> f64 {
        [self.r1, self.r2][i]
    }
}

/// Everything the moment formulas need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicProfile {
    pub stationary: StationaryProfile,
    /// Residual on-time pmf at 1, `f-bar_i(1) = 1 / E X_i`.
    pub fbar1: [f64; 2],
    /// Residual on-time pmf at 2; needed only for lag-2 moments.
    pub fbar2: Option<[f64; 2]>,
    /// Off-time pmf at 1, `g_i(1)`; needed only for lag-2 moments.
    pub g1: Option<[f64; 2]>,
    pub persistence: RegimePersistence,
}

impl DynamicProfile {
    /// Profile from the per-graph residual quantities and the residual mode
    /// pmf at 1, `h-bar_i(1) = 1 / E Z_i`.
    pub fn new(stationary: StationaryProfile, fbar1: [f64; 2], hbar1: [f64; 2]) -> Self {
        DynamicProfile {
            stationary,
            fbar1,
            fbar2: None,
            g1: None,
            persistence: RegimePersistence::new(stationary.pi1, hbar1[0], hbar1[1]),
        }
    }

    pub fn with_lag2(mut self, fbar2: [f64; 2], g1: [f64; 2]) -> Self {
        self.fbar2 = Some(fbar2);
        self.g1 = Some(g1);
        self
    }

    /// Exact profile of a model.
    pub fn from_model(model: &PreparedModel) -> Self {
        let on = [model.on_law(0), model.on_law(1)];
        let off = [model.off_law(0), model.off_law(1)];
        let fbar1 = on.map(|v| v.residual_pmf(1));
        let fbar2 = on.map(|v| v.residual_pmf(2));
        let g1 = off.map(|v| v.base().pmf(1));
        let hbar1 = [model.mode_law(0).residual_pmf(1), model.mode_law(1).residual_pmf(1)];
        DynamicProfile::new(model.profile(), fbar1, hbar1).with_lag2(fbar2, g1)
    }

    pub fn hbar1(&self) -> [f64; 2] {
        [self.persistence.hbar1_1, self.persistence.hbar2_1]
    }

    /// Two-step mode transition matrix `P[i][j] = P(M(k+2) = j | M(k) = i)`
    /// in terms of the residual mode pmfs at 1. A switch can happen at
    /// either step, so each off-diagonal entry has two paths. Exact for
    /// geometric sojourns.
    pub fn two_step_transitions(&self) -> [[f64; 2]; 2] {
        let [h1, h2] = self.hbar1();
        [
            [(1.0 - h1).powi(2) + h1 * h2, h1 * (1.0 - h2) + (1.0 - h1) * h1],
            [h2 * (1.0 - h1) + (1.0 - h2) * h2, (1.0 - h2).powi(2) + h2 * h1],
        ]
    }
}

fn choose(n: usize, k: usize) -> f64 {
    binomial(n as u64, k as u64) as f64
}

fn a_coeff_f(n: usize, l: usize, m: usize) -> f64 {
    a_coeff(n as u64, l as u64, m as u64) as f64
}

fn check_order(kind: SubgraphKind, n: usize) -> Result<(), MomentError> {
    if kind.order() > n {
        return Err(MomentError::OrderTooLarge {
            kind,
            order: kind.order(),
            n,
        });
    }
    Ok(())
}

/// Expected count in one snapshot.
pub fn single_snapshot_moment(
    kind: SubgraphKind,
    n: usize,
    p: &StationaryProfile,
) -> Result<f64, MomentError> {
    check_order(kind, n)?;
    let mix = |power: i32| p.pi1 * p.rho1.powi(power) + (1.0 - p.pi1) * p.rho2.powi(power);
    Ok(match kind.canonical() {
        SubgraphKind::Edges => choose(n, 2) * mix(1),
        SubgraphKind::Complete(l) => choose(n, l) * mix(edges_in_clique(l as u64) as i32),
        SubgraphKind::Stars(l) => l as f64 * choose(n, l) * mix(l as i32 - 1),
    })
}

/// `E A(k) A(k + 1)`.
pub fn lag1_cross_moment_edges(n: usize, d: &DynamicProfile) -> f64 {
    let s = &d.stationary;
    let r = &d.persistence;
    let pairs = choose(n, 2);
    let distinct = a_coeff_f(n, 2, 0) + a_coeff_f(n, 2, 1);
    let same = a_coeff_f(n, 2, 2);
    let within = |i: usize| {
        let rho = s.rho(i);
        r.r(i) * (same * rho * (1.0 - d.fbar1[i]) + distinct * rho * rho)
    };
    r.r_neq * pairs * pairs * s.rho1 * s.rho2 + within(0) + within(1)
}

/// `E K_l(k) K_l(k + 1)`: two cliques sharing `m` vertices share `C(m, 2)`
/// edges, each of which must persist over the tick.
pub fn lag1_cross_moment_complete(n: usize, l: usize, d: &DynamicProfile) -> f64 {
    let s = &d.stationary;
    let r = &d.persistence;
    let b_l = edges_in_clique(l as u64) as i32;
    let sets = choose(n, l);
    let within = |i: usize| {
        let rho = s.rho(i);
        let stay = 1.0 - d.fbar1[i];
        let sum: f64 = (0..=l)
            .map(|m| {
                let b_m = edges_in_clique(m as u64) as i32;
                a_coeff_f(n, l, m) * rho.powi(b_l) * stay.powi(b_m) * rho.powi(b_l - b_m)
            })
            .sum();
        r.r(i) * sum
    };
    r.r_neq * sets * sets * (s.rho1 * s.rho2).powi(b_l) + within(0) + within(1)
}

/// `E S_l(k) S_l(k + 1)` for `l >= 3`, using the star overlap cases: no
/// shared edge, the edge between two distinct shared centers, or the `m - 1`
/// edges from a common center.
pub fn lag1_cross_moment_stars(n: usize, l: usize, d: &DynamicProfile) -> f64 {
    assert!(l >= 3, "two-stars are edges; use lag1_cross_moment_edges");
    let s = &d.stationary;
    let r = &d.persistence;
    let li = l as i32;
    let stars = l as f64 * choose(n, l);
    let within = |i: usize| {
        let rho = s.rho(i);
        let stay = 1.0 - d.fbar1[i];
        let sum: f64 = (0..=l)
            .map(|m| {
                let mi = m as i32;
                let mf = m as f64;
                let none = ((l - m) * (l + m)) as f64 * rho.powi(2 * (li - 1));
                let crossed = mf * (mf - 1.0) * rho.powi(2 * li - 3) * stay;
                let shared_center = if m == 0 {
                    0.0
                } else {
                    mf * rho.powi(2 * li - mi - 1) * stay.powi(mi - 1)
                };
                a_coeff_f(n, l, m) * (none + crossed + shared_center)
            })
            .sum();
        r.r(i) * sum
    };
    r.r_neq * stars * stars * (s.rho1 * s.rho2).powi(li - 1) + within(0) + within(1)
}

/// `E A(k) A(k + 2)`. A shared edge is present at both ends if it stays on
/// throughout, or if it drops for exactly the middle tick.
pub fn lag2_cross_moment_edges(n: usize, d: &DynamicProfile) -> Result<f64, MomentError> {
    let spec = MomentSpec::new(SubgraphKind::Edges, 2);
    let fbar2 = d.fbar2.ok_or(MomentError::MissingQuantity(spec, "f-bar(2)"))?;
    let g1 = d.g1.ok_or(MomentError::MissingQuantity(spec, "g(1)"))?;
    let s = &d.stationary;
    let p = d.two_step_transitions();
    let pairs = choose(n, 2);
    let distinct = a_coeff_f(n, 2, 0) + a_coeff_f(n, 2, 1);
    let same = a_coeff_f(n, 2, 2);
    let switch = s.pi(0) * p[0][1] + s.pi(1) * p[1][0];
    let within = |i: usize| {
        let rho = s.rho(i);
        let persist = 1.0 - d.fbar1[i] - fbar2[i] + d.fbar1[i] * g1[i];
        s.pi(i) * p[i][i] * (same * rho * persist + distinct * rho * rho)
    };
    Ok(switch * pairs * pairs * s.rho1 * s.rho2 + within(0) + within(1))
}

/// Closed-form value of any supported moment.
pub fn theoretical_moment(
    n: usize,
    spec: MomentSpec,
    d: &DynamicProfile,
) -> Result<f64, MomentError> {
    let kind = spec.kind.canonical();
    check_order(kind, n)?;
    match (kind, spec.lag) {
        (_, 0) => single_snapshot_moment(kind, n, &d.stationary),
        (SubgraphKind::Edges, 1) => Ok(lag1_cross_moment_edges(n, d)),
        (SubgraphKind::Complete(l), 1) => Ok(lag1_cross_moment_complete(n, l, d)),
        (SubgraphKind::Stars(l), 1) => Ok(lag1_cross_moment_stars(n, l, d)),
        (SubgraphKind::Edges, 2) => lag2_cross_moment_edges(n, d),
        _ => Err(MomentError::Unsupported(spec)),
    }
}

/// One empirical (or exact) moment value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub kind: SubgraphKind,
    pub lag: u8,
    pub value: f64,
    /// Batch-means standard error; absent for exact values.
    #[serde(default)]
    pub std_error: Option<f64>,
    /// Number of averaged terms (`T - lag`).
    #[serde(default)]
    pub terms: usize,
    /// Whether the underlying count series never changed.
    #[serde(default)]
    pub constant: bool,
}

impl MomentEstimate {
    pub fn spec(&self) -> MomentSpec {
        MomentSpec::new(self.kind, self.lag)
    }
}

/// Moment values keyed by statistic and lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalMoments {
    /// Series length; zero for exact values.
    #[serde(default)]
    pub t: usize,
    pub entries: Vec<MomentEstimate>,
}

impl EmpiricalMoments {
    pub fn get(&self, spec: MomentSpec) -> Option<&MomentEstimate> {
        let spec = MomentSpec::new(spec.kind, spec.lag);
        self.entries.iter().find(|e| e.spec() == spec)
    }

    pub fn value(&self, spec: MomentSpec) -> Option<f64> {
        self.get(spec).map(|e| e.value)
    }

    /// Exact moments of a profile, in the shape of empirical ones.
    pub fn theoretical(
        n: usize,
        d: &DynamicProfile,
        specs: &[MomentSpec],
    ) -> Result<EmpiricalMoments, MomentError> {
        let entries = specs
            .iter()
            .map(|&spec| {
                Ok(MomentEstimate {
                    kind: spec.kind.canonical(),
                    lag: spec.lag,
                    value: theoretical_moment(n, spec, d)?,
                    std_error: None,
                    terms: 0,
                    constant: false,
                })
            })
            .collect::<Result<_, MomentError>>()?;
        Ok(EmpiricalMoments { t: 0, entries })
    }

    /// Pools independent estimates of the same moments, weighting by the
    /// number of terms. Entries missing from any input are dropped.
    pub fn merge(parts: &[EmpiricalMoments]) -> Option<EmpiricalMoments> {
        let first = parts.first()?;
        let mut entries = Vec::new();
        for e in &first.entries {
            let same: Vec<&MomentEstimate> = parts.iter().filter_map(|p| p.get(e.spec())).collect();
            if same.len() != parts.len() {
                continue;
            }
            let weights: Vec<f64> = same.iter().map(|x| x.terms.max(1) as f64).collect();
            let total: f64 = weights.iter().sum();
            let value = same.iter().zip(&weights).map(|(x, w)| w * x.value).sum::<f64>() / total;
            let std_error = same
                .iter()
                .zip(&weights)
                .map(|(x, w)| x.std_error.map(|s| (w * s).powi(2)))
                .sum::<Option<f64>>()
                .map(|v| v.sqrt() / total);
            entries.push(MomentEstimate {
                kind: e.kind,
                lag: e.lag,
                value,
                std_error,
                terms: same.iter().map(|x| x.terms).sum(),
                constant: same.iter().all(|x| x.constant),
            });
        }
        Some(EmpiricalMoments {
            t: parts.iter().map(|p| p.t).sum(),
            entries,
        })
    }
}

#[derive(Debug, Clone, Default)]
struct BatchState {
    sum: u128,
    count: usize,
    means: Vec<f64>,
}

impl BatchState {
    fn push(&mut self, x: u128, batch_len: usize) {
        self.sum += x;
        self.count += 1;
        if self.count == batch_len {
            self.means.push(self.sum as f64 / batch_len as f64);
            self.sum = 0;
            self.count = 0;
        }
    }

    fn std_error(&self) -> Option<f64> {
        let b = self.means.len();
        if b < 2 {
            return None;
        }
        let mean = self.means.iter().sum::<f64>() / b as f64;
        let var = self.means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
        Some((var / b as f64).sqrt())
    }
}

#[derive(Debug, Clone)]
struct StatState {
    kind: SubgraphKind,
    sums: [u128; 3],
    batches: [BatchState; 3],
    prev: [u64; 2],
    min: u64,
    max: u64,
}

/// Single-pass accumulator of lag-0, lag-1 and lag-2 means for several
/// statistics, with batch-means standard errors.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    stats: Vec<StatState>,
    max_lag: u8,
    batch_len: usize,
    t: usize,
}

impl MomentAccumulator {
    /// `expected_len` fixes the batch length at `expected_len / 50`.
    pub fn new(kinds: &[SubgraphKind], max_lag: u8, expected_len: usize) -> Self {
        assert!(max_lag <= 2, "lags above 2 are not tracked");
        MomentAccumulator {
            stats: kinds
                .iter()
                .map(|&kind| StatState {
                    kind: kind.canonical(),
                    sums: [0; 3],
                    batches: Default::default(),
                    prev: [0; 2],
                    min: u64::MAX,
                    max: 0,
                })
                .collect(),
            max_lag,
            batch_len: (expected_len / BATCH_COUNT).max(1),
            t: 0,
        }
    }

    /// Adds the counts of one tick, in the order of `kinds`.
    pub fn push(&mut self, counts: &[u64]) {
        assert_eq!(counts.len(), self.stats.len(), "count vector length mismatch");
        self.t += 1;
        for (s, &x) in self.stats.iter_mut().zip(counts) {
            let terms = [
                Some(u128::from(x)),
                (self.t >= 2).then(|| u128::from(x) * u128::from(s.prev[0])),
                (self.t >= 3).then(|| u128::from(x) * u128::from(s.prev[1])),
            ];
            for (lag, term) in terms.into_iter().enumerate().take(usize::from(self.max_lag) + 1) {
                if let Some(v) = term {
                    s.sums[lag] += v;
                    s.batches[lag].push(v, self.batch_len);
                }
            }
            s.prev = [x, s.prev[0]];
            s.min = s.min.min(x);
            s.max = s.max.max(x);
        }
    }

    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0
    }

    pub fn finish(&self) -> Result<EmpiricalMoments, MomentError> {
        let t = self.t;
        if t <= usize::from(self.max_lag) || t == 0 {
            return Err(MomentError::InsufficientData {
                t,
                lag: self.max_lag,
            });
        }
        let mut entries = Vec::new();
        for s in &self.stats {
            for lag in 0..=self.max_lag {
                let l = usize::from(lag);
                let terms = t - l;
                entries.push(MomentEstimate {
                    kind: s.kind,
                    lag,
                    value: s.sums[l] as f64 / terms as f64,
                    std_error: s.batches[l].std_error(),
                    terms,
                    constant: s.min == s.max,
                });
            }
        }
        Ok(EmpiricalMoments { t, entries })
    }
}

/// Accumulates a whole series in one call.
pub fn accumulate(
    kinds: &[SubgraphKind],
    series: &[Vec<u64>],
    max_lag: u8,
) -> Result<EmpiricalMoments, MomentError> {
    let mut acc = MomentAccumulator::new(kinds, max_lag, series.len());
    for row in series {
        acc.push(row);
    }
    acc.finish()
}
