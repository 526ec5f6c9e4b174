//! Two-step method of moments.
//!
//! Step 1 matches single-snapshot moments to find the equilibrium profile
//! `(pi_1, rho_1, rho_2)`. Step 2 fixes that profile and matches lag-1 cross
//! moments for `(E Z_1, E X_1, E X_2)`; the remaining means follow from
//! `E Y_i = theta(rho_i, E X_i)` and `E Z_2 = theta(pi_1, E Z_1)`. When an
//! on-time law has a free Weibull scale, a lag-2 edge moment supplies its
//! residual pmf at 2. Finally each mean is mapped back to its family's
//! parameters.
//!
//! The model is invariant under swapping both graph and mode labels. Roots
//! are canonicalized to `rho_1 <= rho_2` and may be re-aligned to a known
//! reference profile.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{invert_mean, weibull_from_mean_and_tail, DistError, DistSpec, Family};
use crate::graph_dynamics::{ModelSpec, StationaryProfile};
use crate::moments::{
    single_snapshot_moment, theoretical_moment, DynamicProfile, EmpiricalMoments, MomentError,
    MomentSpec,
};
use crate::solver::{grid, logistic, logit, multi_start, SolverOptions};
use crate::subgraph_counts::SubgraphKind;

/// Start values for each equilibrium probability.
pub const EQUILIBRIUM_STARTS: [f64; 3] = [0.25, 0.5, 0.75];
/// Start values for each unknown mean.
pub const MEAN_STARTS: [f64; 3] = [1.5, 3.0, 6.0];

/// Roots closer than this (max-norm on probabilities) are the same root.
const ROOT_MERGE_TOL: f64 = 1e-6;

/// `(1 - x) y / x`: the mean of the complementary phase when `x` is the
/// fraction of time spent in a phase of mean `y`.
pub fn theta(x: f64, y: f64) -> f64 {
    (1.0 - x) * y / x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Equilibrium,
    Dynamics,
    Tail,
    Recovery,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Equilibrium => "equilibrium",
            Stage::Dynamics => "dynamics",
            Stage::Tail => "tail",
            Stage::Recovery => "recovery",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("invalid case configuration: {0}")]
    InvalidCase(String),
    #[error("moment {0} is required but was not supplied")]
    MissingMoment(MomentSpec),
    #[error("{stage} stage: no start converged")]
    NoRoot { stage: Stage },
    #[error("{stage} stage is degenerate: {reason}")]
    Degenerate { stage: Stage, reason: String },
    #[error("estimated mean of {variable} is {value}, but means must exceed 1")]
    InfeasibleMean { variable: &'static str, value: f64 },
    #[error("{stage} stage: recovering {variable}: {source}")]
    Recovery {
        stage: Stage,
        variable: &'static str,
        #[source]
        source: DistError,
    },
    #[error("moment formula: {0}")]
    Moment(#[from] MomentError),
}

impl EstimateError {
    /// Short tag used to tally failures.
    pub fn kind(&self) -> &'static str {
        match self {
            EstimateError::InvalidCase(_) => "invalid_case",
            EstimateError::MissingMoment(_) => "missing_moment",
            EstimateError::NoRoot { .. } => "no_root",
            EstimateError::Degenerate { .. } => "degenerate",
            EstimateError::InfeasibleMean { .. } => "infeasible_mean",
            EstimateError::Recovery { .. } => "recovery",
            EstimateError::Moment(_) => "moment",
        }
    }
}

/// Parametric family of each of the six duration laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Families {
    #[serde(rename = "Z1")]
    pub z1: Family,
    #[serde(rename = "Z2")]
    pub z2: Family,
    #[serde(rename = "X1")]
    pub x1: Family,
    #[serde(rename = "Y1")]
    pub y1: Family,
    #[serde(rename = "X2")]
    pub x2: Family,
    #[serde(rename = "Y2")]
    pub y2: Family,
}

impl Families {
    pub fn on(&self, graph: usize) -> &Family {
        [&self.x1, &self.x2][graph]
    }

    pub fn off(&self, graph: usize) -> &Family {
        [&self.y1, &self.y2][graph]
    }

    /// Families of a model, with the Weibull scale of the listed on-time
    /// laws left free.
    pub fn of_model(m: &ModelSpec, free_scale_on: [bool; 2]) -> Families {
        Families {
            z1: Family::of(&m.mode[0], false),
            z2: Family::of(&m.mode[1], false),
            x1: Family::of(&m.on[0], free_scale_on[0]),
            y1: Family::of(&m.off[0], false),
            x2: Family::of(&m.on[1], free_scale_on[1]),
            y2: Family::of(&m.off[1], false),
        }
    }

    fn all(&self) -> [(&'static str, &Family); 6] {
        [
            ("Z1", &self.z1),
            ("Z2", &self.z2),
            ("X1", &self.x1),
            ("Y1", &self.y1),
            ("X2", &self.x2),
            ("Y2", &self.y2),
        ]
    }
}

/// Which moments feed each step and which families the means map back to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub name: String,
    /// Statistics whose snapshot means determine the equilibrium profile.
    pub step1: Vec<SubgraphKind>,
    /// Cross moments for the dynamics step: three or more at lag 1, plus one
    /// lag-2 edge moment per free Weibull scale.
    pub step2: Vec<MomentSpec>,
    pub families: Families,
}

fn weibull_fixed() -> Family {
    Family::Weibull { lambda: Some(1.5) }
}

impl CaseConfig {
    fn reference_families(free_x1_scale: bool) -> Families {
        Families {
            z1: Family::Geometric,
            z2: Family::Geometric,
            x1: if free_x1_scale {
                Family::Weibull { lambda: None }
            } else {
                weibull_fixed()
            },
            y1: Family::Geometric,
            x2: weibull_fixed(),
            y2: Family::Geometric,
        }
    }

    /// Edges, triangles and wedges.
    pub fn case_i() -> CaseConfig {
        use SubgraphKind::*;
        CaseConfig {
            name: "case1".into(),
            step1: vec![Edges, Complete(3), Stars(3)],
            step2: vec![
                MomentSpec::new(Edges, 1),
                MomentSpec::new(Complete(3), 1),
                MomentSpec::new(Stars(3), 1),
            ],
            families: Self::reference_families(false),
        }
    }

    /// Edges, wedges and 4-stars.
    pub fn case_ii() -> CaseConfig {
        use SubgraphKind::*;
        CaseConfig {
            name: "case2".into(),
            step1: vec![Edges, Stars(3), Stars(4)],
            step2: vec![
                MomentSpec::new(Edges, 1),
                MomentSpec::new(Stars(3), 1),
                MomentSpec::new(Stars(4), 1),
            ],
            families: Self::reference_families(false),
        }
    }

    /// Case I moments plus the lag-2 edge moment, with the Weibull scale of
    /// `X_1` unknown.
    pub fn case_iii() -> CaseConfig {
        let mut c = Self::case_i();
        c.name = "case3".into();
        c.step2.insert(1, MomentSpec::new(SubgraphKind::Edges, 2));
        c.families = Self::reference_families(true);
        c
    }

    pub fn lag1_specs(&self) -> Vec<MomentSpec> {
        self.step2.iter().copied().filter(|s| s.lag == 1).collect()
    }

    pub fn lag2_specs(&self) -> Vec<MomentSpec> {
        self.step2.iter().copied().filter(|s| s.lag == 2).collect()
    }

    /// Every moment the case consumes.
    pub fn required_moments(&self) -> Vec<MomentSpec> {
        let mut v: Vec<MomentSpec> = self.step1.iter().map(|&k| MomentSpec::new(k, 0)).collect();
        v.extend(self.step2.iter().map(|s| MomentSpec::new(s.kind, s.lag)));
        v
    }

    /// On-time laws (0 or 1) whose Weibull scale is estimated.
    pub fn free_scale_graph(&self) -> Option<usize> {
        (0..2).find(|&g| self.families.on(g).has_free_scale())
    }

    pub fn max_order(&self) -> usize {
        self.required_moments().iter().map(|s| s.kind.order()).max().unwrap_or(2)
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        let mut step1: Vec<SubgraphKind> = self.step1.iter().map(|k| k.canonical()).collect();
        step1.sort();
        step1.dedup();
        if step1.len() != self.step1.len() {
            errs.push(format!("case {}: step1 statistics must be distinct", self.name));
        }
        if step1.len() < 3 {
            errs.push(format!("case {}: step1 needs at least three statistics", self.name));
        }
        for s in &self.step2 {
            match (s.kind.canonical(), s.lag) {
                (_, 1) | (SubgraphKind::Edges, 2) => {}
                _ => errs.push(format!(
                    "case {}: unsupported step2 moment {s} (lag 1, or lag 2 for edges)",
                    self.name
                )),
            }
        }
        if self.lag1_specs().len() < 3 {
            errs.push(format!("case {}: step2 needs at least three lag-1 moments", self.name));
        }
        for (var, fam) in self.families.all() {
            if fam.has_free_scale() && !matches!(var, "X1" | "X2") {
                errs.push(format!("case {}: a free Weibull scale is only identifiable for X1 or X2, not {var}", self.name));
            }
            if let Family::Weibull { lambda: Some(l) } = fam {
                if !(*l > 0.0 && l.is_finite()) {
                    errs.push(format!("case {}: {var} has invalid fixed lambda {l}", self.name));
                }
            }
        }
        let free = [&self.families.x1, &self.families.x2]
            .iter()
            .filter(|f| f.has_free_scale())
            .count();
        if free > 1 {
            errs.push(format!("case {}: at most one free Weibull scale is supported", self.name));
        }
        if self.lag2_specs().len() != free {
            errs.push(format!(
                "case {}: {} lag-2 moment(s) given for {} free Weibull scale(s)",
                self.name,
                self.lag2_specs().len(),
                free
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

/// Result of the equilibrium step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub profile: StationaryProfile,
    /// Distinct canonical roots found over all starts.
    pub roots: Vec<StationaryProfile>,
    pub start_index: usize,
    pub iterations: usize,
    pub max_residual: f64,
}

fn profile_of(z: &[f64]) -> StationaryProfile {
    StationaryProfile::new(logistic(z[1]), logistic(z[2]), logistic(z[0]))
}

fn canonical(p: StationaryProfile) -> StationaryProfile {
    if p.rho1 <= p.rho2 {
        p
    } else {
        p.swapped()
    }
}

fn profile_distance(a: &StationaryProfile, b: &StationaryProfile) -> f64 {
    (a.rho1 - b.rho1)
        .abs()
        .max((a.rho2 - b.rho2).abs())
        .max((a.pi1 - b.pi1).abs())
}

/// Solves the single-snapshot equations for `(pi_1, rho_1, rho_2)`.
pub fn solve_equilibrium(
    targets: &[f64],
    kinds: &[SubgraphKind],
    n: usize,
    opts: &SolverOptions,
) -> Result<EquilibriumSolution, EstimateError> {
    assert_eq!(targets.len(), kinds.len());
    let stage = Stage::Equilibrium;
    for (k, &t) in kinds.iter().zip(targets) {
        if !(t > 0.0 && t.is_finite()) {
            return Err(EstimateError::Degenerate {
                stage,
                reason: format!("target for {k} is {t}"),
            });
        }
        let ceiling = single_snapshot_moment(*k, n, &StationaryProfile::new(1.0, 1.0, 0.5))?;
        if t >= ceiling {
            return Err(EstimateError::Degenerate {
                stage,
                reason: format!("target for {k} is {t}, at or above its ceiling {ceiling}"),
            });
        }
    }
    let residual = |z: &[f64]| {
        let p = profile_of(z);
        kinds
            .iter()
            .zip(targets)
            .map(|(k, &t)| single_snapshot_moment(*k, n, &p).ok().map(|v| (v - t) / t))
            .collect::<Option<Vec<f64>>>()
    };
    let axis: Vec<f64> = EQUILIBRIUM_STARTS.iter().map(|&p| logit(p)).collect();
    let starts = grid(&[&axis, &axis, &axis]);
    let ms = multi_start(&residual, &starts, opts);
    let (start_index, first) = ms.first.ok_or(EstimateError::NoRoot { stage })?;
    let profile = canonical(profile_of(&first.x));
    if (profile.rho1 - profile.rho2).abs() < ROOT_MERGE_TOL || !first.full_rank(opts.rank_tol) {
        return Err(EstimateError::Degenerate {
            stage,
            reason: "edge on-probabilities coincide; the mode weight is not identifiable".into(),
        });
    }
    let mut roots: Vec<StationaryProfile> = Vec::new();
    for (_, sol) in &ms.converged {
        let p = canonical(profile_of(&sol.x));
        if roots.iter().all(|r| profile_distance(r, &p) > ROOT_MERGE_TOL) {
            roots.push(p);
        }
    }
    Ok(EquilibriumSolution {
        profile,
        roots,
        start_index,
        iterations: first.iterations,
        max_residual: first.max_residual(),
    })
}

/// Means solved for in the dynamics step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSolution {
    pub ez1: f64,
    pub ex1: f64,
    pub ex2: f64,
    /// Residual on-time pmf at 2 of the graph with a free Weibull scale.
    pub fbar2: Option<f64>,
    pub start_index: usize,
    pub iterations: usize,
    pub max_residual: f64,
    /// Distinct roots (`E Z_1`, `E X_1`, `E X_2`) found over all starts.
    #[serde(skip)]
    pub root_count: usize,
}

/// Profile implied by the equilibrium probabilities and the three solved
/// means.
pub fn profile_from_means(p: &StationaryProfile, ez1: f64, ex: [f64; 2]) -> DynamicProfile {
    let ez2 = theta(p.pi1, ez1);
    DynamicProfile::new(*p, [1.0 / ex[0], 1.0 / ex[1]], [1.0 / ez1, 1.0 / ez2])
}

/// The six means implied by a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Means {
    pub ez1: f64,
    pub ez2: f64,
    pub ex1: f64,
    pub ex2: f64,
    pub ey1: f64,
    pub ey2: f64,
}

impl Means {
    pub fn complete(p: &StationaryProfile, ez1: f64, ex1: f64, ex2: f64) -> Means {
        Means {
            ez1,
            ez2: theta(p.pi1, ez1),
            ex1,
            ex2,
            ey1: theta(p.rho1, ex1),
            ey2: theta(p.rho2, ex2),
        }
    }

    pub fn on(&self, g: usize) -> f64 {
        [self.ex1, self.ex2][g]
    }

    pub fn off(&self, g: usize) -> f64 {
        [self.ey1, self.ey2][g]
    }

    fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("Z1", self.ez1),
            ("Z2", self.ez2),
            ("X1", self.ex1),
            ("Y1", self.ey1),
            ("X2", self.ex2),
            ("Y2", self.ey2),
        ]
    }
}

/// Residual on-time pmf at 2 and off-time pmf at 1 for a graph whose laws
/// are fully determined by their families and means.
fn lag2_quantities(fam_on: &Family, fam_off: &Family, ex: f64, ey: f64) -> Result<(f64, f64), DistError> {
    let on = invert_mean(fam_on, ex)?;
    let off = invert_mean(fam_off, ey)?;
    Ok((on.ccdf(2) / ex, off.pmf(1)))
}

/// Solves the cross-moment equations given the equilibrium profile.
///
/// The lag-1 equations do not involve `f-bar(2)`, so they are solved first
/// for `(E Z_1, E X_1, E X_2)`; a lag-2 edge equation, when present, is then
/// linear in the unknown `f-bar(2)` and solved exactly.
pub fn solve_dynamics(
    cfg: &CaseConfig,
    em: &EmpiricalMoments,
    profile: &StationaryProfile,
    n: usize,
    opts: &SolverOptions,
) -> Result<DynamicsSolution, EstimateError> {
    let stage = Stage::Dynamics;
    if !(profile.pi1 > 0.0 && profile.pi1 < 1.0) {
        return Err(EstimateError::Degenerate {
            stage,
            reason: format!("pi_1 = {} leaves the mode sojourn unidentifiable", profile.pi1),
        });
    }
    let specs = cfg.lag1_specs();
    let targets = specs
        .iter()
        .map(|&s| em.value(s).ok_or(EstimateError::MissingMoment(s)))
        .collect::<Result<Vec<f64>, _>>()?;
    for (s, &t) in specs.iter().zip(&targets) {
        if !(t > 0.0 && t.is_finite()) {
            return Err(EstimateError::Degenerate {
                stage,
                reason: format!("target for {s} is {t}"),
            });
        }
    }
    let means_of = |u: &[f64]| (1.0 + u[0].exp(), 1.0 + u[1].exp(), 1.0 + u[2].exp());
    let residual = |u: &[f64]| {
        let (ez1, ex1, ex2) = means_of(u);
        let d = profile_from_means(profile, ez1, [ex1, ex2]);
        specs
            .iter()
            .zip(&targets)
            .map(|(&s, &t)| theoretical_moment(n, s, &d).ok().map(|v| (v - t) / t))
            .collect::<Option<Vec<f64>>>()
    };
    let axis: Vec<f64> = MEAN_STARTS.iter().map(|&m| (m - 1.0).ln()).collect();
    let starts = grid(&[&axis, &axis, &axis]);
    let ms = multi_start(&residual, &starts, opts);
    let (start_index, first) = ms.first.ok_or(EstimateError::NoRoot { stage })?;
    if !first.full_rank(opts.rank_tol) {
        return Err(EstimateError::Degenerate {
            stage,
            reason: "cross-moment Jacobian is rank deficient".into(),
        });
    }
    let (ez1, ex1, ex2) = means_of(&first.x);
    let mut roots: Vec<[f64; 3]> = Vec::new();
    for (_, sol) in &ms.converged {
        let (a, b, c) = means_of(&sol.x);
        let r = [a, b, c];
        if roots
            .iter()
            .all(|q| q.iter().zip(&r).any(|(x, y)| (x - y).abs() > ROOT_MERGE_TOL * x.abs().max(1.0)))
        {
            roots.push(r);
        }
    }
    let mut sol = DynamicsSolution {
        ez1,
        ex1,
        ex2,
        fbar2: None,
        start_index,
        iterations: first.iterations,
        max_residual: first.max_residual(),
        root_count: roots.len(),
    };
    if let Some(free) = cfg.free_scale_graph() {
        sol.fbar2 = Some(solve_tail(cfg, em, profile, n, &sol, free)?);
    }
    Ok(sol)
}

fn solve_tail(
    cfg: &CaseConfig,
    em: &EmpiricalMoments,
    profile: &StationaryProfile,
    n: usize,
    sol: &DynamicsSolution,
    free: usize,
) -> Result<f64, EstimateError> {
    let stage = Stage::Tail;
    let spec = *cfg
        .lag2_specs()
        .first()
        .ok_or_else(|| EstimateError::InvalidCase("free Weibull scale without a lag-2 moment".into()))?;
    let target = em.value(spec).ok_or(EstimateError::MissingMoment(spec))?;
    let means = Means::complete(profile, sol.ez1, sol.ex1, sol.ex2);
    let recovery = |variable, source| EstimateError::Recovery {
        stage,
        variable,
        source,
    };
    let mut fbar2 = [0.0; 2];
    let mut g1 = [0.0; 2];
    for g in 0..2 {
        if g == free {
            let y = invert_mean(cfg.families.off(g), means.off(g))
                .map_err(|e| recovery(["Y1", "Y2"][g], e))?;
            g1[g] = y.pmf(1);
        } else {
            let (f, gg) = lag2_quantities(cfg.families.on(g), cfg.families.off(g), means.on(g), means.off(g))
                .map_err(|e| recovery(["X1", "X2"][g], e))?;
            fbar2[g] = f;
            g1[g] = gg;
        }
    }
    let base = profile_from_means(profile, sol.ez1, [sol.ex1, sol.ex2]);
    let at = |f: f64| {
        let mut fb = fbar2;
        fb[free] = f;
        theoretical_moment(n, spec, &base.with_lag2(fb, g1))
    };
    let v0 = at(0.0)?;
    let v1 = at(1.0)?;
    let slope = v1 - v0;
    if slope == 0.0 || !slope.is_finite() {
        return Err(EstimateError::Degenerate {
            stage,
            reason: "lag-2 moment does not depend on f-bar(2)".into(),
        });
    }
    Ok((target - v0) / slope)
}

/// Maps the means back to distribution parameters.
pub fn recover_parameters(
    families: &Families,
    means: &Means,
    fbar2: Option<f64>,
) -> Result<[DistSpec; 6], EstimateError> {
    let stage = Stage::Recovery;
    for (variable, value) in means.named() {
        if !(value > 1.0) || !value.is_finite() {
            return Err(EstimateError::InfeasibleMean { variable, value });
        }
    }
    let mut out = Vec::with_capacity(6);
    for ((variable, fam), (_, mean)) in families.all().into_iter().zip(means.named()) {
        let d = if fam.has_free_scale() {
            let tail = fbar2.ok_or_else(|| {
                EstimateError::InvalidCase(format!("{variable} has a free scale but no f-bar(2) estimate"))
            })?;
            weibull_from_mean_and_tail(mean, tail)
                .and_then(|(lambda, alpha)| DistSpec::weibull(lambda, alpha))
        } else {
            invert_mean(fam, mean)
        }
        .map_err(|source| EstimateError::Recovery {
            stage,
            variable,
            source,
        })?;
        out.push(d);
    }
    Ok([out[0], out[1], out[2], out[3], out[4], out[5]])
}

/// A named scalar parameter estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedParam {
    pub name: String,
    pub value: f64,
}

/// Names and values of the free parameters of the six recovered laws, in the
/// order `Z1, Z2, X1, Y1, X2, Y2`: geometric `p0, q0, p1, q1, p2, q2`; Weibull
/// or zeta shapes `alpha` (X1) and `beta` (X2); a free X1 scale `lambda`.
pub fn parameter_names(families: &Families) -> Vec<String> {
    let mut names = Vec::new();
    let geo = ["p0", "q0", "p1", "q1", "p2", "q2"];
    for (i, (var, fam)) in families.all().into_iter().enumerate() {
        let shape = match var {
            "X1" => "alpha".to_string(),
            "X2" => "beta".to_string(),
            v => format!("{v}_alpha"),
        };
        match fam {
            Family::Geometric => names.push(geo[i].to_string()),
            Family::Zeta | Family::Weibull { lambda: Some(_) } => names.push(shape),
            Family::Weibull { lambda: None } => {
                names.push(shape);
                names.push(if var == "X1" { "lambda".into() } else { format!("{var}_lambda") });
            }
        }
    }
    names
}

/// The six laws of a model in the order `Z1, Z2, X1, Y1, X2, Y2`.
pub fn model_laws(m: &ModelSpec) -> [DistSpec; 6] {
    [m.mode[0], m.mode[1], m.on[0], m.off[0], m.on[1], m.off[1]]
}

/// Parameter values of `laws`, aligned with [`parameter_names`].
pub fn parameter_values(families: &Families, laws: &[DistSpec; 6]) -> Vec<f64> {
    let mut values = Vec::new();
    for ((_, fam), law) in families.all().into_iter().zip(laws) {
        match (*law, fam.has_free_scale()) {
            (DistSpec::Geometric { p }, _) => values.push(p),
            (DistSpec::Zeta { alpha }, _) => values.push(alpha),
            (DistSpec::DiscreteWeibull { alpha, .. }, false) => values.push(alpha),
            (DistSpec::DiscreteWeibull { lambda, alpha }, true) => {
                values.push(alpha);
                values.push(lambda);
            }
        }
    }
    values
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub equilibrium_start: usize,
    pub equilibrium_iterations: usize,
    pub equilibrium_residual: f64,
    pub equilibrium_roots: Vec<StationaryProfile>,
    pub dynamics_start: usize,
    pub dynamics_iterations: usize,
    pub dynamics_residual: f64,
    pub dynamics_root_count: usize,
    /// Max relative residual of every consumed moment at the final estimate.
    pub full_residual: f64,
    /// Whether the canonical root was relabeled to match a reference.
    pub label_swapped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub case: String,
    pub profile: StationaryProfile,
    pub means: Means,
    #[serde(default)]
    pub fbar2: Option<f64>,
    pub params: Vec<NamedParam>,
    /// The recovered model.
    pub model: ModelSpec,
    pub diagnostics: Diagnostics,
}

impl EstimationResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }
}

/// Full pipeline from moment values to parameters. With `reference`, the
/// labels of the equilibrium root are aligned to it; otherwise the canonical
/// `rho_1 <= rho_2` labelling is reported.
pub fn estimate(
    cfg: &CaseConfig,
    em: &EmpiricalMoments,
    n: usize,
    reference: Option<&StationaryProfile>,
) -> Result<EstimationResult, EstimateError> {
    estimate_with(cfg, em, n, reference, &SolverOptions::default())
}

pub fn estimate_with(
    cfg: &CaseConfig,
    em: &EmpiricalMoments,
    n: usize,
    reference: Option<&StationaryProfile>,
    opts: &SolverOptions,
) -> Result<EstimationResult, EstimateError> {
    cfg.validate().map_err(|e| EstimateError::InvalidCase(e.join("; ")))?;
    if cfg.max_order() > n {
        return Err(EstimateError::InvalidCase(format!(
            "statistics of order {} on {n} vertices",
            cfg.max_order()
        )));
    }
    for spec in cfg.required_moments() {
        let e = em.get(spec).ok_or(EstimateError::MissingMoment(spec))?;
        if e.constant {
            return Err(EstimateError::Degenerate {
                stage: if spec.lag == 0 { Stage::Equilibrium } else { Stage::Dynamics },
                reason: format!("the {} series is constant", spec.kind),
            });
        }
    }
    let step1_targets: Vec<f64> = cfg
        .step1
        .iter()
        .map(|&k| em.value(MomentSpec::new(k, 0)).unwrap_or(f64::NAN))
        .collect();
    let eq = solve_equilibrium(&step1_targets, &cfg.step1, n, opts)?;
    let mut profile = eq.profile;
    let mut label_swapped = false;
    if let Some(r) = reference {
        let swapped = profile.swapped();
        if profile_distance(&swapped, r) < profile_distance(&profile, r) {
            profile = swapped;
            label_swapped = true;
        }
    }
    let dynamics = solve_dynamics(cfg, em, &profile, n, opts)?;
    let means = Means::complete(&profile, dynamics.ez1, dynamics.ex1, dynamics.ex2);
    let laws = recover_parameters(&cfg.families, &means, dynamics.fbar2)?;
    let model = ModelSpec {
        n_vertices: n,
        on: [laws[2], laws[4]],
        off: [laws[3], laws[5]],
        mode: [laws[0], laws[1]],
    };

    // consistency of the whole system at the final estimate
    let mut full = profile_from_means(&profile, means.ez1, [means.ex1, means.ex2]);
    if dynamics.fbar2.is_some() {
        let fbar2 = [0, 1].map(|g| model.on[g].ccdf(2) / means.on(g));
        let g1 = [0, 1].map(|g| model.off[g].pmf(1));
        full = full.with_lag2(fbar2, g1);
    }
    let mut full_residual = 0.0f64;
    for spec in cfg.required_moments() {
        let t = em.value(spec).unwrap_or(f64::NAN);
        let v = theoretical_moment(n, spec, &full)?;
        full_residual = full_residual.max(((v - t) / t).abs());
    }

    let params = parameter_names(&cfg.families)
        .into_iter()
        .zip(parameter_values(&cfg.families, &laws))
        .map(|(name, value)| NamedParam { name, value })
        .collect();
    Ok(EstimationResult {
        case: cfg.name.clone(),
        profile,
        means,
        fbar2: dynamics.fbar2,
        params,
        model,
        diagnostics: Diagnostics {
            equilibrium_start: eq.start_index,
            equilibrium_iterations: eq.iterations,
            equilibrium_residual: eq.max_residual,
            equilibrium_roots: eq.roots,
            dynamics_start: dynamics.start_index,
            dynamics_iterations: dynamics.iterations,
            dynamics_residual: dynamics.max_residual,
            dynamics_root_count: dynamics.root_count,
            full_residual,
            label_swapped,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_dynamics::ModelSpec;

    fn geo(p: f64) -> DistSpec {
        DistSpec::geometric(p).unwrap()
    }

    fn case_model() -> ModelSpec {
        ModelSpec {
            n_vertices: 15,
            on: [DistSpec::weibull(1.5, 0.5).unwrap(), DistSpec::weibull(1.5, 0.3).unwrap()],
            off: [geo(0.4), geo(0.8)],
            mode: [geo(0.3), geo(0.6)],
        }
    }

    #[test]
    fn theta_examples() {
        assert_eq!(theta(0.5, 2.0), 2.0);
        assert!((theta(2.0 / 3.0, 10.0 / 3.0) - 5.0 / 3.0).abs() < 1e-14);
        for i in 1..100 {
            let ex = 1.0 + i as f64 * 0.37;
            let ey = 1.0 + (i * 7 % 13) as f64 * 0.91;
            let rho = ex / (ex + ey);
            assert!((theta(rho, ex) - ey).abs() < 1e-12 * ey);
        }
    }

    #[test]
    fn equilibrium_round_trip() {
        let m = case_model().prepare().unwrap();
        let truth = m.profile();
        let kinds = CaseConfig::case_i().step1;
        let targets: Vec<f64> = kinds.iter().map(|&k| single_snapshot_moment(k, 15, &truth).unwrap()).collect();
        let sol = solve_equilibrium(&targets, &kinds, 15, &SolverOptions::default()).unwrap();
        assert!(profile_distance(&sol.profile, &truth) < 1e-8, "{:?} vs {truth:?}", sol.profile);
    }

    #[test]
    fn equal_on_probabilities_are_degenerate() {
        let p = StationaryProfile::new(0.4, 0.4, 0.3);
        let kinds = CaseConfig::case_i().step1;
        let targets: Vec<f64> = kinds.iter().map(|&k| single_snapshot_moment(k, 10, &p).unwrap()).collect();
        let err = solve_equilibrium(&targets, &kinds, 10, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, EstimateError::Degenerate { stage: Stage::Equilibrium, .. }), "{err}");
    }

    #[test]
    fn reference_parameters_recover_from_means() {
        let means = Means {
            ez1: 10.0 / 3.0,
            ez2: 5.0 / 3.0,
            ex1: 2.0,
            ex2: 3.0,
            ey1: 2.5,
            ey2: 1.25,
        };
        let laws = recover_parameters(&CaseConfig::case_i().families, &means, None).unwrap();
        assert!(matches!(laws[0], DistSpec::Geometric { p } if (p - 0.3).abs() < 1e-15));
        assert!(matches!(laws[5], DistSpec::Geometric { p } if (p - 0.8).abs() < 1e-15));
    }

    #[test]
    fn infeasible_means_are_reported() {
        let means = Means {
            ez1: 3.0,
            ez2: 0.9,
            ex1: 2.0,
            ex2: 3.0,
            ey1: 2.5,
            ey2: 1.25,
        };
        let err = recover_parameters(&CaseConfig::case_i().families, &means, None).unwrap_err();
        assert!(matches!(err, EstimateError::InfeasibleMean { variable: "Z2", .. }));
    }

    #[test]
    fn case_presets_validate() {
        for c in [CaseConfig::case_i(), CaseConfig::case_ii(), CaseConfig::case_iii()] {
            c.validate().unwrap();
        }
        let mut bad = CaseConfig::case_iii();
        bad.step2.retain(|s| s.lag != 2);
        assert!(bad.validate().is_err());
        let mut bad = CaseConfig::case_i();
        bad.families.z1 = Family::Weibull { lambda: None };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn parameter_names_follow_the_reference_cases() {
        assert_eq!(
            parameter_names(&CaseConfig::case_i().families),
            ["p0", "q0", "alpha", "q1", "beta", "q2"]
        );
        assert_eq!(
            parameter_names(&CaseConfig::case_iii().families),
            ["p0", "q0", "alpha", "lambda", "q1", "beta", "q2"]
        );
    }

    #[test]
    fn constant_series_short_circuit() {
        let m = case_model().prepare().unwrap();
        let d = DynamicProfile::from_model(&m);
        let cfg = CaseConfig::case_i();
        let mut em = EmpiricalMoments::theoretical(15, &d, &cfg.required_moments()).unwrap();
        em.entries[0].constant = true;
        assert!(matches!(estimate(&cfg, &em, 15, None), Err(EstimateError::Degenerate { .. })));
    }
}
