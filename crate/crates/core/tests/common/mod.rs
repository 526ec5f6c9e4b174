#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use switchgraph::harness::{ExperimentConfig, SCHEMA_VERSION};
use switchgraph::moments::theoretical_moment;
use switchgraph::subgraph_counts::{pair_count, OverlapRow};
use switchgraph::{AdjacencySnapshot, CaseConfig, DistSpec, DynamicProfile, ModelSpec, MomentAccumulator, MomentSpec, SubgraphKind};

pub fn geo(p: f64) -> DistSpec {
    DistSpec::geometric(p).unwrap()
}

pub fn weib(lambda: f64, alpha: f64) -> DistSpec {
    DistSpec::weibull(lambda, alpha).unwrap()
}

/// The reference model: geometric modes (0.3, 0.6), Weibull on-times
/// (1.5, 0.5) and (1.5, 0.3), geometric off-times (0.4, 0.8).
pub fn reference_model(n: usize) -> ModelSpec {
    ModelSpec {
        n_vertices: n,
        on: [weib(1.5, 0.5), weib(1.5, 0.3)],
        off: [geo(0.4), geo(0.8)],
        mode: [geo(0.3), geo(0.6)],
    }
}

pub fn geometric_model(n: usize) -> ModelSpec {
    ModelSpec {
        n_vertices: n,
        on: [geo(0.3), geo(0.5)],
        off: [geo(0.4), geo(0.2)],
        mode: [geo(0.3), geo(0.6)],
    }
}

/// True parameters in the order p0, q0, alpha, [lambda], q1, beta, q2.
pub fn truth(case: &CaseConfig) -> Vec<(String, f64)> {
    let names = switchgraph::estimator::parameter_names(&case.families);
    let values = switchgraph::estimator::parameter_values(
        &case.families,
        &switchgraph::estimator::model_laws(&reference_model(15)),
    );
    names.into_iter().zip(values).collect()
}

pub fn experiment(model: ModelSpec, cases: Vec<CaseConfig>, t: usize, r: usize, seed: u64, workers: usize) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        model,
        cases,
        t,
        r,
        seed,
        workers,
        histogram_bins: 40,
        trace: false,
        out: None,
    }
}

pub fn configs_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

/// Every subset of `0..n` of size `k`, as bitmasks.
pub fn subsets(n: usize, k: usize) -> Vec<u64> {
    (0u64..1 << n).filter(|m| m.count_ones() as usize == k).collect()
}

/// One simulated trace against the closed forms: `(spec, formula, estimate,
/// batch-means standard error)` for edges at lags 0..=2 and the clique and
/// star counts of order 3 and 4 at lags 0 and 1.
pub fn simulated_moments(model: &ModelSpec, t: usize, seed: u64) -> Vec<(MomentSpec, f64, f64, f64)> {
    use rand::SeedableRng;
    let prepared = model.prepare().unwrap();
    let d = DynamicProfile::from_model(&prepared);
    let kinds = [
        SubgraphKind::Edges,
        SubgraphKind::Complete(3),
        SubgraphKind::Complete(4),
        SubgraphKind::Stars(3),
        SubgraphKind::Stars(4),
    ];
    let mut acc = MomentAccumulator::new(&kinds, 2, t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    switchgraph::graph_dynamics::simulate(&prepared, t, &kinds, &mut rng, |_, c| acc.push(c));
    let em = acc.finish().unwrap();
    let mut specs = vec![MomentSpec::new(SubgraphKind::Edges, 2)];
    for kind in kinds {
        specs.extend([MomentSpec::new(kind, 0), MomentSpec::new(kind, 1)]);
    }
    specs
        .into_iter()
        .map(|spec| {
            let formula = theoretical_moment(model.n_vertices, spec, &d).unwrap();
            let e = em.get(spec).unwrap();
            (spec, formula, e.value, e.std_error.unwrap())
        })
        .collect()
}

/// Exact moments of `model` for everything `case` consumes.
pub fn noise_free(model: &ModelSpec, case: &CaseConfig) -> switchgraph::EmpiricalMoments {
    let d = DynamicProfile::from_model(&model.prepare().unwrap());
    switchgraph::EmpiricalMoments::theoretical(model.n_vertices, &d, &case.required_moments()).unwrap()
}

/// Parameter values of `model` named as `case` reports them.
pub fn truth_of(model: &ModelSpec, case: &CaseConfig) -> Vec<(String, f64)> {
    use switchgraph::estimator::{model_laws, parameter_names, parameter_values};
    parameter_names(&case.families)
        .into_iter()
        .zip(parameter_values(&case.families, &model_laws(model)))
        .collect()
}

pub fn naive_cliques(a: &AdjacencySnapshot, l: usize) -> u64 {
    let n = a.vertex_count();
    subsets(n, l)
        .into_iter()
        .filter(|&s| {
            (0..n).all(|u| (0..n).all(|v| u >= v || s >> u & 1 == 0 || s >> v & 1 == 0 || a.has_edge(u, v)))
        })
        .count() as u64
}

pub fn naive_stars(a: &AdjacencySnapshot, l: usize) -> u64 {
    let n = a.vertex_count();
    let mut total = 0;
    for c in 0..n {
        for leaves in subsets(n, l - 1) {
            if leaves >> c & 1 == 0 && (0..n).all(|v| leaves >> v & 1 == 0 || a.has_edge(c, v)) {
                total += 1;
            }
        }
    }
    total
}

pub fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> AdjacencySnapshot {
    let bits: Vec<bool> = (0..pair_count(n)).map(|_| rng.random::<f64>() < p).collect();
    AdjacencySnapshot::from_pair_bits(n, &bits)
}

/// Center-pair tally from explicit edge sets of two stars on overlapping
/// labelled vertex sets.
pub fn enumerated_overlap(l: usize, m: usize) -> Vec<OverlapRow> {
    let first: Vec<usize> = (0..l).collect();
    let second: Vec<usize> = (l - m..2 * l - m).collect();
    let edges = |set: &[usize], c: usize| -> Vec<(usize, usize)> {
        set.iter().filter(|&&v| v != c).map(|&v| (v.min(c), v.max(c))).collect()
    };
    let mut tally = std::collections::BTreeMap::new();
    for &c1 in &first {
        for &c2 in &second {
            let e1 = edges(&first, c1);
            let common = edges(&second, c2).iter().filter(|e| e1.contains(e)).count() as u64;
            *tally.entry(common).or_insert(0u64) += 1;
        }
    }
    tally
        .into_iter()
        .map(|(common_edges, cases)| OverlapRow { common_edges, cases })
        .collect()
}
