//! Discrete-time simulation of two parallel dynamic Erdős–Rényi graphs whose
//! visibility is switched by a hidden alternating renewal process.
//!
//! Every remaining-time counter (`ttl`) includes the current tick: a phase of
//! duration `d` is visible at exactly `d` consecutive ticks. The process starts
//! in stationarity: phases present at tick 1 get residual durations, every
//! later phase a fresh full duration. Both graphs evolve at every tick, the
//! hidden one included.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{DistError, DistSpec, ResidualView};
use crate::subgraph_counts::{pair_count, pairs, AdjacencySnapshot, SubgraphKind, MAX_VERTICES};

/// The generative model: on/off laws for each graph, sojourn laws for each
/// mode, and the vertex count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n_vertices: usize,
    /// Laws of the on-times `X_1`, `X_2`.
    pub on: [DistSpec; 2],
    /// Laws of the off-times `Y_1`, `Y_2`.
    pub off: [DistSpec; 2],
    /// Laws of the mode sojourn times `Z_1`, `Z_2`.
    pub mode: [DistSpec; 2],
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(2..=MAX_VERTICES).contains(&self.n_vertices) {
            return Err(format!(
                "n_vertices = {} outside 2..={MAX_VERTICES}",
                self.n_vertices
            ));
        }
        Ok(())
    }

    /// Number of vertex pairs, `C(N, 2)`.
    pub fn edge_slots(&self) -> usize {
        pair_count(self.n_vertices)
    }

    pub fn prepare(&self) -> Result<PreparedModel, DistError> {
        let view = |d: &DistSpec| ResidualView::new(*d);
        let on = [view(&self.on[0])?, view(&self.on[1])?];
        let off = [view(&self.off[0])?, view(&self.off[1])?];
        let mode = [view(&self.mode[0])?, view(&self.mode[1])?];
        let profile = StationaryProfile::from_means(
            [on[0].mean(), on[1].mean()],
            [off[0].mean(), off[1].mean()],
            [mode[0].mean(), mode[1].mean()],
        );
        Ok(PreparedModel {
            spec: self.clone(),
            on,
            off,
            mode,
            profile,
            pairs: pairs(self.n_vertices).collect(),
        })
    }

    /// The same system with graph and mode labels exchanged.
    pub fn relabeled(&self) -> ModelSpec {
        ModelSpec {
            n_vertices: self.n_vertices,
            on: [self.on[1], self.on[0]],
            off: [self.off[1], self.off[0]],
            mode: [self.mode[1], self.mode[0]],
        }
    }
}

/// Equilibrium quantities: edge on-probabilities and the mode-1 probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryProfile {
    pub rho1: f64,
    pub rho2: f64,
    pub pi1: f64,
}

impl StationaryProfile {
    pub fn new(rho1: f64, rho2: f64, pi1: f64) -> Self {
        StationaryProfile { rho1, rho2, pi1 }
    }

    pub fn from_means(on: [f64; 2], off: [f64; 2], mode: [f64; 2]) -> Self {
        StationaryProfile {
            rho1: on[0] / (on[0] + off[0]),
            rho2: on[1] / (on[1] + off[1]),
            pi1: mode[0] / (mode[0] + mode[1]),
        }
    }

    /// `rho_i` for `i` in `{0, 1}`.
    pub fn rho(&self, i: usize) -> f64 {
        [self.rho1, self.rho2][i]
    }

    /// `pi_i` for `i` in `{0, 1}`.
    pub fn pi(&self, i: usize) -> f64 {
        [self.pi1, 1.0 - self.pi1][i]
    }

    /// The profile of the relabeled system.
    pub fn swapped(&self) -> StationaryProfile {
        StationaryProfile {
            rho1: self.rho2,
            rho2: self.rho1,
            pi1: 1.0 - self.pi1,
        }
    }
}

pub fn stationary_profile(m: &ModelSpec) -> Result<StationaryProfile, DistError> {
    Ok(StationaryProfile::from_means(
        [m.on[0].mean()?, m.on[1].mean()?],
        [m.off[0].mean()?, m.off[1].mean()?],
        [m.mode[0].mean()?, m.mode[1].mean()?],
    ))
}

/// A model with means, residual samplers and pair order precomputed.
#[derive(Debug, Clone)]
pub struct PreparedModel {
    spec: ModelSpec,
    on: [ResidualView; 2],
    off: [ResidualView; 2],
    mode: [ResidualView; 2],
    profile: StationaryProfile,
    pairs: Vec<(usize, usize)>,
}

impl PreparedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn profile(&self) -> StationaryProfile {
        self.profile
    }

    pub fn n_vertices(&self) -> usize {
        self.spec.n_vertices
    }

    pub fn on_law(&self, graph: usize) -> &ResidualView {
        &self.on[graph]
    }

    pub fn off_law(&self, graph: usize) -> &ResidualView {
        &self.off[graph]
    }

    pub fn mode_law(&self, mode: usize) -> &ResidualView {
        &self.mode[mode]
    }
}

#[derive(Debug, Clone, PartialEq)]
struct GraphState {
    on: Vec<bool>,
    ttl: Vec<u64>,
    adjacency: AdjacencySnapshot,
}

/// Full hidden state: current mode with its remaining time, and every edge of
/// both graphs with its phase and remaining time.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    /// 0 for mode 1, 1 for mode 2.
    mode: usize,
    mode_ttl: u64,
    graphs: [GraphState; 2],
}

impl SystemState {
    /// Draws a state from the stationary law of the model.
    pub fn init_stationary<R: Rng + ?Sized>(model: &PreparedModel, rng: &mut R) -> SystemState {
        let mode = usize::from(!rng.random_bool(model.profile.pi1));
        let mode_ttl = model.mode[mode].sample_residual(rng);
        let graphs = [0, 1].map(|g| {
            let rho = model.profile.rho(g);
            let slots = model.pairs.len();
            let mut on = Vec::with_capacity(slots);
            let mut ttl = Vec::with_capacity(slots);
            let mut adjacency = AdjacencySnapshot::empty(model.n_vertices());
            for &(u, v) in &model.pairs {
                let is_on = rng.random_bool(rho);
                let law = if is_on { &model.on[g] } else { &model.off[g] };
                on.push(is_on);
                ttl.push(law.sample_residual(rng));
                if is_on {
                    adjacency.set(u, v, true);
                }
            }
            GraphState { on, ttl, adjacency }
        });
        SystemState {
            mode,
            mode_ttl,
            graphs,
        }
    }

    /// Builds a state directly; `mode` is 1 or 2, per-graph vectors are in
    /// lexicographic pair order.
    pub fn from_parts(
        model: &PreparedModel,
        mode: u8,
        mode_ttl: u64,
        on: [Vec<bool>; 2],
        ttl: [Vec<u64>; 2],
    ) -> SystemState {
        assert!(mode == 1 || mode == 2, "mode must be 1 or 2");
        assert!(mode_ttl >= 1, "remaining times must be positive");
        let n = model.n_vertices();
        let [on1, on2] = on;
        let [ttl1, ttl2] = ttl;
        let build = |on: Vec<bool>, ttl: Vec<u64>| {
            assert_eq!(on.len(), model.pairs.len());
            assert_eq!(ttl.len(), model.pairs.len());
            assert!(ttl.iter().all(|&t| t >= 1), "remaining times must be positive");
            GraphState {
                adjacency: AdjacencySnapshot::from_pair_bits(n, &on),
                on,
                ttl,
            }
        };
        SystemState {
            mode: usize::from(mode - 1),
            mode_ttl,
            graphs: [build(on1, ttl1), build(on2, ttl2)],
        }
    }

    /// Advances one tick: every counter decrements, expired phases flip and
    /// draw a fresh full duration.
    pub fn step<R: Rng + ?Sized>(&mut self, model: &PreparedModel, rng: &mut R) {
        self.mode_ttl -= 1;
        if self.mode_ttl == 0 {
            self.mode = 1 - self.mode;
            self.mode_ttl = model.mode[self.mode].sample(rng);
        }
        for (g, graph) in self.graphs.iter_mut().enumerate() {
            for (e, ttl) in graph.ttl.iter_mut().enumerate() {
                *ttl -= 1;
                if *ttl == 0 {
                    let now_on = !graph.on[e];
                    graph.on[e] = now_on;
                    let law = if now_on { &model.on[g] } else { &model.off[g] };
                    *ttl = law.sample(rng);
                    let (u, v) = model.pairs[e];
                    graph.adjacency.set(u, v, now_on);
                }
            }
        }
    }

    /// The snapshot of the graph selected by the current mode. The hidden
    /// graph and the mode itself are not reachable from it.
    pub fn observed_adjacency(&self) -> &AdjacencySnapshot {
        &self.graphs[self.mode].adjacency
    }

    /// Current mode, 1 or 2. Unobservable in the model; exposed for testing.
    pub fn mode(&self) -> u8 {
        self.mode as u8 + 1
    }

    pub fn mode_ttl(&self) -> u64 {
        self.mode_ttl
    }

    /// Whether edge slot `e` of graph `graph` (1 or 2) is on.
    pub fn edge_on(&self, graph: u8, e: usize) -> bool {
        self.graphs[usize::from(graph - 1)].on[e]
    }

    pub fn edge_ttl(&self, graph: u8, e: usize) -> u64 {
        self.graphs[usize::from(graph - 1)].ttl[e]
    }

    pub fn graph(&self, graph: u8) -> &AdjacencySnapshot {
        &self.graphs[usize::from(graph - 1)].adjacency
    }
}

/// Runs the process for `t` ticks from stationarity and hands the counts of
/// `statistics` in the observed graph to `sink` at every tick (1-based).
pub fn simulate<R, F>(
    model: &PreparedModel,
    t: usize,
    statistics: &[SubgraphKind],
    rng: &mut R,
    mut sink: F,
) where
    R: Rng + ?Sized,
    F: FnMut(usize, &[u64]),
{
    let mut counts = vec![0u64; statistics.len()];
    let mut state = SystemState::init_stationary(model, rng);
    for tick in 1..=t {
        if tick > 1 {
            state.step(model, rng);
        }
        let snapshot = state.observed_adjacency();
        for (c, kind) in counts.iter_mut().zip(statistics) {
            *c = kind.count(snapshot);
        }
        sink(tick, &counts);
    }
}
