//! The exploration process on G(n,p): one vertex explored per step, with the
//! active/neutral/explored bookkeeping (A_t, N_t, Y_t, Z_t) and component
//! sizes read off as gaps between successive record minima of the walk Y.
//!
//! `explore_implicit` runs on G(n,p) without materializing edges: the number
//! of newly activated neighbors at step t is a Binomial(N_{t-1} - [A_{t-1}=0], p)
//! draw, so a full run is O(n) expected time and O(1) memory beyond counters.
//! `explore_explicit` runs the same bookkeeping deterministically on a given
//! edge set, which is what the oracle-equivalence tests exercise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{BinomialSampler, RngStream};

/// A G(n,p) instance; `epsilon` is stored as exactly n*p - 1.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GnpParams {
    n: u64,
    p: f64,
    epsilon: f64,
}

impl GnpParams {
    pub fn new(n: u64, p: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidVertexCount(n));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        Ok(Self {
            n,
            p,
            epsilon: n as f64 * p - 1.0,
        })
    }

    /// Instance with p = (1 + eps)/n; eps < 0 gives the subcritical side.
    pub fn from_signed_epsilon(n: u64, eps: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidVertexCount(n));
        }
        Self::new(n, (1.0 + eps) / n as f64)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Counter snapshot after step t.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepState {
    /// Step index; t explored vertices exist after step t.
    pub t: u64,
    /// A_t, vertices discovered but not yet explored.
    pub active: u64,
    /// N_t, vertices not yet discovered.
    pub neutral: u64,
    /// Y_t = A_t - Z_t, the shifted walk whose record minima mark components.
    pub walk: i64,
    /// Z_t, components completely explored before step t.
    pub finished_components: u64,
}

/// Result of one exploration run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExplorationOutcome {
    /// Component sizes in discovery order; gaps between record times.
    pub component_sizes: Vec<u64>,
    /// Times t with A_t = 0, strictly increasing.
    pub record_times: Vec<u64>,
    /// Per-step counters for t = 0..=T, present only when tracing is enabled.
    pub trace: Option<Vec<StepState>>,
}

impl ExplorationOutcome {
    /// Sizes sorted descending, so the l-th largest is `[l-1]`.
    pub fn sorted_sizes_desc(&self) -> Vec<u64> {
        let mut v = self.component_sizes.clone();
        v.sort_unstable_by(|a, b| b.cmp(a));
        v
    }
}

/// Streaming step iterator for the implicit process. Yields the state after
/// each step t = 1..=n; component boundaries are the steps with `active == 0`.
pub struct ExplorationSteps<'a> {
    stream: &'a mut RngStream,
    sampler: BinomialSampler,
    n: u64,
    t: u64,
    active: u64,
    neutral: u64,
    walk: i64,
    finished: u64,
}

impl<'a> ExplorationSteps<'a> {
    pub fn new(params: &GnpParams, stream: &'a mut RngStream) -> Self {
        Self {
            stream,
            sampler: BinomialSampler::new(params.p()),
            n: params.n(),
            t: 0,
            active: 1,
            neutral: params.n() - 1,
            walk: 1,
            finished: 0,
        }
    }

    fn initial_state(n: u64) -> StepState {
        StepState {
            t: 0,
            active: 1,
            neutral: n - 1,
            walk: 1,
            finished_components: 0,
        }
    }
}

impl Iterator for ExplorationSteps<'_> {
    type Item = StepState;

    fn next(&mut self) -> Option<StepState> {
        if self.t == self.n {
            return None;
        }
        // Z_t counts zeros of A among steps 1..t-1, so it picks up the
        // previous step's boundary as we leave it.
        let boundary = self.active == 0;
        if boundary && self.t >= 1 {
            self.finished += 1;
        }
        self.t += 1;
        let draws = self.neutral - u64::from(boundary);
        let eta = self.sampler.sample(self.stream, draws);
        self.neutral -= eta + u64::from(boundary);
        self.active = if boundary { eta } else { self.active + eta - 1 };
        self.walk += eta as i64 - 1;
        Some(StepState {
            t: self.t,
            active: self.active,
            neutral: self.neutral,
            walk: self.walk,
            finished_components: self.finished,
        })
    }
}

/// Run the implicit exploration for all n steps.
///
/// With `trace` set, the outcome carries every `StepState` (t = 0..=n);
/// otherwise memory stays O(#components).
pub fn explore_implicit(
    params: &GnpParams,
    stream: &mut RngStream,
    trace: bool,
) -> ExplorationOutcome {
    run_implicit(params, stream, trace, false)
}

/// Like `explore_implicit`, but stops after the first record minimum, i.e.
/// once the component of the root vertex is fully explored. Useful for
/// hitting-time studies; `component_sizes` then holds that single size.
pub fn explore_implicit_first_component(
    params: &GnpParams,
    stream: &mut RngStream,
    trace: bool,
) -> ExplorationOutcome {
    run_implicit(params, stream, trace, true)
}

fn run_implicit(
    params: &GnpParams,
    stream: &mut RngStream,
    trace: bool,
    stop_at_first_record: bool,
) -> ExplorationOutcome {
    let n = params.n();
    let mut trace_buf = if trace {
        let mut v = Vec::with_capacity(n as usize + 1);
        v.push(ExplorationSteps::initial_state(n));
        Some(v)
    } else {
        None
    };
    let mut record_times = Vec::new();
    let mut component_sizes = Vec::new();
    let mut last_record = 0u64;

    let steps = ExplorationSteps::new(params, stream);
    for state in steps {
        if let Some(buf) = trace_buf.as_mut() {
            buf.push(state);
        }
        if state.active == 0 {
            record_times.push(state.t);
            component_sizes.push(state.t - last_record);
            last_record = state.t;
            if stop_at_first_record {
                break;
            }
        }
    }
    if !stop_at_first_record {
        debug_assert_eq!(last_record, n, "process must end at a record");
    }
    ExplorationOutcome {
        component_sizes,
        record_times,
        trace: trace_buf,
    }
}

/// Deterministic exploration of an explicit simple graph on vertices 1..=n.
///
/// `order` fixes both the root of each new component (first neutral vertex in
/// `order`) and tie-breaking among vertices activated in the same step; the
/// active set is consumed FIFO by activation time. The size multiset does not
/// depend on these choices, only the step-by-step trace does.
pub fn explore_explicit(
    n: u64,
    edges: &[(u64, u64)],
    order: &[u64],
    trace: bool,
) -> Result<ExplorationOutcome> {
    let nu = usize::try_from(n).expect("n fits usize");
    if n < 1 {
        return Err(Error::InvalidVertexCount(n));
    }
    // order must be a permutation of 1..=n
    if order.len() != nu {
        return Err(Error::NotAPermutation(n));
    }
    let mut seen = vec![false; nu];
    for &v in order {
        if v < 1 || v > n || seen[(v - 1) as usize] {
            return Err(Error::NotAPermutation(n));
        }
        seen[(v - 1) as usize] = true;
    }
    // validate edges and build adjacency
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); nu];
    let mut normalized: Vec<(u64, u64)> = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        if a < 1 || a > n || b < 1 || b > n {
            return Err(Error::EndpointOutOfRange(a, b, n));
        }
        if a == b {
            return Err(Error::SelfLoop(a));
        }
        normalized.push((a.min(b), a.max(b)));
    }
    normalized.sort_unstable();
    for w in normalized.windows(2) {
        if w[0] == w[1] {
            return Err(Error::DuplicateEdge(w[0].0, w[0].1));
        }
    }
    for &(a, b) in &normalized {
        adj[(a - 1) as usize].push((b - 1) as u32);
        adj[(b - 1) as usize].push((a - 1) as u32);
    }
    // position of each vertex in `order`, for activation tie-breaking
    let mut pos = vec![0u32; nu];
    for (i, &v) in order.iter().enumerate() {
        pos[(v - 1) as usize] = i as u32;
    }
    for nbrs in adj.iter_mut() {
        nbrs.sort_unstable_by_key(|&v| pos[v as usize]);
    }

    const NEUTRAL: u8 = 0;
    const ACTIVE: u8 = 1;
    const EXPLORED: u8 = 2;
    let mut status = vec![NEUTRAL; nu];
    let mut queue = std::collections::VecDeque::new();
    let root = (order[0] - 1) as usize;
    status[root] = ACTIVE;
    queue.push_back(root as u32);
    let mut order_cursor = 0usize; // scans `order` for the next neutral root

    let mut active: u64 = 1;
    let mut neutral: u64 = n - 1;
    let mut walk: i64 = 1;
    let mut finished: u64 = 0;
    let mut trace_buf = if trace {
        Some(vec![ExplorationSteps::initial_state(n)])
    } else {
        None
    };
    let mut record_times = Vec::new();
    let mut component_sizes = Vec::new();
    let mut last_record = 0u64;

    for t in 1..=n {
        let boundary = active == 0;
        if boundary && t >= 2 {
            finished += 1;
        }
        let w = if boundary {
            // first neutral vertex in order
            while status[(order[order_cursor] - 1) as usize] != NEUTRAL {
                order_cursor += 1;
            }
            let v = (order[order_cursor] - 1) as usize;
            status[v] = ACTIVE;
            neutral -= 1;
            v
        } else {
            let v = queue.pop_front().expect("active vertex present") as usize;
            debug_assert_eq!(status[v], ACTIVE);
            v
        };
        let mut eta = 0u64;
        for &nb in &adj[w] {
            let nb = nb as usize;
            if status[nb] == NEUTRAL {
                status[nb] = ACTIVE;
                queue.push_back(nb as u32);
                eta += 1;
            }
        }
        status[w] = EXPLORED;
        neutral -= eta;
        active = if boundary { eta } else { active + eta - 1 };
        walk += eta as i64 - 1;
        if let Some(buf) = trace_buf.as_mut() {
            buf.push(StepState {
                t,
                active,
                neutral,
                walk,
                finished_components: finished,
            });
        }
        if active == 0 {
            record_times.push(t);
            component_sizes.push(t - last_record);
            last_record = t;
        }
    }
    Ok(ExplorationOutcome {
        component_sizes,
        record_times,
        trace: trace_buf,
    })
}

/// Reconstruct the active counts from a walk path: A_t is the height of Y_t
/// above the running minimum of the strict past, plus one.
///
/// Panics if `walk_path` is empty or does not start at Y_0 = 1.
pub fn active_from_walk(walk_path: &[i64]) -> Vec<u64> {
    assert!(
        walk_path.first() == Some(&1),
        "walk path must start at Y_0 = 1"
    );
    let mut out = Vec::with_capacity(walk_path.len());
    out.push(1u64);
    let mut past_min = walk_path[0];
    for &y in &walk_path[1..] {
        let a = y - past_min + 1;
        debug_assert!(a >= 0, "active count must be nonnegative");
        out.push(a as u64);
        past_min = past_min.min(y);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn no_edges_gives_singletons() {
        let params = GnpParams::new(7, 0.0).unwrap();
        let mut s = derive_stream(1, 0);
        let out = explore_implicit(&params, &mut s, false);
        assert_eq!(out.component_sizes, vec![1; 7]);
        assert_eq!(out.record_times, (1..=7).collect::<Vec<_>>());
    }

    #[test]
    fn complete_graph_is_one_component() {
        let params = GnpParams::new(7, 1.0).unwrap();
        let mut s = derive_stream(1, 0);
        let out = explore_implicit(&params, &mut s, false);
        assert_eq!(out.component_sizes, vec![7]);
        assert_eq!(out.record_times, vec![7]);
    }

    #[test]
    fn explicit_path_graph() {
        let out = explore_explicit(3, &[(1, 2), (2, 3)], &[1, 2, 3], false).unwrap();
        assert_eq!(out.component_sizes, vec![3]);
    }

    #[test]
    fn explicit_single_edge() {
        let out = explore_explicit(4, &[(1, 2)], &[1, 2, 3, 4], false).unwrap();
        assert_eq!(out.component_sizes, vec![2, 1, 1]);
        assert_eq!(out.record_times, vec![2, 3, 4]);
    }

    #[test]
    fn explicit_rejects_bad_input() {
        assert!(matches!(
            explore_explicit(3, &[(2, 2)], &[1, 2, 3], false),
            Err(Error::SelfLoop(2))
        ));
        assert!(matches!(
            explore_explicit(3, &[(1, 2), (2, 1)], &[1, 2, 3], false),
            Err(Error::DuplicateEdge(1, 2))
        ));
        assert!(matches!(
            explore_explicit(3, &[(1, 4)], &[1, 2, 3], false),
            Err(Error::EndpointOutOfRange(1, 4, 3))
        ));
        assert!(matches!(
            explore_explicit(3, &[], &[1, 1, 3], false),
            Err(Error::NotAPermutation(3))
        ));
    }

    #[test]
    fn active_from_walk_small_cases() {
        assert_eq!(active_from_walk(&[1, 0]), vec![1, 0]);
        assert_eq!(
            active_from_walk(&[1, 2, 1, 0, 1, -1]),
            vec![1, 2, 1, 0, 2, 0]
        );
    }

    #[test]
    #[should_panic(expected = "must start at Y_0 = 1")]
    fn active_from_walk_requires_unit_start() {
        active_from_walk(&[0, 1]);
    }

    #[test]
    fn first_component_stop() {
        let params = GnpParams::new(100, 0.5).unwrap();
        let mut a = derive_stream(5, 0);
        let mut b = derive_stream(5, 0);
        let full = explore_implicit(&params, &mut a, false);
        let first = explore_implicit_first_component(&params, &mut b, false);
        assert_eq!(first.component_sizes.len(), 1);
        assert_eq!(first.component_sizes[0], full.component_sizes[0]);
    }

    #[test]
    fn epsilon_is_np_minus_one() {
        let params = GnpParams::new(1000, 0.0015).unwrap();
        assert_eq!(params.epsilon(), 1000.0 * 0.0015 - 1.0);
    }
}
