//! Greedy, group-greedy, randomized group-greedy and elite-and-randomized
//! group-greedy selectors.
//!
//! All four share one beam-search engine. A [`Group`] holds the best `L`
//! distinct subsets of the current size. At each step every member is
//! extended by one sensor drawn from its candidate set, the per-member
//! top-`L` extensions are pooled, duplicates (same index set reached in a
//! different order) are dropped and the best `L` survive. The randomized
//! variants differ only in the candidate set a member sees after the first
//! step: a fresh uniform sketch of `n_s` indices, optionally seeded with a
//! fixed set of elite indices picked by the common greedy method.
//!
//! Ordering is total and deterministic everywhere: higher objective first,
//! then the lexicographically smallest sorted index set.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidate::{CandidateMatrix, SensorSubset};
use crate::error::{Error, Result};
use crate::objective::{build_state, eval_extended, extend_state, GramState, ObjectiveKind};
use crate::sketch::{compose_sketch, SketchConfig, StreamKey};

/// Candidate scans shorter than this stay on the calling thread.
const PAR_SCAN_MIN: usize = 512;

/// A subset with its objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSubset {
    pub subset: SensorSubset,
    pub value: f64,
}

/// Descending value, then ascending canonical index set.
pub fn rank_order(a: &ScoredSubset, b: &ScoredSubset) -> Ordering {
    b.value
        .total_cmp(&a.value)
        .then_with(|| a.subset.canonical().cmp(&b.subset.canonical()))
}

/// The best `capacity` distinct subsets seen at one step, sorted by
/// [`rank_order`].
#[derive(Debug, Clone)]
pub struct Group {
    capacity: usize,
    members: Vec<ScoredSubset>,
}

impl Group {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParameter("group size L must be at least 1".into()));
        }
        Ok(Self { capacity, members: Vec::new() })
    }

    /// Keeps the best `capacity` distinct subsets of `pool`.
    pub fn from_pool(capacity: usize, pool: Vec<ScoredSubset>) -> Result<Self> {
        let mut group = Self::new(capacity)?;
        group.members = select_distinct(pool, capacity, |s| s);
        Ok(group)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn members(&self) -> &[ScoredSubset] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn best(&self) -> Option<&ScoredSubset> {
        self.members.first()
    }
}

/// Sorts, removes canonical duplicates (keeping the better-ranked copy) and
/// truncates to `capacity`.
fn select_distinct<T>(mut pool: Vec<T>, capacity: usize, scored: impl Fn(&T) -> &ScoredSubset) -> Vec<T> {
    pool.sort_by(|a, b| rank_order(scored(a), scored(b)));
    let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(pool.len());
    let mut kept = Vec::with_capacity(capacity.min(pool.len()));
    for item in pool {
        if kept.len() == capacity {
            break;
        }
        if seen.insert(scored(&item).subset.canonical()) {
            kept.push(item);
        }
    }
    kept
}

/// Per-step bookkeeping of a selector run. Counts and times are cumulative
/// up to and including the step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    /// Number of sensors selected after this step.
    pub k: usize,
    pub group_size: usize,
    pub eval_count: u64,
    /// Sketched indices that were skipped because the member already held
    /// them.
    pub sketch_hits: u64,
    pub elapsed: f64,
    /// Best stored subset after this step, in selection order.
    pub best: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorReport {
    pub final_subset: Vec<usize>,
    /// Best stored objective after selecting `k` sensors, `k = 1..=p`.
    pub objective_curve: Vec<f64>,
    pub eval_count: u64,
    pub wall_time: f64,
    pub steps: Vec<StepStats>,
}

fn top_extensions(
    u: &CandidateMatrix,
    parent: &GramState,
    usable: &[usize],
    capacity: usize,
    kind: ObjectiveKind,
) -> Result<Vec<(usize, f64)>> {
    if usable.is_empty() {
        return Err(Error::NoUsableCandidates);
    }
    let eval = |&i: &usize| eval_extended(u, parent, i, kind).map(|v| (i, v));
    let mut scored: Vec<(usize, f64)> = if usable.len() >= PAR_SCAN_MIN {
        usable.par_iter().with_min_len(PAR_SCAN_MIN / 4).map(eval).collect::<Result<_>>()?
    } else {
        usable.iter().map(eval).collect::<Result<_>>()?
    };
    let order = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if scored.len() > capacity {
        scored.select_nth_unstable_by(capacity - 1, order);
        scored.truncate(capacity);
    }
    scored.sort_by(order);
    Ok(scored)
}

fn usable_candidates(parent: &SensorSubset, candidates: &[usize]) -> Vec<usize> {
    let mut seen = HashSet::with_capacity(candidates.len());
    candidates
        .iter()
        .copied()
        .filter(|&i| !parent.contains(i) && seen.insert(i))
        .collect()
}

/// Scores `parent + {i}` for every candidate `i` not already in `parent`
/// and returns the best `capacity`, highest first; ties go to the smaller
/// appended index.
pub fn l_best_search(
    u: &CandidateMatrix,
    parent: &SensorSubset,
    candidates: &[usize],
    capacity: usize,
    kind: ObjectiveKind,
) -> Result<Vec<ScoredSubset>> {
    if capacity == 0 {
        return Err(Error::InvalidParameter("L must be at least 1".into()));
    }
    for &i in candidates {
        u.check_index(i)?;
    }
    let state = build_state(u, parent)?;
    let usable = usable_candidates(parent, candidates);
    top_extensions(u, &state, &usable, capacity, kind)?
        .into_iter()
        .map(|(i, value)| Ok(ScoredSubset { subset: parent.with(i)?, value }))
        .collect()
}

fn check_p(u: &CandidateMatrix, p: usize) -> Result<()> {
    if p == 0 || p > u.rows() {
        return Err(Error::InvalidParameter(format!(
            "sensor count p={p} must be between 1 and n={}",
            u.rows()
        )));
    }
    Ok(())
}

/// The common greedy method: at each step add the single sensor that
/// maximizes the objective, ties to the smallest index.
pub fn common_greedy(u: &CandidateMatrix, p: usize, kind: ObjectiveKind) -> Result<SelectorReport> {
    check_p(u, p)?;
    let start = Instant::now();
    let n = u.rows();
    let mut state = build_state(u, &SensorSubset::empty())?;
    let mut curve = Vec::with_capacity(p);
    let mut steps = Vec::with_capacity(p);
    let mut evals = 0u64;
    for k in 1..=p {
        let usable: Vec<usize> = (0..n).filter(|&i| !state.subset().contains(i)).collect();
        let best = top_extensions(u, &state, &usable, 1, kind)?[0];
        evals += usable.len() as u64;
        state = extend_state(u, &state, best.0)?;
        curve.push(best.1);
        steps.push(StepStats {
            k,
            group_size: 1,
            eval_count: evals,
            sketch_hits: 0,
            elapsed: start.elapsed().as_secs_f64(),
            best: state.subset().indices().to_vec(),
        });
    }
    Ok(SelectorReport {
        final_subset: state.subset().indices().to_vec(),
        objective_curve: curve,
        eval_count: evals,
        wall_time: start.elapsed().as_secs_f64(),
        steps,
    })
}

/// The first `n_e` sensors picked by [`common_greedy`], in selection order.
pub fn select_elites(u: &CandidateMatrix, n_e: usize, kind: ObjectiveKind) -> Result<Vec<usize>> {
    check_p(u, n_e)?;
    Ok(common_greedy(u, n_e, kind)?.final_subset)
}

/// Where a member's candidates come from after the first step.
enum CandidateSource<'a> {
    Full,
    Sketch {
        cfg: SketchConfig,
        elites: &'a [usize],
        key: StreamKey,
        shared: bool,
    },
}

struct Member {
    scored: ScoredSubset,
    state: GramState,
}

struct Extension {
    parent: usize,
    appended: usize,
    scored: ScoredSubset,
}

/// Beam search shared by the group-greedy family. `evals` and `elapsed`
/// carry the cost already spent (elite selection) into the report.
fn group_search(
    u: &CandidateMatrix,
    p: usize,
    capacity: usize,
    kind: ObjectiveKind,
    source: CandidateSource<'_>,
    start: Instant,
    mut evals: u64,
) -> Result<SelectorReport> {
    check_p(u, p)?;
    if capacity == 0 {
        return Err(Error::InvalidParameter("group size L must be at least 1".into()));
    }
    let n = u.rows();
    let all: Vec<usize> = (0..n).collect();
    let mut hits = 0u64;
    let mut curve = Vec::with_capacity(p);
    let mut steps = Vec::with_capacity(p);

    // First sensor: every candidate, from the empty subset.
    let root = build_state(u, &SensorSubset::empty())?;
    let first = top_extensions(u, &root, &all, capacity, kind)?;
    evals += n as u64;
    let mut group: Vec<Member> = first
        .into_iter()
        .map(|(i, value)| {
            Ok(Member {
                state: extend_state(u, &root, i)?,
                scored: ScoredSubset { subset: SensorSubset::empty().with(i)?, value },
            })
        })
        .collect::<Result<_>>()?;
    curve.push(group[0].scored.value);
    steps.push(StepStats {
        k: 1,
        group_size: group.len(),
        eval_count: evals,
        sketch_hits: 0,
        elapsed: start.elapsed().as_secs_f64(),
        best: group[0].scored.subset.indices().to_vec(),
    });

    for k in 2..=p {
        let expansions: Vec<(Vec<Extension>, u64, u64)> = group
            .par_iter()
            .enumerate()
            .map(|(l, member)| -> Result<(Vec<Extension>, u64, u64)> {
                let candidates = match &source {
                    CandidateSource::Full => all.clone(),
                    CandidateSource::Sketch { cfg, elites, key, shared } => {
                        let member_tag = if *shared { 0 } else { l as u64 };
                        compose_sketch(&all, elites, *cfg, key.derive(k as u64).derive(member_tag))?
                    }
                };
                let usable = usable_candidates(&member.scored.subset, &candidates);
                let member_hits = (candidates.len() - usable.len()) as u64;
                if usable.is_empty() {
                    return Ok((Vec::new(), 0, member_hits));
                }
                let top = top_extensions(u, &member.state, &usable, capacity, kind)?;
                let ext = top
                    .into_iter()
                    .map(|(i, value)| {
                        Ok(Extension {
                            parent: l,
                            appended: i,
                            scored: ScoredSubset { subset: member.scored.subset.with(i)?, value },
                        })
                    })
                    .collect::<Result<_>>()?;
                Ok((ext, usable.len() as u64, member_hits))
            })
            .collect::<Result<_>>()?;

        let mut pool = Vec::new();
        for (ext, used, member_hits) in expansions {
            evals += used;
            hits += member_hits;
            pool.extend(ext);
        }
        if pool.is_empty() {
            return Err(Error::DegenerateSketch { step: k });
        }
        let kept = select_distinct(pool, capacity, |e: &Extension| &e.scored);
        group = kept
            .into_par_iter()
            .map(|e| {
                Ok(Member {
                    state: extend_state(u, &group[e.parent].state, e.appended)?,
                    scored: e.scored,
                })
            })
            .collect::<Result<_>>()?;
        curve.push(group[0].scored.value);
        steps.push(StepStats {
            k,
            group_size: group.len(),
            eval_count: evals,
            sketch_hits: hits,
            elapsed: start.elapsed().as_secs_f64(),
            best: group[0].scored.subset.indices().to_vec(),
        });
    }

    Ok(SelectorReport {
        final_subset: group[0].scored.subset.indices().to_vec(),
        objective_curve: curve,
        eval_count: evals,
        wall_time: start.elapsed().as_secs_f64(),
        steps,
    })
}

/// Group-greedy: beam search of width `capacity` over the full candidate
/// set. With `capacity == 1` this is exactly [`common_greedy`].
pub fn group_greedy(u: &CandidateMatrix, p: usize, capacity: usize, kind: ObjectiveKind) -> Result<SelectorReport> {
    group_search(u, p, capacity, kind, CandidateSource::Full, Instant::now(), 0)
}

/// Options shared by the randomized selectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SketchOptions {
    /// Draw one sketch per step for all members instead of one per member.
    pub shared: bool,
}

/// Randomized group-greedy: after a full first step, each member is
/// extended over its own uniform sketch of `n_s` candidates.
///
/// The sketch of member `l` (0-based rank in the group) at step `k` is drawn
/// from `StreamKey::new(seed).derive(k).derive(l)`; with `opts.shared` every
/// member uses `l = 0`.
pub fn randomized_group_greedy(
    u: &CandidateMatrix,
    p: usize,
    capacity: usize,
    n_s: usize,
    seed: u64,
    kind: ObjectiveKind,
    opts: SketchOptions,
) -> Result<SelectorReport> {
    elite_randomized_group_greedy(u, p, capacity, n_s, 0, seed, kind, opts)
}

/// Elite-and-randomized group-greedy: like [`randomized_group_greedy`], but
/// every sketch also contains the first `n_e` common-greedy picks, with
/// `n_s - n_e` indices drawn from the remaining candidates.
#[allow(clippy::too_many_arguments)]
pub fn elite_randomized_group_greedy(
    u: &CandidateMatrix,
    p: usize,
    capacity: usize,
    n_s: usize,
    n_e: usize,
    seed: u64,
    kind: ObjectiveKind,
    opts: SketchOptions,
) -> Result<SelectorReport> {
    check_p(u, p)?;
    if n_s == 0 {
        return Err(Error::InvalidParameter("sketch size n_s must be at least 1".into()));
    }
    let cfg = SketchConfig::new(n_s, n_e, u.rows())?;
    let start = Instant::now();
    let (elites, elite_evals) = if n_e > 0 {
        let report = common_greedy(u, n_e, kind)?;
        (report.final_subset, report.eval_count)
    } else {
        (Vec::new(), 0)
    };
    let source = CandidateSource::Sketch {
        cfg,
        elites: &elites,
        key: StreamKey::new(seed),
        shared: opts.shared,
    };
    group_search(u, p, capacity, kind, source, start, elite_evals)
}

/// A configured selection method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Selector {
    Greedy,
    #[serde(rename = "gg")]
    GroupGreedy { group_size: usize },
    #[serde(rename = "rgg")]
    Randomized { group_size: usize, sketch_size: usize, shared_sketch: bool },
    #[serde(rename = "ergg")]
    EliteRandomized { group_size: usize, sketch_size: usize, elite_count: usize, shared_sketch: bool },
}

impl Selector {
    /// Short label used in result files, e.g. `ergg-L10-ns100-ne10`.
    pub fn label(&self) -> String {
        let shared = |s: bool| if s { "-shared" } else { "" };
        match *self {
            Selector::Greedy => "greedy".into(),
            Selector::GroupGreedy { group_size } => format!("gg-L{group_size}"),
            Selector::Randomized { group_size, sketch_size, shared_sketch } => {
                format!("rgg-L{group_size}-ns{sketch_size}{}", shared(shared_sketch))
            }
            Selector::EliteRandomized { group_size, sketch_size, elite_count, shared_sketch } => {
                format!("ergg-L{group_size}-ns{sketch_size}-ne{elite_count}{}", shared(shared_sketch))
            }
        }
    }

    /// Checks the method's parameters against a problem with `n` candidates
    /// and `p` sensors.
    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if p == 0 || p > n {
            return Err(Error::InvalidParameter(format!("sensor count p={p} must be between 1 and n={n}")));
        }
        let group = |l: usize| {
            if l == 0 {
                Err(Error::InvalidParameter("group size L must be at least 1".into()))
            } else {
                Ok(())
            }
        };
        match *self {
            Selector::Greedy => Ok(()),
            Selector::GroupGreedy { group_size } => group(group_size),
            Selector::Randomized { group_size, sketch_size, .. } => {
                group(group_size)?;
                if sketch_size == 0 {
                    return Err(Error::InvalidParameter("sketch size n_s must be at least 1".into()));
                }
                SketchConfig::new(sketch_size, 0, n).map(|_| ())
            }
            Selector::EliteRandomized { group_size, sketch_size, elite_count, .. } => {
                group(group_size)?;
                if sketch_size == 0 {
                    return Err(Error::InvalidParameter("sketch size n_s must be at least 1".into()));
                }
                SketchConfig::new(sketch_size, elite_count, n).map(|_| ())
            }
        }
    }

    pub fn run(&self, u: &CandidateMatrix, p: usize, kind: ObjectiveKind, seed: u64) -> Result<SelectorReport> {
        self.validate(u.rows(), p)?;
        match *self {
            Selector::Greedy => common_greedy(u, p, kind),
            Selector::GroupGreedy { group_size } => group_greedy(u, p, group_size, kind),
            Selector::Randomized { group_size, sketch_size, shared_sketch } => randomized_group_greedy(
                u,
                p,
                group_size,
                sketch_size,
                seed,
                kind,
                SketchOptions { shared: shared_sketch },
            ),
            Selector::EliteRandomized { group_size, sketch_size, elite_count, shared_sketch } => {
                elite_randomized_group_greedy(
                    u,
                    p,
                    group_size,
                    sketch_size,
                    elite_count,
                    seed,
                    kind,
                    SketchOptions { shared: shared_sketch },
                )
            }
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}
