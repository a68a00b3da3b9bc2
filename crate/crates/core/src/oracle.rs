//! Ground truth at small `t`.
//!
//! Every step is uniform over `2s - 1` faces whatever happened before, so
//! all `prod_{i=1}^{t-1} (2i+1)` choice traces are equally likely and exact
//! means are plain averages over the traces.
//!
//! The coupling half of the module checks the bounded-difference property:
//! two traces that differ at a single step `j` and then continue "in the same
//! way" end with degree histograms that differ by at most 6 in every count.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expectations::ExactRecurrence;
use crate::network::{replay, ChoiceTrace, DegreeHistogram, RanState};
use crate::rng::Xoshiro256PlusPlus;

/// Largest `t` for [`exact_expectations`].
pub const ORACLE_T_CAP: usize = 8;

/// Largest `t` for [`exhaustive_coupling`].
pub const EXHAUSTIVE_COUPLING_T_CAP: usize = 5;

/// Steps enumerated up front to split the trace space into parallel work.
const PARTITION_DEPTH: usize = 3;

/// Number of distinct traces of length `t`.
pub fn trace_count(t: usize) -> u64 {
    (1..t as u64).map(|i| 2 * i + 1).product()
}

/// Every trace of length `len`, in lexicographic order.
pub fn enumerate_traces(len: usize) -> Vec<ChoiceTrace> {
    let mut traces = vec![Vec::new()];
    for step in 1..=len {
        let faces = ChoiceTrace::faces_at_step(step);
        traces = traces
            .into_iter()
            .flat_map(|prefix| {
                (0..faces).map(move |i| {
                    let mut next = prefix.clone();
                    next.push(i);
                    next
                })
            })
            .collect();
    }
    traces.into_iter().map(ChoiceTrace::new).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactExpectation {
    pub t: usize,
    /// `E[Z_k(t)]` for every degree with non-zero mean.
    pub values: BTreeMap<u32, BigRational>,
    pub trace_count: u64,
}

impl ExactExpectation {
    pub fn get(&self, k: u32) -> BigRational {
        self.values
            .get(&k)
            .cloned()
            .unwrap_or_else(|| BigRational::from_integer(0.into()))
    }
}

/// Exact `E[Z_k(t)]` by enumerating every choice trace.
pub fn exact_expectations(t: usize) -> Result<ExactExpectation> {
    if t > ORACLE_T_CAP {
        return Err(Error::Capacity(format!(
            "exact enumeration is capped at t = {ORACLE_T_CAP}; t = {t} would need {} traces",
            trace_count_u128(t)
        )));
    }
    let depth = t.min(PARTITION_DEPTH);
    let partitions = enumerate_traces(depth);
    let partial: Vec<Vec<u64>> = partitions
        .par_iter()
        .map(|prefix| {
            let mut state = replay(prefix).expect("enumerated prefixes are valid");
            let mut sums = vec![0u64; t + 3];
            accumulate(&mut state, t, &mut sums);
            sums
        })
        .collect();

    let mut sums = vec![0u64; t + 3];
    for part in &partial {
        for (total, n) in sums.iter_mut().zip(part) {
            *total += n;
        }
    }

    let count = trace_count(t);
    let values = sums
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s > 0)
        .map(|(k, &s)| {
            (
                k as u32,
                BigRational::new(BigInt::from(s), BigInt::from(count)),
            )
        })
        .collect();
    Ok(ExactExpectation {
        t,
        values,
        trace_count: count,
    })
}

fn trace_count_u128(t: usize) -> u128 {
    (1..t as u128).map(|i| 2 * i + 1).product()
}

/// Depth-first walk over every continuation of `state` up to `t` steps,
/// adding each leaf's histogram into `sums`.
fn accumulate(state: &mut RanState, t: usize, sums: &mut [u64]) {
    if state.t() == t {
        for &d in state.degrees() {
            sums[d as usize] += 1;
        }
        return;
    }
    for slot in 0..state.face_count() {
        state.apply_step(slot as u64).expect("slot is in range");
        accumulate(state, t, sums);
        state.retract_step(slot);
    }
}

/// `N_k(t)` from the exact recurrence minus the enumerated `E[Z_k(t)]`.
pub fn recurrence_discrepancy(t: usize) -> Result<BTreeMap<u32, BigRational>> {
    if t == 0 {
        return Err(Error::Domain("the recurrence starts at t = 1".into()));
    }
    let oracle = exact_expectations(t)?;
    let k_max = t + 2;
    let mut recurrence = ExactRecurrence::basis(k_max);
    while recurrence.t() < t {
        recurrence.advance();
    }
    Ok((3..=k_max as u32)
        .map(|k| (k, recurrence.get(k as usize) - oracle.get(k)))
        .collect())
}

/// How the second trace continues after the step where the pair differs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Continuation {
    /// Later choices of the two differing slots are exchanged. The face
    /// created in slot `f` of one run then always corresponds to the face
    /// in slot `g` of the other, which is an orientation- and
    /// depth-preserving isomorphism of the two subdivisions.
    #[default]
    Swapped,
    /// Later choices are copied verbatim.
    Identical,
}

/// Two traces that differ only at `step`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoupledPair {
    base: ChoiceTrace,
    step: usize,
    alternative: u64,
    continuation: Continuation,
}

impl CoupledPair {
    /// A pair differing at 1-based `step`, where `alternative` replaces the
    /// base choice. A `step` past the end of the trace gives two identical
    /// traces.
    pub fn new(base: ChoiceTrace, step: usize, alternative: u64) -> Result<Self> {
        Self::with_continuation(base, step, alternative, Continuation::Swapped)
    }

    pub fn with_continuation(
        base: ChoiceTrace,
        step: usize,
        alternative: u64,
        continuation: Continuation,
    ) -> Result<Self> {
        base.validate()?;
        if step == 0 {
            return Err(Error::InvalidPair("steps are numbered from 1".into()));
        }
        if step <= base.len() {
            let faces = ChoiceTrace::faces_at_step(step);
            if alternative >= faces {
                return Err(Error::FaceIndexOutOfRange {
                    step,
                    index: alternative,
                    faces,
                });
            }
            if alternative == base.indices[step - 1] {
                return Err(Error::InvalidPair(format!(
                    "alternative {alternative} equals the base choice at step {step}"
                )));
            }
        }
        Ok(CoupledPair {
            base,
            step,
            alternative,
            continuation,
        })
    }

    pub fn t(&self) -> usize {
        self.base.len()
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn base(&self) -> &ChoiceTrace {
        &self.base
    }

    pub fn is_identity(&self) -> bool {
        self.step > self.base.len()
    }

    /// The coupled trace: same prefix, the alternative at `step`, then the
    /// base suffix mapped according to the continuation.
    pub fn partner(&self) -> ChoiceTrace {
        if self.is_identity() {
            return self.base.clone();
        }
        let original = self.base.indices[self.step - 1];
        let swap = |i: u64| match self.continuation {
            Continuation::Identical => i,
            Continuation::Swapped if i == original => self.alternative,
            Continuation::Swapped if i == self.alternative => original,
            Continuation::Swapped => i,
        };
        let mut indices = self.base.indices.clone();
        indices[self.step - 1] = self.alternative;
        for index in &mut indices[self.step..] {
            *index = swap(*index);
        }
        ChoiceTrace::new(indices)
    }
}

/// Differences between the two final states of a coupled pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CouplingOutcome {
    /// `max_k |Z_k - Z'_k|`.
    pub max_count_difference: u64,
    /// Vertices (by id) whose degree differs between the runs.
    pub differing_vertices: usize,
}

pub fn coupled_difference(pair: &CoupledPair) -> Result<CouplingOutcome> {
    let first = replay(&pair.base)?;
    let second = replay(&pair.partner())?;
    Ok(compare_states(&first, &second))
}

fn compare_states(first: &RanState, second: &RanState) -> CouplingOutcome {
    let differing_vertices = first
        .degrees()
        .iter()
        .zip(second.degrees())
        .filter(|(a, b)| a != b)
        .count();
    CouplingOutcome {
        max_count_difference: max_count_difference(
            &first.degree_histogram(),
            &second.degree_histogram(),
        ),
        differing_vertices,
    }
}

pub fn max_count_difference(first: &DegreeHistogram, second: &DegreeHistogram) -> u64 {
    let len = first.counts().len().max(second.counts().len());
    (0..len as u32)
        .map(|k| first.count(k).abs_diff(second.count(k)))
        .max()
        .unwrap_or(0)
}

/// Aggregate of a coupling sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CouplingReport {
    pub t: usize,
    pub pairs_checked: u64,
    pub max_difference: u64,
    pub max_differing_vertices: usize,
}

impl CouplingReport {
    fn new(t: usize) -> Self {
        CouplingReport {
            t,
            pairs_checked: 0,
            max_difference: 0,
            max_differing_vertices: 0,
        }
    }

    fn record(&mut self, outcome: CouplingOutcome) {
        self.pairs_checked += 1;
        self.max_difference = self.max_difference.max(outcome.max_count_difference);
        self.max_differing_vertices = self.max_differing_vertices.max(outcome.differing_vertices);
    }

    fn merge(mut self, other: CouplingReport) -> Self {
        self.pairs_checked += other.pairs_checked;
        self.max_difference = self.max_difference.max(other.max_difference);
        self.max_differing_vertices = self
            .max_differing_vertices
            .max(other.max_differing_vertices);
        self
    }

    /// True when no pair was evaluated.
    pub fn is_empty(&self) -> bool {
        self.pairs_checked == 0
    }
}

/// Every coupled pair of traces of length `t`: each base trace, each step
/// `j >= 2`, each alternative choice at `j`.
pub fn exhaustive_coupling(t: usize, continuation: Continuation) -> Result<CouplingReport> {
    if t > EXHAUSTIVE_COUPLING_T_CAP {
        return Err(Error::Capacity(format!(
            "exhaustive coupling is capped at t = {EXHAUSTIVE_COUPLING_T_CAP}, got t = {t}"
        )));
    }
    let report = enumerate_traces(t)
        .par_iter()
        .map(|base| {
            let mut report = CouplingReport::new(t);
            let first = replay(base).expect("enumerated traces are valid");
            for step in 2..=t {
                for alternative in 0..ChoiceTrace::faces_at_step(step) {
                    if alternative == base.indices[step - 1] {
                        continue;
                    }
                    let pair = CoupledPair::with_continuation(
                        base.clone(),
                        step,
                        alternative,
                        continuation,
                    )
                    .expect("enumerated pairs are valid");
                    let second = replay(&pair.partner()).expect("partner traces are valid");
                    report.record(compare_states(&first, &second));
                }
            }
            report
        })
        .reduce(|| CouplingReport::new(t), CouplingReport::merge);
    Ok(report)
}

/// Random coupled pairs: a uniform base trace, a uniform step `j` in
/// `[2, t]` and a uniform alternative at `j`. At `t <= 1` no pair exists.
pub fn sampled_coupling_check(
    t: usize,
    samples: u64,
    seed: u64,
    continuation: Continuation,
) -> Result<CouplingReport> {
    let mut report = CouplingReport::new(t);
    if t < 2 {
        return Ok(report);
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    for _ in 0..samples {
        let base: Vec<u64> = (1..=t)
            .map(|s| rng.below(ChoiceTrace::faces_at_step(s)))
            .collect();
        let step = 2 + rng.below(t as u64 - 1) as usize;
        let original = base[step - 1];
        let mut alternative = rng.below(ChoiceTrace::faces_at_step(step) - 1);
        if alternative >= original {
            alternative += 1;
        }
        let pair = CoupledPair::with_continuation(
            ChoiceTrace::new(base),
            step,
            alternative,
            continuation,
        )?;
        report.record(coupled_difference(&pair)?);
    }
    Ok(report)
}
