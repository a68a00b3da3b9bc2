//! The evolving Random Apollonian Network.
//!
//! A network starts as the triangle (0, 1, 2). Each step picks one of the
//! `2t + 1` internal faces uniformly at random, inserts a new vertex inside
//! it and joins the vertex to the face's three corners.
//!
//! Faces live in a flat registry. Subdividing slot `i` holding `(a, b, c)`
//! with new vertex `v` overwrites the slot with `(a, b, v)` and appends
//! `(b, c, v)` then `(c, a, v)`. This discipline makes a face index a
//! canonical name for a face, so a sequence of indices ([`ChoiceTrace`])
//! replays a generation exactly.

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Xoshiro256PlusPlus;

/// Largest supported number of insertions: vertex ids are 32-bit.
pub const MAX_STEPS: usize = (u32::MAX as usize) - 3;

/// Default memory budget for one generation, in bytes.
pub const DEFAULT_MEMORY_BUDGET: usize = 8 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub u32);

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A triangular face. The stored orientation is never reordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Face {
    pub a: VertexId,
    pub b: VertexId,
    pub c: VertexId,
}

impl Face {
    pub fn new(a: u32, b: u32, c: u32) -> Self {
        Face {
            a: VertexId(a),
            b: VertexId(b),
            c: VertexId(c),
        }
    }

    pub fn corners(&self) -> [VertexId; 3] {
        [self.a, self.b, self.c]
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.a == v || self.b == v || self.c == v
    }
}

/// Indexable list of the internal faces; the sampling population.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FaceRegistry {
    faces: Vec<Face>,
}

impl FaceRegistry {
    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Face> {
        self.faces.get(index)
    }

    pub fn as_slice(&self) -> &[Face] {
        &self.faces
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Face> {
        self.faces.iter()
    }
}

/// Face indices chosen at each insertion step. Entry `s - 1` belongs to
/// step `s` and lies in `[0, 2(s - 1) + 1)`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChoiceTrace {
    pub indices: Vec<u64>,
}

impl ChoiceTrace {
    pub fn new(indices: Vec<u64>) -> Self {
        ChoiceTrace { indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Number of faces available at `step` (1-based).
    pub fn faces_at_step(step: usize) -> u64 {
        2 * (step as u64 - 1) + 1
    }

    /// Checks every entry against its step's range.
    pub fn validate(&self) -> Result<()> {
        for (pos, &index) in self.indices.iter().enumerate() {
            let step = pos + 1;
            let faces = Self::faces_at_step(step);
            if index >= faces {
                return Err(Error::FaceIndexOutOfRange { step, index, faces });
            }
        }
        Ok(())
    }

    /// One index per line.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        for index in &self.indices {
            writeln!(out, "{index}")?;
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let indices = text
            .lines()
            .map(str::trim)
            .filter(|line| !line.is_empty())
            .enumerate()
            .map(|(pos, line)| {
                line.parse::<u64>().map_err(|_| {
                    Error::Domain(format!("trace line {}: not an index: {line:?}", pos + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ChoiceTrace { indices })
    }
}

/// Number of vertices of each degree at time `t`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DegreeHistogram {
    pub t: usize,
    /// `counts[k]` is the number of vertices of degree `k`. No trailing zeros.
    counts: Vec<u64>,
}

impl DegreeHistogram {
    pub fn from_degrees(t: usize, degrees: &[u32]) -> Self {
        let mut counts = Vec::new();
        for &d in degrees {
            let d = d as usize;
            if d >= counts.len() {
                counts.resize(d + 1, 0);
            }
            counts[d] += 1;
        }
        Self::from_counts(t, counts)
    }

    pub fn from_counts(t: usize, mut counts: Vec<u64>) -> Self {
        while counts.last() == Some(&0) {
            counts.pop();
        }
        DegreeHistogram { t, counts }
    }

    pub fn from_pairs(t: usize, pairs: &[(u32, u64)]) -> Self {
        let mut counts = Vec::new();
        for &(k, n) in pairs {
            let k = k as usize;
            if k >= counts.len() {
                counts.resize(k + 1, 0);
            }
            counts[k] += n;
        }
        Self::from_counts(t, counts)
    }

    pub fn count(&self, k: u32) -> u64 {
        self.counts.get(k as usize).copied().unwrap_or(0)
    }

    /// Dense counts indexed by degree.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `(k, count)` for every degree with a non-zero count, ascending in `k`.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|&(_, &n)| n > 0)
            .map(|(k, &n)| (k as u32, n))
    }

    pub fn max_degree(&self) -> u32 {
        self.counts.len().saturating_sub(1) as u32
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.iter().next().map(|(k, _)| k)
    }

    pub fn vertex_total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn degree_total(&self) -> u64 {
        self.iter().map(|(k, n)| u64::from(k) * n).sum()
    }

    /// CSV with header `k,count`, ascending `k`, trailing newline.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,count")?;
        for (k, n) in self.iter() {
            writeln!(out, "{k},{n}")?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerateOptions {
    pub record_edges: bool,
    pub record_trace: bool,
    pub memory_budget: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            record_edges: false,
            record_trace: false,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

impl GenerateOptions {
    /// Bytes needed to hold a generation of `t` steps with these options.
    pub fn bytes_needed(&self, t: usize) -> u128 {
        let t = t as u128;
        let mut bytes = (t + 3) * 4 + (2 * t + 1) * std::mem::size_of::<Face>() as u128;
        if self.record_edges {
            bytes += 3 * (t + 1) * 8;
        }
        if self.record_trace {
            bytes += t * 8;
        }
        bytes
    }

    pub fn check_capacity(&self, t: usize) -> Result<()> {
        if t > MAX_STEPS {
            return Err(Error::Capacity(format!(
                "t = {t} exceeds the 32-bit vertex id limit of {MAX_STEPS} steps"
            )));
        }
        let needed = self.bytes_needed(t);
        if needed > self.memory_budget as u128 {
            return Err(Error::Capacity(format!(
                "t = {t} needs about {} MiB, budget is {} MiB",
                needed >> 20,
                self.memory_budget >> 20
            )));
        }
        Ok(())
    }
}

/// Degrees, faces and (optionally) edges after `t` insertions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RanState {
    t: usize,
    degrees: Vec<u32>,
    registry: FaceRegistry,
    edges: Option<Vec<[VertexId; 2]>>,
}

impl Default for RanState {
    fn default() -> Self {
        Self::new()
    }
}

impl RanState {
    /// The initial triangle: three vertices of degree 2 and one face.
    pub fn new() -> Self {
        RanState {
            t: 0,
            degrees: vec![2, 2, 2],
            registry: FaceRegistry {
                faces: vec![Face::new(0, 1, 2)],
            },
            edges: None,
        }
    }

    /// The initial triangle, retaining the edge list from here on.
    pub fn with_edges() -> Self {
        let mut state = Self::new();
        state.edges = Some(vec![
            [VertexId(0), VertexId(1)],
            [VertexId(1), VertexId(2)],
            [VertexId(2), VertexId(0)],
        ]);
        state
    }

    fn reserve(&mut self, steps: usize) {
        self.degrees.reserve_exact(steps);
        self.registry.faces.reserve_exact(2 * steps);
        if let Some(edges) = &mut self.edges {
            edges.reserve_exact(3 * steps);
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn vertex_count(&self) -> usize {
        self.degrees.len()
    }

    pub fn edge_count(&self) -> usize {
        3 * (self.t + 1)
    }

    pub fn face_count(&self) -> usize {
        self.registry.len()
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn degree(&self, v: VertexId) -> u32 {
        self.degrees[v.index()]
    }

    pub fn registry(&self) -> &FaceRegistry {
        &self.registry
    }

    pub fn edges(&self) -> Option<&[[VertexId; 2]]> {
        self.edges.as_deref()
    }

    /// Subdivides the face at `face_index` and returns the new vertex.
    pub fn apply_step(&mut self, face_index: u64) -> Result<VertexId> {
        let faces = self.registry.len() as u64;
        if face_index >= faces {
            return Err(Error::FaceIndexOutOfRange {
                step: self.t + 1,
                index: face_index,
                faces,
            });
        }
        if self.t >= MAX_STEPS {
            return Err(Error::Capacity(format!(
                "vertex ids exhausted after {MAX_STEPS} steps"
            )));
        }
        Ok(self.subdivide(face_index as usize))
    }

    #[inline]
    fn subdivide(&mut self, slot: usize) -> VertexId {
        let v = VertexId(self.degrees.len() as u32);
        let Face { a, b, c } = self.registry.faces[slot];
        self.degrees[a.index()] += 1;
        self.degrees[b.index()] += 1;
        self.degrees[c.index()] += 1;
        self.degrees.push(3);
        self.registry.faces[slot] = Face { a, b, c: v };
        self.registry.faces.push(Face { a: b, b: c, c: v });
        self.registry.faces.push(Face { a: c, b: a, c: v });
        if let Some(edges) = &mut self.edges {
            edges.extend_from_slice(&[[a, v], [b, v], [c, v]]);
        }
        self.t += 1;
        v
    }

    /// Undoes the most recent step, which must have subdivided `slot`.
    pub(crate) fn retract_step(&mut self, slot: usize) {
        debug_assert!(self.t > 0);
        let last = self
            .registry
            .faces
            .pop()
            .expect("registry holds the appended faces");
        self.registry.faces.pop();
        let Face { a, b, .. } = self.registry.faces[slot];
        let c = last.a;
        self.registry.faces[slot] = Face { a, b, c };
        self.degrees.pop();
        self.degrees[a.index()] -= 1;
        self.degrees[b.index()] -= 1;
        self.degrees[c.index()] -= 1;
        if let Some(edges) = &mut self.edges {
            edges.truncate(edges.len() - 3);
        }
        self.t -= 1;
    }

    /// Uniform face index in `[0, 2t + 1)`.
    #[inline]
    pub fn sample_index(&self, rng: &mut Xoshiro256PlusPlus) -> u64 {
        rng.below(self.registry.len() as u64)
    }

    pub fn degree_histogram(&self) -> DegreeHistogram {
        DegreeHistogram::from_degrees(self.t, &self.degrees)
    }

    pub fn max_degree(&self) -> u32 {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    /// Edge list, one `u v` pair per line in insertion order. Fails with
    /// `InvalidInput` if edges were not retained.
    pub fn write_edge_list<W: Write>(&self, out: W) -> io::Result<()> {
        let edges = self.edges.as_ref().ok_or_else(|| {
            io::Error::new(io::ErrorKind::InvalidInput, "edge list was not retained")
        })?;
        let mut out = io::BufWriter::with_capacity(1 << 16, out);
        for [u, v] in edges {
            writeln!(out, "{u} {v}")?;
        }
        out.flush()
    }

    /// Checks every structural invariant; returns the first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let t = self.t;
        if self.vertex_count() != t + 3 {
            return Err(format!(
                "vertex count {} != t+3 = {}",
                self.vertex_count(),
                t + 3
            ));
        }
        if self.face_count() != 2 * t + 1 {
            return Err(format!(
                "face count {} != 2t+1 = {}",
                self.face_count(),
                2 * t + 1
            ));
        }
        if let Some(edges) = &self.edges {
            if edges.len() != 3 * (t + 1) {
                return Err(format!(
                    "edge count {} != 3(t+1) = {}",
                    edges.len(),
                    3 * (t + 1)
                ));
            }
        }
        let degree_sum: u64 = self.degrees.iter().map(|&d| u64::from(d)).sum();
        if degree_sum != 6 * (t as u64 + 1) {
            return Err(format!(
                "degree sum {degree_sum} != 6(t+1) = {}",
                6 * (t + 1)
            ));
        }
        let min = self.degrees.iter().copied().min().unwrap_or(0);
        let expected_min = if t == 0 { 2 } else { 3 };
        if min != expected_min {
            return Err(format!("min degree {min} != {expected_min}"));
        }
        // V - E + F = 2, with the outer face counted.
        let euler = (t as i64 + 3) - 3 * (t as i64 + 1) + (2 * t as i64 + 2);
        if euler != 2 {
            return Err(format!("Euler characteristic {euler} != 2"));
        }
        for (slot, face) in self.registry.iter().enumerate() {
            let [a, b, c] = face.corners();
            if a == b || b == c || a == c {
                return Err(format!("face {slot} has repeated corners {face:?}"));
            }
            if c.index() >= self.vertex_count()
                || a.index() >= self.vertex_count()
                || b.index() >= self.vertex_count()
            {
                return Err(format!("face {slot} references an unknown vertex"));
            }
        }
        Ok(())
    }
}

/// Result of [`generate_with`].
#[derive(Debug, Clone)]
pub struct Generation {
    pub state: RanState,
    pub trace: Option<ChoiceTrace>,
}

/// Runs `t` uniformly random insertions from the stream seeded by `seed`.
pub fn generate(t: usize, seed: u64) -> Result<RanState> {
    Ok(generate_with(t, seed, &GenerateOptions::default())?.state)
}

pub fn generate_with(t: usize, seed: u64, options: &GenerateOptions) -> Result<Generation> {
    let rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    generate_from_rng(t, rng, options)
}

/// Like [`generate_with`], drawing from an already-positioned stream.
pub fn generate_from_rng(
    t: usize,
    mut rng: Xoshiro256PlusPlus,
    options: &GenerateOptions,
) -> Result<Generation> {
    options.check_capacity(t)?;
    let mut state = if options.record_edges {
        RanState::with_edges()
    } else {
        RanState::new()
    };
    state.reserve(t);
    let mut trace = options.record_trace.then(|| Vec::with_capacity(t));
    for _ in 0..t {
        let index = state.sample_index(&mut rng);
        state.subdivide(index as usize);
        if let Some(trace) = &mut trace {
            trace.push(index);
        }
    }
    Ok(Generation {
        state,
        trace: trace.map(ChoiceTrace::new),
    })
}

/// Rebuilds the state produced by a trace.
pub fn replay(trace: &ChoiceTrace) -> Result<RanState> {
    replay_into(RanState::new(), trace)
}

/// Replays `trace` on top of the initial triangle held in `state`.
pub fn replay_into(mut state: RanState, trace: &ChoiceTrace) -> Result<RanState> {
    trace.validate()?;
    GenerateOptions::default().check_capacity(trace.len())?;
    state.reserve(trace.len());
    for &index in &trace.indices {
        state.apply_step(index)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry_of(state: &RanState) -> Vec<(u32, u32, u32)> {
        state
            .registry()
            .iter()
            .map(|f| (f.a.0, f.b.0, f.c.0))
            .collect()
    }

    #[test]
    fn initial_triangle() {
        let state = RanState::with_edges();
        assert_eq!(state.t(), 0);
        assert_eq!(state.vertex_count(), 3);
        assert_eq!(state.edges().unwrap().len(), 3);
        assert_eq!(state.face_count(), 1);
        assert_eq!(state.degrees(), &[2, 2, 2]);
        assert_eq!(
            state.degree_histogram().iter().collect::<Vec<_>>(),
            vec![(2, 3)]
        );
        assert_eq!(state.max_degree(), 2);
        state.check_invariants().unwrap();
    }

    #[test]
    fn first_step_is_forced() {
        let mut state = RanState::new();
        let v = state.apply_step(0).unwrap();
        assert_eq!(v, VertexId(3));
        assert_eq!(state.degrees(), &[3, 3, 3, 3]);
        assert_eq!(registry_of(&state), vec![(0, 1, 3), (1, 2, 3), (2, 0, 3)]);
        state.check_invariants().unwrap();
    }

    #[test]
    fn second_step_on_slot_zero() {
        let mut state = RanState::new();
        state.apply_step(0).unwrap();
        state.apply_step(0).unwrap();
        assert_eq!(state.degrees(), &[4, 4, 3, 4, 3]);
        let hist = state.degree_histogram();
        assert_eq!(hist.count(3), 2);
        assert_eq!(hist.count(4), 3);
        assert_eq!(state.max_degree(), 4);
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let mut state = RanState::new();
        assert_eq!(
            state.apply_step(1),
            Err(Error::FaceIndexOutOfRange {
                step: 1,
                index: 1,
                faces: 1
            })
        );
        state.apply_step(0).unwrap();
        assert!(matches!(
            state.apply_step(3),
            Err(Error::FaceIndexOutOfRange { step: 2, .. })
        ));
        // The failed call leaves the state untouched.
        assert_eq!(state.t(), 1);
    }

    #[test]
    fn retract_restores_previous_state() {
        let mut state = RanState::with_edges();
        for i in [0, 2, 1, 4] {
            state.apply_step(i).unwrap();
        }
        let before = state.clone();
        state.apply_step(5).unwrap();
        state.retract_step(5);
        assert_eq!(state, before);
    }

    #[test]
    fn sample_index_at_t0_is_zero() {
        let state = RanState::new();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        assert!((0..1000).all(|_| state.sample_index(&mut rng) == 0));
    }

    #[test]
    fn sample_index_is_reproducible() {
        let mut state = RanState::new();
        state.apply_step(0).unwrap();
        let draw = || {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(77);
            (0..20)
                .map(|_| state.sample_index(&mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn generate_small_histograms() {
        for seed in 0..20 {
            let h1 = generate(1, seed).unwrap().degree_histogram();
            assert_eq!(h1.iter().collect::<Vec<_>>(), vec![(3, 4)]);
            let h3 = generate(3, seed).unwrap().degree_histogram();
            assert_eq!(h3.iter().collect::<Vec<_>>(), vec![(3, 2), (4, 2), (5, 2)]);
        }
    }

    #[test]
    fn replay_matches_generate() {
        let options = GenerateOptions {
            record_edges: true,
            record_trace: true,
            ..Default::default()
        };
        let generation = generate_with(100, 5, &options).unwrap();
        let trace = generation.trace.unwrap();
        let replayed = replay_into(RanState::with_edges(), &trace).unwrap();
        assert_eq!(replayed, generation.state);
    }

    #[test]
    fn replay_names_offending_step() {
        assert_eq!(replay(&ChoiceTrace::new(vec![0])).unwrap().t(), 1);
        assert_eq!(
            replay(&ChoiceTrace::new(vec![0, 3])).unwrap_err(),
            Error::FaceIndexOutOfRange {
                step: 2,
                index: 3,
                faces: 3
            }
        );
    }

    #[test]
    fn capacity_error_for_huge_t() {
        assert!(matches!(
            generate(MAX_STEPS + 1, 0),
            Err(Error::Capacity(_))
        ));
        let tight = GenerateOptions {
            memory_budget: 1 << 20,
            ..Default::default()
        };
        assert!(matches!(
            generate_with(1_000_000, 0, &tight),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn histogram_csv_format() {
        let hist = generate(3, 1).unwrap().degree_histogram();
        assert_eq!(hist.to_csv(), "k,count\n3,2\n4,2\n5,2\n");
    }

    #[test]
    fn edge_list_starts_with_hull() {
        let options = GenerateOptions {
            record_edges: true,
            ..Default::default()
        };
        let state = generate_with(1, 3, &options).unwrap().state;
        let mut out = Vec::new();
        state.write_edge_list(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "0 1\n1 2\n2 0\n0 3\n1 3\n2 3\n"
        );
        assert!(RanState::new().write_edge_list(Vec::new()).is_err());
    }

    #[test]
    fn trace_text_roundtrip() {
        let trace = ChoiceTrace::new(vec![0, 2, 4, 1]);
        let mut buf = Vec::new();
        trace.write_text(&mut buf).unwrap();
        assert_eq!(
            ChoiceTrace::parse_text(std::str::from_utf8(&buf).unwrap()).unwrap(),
            trace
        );
        assert!(ChoiceTrace::parse_text("0\nx\n").is_err());
    }
}
