//! Weighted graphs `(X, b, c, m)`, their truncations and generated families.
//!
//! Vertices are dense indices `0..n`. Edge weights are stored once per
//! unordered pair, so symmetry of `b` holds by construction. Axiom
//! violations that can be represented (self loops, negative weights,
//! non-positive measure) are kept so that [`validate_graph`] can report them;
//! every other operation assumes a valid graph.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::report::{Verdict, VerificationReport};
use crate::{case, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub x: usize,
    pub y: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    measure: Vec<f64>,
    killing: Vec<f64>,
    /// Sorted by `(x, y)` with `x <= y`.
    edges: Vec<Edge>,
    /// Per vertex: `(neighbor, weight)` sorted by neighbor, self loops excluded.
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    /// Builds a graph from per-vertex measure and killing term plus an edge
    /// list. Pairs may be given in either orientation but only once; zero
    /// weights are dropped.
    pub fn new(
        measure: Vec<f64>,
        killing: Vec<f64>,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let n = measure.len();
        if killing.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: killing.len(),
            });
        }
        let mut seen = HashSet::new();
        let mut list = Vec::new();
        for (a, b, w) in edges {
            for idx in [a, b] {
                if idx >= n {
                    return Err(Error::VertexOutOfRange { index: idx, n });
                }
            }
            let (x, y) = if a <= b { (a, b) } else { (b, a) };
            if !seen.insert((x, y)) {
                return Err(Error::DuplicateEdge(x, y));
            }
            if w != 0.0 {
                list.push(Edge { x, y, weight: w });
            }
        }
        list.sort_by_key(|e| (e.x, e.y));

        let mut adjacency = vec![Vec::new(); n];
        for e in list.iter().filter(|e| e.x != e.y) {
            adjacency[e.x].push((e.y, e.weight));
            adjacency[e.y].push((e.x, e.weight));
        }
        for row in &mut adjacency {
            row.sort_by_key(|&(y, _)| y);
        }
        Ok(Self {
            measure,
            killing,
            edges: list,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.measure.len()
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn killing(&self) -> &[f64] {
        &self.killing
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edges with `x < y` (self loops skipped).
    pub fn proper_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.x != e.y)
    }

    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.adjacency[x]
    }

    /// `b(x, y)`; zero for non-adjacent pairs.
    pub fn weight(&self, x: usize, y: usize) -> f64 {
        if x == y {
            return self
                .edges
                .binary_search_by_key(&(x, x), |e| (e.x, e.y))
                .map(|i| self.edges[i].weight)
                .unwrap_or(0.0);
        }
        let row = &self.adjacency[x];
        row.binary_search_by_key(&y, |&(z, _)| z)
            .map(|i| row[i].1)
            .unwrap_or(0.0)
    }

    /// `Σ_z b(x, z)` per vertex, self loops included.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n()];
        for e in &self.edges {
            sums[e.x] += e.weight;
            if e.x != e.y {
                sums[e.y] += e.weight;
            }
        }
        sums
    }

    /// Fails with the first violated axiom, for use as an operation precondition.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate_graph(self);
        match report.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidParameter(format!(
                "invalid weighted graph: {v}"
            ))),
        }
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            n: self.n(),
            m: self.measure.clone(),
            c: self.killing.clone(),
            edges: self.edges.iter().map(|e| (e.x, e.y, e.weight)).collect(),
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_file()).expect("graph serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: GraphFile = serde_json::from_str(&text)?;
        file.into_graph()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_file())?)?;
        Ok(())
    }

    /// Breadth-first hop distance from `root`; `None` for unreachable vertices.
    pub fn hop_distances(&self, root: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n()];
        let mut queue = VecDeque::new();
        dist[root] = Some(0);
        queue.push_back(root);
        while let Some(x) = queue.pop_front() {
            let dx = dist[x].unwrap();
            for &(y, w) in self.neighbors(x) {
                if w > 0.0 && dist[y].is_none() {
                    dist[y] = Some(dx + 1);
                    queue.push_back(y);
                }
            }
        }
        dist
    }
}

/// On-disk graph format: `{ "n": int, "m": [float], "c": [float], "edges": [[x, y, b]] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub m: Vec<f64>,
    pub c: Vec<f64>,
    pub edges: Vec<(usize, usize, f64)>,
}

impl GraphFile {
    pub fn into_graph(self) -> Result<WeightedGraph> {
        if self.m.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: self.m.len(),
            });
        }
        WeightedGraph::new(self.m, self.c, self.edges)
    }
}

/// Checks the weighted graph axioms; every violation is listed with its indices.
pub fn validate_graph(g: &WeightedGraph) -> VerificationReport {
    let mut report = VerificationReport::new("validate_graph", 0);
    let mut worst = 0.0_f64;
    for e in g.edges() {
        if e.x == e.y {
            report.add_violation(format!(
                "axiom (b1) b(x,x) = 0 violated at vertex {}: b = {}",
                e.x, e.weight
            ));
            worst = worst.max(e.weight.abs());
        }
        if !(e.weight >= 0.0) || !e.weight.is_finite() {
            report.add_violation(format!(
                "edge weight nonnegativity violated at ({}, {}): b = {}",
                e.x, e.y, e.weight
            ));
            worst = worst.max(e.weight.abs());
        }
    }
    let sums = g.row_sums();
    for (x, s) in sums.iter().enumerate() {
        if !s.is_finite() {
            report.add_violation(format!("axiom (b3) row sum not finite at vertex {x}"));
        }
    }
    for (x, &m) in g.measure().iter().enumerate() {
        if !(m > 0.0) || !m.is_finite() {
            report.add_violation(format!(
                "measure positivity m(x) > 0 violated at vertex {x}: m = {m}"
            ));
            worst = worst.max(m.abs().max(1.0));
        }
    }
    for (x, &c) in g.killing().iter().enumerate() {
        if !(c >= 0.0) || !c.is_finite() {
            report.add_violation(format!(
                "killing term c(x) >= 0 violated at vertex {x}: c = {c}"
            ));
            worst = worst.max(c.abs());
        }
    }
    report.samples = g.n();
    report.max_violation = worst;
    let max_row = sums.iter().cloned().fold(0.0, f64::max);
    report.worst_case = case! {
        "n" => g.n(),
        "edges" => g.edges().len(),
        "max_row_sum" => max_row,
    };
    report.verdict = if report.violations.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    report
}

/// `(L̃f)(x) = (1/m(x)) Σ_y b(x,y)(f(x) − f(y)) + (c(x)/m(x)) f(x)`.
pub fn formal_laplacian_apply(g: &WeightedGraph, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: f.len(),
        });
    }
    Ok((0..g.n())
        .map(|x| {
            let diff: f64 = g.neighbors(x).iter().map(|&(y, b)| b * (f[x] - f[y])).sum();
            (diff + g.killing()[x] * f[x]) / g.measure()[x]
        })
        .collect())
}

/// A finite vertex subset `S` of a parent graph together with its outer
/// boundary (vertices outside `S` adjacent to `S`).
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation<'g> {
    pub parent: &'g WeightedGraph,
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
}

impl Truncation<'_> {
    /// The graph induced on the interior, relabelled `0..|S|` in interior order.
    pub fn induced_subgraph(&self) -> WeightedGraph {
        let g = self.parent;
        let mut local = vec![usize::MAX; g.n()];
        for (i, &x) in self.interior.iter().enumerate() {
            local[x] = i;
        }
        let edges = g
            .edges()
            .iter()
            .filter(|e| local[e.x] != usize::MAX && local[e.y] != usize::MAX)
            .map(|e| (local[e.x], local[e.y], e.weight));
        let measure = self.interior.iter().map(|&x| g.measure()[x]).collect();
        let killing = self.interior.iter().map(|&x| g.killing()[x]).collect();
        WeightedGraph::new(measure, killing, edges).expect("induced subgraph of a valid graph")
    }
}

pub fn truncate<'g>(g: &'g WeightedGraph, subset: &[usize]) -> Result<Truncation<'g>> {
    if subset.is_empty() {
        return Err(Error::Empty("truncation interior"));
    }
    let mut interior = BTreeSet::new();
    for &x in subset {
        if x >= g.n() {
            return Err(Error::VertexOutOfRange { index: x, n: g.n() });
        }
        interior.insert(x);
    }
    let boundary: BTreeSet<usize> = interior
        .iter()
        .flat_map(|&x| g.neighbors(x).iter())
        .filter(|&&(y, b)| b > 0.0 && !interior.contains(&y))
        .map(|&(y, _)| y)
        .collect();
    Ok(Truncation {
        parent: g,
        interior: interior.into_iter().collect(),
        boundary: boundary.into_iter().collect(),
    })
}

/// Truncation whose boundary is the outermost hop ring around `root`.
///
/// Vertices not reachable from `root` stay in the interior. If the root has
/// no neighbors the interior is the whole graph.
pub fn truncate_last_ring(g: &WeightedGraph, root: usize) -> Result<Truncation<'_>> {
    if root >= g.n() {
        return Err(Error::VertexOutOfRange {
            index: root,
            n: g.n(),
        });
    }
    let dist = g.hop_distances(root);
    let radius = dist.iter().flatten().copied().max().unwrap_or(0);
    let interior: Vec<usize> = (0..g.n())
        .filter(|&x| radius == 0 || dist[x] != Some(radius))
        .collect();
    truncate(g, &interior)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilyKind {
    Path,
    Star,
    /// Complete binary tree; the family size is the depth.
    BinaryTree,
    RandomSparse {
        density: f64,
    },
    Edgeless,
}

impl FromStr for FamilyKind {
    type Err = Error;

    /// `path`, `star`, `binary-tree`, `edgeless`, `random-sparse:<density>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let kind = match name {
            "path" => FamilyKind::Path,
            "star" => FamilyKind::Star,
            "binary-tree" => FamilyKind::BinaryTree,
            "edgeless" => FamilyKind::Edgeless,
            "random-sparse" => {
                let density = arg
                    .unwrap_or("0.1")
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad density in `{s}`")))?;
                FamilyKind::RandomSparse { density }
            }
            _ => return Err(Error::UnknownFamily(s.to_string())),
        };
        if arg.is_some() && !matches!(kind, FamilyKind::RandomSparse { .. }) {
            return Err(Error::UnknownFamily(s.to_string()));
        }
        Ok(kind)
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::Path => write!(f, "path"),
            FamilyKind::Star => write!(f, "star"),
            FamilyKind::BinaryTree => write!(f, "binary-tree"),
            FamilyKind::RandomSparse { density } => write!(f, "random-sparse:{density}"),
            FamilyKind::Edgeless => write!(f, "edgeless"),
        }
    }
}

/// Vertex measure as a function of the vertex index `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", content = "value", rename_all = "kebab-case")]
pub enum MeasureProfile {
    /// `m(x) = k`.
    Constant(f64),
    /// `m(x) = (x + 1)^{-α}`.
    Power(f64),
    /// `m(x) = r^x`.
    Geometric(f64),
}

impl MeasureProfile {
    pub fn at(&self, x: usize) -> f64 {
        match *self {
            MeasureProfile::Constant(k) => k,
            MeasureProfile::Power(alpha) => ((x + 1) as f64).powf(-alpha),
            MeasureProfile::Geometric(r) => r.powi(x as i32),
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            MeasureProfile::Constant(k) => k > 0.0 && k.is_finite(),
            MeasureProfile::Power(a) => a > 0.0 && a.is_finite(),
            MeasureProfile::Geometric(r) => r > 0.0 && r.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "non-positive measure profile {self:?}"
            )))
        }
    }
}

impl FromStr for MeasureProfile {
    type Err = Error;

    /// `const:<k>`, `power:<alpha>`, `geometric:<r>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("bad measure profile `{s}`"));
        let (name, arg) = s.split_once(':').ok_or_else(bad)?;
        let v: f64 = arg.parse().map_err(|_| bad())?;
        match name {
            "const" | "constant" => Ok(MeasureProfile::Constant(v)),
            "power" => Ok(MeasureProfile::Power(v)),
            "geometric" => Ok(MeasureProfile::Geometric(v)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    /// Vertex count, or depth for binary trees.
    pub size: usize,
    /// Uniform edge weight `b`.
    pub weight: f64,
    pub measure: MeasureProfile,
    /// Uniform killing term `c`.
    pub killing: f64,
    pub seed: u64,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, size: usize) -> Self {
        Self {
            kind,
            size,
            weight: 1.0,
            measure: MeasureProfile::Constant(1.0),
            killing: 0.0,
            seed: 0,
        }
    }

    pub fn path(n: usize) -> Self {
        Self::new(FamilyKind::Path, n)
    }

    pub fn star(n: usize) -> Self {
        Self::new(FamilyKind::Star, n)
    }

    pub fn binary_tree(depth: usize) -> Self {
        Self::new(FamilyKind::BinaryTree, depth)
    }

    pub fn random_sparse(n: usize, density: f64, seed: u64) -> Self {
        Self {
            seed,
            ..Self::new(FamilyKind::RandomSparse { density }, n)
        }
    }

    pub fn with_size(self, size: usize) -> Self {
        Self { size, ..self }
    }

    pub fn with_weight(self, weight: f64) -> Self {
        Self { weight, ..self }
    }

    pub fn with_measure(self, measure: MeasureProfile) -> Self {
        Self { measure, ..self }
    }

    pub fn with_killing(self, killing: f64) -> Self {
        Self { killing, ..self }
    }
}

pub fn generate_family(spec: &FamilySpec) -> Result<WeightedGraph> {
    let non_positive = |what: &str| Err(Error::InvalidParameter(format!("non-positive {what}")));
    if spec.size == 0 && spec.kind != FamilyKind::BinaryTree {
        return non_positive("family size");
    }
    if !(spec.weight > 0.0 && spec.weight.is_finite()) {
        return non_positive("edge weight");
    }
    if !(spec.killing >= 0.0 && spec.killing.is_finite()) {
        return Err(Error::InvalidParameter("negative killing term".into()));
    }
    spec.measure.check()?;

    let b = spec.weight;
    let (n, edges): (usize, Vec<(usize, usize, f64)>) = match spec.kind {
        FamilyKind::Path => (spec.size, (1..spec.size).map(|i| (i - 1, i, b)).collect()),
        FamilyKind::Star => (spec.size, (1..spec.size).map(|i| (0, i, b)).collect()),
        FamilyKind::BinaryTree => {
            if spec.size > 24 {
                return Err(Error::InvalidParameter("binary tree depth above 24".into()));
            }
            let n = (1usize << (spec.size + 1)) - 1;
            (n, (1..n).map(|i| ((i - 1) / 2, i, b)).collect())
        }
        FamilyKind::RandomSparse { density } => {
            if !(density > 0.0 && density <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "density {density} outside (0, 1]"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let n = spec.size;
            let mut edges = Vec::new();
            for x in 0..n {
                for y in x + 1..n {
                    if rng.random::<f64>() < density {
                        edges.push((x, y, b));
                    }
                }
            }
            (n, edges)
        }
        FamilyKind::Edgeless => (spec.size, Vec::new()),
    };
    let measure = (0..n).map(|x| spec.measure.at(x)).collect();
    WeightedGraph::new(measure, vec![spec.killing; n], edges)
}
