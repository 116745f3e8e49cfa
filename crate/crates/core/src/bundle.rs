//! Hermitian bundles over a discrete base.
//!
//! Fibers all have the same dimension `d`, so a section is a flat vector of
//! `n·d` complex numbers laid out vertex by vertex. The fiber inner product
//! is `⟨a, b⟩ = Σ_i a_i · conj(b_i)`.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Tolerances;
use crate::graph::WeightedGraph;
use crate::report::{Verdict, VerificationReport};
use crate::{case, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    dim: usize,
    values: Vec<Complex64>,
}

impl Section {
    pub fn zeros(n: usize, dim: usize) -> Self {
        Self {
            dim,
            values: vec![ZERO; n * dim],
        }
    }

    pub fn new(dim: usize, values: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "{} values do not split into fibers of dimension {dim}",
                values.len()
            )));
        }
        Ok(Self { dim, values })
    }

    /// Scalar function as a section of the trivial line bundle.
    pub fn from_real(f: &[f64]) -> Self {
        Self {
            dim: 1,
            values: f.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    /// Section with `values[x]` placed at vertex `x`.
    pub fn from_fibers(fibers: &[Vec<Complex64>]) -> Result<Self> {
        let dim = fibers.first().map_or(1, Vec::len);
        if fibers.iter().any(|f| f.len() != dim) {
            return Err(Error::InvalidParameter(
                "fibers of unequal dimension".into(),
            ));
        }
        Self::new(dim, fibers.concat())
    }

    pub fn delta(n: usize, dim: usize, vertex: usize, component: usize) -> Self {
        let mut s = Self::zeros(n, dim);
        s.values[vertex * dim + component] = ONE;
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of base vertices.
    pub fn n(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn fiber(&self, x: usize) -> &[Complex64] {
        &self.values[x * self.dim..(x + 1) * self.dim]
    }

    pub fn fiber_mut(&mut self, x: usize) -> &mut [Complex64] {
        &mut self.values[x * self.dim..(x + 1) * self.dim]
    }

    /// Real parts, for sections of the trivial line bundle.
    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn ensure_shape(&self, n: usize, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim,
            });
        }
        if self.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.n(),
            });
        }
        Ok(())
    }

    /// `⟨u, v⟩_{ℓ²(m)} = Σ_x m(x) ⟨u(x), v(x)⟩`.
    pub fn inner_m(&self, other: &Section, measure: &[f64]) -> Complex64 {
        measure
            .iter()
            .enumerate()
            .map(|(x, &m)| fiber_inner(self.fiber(x), other.fiber(x)) * m)
            .sum()
    }

    pub fn norm_m(&self, measure: &[f64]) -> f64 {
        self.inner_m(self, measure).re.max(0.0).sqrt()
    }

    pub fn scale(&self, a: Complex64) -> Section {
        Section {
            dim: self.dim,
            values: self.values.iter().map(|v| v * a).collect(),
        }
    }

    /// `self + a·other`.
    pub fn add_scaled(&self, a: Complex64, other: &Section) -> Section {
        Section {
            dim: self.dim,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| u + a * v)
                .collect(),
        }
    }
}

pub fn fiber_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn fiber_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Pointwise fiber norm `|u|(x) = |u(x)|_x`.
pub fn absolute(u: &Section, g: &WeightedGraph) -> Result<Vec<f64>> {
    if u.n() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: u.n(),
        });
    }
    Ok((0..u.n()).map(|x| fiber_norm(u.fiber(x))).collect())
}

/// Polar pairing: the section `f · sgn u`.
///
/// Where `u(x) = 0` the direction is the first basis vector of the fiber.
/// The result `η` satisfies `|η| = f` and `⟨u(x), η(x)⟩ = |u(x)||η(x)|`.
pub fn sgn_pair(u: &Section, f: &[f64]) -> Result<Section> {
    if f.len() != u.n() {
        return Err(Error::DimensionMismatch {
            expected: u.n(),
            found: f.len(),
        });
    }
    if let Some((x, v)) = f.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "negative entry f({x}) = {v}"
        )));
    }
    let mut eta = Section::zeros(u.n(), u.dim());
    for (x, &fx) in f.iter().enumerate() {
        let ux = u.fiber(x);
        let norm = fiber_norm(ux);
        let out = eta.fiber_mut(x);
        if norm > 0.0 {
            let s = fx / norm;
            for (o, v) in out.iter_mut().zip(ux) {
                *o = v * s;
            }
        } else {
            out[0] = Complex64::new(fx, 0.0);
        }
    }
    Ok(eta)
}

/// PASS iff `|⟨u(x), v(x)⟩ − |u(x)||v(x)|| ≤ tol` at every vertex.
pub fn is_paired(u: &Section, v: &Section, g: &WeightedGraph, tol: f64) -> VerificationReport {
    let mut report = VerificationReport::new("is_paired", 0);
    if u.ensure_shape(g.n(), u.dim()).is_err() || v.ensure_shape(g.n(), u.dim()).is_err() {
        report.add_violation("section shapes do not match the graph");
        return report.conclude(tol);
    }
    for x in 0..g.n() {
        let (a, b) = (u.fiber(x), v.fiber(x));
        let gap = (fiber_inner(a, b) - fiber_norm(a) * fiber_norm(b)).norm();
        report.observe(gap, || case! { "vertex" => x });
    }
    report.conclude(tol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorInequalityOutcome {
    pub lhs: f64,
    pub rhs: f64,
    pub verdict: Verdict,
}

fn rescale(a: &[Complex64], len: f64) -> Vec<Complex64> {
    let norm = fiber_norm(a);
    if norm == 0.0 {
        vec![ZERO; a.len()]
    } else {
        a.iter().map(|v| v * (len / norm)).collect()
    }
}

/// For `α ≤ ‖a‖`, `β ≤ ‖b‖` compares `‖ã − b̃‖²` against
/// `|α − β|² + ‖a − b‖²`, where `ã = α a/‖a‖` (zero if `a = 0`) and likewise `b̃`.
///
/// A violated hypothesis yields `PreconditionFailed`, not a counterexample.
pub fn signed_vector_inequality_check(
    a: &[Complex64],
    b: &[Complex64],
    alpha: f64,
    beta: f64,
    tol: f64,
) -> VectorInequalityOutcome {
    let a_t = rescale(a, alpha);
    let b_t = rescale(b, beta);
    let lhs: f64 = a_t.iter().zip(&b_t).map(|(x, y)| (x - y).norm_sqr()).sum();
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let rhs = (alpha - beta).powi(2) + diff;
    let hypothesis = a.len() == b.len()
        && alpha >= 0.0
        && beta >= 0.0
        && alpha <= fiber_norm(a) + tol
        && beta <= fiber_norm(b) + tol;
    let verdict = if !hypothesis {
        Verdict::PreconditionFailed
    } else if lhs <= rhs + tol {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    VectorInequalityOutcome { lhs, rhs, verdict }
}

/// `‖A*A − I‖_max`.
pub fn unitarity_residual(a: &CMatrix) -> f64 {
    let gram = a.adjoint() * a;
    let id = CMatrix::identity(a.nrows(), a.ncols());
    (gram - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Nearest unitary matrix in Frobenius norm, `U V*` from the SVD.
pub fn polar_projection(a: &CMatrix) -> CMatrix {
    let svd = a.clone().svd(true, true);
    svd.u.expect("u requested") * svd.v_t.expect("v_t requested")
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn random_unitary(d: usize, rng: &mut impl Rng) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            ONE
        };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Unitary transports `Φ_{x,y}` on the edges of a graph.
///
/// Only the `x < y` direction is stored; `Φ_{y,x} = Φ_{x,y}^*`.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleConnection {
    dim: usize,
    n: usize,
    index: HashMap<(usize, usize), usize>,
    edges: Vec<(usize, usize)>,
    transports: Vec<CMatrix>,
}

impl BundleConnection {
    /// Builds a connection from `((x, y), Φ_{x,y})` pairs, one per edge of `g`.
    ///
    /// Transports with unitarity residual in `(tol.unitarity, tol.unitarity_repair]`
    /// are re-orthonormalized; larger residuals are rejected.
    pub fn new(
        g: &WeightedGraph,
        dim: usize,
        transports: impl IntoIterator<Item = ((usize, usize), CMatrix)>,
        tol: &Tolerances,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "fiber dimension must be at least 1".into(),
            ));
        }
        let mut given: HashMap<(usize, usize), CMatrix> = HashMap::new();
        for ((x, y), mut phi) in transports {
            if phi.nrows() != dim || phi.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: phi.nrows(),
                });
            }
            let key = if x < y {
                (x, y)
            } else {
                phi = phi.adjoint();
                (y, x)
            };
            if g.weight(key.0, key.1) <= 0.0 || key.0 == key.1 {
                return Err(Error::InvalidParameter(format!(
                    "transport given on non-edge ({}, {})",
                    key.0, key.1
                )));
            }
            if given.insert(key, phi).is_some() {
                return Err(Error::DuplicateEdge(key.0, key.1));
            }
        }
        let mut edges = Vec::new();
        let mut mats = Vec::new();
        for e in g.proper_edges() {
            let phi = given
                .remove(&(e.x, e.y))
                .ok_or(Error::MissingTransport(e.x, e.y))?;
            let residual = unitarity_residual(&phi);
            let phi = if residual <= tol.unitarity {
                phi
            } else if residual <= tol.unitarity_repair {
                polar_projection(&phi)
            } else {
                return Err(Error::NotUnitary {
                    x: e.x,
                    y: e.y,
                    residual,
                });
            };
            edges.push((e.x, e.y));
            mats.push(phi);
        }
        let index = edges.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        Ok(Self {
            dim,
            n: g.n(),
            index,
            edges,
            transports: mats,
        })
    }

    /// `Φ ≡ I`.
    pub fn trivial(g: &WeightedGraph, dim: usize) -> Self {
        let id = CMatrix::identity(dim, dim);
        Self::new(
            g,
            dim,
            g.proper_edges().map(|e| ((e.x, e.y), id.clone())),
            &Tolerances::default(),
        )
        .expect("identity transports are unitary")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored `(x, y)` pairs with `x < y` and their transports.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &CMatrix)> {
        self.edges.iter().copied().zip(&self.transports)
    }

    /// `Φ_{x,y}`, or `None` if `{x, y}` is not an edge.
    pub fn transport(&self, x: usize, y: usize) -> Option<CMatrix> {
        if x < y {
            self.index.get(&(x, y)).map(|&i| self.transports[i].clone())
        } else {
            self.index
                .get(&(y, x))
                .map(|&i| self.transports[i].adjoint())
        }
    }

    pub fn max_unitarity_residual(&self) -> f64 {
        self.transports
            .iter()
            .map(unitarity_residual)
            .fold(0.0, f64::max)
    }

    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.dim as u64).to_le_bytes());
        for ((x, y), phi) in self.iter() {
            hasher.update((x as u64).to_le_bytes());
            hasher.update((y as u64).to_le_bytes());
            for z in phi.iter() {
                hasher.update(z.re.to_le_bytes());
                hasher.update(z.im.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// Seeded Haar-random unitary per edge, visited in edge order.
pub fn random_unitary_connection(
    g: &WeightedGraph,
    dim: usize,
    seed: u64,
) -> Result<BundleConnection> {
    if dim == 0 {
        return Err(Error::InvalidParameter(
            "fiber dimension must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transports: Vec<_> = g
        .proper_edges()
        .map(|e| ((e.x, e.y), random_unitary(dim, &mut rng)))
        .collect();
    BundleConnection::new(g, dim, transports, &Tolerances::default())
}

/// Pointwise positive Hermitian endomorphisms `W(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EndomorphismField {
    dim: usize,
    w: Vec<CMatrix>,
}

impl EndomorphismField {
    pub fn new(dim: usize, w: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        for (x, m) in w.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.nrows(),
                });
            }
            let asym = (m - m.adjoint())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if asym > tol.hermitian {
                return Err(Error::InvalidEndomorphism {
                    vertex: x,
                    reason: format!("not Hermitian (residual {asym:.3e})"),
                });
            }
            let lmin = min_eigenvalue(m);
            if lmin < -tol.psd {
                return Err(Error::InvalidEndomorphism {
                    vertex: x,
                    reason: format!("not positive (lowest eigenvalue {lmin:.3e})"),
                });
            }
        }
        Ok(Self { dim, w })
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Self {
            dim,
            w: vec![CMatrix::zeros(dim, dim); n],
        }
    }

    /// `W(x) = c(x)·I`.
    pub fn from_killing(g: &WeightedGraph, dim: usize) -> Self {
        let w = g
            .killing()
            .iter()
            .map(|&c| CMatrix::identity(dim, dim) * Complex64::new(c, 0.0))
            .collect();
        Self { dim, w }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn at(&self, x: usize) -> &CMatrix {
        &self.w[x]
    }

    pub fn min_eigenvalues(&self) -> Vec<f64> {
        self.w.iter().map(min_eigenvalue).collect()
    }
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Checks the domination hypothesis `⟨W(x)v, v⟩ ≥ c(x)|v|²`, i.e.
/// `λ_min(W(x)) ≥ c(x)` at every vertex.
pub fn check_potential_dominates_killing(
    g: &WeightedGraph,
    w: &EndomorphismField,
    tol: f64,
) -> VerificationReport {
    let mut report = VerificationReport::new("potential_dominates_killing", 0);
    if w.n() != g.n() {
        report.add_violation("endomorphism field does not match the graph");
        return report.conclude(tol);
    }
    for (x, lmin) in w.min_eigenvalues().into_iter().enumerate() {
        let c = g.killing()[x];
        report.observe(
            c - lmin,
            || case! { "vertex" => x, "lambda_min" => lmin, "c" => c },
        );
    }
    report.conclude(tol)
}

type Entries = Vec<[f64; 2]>;

/// On-disk bundle format:
/// `{ "dim": d, "phi": [[x, y, [[re,im],...]]], "w": [[x, [[re,im],...]]] }`.
/// Matrices are row-major lists of `d²` entries; `phi` is given for `x < y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleFile {
    pub dim: usize,
    #[serde(default)]
    pub phi: Vec<(usize, usize, Entries)>,
    #[serde(default)]
    pub w: Vec<(usize, Entries)>,
}

fn matrix_from_entries(dim: usize, entries: &Entries) -> Result<CMatrix> {
    if entries.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            found: entries.len(),
        });
    }
    Ok(CMatrix::from_row_iterator(
        dim,
        dim,
        entries.iter().map(|&[re, im]| Complex64::new(re, im)),
    ))
}

fn entries_from_matrix(m: &CMatrix) -> Entries {
    m.transpose().iter().map(|z| [z.re, z.im]).collect()
}

impl BundleFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn from_parts(conn: &BundleConnection, w: Option<&EndomorphismField>) -> Self {
        BundleFile {
            dim: conn.dim(),
            phi: conn
                .iter()
                .map(|((x, y), m)| (x, y, entries_from_matrix(m)))
                .collect(),
            w: w.map(|w| {
                (0..w.n())
                    .map(|x| (x, entries_from_matrix(w.at(x))))
                    .collect()
            })
            .unwrap_or_default(),
        }
    }

    fn raw_endomorphisms(&self, n: usize) -> Result<Vec<CMatrix>> {
        let mut w = vec![CMatrix::zeros(self.dim, self.dim); n];
        let mut seen = vec![false; n];
        for (x, entries) in &self.w {
            if *x >= n {
                return Err(Error::VertexOutOfRange { index: *x, n });
            }
            if std::mem::replace(&mut seen[*x], true) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate endomorphism at vertex {x}"
                )));
            }
            w[*x] = matrix_from_entries(self.dim, entries)?;
        }
        Ok(w)
    }

    pub fn build(
        &self,
        g: &WeightedGraph,
        tol: &Tolerances,
    ) -> Result<(BundleConnection, EndomorphismField)> {
        let mut transports = Vec::with_capacity(self.phi.len());
        for (x, y, entries) in &self.phi {
            transports.push(((*x, *y), matrix_from_entries(self.dim, entries)?));
        }
        let conn = BundleConnection::new(g, self.dim, transports, tol)?;
        let w = EndomorphismField::new(self.dim, self.raw_endomorphisms(g.n())?, tol)?;
        Ok((conn, w))
    }
}

/// Checks a bundle file against the connection and endomorphism invariants
/// without building it; every violation is listed.
pub fn validate_bundle(
    g: &WeightedGraph,
    file: &BundleFile,
    tol: &Tolerances,
) -> VerificationReport {
    let mut report = VerificationReport::new("validate_bundle", 0);
    let d = file.dim;
    if d == 0 {
        report.add_violation("fiber dimension must be at least 1");
        return report.conclude(tol.unitarity_repair);
    }
    let mut covered = HashMap::new();
    for (x, y, entries) in &file.phi {
        let Ok(phi) = matrix_from_entries(d, entries) else {
            report.add_violation(format!("transport ({x}, {y}) has wrong number of entries"));
            continue;
        };
        if x >= y {
            report.add_violation(format!("transport ({x}, {y}) must be listed with x < y"));
        }
        if *x.max(y) >= g.n() || g.weight(*x, *y) <= 0.0 || x == y {
            report.add_violation(format!("transport ({x}, {y}) given on a non-edge"));
            continue;
        }
        if covered.insert((*x.min(y), *x.max(y)), ()).is_some() {
            report.add_violation(format!("duplicate transport ({x}, {y})"));
        }
        let residual = unitarity_residual(&phi);
        if residual > tol.unitarity_repair {
            report.add_violation(format!(
                "transport ({x}, {y}) not unitary: residual {residual:.3e}"
            ));
        }
        report.observe(
            residual,
            || case! { "edge" => [x, y], "unitarity_residual" => residual },
        );
    }
    for e in g.proper_edges() {
        if !covered.contains_key(&(e.x, e.y)) {
            report.add_violation(format!("missing transport for edge ({}, {})", e.x, e.y));
        }
    }
    match file.raw_endomorphisms(g.n()) {
        Err(e) => report.add_violation(format!("endomorphism field: {e}")),
        Ok(ws) => {
            for (x, m) in ws.iter().enumerate() {
                let asym = (m - m.adjoint())
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                if asym > tol.hermitian {
                    report.add_violation(format!("W({x}) not Hermitian: residual {asym:.3e}"));
                    continue;
                }
                let lmin = min_eigenvalue(m);
                if lmin < -tol.psd {
                    report.add_violation(format!(
                        "W({x}) not pointwise positive: lambda_min = {lmin:.3e}"
                    ));
                }
            }
        }
    }
    report.conclude(tol.unitarity_repair)
}

/// Complex Gaussian section.
pub fn random_section(n: usize, dim: usize, rng: &mut impl Rng) -> Section {
    let values = (0..n * dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    Section { dim, values }
}

pub(crate) fn apply_matrix(m: &CMatrix, v: &[Complex64]) -> Vec<Complex64> {
    (m * DVector::from_column_slice(v)).as_slice().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_family, FamilySpec};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn absolute_values() {
        let g1 = generate_family(&FamilySpec::path(1)).unwrap();
        assert_eq!(absolute(&Section::zeros(1, 3), &g1).unwrap(), vec![0.0]);
        let u = Section::new(2, vec![c(3.0, 0.0), c(4.0, 0.0)]).unwrap();
        assert_eq!(absolute(&u, &g1).unwrap(), vec![5.0]);
        let u = Section::new(1, vec![c(1.0, 1.0)]).unwrap();
        assert!((absolute(&u, &g1).unwrap()[0] - 2f64.sqrt()).abs() < 1e-15);
        let g2 = generate_family(&FamilySpec::path(2)).unwrap();
        assert!(absolute(&u, &g2).is_err());
    }

    #[test]
    fn sgn_pair_cases() {
        let u = Section::new(2, vec![c(1.0, 2.0), c(0.0, -1.0)]).unwrap();
        let f = vec![fiber_norm(u.fiber(0))];
        let eta = sgn_pair(&u, &f).unwrap();
        for (a, b) in eta.values().iter().zip(u.values()) {
            assert!((a - b).norm() < 1e-15);
        }

        let zero = Section::zeros(1, 2);
        let eta = sgn_pair(&zero, &[2.0]).unwrap();
        assert_eq!(eta.values(), &[c(2.0, 0.0), c(0.0, 0.0)]);

        let s = 3.0 / 2f64.sqrt();
        let u = Section::new(2, vec![c(s, 0.0), c(0.0, s)]).unwrap();
        let eta = sgn_pair(&u, &[1.0]).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!((eta.values()[0] - c(r, 0.0)).norm() < 1e-15);
        assert!((eta.values()[1] - c(0.0, r)).norm() < 1e-15);

        assert!(sgn_pair(&u, &[-1.0]).is_err());
    }

    #[test]
    fn pairing_cases() {
        let g = generate_family(&FamilySpec::path(1)).unwrap();
        let u = Section::from_real(&[1.0]);
        let v = Section::from_real(&[-1.0]);
        assert_eq!(is_paired(&u, &v, &g, 1e-12).verdict, Verdict::Fail);
        assert!(is_paired(&u, &u, &g, 1e-12).passed());
    }

    #[test]
    fn vector_inequality_cases() {
        let a = [c(1.0, 0.0), c(0.0, 0.0)];
        let out = signed_vector_inequality_check(&a, &a, 1.0, 1.0, 1e-12);
        assert_eq!(out.lhs, 0.0);
        assert_eq!(out.verdict, Verdict::Pass);

        let b = [c(0.0, 0.0), c(1.0, 0.0)];
        let out = signed_vector_inequality_check(&a, &b, 1.0, 1.0, 1e-12);
        assert!((out.lhs - 2.0).abs() < 1e-15 && (out.rhs - 2.0).abs() < 1e-15);
        assert_eq!(out.verdict, Verdict::Pass);

        let a2 = [c(2.0, 0.0), c(0.0, 0.0)];
        let b2 = [c(0.0, 0.0), c(2.0, 0.0)];
        let out = signed_vector_inequality_check(&a2, &b2, 1.0, 2.0, 1e-12);
        // ã = (1,0), b̃ = (0,2): lhs = 5, rhs = 1 + 8 = 9
        assert!((out.lhs - 5.0).abs() < 1e-14 && (out.rhs - 9.0).abs() < 1e-14);
        assert_eq!(out.verdict, Verdict::Pass);

        let out = signed_vector_inequality_check(&a, &b, 3.0, 0.5, 1e-12);
        assert_eq!(out.verdict, Verdict::PreconditionFailed);
    }

    #[test]
    fn random_connections() {
        let g = generate_family(&FamilySpec::random_sparse(12, 0.4, 2)).unwrap();
        let c1 = random_unitary_connection(&g, 1, 5).unwrap();
        for (_, phi) in c1.iter() {
            assert!((phi[(0, 0)].norm() - 1.0).abs() < 1e-14);
        }
        assert_eq!(c1, random_unitary_connection(&g, 1, 5).unwrap());
        for seed in 0..100 {
            let c3 = random_unitary_connection(&g, 3, seed).unwrap();
            assert!(c3.max_unitarity_residual() <= 1e-12);
        }
    }

    #[test]
    fn reverse_transport_is_adjoint() {
        let g = generate_family(&FamilySpec::path(3)).unwrap();
        let conn = random_unitary_connection(&g, 2, 1).unwrap();
        let fwd = conn.transport(0, 1).unwrap();
        let back = conn.transport(1, 0).unwrap();
        let prod = fwd * back;
        assert!((prod - CMatrix::identity(2, 2))
            .iter()
            .all(|z| z.norm() < 1e-14));
        assert!(conn.transport(0, 2).is_none());
    }

    #[test]
    fn unitarity_repair_and_rejection() {
        let g = generate_family(&FamilySpec::path(2)).unwrap();
        let tol = Tolerances::default();
        let nearly = CMatrix::identity(2, 2) * c(1.0 + 1e-10, 0.0);
        let conn = BundleConnection::new(&g, 2, [((0, 1), nearly)], &tol).unwrap();
        assert!(conn.max_unitarity_residual() <= 1e-12);

        let far = CMatrix::identity(2, 2) * c(1.1, 0.0);
        assert!(matches!(
            BundleConnection::new(&g, 2, [((0, 1), far)], &tol),
            Err(Error::NotUnitary { .. })
        ));
        assert!(matches!(
            BundleConnection::new(&g, 2, [], &tol),
            Err(Error::MissingTransport(0, 1))
        ));
    }

    #[test]
    fn endomorphism_validation() {
        let tol = Tolerances::default();
        let mut bad = CMatrix::zeros(2, 2);
        bad[(0, 1)] = c(1.0, 0.0);
        assert!(EndomorphismField::new(2, vec![bad], &tol).is_err());
        let neg = CMatrix::identity(2, 2) * c(-1.0, 0.0);
        assert!(EndomorphismField::new(2, vec![neg], &tol).is_err());
        let ok = CMatrix::identity(2, 2) * c(0.5, 0.0);
        assert!(EndomorphismField::new(2, vec![ok], &tol).is_ok());
    }

    #[test]
    fn bundle_file_round_trip_and_validation() {
        let g = generate_family(&FamilySpec::random_sparse(6, 0.6, 4)).unwrap();
        let conn = random_unitary_connection(&g, 2, 9).unwrap();
        let w = EndomorphismField::from_killing(&g, 2);
        let file = BundleFile::from_parts(&conn, Some(&w));
        let tol = Tolerances::default();
        assert!(validate_bundle(&g, &file, &tol).passed());
        let (conn2, w2) = file.build(&g, &tol).unwrap();
        assert_eq!(conn2.content_hash(), conn.content_hash());
        assert_eq!(w2, w);

        let mut broken = file.clone();
        broken.phi[0].2[0] = [5.0, 0.0];
        let r = validate_bundle(&g, &broken, &tol);
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(broken.build(&g, &tol).is_err());
    }

    #[test]
    fn absolute_map_axiom_on_random_sections() {
        let g = generate_family(
            &FamilySpec::random_sparse(10, 0.3, 1)
                .with_measure(crate::graph::MeasureProfile::Power(0.5)),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let xi = random_section(10, 3, &mut rng);
            let eta = random_section(10, 3, &mut rng);
            let lhs = xi.inner_m(&eta, g.measure()).norm();
            let ax = absolute(&xi, &g).unwrap();
            let ae = absolute(&eta, &g).unwrap();
            let rhs: f64 = (0..10).map(|x| ax[x] * ae[x] * g.measure()[x]).sum();
            assert!(lhs <= rhs + 1e-10);
            let self_pair = xi.inner_m(&xi, g.measure()).norm();
            let self_abs: f64 = (0..10).map(|x| ax[x] * ax[x] * g.measure()[x]).sum();
            assert!((self_pair - self_abs).abs() <= 1e-10 * self_abs.max(1.0));
        }
    }

    fn fiber_strategy(d: usize) -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), d)
            .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
    }

    proptest! {
        #[test]
        fn sgn_pair_is_paired_with_prescribed_modulus(
            (u, f) in (1usize..5).prop_flat_map(|d| (
                prop::collection::vec(fiber_strategy(d), 1..8),
                prop::collection::vec(0.0..5.0f64, 8),
            ))
        ) {
            let n = u.len();
            let u = Section::from_fibers(&u).unwrap();
            let f = &f[..n];
            let g = generate_family(&FamilySpec::path(n)).unwrap();
            let eta = sgn_pair(&u, f).unwrap();
            let abs = absolute(&eta, &g).unwrap();
            for x in 0..n {
                prop_assert!((abs[x] - f[x]).abs() <= 1e-12 * f[x].max(1.0));
            }
            prop_assert!(is_paired(&u, &eta, &g, 1e-12 * 25.0).passed());
        }

        #[test]
        fn vector_inequality_never_fails(
            (a, b, s, t) in (1usize..9).prop_flat_map(|d| (
                fiber_strategy(d), fiber_strategy(d), 0.0..=1.0f64, 0.0..=1.0f64,
            ))
        ) {
            let alpha = s * fiber_norm(&a);
            let beta = t * fiber_norm(&b);
            let out = signed_vector_inequality_check(&a, &b, alpha, beta, 1e-12);
            prop_assert_eq!(out.verdict, Verdict::Pass, "lhs {} rhs {}", out.lhs, out.rhs);
        }
    }
}
