//! Scalar and magnetic Schrödinger forms as assembled operators.
//!
//! A [`FormOperator`] stores the Hermitian *energy* matrix `K` with
//! `Q(u, v) = v* K u`, together with the vertex measure. The generator in
//! `ℓ²(X, m; E)` is `L = M⁻¹K` (with `M = diag(m) ⊗ I_d`), which is
//! self-adjoint for the weighted inner product, so
//! `Q(u, v) = ⟨L u, v⟩_{ℓ²(m)}`. Forms are linear in the first argument.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundle::{
    absolute, apply_matrix, fiber_norm, random_section, sgn_pair, BundleConnection, CMatrix,
    EndomorphismField, Section,
};
use crate::graph::{Truncation, WeightedGraph};
use crate::report::{Verdict, VerificationReport};
use crate::sparse::CsrMatrix;
use crate::{case, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundaryCondition {
    Neumann,
    /// Restriction to sections supported on these parent vertices.
    Dirichlet(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormMeta {
    pub graph_hash: String,
    pub connection_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormOperator {
    energy: CsrMatrix,
    measure: Vec<f64>,
    dim: usize,
    boundary: BoundaryCondition,
    meta: FormMeta,
}

impl FormOperator {
    /// Number of base vertices.
    pub fn n(&self) -> usize {
        self.measure.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Operator size `n·d`.
    pub fn size(&self) -> usize {
        self.energy.size()
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn energy(&self) -> &CsrMatrix {
        &self.energy
    }

    pub fn boundary(&self) -> &BoundaryCondition {
        &self.boundary
    }

    pub fn meta(&self) -> &FormMeta {
        &self.meta
    }

    /// Measure repeated per fiber component.
    pub fn expanded_measure(&self) -> Vec<f64> {
        self.measure
            .iter()
            .flat_map(|&m| std::iter::repeat_n(m, self.dim))
            .collect()
    }

    pub fn energy_dense(&self) -> CMatrix {
        self.energy.to_dense()
    }

    /// `M⁻¹K` as a dense matrix.
    pub fn generator_dense(&self) -> CMatrix {
        let m = self.expanded_measure();
        let mut k = self.energy_dense();
        for (i, mut row) in k.row_iter_mut().enumerate() {
            row /= Complex64::new(m[i], 0.0);
        }
        k
    }

    /// `M^{-1/2} K M^{-1/2}`: Hermitian in the standard inner product and
    /// unitarily equivalent to the generator.
    pub fn symmetrized_dense(&self) -> CMatrix {
        let s: Vec<f64> = self
            .expanded_measure()
            .iter()
            .map(|m| m.sqrt().recip())
            .collect();
        let mut k = self.energy_dense();
        for r in 0..k.nrows() {
            for c in 0..k.ncols() {
                k[(r, c)] *= s[r] * s[c];
            }
        }
        k
    }

    /// `L u = M⁻¹ K u`.
    pub fn apply_generator(&self, u: &Section) -> Result<Section> {
        u.ensure_shape(self.n(), self.dim)?;
        let m = self.expanded_measure();
        let mut out = self.energy.matvec(u.values());
        for (o, mi) in out.iter_mut().zip(&m) {
            *o /= *mi;
        }
        Section::new(self.dim, out)
    }

    /// `Q(u) = u* K u`.
    pub fn quadratic(&self, u: &Section) -> Result<f64> {
        Ok(evaluate_form(self, u, u)?.re)
    }

    pub fn hermitian_residual(&self) -> f64 {
        self.energy.hermitian_residual()
    }

    /// Lowest eigenvalue of the generator (dense).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        if self.size() == 0 {
            return Err(Error::Empty("operator"));
        }
        let eig = self.symmetrized_dense().symmetric_eigenvalues();
        Ok(eig.iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

fn block_triplets(
    out: &mut Vec<(usize, usize, Complex64)>,
    d: usize,
    x: usize,
    y: usize,
    block: &CMatrix,
    scale: f64,
) {
    for i in 0..d {
        for j in 0..d {
            let v = block[(i, j)] * scale;
            if v != Complex64::new(0.0, 0.0) {
                out.push((x * d + i, y * d + j, v));
            }
        }
    }
}

fn check_inputs(g: &WeightedGraph, conn: &BundleConnection, w: &EndomorphismField) -> Result<()> {
    g.ensure_valid()?;
    for found in [conn.n(), w.n()] {
        if found != g.n() {
            return Err(Error::DimensionMismatch {
                expected: g.n(),
                found,
            });
        }
    }
    if conn.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: conn.dim(),
            found: w.dim(),
        });
    }
    Ok(())
}

/// Energy matrix of `½ Σ_{x,y} b(x,y)|u(x) − Φ_{x,y}u(y)|² + Σ_x ⟨W(x)u(x), u(x)⟩`.
///
/// Each unordered edge contributes both orientations at once:
/// `b(I, −Φ_{x,y}; −Φ_{x,y}*, I)` on the `(x, y)` blocks.
pub fn assemble_magnetic(
    g: &WeightedGraph,
    conn: &BundleConnection,
    w: &EndomorphismField,
) -> Result<FormOperator> {
    check_inputs(g, conn, w)?;
    let d = conn.dim();
    let id = CMatrix::identity(d, d);
    let mut triplets = Vec::new();
    for ((x, y), phi) in conn.iter() {
        let b = g.weight(x, y);
        block_triplets(&mut triplets, d, x, x, &id, b);
        block_triplets(&mut triplets, d, y, y, &id, b);
        block_triplets(&mut triplets, d, x, y, phi, -b);
        block_triplets(&mut triplets, d, y, x, &phi.adjoint(), -b);
    }
    for x in 0..g.n() {
        block_triplets(&mut triplets, d, x, x, w.at(x), 1.0);
    }
    Ok(FormOperator {
        energy: CsrMatrix::from_triplets(g.n() * d, triplets),
        measure: g.measure().to_vec(),
        dim: d,
        boundary: BoundaryCondition::Neumann,
        meta: FormMeta {
            graph_hash: g.content_hash(),
            connection_hash: Some(conn.content_hash()),
        },
    })
}

/// Energy matrix of `½ Σ b(x,y)|f(x) − f(y)|² + Σ c(x)|f(x)|²`.
pub fn assemble_scalar(g: &WeightedGraph) -> Result<FormOperator> {
    g.ensure_valid()?;
    let one = Complex64::new(1.0, 0.0);
    let mut triplets = Vec::new();
    for e in g.proper_edges() {
        triplets.push((e.x, e.x, one * e.weight));
        triplets.push((e.y, e.y, one * e.weight));
        triplets.push((e.x, e.y, -one * e.weight));
        triplets.push((e.y, e.x, -one * e.weight));
    }
    for (x, &c) in g.killing().iter().enumerate() {
        if c != 0.0 {
            triplets.push((x, x, one * c));
        }
    }
    Ok(FormOperator {
        energy: CsrMatrix::from_triplets(g.n(), triplets),
        measure: g.measure().to_vec(),
        dim: 1,
        boundary: BoundaryCondition::Neumann,
        meta: FormMeta {
            graph_hash: g.content_hash(),
            connection_hash: None,
        },
    })
}

/// Principal block submatrix on the interior of `t`: the form restricted to
/// sections vanishing outside the interior.
pub fn dirichlet_restriction(form: &FormOperator, t: &Truncation<'_>) -> Result<FormOperator> {
    if form.boundary != BoundaryCondition::Neumann {
        return Err(Error::InvalidParameter("form is already restricted".into()));
    }
    if form.n() != t.parent.n() {
        return Err(Error::DimensionMismatch {
            expected: form.n(),
            found: t.parent.n(),
        });
    }
    if let Some(&x) = t.interior.iter().find(|&&x| x >= form.n()) {
        return Err(Error::VertexOutOfRange {
            index: x,
            n: form.n(),
        });
    }
    let d = form.dim;
    let keep: Vec<usize> = t
        .interior
        .iter()
        .flat_map(|&x| (0..d).map(move |k| x * d + k))
        .collect();
    Ok(FormOperator {
        energy: form.energy.principal_submatrix(&keep),
        measure: t.interior.iter().map(|&x| form.measure[x]).collect(),
        dim: d,
        boundary: BoundaryCondition::Dirichlet(t.interior.clone()),
        meta: form.meta.clone(),
    })
}

/// `Q(u, v) = v* K u = ⟨L u, v⟩_{ℓ²(m)}`.
pub fn evaluate_form(form: &FormOperator, u: &Section, v: &Section) -> Result<Complex64> {
    u.ensure_shape(form.n(), form.dim)?;
    v.ensure_shape(form.n(), form.dim)?;
    let ku = form.energy.matvec(u.values());
    Ok(ku.iter().zip(v.values()).map(|(a, b)| a * b.conj()).sum())
}

/// `√(Q(u) + μ‖u‖²_{ℓ²(m)})`.
pub fn form_norm(form: &FormOperator, u: &Section, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "form norm shift must be positive, got {mu}"
        )));
    }
    let q = form.quadratic(u)?;
    Ok((q + mu * u.norm_m(&form.measure).powi(2)).max(0.0).sqrt())
}

/// Sesquilinear form recovered from a quadratic form by polarization,
/// `q(u, v) = ¼ Σ_{k=1}^{4} i^k q(u + i^k v)`.
pub fn polarize(q: impl Fn(&Section) -> f64, u: &Section, v: &Section) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut ik = Complex64::new(0.0, 1.0);
    for _ in 0..4 {
        acc += ik * q(&u.add_scaled(ik, v));
        ik *= Complex64::new(0.0, 1.0);
    }
    acc / 4.0
}

/// The defining double sum `½ Σ_{x,y} b(x,y)|u(x) − Φ_{x,y}u(y)|² + Σ_x ⟨W(x)u(x), u(x)⟩`,
/// evaluated term by term over ordered pairs.
pub fn magnetic_defining_sum(
    g: &WeightedGraph,
    conn: &BundleConnection,
    w: &EndomorphismField,
    u: &Section,
) -> Result<f64> {
    check_inputs(g, conn, w)?;
    u.ensure_shape(g.n(), conn.dim())?;
    let mut total = 0.0;
    for x in 0..g.n() {
        for &(y, b) in g.neighbors(x) {
            let phi = conn.transport(x, y).expect("neighbors carry transports");
            let moved = apply_matrix(&phi, u.fiber(y));
            let diff: f64 = u
                .fiber(x)
                .iter()
                .zip(&moved)
                .map(|(a, m)| (a - m).norm_sqr())
                .sum();
            total += 0.5 * b * diff;
        }
        let wu = apply_matrix(w.at(x), u.fiber(x));
        total += crate::bundle::fiber_inner(&wu, u.fiber(x)).re;
    }
    Ok(total)
}

/// `½ Σ_{x,y} b(x,y)|f(x) − f(y)|² + Σ_x c(x)|f(x)|²` for a scalar section.
pub fn scalar_defining_sum(g: &WeightedGraph, f: &Section) -> Result<f64> {
    f.ensure_shape(g.n(), 1)?;
    let v = f.values();
    let mut total = 0.0;
    for x in 0..g.n() {
        for &(y, b) in g.neighbors(x) {
            total += 0.5 * b * (v[x] - v[y]).norm_sqr();
        }
        total += g.killing()[x] * v[x].norm_sqr();
    }
    Ok(total)
}

fn require_scalar(form: &FormOperator) -> Result<()> {
    if form.dim != 1 {
        return Err(Error::InvalidParameter(format!(
            "scalar form required, got fiber dimension {}",
            form.dim
        )));
    }
    Ok(())
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// First Beurling-Deny criterion on sampled functions: `Q(|f|) ≤ Q(f)` for
/// complex `f`, and `Q(f⁺) ≤ Q(f)` for real `f`.
pub fn check_first_bd(
    form: &FormOperator,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<VerificationReport> {
    require_scalar(form)?;
    let n = form.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = VerificationReport::new("first_beurling_deny", seed);
    for s in 0..samples {
        let f = random_section(n, 1, &mut rng);
        let q_f = form.quadratic(&f)?;
        let abs_f = Section::from_real(&f.values().iter().map(|z| z.norm()).collect::<Vec<_>>());
        let q_abs = form.quadratic(&abs_f)?;
        report.observe(
            q_abs - q_f,
            || case! { "sample" => s, "kind" => "modulus", "q_f" => q_f, "q_abs" => q_abs },
        );

        let real: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
        let q_real = form.quadratic(&Section::from_real(&real))?;
        let plus: Vec<f64> = real.iter().map(|v| v.max(0.0)).collect();
        let q_plus = form.quadratic(&Section::from_real(&plus))?;
        report.observe(q_plus - q_real, || case! { "sample" => s, "kind" => "positive_part", "q_f" => q_real, "q_plus" => q_plus });
    }
    Ok(report.conclude(tol))
}

/// `‖f∧g‖²_q ≤ ‖f‖²_q + ‖g‖²_q` with form norm shift `μ = 1`.
pub fn check_lattice_inequality(
    form: &FormOperator,
    f: &[f64],
    g: &[f64],
    tol: f64,
) -> Result<VerificationReport> {
    require_scalar(form)?;
    let mut report = VerificationReport::new("lattice_inequality", 0);
    observe_lattice(&mut report, form, f, g, 0)?;
    Ok(report.conclude(tol))
}

fn observe_lattice(
    report: &mut VerificationReport,
    form: &FormOperator,
    f: &[f64],
    g: &[f64],
    sample: usize,
) -> Result<()> {
    if f.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: f.len(),
            found: g.len(),
        });
    }
    let meet: Vec<f64> = f.iter().zip(g).map(|(a, b)| a.min(*b)).collect();
    let sq = |h: &[f64]| form_norm(form, &Section::from_real(h), 1.0).map(|v| v * v);
    let lhs = sq(&meet)?;
    let rhs = sq(f)? + sq(g)?;
    report.observe(
        lhs - rhs,
        || case! { "sample" => sample, "lhs" => lhs, "rhs" => rhs },
    );
    Ok(())
}

/// Lattice inequality over `samples` seeded Gaussian pairs.
pub fn check_lattice_random(
    form: &FormOperator,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<VerificationReport> {
    require_scalar(form)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = VerificationReport::new("lattice_inequality", seed);
    for s in 0..samples {
        let f: Vec<f64> = (0..form.n()).map(|_| gaussian(&mut rng)).collect();
        let g: Vec<f64> = (0..form.n()).map(|_| gaussian(&mut rng)).collect();
        observe_lattice(&mut report, form, &f, &g, s)?;
    }
    Ok(report.conclude(tol))
}

fn ensure_pair(mag: &FormOperator, sc: &FormOperator) -> Result<()> {
    require_scalar(sc)?;
    if mag.n() != sc.n() {
        return Err(Error::DimensionMismatch {
            expected: mag.n(),
            found: sc.n(),
        });
    }
    Ok(())
}

struct KatoSample {
    kato_gap: f64,
    domain_gap: f64,
    re_q_mag: f64,
    q_sc: f64,
}

fn kato_sample(
    mag: &FormOperator,
    sc: &FormOperator,
    u: &Section,
    v: &[f64],
) -> Result<KatoSample> {
    let abs_u: Vec<f64> = (0..u.n()).map(|x| fiber_norm(u.fiber(x))).collect();
    let u_tilde = sgn_pair(u, v)?;
    let re_q_mag = evaluate_form(mag, u, &u_tilde)?.re;
    let q_sc = evaluate_form(sc, &Section::from_real(&abs_u), &Section::from_real(v))?.re;
    let q_tilde = mag.quadratic(&u_tilde)?;
    let bound = sc.quadratic(&Section::from_real(v))? + mag.quadratic(u)?;
    Ok(KatoSample {
        kato_gap: q_sc - re_q_mag,
        domain_gap: q_tilde - bound,
        re_q_mag,
        q_sc,
    })
}

/// Kato-type form inequality for `ũ = v·sgn u` with `0 ≤ v ≤ |u|`:
/// `Re Q_Φ(u, ũ) ≥ Q_{b,c}(|u|, v)` and `Q_Φ(ũ) ≤ Q_{b,c}(v) + Q_Φ(u)`.
pub fn check_kato_form_inequality(
    mag: &FormOperator,
    sc: &FormOperator,
    u: &Section,
    v: &[f64],
    tol: f64,
) -> Result<VerificationReport> {
    ensure_pair(mag, sc)?;
    u.ensure_shape(mag.n(), mag.dim())?;
    let mut report = VerificationReport::new("kato_form_inequality", 0);
    if v.len() != u.n() {
        return Err(Error::DimensionMismatch {
            expected: u.n(),
            found: v.len(),
        });
    }
    for (x, &vx) in v.iter().enumerate() {
        let ux = fiber_norm(u.fiber(x));
        if !(vx >= 0.0) || vx > ux + tol {
            report.add_violation(format!(
                "precondition 0 <= v <= |u| fails at vertex {x}: v = {vx}, |u| = {ux}"
            ));
            report.verdict = Verdict::PreconditionFailed;
        }
    }
    if report.verdict == Verdict::PreconditionFailed {
        return Ok(report);
    }
    let k = kato_sample(mag, sc, u, v)?;
    observe_kato(&mut report, &k, 0);
    Ok(report.conclude(tol))
}

fn observe_kato(report: &mut VerificationReport, k: &KatoSample, sample: usize) {
    let case = || {
        case! {
            "sample" => sample,
            "re_q_magnetic" => k.re_q_mag,
            "q_scalar" => k.q_sc,
            "kato_gap" => k.kato_gap,
            "domain_gap" => k.domain_gap,
        }
    };
    report.observe(k.kato_gap.max(k.domain_gap), case);
}

/// Kato inequality on seeded random `u` and `v = s·|u|` with pointwise
/// `s ∈ [0, 1]` (a fifth of the entries set to zero).
pub fn check_kato_random(
    mag: &FormOperator,
    sc: &FormOperator,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<VerificationReport> {
    ensure_pair(mag, sc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = VerificationReport::new("kato_form_inequality", seed);
    for s in 0..samples {
        let (u, v) = random_kato_pair(mag.n(), mag.dim(), &mut rng);
        let k = kato_sample(mag, sc, &u, &v)?;
        observe_kato(&mut report, &k, s);
    }
    Ok(report.conclude(tol))
}

/// Random `u` with `0 ≤ v ≤ |u|`.
pub fn random_kato_pair(n: usize, dim: usize, rng: &mut impl Rng) -> (Section, Vec<f64>) {
    let u = random_section(n, dim, rng);
    let v = (0..n)
        .map(|x| {
            let s: f64 = if rng.random::<f64>() < 0.2 {
                0.0
            } else {
                rng.random()
            };
            s * fiber_norm(u.fiber(x))
        })
        .collect();
    (u, v)
}

/// Diamagnetic inequality `Q_{b,c}(|u|) ≤ Q_Φ(u)` on seeded random sections.
pub fn check_diamagnetic(
    mag: &FormOperator,
    sc: &FormOperator,
    g: &WeightedGraph,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<VerificationReport> {
    ensure_pair(mag, sc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = VerificationReport::new("diamagnetic_inequality", seed);
    for s in 0..samples {
        let u = random_section(mag.n(), mag.dim(), &mut rng);
        let q_abs = sc.quadratic(&Section::from_real(&absolute(&u, g)?))?;
        let q_u = mag.quadratic(&u)?;
        report.observe(
            q_abs - q_u,
            || case! { "sample" => s, "q_abs" => q_abs, "q_u" => q_u },
        );
    }
    Ok(report.conclude(tol))
}

/// Writes the energy matrix in Matrix Market coordinate format
/// (complex Hermitian, lower triangle, 1-based). The generator is
/// `diag(m)⁻¹` times this matrix; the measure is listed in a comment.
pub fn write_matrix_market(form: &FormOperator, mut out: impl Write) -> Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate complex hermitian")?;
    writeln!(
        out,
        "% energy matrix, fiber dimension {}, generator = diag(m)^-1 * A",
        form.dim
    )?;
    let measure: Vec<String> = form.measure.iter().map(|m| format!("{m:e}")).collect();
    writeln!(out, "% measure {}", measure.join(" "))?;
    let lower: Vec<_> = form.energy.triplets().filter(|&(r, c, _)| r >= c).collect();
    writeln!(out, "{} {} {}", form.size(), form.size(), lower.len())?;
    for (r, c, v) in lower {
        writeln!(out, "{} {} {:e} {:e}", r + 1, c + 1, v.re, v.im)?;
    }
    Ok(())
}

/// Dense `M^{1/2}` scaling helper: maps a section to the coordinates in
/// which [`FormOperator::symmetrized_dense`] acts.
pub fn to_symmetric_coordinates(form: &FormOperator, u: &Section) -> Vec<Complex64> {
    u.values()
        .iter()
        .zip(form.expanded_measure())
        .map(|(v, m)| v * m.sqrt())
        .collect()
}

pub fn from_symmetric_coordinates(form: &FormOperator, y: &[Complex64]) -> Result<Section> {
    let values = y
        .iter()
        .zip(form.expanded_measure())
        .map(|(v, m)| v / m.sqrt())
        .collect();
    Section::new(form.dim, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::random_unitary_connection;
    use crate::fixtures::{pi_flux_pair, random_instance};
    use crate::graph::{
        formal_laplacian_apply, generate_family, truncate, FamilySpec, MeasureProfile,
    };

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pi_flux_pair_values() {
        let (_, mag, _) = pi_flux_pair();
        let ones = Section::from_real(&[1.0, 1.0]);
        let alt = Section::from_real(&[1.0, -1.0]);
        assert!((mag.quadratic(&ones).unwrap() - 4.0).abs() < 1e-14);
        assert!(mag.quadratic(&alt).unwrap().abs() < 1e-14);
        assert!(evaluate_form(&mag, &ones, &alt).unwrap().norm() < 1e-14);
        assert_eq!(mag.quadratic(&Section::zeros(2, 1)).unwrap(), 0.0);
    }

    #[test]
    fn scalar_generator_of_path() {
        let g = generate_family(&FamilySpec::path(3)).unwrap();
        let form = assemble_scalar(&g).unwrap();
        let expected = [[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        let gen = form.generator_dense();
        for r in 0..3 {
            for k in 0..3 {
                assert_eq!(gen[(r, k)], c(expected[r][k], 0.0));
            }
        }
        assert_eq!(form.quadratic(&Section::from_real(&[1.0; 3])).unwrap(), 0.0);

        let single = WeightedGraph::new(vec![2.0], vec![5.0], []).unwrap();
        assert_eq!(
            assemble_scalar(&single).unwrap().generator_dense()[(0, 0)],
            c(2.5, 0.0)
        );
    }

    #[test]
    fn scalar_generator_matches_formal_laplacian() {
        let g = generate_family(
            &FamilySpec::random_sparse(15, 0.3, 2)
                .with_measure(MeasureProfile::Power(1.0))
                .with_killing(0.3),
        )
        .unwrap();
        let gen = assemble_scalar(&g).unwrap().generator_dense();
        for x in 0..g.n() {
            let mut delta = vec![0.0; g.n()];
            delta[x] = 1.0;
            let lf = formal_laplacian_apply(&g, &delta).unwrap();
            for y in 0..g.n() {
                assert!((gen[(y, x)].re - lf[y]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn magnetic_reduces_to_scalar() {
        let g = generate_family(&FamilySpec::random_sparse(20, 0.2, 5).with_killing(0.7)).unwrap();
        let conn = BundleConnection::trivial(&g, 1);
        let w = EndomorphismField::from_killing(&g, 1);
        let mag = assemble_magnetic(&g, &conn, &w).unwrap().energy_dense();
        let sc = assemble_scalar(&g).unwrap().energy_dense();
        assert!((mag - sc).iter().all(|z| z.norm() <= 1e-12));
    }

    #[test]
    fn operator_matches_defining_sum_and_polarization() {
        let inst = random_instance(3, 25, 3);
        let form = &inst.magnetic;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let u = random_section(inst.graph.n(), inst.dim, &mut rng);
            let v = random_section(inst.graph.n(), inst.dim, &mut rng);
            let q_op = form.quadratic(&u).unwrap();
            let q_sum =
                magnetic_defining_sum(&inst.graph, &inst.connection, &inst.potential, &u).unwrap();
            assert!((q_op - q_sum).abs() <= 1e-10 * q_sum.abs().max(1.0));
            let q_uv = evaluate_form(form, &u, &v).unwrap();
            let q_pol = polarize(
                |s| {
                    magnetic_defining_sum(&inst.graph, &inst.connection, &inst.potential, s)
                        .unwrap()
                },
                &u,
                &v,
            );
            assert!((q_uv - q_pol).norm() <= 1e-10 * q_uv.norm().max(1.0));
            let q_vu = evaluate_form(form, &v, &u).unwrap();
            assert!((q_uv - q_vu.conj()).norm() <= 1e-10 * q_uv.norm().max(1.0));
            // generator route
            let lu = form.apply_generator(&u).unwrap();
            assert!((lu.inner_m(&v, form.measure()) - q_uv).norm() <= 1e-10 * q_uv.norm().max(1.0));
        }
        assert!(form.hermitian_residual() <= 1e-12);
        assert!(form.min_eigenvalue().unwrap() >= -1e-10);
    }

    #[test]
    fn dirichlet_restriction_cases() {
        let p3 = generate_family(&FamilySpec::path(3)).unwrap();
        let form = assemble_scalar(&p3).unwrap();
        let all = dirichlet_restriction(&form, &truncate(&p3, &[0, 1, 2]).unwrap()).unwrap();
        assert_eq!(all.energy(), form.energy());
        let mid = dirichlet_restriction(&form, &truncate(&p3, &[1]).unwrap()).unwrap();
        assert_eq!(mid.generator_dense()[(0, 0)], c(2.0, 0.0));
        assert_eq!(mid.boundary(), &BoundaryCondition::Dirichlet(vec![1]));

        let p5 = generate_family(&FamilySpec::path(5)).unwrap();
        let t = truncate(&p5, &[1, 2, 3]).unwrap();
        let dir = dirichlet_restriction(&assemble_scalar(&p5).unwrap(), &t).unwrap();
        let neu = assemble_scalar(&t.induced_subgraph()).unwrap();
        assert!(dir.min_eigenvalue().unwrap() > neu.min_eigenvalue().unwrap() + 1e-3);

        let p4 = generate_family(&FamilySpec::path(4)).unwrap();
        assert!(dirichlet_restriction(&form, &truncate(&p4, &[1]).unwrap()).is_err());
    }

    #[test]
    fn dirichlet_bracketing_on_random_truncations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for seed in 0..20 {
            let inst = random_instance(seed, 20, 2);
            let k = rng.random_range(1..inst.graph.n());
            let subset: Vec<usize> = (0..k).collect();
            let t = truncate(&inst.graph, &subset).unwrap();
            let dir = dirichlet_restriction(&inst.magnetic, &t).unwrap();
            let sub = t.induced_subgraph();
            let sub_conn = BundleConnection::new(
                &sub,
                inst.dim,
                sub.proper_edges().map(|e| {
                    (
                        (e.x, e.y),
                        inst.connection.transport(subset[e.x], subset[e.y]).unwrap(),
                    )
                }),
                &Default::default(),
            )
            .unwrap();
            let sub_w = EndomorphismField::new(
                inst.dim,
                subset
                    .iter()
                    .map(|&x| inst.potential.at(x).clone())
                    .collect(),
                &Default::default(),
            )
            .unwrap();
            let neu = assemble_magnetic(&sub, &sub_conn, &sub_w).unwrap();
            assert!(dir.min_eigenvalue().unwrap() >= neu.min_eigenvalue().unwrap() - 1e-10);
        }
    }

    #[test]
    fn form_norm_cases() {
        let (_, mag, _) = pi_flux_pair();
        assert_eq!(form_norm(&mag, &Section::zeros(2, 1), 1.0).unwrap(), 0.0);
        // Q(u) = 0 and ‖u‖² = 4 for u = (√2, −√2)
        let s = 2f64.sqrt();
        let u = Section::from_real(&[s, -s]);
        assert!((form_norm(&mag, &u, 1.0).unwrap() - 2.0).abs() < 1e-14);
        assert!(form_norm(&mag, &u, 0.0).is_err());
        let inst = random_instance(1, 10, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = random_section(inst.graph.n(), inst.dim, &mut rng);
        let a = form_norm(&inst.magnetic, &u, 0.5).unwrap();
        let b = form_norm(&inst.magnetic, &u, 2.0).unwrap();
        assert!(a < b);
    }

    #[test]
    fn first_bd_cases() {
        let p2 = generate_family(&FamilySpec::path(2)).unwrap();
        let sc = assemble_scalar(&p2).unwrap();
        let f = Section::from_real(&[1.0, -1.0]);
        assert!((sc.quadratic(&f).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(sc.quadratic(&Section::from_real(&[1.0, 1.0])).unwrap(), 0.0);
        let nonneg = Section::from_real(&[0.3, 2.0]);
        let abs = Section::from_real(&[0.3, 2.0]);
        assert_eq!(sc.quadratic(&nonneg).unwrap(), sc.quadratic(&abs).unwrap());

        for seed in 0..5 {
            let inst = random_instance(seed, 30, 1);
            assert!(check_first_bd(&inst.scalar, 100, seed, 1e-10)
                .unwrap()
                .passed());
        }
        // the π-flux operator read as a scalar form has positive off-diagonal entries
        let (_, mag, _) = pi_flux_pair();
        assert_eq!(
            check_first_bd(&mag, 20, 0, 1e-10).unwrap().verdict,
            Verdict::Fail
        );
        let inst = random_instance(0, 10, 2);
        assert!(check_first_bd(&inst.magnetic, 1, 0, 1e-10).is_err());
    }

    #[test]
    fn lattice_cases() {
        let p2 = generate_family(&FamilySpec::path(2)).unwrap();
        let sc = assemble_scalar(&p2).unwrap();
        let r = check_lattice_inequality(&sc, &[1.0, 0.0], &[0.0, 1.0], 1e-10).unwrap();
        assert!(r.passed());
        assert_eq!(r.worst_case["lhs"], serde_json::json!(0.0));
        assert!(
            check_lattice_inequality(&sc, &[0.5, -2.0], &[0.5, -2.0], 1e-10)
                .unwrap()
                .passed()
        );
        let inst = random_instance(2, 30, 1);
        assert!(check_lattice_random(&inst.scalar, 200, 3, 1e-10)
            .unwrap()
            .passed());
    }

    #[test]
    fn kato_cases() {
        let g = generate_family(&FamilySpec::path(4)).unwrap();
        let sc = assemble_scalar(&g).unwrap();
        let u = Section::from_real(&[1.0, 2.0, 0.5, 3.0]);
        let abs = vec![1.0, 2.0, 0.5, 3.0];
        let r = check_kato_form_inequality(&sc, &sc, &u, &abs, 1e-10).unwrap();
        assert!(r.passed());
        let gap = r.worst_case["kato_gap"].as_f64().unwrap();
        assert!(gap.abs() < 1e-12);

        let (_, mag, sc2) = pi_flux_pair();
        let ones = Section::from_real(&[1.0, 1.0]);
        let r = check_kato_form_inequality(&mag, &sc2, &ones, &[1.0, 1.0], 1e-10).unwrap();
        assert!(r.passed());
        assert!((r.worst_case["re_q_magnetic"].as_f64().unwrap() - 4.0).abs() < 1e-14);
        assert!(r.worst_case["q_scalar"].as_f64().unwrap().abs() < 1e-14);

        let r = check_kato_form_inequality(&mag, &sc2, &ones, &[2.0, 1.0], 1e-10).unwrap();
        assert_eq!(r.verdict, Verdict::PreconditionFailed);

        for seed in 0..10 {
            let inst = random_instance(seed, 25, 3);
            assert!(
                check_kato_random(&inst.magnetic, &inst.scalar, 50, seed, 1e-10)
                    .unwrap()
                    .passed()
            );
            assert!(
                check_diamagnetic(&inst.magnetic, &inst.scalar, &inst.graph, 50, seed, 1e-10)
                    .unwrap()
                    .passed()
            );
        }
    }

    #[test]
    fn green_identity() {
        let g = generate_family(
            &FamilySpec::random_sparse(18, 0.3, 9).with_measure(MeasureProfile::Power(0.7)),
        )
        .unwrap();
        let form = assemble_scalar(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let f: Vec<f64> = (0..g.n()).map(|_| gaussian(&mut rng)).collect();
            let lf = formal_laplacian_apply(&g, &f).unwrap();
            let lhs: f64 = (0..g.n()).map(|x| g.measure()[x] * lf[x] * f[x]).sum();
            let q = form.quadratic(&Section::from_real(&f)).unwrap();
            assert!((lhs - q).abs() <= 1e-10 * q.abs().max(1e-300));
        }
    }

    #[test]
    fn matrix_market_export() {
        let g = generate_family(&FamilySpec::path(3)).unwrap();
        let conn = random_unitary_connection(&g, 1, 0).unwrap();
        let form = assemble_magnetic(&g, &conn, &EndomorphismField::zeros(3, 1)).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&form, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("%%MatrixMarket matrix coordinate complex hermitian")
        );
        let size_line = text.lines().find(|l| !l.starts_with('%')).unwrap();
        assert_eq!(size_line, "3 3 5");
    }
}
