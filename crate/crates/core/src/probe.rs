//! Dirichlet/Neumann exhaustion probe.
//!
//! For each size `N` of a graph family the generated graph is truncated by
//! removing its outermost hop ring around vertex 0. The Neumann form lives
//! on the whole generated graph and the Dirichlet form is its restriction to
//! the interior. Two observables compare them, both scalar and magnetic: the
//! difference of bottom eigenvalues and the resolvent difference at a probe
//! vertex. These are finite-size observables chosen for this tool, not
//! quantities with an independent meaning.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{Cholesky, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{
    random_unitary_connection, BundleConnection, CMatrix, EndomorphismField, Section,
};
use crate::config::DEFAULT_DENSE_LIMIT;
use crate::forms::{assemble_magnetic, assemble_scalar, dirichlet_restriction, FormOperator};
use crate::graph::{generate_family, truncate_last_ring, FamilySpec};
use crate::report::{Verdict, VerificationReport};
use crate::{case, Error, Result};

/// Least-squares slope of `log y` against `log x` over points with both
/// coordinates positive; `None` with fewer than two such points.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

fn residual_norm(form: &FormOperator, z: f64, u: &[Complex64], f: &[Complex64]) -> f64 {
    // ‖(L + z)u − f‖ in ℓ²(m) equals ‖M^{-1/2}((K + zM)u − Mf)‖₂.
    let m = form.expanded_measure();
    let ku = form.energy().matvec(u);
    ku.iter()
        .zip(u)
        .zip(f)
        .zip(&m)
        .map(|(((k, u), f), m)| (k + u * (z * m) - f * *m).norm_sqr() / m)
        .sum::<f64>()
        .sqrt()
}

fn conjugate_gradient(
    form: &FormOperator,
    z: f64,
    f: &[Complex64],
    target: f64,
) -> Result<Vec<Complex64>> {
    let m = form.expanded_measure();
    let apply = |v: &[Complex64]| -> Vec<Complex64> {
        let mut out = form.energy().matvec(v);
        for ((o, v), m) in out.iter_mut().zip(v).zip(&m) {
            *o += v * (z * m);
        }
        out
    };
    let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    };
    let b: Vec<Complex64> = f.iter().zip(&m).map(|(f, m)| f * *m).collect();
    let mut x = vec![Complex64::new(0.0, 0.0); f.len()];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r).re;
    let max_iter = 20 * f.len().max(10);
    for _ in 0..max_iter {
        if residual_norm(form, z, &x, f) <= target {
            return Ok(x);
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap).re;
        for i in 0..x.len() {
            x[i] += p[i] * alpha;
            r[i] -= ap[i] * alpha;
        }
        let rr_next = dot(&r, &r).re;
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..p.len() {
            p[i] = r[i] + p[i] * beta;
        }
    }
    let residual = residual_norm(form, z, &x, f);
    if residual <= target {
        Ok(x)
    } else {
        Err(Error::NotConverged {
            method: "conjugate gradient",
            residual,
        })
    }
}

/// Solves `(L + z) u = f` for `z > 0`.
///
/// Uses a Cholesky factorization of `K + zM` up to `dense_limit` unknowns
/// and conjugate gradients above; either way the `ℓ²(m)` residual is
/// verified to be at most `1e-10 ‖f‖`.
pub fn resolvent_apply_with(
    form: &FormOperator,
    z: f64,
    f: &Section,
    dense_limit: usize,
) -> Result<Section> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "resolvent shift must be positive, got {z}"
        )));
    }
    f.ensure_shape(form.n(), form.dim())?;
    let target = 1e-10 * f.norm_m(form.measure());
    if target == 0.0 {
        return Ok(Section::zeros(form.n(), form.dim()));
    }
    let u = if form.size() <= dense_limit {
        let m = form.expanded_measure();
        let mut a = form.energy_dense();
        for (i, mi) in m.iter().enumerate() {
            a[(i, i)] += Complex64::new(z * mi, 0.0);
        }
        let chol = Cholesky::new(a)
            .ok_or_else(|| Error::Eigensolve("K + zM is not positive definite".into()))?;
        let rhs = DVector::from_iterator(m.len(), f.values().iter().zip(&m).map(|(f, m)| f * *m));
        let u: Vec<Complex64> = chol.solve(&rhs).iter().copied().collect();
        let residual = residual_norm(form, z, &u, f.values());
        if residual > target {
            return Err(Error::NotConverged {
                method: "Cholesky resolvent",
                residual,
            });
        }
        u
    } else {
        conjugate_gradient(form, z, f.values(), target)?
    };
    Section::new(form.dim(), u)
}

pub fn resolvent_apply(form: &FormOperator, z: f64, f: &Section) -> Result<Section> {
    resolvent_apply_with(form, z, f, DEFAULT_DENSE_LIMIT)
}

/// Connection placed on each generated graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConnectionSpec {
    /// `Φ ≡ I` in fiber dimension `dim`.
    Trivial { dim: usize },
    /// Haar-random unitaries in fiber dimension `dim` (`dim = 1` gives random phases).
    Random { dim: usize },
}

impl ConnectionSpec {
    pub fn dim(&self) -> usize {
        match *self {
            ConnectionSpec::Trivial { dim } | ConnectionSpec::Random { dim } => dim,
        }
    }

    fn build(&self, g: &crate::WeightedGraph, seed: u64) -> Result<BundleConnection> {
        match *self {
            ConnectionSpec::Trivial { dim } if dim > 0 => Ok(BundleConnection::trivial(g, dim)),
            ConnectionSpec::Random { dim } if dim > 0 => random_unitary_connection(g, dim, seed),
            _ => Err(Error::InvalidParameter(
                "fiber dimension must be positive".into(),
            )),
        }
    }
}

impl FromStr for ConnectionSpec {
    type Err = Error;

    /// `trivial`, `random` (phases), `trivial:<d>`, `random:<d>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, dim) = match s.split_once(':') {
            Some((a, d)) => {
                let dim = d.parse().map_err(|_| {
                    Error::InvalidParameter(format!("bad fiber dimension in `{s}`"))
                })?;
                (a, dim)
            }
            None => (s, 1),
        };
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "fiber dimension must be positive".into(),
            ));
        }
        match name {
            "trivial" => Ok(ConnectionSpec::Trivial { dim }),
            "random" => Ok(ConnectionSpec::Random { dim }),
            _ => Err(Error::InvalidParameter(format!("unknown connection `{s}`"))),
        }
    }
}

impl fmt::Display for ConnectionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConnectionSpec::Trivial { dim } => write!(f, "trivial:{dim}"),
            ConnectionSpec::Random { dim } => write!(f, "random:{dim}"),
        }
    }
}

/// Potential `W(x) = (c(x) + shift)·I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub shift: f64,
}

impl PotentialSpec {
    pub const KILLING: PotentialSpec = PotentialSpec { shift: 0.0 };

    fn build(&self, g: &crate::WeightedGraph, dim: usize) -> Result<EndomorphismField> {
        if !(self.shift >= 0.0 && self.shift.is_finite()) {
            return Err(Error::InvalidParameter(
                "potential shift must be nonnegative".into(),
            ));
        }
        let w = g
            .killing()
            .iter()
            .map(|c| CMatrix::identity(dim, dim) * Complex64::new(c + self.shift, 0.0))
            .collect();
        EndomorphismField::new(dim, w, &crate::Tolerances::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub family: FamilySpec,
    pub connection: ConnectionSpec,
    pub potential: PotentialSpec,
    /// Probe vertex for the resolvent difference.
    pub x0: usize,
    /// Resolvent shift.
    pub z: f64,
    /// Seeds the per-size connection seeds.
    pub seed: u64,
}

impl ProbeConfig {
    pub fn new(family: FamilySpec) -> Self {
        Self {
            family,
            connection: ConnectionSpec::Trivial { dim: 1 },
            potential: PotentialSpec::KILLING,
            x0: 0,
            z: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSlopes {
    pub scalar: Option<f64>,
    pub magnetic: Option<f64>,
    pub resolvent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeResult {
    pub config: ProbeConfig,
    pub sizes: Vec<usize>,
    pub scalar_gap: Vec<f64>,
    pub magnetic_gap: Vec<f64>,
    pub resolvent_diff: Vec<f64>,
    pub fit_slope: FitSlopes,
}

struct SizeRow {
    scalar_gap: f64,
    magnetic_gap: f64,
    resolvent_diff: f64,
}

fn probe_size(config: &ProbeConfig, size: usize, conn_seed: u64) -> Result<SizeRow> {
    let g = generate_family(&config.family.with_size(size))?;
    let trunc = truncate_last_ring(&g, 0)?;
    let Ok(x0_local) = trunc.interior.binary_search(&config.x0) else {
        return Err(Error::InvalidParameter(format!(
            "probe vertex {} is not inside the truncation at size {size}",
            config.x0
        )));
    };

    let scalar = assemble_scalar(&g)?;
    let scalar_d = dirichlet_restriction(&scalar, &trunc)?;
    let scalar_gap = scalar_d.min_eigenvalue()? - scalar.min_eigenvalue()?;

    let conn = config.connection.build(&g, conn_seed)?;
    let w = config.potential.build(&g, conn.dim())?;
    let magnetic = assemble_magnetic(&g, &conn, &w)?;
    let magnetic_d = dirichlet_restriction(&magnetic, &trunc)?;
    let magnetic_gap = magnetic_d.min_eigenvalue()? - magnetic.min_eigenvalue()?;

    let u_n = resolvent_apply(&scalar, config.z, &Section::delta(g.n(), 1, config.x0, 0))?;
    let u_d = resolvent_apply(
        &scalar_d,
        config.z,
        &Section::delta(trunc.interior.len(), 1, x0_local, 0),
    )?;
    let mut diff = u_n.into_values();
    for (i, &x) in trunc.interior.iter().enumerate() {
        diff[x] -= u_d.values()[i];
    }
    let resolvent_diff = Section::new(1, diff)?.norm_m(g.measure());
    Ok(SizeRow {
        scalar_gap,
        magnetic_gap,
        resolvent_diff,
    })
}

/// Runs the probe over increasing `sizes`. Sizes are processed in parallel;
/// the connection seed for the `i`-th size is the `i`-th draw of a generator
/// seeded with `config.seed`.
pub fn run_probe(config: &ProbeConfig, sizes: &[usize]) -> Result<ProbeResult> {
    if sizes.is_empty() {
        return Err(Error::Empty("probe sizes"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "probe sizes must be strictly increasing".into(),
        ));
    }
    if !(config.z > 0.0) {
        return Err(Error::InvalidParameter(
            "resolvent shift must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let seeds: Vec<u64> = sizes.iter().map(|_| rng.random()).collect();
    let rows: Vec<SizeRow> = sizes
        .par_iter()
        .zip(&seeds)
        .map(|(&n, &s)| probe_size(config, n, s))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let scalar_gap: Vec<f64> = rows.iter().map(|r| r.scalar_gap).collect();
    let magnetic_gap: Vec<f64> = rows.iter().map(|r| r.magnetic_gap).collect();
    let resolvent_diff: Vec<f64> = rows.iter().map(|r| r.resolvent_diff).collect();
    let fit_slope = FitSlopes {
        scalar: loglog_slope(&xs, &scalar_gap),
        magnetic: loglog_slope(&xs, &magnetic_gap),
        resolvent: loglog_slope(&xs, &resolvent_diff),
    };
    Ok(ProbeResult {
        config: *config,
        sizes: sizes.to_vec(),
        scalar_gap,
        magnetic_gap,
        resolvent_diff,
        fit_slope,
    })
}

impl ProbeResult {
    /// CSV with header `N,scalarGap,magneticGap,resolventDiff`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["N", "scalarGap", "magneticGap", "resolventDiff"])?;
        for i in 0..self.sizes.len() {
            w.write_record([
                self.sizes[i].to_string(),
                format!("{:e}", self.scalar_gap[i]),
                format!("{:e}", self.magnetic_gap[i]),
                format!("{:e}", self.resolvent_diff[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Gaps at least `-tol` and nonnegative resolvent differences.
    pub fn check_invariants(&self, tol: f64) -> VerificationReport {
        let mut report = VerificationReport::new("probe_invariants", self.config.seed);
        for (i, &n) in self.sizes.iter().enumerate() {
            let v = (-self.scalar_gap[i])
                .max(-self.magnetic_gap[i])
                .max(-self.resolvent_diff[i]);
            report.observe(v, || case! { "N" => n });
        }
        report.conclude(tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferThresholds {
    /// A trend decays if its final value is below this.
    pub final_gap: f64,
    /// Values below this count as zero (no trend needed).
    pub zero: f64,
    /// Gaps below `-negative_tol` break spectral domination.
    pub negative_tol: f64,
}

impl Default for TransferThresholds {
    fn default() -> Self {
        Self {
            final_gap: 1e-2,
            zero: 1e-12,
            negative_tol: 1e-10,
        }
    }
}

fn decays(gaps: &[f64], slope: Option<f64>, th: &TransferThresholds) -> bool {
    let last = *gaps.last().expect("non-empty");
    gaps.iter().all(|g| g.abs() <= th.zero)
        || (last < th.final_gap && slope.is_some_and(|s| s < 0.0))
}

/// SUPPORTED when both the scalar and the magnetic gap decay; INCONCLUSIVE
/// otherwise; FAIL if a gap is negative beyond tolerance. The reverse
/// implication is never claimed.
pub fn transfer_evidence(
    result: &ProbeResult,
    th: &TransferThresholds,
) -> Result<VerificationReport> {
    if result.sizes.is_empty() {
        return Err(Error::Empty("probe result"));
    }
    let scalar = decays(&result.scalar_gap, result.fit_slope.scalar, th);
    let magnetic = decays(&result.magnetic_gap, result.fit_slope.magnetic, th);
    let mut report = result.check_invariants(th.negative_tol);
    report.check = "transfer_evidence".into();
    let most_negative = report.max_violation;
    report.worst_case = case! {
        "scalar_final_gap" => *result.scalar_gap.last().unwrap(),
        "scalar_slope" => result.fit_slope.scalar,
        "scalar_decays" => scalar,
        "magnetic_final_gap" => *result.magnetic_gap.last().unwrap(),
        "magnetic_slope" => result.fit_slope.magnetic,
        "magnetic_decays" => magnetic,
        "most_negative_gap" => -most_negative
    };
    if report.verdict == Verdict::Pass {
        report.verdict = match (scalar, magnetic) {
            (true, true) => Verdict::Supported,
            (false, _) => {
                report.add_violation(
                    "scalar gap does not decay on the tested sizes; no transfer claim",
                );
                Verdict::Inconclusive
            }
            (true, false) => {
                report.add_violation(
                    "scalar gap decays but the magnetic gap does not on the tested sizes",
                );
                Verdict::Inconclusive
            }
        };
    }
    Ok(report)
}
