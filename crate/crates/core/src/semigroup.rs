//! Heat semigroups `e^{-tL}` of assembled forms.
//!
//! All computations happen in the symmetric coordinates `y = M^{1/2} ξ`,
//! where the generator becomes the Hermitian matrix `M^{-1/2} K M^{-1/2}`.
//! The dense eigendecomposition route is the reference for every other
//! exponential computed here.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bundle::{fiber_norm, random_section, CMatrix, Section};
use crate::config::{DEFAULT_DENSE_LIMIT, DEFAULT_KRYLOV_MAX_DIM};
use crate::forms::{from_symmetric_coordinates, to_symmetric_coordinates, FormOperator};
use crate::report::VerificationReport;
use crate::{case, Error, Result};

/// Eigendecomposition of a form's generator, reusable across times and inputs.
#[derive(Debug, Clone)]
pub struct DenseSemigroup {
    form_dim: usize,
    n: usize,
    sqrt_m: Vec<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl DenseSemigroup {
    pub fn new(form: &FormOperator) -> Result<Self> {
        Self::with_limit(form, DEFAULT_DENSE_LIMIT)
    }

    pub fn with_limit(form: &FormOperator, limit: usize) -> Result<Self> {
        if form.size() > limit {
            return Err(Error::DenseLimitExceeded {
                size: form.size(),
                limit,
            });
        }
        let eig = SymmetricEigen::try_new(form.symmetrized_dense(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigensolve("Hermitian eigensolver did not converge".into()))?;
        Ok(Self {
            form_dim: form.dim(),
            n: form.n(),
            sqrt_m: form.expanded_measure().iter().map(|m| m.sqrt()).collect(),
            eigenvalues: eig.eigenvalues.as_slice().to_vec(),
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `e^{-tL} ξ`.
    pub fn apply(&self, t: f64, xi: &Section) -> Result<Section> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        xi.ensure_shape(self.n, self.form_dim)?;
        if t == 0.0 {
            return Ok(xi.clone());
        }
        let y = DVector::from_iterator(
            xi.values().len(),
            xi.values().iter().zip(&self.sqrt_m).map(|(v, s)| v * *s),
        );
        let mut coef = self.eigenvectors.ad_mul(&y);
        for (c, &lambda) in coef.iter_mut().zip(&self.eigenvalues) {
            *c *= (-t * lambda).exp();
        }
        let out = &self.eigenvectors * coef;
        let values = out.iter().zip(&self.sqrt_m).map(|(v, s)| v / *s).collect();
        Section::new(self.form_dim, values)
    }
}

/// `e^{-tL} ξ` by full eigendecomposition.
pub fn expm_dense(form: &FormOperator, t: f64, xi: &Section) -> Result<Section> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    DenseSemigroup::new(form)?.apply(t, xi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Target relative error of the result.
    pub tol: f64,
    /// Largest Lanczos basis built per time step.
    pub max_dim: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_dim: DEFAULT_KRYLOV_MAX_DIM,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovResult {
    pub section: Section,
    /// Number of time steps the interval `[0, t]` was split into.
    pub steps: usize,
    /// Largest Lanczos basis used.
    pub max_basis: usize,
    /// Sum of the per-step relative error estimates.
    pub error_estimate: f64,
}

/// `e^{-tL} ξ` by Lanczos in the `ℓ²(m)` inner product.
pub fn expm_krylov(form: &FormOperator, t: f64, xi: &Section, tol: f64) -> Result<Section> {
    let opts = KrylovOptions {
        tol,
        ..KrylovOptions::default()
    };
    Ok(expm_krylov_with(form, t, xi, &opts)?.section)
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // ⟨a, b⟩ = b* a
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

struct Tridiagonal {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl Tridiagonal {
    fn new(alpha: &[f64], beta: &[f64]) -> Self {
        let k = alpha.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        Self {
            eigenvalues: eig.eigenvalues.as_slice().to_vec(),
            eigenvectors: eig.eigenvectors,
        }
    }

    /// `exp(-τT) e₁`.
    fn exp_e1(&self, tau: f64) -> Vec<f64> {
        let v = &self.eigenvectors;
        let k = self.eigenvalues.len();
        let coef: Vec<f64> = (0..k)
            .map(|j| v[(0, j)] * (-tau * self.eigenvalues[j]).exp())
            .collect();
        (0..k)
            .map(|i| (0..k).map(|j| v[(i, j)] * coef[j]).sum())
            .collect()
    }
}

/// Relative error estimate `β_k |[exp(-τT_k)e₁]_k| / ‖exp(-τT_k)e₁‖`.
fn step_estimate(tri: &Tridiagonal, next_beta: f64, tau: f64) -> (Vec<f64>, f64) {
    let s = tri.exp_e1(tau);
    let size = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    let last = s.last().copied().unwrap_or(0.0).abs();
    let est = if size > 0.0 {
        next_beta * last / size
    } else {
        next_beta * last
    };
    (s, est)
}

/// Lanczos exponential with adaptive basis growth and time stepping.
///
/// Each step grows the basis until the a posteriori estimate meets the local
/// tolerance; if the maximal basis is reached first the step is halved and
/// the same basis reused. A vanishing off-diagonal (invariant subspace)
/// makes the step exact.
pub fn expm_krylov_with(
    form: &FormOperator,
    t: f64,
    xi: &Section,
    opts: &KrylovOptions,
) -> Result<KrylovResult> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    if !(opts.tol > 0.0) || opts.max_dim == 0 {
        return Err(Error::InvalidParameter(
            "Krylov tolerance and basis size must be positive".into(),
        ));
    }
    xi.ensure_shape(form.n(), form.dim())?;
    if t == 0.0 {
        return Ok(KrylovResult {
            section: xi.clone(),
            steps: 0,
            max_basis: 0,
            error_estimate: 0.0,
        });
    }
    let mut w = to_symmetric_coordinates(form, xi);
    let done = |w: &[Complex64], steps, max_basis, err| -> Result<KrylovResult> {
        Ok(KrylovResult {
            section: from_symmetric_coordinates(form, w)?,
            steps,
            max_basis,
            error_estimate: err,
        })
    };
    if norm(&w) == 0.0 {
        return done(&w, 0, 0, 0.0);
    }

    let inv_sqrt_m: Vec<f64> = form
        .expanded_measure()
        .iter()
        .map(|m| m.sqrt().recip())
        .collect();
    let apply = |v: &[Complex64]| -> Vec<Complex64> {
        let scaled: Vec<Complex64> = v.iter().zip(&inv_sqrt_m).map(|(a, s)| a * *s).collect();
        let mut out = form.energy().matvec(&scaled);
        for (o, s) in out.iter_mut().zip(&inv_sqrt_m) {
            *o *= *s;
        }
        out
    };
    let max_dim = opts.max_dim.min(w.len());

    let mut remaining = t;
    let mut steps = 0;
    let mut max_basis = 0;
    let mut total_err = 0.0;
    while remaining > 0.0 {
        let beta0 = norm(&w);
        if beta0 == 0.0 {
            break;
        }
        let mut basis: Vec<Vec<Complex64>> = vec![w.iter().map(|v| v / beta0).collect()];
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        let mut scale = 0.0_f64;
        let local_tol = |tau: f64| 0.1 * opts.tol * tau / t;

        let mut accepted = None;
        let mut tri = None;
        let mut next_beta = 0.0;
        for j in 0..max_dim {
            let mut z = apply(&basis[j]);
            let a = dot(&z, &basis[j]).re;
            for (zi, vi) in z.iter_mut().zip(&basis[j]) {
                *zi -= vi * a;
            }
            if j > 0 {
                let b_prev = beta[j - 1];
                for (zi, vi) in z.iter_mut().zip(&basis[j - 1]) {
                    *zi -= vi * b_prev;
                }
            }
            for _ in 0..2 {
                for v in &basis {
                    let h = dot(&z, v);
                    for (zi, vi) in z.iter_mut().zip(v) {
                        *zi -= vi * h;
                    }
                }
            }
            alpha.push(a);
            let b = norm(&z);
            scale = scale.max(a.abs()).max(b);
            let current = Tridiagonal::new(&alpha, &beta);
            let breakdown = b <= 1e-13 * scale.max(f64::MIN_POSITIVE) || j + 1 == w.len();
            next_beta = if breakdown { 0.0 } else { b };
            let (s, est) = step_estimate(&current, next_beta, remaining);
            if est <= local_tol(remaining) {
                accepted = Some((remaining, s, est));
                tri = Some(current);
                break;
            }
            tri = Some(current);
            if breakdown {
                break;
            }
            beta.push(b);
            basis.push(z.iter().map(|v| v / b).collect());
        }
        // The basis now holds one more vector than `alpha` unless we stopped
        // on convergence or breakdown; only the first `alpha.len()` are used.
        let tri = tri.expect("at least one Lanczos step");
        let (tau, s, est) = match accepted {
            Some(a) => a,
            None => {
                let mut tau = remaining;
                loop {
                    tau /= 2.0;
                    if tau < t * 1e-12 {
                        let (_, est) = step_estimate(&tri, next_beta, tau);
                        return Err(Error::NotConverged {
                            method: "krylov exponential",
                            residual: est,
                        });
                    }
                    let (s, est) = step_estimate(&tri, next_beta, tau);
                    if est <= local_tol(tau) {
                        break (tau, s, est);
                    }
                }
            }
        };
        let k = s.len();
        max_basis = max_basis.max(k);
        let mut next = vec![Complex64::new(0.0, 0.0); w.len()];
        for (coef, v) in s.iter().zip(&basis[..k]) {
            for (ni, vi) in next.iter_mut().zip(v) {
                *ni += vi * (coef * beta0);
            }
        }
        w = next;
        total_err += est;
        remaining -= tau;
        if remaining <= t * 1e-15 {
            remaining = 0.0;
        }
        steps += 1;
    }
    done(&w, steps, max_basis, total_err)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Dense,
    Krylov { max_dim: usize },
}

/// One evaluation `output = e^{-tL} input`.
#[derive(Debug, Clone)]
pub struct SemigroupSample {
    pub t: f64,
    pub input: Section,
    pub output: Section,
    pub method: Method,
}

impl SemigroupSample {
    pub fn dense(form: &FormOperator, t: f64, input: Section) -> Result<Self> {
        let output = expm_dense(form, t, &input)?;
        Ok(Self {
            t,
            input,
            output,
            method: Method::Dense,
        })
    }

    pub fn krylov(
        form: &FormOperator,
        t: f64,
        input: Section,
        opts: &KrylovOptions,
    ) -> Result<Self> {
        let output = expm_krylov_with(form, t, &input, opts)?.section;
        Ok(Self {
            t,
            input,
            output,
            method: Method::Krylov {
                max_dim: opts.max_dim,
            },
        })
    }

    /// `‖output‖ − ‖input‖` in `ℓ²(m)`; nonpositive for a contraction.
    pub fn contraction_excess(&self, measure: &[f64]) -> f64 {
        self.output.norm_m(measure) - self.input.norm_m(measure)
    }
}

/// Seeded nonnegative test function: uniform entries with about a third zeroed.
fn random_nonnegative(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < 0.3 {
                0.0
            } else {
                rng.random()
            }
        })
        .collect()
}

/// Positivity preservation: `e^{-tB} f ≥ 0` for sampled `f ≥ 0` and for every
/// basis function `δ_x`, at each time in `t_grid`.
pub fn check_positivity_preserving(
    form: &FormOperator,
    t_grid: &[f64],
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<VerificationReport> {
    if form.dim() != 1 {
        return Err(Error::InvalidParameter(
            "positivity check needs a scalar form".into(),
        ));
    }
    let sg = DenseSemigroup::new(form)?;
    let n = form.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs: Vec<(String, Vec<f64>)> = (0..samples)
        .map(|s| (format!("sample {s}"), random_nonnegative(n, &mut rng)))
        .collect();
    inputs.extend((0..n).map(|x| {
        let mut d = vec![0.0; n];
        d[x] = 1.0;
        (format!("delta {x}"), d)
    }));
    let mut report = VerificationReport::new("positivity_preserving", seed);
    for &t in t_grid {
        for (label, f) in &inputs {
            let out = sg.apply(t, &Section::from_real(f))?;
            let (x, violation) = out
                .values()
                .iter()
                .map(|z| (-z.re).max(z.im.abs()))
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (x, v)| if v > acc.1 { (x, v) } else { acc },
                );
            report.observe(
                violation,
                || case! { "input" => label, "t" => t, "vertex" => x },
            );
        }
    }
    Ok(report.conclude(tol))
}

/// Test sections for domination: odd indices are localized on up to three
/// vertices, even ones are dense Gaussian.
fn domination_sections(n: usize, dim: usize, samples: usize, seed: u64) -> Vec<Section> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|s| {
            let full = random_section(n, dim, &mut rng);
            if s % 2 == 0 {
                return full;
            }
            let mut local = Section::zeros(n, dim);
            for _ in 0..rng.random_range(1..=3usize) {
                let x = rng.random_range(0..n);
                local.fiber_mut(x).copy_from_slice(full.fiber(x));
            }
            local
        })
        .collect()
}

/// Semigroup domination `|e^{-tA} ξ| ≤ e^{-tB} |ξ|` pointwise, for sampled
/// sections `ξ` and every time in `t_grid`.
///
/// Samples are evaluated in parallel and reduced in sample order.
pub fn check_domination(
    mag: &FormOperator,
    sc: &FormOperator,
    t_grid: &[f64],
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<VerificationReport> {
    if sc.dim() != 1 {
        return Err(Error::InvalidParameter(
            "dominating form must be scalar".into(),
        ));
    }
    if mag.n() != sc.n() {
        return Err(Error::DimensionMismatch {
            expected: mag.n(),
            found: sc.n(),
        });
    }
    let a = DenseSemigroup::new(mag)?;
    let b = DenseSemigroup::new(sc)?;
    let n = mag.n();
    let sections = domination_sections(n, mag.dim(), samples, seed);
    let jobs: Vec<(usize, f64)> = (0..samples)
        .flat_map(|s| t_grid.iter().map(move |&t| (s, t)))
        .collect();
    let results: Vec<Result<(usize, f64, usize, f64)>> = jobs
        .par_iter()
        .map(|&(s, t)| {
            let xi = &sections[s];
            let lhs = a.apply(t, xi)?;
            let abs_xi: Vec<f64> = (0..n).map(|x| fiber_norm(xi.fiber(x))).collect();
            let rhs = b.apply(t, &Section::from_real(&abs_xi))?;
            let (x, gap) = (0..n)
                .map(|x| fiber_norm(lhs.fiber(x)) - rhs.values()[x].re)
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (x, v)| if v > acc.1 { (x, v) } else { acc },
                );
            Ok((s, t, x, gap))
        })
        .collect();
    let mut report = VerificationReport::new("domination", seed);
    for r in results {
        let (s, t, x, gap) = r?;
        report.observe(gap, || case! { "sample" => s, "t" => t, "vertex" => x });
    }
    Ok(report.conclude(tol))
}
