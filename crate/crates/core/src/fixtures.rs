//! Seeded random instances and small closed-form fixtures shared by tests,
//! the acceptance suite and the command line.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bundle::{random_unitary_connection, BundleConnection, CMatrix, EndomorphismField};
use crate::config::Tolerances;
use crate::forms::{assemble_magnetic, assemble_scalar, FormOperator};
use crate::graph::WeightedGraph;

/// A graph with a connection and potential `W ⪰ c`, and both assembled forms.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub seed: u64,
    pub graph: WeightedGraph,
    pub dim: usize,
    pub connection: BundleConnection,
    pub potential: EndomorphismField,
    pub magnetic: FormOperator,
    pub scalar: FormOperator,
}

/// Random weighted graph on `n` vertices: edge probability in `[0.1, 0.5]`,
/// `b ∈ (0.1, 2]`, `m ∈ [0.5, 2]`, `c ∈ [0, 1]`.
pub fn random_graph(n: usize, rng: &mut impl Rng) -> WeightedGraph {
    let density = rng.random_range(0.1..0.5);
    let mut edges = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            if rng.random::<f64>() < density {
                edges.push((x, y, rng.random_range(0.1..=2.0)));
            }
        }
    }
    let measure = (0..n).map(|_| rng.random_range(0.5..=2.0)).collect();
    let killing = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
    WeightedGraph::new(measure, killing, edges).expect("generated graph is well formed")
}

/// Hermitian positive semidefinite `d×d` matrix with spectrum in `[0, scale]`-ish.
pub fn random_psd(d: usize, scale: f64, rng: &mut impl Rng) -> CMatrix {
    let a = CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let p = &a * a.adjoint() * Complex64::new(scale / (2.0 * d as f64), 0.0);
    (&p + p.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `W(x) = c(x)·I + P(x)` with random positive `P(x)`.
pub fn random_potential(g: &WeightedGraph, d: usize, rng: &mut impl Rng) -> EndomorphismField {
    let w = g
        .killing()
        .iter()
        .map(|&c| {
            let scale = rng.random_range(0.0..=1.0);
            random_psd(d, scale, rng) + CMatrix::identity(d, d) * Complex64::new(c, 0.0)
        })
        .collect();
    EndomorphismField::new(d, w, &Tolerances::default()).expect("shifted positive matrices")
}

/// Instance with `2 ≤ n ≤ n_max` vertices and fiber dimension `1 ≤ d ≤ d_max`.
pub fn random_instance(seed: u64, n_max: usize, d_max: usize) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=n_max.max(2));
    let dim = rng.random_range(1..=d_max.max(1));
    let graph = random_graph(n, &mut rng);
    let connection = random_unitary_connection(&graph, dim, rng.random()).expect("dim >= 1");
    let potential = random_potential(&graph, dim, &mut rng);
    build_instance(seed, graph, connection, potential)
}

pub fn build_instance(
    seed: u64,
    graph: WeightedGraph,
    connection: BundleConnection,
    potential: EndomorphismField,
) -> RandomInstance {
    let magnetic = assemble_magnetic(&graph, &connection, &potential).expect("valid instance");
    let scalar = assemble_scalar(&graph).expect("valid graph");
    RandomInstance {
        seed,
        dim: connection.dim(),
        graph,
        connection,
        potential,
        magnetic,
        scalar,
    }
}

/// Two vertices, `b(0,1) = 1`, `m ≡ 1`, `c = 0`, line bundle with
/// `Φ_{0,1} = e^{iπ} = −1` and `W = 0`.
///
/// Returns the graph, the magnetic form and the scalar form.
pub fn pi_flux_pair() -> (WeightedGraph, FormOperator, FormOperator) {
    let g = WeightedGraph::new(vec![1.0; 2], vec![0.0; 2], [(0, 1, 1.0)]).expect("fixture");
    let phi = CMatrix::from_element(1, 1, Complex64::from_polar(1.0, std::f64::consts::PI));
    let conn =
        BundleConnection::new(&g, 1, [((0, 1), phi)], &Tolerances::default()).expect("unitary");
    let mag = assemble_magnetic(&g, &conn, &EndomorphismField::zeros(2, 1)).expect("fixture");
    let sc = assemble_scalar(&g).expect("fixture");
    (g, mag, sc)
}

/// Replaces `W(vertex)` by `c(vertex)·I − depth·P` where `P` is the
/// projection onto the first fiber direction, so that
/// `λ_min(W(vertex)) = c(vertex) − depth` breaks the domination hypothesis.
pub fn lower_potential(
    g: &WeightedGraph,
    w: &EndomorphismField,
    vertex: usize,
    depth: f64,
) -> crate::Result<EndomorphismField> {
    let d = w.dim();
    let mut mats: Vec<CMatrix> = (0..w.n()).map(|x| w.at(x).clone()).collect();
    let mut target = CMatrix::identity(d, d) * Complex64::new(g.killing()[vertex], 0.0);
    target[(0, 0)] -= Complex64::new(depth, 0.0);
    mats[vertex] = target;
    EndomorphismField::new(d, mats, &Tolerances::default())
}
