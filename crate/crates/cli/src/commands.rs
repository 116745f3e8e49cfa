//! Subcommand implementations. Each returns `Ok(true)` when all checks pass.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde_json::{json, Value};

use formdom::bundle::{check_potential_dominates_killing, validate_bundle, BundleFile};
use formdom::forms::{
    assemble_magnetic, assemble_scalar, check_diamagnetic, check_first_bd, check_kato_random,
    write_matrix_market,
};
use formdom::graph::{generate_family, validate_graph, GraphFile};
use formdom::metrics::{
    check_intrinsic, check_strongly_intrinsic, criterion_report, jump_size, Criterion,
    CriterionSettings, EdgeLengths, PseudoMetric, SigmaSource,
};
use formdom::probe::{
    run_probe, transfer_evidence, ConnectionSpec, PotentialSpec, ProbeConfig, TransferThresholds,
};
use formdom::semigroup::check_domination;
use formdom::{EndomorphismField, FamilyKind, FamilySpec, MeasureProfile, Verdict, WeightedGraph};

use crate::envelope::{read_input, Envelope};
use crate::RunArgs;

fn load_graph(env: &mut Envelope, path: &Path) -> anyhow::Result<WeightedGraph> {
    let bytes = read_input(path)?;
    env.add_input("graph", &bytes);
    let file: GraphFile =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    Ok(file.into_graph()?)
}

fn load_bundle(env: &mut Envelope, path: &Path) -> anyhow::Result<BundleFile> {
    let bytes = read_input(path)?;
    env.add_input("bundle", &bytes);
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn finish(env: Envelope, run: &RunArgs) -> anyhow::Result<bool> {
    let env = env.finish();
    env.print_summary();
    env.emit(run.out.as_deref())?;
    Ok(!env.verdict.is_failure())
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Graph JSON: `{ "n", "m", "c", "edges": [[x, y, b]] }`.
    #[arg(long)]
    graph: PathBuf,
    /// Bundle JSON with transports `phi` and potential `w`.
    #[arg(long)]
    bundle: Option<PathBuf>,
}

pub fn validate(run: &RunArgs, args: &ValidateArgs) -> anyhow::Result<bool> {
    let tol = run.tolerances()?;
    let mut env = Envelope::new("validate", run, tol);
    let g = load_graph(&mut env, &args.graph)?;
    env.reports.push(validate_graph(&g));
    if let Some(path) = &args.bundle {
        let file = load_bundle(&mut env, path)?;
        env.reports.push(validate_bundle(&g, &file, &tol));
    }
    finish(env, run)
}

#[derive(Debug, Args)]
pub struct DominateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    bundle: PathBuf,
}

pub fn dominate(run: &RunArgs, args: &DominateArgs) -> anyhow::Result<bool> {
    let tol = run.tolerances()?;
    if run.t_grid.iter().any(|t| t.is_nan() || *t < 0.0) {
        bail!("times in --t-grid must be nonnegative");
    }
    let mut env = Envelope::new("dominate", run, tol);
    let g = load_graph(&mut env, &args.graph)?;
    g.ensure_valid()?;
    let file = load_bundle(&mut env, &args.bundle)?;
    let (conn, w): (_, EndomorphismField) = file.build(&g, &tol)?;
    let mag = assemble_magnetic(&g, &conn, &w)?;
    let sc = assemble_scalar(&g)?;
    let seed = run.seed;
    env.reports
        .push(check_potential_dominates_killing(&g, &w, tol.psd));
    env.reports.push(check_domination(
        &mag,
        &sc,
        &run.t_grid,
        run.samples,
        seed,
        tol.domination,
    )?);
    env.reports
        .push(check_kato_random(&mag, &sc, run.samples, seed, tol.form)?);
    env.reports.push(check_diamagnetic(
        &mag,
        &sc,
        &g,
        run.samples,
        seed,
        tol.form,
    )?);
    env.reports
        .push(check_first_bd(&sc, run.samples, seed, tol.form)?);
    finish(env, run)
}

/// Family selection shared by `probe` and `metric`.
#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    /// `path`, `star`, `binary-tree`, `edgeless` or `random-sparse:<density>`.
    #[arg(long)]
    family: Option<String>,
    /// Comma-separated increasing sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    /// Uniform edge weight.
    #[arg(long, default_value_t = 1.0)]
    weight: f64,
    /// Scale the edge weight by the size (`b = weight · N`).
    #[arg(long)]
    weight_by_size: bool,
    /// `const:<k>`, `power:<alpha>` or `geometric:<r>`.
    #[arg(long, default_value = "const:1")]
    measure: String,
    /// Uniform killing term.
    #[arg(long, default_value_t = 0.0)]
    killing: f64,
}

impl FamilyArgs {
    fn spec(&self, seed: u64) -> anyhow::Result<Option<FamilySpec>> {
        let Some(name) = &self.family else {
            return Ok(None);
        };
        let kind: FamilyKind = name.parse()?;
        let measure: MeasureProfile = self.measure.parse()?;
        let spec = FamilySpec {
            seed,
            ..FamilySpec::new(kind, 1)
        }
        .with_weight(self.weight)
        .with_measure(measure)
        .with_killing(self.killing);
        Ok(Some(spec))
    }

    fn sizes(&self) -> anyhow::Result<&[usize]> {
        if self.sizes.is_empty() {
            bail!("--sizes must list at least one size");
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            bail!("--sizes must be strictly increasing");
        }
        Ok(&self.sizes)
    }

    fn graphs(&self, spec: &FamilySpec) -> anyhow::Result<Vec<(usize, WeightedGraph)>> {
        self.sizes()?
            .iter()
            .map(|&n| {
                let mut s = spec.with_size(n);
                if self.weight_by_size {
                    s = s.with_weight(self.weight * n as f64);
                }
                Ok((n, generate_family(&s)?))
            })
            .collect()
    }
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// `trivial`, `random` (random phases), `trivial:<d>` or `random:<d>`.
    #[arg(long, default_value = "trivial")]
    phases: String,
    /// Potential `W = (c + shift)·I`.
    #[arg(long, default_value_t = 0.0)]
    shift: f64,
    /// Probe vertex for the resolvent difference.
    #[arg(long, default_value_t = 0)]
    x0: usize,
    /// Final gap below which a trend counts as decaying.
    #[arg(long, default_value_t = 1e-2)]
    final_gap: f64,
}

pub fn probe(run: &RunArgs, args: &ProbeArgs) -> anyhow::Result<bool> {
    let tol = run.tolerances()?;
    let Some(family) = args.family.spec(run.seed)? else {
        bail!("--family is required")
    };
    if args.family.weight_by_size {
        bail!("--weight-by-size is not supported by probe");
    }
    let sizes = args.family.sizes()?;
    let connection: ConnectionSpec = args.phases.parse()?;
    let config = ProbeConfig {
        connection,
        potential: PotentialSpec { shift: args.shift },
        x0: args.x0,
        seed: run.seed,
        ..ProbeConfig::new(family)
    };
    let result = run_probe(&config, sizes)?;
    let thresholds = TransferThresholds {
        final_gap: args.final_gap,
        ..TransferThresholds::default()
    };
    let evidence = transfer_evidence(&result, &thresholds)?;

    let mut env = Envelope::new("probe", run, tol);
    env.extra.insert(
        "note".into(),
        "scalarGap, magneticGap and resolventDiff are finite-size comparison observables of this tool".into(),
    );
    env.extra
        .insert("probe".into(), serde_json::to_value(&result)?);
    env.reports
        .push(result.check_invariants(thresholds.negative_tol));
    env.reports.push(evidence.clone());
    let mut env = env.finish();
    env.verdict = evidence.verdict;
    env.print_summary();
    for (i, n) in result.sizes.iter().enumerate() {
        eprintln!(
            "N={n:<6} scalarGap={:.6e} magneticGap={:.6e} resolventDiff={:.6e}",
            result.scalar_gap[i], result.magnetic_gap[i], result.resolvent_diff[i]
        );
    }
    match &run.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let csv = std::fs::File::create(dir.join("probe.csv"))?;
            result.write_csv(csv)?;
            env.emit(Some(&dir.join("probe.json")))?;
        }
        None => env.emit(None)?,
    }
    // The probe gathers evidence; only a broken spectral invariant is an error.
    Ok(env.verdict != Verdict::Fail)
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Single graph file; alternatively use `--family` with `--sizes`.
    #[arg(long, conflicts_with = "family")]
    graph: Option<PathBuf>,
    #[command(flatten)]
    family: FamilyArgs,
    /// Edge lengths: `const:<s>`, `auto` (degree adapted) or a JSON file
    /// `{ "sigma": [[x, y, s]] }`.
    #[arg(long)]
    sigma: Option<String>,
    /// Comma-separated subset of `measure,degree,completeness`.
    #[arg(long, value_delimiter = ',')]
    criteria: Vec<String>,
}

fn sigma_source(
    env: &mut Envelope,
    spec: Option<&str>,
    graphs: &[(usize, WeightedGraph)],
) -> anyhow::Result<SigmaSource> {
    Ok(match spec {
        None => SigmaSource::None,
        Some("auto") => SigmaSource::DegreeAdapted,
        Some(s) if s.starts_with("const:") => {
            let v: f64 = s["const:".len()..]
                .parse()
                .with_context(|| format!("bad sigma `{s}`"))?;
            SigmaSource::Constant(v)
        }
        Some(path) => {
            if graphs.len() != 1 {
                bail!("a sigma file needs a single --graph");
            }
            let bytes = read_input(path.as_ref())?;
            env.add_input("sigma", &bytes);
            let file: formdom::metrics::EdgeLengthsFile =
                serde_json::from_slice(&bytes).with_context(|| format!("parsing {path}"))?;
            SigmaSource::Explicit(vec![EdgeLengths::from_triples(&graphs[0].1, &file.sigma)?])
        }
    })
}

pub fn metric(run: &RunArgs, args: &MetricArgs) -> anyhow::Result<bool> {
    let tol = run.tolerances()?;
    let mut env = Envelope::new("metric", run, tol);
    let graphs = match (&args.graph, args.family.spec(run.seed)?) {
        (Some(path), _) => {
            let g = load_graph(&mut env, path)?;
            g.ensure_valid()?;
            vec![(g.n(), g)]
        }
        (None, Some(spec)) => args.family.graphs(&spec)?,
        (None, None) => bail!("either --graph or --family is required"),
    };
    let sigma = sigma_source(&mut env, args.sigma.as_deref(), &graphs)?;
    let criteria = if args.criteria.is_empty() {
        Criterion::ALL.to_vec()
    } else {
        args.criteria
            .iter()
            .map(|c| c.parse())
            .collect::<Result<_, _>>()?
    };

    let (size, g) = graphs.last().expect("at least one graph");
    let lengths = match &sigma {
        SigmaSource::None => None,
        SigmaSource::Constant(s) => Some(EdgeLengths::constant(g, *s)?),
        SigmaSource::Explicit(l) => Some(l[0].clone()),
        SigmaSource::DegreeAdapted => Some(EdgeLengths::degree_adapted(g)),
    };
    if let Some(l) = &lengths {
        let d = PseudoMetric::from_lengths(g, l)?;
        let metric_tol = 1e-12;
        env.reports
            .push(check_strongly_intrinsic(g, l, metric_tol)?);
        env.reports.push(check_intrinsic(g, &d, metric_tol)?);
        env.reports.push(d.check_axioms(1000, run.seed, metric_tol));
        env.extra
            .insert("jump_size".into(), json!(jump_size(g, &d)));
        env.extra.insert("metric_graph_size".into(), json!(size));
    }
    let settings = CriterionSettings {
        sigma,
        criteria,
        ..CriterionSettings::default()
    };
    let verdicts = criterion_report(&graphs, &settings)?;
    for c in &verdicts.criteria {
        eprintln!(
            "criterion {:<14} {}: {}",
            c.criterion.to_string(),
            status_name(&c.status),
            c.note
        );
    }
    env.extra
        .insert("criteria".into(), serde_json::to_value(&verdicts)?);
    finish(env, run)
}

fn status_name(s: &formdom::metrics::CriterionStatus) -> String {
    match serde_json::to_value(s) {
        Ok(Value::String(v)) => v,
        _ => format!("{s:?}"),
    }
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Without a bundle the scalar form is exported.
    #[arg(long)]
    bundle: Option<PathBuf>,
}

pub fn export(run: &RunArgs, args: &ExportArgs) -> anyhow::Result<bool> {
    let tol = run.tolerances()?;
    let mut env = Envelope::new("export", run, tol);
    let g = load_graph(&mut env, &args.graph)?;
    let form = match &args.bundle {
        Some(path) => {
            let (conn, w) = load_bundle(&mut env, path)?.build(&g, &tol)?;
            assemble_magnetic(&g, &conn, &w)?
        }
        None => assemble_scalar(&g)?,
    };
    match &run.out {
        Some(p) => write_matrix_market(&form, std::fs::File::create(p)?)?,
        None => write_matrix_market(&form, std::io::stdout().lock())?,
    }
    Ok(true)
}
