//! Task execution and result files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use ifx_core::asymptotics::{quasi_orbits_with, BulkKind, OperatorClass, SphereGrid};
use ifx_core::dynamics::{self, ExperimentSpec, Horizon, DEFAULT_BUDGET};
use ifx_core::index::{self, ChiralSymmetry, IndexOptions, IndexReport};
use ifx_core::linalg::{self, Matrix};
use ifx_core::models::{self, Model, ParamValue};
use ifx_core::spectra::{self, BlochGrid, SpectrumKind, SpectrumSet};
use ifx_core::{c64, truncation, CoefficientProfile, InterfaceOperator, Shift, TruncationBox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, ExperimentConfig, IndexTask, NonPropagationTask, Task};

/// One output file: name and full contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub body: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config_hash: String,
    pub artifacts: Vec<Artifact>,
    /// False when a check reported by the task failed (e.g. ε not met).
    pub passed: bool,
}

/// Failure of a run, split by exit code.
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Numerical(anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Numerical(_) => "numerical",
        }
    }

    pub fn message(&self) -> String {
        match self {
            RunError::Config(m) => m.clone(),
            RunError::Numerical(e) => format!("{e:#}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.0)
    }
}

impl From<ifx_core::Error> for RunError {
    fn from(e: ifx_core::Error) -> Self {
        match e {
            ifx_core::Error::UnknownModel(_) | ifx_core::Error::ModelParameters(_) => RunError::Config(e.to_string()),
            other => RunError::Numerical(other.into()),
        }
    }
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        RunError::Numerical(e)
    }
}

type RunResult<T> = std::result::Result<T, RunError>;

/// Builds the model named in the config, with its perturbation if any.
pub fn build_model(cfg: &ExperimentConfig) -> RunResult<Model> {
    build_with(cfg, &cfg.model.params)
}

fn build_with(cfg: &ExperimentConfig, params: &models::Params) -> RunResult<Model> {
    let mut model = models::build(&cfg.model.name, params)?;
    if let Some(p) = &cfg.model.perturbation {
        if !model.flags.hermitian {
            return Err(RunError::Config(format!(
                "perturbations are supported for self-adjoint models only, not {}",
                model.name
            )));
        }
        let k = random_term(&model, p.seed, p.radius, p.norm)?;
        let sum = model.operator.add(&k)?.claim_hermitian();
        model.operator = sum;
    }
    Ok(model)
}

/// K + K* with K supported on sites |x| ≤ radius and shifts in {−1, 0, 1};
/// for chiral models K maps the −1 eigenspace of Π into the +1 eigenspace.
fn random_term(model: &Model, seed: u64, radius: i64, norm: f64) -> RunResult<InterfaceOperator> {
    let t = &model.operator;
    let dim = t.lattice().dim();
    let fiber = t.lattice().fiber();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // ‖K + K*‖ ≤ 2·Σ_g sup_x ‖K_g(x)‖ ≤ 2·3·(entry Frobenius norm)
    let entry_norm = norm / 6.0;
    let (plus, minus) = match &model.chiral {
        Some(chi) => {
            let pi = chi.matrix();
            let id = linalg::identity(fiber);
            let half = c64::new(0.5, 0.0);
            (
                Some(linalg::scale(&linalg::add(&id, pi), half)),
                Some(linalg::scale(&linalg::sub(&id, pi), half)),
            )
        }
        None => (None, None),
    };
    let mut k = InterfaceOperator::new(t.lattice().clone());
    for g in -1i64..=1 {
        let mut entries = Vec::new();
        for site in box_sites(dim, radius) {
            let mut m = Matrix::from_fn(fiber, fiber, |_, _| {
                c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            if let (Some(p), Some(q)) = (&plus, &minus) {
                m = linalg::mul(&linalg::mul(p, &m), q);
            }
            let f = linalg::frobenius(&m);
            if f > 0.0 {
                m = linalg::scale(&m, c64::new(entry_norm * rng.random_range(0.0..1.0) / f, 0.0));
            }
            entries.push((site, m));
        }
        let mut shift = vec![0i64; dim];
        shift[0] = g;
        k.add_term(Shift(shift), CoefficientProfile::compact(dim, fiber, entries)?)?;
    }
    Ok(k.add(&k.adjoint())?)
}

fn box_sites(dim: usize, radius: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                (-radius..=radius).map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

/// Runs the configured task and returns the result files without writing them.
pub fn execute(cfg: &ExperimentConfig) -> RunResult<RunOutput> {
    cfg.validate()?;
    let hash = cfg.hash();
    let model = build_model(cfg)?;
    let ctx = Ctx { cfg, hash: &hash, model: &model };
    let (artifacts, passed) = match &cfg.task {
        Task::EssentialSpectrum(s) => ctx.essential(s.grid_points, s.sphere_points)?,
        Task::TruncationSpectrum(t) => ctx.truncation(t.half_width, t.window)?,
        Task::Convergence(c) => ctx.convergence(&c.half_widths, c.grid_points)?,
        Task::Index(i) => ctx.index(i, Decomposition::Auto)?,
        Task::DomainWallDecomposition(i) => ctx.index(i, Decomposition::Wall)?,
        Task::ConeDecomposition(i) => ctx.index(i, Decomposition::Cone)?,
        Task::NonPropagation(n) => ctx.non_propagation(n)?,
    };
    Ok(RunOutput { config_hash: hash, artifacts, passed })
}

/// Writes artifacts into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, out: &RunOutput) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for a in &out.artifacts {
        let p = dir.join(&a.name);
        fs::write(&p, &a.body).with_context(|| format!("writing {}", p.display()))?;
        written.push(p);
    }
    Ok(written)
}

/// Reads a cached run stored under `cache/<hash>`, if complete.
pub fn load_cached(cache: &Path, hash: &str) -> Option<RunOutput> {
    let dir = cache.join(hash);
    let manifest = fs::read_to_string(dir.join("MANIFEST")).ok()?;
    let mut lines = manifest.lines();
    let passed = lines.next()? == "passed";
    let artifacts = lines
        .map(|name| fs::read_to_string(dir.join(name)).ok().map(|body| Artifact { name: name.into(), body }))
        .collect::<Option<Vec<_>>>()?;
    Some(RunOutput { config_hash: hash.into(), artifacts, passed })
}

pub fn store_cached(cache: &Path, out: &RunOutput) -> anyhow::Result<()> {
    let dir = cache.join(&out.config_hash);
    write_artifacts(&dir, out)?;
    let mut manifest = String::from(if out.passed { "passed\n" } else { "failed\n" });
    for a in &out.artifacts {
        manifest.push_str(&a.name);
        manifest.push('\n');
    }
    fs::write(dir.join("MANIFEST"), manifest)?;
    Ok(())
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    hash: &'a str,
    model: &'a Model,
}

#[derive(Clone, Copy, PartialEq)]
enum Decomposition {
    Auto,
    Wall,
    Cone,
}

fn grid_for(dim: usize, points: Option<usize>) -> RunResult<BlochGrid> {
    Ok(match points {
        Some(n) => BlochGrid::uniform(dim, n)?,
        None => BlochGrid::default_for(dim, 0),
    })
}

fn sphere_for(points: Option<usize>) -> SphereGrid {
    let mut s = SphereGrid::default();
    if let Some(n) = points {
        s.circle_points = n;
    }
    s
}

fn kind_name(k: SpectrumKind) -> &'static str {
    match k {
        SpectrumKind::RealLine => "real_line",
        SpectrumKind::UnitCircle => "unit_circle",
        SpectrumKind::Generic => "generic",
    }
}

fn flags_json(m: &Model) -> Value {
    json!({ "hermitian": m.flags.hermitian, "unitary": m.flags.unitary, "chiral": m.flags.chiral })
}

struct Csv {
    w: csv::Writer<Vec<u8>>,
    header: String,
}

impl Csv {
    fn new(hash: &str, columns: &[&str]) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(columns).expect("in-memory write");
        Self { w, header: format!("# config_sha256={hash}\n") }
    }

    fn row(&mut self, fields: &[String]) {
        self.w.write_record(fields).expect("in-memory write");
    }

    fn finish(self, name: &str) -> Artifact {
        let bytes = self.w.into_inner().expect("in-memory flush");
        let mut body = self.header;
        body.push_str(std::str::from_utf8(&bytes).expect("utf-8"));
        Artifact { name: name.into(), body }
    }
}

fn f(x: f64) -> String {
    format!("{x:e}")
}

impl Ctx<'_> {
    fn json(&self, name: &str, body: Value) -> Artifact {
        let mut doc = serde_json::Map::new();
        doc.insert("config_hash".into(), json!(self.hash));
        doc.insert("model".into(), json!({ "name": self.model.name, "params": self.cfg.model.params }));
        doc.insert("task".into(), json!(self.cfg.task.name()));
        if let Value::Object(m) = body {
            doc.extend(m);
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("json");
        text.push('\n');
        Artifact { name: name.into(), body: text }
    }

    fn op(&self) -> &InterfaceOperator {
        &self.model.operator
    }

    fn essential(&self, points: Option<usize>, sphere: Option<usize>) -> RunResult<(Vec<Artifact>, bool)> {
        let t = self.op();
        let dim = t.lattice().dim();
        let grid = grid_for(dim, points)?;
        let sphere = sphere_for(sphere);
        let ess = spectra::essential_spectrum_with(t, &grid, &sphere)?;
        let detailed = spectra::essential_spectrum_detailed(t, &grid, &sphere)?;

        let mut pts = Csv::new(self.hash, &["re", "im"]);
        for z in &ess.points {
            pts.row(&[f(z.re), f(z.im)]);
        }
        let mut hull = Csv::new(self.hash, &["lower", "upper"]);
        for (a, b) in &ess.hull {
            hull.row(&[f(*a), f(*b)]);
        }
        let mut artifacts = vec![pts.finish("spectrum_points.csv"), hull.finish("hull.csv")];
        if dim == 1 {
            artifacts.push(self.bands(&detailed, &grid)?);
        }
        let bulks: Vec<Value> = detailed
            .iter()
            .map(|(b, s)| {
                json!({
                    "label": b.label,
                    "kind": match b.kind { BulkKind::TranslationInvariant { .. } => "translation_invariant", BulkKind::FaceFibered(_) => "face_fibered" },
                    "hull": s.hull,
                    "resolution": s.resolution,
                    "approximate": s.approximate,
                })
            })
            .collect();
        let gap = spectra::spectral_gap(&ess, reference_point(&ess)).ok();
        let body = json!({
            "kind": kind_name(ess.kind),
            "hull": ess.hull,
            "resolution": ess.resolution,
            "approximate": ess.approximate,
            "grid": grid.counts(),
            "bulks": bulks,
            "certificates": {
                "flags": flags_json(self.model),
                "gap_at_reference": gap,
                "reference": [reference_point(&ess).re, reference_point(&ess).im],
            },
        });
        artifacts.push(self.json("essential_spectrum.json", body));
        Ok((artifacts, true))
    }

    /// Plot data: (θ, eigenvalue) per translation-invariant 1D bulk.
    fn bands(&self, detailed: &[(ifx_core::asymptotics::BulkSystem, SpectrumSet)], grid: &BlochGrid) -> RunResult<Artifact> {
        let mut csv = Csv::new(self.hash, &["bulk", "theta", "band", "re", "im"]);
        for (b, _) in detailed {
            if !matches!(b.kind, BulkKind::TranslationInvariant { .. }) {
                continue;
            }
            let rows: Vec<Vec<c64>> = (0..grid.len())
                .into_par_iter()
                .map(|k| {
                    let h = spectra::bloch_symbol(b, &grid.point(k))?;
                    Ok(match b.class {
                        OperatorClass::Hermitian => linalg::hermitian_eigenvalues(&h)?
                            .into_iter()
                            .map(|x| c64::new(x, 0.0))
                            .collect(),
                        _ => {
                            let mut v = linalg::general_eigenvalues(&h)?;
                            v.sort_by(linalg::cmp_complex);
                            v
                        }
                    })
                })
                .collect::<ifx_core::Result<_>>()?;
            for (k, vals) in rows.iter().enumerate() {
                let theta = grid.point(k)[0];
                for (j, z) in vals.iter().enumerate() {
                    csv.row(&[b.label.clone(), f(theta), j.to_string(), f(z.re), f(z.im)]);
                }
            }
        }
        Ok(csv.finish("bands.csv"))
    }

    fn truncation(&self, half_width: usize, window: Option<[f64; 2]>) -> RunResult<(Vec<Artifact>, bool)> {
        let t = self.op();
        let bx = TruncationBox::new(t.lattice().dim(), half_width)?;
        let rep = truncation::spectrum_truncated(t, &bx, false)?;
        let mut csv = Csv::new(self.hash, &["k", "re", "im"]);
        for (k, z) in rep.eigenvalues.iter().enumerate() {
            csv.row(&[k.to_string(), f(z.re), f(z.im)]);
        }
        let mut body = json!({
            "half_width": half_width,
            "size": rep.eigenvalues.len(),
            "hermitian_path": rep.hermitian_path,
            "warnings": rep.warnings,
            "certificates": { "flags": flags_json(self.model) },
        });
        if let Some([a, b]) = window {
            let s = truncation::in_gap_states(t, &bx, (a, b))?;
            let states: Vec<Value> = s
                .report
                .eigenvalues
                .iter()
                .zip(&s.report.localization)
                .map(|(z, l)| json!({ "eigenvalue": [z.re, z.im], "localization": l }))
                .collect();
            body["in_gap"] = json!({
                "window": [a, b],
                "count": s.count(),
                "states": states,
                "edge_artifacts": s.edge_artifacts,
                "artifact_edge_weights": s.artifact_edge_weights,
                "warnings": s.warnings,
            });
        }
        Ok((vec![csv.finish("eigenvalues.csv"), self.json("truncation_spectrum.json", body)], true))
    }

    fn convergence(&self, half_widths: &[usize], points: Option<usize>) -> RunResult<(Vec<Artifact>, bool)> {
        let t = self.op();
        let grid = grid_for(t.lattice().dim(), points)?;
        let r = truncation::convergence_study(t, half_widths, &grid)?;
        let mut csv = Csv::new(self.hash, &["half_width", "distance", "artifacts_removed"]);
        for row in &r.rows {
            csv.row(&[row.half_width.to_string(), f(row.distance), row.artifacts_removed.to_string()]);
        }
        let body = json!({ "report": r, "certificates": { "flags": flags_json(self.model), "decreasing": r.decreasing } });
        Ok((vec![csv.finish("convergence.csv"), self.json("convergence.json", body)], r.decreasing))
    }

    fn index(&self, task: &IndexTask, mode: Decomposition) -> RunResult<(Vec<Artifact>, bool)> {
        let opts = IndexOptions {
            zero_window: task.zero_window,
            grid: task.grid_points.map(|n| BlochGrid::uniform(self.op().lattice().dim(), n)).transpose()?,
            winding_points: task.winding_points.unwrap_or(IndexOptions::default().winding_points),
            single_size: task.single_size,
            ..Default::default()
        };
        let pairs: Vec<Option<(f64, f64)>> = match &task.mass_grid {
            Some(g) => g
                .iter()
                .flat_map(|&a| g.iter().filter(move |&&b| b != a).map(move |&b| Some((a, b))))
                .collect(),
            None => vec![None],
        };
        let rows: Vec<RunResult<IndexRow>> = pairs
            .par_iter()
            .map(|pair| {
                let model = match pair {
                    Some((a, b)) => {
                        let mut p = self.cfg.model.params.clone();
                        p.insert("m_left".into(), ParamValue::Number(*a));
                        p.insert("m_right".into(), ParamValue::Number(*b));
                        build_with(self.cfg, &p)?
                    }
                    None => self.model.clone(),
                };
                index_row(&model, *pair, task, &opts, mode)
            })
            .collect();
        let rows = rows.into_iter().collect::<RunResult<Vec<_>>>()?;
        let passed = rows.iter().all(|r| r.report.as_ref().is_none_or(|x| x.identity_residual == 0));
        let mut csv = Csv::new(
            self.hash,
            &["m_left", "m_right", "interface_index", "per_bulk", "identity_residual", "flow"],
        );
        for r in &rows {
            let (a, b) = r.masses.map_or((String::new(), String::new()), |(a, b)| (f(a), f(b)));
            let (per, res) = match &r.report {
                Some(x) => (
                    x.per_bulk.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";"),
                    x.identity_residual.to_string(),
                ),
                None => (String::new(), String::new()),
            };
            let flow = r.flow.as_ref().map_or(String::new(), |fl| fl.flow.to_string());
            csv.row(&[a, b, r.index.to_string(), per, res, flow]);
        }
        let body = json!({
            "rows": rows,
            "certificates": {
                "flags": flags_json(self.model),
                "all_residuals_zero": passed,
            },
        });
        Ok((vec![csv.finish("index.csv"), self.json("index.json", body)], passed))
    }

    fn non_propagation(&self, task: &NonPropagationTask) -> RunResult<(Vec<Artifact>, bool)> {
        let t = self.op();
        let dim = t.lattice().dim();
        let fiber = t.lattice().fiber();
        let horizon = match (task.t_max, task.steps) {
            (Some(t_max), None) => Horizon::Continuous { t_max },
            (None, Some(steps)) => Horizon::Steps { steps },
            _ => unreachable!("validated"),
        };
        match (&horizon, OperatorClass::of(t)) {
            (Horizon::Continuous { .. }, OperatorClass::Hermitian) | (Horizon::Steps { .. }, OperatorClass::Unitary) => {}
            (_, class) => {
                return Err(RunError::Config(format!(
                    "use t_max for self-adjoint and steps for unitary models; {} is {class:?}",
                    self.model.name
                )))
            }
        }
        let bx = TruncationBox::new(dim, task.half_width)?;
        let site = task.source.site.clone().unwrap_or_else(|| vec![0; dim]);
        let psi = dynamics::delta(&bx, fiber, &site, task.source.component)
            .map_err(|e| RunError::Config(e.to_string()))?;
        let radii = task.radii.clone().unwrap_or_else(|| default_radii(task.half_width));
        let spec = ExperimentSpec {
            target: task.target.clone(),
            support: (task.support[0], task.support[1]),
            epsilon: task.epsilon,
            radii,
            horizon,
            budget: task.budget.unwrap_or(DEFAULT_BUDGET),
        };
        let eta = dynamics::smooth_bump(task.support[0], task.support[1]);
        let r = dynamics::non_propagation_experiment(t, &eta, &spec, &psi, &bx)?;
        let mut radii_csv = Csv::new(self.hash, &["r", "max_mass"]);
        for row in &r.rows {
            radii_csv.row(&[row.r.to_string(), f(row.max_mass)]);
        }
        let mut series = Csv::new(self.hash, &["time", "mass"]);
        for (time, m) in &r.series {
            series.row(&[f(*time), f(*m)]);
        }
        let mut report = serde_json::to_value(&r).expect("report serializes");
        if let Value::Object(m) = &mut report {
            m.remove("series");
        }
        let body = json!({
            "report": report,
            "certificates": {
                "flags": flags_json(self.model),
                "filter_degree": r.filter_degree,
                "filter_error": r.filter_error,
                "boundary_leakage": r.boundary_leakage,
                "passed": r.passed,
            },
        });
        Ok((
            vec![
                radii_csv.finish("radii.csv"),
                series.finish("mass_series.csv"),
                self.json("non_propagation.json", body),
            ],
            r.passed,
        ))
    }
}

/// Spectral reference point: 0 on the line, 1 on the circle.
fn reference_point(s: &SpectrumSet) -> c64 {
    match s.kind {
        SpectrumKind::UnitCircle => c64::new(1.0, 0.0),
        _ => c64::new(0.0, 0.0),
    }
}

/// Radii 0, 5, 10, 20, 40, … below the half-width.
pub fn default_radii(half_width: usize) -> Vec<usize> {
    let mut r = vec![0, 5];
    let mut next = 10;
    while next < half_width / 2 {
        r.push(next);
        next *= 2;
    }
    r.retain(|&x| x < half_width);
    r
}

#[derive(Debug, Serialize)]
struct IndexRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    masses: Option<(f64, f64)>,
    index: i64,
    count: index::ChiralCount,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<IndexReport>,
    /// Bulk winding per label, for translation-invariant 1D bulks.
    windings: BTreeMap<String, i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    flow: Option<index::FlowReport>,
}

fn index_row(
    model: &Model,
    masses: Option<(f64, f64)>,
    task: &IndexTask,
    opts: &IndexOptions,
    mode: Decomposition,
) -> RunResult<IndexRow> {
    let chi: &ChiralSymmetry = model
        .chiral
        .as_ref()
        .ok_or_else(|| RunError::Config(format!("model {} has no chiral symmetry", model.name)))?;
    let t = &model.operator;
    let bx = TruncationBox::new(t.lattice().dim(), task.half_width)?;
    let family = t.family()?;
    let report = match (mode, family) {
        (Decomposition::Wall, _) | (Decomposition::Auto, ifx_core::ProfileKind::DomainWall1D) => {
            Some(index::domain_wall_decomposition(t, chi, &bx, opts)?)
        }
        (Decomposition::Cone, _) | (Decomposition::Auto, ifx_core::ProfileKind::ConeSupported) => {
            Some(index::cone_decomposition(t, chi, &bx, opts)?)
        }
        (Decomposition::Auto, _) => None,
    };
    let count = match &report {
        Some(r) => r.count.clone(),
        None => index::chiral_interface_index(t, chi, &bx, opts)?,
    };
    let mut windings = BTreeMap::new();
    if t.lattice().dim() == 1 {
        for b in quasi_orbits_with(t, &opts.sphere)? {
            if matches!(b.kind, BulkKind::TranslationInvariant { .. }) {
                let w = index::bulk_winding(&b, chi, opts.winding_points)?;
                windings.insert(b.label.clone(), w.value);
            }
        }
    }
    let flow = match task.flow_steps {
        Some(n) => Some(index::chiral_spectral_flow(t, chi, &bx, None, n, opts)?),
        None => None,
    };
    Ok(IndexRow { masses, index: count.index, count, report, windings, flow })
}
