//! Spectral filters and time evolution on truncation boxes, and the
//! non-propagation experiment built from them.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{self, BulkSystem, OperatorClass};
use crate::error::{Error, Result};
use crate::lattice::{norm, TruncationBox};
use crate::linalg::{CsrMatrix, LinearOperator, ZERO};
use crate::operator::InterfaceOperator;
use crate::profile::{direction_of, Cap, ProfileKind};
use crate::spectra::{self, BlochGrid, SpectrumKind, SpectrumSet};

pub const DEFAULT_BUDGET: f64 = 1e-6;
pub const MAX_DEGREE: usize = 2000;
/// Quadrature nodes used to compute expansion coefficients.
const NODES: usize = 8192;
/// Spectral bound is this factor times the Gershgorin radius.
const HULL_PAD: f64 = 1.01;
/// Evolved states must keep this many sites free of mass at the boundary.
pub const BOUNDARY_MARGIN: usize = 10;
/// Tolerated norm inside the boundary margin, relative to ‖ψ‖.
pub const BOUNDARY_TOL: f64 = 1e-10;
/// Boundary leakage allowed in an experiment, as a fraction of ε.
pub const LEAK_FRACTION: f64 = 0.5;
/// Time samples per unit time for Hermitian evolution.
pub const SAMPLES_PER_UNIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    /// η(H) = Σ c_k T_k(H/a) for Hermitian H with spectrum in [−a, a].
    Chebyshev,
    /// η(U) = Σ_{|k|≤K} c_k U^k for unitary U; η is a function of the angle.
    Trigonometric,
}

/// Polynomial approximation of a filter function η.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFilter {
    kind: FilterKind,
    /// Chebyshev: c_0..c_K. Trigonometric: c_{−K}..c_K.
    coeffs: Vec<c64>,
    scale: f64,
    support: (f64, f64),
    approximation_error: f64,
}

fn check_budget(budget: f64) -> Result<()> {
    if !(budget > 0.0) {
        return Err(Error::InvalidArgument(format!("filter budget {budget}")));
    }
    Ok(())
}

fn check_support(support: (f64, f64)) -> Result<()> {
    if !(support.0 < support.1) || !support.0.is_finite() || !support.1.is_finite() {
        return Err(Error::InvalidArgument(format!("filter support {support:?}")));
    }
    Ok(())
}

/// Smallest degree whose coefficient tail is within budget.
fn truncate_degree(tail_terms: &[f64], budget: f64) -> Result<(usize, f64)> {
    // tail[k] = Σ_{j>k} |c_j|
    let mut tail = vec![0.0; tail_terms.len()];
    let mut acc = 0.0;
    for k in (0..tail_terms.len()).rev() {
        tail[k] = acc;
        acc += tail_terms[k];
    }
    (0..=MAX_DEGREE.min(tail.len() - 1))
        .find(|&k| tail[k] <= budget)
        .map(|k| (k, tail[k]))
        .ok_or(Error::BudgetUnreachable { budget, max_degree: MAX_DEGREE })
}

impl SpectralFilter {
    /// Chebyshev expansion of η on [−bound, bound].
    pub fn chebyshev(
        eta: &(dyn Fn(f64) -> f64 + Sync),
        support: (f64, f64),
        bound: f64,
        budget: f64,
    ) -> Result<Self> {
        check_budget(budget)?;
        check_support(support)?;
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(Error::InvalidArgument(format!("missing spectral hull estimate (bound {bound})")));
        }
        let nodes: Vec<f64> = (0..NODES).map(|j| PI * (j as f64 + 0.5) / NODES as f64).collect();
        let values: Vec<f64> = nodes.par_iter().map(|&th| eta(bound * th.cos())).collect();
        check_vanishing(
            nodes.iter().map(|th| bound * th.cos()).zip(values.iter().copied()),
            support,
            budget,
        )?;
        let terms = 2 * MAX_DEGREE + 1;
        let coeffs: Vec<f64> = (0..terms)
            .into_par_iter()
            .map(|k| {
                let s: f64 = nodes.iter().zip(&values).map(|(th, v)| v * (k as f64 * th).cos()).sum();
                let w = if k == 0 { 1.0 } else { 2.0 };
                w * s / NODES as f64
            })
            .collect();
        let abs: Vec<f64> = coeffs.iter().map(|c| c.abs()).collect();
        let (degree, err) = truncate_degree(&abs, budget)?;
        Ok(Self {
            kind: FilterKind::Chebyshev,
            coeffs: coeffs[..=degree].iter().map(|&c| c64::new(c, 0.0)).collect(),
            scale: bound,
            support,
            approximation_error: err,
        })
    }

    /// Fourier expansion of the 2π-periodic η(φ), φ the eigenphase.
    pub fn trigonometric(eta: &(dyn Fn(f64) -> f64 + Sync), support: (f64, f64), budget: f64) -> Result<Self> {
        check_budget(budget)?;
        check_support(support)?;
        if support.1 - support.0 > 2.0 * PI {
            return Err(Error::InvalidArgument("arc support longer than the circle".into()));
        }
        let nodes: Vec<f64> = (0..NODES).map(|j| 2.0 * PI * j as f64 / NODES as f64 - PI).collect();
        let values: Vec<f64> = nodes.par_iter().map(|&p| eta(p)).collect();
        let inside = |p: f64| {
            [p - 2.0 * PI, p, p + 2.0 * PI].iter().any(|&q| q > support.0 && q < support.1)
        };
        for (p, v) in nodes.iter().zip(&values) {
            if !inside(*p) && v.abs() > budget {
                return Err(Error::InvalidArgument(format!(
                    "eta({p:.4}) = {v:e} outside its declared support"
                )));
            }
        }
        let coeff = |k: i64| -> c64 {
            let s: c64 = nodes
                .iter()
                .zip(&values)
                .map(|(p, v)| c64::from_polar(*v, -(k as f64) * p))
                .sum();
            s / NODES as f64
        };
        let all: Vec<(c64, c64)> = (0..=2 * MAX_DEGREE as i64)
            .into_par_iter()
            .map(|k| (coeff(k), coeff(-k)))
            .collect();
        let abs: Vec<f64> = all
            .iter()
            .enumerate()
            .map(|(k, (p, m))| if k == 0 { p.norm() } else { p.norm() + m.norm() })
            .collect();
        let (degree, err) = truncate_degree(&abs, budget)?;
        let mut coeffs: Vec<c64> = (1..=degree).rev().map(|k| all[k].1).collect();
        coeffs.extend((0..=degree).map(|k| all[k].0));
        Ok(Self { kind: FilterKind::Trigonometric, coeffs, scale: 1.0, support, approximation_error: err })
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn degree(&self) -> usize {
        match self.kind {
            FilterKind::Chebyshev => self.coeffs.len() - 1,
            FilterKind::Trigonometric => (self.coeffs.len() - 1) / 2,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// Sup-norm bound of η minus its expansion on the hull.
    pub fn approximation_error(&self) -> f64 {
        self.approximation_error
    }

    /// Value of the expansion at a real point (Chebyshev) or angle.
    pub fn eval(&self, x: f64) -> c64 {
        match self.kind {
            FilterKind::Chebyshev => {
                let th = (x / self.scale).clamp(-1.0, 1.0).acos();
                self.coeffs.iter().enumerate().map(|(k, c)| c * (k as f64 * th).cos()).sum()
            }
            FilterKind::Trigonometric => {
                let d = self.degree() as i64;
                self.coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * c64::from_polar(1.0, (i as i64 - d) as f64 * x))
                    .sum()
            }
        }
    }

    /// η(A)ψ for an operator A of the filter's kind.
    pub fn apply(&self, a: &dyn LinearOperator, psi: &[c64]) -> Result<Vec<c64>> {
        if psi.len() != a.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), found: psi.len() });
        }
        Ok(match self.kind {
            FilterKind::Chebyshev => chebyshev_sum(a, self.scale, &self.coeffs, psi),
            FilterKind::Trigonometric => {
                let d = self.degree();
                let mut out: Vec<c64> = psi.iter().map(|z| z * self.coeffs[d]).collect();
                for (forward, sign) in [(true, 1i64), (false, -1i64)] {
                    let mut v = psi.to_vec();
                    let mut w = vec![ZERO; psi.len()];
                    for k in 1..=d {
                        if forward {
                            a.apply_into(&v, &mut w);
                        } else {
                            a.apply_adjoint_into(&v, &mut w);
                        }
                        std::mem::swap(&mut v, &mut w);
                        let c = self.coeffs[(d as i64 + sign * k as i64) as usize];
                        out.iter_mut().zip(&v).for_each(|(o, x)| *o += c * x);
                    }
                }
                out
            }
        })
    }
}

fn check_vanishing(
    samples: impl Iterator<Item = (f64, f64)>,
    support: (f64, f64),
    budget: f64,
) -> Result<()> {
    for (x, v) in samples {
        if (x <= support.0 || x >= support.1) && v.abs() > budget {
            return Err(Error::InvalidArgument(format!("eta({x:.4}) = {v:e} outside its declared support")));
        }
    }
    Ok(())
}

/// Σ_k c_k T_k(A/a) ψ by the three-term recurrence.
fn chebyshev_sum(a: &dyn LinearOperator, scale: f64, coeffs: &[c64], psi: &[c64]) -> Vec<c64> {
    let n = psi.len();
    let mut out: Vec<c64> = psi.iter().map(|z| z * coeffs[0]).collect();
    if coeffs.len() == 1 {
        return out;
    }
    let mut prev = psi.to_vec();
    let mut cur = vec![ZERO; n];
    a.apply_into(psi, &mut cur);
    cur.iter_mut().for_each(|z| *z /= scale);
    out.iter_mut().zip(&cur).for_each(|(o, x)| *o += coeffs[1] * x);
    let mut next = vec![ZERO; n];
    for c in &coeffs[2..] {
        a.apply_into(&cur, &mut next);
        for i in 0..n {
            next[i] = next[i] * (2.0 / scale) - prev[i];
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        out.iter_mut().zip(&cur).for_each(|(o, x)| *o += c * x);
    }
    out
}

/// Spectral bound used for Chebyshev rescaling of a truncation.
pub fn hull_bound(a: &CsrMatrix) -> f64 {
    (HULL_PAD * a.gershgorin_radius()).max(1e-12)
}

/// Builds the filter matching the operator class and applies it to ψ on the box.
pub fn apply_filter(
    t: &InterfaceOperator,
    eta: &(dyn Fn(f64) -> f64 + Sync),
    support: (f64, f64),
    psi: &[c64],
    bx: &TruncationBox,
    budget: f64,
) -> Result<(Vec<c64>, SpectralFilter)> {
    let a = t.assemble_truncation(bx)?;
    let filter = filter_for(t, &a, eta, support, budget)?;
    let out = filter.apply(&a, psi)?;
    Ok((out, filter))
}

fn filter_for(
    t: &InterfaceOperator,
    a: &CsrMatrix,
    eta: &(dyn Fn(f64) -> f64 + Sync),
    support: (f64, f64),
    budget: f64,
) -> Result<SpectralFilter> {
    if t.hermitian_flag() || a.is_hermitian(1e-12) {
        SpectralFilter::chebyshev(eta, support, hull_bound(a), budget)
    } else if t.unitary_flag() {
        SpectralFilter::trigonometric(eta, support, budget)
    } else {
        Err(Error::Symmetry("self-adjoint or unitary (needed for a spectral filter)".into()))
    }
}

// -------------------------------------------------------------------------
// Bessel functions and evolution
// -------------------------------------------------------------------------

/// J_0(z), …, J_n(z) by Miller's backward recurrence.
pub fn bessel_j(n: usize, z: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if z == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let x = z.abs();
    let top = n.max(x as usize) + 30 + (40.0 * x.max(1.0)).sqrt() as usize;
    let top = top + top % 2;
    let mut vals = vec![0.0; top + 2];
    vals[top] = 1e-300;
    for k in (1..=top).rev() {
        vals[k - 1] = 2.0 * k as f64 / x * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            vals.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    let norm = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    for k in 0..=n {
        let v = vals[k] / norm;
        out[k] = if z < 0.0 && k % 2 == 1 { -v } else { v };
    }
    out
}

/// e^{−itA}ψ for Hermitian A with spectrum in [−bound, bound].
pub fn propagate_hermitian(a: &dyn LinearOperator, bound: f64, psi: &[c64], t: f64) -> Vec<c64> {
    if t == 0.0 {
        return psi.to_vec();
    }
    let z = bound * t;
    let degree = (1.2 * z.abs()).ceil() as usize + 40;
    let j = bessel_j(degree, z);
    // e^{−izx} = J_0(z) + 2 Σ_{k≥1} (−i)^k J_k(z) T_k(x)
    let coeffs: Vec<c64> = (0..=degree)
        .map(|k| {
            let w = if k == 0 { 1.0 } else { 2.0 };
            let phase = match k % 4 {
                0 => c64::new(1.0, 0.0),
                1 => c64::new(0.0, -1.0),
                2 => c64::new(-1.0, 0.0),
                _ => c64::new(0.0, 1.0),
            };
            phase * (w * j[k])
        })
        .collect();
    chebyshev_sum(a, bound, &coeffs, psi)
}

/// U^n ψ; negative n uses the adjoint.
pub fn propagate_unitary(u: &dyn LinearOperator, psi: &[c64], n: i64) -> Vec<c64> {
    let mut v = psi.to_vec();
    let mut w = vec![ZERO; psi.len()];
    for _ in 0..n.unsigned_abs() {
        if n > 0 {
            u.apply_into(&v, &mut w);
        } else {
            u.apply_adjoint_into(&v, &mut w);
        }
        std::mem::swap(&mut v, &mut w);
    }
    v
}

/// Norm of ψ on the sites within `margin` of the box boundary.
pub fn boundary_norm(psi: &[c64], bx: &TruncationBox, fiber: usize, margin: usize) -> f64 {
    psi.chunks(fiber)
        .enumerate()
        .filter(|(i, _)| bx.depth(&bx.site(*i)) < margin)
        .map(|(_, c)| c.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

fn check_boundary(psi: &[c64], reference: f64, bx: &TruncationBox, fiber: usize, when: &str) -> Result<()> {
    let b = boundary_norm(psi, bx, fiber, BOUNDARY_MARGIN);
    if b > BOUNDARY_TOL * reference.max(f64::MIN_POSITIVE) {
        return Err(Error::BoundaryReached(format!(
            "norm {b:e} within {BOUNDARY_MARGIN} sites of the boundary at {when}; enlarge the box"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Time {
    /// Integer power of a unitary.
    Steps(i64),
    /// Real time for e^{−itH}.
    Continuous(f64),
}

/// Evolves ψ on the box and checks that no mass reaches the boundary margin.
pub fn evolve(t: &InterfaceOperator, psi: &[c64], time: Time, bx: &TruncationBox) -> Result<Vec<c64>> {
    let a = t.assemble_truncation(bx)?;
    if psi.len() != a.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: psi.len() });
    }
    let out = match time {
        Time::Steps(n) => {
            if !t.unitary_flag() {
                return Err(Error::Symmetry("unitary (integer-step evolution)".into()));
            }
            propagate_unitary(&a, psi, n)
        }
        Time::Continuous(s) => {
            if !(t.hermitian_flag() || a.is_hermitian(1e-12)) {
                return Err(Error::Symmetry("self-adjoint (continuous-time evolution)".into()));
            }
            propagate_hermitian(&a, hull_bound(&a), psi, s)
        }
    };
    check_boundary(&out, norm(psi), bx, t.lattice().fiber(), &format!("{time:?}"))?;
    Ok(out)
}

/// The unit vector at site x, fiber component `component`.
pub fn delta(bx: &TruncationBox, fiber: usize, x: &[i64], component: usize) -> Result<Vec<c64>> {
    let i = bx
        .index(x)
        .ok_or_else(|| Error::InvalidArgument(format!("site {x:?} outside the box")))?;
    if component >= fiber {
        return Err(Error::InvalidArgument(format!("component {component} of fiber {fiber}")));
    }
    let mut v = vec![ZERO; bx.space_dim(fiber)];
    v[i * fiber + component] = c64::new(1.0, 0.0);
    Ok(v)
}

/// C^∞ bump supported in (a, b), equal to 1 at the midpoint.
pub fn smooth_bump(a: f64, b: f64) -> impl Fn(f64) -> f64 + Send + Sync + Clone {
    move |x| {
        let u = (2.0 * x - a - b) / (b - a);
        if u.abs() < 1.0 {
            (1.0 - 1.0 / (1.0 - u * u)).exp()
        } else {
            0.0
        }
    }
}

// -------------------------------------------------------------------------
// Regions and the non-propagation experiment
// -------------------------------------------------------------------------

/// Member of a nested family of lattice regions W_r, shrinking as r grows.
#[derive(Clone)]
pub enum Region {
    /// {x : sign · x_axis ≥ r}.
    HalfLine { axis: usize, sign: i64, r: usize },
    /// {x : |x| ≥ r, x/|x| ∈ cap}.
    TruncatedCone { cap: Cap, r: usize },
    Custom { name: String, r: usize, contains: Arc<dyn Fn(&[i64], usize) -> bool + Send + Sync> },
}

impl std::fmt::Debug for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.describe())
    }
}

impl Region {
    pub fn half_line(axis: usize, sign: i64, r: usize) -> Self {
        Region::HalfLine { axis, sign: sign.signum(), r }
    }

    pub fn truncated_cone(cap: Cap, r: usize) -> Self {
        Region::TruncatedCone { cap, r }
    }

    pub fn radius(&self) -> usize {
        match self {
            Region::HalfLine { r, .. } | Region::TruncatedCone { r, .. } | Region::Custom { r, .. } => *r,
        }
    }

    pub fn with_radius(&self, r: usize) -> Self {
        let mut out = self.clone();
        match &mut out {
            Region::HalfLine { r: s, .. } | Region::TruncatedCone { r: s, .. } | Region::Custom { r: s, .. } => {
                *s = r
            }
        }
        out
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        match self {
            Region::HalfLine { axis, sign, r } => sign * x[*axis] >= *r as i64,
            Region::TruncatedCone { cap, r } => {
                let n2: i64 = x.iter().map(|c| c * c).sum();
                (n2 as f64).sqrt() >= *r as f64 && direction_of(x).is_some_and(|w| cap.contains(&w))
            }
            Region::Custom { contains, r, .. } => contains(x, *r),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Region::HalfLine { axis, sign, r } => {
                format!("half-line x{axis} {} {r}", if *sign < 0 { "<= -" } else { ">=" })
            }
            Region::TruncatedCone { cap, r } => {
                format!("cone around {:?} (radius {:.4}) beyond |x| >= {r}", cap.center(), cap.radius())
            }
            Region::Custom { name, r, .. } => format!("{name} (r = {r})"),
        }
    }

    /// Region family around the quasi-orbit labelled `label`.
    pub fn for_quasi_orbit(t: &InterfaceOperator, label: &str, r: usize) -> Result<Self> {
        let dim = t.lattice().dim();
        match (t.family()?, label) {
            (ProfileKind::DomainWall1D, "left") => Ok(Self::half_line(0, -1, r)),
            (ProfileKind::DomainWall1D, "right") => Ok(Self::half_line(0, 1, r)),
            (ProfileKind::CartesianAniso, l) if l.starts_with('x') => {
                let sign = if l.ends_with('-') { -1 } else { 1 };
                let axis: usize = l[1..l.len() - 1]
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("face label '{l}'")))?;
                Ok(Self::half_line(axis, sign, r))
            }
            (ProfileKind::ConeSupported, l) if l.starts_with("cap ") => {
                let j: usize = l[4..]
                    .split_whitespace()
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("cap label '{l}'")))?;
                let cap = t
                    .terms()
                    .find_map(|(_, f)| f.caps().and_then(|c| c.get(j).cloned()))
                    .ok_or_else(|| Error::InvalidArgument(format!("no cap {j}")))?;
                Ok(Self::truncated_cone(cap, r))
            }
            (ProfileKind::Radial, l) if l.starts_with("ray ") => {
                let bulk = find_bulk(t, l)?;
                let w = bulk.direction.clone().expect("ray bulks carry a direction");
                let half = if dim == 2 { PI / 8.0 } else { PI / 6.0 };
                Ok(Self::truncated_cone(Cap::new(w, half)?, r))
            }
            (family, l) => Err(Error::InvalidArgument(format!(
                "no region family for quasi-orbit '{l}' of a {family:?} operator"
            ))),
        }
    }
}

fn find_bulk(t: &InterfaceOperator, label: &str) -> Result<BulkSystem> {
    let bulks = asymptotics::quasi_orbits(t)?;
    let labels: Vec<String> = bulks.iter().map(|b| b.label.clone()).collect();
    bulks
        .into_iter()
        .find(|b| b.label == label)
        .ok_or_else(|| Error::InvalidArgument(format!("no quasi-orbit '{label}'; have {labels:?}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// e^{−itH} sampled SAMPLES_PER_UNIT times per unit time on [0, t_max].
    Continuous { t_max: f64 },
    /// U^n for every integer 0 ≤ n ≤ steps.
    Steps { steps: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Label of the target quasi-orbit.
    pub target: String,
    /// Declared support of η: an interval, or an arc of eigenphases.
    pub support: (f64, f64),
    pub epsilon: f64,
    /// Nested radii to search, in increasing order.
    pub radii: Vec<usize>,
    pub horizon: Horizon,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusRow {
    pub r: usize,
    /// max over sampled times of ‖χ_W ψ(t)‖ / ‖ψ‖.
    pub max_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonPropagationReport {
    pub target: String,
    pub region: String,
    pub rows: Vec<RadiusRow>,
    /// Smallest searched radius with max_mass + boundary_leakage ≤ ε.
    pub achieved_radius: Option<usize>,
    pub passed: bool,
    pub epsilon: f64,
    pub filter_degree: usize,
    pub filter_error: f64,
    pub filtered_norm: f64,
    pub samples: usize,
    /// (time, mass at the achieved radius, or at the largest radius).
    pub series: Vec<(f64, f64)>,
    /// Target bulk spectrum hull used for the hypothesis check.
    pub target_hull: Vec<(f64, f64)>,
    /// Bound on the deviation from infinite-volume evolution caused by the
    /// box boundary, relative to ‖ψ‖.
    pub boundary_leakage: f64,
}

/// Refuses to run unless supp η misses the target bulk spectrum.
fn check_hypothesis(bulk: &BulkSystem, support: (f64, f64)) -> Result<SpectrumSet> {
    let spec = spectra::bulk_spectrum(bulk, &BlochGrid::default_for(bulk.dim, 0))?;
    let pad = spec.resolution;
    let meets = match spec.kind {
        SpectrumKind::RealLine => spec
            .hull
            .iter()
            .any(|&(a, b)| b >= support.0 - pad && a <= support.1 + pad),
        SpectrumKind::UnitCircle => spec.hull.iter().any(|&(a, b)| {
            [-2.0 * PI, 0.0, 2.0 * PI]
                .iter()
                .any(|s| b + s >= support.0 - pad && a + s <= support.1 + pad)
        }),
        SpectrumKind::Generic => {
            return Err(Error::HypothesisViolated("target bulk has no real or circular spectrum".into()))
        }
    };
    if meets {
        return Err(Error::HypothesisViolated(format!(
            "support {support:?} meets the spectrum of '{}' with hull {:?}",
            bulk.label, spec.hull
        )));
    }
    Ok(spec)
}

/// Measures ‖χ_W e^{−itH}η(H)ψ‖ (or U^n) over the horizon for a nested
/// family of regions W around the target quasi-orbit.
pub fn non_propagation_experiment(
    t: &InterfaceOperator,
    eta: &(dyn Fn(f64) -> f64 + Sync),
    spec: &ExperimentSpec,
    psi: &[c64],
    bx: &TruncationBox,
) -> Result<NonPropagationReport> {
    if spec.radii.is_empty() || spec.radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("radii must be non-empty and strictly increasing".into()));
    }
    let bulk = find_bulk(t, &spec.target)?;
    let class = OperatorClass::of(t);
    match (&spec.horizon, class) {
        (Horizon::Continuous { .. }, OperatorClass::Hermitian) | (Horizon::Steps { .. }, OperatorClass::Unitary) => {}
        _ => return Err(Error::InvalidArgument(format!("horizon does not match a {class:?} operator"))),
    }
    let target_spec = check_hypothesis(&bulk, spec.support)?;
    let base = Region::for_quasi_orbit(t, &spec.target, 0)?;
    let a = t.assemble_truncation(bx)?;
    if psi.len() != a.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: psi.len() });
    }
    let fiber = t.lattice().fiber();
    let filter = filter_for(t, &a, eta, spec.support, spec.budget)?;
    let psi_norm = norm(psi);
    let mut state = filter.apply(&a, psi)?;
    // Duhamel: ‖A^∞-evolution − box evolution‖ ≤ Σ ‖A‖·‖χ_margin ψ_k‖·(step)
    let op_norm = a.gershgorin_radius();
    let leak_cap = LEAK_FRACTION * spec.epsilon * psi_norm;
    let mut leak = 0.0;
    let mut track = |v: &[c64], weight: f64, when: String| -> Result<()> {
        leak += weight * op_norm * boundary_norm(v, bx, fiber, BOUNDARY_MARGIN);
        if leak > leak_cap {
            return Err(Error::BoundaryReached(format!(
                "accumulated boundary leakage {leak:e} exceeds {leak_cap:e} at {when}; enlarge the box"
            )));
        }
        Ok(())
    };
    let filtered_norm = norm(&state) / psi_norm.max(f64::MIN_POSITIVE);

    // per-site membership of every region in the family
    let sites: Vec<Vec<i64>> = bx.sites().collect();
    let members: Vec<Vec<bool>> = spec
        .radii
        .iter()
        .map(|&r| {
            let reg = base.with_radius(r);
            sites.iter().map(|x| reg.contains(x)).collect()
        })
        .collect();
    let masses = |v: &[c64]| -> Vec<f64> {
        let site_mass: Vec<f64> = v.chunks(fiber).map(|c| c.iter().map(|z| z.norm_sqr()).sum()).collect();
        members
            .par_iter()
            .map(|m| {
                let s: f64 = site_mass.iter().zip(m).filter(|(_, &k)| k).map(|(w, _)| w).sum();
                s.sqrt() / psi_norm.max(f64::MIN_POSITIVE)
            })
            .collect()
    };

    let mut trace: Vec<(f64, Vec<f64>)> = vec![(0.0, masses(&state))];
    match spec.horizon {
        Horizon::Continuous { t_max } => {
            let n = (t_max * SAMPLES_PER_UNIT as f64).ceil() as usize;
            let dt = t_max / n.max(1) as f64;
            let bound = hull_bound(&a);
            for k in 1..=n {
                track(&state, dt, format!("t = {}", (k - 1) as f64 * dt))?;
                state = propagate_hermitian(&a, bound, &state, dt);
                let time = k as f64 * dt;
                trace.push((time, masses(&state)));
            }
        }
        Horizon::Steps { steps } => {
            for n in 1..=steps {
                track(&state, 1.0, format!("n = {}", n - 1))?;
                state = propagate_unitary(&a, &state, 1);
                trace.push((n as f64, masses(&state)));
            }
        }
    }
    let leakage = leak / psi_norm.max(f64::MIN_POSITIVE);
    let rows: Vec<RadiusRow> = spec
        .radii
        .iter()
        .enumerate()
        .map(|(i, &r)| RadiusRow { r, max_mass: trace.iter().map(|(_, m)| m[i]).fold(0.0, f64::max) })
        .collect();
    // the box masses are within `leakage` of the infinite-volume ones
    let achieved = rows.iter().position(|row| row.max_mass + leakage <= spec.epsilon);
    let shown = achieved.unwrap_or(rows.len() - 1);
    Ok(NonPropagationReport {
        target: spec.target.clone(),
        region: base.with_radius(spec.radii[shown]).describe(),
        achieved_radius: achieved.map(|i| rows[i].r),
        passed: achieved.is_some(),
        rows,
        epsilon: spec.epsilon,
        filter_degree: filter.degree(),
        filter_error: filter.approximation_error(),
        filtered_norm,
        samples: trace.len(),
        series: trace.iter().map(|(time, m)| (*time, m[shown])).collect(),
        target_hull: target_spec.hull,
        boundary_leakage: leakage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Lattice, Shift};
    use crate::models;

    fn series_j0(z: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= -(z * z / 4.0) / (k * k) as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn bessel_matches_series() {
        for z in [0.5, 2.0, 7.5, -3.0] {
            assert!((bessel_j(5, z)[0] - series_j0(z)).abs() < 1e-13, "z = {z}");
        }
        // J_1(-z) = -J_1(z)
        assert!((bessel_j(2, -1.3)[1] + bessel_j(2, 1.3)[1]).abs() < 1e-15);
    }

    #[test]
    fn laplacian_return_amplitude() {
        let t = models::laplacian(1).unwrap();
        let bx = TruncationBox::new(1, 40).unwrap();
        let psi = delta(&bx, 1, &[0], 0).unwrap();
        let out = evolve(&t, &psi, Time::Continuous(1.0), &bx).unwrap();
        assert!((out[40] - c64::new(series_j0(2.0), 0.0)).norm() < 1e-10);
    }

    #[test]
    fn shift_moves_delta() {
        let l = Lattice::new(1, 1).unwrap();
        let s = InterfaceOperator::shift(l, Shift(vec![1])).unwrap();
        let bx = TruncationBox::new(1, 30).unwrap();
        let out = evolve(&s, &delta(&bx, 1, &[0], 0).unwrap(), Time::Steps(7), &bx).unwrap();
        assert_eq!(out, delta(&bx, 1, &[7], 0).unwrap());
    }

    #[test]
    fn linear_filter_is_exact() {
        let t = models::ssh_wall(0.5, 2.0, 2.0, false).unwrap();
        let bx = TruncationBox::new(1, 20).unwrap();
        let psi = delta(&bx, 2, &[3], 1).unwrap();
        let a = t.assemble_truncation(&bx).unwrap();
        let b = hull_bound(&a);
        let (out, f) = apply_filter(&t, &|x| x, (-b, b), &psi, &bx, 1e-8).unwrap();
        assert_eq!(f.degree(), 1);
        let direct = a.apply(&psi);
        assert!(out.iter().zip(&direct).all(|(x, y)| (x - y).norm() < 1e-10));
    }
}
