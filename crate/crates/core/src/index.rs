//! Chiral interface indices, their bulk decompositions and spectral flow.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{self, BulkSystem, SphereGrid};
use crate::error::{Error, Result};
use crate::lattice::TruncationBox;
use crate::linalg::{self, Matrix};
use crate::operator::InterfaceOperator;
use crate::profile::{angle_between, direction_of, ProfileKind};
use crate::spectra::{self, BlochGrid, Gap, SpectrumSet};
use crate::truncation::{self, edge_layer};

/// Smallest |det| tolerated along a winding loop.
pub const DET_TOL: f64 = 1e-8;
/// Largest distance of a raw winding or chirality trace from an integer.
pub const ROUNDING_TOL: f64 = 0.1;
/// Default number of points on a winding loop.
pub const WINDING_POINTS: usize = 2048;
/// The zero window is ±ZERO_WINDOW_FRACTION times the gap radius.
pub const ZERO_WINDOW_FRACTION: f64 = 0.2;
/// Minimal squared overlap accepted when following an eigenvector.
pub const FLOW_OVERLAP: f64 = 0.5;

/// A chiral grading Π of the fiber: Π = Π* and Π² = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiralSymmetry {
    pi: Matrix,
}

impl ChiralSymmetry {
    pub fn new(pi: Matrix) -> Result<Self> {
        if pi.nrows() != pi.ncols() || pi.nrows() == 0 {
            return Err(Error::InvalidArgument("chiral grading must be square".into()));
        }
        if !linalg::is_hermitian(&pi, 1e-12) || !linalg::is_unitary(&pi, 1e-12) {
            return Err(Error::Symmetry("a grading (need Pi = Pi* and Pi^2 = 1)".into()));
        }
        Ok(Self { pi })
    }

    /// diag(1, −1).
    pub fn sublattice() -> Self {
        Self { pi: linalg::real(2, &[1.0, 0.0, 0.0, -1.0]) }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.pi
    }

    pub fn fiber(&self) -> usize {
        self.pi.nrows()
    }

    /// Orthonormal bases of the ±1 eigenspaces.
    pub fn eigenspaces(&self) -> Result<(Matrix, Matrix)> {
        let (vals, vecs) = linalg::hermitian_eigen(&self.pi)?;
        let pick = |sign: f64| {
            let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] * sign > 0.0).collect();
            Matrix::from_fn(vecs.nrows(), cols.len(), |r, c| vecs[(r, cols[c])])
        };
        Ok((pick(1.0), pick(-1.0)))
    }

    /// Checks ΠTΠ = −T on the operator's coefficients.
    pub fn anticommutes(&self, t: &InterfaceOperator) -> Result<bool> {
        if t.lattice().fiber() != self.fiber() {
            return Err(Error::DimensionMismatch { expected: t.lattice().fiber(), found: self.fiber() });
        }
        let pi = self.pi.clone();
        let conj = t.map_fiber(
            std::sync::Arc::new(move |m: &Matrix| linalg::mul(&pi, &linalg::mul(m, &pi))),
            self.fiber(),
        )?;
        Ok(conj.approx_eq(&t.scale(c64::new(-1.0, 0.0)), 1e-12))
    }

    fn check(&self, t: &InterfaceOperator) -> Result<()> {
        if !t.hermitian_flag() {
            return Err(Error::Symmetry("self-adjoint (chiral index needs a Hermitian operator)".into()));
        }
        if !self.anticommutes(t)? {
            return Err(Error::Symmetry("chiral: Pi T Pi != -T".into()));
        }
        Ok(())
    }

    /// Σ_x v(x)† Π v(x) for a vector on a box.
    fn expectation(&self, v: &[c64]) -> f64 {
        let n = self.fiber();
        v.chunks(n)
            .map(|c| {
                let mut s = linalg::ZERO;
                for i in 0..n {
                    for j in 0..n {
                        s += c[i].conj() * self.pi[(i, j)] * c[j];
                    }
                }
                s.re
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Winding {
    pub value: i64,
    pub raw: f64,
    pub residual: f64,
    pub min_abs_det: f64,
}

/// Winding number of θ ↦ det A(θ) around the origin on [0, 2π], by phase
/// accumulation on `points` samples refined wherever the phase jumps.
pub fn winding_number(symbol: &dyn Fn(f64) -> Matrix, points: usize) -> Result<Winding> {
    let n = points.max(16);
    let mut min_abs = (f64::INFINITY, 0.0);
    let mut det = |theta: f64| -> Result<c64> {
        let d = linalg::determinant(&symbol(theta));
        if !d.re.is_finite() || !d.im.is_finite() {
            return Err(Error::NonFinite("winding determinant".into()));
        }
        if d.norm() < min_abs.0 {
            min_abs = (d.norm(), theta);
        }
        if d.norm() < DET_TOL {
            return Err(Error::NotInvertible { min_abs_det: d.norm(), theta });
        }
        Ok(d)
    };
    let mut total = 0.0;
    let first = det(0.0)?;
    let mut prev = (0.0, first);
    for k in 1..=n {
        let theta = 2.0 * PI * k as f64 / n as f64;
        let d = if k == n { first } else { det(theta)? };
        total += phase_change(&mut det, prev, (theta, d), 0)?;
        prev = (theta, d);
    }
    let raw = total / (2.0 * PI);
    let value = raw.round();
    let residual = (raw - value).abs();
    if residual > ROUNDING_TOL {
        return Err(Error::WindingResidual(residual));
    }
    Ok(Winding { value: value as i64, raw, residual, min_abs_det: min_abs.0 })
}

fn phase_change(
    det: &mut impl FnMut(f64) -> Result<c64>,
    a: (f64, c64),
    b: (f64, c64),
    depth: usize,
) -> Result<f64> {
    let step = (b.1 / a.1).arg();
    if step.abs() < PI / 4.0 {
        return Ok(step);
    }
    if depth >= 40 {
        return Err(Error::NotInvertible { min_abs_det: a.1.norm().min(b.1.norm()), theta: a.0 });
    }
    let mid = 0.5 * (a.0 + b.0);
    let m = (mid, det(mid)?);
    Ok(phase_change(det, a, m, depth + 1)? + phase_change(det, m, b, depth + 1)?)
}

/// Winding of the off-diagonal block A(θ) = V₋* H(θ) V₊ of a chiral 1D bulk.
pub fn bulk_winding(bulk: &BulkSystem, chi: &ChiralSymmetry, points: usize) -> Result<Winding> {
    if bulk.dim != 1 {
        return Err(Error::InvalidArgument(format!("winding needs a 1D bulk, got l = {}", bulk.dim)));
    }
    let (vp, vm) = chi.eigenspaces()?;
    if vp.ncols() != vm.ncols() {
        return Err(Error::Symmetry(format!(
            "balanced: chiral eigenspaces have dimensions {} and {}",
            vp.ncols(),
            vm.ncols()
        )));
    }
    let err = std::cell::RefCell::new(None);
    let block = |theta: f64| match spectra::bloch_symbol(bulk, &[theta]) {
        Ok(h) => linalg::mul(&linalg::adjoint(&vm), &linalg::mul(&h, &vp)),
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            linalg::identity(vp.ncols())
        }
    };
    let w = winding_number(&block, points);
    match err.into_inner() {
        Some(e) => Err(e),
        None => w,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexOptions {
    /// Half-width of the zero window; defaults to a fraction of the gap.
    pub zero_window: Option<f64>,
    /// Bloch grid for the essential spectrum; defaults per dimension.
    pub grid: Option<BlochGrid>,
    pub sphere: SphereGrid,
    pub winding_points: usize,
    /// Skip the second box size of the stability check.
    pub single_size: bool,
}

impl Default for IndexOptions {
    fn default() -> Self {
        Self {
            zero_window: None,
            grid: None,
            sphere: SphereGrid::default(),
            winding_points: WINDING_POINTS,
            single_size: false,
        }
    }
}

impl IndexOptions {
    fn grid_for(&self, dim: usize) -> BlochGrid {
        self.grid.clone().unwrap_or_else(|| BlochGrid::default_for(dim, 0))
    }
}

/// Signed count of interior zero modes on one or two box sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiralCount {
    pub index: i64,
    /// Tr(V* Π V) over the interior zero-mode basis, per box size.
    pub chirality_traces: Vec<f64>,
    pub half_widths: Vec<usize>,
    pub gap: Gap,
    pub window: f64,
    pub interior_states: usize,
    pub edge_artifacts: usize,
}

fn zero_gap(t: &InterfaceOperator, opts: &IndexOptions) -> Result<(SpectrumSet, Gap)> {
    let ess = spectra::essential_spectrum_with(t, &opts.grid_for(t.lattice().dim()), &opts.sphere)?;
    let gap = spectra::spectral_gap(&ess, linalg::ZERO)
        .map_err(|_| Error::GapClosed("0 lies in the essential spectrum".into()))?;
    Ok((ess, gap))
}

fn resolve_window(gap: &Gap, opts: &IndexOptions) -> Result<f64> {
    let w = opts.zero_window.unwrap_or(ZERO_WINDOW_FRACTION * gap.radius);
    if !(w > 0.0) || w >= gap.radius {
        return Err(Error::InvalidArgument(format!(
            "zero window {w} must lie inside the gap of radius {}",
            gap.radius
        )));
    }
    Ok(w)
}

/// Larger box of the stability check.
pub fn stability_size(half_width: usize) -> usize {
    half_width + (half_width / 2).max(10)
}

fn signed_count(
    t: &InterfaceOperator,
    chi: &ChiralSymmetry,
    bx: &TruncationBox,
    window: f64,
) -> Result<(f64, usize, usize)> {
    let states = truncation::in_gap_states_unchecked(t, bx, (-window, window), Vec::new())?;
    let v = states.report.eigenvectors.as_ref().expect("interior basis");
    let trace = (0..v.ncols())
        .map(|c| {
            let col: Vec<c64> = (0..v.nrows()).map(|r| v[(r, c)]).collect();
            chi.expectation(&col)
        })
        .sum();
    Ok((trace, v.ncols(), states.edge_artifacts))
}

fn round_trace(trace: f64) -> Result<i64> {
    let k = trace.round();
    if (trace - k).abs() > ROUNDING_TOL {
        return Err(Error::Unstable(format!("chirality trace {trace} is not close to an integer")));
    }
    Ok(k as i64)
}

/// n₊ − n₋ of interior zero modes of the truncation, checked for
/// stability at a second, larger box.
pub fn chiral_interface_index(
    t: &InterfaceOperator,
    chi: &ChiralSymmetry,
    bx: &TruncationBox,
    opts: &IndexOptions,
) -> Result<ChiralCount> {
    chi.check(t)?;
    let (_, gap) = zero_gap(t, opts)?;
    let window = resolve_window(&gap, opts)?;
    let mut sizes = vec![bx.half_width()];
    if !opts.single_size {
        sizes.push(stability_size(bx.half_width()));
    }
    let mut traces = Vec::new();
    let mut counts = Vec::new();
    let mut first = (0, 0);
    for (k, &l) in sizes.iter().enumerate() {
        let b = TruncationBox::new(bx.dim(), l)?;
        let (trace, interior, artifacts) = signed_count(t, chi, &b, window)?;
        if k == 0 {
            first = (interior, artifacts);
        }
        traces.push(trace);
        counts.push(round_trace(trace)?);
    }
    if counts.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Unstable(format!("counts {counts:?} at half-widths {sizes:?}")));
    }
    Ok(ChiralCount {
        index: counts[0],
        chirality_traces: traces,
        half_widths: sizes,
        gap,
        window,
        interior_states: first.0,
        edge_artifacts: first.1,
    })
}

/// Index together with its bulk decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub interface_index: i64,
    pub per_bulk: BTreeMap<String, i64>,
    pub signs: BTreeMap<String, i64>,
    /// interface_index − Σ_j sign_j · per_bulk_j.
    pub identity_residual: i64,
    pub experimental: bool,
    pub count: ChiralCount,
}

/// Chiral index of a 1D wall with the bulk windings of both sides:
/// index = w(left) − w(right).
pub fn domain_wall_decomposition(
    t: &InterfaceOperator,
    chi: &ChiralSymmetry,
    bx: &TruncationBox,
    opts: &IndexOptions,
) -> Result<IndexReport> {
    if t.family()? != ProfileKind::DomainWall1D {
        return Err(Error::VariantMismatch("domain-wall decomposition needs a 1D wall".into()));
    }
    let count = chiral_interface_index(t, chi, bx, opts)?;
    let mut per_bulk = BTreeMap::new();
    let mut signs = BTreeMap::new();
    for (bulk, sign) in asymptotics::quasi_orbits(t)?.iter().zip([1i64, -1]) {
        let w = bulk_winding(bulk, chi, opts.winding_points)?;
        per_bulk.insert(bulk.label.clone(), w.value);
        signs.insert(bulk.label.clone(), sign);
    }
    Ok(finish(count, per_bulk, signs, false))
}

fn finish(
    count: ChiralCount,
    per_bulk: BTreeMap<String, i64>,
    signs: BTreeMap<String, i64>,
    experimental: bool,
) -> IndexReport {
    let sum: i64 = per_bulk.iter().map(|(k, v)| signs[k] * v).sum();
    IndexReport {
        interface_index: count.index,
        identity_residual: count.index - sum,
        per_bulk,
        signs,
        experimental,
        count,
    }
}

fn cap_label(dim: usize, center: &[f64], j: usize) -> String {
    match (dim, center.first()) {
        (1, Some(&c)) if c < 0.0 => "left".into(),
        (1, Some(_)) => "right".into(),
        _ => format!("cap {j}"),
    }
}

/// Sector sign −sign(first nonzero coordinate of the cap center); +1 for a
/// single cap.
fn cap_sign(center: &[f64], caps: usize) -> i64 {
    if caps == 1 {
        return 1;
    }
    match center.iter().find(|c| c.abs() > 1e-12) {
        Some(&c) if c > 0.0 => -1,
        _ => 1,
    }
}

/// EXPERIMENTAL. Splits the index of a cone-supported operator into cap
/// contributions. For cap j the bulk at the cap center is truncated to the
/// sites whose direction is strictly closest to that center; the signed
/// count c_j of its interior zero modes gives per_bulk_j = sign_j · c_j.
pub fn cone_decomposition(
    t: &InterfaceOperator,
    chi: &ChiralSymmetry,
    bx: &TruncationBox,
    opts: &IndexOptions,
) -> Result<IndexReport> {
    if t.family()? != ProfileKind::ConeSupported {
        return Err(Error::VariantMismatch("cone decomposition needs cone-supported asymptotics".into()));
    }
    let caps = t
        .terms()
        .find_map(|(_, f)| f.caps().map(|c| c.to_vec()))
        .ok_or_else(|| Error::VariantMismatch("no caps declared".into()))?;
    let count = chiral_interface_index(t, chi, bx, opts)?;
    let dim = bx.dim();
    let fiber = t.lattice().fiber();
    let full_sphere = caps.len() == 1 && caps[0].radius() >= PI - 1e-12;
    // sector of every site, None on ties and at the origin
    let owner: Vec<Option<usize>> = bx
        .sites()
        .map(|x| {
            if full_sphere {
                return Some(0);
            }
            let w = direction_of(&x)?;
            let angles: Vec<f64> = caps.iter().map(|c| angle_between(c.center(), &w)).collect();
            let best = angles.iter().cloned().fold(f64::INFINITY, f64::min);
            let winners: Vec<usize> = (0..caps.len()).filter(|&j| angles[j] - best < 1e-12).collect();
            (winners.len() == 1).then(|| winners[0])
        })
        .collect();
    let mut per_bulk = BTreeMap::new();
    let mut signs = BTreeMap::new();
    for (j, cap) in caps.iter().enumerate() {
        let label = cap_label(dim, cap.center(), j);
        let bulk = asymptotics::directional_limit(t, cap.center())?.to_operator()?;
        let keep: Vec<usize> = owner
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == Some(j))
            .flat_map(|(s, _)| (0..fiber).map(move |a| s * fiber + a))
            .collect();
        if keep.is_empty() {
            return Err(Error::AmbiguousSector(format!("{label} owns no sites of the box")));
        }
        let c = sector_count(&bulk, chi, bx, &keep, count.window)?;
        signs.insert(label.clone(), cap_sign(cap.center(), caps.len()));
        per_bulk.insert(label.clone(), signs[&label] * c);
    }
    Ok(finish(count, per_bulk, signs, true))
}

fn sector_count(
    bulk: &InterfaceOperator,
    chi: &ChiralSymmetry,
    bx: &TruncationBox,
    keep: &[usize],
    window: f64,
) -> Result<i64> {
    let a = bulk.assemble_truncation(bx)?.restrict(keep).to_dense();
    let (vals, vecs) = linalg::hermitian_eigen(&a)?;
    let sel: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].abs() < window).collect();
    let n = bx.space_dim(bulk.lattice().fiber());
    let mut embedded = Matrix::zeros(n, sel.len());
    for (c, &i) in sel.iter().enumerate() {
        for (r, &row) in keep.iter().enumerate() {
            embedded[(row, c)] = vecs[(r, i)];
        }
    }
    let (interior, _, _) =
        truncation::split_edge(&embedded, bx, bulk.lattice().fiber(), edge_layer(bulk))?;
    let trace = (0..interior.ncols())
        .map(|c| {
            let col: Vec<c64> = (0..n).map(|r| interior[(r, c)]).collect();
            chi.expectation(&col)
        })
        .sum();
    round_trace(trace)
}

/// Whether E is outside the essential spectrum, i.e. T − E is Fredholm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FredholmCertificate {
    pub fredholm: bool,
    pub gap: Option<Gap>,
    /// Distance from E to the sampled essential spectrum.
    pub distance: f64,
    pub resolution: f64,
}

pub fn fredholm_check(t: &InterfaceOperator, e: c64, grid: &BlochGrid) -> Result<FredholmCertificate> {
    let ess = spectra::essential_spectrum(t, grid)?;
    let gap = spectra::spectral_gap(&ess, e).ok();
    Ok(FredholmCertificate {
        fredholm: gap.is_some(),
        gap,
        distance: ess.distance_to(e),
        resolution: ess.resolution,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub step: usize,
    pub from: f64,
    pub to: f64,
    /// +1 for a crossing from negative to positive.
    pub direction: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub flow: i64,
    pub crossings: Vec<Crossing>,
    pub min_overlap: f64,
}

/// Net number of interior eigenvalues crossing 0 upwards along a path of
/// Hermitian operators, with eigenvectors followed by overlap between steps.
pub fn spectral_flow(path: &[InterfaceOperator], bx: &TruncationBox) -> Result<FlowReport> {
    if path.len() < 2 {
        return Err(Error::InvalidArgument("a path needs at least two operators".into()));
    }
    let mut dense = Vec::with_capacity(path.len());
    for (k, op) in path.iter().enumerate() {
        let a = op.assemble_truncation(bx)?.to_dense();
        if !linalg::is_hermitian(&a, truncation::HERMITIAN_TOL) {
            return Err(Error::Symmetry(format!("self-adjoint at path point {k}")));
        }
        dense.push(a);
    }
    let eig: Vec<(Vec<f64>, Matrix)> =
        dense.iter().map(linalg::hermitian_eigen).collect::<Result<_>>()?;
    let fiber = path[0].lattice().fiber();
    let width = path.iter().map(edge_layer).max().unwrap_or(1);
    let mask: Vec<bool> = (0..bx.num_sites()).map(|i| bx.depth(&bx.site(i)) < width).collect();
    let edge_weight = |u: &Matrix, c: usize| -> f64 {
        (0..u.nrows()).filter(|r| mask[r / fiber]).map(|r| u[(r, c)].norm_sqr()).sum()
    };
    let mut crossings = Vec::new();
    let mut min_overlap: f64 = 1.0;
    for k in 0..path.len() - 1 {
        // Weyl: eigenvalues move by at most the row-sum norm of the step
        let diff = linalg::sub(&dense[k + 1], &dense[k]);
        let delta = (0..diff.nrows())
            .map(|r| (0..diff.ncols()).map(|c| diff[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let (va, ua) = &eig[k];
        let (vb, ub) = &eig[k + 1];
        for i in (0..va.len()).filter(|&i| va[i].abs() <= delta + 1e-12) {
            if edge_weight(ua, i) >= truncation::EDGE_MASS_THRESHOLD {
                continue;
            }
            let (j, ov) = (0..vb.len())
                .map(|j| {
                    let s: c64 = (0..ua.nrows()).map(|r| ua[(r, i)].conj() * ub[(r, j)]).sum();
                    (j, s.norm_sqr())
                })
                .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
            min_overlap = min_overlap.min(ov);
            if ov < FLOW_OVERLAP {
                return Err(Error::StepTooCoarse(format!(
                    "step {k}: best overlap {ov:.3} for eigenvalue {:.3e}",
                    va[i]
                )));
            }
            let (a, b) = (va[i], vb[j]);
            let direction = match (a < 0.0, b < 0.0) {
                (true, false) => 1,
                (false, true) => -1,
                _ => 0,
            };
            if direction != 0 {
                crossings.push(Crossing { step: k, from: a, to: b, direction });
            }
        }
    }
    Ok(FlowReport { flow: crossings.iter().map(|c| c.direction).sum(), crossings, min_overlap })
}

/// Spectral flow of s ↦ T + sΠ for s from −μ to μ in `steps` steps. The
/// zero modes of T split as ±s according to their chirality, so the flow
/// equals the chiral index.
pub fn chiral_spectral_flow(
    t: &InterfaceOperator,
    chi: &ChiralSymmetry,
    bx: &TruncationBox,
    mu: Option<f64>,
    steps: usize,
    opts: &IndexOptions,
) -> Result<FlowReport> {
    chi.check(t)?;
    if steps % 2 == 0 || steps == 0 {
        return Err(Error::InvalidArgument("use an odd number of steps so s = 0 is skipped".into()));
    }
    let mu = match mu {
        Some(m) => m,
        None => 0.5 * zero_gap(t, opts)?.1.radius,
    };
    let grading = InterfaceOperator::constant(t.lattice(), chi.matrix().clone())?;
    let path: Vec<InterfaceOperator> = (0..=steps)
        .map(|k| {
            let s = -mu + 2.0 * mu * k as f64 / steps as f64;
            Ok(t.add(&grading.scale(c64::new(s, 0.0)))?.claim_hermitian())
        })
        .collect::<Result<_>>()?;
    spectral_flow(&path, bx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn winding_of_powers() {
        for n in -3i32..=3 {
            let w = winding_number(
                &|t: f64| linalg::scalar(1, c64::new((n as f64 * t).cos(), (n as f64 * t).sin())),
                64,
            )
            .unwrap();
            assert_eq!(w.value, n as i64);
        }
    }

    #[test]
    fn winding_detects_zero() {
        let r = winding_number(&|t: f64| linalg::scalar(1, c64::new(1.0 + t.cos(), t.sin())), 64);
        assert!(matches!(r, Err(Error::NotInvertible { .. })));
    }

    #[test]
    fn ssh_bulk_windings() {
        let chi = ChiralSymmetry::sublattice();
        for (m, w) in [(0.5, 1), (-0.3, 1), (2.0, 0), (-1.5, 0)] {
            let op = models::ssh_bulk(m).unwrap();
            let bulk = &asymptotics::quasi_orbits(&op).unwrap()[0];
            assert_eq!(bulk_winding(bulk, &chi, 256).unwrap().value, w, "m = {m}");
        }
    }

    #[test]
    fn ssh_wall_index_and_flow() {
        let chi = ChiralSymmetry::sublattice();
        let t = models::ssh_wall(0.5, 2.0, 2.0, false).unwrap();
        let bx = TruncationBox::new(1, 40).unwrap();
        let opts = IndexOptions::default();
        let r = domain_wall_decomposition(&t, &chi, &bx, &opts).unwrap();
        assert_eq!(r.interface_index, 1);
        assert_eq!(r.per_bulk["left"], 1);
        assert_eq!(r.per_bulk["right"], 0);
        assert_eq!(r.identity_residual, 0);
        let f = chiral_spectral_flow(&t, &chi, &bx, None, 9, &opts).unwrap();
        assert_eq!(f.flow, 1);
    }

    #[test]
    fn grading_validation() {
        assert!(ChiralSymmetry::new(linalg::real(2, &[1.0, 0.0, 0.0, 0.5])).is_err());
        let chi = ChiralSymmetry::sublattice();
        let t = models::laplacian(1).unwrap();
        assert!(chi.anticommutes(&t).is_err());
    }
}
