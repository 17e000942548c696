//! Bulk spectra from Bloch symbols and essential spectra as the closed union
//! of the spectra of all bulk systems at infinity.

use std::f64::consts::PI;

use faer::c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{self, BulkKind, BulkSystem, OperatorClass, SphereGrid};
use crate::error::{Error, Result};
use crate::lattice::TruncationBox;
use crate::linalg::{self, Matrix};
use crate::operator::InterfaceOperator;
use crate::truncation;

/// Default samples per torus dimension for the top-level operator.
pub const DEFAULT_COUNT: usize = 1024;
/// Default samples per torus dimension one recursion level down.
pub const DEFAULT_COUNT_FIBERED: usize = 256;
/// Cap on the total number of grid points of one torus sweep.
pub const MAX_GRID_POINTS: usize = 1 << 16;
/// Half-width of the truncation used to estimate discrete spectrum of
/// face-fibered operators.
pub const FACE_TRUNCATION: usize = 40;

const MAX_DEPTH: usize = crate::lattice::MAX_DIMENSION - 1;
const REAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    RealLine,
    UnitCircle,
    Generic,
}

impl SpectrumKind {
    fn of(class: OperatorClass) -> Self {
        match class {
            OperatorClass::Hermitian => SpectrumKind::RealLine,
            OperatorClass::Unitary => SpectrumKind::UnitCircle,
            OperatorClass::General => SpectrumKind::Generic,
        }
    }
}

/// Uniform grid on the torus [0, 2π)^d.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlochGrid {
    counts: Vec<usize>,
}

impl BlochGrid {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.iter().any(|&c| c < 8) {
            return Err(Error::InvalidArgument(format!("grid counts {counts:?} below 8")));
        }
        Ok(Self { counts })
    }

    pub fn uniform(dim: usize, count: usize) -> Result<Self> {
        Self::new(vec![count; dim])
    }

    /// Default grid at the given recursion level, shrunk per dimension so
    /// the total stays within [`MAX_GRID_POINTS`].
    pub fn default_for(dim: usize, level: usize) -> Self {
        let mut count = if level == 0 { DEFAULT_COUNT } else { DEFAULT_COUNT_FIBERED };
        while dim > 0 && count.pow(dim as u32) > MAX_GRID_POINTS && count > 8 {
            count /= 2;
        }
        Self { counts: vec![count; dim] }
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Angular spacing 2π/n of the coarsest axis.
    pub fn pitch(&self) -> f64 {
        2.0 * PI / *self.counts.iter().min().unwrap_or(&1) as f64
    }

    /// Angle vector of the k-th point; the first axis varies slowest.
    pub fn point(&self, mut k: usize) -> Vec<f64> {
        let mut theta = vec![0.0; self.dim()];
        for axis in (0..self.dim()).rev() {
            let n = self.counts[axis];
            theta[axis] = 2.0 * PI * (k % n) as f64 / n as f64;
            k /= n;
        }
        theta
    }

    /// Index of the neighbour of point k one step forward along `axis`
    /// (periodic).
    fn neighbour(&self, k: usize, axis: usize) -> usize {
        let stride: usize = self.counts[axis + 1..].iter().product();
        let n = self.counts[axis];
        let pos = (k / stride) % n;
        k - pos * stride + ((pos + 1) % n) * stride
    }

    /// Same grid shape one recursion level down, without `axis`.
    fn fiber_grid(&self, axis: usize) -> Self {
        let counts = self
            .counts
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != axis)
            .map(|(_, &c)| c.min(DEFAULT_COUNT_FIBERED))
            .collect();
        Self { counts }
    }
}

/// A closed subset of ℂ: a point cloud with a merge resolution and hull
/// pieces. Hull pieces are intervals of ℝ for `RealLine` and arcs
/// [a, b] of angles (a ∈ [−π, π), a ≤ b ≤ a + 2π) for `UnitCircle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSet {
    pub points: Vec<c64>,
    pub resolution: f64,
    pub hull: Vec<(f64, f64)>,
    pub kind: SpectrumKind,
    /// Set when part of the set comes from a finite-volume estimate.
    pub approximate: bool,
}

/// Maximal spectral gap around a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub kind: SpectrumKind,
    /// Endpoints: real numbers, or angles for `UnitCircle` (lower < upper,
    /// possibly beyond π).
    pub lower: f64,
    pub upper: f64,
    /// Distance from the query point to the nearest end.
    pub radius: f64,
}

impl Gap {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }
}

fn floor_resolution(r: f64) -> f64 {
    r.max(1e-12)
}

fn merge_tol(res: f64) -> f64 {
    res * (1.0 + 1e-9) + 1e-12
}

/// Angle in [−π, π).
fn wrap_angle(a: f64) -> f64 {
    let mut x = (a + PI).rem_euclid(2.0 * PI) - PI;
    if x >= PI {
        x -= 2.0 * PI;
    }
    x
}

fn merge_intervals(mut pieces: Vec<(f64, f64)>, res: f64) -> Vec<(f64, f64)> {
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in pieces {
        match out.last_mut() {
            Some(last) if a - last.1 <= merge_tol(res) => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn merge_arcs(pieces: Vec<(f64, f64)>, res: f64) -> Vec<(f64, f64)> {
    if pieces.iter().any(|&(a, b)| b - a >= 2.0 * PI - merge_tol(res)) {
        return vec![(-PI, PI)];
    }
    // unroll arcs crossing π into two pieces, merge on the line, re-join
    let mut line = Vec::new();
    for (a, b) in pieces {
        let len = b - a;
        let a = wrap_angle(a);
        let b = a + len;
        if b > PI {
            line.push((a, PI));
            line.push((-PI, b - 2.0 * PI));
        } else {
            line.push((a, b));
        }
    }
    let mut merged = merge_intervals(line, res);
    if merged.len() > 1 {
        let first = merged[0];
        let last = *merged.last().unwrap();
        if first.0 + 2.0 * PI - last.1 <= merge_tol(res) {
            merged.pop();
            merged[0] = (last.0, first.1 + 2.0 * PI);
            merged.rotate_left(1);
        }
    } else if merged.len() == 1 {
        let (a, b) = merged[0];
        if a + 2.0 * PI - b <= merge_tol(res) {
            return vec![(-PI, PI)];
        }
    }
    merged
}

impl SpectrumSet {
    /// Builds the set from points, merging hull pieces closer than `resolution`.
    pub fn from_points(points: Vec<c64>, resolution: f64, kind: SpectrumKind) -> Result<Self> {
        if points.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("spectrum points".into()));
        }
        let resolution = floor_resolution(resolution);
        let hull = match kind {
            SpectrumKind::RealLine => {
                if let Some(z) = points.iter().find(|z| z.im.abs() > REAL_TOL) {
                    return Err(Error::Symmetry(format!("self-adjoint (eigenvalue {z})")));
                }
                merge_intervals(points.iter().map(|z| (z.re, z.re)).collect(), resolution)
            }
            SpectrumKind::UnitCircle => {
                if let Some(z) = points.iter().find(|z| (z.norm() - 1.0).abs() > REAL_TOL) {
                    return Err(Error::Symmetry(format!("unitary (eigenvalue {z})")));
                }
                merge_arcs(points.iter().map(|z| (z.arg(), z.arg())).collect(), resolution)
            }
            SpectrumKind::Generic => Vec::new(),
        };
        let points = match kind {
            SpectrumKind::RealLine => points.into_iter().map(|z| c64::new(z.re, 0.0)).collect(),
            _ => points,
        };
        Ok(Self { points, resolution, hull, kind, approximate: false })
    }

    /// Closed union; hulls are merged at the coarser resolution.
    pub fn union(&self, other: &Self) -> Self {
        let kind = if self.kind == other.kind { self.kind } else { SpectrumKind::Generic };
        let resolution = self.resolution.max(other.resolution);
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let pieces: Vec<(f64, f64)> = self.hull.iter().chain(&other.hull).copied().collect();
        let hull = match kind {
            SpectrumKind::RealLine => merge_intervals(pieces, resolution),
            SpectrumKind::UnitCircle => merge_arcs(pieces, resolution),
            SpectrumKind::Generic => Vec::new(),
        };
        Self {
            points,
            resolution,
            hull,
            kind,
            approximate: self.approximate || other.approximate,
        }
    }

    /// Keeps the extreme points of each hull piece and thins the rest to a
    /// spacing of about resolution/4. The hull is unchanged.
    pub fn thinned(&self) -> Self {
        if self.kind == SpectrumKind::Generic {
            return self.clone();
        }
        let key = |z: &c64| match self.kind {
            SpectrumKind::RealLine => z.re,
            _ => z.arg(),
        };
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| key(a).total_cmp(&key(b)));
        let step = self.resolution / 4.0;
        let mut out: Vec<c64> = Vec::new();
        for (i, z) in pts.iter().enumerate() {
            let keep = match out.last() {
                None => true,
                Some(prev) => {
                    key(z) - key(prev) >= step
                        || i + 1 == pts.len()
                        || key(&pts[i + 1]) - key(z) > merge_tol(self.resolution)
                        || key(z) - key(&pts[i - 1]) > merge_tol(self.resolution)
                }
            };
            if keep {
                out.push(*z);
            }
        }
        Self { points: out, ..self.clone() }
    }

    /// Distance from z to the set (to the hull when one exists).
    pub fn distance_to(&self, z: c64) -> f64 {
        match self.kind {
            SpectrumKind::RealLine => self
                .hull
                .iter()
                .map(|&(a, b)| {
                    let dx = if z.re < a { a - z.re } else if z.re > b { z.re - b } else { 0.0 };
                    dx.hypot(z.im)
                })
                .fold(f64::INFINITY, f64::min),
            SpectrumKind::UnitCircle => self
                .hull
                .iter()
                .map(|&(a, b)| {
                    let t = z.arg();
                    let inside = [t, t + 2.0 * PI, t - 2.0 * PI]
                        .iter()
                        .any(|&s| s >= a - 1e-15 && s <= b + 1e-15);
                    if inside {
                        (z.norm() - 1.0).abs()
                    } else {
                        let ea = c64::new(a.cos(), a.sin());
                        let eb = c64::new(b.cos(), b.sin());
                        (z - ea).norm().min((z - eb).norm())
                    }
                })
                .fold(f64::INFINITY, f64::min),
            SpectrumKind::Generic => self
                .points
                .iter()
                .map(|p| (p - z).norm())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Points covering the hull with spacing at most `step`.
    pub fn sample_hull(&self, step: f64) -> Vec<c64> {
        let mut out = Vec::new();
        for &(a, b) in &self.hull {
            let n = (((b - a) / step).ceil() as usize).max(1);
            for k in 0..=n {
                let t = a + (b - a) * k as f64 / n as f64;
                out.push(match self.kind {
                    SpectrumKind::UnitCircle => c64::new(t.cos(), t.sin()),
                    _ => c64::new(t, 0.0),
                });
            }
        }
        if self.kind == SpectrumKind::Generic {
            out = self.points.clone();
        }
        out
    }

    /// Hausdorff distance between the two sets.
    pub fn hausdorff(&self, other: &Self) -> f64 {
        if self.kind == SpectrumKind::RealLine && other.kind == SpectrumKind::RealLine {
            return directed_intervals(&self.hull, &other.hull)
                .max(directed_intervals(&other.hull, &self.hull));
        }
        let step = self.resolution.min(other.resolution).max(1e-4);
        let a = self.sample_hull(step);
        let b = other.sample_hull(step);
        let d1 = a.iter().map(|z| other.distance_to(*z)).fold(0.0, f64::max);
        let d2 = b.iter().map(|z| self.distance_to(*z)).fold(0.0, f64::max);
        d1.max(d2)
    }

    /// Hausdorff distance between this set together with `extra` points and
    /// the point cloud `pts`.
    pub fn hausdorff_to_points(&self, pts: &[c64], extra: &[c64]) -> f64 {
        let dist_here = |z: &c64| {
            extra
                .iter()
                .map(|e| (e - z).norm())
                .fold(self.distance_to(*z), f64::min)
        };
        let forward = pts.iter().map(dist_here).fold(0.0, f64::max);
        let to_pts = |z: &c64| pts.iter().map(|p| (p - z).norm()).fold(f64::INFINITY, f64::min);
        let step = (self.resolution).max(1e-3);
        let back = self
            .sample_hull(step)
            .iter()
            .chain(extra)
            .map(to_pts)
            .fold(0.0, f64::max);
        forward.max(back)
    }

    pub fn contains(&self, z: c64) -> bool {
        self.distance_to(z) <= 1e-12
    }
}

/// sup_{x ∈ A} dist(x, B) for finite unions of closed intervals.
fn directed_intervals(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if b.is_empty() {
        return f64::INFINITY;
    }
    let dist = |x: f64| {
        b.iter()
            .map(|&(lo, hi)| if x < lo { lo - x } else if x > hi { x - hi } else { 0.0 })
            .fold(f64::INFINITY, f64::min)
    };
    let mut candidates = Vec::new();
    for &(lo, hi) in a {
        candidates.push(lo);
        candidates.push(hi);
        for w in b.windows(2) {
            let mid = 0.5 * (w[0].1 + w[1].0);
            if mid >= lo && mid <= hi {
                candidates.push(mid);
            }
        }
    }
    candidates.into_iter().map(dist).fold(0.0, f64::max)
}

/// H(θ) = Σ_g e^{iθ·g} b_g.
pub fn bloch_symbol(bulk: &BulkSystem, theta: &[f64]) -> Result<Matrix> {
    let symbol = bulk.symbol().ok_or_else(|| {
        Error::InvalidArgument(format!("{} is face-fibered and has no Bloch symbol", bulk.label))
    })?;
    if theta.len() != bulk.dim {
        return Err(Error::DimensionMismatch { expected: bulk.dim, found: theta.len() });
    }
    let mut h = linalg::zeros(bulk.fiber);
    for (g, b) in symbol {
        let phase: f64 = g.as_slice().iter().zip(theta).map(|(&s, t)| s as f64 * t).sum();
        h = linalg::add(&h, &linalg::scale(b, c64::new(phase.cos(), phase.sin())));
    }
    if bulk.class == OperatorClass::Hermitian && !linalg::is_hermitian(&h, 1e-10) {
        return Err(Error::Symmetry(format!("self-adjoint: symbol of {} at {theta:?}", bulk.label)));
    }
    Ok(h)
}

fn symbol_eigenvalues(bulk: &BulkSystem, theta: &[f64]) -> Result<Vec<c64>> {
    let h = bloch_symbol(bulk, theta)?;
    if bulk.class == OperatorClass::Hermitian {
        Ok(linalg::hermitian_eigenvalues(&h)?.into_iter().map(|x| c64::new(x, 0.0)).collect())
    } else {
        let mut ev = linalg::general_eigenvalues(&h)?;
        if bulk.class == OperatorClass::Unitary {
            ev.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
        } else {
            ev.sort_by(linalg::cmp_complex);
        }
        Ok(ev)
    }
}

/// Largest displacement between the eigenvalue lists at two neighbouring
/// grid points; lists sorted by angle are compared under every cyclic shift.
fn jump(a: &[c64], b: &[c64], kind: SpectrumKind) -> f64 {
    let metric = |z: &c64, w: &c64| match kind {
        SpectrumKind::UnitCircle => (z * w.conj()).arg().abs(),
        _ => (z - w).norm(),
    };
    let direct = |shift: usize| {
        a.iter()
            .enumerate()
            .map(|(i, z)| metric(z, &b[(i + shift) % b.len()]))
            .fold(0.0, f64::max)
    };
    match kind {
        SpectrumKind::UnitCircle => (0..b.len()).map(direct).fold(f64::INFINITY, f64::min),
        _ => direct(0),
    }
}

/// Spectrum of one bulk system sampled on the torus grid.
pub fn bulk_spectrum(bulk: &BulkSystem, grid: &BlochGrid) -> Result<SpectrumSet> {
    bulk_spectrum_at(bulk, grid, 0)
}

fn bulk_spectrum_at(bulk: &BulkSystem, grid: &BlochGrid, depth: usize) -> Result<SpectrumSet> {
    if depth > MAX_DEPTH {
        return Err(Error::RecursionDepth);
    }
    let kind = SpectrumKind::of(bulk.class);
    match &bulk.kind {
        BulkKind::TranslationInvariant { .. } => {
            if grid.dim() != bulk.dim {
                return Err(Error::DimensionMismatch { expected: bulk.dim, found: grid.dim() });
            }
            let samples: Vec<Vec<c64>> = (0..grid.len())
                .into_par_iter()
                .map(|k| symbol_eigenvalues(bulk, &grid.point(k)))
                .collect::<Result<_>>()?;
            let resolution = (0..grid.len())
                .into_par_iter()
                .map(|k| {
                    (0..grid.dim())
                        .map(|axis| jump(&samples[k], &samples[grid.neighbour(k, axis)], kind))
                        .fold(0.0, f64::max)
                })
                .reduce(|| 0.0, f64::max);
            SpectrumSet::from_points(samples.into_iter().flatten().collect(), resolution, kind)
        }
        BulkKind::FaceFibered(family) => {
            let axis = family.axis();
            let n_theta = grid.counts()[axis].min(DEFAULT_COUNT_FIBERED);
            let child_grid = grid.fiber_grid(axis);
            let per_theta: Vec<(SpectrumSet, Vec<c64>)> = (0..n_theta)
                .into_par_iter()
                .map(|k| {
                    let theta = 2.0 * PI * k as f64 / n_theta as f64;
                    let child = family.at(theta)?;
                    let ess = essential_at(&child, &child_grid, &SphereGrid::default(), depth + 1)?;
                    let discrete = discrete_estimate(&child, &ess)?;
                    Ok((ess, discrete))
                })
                .collect::<Result<_>>()?;
            let mut resolution = 0.0f64;
            for k in 0..n_theta {
                let next = &per_theta[(k + 1) % n_theta].0;
                resolution = resolution.max(per_theta[k].0.hausdorff(next));
            }
            let mut out: Option<SpectrumSet> = None;
            let mut extra = Vec::new();
            for (ess, discrete) in per_theta {
                extra.extend(discrete);
                out = Some(match out {
                    None => ess,
                    Some(acc) => acc.union(&ess),
                });
            }
            let mut out = out.expect("theta grid is nonempty");
            if resolution.is_finite() {
                out.resolution = out.resolution.max(resolution);
            }
            let merged = out.union(&SpectrumSet::from_points(extra, out.resolution, out.kind)?);
            Ok(SpectrumSet { approximate: true, ..merged })
        }
    }
}

/// Eigenvalues of interior-localized states of a finite truncation that lie
/// off the essential spectrum.
fn discrete_estimate(t: &InterfaceOperator, ess: &SpectrumSet) -> Result<Vec<c64>> {
    let bx = TruncationBox::new(t.lattice().dim(), FACE_TRUNCATION)?;
    if bx.space_dim(t.lattice().fiber()) > 4000 {
        return Ok(Vec::new());
    }
    let report = truncation::spectrum_truncated(t, &bx, true)?;
    let tol = 2.0 * ess.resolution + 1e-6;
    Ok(report
        .eigenvalues
        .iter()
        .zip(&report.localization)
        .filter(|(z, loc)| loc.edge_weight < 0.5 && ess.distance_to(**z) > tol)
        .map(|(z, _)| *z)
        .collect())
}

/// Essential spectrum with default sphere grid.
pub fn essential_spectrum(t: &InterfaceOperator, grid: &BlochGrid) -> Result<SpectrumSet> {
    essential_at(t, grid, &SphereGrid::default(), 0)
}

pub fn essential_spectrum_with(
    t: &InterfaceOperator,
    grid: &BlochGrid,
    sphere: &SphereGrid,
) -> Result<SpectrumSet> {
    essential_at(t, grid, sphere, 0)
}

/// Per-quasi-orbit spectra, in quasi-orbit order.
pub fn essential_spectrum_detailed(
    t: &InterfaceOperator,
    grid: &BlochGrid,
    sphere: &SphereGrid,
) -> Result<Vec<(BulkSystem, SpectrumSet)>> {
    let bulks = asymptotics::quasi_orbits_with(t, sphere)?;
    let spectra: Vec<SpectrumSet> = bulks
        .iter()
        .map(|b| bulk_spectrum_at(b, grid, 0))
        .collect::<Result<_>>()?;
    Ok(bulks.into_iter().zip(spectra).collect())
}

fn essential_at(
    t: &InterfaceOperator,
    grid: &BlochGrid,
    sphere: &SphereGrid,
    depth: usize,
) -> Result<SpectrumSet> {
    if depth > MAX_DEPTH {
        return Err(Error::RecursionDepth);
    }
    let bulks = asymptotics::quasi_orbits_with(t, sphere)?;
    let many = bulks.len() > 2;
    let mut acc: Option<SpectrumSet> = None;
    for b in &bulks {
        let mut s = bulk_spectrum_at(b, grid, depth)?;
        if many {
            s = s.thinned();
        }
        acc = Some(match acc {
            None => s,
            Some(a) => a.union(&s),
        });
    }
    acc.ok_or(Error::EmptyOperator)
}

/// Maximal gap of `s` around `e`.
pub fn spectral_gap(s: &SpectrumSet, e: c64) -> Result<Gap> {
    match s.kind {
        SpectrumKind::RealLine => {
            let x = e.re;
            if s.hull.iter().any(|&(a, b)| x >= a && x <= b) {
                return Err(Error::NoGap { point: format!("{x}") });
            }
            let lower = s.hull.iter().filter(|p| p.1 < x).map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let upper = s.hull.iter().filter(|p| p.0 > x).map(|p| p.0).fold(f64::INFINITY, f64::min);
            Ok(Gap { kind: s.kind, lower, upper, radius: (x - lower).min(upper - x) })
        }
        SpectrumKind::UnitCircle => {
            let t = e.arg();
            let inside = |a: f64, b: f64| [t, t + 2.0 * PI, t - 2.0 * PI].iter().any(|&u| u >= a && u <= b);
            if s.hull.iter().any(|&(a, b)| inside(a, b)) {
                return Err(Error::NoGap { point: format!("{e}") });
            }
            if s.hull.is_empty() {
                return Ok(Gap { kind: s.kind, lower: t - PI, upper: t + PI, radius: PI });
            }
            // angular distance counter-clockwise to the next arc start and
            // clockwise to the previous arc end
            let ccw = |from: f64, to: f64| (to - from).rem_euclid(2.0 * PI);
            let up = s.hull.iter().map(|&(a, _)| ccw(t, a)).fold(f64::INFINITY, f64::min);
            let down = s.hull.iter().map(|&(_, b)| ccw(b, t)).fold(f64::INFINITY, f64::min);
            Ok(Gap { kind: s.kind, lower: t - down, upper: t + up, radius: up.min(down) })
        }
        SpectrumKind::Generic => Err(Error::InvalidArgument(
            "gap queries need a real-line or unit-circle spectrum".into(),
        )),
    }
}
