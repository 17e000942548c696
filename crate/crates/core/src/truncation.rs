//! Finite-volume eigenanalysis: truncated spectra, in-gap interface states
//! and convergence of truncated spectra toward the essential spectrum.

use faer::c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::OperatorClass;
use crate::error::{Error, Result};
use crate::lattice::TruncationBox;
use crate::linalg::{self, Matrix};
use crate::operator::InterfaceOperator;
use crate::spectra::{self, BlochGrid};

/// Tolerance for choosing the Hermitian eigensolver path.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Boundary layer width in units of the shift radius.
pub const EDGE_LAYER_FACTOR: usize = 5;
/// A state with at least this mass in the boundary layer is a Dirichlet artifact.
pub const EDGE_MASS_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    /// (Σ w_x)² / Σ w_x² with site masses w_x.
    pub participation_ratio: f64,
    /// Fitted amplitude decay rate away from the peak site, when the tail
    /// spans enough sites.
    pub decay_rate: Option<f64>,
    /// Site of maximal mass.
    pub peak: Vec<i64>,
    /// Mass in the boundary layer of the box.
    pub edge_weight: f64,
}

#[derive(Debug, Clone)]
pub struct EigenReport {
    pub eigenvalues: Vec<c64>,
    /// Columns are normalized eigenvectors, in eigenvalue order.
    pub eigenvectors: Option<Matrix>,
    /// Per eigenpair; empty unless eigenvectors were requested.
    pub localization: Vec<Localization>,
    pub bx: TruncationBox,
    pub fiber: usize,
    pub hermitian_path: bool,
    pub warnings: Vec<String>,
}

/// Width of the layer next to the box boundary that hosts Dirichlet artifacts.
pub fn edge_layer(t: &InterfaceOperator) -> usize {
    EDGE_LAYER_FACTOR * t.shift_radius().max(1)
}

/// Diagonal mask of the boundary layer, one entry per site.
fn edge_mask(bx: &TruncationBox, width: usize) -> Vec<bool> {
    (0..bx.num_sites()).map(|i| bx.depth(&bx.site(i)) < width).collect()
}

fn site_masses(v: &[c64], fiber: usize) -> Vec<f64> {
    v.chunks(fiber).map(|c| c.iter().map(|z| z.norm_sqr()).sum()).collect()
}

fn localization(v: &[c64], bx: &TruncationBox, fiber: usize, edge: &[bool]) -> Localization {
    let w = site_masses(v, fiber);
    let total: f64 = w.iter().sum();
    let sq: f64 = w.iter().map(|x| x * x).sum();
    let participation_ratio = if sq > 0.0 { total * total / sq } else { 0.0 };
    let (peak_idx, _) = w
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
    let peak = bx.site(peak_idx);
    let edge_weight = w.iter().zip(edge).filter(|(_, &e)| e).map(|(m, _)| m).sum::<f64>()
        / total.max(f64::MIN_POSITIVE);
    // max site mass at each sup-distance from the peak
    let mut shells: Vec<f64> = Vec::new();
    for (i, &m) in w.iter().enumerate() {
        let x = bx.site(i);
        let d = x.iter().zip(&peak).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0) as usize;
        if shells.len() <= d {
            shells.resize(d + 1, 0.0);
        }
        shells[d] = shells[d].max(m);
    }
    let cutoff = shells[0] * 1e-24;
    let pts: Vec<(f64, f64)> = shells
        .iter()
        .enumerate()
        .skip(1)
        .take_while(|(_, &m)| m > cutoff && m > 0.0)
        .map(|(d, &m)| (d as f64, m.ln()))
        .collect();
    let decay_rate = (pts.len() >= 4).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        -0.5 * sxy / sxx
    });
    Localization { participation_ratio, decay_rate, peak, edge_weight }
}

/// Full eigendecomposition of the Dirichlet truncation, sorted by real part
/// then imaginary part.
pub fn spectrum_truncated(
    t: &InterfaceOperator,
    bx: &TruncationBox,
    want_vectors: bool,
) -> Result<EigenReport> {
    let a = t.assemble_truncation(bx)?.to_dense();
    let fiber = t.lattice().fiber();
    let hermitian_path = linalg::is_hermitian(&a, HERMITIAN_TOL);
    if t.hermitian_flag() && !hermitian_path {
        return Err(Error::Symmetry("self-adjoint on the truncation".into()));
    }
    let (mut values, vectors): (Vec<c64>, Option<Matrix>) = match (hermitian_path, want_vectors) {
        (true, true) => {
            let (v, u) = linalg::hermitian_eigen(&a)?;
            (v.into_iter().map(|x| c64::new(x, 0.0)).collect(), Some(u))
        }
        (true, false) => (
            linalg::hermitian_eigenvalues(&a)?.into_iter().map(|x| c64::new(x, 0.0)).collect(),
            None,
        ),
        (false, true) => {
            let (v, u) = linalg::general_eigen(&a)?;
            (v, Some(u))
        }
        (false, false) => (linalg::general_eigenvalues(&a)?, None),
    };
    if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("truncated spectrum".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| linalg::cmp_complex(&values[i], &values[j]));
    values = order.iter().map(|&i| values[i]).collect();
    let vectors = vectors.map(|u| Matrix::from_fn(u.nrows(), u.ncols(), |r, c| u[(r, order[c])]));
    let localization = match &vectors {
        Some(u) => {
            let edge = edge_mask(bx, edge_layer(t));
            (0..u.ncols())
                .into_par_iter()
                .map(|c| {
                    let col: Vec<c64> = (0..u.nrows()).map(|r| u[(r, c)]).collect();
                    localization(&col, bx, fiber, &edge)
                })
                .collect()
        }
        None => Vec::new(),
    };
    Ok(EigenReport {
        eigenvalues: values,
        eigenvectors: vectors,
        localization,
        bx: *bx,
        fiber,
        hermitian_path,
        warnings: Vec::new(),
    })
}

/// Window eigenvectors split into interior-localized states and boundary
/// artifacts.
#[derive(Debug, Clone)]
pub struct InGapStates {
    /// Interior states in a basis that diagonalizes the boundary-layer
    /// mass; eigenvalues are the Rayleigh quotients of that basis.
    pub report: EigenReport,
    pub edge_artifacts: usize,
    /// Boundary-layer mass of each rejected artifact.
    pub artifact_edge_weights: Vec<f64>,
    pub warnings: Vec<String>,
}

impl InGapStates {
    pub fn count(&self) -> usize {
        self.report.eigenvalues.len()
    }
}

/// Splits the span of `vectors` by diagonalizing the boundary-layer mass
/// V†χV; returns (interior basis, artifact basis, artifact weights).
pub(crate) fn split_edge(
    vectors: &Matrix,
    bx: &TruncationBox,
    fiber: usize,
    width: usize,
) -> Result<(Matrix, Matrix, Vec<f64>)> {
    let k = vectors.ncols();
    let n = vectors.nrows();
    if k == 0 {
        return Ok((Matrix::zeros(n, 0), Matrix::zeros(n, 0), Vec::new()));
    }
    let mask = edge_mask(bx, width);
    let chi_v = Matrix::from_fn(n, k, |r, c| if mask[r / fiber] { vectors[(r, c)] } else { linalg::ZERO });
    let m = linalg::mul(&linalg::adjoint(vectors), &chi_v);
    let m = Matrix::from_fn(k, k, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let (mu, w) = linalg::hermitian_eigen(&m)?;
    let rotated = linalg::mul(vectors, &w);
    let interior: Vec<usize> = (0..k).filter(|&i| mu[i] < EDGE_MASS_THRESHOLD).collect();
    let edge: Vec<usize> = (0..k).filter(|&i| mu[i] >= EDGE_MASS_THRESHOLD).collect();
    let pick = |cols: &[usize]| Matrix::from_fn(n, cols.len(), |r, c| rotated[(r, cols[c])]);
    Ok((pick(&interior), pick(&edge), edge.iter().map(|&i| mu[i]).collect()))
}

/// Interface states with real part in `window`, boundary artifacts removed.
pub fn in_gap_states(
    t: &InterfaceOperator,
    bx: &TruncationBox,
    window: (f64, f64),
) -> Result<InGapStates> {
    let mut warnings = Vec::new();
    if let Ok(ess) = spectra::essential_spectrum(t, &BlochGrid::default_for(t.lattice().dim(), 1)) {
        let probe = [window.0, 0.5 * (window.0 + window.1), window.1];
        let hits = ess.hull.iter().any(|&(a, b)| b >= window.0 && a <= window.1)
            && ess.kind == spectra::SpectrumKind::RealLine;
        if hits || probe.iter().any(|&x| ess.contains(c64::new(x, 0.0))) {
            warnings.push(format!(
                "window ({}, {}) meets the essential spectrum",
                window.0, window.1
            ));
        }
    }
    in_gap_states_unchecked(t, bx, window, warnings)
}

pub(crate) fn in_gap_states_unchecked(
    t: &InterfaceOperator,
    bx: &TruncationBox,
    window: (f64, f64),
    warnings: Vec<String>,
) -> Result<InGapStates> {
    let full = spectrum_truncated(t, bx, true)?;
    let u = full.eigenvectors.as_ref().expect("vectors requested");
    let sel: Vec<usize> = (0..full.eigenvalues.len())
        .filter(|&i| full.eigenvalues[i].re > window.0 && full.eigenvalues[i].re < window.1)
        .collect();
    let v = Matrix::from_fn(u.nrows(), sel.len(), |r, c| u[(r, sel[c])]);
    let fiber = t.lattice().fiber();
    let (interior, _, weights) = split_edge(&v, bx, fiber, edge_layer(t))?;
    let a = t.assemble_truncation(bx)?;
    let edge = edge_mask(bx, edge_layer(t));
    let mut eigenvalues = Vec::new();
    let mut localization = Vec::new();
    for c in 0..interior.ncols() {
        let col: Vec<c64> = (0..interior.nrows()).map(|r| interior[(r, c)]).collect();
        let av = a.apply(&col);
        let rq: c64 = col.iter().zip(&av).map(|(x, y)| x.conj() * y).sum();
        eigenvalues.push(rq);
        localization.push(localization_of(&col, bx, fiber, &edge));
    }
    let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
    order.sort_by(|&i, &j| linalg::cmp_complex(&eigenvalues[i], &eigenvalues[j]));
    let report = EigenReport {
        eigenvalues: order.iter().map(|&i| eigenvalues[i]).collect(),
        eigenvectors: Some(Matrix::from_fn(interior.nrows(), interior.ncols(), |r, c| {
            interior[(r, order[c])]
        })),
        localization: order.iter().map(|&i| localization[i].clone()).collect(),
        bx: *bx,
        fiber,
        hermitian_path: full.hermitian_path,
        warnings: warnings.clone(),
    };
    Ok(InGapStates { report, edge_artifacts: weights.len(), artifact_edge_weights: weights, warnings })
}

fn localization_of(v: &[c64], bx: &TruncationBox, fiber: usize, edge: &[bool]) -> Localization {
    localization(v, bx, fiber, edge)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub half_width: usize,
    /// Hausdorff distance between the truncated spectrum (artifacts
    /// removed) and the essential spectrum joined with the in-gap set.
    pub distance: f64,
    pub artifacts_removed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Eigenvalues of interior states off the essential spectrum at the
    /// largest box.
    pub in_gap: Vec<c64>,
    pub decreasing: bool,
    pub flags: Vec<String>,
}

/// Distances of truncated spectra from σ_ess ∪ (in-gap set) for growing boxes.
pub fn convergence_study(
    t: &InterfaceOperator,
    half_widths: &[usize],
    grid: &BlochGrid,
) -> Result<ConvergenceReport> {
    if half_widths.len() < 3 {
        return Err(Error::InvalidArgument("convergence study needs at least 3 box sizes".into()));
    }
    let ess = spectra::essential_spectrum(t, grid)?;
    let dim = t.lattice().dim();
    let reports: Vec<EigenReport> = half_widths
        .par_iter()
        .map(|&l| spectrum_truncated(t, &TruncationBox::new(dim, l)?, true))
        .collect::<Result<_>>()?;
    let tol = 2.0 * ess.resolution + 1e-6;
    let kept = |r: &EigenReport| -> (Vec<c64>, usize) {
        let mut out = Vec::new();
        let mut removed = 0;
        for (z, loc) in r.eigenvalues.iter().zip(&r.localization) {
            if loc.edge_weight >= EDGE_MASS_THRESHOLD {
                removed += 1;
            } else {
                out.push(*z);
            }
        }
        if out.is_empty() {
            return (r.eigenvalues.clone(), 0);
        }
        (out, removed)
    };
    let largest = reports
        .iter()
        .max_by_key(|r| r.bx.half_width())
        .expect("at least three reports");
    let (last_pts, _) = kept(largest);
    let in_gap: Vec<c64> = last_pts
        .iter()
        .filter(|z| ess.distance_to(**z) > tol)
        .copied()
        .collect();
    let in_gap = cluster(&in_gap, 1e-6);
    let rows: Vec<ConvergenceRow> = reports
        .iter()
        .map(|r| {
            let (pts, removed) = kept(r);
            ConvergenceRow {
                half_width: r.bx.half_width(),
                distance: ess.hausdorff_to_points(&pts, &in_gap),
                artifacts_removed: removed,
            }
        })
        .collect();
    let mut sorted = rows.clone();
    sorted.sort_by_key(|r| r.half_width);
    let decreasing = sorted.windows(2).all(|w| w[1].distance <= w[0].distance + 1e-9);
    let mut flags = Vec::new();
    if !decreasing {
        flags.push("distance does not decrease with the box size".into());
    }
    Ok(ConvergenceReport { rows, in_gap, decreasing, flags })
}

/// Collapses points closer than `tol` to their first representative.
fn cluster(points: &[c64], tol: f64) -> Vec<c64> {
    let mut out: Vec<c64> = Vec::new();
    for z in points {
        if out.iter().all(|w| (w - z).norm() > tol) {
            out.push(*z);
        }
    }
    out
}

/// Self-adjointness class of the truncation, used to pick solver paths.
pub fn truncation_class(t: &InterfaceOperator, bx: &TruncationBox) -> Result<OperatorClass> {
    let a = t.assemble_truncation(bx)?;
    Ok(if a.is_hermitian(HERMITIAN_TOL) {
        OperatorClass::Hermitian
    } else {
        OperatorClass::General
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Lattice, Shift};

    fn laplacian() -> InterfaceOperator {
        let l = Lattice::new(1, 1).unwrap();
        InterfaceOperator::shift(l, Shift(vec![1]))
            .unwrap()
            .add(&InterfaceOperator::shift(l, Shift(vec![-1])).unwrap())
            .unwrap()
            .claim_hermitian()
    }

    #[test]
    fn three_site_laplacian() {
        let r = spectrum_truncated(&laplacian(), &TruncationBox::new(1, 1).unwrap(), false).unwrap();
        let want = [-(2f64.sqrt()), 0.0, 2f64.sqrt()];
        for (z, w) in r.eigenvalues.iter().zip(want) {
            assert!((z.re - w).abs() < 1e-14 && z.im == 0.0);
        }
        assert!(r.hermitian_path);
    }

    #[test]
    fn identity_and_zero() {
        let l = Lattice::new(1, 2).unwrap();
        let bx = TruncationBox::new(1, 3).unwrap();
        let id = spectrum_truncated(&InterfaceOperator::identity(l), &bx, false).unwrap();
        assert_eq!(id.eigenvalues.len(), 14);
        assert!(id.eigenvalues.iter().all(|z| (*z - linalg::ONE).norm() < 1e-14));
        let zero = spectrum_truncated(&InterfaceOperator::new(l), &bx, true).unwrap();
        assert!(zero.eigenvalues.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn identity_converges_trivially() {
        let l = Lattice::new(1, 1).unwrap();
        let r = convergence_study(
            &InterfaceOperator::identity(l),
            &[10, 12, 15],
            &BlochGrid::uniform(1, 64).unwrap(),
        )
        .unwrap();
        assert!(r.rows.iter().all(|row| row.distance == 0.0));
    }

    #[test]
    fn localization_of_delta() {
        let bx = TruncationBox::new(1, 10).unwrap();
        let mut v = vec![linalg::ZERO; 21];
        v[10] = linalg::ONE;
        let loc = localization(&v, &bx, 1, &edge_mask(&bx, 5));
        assert_eq!(loc.participation_ratio, 1.0);
        assert_eq!(loc.peak, vec![0]);
        assert_eq!(loc.edge_weight, 0.0);
    }
}
