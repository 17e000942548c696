//! Bulk systems at infinity: the translation-invariant (or face-fibered)
//! operators obtained as limits of an interface operator along the
//! quasi-orbits of its asymptotics algebra.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use faer::c64;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Shift};
use crate::linalg::{self, Matrix};
use crate::operator::InterfaceOperator;
use crate::profile::{CoefficientProfile, ProfileKind};

/// Symbols with all entries below this are dropped.
const SYMBOL_PRUNE: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorClass {
    Hermitian,
    Unitary,
    General,
}

impl OperatorClass {
    pub fn of(t: &InterfaceOperator) -> Self {
        if t.hermitian_flag() {
            OperatorClass::Hermitian
        } else if t.unitary_flag() {
            OperatorClass::Unitary
        } else {
            OperatorClass::General
        }
    }
}

/// θ ↦ T_{j±}(θ): the face profiles of the terms with the j-th shift
/// component s turned into the phase e^{isθ}.
#[derive(Debug, Clone)]
pub struct FaceFamily {
    axis: usize,
    positive: bool,
    lattice: Lattice,
    class: OperatorClass,
    terms: Vec<(Shift, CoefficientProfile)>,
}

impl FaceFamily {
    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn positive(&self) -> bool {
        self.positive
    }

    /// Lattice of the fiber operators, of dimension l − 1.
    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn at(&self, theta: f64) -> Result<InterfaceOperator> {
        let mut op = InterfaceOperator::new(self.lattice);
        for (g, f) in &self.terms {
            let s = g.as_slice()[self.axis] as f64;
            let phase = c64::new((s * theta).cos(), (s * theta).sin());
            op.add_term(g.without(self.axis), f.scale(phase))?;
        }
        Ok(match self.class {
            OperatorClass::Hermitian => op.claim_hermitian(),
            OperatorClass::Unitary => op.claim_unitary(),
            OperatorClass::General => op,
        })
    }
}

#[derive(Debug, Clone)]
pub enum BulkKind {
    /// Constant coefficients b_g.
    TranslationInvariant { symbol: BTreeMap<Shift, Matrix> },
    FaceFibered(FaceFamily),
}

/// One quasi-orbit representative q_j(T).
#[derive(Debug, Clone)]
pub struct BulkSystem {
    pub label: String,
    pub kind: BulkKind,
    pub class: OperatorClass,
    pub dim: usize,
    pub fiber: usize,
    /// Ray direction, for systems obtained from a sphere at infinity.
    pub direction: Option<Vec<f64>>,
    /// Set when the system is the limit outside every declared cap.
    pub outside_caps: bool,
}

impl BulkSystem {
    /// Escape hatch for user-declared quasi-orbit representatives.
    pub fn translation_invariant(
        label: impl Into<String>,
        dim: usize,
        fiber: usize,
        symbol: BTreeMap<Shift, Matrix>,
        class: OperatorClass,
    ) -> Self {
        let symbol = symbol
            .into_iter()
            .filter(|(_, m)| linalg::max_abs(m) > SYMBOL_PRUNE)
            .collect();
        Self {
            label: label.into(),
            kind: BulkKind::TranslationInvariant { symbol },
            class,
            dim,
            fiber,
            direction: None,
            outside_caps: false,
        }
    }

    pub fn symbol(&self) -> Option<&BTreeMap<Shift, Matrix>> {
        match &self.kind {
            BulkKind::TranslationInvariant { symbol } => Some(symbol),
            BulkKind::FaceFibered(_) => None,
        }
    }

    /// The translation-invariant operator with this symbol.
    pub fn to_operator(&self) -> Result<InterfaceOperator> {
        let symbol = self
            .symbol()
            .ok_or_else(|| Error::InvalidArgument("face-fibered system has no constant symbol".into()))?;
        let lattice = Lattice::new(self.dim, self.fiber)?;
        let op = InterfaceOperator::from_terms(
            lattice,
            symbol
                .iter()
                .map(|(g, m)| (g.clone(), CoefficientProfile::uniform(self.dim, m.clone()))),
        )?;
        Ok(match self.class {
            OperatorClass::Hermitian => op.claim_hermitian(),
            OperatorClass::Unitary => op.claim_unitary(),
            OperatorClass::General => op,
        })
    }

    /// Max entrywise distance between two constant symbols.
    pub fn symbol_distance(&self, other: &BulkSystem) -> Option<f64> {
        let (a, b) = (self.symbol()?, other.symbol()?);
        let zero = linalg::zeros(self.fiber);
        let mut d = 0.0f64;
        for g in a.keys().chain(b.keys()) {
            let x = a.get(g).unwrap_or(&zero);
            let y = b.get(g).unwrap_or(&zero);
            d = d.max(linalg::max_abs(&linalg::sub(x, y)));
        }
        Some(d)
    }
}

/// Finite set of directions standing in for the sphere at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SphereGrid {
    /// Number of directions on the circle (l = 2).
    pub circle_points: usize,
    /// Icosahedral subdivision level (l = 3).
    pub refinement: usize,
}

impl Default for SphereGrid {
    fn default() -> Self {
        Self { circle_points: 360, refinement: 2 }
    }
}

impl SphereGrid {
    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        match dim {
            1 => vec![vec![-1.0], vec![1.0]],
            2 => (0..self.circle_points)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / self.circle_points as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect(),
            _ => icosphere(self.refinement),
        }
    }
}

/// Vertices of the subdivided icosahedron, projected to S².
fn icosphere(level: usize) -> Vec<Vec<f64>> {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<[f64; 3]> = vec![
        [-1.0, p, 0.0], [1.0, p, 0.0], [-1.0, -p, 0.0], [1.0, -p, 0.0],
        [0.0, -1.0, p], [0.0, 1.0, p], [0.0, -1.0, -p], [0.0, 1.0, -p],
        [p, 0.0, -1.0], [p, 0.0, 1.0], [-p, 0.0, -1.0], [-p, 0.0, 1.0],
    ];
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    let normalize = |v: [f64; 3]| {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / n, v[1] / n, v[2] / n]
    };
    for v in verts.iter_mut() {
        *v = normalize(*v);
    }
    for _ in 0..level {
        let mut cache = BTreeMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let (x, y) = (verts[a], verts[b]);
                verts.push(normalize([x[0] + y[0], x[1] + y[1], x[2] + y[2]]));
                verts.len() - 1
            })
        };
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    verts.into_iter().map(|v| v.to_vec()).collect()
}

fn symbol_from(
    t: &InterfaceOperator,
    limit: impl Fn(&CoefficientProfile) -> Result<Matrix>,
) -> Result<BTreeMap<Shift, Matrix>> {
    let mut out = BTreeMap::new();
    for (g, f) in t.terms() {
        let m = limit(f)?;
        if linalg::max_abs(&m) > SYMBOL_PRUNE {
            out.insert(g.clone(), m);
        }
    }
    Ok(out)
}

fn ti(t: &InterfaceOperator, label: String, symbol: BTreeMap<Shift, Matrix>) -> BulkSystem {
    let l = t.lattice();
    BulkSystem::translation_invariant(label, l.dim(), l.fiber(), symbol, OperatorClass::of(t))
}

fn missing(kind: &str) -> Error {
    Error::VariantMismatch(format!("profile has no {kind} limit"))
}

/// Quasi-orbit bulk systems with the default sphere grid.
pub fn quasi_orbits(t: &InterfaceOperator) -> Result<Vec<BulkSystem>> {
    quasi_orbits_with(t, &SphereGrid::default())
}

pub fn quasi_orbits_with(t: &InterfaceOperator, grid: &SphereGrid) -> Result<Vec<BulkSystem>> {
    if t.is_zero() {
        return Err(Error::EmptyOperator);
    }
    let dim = t.lattice().dim();
    match t.family()? {
        ProfileKind::CompactlySupported | ProfileKind::Uniform => {
            let symbol = symbol_from(t, |f| {
                f.directional_limit(&vec![1.0; dim]).ok_or_else(|| missing("constant"))
            })?;
            Ok(vec![ti(t, "bulk".into(), symbol)])
        }
        ProfileKind::DomainWall1D => {
            let left = symbol_from(t, |f| Ok(f.wall_limits().ok_or_else(|| missing("wall"))?.0))?;
            let right = symbol_from(t, |f| Ok(f.wall_limits().ok_or_else(|| missing("wall"))?.1))?;
            Ok(vec![ti(t, "left".into(), left), ti(t, "right".into(), right)])
        }
        ProfileKind::CartesianAniso => {
            let mut out = Vec::with_capacity(2 * dim);
            for axis in 0..dim {
                for positive in [false, true] {
                    out.push(face_limit(t, axis, positive)?);
                }
            }
            Ok(out)
        }
        ProfileKind::Radial => grid
            .points(dim)
            .into_iter()
            .enumerate()
            .map(|(k, w)| {
                let mut b = directional_limit(t, &w)?;
                b.label = format!("ray {k:04}");
                Ok(b)
            })
            .collect(),
        ProfileKind::ConeSupported => {
            let caps = t
                .terms()
                .find_map(|(_, f)| f.caps().map(|c| c.to_vec()))
                .ok_or_else(|| missing("cone"))?;
            let points = grid.points(dim);
            let mut out = Vec::new();
            for (j, cap) in caps.iter().enumerate() {
                let mut dirs = vec![cap.center().to_vec()];
                dirs.extend(points.iter().filter(|w| cap.contains(w)).cloned());
                for (k, w) in dirs.into_iter().enumerate() {
                    let mut b = directional_limit(t, &w)?;
                    b.label = format!("cap {j} ray {k:04}");
                    out.push(b);
                }
            }
            if let Some(w) = points.iter().find(|w| caps.iter().all(|c| !c.contains(w))) {
                let mut b = directional_limit(t, w)?;
                b.label = "outside caps".into();
                out.push(b);
            }
            Ok(out)
        }
        ProfileKind::VanishingOscillation => {
            let n = t
                .terms()
                .filter_map(|(_, f)| f.range_len())
                .max()
                .ok_or_else(|| missing("range"))?;
            (0..n)
                .map(|k| {
                    let symbol =
                        symbol_from(t, |f| f.range_sample(k).ok_or_else(|| missing("range")))?;
                    Ok(ti(t, format!("range {k:03}"), symbol))
                })
                .collect()
        }
    }
}

/// Bulk system along the ray in direction `omega` (Radial and cone families).
pub fn directional_limit(t: &InterfaceOperator, omega: &[f64]) -> Result<BulkSystem> {
    let dim = t.lattice().dim();
    if omega.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: omega.len() });
    }
    let n = omega.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("direction has norm {n}")));
    }
    let family = t.family()?;
    if matches!(family, ProfileKind::CartesianAniso | ProfileKind::VanishingOscillation)
        || (family == ProfileKind::DomainWall1D && dim != 1)
    {
        return Err(Error::VariantMismatch(format!("{family:?} has no directional limits")));
    }
    let symbol = symbol_from(t, |f| f.directional_limit(omega).ok_or_else(|| missing("directional")))?;
    let outside = t
        .terms()
        .find_map(|(_, f)| f.caps())
        .is_some_and(|caps| caps.iter().all(|c| !c.contains(omega)));
    let mut b = ti(t, format!("ray {omega:?}"), symbol);
    b.direction = Some(omega.to_vec());
    b.outside_caps = outside;
    Ok(b)
}

/// The face-fibered family θ ↦ T_{j±}(θ) of a Cartesian-anisotropic operator.
pub fn face_limit(t: &InterfaceOperator, axis: usize, positive: bool) -> Result<BulkSystem> {
    let l = t.lattice();
    if axis >= l.dim() {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range for l = {}", l.dim())));
    }
    if l.dim() < 2 {
        return Err(Error::InvalidArgument("face limits need l >= 2".into()));
    }
    let terms = t
        .terms()
        .map(|(g, f)| {
            f.face(axis, positive)
                .map(|face| (g.clone(), face))
                .ok_or_else(|| missing("face"))
        })
        .collect::<Result<Vec<_>>>()?;
    let family = FaceFamily {
        axis,
        positive,
        lattice: Lattice::new(l.dim() - 1, l.fiber())?,
        class: OperatorClass::of(t),
        terms,
    };
    Ok(BulkSystem {
        label: format!("x{axis}{}", if positive { '+' } else { '-' }),
        kind: BulkKind::FaceFibered(family),
        class: OperatorClass::of(t),
        dim: l.dim(),
        fiber: l.fiber(),
        direction: None,
        outside_caps: false,
    })
}
