//! Matrix-valued coefficient profiles ℤ^l → M_N(ℂ) tagged with the
//! asymptotics algebra they belong to.
//!
//! A profile is a pointwise evaluator plus the exact data describing its
//! behaviour at infinity (two limits for a domain wall, a function on the
//! sphere for radial profiles, face profiles for Cartesian anisotropy, ...).
//! The algebraic operations needed by the crossed product (translation,
//! adjoint, pointwise sums and products) act on both parts, so limits of a
//! composed operator are always exact rather than sampled.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

pub type SiteFn = Arc<dyn Fn(&[i64]) -> Matrix + Send + Sync>;
pub type SphereFn = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;
type MatrixMap = Arc<dyn Fn(&Matrix) -> Matrix + Send + Sync>;

/// Radii at which decay certificates are sampled.
pub const CERTIFICATE_RADII: [i64; 3] = [10, 50, 100];

const CERT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    CompactlySupported,
    /// Asymptotically constant: constant plus compact. Compatible with every
    /// other family.
    Uniform,
    DomainWall1D,
    CartesianAniso,
    Radial,
    ConeSupported,
    VanishingOscillation,
}

impl ProfileKind {
    /// Compactly supported and uniform profiles mix with any family.
    pub fn is_neutral(self) -> bool {
        matches!(self, ProfileKind::CompactlySupported | ProfileKind::Uniform)
    }
}

/// Declared decay envelope R ↦ bound(R) for the deviation from the limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Envelope {
    Exponential { scale: f64, rate: f64 },
    Power { scale: f64, exponent: f64 },
}

impl Envelope {
    pub fn bound(&self, r: f64) -> f64 {
        match *self {
            Envelope::Exponential { scale, rate } => scale * (-rate * r).exp(),
            Envelope::Power { scale, exponent } => scale * r.max(1.0).powf(-exponent),
        }
    }
}

/// Closed spherical cap: directions within `radius` (radians) of `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cap {
    center: Vec<f64>,
    radius: f64,
}

impl Cap {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        let n = center.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidArgument("cap center must be a nonzero vector".into()));
        }
        if !(0.0..=PI).contains(&radius) {
            return Err(Error::InvalidArgument(format!("cap radius {radius} outside [0, pi]")));
        }
        Ok(Self {
            center: center.iter().map(|c| c / n).collect(),
            radius,
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn angle_to(&self, direction: &[f64]) -> f64 {
        angle_between(&self.center, direction)
    }

    pub fn contains(&self, direction: &[f64]) -> bool {
        self.angle_to(direction) <= self.radius + 1e-12
    }

    /// Closed caps are disjoint iff their centers are further apart than the
    /// sum of the radii.
    pub fn disjoint_from(&self, other: &Cap) -> bool {
        angle_between(&self.center, &other.center) > self.radius + other.radius + 1e-12
    }
}

pub fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|c| c * c).sum::<f64>().sqrt();
    let nb = b.iter().map(|c| c * c).sum::<f64>().sqrt();
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// Unit direction of a nonzero lattice point.
pub fn direction_of(x: &[i64]) -> Option<Vec<f64>> {
    let n = x.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt();
    (n > 0.0).then(|| x.iter().map(|&c| c as f64 / n).collect())
}

/// Exact behaviour at infinity.
#[derive(Clone)]
pub(crate) enum Asymptotics {
    Compact { radius: u64 },
    Uniform { value: Matrix },
    DomainWall { left: Matrix, right: Matrix },
    /// `faces[j] = [f_{j-}, f_{j+}]`, each a profile in the remaining l-1
    /// coordinates.
    Cartesian { faces: Vec<[CoefficientProfile; 2]> },
    Radial { sphere: SphereFn },
    Cone { caps: Arc<Vec<Cap>>, cap_fns: Vec<SphereFn>, background: Matrix },
    Vo { range: Vec<Matrix> },
}

impl Asymptotics {
    fn kind(&self) -> ProfileKind {
        match self {
            Asymptotics::Compact { .. } => ProfileKind::CompactlySupported,
            Asymptotics::Uniform { .. } => ProfileKind::Uniform,
            Asymptotics::DomainWall { .. } => ProfileKind::DomainWall1D,
            Asymptotics::Cartesian { .. } => ProfileKind::CartesianAniso,
            Asymptotics::Radial { .. } => ProfileKind::Radial,
            Asymptotics::Cone { .. } => ProfileKind::ConeSupported,
            Asymptotics::Vo { .. } => ProfileKind::VanishingOscillation,
        }
    }
}

#[derive(Clone, Copy)]
enum BinOp {
    Add,
    Mul,
}

impl BinOp {
    fn apply(self, a: &Matrix, b: &Matrix) -> Matrix {
        match self {
            BinOp::Add => linalg::add(a, b),
            BinOp::Mul => linalg::mul(a, b),
        }
    }
}

/// A bounded function ℤ^l → M_N(ℂ) belonging to one asymptotics algebra.
#[derive(Clone)]
pub struct CoefficientProfile {
    dim: usize,
    fiber: usize,
    eval: SiteFn,
    asym: Asymptotics,
}

impl fmt::Debug for CoefficientProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientProfile")
            .field("dim", &self.dim)
            .field("fiber", &self.fiber)
            .field("kind", &self.kind())
            .finish()
    }
}

impl CoefficientProfile {
    fn raw(dim: usize, fiber: usize, eval: SiteFn, asym: Asymptotics) -> Self {
        Self { dim, fiber, eval, asym }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    pub fn kind(&self) -> ProfileKind {
        self.asym.kind()
    }

    pub fn evaluate(&self, x: &[i64]) -> Matrix {
        debug_assert_eq!(x.len(), self.dim);
        (self.eval)(x)
    }

    // ---------------------------------------------------------------------
    // Constructors
    // ---------------------------------------------------------------------

    pub fn zero(dim: usize, fiber: usize) -> Self {
        Self::raw(
            dim,
            fiber,
            Arc::new(move |_| linalg::zeros(fiber)),
            Asymptotics::Compact { radius: 0 },
        )
    }

    /// Finitely supported profile given by its nonzero values.
    pub fn compact(dim: usize, fiber: usize, entries: Vec<(Vec<i64>, Matrix)>) -> Result<Self> {
        let mut radius = 0u64;
        let mut map = std::collections::BTreeMap::new();
        for (x, m) in entries {
            check_site(&x, dim)?;
            check_fiber(&m, fiber)?;
            radius = radius.max(x.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0));
            let slot = map.entry(x).or_insert_with(|| linalg::zeros(fiber));
            *slot = linalg::add(slot, &m);
        }
        let map = Arc::new(map);
        Ok(Self::raw(
            dim,
            fiber,
            Arc::new(move |x| map.get(x).cloned().unwrap_or_else(|| linalg::zeros(fiber))),
            Asymptotics::Compact { radius },
        ))
    }

    /// Constant profile x ↦ value.
    pub fn uniform(dim: usize, value: Matrix) -> Self {
        let fiber = value.nrows();
        let v = value.clone();
        Self::raw(dim, fiber, Arc::new(move |_| v.clone()), Asymptotics::Uniform { value })
    }

    /// One-dimensional domain wall with limits `left` at -∞ and `right` at +∞.
    pub fn domain_wall(
        left: Matrix,
        right: Matrix,
        transition: impl Fn(i64) -> Matrix + Send + Sync + 'static,
        envelope: Envelope,
    ) -> Result<Self> {
        let fiber = left.nrows();
        check_fiber(&right, fiber)?;
        for r in CERTIFICATE_RADII {
            let dl = linalg::frobenius(&linalg::sub(&transition(-r), &left));
            let dr = linalg::frobenius(&linalg::sub(&transition(r), &right));
            let bound = envelope.bound(r as f64) + CERT_SLACK;
            if dl > bound || dr > bound {
                return Err(Error::Certificate(format!(
                    "domain wall deviates by ({dl:e}, {dr:e}) at R = {r}, envelope {bound:e}"
                )));
            }
        }
        Ok(Self::raw(
            1,
            fiber,
            Arc::new(move |x| transition(x[0])),
            Asymptotics::DomainWall { left, right },
        ))
    }

    /// Domain wall with the entrywise transition
    /// (left+right)/2 + (right-left)/2 · tanh(x/width).
    pub fn domain_wall_tanh(left: Matrix, right: Matrix, width: f64) -> Result<Self> {
        if width <= 0.0 || !width.is_finite() {
            return Err(Error::InvalidArgument(format!("wall width {width}")));
        }
        let mean = linalg::scale(&linalg::add(&left, &right), c64::new(0.5, 0.0));
        let half = linalg::scale(&linalg::sub(&right, &left), c64::new(0.5, 0.0));
        let scale = 2.0 * linalg::frobenius(&half);
        let envelope = Envelope::Exponential { scale, rate: 2.0 / width };
        Self::domain_wall(
            left,
            right,
            move |x| {
                let t = (x as f64 / width).tanh();
                linalg::add(&mean, &linalg::scale(&half, c64::new(t, 0.0)))
            },
            envelope,
        )
    }

    /// The same one-dimensional wall viewed as a profile asymptotically
    /// supported on the two antipodal caps {-1} and {+1} of S^0.
    pub fn domain_wall_as_cones(left: Matrix, right: Matrix, width: f64) -> Result<Self> {
        let wall = Self::domain_wall_tanh(left.clone(), right.clone(), width)?;
        let fiber = left.nrows();
        let caps = vec![Cap::new(vec![-1.0], 0.0)?, Cap::new(vec![1.0], 0.0)?];
        let (l2, r2) = (left.clone(), right.clone());
        let remainder = move |x: &[i64]| {
            let limit = match x[0].signum() {
                -1 => &l2,
                1 => &r2,
                _ => return wall.evaluate(x),
            };
            linalg::sub(&wall.evaluate(x), limit)
        };
        let scale = linalg::frobenius(&linalg::sub(&right, &left));
        Self::cone(
            1,
            fiber,
            caps,
            vec![constant_sphere(left), constant_sphere(right)],
            linalg::zeros(fiber),
            remainder,
            Envelope::Exponential { scale, rate: 2.0 / width },
        )
    }

    /// Cartesian anisotropy: `bulk` on ℤ^l and, for every axis j, the face
    /// profiles `[f_{j-}, f_{j+}]` in the remaining coordinates.
    pub fn cartesian(
        dim: usize,
        fiber: usize,
        bulk: impl Fn(&[i64]) -> Matrix + Send + Sync + 'static,
        faces: Vec<[CoefficientProfile; 2]>,
        envelope: Envelope,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(
                "Cartesian anisotropy needs l >= 2 (use a domain wall in 1D)".into(),
            ));
        }
        if faces.len() != dim {
            return Err(Error::InvalidArgument(format!("{} face pairs for l = {dim}", faces.len())));
        }
        for pair in &faces {
            for face in pair {
                if face.dim != dim - 1 || face.fiber != fiber {
                    return Err(Error::InvalidArgument("face profile has wrong shape".into()));
                }
            }
        }
        // decay towards each face
        for r in CERTIFICATE_RADII {
            let bound = envelope.bound(r as f64) + CERT_SLACK;
            for (j, pair) in faces.iter().enumerate() {
                for (s, face) in pair.iter().enumerate() {
                    let sign = if s == 0 { -1 } else { 1 };
                    for x in face_samples(dim, j, sign * r) {
                        let y: Vec<i64> = without(&x, j);
                        let d = linalg::frobenius(&linalg::sub(&bulk(&x), &face.evaluate(&y)));
                        if d > bound {
                            return Err(Error::Certificate(format!(
                                "face ({j},{sign:+}) deviates by {d:e} at {x:?}, envelope {bound:e}"
                            )));
                        }
                    }
                }
            }
        }
        // corner consistency: f_{j s}(x_k -> s' inf) = f_{k s'}(x_j -> s inf)
        let r = *CERTIFICATE_RADII.last().unwrap();
        let bound = 2.0 * envelope.bound(r as f64) + CERT_SLACK;
        for j in 0..dim {
            for k in 0..dim {
                if j == k {
                    continue;
                }
                for (s, sj) in [(0usize, -1i64), (1, 1)] {
                    for (t, sk) in [(0usize, -1i64), (1, 1)] {
                        let mut x = vec![0i64; dim];
                        x[j] = sj * r;
                        x[k] = sk * r;
                        let a = faces[j][s].evaluate(&without(&x, j));
                        let b = faces[k][t].evaluate(&without(&x, k));
                        let d = linalg::frobenius(&linalg::sub(&a, &b));
                        if d > bound {
                            return Err(Error::Certificate(format!(
                                "faces ({j},{sj:+}) and ({k},{sk:+}) disagree by {d:e} on the corner"
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self::raw(dim, fiber, Arc::new(bulk), Asymptotics::Cartesian { faces }))
    }

    /// Radial profile: `sphere(x/|x|) + remainder(x)` with a decaying remainder.
    pub fn radial(
        dim: usize,
        fiber: usize,
        sphere: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static,
        remainder: impl Fn(&[i64]) -> Matrix + Send + Sync + 'static,
        envelope: Envelope,
    ) -> Result<Self> {
        check_remainder(dim, &remainder, &envelope)?;
        let sphere: SphereFn = Arc::new(sphere);
        let s2 = sphere.clone();
        let eval = move |x: &[i64]| match direction_of(x) {
            Some(w) => linalg::add(&s2(&w), &remainder(x)),
            None => remainder(x),
        };
        Ok(Self::raw(dim, fiber, Arc::new(eval), Asymptotics::Radial { sphere }))
    }

    /// Profile asymptotically supported on disjoint closed caps:
    /// `background + Σ_j 1[x̂ ∈ O_j] F_j(x̂) + remainder(x)`.
    ///
    /// A nonzero `background` represents the unitization (constant part);
    /// the complement of the caps then carries `background` as its limit.
    pub fn cone(
        dim: usize,
        fiber: usize,
        caps: Vec<Cap>,
        cap_fns: Vec<SphereFn>,
        background: Matrix,
        remainder: impl Fn(&[i64]) -> Matrix + Send + Sync + 'static,
        envelope: Envelope,
    ) -> Result<Self> {
        if caps.is_empty() || caps.len() != cap_fns.len() {
            return Err(Error::InvalidArgument("need one sphere function per cap".into()));
        }
        for cap in &caps {
            if cap.center.len() != dim {
                return Err(Error::InvalidArgument("cap center has wrong dimension".into()));
            }
        }
        for a in 0..caps.len() {
            for b in a + 1..caps.len() {
                if !caps[a].disjoint_from(&caps[b]) {
                    return Err(Error::Certificate(format!("caps {a} and {b} intersect")));
                }
            }
        }
        check_fiber(&background, fiber)?;
        check_remainder(dim, &remainder, &envelope)?;
        let caps = Arc::new(caps);
        let asym = Asymptotics::Cone {
            caps: caps.clone(),
            cap_fns: cap_fns.clone(),
            background: background.clone(),
        };
        let eval = move |x: &[i64]| {
            let mut v = linalg::add(&background, &remainder(x));
            if let Some(w) = direction_of(x) {
                for (cap, f) in caps.iter().zip(&cap_fns) {
                    if cap.contains(&w) {
                        v = linalg::add(&v, &f(&w));
                    }
                }
            }
            v
        };
        Ok(Self::raw(dim, fiber, Arc::new(eval), asym))
    }

    /// Vanishing-oscillation profile with a user-declared finite sample
    /// `range` of its asymptotic range. Entries of `range` with equal index
    /// across the profiles of one operator describe the same point at infinity.
    pub fn vanishing_oscillation(
        dim: usize,
        fiber: usize,
        eval: impl Fn(&[i64]) -> Matrix + Send + Sync + 'static,
        range: Vec<Matrix>,
        envelope: Envelope,
    ) -> Result<Self> {
        if range.is_empty() {
            return Err(Error::InvalidArgument("empty asymptotic range sample".into()));
        }
        for m in &range {
            check_fiber(m, fiber)?;
        }
        for r in CERTIFICATE_RADII {
            let bound = envelope.bound(r as f64) + CERT_SLACK;
            for x in ray_samples(dim, r) {
                let fx = eval(&x);
                for axis in 0..dim {
                    let mut y = x.clone();
                    y[axis] -= 1;
                    let d = linalg::frobenius(&linalg::sub(&eval(&y), &fx));
                    if d > bound {
                        return Err(Error::Certificate(format!(
                            "oscillation {d:e} at {x:?} exceeds envelope {bound:e}"
                        )));
                    }
                }
            }
        }
        Ok(Self::raw(dim, fiber, Arc::new(eval), Asymptotics::Vo { range }))
    }

    // ---------------------------------------------------------------------
    // Limits
    // ---------------------------------------------------------------------

    /// Limit along the ray in direction `omega`, when the family defines one.
    pub fn directional_limit(&self, omega: &[f64]) -> Option<Matrix> {
        match &self.asym {
            Asymptotics::Compact { .. } => Some(linalg::zeros(self.fiber)),
            Asymptotics::Uniform { value } => Some(value.clone()),
            Asymptotics::DomainWall { left, right } => {
                Some(if omega[0] < 0.0 { left.clone() } else { right.clone() })
            }
            Asymptotics::Radial { sphere } => Some(sphere(omega)),
            Asymptotics::Cone { caps, cap_fns, background } => {
                let mut v = background.clone();
                for (cap, f) in caps.iter().zip(cap_fns) {
                    if cap.contains(omega) {
                        v = linalg::add(&v, &f(omega));
                    }
                }
                Some(v)
            }
            Asymptotics::Cartesian { .. } | Asymptotics::Vo { .. } => None,
        }
    }

    /// Domain-wall limits (left, right); neutral profiles report their
    /// constant limit on both sides.
    pub fn wall_limits(&self) -> Option<(Matrix, Matrix)> {
        match &self.asym {
            Asymptotics::DomainWall { left, right } => Some((left.clone(), right.clone())),
            Asymptotics::Uniform { value } => Some((value.clone(), value.clone())),
            Asymptotics::Compact { .. } => {
                Some((linalg::zeros(self.fiber), linalg::zeros(self.fiber)))
            }
            _ => None,
        }
    }

    /// Face profile f_{j±} as a profile in the remaining l-1 coordinates.
    pub fn face(&self, axis: usize, positive: bool) -> Option<CoefficientProfile> {
        if self.dim < 2 || axis >= self.dim {
            return None;
        }
        match &self.asym {
            Asymptotics::Cartesian { faces } => Some(faces[axis][positive as usize].clone()),
            Asymptotics::Uniform { value } => Some(Self::uniform(self.dim - 1, value.clone())),
            Asymptotics::Compact { .. } => Some(Self::zero(self.dim - 1, self.fiber)),
            _ => None,
        }
    }

    /// The `k`-th sample of the asymptotic range (vanishing oscillation).
    pub fn range_sample(&self, k: usize) -> Option<Matrix> {
        match &self.asym {
            Asymptotics::Vo { range } => range.get(k).cloned(),
            Asymptotics::Uniform { value } => Some(value.clone()),
            Asymptotics::Compact { .. } => Some(linalg::zeros(self.fiber)),
            _ => None,
        }
    }

    pub fn range_len(&self) -> Option<usize> {
        match &self.asym {
            Asymptotics::Vo { range } => Some(range.len()),
            _ => None,
        }
    }

    pub fn caps(&self) -> Option<&[Cap]> {
        match &self.asym {
            Asymptotics::Cone { caps, .. } => Some(caps),
            _ => None,
        }
    }

    /// Whether all limit data vanishes (the profile lies in C_0).
    pub fn limits_vanish(&self, tol: f64) -> bool {
        match &self.asym {
            Asymptotics::Compact { .. } => true,
            Asymptotics::Uniform { value } => linalg::max_abs(value) <= tol,
            Asymptotics::DomainWall { left, right } => {
                linalg::max_abs(left) <= tol && linalg::max_abs(right) <= tol
            }
            Asymptotics::Cartesian { faces } => faces.iter().all(|p| {
                p.iter().all(|f| f.limits_vanish(tol) && f.sampled_sup(4) <= tol)
            }),
            Asymptotics::Radial { sphere } => {
                sphere_samples(self.dim).iter().all(|w| linalg::max_abs(&sphere(w)) <= tol)
            }
            Asymptotics::Cone { caps, cap_fns, background } => {
                linalg::max_abs(background) <= tol
                    && caps.iter().zip(cap_fns).all(|(cap, f)| {
                        sphere_samples(self.dim)
                            .iter()
                            .filter(|w| cap.contains(w))
                            .chain(std::iter::once(&cap.center))
                            .all(|w| linalg::max_abs(&f(w)) <= tol)
                    })
            }
            Asymptotics::Vo { range } => range.iter().all(|m| linalg::max_abs(m) <= tol),
        }
    }

    /// Numerically zero: vanishing limit data and sup norm below `tol`.
    /// Compact profiles are checked on their whole support box.
    pub fn is_negligible(&self, tol: f64) -> bool {
        if !self.limits_vanish(tol) {
            return false;
        }
        let radius = match self.asym {
            Asymptotics::Compact { radius } if (radius as i64) <= compact_scan_limit(self.dim) => {
                radius as i64
            }
            _ => match self.dim {
                1 => 64,
                2 => 16,
                _ => 6,
            },
        };
        self.sampled_sup(radius) <= tol
    }

    /// Sup norm (max entry modulus) over the sample window |x|_∞ ≤ radius
    /// and over points on coordinate and diagonal rays out to 1000.
    pub fn sampled_sup(&self, radius: i64) -> f64 {
        let mut best = 0.0f64;
        let mut x = vec![-radius; self.dim];
        if self.dim == 0 {
            return linalg::max_abs(&self.evaluate(&[]));
        }
        loop {
            best = best.max(linalg::max_abs(&self.evaluate(&x)));
            let mut k = 0;
            loop {
                if k == self.dim {
                    for r in [radius + 1, 2 * radius + 3, 100, 1000] {
                        for y in ray_samples(self.dim, r) {
                            best = best.max(linalg::max_abs(&self.evaluate(&y)));
                        }
                    }
                    return best;
                }
                x[k] += 1;
                if x[k] > radius {
                    x[k] = -radius;
                    k += 1;
                } else {
                    break;
                }
            }
        }
    }

    // ---------------------------------------------------------------------
    // Algebra
    // ---------------------------------------------------------------------

    /// x ↦ f(x + v).
    pub fn translate(&self, v: &[i64]) -> Self {
        assert_eq!(v.len(), self.dim);
        if v.iter().all(|&c| c == 0) {
            return self.clone();
        }
        let f = self.eval.clone();
        let v2 = v.to_vec();
        let eval: SiteFn = Arc::new(move |x: &[i64]| {
            let y: Vec<i64> = x.iter().zip(&v2).map(|(a, b)| a + b).collect();
            f(&y)
        });
        let shift = v.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0);
        let asym = match &self.asym {
            Asymptotics::Compact { radius } => Asymptotics::Compact { radius: radius + shift },
            Asymptotics::Cartesian { faces } => Asymptotics::Cartesian {
                faces: faces
                    .iter()
                    .enumerate()
                    .map(|(j, [m, p])| {
                        let w = without(v, j);
                        [m.translate(&w), p.translate(&w)]
                    })
                    .collect(),
            },
            other => other.clone(),
        };
        Self::raw(self.dim, self.fiber, eval, asym)
    }

    /// Pointwise conjugate transpose.
    pub fn dagger(&self) -> Self {
        self.map_additive(Arc::new(linalg::adjoint), self.fiber)
    }

    pub fn scale(&self, z: c64) -> Self {
        self.map_additive(Arc::new(move |m: &Matrix| linalg::scale(m, z)), self.fiber)
    }

    /// Applies an additive map M_N → M_{N'} pointwise and to all limit data.
    pub fn map_additive(
        &self,
        phi: Arc<dyn Fn(&Matrix) -> Matrix + Send + Sync>,
        fiber_out: usize,
    ) -> Self {
        let f = self.eval.clone();
        let p2 = phi.clone();
        let eval: SiteFn = Arc::new(move |x: &[i64]| p2(&f(x)));
        let asym = map_asymptotics(&self.asym, &phi, fiber_out);
        Self::raw(self.dim, fiber_out, eval, asym)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.binary(other, BinOp::Add)
    }

    /// Pointwise product x ↦ f(x)·k(x).
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.binary(other, BinOp::Mul)
    }

    fn binary(&self, other: &Self, op: BinOp) -> Result<Self> {
        if self.dim != other.dim || self.fiber != other.fiber {
            return Err(Error::VariantMismatch(format!(
                "profile shapes ({}, {}) and ({}, {})",
                self.dim, self.fiber, other.dim, other.fiber
            )));
        }
        let asym = combine(&self.asym, &other.asym, op, self.dim, self.fiber)?;
        let (f, g) = (self.eval.clone(), other.eval.clone());
        let eval: SiteFn = Arc::new(move |x: &[i64]| op.apply(&f(x), &g(x)));
        Ok(Self::raw(self.dim, self.fiber, eval, asym))
    }
}

fn map_asymptotics(a: &Asymptotics, phi: &MatrixMap, fiber_out: usize) -> Asymptotics {
    match a {
        Asymptotics::Compact { radius } => Asymptotics::Compact { radius: *radius },
        Asymptotics::Uniform { value } => Asymptotics::Uniform { value: phi(value) },
        Asymptotics::DomainWall { left, right } => Asymptotics::DomainWall {
            left: phi(left),
            right: phi(right),
        },
        Asymptotics::Cartesian { faces } => Asymptotics::Cartesian {
            faces: faces
                .iter()
                .map(|[m, p]| {
                    [m.map_additive(phi.clone(), fiber_out), p.map_additive(phi.clone(), fiber_out)]
                })
                .collect(),
        },
        Asymptotics::Radial { sphere } => {
            let (s, p) = (sphere.clone(), phi.clone());
            Asymptotics::Radial { sphere: Arc::new(move |w: &[f64]| p(&s(w))) }
        }
        Asymptotics::Cone { caps, cap_fns, background } => Asymptotics::Cone {
            caps: caps.clone(),
            cap_fns: cap_fns
                .iter()
                .map(|f| {
                    let (f, p) = (f.clone(), phi.clone());
                    Arc::new(move |w: &[f64]| p(&f(w))) as SphereFn
                })
                .collect(),
            background: phi(background),
        },
        Asymptotics::Vo { range } => Asymptotics::Vo {
            range: range.iter().map(|m| phi(m)).collect(),
        },
    }
}

/// Expresses a constant limit in the family of `like`.
fn lift_uniform(value: &Matrix, like: &Asymptotics, dim: usize) -> Asymptotics {
    let fiber = value.nrows();
    match like {
        Asymptotics::DomainWall { .. } => Asymptotics::DomainWall {
            left: value.clone(),
            right: value.clone(),
        },
        Asymptotics::Cartesian { .. } => Asymptotics::Cartesian {
            faces: (0..dim)
                .map(|_| {
                    [
                        CoefficientProfile::uniform(dim - 1, value.clone()),
                        CoefficientProfile::uniform(dim - 1, value.clone()),
                    ]
                })
                .collect(),
        },
        Asymptotics::Radial { .. } => Asymptotics::Radial { sphere: constant_sphere(value.clone()) },
        Asymptotics::Cone { caps, cap_fns, .. } => Asymptotics::Cone {
            caps: caps.clone(),
            cap_fns: cap_fns.iter().map(|_| constant_sphere(linalg::zeros(fiber))).collect(),
            background: value.clone(),
        },
        Asymptotics::Vo { range } => Asymptotics::Vo { range: vec![value.clone(); range.len()] },
        Asymptotics::Uniform { .. } | Asymptotics::Compact { .. } => {
            Asymptotics::Uniform { value: value.clone() }
        }
    }
}

fn combine(
    a: &Asymptotics,
    b: &Asymptotics,
    op: BinOp,
    dim: usize,
    fiber: usize,
) -> Result<Asymptotics> {
    use Asymptotics as A;
    match (a, b, op) {
        (A::Compact { radius: r }, A::Compact { radius: s }, BinOp::Add) => {
            Ok(A::Compact { radius: *r.max(s) })
        }
        (A::Compact { radius: r }, A::Compact { radius: s }, BinOp::Mul) => {
            Ok(A::Compact { radius: *r.min(s) })
        }
        (A::Compact { .. }, other, BinOp::Add) | (other, A::Compact { .. }, BinOp::Add) => {
            Ok(other.clone())
        }
        (A::Compact { radius }, _, BinOp::Mul) | (_, A::Compact { radius }, BinOp::Mul) => {
            Ok(A::Compact { radius: *radius })
        }
        (A::Uniform { value: u }, A::Uniform { value: v }, _) => Ok(A::Uniform { value: op.apply(u, v) }),
        (A::Uniform { value }, other, _) => combine(&lift_uniform(value, other, dim), other, op, dim, fiber),
        (other, A::Uniform { value }, _) => combine(other, &lift_uniform(value, other, dim), op, dim, fiber),
        (A::DomainWall { left: l1, right: r1 }, A::DomainWall { left: l2, right: r2 }, _) => {
            Ok(A::DomainWall { left: op.apply(l1, l2), right: op.apply(r1, r2) })
        }
        (A::Cartesian { faces: f1 }, A::Cartesian { faces: f2 }, _) => {
            let faces = f1
                .iter()
                .zip(f2)
                .map(|([m1, p1], [m2, p2])| Ok([m1.binary(m2, op)?, p1.binary(p2, op)?]))
                .collect::<Result<Vec<_>>>()?;
            Ok(A::Cartesian { faces })
        }
        (A::Radial { sphere: s1 }, A::Radial { sphere: s2 }, _) => {
            let (s1, s2) = (s1.clone(), s2.clone());
            Ok(A::Radial { sphere: Arc::new(move |w: &[f64]| op.apply(&s1(w), &s2(w))) })
        }
        (
            A::Cone { caps: c1, cap_fns: f1, background: b1 },
            A::Cone { caps: c2, cap_fns: f2, background: b2 },
            _,
        ) => {
            if !Arc::ptr_eq(c1, c2) && c1.as_slice() != c2.as_slice() {
                return Err(Error::VariantMismatch("cone profiles with different caps".into()));
            }
            let background = op.apply(b1, b2);
            let cap_fns = f1
                .iter()
                .zip(f2)
                .map(|(fa, fb)| {
                    let (fa, fb) = (fa.clone(), fb.clone());
                    let (ba, bb, b0) = (b1.clone(), b2.clone(), background.clone());
                    Arc::new(move |w: &[f64]| match op {
                        BinOp::Add => linalg::add(&fa(w), &fb(w)),
                        BinOp::Mul => {
                            let full = linalg::mul(&linalg::add(&ba, &fa(w)), &linalg::add(&bb, &fb(w)));
                            linalg::sub(&full, &b0)
                        }
                    }) as SphereFn
                })
                .collect();
            Ok(A::Cone { caps: c1.clone(), cap_fns, background })
        }
        (A::Vo { range: r1 }, A::Vo { range: r2 }, _) => {
            if r1.len() != r2.len() {
                return Err(Error::VariantMismatch(format!(
                    "asymptotic range samples of lengths {} and {}",
                    r1.len(),
                    r2.len()
                )));
            }
            Ok(A::Vo { range: r1.iter().zip(r2).map(|(x, y)| op.apply(x, y)).collect() })
        }
        (x, y, _) => Err(Error::VariantMismatch(format!("{:?} with {:?}", x.kind(), y.kind()))),
    }
}

fn compact_scan_limit(dim: usize) -> i64 {
    match dim {
        1 => 100_000,
        2 => 300,
        _ => 40,
    }
}

pub fn constant_sphere(value: Matrix) -> SphereFn {
    Arc::new(move |_: &[f64]| value.clone())
}

fn check_site(x: &[i64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: x.len() });
    }
    Ok(())
}

fn check_fiber(m: &Matrix, fiber: usize) -> Result<()> {
    if m.nrows() != fiber || m.ncols() != fiber {
        return Err(Error::DimensionMismatch { expected: fiber, found: m.nrows() });
    }
    Ok(())
}

fn check_remainder(
    dim: usize,
    remainder: &dyn Fn(&[i64]) -> Matrix,
    envelope: &Envelope,
) -> Result<()> {
    for r in CERTIFICATE_RADII {
        let bound = envelope.bound(r as f64) + CERT_SLACK;
        for x in ray_samples(dim, r) {
            let d = linalg::frobenius(&remainder(&x));
            if d > bound {
                return Err(Error::Certificate(format!(
                    "remainder {d:e} at {x:?} exceeds envelope {bound:e}"
                )));
            }
        }
    }
    Ok(())
}

pub(crate) fn without(x: &[i64], axis: usize) -> Vec<i64> {
    x.iter()
        .enumerate()
        .filter(|&(i, _)| i != axis)
        .map(|(_, &c)| c)
        .collect()
}

/// Lattice points at sup-distance about `r` along coordinate axes and
/// diagonals (and, in 2D, a few intermediate angles).
pub(crate) fn ray_samples(dim: usize, r: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for w in sphere_samples(dim) {
        let m = w.iter().map(|c| c.abs()).fold(0.0, f64::max);
        out.push(w.iter().map(|c| (c / m * r as f64).round() as i64).collect());
    }
    out.sort();
    out.dedup();
    out
}

/// A small fixed set of directions used for certificate sampling.
pub(crate) fn sphere_samples(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![-1.0], vec![1.0]],
        2 => (0..16)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 16.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut out = Vec::new();
            for a in -1i32..=1 {
                for b in -1i32..=1 {
                    for c in -1i32..=1 {
                        if (a, b, c) != (0, 0, 0) {
                            let v = [a as f64, b as f64, c as f64];
                            let n = (v.iter().map(|x| x * x).sum::<f64>()).sqrt();
                            out.push(v.iter().map(|x| x / n).collect());
                        }
                    }
                }
            }
            out
        }
    }
}

/// Points with `x[axis] = coord` and the other coordinates spread over
/// [-|coord|, |coord|].
fn face_samples(dim: usize, axis: usize, coord: i64) -> Vec<Vec<i64>> {
    let r = coord.abs();
    let offsets = [-r, -r / 2, -1, 0, 1, r / 2, r];
    let others = dim - 1;
    let mut out = Vec::new();
    let count = offsets.len().pow(others as u32);
    for mut idx in 0..count {
        let mut x = Vec::with_capacity(dim);
        for k in 0..dim {
            if k == axis {
                x.push(coord);
            } else {
                x.push(offsets[idx % offsets.len()]);
                idx /= offsets.len();
            }
        }
        out.push(x);
    }
    out
}
