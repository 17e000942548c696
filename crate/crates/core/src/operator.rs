//! Interface operators T = Σ_g f_g S_g acting by
//! (Tψ)(x) = Σ_g f_g(x) ψ(x − g).

use std::collections::BTreeMap;
use std::sync::Arc;

use faer::c64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Shift, TruncationBox, DEFAULT_ROW_CAP};
use crate::linalg::{self, CsrMatrix, Matrix};
use crate::profile::{self, CoefficientProfile, ProfileKind};

/// Profiles with sup norm below this are dropped from the term map.
pub const PRUNE_TOL: f64 = 1e-15;

#[derive(Debug, Clone)]
pub struct InterfaceOperator {
    lattice: Lattice,
    terms: BTreeMap<Shift, CoefficientProfile>,
    hermitian_flag: bool,
    unitary_flag: bool,
}

impl InterfaceOperator {
    /// The zero operator.
    pub fn new(lattice: Lattice) -> Self {
        Self {
            lattice,
            terms: BTreeMap::new(),
            hermitian_flag: false,
            unitary_flag: false,
        }
    }

    pub fn from_terms(
        lattice: Lattice,
        terms: impl IntoIterator<Item = (Shift, CoefficientProfile)>,
    ) -> Result<Self> {
        let mut op = Self::new(lattice);
        for (g, f) in terms {
            op.add_term(g, f)?;
        }
        Ok(op)
    }

    /// c · 1 with a constant matrix c.
    pub fn constant(lattice: Lattice, c: Matrix) -> Result<Self> {
        Self::from_terms(
            lattice,
            [(Shift::zero(lattice.dim()), CoefficientProfile::uniform(lattice.dim(), c))],
        )
    }

    pub fn identity(lattice: Lattice) -> Self {
        let mut op = Self::constant(lattice, linalg::identity(lattice.fiber()))
            .expect("identity has matching shape");
        op.hermitian_flag = true;
        op.unitary_flag = true;
        op
    }

    /// The pure shift S_g ⊗ 1.
    pub fn shift(lattice: Lattice, g: Shift) -> Result<Self> {
        let mut op = Self::from_terms(
            lattice,
            [(g, CoefficientProfile::uniform(lattice.dim(), linalg::identity(lattice.fiber())))],
        )?;
        op.unitary_flag = true;
        Ok(op)
    }

    /// Adds `f` to the coefficient at shift `g`.
    pub fn add_term(&mut self, g: Shift, f: CoefficientProfile) -> Result<()> {
        if g.dim() != self.lattice.dim() {
            return Err(Error::DimensionMismatch { expected: self.lattice.dim(), found: g.dim() });
        }
        if f.dim() != self.lattice.dim() || f.fiber() != self.lattice.fiber() {
            return Err(Error::LatticeMismatch(
                self.lattice.to_string(),
                format!("Z^{} x C^{}", f.dim(), f.fiber()),
            ));
        }
        let merged = match self.terms.remove(&g) {
            Some(old) => old.add(&f)?,
            None => f,
        };
        if !merged.is_negligible(PRUNE_TOL) {
            self.terms.insert(g, merged);
        }
        self.hermitian_flag = false;
        self.unitary_flag = false;
        Ok(())
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Shift, &CoefficientProfile)> {
        self.terms.iter()
    }

    pub fn term(&self, g: &Shift) -> Option<&CoefficientProfile> {
        self.terms.get(g)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest |g|_∞ over the terms.
    pub fn shift_radius(&self) -> usize {
        self.terms.keys().map(|g| g.radius() as usize).max().unwrap_or(0)
    }

    /// The common asymptotics family of all profiles. Compactly supported
    /// and uniform profiles mix with anything; other families must agree.
    pub fn family(&self) -> Result<ProfileKind> {
        let mut family = ProfileKind::CompactlySupported;
        for f in self.terms.values() {
            let k = f.kind();
            family = match (family, k) {
                (a, b) if a == b => a,
                (ProfileKind::CompactlySupported, b) => b,
                (a, ProfileKind::CompactlySupported) => a,
                (ProfileKind::Uniform, b) => b,
                (a, ProfileKind::Uniform) => a,
                (a, b) => {
                    return Err(Error::VariantMismatch(format!("{a:?} and {b:?} in one operator")))
                }
            };
        }
        Ok(family)
    }

    pub fn hermitian_flag(&self) -> bool {
        self.hermitian_flag
    }

    pub fn unitary_flag(&self) -> bool {
        self.unitary_flag
    }

    /// Records the claim T = T*; see [`InterfaceOperator::verify_hermitian`].
    pub fn claim_hermitian(mut self) -> Self {
        self.hermitian_flag = true;
        self
    }

    /// Records the claim T*T = TT* = 1; see [`InterfaceOperator::verify_unitary`].
    pub fn claim_unitary(mut self) -> Self {
        self.unitary_flag = true;
        self
    }

    // ---------------------------------------------------------------------
    // *-algebra
    // ---------------------------------------------------------------------

    /// Term at −g is x ↦ f_g(x + g)†.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::new(self.lattice);
        for (g, f) in &self.terms {
            let t = f.translate(g.as_slice()).dagger();
            if !t.is_negligible(PRUNE_TOL) {
                out.terms.insert(g.neg(), t);
            }
        }
        out.hermitian_flag = self.hermitian_flag;
        out.unitary_flag = self.unitary_flag;
        out
    }

    /// Product T1·T2: the term at g+h collects x ↦ f_g(x)·k_h(x − g).
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.lattice.ensure_same(&other.lattice)?;
        let mut out = Self::new(self.lattice);
        for (g, f) in &self.terms {
            let back = g.neg();
            for (h, k) in &other.terms {
                let prod = f.mul(&k.translate(back.as_slice()))?;
                out.add_term(g.add(h), prod)?;
            }
        }
        out.unitary_flag = self.unitary_flag && other.unitary_flag;
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.lattice.ensure_same(&other.lattice)?;
        let mut out = self.clone();
        for (h, k) in &other.terms {
            out.add_term(h.clone(), k.clone())?;
        }
        out.hermitian_flag = self.hermitian_flag && other.hermitian_flag;
        Ok(out)
    }

    pub fn scale(&self, z: c64) -> Self {
        let mut out = Self::new(self.lattice);
        if z != linalg::ZERO {
            out.terms = self.terms.iter().map(|(g, f)| (g.clone(), f.scale(z))).collect();
        }
        out.hermitian_flag = self.hermitian_flag && z.im == 0.0;
        out.unitary_flag = self.unitary_flag && (z.norm() - 1.0).abs() < 1e-15;
        out
    }

    /// T − z·1.
    pub fn shifted_by(&self, z: c64) -> Result<Self> {
        let id = Self::identity(self.lattice);
        let mut out = self.add(&id.scale(-z))?;
        out.hermitian_flag = self.hermitian_flag && z.im == 0.0;
        Ok(out)
    }

    /// Conjugation S_v T S_v*: every profile is moved by v.
    pub fn translate(&self, v: &[i64]) -> Self {
        let back: Vec<i64> = v.iter().map(|c| -c).collect();
        let mut out = self.clone();
        out.terms = self.terms.iter().map(|(g, f)| (g.clone(), f.translate(&back))).collect();
        out
    }

    /// Applies an additive pointwise map to every profile, changing the
    /// fiber to `fiber_out`.
    pub fn map_fiber(
        &self,
        phi: Arc<dyn Fn(&Matrix) -> Matrix + Send + Sync>,
        fiber_out: usize,
    ) -> Result<Self> {
        let lattice = Lattice::new(self.lattice.dim(), fiber_out)?;
        let terms = self
            .terms
            .iter()
            .map(|(g, f)| (g.clone(), f.map_additive(phi.clone(), fiber_out)));
        Self::from_terms(lattice, terms)
    }

    // ---------------------------------------------------------------------
    // Finite volume
    // ---------------------------------------------------------------------

    fn check_box(&self, bx: &TruncationBox) -> Result<()> {
        if bx.dim() != self.lattice.dim() {
            return Err(Error::DimensionMismatch { expected: self.lattice.dim(), found: bx.dim() });
        }
        Ok(())
    }

    /// Matrix-free application on the box with zero boundary values.
    pub fn apply(&self, psi: &[c64], bx: &TruncationBox) -> Result<Vec<c64>> {
        self.check_box(bx)?;
        let n = self.lattice.fiber();
        let expected = bx.space_dim(n);
        if psi.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: psi.len() });
        }
        let mut out = vec![linalg::ZERO; expected];
        out.par_chunks_mut(n).enumerate().for_each(|(i, block)| {
            let x = bx.site(i);
            for (g, f) in &self.terms {
                let y: Vec<i64> = x.iter().zip(g.as_slice()).map(|(a, b)| a - b).collect();
                let Some(j) = bx.index(&y) else { continue };
                let m = f.evaluate(&x);
                for a in 0..n {
                    let mut acc = block[a];
                    for b in 0..n {
                        acc += m[(a, b)] * psi[j * n + b];
                    }
                    block[a] = acc;
                }
            }
        });
        Ok(out)
    }

    pub fn assemble_truncation(&self, bx: &TruncationBox) -> Result<CsrMatrix> {
        self.assemble_truncation_capped(bx, DEFAULT_ROW_CAP)
    }

    /// Sparse matrix of the Dirichlet truncation; rows are ordered by site
    /// (first coordinate slowest) and then by fiber component.
    pub fn assemble_truncation_capped(&self, bx: &TruncationBox, cap: usize) -> Result<CsrMatrix> {
        self.check_box(bx)?;
        let n = self.lattice.fiber();
        let rows = bx.space_dim(n);
        if rows > cap {
            return Err(Error::SizeCap { rows, cap });
        }
        let blocks: Vec<Vec<Vec<(usize, c64)>>> = (0..bx.num_sites())
            .into_par_iter()
            .map(|i| {
                let x = bx.site(i);
                let mut block = vec![Vec::new(); n];
                for (g, f) in &self.terms {
                    let y: Vec<i64> = x.iter().zip(g.as_slice()).map(|(a, b)| a - b).collect();
                    let Some(j) = bx.index(&y) else { continue };
                    let m = f.evaluate(&x);
                    for (a, row) in block.iter_mut().enumerate() {
                        for b in 0..n {
                            let v = m[(a, b)];
                            if v != linalg::ZERO {
                                row.push((j * n + b, v));
                            }
                        }
                    }
                }
                block
            })
            .collect();
        Ok(CsrMatrix::from_rows(rows, blocks.into_iter().flatten().collect()))
    }

    /// Sampled check of T = T*: term-by-term comparison of T and its adjoint
    /// on a sample window, plus hermiticity of the truncation on `bx`.
    pub fn verify_hermitian(&self, bx: &TruncationBox, tol: f64) -> Result<bool> {
        if !self.approx_eq(&self.adjoint(), tol) {
            return Ok(false);
        }
        Ok(self.assemble_truncation(bx)?.is_hermitian(tol))
    }

    /// Checks ‖(U*U − 1)ψ‖ ≤ tol and ‖(UU* − 1)ψ‖ ≤ tol for every basis
    /// vector ψ at depth at least twice the shift radius inside `bx`.
    pub fn verify_unitary(&self, bx: &TruncationBox, tol: f64) -> Result<bool> {
        let u = self.assemble_truncation(bx)?;
        let ud = u.adjoint();
        let n = self.lattice.fiber();
        let margin = 2 * self.shift_radius();
        let interior: Vec<usize> = (0..bx.num_sites())
            .filter(|&i| bx.depth(&bx.site(i)) >= margin)
            .flat_map(|i| (0..n).map(move |a| i * n + a))
            .collect();
        let dim = u.dim();
        let ok = interior.par_iter().all(|&k| {
            let mut e = vec![linalg::ZERO; dim];
            e[k] = linalg::ONE;
            [(&u, &ud), (&ud, &u)].iter().all(|(a, b)| {
                let mut v = b.apply(&e);
                v = a.apply(&v);
                v[k] -= linalg::ONE;
                crate::lattice::norm(&v) <= tol
            })
        });
        Ok(ok)
    }

    /// Term-by-term comparison on a sample window and on far rays (which
    /// probes the limits at infinity).
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.lattice != other.lattice {
            return false;
        }
        let keys: std::collections::BTreeSet<&Shift> =
            self.terms.keys().chain(other.terms.keys()).collect();
        let dim = self.lattice.dim();
        let fiber = self.lattice.fiber();
        let zero = CoefficientProfile::zero(dim, fiber);
        let window = match dim {
            1 => 24,
            2 => 6,
            _ => 3,
        };
        let samples = sample_window(dim, window);
        keys.into_iter().all(|g| {
            let a = self.terms.get(g).unwrap_or(&zero);
            let b = other.terms.get(g).unwrap_or(&zero);
            samples
                .iter()
                .all(|x| linalg::distance(&a.evaluate(x), &b.evaluate(x)) <= tol)
        })
    }
}

fn sample_window(dim: usize, r: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let side = (2 * r + 1) as usize;
    for mut idx in 0..side.pow(dim as u32) {
        let mut x = vec![0i64; dim];
        for c in x.iter_mut().rev() {
            *c = (idx % side) as i64 - r;
            idx /= side;
        }
        out.push(x);
    }
    for far in [100, 1000, 100_000] {
        out.extend(profile::ray_samples(dim, far));
    }
    out
}

/// A hopping of a crystal with a finite unit cell: it adds
/// `f(x) ψ_from(x − offset)` to component `to` at cell `x`.
#[derive(Debug, Clone)]
pub struct Hopping {
    pub from: usize,
    pub to: usize,
    pub offset: Shift,
    pub profile: CoefficientProfile,
}

/// Crystal X = ℤ^l × X_0 with a cocompact ℤ^l action; each crystal site
/// carries ℂ^N.
#[derive(Debug, Clone)]
pub struct Crystal {
    pub dim: usize,
    pub cell_size: usize,
    pub fiber: usize,
    pub hoppings: Vec<Hopping>,
}

impl Crystal {
    /// Position of crystal site (x, a), component c, in the folded fiber.
    pub fn fold_index(&self, site_in_cell: usize, component: usize) -> usize {
        site_in_cell * self.fiber + component
    }
}

/// Folds the crystal operator into an operator on ℤ^l with fiber
/// ℂ^{N·|X_0|}; the reindexing (x, a, c) ↦ (x, a·N + c) is unitary.
pub fn fold_cocompact(crystal: &Crystal) -> Result<InterfaceOperator> {
    if crystal.cell_size == 0 {
        return Err(Error::InvalidArgument("empty unit cell".into()));
    }
    let n = crystal.fiber;
    let big = n * crystal.cell_size;
    let lattice = Lattice::new(crystal.dim, big)?;
    let mut op = InterfaceOperator::new(lattice);
    for h in &crystal.hoppings {
        if h.from >= crystal.cell_size || h.to >= crystal.cell_size {
            return Err(Error::InvalidArgument(format!(
                "hopping {} -> {} leaves the unit cell of size {}",
                h.from, h.to, crystal.cell_size
            )));
        }
        if h.offset.dim() != crystal.dim || h.profile.dim() != crystal.dim {
            return Err(Error::DimensionMismatch { expected: crystal.dim, found: h.offset.dim() });
        }
        if h.profile.fiber() != n {
            return Err(Error::DimensionMismatch { expected: n, found: h.profile.fiber() });
        }
        let (r0, c0) = (h.to * n, h.from * n);
        let embed = Arc::new(move |m: &Matrix| {
            let mut out = linalg::zeros(big);
            for a in 0..n {
                for b in 0..n {
                    out[(r0 + a, c0 + b)] = m[(a, b)];
                }
            }
            out
        });
        op.add_term(h.offset.clone(), h.profile.map_additive(embed, big))?;
    }
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Lattice {
        Lattice::new(1, 1).unwrap()
    }

    fn one() -> Matrix {
        linalg::identity(1)
    }

    fn laplacian_1d() -> InterfaceOperator {
        let l = chain();
        InterfaceOperator::shift(l, Shift(vec![1]))
            .unwrap()
            .add(&InterfaceOperator::shift(l, Shift(vec![-1])).unwrap())
            .unwrap()
    }

    fn delta(len: usize, i: usize) -> Vec<c64> {
        let mut v = vec![linalg::ZERO; len];
        v[i] = linalg::ONE;
        v
    }

    #[test]
    fn shift_moves_delta() {
        let bx = TruncationBox::new(1, 3).unwrap();
        let s = InterfaceOperator::shift(chain(), Shift(vec![1])).unwrap();
        let out = s.apply(&delta(7, 3), &bx).unwrap();
        assert_eq!(out, delta(7, 4));
    }

    #[test]
    fn identity_applies_trivially() {
        let bx = TruncationBox::new(1, 2).unwrap();
        let psi: Vec<c64> = (0..5).map(|k| c64::new(k as f64, -1.0)).collect();
        assert_eq!(InterfaceOperator::identity(chain()).apply(&psi, &bx).unwrap(), psi);
    }

    #[test]
    fn laplacian_on_delta() {
        let bx = TruncationBox::new(1, 2).unwrap();
        let out = laplacian_1d().apply(&delta(5, 2), &bx).unwrap();
        let mut want = delta(5, 1);
        want[3] = linalg::ONE;
        assert_eq!(out, want);
    }

    #[test]
    fn laplacian_truncation_is_tridiagonal() {
        let bx = TruncationBox::new(1, 1).unwrap();
        let m = laplacian_1d().assemble_truncation(&bx).unwrap().to_dense();
        for i in 0..3usize {
            for j in 0..3 {
                let want = if i.abs_diff(j) == 1 { 1.0 } else { 0.0 };
                assert_eq!(m[(i, j)], c64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn adjoint_of_weighted_shift() {
        let c = linalg::real(2, &[1.0, 2.0, 3.0, 4.0]);
        let c = linalg::add(&c, &linalg::scale(&linalg::unit(2, 0, 1), c64::new(0.0, 1.0)));
        let l = Lattice::new(1, 2).unwrap();
        let t = InterfaceOperator::from_terms(
            l,
            [(Shift(vec![1]), CoefficientProfile::uniform(1, c.clone()))],
        )
        .unwrap();
        let a = t.adjoint();
        assert_eq!(a.num_terms(), 1);
        let f = a.term(&Shift(vec![-1])).unwrap();
        assert_eq!(linalg::distance(&f.evaluate(&[3]), &linalg::adjoint(&c)), 0.0);
        assert!(a.adjoint().approx_eq(&t, 0.0));
    }

    #[test]
    fn inverse_shifts_compose_to_identity() {
        let l = chain();
        let s = InterfaceOperator::shift(l, Shift(vec![1])).unwrap();
        let p = s.compose(&InterfaceOperator::shift(l, Shift(vec![-1])).unwrap()).unwrap();
        assert!(p.approx_eq(&InterfaceOperator::identity(l), 0.0));
        assert_eq!(p.num_terms(), 1);
    }

    #[test]
    fn compose_translates_right_factor() {
        let l = chain();
        let f = CoefficientProfile::domain_wall_tanh(one(), linalg::scalar(1, c64::new(3.0, 0.0)), 2.0)
            .unwrap();
        let k = CoefficientProfile::compact(1, 1, vec![(vec![4], linalg::scalar(1, c64::new(5.0, 0.0)))])
            .unwrap();
        let t1 = InterfaceOperator::from_terms(l, [(Shift(vec![1]), f.clone())]).unwrap();
        let t2 = InterfaceOperator::from_terms(l, [(Shift(vec![0]), k.clone())]).unwrap();
        let p = t1.compose(&t2).unwrap();
        let h = p.term(&Shift(vec![1])).unwrap();
        for x in -3..8 {
            let want = f.evaluate(&[x])[(0, 0)] * k.evaluate(&[x - 1])[(0, 0)];
            assert_eq!(h.evaluate(&[x])[(0, 0)], want);
        }
    }

    #[test]
    fn additive_inverse_is_zero() {
        let t = laplacian_1d();
        assert!(t.add(&t.scale(c64::new(-1.0, 0.0))).unwrap().is_zero());
    }

    #[test]
    fn row_cap_enforced() {
        let bx = TruncationBox::new(1, 10).unwrap();
        let err = laplacian_1d().assemble_truncation_capped(&bx, 20);
        assert!(matches!(err, Err(Error::SizeCap { rows: 21, cap: 20 })));
    }

    #[test]
    fn trivial_cell_folding_is_identity_reindexing() {
        let l = chain();
        let crystal = Crystal {
            dim: 1,
            cell_size: 1,
            fiber: 1,
            hoppings: vec![
                Hopping { from: 0, to: 0, offset: Shift(vec![1]), profile: CoefficientProfile::uniform(1, one()) },
                Hopping { from: 0, to: 0, offset: Shift(vec![-1]), profile: CoefficientProfile::uniform(1, one()) },
            ],
        };
        let folded = fold_cocompact(&crystal).unwrap();
        assert_eq!(folded.lattice(), l);
        assert!(folded.approx_eq(&laplacian_1d(), 0.0));
    }

    #[test]
    fn folding_rejects_hopping_outside_cell() {
        let crystal = Crystal {
            dim: 1,
            cell_size: 2,
            fiber: 1,
            hoppings: vec![Hopping {
                from: 0,
                to: 2,
                offset: Shift(vec![0]),
                profile: CoefficientProfile::uniform(1, one()),
            }],
        };
        assert!(fold_cocompact(&crystal).is_err());
    }
}
