//! Catalog of concrete interface models, one for each asymptotics family.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::ChiralSymmetry;
use crate::lattice::{Lattice, Shift, TruncationBox};
use crate::linalg::{self, Matrix};
use crate::operator::InterfaceOperator;
use crate::profile::{Cap, CoefficientProfile, Envelope, SphereFn};

/// Model parameter value as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Number(f64),
    Text(String),
}

pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelInfo {
    pub name: &'static str,
    pub summary: &'static str,
    /// (parameter, default) pairs.
    pub params: Vec<(&'static str, ParamValue)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Flags {
    pub hermitian: bool,
    pub unitary: bool,
    pub chiral: bool,
}

/// A constructed catalog model with verified flags.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub operator: InterfaceOperator,
    pub chiral: Option<ChiralSymmetry>,
    pub flags: Flags,
}

fn num(v: f64) -> ParamValue {
    ParamValue::Number(v)
}

pub fn list() -> Vec<ModelInfo> {
    vec![
        ModelInfo {
            name: "ssh_wall",
            summary: "SSH chain with a tanh mass wall between m_left and m_right",
            params: vec![
                ("m_left", num(0.5)),
                ("m_right", num(2.0)),
                ("width", num(2.0)),
                ("assert_gap", ParamValue::Bool(true)),
                ("asymptotics", ParamValue::Text("wall".into())),
            ],
        },
        ModelInfo {
            name: "ssh_bulk",
            summary: "translation-invariant SSH chain with mass m",
            params: vec![("m", num(0.5)), ("assert_gap", ParamValue::Bool(true))],
        },
        ModelInfo {
            name: "split_step_walk_wall",
            summary: "split-step quantum walk with coin angles interpolating between two sides",
            params: vec![
                ("theta1_left", num(PI / 2.0)),
                ("theta1_right", num(0.2)),
                ("theta2_left", num(PI / 2.0)),
                ("theta2_right", num(0.2)),
                ("width", num(2.0)),
            ],
        },
        ModelInfo {
            name: "laplacian",
            summary: "nearest-neighbour lattice Laplacian on Z^l",
            params: vec![("dim", num(1.0))],
        },
        ModelInfo {
            name: "cartesian_2d_wall",
            summary: "2D Laplacian plus a potential wall in the first coordinate",
            params: vec![("v_left", num(-1.0)), ("v_right", num(1.0)), ("width", num(2.0))],
        },
        ModelInfo {
            name: "radial_2d",
            summary: "2D Laplacian plus the angular potential a*cos(phi)",
            params: vec![("a", num(1.0))],
        },
        ModelInfo {
            name: "cone_2d",
            summary: "chiral 2D model whose mass differs inside two opposite cones",
            params: vec![
                ("m_background", num(4.0)),
                ("m_cap0", num(3.0)),
                ("m_cap1", num(3.0)),
                ("t2", num(0.5)),
                ("cap_radius", num(PI / 4.0)),
            ],
        },
        ModelInfo {
            name: "vo_1d",
            summary: "1D Laplacian plus a slowly oscillating potential a*cos(c*sqrt|x|)",
            params: vec![("a", num(0.5)), ("c", num(1.0)), ("range_samples", num(9.0))],
        },
    ]
}

struct Reader<'a> {
    name: &'a str,
    params: &'a Params,
    defaults: Vec<(&'static str, ParamValue)>,
}

impl<'a> Reader<'a> {
    fn new(name: &'a str, params: &'a Params) -> Result<Self> {
        let info = list()
            .into_iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::UnknownModel(name.to_string()))?;
        for key in params.keys() {
            if !info.params.iter().any(|(k, _)| k == key) {
                return Err(Error::ModelParameters(format!("{name} has no parameter '{key}'")));
            }
        }
        Ok(Self { name, params, defaults: info.params })
    }

    fn value(&self, key: &str) -> &ParamValue {
        self.params.get(key).unwrap_or_else(|| {
            &self.defaults.iter().find(|(k, _)| *k == key).expect("declared parameter").1
        })
    }

    fn f64(&self, key: &str) -> Result<f64> {
        match self.value(key) {
            ParamValue::Number(x) if x.is_finite() => Ok(*x),
            other => Err(Error::ModelParameters(format!("{}.{key}: expected a number, got {other:?}", self.name))),
        }
    }

    fn bool(&self, key: &str) -> Result<bool> {
        match self.value(key) {
            ParamValue::Bool(b) => Ok(*b),
            other => Err(Error::ModelParameters(format!("{}.{key}: expected a boolean, got {other:?}", self.name))),
        }
    }

    fn text(&self, key: &str) -> Result<String> {
        match self.value(key) {
            ParamValue::Text(s) => Ok(s.clone()),
            other => Err(Error::ModelParameters(format!("{}.{key}: expected a string, got {other:?}", self.name))),
        }
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let x = self.f64(key)?;
        if x <= 0.0 {
            return Err(Error::ModelParameters(format!("{}.{key} must be positive", self.name)));
        }
        Ok(x)
    }
}

/// Builds a catalog model and verifies its claimed flags.
pub fn build(name: &str, params: &Params) -> Result<Model> {
    let r = Reader::new(name, params)?;
    let model = match name {
        "ssh_wall" => {
            let (ml, mr) = (r.f64("m_left")?, r.f64("m_right")?);
            if r.bool("assert_gap")? {
                check_ssh_gap(ml)?;
                check_ssh_gap(mr)?;
            }
            let cones = match r.text("asymptotics")?.as_str() {
                "wall" => false,
                "cone" => true,
                other => {
                    return Err(Error::ModelParameters(format!(
                        "ssh_wall.asymptotics must be 'wall' or 'cone', got '{other}'"
                    )))
                }
            };
            chiral_model(name, ssh_wall(ml, mr, r.positive("width")?, cones)?)
        }
        "ssh_bulk" => {
            let m = r.f64("m")?;
            if r.bool("assert_gap")? {
                check_ssh_gap(m)?;
            }
            chiral_model(name, ssh_bulk(m)?)
        }
        "split_step_walk_wall" => {
            let op = split_step_walk_wall(
                (r.f64("theta1_left")?, r.f64("theta1_right")?),
                (r.f64("theta2_left")?, r.f64("theta2_right")?),
                r.positive("width")?,
            )?;
            Model {
                name: name.into(),
                operator: op,
                chiral: None,
                flags: Flags { hermitian: false, unitary: true, chiral: false },
            }
        }
        "laplacian" => {
            let d = r.f64("dim")?;
            if d.fract() != 0.0 || !(1.0..=3.0).contains(&d) {
                return Err(Error::ModelParameters("laplacian.dim must be 1, 2 or 3".into()));
            }
            hermitian_model(name, laplacian(d as usize)?)
        }
        "cartesian_2d_wall" => hermitian_model(
            name,
            cartesian_2d_wall(r.f64("v_left")?, r.f64("v_right")?, r.positive("width")?)?,
        ),
        "radial_2d" => hermitian_model(name, radial_2d(r.f64("a")?)?),
        "cone_2d" => chiral_model(
            name,
            cone_2d(
                r.f64("m_background")?,
                [r.f64("m_cap0")?, r.f64("m_cap1")?],
                r.f64("t2")?,
                r.positive("cap_radius")?,
            )?,
        ),
        "vo_1d" => {
            let k = r.f64("range_samples")?;
            if k.fract() != 0.0 || k < 1.0 {
                return Err(Error::ModelParameters("vo_1d.range_samples must be a positive integer".into()));
            }
            hermitian_model(name, vo_1d(r.f64("a")?, r.positive("c")?, k as usize)?)
        }
        other => return Err(Error::UnknownModel(other.into())),
    };
    verify(&model)?;
    Ok(model)
}

fn hermitian_model(name: &str, op: InterfaceOperator) -> Model {
    Model {
        name: name.into(),
        operator: op,
        chiral: None,
        flags: Flags { hermitian: true, unitary: false, chiral: false },
    }
}

fn chiral_model(name: &str, op: InterfaceOperator) -> Model {
    Model {
        name: name.into(),
        operator: op,
        chiral: Some(ChiralSymmetry::sublattice()),
        flags: Flags { hermitian: true, unitary: false, chiral: true },
    }
}

fn verify(model: &Model) -> Result<()> {
    let t = &model.operator;
    let dim = t.lattice().dim();
    let half = match dim {
        1 => 20,
        2 => 6,
        _ => 3,
    };
    let bx = TruncationBox::new(dim, half)?;
    if model.flags.hermitian && !t.verify_hermitian(&bx, 1e-12)? {
        return Err(Error::Symmetry(format!("self-adjoint: model {}", model.name)));
    }
    if model.flags.unitary && !t.verify_unitary(&bx, 1e-12)? {
        return Err(Error::Symmetry(format!("unitary: model {}", model.name)));
    }
    if let Some(pi) = &model.chiral {
        if !pi.anticommutes(t)? {
            return Err(Error::Symmetry(format!("chiral: model {}", model.name)));
        }
    }
    Ok(())
}

fn check_ssh_gap(m: f64) -> Result<()> {
    if ((m.abs()) - 1.0).abs() < 1e-9 {
        return Err(Error::ModelParameters(format!(
            "SSH mass |m| = 1 closes the bulk gap (m = {m})"
        )));
    }
    Ok(())
}

fn offdiag(m: f64) -> Matrix {
    linalg::real(2, &[0.0, m, m, 0.0])
}

/// Mass term m·σ_x at shift 0, hoppings E_10 at +1 and E_01 at −1.
fn ssh_hoppings(lattice: Lattice) -> [(Shift, CoefficientProfile); 2] {
    [
        (Shift(vec![1]), CoefficientProfile::uniform(1, linalg::unit(2, 1, 0))),
        (Shift(vec![-1]), CoefficientProfile::uniform(1, linalg::unit(2, 0, 1))),
    ]
    .map(|(g, f)| {
        debug_assert_eq!(f.fiber(), lattice.fiber());
        (g, f)
    })
}

pub fn ssh_bulk(m: f64) -> Result<InterfaceOperator> {
    let l = Lattice::new(1, 2)?;
    let mut terms = vec![(Shift(vec![0]), CoefficientProfile::uniform(1, offdiag(m)))];
    terms.extend(ssh_hoppings(l));
    Ok(InterfaceOperator::from_terms(l, terms)?.claim_hermitian())
}

/// SSH chain with mass (m_l + m_r)/2 + (m_r − m_l)/2·tanh(x/width). With
/// `cones` the mass profile is declared on the two antipodal caps of S⁰.
pub fn ssh_wall(m_l: f64, m_r: f64, width: f64, cones: bool) -> Result<InterfaceOperator> {
    let l = Lattice::new(1, 2)?;
    let mass = if cones {
        CoefficientProfile::domain_wall_as_cones(offdiag(m_l), offdiag(m_r), width)?
    } else {
        CoefficientProfile::domain_wall_tanh(offdiag(m_l), offdiag(m_r), width)?
    };
    let mut terms = vec![(Shift(vec![0]), mass)];
    terms.extend(ssh_hoppings(l));
    Ok(InterfaceOperator::from_terms(l, terms)?.claim_hermitian())
}

pub fn laplacian(dim: usize) -> Result<InterfaceOperator> {
    let l = Lattice::new(dim, 1)?;
    let mut op = InterfaceOperator::new(l);
    for axis in 0..dim {
        for sign in [-1, 1] {
            op.add_term(Shift::unit(dim, axis, sign), CoefficientProfile::uniform(dim, linalg::identity(1)))?;
        }
    }
    Ok(op.claim_hermitian())
}

/// Coin rotation R(θ) = [[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]].
pub fn coin(theta: f64) -> Matrix {
    let (s, c) = (0.5 * theta).sin_cos();
    linalg::real(2, &[c, -s, s, c])
}

fn coin_wall(left: f64, right: f64, width: f64) -> Result<CoefficientProfile> {
    let angle = move |x: i64| 0.5 * (left + right) + 0.5 * (right - left) * (x as f64 / width).tanh();
    CoefficientProfile::domain_wall(
        coin(left),
        coin(right),
        move |x| coin(angle(x)),
        Envelope::Exponential { scale: (right - left).abs(), rate: 2.0 / width },
    )
}

/// U = T↓ R(θ₂) T↑ R(θ₁) with T↑ moving the upper component one site to
/// the right and T↓ moving the lower component one site to the left.
pub fn split_step_walk_wall(
    theta1: (f64, f64),
    theta2: (f64, f64),
    width: f64,
) -> Result<InterfaceOperator> {
    let l = Lattice::new(1, 2)?;
    let uni = |m: Matrix| CoefficientProfile::uniform(1, m);
    let up = InterfaceOperator::from_terms(
        l,
        [(Shift(vec![1]), uni(linalg::unit(2, 0, 0))), (Shift(vec![0]), uni(linalg::unit(2, 1, 1)))],
    )?;
    let down = InterfaceOperator::from_terms(
        l,
        [(Shift(vec![0]), uni(linalg::unit(2, 0, 0))), (Shift(vec![-1]), uni(linalg::unit(2, 1, 1)))],
    )?;
    let r1 = InterfaceOperator::from_terms(l, [(Shift(vec![0]), coin_wall(theta1.0, theta1.1, width)?)])?;
    let r2 = InterfaceOperator::from_terms(l, [(Shift(vec![0]), coin_wall(theta2.0, theta2.1, width)?)])?;
    let u = down.compose(&r2)?.compose(&up)?.compose(&r1)?;
    Ok(u.claim_unitary())
}

fn tanh_value(left: f64, right: f64, width: f64) -> impl Fn(i64) -> f64 + Send + Sync + Clone {
    move |x| 0.5 * (left + right) + 0.5 * (right - left) * (x as f64 / width).tanh()
}

/// 2D Laplacian plus V(x₀), V a tanh wall from v_left to v_right.
pub fn cartesian_2d_wall(v_left: f64, v_right: f64, width: f64) -> Result<InterfaceOperator> {
    let s = |v: f64| linalg::scalar(1, c64::new(v, 0.0));
    let wall_1d = CoefficientProfile::domain_wall_tanh(s(v_left), s(v_right), width)?;
    let v = tanh_value(v_left, v_right, width);
    let potential = CoefficientProfile::cartesian(
        2,
        1,
        move |x| linalg::scalar(1, c64::new(v(x[0]), 0.0)),
        vec![
            [CoefficientProfile::uniform(1, s(v_left)), CoefficientProfile::uniform(1, s(v_right))],
            [wall_1d.clone(), wall_1d],
        ],
        Envelope::Exponential { scale: (v_right - v_left).abs(), rate: 2.0 / width },
    )?;
    let mut op = laplacian(2)?;
    op.add_term(Shift::zero(2), potential)?;
    Ok(op.claim_hermitian())
}

/// 2D Laplacian plus a·cos φ, with φ the polar angle of the site.
pub fn radial_2d(a: f64) -> Result<InterfaceOperator> {
    let potential = CoefficientProfile::radial(
        2,
        1,
        move |w| linalg::scalar(1, c64::new(a * w[0], 0.0)),
        |_| linalg::zeros(1),
        Envelope::Exponential { scale: 0.0, rate: 1.0 },
    )?;
    let mut op = laplacian(2)?;
    op.add_term(Shift::zero(2), potential)?;
    Ok(op.claim_hermitian())
}

/// Smooth bump on a cap: 1 at the center, 0 at and beyond the rim.
fn cap_bump(center: Vec<f64>, radius: f64, height: f64) -> SphereFn {
    Arc::new(move |w: &[f64]| {
        let u = crate::profile::angle_between(&center, w) / radius;
        let v = if u < 1.0 { (1.0 - 1.0 / (1.0 - u * u)).exp() } else { 0.0 };
        linalg::scalar(1, c64::new(height * v, 0.0))
    })
}

/// Chiral model H = [[0, A*], [A, 0]] with
/// A = m(x) + S_{e₀} + t₂(S_{e₁} + S_{−e₁}); m equals m_background away
/// from two opposite cones around ±e₀ and approaches m_cap_j inside.
pub fn cone_2d(m_background: f64, m_caps: [f64; 2], t2: f64, cap_radius: f64) -> Result<InterfaceOperator> {
    if cap_radius >= PI / 2.0 {
        return Err(Error::ModelParameters("cone_2d.cap_radius must be below pi/2".into()));
    }
    let centers = [vec![1.0, 0.0], vec![-1.0, 0.0]];
    let caps = centers
        .iter()
        .map(|c| Cap::new(c.clone(), cap_radius))
        .collect::<Result<Vec<_>>>()?;
    let fns = centers
        .iter()
        .zip(m_caps)
        .map(|(c, m)| cap_bump(c.clone(), cap_radius, m - m_background))
        .collect();
    let mass = CoefficientProfile::cone(
        2,
        1,
        caps,
        fns,
        linalg::scalar(1, c64::new(m_background, 0.0)),
        |_| linalg::zeros(1),
        Envelope::Exponential { scale: 0.0, rate: 1.0 },
    )?;
    let scalar = Lattice::new(2, 1)?;
    let one = || CoefficientProfile::uniform(2, linalg::identity(1));
    let hop = |t: f64| CoefficientProfile::uniform(2, linalg::scalar(1, c64::new(t, 0.0)));
    let a = InterfaceOperator::from_terms(
        scalar,
        [
            (Shift(vec![0, 0]), mass),
            (Shift(vec![1, 0]), one()),
            (Shift(vec![0, 1]), hop(t2)),
            (Shift(vec![0, -1]), hop(t2)),
        ],
    )?;
    let embed = |i: usize, j: usize| {
        Arc::new(move |m: &Matrix| linalg::scale(&linalg::unit(2, i, j), m[(0, 0)]))
            as Arc<dyn Fn(&Matrix) -> Matrix + Send + Sync>
    };
    let lower = a.map_fiber(embed(1, 0), 2)?;
    let upper = a.adjoint().map_fiber(embed(0, 1), 2)?;
    Ok(lower.add(&upper)?.claim_hermitian())
}

/// 1D Laplacian plus a·cos(c·√|x|), whose asymptotic range [−a, a] is
/// sampled at `samples` points.
pub fn vo_1d(a: f64, c: f64, samples: usize) -> Result<InterfaceOperator> {
    let range: Vec<Matrix> = (0..samples)
        .map(|k| {
            let t = if samples == 1 { 0.0 } else { PI * k as f64 / (samples - 1) as f64 };
            linalg::scalar(1, c64::new(a * t.cos(), 0.0))
        })
        .collect();
    let potential = CoefficientProfile::vanishing_oscillation(
        1,
        1,
        move |x| linalg::scalar(1, c64::new(a * (c * (x[0].unsigned_abs() as f64).sqrt()).cos(), 0.0)),
        range,
        // |f(x) − f(x−1)| ≤ a·c/(2√(|x|−1)) ≤ a·c/√|x| for |x| ≥ 2
        Envelope::Power { scale: a.abs() * c, exponent: 0.5 },
    )?;
    let mut op = laplacian(1)?;
    op.add_term(Shift::zero(1), potential)?;
    Ok(op.claim_hermitian())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_names() {
        let names: Vec<&str> = list().iter().map(|m| m.name).collect();
        assert_eq!(
            names,
            [
                "ssh_wall",
                "ssh_bulk",
                "split_step_walk_wall",
                "laplacian",
                "cartesian_2d_wall",
                "radial_2d",
                "cone_2d",
                "vo_1d"
            ]
        );
    }

    #[test]
    fn unknown_model_and_parameter() {
        assert!(matches!(build("nope", &Params::new()), Err(Error::UnknownModel(_))));
        let mut p = Params::new();
        p.insert("mass".into(), ParamValue::Number(1.0));
        assert!(matches!(build("ssh_bulk", &p), Err(Error::ModelParameters(_))));
    }

    #[test]
    fn gap_assertion_rejects_critical_mass() {
        let mut p = Params::new();
        p.insert("m_right".into(), ParamValue::Number(1.0));
        assert!(matches!(build("ssh_wall", &p), Err(Error::ModelParameters(_))));
        p.insert("assert_gap".into(), ParamValue::Bool(false));
        assert!(build("ssh_wall", &p).is_ok());
    }

    #[test]
    fn coin_is_rotation() {
        assert!(linalg::is_unitary(&coin(0.7), 1e-15));
    }
}
