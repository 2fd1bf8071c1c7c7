//! Pairs of envelopes of the mean-curvature-sphere congruence.
//!
//! A second envelope is written `Ŷ = N + 2aY_u + 2bY_v + (2ab + ½⟨ξ,ξ⟩)Y + ξ`
//! for functions `a, b` and a normal field `ξ = Σ ζ_α E_α`. Differentiating
//! gives
//!
//! ```text
//! Ŷ_u = bŶ + ρ₁(Y_u + bY) + θ₁(Y_v + aY) + η₁ + ⟨ξ,η₁⟩Y
//! Ŷ_v = aŶ + ρ₂(Y_v + aY) + θ₂(Y_u + bY) + η₂ + ⟨ξ,η₂⟩Y
//! ```
//!
//! and `Ŷ` envelopes the same congruence iff `η₁ = η₂ = 0`. The pair is then
//! dual S-Willmore (`θ = 0`, `ξ = 0`), a Darboux pair (`ρ = 0`) or trivial
//! (`θ = 0`, `ξ ≠ 0`, `Ŷ` a fixed point).

use rayon::prelude::*;
use serde::Deserialize;

use crate::conformal_frame::{frame_at_order, ConformalFrame};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pseudo_linear::{PseudoVector, Scalar, EPS_NULL};
use crate::surface_catalog::{parse_expr, Expr, SurfaceChart};
use crate::taylor_jets::Jet2;
use crate::JetVector;

/// Chart jet order used for pair computations.
pub const PAIR_ORDER: usize = 8;
/// Jet order of the coefficient tables sampled by the Darboux integrator.
pub const DARBOUX_TABLE_ORDER: usize = 4;
/// A Darboux line stops once `|a| + |b| + Σ|ζ_α|` exceeds this.
pub const BLOWUP_BOUND: f64 = 1e6;

/// Classification thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairThresholds {
    pub tau: f64,
    /// Threshold for the trivial-pair fixed-point witness.
    pub tau_fixed: f64,
    pub umbilic: f64,
}

impl Default for PairThresholds {
    fn default() -> Self {
        Self {
            tau: 1e-6,
            tau_fixed: 1e-6,
            umbilic: 1e-9,
        }
    }
}

/// Jet data of a candidate envelope at one point.
#[derive(Debug, Clone)]
pub struct PairJets {
    pub frame: ConformalFrame,
    pub a: Jet2,
    pub b: Jet2,
    pub zeta: Vec<Jet2>,
    pub xi: JetVector,
    pub rho1: Jet2,
    pub rho2: Jet2,
    pub theta1: Jet2,
    pub theta2: Jet2,
    pub eta1: JetVector,
    pub eta2: JetVector,
    pub yhat: JetVector,
}

impl PairJets {
    pub fn new(frame: ConformalFrame, a: Jet2, b: Jet2, zeta: Vec<Jet2>) -> Result<Self> {
        if zeta.len() != frame.rank() {
            return Err(Error::DimensionMismatch {
                expected: frame.rank(),
                got: zeta.len(),
            });
        }
        let f = &frame;
        let xi = f.from_coords(&zeta);
        let xx = xi.dot(&xi);
        let ki = f.kappa_inner();
        let rho1 = a.d_u() * 2.0 - &ki * 2.0 + &xx * 0.5;
        let rho2 = b.d_v() * 2.0 - &ki * 2.0 + &xx * 0.5;
        let theta1 = b.d_u() * 2.0 - &b * &b * 2.0 - &f.s1 - xi.dot(&f.kappa1) * 2.0;
        let theta2 = a.d_v() * 2.0 - &a * &a * 2.0 - &f.s2 - xi.dot(&f.kappa2) * 2.0;
        let eta1 = f
            .du(&xi)
            .axpy(&-&b, &xi)
            .add(&f.dv(&f.kappa1).scale(2.0))
            .axpy(&(&a * 2.0), &f.kappa1);
        let eta2 = f
            .dv(&xi)
            .axpy(&-&a, &xi)
            .add(&f.du(&f.kappa2).scale(2.0))
            .axpy(&(&b * 2.0), &f.kappa2);
        let ycoef = &a * &b * 2.0 + &xx * 0.5;
        let yhat = f
            .n
            .axpy(&(&a * 2.0), &f.y_u)
            .axpy(&(&b * 2.0), &f.y_v)
            .axpy(&ycoef, &f.y)
            .add(&xi);
        Ok(Self {
            a,
            b,
            zeta,
            xi,
            rho1,
            rho2,
            theta1,
            theta2,
            eta1,
            eta2,
            yhat,
            frame,
        })
    }

    /// Sup norms of `Ŷ_u` and `Ŷ_v` minus their expansions.
    pub fn expansion_residual(&self) -> f64 {
        let f = &self.frame;
        let (a, b) = (&self.a, &self.b);
        let line = |d: JetVector, own: &Jet2, other: &Jet2, rho: &Jet2, theta: &Jet2, same: &JetVector, cross: &JetVector, eta: &JetVector| {
            let expected = self
                .yhat
                .mul(own)
                .add(&same.axpy(own, &f.y).mul(rho))
                .add(&cross.axpy(other, &f.y).mul(theta))
                .add(eta)
                .axpy(&self.xi.dot(eta), &f.y);
            d.sub(&expected).values().sup_norm()
        };
        let ru = line(self.yhat.d_u(), b, a, &self.rho1, &self.theta1, &f.y_u, &f.y_v, &self.eta1);
        let rv = line(self.yhat.d_v(), a, b, &self.rho2, &self.theta2, &f.y_v, &f.y_u, &self.eta2);
        ru.max(rv)
    }

    fn summarize(&self, th: PairThresholds) -> PairPoint {
        let f = &self.frame;
        let half = |j: &Jet2| j * 0.5;
        let iso = self
            .xi
            .mul(&half(&self.a.d_u()))
            .sub(&f.kappa2.mul(&half(&self.theta1)))
            .sub(&self.xi.mul(&half(&self.b.d_v())))
            .add(&f.kappa1.mul(&half(&self.theta2)));
        let id_theta1 = (self.theta1.d_v() - self.rho2.d_u() + &self.b * &self.rho2 * 2.0).value();
        let id_theta2 = (self.theta2.d_u() - self.rho1.d_v() + &self.a * &self.rho1 * 2.0).value();

        let yhat_uu = self.yhat.d_u().d_u();
        let yhat_vv = self.yhat.d_v().d_v();
        let khat1 = f.normal_part(&yhat_uu);
        let khat2 = f.normal_part(&yhat_vv);
        let ratio = |khat: &JetVector, kappa: &JetVector| {
            let kk = plus_dot(f, kappa, kappa);
            (kk.sqrt() > th.umbilic).then(|| plus_dot(f, khat, kappa) / kk)
        };
        let kappa_hat_residual = f
            .plus_norm(&khat1.sub(&f.kappa1.mul(&self.rho1)))
            .max(f.plus_norm(&khat2.sub(&f.kappa2.mul(&self.rho2))));

        let yhat = self.yhat.values();
        let proj = |d: PseudoVector| {
            let c = euclid(&d, &yhat) / euclid(&yhat, &yhat);
            d.sub(&yhat.scale(c)).sup_norm() / yhat.sup_norm()
        };
        let projective = proj(self.yhat.d_u().values()).max(proj(self.yhat.d_v().values()));
        let fixed_direction = (self.rho1.value().abs() > th.tau).then(|| {
            match self.rho1.recip() {
                Ok(inv) => {
                    let w = self.yhat.mul(&inv).sub(&f.y);
                    let ru = w.d_u().axpy(&self.b, &w).values().sup_norm();
                    let rv = w.d_v().axpy(&self.a, &w).values().sup_norm();
                    ru.max(rv)
                }
                Err(_) => f64::INFINITY,
            }
        });

        PairPoint {
            u: f.u,
            v: f.v,
            a: self.a.value(),
            b: self.b.value(),
            zeta: self.zeta.iter().map(Jet2::value).collect(),
            xi_norm: f.plus_norm(&self.xi),
            rho1: self.rho1.value(),
            rho2: self.rho2.value(),
            theta1: self.theta1.value(),
            theta2: self.theta2.value(),
            eta1: f.plus_norm(&self.eta1),
            eta2: f.plus_norm(&self.eta2),
            yhat: yhat.coords().to_vec(),
            y_pairing: (self.yhat.dot(&f.y).value() + 1.0).abs(),
            yhat_null: self.yhat.dot(&self.yhat).value().abs(),
            expansion: self.expansion_residual(),
            isothermic_identity: f.plus_norm(&iso),
            theta1_identity: id_theta1.abs(),
            theta2_identity: id_theta2.abs(),
            kappa_hat_ratio: [ratio(&khat1, &f.kappa1), ratio(&khat2, &f.kappa2)],
            kappa_hat_residual,
            projective,
            fixed_direction,
            reconstruction: None,
        }
    }
}

fn euclid(a: &PseudoVector, b: &PseudoVector) -> f64 {
    a.coords().iter().zip(b.coords()).map(|(x, y)| x * y).sum()
}

fn plus_dot(f: &ConformalFrame, a: &JetVector, b: &JetVector) -> f64 {
    let (a, b) = (a.values(), b.values());
    f.e.iter()
        .map(|e| {
            let ev = e.vector.values();
            a.dot(&ev) * b.dot(&ev)
        })
        .sum()
}

/// Value-level summary of a pair at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPoint {
    pub u: f64,
    pub v: f64,
    pub a: f64,
    pub b: f64,
    pub zeta: Vec<f64>,
    pub xi_norm: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub yhat: Vec<f64>,
    /// `|⟨Ŷ,Y⟩ + 1|`
    pub y_pairing: f64,
    /// `|⟨Ŷ,Ŷ⟩|`
    pub yhat_null: f64,
    pub expansion: f64,
    /// `‖(a_u/2)ξ − (θ₁/2)κ₂ − (b_v/2)ξ + (θ₂/2)κ₁‖`
    pub isothermic_identity: f64,
    /// `|θ₁_v − ρ₂_u + 2bρ₂|`
    pub theta1_identity: f64,
    /// `|θ₂_u − ρ₁_v + 2aρ₁|`
    pub theta2_identity: f64,
    /// `κ̂ᵢ/κᵢ` from the normal part of `Ŷ_uu`, `Ŷ_vv`.
    pub kappa_hat_ratio: [Option<f64>; 2],
    /// `max ‖κ̂ᵢ − ρᵢκᵢ‖`
    pub kappa_hat_residual: f64,
    /// Relative size of the part of `Ŷ_u`, `Ŷ_v` not along `Ŷ`.
    pub projective: f64,
    /// `max(‖W_u + bW‖, ‖W_v + aW‖)` for `W = Ŷ/ρ₁ − Y`, when `ρ₁ ≠ 0`.
    pub fixed_direction: Option<f64>,
    /// `‖Ŷ − P/β‖` for pairs built from a fixed point.
    pub reconstruction: Option<f64>,
}

/// A candidate pair on a grid; `None` marks points the construction skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct PairData {
    pub grid: Grid,
    pub points: Vec<Option<PairPoint>>,
    pub thresholds: PairThresholds,
}

impl PairData {
    fn sup(&self, f: impl Fn(&PairPoint) -> f64) -> f64 {
        self.points.iter().flatten().fold(0.0f64, |m, p| m.max(f(p)))
    }

    pub fn retained(&self) -> usize {
        self.points.iter().flatten().count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairLabel {
    DualSWillmore,
    IsothermicDarboux,
    Trivial,
    NotEnvelope,
    Indeterminate,
}

impl PairLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PairLabel::DualSWillmore => "DualSWillmore",
            PairLabel::IsothermicDarboux => "IsothermicDarboux",
            PairLabel::Trivial => "Trivial",
            PairLabel::NotEnvelope => "NotEnvelope",
            PairLabel::Indeterminate => "Indeterminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairClassification {
    pub label: PairLabel,
    pub residuals: Vec<(&'static str, f64)>,
    pub witness: Vec<(&'static str, f64)>,
}

impl PairClassification {
    pub fn residual(&self, name: &str) -> Option<f64> {
        self.residuals.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    pub fn witness(&self, name: &str) -> Option<f64> {
        self.witness.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

/// Assign one of the five labels.
///
/// The trivial stratum is tested before the Darboux one: a fixed point has
/// `ρ = θ = 0` as well, and only `ξ ≠ 0` tells it apart.
pub fn classify(pair: &PairData) -> PairClassification {
    let th = pair.thresholds;
    let eta = pair.sup(|p| p.eta1.max(p.eta2));
    let theta = pair.sup(|p| p.theta1.abs().max(p.theta2.abs()));
    let xi = pair.sup(|p| p.xi_norm);
    let rho = pair.sup(|p| p.rho1.abs().max(p.rho2.abs()));
    let residuals = vec![
        ("eta", eta),
        ("theta", theta),
        ("xi", xi),
        ("rho", rho),
        ("rho_difference", pair.sup(|p| (p.rho1 - p.rho2).abs())),
        ("expansion", pair.sup(|p| p.expansion)),
        ("y_pairing", pair.sup(|p| p.y_pairing)),
        ("yhat_null", pair.sup(|p| p.yhat_null)),
        ("isothermic_identity", pair.sup(|p| p.isothermic_identity)),
        ("theta1_identity", pair.sup(|p| p.theta1_identity)),
        ("theta2_identity", pair.sup(|p| p.theta2_identity)),
    ];
    let label = if eta > th.tau {
        PairLabel::NotEnvelope
    } else if theta <= th.tau && xi <= th.tau {
        PairLabel::DualSWillmore
    } else if theta <= th.tau {
        PairLabel::Trivial
    } else if rho <= th.tau {
        PairLabel::IsothermicDarboux
    } else {
        PairLabel::Indeterminate
    };
    let mut witness = Vec::new();
    match label {
        PairLabel::DualSWillmore => {
            let ratio_error = pair.sup(|p| {
                let e1 = p.kappa_hat_ratio[0].map_or(0.0, |r| (r - p.rho1).abs());
                let e2 = p.kappa_hat_ratio[1].map_or(0.0, |r| (r - p.rho2).abs());
                e1.max(e2)
            });
            witness.push(("kappa_hat_ratio_error", ratio_error));
            witness.push(("kappa_hat_residual", pair.sup(|p| p.kappa_hat_residual)));
        }
        PairLabel::Trivial => {
            witness.push(("rho_difference", pair.sup(|p| (p.rho1 - p.rho2).abs())));
            let fixed = pair.points.iter().flatten().all(|p| p.fixed_direction.is_some());
            if fixed {
                witness.push(("fixed_direction", pair.sup(|p| p.fixed_direction.unwrap_or(0.0))));
            }
            witness.push(("projective", pair.sup(|p| p.projective)));
            if pair.points.iter().flatten().any(|p| p.reconstruction.is_some()) {
                witness.push(("reconstruction", pair.sup(|p| p.reconstruction.unwrap_or(0.0))));
            }
        }
        PairLabel::IsothermicDarboux => {
            witness.push(("theta1_spread", spread(pair, |p| p.theta1)));
            witness.push(("theta2_spread", spread(pair, |p| p.theta2)));
        }
        _ => {}
    }
    PairClassification {
        label,
        residuals,
        witness,
    }
}

fn spread(pair: &PairData, f: impl Fn(&PairPoint) -> f64) -> f64 {
    let vals: Vec<f64> = pair.points.iter().flatten().map(f).collect();
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min
}

/// Closed-form fields `a(u,v)`, `b(u,v)`, `ζ_α(u,v)`.
#[derive(Debug, Clone)]
pub struct FieldExprs {
    pub a: Expr,
    pub b: Expr,
    pub xi: Vec<Expr>,
}

impl FieldExprs {
    pub fn parse(a: &str, b: &str, xi: &[&str], chart: &SurfaceChart) -> Result<Self> {
        Ok(Self {
            a: parse_expr(a, &chart.params)?,
            b: parse_expr(b, &chart.params)?,
            xi: xi.iter().map(|x| parse_expr(x, &chart.params)).collect::<Result<_>>()?,
        })
    }
}

/// Field expressions as written in a config `[fields]` table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct FieldText {
    pub a: String,
    pub b: String,
    #[serde(default)]
    pub xi: Vec<String>,
}

impl FieldText {
    pub fn compile(&self, chart: &SurfaceChart) -> Result<FieldExprs> {
        let xi: Vec<&str> = self.xi.iter().map(String::as_str).collect();
        FieldExprs::parse(&self.a, &self.b, &xi, chart)
    }
}

/// The `[pair]` table of a config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSection {
    pub mode: Option<String>,
    pub theta: Option<f64>,
    pub sign: Option<i8>,
    pub init: Option<Vec<f64>>,
    #[serde(rename = "P")]
    pub point: Option<Vec<f64>>,
}

/// Pair settings carried alongside a chart config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairConfig {
    pub pair: PairSection,
    pub fields: Option<FieldText>,
}

impl PairConfig {
    /// Read the `[pair]` and `[fields]` tables, ignoring the chart keys.
    pub fn parse(config_text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            #[serde(default)]
            pair: PairSection,
            fields: Option<FieldText>,
        }
        let raw: Raw = toml::from_str(config_text).map_err(|e| Error::Config(e.message().to_string()))?;
        Ok(Self {
            pair: raw.pair,
            fields: raw.fields,
        })
    }
}

type FieldJets = (Jet2, Jet2, Vec<Jet2>);

fn build_with(
    chart: &SurfaceChart,
    grid: &Grid,
    order: usize,
    th: PairThresholds,
    fields: impl Fn(usize, &ConformalFrame) -> Result<Option<FieldJets>> + Sync,
    extra: impl Fn(&PairJets, &mut PairPoint) + Sync,
) -> Result<PairData> {
    let points = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (u, v) = grid.point(k);
            let frame = frame_at_order(chart, u, v, order)?;
            let Some((a, b, zeta)) = fields(k, &frame)? else {
                return Ok(None);
            };
            let jets = PairJets::new(frame, a, b, zeta)?;
            let mut p = jets.summarize(th);
            extra(&jets, &mut p);
            Ok(Some(p))
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(PairData {
        grid: *grid,
        points,
        thresholds: th,
    })
}

/// Pair from closed-form fields.
pub fn build_pair(chart: &SurfaceChart, fields: &FieldExprs, grid: &Grid, th: PairThresholds) -> Result<PairData> {
    build_pair_order(chart, fields, grid, th, PAIR_ORDER)
}

pub fn build_pair_order(
    chart: &SurfaceChart,
    fields: &FieldExprs,
    grid: &Grid,
    th: PairThresholds,
    order: usize,
) -> Result<PairData> {
    if fields.xi.len() != chart.normal_rank() {
        return Err(Error::DimensionMismatch {
            expected: chart.normal_rank(),
            got: fields.xi.len(),
        });
    }
    build_with(
        chart,
        grid,
        order,
        th,
        |_, f| {
            let (ju, jv) = chart.coordinate_jets(f.u, f.v, order);
            let a = fields.a.eval(&ju, &jv)?;
            let b = fields.b.eval(&ju, &jv)?;
            let xi = fields.xi.iter().map(|e| e.eval(&ju, &jv)).collect::<Result<Vec<_>>>()?;
            Ok(Some((a, b, xi)))
        },
        |_, _| {},
    )
}

/// `a = −⟨D_vκ₁,κ₁⟩/⟨κ₁,κ₁⟩`, `b = −⟨D_uκ₂,κ₂⟩/⟨κ₂,κ₂⟩`; for a rank-one
/// normal bundle this is `a = −k₁_v/k₁`, `b = −k₂_u/k₂`.
pub fn dual_fields(f: &ConformalFrame) -> Result<(Jet2, Jet2)> {
    let k11 = f.kappa1.dot(&f.kappa1);
    let k22 = f.kappa2.dot(&f.kappa2);
    let a = -(f.dv(&f.kappa1).dot(&f.kappa1).div(&k11)?);
    let b = -(f.du(&f.kappa2).dot(&f.kappa2).div(&k22)?);
    Ok((a, b))
}

/// The dual envelope with `ξ = 0`.
pub fn dual_pair(chart: &SurfaceChart, grid: &Grid, th: PairThresholds) -> Result<PairData> {
    dual_pair_order(chart, grid, th, PAIR_ORDER)
}

pub fn dual_pair_order(chart: &SurfaceChart, grid: &Grid, th: PairThresholds, order: usize) -> Result<PairData> {
    let umbilic: Vec<(f64, f64)> = grid
        .try_map(|u, v| {
            let f = frame_at_order(chart, u, v, 4)?;
            Ok(f.plus_norm(&f.kappa1).min(f.plus_norm(&f.kappa2)) < th.umbilic)
        })?
        .into_iter()
        .enumerate()
        .filter(|(_, z)| *z)
        .map(|(k, _)| grid.point(k))
        .collect();
    if !umbilic.is_empty() {
        return Err(Error::UmbilicPoints(umbilic));
    }
    build_with(
        chart,
        grid,
        order,
        th,
        |_, f| {
            let (a, b) = dual_fields(f)?;
            let zeta = vec![Jet2::zero(a.order()); f.rank()];
            Ok(Some((a, b, zeta)))
        },
        |_, _| {},
    )
}

/// The constant envelope `Ŷ = P/β`, `β = −⟨Y,P⟩`.
pub fn trivial_from_point(chart: &SurfaceChart, p: &PseudoVector, grid: &Grid, th: PairThresholds) -> Result<PairData> {
    if p.signature() != chart.ambient() {
        return Err(Error::SignatureMismatch(p.signature().to_string(), chart.ambient().to_string()));
    }
    if !p.is_null(EPS_NULL) {
        return Err(Error::Precondition(format!(
            "fixed point must be null, ⟨P,P⟩ = {:e}",
            p.self_inner()
        )));
    }
    let order = PAIR_ORDER;
    let pj = p.to_jets(order);
    let beta_of = |f: &ConformalFrame| -> Jet2 { -f.y.dot(&pj.truncate(f.y.order())) };
    build_with(
        chart,
        grid,
        order,
        th,
        |_, f| {
            let beta = beta_of(f);
            let scale = f.y.values().sup_norm() * p.sup_norm();
            if beta.value().abs() <= 1e-8 * scale {
                return Err(Error::PolarHyperplane { u: f.u, v: f.v });
            }
            let inv = beta.recip()?;
            let pl = pj.truncate(f.y.order());
            let a = pl.dot(&f.y_v) * &inv;
            let b = pl.dot(&f.y_u) * &inv;
            let zeta = f.e.iter().map(|e| pl.dot(&e.vector) * e.sign * &inv).collect();
            Ok(Some((a, b, zeta)))
        },
        |jets, point| {
            let f = &jets.frame;
            let beta = beta_of(f).value();
            let target = p.scale(1.0 / beta);
            point.reconstruction = Some(jets.yhat.values().sub(&target).sup_norm());
        },
    )
}

/// Frame coefficients entering the Darboux system.
#[derive(Debug, Clone)]
struct DarbouxCoef<T> {
    ki: T,
    s1: T,
    s2: T,
    k1: Vec<T>,
    k2: Vec<T>,
    dvk1: Vec<T>,
    duk2: Vec<T>,
    gu: Vec<Vec<T>>,
    gv: Vec<Vec<T>>,
    signs: Vec<f64>,
}

impl DarbouxCoef<Jet2> {
    fn from_frame(f: &ConformalFrame) -> Self {
        let r = f.rank();
        Self {
            ki: f.kappa_inner(),
            s1: f.s1.clone(),
            s2: f.s2.clone(),
            k1: f.coords(&f.kappa1),
            k2: f.coords(&f.kappa2),
            dvk1: f.coords(&f.dv(&f.kappa1)),
            duk2: f.coords(&f.du(&f.kappa2)),
            gu: (0..r).map(|a| (0..r).map(|b| f.d_conn[a][b][0].clone()).collect()).collect(),
            gv: (0..r).map(|a| (0..r).map(|b| f.d_conn[a][b][1].clone()).collect()).collect(),
            signs: f.e.iter().map(|e| e.sign).collect(),
        }
    }

    fn values(&self) -> DarbouxCoef<f64> {
        let v = |x: &[Jet2]| x.iter().map(Jet2::value).collect::<Vec<_>>();
        DarbouxCoef {
            ki: self.ki.value(),
            s1: self.s1.value(),
            s2: self.s2.value(),
            k1: v(&self.k1),
            k2: v(&self.k2),
            dvk1: v(&self.dvk1),
            duk2: v(&self.duk2),
            gu: self.gu.iter().map(|r| v(r)).collect(),
            gv: self.gv.iter().map(|r| v(r)).collect(),
            signs: self.signs.clone(),
        }
    }
}

/// Right-hand sides of `(a, b, ζ)_u` and `(a, b, ζ)_v` with `ρ = 0`, `η = 0`,
/// `θ₁ = θ`, `θ₂ = ±θ`.
fn darboux_rhs<T: Scalar>(s: &[T], c: &DarbouxCoef<T>, theta1: f64, theta2: f64, along_u: bool) -> Vec<T> {
    let (a, b, zeta) = (&s[0], &s[1], &s[2..]);
    let like = a;
    let pair = |x: &[T], y: &[T]| {
        x.iter()
            .zip(y)
            .zip(&c.signs)
            .fold(T::constant_like(0.0, like), |acc, ((p, q), sg)| acc.add(&p.mul(q).scale(*sg)))
    };
    let xx = pair(zeta, zeta);
    let quarter = c.ki.sub(&xx.scale(0.25));
    let r = zeta.len();
    let conn = |g: &Vec<Vec<T>>, alpha: usize| {
        (0..r).fold(T::constant_like(0.0, like), |acc, beta| acc.add(&g[alpha][beta].mul(&zeta[beta])))
    };
    let mut out = Vec::with_capacity(s.len());
    if along_u {
        let xk = pair(zeta, &c.k1);
        out.push(quarter);
        out.push(
            T::constant_like(theta1, like)
                .add(&b.mul(b).scale(2.0))
                .add(&c.s1)
                .add(&xk.scale(2.0))
                .scale(0.5),
        );
        for alpha in 0..r {
            out.push(
                b.mul(&zeta[alpha])
                    .sub(&c.dvk1[alpha].scale(2.0))
                    .sub(&a.mul(&c.k1[alpha]).scale(2.0))
                    .sub(&conn(&c.gu, alpha)),
            );
        }
    } else {
        let xk = pair(zeta, &c.k2);
        out.push(
            T::constant_like(theta2, like)
                .add(&a.mul(a).scale(2.0))
                .add(&c.s2)
                .add(&xk.scale(2.0))
                .scale(0.5),
        );
        out.push(quarter);
        for alpha in 0..r {
            out.push(
                a.mul(&zeta[alpha])
                    .sub(&c.duk2[alpha].scale(2.0))
                    .sub(&b.mul(&c.k2[alpha]).scale(2.0))
                    .sub(&conn(&c.gv, alpha)),
            );
        }
    }
    out
}

/// Jets of `(a, b, ζ)` at one point solving the Darboux system to the
/// frame's order, from their values.
fn darboux_jets(f: &ConformalFrame, state: &[f64], theta1: f64, theta2: f64) -> FieldJets {
    let c = DarbouxCoef::from_frame(f);
    let order = f.order - 3;
    let mut s: Vec<Jet2> = state.iter().map(|x| Jet2::constant(*x, order)).collect();
    for _ in 0..=order {
        let fu = darboux_rhs(&s, &c, theta1, theta2, true);
        let fv = darboux_rhs(&s, &c, theta1, theta2, false);
        s = (0..s.len())
            .map(|m| {
                Jet2::from_fn(order, |i, j| {
                    if i == 0 && j == 0 {
                        state[m]
                    } else if i >= 1 {
                        fu[m].coeff(i - 1, j) / i as f64
                    } else {
                        fv[m].coeff(0, j - 1) / j as f64
                    }
                })
            })
            .collect();
    }
    let zeta = s.split_off(2);
    let b = s.pop().expect("state has a and b");
    let a = s.pop().expect("state has a and b");
    (a, b, zeta)
}

type State = Option<Vec<f64>>;

fn blown_up(s: &[f64]) -> bool {
    let size: f64 = s.iter().map(|x| x.abs()).sum();
    !size.is_finite() || size > BLOWUP_BOUND
}

fn rk4_step(
    s: &[f64],
    h: f64,
    c0: &DarbouxCoef<f64>,
    cm: &DarbouxCoef<f64>,
    c1: &DarbouxCoef<f64>,
    th: (f64, f64),
    along_u: bool,
) -> Vec<f64> {
    let rhs = |x: &[f64], c: &DarbouxCoef<f64>| darboux_rhs(x, c, th.0, th.1, along_u);
    let shift = |x: &[f64], k: &[f64], t: f64| x.iter().zip(k).map(|(a, b)| a + t * b).collect::<Vec<_>>();
    let k1 = rhs(s, c0);
    let k2 = rhs(&shift(s, &k1, h / 2.0), cm);
    let k3 = rhs(&shift(s, &k2, h / 2.0), cm);
    let k4 = rhs(&shift(s, &k3, h), c1);
    (0..s.len())
        .map(|m| s[m] + h / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]))
        .collect()
}

/// Integrate one line of `n` nodes; `coef(k)` is the node table and
/// `mid(k)` the half-step table between nodes `k` and `k + 1`.
fn integrate_line<'a>(
    start: State,
    n: usize,
    h: f64,
    coef: impl Fn(usize) -> &'a DarbouxCoef<f64>,
    mid: impl Fn(usize) -> &'a DarbouxCoef<f64>,
    th: (f64, f64),
    along_u: bool,
) -> Vec<State> {
    let mut out = Vec::with_capacity(n);
    let mut cur = start;
    out.push(cur.clone());
    for k in 0..n - 1 {
        cur = cur.and_then(|s| {
            let next = rk4_step(&s, h, coef(k), mid(k), coef(k + 1), th, along_u);
            (!blown_up(&next)).then_some(next)
        });
        out.push(cur.clone());
    }
    out
}

/// Output of [`darboux_integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct DarbouxResult {
    pub pair: PairData,
    /// Sup over the grid of the difference between the two sweep orders.
    pub compatibility: f64,
    /// Points lost to blow-up in either sweep order.
    pub blown_up: usize,
    pub theta: f64,
    pub sign: i8,
}

/// Integrate the Darboux system for spectral parameter `theta` from
/// `(a₀, b₀, ζ₀)` at the `(u₀, v₀)` corner of `grid`.
///
/// `sign` is the isothermic type, fixing `θ₂ = sign·θ`.
pub fn darboux_integrate(
    chart: &SurfaceChart,
    theta: f64,
    sign: i8,
    init: &[f64],
    grid: &Grid,
    th: PairThresholds,
) -> Result<DarbouxResult> {
    let rank = chart.normal_rank();
    if init.len() != 2 + rank {
        return Err(Error::DimensionMismatch {
            expected: 2 + rank,
            got: init.len(),
        });
    }
    let thetas = (theta, sign as f64 * theta);
    let (nu, nv) = (grid.nu, grid.nv);
    let (hu, hv) = (grid.hu(), grid.hv());
    let sample = |u: f64, v: f64| -> Result<DarbouxCoef<f64>> {
        Ok(DarbouxCoef::from_frame(&frame_at_order(chart, u, v, DARBOUX_TABLE_ORDER)?).values())
    };
    let table = |n1: usize, n2: usize, at: &(dyn Fn(usize, usize) -> (f64, f64) + Sync)| -> Result<Vec<DarbouxCoef<f64>>> {
        (0..n1 * n2)
            .into_par_iter()
            .map(|k| {
                let (u, v) = at(k / n2, k % n2);
                sample(u, v)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    };
    let nodes = table(nu, nv, &|i, j| (grid.u(i), grid.v(j)))?;
    let umid = table(nu - 1, nv, &|i, j| (grid.u(i) + hu / 2.0, grid.v(j)))?;
    let vmid = table(nu, nv - 1, &|i, j| (grid.u(i), grid.v(j) + hv / 2.0))?;
    let node = |i: usize, j: usize| &nodes[i * nv + j];

    let u_then_v = || -> Vec<State> {
        let edge = integrate_line(Some(init.to_vec()), nu, hu, |i| node(i, 0), |i| &umid[i * nv], thetas, true);
        let cols: Vec<Vec<State>> = (0..nu)
            .into_par_iter()
            .map(|i| integrate_line(edge[i].clone(), nv, hv, |j| node(i, j), |j| &vmid[i * (nv - 1) + j], thetas, false))
            .collect();
        (0..nu * nv).map(|k| cols[k / nv][k % nv].clone()).collect()
    };
    let v_then_u = || -> Vec<State> {
        let edge = integrate_line(Some(init.to_vec()), nv, hv, |j| node(0, j), |j| &vmid[j], thetas, false);
        let rows: Vec<Vec<State>> = (0..nv)
            .into_par_iter()
            .map(|j| integrate_line(edge[j].clone(), nu, hu, |i| node(i, j), |i| &umid[i * nv + j], thetas, true))
            .collect();
        (0..nu * nv).map(|k| rows[k % nv][k / nv].clone()).collect()
    };
    let (first, second) = rayon::join(u_then_v, v_then_u);

    let mut compatibility = 0.0f64;
    let mut lost = 0;
    for (x, y) in first.iter().zip(&second) {
        match (x, y) {
            (Some(x), Some(y)) => {
                for (p, q) in x.iter().zip(y) {
                    compatibility = compatibility.max((p - q).abs());
                }
            }
            _ => lost += 1,
        }
    }
    let pair = build_with(
        chart,
        grid,
        PAIR_ORDER,
        th,
        |k, f| Ok(first[k].as_ref().map(|s| darboux_jets(f, s, thetas.0, thetas.1))),
        |_, _| {},
    )?;
    Ok(DarbouxResult {
        pair,
        compatibility,
        blown_up: lost,
        theta,
        sign,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface_catalog::catalog_chart;
    use approx::assert_abs_diff_eq;

    fn chart(name: &str) -> SurfaceChart {
        catalog_chart(name).unwrap()
    }

    #[test]
    fn pair_config_tables() {
        let text = "source = \"R31\"\n[pair]\nmode = \"darboux\"\ntheta = 1.0\ninit = [0.0, 0.0, 0.0]\n[fields]\na = \"u\"\nb = \"0\"\n";
        let cfg = PairConfig::parse(text).unwrap();
        assert_eq!(cfg.pair.mode.as_deref(), Some("darboux"));
        assert_eq!(cfg.pair.init, Some(vec![0.0; 3]));
        assert_eq!(cfg.fields.unwrap().xi, Vec::<String>::new());
        assert!(PairConfig::parse("[pair]\nthetta = 1\n").is_err());
        assert_eq!(PairConfig::parse("source = \"R31\"").unwrap(), PairConfig::default());
    }

    fn small(c: &SurfaceChart) -> Grid {
        Grid::interior(c.domain, 4, 4, 0.1).unwrap()
    }

    #[test]
    fn clifford_zero_fields() {
        let c = chart("clifford_s31");
        let fields = FieldExprs::parse("0", "0", &["0"], &c).unwrap();
        let pair = build_pair(&c, &fields, &small(&c), PairThresholds::default()).unwrap();
        for p in pair.points.iter().flatten() {
            assert!(p.theta1.abs() < 1e-12 && p.theta2.abs() < 1e-12);
            assert_abs_diff_eq!(p.rho1, -0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(p.rho2, -0.5, epsilon = 1e-12);
            assert!(p.expansion < 1e-10);
        }
        let cls = classify(&pair);
        assert_eq!(cls.label, PairLabel::DualSWillmore);
        assert!(cls.witness("kappa_hat_ratio_error").unwrap() < 1e-8);
    }

    #[test]
    fn cylinder_zero_fields_indeterminate() {
        let c = chart("cylinder_r31");
        let fields = FieldExprs::parse("0", "0", &["0"], &c).unwrap();
        let pair = build_pair(&c, &fields, &small(&c), PairThresholds::default()).unwrap();
        let p = pair.points[0].as_ref().unwrap();
        assert_abs_diff_eq!(p.theta1, -0.25, epsilon = 1e-12);
        assert!(p.eta1 < 1e-12);
        assert_eq!(classify(&pair).label, PairLabel::Indeterminate);
    }

    #[test]
    fn expansion_holds_for_arbitrary_fields() {
        let c = chart("nullsum_minimal_r31");
        let fields = FieldExprs::parse("sin(u)*v", "u^2 - v/3", &["cos(u+2*v)/4"], &c).unwrap();
        let pair = build_pair(&c, &fields, &small(&c), PairThresholds::default()).unwrap();
        for p in pair.points.iter().flatten() {
            assert!(p.expansion < 1e-8, "{}", p.expansion);
            assert!(p.y_pairing < 1e-10 && p.yhat_null < 1e-10);
        }
        assert_eq!(classify(&pair).label, PairLabel::NotEnvelope);
    }

    #[test]
    fn dual_pairs() {
        let th = PairThresholds::default();
        let c = chart("clifford_s31");
        let pair = dual_pair(&c, &small(&c), th).unwrap();
        assert!(pair.points.iter().flatten().all(|p| p.a.abs() < 1e-12 && p.b.abs() < 1e-12));
        assert_eq!(classify(&pair).label, PairLabel::DualSWillmore);

        let c = chart("cylinder_r31");
        assert_eq!(classify(&dual_pair(&c, &small(&c), th).unwrap()).label, PairLabel::Indeterminate);

        let c = chart("nullsum_minimal_r31");
        let pair = dual_pair(&c, &small(&c), th).unwrap();
        let cls = classify(&pair);
        assert!(cls.residual("rho").unwrap() < 1e-8, "{cls:?}");
        assert!(cls.residual("theta1_identity").unwrap() < 1e-6);

        let c = chart("plane_r31");
        assert!(matches!(dual_pair(&c, &small(&c), th), Err(Error::UmbilicPoints(_))));
    }

    #[test]
    fn trivial_pair_on_cylinder() {
        let c = chart("cylinder_r31");
        let p = PseudoVector::from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0], c.ambient()).unwrap();
        let grid = Grid::new(5, 5, [0.0, 1.0, 0.0, 1.0]).unwrap();
        let pair = trivial_from_point(&c, &p, &grid, PairThresholds::default()).unwrap();
        let cls = classify(&pair);
        assert_eq!(cls.label, PairLabel::Trivial, "{cls:?}");
        assert!(cls.residual("theta").unwrap() < 1e-8);
        assert!(cls.witness("projective").unwrap() < 1e-8);
        assert!(cls.witness("reconstruction").unwrap() < 1e-10);
    }

    #[test]
    fn trivial_rejects_spacelike() {
        let c = chart("cylinder_r31");
        let p = PseudoVector::from_slice(&[1.0, 0.0, 0.0, 0.0, 0.0], c.ambient()).unwrap();
        let grid = Grid::new(3, 3, [0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            trivial_from_point(&c, &p, &grid, PairThresholds::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn darboux_on_cylinder() {
        let c = chart("cylinder_r31");
        let grid = Grid::new(11, 11, [0.0, 1.0, 0.0, 1.0]).unwrap();
        let r = darboux_integrate(&c, 1.0, 1, &[0.0, 0.0, 0.0], &grid, PairThresholds::default()).unwrap();
        assert!(r.compatibility < 1e-5, "{}", r.compatibility);
        assert_eq!(r.blown_up, 0);
        let cls = classify(&r.pair);
        assert_eq!(cls.label, PairLabel::IsothermicDarboux, "{cls:?}");
        assert!(cls.residual("isothermic_identity").unwrap() < 1e-6, "{cls:?}");
    }

    #[test]
    fn darboux_theta_zero_is_trivial() {
        let c = chart("cylinder_r31");
        let grid = Grid::new(6, 6, [0.0, 0.5, 0.0, 0.5]).unwrap();
        let r = darboux_integrate(&c, 0.0, 1, &[0.0, 0.0, 0.3], &grid, PairThresholds::default()).unwrap();
        let cls = classify(&r.pair);
        assert_eq!(cls.label, PairLabel::Trivial, "{cls:?}");
    }

    #[test]
    fn blow_up_is_reported() {
        let c = chart("cylinder_r31");
        let grid = Grid::new(6, 6, [0.0, 1.0, 0.0, 1.0]).unwrap();
        let r = darboux_integrate(&c, 1.0, 1, &[0.0, 5e5, 0.0], &grid, PairThresholds::default()).unwrap();
        assert!(r.blown_up > 0);
        assert!(r.pair.retained() < grid.len());
    }
}
