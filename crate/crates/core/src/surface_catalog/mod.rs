//! Timelike surface charts in asymptotic coordinates and their light-cone
//! lifts.
//!
//! A chart lives in one of the Lorentzian space forms `R³₁`, `S³₁ ⊂ R⁴₁`,
//! `H³₁ ⊂ R⁴₂`, or directly on the light cone of some `R^m_s`. Each space
//! form is embedded into the light cone of `R⁵₂`:
//!
//! * `R³₁`: `x ↦ ((−1+⟨x,x⟩)/2, x, (1+⟨x,x⟩)/2)`
//! * `S³₁`: `x ↦ (x, 1)`
//! * `H³₁`: `x ↦ (1, x)`
//!
//! When a chart has `⟨x_u,x_v⟩ < 0` the second coordinate is reversed and
//! all derivatives are taken with respect to `w = −v`; the chart records
//! this in [`SurfaceChart::v_flipped`].

pub mod expr;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::pseudo_linear::{MetricSignature, PseudoVector};
use crate::taylor_jets::Jet2;
use crate::JetVector;
pub use expr::{parse_expr, Expr};

/// Tolerance on `⟨x_u,x_u⟩`, `⟨x_v,x_v⟩` relative to `1 + |⟨x_u,x_v⟩|`.
pub const EPS_ASYM: f64 = 1e-9;
/// Tolerance on the space-form constraint `⟨x,x⟩ = ±1`.
pub const EPS_CONSTRAINT: f64 = 1e-10;
/// Conformal factors below this are treated as degenerate.
pub const EPS_CONFORMAL: f64 = 1e-12;

/// Default domain margin of `nullsum_minimal_r31`.
pub const NULLSUM_DELTA: f64 = 0.2;

/// Where the chart components live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    R31,
    S31,
    H31,
    LightConeDirect,
}

impl Source {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "R31" => Ok(Source::R31),
            "S31" => Ok(Source::S31),
            "H31" => Ok(Source::H31),
            "lightcone" => Ok(Source::LightConeDirect),
            other => Err(Error::Config(format!("unknown source `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Source::R31 => "R31",
            Source::S31 => "S31",
            Source::H31 => "H31",
            Source::LightConeDirect => "lightcone",
        }
    }

    /// Metric of the space in which the components live.
    pub fn component_signature(&self, lightcone: MetricSignature) -> MetricSignature {
        match self {
            Source::R31 => MetricSignature::new(2, 1),
            Source::S31 => MetricSignature::new(3, 1),
            Source::H31 => MetricSignature::new(2, 2),
            Source::LightConeDirect => lightcone,
        }
    }

    /// Required value of `⟨x,x⟩`, if any.
    pub fn constraint(&self) -> Option<f64> {
        match self {
            Source::S31 => Some(1.0),
            Source::H31 => Some(-1.0),
            _ => None,
        }
    }
}

/// Ambient of `Q³₁`.
pub const AMBIENT_Q31: MetricSignature = MetricSignature::new(3, 2);

/// A parametrized timelike surface in asymptotic coordinates.
#[derive(Debug, Clone)]
pub struct SurfaceChart {
    pub name: String,
    pub source: Source,
    components: Vec<Expr>,
    component_text: Vec<String>,
    /// `[u0, u1, v0, v1]`
    pub domain: [f64; 4],
    pub params: BTreeMap<String, f64>,
    ambient: MetricSignature,
    v_flipped: bool,
}

#[derive(Debug, Deserialize)]
struct ChartConfig {
    source: String,
    components: Vec<String>,
    domain: [f64; 4],
    #[serde(default)]
    params: BTreeMap<String, f64>,
    signature: Option<[usize; 2]>,
    name: Option<String>,
}

/// Locate `needle` in `src`, returning its (1-based) line and the column of
/// its first character.
fn locate(src: &str, needle: &str) -> Option<(usize, usize)> {
    for (lineno, line) in src.lines().enumerate() {
        if let Some(pos) = line.find(needle) {
            return Some((lineno + 1, pos + 1));
        }
    }
    None
}

impl SurfaceChart {
    /// Build and validate a chart from component expressions.
    pub fn new(
        name: impl Into<String>,
        source: Source,
        components: &[&str],
        domain: [f64; 4],
        params: BTreeMap<String, f64>,
        lightcone_signature: Option<MetricSignature>,
    ) -> Result<Self> {
        let parsed = components
            .iter()
            .map(|c| parse_expr(c, &params))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parsed(
            name.into(),
            source,
            parsed,
            components.iter().map(|s| s.to_string()).collect(),
            domain,
            params,
            lightcone_signature,
        )
    }

    fn from_parsed(
        name: String,
        source: Source,
        components: Vec<Expr>,
        component_text: Vec<String>,
        domain: [f64; 4],
        params: BTreeMap<String, f64>,
        lightcone_signature: Option<MetricSignature>,
    ) -> Result<Self> {
        let ambient = match source {
            Source::LightConeDirect => lightcone_signature.unwrap_or(AMBIENT_Q31),
            _ => AMBIENT_Q31,
        };
        let expected = source.component_signature(ambient).dim();
        if components.len() != expected {
            return Err(Error::WrongComponentCount {
                source_name: source.name(),
                expected,
                got: components.len(),
            });
        }
        if !(domain[0] < domain[1] && domain[2] < domain[3]) {
            return Err(Error::InvalidChart(format!("empty domain {domain:?}")));
        }
        let mut chart = Self {
            name,
            source,
            components,
            component_text,
            domain,
            params,
            ambient,
            v_flipped: false,
        };
        chart.validate()?;
        Ok(chart)
    }

    /// Parse the key-value chart config (TOML syntax).
    pub fn parse(config_text: &str) -> Result<Self> {
        let config: ChartConfig = toml::from_str(config_text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| {
                    let before = &config_text[..s.start.min(config_text.len())];
                    let line = before.matches('\n').count() + 1;
                    let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
                    (line, column)
                })
                .unwrap_or((0, 0));
            Error::Syntax {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        let source = Source::parse(&config.source)?;
        let signature = config.signature.map(|[p, q]| MetricSignature::new(p, q));
        let mut parsed = Vec::with_capacity(config.components.len());
        for text in &config.components {
            match parse_expr(text, &config.params) {
                Ok(e) => parsed.push(e),
                Err(Error::Syntax { column, message, .. }) => {
                    let (line, start) = locate(config_text, text).unwrap_or((0, 1));
                    return Err(Error::Syntax {
                        line,
                        column: start + column - 1,
                        message,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        Self::from_parsed(
            config.name.unwrap_or_else(|| "user".to_string()),
            source,
            parsed,
            config.components.clone(),
            config.domain,
            config.params,
            signature,
        )
    }

    /// Render the chart back into config syntax.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("name = \"{}\"\n", self.name));
        out.push_str(&format!("source = \"{}\"\n", self.source.name()));
        if self.source == Source::LightConeDirect {
            out.push_str(&format!(
                "signature = [{}, {}]\n",
                self.ambient.positives, self.ambient.negatives
            ));
        }
        let comps: Vec<String> = self.component_text.iter().map(|c| format!("\"{c}\"")).collect();
        out.push_str(&format!("components = [{}]\n", comps.join(", ")));
        let d = self.domain;
        out.push_str(&format!("domain = [{:?}, {:?}, {:?}, {:?}]\n", d[0], d[1], d[2], d[3]));
        for (k, v) in &self.params {
            out.push_str(&format!("params.{k} = {v:?}\n"));
        }
        out
    }

    pub fn component_text(&self) -> &[String] {
        &self.component_text
    }

    /// Signature of the light-cone ambient the lift lands in.
    pub fn ambient(&self) -> MetricSignature {
        self.ambient
    }

    pub fn component_signature(&self) -> MetricSignature {
        self.source.component_signature(self.ambient)
    }

    /// Whether derivatives are taken with respect to `−v`.
    pub fn v_flipped(&self) -> bool {
        self.v_flipped
    }

    /// Normal-bundle rank `m − 4` of the lift.
    pub fn normal_rank(&self) -> usize {
        self.ambient.dim() - 4
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        let tol = 1e-12 * (1.0 + self.domain.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        u >= self.domain[0] - tol && u <= self.domain[1] + tol && v >= self.domain[2] - tol && v <= self.domain[3] + tol
    }

    fn check_domain(&self, u: f64, v: f64) -> Result<()> {
        if self.contains(u, v) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { u, v })
        }
    }

    /// Coordinate jets at `(u, v)`, honouring the v-flip.
    pub fn coordinate_jets(&self, u: f64, v: f64, order: usize) -> (Jet2, Jet2) {
        let ju = Jet2::variable_u(u, order);
        let jv = if self.v_flipped {
            Jet2::linear(v, 0.0, -1.0, order)
        } else {
            Jet2::variable_v(v, order)
        };
        (ju, jv)
    }

    /// Chart components as jets in the component space.
    pub fn chart_jets(&self, u: f64, v: f64, order: usize) -> Result<JetVector> {
        self.check_domain(u, v)?;
        let (ju, jv) = self.coordinate_jets(u, v, order);
        let coords = self
            .components
            .iter()
            .map(|e| e.eval(&ju, &jv))
            .collect::<Result<Vec<_>>>()?;
        JetVector::new(coords, self.component_signature())
    }

    /// Numeric component values.
    pub fn point(&self, u: f64, v: f64) -> Result<PseudoVector> {
        self.check_domain(u, v)?;
        let coords = self.components.iter().map(|e| e.eval_f64(u, v)).collect();
        PseudoVector::new(coords, self.component_signature())
    }

    /// Numeric component values without the domain check, for stencils that
    /// reach slightly past the domain edge.
    pub fn point_unbounded(&self, u: f64, v: f64) -> PseudoVector {
        let coords = self.components.iter().map(|e| e.eval_f64(u, v)).collect();
        PseudoVector::from_parts(coords, self.component_signature())
    }

    fn validate(&mut self) -> Result<()> {
        let [u0, u1, v0, v1] = self.domain;
        let mut sign = 0.0;
        for a in 0..5 {
            for b in 0..5 {
                let u = u0 + (u1 - u0) * (0.1 + 0.2 * a as f64);
                let v = v0 + (v1 - v0) * (0.1 + 0.2 * b as f64);
                let x = match self.source {
                    Source::LightConeDirect => self.chart_jets(u, v, 1)?,
                    _ => self.chart_jets(u, v, 1)?,
                };
                let values = x.values();
                let q = values.self_inner();
                let scale = values.sup_norm().powi(2).max(1.0);
                match (self.source, self.source.constraint()) {
                    (Source::LightConeDirect, _) => {
                        if q.abs() > EPS_CONSTRAINT * scale {
                            return Err(Error::InvalidChart(format!(
                                "light-cone chart not null at ({u}, {v}): ⟨Y,Y⟩ = {q:e}"
                            )));
                        }
                    }
                    (_, Some(c)) => {
                        if (q - c).abs() > EPS_CONSTRAINT * scale {
                            return Err(Error::InvalidChart(format!(
                                "space-form constraint ⟨x,x⟩ = {c} violated at ({u}, {v}): {q}"
                            )));
                        }
                    }
                    _ => {}
                }
                let xu = x.d_u().values();
                let xv = x.d_v().values();
                let uv = xu.self_inner();
                let vv = xv.self_inner();
                let mixed = xu.dot(&xv);
                let tol = EPS_ASYM * (1.0 + mixed.abs()) * scale;
                if uv.abs() > tol || vv.abs() > tol {
                    return Err(Error::InvalidChart(format!(
                        "coordinates not asymptotic at ({u}, {v}): ⟨x_u,x_u⟩ = {uv:e}, ⟨x_v,x_v⟩ = {vv:e}"
                    )));
                }
                if mixed.abs() <= EPS_CONFORMAL {
                    continue;
                }
                if sign == 0.0 {
                    sign = mixed.signum();
                } else if sign != mixed.signum() {
                    return Err(Error::InvalidChart(
                        "⟨x_u,x_v⟩ changes sign: causal-type change inside the domain".into(),
                    ));
                }
            }
        }
        if sign == 0.0 {
            return Err(Error::DegenerateConformalFactor(0.0));
        }
        self.v_flipped = sign < 0.0;
        Ok(())
    }
}

/// Conformal embedding of a space-form point (as jets) into the light cone.
pub fn embed<T: crate::Scalar>(source: Source, x: &PseudoVector<T>, ambient: MetricSignature) -> PseudoVector<T> {
    let c = x.coords();
    let like = &c[0];
    let coords: Vec<T> = match source {
        Source::R31 => {
            let q = x.dot(x);
            let first = q.sub(&T::constant_like(1.0, like)).scale(0.5);
            let last = q.add(&T::constant_like(1.0, like)).scale(0.5);
            std::iter::once(first).chain(c.iter().cloned()).chain(std::iter::once(last)).collect()
        }
        Source::S31 => c.iter().cloned().chain(std::iter::once(T::constant_like(1.0, like))).collect(),
        Source::H31 => std::iter::once(T::constant_like(1.0, like)).chain(c.iter().cloned()).collect(),
        Source::LightConeDirect => c.to_vec(),
    };
    PseudoVector::from_parts(coords, ambient)
}

/// The light-cone lift of the chart as a jet of the given order.
pub fn lift_to_lightcone(chart: &SurfaceChart, u: f64, v: f64, order: usize) -> Result<JetVector> {
    let x = chart.chart_jets(u, v, order)?;
    Ok(embed(chart.source, &x, chart.ambient()))
}

/// Lift of the space-form normal `n` at a point with position `x`.
pub fn lift_normal(source: Source, x: &PseudoVector, n: &PseudoVector, ambient: MetricSignature) -> PseudoVector {
    let c = n.coords();
    let coords: Vec<f64> = match source {
        Source::R31 => {
            let xn = x.dot(n);
            std::iter::once(xn).chain(c.iter().copied()).chain(std::iter::once(xn)).collect()
        }
        Source::S31 => c.iter().copied().chain(std::iter::once(0.0)).collect(),
        Source::H31 => std::iter::once(0.0).chain(c.iter().copied()).collect(),
        Source::LightConeDirect => c.to_vec(),
    };
    PseudoVector::from_parts(coords, ambient)
}

/// Space-form geometry of a timelike surface at a point.
#[derive(Debug, Clone)]
pub struct FundamentalForms {
    /// Conformal factor, `e^{2ω} = 2⟨x_u,x_v⟩`.
    pub omega: f64,
    /// Unit spacelike normal.
    pub n: PseudoVector,
    /// `⟨x_uu, n⟩`
    pub omega1: f64,
    /// `⟨x_vv, n⟩`
    pub omega2: f64,
    /// Mean curvature `2⟨x_uv,n⟩e^{−2ω}`.
    pub h: f64,
    /// Largest violation of `⟨n,n⟩ = 1`, `⟨n,x_u⟩ = ⟨n,x_v⟩ = 0` (and
    /// `⟨n,x⟩ = 0` off the flat model).
    pub normal_residual: f64,
}

/// Surface positions and derivatives at one point, in the component space.
#[derive(Debug, Clone)]
pub struct PointDerivatives {
    pub x: PseudoVector,
    pub xu: PseudoVector,
    pub xv: PseudoVector,
    pub xuu: PseudoVector,
    pub xvv: PseudoVector,
    pub xuv: PseudoVector,
}

impl PointDerivatives {
    pub fn from_jets(x: &JetVector) -> Result<Self> {
        let coords = |i: usize, j: usize| -> Result<PseudoVector> {
            let c = x.coords().iter().map(|c| c.partial(i, j)).collect::<Result<Vec<_>>>()?;
            PseudoVector::new(c, x.signature())
        };
        Ok(Self {
            x: coords(0, 0)?,
            xu: coords(1, 0)?,
            xv: coords(0, 1)?,
            xuu: coords(2, 0)?,
            xvv: coords(0, 2)?,
            xuv: coords(1, 1)?,
        })
    }
}

/// Generalized cross product: the covector `c` with `c_i = det[e_i; rows]`.
fn cross(rows: &[&PseudoVector]) -> Vec<f64> {
    let m = rows.len() + 1;
    (0..m)
        .map(|i| {
            DMatrix::from_fn(m, m, |r, col| {
                if r == 0 {
                    if col == i {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    rows[r - 1].coords()[col]
                }
            })
            .determinant()
        })
        .collect()
}

/// Unit normal; orientation `G·cross(x_v, x_u)` in `R³₁`, `G·cross(x, x_v, x_u)`
/// in the four-dimensional models.
pub fn space_form_normal(source: Source, d: &PointDerivatives) -> Result<PseudoVector> {
    let sig = d.x.signature();
    let covector = match source {
        Source::R31 => cross(&[&d.xv, &d.xu]),
        Source::S31 | Source::H31 => cross(&[&d.x, &d.xv, &d.xu]),
        Source::LightConeDirect => {
            return Err(Error::Precondition(
                "fundamental forms need a space-form chart".into(),
            ))
        }
    };
    let raised: Vec<f64> = covector.iter().enumerate().map(|(i, c)| sig.sign(i) * c).collect();
    let n = PseudoVector::new(raised, sig)?;
    let q = n.self_inner();
    if q <= EPS_CONFORMAL * n.sup_norm().powi(2).max(EPS_CONFORMAL) {
        return Err(Error::InvalidChart(format!("normal not spacelike: ⟨n,n⟩ = {q:e}")));
    }
    Ok(n.scale(1.0 / q.sqrt()))
}

/// Fundamental-form data from derivatives.
pub fn forms_from_derivatives(source: Source, d: &PointDerivatives) -> Result<FundamentalForms> {
    let e2w = 2.0 * d.xu.dot(&d.xv);
    if e2w <= EPS_CONFORMAL {
        return Err(Error::DegenerateConformalFactor(e2w));
    }
    let n = space_form_normal(source, d)?;
    let mut normal_residual = (n.self_inner() - 1.0)
        .abs()
        .max(n.dot(&d.xu).abs())
        .max(n.dot(&d.xv).abs());
    if source != Source::R31 {
        normal_residual = normal_residual.max(n.dot(&d.x).abs());
    }
    Ok(FundamentalForms {
        omega: 0.5 * e2w.ln(),
        omega1: d.xuu.dot(&n),
        omega2: d.xvv.dot(&n),
        h: 2.0 * d.xuv.dot(&n) / e2w,
        n,
        normal_residual,
    })
}

/// Conformal factor, normal, Hopf coefficients `Ωᵢ` and mean curvature.
pub fn fundamental_forms(chart: &SurfaceChart, u: f64, v: f64) -> Result<FundamentalForms> {
    if chart.source == Source::LightConeDirect {
        return Err(Error::Precondition(
            "fundamental forms need a space-form chart".into(),
        ));
    }
    let d = PointDerivatives::from_jets(&chart.chart_jets(u, v, 2)?)?;
    forms_from_derivatives(chart.source, &d)
}

/// Names accepted by [`catalog`].
pub const CATALOG_NAMES: [&str; 4] = ["cylinder_r31", "nullsum_minimal_r31", "clifford_s31", "plane_r31"];

/// Closed-form charts in asymptotic coordinates.
///
/// * `cylinder_r31`: `(cos s, sin s, t)` with `s = (u+v)/2`, `t = (u−v)/2`.
/// * `nullsum_minimal_r31`: `α(u) + β(v)` with `α = (sin u, −cos u, u)` and
///   `β = (sin v, −cos v, −v)/2`, both null. The domain is the square
///   `|u|, |v| ≤ (π − δ)/2`, which keeps `|u ± v| ≤ π − δ`.
/// * `clifford_s31`: `(cos √2s, sin √2s, cosh √2t, sinh √2t)/√2`.
/// * `plane_r31`: the totally geodesic `((u+v)/2, 0, (u−v)/2)`.
pub fn catalog(name: &str, params: &BTreeMap<String, f64>) -> Result<SurfaceChart> {
    let p = params.clone();
    match name {
        "cylinder_r31" => SurfaceChart::new(
            name,
            Source::R31,
            &["cos((u+v)/2)", "sin((u+v)/2)", "(u-v)/2"],
            [-2.0, 2.0, -2.0, 2.0],
            p,
            None,
        ),
        "nullsum_minimal_r31" => {
            let delta = params.get("delta").copied().unwrap_or(NULLSUM_DELTA);
            let half = (std::f64::consts::PI - delta) / 2.0;
            SurfaceChart::new(
                name,
                Source::R31,
                &["sin(u) + sin(v)/2", "-cos(u) - cos(v)/2", "u - v/2"],
                [-half, half, -half, half],
                p,
                None,
            )
        }
        "clifford_s31" => SurfaceChart::new(
            name,
            Source::S31,
            &[
                "cos(sqrt(2)*(u+v)/2)/sqrt(2)",
                "sin(sqrt(2)*(u+v)/2)/sqrt(2)",
                "cosh(sqrt(2)*(u-v)/2)/sqrt(2)",
                "sinh(sqrt(2)*(u-v)/2)/sqrt(2)",
            ],
            [-1.0, 1.0, -1.0, 1.0],
            p,
            None,
        ),
        "plane_r31" => SurfaceChart::new(
            name,
            Source::R31,
            &["(u+v)/2", "0", "(u-v)/2"],
            [-1.0, 1.0, -1.0, 1.0],
            p,
            None,
        ),
        other => Err(Error::UnknownCatalog(other.to_string())),
    }
}

/// Catalog lookup with default parameters.
pub fn catalog_chart(name: &str) -> Result<SurfaceChart> {
    catalog(name, &BTreeMap::new())
}

/// Parse a chart config, or look up a catalog name.
pub fn parse_chart(config_text: &str) -> Result<SurfaceChart> {
    SurfaceChart::parse(config_text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn chart(name: &str) -> SurfaceChart {
        catalog_chart(name).unwrap()
    }

    #[test]
    fn parses_cylinder_config() {
        let text = r#"
source = "R31"
components = ["cos((u+v)/2)", "sin((u+v)/2)", "(u-v)/2"]
domain = [-1, 1, -1, 1]
"#;
        let c = parse_chart(text).unwrap();
        assert_eq!(c.source, Source::R31);
        assert!(!c.v_flipped());
    }

    #[test]
    fn wrong_component_count() {
        let text = "source = \"R31\"\ncomponents = [\"u\"]\ndomain = [0, 1, 0, 1]\n";
        assert!(matches!(parse_chart(text), Err(Error::WrongComponentCount { expected: 3, got: 1, .. })));
    }

    #[test]
    fn syntax_error_position() {
        let text = "source = \"R31\"\ncomponents = [\"cos((u+v)/2\", \"sin(u)\", \"v\"]\ndomain = [0, 1, 0, 1]\n";
        match parse_chart(text).unwrap_err() {
            Error::Syntax { line, column, message } => {
                assert_eq!(line, 2);
                assert!(column > 15, "{column}");
                assert!(message.contains("unbalanced"));
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn unknown_parameter() {
        let text = "source = \"R31\"\ncomponents = [\"r*u\", \"0\", \"v\"]\ndomain = [0, 1, 0, 1]\n";
        assert_eq!(parse_chart(text).unwrap_err(), Error::UnknownIdentifier("r".into()));
    }

    #[test]
    fn parameters_and_flip() {
        // (u−v)/2 in the last slot reversed: ⟨x_u,x_v⟩ < 0 forces a v-flip
        let text = "source = \"R31\"\ncomponents = [\"r*cos((u-v)/(2*r))\", \"r*sin((u-v)/(2*r))\", \"(u+v)/2\"]\ndomain = [0, 1, 0, 1]\nparams.r = 2.0\n";
        let c = parse_chart(text).unwrap();
        assert!(c.v_flipped());
        let ff = fundamental_forms(&c, 0.5, 0.5).unwrap();
        assert!(ff.omega.is_finite());
    }

    #[test]
    fn rejects_non_asymptotic() {
        let text = "source = \"R31\"\ncomponents = [\"u\", \"v\", \"0\"]\ndomain = [0, 1, 0, 1]\n";
        assert!(matches!(parse_chart(text), Err(Error::InvalidChart(_))));
    }

    #[test]
    fn rejects_constraint_violation() {
        let text = "source = \"S31\"\ncomponents = [\"(u+v)/2\", \"0\", \"0\", \"(u-v)/2\"]\ndomain = [0, 1, 0, 1]\n";
        assert!(matches!(parse_chart(text), Err(Error::InvalidChart(_))));
    }

    #[test]
    fn config_text_roundtrip() {
        for name in CATALOG_NAMES {
            let c = chart(name);
            let again = parse_chart(&c.to_config_text()).unwrap();
            assert_eq!(again.component_text(), c.component_text());
            assert_eq!(again.domain, c.domain);
        }
    }

    #[test]
    fn unknown_catalog() {
        assert!(matches!(catalog_chart("torus"), Err(Error::UnknownCatalog(_))));
    }

    #[test]
    fn lift_examples() {
        let plane = chart("plane_r31");
        let y = lift_to_lightcone(&plane, 0.0, 0.0, 0).unwrap().values();
        assert_eq!(y.coords(), &[-0.5, 0.0, 0.0, 0.0, 0.5]);

        let x = PseudoVector::from_slice(&[0.6, 0.8, 0.3, 0.3], MetricSignature::new(3, 1)).unwrap();
        let y = embed(Source::S31, &x, AMBIENT_Q31);
        assert_abs_diff_eq!(y.self_inner(), 0.0, epsilon = 1e-15);

        let x = PseudoVector::from_slice(&[0.0, 0.0, 1.0, 0.0], MetricSignature::new(2, 2)).unwrap();
        let y = embed(Source::H31, &x, AMBIENT_Q31);
        assert_eq!(y.coords(), &[1.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(y.self_inner(), 0.0);
    }

    #[test]
    fn out_of_domain() {
        let plane = chart("plane_r31");
        assert!(matches!(lift_to_lightcone(&plane, 3.0, 0.0, 1), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn conformal_factors() {
        let mixed = |name: &str| {
            let x = chart(name).chart_jets(0.0, 0.0, 1).unwrap();
            x.d_u().values().dot(&x.d_v().values())
        };
        assert_abs_diff_eq!(mixed("cylinder_r31"), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(mixed("nullsum_minimal_r31"), 1.0, epsilon = 1e-15);
        let c = chart("clifford_s31");
        for (u, v) in [(0.0, 0.0), (0.3, -0.8), (0.9, 0.9)] {
            let x = c.chart_jets(u, v, 1).unwrap();
            assert_abs_diff_eq!(x.values().self_inner(), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(2.0 * x.d_u().values().dot(&x.d_v().values()), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn cylinder_forms() {
        let ff = fundamental_forms(&chart("cylinder_r31"), 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(ff.omega, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ff.omega1, -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(ff.omega2, -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(ff.h, -0.5, epsilon = 1e-15);
        assert!(ff.normal_residual < 1e-14);
    }

    #[test]
    fn minimal_forms() {
        let nullsum = chart("nullsum_minimal_r31");
        let ff = fundamental_forms(&nullsum, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(ff.omega1, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!((2.0 * ff.omega).exp(), 2.0, epsilon = 1e-14);
        for (u, v) in [(0.4, -1.0), (1.2, 1.1)] {
            assert!(fundamental_forms(&nullsum, u, v).unwrap().h.abs() < 1e-14);
        }
        let clifford = chart("clifford_s31");
        for (u, v) in [(0.0, 0.0), (0.5, -0.2)] {
            let ff = fundamental_forms(&clifford, u, v).unwrap();
            assert!(ff.h.abs() < 1e-14);
            assert_abs_diff_eq!(ff.omega1, 0.5, epsilon = 1e-14);
            assert!(ff.normal_residual < 1e-14);
        }
    }

    #[test]
    fn asymptotic_on_grids() {
        for name in CATALOG_NAMES {
            let c = chart(name);
            let [u0, u1, v0, v1] = c.domain;
            for a in 0..20 {
                for b in 0..20 {
                    let u = u0 + (u1 - u0) * (a as f64 + 0.5) / 20.0;
                    let v = v0 + (v1 - v0) * (b as f64 + 0.5) / 20.0;
                    let x = c.chart_jets(u, v, 1).unwrap();
                    let (xu, xv) = (x.d_u().values(), x.d_v().values());
                    let tol = 1e-9 * (1.0 + xu.dot(&xv));
                    assert!(xu.self_inner().abs() <= tol && xv.self_inner().abs() <= tol, "{name} at ({u},{v})");
                    let y = lift_to_lightcone(&c, u, v, 0).unwrap().values();
                    assert!(y.self_inner().abs() <= 1e-10, "{name} lift not null");
                }
            }
        }
    }
}
