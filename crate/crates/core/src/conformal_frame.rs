//! Canonical lift, the conformal frame `{Y, Y_u, Y_v, N}`, Hopf differentials,
//! Schwarzians and the normal connection, all as jets.
//!
//! With a chart jet of order `J` the canonical lift carries order `J − 1`,
//! `N`, `κᵢ` and `sᵢ` carry `J − 3`, `Dκᵢ` carries `J − 4` and `DDκᵢ`
//! carries `J − 5`. The default `J = 6` leaves `DDκᵢ` with a value and a
//! first derivative.

use crate::error::{Error, Result};
use crate::pseudo_linear::{pivoted_gram_schmidt, PseudoVector, SignedUnit, TangentFrame};
use crate::surface_catalog::{fundamental_forms, lift_normal, lift_to_lightcone, Source, SurfaceChart, EPS_CONFORMAL};
use crate::taylor_jets::Jet2;
use crate::JetVector;

/// Default chart jet order.
pub const DEFAULT_ORDER: usize = 6;
/// Frames whose normalization residual exceeds this are rejected.
pub const FRAME_REJECT: f64 = 1e-8;

/// The canonical frame at one point together with its normal data.
#[derive(Debug, Clone)]
pub struct ConformalFrame {
    pub u: f64,
    pub v: f64,
    /// Chart jet order the frame was built from.
    pub order: usize,
    pub y: JetVector,
    pub y_u: JetVector,
    pub y_v: JetVector,
    pub n: JetVector,
    pub kappa1: JetVector,
    pub kappa2: JetVector,
    pub s1: Jet2,
    pub s2: Jet2,
    /// Orthonormal basis of `V^⊥` with signs.
    pub e: Vec<SignedUnit<Jet2>>,
    /// `d_conn[α][β][d] = ±⟨∂_d E_β, E_α⟩`, `d = 0` for `u`, `1` for `v`.
    pub d_conn: Vec<Vec<[Jet2; 2]>>,
    pub v_flipped: bool,
    /// Scale from the light-cone lift to `Y`.
    pub lambda: Jet2,
}

/// Names of the frame normalization relations, in report order.
pub const NORMALIZATION_NAMES: [&str; 14] = [
    "<Y,Y>",
    "<Y_u,Y_u>",
    "<Y_v,Y_v>",
    "<Y_u,Y_v>-1/2",
    "<Y,Y_u>",
    "<Y,Y_v>",
    "<N,Y_u>",
    "<N,Y_v>",
    "<N,N>",
    "<N,Y>+1",
    "<kappa1,Y>",
    "<kappa1,Y_u,Y_v,N>",
    "<kappa2,Y>",
    "<kappa2,Y_u,Y_v,N>",
];

/// Names of the seven structure-equation lines.
pub const STRUCTURE_NAMES: [&str; 7] = ["Y_uu", "Y_vv", "Y_uv", "N_u", "N_v", "psi_u", "psi_v"];

/// Names of the integrability residuals.
/// `ricci_reversed` uses the opposite sign of the curvature term, which is
/// what commuting the `ψ` structure lines gives.
pub const INTEGRABILITY_NAMES: [&str; 5] = ["gauss_u", "gauss_v", "codazzi", "ricci", "ricci_reversed"];

/// One named residual list.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub names: &'static [&'static str],
    pub values: Vec<f64>,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(*x))
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| *n == name).map(|i| self.values[i])
    }
}

fn lift_and_scale(chart: &SurfaceChart, u: f64, v: f64, order: usize) -> Result<(JetVector, Jet2)> {
    let lift = lift_to_lightcone(chart, u, v, order + 1)?;
    let mixed = lift.d_u().dot(&lift.d_v());
    if mixed.value() <= EPS_CONFORMAL {
        return Err(Error::DegenerateConformalFactor(mixed.value()));
    }
    let lambda = (mixed * 2.0).powf(-0.5)?;
    Ok((lift.truncate(order).mul(&lambda), lambda))
}

/// `Y = λ·lift` with `λ = (2⟨lift_u, lift_v⟩)^{−1/2}`, as a jet of `order`.
pub fn canonical_lift(chart: &SurfaceChart, u: f64, v: f64, order: usize) -> Result<JetVector> {
    lift_and_scale(chart, u, v, order).map(|(y, _)| y)
}

/// Frame at the default order.
pub fn frame_at(chart: &SurfaceChart, u: f64, v: f64) -> Result<ConformalFrame> {
    frame_at_order(chart, u, v, DEFAULT_ORDER)
}

pub fn frame_at_order(chart: &SurfaceChart, u: f64, v: f64, order: usize) -> Result<ConformalFrame> {
    if order < 4 {
        return Err(Error::Precondition(format!("frame needs jet order ≥ 4, got {order}")));
    }
    let (y_full, lambda) = lift_and_scale(chart, u, v, order - 1)?;
    let y_u = y_full.d_u();
    let y_v = y_full.d_v();
    let y_uu = y_u.d_u();
    let y_uv = y_u.d_v();
    let y_vv = y_v.d_v();
    let low = order - 3;
    let y = y_full.truncate(low);

    let n = y_uv.scale(2.0).axpy(&(y_uv.dot(&y_uv) * 2.0), &y);
    let s1 = y_uu.dot(&n) * 2.0;
    let s2 = y_vv.dot(&n) * 2.0;
    let kappa1 = y_uu.axpy(&(&s1 * 0.5), &y);
    let kappa2 = y_vv.axpy(&(&s2 * 0.5), &y);

    let tangent = TangentFrame {
        y: y.clone(),
        y_u: y_u.truncate(low),
        y_v: y_v.truncate(low),
        n: n.clone(),
    };
    let residual = tangent.normalization_residual();
    if residual > FRAME_REJECT * y.sup_norm().max(1.0).powi(2) {
        return Err(Error::InvalidFrame(residual));
    }

    let signature = chart.ambient();
    let rank = chart.normal_rank();
    let candidates: Vec<JetVector> = (0..signature.dim())
        .map(|i| tangent.normal_part(&PseudoVector::basis(signature, i).to_jets(low)))
        .collect();
    let mut e = pivoted_gram_schmidt(Vec::new(), &candidates, Some(rank))?;
    if rank == 1 && chart.source != Source::LightConeDirect {
        let ff = fundamental_forms(chart, u, v)?;
        let x = chart.point(u, v)?;
        let lifted = lift_normal(chart.source, &x, &ff.n, signature);
        if e[0].vector.values().dot(&lifted) < 0.0 {
            e[0].vector = e[0].vector.scale(-1.0);
        }
    }

    let d_conn = e
        .iter()
        .map(|ea| {
            e.iter()
                .map(|eb| {
                    [
                        eb.vector.d_u().dot(&ea.vector) * ea.sign,
                        eb.vector.d_v().dot(&ea.vector) * ea.sign,
                    ]
                })
                .collect()
        })
        .collect();

    Ok(ConformalFrame {
        u,
        v,
        order,
        y,
        y_u: tangent.y_u,
        y_v: tangent.y_v,
        n,
        kappa1,
        kappa2,
        s1,
        s2,
        e,
        d_conn,
        v_flipped: chart.v_flipped(),
        lambda,
    })
}

impl ConformalFrame {
    pub fn tangent(&self) -> TangentFrame<Jet2> {
        TangentFrame {
            y: self.y.clone(),
            y_u: self.y_u.clone(),
            y_v: self.y_v.clone(),
            n: self.n.clone(),
        }
    }

    pub fn rank(&self) -> usize {
        self.e.len()
    }

    /// Normal part of `w`.
    pub fn normal_part(&self, w: &JetVector) -> JetVector {
        self.tangent().normal_part(w)
    }

    /// `D_u ψ`
    pub fn du(&self, psi: &JetVector) -> JetVector {
        self.normal_part(&psi.d_u())
    }

    /// `D_v ψ`
    pub fn dv(&self, psi: &JetVector) -> JetVector {
        self.normal_part(&psi.d_v())
    }

    /// Coefficients `c_α` of `ψ = Σ c_α E_α`.
    pub fn coords(&self, psi: &JetVector) -> Vec<Jet2> {
        self.e.iter().map(|e| psi.dot(&e.vector) * e.sign).collect()
    }

    /// `Σ c_α E_α`
    pub fn from_coords(&self, c: &[Jet2]) -> JetVector {
        let mut acc = self.e[0].vector.mul(&c[0]);
        for (ea, ca) in self.e.iter().zip(c).skip(1) {
            acc = acc.axpy(ca, &ea.vector);
        }
        acc
    }

    /// Positive-definite norm `(Σ ⟨ψ,E_α⟩²)^{1/2}` of the value of `ψ`.
    pub fn plus_norm(&self, psi: &JetVector) -> f64 {
        let p = psi.values();
        self.e
            .iter()
            .map(|e| p.dot(&e.vector.values()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Scalar Hopf differentials with respect to `E₁`.
    pub fn k1(&self) -> Jet2 {
        self.kappa1.dot(&self.e[0].vector) * self.e[0].sign
    }

    pub fn k2(&self) -> Jet2 {
        self.kappa2.dot(&self.e[0].vector) * self.e[0].sign
    }

    /// `⟨κ₁, κ₂⟩`
    pub fn kappa_inner(&self) -> Jet2 {
        self.kappa1.dot(&self.kappa2)
    }

    /// Null and normalization relations of the frame and orthogonality of `κᵢ`, at the base point.
    pub fn normalization_residuals(&self) -> Residuals {
        let v = |a: &JetVector, b: &JetVector| a.dot(b).value();
        let k = |kap: &JetVector| {
            [
                v(kap, &self.y_u).abs().max(v(kap, &self.y_v).abs()).max(v(kap, &self.n).abs()),
                v(kap, &self.y).abs(),
            ]
        };
        let [k1o, k1y] = k(&self.kappa1);
        let [k2o, k2y] = k(&self.kappa2);
        let values = vec![
            v(&self.y, &self.y),
            v(&self.y_u, &self.y_u),
            v(&self.y_v, &self.y_v),
            v(&self.y_u, &self.y_v) - 0.5,
            v(&self.y, &self.y_u),
            v(&self.y, &self.y_v),
            v(&self.n, &self.y_u),
            v(&self.n, &self.y_v),
            v(&self.n, &self.n),
            v(&self.n, &self.y) + 1.0,
            k1y,
            k1o,
            k2y,
            k2o,
        ];
        Residuals {
            names: &NORMALIZATION_NAMES,
            values: values.into_iter().map(f64::abs).collect(),
        }
    }

    /// Sup norms of LHS − RHS of the seven structure-equation lines; the
    /// `ψ` lines take the max over `ψ = E_α`.
    pub fn structure_residuals(&self) -> Residuals {
        let sup = |w: &JetVector| w.values().sup_norm();
        let ki = self.kappa_inner();
        let y_uu = self.y_u.d_u();
        let y_vv = self.y_v.d_v();
        let y_uv = self.y_u.d_v();
        let l1 = y_uu.axpy(&(&self.s1 * 0.5), &self.y).sub(&self.kappa1);
        let l2 = y_vv.axpy(&(&self.s2 * 0.5), &self.y).sub(&self.kappa2);
        let l3 = y_uv.axpy(&ki, &self.y).sub(&self.n.scale(0.5));
        let dv_k1 = self.dv(&self.kappa1);
        let du_k2 = self.du(&self.kappa2);
        let l4 = self
            .n
            .d_u()
            .axpy(&(&ki * 2.0), &self.y_u)
            .axpy(&self.s1, &self.y_v)
            .sub(&dv_k1.scale(2.0));
        let l5 = self
            .n
            .d_v()
            .axpy(&self.s2, &self.y_u)
            .axpy(&(&ki * 2.0), &self.y_v)
            .sub(&du_k2.scale(2.0));
        let mut l6 = 0.0f64;
        let mut l7 = 0.0f64;
        for e in &self.e {
            let psi = &e.vector;
            let r6 = psi
                .d_u()
                .sub(&self.du(psi))
                .axpy(&(psi.dot(&dv_k1) * -2.0), &self.y)
                .axpy(&(psi.dot(&self.kappa1) * 2.0), &self.y_v);
            let r7 = psi
                .d_v()
                .sub(&self.dv(psi))
                .axpy(&(psi.dot(&du_k2) * -2.0), &self.y)
                .axpy(&(psi.dot(&self.kappa2) * 2.0), &self.y_u);
            l6 = l6.max(sup(&r6));
            l7 = l7.max(sup(&r7));
        }
        Residuals {
            names: &STRUCTURE_NAMES,
            values: vec![sup(&l1), sup(&l2), sup(&l3), sup(&l4), sup(&l5), l6, l7],
        }
    }

    /// `(D_vD_vκ₁ + (s₂/2)κ₁, D_uD_uκ₂ + (s₁/2)κ₂)`
    pub fn willmore_vectors(&self) -> (JetVector, JetVector) {
        let w1 = self.dv(&self.dv(&self.kappa1)).axpy(&(&self.s2 * 0.5), &self.kappa1);
        let w2 = self.du(&self.du(&self.kappa2)).axpy(&(&self.s1 * 0.5), &self.kappa2);
        (w1, w2)
    }

    /// Residuals of the conformal Gauss, Codazzi and Ricci equations.
    pub fn integrability_residuals(&self) -> Residuals {
        let du_k1 = self.du(&self.kappa1);
        let du_k2 = self.du(&self.kappa2);
        let dv_k1 = self.dv(&self.kappa1);
        let dv_k2 = self.dv(&self.kappa2);
        let g1 = self.s1.d_v() * 0.5 - self.kappa1.dot(&du_k2) * 3.0 - du_k1.dot(&self.kappa2);
        let g2 = self.s2.d_u() * 0.5 - self.kappa1.dot(&dv_k2) - dv_k1.dot(&self.kappa2) * 3.0;
        let (w1, w2) = self.willmore_vectors();
        let codazzi = self.plus_norm(&w1.sub(&w2));
        let mut ricci = 0.0f64;
        let mut reversed = 0.0f64;
        for e in &self.e {
            let psi = &e.vector;
            let curvature = self.du(&self.dv(psi)).sub(&self.dv(&self.du(psi)));
            let term = self
                .kappa2
                .mul(&(psi.dot(&self.kappa1) * 2.0))
                .sub(&self.kappa1.mul(&(psi.dot(&self.kappa2) * 2.0)));
            ricci = ricci.max(self.plus_norm(&curvature.sub(&term)));
            reversed = reversed.max(self.plus_norm(&curvature.add(&term)));
        }
        Residuals {
            names: &INTEGRABILITY_NAMES,
            values: vec![g1.value().abs(), g2.value().abs(), codazzi, ricci, reversed],
        }
    }
}

/// Structure-equation residuals at a point.
pub fn structure_residuals(chart: &SurfaceChart, u: f64, v: f64) -> Result<Residuals> {
    Ok(frame_at(chart, u, v)?.structure_residuals())
}

/// Gauss/Codazzi/Ricci residuals at a point.
pub fn integrability_residuals(chart: &SurfaceChart, u: f64, v: f64) -> Result<Residuals> {
    Ok(frame_at(chart, u, v)?.integrability_residuals())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface_catalog::{catalog_chart, CATALOG_NAMES};
    use approx::assert_abs_diff_eq;

    fn frame(name: &str, u: f64, v: f64) -> ConformalFrame {
        frame_at(&catalog_chart(name).unwrap(), u, v).unwrap()
    }

    #[test]
    fn cylinder_lift_at_origin() {
        let y = canonical_lift(&catalog_chart("cylinder_r31").unwrap(), 0.0, 0.0, 3).unwrap();
        let expected = [0.0, 1.0, 0.0, 0.0, 1.0];
        for (c, e) in y.values().coords().iter().zip(expected) {
            assert_abs_diff_eq!(*c, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn nullsum_scale() {
        let f = frame("nullsum_minimal_r31", 0.0, 0.0);
        assert_abs_diff_eq!(f.lambda.value(), 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn asymptotic_jets() {
        for name in CATALOG_NAMES {
            let y = canonical_lift(&catalog_chart(name).unwrap(), 0.2, -0.3, 5).unwrap();
            let uu = y.d_u().dot(&y.d_u());
            let vv = y.d_v().dot(&y.d_v());
            assert!(uu.max_abs() < 1e-11 && vv.max_abs() < 1e-11, "{name}");
            let half = y.d_u().dot(&y.d_v());
            assert_abs_diff_eq!(half.value(), 0.5, epsilon = 1e-14);
            assert!(half.add_scalar(-0.5).max_abs() < 1e-11);
        }
    }

    #[test]
    fn cylinder_frame_values() {
        let f = frame("cylinder_r31", 0.0, 0.0);
        assert_abs_diff_eq!(f.s1.value(), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(f.s2.value(), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(f.kappa1.dot(&f.kappa1).value(), 1.0 / 16.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.k1().value(), -0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(f.k2().value(), -0.25, epsilon = 1e-14);
        let n = f.n.values();
        for (c, e) in n.coords().iter().zip([0.5, -0.375, 0.0, 0.0, 0.625]) {
            assert_abs_diff_eq!(*c, e, epsilon = 1e-14);
        }
    }

    #[test]
    fn cylinder_n_line() {
        let f = frame("cylinder_r31", 0.0, 0.0);
        let expected = f.y_u.scale(-0.125).sub(&f.y_v.scale(0.25));
        let diff = f.n.d_u().sub(&expected).values();
        assert!(diff.sup_norm() < 1e-13);
        assert!(f.plus_norm(&f.dv(&f.kappa1)) < 1e-13);
    }

    #[test]
    fn plane_is_umbilic() {
        let f = frame("plane_r31", 0.3, -0.4);
        assert!(f.plus_norm(&f.kappa1) < 1e-14 && f.plus_norm(&f.kappa2) < 1e-14);
    }

    #[test]
    fn nullsum_hopf_scalar() {
        let f = frame("nullsum_minimal_r31", 0.0, 0.0);
        assert_abs_diff_eq!(f.k1().value(), -0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn corrupted_frame_flagged() {
        let mut f = frame("cylinder_r31", 0.1, 0.2);
        f.n = f.n.scale(1.01);
        let r = f.normalization_residuals();
        assert_abs_diff_eq!(r.get("<N,Y>+1").unwrap(), 0.01, epsilon = 1e-12);
    }

    #[test]
    fn identities_hold() {
        for name in CATALOG_NAMES {
            let chart = catalog_chart(name).unwrap();
            for (u, v) in [(0.1, 0.2), (-0.5, 0.7), (0.9, -0.9)] {
                let f = frame_at(&chart, u, v).unwrap();
                assert!(f.normalization_residuals().max() < 1e-10, "{name}");
                assert!(f.structure_residuals().max() < 1e-8, "{name}: {:?}", f.structure_residuals());
                assert!(
                    f.integrability_residuals().max() < 1e-7,
                    "{name}: {:?}",
                    f.integrability_residuals()
                );
            }
        }
    }

    #[test]
    fn clifford_frame() {
        let f = frame("clifford_s31", 0.3, -0.2);
        assert!(f.s1.value().abs() < 1e-13 && f.s2.value().abs() < 1e-13);
        assert_abs_diff_eq!(f.k1().value(), 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(f.k2().value(), 0.5, epsilon = 1e-13);
    }

    #[test]
    fn order_too_low() {
        let chart = catalog_chart("cylinder_r31").unwrap();
        assert!(frame_at_order(&chart, 0.0, 0.0, 3).is_err());
    }
}
