//! From an isothermic Willmore surface to a minimal surface in a space form.
//!
//! The dual envelope `Ŷ` of a (+)-isothermic timelike Willmore surface has
//! `ρ₁ = ρ₂ =: ρ` with `ρ_u = 2bρ`, `ρ_v = 2aρ`, so `Y₀ = Ŷ − ρY` is a
//! constant direction with `⟨Y₀,Y₀⟩ = 2ρ`. Moving `Y₀` to a standard point
//! turns `y` into a minimal surface of `R³₁` (null `Y₀`), `S³₁` (timelike)
//! or `H³₁` (spacelike).

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::blaschke::{dual_fields, PairJets, PAIR_ORDER};
use crate::conformal_frame::frame_at_order;
use crate::detectors::{isothermic_test, willmore_residual, Thresholds};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pseudo_linear::{normalizing_transform_with, CausalType, NormalizingTransform, PseudoVector, EPS_NULL};
use crate::surface_catalog::{
    embed, forms_from_derivatives, PointDerivatives, Source, SurfaceChart, AMBIENT_Q31,
};
use crate::taylor_jets::Jet2;

/// Finite-difference step for the recovered chart.
pub const FD_STEP: f64 = 1e-2;
/// Branch constraint violations above this are errors.
pub const BRANCH_TOLERANCE: f64 = 1e-6;
/// Relative size of the scaling denominator below which a point is a chart
/// boundary.
pub const BOUNDARY_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThomsenOptions {
    pub thresholds: Thresholds,
    pub eps_causal: f64,
    pub fd_step: f64,
}

impl Default for ThomsenOptions {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            eps_causal: EPS_NULL,
            fd_step: FD_STEP,
        }
    }
}

/// Space form an extracted chart lives in.
pub fn branch_for(causal: CausalType) -> Source {
    match causal {
        CausalType::Null => Source::R31,
        CausalType::Timelike => Source::S31,
        CausalType::Spacelike => Source::H31,
    }
}

/// One recovered grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredPoint {
    pub u: f64,
    pub v: f64,
    pub x: Vec<f64>,
    pub h: f64,
    pub omega: f64,
    /// Violation of the branch constraint at the point.
    pub constraint: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredChart {
    pub branch: Source,
    pub points: Vec<Option<RecoveredPoint>>,
    /// Grid points where the scaling denominator vanished.
    pub excluded: Vec<(f64, f64)>,
    pub h_residual: f64,
    pub constraint_residual: f64,
}

/// Read a space-form point off a light-cone vector, or `None` at a chart
/// boundary. Returns the point and the constraint violation.
pub fn extract(z: &PseudoVector, branch: Source) -> Result<Option<(PseudoVector, f64)>> {
    let c = z.coords();
    let m = c.len();
    if z.signature() != AMBIENT_Q31 {
        return Err(Error::SignatureMismatch(z.signature().to_string(), AMBIENT_Q31.to_string()));
    }
    let denom = match branch {
        Source::R31 => c[m - 1] - c[0],
        Source::S31 => c[m - 1],
        Source::H31 => c[0],
        Source::LightConeDirect => return Err(Error::Precondition("no space-form branch".into())),
    };
    if denom.abs() <= BOUNDARY_EPS * z.sup_norm() {
        return Ok(None);
    }
    let s: Vec<f64> = c.iter().map(|x| x / denom).collect();
    let sig = branch.component_signature(AMBIENT_Q31);
    let (x, constraint) = match branch {
        Source::R31 => {
            let x = PseudoVector::from_slice(&s[1..m - 1], sig)?;
            let r = (x.self_inner() - (s[0] + s[m - 1])).abs();
            (x, r)
        }
        Source::S31 => {
            let x = PseudoVector::from_slice(&s[..m - 1], sig)?;
            let r = (x.self_inner() - 1.0).abs();
            (x, r)
        }
        _ => {
            let x = PseudoVector::from_slice(&s[1..], sig)?;
            let r = (x.self_inner() + 1.0).abs();
            (x, r)
        }
    };
    Ok(Some((x, constraint)))
}

const W1: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const W2: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];

/// Derivatives of a vector-valued function of `(u, w)` by fourth-order
/// central stencils; `None` if any stencil point is a chart boundary.
fn stencil_derivatives(
    f: &dyn Fn(f64, f64) -> Result<Option<(PseudoVector, f64)>>,
    u: f64,
    w: f64,
    h: f64,
) -> Result<Option<(PointDerivatives, f64)>> {
    let mut cache = std::collections::BTreeMap::new();
    let mut at = |a: i32, b: i32| -> Result<Option<PseudoVector>> {
        if let Some(x) = cache.get(&(a, b)) {
            return Ok(Some(Clone::clone(x)));
        }
        match f(u + a as f64 * h, w + b as f64 * h)? {
            Some((x, _)) => {
                cache.insert((a, b), x.clone());
                Ok(Some(x))
            }
            None => Ok(None),
        }
    };
    let Some((x0, constraint)) = f(u, w)? else {
        return Ok(None);
    };
    let sig = x0.signature();
    let zero = PseudoVector::zeros(sig);
    let mut xu = zero.clone();
    let mut xw = zero.clone();
    let mut xuu = zero.clone();
    let mut xww = zero.clone();
    let mut xuw = zero.clone();
    for k in 0..5 {
        let o = k as i32 - 2;
        if o != 0 {
            let (Some(pu), Some(pw)) = (at(o, 0)?, at(0, o)?) else {
                return Ok(None);
            };
            xu = xu.add(&pu.scale(W1[k]));
            xw = xw.add(&pw.scale(W1[k]));
            xuu = xuu.add(&pu.scale(W2[k]));
            xww = xww.add(&pw.scale(W2[k]));
        } else {
            xuu = xuu.add(&x0.scale(W2[k]));
            xww = xww.add(&x0.scale(W2[k]));
        }
        for l in 0..5 {
            let p = l as i32 - 2;
            if o == 0 || p == 0 {
                continue;
            }
            let Some(q) = at(o, p)? else {
                return Ok(None);
            };
            xuw = xuw.add(&q.scale(W1[k] * W1[l]));
        }
    }
    Ok(Some((
        PointDerivatives {
            x: x0,
            xu: xu.scale(1.0 / (12.0 * h)),
            xv: xw.scale(1.0 / (12.0 * h)),
            xuu: xuu.scale(1.0 / (12.0 * h * h)),
            xvv: xww.scale(1.0 / (12.0 * h * h)),
            xuv: xuw.scale(1.0 / (144.0 * h * h)),
        },
        constraint,
    )))
}

/// Recover the space-form chart of `T·lift` on the grid and measure its mean
/// curvature with finite differences.
pub fn recover_spaceform_chart(
    chart: &SurfaceChart,
    grid: &Grid,
    transform: &NormalizingTransform,
    branch: Source,
    fd_step: f64,
) -> Result<RecoveredChart> {
    recover_from_lift(
        &|u, v| embed(chart.source, &chart.point_unbounded(u, v), chart.ambient()),
        chart.v_flipped(),
        grid,
        transform,
        branch,
        fd_step,
    )
}

/// As [`recover_spaceform_chart`], for any light-cone lift given pointwise.
pub fn recover_from_lift(
    lift: &(dyn Fn(f64, f64) -> PseudoVector + Sync),
    v_flipped: bool,
    grid: &Grid,
    transform: &NormalizingTransform,
    branch: Source,
    fd_step: f64,
) -> Result<RecoveredChart> {
    let wsign = if v_flipped { -1.0 } else { 1.0 };
    let sampled = |u: f64, w: f64| extract(&transform.apply(&lift(u, wsign * w)), branch);
    let points = (0..grid.len())
        .into_par_iter()
        .map(|k| -> Result<Option<RecoveredPoint>> {
            let (u, v) = grid.point(k);
            let Some((d, constraint)) = stencil_derivatives(&sampled, u, wsign * v, fd_step)? else {
                return Ok(None);
            };
            if constraint > BRANCH_TOLERANCE {
                return Err(Error::BranchMismatch(constraint));
            }
            let ff = forms_from_derivatives(branch, &d)?;
            Ok(Some(RecoveredPoint {
                u,
                v,
                x: d.x.coords().to_vec(),
                h: ff.h,
                omega: ff.omega,
                constraint,
            }))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let excluded = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_none())
        .map(|(k, _)| grid.point(k))
        .collect();
    let retained = points.iter().flatten();
    let h_residual = retained.clone().fold(0.0f64, |m, p| m.max(p.h.abs()));
    let constraint_residual = retained.fold(0.0f64, |m, p| m.max(p.constraint));
    Ok(RecoveredChart {
        branch,
        points,
        excluded,
        h_residual,
        constraint_residual,
    })
}

#[derive(Debug, Clone)]
pub struct ThomsenResult {
    /// `ρ = ρ₁` at each grid point.
    pub rho: Vec<f64>,
    /// `sup |ρ₁ − ρ₂|`
    pub rho_consistency: f64,
    /// `sup max(|ρ_u − 2bρ|, |ρ_v − 2aρ|)`
    pub rho_propagation: f64,
    /// Unit (Euclidean) dominant direction of the `Y₀` representatives.
    pub y0: PseudoVector,
    /// Sup over grid pairs of `‖Y₀(p) ∧ Y₀(q)‖ / (‖Y₀(p)‖‖Y₀(q)‖)`.
    pub y0_direction_residual: f64,
    pub causal: CausalType,
    pub transform: NormalizingTransform,
    pub branch: Source,
    pub recovered: RecoveredChart,
    pub h_residual: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub enum ThomsenOutcome {
    Completed(Box<ThomsenResult>),
    /// `k ≡ 0`: the surface lies in some `S²₁` and is minimal in some `S³₁`.
    ContainedInSphere,
}

fn euclid_norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `‖p ∧ q‖/(‖p‖‖q‖)`, the sine of the Euclidean angle.
pub fn wedge_ratio(p: &[f64], q: &[f64]) -> f64 {
    let np = euclid_norm(p);
    let nq = euclid_norm(q);
    let mut acc = 0.0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            acc += (p[i] * q[j] - p[j] * q[i]).powi(2);
        }
    }
    acc.sqrt() / (np * nq)
}

/// Dominant right singular direction of the rows, sign-fixed so that its
/// largest component is positive.
fn dominant_direction(rows: &[Vec<f64>]) -> Vec<f64> {
    let m = rows[0].len();
    let mat = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j] / euclid_norm(&rows[i]));
    let svd = mat.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let (best, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, s)| if *s > acc.1 { (k, *s) } else { acc });
    let mut d: Vec<f64> = (0..m).map(|j| vt[(best, j)]).collect();
    let lead = d.iter().cloned().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
    if lead < 0.0 {
        d.iter_mut().for_each(|x| *x = -*x);
    }
    d
}

pub fn thomsen_pipeline(chart: &SurfaceChart, grid: &Grid, opts: ThomsenOptions) -> Result<ThomsenOutcome> {
    let th = opts.thresholds;
    if chart.ambient() != AMBIENT_Q31 {
        return Err(Error::Precondition(format!(
            "thomsen: light-cone ambient must be {AMBIENT_Q31}, got {}",
            chart.ambient()
        )));
    }
    let umbilic = grid.try_map(|u, v| {
        let f = frame_at_order(chart, u, v, 4)?;
        Ok(f.plus_norm(&f.kappa1).min(f.plus_norm(&f.kappa2)) < th.umbilic)
    })?;
    if umbilic.iter().all(|z| *z) {
        return Ok(ThomsenOutcome::ContainedInSphere);
    }
    if umbilic.iter().any(|z| *z) {
        let points = umbilic
            .iter()
            .enumerate()
            .filter(|(_, z)| **z)
            .map(|(k, _)| grid.point(k))
            .collect();
        return Err(Error::UmbilicPoints(points));
    }
    let iso = isothermic_test(chart, grid, th)?;
    let mut warnings = Vec::new();
    match iso.sign {
        Some(1) => {}
        Some(_) => warnings.push("outside paper's stated hypothesis: (-)-isothermic input".to_string()),
        None => {
            return Err(Error::Precondition(format!(
                "isothermic: parallel residual {:e}, separability residual {:e}",
                iso.parallel_residual, iso.separability_residual
            )))
        }
    }
    let willmore = grid
        .try_map(|u, v| willmore_residual(chart, u, v).map(|(a, b)| a.max(b)))?
        .into_iter()
        .fold(0.0f64, f64::max);
    if willmore > th.zero {
        return Err(Error::Precondition(format!("willmore: residual {willmore:e}")));
    }

    struct Sample {
        rho: f64,
        consistency: f64,
        propagation: f64,
        y0: PseudoVector,
    }
    let samples = grid.try_map(|u, v| {
        let f = frame_at_order(chart, u, v, PAIR_ORDER)?;
        let (a, b) = dual_fields(&f)?;
        let zeta = vec![Jet2::zero(a.order()); f.rank()];
        let p = PairJets::new(f, a, b, zeta)?;
        let rho = &p.rho1;
        let prop_u = (rho.d_u() - &p.b * rho * 2.0).value().abs();
        let prop_v = (rho.d_v() - &p.a * rho * 2.0).value().abs();
        let y0 = p.yhat.values().sub(&p.frame.y.values().scale(rho.value()));
        Ok(Sample {
            rho: rho.value(),
            consistency: (p.rho1.value() - p.rho2.value()).abs(),
            propagation: prop_u.max(prop_v),
            y0,
        })
    })?;

    let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.y0.coords().to_vec()).collect();
    let mut y0_direction_residual = 0.0f64;
    for (i, p) in rows.iter().enumerate() {
        for q in &rows[i + 1..] {
            y0_direction_residual = y0_direction_residual.max(wedge_ratio(p, q));
        }
    }
    let types: Vec<CausalType> = samples.iter().map(|s| s.y0.causal_type(opts.eps_causal)).collect();
    let causal = types[0];
    if types.iter().any(|t| *t != causal) {
        return Err(Error::InconsistentFixedPoint(
            "causal type of Y₀ changes across the grid".into(),
        ));
    }
    let y0 = PseudoVector::from_slice(&dominant_direction(&rows), AMBIENT_Q31)?;
    let transform = normalizing_transform_with(&y0, causal, opts.eps_causal)?;
    let branch = branch_for(causal);
    let recovered = recover_spaceform_chart(chart, grid, &transform, branch, opts.fd_step)?;
    let h_residual = recovered.h_residual;
    Ok(ThomsenOutcome::Completed(Box::new(ThomsenResult {
        rho: samples.iter().map(|s| s.rho).collect(),
        rho_consistency: samples.iter().fold(0.0f64, |m, s| m.max(s.consistency)),
        rho_propagation: samples.iter().fold(0.0f64, |m, s| m.max(s.propagation)),
        y0,
        y0_direction_residual,
        causal,
        transform,
        branch,
        recovered,
        h_residual,
        warnings,
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudo_linear::normalizing_transform;
    use crate::surface_catalog::catalog_chart;
    use approx::assert_abs_diff_eq;

    fn run(name: &str, n: usize) -> ThomsenResult {
        let c = catalog_chart(name).unwrap();
        let grid = Grid::interior(c.domain, n, n, 0.1).unwrap();
        match thomsen_pipeline(&c, &grid, ThomsenOptions::default()).unwrap() {
            ThomsenOutcome::Completed(r) => *r,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn clifford_returns_to_de_sitter() {
        let r = run("clifford_s31", 5);
        assert_eq!(r.causal, CausalType::Timelike);
        assert_eq!(r.branch, Source::S31);
        assert!(r.h_residual < 1e-7, "{}", r.h_residual);
        for rho in &r.rho {
            assert_abs_diff_eq!(*rho, -0.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn nullsum_goes_to_infinity() {
        let r = run("nullsum_minimal_r31", 5);
        assert_eq!(r.causal, CausalType::Null);
        assert_eq!(r.branch, Source::R31);
        assert!(r.rho.iter().all(|x| x.abs() < 1e-7));
        let reference = [1.0, 0.0, 0.0, 0.0, 1.0];
        assert!(wedge_ratio(r.y0.coords(), &reference) < 1e-7);
        assert!(r.h_residual < 1e-7, "{}", r.h_residual);
        assert!(r.y0_direction_residual < 1e-7);
    }

    #[test]
    fn plane_exits_early() {
        let c = catalog_chart("plane_r31").unwrap();
        let grid = Grid::new(3, 3, [0.0, 0.5, 0.0, 0.5]).unwrap();
        assert!(matches!(
            thomsen_pipeline(&c, &grid, ThomsenOptions::default()).unwrap(),
            ThomsenOutcome::ContainedInSphere
        ));
    }

    #[test]
    fn cylinder_is_not_willmore() {
        let c = catalog_chart("cylinder_r31").unwrap();
        let grid = Grid::new(3, 3, [0.0, 0.5, 0.0, 0.5]).unwrap();
        let err = thomsen_pipeline(&c, &grid, ThomsenOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(ref m) if m.starts_with("willmore")), "{err:?}");
    }

    #[test]
    fn round_trip_clifford() {
        let c = catalog_chart("clifford_s31").unwrap();
        let grid = Grid::new(4, 4, [-0.5, 0.5, -0.5, 0.5]).unwrap();
        let pole = PseudoVector::basis(AMBIENT_Q31, 4);
        let t = normalizing_transform(&pole, CausalType::Timelike).unwrap();
        let rec = recover_spaceform_chart(&c, &grid, &t, Source::S31, FD_STEP).unwrap();
        for p in rec.points.iter().flatten() {
            let x = c.point(p.u, p.v).unwrap();
            for (a, b) in p.x.iter().zip(x.coords()) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-14);
            }
            assert!(p.omega.abs() < 1e-8);
        }
    }

    #[test]
    fn cylinder_flat_extraction() {
        let c = catalog_chart("cylinder_r31").unwrap();
        let y = embed(Source::R31, &c.point(0.3, 0.1).unwrap(), AMBIENT_Q31);
        let (x, r) = extract(&y, Source::R31).unwrap().unwrap();
        assert!(r < 1e-14);
        let t = (0.3f64 - 0.1) / 2.0;
        assert_abs_diff_eq!(x.self_inner(), 1.0 - t * t, epsilon = 1e-14);
    }

    #[test]
    fn boundary_point_flagged() {
        let y = PseudoVector::from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0], AMBIENT_Q31).unwrap();
        assert!(extract(&y, Source::R31).unwrap().is_none());
    }

    #[test]
    fn wedge_of_parallel_vectors() {
        assert!(wedge_ratio(&[1.0, 2.0, 3.0], &[-2.0, -4.0, -6.0]) < 1e-16);
        assert_abs_diff_eq!(wedge_ratio(&[1.0, 0.0], &[0.0, 1.0]), 1.0, epsilon = 1e-16);
    }
}
