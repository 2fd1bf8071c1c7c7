//! Willmore, S-Willmore and isothermic detectors, adapted coordinates and the
//! Willmore energy.

use crate::conformal_frame::{frame_at, frame_at_order, ConformalFrame};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::surface_catalog::SurfaceChart;
use crate::taylor_jets::Jet2;
use crate::JetVector;

/// Classification thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Zero threshold for Willmore, parallelism and separability residuals.
    pub zero: f64,
    /// `‖κᵢ‖` below this marks an umbilic point.
    pub umbilic: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { zero: 1e-6, umbilic: 1e-9 }
    }
}

/// `(‖D_vD_vκ₁ + (s₂/2)κ₁‖, ‖D_uD_uκ₂ + (s₁/2)κ₂‖)`
pub fn willmore_residual(chart: &SurfaceChart, u: f64, v: f64) -> Result<(f64, f64)> {
    Ok(willmore_pair(&frame_at(chart, u, v)?))
}

fn willmore_pair(f: &ConformalFrame) -> (f64, f64) {
    let (w1, w2) = f.willmore_vectors();
    (f.plus_norm(&w1), f.plus_norm(&w2))
}

/// Euclidean pairing of the `E`-coordinates of two normal fields.
fn plus_dot(f: &ConformalFrame, a: &JetVector, b: &JetVector) -> f64 {
    let (a, b) = (a.values(), b.values());
    f.e.iter()
        .map(|e| {
            let ev = e.vector.values();
            a.dot(&ev) * b.dot(&ev)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SWillmoreReport {
    pub mu1: Vec<Option<f64>>,
    pub mu2: Vec<Option<f64>>,
    pub parallelism_residual: f64,
    pub willmore_sup: f64,
    pub umbilic_points: Vec<(f64, f64)>,
    pub is_swillmore: bool,
}

/// Least-squares `μ` with `D_vκ₁ + μκ₁ ≈ 0`, and the relative residual.
fn parallel_fit(f: &ConformalFrame, kappa: &JetVector, d_kappa: &JetVector) -> (f64, f64) {
    let kk = plus_dot(f, kappa, kappa);
    let mu = -plus_dot(f, d_kappa, kappa) / kk;
    let r = f.plus_norm(&d_kappa.axpy(&Jet2::constant(mu, 0), kappa)) / kk.sqrt();
    (mu, r)
}

pub fn swillmore_test(chart: &SurfaceChart, grid: &Grid, th: Thresholds) -> Result<SWillmoreReport> {
    let per_point = grid.try_map(|u, v| {
        let f = frame_at(chart, u, v)?;
        let (w1, w2) = willmore_pair(&f);
        let n1 = f.plus_norm(&f.kappa1);
        let n2 = f.plus_norm(&f.kappa2);
        if n1 < th.umbilic || n2 < th.umbilic {
            return Ok((None, None, 0.0, w1.max(w2)));
        }
        let (mu1, r1) = parallel_fit(&f, &f.kappa1, &f.dv(&f.kappa1));
        let (mu2, r2) = parallel_fit(&f, &f.kappa2, &f.du(&f.kappa2));
        Ok((Some(mu1), Some(mu2), r1.max(r2), w1.max(w2)))
    })?;
    let umbilic_points: Vec<(f64, f64)> = per_point
        .iter()
        .enumerate()
        .filter(|(_, p)| p.0.is_none())
        .map(|(k, _)| grid.point(k))
        .collect();
    if umbilic_points.len() == grid.len() {
        return Err(Error::IdenticallyUmbilic);
    }
    let parallelism_residual = per_point.iter().fold(0.0f64, |m, p| m.max(p.2));
    let willmore_sup = per_point.iter().fold(0.0f64, |m, p| m.max(p.3));
    Ok(SWillmoreReport {
        mu1: per_point.iter().map(|p| p.0).collect(),
        mu2: per_point.iter().map(|p| p.1).collect(),
        parallelism_residual,
        willmore_sup,
        is_swillmore: parallelism_residual <= th.zero && willmore_sup <= th.zero,
        umbilic_points,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsothermicReport {
    /// Pointwise best ratio `r` with `κ₁ ≈ rκ₂`; `None` at umbilic points.
    pub ratio: Vec<Option<f64>>,
    pub parallel_residual: f64,
    /// `sup |∂²_{uv} log|r||`
    pub separability_residual: f64,
    /// `±1` when both residuals are below threshold and `r` keeps its sign.
    pub sign: Option<i8>,
    pub mixed_sign: bool,
    pub umbilic_points: Vec<(f64, f64)>,
}

/// `r = ⟨κ₁,κ₂⟩/⟨κ₂,κ₂⟩` as a jet.
fn ratio_jet(f: &ConformalFrame) -> Result<Jet2> {
    let c1 = f.coords(&f.kappa1);
    let c2 = f.coords(&f.kappa2);
    let mut num = &c1[0] * &c2[0];
    let mut den = &c2[0] * &c2[0];
    for (a, b) in c1.iter().zip(&c2).skip(1) {
        num = num + a * b;
        den = den + b * b;
    }
    num.div(&den)
}

pub fn isothermic_test(chart: &SurfaceChart, grid: &Grid, th: Thresholds) -> Result<IsothermicReport> {
    let per_point = grid.try_map(|u, v| {
        let f = frame_at(chart, u, v)?;
        let n1 = f.plus_norm(&f.kappa1);
        let n2 = f.plus_norm(&f.kappa2);
        if n1 < th.umbilic || n2 < th.umbilic {
            return Ok(None);
        }
        let r = ratio_jet(&f)?;
        let parallel = f.plus_norm(&f.kappa1.sub(&f.kappa2.mul(&Jet2::constant(r.value(), 0)))) / n1;
        let sep = (&r * &r).log()?.partial(1, 1)? * 0.5;
        Ok(Some((r.value(), parallel, sep.abs())))
    })?;
    let umbilic_points: Vec<(f64, f64)> = per_point
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_none())
        .map(|(k, _)| grid.point(k))
        .collect();
    let usable: Vec<_> = per_point.iter().flatten().collect();
    if usable.is_empty() || umbilic_points.len() * 2 > grid.len() {
        return Err(Error::UmbilicPoints(umbilic_points));
    }
    let parallel_residual = usable.iter().fold(0.0f64, |m, p| m.max(p.1));
    let separability_residual = usable.iter().fold(0.0f64, |m, p| m.max(p.2));
    let positive = usable.iter().all(|p| p.0 > 0.0);
    let negative = usable.iter().all(|p| p.0 < 0.0);
    let passes = parallel_residual <= th.zero && separability_residual <= th.zero;
    let sign = match (passes, positive, negative) {
        (true, true, _) => Some(1),
        (true, _, true) => Some(-1),
        _ => None,
    };
    Ok(IsothermicReport {
        ratio: per_point.iter().map(|p| p.map(|q| q.0)).collect(),
        parallel_residual,
        separability_residual,
        sign,
        mixed_sign: !positive && !negative,
        umbilic_points,
    })
}

/// Tabulated reparametrization `ũ = f(u)`, `ṽ = g(v)` making `κ̃₁ = ±κ̃₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedCoordinates {
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    pub f_prime: Vec<f64>,
    pub v: Vec<f64>,
    pub g: Vec<f64>,
    pub g_prime: Vec<f64>,
    pub sign: i8,
    /// `sup |κ̃₁ ∓ κ̃₂| / |κ̃₁|` over the grid.
    pub check_residual: f64,
}

fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..x.len() {
        acc += 0.5 * (y[k] + y[k - 1]) * (x[k] - x[k - 1]);
        out.push(acc);
    }
    out
}

/// Coordinates in which the Hopf differentials agree up to sign.
///
/// With `r = σ₁(u)/σ₂(v)` the new coordinates have `f′ = |σ₁|^{1/2}`,
/// `g′ = |σ₂|^{1/2}`, and `κ̃₁/κ̃₂ = (g′/f′)² r`.
pub fn adapt_coordinates(chart: &SurfaceChart, grid: &Grid, th: Thresholds) -> Result<AdaptedCoordinates> {
    let report = isothermic_test(chart, grid, th)?;
    if report.mixed_sign {
        return Err(Error::MixedIsothermicType);
    }
    if report.parallel_residual > th.zero || report.separability_residual > th.zero {
        return Err(Error::NotSeparable(report.parallel_residual.max(report.separability_residual)));
    }
    let sign = report.sign.unwrap_or(1);
    let ratio = |i: usize, j: usize| -> Result<f64> {
        report.ratio[i * grid.nv + j].ok_or_else(|| Error::UmbilicPoints(vec![(grid.u(i), grid.v(j))]))
    };
    let us: Vec<f64> = (0..grid.nu).map(|i| grid.u(i)).collect();
    let vs: Vec<f64> = (0..grid.nv).map(|j| grid.v(j)).collect();
    let r00 = ratio(0, 0)?;
    let f_prime = (0..grid.nu).map(|i| ratio(i, 0).map(|r| r.abs().sqrt())).collect::<Result<Vec<_>>>()?;
    let g_prime = (0..grid.nv)
        .map(|j| ratio(0, j).map(|r| (r00 / r).abs().sqrt()))
        .collect::<Result<Vec<_>>>()?;
    if f_prime.iter().chain(&g_prime).any(|d| !(*d > 0.0)) {
        return Err(Error::Precondition("adapted coordinates need f′g′ > 0".into()));
    }
    let mut check_residual = 0.0f64;
    for i in 0..grid.nu {
        for j in 0..grid.nv {
            if let Some(r) = report.ratio[i * grid.nv + j] {
                let q = (g_prime[j] / f_prime[i]).powi(2) * r;
                check_residual = check_residual.max((q - sign as f64).abs() / q.abs());
            }
        }
    }
    Ok(AdaptedCoordinates {
        f: cumulative_trapezoid(&us, &f_prime),
        g: cumulative_trapezoid(&vs, &g_prime),
        u: us,
        v: vs,
        f_prime,
        g_prime,
        sign,
        check_residual,
    })
}

/// Composite Simpson quadrature of `2⟨κ₁,κ₂⟩ du dv` over the grid.
pub fn willmore_energy(chart: &SurfaceChart, grid: &Grid) -> Result<f64> {
    let integrand = grid.try_map(|u, v| Ok(2.0 * frame_at_order(chart, u, v, 4)?.kappa_inner().value()))?;
    grid.simpson(&integrand)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorReport {
    pub willmore_sup: f64,
    pub willmore_mean: f64,
    pub is_willmore: bool,
    pub swillmore: SWillmoreReport,
    pub isothermic: Result<IsothermicReport>,
    pub energy: Result<f64>,
}

/// All detectors on one grid.
pub fn detect(chart: &SurfaceChart, grid: &Grid, th: Thresholds) -> Result<DetectorReport> {
    let w = grid.try_map(|u, v| willmore_residual(chart, u, v).map(|(a, b)| a.max(b)))?;
    let willmore_sup = w.iter().fold(0.0f64, |m, x| m.max(*x));
    let willmore_mean = w.iter().sum::<f64>() / w.len() as f64;
    Ok(DetectorReport {
        willmore_sup,
        willmore_mean,
        is_willmore: willmore_sup <= th.zero,
        swillmore: swillmore_test(chart, grid, th)?,
        isothermic: isothermic_test(chart, grid, th),
        energy: willmore_energy(chart, grid),
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

    fn grid(c: &SurfaceChart, n: usize) -> Grid {
        Grid::interior(c.domain, n, n, 0.05).unwrap()
    }

    #[test]
    fn cylinder_willmore_residual() {
        let (a, b) = willmore_residual(&chart("cylinder_r31"), 0.4, -0.7).unwrap();
        assert_abs_diff_eq!(a, 0.03125, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 0.03125, epsilon = 1e-12);
    }

    #[test]
    fn minimal_surfaces_are_willmore() {
        for name in ["nullsum_minimal_r31", "clifford_s31", "plane_r31"] {
            let c = chart(name);
            for (u, v) in grid(&c, 6).points() {
                let (a, b) = willmore_residual(&c, u, v).unwrap();
                assert!(a < 1e-8 && b < 1e-8, "{name} ({u},{v}): {a:e} {b:e}");
            }
        }
    }

    #[test]
    fn swillmore_examples() {
        let th = Thresholds::default();
        let c = chart("cylinder_r31");
        let r = swillmore_test(&c, &grid(&c, 5), th).unwrap();
        assert!(r.parallelism_residual < 1e-12);
        assert!(r.mu1.iter().all(|m| m.unwrap().abs() < 1e-12));
        assert!(!r.is_swillmore);
        let c = chart("clifford_s31");
        assert!(swillmore_test(&c, &grid(&c, 5), th).unwrap().is_swillmore);
        let c = chart("plane_r31");
        assert_eq!(swillmore_test(&c, &grid(&c, 3), th).unwrap_err(), Error::IdenticallyUmbilic);
    }

    #[test]
    fn isothermic_examples() {
        let th = Thresholds::default();
        for name in ["cylinder_r31", "clifford_s31", "nullsum_minimal_r31"] {
            let c = chart(name);
            let r = isothermic_test(&c, &grid(&c, 6), th).unwrap();
            assert_eq!(r.sign, Some(1), "{name}: {r:?}");
            assert!(r.separability_residual < 1e-8, "{name}");
        }
    }

    #[test]
    fn adapted_coordinates() {
        let th = Thresholds::default();
        let c = chart("cylinder_r31");
        let a = adapt_coordinates(&c, &grid(&c, 5), th).unwrap();
        for (u, f) in a.u.iter().zip(&a.f) {
            assert_abs_diff_eq!(*f, u - a.u[0], epsilon = 1e-12);
        }
        let c = chart("nullsum_minimal_r31");
        let a = adapt_coordinates(&c, &grid(&c, 7), th).unwrap();
        assert!(a.check_residual < 1e-6, "{}", a.check_residual);
    }

    #[test]
    fn energies() {
        let c = chart("cylinder_r31");
        let g = Grid::new(5, 5, [0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(willmore_energy(&c, &g).unwrap(), 0.125, epsilon = 1e-12);
        let c = chart("plane_r31");
        assert_abs_diff_eq!(willmore_energy(&c, &g).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn simpson_refinement_on_nullsum() {
        let c = chart("nullsum_minimal_r31");
        let rect = [-1.0, 1.0, -1.0, 1.0];
        let w = |n| willmore_energy(&c, &Grid::new(n, n, rect).unwrap()).unwrap();
        let (w1, w2, w3) = (w(9), w(17), w(33));
        let ratio = (w1 - w2) / (w2 - w3);
        assert!(ratio > 10.0, "convergence ratio {ratio}");
    }
}
