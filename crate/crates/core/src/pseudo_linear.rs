//! Linear algebra over `R^m` with a diagonal indefinite metric.
//!
//! Coordinates are ordered with the positive block first: a vector in
//! signature `(p, q)` has `⟨x, x⟩ = x₁² + … + x_p² − x_{p+1}² − … − x_{p+q}²`.
//! The ambient of `Q³₁` is `(3, 2)` with sign pattern `(+,+,+,−,−)`.
//!
//! Everything here is generic over [`Scalar`] so that the same projection
//! and Gram–Schmidt code runs on plain numbers and on Taylor jets.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default relative threshold for null / causal classification.
pub const EPS_NULL: f64 = 1e-8;
/// Relative pivot threshold for the indefinite Gram–Schmidt.
pub const EPS_PIVOT: f64 = 1e-10;

/// Number-like values the linear algebra runs on.
pub trait Scalar: Clone + fmt::Debug + Send + Sync {
    /// A constant carrying the same shape (e.g. jet order) as `like`.
    fn constant_like(value: f64, like: &Self) -> Self;
    /// Numeric value at the base point.
    fn value(&self) -> f64;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn scale(&self, factor: f64) -> Self;
    fn sqrt(&self) -> Result<Self>;
    fn recip(&self) -> Result<Self>;
}

impl Scalar for f64 {
    fn constant_like(value: f64, _like: &Self) -> Self {
        value
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, factor: f64) -> Self {
        self * factor
    }
    fn sqrt(&self) -> Result<Self> {
        if *self < 0.0 {
            return Err(Error::Singular { op: "sqrt", value: *self });
        }
        Ok(f64::sqrt(*self))
    }
    fn recip(&self) -> Result<Self> {
        if self.abs() < f64::MIN_POSITIVE {
            return Err(Error::Singular { op: "div", value: *self });
        }
        Ok(1.0 / self)
    }
}

/// Diagonal metric with `positives` plus signs followed by `negatives`
/// minus signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MetricSignature {
    pub positives: usize,
    pub negatives: usize,
}

impl MetricSignature {
    pub const fn new(positives: usize, negatives: usize) -> Self {
        Self { positives, negatives }
    }

    /// Ambient `R^{n+2}_{r+1}` of the light-cone model of `Q^n_r`.
    pub const fn conformal_ambient(n: usize, r: usize) -> Self {
        Self::new(n - r + 1, r + 1)
    }

    #[inline]
    pub const fn dim(&self) -> usize {
        self.positives + self.negatives
    }

    #[inline]
    pub fn sign(&self, i: usize) -> f64 {
        if i < self.positives {
            1.0
        } else {
            -1.0
        }
    }

    /// The diagonal metric matrix `G`.
    pub fn gram(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| if i == j { self.sign(i) } else { 0.0 })
    }
}

impl fmt::Display for MetricSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.positives, self.negatives)
    }
}

/// Causal character of a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CausalType {
    Null,
    /// Negative self-inner-product.
    Timelike,
    /// Positive self-inner-product.
    Spacelike,
}

impl CausalType {
    pub fn as_str(&self) -> &'static str {
        match self {
            CausalType::Null => "null",
            CausalType::Timelike => "timelike",
            CausalType::Spacelike => "spacelike",
        }
    }
}

/// A vector in an indefinite inner-product space. The default scalar is
/// `f64`; [`crate::JetVector`] is the jet-valued instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoVector<T = f64> {
    coords: Vec<T>,
    signature: MetricSignature,
}

impl<T: Scalar> PseudoVector<T> {
    pub fn new(coords: Vec<T>, signature: MetricSignature) -> Result<Self> {
        if coords.len() != signature.dim() {
            return Err(Error::DimensionMismatch {
                expected: signature.dim(),
                got: coords.len(),
            });
        }
        Ok(Self { coords, signature })
    }

    pub(crate) fn from_parts(coords: Vec<T>, signature: MetricSignature) -> Self {
        debug_assert_eq!(coords.len(), signature.dim());
        Self { coords, signature }
    }

    #[inline]
    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    #[inline]
    pub fn signature(&self) -> MetricSignature {
        self.signature
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.signature != other.signature {
            return Err(Error::SignatureMismatch(
                self.signature.to_string(),
                other.signature.to_string(),
            ));
        }
        Ok(())
    }

    pub fn inner(&self, other: &Self) -> Result<T> {
        self.check(other)?;
        Ok(self.dot(other))
    }

    /// Inner product without the signature check; callers guarantee a
    /// shared signature.
    pub(crate) fn dot(&self, other: &Self) -> T {
        let p = self.signature.positives;
        let mut pos = self.coords[0].mul(&other.coords[0]);
        for i in 1..p {
            pos = pos.add(&self.coords[i].mul(&other.coords[i]));
        }
        let mut acc = pos;
        for i in p..self.dim() {
            acc = acc.sub(&self.coords[i].mul(&other.coords[i]));
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_parts(
            self.coords.iter().zip(&other.coords).map(|(a, b)| a.add(b)).collect(),
            self.signature,
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_parts(
            self.coords.iter().zip(&other.coords).map(|(a, b)| a.sub(b)).collect(),
            self.signature,
        )
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_parts(self.coords.iter().map(|a| a.scale(factor)).collect(), self.signature)
    }

    /// Multiply by a scalar field.
    pub fn mul(&self, factor: &T) -> Self {
        Self::from_parts(self.coords.iter().map(|a| a.mul(factor)).collect(), self.signature)
    }

    /// `self + factor · other`
    pub fn axpy(&self, factor: &T, other: &Self) -> Self {
        Self::from_parts(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a.add(&b.mul(factor)))
                .collect(),
            self.signature,
        )
    }

    /// Base-point values as a plain vector.
    pub fn values(&self) -> PseudoVector<f64> {
        PseudoVector::from_parts(self.coords.iter().map(Scalar::value).collect(), self.signature)
    }

    /// Sup-norm of the base-point values.
    pub fn sup_norm(&self) -> f64 {
        self.coords.iter().fold(0.0, |m, c| m.max(c.value().abs()))
    }
}

impl PseudoVector<f64> {
    pub fn zeros(signature: MetricSignature) -> Self {
        Self::from_parts(vec![0.0; signature.dim()], signature)
    }

    /// Standard basis vector `e_i` (zero-based).
    pub fn basis(signature: MetricSignature, i: usize) -> Self {
        let mut v = Self::zeros(signature);
        v.coords[i] = 1.0;
        v
    }

    pub fn from_slice(coords: &[f64], signature: MetricSignature) -> Result<Self> {
        Self::new(coords.to_vec(), signature)
    }

    pub fn self_inner(&self) -> f64 {
        self.dot(self)
    }

    /// `|⟨x,x⟩| ≤ eps · max(1, ‖x‖∞²)`
    pub fn is_null(&self, eps: f64) -> bool {
        self.self_inner().abs() <= eps * self.sup_norm().powi(2).max(1.0)
    }

    /// Causal type with a threshold relative to `‖x‖∞²`.
    pub fn causal_type(&self, eps: f64) -> CausalType {
        let q = self.self_inner();
        let scale = self.sup_norm().powi(2);
        if q.abs() <= eps * scale {
            CausalType::Null
        } else if q < 0.0 {
            CausalType::Timelike
        } else {
            CausalType::Spacelike
        }
    }

    /// Embed numeric values as constant jets of the given order.
    pub fn to_jets(&self, order: usize) -> PseudoVector<crate::Jet2> {
        PseudoVector::from_parts(
            self.coords.iter().map(|&c| crate::Jet2::constant(c, order)).collect(),
            self.signature,
        )
    }
}

impl PseudoVector<crate::Jet2> {
    pub fn d_u(&self) -> Self {
        Self::from_parts(self.coords.iter().map(|c| c.d_u()).collect(), self.signature)
    }

    pub fn d_v(&self) -> Self {
        Self::from_parts(self.coords.iter().map(|c| c.d_v()).collect(), self.signature)
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self::from_parts(self.coords.iter().map(|c| c.truncate(order)).collect(), self.signature)
    }

    pub fn order(&self) -> usize {
        self.coords.iter().map(|c| c.order()).min().unwrap_or(0)
    }
}

/// The four vectors spanning the mean-curvature-sphere bundle `V`,
/// normalized by `⟨Y_u,Y_v⟩ = 1/2`, `⟨N,Y⟩ = −1` and all other pairings
/// zero.
#[derive(Debug, Clone)]
pub struct TangentFrame<T = f64> {
    pub y: PseudoVector<T>,
    pub y_u: PseudoVector<T>,
    pub y_v: PseudoVector<T>,
    pub n: PseudoVector<T>,
}

impl<T: Scalar> TangentFrame<T> {
    /// Largest deviation from the normalization relations at the base point.
    pub fn normalization_residual(&self) -> f64 {
        let v = |a: &PseudoVector<T>, b: &PseudoVector<T>| a.dot(b).value();
        let checks = [
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
        ];
        checks.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Split `w` into its `V` and `V^⊥` parts.
    pub fn project(&self, w: &PseudoVector<T>) -> Result<(PseudoVector<T>, PseudoVector<T>)> {
        self.y.check(w)?;
        let residual = self.normalization_residual();
        let scale = self.y.sup_norm().max(self.n.sup_norm()).max(1.0).powi(2);
        if residual > 1e-8 * scale {
            return Err(Error::InvalidFrame(residual));
        }
        let tangent = self.tangent_part(w);
        let normal = w.sub(&tangent);
        Ok((tangent, normal))
    }

    /// `−⟨w,N⟩Y − ⟨w,Y⟩N + 2⟨w,Y_v⟩Y_u + 2⟨w,Y_u⟩Y_v`, unchecked.
    pub(crate) fn tangent_part(&self, w: &PseudoVector<T>) -> PseudoVector<T> {
        let cy = w.dot(&self.n).scale(-1.0);
        let cn = w.dot(&self.y).scale(-1.0);
        let cu = w.dot(&self.y_v).scale(2.0);
        let cv = w.dot(&self.y_u).scale(2.0);
        self.y.mul(&cy).axpy(&cn, &self.n).axpy(&cu, &self.y_u).axpy(&cv, &self.y_v)
    }

    pub(crate) fn normal_part(&self, w: &PseudoVector<T>) -> PseudoVector<T> {
        w.sub(&self.tangent_part(w))
    }
}

/// `project_frame`: tangent and normal parts of `w` relative to `frame`.
pub fn project_frame<T: Scalar>(
    frame: &TangentFrame<T>,
    w: &PseudoVector<T>,
) -> Result<(PseudoVector<T>, PseudoVector<T>)> {
    frame.project(w)
}

/// A unit vector together with its sign `⟨e,e⟩ = ±1`.
#[derive(Debug, Clone)]
pub struct SignedUnit<T = f64> {
    pub vector: PseudoVector<T>,
    pub sign: f64,
}

/// Pivoted Gram–Schmidt for an indefinite metric.
///
/// At each step the remaining candidate with the largest `|⟨w,w⟩|` (after
/// orthogonalizing against the accepted vectors) is normalized next. When
/// every remaining candidate is numerically null but two of them pair
/// non-trivially, they are combined into `w_i + w_j`, which is not null.
/// `max_rank` stops early once that many vectors were produced; without
/// it every input must yield a basis vector.
pub fn pivoted_gram_schmidt<T: Scalar>(
    seed: Vec<SignedUnit<T>>,
    candidates: &[PseudoVector<T>],
    max_rank: Option<usize>,
) -> Result<Vec<SignedUnit<T>>> {
    let mut basis = seed;
    let target = max_rank.unwrap_or(basis.len() + candidates.len());
    let scale = candidates
        .iter()
        .map(|c| c.sup_norm().powi(2))
        .fold(1.0, f64::max);
    let threshold = EPS_PIVOT * scale;
    let mut pool: Vec<PseudoVector<T>> = candidates.to_vec();

    while basis.len() < target {
        // orthogonalize pool against the current basis
        let reduced: Vec<PseudoVector<T>> = pool
            .iter()
            .map(|w| {
                basis.iter().fold(w.clone(), |acc, e| {
                    let c = acc.dot(&e.vector).scale(e.sign);
                    acc.axpy(&c.scale(-1.0), &e.vector)
                })
            })
            .collect();
        if reduced.is_empty() {
            return Err(Error::DegenerateSubspace);
        }
        let self_products: Vec<f64> = reduced.iter().map(|w| w.dot(w).value()).collect();
        let (best, best_val) = self_products
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, &q)| if q.abs() > bv.abs() { (i, q) } else { (bi, bv) });

        let chosen = if best_val.abs() > threshold {
            pool.remove(best);
            reduced[best].clone()
        } else {
            // every candidate is null: look for a non-trivially pairing couple
            let mut pair = None;
            let mut pair_val = 0.0f64;
            for i in 0..reduced.len() {
                for j in (i + 1)..reduced.len() {
                    let q = reduced[i].dot(&reduced[j]).value();
                    if q.abs() > pair_val.abs() {
                        pair_val = q;
                        pair = Some((i, j));
                    }
                }
            }
            match pair {
                Some((i, j)) if pair_val.abs() > threshold => {
                    let combined = reduced[i].add(&reduced[j]);
                    pool[i] = pool[i].add(&pool[j]);
                    combined
                }
                _ => return Err(Error::DegenerateSubspace),
            }
        };
        // second pass against the accepted basis
        let chosen = basis.iter().fold(chosen, |acc, e| {
            let c = acc.dot(&e.vector).scale(e.sign);
            acc.axpy(&c.scale(-1.0), &e.vector)
        });
        let q = chosen.dot(&chosen);
        let sign = if q.value() > 0.0 { 1.0 } else { -1.0 };
        let norm = q.scale(sign).sqrt()?;
        let inv = norm.recip()?;
        basis.push(SignedUnit {
            vector: chosen.mul(&inv),
            sign,
        });
    }
    Ok(basis)
}

/// Orthonormalize linearly independent vectors; signs are `⟨e,e⟩`.
pub fn gram_schmidt_indefinite<T: Scalar>(vectors: &[PseudoVector<T>]) -> Result<Vec<SignedUnit<T>>> {
    if let Some(first) = vectors.first() {
        for v in vectors {
            first.check(v)?;
        }
    }
    pivoted_gram_schmidt(Vec::new(), vectors, None)
}

/// Which point of the model a normalizing transform sends `Y₀` to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetLabel {
    /// `e₁ + e_m`, the point at infinity of the flat model.
    NullInfinity,
    /// `e_m`, the pole of the de Sitter model.
    DeSitterPole,
    /// `e₁`, the pole of the anti-de Sitter model.
    AntiDeSitterPole,
}

/// A metric-preserving matrix normalizing a fixed point of the model.
#[derive(Debug, Clone)]
pub struct NormalizingTransform {
    pub matrix: DMatrix<f64>,
    pub target_label: TargetLabel,
    pub signature: MetricSignature,
}

impl NormalizingTransform {
    pub fn apply<T: Scalar>(&self, x: &PseudoVector<T>) -> PseudoVector<T> {
        let m = self.signature.dim();
        let coords = (0..m)
            .map(|i| {
                let mut acc = x.coords[0].scale(self.matrix[(i, 0)]);
                for j in 1..m {
                    acc = acc.add(&x.coords[j].scale(self.matrix[(i, j)]));
                }
                acc
            })
            .collect();
        PseudoVector::from_parts(coords, self.signature)
    }

    /// `max |TᵗGT − G|`
    pub fn metric_residual(&self) -> f64 {
        let g = self.signature.gram();
        let r = self.matrix.transpose() * &g * &self.matrix - g;
        r.amax()
    }
}

/// Build `T ∈ O(p,q)` sending `y0` to a multiple of `e₁ + e_m` (null),
/// `e_m` (timelike) or `e₁` (spacelike).
pub fn normalizing_transform(y0: &PseudoVector, causal: CausalType) -> Result<NormalizingTransform> {
    normalizing_transform_with(y0, causal, EPS_NULL)
}

pub fn normalizing_transform_with(
    y0: &PseudoVector,
    causal: CausalType,
    eps_causal: f64,
) -> Result<NormalizingTransform> {
    let sig = y0.signature();
    let m = sig.dim();
    let actual = y0.causal_type(eps_causal);
    if actual != causal {
        return Err(Error::CausalMismatch {
            expected: causal.as_str(),
            value: y0.self_inner(),
        });
    }
    let first = PseudoVector::basis(sig, 0);
    let last = PseudoVector::basis(sig, m - 1);
    let (matrix, label) = match causal {
        CausalType::Timelike => {
            let e = y0.scale(1.0 / (-y0.self_inner()).sqrt());
            (reflection_onto(&e, &last)?, TargetLabel::DeSitterPole)
        }
        CausalType::Spacelike => {
            let e = y0.scale(1.0 / y0.self_inner().sqrt());
            (reflection_onto(&e, &first)?, TargetLabel::AntiDeSitterPole)
        }
        CausalType::Null => {
            // unit timelike q with ⟨y0,q⟩ ≠ 0; then y0 = |α|(p + sgn(α) q)
            let q_index = (sig.positives..m)
                .max_by(|&a, &b| y0.coords[a].abs().total_cmp(&y0.coords[b].abs()))
                .ok_or(Error::DegenerateSubspace)?;
            let q = PseudoVector::basis(sig, q_index);
            let alpha = -y0.dot(&q);
            if alpha.abs() <= f64::EPSILON * y0.sup_norm() {
                return Err(Error::DegenerateSubspace);
            }
            let p = y0.sub(&q.scale(alpha)).scale(1.0 / alpha.abs());
            let timelike = q.scale(alpha.signum());
            // first send the timelike leg to ±e_m, then the spacelike leg to e_1
            let r1 = reflection_onto(&timelike, &last)?;
            let p1 = apply_matrix(&r1, &p);
            let t1 = apply_matrix(&r1, &timelike);
            let mut r2 = reflection_onto(&p1, &first)?;
            let p2 = apply_matrix(&r2, &p1);
            let t2 = apply_matrix(&r2, &t1);
            // align signs so the image is a positive multiple of e_1 + e_m
            if p2.coords[0] < 0.0 {
                r2 = -r2;
            }
            if t2.coords[m - 1] * p2.coords[0] < 0.0 {
                let mut flip = DMatrix::identity(m, m);
                flip[(m - 1, m - 1)] = -1.0;
                r2 = flip * r2;
            }
            (r2 * r1, TargetLabel::NullInfinity)
        }
    };
    let transform = NormalizingTransform {
        matrix,
        target_label: label,
        signature: sig,
    };
    let residual = transform.metric_residual();
    if residual > 1e-12 {
        return Err(Error::InvalidFrame(residual));
    }
    Ok(transform)
}

fn apply_matrix(t: &DMatrix<f64>, x: &PseudoVector) -> PseudoVector {
    let m = x.dim();
    let coords = (0..m).map(|i| (0..m).map(|j| t[(i, j)] * x.coords[j]).sum()).collect();
    PseudoVector::from_parts(coords, x.signature)
}

/// Indefinite reflection `x ↦ x − 2⟨x,w⟩/⟨w,w⟩ w`.
fn reflection(w: &PseudoVector) -> DMatrix<f64> {
    let sig = w.signature();
    let m = sig.dim();
    let q = w.self_inner();
    DMatrix::from_fn(m, m, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - 2.0 * w.coords[i] * sig.sign(j) * w.coords[j] / q
    })
}

/// An element of `O(p,q)` taking the unit vector `e` to `±target`, where
/// `⟨e,e⟩ = ⟨target,target⟩ = ±1`. Identity when `e` already equals the
/// target.
fn reflection_onto(e: &PseudoVector, target: &PseudoVector) -> Result<DMatrix<f64>> {
    let m = e.dim();
    if e.sub(target).sup_norm() < 1e-15 {
        return Ok(DMatrix::identity(m, m));
    }
    let minus = e.sub(target);
    let plus = e.add(target);
    let w = if minus.self_inner().abs() >= plus.self_inner().abs() {
        minus
    } else {
        plus
    };
    if w.self_inner().abs() < 1e-14 {
        return Err(Error::DegenerateSubspace);
    }
    Ok(reflection(&w))
}
