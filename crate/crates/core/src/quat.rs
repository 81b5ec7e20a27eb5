//! Quaternion-vector algebra.
//!
//! A quaternion vector `q ∈ H^n` is stored as four real planes `r, i, j, k`,
//! each of length `n`. Every operation acts coordinate-wise: coordinate `d` of
//! the result depends only on coordinate `d` of the inputs (except for the
//! inner product, which sums over coordinates).
//!
//! Each forward kernel has a reverse-mode counterpart. The `*_acc` variants add
//! into caller-owned gradient buffers so the model can chain them without
//! allocating.

use crate::error::{Error, Result};
use crate::real::Real;

/// Guard added under the square root when normalizing.
pub const NORM_EPS: f64 = 1e-12;

/// Owned quaternion vector in component-planar layout.
#[derive(Debug, Clone, PartialEq)]
pub struct QVec<T> {
    pub r: Vec<T>,
    pub i: Vec<T>,
    pub j: Vec<T>,
    pub k: Vec<T>,
}

/// Gradient with respect to a [`QVec`]; same layout.
pub type QGrad<T> = QVec<T>;

/// Borrowed view of a quaternion vector. Rows of the parameter tables are
/// handed out as `QRef`s.
#[derive(Debug, Clone, Copy)]
pub struct QRef<'a, T> {
    pub r: &'a [T],
    pub i: &'a [T],
    pub j: &'a [T],
    pub k: &'a [T],
}

/// Mutable view of a quaternion vector.
#[derive(Debug)]
pub struct QMut<'a, T> {
    pub r: &'a mut [T],
    pub i: &'a mut [T],
    pub j: &'a mut [T],
    pub k: &'a mut [T],
}

impl<T: Real> QVec<T> {
    /// Builds a vector from four planes. Fails unless all planes share one
    /// length `n ≥ 1`.
    pub fn new(r: Vec<T>, i: Vec<T>, j: Vec<T>, k: Vec<T>) -> Result<Self> {
        let n = r.len();
        if n == 0 {
            return Err(Error::Shape("quaternion vector needs n >= 1".into()));
        }
        if i.len() != n || j.len() != n || k.len() != n {
            return Err(Error::Shape(format!(
                "component planes differ in length: r={} i={} j={} k={}",
                n,
                i.len(),
                j.len(),
                k.len()
            )));
        }
        Ok(QVec { r, i, j, k })
    }

    pub fn zeros(n: usize) -> Self {
        QVec {
            r: vec![T::zero(); n],
            i: vec![T::zero(); n],
            j: vec![T::zero(); n],
            k: vec![T::zero(); n],
        }
    }

    /// The multiplicative identity `1 + 0i + 0j + 0k` at every coordinate.
    pub fn identity(n: usize) -> Self {
        let mut q = Self::zeros(n);
        q.r.fill(T::one());
        q
    }

    /// Builds a vector from per-coordinate quaternions `[r, i, j, k]`.
    pub fn from_coords(coords: &[[T; 4]]) -> Result<Self> {
        let n = coords.len();
        let mut q = Self::zeros(n);
        for (d, c) in coords.iter().enumerate() {
            q.set(d, *c);
        }
        Self::new(q.r, q.i, q.j, q.k)
    }

    /// Inverse of [`QVec::flatten`]: `[r..., i..., j..., k...]`.
    pub fn from_flat(flat: &[T]) -> Result<Self> {
        if !flat.len().is_multiple_of(4) {
            return Err(Error::Shape(format!(
                "flat length {} is not a multiple of 4",
                flat.len()
            )));
        }
        let n = flat.len() / 4;
        Self::new(
            flat[..n].to_vec(),
            flat[n..2 * n].to_vec(),
            flat[2 * n..3 * n].to_vec(),
            flat[3 * n..].to_vec(),
        )
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.r.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    #[inline]
    pub fn view(&self) -> QRef<'_, T> {
        QRef {
            r: &self.r,
            i: &self.i,
            j: &self.j,
            k: &self.k,
        }
    }

    #[inline]
    pub fn view_mut(&mut self) -> QMut<'_, T> {
        QMut {
            r: &mut self.r,
            i: &mut self.i,
            j: &mut self.j,
            k: &mut self.k,
        }
    }

    #[inline]
    pub fn get(&self, d: usize) -> [T; 4] {
        self.view().get(d)
    }

    #[inline]
    pub fn set(&mut self, d: usize, c: [T; 4]) {
        self.r[d] = c[0];
        self.i[d] = c[1];
        self.j[d] = c[2];
        self.k[d] = c[3];
    }

    pub fn fill(&mut self, value: T) {
        for plane in self.planes_mut() {
            plane.fill(value);
        }
    }

    /// Concatenation `[r..., i..., j..., k...]` of length `4n`.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(4 * self.len());
        for plane in self.planes() {
            out.extend_from_slice(plane);
        }
        out
    }

    pub fn planes(&self) -> [&[T]; 4] {
        [&self.r, &self.i, &self.j, &self.k]
    }

    pub fn planes_mut(&mut self) -> [&mut Vec<T>; 4] {
        [&mut self.r, &mut self.i, &mut self.j, &mut self.k]
    }

    pub fn is_finite(&self) -> bool {
        self.view().is_finite()
    }

    /// Per-coordinate quaternion magnitude `sqrt(r² + i² + j² + k²)`.
    pub fn magnitudes(&self) -> Vec<T> {
        self.view().magnitudes()
    }

    pub fn sum_squares(&self) -> T {
        self.view().sum_squares()
    }

    /// `self += alpha * other`, plane by plane.
    pub fn add_scaled(&mut self, alpha: T, other: QRef<'_, T>) {
        self.view_mut().add_scaled(alpha, other);
    }
}

impl<'a, T: Real> QRef<'a, T> {
    /// Builds a view from four planes without checking lengths.
    pub fn from_planes(r: &'a [T], i: &'a [T], j: &'a [T], k: &'a [T]) -> Self {
        QRef { r, i, j, k }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.r.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    #[inline]
    pub fn get(&self, d: usize) -> [T; 4] {
        [self.r[d], self.i[d], self.j[d], self.k[d]]
    }

    pub fn to_owned(&self) -> QVec<T> {
        QVec {
            r: self.r.to_vec(),
            i: self.i.to_vec(),
            j: self.j.to_vec(),
            k: self.k.to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.r, self.i, self.j, self.k]
            .iter()
            .all(|p| p.iter().all(|x| x.is_finite()))
    }

    pub fn magnitudes(&self) -> Vec<T> {
        (0..self.len())
            .map(|d| {
                let [a, b, c, e] = self.get(d);
                (a * a + b * b + c * c + e * e).sqrt()
            })
            .collect()
    }

    pub fn sum_squares(&self) -> T {
        qinner_unchecked(*self, *self)
    }

    fn same_len(&self, other: &QRef<'_, T>) -> bool {
        let n = self.len();
        other.len() == n && self.i.len() == n && self.j.len() == n && self.k.len() == n
    }
}

impl<T: Real> QMut<'_, T> {
    #[inline]
    pub fn len(&self) -> usize {
        self.r.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    #[inline]
    pub fn set(&mut self, d: usize, c: [T; 4]) {
        self.r[d] = c[0];
        self.i[d] = c[1];
        self.j[d] = c[2];
        self.k[d] = c[3];
    }

    #[inline]
    pub fn add_at(&mut self, d: usize, c: [T; 4]) {
        self.r[d] += c[0];
        self.i[d] += c[1];
        self.j[d] += c[2];
        self.k[d] += c[3];
    }

    pub fn as_ref(&self) -> QRef<'_, T> {
        QRef {
            r: self.r,
            i: self.i,
            j: self.j,
            k: self.k,
        }
    }

    pub fn add_scaled(&mut self, alpha: T, other: QRef<'_, T>) {
        for d in 0..self.len() {
            let o = other.get(d);
            self.add_at(d, [alpha * o[0], alpha * o[1], alpha * o[2], alpha * o[3]]);
        }
    }
}

// ---- scalar quaternion helpers -------------------------------------------

/// Hamilton product of two scalar quaternions `[r, i, j, k]`.
#[inline(always)]
pub fn qmul<T: Real>(q: [T; 4], p: [T; 4]) -> [T; 4] {
    let [qr, qi, qj, qk] = q;
    let [pr, pi, pj, pk] = p;
    [
        qr * pr - qi * pi - qj * pj - qk * pk,
        qi * pr + qr * pi - qk * pj + qj * pk,
        qj * pr + qk * pi + qr * pj - qi * pk,
        qk * pr - qj * pi + qi * pj + qr * pk,
    ]
}

#[inline(always)]
pub fn qconj<T: Real>(q: [T; 4]) -> [T; 4] {
    [q[0], -q[1], -q[2], -q[3]]
}

#[inline(always)]
fn guarded_norm<T: Real>(q: [T; 4]) -> T {
    (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3] + T::lit(NORM_EPS)).sqrt()
}

// ---- forward kernels -------------------------------------------------------

fn check_pair<T: Real>(q: &QRef<'_, T>, p: &QRef<'_, T>, op: &str) -> Result<()> {
    if !q.same_len(p) || !p.same_len(q) || q.is_empty() {
        return Err(Error::Shape(format!(
            "{op}: operand lengths {} and {}",
            q.len(),
            p.len()
        )));
    }
    Ok(())
}

/// Coordinate-wise Hamilton product `q ⊗ p`.
pub fn hamilton<T: Real>(q: QRef<'_, T>, p: QRef<'_, T>) -> Result<QVec<T>> {
    check_pair(&q, &p, "hamilton")?;
    let mut out = QVec::zeros(q.len());
    hamilton_into(q, p, out.view_mut());
    Ok(out)
}

/// Writes `q ⊗ p` into `out`. Lengths must agree.
#[inline]
pub fn hamilton_into<T: Real>(q: QRef<'_, T>, p: QRef<'_, T>, mut out: QMut<'_, T>) {
    debug_assert!(q.len() == p.len() && out.len() == q.len());
    for d in 0..q.len() {
        out.set(d, qmul(q.get(d), p.get(d)));
    }
}

/// Per-coordinate normalization `q◁ = q / sqrt(q_r² + q_i² + q_j² + q_k² + ε)`.
pub fn normalize<T: Real>(q: QRef<'_, T>) -> Result<QVec<T>> {
    if q.is_empty() || !q.same_len(&q) {
        return Err(Error::Shape("normalize: empty or ragged input".into()));
    }
    let mut out = QVec::zeros(q.len());
    normalize_into(q, out.view_mut());
    Ok(out)
}

#[inline]
pub fn normalize_into<T: Real>(q: QRef<'_, T>, mut out: QMut<'_, T>) {
    debug_assert_eq!(q.len(), out.len());
    for d in 0..q.len() {
        let c = q.get(d);
        let s = guarded_norm(c);
        out.set(d, [c[0] / s, c[1] / s, c[2] / s, c[3] / s]);
    }
}

/// Quaternion inner product `q_rᵀp_r + q_iᵀp_i + q_jᵀp_j + q_kᵀp_k`.
pub fn qinner<T: Real>(q: QRef<'_, T>, p: QRef<'_, T>) -> Result<T> {
    check_pair(&q, &p, "qinner")?;
    Ok(qinner_unchecked(q, p))
}

/// Inner product without shape checks. Summation runs coordinate by
/// coordinate, so `qinner(q, p)` and `qinner(p, q)` are bit-identical.
#[inline]
pub fn qinner_unchecked<T: Real>(q: QRef<'_, T>, p: QRef<'_, T>) -> T {
    let mut acc = T::zero();
    for d in 0..q.len() {
        acc += q.r[d] * p.r[d] + q.i[d] * p.i[d] + q.j[d] * p.j[d] + q.k[d] * p.k[d];
    }
    acc
}

// ---- backward kernels ------------------------------------------------------

/// Gradients of `L(q ⊗ p)` given `upstream = ∂L/∂(q ⊗ p)`.
///
/// Right multiplication by `p` is a linear map whose transpose is right
/// multiplication by `p*`, so `∂L/∂q = g ⊗ p*` and `∂L/∂p = q* ⊗ g`.
pub fn hamilton_backward<T: Real>(
    q: QRef<'_, T>,
    p: QRef<'_, T>,
    upstream: QRef<'_, T>,
) -> Result<(QGrad<T>, QGrad<T>)> {
    check_pair(&q, &p, "hamilton_backward")?;
    check_pair(&q, &upstream, "hamilton_backward upstream")?;
    let mut gq = QVec::zeros(q.len());
    let mut gp = QVec::zeros(q.len());
    hamilton_backward_acc(q, p, upstream, Some(gq.view_mut()), Some(gp.view_mut()));
    Ok((gq, gp))
}

/// Accumulating form of [`hamilton_backward`]. Either output may be skipped.
#[inline]
pub fn hamilton_backward_acc<T: Real>(
    q: QRef<'_, T>,
    p: QRef<'_, T>,
    upstream: QRef<'_, T>,
    mut grad_q: Option<QMut<'_, T>>,
    mut grad_p: Option<QMut<'_, T>>,
) {
    for d in 0..q.len() {
        let g = upstream.get(d);
        if let Some(gq) = grad_q.as_mut() {
            gq.add_at(d, qmul(g, qconj(p.get(d))));
        }
        if let Some(gp) = grad_p.as_mut() {
            gp.add_at(d, qmul(qconj(q.get(d)), g));
        }
    }
}

/// Gradient of `L(normalize(q))` given `upstream = ∂L/∂q◁`.
///
/// With `s = sqrt(|q|² + ε)` and `y = q / s`: `∂L/∂q = (g - y (y·g)) / s`.
pub fn normalize_backward<T: Real>(q: QRef<'_, T>, upstream: QRef<'_, T>) -> Result<QGrad<T>> {
    check_pair(&q, &upstream, "normalize_backward")?;
    let mut gq = QVec::zeros(q.len());
    normalize_backward_acc(q, upstream, gq.view_mut());
    Ok(gq)
}

#[inline]
pub fn normalize_backward_acc<T: Real>(
    q: QRef<'_, T>,
    upstream: QRef<'_, T>,
    mut grad_q: QMut<'_, T>,
) {
    for d in 0..q.len() {
        let c = q.get(d);
        let g = upstream.get(d);
        let s = guarded_norm(c);
        let y = [c[0] / s, c[1] / s, c[2] / s, c[3] / s];
        let yg = y[0] * g[0] + y[1] * g[1] + y[2] * g[2] + y[3] * g[3];
        grad_q.add_at(
            d,
            [
                (g[0] - y[0] * yg) / s,
                (g[1] - y[1] * yg) / s,
                (g[2] - y[2] * yg) / s,
                (g[3] - y[3] * yg) / s,
            ],
        );
    }
}

/// Gradients of `upstream · (q • p)`: `(upstream·p, upstream·q)`.
pub fn qinner_backward<T: Real>(
    q: QRef<'_, T>,
    p: QRef<'_, T>,
    upstream: T,
) -> Result<(QGrad<T>, QGrad<T>)> {
    check_pair(&q, &p, "qinner_backward")?;
    let mut gq = QVec::zeros(q.len());
    let mut gp = QVec::zeros(q.len());
    gq.add_scaled(upstream, p);
    gp.add_scaled(upstream, q);
    Ok((gq, gp))
}
