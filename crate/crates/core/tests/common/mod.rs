//! Test-only oracles. Nothing here calls into the kernels it is used to check.

#![allow(dead_code)]

pub mod fd;

use quatkg::model::{InitOptions, ParamStore, QTable, ScoreVariant};
use quatkg::quat::QVec;
use quatkg::Triple;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_qvec(rng: &mut impl Rng, n: usize) -> QVec<f64> {
    let mut plane = || {
        (0..n)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect::<Vec<f64>>()
    };
    QVec::new(plane(), plane(), plane(), plane()).unwrap()
}

pub fn random_store(rng: &mut impl Rng, ne: usize, nr: usize, n: usize) -> ParamStore<f64> {
    ParamStore::init(ne, nr, n, rng.gen(), InitOptions::default()).unwrap()
}

// e_a * e_b = sign * e_c with 0=1, 1=i, 2=j, 3=k
const BASIS: [[(f64, usize); 4]; 4] = [
    [(1.0, 0), (1.0, 1), (1.0, 2), (1.0, 3)],
    [(1.0, 1), (-1.0, 0), (1.0, 3), (-1.0, 2)],
    [(1.0, 2), (-1.0, 3), (-1.0, 0), (1.0, 1)],
    [(1.0, 3), (1.0, 2), (-1.0, 1), (-1.0, 0)],
];

/// 16-term schoolbook quaternion product.
pub fn schoolbook(q: [f64; 4], p: [f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for a in 0..4 {
        for b in 0..4 {
            let (sign, c) = BASIS[a][b];
            out[c] += sign * q[a] * p[b];
        }
    }
    out
}

pub fn scalar_normalize(q: [f64; 4]) -> [f64; 4] {
    let s = (q.iter().map(|x| x * x).sum::<f64>() + 1e-12).sqrt();
    q.map(|x| x / s)
}

fn planes(t: &QTable<f64>) -> [&[f64]; 4] {
    let [r, i, j, k] = t.planes();
    [r.as_slice(), i.as_slice(), j.as_slice(), k.as_slice()]
}

fn coord(store_plane: [&[f64]; 4], row: usize, n: usize, d: usize) -> [f64; 4] {
    store_plane.map(|p| p[row * n + d])
}

/// Straight-line reimplementation of every score variant, one coordinate at a
/// time, using the schoolbook product.
pub fn scalar_score(p: &ParamStore<f64>, v: ScoreVariant, tr: Triple) -> f64 {
    let n = p.dim();
    let ent = planes(&p.entity);
    let rel = planes(&p.relation);
    let w1 = planes(&p.rot1);
    let w2 = planes(&p.rot2);
    let (h, r, t) = (tr.h as usize, tr.r as usize, tr.t as usize);
    let mut total = 0.0;
    for d in 0..n {
        let vh = coord(ent, h, n, d);
        let vt = coord(ent, t, n, d);
        let vr = scalar_normalize(coord(rel, r, n, d));
        let a = scalar_normalize(coord(w1, r, n, d));
        let b = scalar_normalize(coord(w2, r, n, d));
        let (lhs, rhs) = match v {
            ScoreVariant::QuatRE => (schoolbook(schoolbook(vh, a), vr), schoolbook(vt, b)),
            ScoreVariant::QuatE => (schoolbook(vh, vr), vt),
            ScoreVariant::OnlyRot1 => (schoolbook(schoolbook(vh, a), vr), vt),
            ScoreVariant::OnlyRot2 => (schoolbook(vh, vr), schoolbook(vt, b)),
        };
        total += (0..4).map(|c| lhs[c] * rhs[c]).sum::<f64>();
    }
    total
}

pub const FD_STEP: f64 = 1e-6;

/// Central differences of `f` at `x`.
pub fn numeric_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|idx| {
            let orig = probe[idx];
            probe[idx] = orig + FD_STEP;
            let up = f(&probe);
            probe[idx] = orig - FD_STEP;
            let down = f(&probe);
            probe[idx] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `‖a - b‖∞ / max(‖a‖∞, ‖b‖∞)`; zero when both vectors are zero.
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let inf = |v: &[f64]| v.iter().fold(0f64, |m, x| m.max(x.abs()));
    let scale = inf(analytic).max(inf(numeric));
    if scale == 0.0 {
        return 0.0;
    }
    let diff = analytic
        .iter()
        .zip(numeric)
        .fold(0f64, |m, (a, b)| m.max((a - b).abs()));
    diff / scale
}

/// Per-coordinate magnitudes without going through the crate.
pub fn magnitudes(q: &QVec<f64>) -> Vec<f64> {
    (0..q.len())
        .map(|d| q.get(d).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect()
}
