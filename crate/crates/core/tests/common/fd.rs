//! Finite-difference checks shared by the gradient tests and the acceptance
//! runner. Each returns the worst relative error over its instances.

use super::{numeric_grad, random_qvec, random_store, rel_error, rng};
use quatkg::model::{
    score, score_backward_into, InitOptions, ParamStore, ScoreVariant, SparseGrad, TableKind,
};
use quatkg::quat::{
    hamilton, hamilton_backward, normalize, normalize_backward, qinner, qinner_backward, QVec,
};
use quatkg::train::{loss_and_grad, ExecMode, LabeledTriple, RegScope};
use quatkg::Triple;
use rand::Rng;

fn split_flat(x: &[f64], n: usize) -> (QVec<f64>, QVec<f64>) {
    (
        QVec::from_flat(&x[..4 * n]).unwrap(),
        QVec::from_flat(&x[4 * n..]).unwrap(),
    )
}

pub fn hamilton_check(seed: u64, instances: usize) -> f64 {
    let mut rng = rng(seed);
    let n = 3;
    let mut worst = 0f64;
    for _ in 0..instances {
        let q = random_qvec(&mut rng, n);
        let p = random_qvec(&mut rng, n);
        let up = random_qvec(&mut rng, n);
        let (gq, gp) = hamilton_backward(q.view(), p.view(), up.view()).unwrap();
        let x = [q.flatten(), p.flatten()].concat();
        let num = numeric_grad(&x, |x| {
            let (q, p) = split_flat(x, n);
            qinner(hamilton(q.view(), p.view()).unwrap().view(), up.view()).unwrap()
        });
        worst = worst.max(rel_error(&[gq.flatten(), gp.flatten()].concat(), &num));
    }
    worst
}

pub fn normalize_check(seed: u64, instances: usize) -> f64 {
    let mut rng = rng(seed);
    let n = 3;
    let mut worst = 0f64;
    for _ in 0..instances {
        let q = random_qvec(&mut rng, n);
        let up = random_qvec(&mut rng, n);
        let g = normalize_backward(q.view(), up.view()).unwrap();
        let num = numeric_grad(&q.flatten(), |x| {
            let q = QVec::from_flat(x).unwrap();
            qinner(normalize(q.view()).unwrap().view(), up.view()).unwrap()
        });
        worst = worst.max(rel_error(&g.flatten(), &num));
    }
    worst
}

pub fn qinner_check(seed: u64, instances: usize) -> f64 {
    let mut rng = rng(seed);
    let n = 3;
    let mut worst = 0f64;
    for _ in 0..instances {
        let q = random_qvec(&mut rng, n);
        let p = random_qvec(&mut rng, n);
        let up: f64 = rng.gen_range(-2.0..2.0);
        let (gq, gp) = qinner_backward(q.view(), p.view(), up).unwrap();
        let x = [q.flatten(), p.flatten()].concat();
        let num = numeric_grad(&x, |x| {
            let (q, p) = split_flat(x, n);
            up * qinner(q.view(), p.view()).unwrap()
        });
        worst = worst.max(rel_error(&[gq.flatten(), gp.flatten()].concat(), &num));
    }
    worst
}

fn get_row(p: &ParamStore<f64>, kind: TableKind, id: u32) -> Vec<f64> {
    p.table(kind).row(id as usize).to_owned().flatten()
}

fn set_row(p: &mut ParamStore<f64>, kind: TableKind, id: u32, flat: &[f64]) {
    let q = QVec::from_flat(flat).unwrap();
    p.table_mut(kind).set_row(id as usize, q.view());
}

/// Finite-difference gradient of `loss` over every row of every table the
/// triples could touch, compared against `analytic`. Rows missing from the
/// sparse gradient must have zero numeric gradient.
fn check_sparse(
    params: &ParamStore<f64>,
    rows: &[(TableKind, u32)],
    analytic: &SparseGrad<f64>,
    mut loss: impl FnMut(&ParamStore<f64>) -> f64,
) -> f64 {
    let mut worst = 0f64;
    let mut probe = params.clone();
    for &(kind, id) in rows {
        let x = get_row(params, kind, id);
        let num = numeric_grad(&x, |x| {
            set_row(&mut probe, kind, id, x);
            loss(&probe)
        });
        set_row(&mut probe, kind, id, &x);
        match analytic.row(kind, id) {
            Some(g) => worst = worst.max(rel_error(&g.flatten(), &num)),
            None => assert!(
                num.iter().all(|v| v.abs() < 1e-9),
                "{kind:?} row {id} has gradient but none was reported"
            ),
        }
    }
    worst
}

fn all_rows(tr: &[Triple]) -> Vec<(TableKind, u32)> {
    let mut rows = Vec::new();
    for t in tr {
        rows.extend([(TableKind::Entity, t.h), (TableKind::Entity, t.t)]);
        for kind in [TableKind::Relation, TableKind::Rot1, TableKind::Rot2] {
            rows.push((kind, t.r));
        }
    }
    rows.sort();
    rows.dedup();
    rows
}

pub fn score_check(variant: ScoreVariant, seed: u64, instances: usize) -> f64 {
    let mut rng = rng(seed);
    let mut worst = 0f64;
    for _ in 0..instances {
        let p = random_store(&mut rng, 4, 2, 3);
        let tr = Triple::new(
            rng.gen_range(0..4),
            rng.gen_range(0..2),
            rng.gen_range(0..4),
        );
        let up: f64 = rng.gen_range(-2.0..2.0);
        let mut g = SparseGrad::new(3);
        score_backward_into(&p, variant, tr, up, &mut g).unwrap();
        worst = worst.max(check_sparse(&p, &all_rows(&[tr]), &g, |p| {
            up * score(p, variant, tr).unwrap()
        }));
    }
    worst
}

/// Full loss gradient on tiny batches (n = 2, λ = 0.1).
pub fn loss_check(variant: ScoreVariant, scope: RegScope, seed: u64, instances: usize) -> f64 {
    let mut rng = rng(seed);
    let mut worst = 0f64;
    for _ in 0..instances {
        // larger scale so that the loss is not flat
        let init = InitOptions {
            scale: Some(1.0),
            ..Default::default()
        };
        let p = ParamStore::<f64>::init(5, 2, 2, rng.gen(), init).unwrap();
        let batch: Vec<LabeledTriple> = (0..3)
            .map(|i| {
                let tr = Triple::new(
                    rng.gen_range(0..5),
                    rng.gen_range(0..2),
                    rng.gen_range(0..5),
                );
                if i == 0 {
                    LabeledTriple::positive(tr)
                } else {
                    LabeledTriple::negative(tr)
                }
            })
            .collect();
        let loss = |p: &ParamStore<f64>| {
            loss_and_grad(p, variant, &batch, 0.1, scope, ExecMode::Deterministic).unwrap()
        };
        let rows: Vec<_> = match scope {
            RegScope::Touched => all_rows(&batch.iter().map(|b| b.triple).collect::<Vec<_>>()),
            RegScope::Dense => (0..5)
                .map(|e| (TableKind::Entity, e))
                .chain((0..2).flat_map(|r| {
                    [TableKind::Relation, TableKind::Rot1, TableKind::Rot2].map(|k| (k, r))
                }))
                .collect(),
        };
        worst = worst.max(check_sparse(&p, &rows, &loss(&p).1, |p| loss(p).0));
    }
    worst
}
