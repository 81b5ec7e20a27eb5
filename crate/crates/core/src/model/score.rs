use std::collections::BTreeMap;

use super::{ParamStore, QTable, ScoreVariant, TableKind};
use crate::data::Triple;
use crate::error::{Error, Result};
use crate::eval::Side;
use crate::quat::{
    hamilton_backward_acc, hamilton_into, normalize_backward_acc, normalize_into, qinner_unchecked,
    QRef, QVec,
};
use crate::real::Real;

pub(crate) fn check_triple<T: Real>(params: &ParamStore<T>, tr: &Triple) -> Result<()> {
    let ne = params.num_entities();
    for e in [tr.h, tr.t] {
        if e as usize >= ne {
            return Err(Error::Index {
                what: "entity",
                index: e as usize,
                size: ne,
            });
        }
    }
    if tr.r as usize >= params.num_relations() {
        return Err(Error::Index {
            what: "relation",
            index: tr.r as usize,
            size: params.num_relations(),
        });
    }
    Ok(())
}

/// Normalized relation-side quaternions for one relation.
struct RelationFactors<T> {
    rel: QVec<T>,
    rot1: Option<QVec<T>>,
    rot2: Option<QVec<T>>,
}

impl<T: Real> RelationFactors<T> {
    fn new(params: &ParamStore<T>, variant: ScoreVariant, r: u32) -> Self {
        let n = params.dim();
        let norm = |table: &QTable<T>| {
            let mut out = QVec::zeros(n);
            normalize_into(table.row(r as usize), out.view_mut());
            out
        };
        RelationFactors {
            rel: norm(&params.relation),
            rot1: variant.uses_rot1().then(|| norm(&params.rot1)),
            rot2: variant.uses_rot2().then(|| norm(&params.rot2)),
        }
    }

    /// `(v_h ⊗ w1◁) ⊗ v_r◁`, or `v_h ⊗ v_r◁` without the head rotation.
    fn head_side(&self, head: QRef<'_, T>, scratch: &mut QVec<T>, out: &mut QVec<T>) {
        match &self.rot1 {
            Some(w1) => {
                hamilton_into(head, w1.view(), scratch.view_mut());
                hamilton_into(scratch.view(), self.rel.view(), out.view_mut());
            }
            None => hamilton_into(head, self.rel.view(), out.view_mut()),
        }
    }

    /// `v_t ⊗ w2◁`, or `v_t` without the tail rotation.
    fn tail_side(&self, tail: QRef<'_, T>, out: &mut QVec<T>) {
        match &self.rot2 {
            Some(w2) => hamilton_into(tail, w2.view(), out.view_mut()),
            None => {
                out.r.copy_from_slice(tail.r);
                out.i.copy_from_slice(tail.i);
                out.j.copy_from_slice(tail.j);
                out.k.copy_from_slice(tail.k);
            }
        }
    }
}

/// Score of one triple under `variant`.
pub fn score<T: Real>(params: &ParamStore<T>, variant: ScoreVariant, triple: Triple) -> Result<T> {
    check_triple(params, &triple)?;
    let n = params.dim();
    let factors = RelationFactors::new(params, variant, triple.r);
    let mut scratch = QVec::zeros(n);
    let mut lhs = QVec::zeros(n);
    let mut rhs = QVec::zeros(n);
    factors.head_side(params.entity.row(triple.h as usize), &mut scratch, &mut lhs);
    factors.tail_side(params.entity.row(triple.t as usize), &mut rhs);
    Ok(qinner_unchecked(lhs.view(), rhs.view()))
}

/// Scores `fixed` with its head (or tail) replaced by every entity in turn.
///
/// The side that stays fixed is computed once. Each entry is bit-identical to
/// the corresponding [`score`] call.
pub fn score_batch<T: Real>(
    params: &ParamStore<T>,
    variant: ScoreVariant,
    side: Side,
    fixed: Triple,
) -> Result<Vec<T>> {
    check_triple(params, &fixed)?;
    let mut out = vec![T::zero(); params.num_entities()];
    score_batch_into(params, variant, side, fixed, &mut out);
    Ok(out)
}

pub(crate) fn score_batch_into<T: Real>(
    params: &ParamStore<T>,
    variant: ScoreVariant,
    side: Side,
    fixed: Triple,
    out: &mut [T],
) {
    let n = params.dim();
    let factors = RelationFactors::new(params, variant, fixed.r);
    let mut scratch = QVec::zeros(n);
    let mut lhs = QVec::zeros(n);
    let mut rhs = QVec::zeros(n);
    match side {
        Side::Tail => {
            factors.head_side(params.entity.row(fixed.h as usize), &mut scratch, &mut lhs);
            for (e, slot) in out.iter_mut().enumerate() {
                factors.tail_side(params.entity.row(e), &mut rhs);
                *slot = qinner_unchecked(lhs.view(), rhs.view());
            }
        }
        Side::Head => {
            factors.tail_side(params.entity.row(fixed.t as usize), &mut rhs);
            for (e, slot) in out.iter_mut().enumerate() {
                factors.head_side(params.entity.row(e), &mut scratch, &mut lhs);
                *slot = qinner_unchecked(lhs.view(), rhs.view());
            }
        }
    }
}

/// Gradients of `upstream · f(h, r, t)` with respect to the rows the variant reads.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGrad<T> {
    pub head: QVec<T>,
    pub tail: QVec<T>,
    pub relation: QVec<T>,
    pub rot1: Option<QVec<T>>,
    pub rot2: Option<QVec<T>>,
}

/// Row-sparse gradient over all parameter tables.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrad<T> {
    n: usize,
    rows: BTreeMap<(TableKind, u32), QVec<T>>,
}

impl<T: Real> SparseGrad<T> {
    pub fn new(n: usize) -> Self {
        SparseGrad {
            n,
            rows: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Gradient row for `(kind, id)`, created as zeros on first access.
    pub fn row_mut(&mut self, kind: TableKind, id: u32) -> &mut QVec<T> {
        let n = self.n;
        self.rows
            .entry((kind, id))
            .or_insert_with(|| QVec::zeros(n))
    }

    pub fn row(&self, kind: TableKind, id: u32) -> Option<&QVec<T>> {
        self.rows.get(&(kind, id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(TableKind, u32), &QVec<T>)> {
        self.rows.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = (TableKind, u32)> + '_ {
        self.rows.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Adds another sparse gradient into this one.
    pub fn merge(&mut self, other: SparseGrad<T>) {
        for (key, g) in other.rows {
            match self.rows.get_mut(&key) {
                Some(row) => row.add_scaled(T::one(), g.view()),
                None => {
                    self.rows.insert(key, g);
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.rows.values().all(QVec::is_finite)
    }
}

/// Backward pass of [`score`] for one triple.
pub fn score_backward<T: Real>(
    params: &ParamStore<T>,
    variant: ScoreVariant,
    triple: Triple,
    upstream: T,
) -> Result<ScoreGrad<T>> {
    check_triple(params, &triple)?;
    let n = params.dim();
    let mut grads = [
        QVec::zeros(n),
        QVec::zeros(n),
        QVec::zeros(n),
        QVec::zeros(n),
        QVec::zeros(n),
    ];
    let [gh, gt, gr, g1, g2] = &mut grads;
    backward_rows(params, variant, triple, upstream, gh, gt, gr, g1, g2);
    let [head, tail, relation, rot1, rot2] = grads;
    Ok(ScoreGrad {
        head,
        tail,
        relation,
        rot1: variant.uses_rot1().then_some(rot1),
        rot2: variant.uses_rot2().then_some(rot2),
    })
}

/// Accumulates the backward pass of [`score`] into a sparse gradient.
pub fn score_backward_into<T: Real>(
    params: &ParamStore<T>,
    variant: ScoreVariant,
    triple: Triple,
    upstream: T,
    grads: &mut SparseGrad<T>,
) -> Result<()> {
    let g = score_backward(params, variant, triple, upstream)?;
    grads
        .row_mut(TableKind::Entity, triple.h)
        .add_scaled(T::one(), g.head.view());
    grads
        .row_mut(TableKind::Entity, triple.t)
        .add_scaled(T::one(), g.tail.view());
    grads
        .row_mut(TableKind::Relation, triple.r)
        .add_scaled(T::one(), g.relation.view());
    if let Some(g1) = &g.rot1 {
        grads
            .row_mut(TableKind::Rot1, triple.r)
            .add_scaled(T::one(), g1.view());
    }
    if let Some(g2) = &g.rot2 {
        grads
            .row_mut(TableKind::Rot2, triple.r)
            .add_scaled(T::one(), g2.view());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn backward_rows<T: Real>(
    params: &ParamStore<T>,
    variant: ScoreVariant,
    tr: Triple,
    upstream: T,
    g_head: &mut QVec<T>,
    g_tail: &mut QVec<T>,
    g_rel: &mut QVec<T>,
    g_rot1: &mut QVec<T>,
    g_rot2: &mut QVec<T>,
) {
    let n = params.dim();
    let head = params.entity.row(tr.h as usize);
    let tail = params.entity.row(tr.t as usize);
    let r = tr.r as usize;
    let f = RelationFactors::new(params, variant, tr.r);

    // forward, keeping intermediates
    let mut rotated_head = QVec::zeros(n);
    let head_in = match &f.rot1 {
        Some(w1) => {
            hamilton_into(head, w1.view(), rotated_head.view_mut());
            rotated_head.view()
        }
        None => head,
    };
    let mut lhs = QVec::zeros(n);
    hamilton_into(head_in, f.rel.view(), lhs.view_mut());
    let mut rhs = QVec::zeros(n);
    f.tail_side(tail, &mut rhs);

    // f = lhs • rhs
    let mut g_lhs = QVec::zeros(n);
    g_lhs.add_scaled(upstream, rhs.view());
    let mut g_rhs = QVec::zeros(n);
    g_rhs.add_scaled(upstream, lhs.view());

    // rhs = tail ⊗ w2◁
    match &f.rot2 {
        Some(w2) => {
            let mut g_w2n = QVec::zeros(n);
            hamilton_backward_acc(
                tail,
                w2.view(),
                g_rhs.view(),
                Some(g_tail.view_mut()),
                Some(g_w2n.view_mut()),
            );
            normalize_backward_acc(params.rot2.row(r), g_w2n.view(), g_rot2.view_mut());
        }
        None => g_tail.add_scaled(T::one(), g_rhs.view()),
    }

    // lhs = head_in ⊗ v_r◁
    let mut g_head_in = QVec::zeros(n);
    let mut g_reln = QVec::zeros(n);
    hamilton_backward_acc(
        head_in,
        f.rel.view(),
        g_lhs.view(),
        Some(g_head_in.view_mut()),
        Some(g_reln.view_mut()),
    );
    normalize_backward_acc(params.relation.row(r), g_reln.view(), g_rel.view_mut());

    // head_in = head ⊗ w1◁
    match &f.rot1 {
        Some(w1) => {
            let mut g_w1n = QVec::zeros(n);
            hamilton_backward_acc(
                head,
                w1.view(),
                g_head_in.view(),
                Some(g_head.view_mut()),
                Some(g_w1n.view_mut()),
            );
            normalize_backward_acc(params.rot1.row(r), g_w1n.view(), g_rot1.view_mut());
        }
        None => g_head.add_scaled(T::one(), g_head_in.view()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InitOptions;

    fn store() -> ParamStore<f64> {
        ParamStore::init(6, 2, 3, 42, InitOptions::default()).unwrap()
    }

    #[test]
    fn out_of_range_ids() {
        let p = store();
        for tr in [
            Triple::new(6, 0, 1),
            Triple::new(0, 2, 1),
            Triple::new(0, 0, 9),
        ] {
            assert!(matches!(
                score(&p, ScoreVariant::QuatRE, tr),
                Err(Error::Index { .. })
            ));
            assert!(score_backward(&p, ScoreVariant::QuatRE, tr, 1.0).is_err());
            assert!(score_batch(&p, ScoreVariant::QuatRE, Side::Tail, tr).is_err());
        }
    }

    #[test]
    fn zero_head_scores_zero() {
        let mut p = store();
        p.entity.set_row(2, QVec::zeros(3).view());
        for v in ScoreVariant::ALL {
            assert_eq!(score(&p, v, Triple::new(2, 1, 4)).unwrap(), 0.0);
        }
    }

    #[test]
    fn batch_has_one_entry_per_entity() {
        let p = ParamStore::<f64>::init(3, 1, 2, 0, InitOptions::default()).unwrap();
        for side in [Side::Head, Side::Tail] {
            let tr = Triple::new(0, 0, 2);
            let scores = score_batch(&p, ScoreVariant::QuatRE, side, tr).unwrap();
            assert_eq!(scores.len(), 3);
            for (e, s) in scores.iter().enumerate() {
                let cand = match side {
                    Side::Head => Triple::new(e as u32, 0, 2),
                    Side::Tail => Triple::new(0, 0, e as u32),
                };
                assert_eq!(
                    s.to_bits(),
                    score(&p, ScoreVariant::QuatRE, cand).unwrap().to_bits()
                );
            }
        }
    }

    #[test]
    fn zero_tail_gives_zero_head_batch() {
        let mut p = store();
        p.entity.set_row(5, QVec::zeros(3).view());
        let scores =
            score_batch(&p, ScoreVariant::QuatRE, Side::Head, Triple::new(0, 1, 5)).unwrap();
        assert!(scores.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let p = store();
        let g = score_backward(&p, ScoreVariant::QuatRE, Triple::new(1, 0, 3), 0.0).unwrap();
        for q in [
            &g.head,
            &g.tail,
            &g.relation,
            g.rot1.as_ref().unwrap(),
            g.rot2.as_ref().unwrap(),
        ] {
            assert!(q.flatten().iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn quate_has_no_rotation_gradients() {
        let p = store();
        let g = score_backward(&p, ScoreVariant::QuatE, Triple::new(1, 0, 3), 1.0).unwrap();
        assert!(g.rot1.is_none() && g.rot2.is_none());
        let mut sparse = SparseGrad::new(3);
        score_backward_into(
            &p,
            ScoreVariant::QuatE,
            Triple::new(1, 0, 3),
            1.0,
            &mut sparse,
        )
        .unwrap();
        assert!(sparse.row(TableKind::Rot1, 0).is_none());
        assert!(sparse.row(TableKind::Rot2, 0).is_none());
        assert_eq!(sparse.len(), 3);
    }

    #[test]
    fn self_loop_accumulates_both_sides() {
        let p = store();
        let tr = Triple::new(2, 0, 2);
        let g = score_backward(&p, ScoreVariant::QuatRE, tr, 1.0).unwrap();
        let mut sparse = SparseGrad::new(3);
        score_backward_into(&p, ScoreVariant::QuatRE, tr, 1.0, &mut sparse).unwrap();
        let mut want = g.head.clone();
        want.add_scaled(1.0, g.tail.view());
        assert_eq!(sparse.row(TableKind::Entity, 2).unwrap(), &want);
    }
}
