mod common;

use proptest::prelude::*;
use quatkg::eval::{rank, rank_from_scores, FilterMode, RankOptions, Side, TieMode};
use quatkg::model::{score, InitOptions, ParamStore, ScoreVariant};
use quatkg::quat::{hamilton, normalize, qinner, QVec};
use quatkg::{Dataset, Dictionary, FilterIndex, Metrics, Triple};

fn qvec(n: usize) -> impl Strategy<Value = QVec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 4 * n).prop_map(|flat| QVec::from_flat(&flat).unwrap())
}

fn qvec_pair() -> impl Strategy<Value = (QVec<f64>, QVec<f64>)> {
    (1usize..8).prop_flat_map(|n| (qvec(n), qvec(n)))
}

fn tie_mode() -> impl Strategy<Value = TieMode> {
    prop::sample::select(TieMode::ALL.to_vec())
}

fn triples(ne: u32, nr: u32, len: usize) -> impl Strategy<Value = Vec<Triple>> {
    prop::collection::vec((0..ne, 0..nr, 0..ne), 1..len).prop_map(|v| {
        v.into_iter()
            .map(|(h, r, t)| Triple::new(h, r, t))
            .collect()
    })
}

proptest! {
    #[test]
    fn normalize_is_idempotent(q in (1usize..8).prop_flat_map(qvec)) {
        let once = normalize(q.view()).unwrap();
        let twice = normalize(once.view()).unwrap();
        for (a, b) in once.flatten().iter().zip(twice.flatten()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn unit_rotation_is_isometry((q, p) in qvec_pair()) {
        let unit = normalize(p.view()).unwrap();
        let out = hamilton(q.view(), unit.view()).unwrap();
        for (a, b) in common::magnitudes(&q).iter().zip(common::magnitudes(&out)) {
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
        }
    }

    #[test]
    fn qinner_is_symmetric((q, p) in qvec_pair()) {
        let a = qinner(q.view(), p.view()).unwrap();
        let b = qinner(p.view(), q.view()).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn identity_rotations_give_nested_variants(seed in any::<u64>(), h in 0u32..6, r in 0u32..3, t in 0u32..6) {
        // default scale keeps |score| < 1; the normalize guard makes a unit
        // rotation 1 - 5e-13 rather than 1, so the bound is absolute in O(1) scores
        let mut p = ParamStore::<f64>::init(6, 3, 3, seed, InitOptions::default()).unwrap();
        p.set_rotations_identity();
        let tr = Triple::new(h, r, t);
        let base = score(&p, ScoreVariant::QuatE, tr).unwrap();
        for v in [ScoreVariant::QuatRE, ScoreVariant::OnlyRot1, ScoreVariant::OnlyRot2] {
            prop_assert!((score(&p, v, tr).unwrap() - base).abs() <= 1e-12);
        }
    }

    #[test]
    fn filtered_rank_never_exceeds_raw(seed in any::<u64>(), train in triples(8, 2, 30), ties in tie_mode()) {
        let p = ParamStore::<f64>::init(8, 2, 2, seed, Default::default()).unwrap();
        let filter = FilterIndex::from_triples(&train);
        for &tr in &train {
            for side in [Side::Head, Side::Tail] {
                let opts = |filter| RankOptions { ties, filter, seed };
                let f = rank(&p, ScoreVariant::QuatRE, tr, side, &filter, &opts(FilterMode::Filtered)).unwrap();
                let r = rank(&p, ScoreVariant::QuatRE, tr, side, &filter, &opts(FilterMode::Raw)).unwrap();
                if ties != TieMode::Random {
                    prop_assert!(f <= r);
                }
                prop_assert!(f >= 1 && r <= 8);
            }
        }
    }

    #[test]
    fn rank_ignores_constant_shift(
        scores in prop::collection::vec(-5i32..5, 2..12),
        shift in 0.5f64..100.0,
        ties in tie_mode(),
    ) {
        // small integer scores so that ties are common and the shift is exact
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let shifted: Vec<f64> = scores.iter().map(|s| s + shift.round()).collect();
        let ne = scores.len() as u32;
        let tr = Triple::new(0, 0, ne - 1);
        let filter = FilterIndex::from_triples(&[tr, Triple::new(0, 0, 1)]);
        for side in [Side::Head, Side::Tail] {
            let opts = RankOptions { ties, ..Default::default() };
            prop_assert_eq!(
                rank_from_scores(&scores, tr, side, &filter, &opts).unwrap(),
                rank_from_scores(&shifted, tr, side, &filter, &opts).unwrap()
            );
        }
    }

    #[test]
    fn metrics_are_consistent(ranks in prop::collection::vec(1usize..500, 1..200)) {
        let m = Metrics::from_ranks(ranks.iter().copied()).unwrap();
        let mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64;
        prop_assert!((m.mrr - mrr).abs() <= 1e-12);
        prop_assert!(m.mrr > 0.0 && m.mrr <= 1.0);
        prop_assert!(m.hits1 <= m.hits3 && m.hits3 <= m.hits10);
        prop_assert!(m.mr >= 1.0);
    }

    #[test]
    fn dictionaries_round_trip(labels in prop::collection::vec("[a-z/_.]{1,12}", 1..30)) {
        let mut dict = Dictionary::new();
        for l in &labels {
            dict.intern(l);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("entities.dict");
        dict.write_tsv(&path).unwrap();
        let back = Dictionary::read_tsv(&path).unwrap();
        prop_assert_eq!(back, dict);
    }

    #[test]
    fn filter_contains_every_split_triple(
        train in triples(10, 3, 40),
        valid in triples(10, 3, 10),
        test in triples(10, 3, 10),
    ) {
        let ds = Dataset::from_triples(
            Dictionary::numbered("e", 10),
            Dictionary::numbered("r", 3),
            train,
            valid,
            test,
        )
        .unwrap();
        for tr in ds.train.iter().chain(&ds.valid).chain(&ds.test) {
            prop_assert!(ds.filter.contains(tr));
        }
        for split in [&ds.train, &ds.valid, &ds.test] {
            let mut sorted = split.clone();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), split.len());
        }
    }
}
