//! Link-prediction ranking and metrics.
//!
//! Each test triple is ranked twice: once against every head substitution
//! `(e, r, t)` and once against every tail substitution `(h, r, e)`. In the
//! filtered setting, candidates that form a known triple (other than the test
//! triple itself) are removed before ranking.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Category, Dataset, FilterIndex, RelationStats, Split, Triple};
use crate::error::{Error, Result};
use crate::model::{score, score_batch, ParamStore, ScoreVariant};
use crate::real::Real;
use crate::rng::{self, Stream};

/// Which slot of the triple is being predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Head,
    Tail,
}

impl Side {
    pub fn substitute(self, tr: Triple, e: u32) -> Triple {
        match self {
            Side::Head => Triple { h: e, ..tr },
            Side::Tail => Triple { t: e, ..tr },
        }
    }

    pub fn target(self, tr: Triple) -> u32 {
        match self {
            Side::Head => tr.h,
            Side::Tail => tr.t,
        }
    }
}

/// How competitors with exactly the target's score are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieMode {
    /// `1 + greater + floor(equal / 2)`
    #[default]
    Average,
    /// `1 + greater`
    Optimistic,
    /// `1 + greater + equal`
    Pessimistic,
    /// `1 + greater + U{0..=equal}`, seeded per triple and side
    Random,
}

impl TieMode {
    pub const ALL: [TieMode; 4] = [
        TieMode::Average,
        TieMode::Optimistic,
        TieMode::Pessimistic,
        TieMode::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TieMode::Average => "average",
            TieMode::Optimistic => "optimistic",
            TieMode::Pessimistic => "pessimistic",
            TieMode::Random => "random",
        }
    }
}

impl FromStr for TieMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TieMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown tie mode {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    #[default]
    Filtered,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RankOptions {
    pub ties: TieMode,
    pub filter: FilterMode,
    /// Seed for [`TieMode::Random`].
    pub seed: u64,
}

fn random_tie_offset(seed: u64, tr: Triple, side: Side, equal: usize) -> usize {
    let key = (u64::from(tr.h) << 40) ^ (u64::from(tr.r) << 20) ^ u64::from(tr.t);
    let side_bit = matches!(side, Side::Tail) as u64;
    let mut rng = rng::stream(
        seed ^ key.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ side_bit,
        Stream::Ties,
    );
    rng.gen_range(0..=equal)
}

/// Turns competitor counts into a rank under `opts.ties`.
pub fn resolve_rank(
    greater: usize,
    equal: usize,
    tr: Triple,
    side: Side,
    opts: &RankOptions,
) -> usize {
    1 + greater
        + match opts.ties {
            TieMode::Average => equal / 2,
            TieMode::Optimistic => 0,
            TieMode::Pessimistic => equal,
            TieMode::Random => random_tie_offset(opts.seed, tr, side, equal),
        }
}

fn known_partners(filter: &FilterIndex, tr: Triple, side: Side) -> &[u32] {
    match side {
        Side::Head => filter.known_heads(tr.r, tr.t),
        Side::Tail => filter.known_tails(tr.h, tr.r),
    }
}

fn counts_from_scores<T: Real>(
    scores: &[T],
    tr: Triple,
    side: Side,
    filter: &FilterIndex,
    mode: FilterMode,
) -> Result<(usize, usize)> {
    let target = side.target(tr);
    let target_score = scores[target as usize];
    if !target_score.is_finite() {
        return Err(Error::NonFinite(format!("score of {tr} is {target_score}")));
    }
    let mut greater = 0;
    let mut equal = 0;
    for (e, &s) in scores.iter().enumerate() {
        if e as u32 == target {
            continue;
        }
        // NaN competitors count as beating the target.
        if s > target_score || s.is_nan() {
            greater += 1;
        } else if s == target_score {
            equal += 1;
        }
    }
    if mode == FilterMode::Filtered {
        for &e in known_partners(filter, tr, side) {
            if e == target {
                continue;
            }
            let s = scores[e as usize];
            if s > target_score || s.is_nan() {
                greater -= 1;
            } else if s == target_score {
                equal -= 1;
            }
        }
    }
    Ok((greater, equal))
}

/// Rank of the target entity given precomputed candidate scores, indexed by
/// entity id.
pub fn rank_from_scores<T: Real>(
    scores: &[T],
    tr: Triple,
    side: Side,
    filter: &FilterIndex,
    opts: &RankOptions,
) -> Result<usize> {
    let (greater, equal) = counts_from_scores(scores, tr, side, filter, opts.filter)?;
    Ok(resolve_rank(greater, equal, tr, side, opts))
}

/// Rank of `tr` among its head or tail substitutions.
pub fn rank<T: Real>(
    params: &ParamStore<T>,
    variant: ScoreVariant,
    tr: Triple,
    side: Side,
    filter: &FilterIndex,
    opts: &RankOptions,
) -> Result<usize> {
    let scores = score_batch(params, variant, side, tr)?;
    rank_from_scores(&scores, tr, side, filter, opts)
}

/// Reference ranking: rescores every candidate triple independently, drops
/// known ones by set lookup, sorts, and reads the target's position.
pub fn rank_brute_force<T: Real>(
    params: &ParamStore<T>,
    variant: ScoreVariant,
    tr: Triple,
    side: Side,
    filter: &FilterIndex,
    opts: &RankOptions,
) -> Result<usize> {
    let target = side.target(tr);
    let mut pool: Vec<(T, u32)> = Vec::new();
    for e in 0..params.num_entities() as u32 {
        let cand = side.substitute(tr, e);
        if e != target && opts.filter == FilterMode::Filtered && filter.contains(&cand) {
            continue;
        }
        pool.push((score(params, variant, cand)?, e));
    }
    let target_score = pool
        .iter()
        .find(|(_, e)| *e == target)
        .map(|(s, _)| *s)
        .expect("target is always in the pool");
    if !target_score.is_finite() {
        return Err(Error::NonFinite(format!("score of {tr} is {target_score}")));
    }
    // descending; NaN sorts first
    pool.sort_by(|a, b| {
        let key = |x: T| if x.is_nan() { T::infinity() } else { x };
        key(b.0).partial_cmp(&key(a.0)).unwrap()
    });
    let first = pool.iter().position(|(s, _)| *s == target_score).unwrap();
    let tied = pool.iter().filter(|(s, _)| *s == target_score).count();
    Ok(resolve_rank(first, tied - 1, tr, side, opts))
}

/// MR, MRR and Hits@k over a set of ranks. Hits are fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub count: usize,
    pub mr: f64,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

impl Metrics {
    /// `None` for an empty rank set.
    pub fn from_ranks(ranks: impl IntoIterator<Item = usize>) -> Option<Metrics> {
        let mut count = 0usize;
        let (mut sum, mut rr) = (0f64, 0f64);
        let mut hits = [0usize; 3];
        for rank in ranks {
            debug_assert!(rank >= 1);
            count += 1;
            sum += rank as f64;
            rr += 1.0 / rank as f64;
            for (slot, k) in hits.iter_mut().zip([1, 3, 10]) {
                if rank <= k {
                    *slot += 1;
                }
            }
        }
        (count > 0).then(|| {
            let c = count as f64;
            Metrics {
                count,
                mr: sum / c,
                mrr: rr / c,
                hits1: hits[0] as f64 / c,
                hits3: hits[1] as f64 / c,
                hits10: hits[2] as f64 / c,
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleRanks {
    pub triple: Triple,
    pub head: usize,
    pub tail: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationMetrics {
    pub relation: u32,
    pub label: String,
    /// Number of test triples with this relation.
    pub count: usize,
    pub head: Metrics,
    pub tail: Metrics,
    /// Both sides pooled; `both.mrr` is the per-relation MRR.
    pub both: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: Split,
    pub variant: ScoreVariant,
    pub options: RankOptions,
    pub head: Metrics,
    pub tail: Metrics,
    pub both: Metrics,
    pub per_relation: Vec<RelationMetrics>,
    pub ranks: Vec<TripleRanks>,
}

impl EvalReport {
    fn assemble(
        ds: &Dataset,
        split: Split,
        variant: ScoreVariant,
        options: RankOptions,
        ranks: Vec<TripleRanks>,
    ) -> Self {
        let metrics =
            |it: &mut dyn Iterator<Item = usize>| Metrics::from_ranks(it).expect("non-empty");
        let head = metrics(&mut ranks.iter().map(|r| r.head));
        let tail = metrics(&mut ranks.iter().map(|r| r.tail));
        let both = metrics(&mut ranks.iter().flat_map(|r| [r.head, r.tail]));

        let mut by_rel: BTreeMap<u32, Vec<&TripleRanks>> = BTreeMap::new();
        for r in &ranks {
            by_rel.entry(r.triple.r).or_default().push(r);
        }
        let per_relation = by_rel
            .into_iter()
            .map(|(rel, rs)| RelationMetrics {
                relation: rel,
                label: ds
                    .relations
                    .label(rel)
                    .map_or_else(|| rel.to_string(), str::to_owned),
                count: rs.len(),
                head: metrics(&mut rs.iter().map(|r| r.head)),
                tail: metrics(&mut rs.iter().map(|r| r.tail)),
                both: metrics(&mut rs.iter().flat_map(|r| [r.head, r.tail])),
            })
            .collect();
        EvalReport {
            split,
            variant,
            options,
            head,
            tail,
            both,
            per_relation,
            ranks,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn check_split(ds: &Dataset, split: Split) -> Result<&[Triple]> {
    let triples = ds.split(split);
    if triples.is_empty() {
        return Err(Error::Config(format!("split {split} is empty")));
    }
    Ok(triples)
}

fn check_shapes<T: Real>(params: &ParamStore<T>, ds: &Dataset) -> Result<()> {
    if params.num_entities() != ds.num_entities() || params.num_relations() != ds.num_relations() {
        return Err(Error::Shape(format!(
            "model has {} entities / {} relations, dataset has {} / {}",
            params.num_entities(),
            params.num_relations(),
            ds.num_entities(),
            ds.num_relations()
        )));
    }
    Ok(())
}

/// Ranks every triple of `split` on both sides. Parallel over triples; the
/// result does not depend on scheduling.
pub fn evaluate<T: Real>(
    params: &ParamStore<T>,
    variant: ScoreVariant,
    ds: &Dataset,
    split: Split,
    opts: &RankOptions,
) -> Result<EvalReport> {
    check_shapes(params, ds)?;
    let triples = check_split(ds, split)?;
    let ranks = triples
        .par_iter()
        .map_init(
            || vec![T::zero(); params.num_entities()],
            |scores, &tr| -> Result<TripleRanks> {
                let mut side_rank = |side: Side| -> Result<usize> {
                    crate::model::score::score_batch_into(params, variant, side, tr, scores);
                    let (g, e) = counts_from_scores(scores, tr, side, &ds.filter, opts.filter)?;
                    Ok(resolve_rank(g, e, tr, side, opts))
                };
                Ok(TripleRanks {
                    triple: tr,
                    head: side_rank(Side::Head)?,
                    tail: side_rank(Side::Tail)?,
                })
            },
        )
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::assemble(ds, split, variant, *opts, ranks))
}

/// [`evaluate`] through [`rank_brute_force`]; single-threaded.
pub fn evaluate_brute_force<T: Real>(
    params: &ParamStore<T>,
    variant: ScoreVariant,
    ds: &Dataset,
    split: Split,
    opts: &RankOptions,
) -> Result<EvalReport> {
    check_shapes(params, ds)?;
    let triples = check_split(ds, split)?;
    let ranks = triples
        .iter()
        .map(|&tr| {
            Ok(TripleRanks {
                triple: tr,
                head: rank_brute_force(params, variant, tr, Side::Head, &ds.filter, opts)?,
                tail: rank_brute_force(params, variant, tr, Side::Tail, &ds.filter, opts)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::assemble(ds, split, variant, *opts, ranks))
}

// ---- relation categories ----------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCell {
    /// `None` when the group holds no test triples.
    pub head: Option<Metrics>,
    pub tail: Option<Metrics>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub cells: BTreeMap<Category, CategoryCell>,
    /// Test triples whose relation has no category (absent from train).
    pub undefined: CategoryCell,
}

impl CategoryReport {
    pub fn cell(&self, cat: Category) -> &CategoryCell {
        &self.cells[&cat]
    }
}

/// Groups a report's ranks by the category of each triple's relation.
pub fn category_report(report: &EvalReport, stats: &[RelationStats]) -> CategoryReport {
    let category_of = |r: u32| stats.get(r as usize).and_then(|s| s.category);
    let cell = |pred: &dyn Fn(Option<Category>) -> bool| {
        let group: Vec<&TripleRanks> = report
            .ranks
            .iter()
            .filter(|tr| pred(category_of(tr.triple.r)))
            .collect();
        CategoryCell {
            head: Metrics::from_ranks(group.iter().map(|r| r.head)),
            tail: Metrics::from_ranks(group.iter().map(|r| r.tail)),
            count: group.len(),
        }
    };
    CategoryReport {
        cells: Category::ALL
            .iter()
            .map(|&c| (c, cell(&|got| got == Some(c))))
            .collect(),
        undefined: cell(&|got| got.is_none()),
    }
}

// ---- text rendering ---------------------------------------------------------

fn metric_row(out: &mut String, name: &str, m: &Metrics) {
    let _ = writeln!(
        out,
        "{name:<10} {:>10.1} {:>7.3} {:>6.1} {:>6.1} {:>6.1}",
        m.mr,
        m.mrr,
        100.0 * m.hits10,
        100.0 * m.hits3,
        100.0 * m.hits1
    );
}

/// Human-readable summary with columns MR, MRR, H@10, H@3, H@1 (hits in %).
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {} split, variant {}, {} triples, ties {}, {}",
        report.split,
        report.variant,
        report.head.count,
        report.options.ties.name(),
        match report.options.filter {
            FilterMode::Filtered => "filtered",
            FilterMode::Raw => "raw",
        }
    );
    let _ = writeln!(
        out,
        "{:<10} {:>10} {:>7} {:>6} {:>6} {:>6}",
        "side", "MR", "MRR", "H@10", "H@3", "H@1"
    );
    metric_row(&mut out, "head", &report.head);
    metric_row(&mut out, "tail", &report.tail);
    metric_row(&mut out, "both", &report.both);
    out.push('\n');
    out.push_str(&render_relation_table(report, None));
    out
}

/// Per-relation MRR table; adds a category column when `stats` is given.
pub fn render_relation_table(report: &EvalReport, stats: Option<&[RelationStats]>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<32} {:>6} {:>5} {:>7} {:>7} {:>7}",
        "relation", "count", "cat", "MRR", "head", "tail"
    );
    for rm in &report.per_relation {
        let cat = stats
            .and_then(|s| s.get(rm.relation as usize))
            .and_then(|s| s.category)
            .map_or("-", Category::label);
        let _ = writeln!(
            out,
            "{:<32} {:>6} {:>5} {:>7.3} {:>7.3} {:>7.3}",
            rm.label, rm.count, cat, rm.both.mrr, rm.head.mrr, rm.tail.mrr
        );
    }
    out
}

pub fn render_category_table(report: &CategoryReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<9} {:>6} {:>9} {:>9} {:>9} {:>9}",
        "category", "count", "head MRR", "head H@10", "tail MRR", "tail H@10"
    );
    let fmt_cell = |m: &Option<Metrics>| match m {
        Some(m) => (format!("{:.3}", m.mrr), format!("{:.1}", 100.0 * m.hits10)),
        None => ("absent".into(), "absent".into()),
    };
    let rows = report
        .cells
        .iter()
        .map(|(c, cell)| (c.label(), cell))
        .chain(std::iter::once(("undefined", &report.undefined)));
    for (name, cell) in rows {
        let (hm, hh) = fmt_cell(&cell.head);
        let (tm, th) = fmt_cell(&cell.tail);
        let _ = writeln!(
            out,
            "{name:<9} {:>6} {hm:>9} {hh:>9} {tm:>9} {th:>9}",
            cell.count
        );
    }
    out
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_table(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{relation_cardinality, Dictionary};
    use crate::model::InitOptions;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn metrics_single_rank_one() {
        let m = Metrics::from_ranks([1, 1]).unwrap();
        assert_eq!(
            (m.mr, m.mrr, m.hits1, m.hits3, m.hits10),
            (1.0, 1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn metrics_ranks_one_and_four() {
        let m = Metrics::from_ranks([1, 4]).unwrap();
        assert!(approx(m.mr, 2.5));
        assert!(approx(m.mrr, 0.625));
        assert!(approx(m.hits3, 0.5));
        assert!(approx(m.hits10, 1.0));
        assert!(approx(m.hits1, 0.5));
        assert!(Metrics::from_ranks(std::iter::empty()).is_none());
    }

    #[test]
    fn tie_conventions() {
        let tr = Triple::new(0, 0, 1);
        let rank = |ties| {
            resolve_rank(
                3,
                5,
                tr,
                Side::Tail,
                &RankOptions {
                    ties,
                    ..Default::default()
                },
            )
        };
        assert_eq!(rank(TieMode::Optimistic), 4);
        assert_eq!(rank(TieMode::Average), 6);
        assert_eq!(rank(TieMode::Pessimistic), 9);
        let r = rank(TieMode::Random);
        assert!((4..=9).contains(&r));
        assert_eq!(r, rank(TieMode::Random));
    }

    #[test]
    fn counts_respect_filter() {
        // entity 1 is the target, entity 3 is a known competitor
        let tr = Triple::new(0, 0, 1);
        let filter = FilterIndex::from_triples(&[tr, Triple::new(0, 0, 3)]);
        let scores = [0.1, 0.5, 0.9, 0.8, 0.5f64];
        let (g, e) =
            counts_from_scores(&scores, tr, Side::Tail, &filter, FilterMode::Filtered).unwrap();
        assert_eq!((g, e), (1, 1));
        let (g, e) = counts_from_scores(&scores, tr, Side::Tail, &filter, FilterMode::Raw).unwrap();
        assert_eq!((g, e), (2, 1));
    }

    #[test]
    fn all_competitors_filtered_gives_rank_one() {
        let tr = Triple::new(0, 0, 1);
        let known: Vec<Triple> = (0..4).map(|t| Triple::new(0, 0, t)).collect();
        let filter = FilterIndex::from_triples(&known);
        let scores = [9.0, -1.0, 5.0, 7.0f64];
        let (g, e) =
            counts_from_scores(&scores, tr, Side::Tail, &filter, FilterMode::Filtered).unwrap();
        assert_eq!(
            resolve_rank(g, e, tr, Side::Tail, &RankOptions::default()),
            1
        );
    }

    fn toy() -> (Dataset, ParamStore<f64>) {
        let ds = Dataset::from_triples(
            Dictionary::numbered("e", 6),
            Dictionary::numbered("r", 2),
            vec![
                Triple::new(0, 0, 1),
                Triple::new(1, 0, 2),
                Triple::new(2, 1, 3),
                Triple::new(3, 1, 4),
            ],
            vec![Triple::new(0, 0, 2)],
            vec![Triple::new(4, 1, 5), Triple::new(5, 0, 0)],
        )
        .unwrap();
        let p = ParamStore::init(6, 2, 2, 3, InitOptions::default()).unwrap();
        (ds, p)
    }

    #[test]
    fn fast_and_brute_force_agree() {
        let (ds, p) = toy();
        for v in ScoreVariant::ALL {
            for ties in TieMode::ALL {
                for filter in [FilterMode::Filtered, FilterMode::Raw] {
                    let opts = RankOptions {
                        ties,
                        filter,
                        seed: 5,
                    };
                    for split in Split::ALL {
                        let fast = evaluate(&p, v, &ds, split, &opts).unwrap();
                        let slow = evaluate_brute_force(&p, v, &ds, split, &opts).unwrap();
                        assert_eq!(fast, slow);
                    }
                }
            }
        }
    }

    #[test]
    fn report_shape_and_invariants() {
        let (ds, p) = toy();
        let rep = evaluate(
            &p,
            ScoreVariant::QuatRE,
            &ds,
            Split::Train,
            &RankOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.ranks.len(), 4);
        assert_eq!(rep.both.count, 8);
        for m in [rep.head, rep.tail, rep.both] {
            assert!(m.mrr > 0.0 && m.mrr <= 1.0);
            assert!(m.hits1 <= m.hits3 && m.hits3 <= m.hits10);
            assert!(m.mr >= 1.0);
        }
        assert_eq!(rep.per_relation.len(), 2);
        let table = render_table(&rep);
        assert!(table.contains("MRR") && table.contains("H@10"));
        let json: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(json["split"], "train");
        assert_eq!(json["variant"], "quatre");
    }

    #[test]
    fn empty_split_is_an_error() {
        let (mut ds, p) = toy();
        ds.valid.clear();
        assert!(evaluate(
            &p,
            ScoreVariant::QuatE,
            &ds,
            Split::Valid,
            &RankOptions::default()
        )
        .is_err());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let (ds, _) = toy();
        let p = ParamStore::<f64>::init(5, 2, 2, 3, InitOptions::default()).unwrap();
        assert!(matches!(
            evaluate(
                &p,
                ScoreVariant::QuatE,
                &ds,
                Split::Test,
                &RankOptions::default()
            ),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn single_relation_category_matches_overall() {
        // one M-1 relation: heads 0,1,2 all point to 3
        let ds = Dataset::from_triples(
            Dictionary::numbered("e", 5),
            Dictionary::numbered("r", 1),
            vec![
                Triple::new(0, 0, 3),
                Triple::new(1, 0, 3),
                Triple::new(2, 0, 3),
            ],
            vec![],
            vec![Triple::new(4, 0, 3), Triple::new(2, 0, 4)],
        )
        .unwrap();
        let stats = relation_cardinality(&ds);
        assert_eq!(stats[0].category, Some(Category::ManyToOne));
        let p = ParamStore::<f64>::init(5, 1, 2, 1, InitOptions::default()).unwrap();
        let rep = evaluate(
            &p,
            ScoreVariant::QuatRE,
            &ds,
            Split::Test,
            &RankOptions::default(),
        )
        .unwrap();
        let cats = category_report(&rep, &stats);
        let cell = cats.cell(Category::ManyToOne);
        assert_eq!(cell.head, Some(rep.head));
        assert_eq!(cell.tail, Some(rep.tail));
        for c in [
            Category::OneToOne,
            Category::OneToMany,
            Category::ManyToMany,
        ] {
            assert_eq!(cats.cell(c).head, None);
            assert_eq!(cats.cell(c).count, 0);
        }
        assert!(render_category_table(&cats).contains("absent"));
    }
}
