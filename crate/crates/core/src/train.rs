//! Negative sampling, logistic loss with L2 regularization, Adagrad, and the
//! epoch loop with validation-based model selection.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FilterIndex, Split, Triple};
use crate::error::{Error, Result};
use crate::eval::{evaluate, RankOptions};
use crate::model::{
    score, score_backward_into, InitOptions, ParamStore, ScoreVariant, SparseGrad, TableKind,
};
use crate::real::Real;
use crate::rng::{self, Stream};

/// Added to `sqrt(accumulator)` in the Adagrad denominator.
pub const ADAGRAD_EPS: f64 = 1e-10;

/// Which parameter rows the L2 penalty covers in each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegScope {
    /// Rows read by the batch, each counted once.
    #[default]
    Touched,
    /// Every row of every table the variant uses.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    /// Single-threaded gradients; bit-identical across runs.
    #[default]
    Deterministic,
    /// Per-triple gradients computed in parallel. Summation order varies.
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    /// Negatives sampled per positive triple.
    pub negatives: usize,
    pub dim: usize,
    /// L2 rate.
    pub lambda: f64,
    pub batches_per_epoch: usize,
    pub max_epochs: usize,
    /// Evaluate the monitor split every this many epochs (and after the last).
    pub eval_every: usize,
    pub seed: u64,
    pub float_bits: u32,
    pub init: InitOptions,
    /// Resample negatives that are known train triples.
    pub filter_negatives: bool,
    pub regularization: RegScope,
    pub exec: ExecMode,
    pub monitor_split: Split,
    pub rank: RankOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.1,
            negatives: 5,
            dim: 128,
            lambda: 0.1,
            batches_per_epoch: 100,
            max_epochs: 400,
            eval_every: 100,
            seed: 0,
            float_bits: 64,
            init: InitOptions::default(),
            filter_negatives: false,
            regularization: RegScope::Touched,
            exec: ExecMode::Deterministic,
            monitor_split: Split::Valid,
            rank: RankOptions::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.negatives == 0 {
            return bad("need at least one negative per positive".into());
        }
        if self.dim == 0 {
            return bad("embedding dimension must be >= 1".into());
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("L2 rate must be non-negative, got {}", self.lambda));
        }
        if self.batches_per_epoch == 0 {
            return bad("batches per epoch must be >= 1".into());
        }
        if self.eval_every == 0 {
            return bad("eval-every must be >= 1".into());
        }
        if self.float_bits != 32 && self.float_bits != 64 {
            return bad(format!(
                "float width must be 32 or 64, got {}",
                self.float_bits
            ));
        }
        Ok(())
    }
}

/// A scored training example; `label` is `+1` for facts and `-1` for corruptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledTriple {
    pub triple: Triple,
    pub label: i8,
}

impl LabeledTriple {
    pub fn positive(triple: Triple) -> Self {
        LabeledTriple { triple, label: 1 }
    }

    pub fn negative(triple: Triple) -> Self {
        LabeledTriple { triple, label: -1 }
    }
}

fn corrupt_once(tr: Triple, rng: &mut impl Rng, num_entities: usize) -> Triple {
    let corrupt_head = rng.gen_bool(0.5);
    let old = if corrupt_head { tr.h } else { tr.t };
    // uniform over the other |E| - 1 entities
    let mut e = rng.gen_range(0..num_entities as u32 - 1);
    if e >= old {
        e += 1;
    }
    if corrupt_head {
        Triple { h: e, ..tr }
    } else {
        Triple { t: e, ..tr }
    }
}

/// Draws `s` corruptions of `tr`. Each replaces the head or the tail (50/50)
/// with a different, uniformly chosen entity.
pub fn sample_negatives(
    tr: Triple,
    s: usize,
    rng: &mut impl Rng,
    num_entities: usize,
) -> Result<Vec<Triple>> {
    if num_entities < 2 {
        return Err(Error::Config(format!(
            "cannot corrupt triples with {num_entities} entities"
        )));
    }
    Ok((0..s)
        .map(|_| corrupt_once(tr, rng, num_entities))
        .collect())
}

/// Like [`sample_negatives`] but redraws corruptions found in `known`, giving
/// up after `max_tries` attempts per negative.
pub fn sample_negatives_filtered(
    tr: Triple,
    s: usize,
    rng: &mut impl Rng,
    num_entities: usize,
    known: &FilterIndex,
    max_tries: usize,
) -> Result<Vec<Triple>> {
    if num_entities < 2 {
        return Err(Error::Config(format!(
            "cannot corrupt triples with {num_entities} entities"
        )));
    }
    Ok((0..s)
        .map(|_| {
            let mut cand = corrupt_once(tr, rng, num_entities);
            for _ in 1..max_tries {
                if !known.contains(&cand) {
                    break;
                }
                cand = corrupt_once(tr, rng, num_entities);
            }
            cand
        })
        .collect())
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Rows `variant` reads for the triples in `batch`, deduplicated.
pub fn touched_rows(variant: ScoreVariant, batch: &[LabeledTriple]) -> BTreeSet<(TableKind, u32)> {
    let mut rows = BTreeSet::new();
    for lt in batch {
        let tr = lt.triple;
        rows.insert((TableKind::Entity, tr.h));
        rows.insert((TableKind::Entity, tr.t));
        rows.insert((TableKind::Relation, tr.r));
        if variant.uses_rot1() {
            rows.insert((TableKind::Rot1, tr.r));
        }
        if variant.uses_rot2() {
            rows.insert((TableKind::Rot2, tr.r));
        }
    }
    rows
}

fn data_term<T: Real>(
    params: &ParamStore<T>,
    variant: ScoreVariant,
    lt: &LabeledTriple,
    grads: &mut SparseGrad<T>,
) -> Result<T> {
    let f = score(params, variant, lt.triple)?;
    if !f.is_finite() {
        return Err(Error::NonFinite(format!(
            "score of training triple {} is {f}",
            lt.triple
        )));
    }
    let l = if lt.label > 0 { T::one() } else { -T::one() };
    let margin = -l * f;
    // d/df softplus(-l f) = -l σ(-l f)
    score_backward_into(params, variant, lt.triple, -l * sigmoid(margin), grads)?;
    Ok(softplus(margin))
}

/// Loss `Σ softplus(-l·f) + λ·Σ‖row‖²` over the batch and its gradient.
pub fn loss_and_grad<T: Real>(
    params: &ParamStore<T>,
    variant: ScoreVariant,
    batch: &[LabeledTriple],
    lambda: T,
    scope: RegScope,
    exec: ExecMode,
) -> Result<(T, SparseGrad<T>)> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let n = params.dim();
    let (mut loss, mut grads) = match exec {
        ExecMode::Deterministic => {
            let mut grads = SparseGrad::new(n);
            let mut loss = T::zero();
            for lt in batch {
                loss += data_term(params, variant, lt, &mut grads)?;
            }
            (loss, grads)
        }
        ExecMode::Parallel => batch
            .par_iter()
            .try_fold(
                || (T::zero(), SparseGrad::new(n)),
                |(loss, mut grads), lt| {
                    let term = data_term(params, variant, lt, &mut grads)?;
                    Ok::<_, Error>((loss + term, grads))
                },
            )
            .try_reduce(
                || (T::zero(), SparseGrad::new(n)),
                |(la, mut ga), (lb, gb)| {
                    ga.merge(gb);
                    Ok((la + lb, ga))
                },
            )?,
    };

    if lambda > T::zero() {
        let two_lambda = lambda + lambda;
        let mut penalize = |kind: TableKind, id: u32| {
            let row = params.table(kind).row(id as usize);
            loss += lambda * row.sum_squares();
            grads.row_mut(kind, id).add_scaled(two_lambda, row);
        };
        match scope {
            RegScope::Touched => {
                for (kind, id) in touched_rows(variant, batch) {
                    penalize(kind, id);
                }
            }
            RegScope::Dense => {
                for kind in TableKind::ALL.into_iter().filter(|k| k.used_by(variant)) {
                    for id in 0..params.table(kind).rows() {
                        penalize(kind, id as u32);
                    }
                }
            }
        }
    }
    Ok((loss, grads))
}

/// Adagrad update of every row present in `grads`:
/// `acc += g²; θ -= lr · g / (sqrt(acc) + ε)`.
pub fn adagrad_step<T: Real>(
    params: &mut ParamStore<T>,
    grads: &SparseGrad<T>,
    lr: T,
) -> Result<()> {
    if grads.dim() != params.dim() {
        return Err(Error::Shape(format!(
            "gradient dimension {} vs parameter dimension {}",
            grads.dim(),
            params.dim()
        )));
    }
    let eps = T::lit(ADAGRAD_EPS);
    for (&(kind, id), g) in grads.iter() {
        let (table, acc) = params.table_and_acc_mut(kind);
        if id as usize >= table.rows() {
            return Err(Error::Index {
                what: "parameter row",
                index: id as usize,
                size: table.rows(),
            });
        }
        let theta = table.row_mut(id as usize);
        let acc = acc.row_mut(id as usize);
        let planes = [
            (&mut *theta.r, &mut *acc.r, &g.r),
            (&mut *theta.i, &mut *acc.i, &g.i),
            (&mut *theta.j, &mut *acc.j, &g.j),
            (&mut *theta.k, &mut *acc.k, &g.k),
        ];
        for (th, ac, gp) in planes {
            for ((x, a), &gv) in th.iter_mut().zip(ac.iter_mut()).zip(gp.iter()) {
                *a += gv * gv;
                *x -= lr * gv / (a.sqrt() + eps);
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub epoch: usize,
    /// Mean loss per scored triple over the epoch (regularization included).
    pub mean_loss: f64,
    pub valid_hits10: Option<f64>,
    pub valid_mrr: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub variant: ScoreVariant,
    pub config: TrainConfig,
    pub num_entities: usize,
    pub num_relations: usize,
    pub param_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
}

impl TrainLog {
    /// One JSON object per monitor record.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters at the monitor point with the best Hits@10 (final
    /// parameters when the monitor split is empty).
    pub best: ParamStore<T>,
    /// `0` means the initialization was never beaten.
    pub best_epoch: usize,
    pub log: TrainLog,
}

/// Splits the shuffled train indices into `batches` contiguous chunks of
/// `ceil(len / batches)`; trailing chunks may be short or absent.
pub fn batch_ranges(len: usize, batches: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    let size = len.div_ceil(batches.max(1)).max(1);
    (0..len).step_by(size).map(move |s| s..(s + size).min(len))
}

/// Trains `variant` on `ds.train` and returns the best monitored checkpoint.
pub fn train<T: Real>(
    ds: &Dataset,
    cfg: &TrainConfig,
    variant: ScoreVariant,
) -> Result<TrainOutcome<T>> {
    train_with(ds, cfg, variant, |_| {})
}

/// [`train`] with a callback invoked after every monitor record.
pub fn train_with<T: Real>(
    ds: &Dataset,
    cfg: &TrainConfig,
    variant: ScoreVariant,
    mut on_record: impl FnMut(&LogRecord),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if cfg.float_bits != T::BITS {
        return Err(Error::Config(format!(
            "config asks for {}-bit floats but training runs in {}-bit",
            cfg.float_bits,
            T::BITS
        )));
    }
    if ds.num_entities() < 2 {
        return Err(Error::Config("need at least two entities".into()));
    }
    let mut params = ParamStore::<T>::init(
        ds.num_entities(),
        ds.num_relations(),
        cfg.dim,
        cfg.seed,
        cfg.init,
    )?;
    let header = LogHeader {
        variant,
        config: cfg.clone(),
        num_entities: ds.num_entities(),
        num_relations: ds.num_relations(),
        param_count: params.param_count(variant),
    };
    let mut log = TrainLog {
        header,
        records: Vec::new(),
    };
    if cfg.max_epochs == 0 || ds.train.is_empty() {
        return Ok(TrainOutcome {
            best: params,
            best_epoch: 0,
            log,
        });
    }

    let train_filter = FilterIndex::from_triples(&ds.train);
    let monitor = !ds.split(cfg.monitor_split).is_empty();
    let mut shuffle_rng = rng::stream(cfg.seed, Stream::Shuffle);
    let mut sample_rng = rng::stream(cfg.seed, Stream::Sampling);
    let lr = T::lit(cfg.lr);
    let lambda = T::lit(cfg.lambda);
    let start = Instant::now();

    let mut best: Option<(f64, f64, usize, ParamStore<T>)> = None;
    let mut order: Vec<usize> = (0..ds.train.len()).collect();
    let mut batch = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0f64;
        let mut terms = 0usize;
        for range in batch_ranges(order.len(), cfg.batches_per_epoch) {
            batch.clear();
            for &idx in &order[range] {
                let pos = ds.train[idx];
                batch.push(LabeledTriple::positive(pos));
                let negs = if cfg.filter_negatives {
                    sample_negatives_filtered(
                        pos,
                        cfg.negatives,
                        &mut sample_rng,
                        ds.num_entities(),
                        &train_filter,
                        100,
                    )?
                } else {
                    sample_negatives(pos, cfg.negatives, &mut sample_rng, ds.num_entities())?
                };
                batch.extend(negs.into_iter().map(LabeledTriple::negative));
            }
            let (loss, grads) = loss_and_grad(
                &params,
                variant,
                &batch,
                lambda,
                cfg.regularization,
                cfg.exec,
            )?;
            adagrad_step(&mut params, &grads, lr)?;
            epoch_loss += loss.widen();
            terms += batch.len();
        }
        if !params.is_finite() {
            return Err(Error::NonFinite(format!(
                "parameters diverged in epoch {epoch}"
            )));
        }

        if epoch % cfg.eval_every == 0 || epoch == cfg.max_epochs {
            let (hits10, mrr) = if monitor {
                let rep = evaluate(&params, variant, ds, cfg.monitor_split, &cfg.rank)?;
                (Some(rep.both.hits10), Some(rep.both.mrr))
            } else {
                (None, None)
            };
            let record = LogRecord {
                epoch,
                mean_loss: epoch_loss / terms as f64,
                valid_hits10: hits10,
                valid_mrr: mrr,
                wall_seconds: start.elapsed().as_secs_f64(),
            };
            log::info!(
                "epoch {epoch}: loss {:.5} hits@10 {:?} mrr {:?}",
                record.mean_loss,
                hits10,
                mrr
            );
            on_record(&record);
            log.records.push(record);
            if let (Some(h), Some(m)) = (hits10, mrr) {
                let improved = best
                    .as_ref()
                    .is_none_or(|(bh, bm, _, _)| h > *bh || (h == *bh && m > *bm));
                if improved {
                    best = Some((h, m, epoch, params.clone()));
                }
            }
        }
    }

    let (best, best_epoch) = match best {
        Some((_, _, epoch, p)) => (p, epoch),
        None => {
            let epoch = cfg.max_epochs;
            (params, epoch)
        }
    };
    Ok(TrainOutcome {
        best,
        best_epoch,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic, Dictionary, SyntheticConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn negatives_differ_in_one_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tr = Triple::new(0, 0, 1);
        for _ in 0..100 {
            let neg = sample_negatives(tr, 1, &mut rng, 2).unwrap()[0];
            let changed = (neg.h != tr.h) as u8 + (neg.t != tr.t) as u8;
            assert_eq!(changed, 1);
            assert_eq!(neg.r, tr.r);
        }
        assert_eq!(sample_negatives(tr, 5, &mut rng, 10).unwrap().len(), 5);
        assert!(matches!(
            sample_negatives(tr, 1, &mut rng, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn filtered_negatives_avoid_known() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let known: Vec<Triple> = (1..6).map(|t| Triple::new(0, 0, t)).collect();
        let filter = FilterIndex::from_triples(&known);
        let negs = sample_negatives_filtered(known[0], 200, &mut rng, 8, &filter, 100).unwrap();
        assert!(negs.iter().all(|n| !filter.contains(n)));
    }

    #[test]
    fn softplus_values() {
        assert!((softplus(0.0f64) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(softplus(-10.0f64) < 1e-4);
        assert!(softplus(10.0f64) > 9.99);
        assert!(softplus(800.0f64).is_finite());
        assert!((sigmoid(800.0f64) - 1.0).abs() < 1e-15 && sigmoid(-800.0f64) >= 0.0);
    }

    #[test]
    fn adagrad_examples() {
        let mut p = ParamStore::<f64>::zeros(2, 1, 1);
        let mut g = SparseGrad::new(1);
        g.row_mut(TableKind::Entity, 0).fill(0.0);
        adagrad_step(&mut p, &g, 0.1).unwrap();
        assert_eq!(p, ParamStore::zeros(2, 1, 1));

        g.row_mut(TableKind::Entity, 0).r[0] = 3.0;
        adagrad_step(&mut p, &g, 0.1).unwrap();
        let first = p.entity.row(0).r[0];
        assert!((first - (-0.1 * 3.0 / (3.0 + 1e-10))).abs() < 1e-15);
        adagrad_step(&mut p, &g, 0.1).unwrap();
        let second = p.entity.row(0).r[0] - first;
        assert!(second.abs() < first.abs());
        // by hand: 0.3 / (sqrt(18) + 1e-10)
        assert!((second + 0.3 / (18f64.sqrt() + 1e-10)).abs() < 1e-15);
    }

    #[test]
    fn batch_ranges_partition() {
        let ranges: Vec<_> = batch_ranges(250, 100).collect();
        assert_eq!(ranges.len(), 84);
        assert_eq!(ranges[0], 0..3);
        assert_eq!(ranges.last().unwrap(), &(249..250));
        assert_eq!(batch_ranges(7, 100).count(), 7);
        assert_eq!(batch_ranges(0, 100).count(), 0);
    }

    #[test]
    fn zero_epochs_returns_init() {
        let ds = synthetic(&SyntheticConfig::default()).unwrap();
        let cfg = TrainConfig {
            dim: 4,
            max_epochs: 0,
            ..Default::default()
        };
        let out = train::<f64>(&ds, &cfg, ScoreVariant::QuatRE).unwrap();
        assert!(out.log.records.is_empty());
        let init = ParamStore::init(50, 5, 4, cfg.seed, cfg.init).unwrap();
        assert_eq!(out.best, init);
        assert_eq!(out.log.header.param_count, 50 * 16 + 3 * 5 * 16);
    }

    #[test]
    fn config_validation() {
        let ds = synthetic(&SyntheticConfig::default()).unwrap();
        for cfg in [
            TrainConfig {
                lr: 0.0,
                ..Default::default()
            },
            TrainConfig {
                negatives: 0,
                ..Default::default()
            },
            TrainConfig {
                batches_per_epoch: 0,
                ..Default::default()
            },
            TrainConfig {
                lambda: -1.0,
                ..Default::default()
            },
            TrainConfig {
                float_bits: 32,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                train::<f64>(&ds, &cfg, ScoreVariant::QuatE),
                Err(Error::Config(_))
            ));
        }
        let tiny = Dataset::from_triples(
            Dictionary::numbered("e", 1),
            Dictionary::numbered("r", 1),
            vec![Triple::new(0, 0, 0)],
            vec![],
            vec![],
        )
        .unwrap();
        assert!(train::<f64>(&tiny, &TrainConfig::default(), ScoreVariant::QuatE).is_err());
    }

    #[test]
    fn deterministic_runs_match() {
        let ds = synthetic(&SyntheticConfig::default()).unwrap();
        let cfg = TrainConfig {
            dim: 4,
            max_epochs: 6,
            eval_every: 3,
            lambda: 0.05,
            ..Default::default()
        };
        let a = train::<f64>(&ds, &cfg, ScoreVariant::QuatRE).unwrap();
        let b = train::<f64>(&ds, &cfg, ScoreVariant::QuatRE).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.best_epoch, b.best_epoch);
        assert_eq!(a.log.records.len(), 2);
        for (x, y) in a.log.records.iter().zip(&b.log.records) {
            assert_eq!(
                (x.epoch, x.mean_loss, x.valid_hits10, x.valid_mrr),
                (y.epoch, y.mean_loss, y.valid_hits10, y.valid_mrr)
            );
        }
        let line = a.log.to_jsonl();
        let first: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
        for key in [
            "epoch",
            "mean_loss",
            "valid_hits10",
            "valid_mrr",
            "wall_seconds",
        ] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn parallel_mode_trains() {
        let ds = synthetic(&SyntheticConfig::default()).unwrap();
        let cfg = TrainConfig {
            dim: 4,
            max_epochs: 2,
            eval_every: 1,
            exec: ExecMode::Parallel,
            ..Default::default()
        };
        let out = train::<f64>(&ds, &cfg, ScoreVariant::QuatRE).unwrap();
        assert!(out.best.is_finite());
        assert_eq!(out.log.records.len(), 2);
    }

    #[test]
    fn f32_training_runs() {
        let ds = synthetic(&SyntheticConfig::default()).unwrap();
        let cfg = TrainConfig {
            dim: 4,
            max_epochs: 2,
            eval_every: 2,
            float_bits: 32,
            ..Default::default()
        };
        let out = train::<f32>(&ds, &cfg, ScoreVariant::OnlyRot2).unwrap();
        assert!(out.best.is_finite());
    }
}
