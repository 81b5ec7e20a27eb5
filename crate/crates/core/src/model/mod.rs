//! Parameter tables and score functions.
//!
//! Every entity owns one quaternion vector. Every relation owns three: the
//! relation embedding `v_r` and two rotation vectors `w1`, `w2` that rotate
//! the head and tail before scoring. Stored parameters are the raw,
//! un-normalized quaternions; normalization happens inside each forward pass.

mod io;
pub(crate) mod score;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::{QMut, QRef, QVec};
use crate::real::Real;
use crate::rng::{self, Stream};

pub use io::{
    load_checkpoint, read_checkpoint_header, read_text_export, save_checkpoint, write_text_export,
    CheckpointHeader, ExportSection, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use score::{score, score_backward, score_backward_into, score_batch, ScoreGrad, SparseGrad};

/// Which score function a model instance uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScoreVariant {
    /// `((v_h ⊗ w1◁) ⊗ v_r◁) • (v_t ⊗ w2◁)`
    #[serde(rename = "quatre")]
    QuatRE,
    /// `(v_h ⊗ v_r◁) • v_t`
    #[serde(rename = "quate")]
    QuatE,
    /// `((v_h ⊗ w1◁) ⊗ v_r◁) • v_t`
    #[serde(rename = "only-rot1")]
    OnlyRot1,
    /// `(v_h ⊗ v_r◁) • (v_t ⊗ w2◁)`
    #[serde(rename = "only-rot2")]
    OnlyRot2,
}

impl ScoreVariant {
    pub const ALL: [ScoreVariant; 4] = [
        ScoreVariant::QuatRE,
        ScoreVariant::QuatE,
        ScoreVariant::OnlyRot1,
        ScoreVariant::OnlyRot2,
    ];

    pub fn uses_rot1(self) -> bool {
        matches!(self, ScoreVariant::QuatRE | ScoreVariant::OnlyRot1)
    }

    pub fn uses_rot2(self) -> bool {
        matches!(self, ScoreVariant::QuatRE | ScoreVariant::OnlyRot2)
    }

    pub fn name(self) -> &'static str {
        match self {
            ScoreVariant::QuatRE => "quatre",
            ScoreVariant::QuatE => "quate",
            ScoreVariant::OnlyRot1 => "only-rot1",
            ScoreVariant::OnlyRot2 => "only-rot2",
        }
    }
}

impl fmt::Display for ScoreVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quatre" => Ok(ScoreVariant::QuatRE),
            "quate" => Ok(ScoreVariant::QuatE),
            "only-rot1" | "rot1" => Ok(ScoreVariant::OnlyRot1),
            "only-rot2" | "rot2" => Ok(ScoreVariant::OnlyRot2),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// Initial value of the two rotation tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitRotation {
    /// Same uniform scheme as every other table.
    #[default]
    Random,
    /// `1 + 0i + 0j + 0k` at every coordinate.
    Identity,
}

impl FromStr for InitRotation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(InitRotation::Random),
            "identity" => Ok(InitRotation::Identity),
            other => Err(Error::Config(format!("unknown rotation init {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    Entity,
    Relation,
    Rot1,
    Rot2,
}

impl TableKind {
    pub const ALL: [TableKind; 4] = [
        TableKind::Entity,
        TableKind::Relation,
        TableKind::Rot1,
        TableKind::Rot2,
    ];

    /// Whether `variant` reads this table.
    pub fn used_by(self, variant: ScoreVariant) -> bool {
        match self {
            TableKind::Entity | TableKind::Relation => true,
            TableKind::Rot1 => variant.uses_rot1(),
            TableKind::Rot2 => variant.uses_rot2(),
        }
    }
}

/// `rows` quaternion vectors of dimension `n`, stored as four row-major planes.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<T> {
    rows: usize,
    n: usize,
    planes: [Vec<T>; 4],
}

impl<T: Real> QTable<T> {
    pub fn zeros(rows: usize, n: usize) -> Self {
        QTable {
            rows,
            n,
            planes: std::array::from_fn(|_| vec![T::zero(); rows * n]),
        }
    }

    pub fn from_planes(rows: usize, n: usize, planes: [Vec<T>; 4]) -> Result<Self> {
        if planes.iter().any(|p| p.len() != rows * n) {
            return Err(Error::Shape(format!(
                "table planes must hold {rows}x{n} values"
            )));
        }
        Ok(QTable { rows, n, planes })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of real scalars (`rows · 4n`).
    pub fn scalar_count(&self) -> usize {
        4 * self.rows * self.n
    }

    pub fn planes(&self) -> &[Vec<T>; 4] {
        &self.planes
    }

    pub fn planes_mut(&mut self) -> &mut [Vec<T>; 4] {
        &mut self.planes
    }

    #[inline]
    pub fn row(&self, id: usize) -> QRef<'_, T> {
        let s = id * self.n..(id + 1) * self.n;
        let [r, i, j, k] = &self.planes;
        QRef::from_planes(&r[s.clone()], &i[s.clone()], &j[s.clone()], &k[s])
    }

    #[inline]
    pub fn row_mut(&mut self, id: usize) -> QMut<'_, T> {
        let s = id * self.n..(id + 1) * self.n;
        let [r, i, j, k] = &mut self.planes;
        QMut {
            r: &mut r[s.clone()],
            i: &mut i[s.clone()],
            j: &mut j[s.clone()],
            k: &mut k[s],
        }
    }

    pub fn set_row(&mut self, id: usize, q: QRef<'_, T>) {
        let dst = self.row_mut(id);
        dst.r.copy_from_slice(q.r);
        dst.i.copy_from_slice(q.i);
        dst.j.copy_from_slice(q.j);
        dst.k.copy_from_slice(q.k);
    }

    pub fn fill_identity(&mut self) {
        let [r, i, j, k] = &mut self.planes;
        r.fill(T::one());
        for p in [i, j, k] {
            p.fill(T::zero());
        }
    }

    pub fn is_finite(&self) -> bool {
        self.planes.iter().all(|p| p.iter().all(|x| x.is_finite()))
    }

    pub fn sum_squares(&self) -> T {
        self.planes
            .iter()
            .flat_map(|p| p.iter())
            .fold(T::zero(), |acc, &x| acc + x * x)
    }

    fn fill_uniform(&mut self, scale: T, rng: &mut impl Rng) {
        for plane in &mut self.planes {
            for x in plane.iter_mut() {
                *x = rng.gen_range(-scale..=scale);
            }
        }
    }
}

/// Options for [`ParamStore::init`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitOptions {
    /// Half-width of the uniform draw; `None` means `1 / sqrt(4n)`.
    pub scale: Option<f64>,
    pub rotation: InitRotation,
}

impl Default for InitOptions {
    fn default() -> Self {
        InitOptions {
            scale: None,
            rotation: InitRotation::Random,
        }
    }
}

/// All trainable parameters plus their Adagrad accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    pub entity: QTable<T>,
    pub relation: QTable<T>,
    pub rot1: QTable<T>,
    pub rot2: QTable<T>,
    /// Squared-gradient accumulators, one per table, indexed like [`TableKind::ALL`].
    pub accumulators: [QTable<T>; 4],
}

impl<T: Real> ParamStore<T> {
    pub fn zeros(num_entities: usize, num_relations: usize, n: usize) -> Self {
        let ent = QTable::zeros(num_entities, n);
        let rel = QTable::zeros(num_relations, n);
        ParamStore {
            accumulators: [ent.clone(), rel.clone(), rel.clone(), rel.clone()],
            entity: ent,
            relation: rel.clone(),
            rot1: rel.clone(),
            rot2: rel,
        }
    }

    /// Draws every scalar uniformly from `[-s, s]`. Deterministic in `seed`.
    pub fn init(
        num_entities: usize,
        num_relations: usize,
        n: usize,
        seed: u64,
        opts: InitOptions,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("embedding dimension must be >= 1".into()));
        }
        let scale = opts.scale.unwrap_or(1.0 / ((4 * n) as f64).sqrt());
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Config(format!(
                "init scale must be positive, got {scale}"
            )));
        }
        let scale = T::lit(scale);
        let mut rng = rng::stream(seed, Stream::Init);
        let mut store = Self::zeros(num_entities, num_relations, n);
        store.entity.fill_uniform(scale, &mut rng);
        store.relation.fill_uniform(scale, &mut rng);
        match opts.rotation {
            InitRotation::Random => {
                store.rot1.fill_uniform(scale, &mut rng);
                store.rot2.fill_uniform(scale, &mut rng);
            }
            InitRotation::Identity => store.set_rotations_identity(),
        }
        Ok(store)
    }

    pub fn num_entities(&self) -> usize {
        self.entity.rows()
    }

    pub fn num_relations(&self) -> usize {
        self.relation.rows()
    }

    pub fn dim(&self) -> usize {
        self.entity.dim()
    }

    pub fn table(&self, kind: TableKind) -> &QTable<T> {
        match kind {
            TableKind::Entity => &self.entity,
            TableKind::Relation => &self.relation,
            TableKind::Rot1 => &self.rot1,
            TableKind::Rot2 => &self.rot2,
        }
    }

    pub fn table_mut(&mut self, kind: TableKind) -> &mut QTable<T> {
        match kind {
            TableKind::Entity => &mut self.entity,
            TableKind::Relation => &mut self.relation,
            TableKind::Rot1 => &mut self.rot1,
            TableKind::Rot2 => &mut self.rot2,
        }
    }

    /// Parameter table and its accumulator, borrowed together.
    pub fn table_and_acc_mut(&mut self, kind: TableKind) -> (&mut QTable<T>, &mut QTable<T>) {
        let idx = kind as usize;
        let acc = &mut self.accumulators[idx];
        let table = match kind {
            TableKind::Entity => &mut self.entity,
            TableKind::Relation => &mut self.relation,
            TableKind::Rot1 => &mut self.rot1,
            TableKind::Rot2 => &mut self.rot2,
        };
        (table, acc)
    }

    /// Sets both rotation tables to the identity quaternion.
    pub fn set_rotations_identity(&mut self) {
        self.rot1.fill_identity();
        self.rot2.fill_identity();
    }

    /// Number of trainable scalars `variant` reads:
    /// `|E|·4n + k·|R|·4n` with `k` = 3 for QuatRE, 2 for the ablations, 1 for QuatE.
    pub fn param_count(&self, variant: ScoreVariant) -> usize {
        TableKind::ALL
            .iter()
            .filter(|k| k.used_by(variant))
            .map(|&k| self.table(k).scalar_count())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        TableKind::ALL.iter().all(|&k| self.table(k).is_finite())
    }

    /// Copies the entity row `id` out as an owned vector.
    pub fn entity_vec(&self, id: u32) -> QVec<T> {
        self.entity.row(id as usize).to_owned()
    }

    /// Drops the accumulators; used for evaluation snapshots.
    pub fn reset_accumulators(&mut self) {
        for acc in &mut self.accumulators {
            for p in acc.planes_mut() {
                p.fill(T::zero());
            }
        }
    }
}
