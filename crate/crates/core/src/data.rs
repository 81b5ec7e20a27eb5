//! Triple files, entity/relation dictionaries and the known-triple filter.
//!
//! A dataset directory holds `train.txt`, `valid.txt` and `test.txt`, one
//! `head<TAB>relation<TAB>tail` triple per line. Ids are assigned densely in
//! order of first appearance over train, then valid, then test.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub h: u32,
    pub r: u32,
    pub t: u32,
}

impl Triple {
    pub const fn new(h: u32, r: u32, t: u32) -> Self {
        Triple { h, r, t }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.h, self.r, self.t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.txt", self.name())
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// Bidirectional label ↔ dense id map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionary {
    labels: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Dictionary whose labels are `"{prefix}{id}"` for `id in 0..len`.
    pub fn numbered(prefix: &str, len: usize) -> Self {
        let mut dict = Self::new();
        for id in 0..len {
            dict.intern(&format!("{prefix}{id}"));
        }
        dict
    }

    /// Returns the id for `label`, assigning the next free id if unseen.
    pub fn intern(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.ids.get(label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.labels.push(label.to_owned());
        self.ids.insert(label.to_owned(), id);
        id
    }

    pub fn id(&self, label: &str) -> Option<u32> {
        self.ids.get(label).copied()
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        self.labels.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Writes `id<TAB>label` lines.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (id, label) in self.labels.iter().enumerate() {
            writeln!(out, "{id}\t{label}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a file written by [`Dictionary::write_tsv`]. Ids must be dense
    /// and in order.
    pub fn read_tsv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut dict = Self::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_owned(),
                line: lineno + 1,
                message,
            };
            let (id, label) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected id<TAB>label".into()))?;
            let id: usize = id
                .parse()
                .map_err(|_| parse_err(format!("bad id {id:?}")))?;
            if id != dict.len() {
                return Err(parse_err(format!(
                    "id {id} out of order, expected {}",
                    dict.len()
                )));
            }
            if dict.id(label).is_some() {
                return Err(parse_err(format!("duplicate label {label:?}")));
            }
            dict.intern(label);
        }
        Ok(dict)
    }
}

/// Set of all known triples with per-query lookup of known partners.
#[derive(Debug, Clone, Default)]
pub struct FilterIndex {
    tails: HashMap<(u32, u32), Vec<u32>>,
    heads: HashMap<(u32, u32), Vec<u32>>,
    len: usize,
}

impl FilterIndex {
    pub fn from_triples<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> Self {
        let mut index = FilterIndex::default();
        for tr in triples {
            index.tails.entry((tr.h, tr.r)).or_default().push(tr.t);
            index.heads.entry((tr.r, tr.t)).or_default().push(tr.h);
        }
        for v in index.tails.values_mut().chain(index.heads.values_mut()) {
            v.sort_unstable();
            v.dedup();
        }
        index.len = index.tails.values().map(Vec::len).sum();
        index
    }

    pub fn contains(&self, tr: &Triple) -> bool {
        self.known_tails(tr.h, tr.r).binary_search(&tr.t).is_ok()
    }

    /// Sorted tails `t` with `(h, r, t)` known.
    pub fn known_tails(&self, h: u32, r: u32) -> &[u32] {
        self.tails.get(&(h, r)).map_or(&[], Vec::as_slice)
    }

    /// Sorted heads `h` with `(h, r, t)` known.
    pub fn known_heads(&self, r: u32, t: u32) -> &[u32] {
        self.heads.get(&(r, t)).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Counts of things `load_dataset` tolerated but reported.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadWarnings {
    /// Dropped duplicate lines per split, indexed like [`Split::ALL`].
    pub duplicates: [usize; 3],
    /// Entities first seen in valid or test.
    pub unseen_entities: usize,
    /// Relations first seen in valid or test.
    pub unseen_relations: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub entities: Dictionary,
    pub relations: Dictionary,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    pub filter: FilterIndex,
    pub warnings: LoadWarnings,
}

impl Dataset {
    /// Assembles a dataset from id triples. Duplicates within a split are
    /// dropped and counted.
    pub fn from_triples(
        entities: Dictionary,
        relations: Dictionary,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self> {
        let mut warnings = LoadWarnings::default();
        let mut splits = [train, valid, test];
        for (s, split) in splits.iter_mut().enumerate() {
            for tr in split.iter() {
                if tr.h as usize >= entities.len() || tr.t as usize >= entities.len() {
                    return Err(Error::Index {
                        what: "entity",
                        index: tr.h.max(tr.t) as usize,
                        size: entities.len(),
                    });
                }
                if tr.r as usize >= relations.len() {
                    return Err(Error::Index {
                        what: "relation",
                        index: tr.r as usize,
                        size: relations.len(),
                    });
                }
            }
            warnings.duplicates[s] = dedup_in_order(split);
        }
        let [train, valid, test] = splits;
        let filter = FilterIndex::from_triples(train.iter().chain(&valid).chain(&test));
        Ok(Dataset {
            entities,
            relations,
            train,
            valid,
            test,
            filter,
            warnings,
        })
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// Writes the three split files using dictionary labels, plus
    /// `entities.tsv` and `relations.tsv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for split in Split::ALL {
            let path = dir.join(split.file_name());
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut out = BufWriter::new(file);
            for tr in self.split(split) {
                let h = self.entities.label(tr.h).expect("entity id in range");
                let r = self.relations.label(tr.r).expect("relation id in range");
                let t = self.entities.label(tr.t).expect("entity id in range");
                writeln!(out, "{h}\t{r}\t{t}").map_err(|e| Error::io(&path, e))?;
            }
            out.flush().map_err(|e| Error::io(&path, e))?;
        }
        self.write_dictionaries(dir)
    }

    pub fn write_dictionaries(&self, dir: &Path) -> Result<()> {
        self.entities.write_tsv(&dir.join("entities.tsv"))?;
        self.relations.write_tsv(&dir.join("relations.tsv"))
    }
}

fn dedup_in_order(triples: &mut Vec<Triple>) -> usize {
    let before = triples.len();
    let mut seen = HashSet::with_capacity(before);
    triples.retain(|tr| seen.insert(*tr));
    before - triples.len()
}

/// Loads `train.txt`, `valid.txt` and `test.txt` from `dir`.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let mut entities = Dictionary::new();
    let mut relations = Dictionary::new();
    let mut splits: [Vec<Triple>; 3] = Default::default();
    let mut unseen_entities = 0;
    let mut unseen_relations = 0;

    for (s, split) in Split::ALL.iter().enumerate() {
        let path = dir.join(split.file_name());
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
                return Err(Error::Parse {
                    path: path.clone(),
                    line: lineno + 1,
                    message: format!(
                        "expected head<TAB>relation<TAB>tail, got {} field(s)",
                        fields.len()
                    ),
                });
            }
            let (e_before, r_before) = (entities.len(), relations.len());
            let h = entities.intern(fields[0]);
            let r = relations.intern(fields[1]);
            let t = entities.intern(fields[2]);
            if *split != Split::Train {
                unseen_entities += entities.len() - e_before;
                unseen_relations += relations.len() - r_before;
            }
            splits[s].push(Triple { h, r, t });
        }
    }

    let [train, valid, test] = splits;
    let mut ds = Dataset::from_triples(entities, relations, train, valid, test)?;
    ds.warnings.unseen_entities = unseen_entities;
    ds.warnings.unseen_relations = unseen_relations;
    for (split, dups) in Split::ALL.iter().zip(ds.warnings.duplicates) {
        if dups > 0 {
            log::warn!("{}: dropped {dups} duplicate triple(s)", split.file_name());
        }
    }
    if unseen_entities > 0 || unseen_relations > 0 {
        log::warn!(
            "{} entities and {} relations appear only outside train",
            unseen_entities,
            unseen_relations
        );
    }
    Ok(ds)
}

/// Reads entity and relation dictionaries previously written next to a
/// dataset. Returns `None` when the files are absent.
pub fn read_dictionaries(dir: &Path) -> Result<Option<(Dictionary, Dictionary)>> {
    let ents: PathBuf = dir.join("entities.tsv");
    let rels: PathBuf = dir.join("relations.tsv");
    if !ents.exists() || !rels.exists() {
        return Ok(None);
    }
    Ok(Some((
        Dictionary::read_tsv(&ents)?,
        Dictionary::read_tsv(&rels)?,
    )))
}

// ---- relation cardinality ---------------------------------------------------

/// Mapping-property category of a relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "1-1")]
    OneToOne,
    #[serde(rename = "1-M")]
    OneToMany,
    #[serde(rename = "M-1")]
    ManyToOne,
    #[serde(rename = "M-M")]
    ManyToMany,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::OneToOne,
        Category::OneToMany,
        Category::ManyToOne,
        Category::ManyToMany,
    ];

    /// Threshold on both averaged counts.
    pub const THRESHOLD: f64 = 1.5;

    pub fn classify(eta_h: f64, eta_t: f64) -> Self {
        match (eta_h < Self::THRESHOLD, eta_t < Self::THRESHOLD) {
            (true, true) => Category::OneToOne,
            (true, false) => Category::OneToMany,
            (false, true) => Category::ManyToOne,
            (false, false) => Category::ManyToMany,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::OneToOne => "1-1",
            Category::OneToMany => "1-M",
            Category::ManyToOne => "M-1",
            Category::ManyToMany => "M-M",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationStats {
    pub relation: u32,
    pub train_triples: usize,
    pub distinct_heads: usize,
    pub distinct_tails: usize,
    /// Averaged number of heads per tail; `None` if the relation has no train triples.
    pub eta_h: Option<f64>,
    /// Averaged number of tails per head.
    pub eta_t: Option<f64>,
    pub category: Option<Category>,
}

/// Per-relation averaged head/tail counts and category, from the train split.
pub fn relation_cardinality(ds: &Dataset) -> Vec<RelationStats> {
    let nr = ds.num_relations();
    let mut counts = vec![0usize; nr];
    let mut heads: Vec<HashSet<u32>> = vec![HashSet::new(); nr];
    let mut tails: Vec<HashSet<u32>> = vec![HashSet::new(); nr];
    for tr in &ds.train {
        let r = tr.r as usize;
        counts[r] += 1;
        heads[r].insert(tr.h);
        tails[r].insert(tr.t);
    }
    (0..nr)
        .map(|r| {
            let n = counts[r];
            let (eta_h, eta_t, category) = if n == 0 {
                (None, None, None)
            } else {
                let eta_h = n as f64 / tails[r].len() as f64;
                let eta_t = n as f64 / heads[r].len() as f64;
                (
                    Some(eta_h),
                    Some(eta_t),
                    Some(Category::classify(eta_h, eta_t)),
                )
            };
            RelationStats {
                relation: r as u32,
                train_triples: n,
                distinct_heads: heads[r].len(),
                distinct_tails: tails[r].len(),
                eta_h,
                eta_t,
                category,
            }
        })
        .collect()
}

// ---- synthetic graphs -------------------------------------------------------

/// Parameters of a synthetic graph with planted block structure.
///
/// Entity `e` belongs to group `e % groups`. Each relation maps every group to
/// one target group; `(h, r, t)` is a fact iff `t`'s group is the target of
/// `h`'s group under `r`. Splits are disjoint uniform samples of the facts.
/// With `groups = 1` every triple is a fact and the graph is uniform random.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub entities: usize,
    pub relations: usize,
    pub groups: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            entities: 50,
            relations: 5,
            groups: 5,
            train: 200,
            valid: 25,
            test: 50,
            seed: 0,
        }
    }
}

pub fn synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    if cfg.entities < 2 || cfg.relations == 0 || cfg.groups == 0 || cfg.groups > cfg.entities {
        return Err(Error::Config(format!("degenerate synthetic graph {cfg:?}")));
    }
    let mut rng = rng::stream(cfg.seed, Stream::Synthetic);
    let group = |e: usize| e % cfg.groups;
    let targets: Vec<Vec<usize>> = (0..cfg.relations)
        .map(|_| {
            (0..cfg.groups)
                .map(|_| rng.gen_range(0..cfg.groups))
                .collect()
        })
        .collect();

    let mut facts = Vec::new();
    for (r, target) in targets.iter().enumerate() {
        for h in 0..cfg.entities {
            for t in 0..cfg.entities {
                if group(t) == target[group(h)] {
                    facts.push(Triple::new(h as u32, r as u32, t as u32));
                }
            }
        }
    }
    let wanted = cfg.train + cfg.valid + cfg.test;
    if wanted > facts.len() {
        return Err(Error::Config(format!(
            "asked for {wanted} triples but the graph only has {} facts",
            facts.len()
        )));
    }
    facts.shuffle(&mut rng);
    facts.truncate(wanted);
    let test = facts.split_off(cfg.train + cfg.valid);
    let valid = facts.split_off(cfg.train);
    Dataset::from_triples(
        Dictionary::numbered("e", cfg.entities),
        Dictionary::numbered("r", cfg.relations),
        facts,
        valid,
        test,
    )
}
