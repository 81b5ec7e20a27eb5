use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use quatkg::data::{load_dataset, relation_cardinality, synthetic, SyntheticConfig};
use quatkg::eval::{
    category_report, evaluate, render_category_table, render_relation_table, render_table,
    FilterMode, RankOptions,
};
use quatkg::model::{
    load_checkpoint, read_checkpoint_header, save_checkpoint, write_text_export, InitOptions,
    ParamStore,
};
use quatkg::train::{train_with, ExecMode, RegScope, TrainConfig};
use quatkg::{Category, Dataset, Dictionary, Metrics, Real, RelationStats, ScoreVariant, Split};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::manifest::{
    DatasetSummary, GridCell, GridSpec, MetricSummary, RunManifest, CHECKPOINT_FILE, LOG_FILE,
    MANIFEST_FILE,
};
use crate::{
    AnalyzeArgs, EvalArgs, ExportArgs, GridArgs, HyperArgs, ModelArgs, RankArgs, SynthArgs,
    TrainArgs,
};

// ---- shared plumbing --------------------------------------------------------

fn load_data(dir: &Path) -> CliResult<Dataset> {
    let ds = load_dataset(dir)?;
    let w = &ds.warnings;
    for (split, dups) in Split::ALL.iter().zip(w.duplicates) {
        if dups > 0 {
            log::warn!(
                "{}: dropped {dups} duplicate {split} triples",
                dir.display()
            );
        }
    }
    if w.unseen_entities > 0 || w.unseen_relations > 0 {
        log::warn!(
            "{}: {} entities and {} relations appear only outside train",
            dir.display(),
            w.unseen_entities,
            w.unseen_relations
        );
    }
    log::info!(
        "{}: {} entities, {} relations, {}/{}/{} train/valid/test triples",
        dir.display(),
        ds.num_entities(),
        ds.num_relations(),
        ds.train.len(),
        ds.valid.len(),
        ds.test.len()
    );
    Ok(ds)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, body: &str) -> CliResult<()> {
    fs::write(path, body).map_err(|e| CliError::io(path, e))
}

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

/// A checkpoint in whichever width it was saved.
enum AnyModel {
    F32(ParamStore<f32>),
    F64(ParamStore<f64>),
}

macro_rules! with_model {
    ($model:expr, $p:ident => $body:expr) => {
        match $model {
            AnyModel::F32($p) => $body,
            AnyModel::F64($p) => $body,
        }
    };
}

fn load_model(path: &Path) -> CliResult<AnyModel> {
    let header = read_checkpoint_header(path)?;
    Ok(match header.float_bits {
        32 => AnyModel::F32(load_checkpoint(path)?),
        _ => AnyModel::F64(load_checkpoint(path)?),
    })
}

/// Data directory, checkpoint and variant after merging explicit flags over
/// an optional manifest.
struct ModelSource {
    data: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
    variant: Option<ScoreVariant>,
}

fn model_source(args: &ModelArgs) -> CliResult<ModelSource> {
    let mut src = ModelSource {
        data: args.data.clone(),
        checkpoint: args.checkpoint.clone(),
        variant: args.variant,
    };
    if let Some(path) = &args.manifest {
        let (m, base) = RunManifest::read(path)?;
        src.data
            .get_or_insert_with(|| RunManifest::resolve(&base, &m.data));
        src.checkpoint
            .get_or_insert_with(|| RunManifest::resolve(&base, &m.checkpoint));
        src.variant.get_or_insert(m.variant);
    }
    Ok(src)
}

fn required<T>(value: Option<T>, what: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Usage(format!("missing {what} (pass it or use --manifest)")))
}

fn rank_options(args: &RankArgs) -> RankOptions {
    RankOptions {
        ties: args.ties,
        filter: if args.raw {
            FilterMode::Raw
        } else {
            FilterMode::Filtered
        },
        seed: args.tie_seed,
    }
}

// ---- train ------------------------------------------------------------------

fn config_from(h: &HyperArgs) -> TrainConfig {
    TrainConfig {
        lr: h.lr,
        negatives: h.neg,
        dim: h.dim,
        lambda: h.lambda,
        batches_per_epoch: h.batches,
        max_epochs: h.epochs,
        eval_every: h.eval_every,
        seed: h.seed,
        float_bits: h.float_bits,
        init: InitOptions {
            scale: h.init_scale,
            rotation: h.init_rot,
        },
        filter_negatives: h.filter_negatives,
        regularization: if h.dense_reg {
            RegScope::Dense
        } else {
            RegScope::Touched
        },
        exec: if h.parallel_grad {
            ExecMode::Parallel
        } else {
            ExecMode::Deterministic
        },
        rank: RankOptions {
            ties: h.ties,
            ..Default::default()
        },
        ..Default::default()
    }
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let (data, variant, cfg) = match &args.manifest {
        Some(path) => {
            let (m, base) = RunManifest::read(path)?;
            let data = args
                .data
                .clone()
                .unwrap_or_else(|| RunManifest::resolve(&base, &m.data));
            (data, m.variant, m.config)
        }
        None => (
            required(args.data.clone(), "--data")?,
            args.hyper.variant,
            config_from(&args.hyper),
        ),
    };
    cfg.validate()?;
    let ds = load_data(&data)?;
    let manifest = match cfg.float_bits {
        32 => run_training::<f32>(&ds, &data, variant, &cfg, &args.out)?,
        _ => run_training::<f64>(&ds, &data, variant, &cfg, &args.out)?,
    };
    log::info!(
        "best epoch {} ({} parameters); artifacts in {}",
        manifest.best_epoch,
        manifest.param_count,
        args.out.display()
    );
    Ok(())
}

/// Trains, then writes checkpoint, log, test report and manifest into `out`.
fn run_training<T: Real>(
    ds: &Dataset,
    data: &Path,
    variant: ScoreVariant,
    cfg: &TrainConfig,
    out: &Path,
) -> CliResult<RunManifest> {
    create_dir(out)?;
    let log_path = out.join(LOG_FILE);
    let mut log_file =
        BufWriter::new(File::create(&log_path).map_err(|e| CliError::io(&log_path, e))?);
    let mut log_err = None;
    let outcome = train_with::<T>(ds, cfg, variant, |record| {
        let line = serde_json::to_string(record).expect("record serializes");
        if let Err(e) = writeln!(log_file, "{line}").and_then(|_| log_file.flush()) {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(CliError::io(&log_path, e));
    }

    let ckpt = out.join(CHECKPOINT_FILE);
    save_checkpoint(&outcome.best, &ckpt)?;

    let mut metrics = MetricSummary::default();
    if !ds.valid.is_empty() {
        metrics.valid = Some(evaluate(&outcome.best, variant, ds, Split::Valid, &cfg.rank)?.both);
    }
    if !ds.test.is_empty() {
        let report = evaluate(&outcome.best, variant, ds, Split::Test, &cfg.rank)?;
        let table = render_table(&report);
        print!("{table}");
        write_file(&out.join("report-test.txt"), &table)?;
        write_file(&out.join("report-test.json"), &report.to_json())?;
        metrics.test = Some(report.both);
    }

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        data: fs::canonicalize(data).unwrap_or_else(|_| data.to_path_buf()),
        variant,
        seed: cfg.seed,
        config: cfg.clone(),
        checkpoint: PathBuf::from(CHECKPOINT_FILE),
        log: PathBuf::from(LOG_FILE),
        param_count: outcome.best.param_count(variant),
        best_epoch: outcome.best_epoch,
        dataset: DatasetSummary::of(ds),
        metrics,
    };
    manifest.write(&out.join(MANIFEST_FILE))?;
    Ok(manifest)
}

// ---- eval -------------------------------------------------------------------

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let src = model_source(&args.model)?;
    let data = required(src.data, "--data")?;
    let ckpt = required(src.checkpoint, "--checkpoint")?;
    let variant = required(src.variant, "--variant")?;
    let ds = load_data(&data)?;
    let model = load_model(&ckpt)?;
    let split = args.rank.split;
    let report =
        with_model!(model, p => evaluate(&p, variant, &ds, split, &rank_options(&args.rank)))?;
    let table = render_table(&report);
    print!("{table}");
    if let Some(out) = &args.out {
        create_dir(out)?;
        write_file(&out.join(format!("eval-{split}.txt")), &table)?;
        write_file(&out.join(format!("eval-{split}.json")), &report.to_json())?;
    }
    Ok(())
}

// ---- analyze ----------------------------------------------------------------

#[derive(Serialize)]
struct LabeledStats<'a> {
    label: &'a str,
    #[serde(flatten)]
    stats: &'a RelationStats,
}

#[derive(Serialize)]
struct Analysis<'a> {
    relations: Vec<LabeledStats<'a>>,
    /// Train relations per category; relations absent from train have none.
    category_counts: Vec<(Category, usize)>,
    uncategorized: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    evaluation: Option<quatkg::EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    categories: Option<quatkg::eval::CategoryReport>,
}

fn render_stats(ds: &Dataset, stats: &[RelationStats]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<32} {:>7} {:>6} {:>6} {:>8} {:>8} {:>5}",
        "relation", "train", "heads", "tails", "eta_h", "eta_t", "cat"
    );
    let fmt_eta = |x: Option<f64>| x.map_or("-".to_owned(), |v| format!("{v:.3}"));
    for s in stats {
        let _ = writeln!(
            out,
            "{:<32} {:>7} {:>6} {:>6} {:>8} {:>8} {:>5}",
            ds.relations.label(s.relation).unwrap_or("?"),
            s.train_triples,
            s.distinct_heads,
            s.distinct_tails,
            fmt_eta(s.eta_h),
            fmt_eta(s.eta_t),
            s.category.map_or("-", Category::label)
        );
    }
    out
}

pub fn analyze(args: &AnalyzeArgs) -> CliResult<()> {
    let src = model_source(&args.model)?;
    let data = required(src.data, "--data")?;
    let ds = load_data(&data)?;
    let stats = relation_cardinality(&ds);

    let category_counts: Vec<(Category, usize)> = Category::ALL
        .iter()
        .map(|&c| (c, stats.iter().filter(|s| s.category == Some(c)).count()))
        .collect();
    let uncategorized = stats.iter().filter(|s| s.category.is_none()).count();

    let mut text = render_stats(&ds, &stats);
    text.push('\n');
    for (c, n) in &category_counts {
        text.push_str(&format!("{:<9} {n:>6} relations\n", c.label()));
    }
    text.push_str(&format!(
        "{:<9} {uncategorized:>6} relations\n",
        "undefined"
    ));

    let (mut evaluation, mut categories) = (None, None);
    if let Some(ckpt) = src.checkpoint {
        let variant = required(src.variant, "--variant")?;
        let model = load_model(&ckpt)?;
        let report = with_model!(model, p => evaluate(&p, variant, &ds, args.rank.split, &rank_options(&args.rank)))?;
        let cats = category_report(&report, &stats);
        text.push('\n');
        text.push_str(&render_relation_table(&report, Some(&stats)));
        text.push('\n');
        text.push_str(&render_category_table(&cats));
        evaluation = Some(report);
        categories = Some(cats);
    }
    print!("{text}");

    if let Some(out) = &args.out {
        create_dir(out)?;
        let analysis = Analysis {
            relations: stats
                .iter()
                .map(|s| LabeledStats {
                    label: ds.relations.label(s.relation).unwrap_or("?"),
                    stats: s,
                })
                .collect(),
            category_counts,
            uncategorized,
            evaluation,
            categories,
        };
        write_file(&out.join("analyze.txt"), &text)?;
        write_file(&out.join("analyze.json"), &to_json(&analysis))?;
    }
    Ok(())
}

// ---- export -----------------------------------------------------------------

pub fn export(args: &ExportArgs) -> CliResult<()> {
    let src = model_source(&ModelArgs {
        data: args.data.clone(),
        checkpoint: args.checkpoint.clone(),
        variant: None,
        manifest: args.manifest.clone(),
    })?;
    let ckpt = required(src.checkpoint, "--checkpoint")?;
    let model = load_model(&ckpt)?;
    let (ne, nr) = with_model!(&model, p => (p.num_entities(), p.num_relations()));
    let (entities, relations) = match &src.data {
        Some(dir) => {
            let ds = load_data(dir)?;
            if ds.num_entities() != ne || ds.num_relations() != nr {
                return Err(quatkg::Error::Shape(format!(
                    "checkpoint has {ne} entities / {nr} relations, {} has {} / {}",
                    dir.display(),
                    ds.num_entities(),
                    ds.num_relations()
                ))
                .into());
            }
            (ds.entities, ds.relations)
        }
        None => (Dictionary::numbered("", ne), Dictionary::numbered("", nr)),
    };
    let write = |out: &mut dyn Write| -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        with_model!(&model, p => write_text_export(p, &entities, &relations, args.relations, &mut out))?;
        out.flush()
    };
    match &args.out {
        Some(path) => {
            let mut file = File::create(path).map_err(|e| CliError::io(path, e))?;
            write(&mut file).map_err(|e| CliError::io(path, e))
        }
        None => write(&mut std::io::stdout().lock()).map_err(|e| CliError::io("<stdout>", e)),
    }
}

// ---- grid -------------------------------------------------------------------

#[derive(Serialize)]
struct GridRow {
    dir: String,
    #[serde(flatten)]
    cell: GridCell,
    best_epoch: usize,
    valid: Option<Metrics>,
    test: Option<Metrics>,
}

#[derive(Serialize)]
struct GridSummary<'a> {
    spec: &'a GridSpec,
    cells: Vec<GridRow>,
    /// Index of the cell with the best validation Hits@10 (MRR breaks ties).
    best: Option<usize>,
    target_met: Option<bool>,
}

fn merged_spec(args: &GridArgs) -> CliResult<GridSpec> {
    let mut spec = match &args.grid {
        Some(path) => GridSpec::read(path)?,
        None => GridSpec {
            data: None,
            variant: ScoreVariant::QuatRE,
            lr: vec![],
            neg: vec![],
            dim: vec![],
            lambda: vec![],
            epochs: 0,
            eval_every: 0,
            batches: 100,
            seed: 0,
            target: None,
        },
    };
    fn set<T: Clone>(slot: &mut Vec<T>, v: &[T]) {
        if !v.is_empty() {
            *slot = v.to_vec();
        }
    }
    set(&mut spec.lr, &args.lr);
    set(&mut spec.neg, &args.neg);
    set(&mut spec.dim, &args.dim);
    set(&mut spec.lambda, &args.lambda);
    if let Some(d) = &args.data {
        spec.data = Some(d.clone());
    }
    if let Some(v) = args.variant {
        spec.variant = v;
    }
    spec.epochs = args.epochs.unwrap_or(spec.epochs);
    spec.eval_every = args.eval_every.unwrap_or(spec.eval_every);
    spec.batches = args.batches.unwrap_or(spec.batches);
    spec.seed = args.seed.unwrap_or(spec.seed);

    let empty = [
        ("--lr", spec.lr.is_empty()),
        ("--neg", spec.neg.is_empty()),
        ("--dim", spec.dim.is_empty()),
        ("--lambda", spec.lambda.is_empty()),
    ];
    if let Some((flag, _)) = empty.iter().find(|(_, e)| *e) {
        return Err(CliError::Usage(format!(
            "grid needs at least one value for {flag}"
        )));
    }
    if spec.epochs == 0 || spec.eval_every == 0 {
        return Err(CliError::Usage(
            "grid needs --epochs and --eval-every".into(),
        ));
    }
    Ok(spec)
}

pub fn grid(args: &GridArgs) -> CliResult<()> {
    let spec = merged_spec(args)?;
    let data = required(spec.data.clone(), "--data")?;
    let ds = load_data(&data)?;
    create_dir(&args.out)?;

    let cells = spec.cells();
    let mut rows = Vec::with_capacity(cells.len());
    for (index, cell) in cells.iter().enumerate() {
        let cfg = TrainConfig {
            lr: cell.lr,
            negatives: cell.neg,
            dim: cell.dim,
            lambda: cell.lambda,
            batches_per_epoch: spec.batches,
            max_epochs: spec.epochs,
            eval_every: spec.eval_every,
            seed: spec.seed,
            ..Default::default()
        };
        cfg.validate()?;
        let dir = cell.dir_name(index);
        log::info!("grid cell {}/{}: {dir}", index + 1, cells.len());
        let m = run_training::<f64>(&ds, &data, spec.variant, &cfg, &args.out.join(&dir))?;
        rows.push(GridRow {
            dir,
            cell: *cell,
            best_epoch: m.best_epoch,
            valid: m.metrics.valid,
            test: m.metrics.test,
        });
    }

    let key = |r: &GridRow| r.valid.map(|m| (m.hits10, m.mrr));
    let best = (0..rows.len()).filter(|&i| key(&rows[i]).is_some()).fold(
        None,
        |best: Option<usize>, i| match best {
            Some(b) if key(&rows[b]) >= key(&rows[i]) => Some(b),
            _ => Some(i),
        },
    );
    let target_met = match (spec.target, best) {
        (Some(t), Some(b)) => {
            let m = if t.split == Split::Valid {
                rows[b].valid
            } else {
                rows[b].test
            };
            m.map(|m| (m.mrr - t.mrr).abs() <= t.mrr_tolerance)
        }
        _ => None,
    };

    println!(
        "{:<44} {:>6} {:>9} {:>9} {:>9}",
        "cell", "epoch", "val H@10", "val MRR", "test MRR"
    );
    for (i, r) in rows.iter().enumerate() {
        let f = |m: Option<Metrics>, pick: fn(&Metrics) -> f64, scale: f64| {
            m.map_or("-".to_owned(), |m| format!("{:.3}", scale * pick(&m)))
        };
        println!(
            "{:<44} {:>6} {:>9} {:>9} {:>9}{}",
            r.dir,
            r.best_epoch,
            f(r.valid, |m| m.hits10, 100.0),
            f(r.valid, |m| m.mrr, 1.0),
            f(r.test, |m| m.mrr, 1.0),
            if Some(i) == best { "  *" } else { "" }
        );
    }
    if let Some(met) = target_met {
        println!("target {}", if met { "met" } else { "missed" });
    }
    let summary = GridSummary {
        spec: &spec,
        cells: rows,
        best,
        target_met,
    };
    write_file(&args.out.join("grid.json"), &to_json(&summary))
}

// ---- synth ------------------------------------------------------------------

pub fn synth(args: &SynthArgs) -> CliResult<()> {
    let cfg = SyntheticConfig {
        entities: args.entities,
        relations: args.relations,
        groups: args.groups,
        train: args.train,
        valid: args.valid,
        test: args.test,
        seed: args.seed,
    };
    let ds = synthetic(&cfg)?;
    ds.write_dir(&args.out)?;
    log::info!(
        "wrote {}/{}/{} triples over {} entities and {} relations to {}",
        ds.train.len(),
        ds.valid.len(),
        ds.test.len(),
        ds.num_entities(),
        ds.num_relations(),
        args.out.display()
    );
    Ok(())
}
