use std::path::Path;

use anyhow::anyhow;
use numdenorm::asrsim::{corrupt as corrupt_text, ErrorModel};
use numdenorm::corrector::{CorrectionModel, ModelConfig, Vocabulary};
use numdenorm::datasynth::{
    enforce_disjointness, load_templates, parse_templates, partition_by_length, CorpusGenerator,
    DisjointKey, LengthBucket, Split, SplitSpec, Template, UtterancePair, ValueSide,
    DEFAULT_TEMPLATES,
};
use numdenorm::evalkit::{corpus_wer, join_on_id, render_report, EvalReport, TextRecord};
use numdenorm::numgrammar::{default_grammar, Grammar, NumericCategory};
use numdenorm::spanalign::{align as align_tokens, AlignedExample};
use serde::Serialize;

use crate::config::{meta_path, require_dir, require_file, write_meta, Meta, PipelineConfig};
use crate::records::{read_jsonl, read_records, write_jsonl};
use crate::{
    AlignArgs, CorruptArgs, DenormArgs, EvalArgs, Failure, GenArgs, InferArgs, TrainArgs,
    VerbalizeArgs,
};

#[derive(Serialize)]
struct IdText {
    id: String,
    text: String,
}

#[derive(Serialize)]
struct CorpusRecord<'a> {
    id: String,
    #[serde(flatten)]
    pair: &'a UtterancePair,
}

#[derive(Serialize)]
struct Corrupted {
    id: String,
    written: String,
    hypothesis: String,
}

fn as_records(rows: &[(String, UtterancePair)]) -> Vec<CorpusRecord<'_>> {
    rows.iter()
        .map(|(id, pair)| CorpusRecord {
            id: id.clone(),
            pair,
        })
        .collect()
}

fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(String::from).collect()
}

fn grammar(path: Option<&Path>) -> Result<Grammar, Failure> {
    match path {
        Some(p) => Ok(Grammar::load(p)?),
        None => Ok(default_grammar().clone()),
    }
}

fn templates(path: Option<&Path>) -> Result<Vec<Template>, Failure> {
    match path {
        Some(p) => Ok(load_templates(p)?),
        None => Ok(parse_templates(DEFAULT_TEMPLATES)?),
    }
}

/// Write a JSONL artifact plus its provenance sidecar.
fn emit<T: Serialize>(path: &Path, records: &[T], meta: &Meta) -> Result<(), Failure> {
    write_jsonl(path, records)?;
    write_meta(&meta_path(path), meta)
}

/// Per-record seed, so one record's draws do not depend on its neighbours.
fn record_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn verbalize(cfg: &PipelineConfig, a: &VerbalizeArgs) -> Result<(), Failure> {
    let rules = a.rules.as_deref().or(cfg.rules.as_deref());
    if let Some(p) = rules {
        require_file(p)?;
    }
    let category: NumericCategory = a.category.parse()?;
    let g = grammar(rules)?;
    let tail = a.tail || cfg.tail_mode;
    if a.sample {
        let c = g.sample_verbalization(&a.written, category, tail, cfg.seed)?;
        println!("{} {:.6}", c.text(), c.weight);
    } else {
        for c in g.verbalize(&a.written, category, tail)? {
            println!("{} {:.6}", c.text(), c.weight);
        }
    }
    Ok(())
}

pub fn gen(mut cfg: PipelineConfig, a: &GenArgs) -> Result<(), Failure> {
    if let Some(p) = &a.rules {
        cfg.rules = Some(p.clone());
    }
    if let Some(p) = &a.templates {
        cfg.templates = Some(p.clone());
    }
    for p in [&cfg.rules, &cfg.templates].into_iter().flatten() {
        require_file(p)?;
    }
    cfg.per_template = a.per_template.unwrap_or(cfg.per_template);
    cfg.tail_mode |= a.tail;
    cfg.holdout.fraction = a.holdout_fraction.unwrap_or(cfg.holdout.fraction);
    cfg.holdout.salt = a.holdout_salt.unwrap_or(cfg.holdout.salt);
    cfg.split = SplitSpec::new(
        a.short_max.unwrap_or(cfg.split.short_max),
        a.medium_max.unwrap_or(cfg.split.medium_max),
    )?;
    let categories: Vec<NumericCategory> = match &a.categories {
        Some(list) => list
            .split(',')
            .map(|c| c.trim().parse())
            .collect::<Result<_, _>>()?,
        None => NumericCategory::SAMPLED.to_vec(),
    };

    let g = grammar(cfg.rules.as_deref())?;
    let all = templates(cfg.templates.as_deref())?;
    let pick = |split: Split| -> Vec<Template> {
        all.iter()
            .filter(|t| t.split == split && categories.contains(&t.category))
            .cloned()
            .collect()
    };
    let train = CorpusGenerator::new(&g, cfg.per_template, cfg.tail_mode, cfg.seed)
        .holdout(cfg.holdout, ValueSide::Kept)
        .generate(&pick(Split::Train))?;
    let test = CorpusGenerator::new(
        &g,
        cfg.per_template,
        cfg.tail_mode,
        cfg.seed.wrapping_add(1),
    )
    .holdout(cfg.holdout, ValueSide::HeldOut)
    .generate(&pick(Split::Test))?;
    let (test, removed) = enforce_disjointness(&train, &test, DisjointKey::Value);

    let meta = Meta::new("gen", cfg.seed, &(&cfg, a));
    let tagged = |prefix: &str, pairs: &[UtterancePair]| -> Vec<(String, UtterancePair)> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, p)| (format!("{prefix}-{i:06}"), p.clone()))
            .collect()
    };
    let train_rows = tagged("train", &train);
    let test_rows = tagged("test", &test);
    emit(&a.out.join("train.jsonl"), &as_records(&train_rows), &meta)?;
    emit(&a.out.join("test.jsonl"), &as_records(&test_rows), &meta)?;
    println!("train {}", train_rows.len());
    println!(
        "test {} ({removed} removed for value overlap)",
        test_rows.len()
    );

    let parts = partition_by_length(&test, cfg.split);
    for b in LengthBucket::ALL {
        let rows: Vec<(String, UtterancePair)> = test_rows
            .iter()
            .filter(|(_, p)| cfg.split.bucket(p.numeric_length) == b)
            .cloned()
            .collect();
        let file = format!("test_{}.jsonl", b.name().to_lowercase());
        emit(&a.out.join(file), &as_records(&rows), &meta)?;
        match parts.mean_length(b) {
            Some(m) => println!("TEST_{} {} avg_len {m:.2}", b.name(), rows.len()),
            None => println!("TEST_{} 0 avg_len -", b.name()),
        }
    }
    Ok(())
}

pub fn corrupt(mut cfg: PipelineConfig, a: &CorruptArgs) -> Result<(), Failure> {
    if let Some(p) = &a.error_model {
        cfg.error_model = Some(p.clone());
    }
    require_file(&a.input)?;
    if let Some(p) = &cfg.error_model {
        require_file(p)?;
    }
    let model = match &cfg.error_model {
        Some(p) => ErrorModel::load(p)?,
        None => ErrorModel::standard(),
    };
    let out = read_records(&a.input)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let written = r.str_field(&a.field)?.to_string();
            let hypothesis = corrupt_text(&written, &model, record_seed(cfg.seed, i));
            Ok(Corrupted {
                id: r.id,
                written,
                hypothesis,
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    emit(
        &a.out,
        &out,
        &Meta::new("corrupt", cfg.seed, &(&cfg, &model, a)),
    )
}

pub fn align(cfg: &PipelineConfig, a: &AlignArgs) -> Result<(), Failure> {
    require_file(&a.input)?;
    let out = read_records(&a.input)?
        .iter()
        .map(|r| {
            Ok(align_tokens(
                &words(r.str_field(&a.from)?),
                &words(r.str_field(&a.to)?),
            ))
        })
        .collect::<Result<Vec<AlignedExample>, Failure>>()?;
    emit(&a.out, &out, &Meta::new("align", cfg.seed, &(cfg, a)))
}

pub fn train(mut cfg: PipelineConfig, a: &TrainArgs) -> Result<(), Failure> {
    require_file(&a.input)?;
    match a.dims.as_deref() {
        None => {}
        Some("toy") => {
            cfg.model = ModelConfig {
                loss_mix: cfg.model.loss_mix,
                ..ModelConfig::toy()
            }
        }
        Some("paper") => {
            cfg.model = ModelConfig {
                loss_mix: cfg.model.loss_mix,
                ..ModelConfig::paper()
            }
        }
        Some(other) => {
            return Err(Failure::Usage(anyhow!(
                "unknown dims `{other}`, expected toy or paper"
            )))
        }
    }
    cfg.model.loss_mix = a.loss_mix.unwrap_or(cfg.model.loss_mix);
    cfg.train.epochs = a.epochs.unwrap_or(cfg.train.epochs);
    cfg.train.batch_size = a.batch_size.unwrap_or(cfg.train.batch_size);
    cfg.train.adam.lr = a.lr.unwrap_or(cfg.train.adam.lr);
    cfg.train.seed = cfg.seed;
    cfg.min_word_count = a.min_word_count.unwrap_or(cfg.min_word_count);

    let corpus: Vec<AlignedExample> = read_jsonl(&a.input)?;
    if corpus.is_empty() {
        return Err(Failure::Data(anyhow!(
            "training corpus {} is empty",
            a.input.display()
        )));
    }
    let vocab = Vocabulary::build(&corpus, cfg.min_word_count, None);
    let mut model = CorrectionModel::new(cfg.model.clone(), vocab, cfg.seed)?;
    let report = model.train_with(&corpus, &cfg.train, |epoch, loss| {
        println!("epoch {} loss {loss:.6}", epoch + 1);
    })?;
    if report.epoch_losses.last().is_some_and(|l| !l.is_finite()) {
        return Err(Failure::Internal(anyhow!("training diverged")));
    }
    model.save(&a.out)?;
    write_meta(
        &a.out.join("meta.json"),
        &Meta::new("train", cfg.seed, &(&cfg, a)),
    )
}

pub fn infer(cfg: &PipelineConfig, a: &InferArgs) -> Result<(), Failure> {
    require_dir(&a.model)?;
    require_file(&a.input)?;
    let model = CorrectionModel::load(&a.model)?;
    let out = read_records(&a.input)?
        .into_iter()
        .map(|r| {
            let tokens = words(r.str_field(&a.field)?);
            let text = if tokens.is_empty() {
                String::new()
            } else {
                model.correct(&tokens)?.text()
            };
            Ok(IdText { id: r.id, text })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    emit(&a.out, &out, &Meta::new("infer", cfg.seed, &(cfg, a)))
}

pub fn denorm_rules(mut cfg: PipelineConfig, a: &DenormArgs) -> Result<(), Failure> {
    if let Some(p) = &a.rules {
        cfg.rules = Some(p.clone());
    }
    require_file(&a.input)?;
    if let Some(p) = &cfg.rules {
        require_file(p)?;
    }
    let mut g = grammar(cfg.rules.as_deref())?;
    if a.no_tail {
        g = g.without_tail();
    }
    let out = read_records(&a.input)?
        .into_iter()
        .map(|r| {
            let text = g.denorm_text(r.str_field(&a.field)?);
            Ok(IdText { id: r.id, text })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    emit(
        &a.out,
        &out,
        &Meta::new("denorm-rules", cfg.seed, &(&cfg, a)),
    )
}

fn parse_ref(spec: &str) -> Result<(String, &Path), Failure> {
    match spec.split_once('=') {
        Some((set, path)) if !set.is_empty() && !path.is_empty() => {
            Ok((set.to_string(), Path::new(path)))
        }
        _ => Err(Failure::Usage(anyhow!(
            "--ref expects NAME=path, got `{spec}`"
        ))),
    }
}

fn parse_hyp(spec: &str) -> Result<(String, String, &Path), Failure> {
    let bad = || Failure::Usage(anyhow!("--hyp expects SYSTEM:SET=path, got `{spec}`"));
    let (key, path) = spec.split_once('=').ok_or_else(bad)?;
    let (system, set) = key.split_once(':').ok_or_else(bad)?;
    if system.is_empty() || set.is_empty() || path.is_empty() {
        return Err(bad());
    }
    Ok((system.to_string(), set.to_string(), Path::new(path)))
}

pub fn eval(cfg: &PipelineConfig, a: &EvalArgs) -> Result<(), Failure> {
    let refs = a
        .refs
        .iter()
        .map(|s| parse_ref(s))
        .collect::<Result<Vec<_>, _>>()?;
    let hyps = a
        .hyps
        .iter()
        .map(|s| parse_hyp(s))
        .collect::<Result<Vec<_>, _>>()?;
    for (_, set, _) in &hyps {
        if !refs.iter().any(|(r, _)| r == set) {
            return Err(Failure::Usage(anyhow!(
                "hypothesis names unknown test set `{set}`"
            )));
        }
    }
    for p in refs.iter().map(|r| r.1).chain(hyps.iter().map(|h| h.2)) {
        require_file(p)?;
    }

    let mut report = EvalReport::default();
    for (set, path) in &refs {
        let rows = read_records(path)?;
        let references = rows
            .iter()
            .map(|r| {
                Ok(TextRecord {
                    id: r.id.clone(),
                    text: r.str_field(&a.ref_field)?.to_string(),
                })
            })
            .collect::<Result<Vec<_>, Failure>>()?;
        let lengths: Option<Vec<f64>> = rows
            .iter()
            .map(|r| r.fields.get("numeric_length").and_then(|v| v.as_f64()))
            .collect();
        if let Some(l) = lengths.filter(|l| !l.is_empty()) {
            report.set_avg_length(set, l.iter().sum::<f64>() / l.len() as f64);
        }
        for (system, _, hyp_path) in hyps.iter().filter(|h| &h.1 == set) {
            let hypotheses = read_records(hyp_path)?
                .iter()
                .map(|r| {
                    Ok(TextRecord {
                        id: r.id.clone(),
                        text: r.str_field(&a.hyp_field)?.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            let pairs = join_on_id(&references, &hypotheses)?;
            report.insert(set, system, corpus_wer(&pairs)?);
        }
    }
    print!("{}", render_report(&report));
    if let Some(path) = &a.json_out {
        let text =
            serde_json::to_string_pretty(&report).map_err(|e| Failure::Internal(e.into()))? + "\n";
        std::fs::write(path, text)
            .map_err(|e| Failure::Data(anyhow!("writing {}: {e}", path.display())))?;
        write_meta(&meta_path(path), &Meta::new("eval", cfg.seed, &(cfg, a)))?;
    }
    Ok(())
}
