use super::*;
use crate::neuralcore::gradcheck::check_gradients;
use crate::neuralcore::AdamConfig;
use crate::spanalign::{align, Tag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn w(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn alarm() -> crate::spanalign::AlignedExample {
    align(&w("set alarm for ten fifteen"), &w("set alarm for 10:15"))
}

fn tiny_config() -> ModelConfig {
    ModelConfig {
        embed_dim: 3,
        enc_hidden: 4,
        tagger_hidden: 3,
        mid_hidden: 4,
        dec_hidden: 5,
        attention_dim: 4,
        char_embed_dim: 3,
        tag_embed_dim: 2,
        ..ModelConfig::toy()
    }
}

fn small_model(examples: &[crate::spanalign::AlignedExample], seed: u64) -> CorrectionModel {
    CorrectionModel::new(
        ModelConfig::toy(),
        Vocabulary::build(examples, 1, None),
        seed,
    )
    .unwrap()
}

#[test]
fn vocabulary_ids() {
    let v = Vocabulary::build(&[alarm()], 1, None);
    assert_eq!(v.word(0), Some("<pad>"));
    assert_eq!(v.word(1), Some("<unk>"));
    assert_eq!(v.num_words(), 2 + 5);
    for t in ["set", "alarm", "fifteen"] {
        assert_eq!(v.word(v.word_id(t)), Some(t));
    }
    assert_eq!(v.word_id("zebra"), 1);
    for c in "10:15".chars() {
        assert_eq!(v.char(v.char_id(c)), Some(c));
    }
    assert_eq!(v.char(0), None);
    assert_eq!(v.char(1), None);
    assert_eq!(v.char_id('z'), 2);
    let json = serde_json::to_string(&v).unwrap();
    assert_eq!(serde_json::from_str::<Vocabulary>(&json).unwrap(), v);
    assert_eq!(v.encode_target("10").last(), Some(&1));
}

#[test]
fn config_validation() {
    assert!(ModelConfig::paper().validate().is_ok());
    for bad in [
        ModelConfig {
            loss_mix: 1.0,
            ..ModelConfig::toy()
        },
        ModelConfig {
            loss_mix: 0.0,
            ..ModelConfig::toy()
        },
        ModelConfig {
            dec_hidden: 0,
            ..ModelConfig::toy()
        },
    ] {
        assert!(matches!(
            bad.validate(),
            Err(CorrectorError::InvalidConfig(_))
        ));
    }
}

fn unit_config() -> ModelConfig {
    ModelConfig {
        embed_dim: 1,
        enc_hidden: 1,
        tagger_hidden: 1,
        mid_hidden: 1,
        dec_hidden: 1,
        attention_dim: 1,
        char_embed_dim: 1,
        tag_embed_dim: 1,
        ..ModelConfig::toy()
    }
}

#[test]
fn param_count_hand_tally() {
    // two words (<pad>, <unk>), three output symbols (BOS, EOS, UNK)
    let m = CorrectionModel::new(unit_config(), Vocabulary::from_parts(vec![], vec![]), 0).unwrap();
    // word emb 2 + two encoder GRUs 2*9 + tag emb 5 + tagger GRU over 3 inputs 15 + tag proj 8
    // span emb 2 + mid GRUs 18 + ctx proj 6 + attention 5 + init 3 + char emb 3
    //   + decoder GRU over 3 inputs 15 + output proj 12
    assert_eq!(m.param_count(), (48, 64));
    assert_eq!(
        m.param_count().0 + m.param_count().1,
        m.store().num_elements()
    );
}

#[test]
fn param_count_partitions_follow_dims() {
    let v = Vocabulary::build(&[alarm()], 1, None);
    let base = CorrectionModel::new(ModelConfig::toy(), v.clone(), 0)
        .unwrap()
        .param_count();
    let count = |c: ModelConfig| CorrectionModel::new(c, v.clone(), 0).unwrap().param_count();
    let t = count(ModelConfig {
        tagger_hidden: 32,
        ..ModelConfig::toy()
    });
    assert!(t.0 > base.0 && t.1 == base.1);
    let d = count(ModelConfig {
        dec_hidden: 64,
        ..ModelConfig::toy()
    });
    assert!(d.0 == base.0 && d.1 > base.1);
    // the decoder's context bridge reads encoder states, so it grows too
    let c = ModelConfig::toy();
    let e = count(ModelConfig {
        enc_hidden: 64,
        ..c.clone()
    });
    assert!(e.0 > base.0);
    let bridge = |enc: usize| 2 * enc * (2 * c.mid_hidden) + 2 * enc * c.dec_hidden;
    assert_eq!(e.1 - base.1, bridge(64) - bridge(32));
}

#[test]
fn paper_dims_partition_counts() {
    let words: Vec<String> = (0..9_998).map(|i| format!("w{i}")).collect();
    let chars: Vec<char> = "0123456789:.$%-/ abcdefghijklmnopqrstuvwxyz"
        .chars()
        .collect();
    let m = CorrectionModel::new(
        ModelConfig::paper(),
        Vocabulary::from_parts(words, chars),
        0,
    )
    .unwrap();
    assert_eq!(m.vocab.num_words(), 10_000);
    let (a, b) = m.param_count();
    assert!((a as f64 - 2e6).abs() <= 0.25 * 2e6, "{a}");
    assert!((b as f64 - 4e6).abs() <= 0.25 * 4e6, "{b}");
}

#[test]
fn untrained_tags_are_structurally_valid() {
    let ex = alarm();
    for seed in 0..20 {
        for beam in [1, 3] {
            let mut m = small_model(std::slice::from_ref(&ex), seed);
            m.config.tag_beam = beam;
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let n = r.gen_range(1..9);
            let toks: Vec<String> = (0..n)
                .map(|i| ["set", "ten", "x", "for"][i % 4].to_string())
                .collect();
            let tags = m.tag(&toks).unwrap();
            assert_eq!(tags.len(), n);
            let mut prev = None;
            for t in &tags {
                assert!(t.may_follow(prev));
                prev = Some(*t);
            }
            assert!(m.tag(&w("ten")).unwrap()[0].is_start());
        }
    }
    let m = small_model(&[ex], 0);
    assert!(matches!(m.tag(&[]), Err(CorrectorError::EmptyInput)));
    assert!(matches!(m.correct(&[]), Err(CorrectorError::EmptyInput)));
}

#[test]
fn decode_span_edge_cases() {
    let mut m = small_model(&[alarm()], 1);
    let toks = w("set alarm for ten fifteen");
    assert!(m.decode_span(&toks, 2, 2).unwrap().chars().count() <= 32);
    assert!(m.decode_span(&toks, 5, 5).is_ok());
    assert!(matches!(
        m.decode_span(&toks, 3, 6),
        Err(CorrectorError::BadSpan { .. })
    ));
    m.config.max_decode_len = 0;
    assert_eq!(m.decode_span(&toks, 3, 5).unwrap(), "");
}

/// Force every tag decision to TRIVIAL through the projection bias.
fn force_trivial(m: &mut CorrectionModel) {
    let id = m.store().id("tag.out.b").unwrap();
    let b = &mut m.store_mut().get_mut(id).data;
    b[Tag::ALL[0].index()] = 50.0;
    b[Tag::ALL[1].index()] = 50.0;
}

#[test]
fn all_trivial_tagging_skips_decoder() {
    let mut m = small_model(&[alarm()], 2);
    force_trivial(&mut m);
    m.reset_decoder_invocations();
    for text in ["set alarm for ten fifteen", "unknown words only", "x"] {
        let r = m.correct(&w(text)).unwrap();
        assert_eq!(r.output_tokens, w(text));
        assert!(r.span_outputs.is_empty());
    }
    assert_eq!(m.decoder_invocations(), 0);
}

#[test]
fn loss_mixture_endpoints() {
    let m = small_model(&[alarm()], 3);
    let ex = alarm();
    let p = m.loss_parts(&ex, 1.0).unwrap();
    assert!((p.total - p.tagger).abs() < 1e-12);
    let p = m.loss_parts(&ex, 0.0).unwrap();
    assert!((p.total - p.decoder).abs() < 1e-12);
    let id = align(&w("a b c"), &w("a b c"));
    let p = m.loss_parts(&id, 0.5).unwrap();
    assert_eq!(p.decoder, 0.0);
    assert!(p.total.is_finite() && p.total >= 0.0);
}

#[test]
fn full_model_gradient_check() {
    let examples = [
        alarm(),
        align(&w("pay ten dollars now"), &w("pay $10 now")),
        align(&w("a b c"), &w("a x b")),
    ];
    let vocab = Vocabulary::build(&examples, 1, None);
    assert!(vocab.num_words() <= 20 && vocab.num_chars() <= 20);
    let mut m = CorrectionModel::new(tiny_config(), vocab, 4).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let ids: Vec<_> = m.store().ids().collect();
    for id in ids {
        for v in &mut m.store_mut().get_mut(id).data {
            *v = r.gen_range(-0.5..0.5);
        }
    }
    let mut store = m.store().clone();
    for ex in &examples {
        let report = check_gradients(&mut store, 1e-5, |s| {
            m.loss_and_grads_with(s, ex, 0.5).unwrap()
        });
        assert!(report.passes(1e-4), "{report:?}");
    }
}

#[test]
fn training_is_deterministic_and_lr_zero_is_inert() {
    let ex = vec![alarm(), align(&w("pay ten dollars"), &w("pay $10"))];
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 1,
        ..Default::default()
    };
    let mut a = small_model(&ex, 6);
    let mut b = small_model(&ex, 6);
    assert_eq!(a.train(&ex, &cfg).unwrap(), b.train(&ex, &cfg).unwrap());

    let mut c = small_model(&ex, 6);
    let before = c.store().clone();
    let zero = TrainConfig {
        adam: AdamConfig {
            lr: 0.0,
            ..cfg.adam
        },
        ..cfg.clone()
    };
    c.train(&ex, &zero).unwrap();
    for ((_, x), (_, y)) in before.iter().zip(c.store().iter()) {
        assert_eq!(x.data, y.data);
    }
    assert!(matches!(
        c.train(&[], &cfg),
        Err(CorrectorError::EmptyCorpus)
    ));
}

#[test]
fn overfits_single_example() {
    let ex = alarm();
    let mut m = small_model(std::slice::from_ref(&ex), 7);
    let cfg = TrainConfig {
        epochs: 400,
        batch_size: 1,
        adam: AdamConfig {
            lr: 1e-2,
            clip_norm: Some(5.0),
            ..AdamConfig::default()
        },
        seed: 0,
        target_loss: Some(1e-4),
    };
    m.train(std::slice::from_ref(&ex), &cfg).unwrap();
    assert!(m.loss(&ex).unwrap() < 1e-3);
    let toks = w("set alarm for ten fifteen");
    assert_eq!(m.tag(&toks).unwrap(), ex.tags);
    assert_eq!(m.decode_span(&toks, 3, 5).unwrap(), "10:15");
    let r = m.correct(&toks).unwrap();
    assert_eq!(r.text(), "set alarm for 10:15");
    assert_eq!(r.span_outputs, vec!["10:15"]);

    let dir = tempfile::tempdir().unwrap();
    m.save(dir.path()).unwrap();
    let back = CorrectionModel::load(dir.path()).unwrap();
    assert_eq!(back.correct(&toks).unwrap(), r);
    assert_eq!(back.config, m.config);
}

#[test]
fn load_rejects_unknown_format() {
    let m = small_model(&[alarm()], 8);
    let dir = tempfile::tempdir().unwrap();
    m.save(dir.path()).unwrap();
    let side = dir.path().join(SIDECAR_FILE);
    let text = std::fs::read_to_string(&side)
        .unwrap()
        .replace("\"format_version\": 1", "\"format_version\": 9");
    std::fs::write(&side, text).unwrap();
    assert!(matches!(
        CorrectionModel::load(dir.path()),
        Err(CorrectorError::FormatVersion {
            found: 9,
            expected: 1
        })
    ));
}
