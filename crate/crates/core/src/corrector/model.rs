use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{Vocabulary, BOS, EOS};
use super::{CorrectorError, ModelConfig};
use crate::neuralcore::{
    birnn_states, gru_step, log_softmax, AdditiveAttention, Embedding, Gradients, Graph, GruCell,
    Linear, NnError, NodeId, ParameterStore,
};
use crate::spanalign::{self, AlignedExample, Span, Tag};

/// Tag-embedding row fed to the tagger before the first token.
pub(crate) const TAG_BOS: usize = Tag::COUNT;

/// Parameter handles. Encoder and tagger parameters are named `enc.*` and
/// `tag.*`; mid encoder, attention and decoder parameters `dec.*`.
#[derive(Debug, Clone)]
pub(crate) struct Layers {
    word_emb: Embedding,
    enc_fwd: GruCell,
    enc_bwd: GruCell,
    tag_emb: Embedding,
    tagger: GruCell,
    tag_out: Linear,
    span_emb: Embedding,
    mid_fwd: GruCell,
    mid_bwd: GruCell,
    ctx_proj: Linear,
    attention: AdditiveAttention,
    dec_init: Linear,
    char_emb: Embedding,
    decoder: GruCell,
    char_out: Linear,
}

impl Layers {
    fn new(
        c: &ModelConfig,
        vocab: &Vocabulary,
        store: &mut ParameterStore,
        seed: u64,
    ) -> Result<Self, NnError> {
        let r = &mut ChaCha8Rng::seed_from_u64(seed);
        let (nw, nc) = (vocab.num_words(), vocab.num_chars());
        let enc2 = 2 * c.enc_hidden;
        let mem = 2 * c.mid_hidden;
        Ok(Self {
            word_emb: Embedding::new(store, "enc.word_emb", nw, c.embed_dim, r)?,
            enc_fwd: GruCell::new(store, "enc.fwd", c.embed_dim, c.enc_hidden, r)?,
            enc_bwd: GruCell::new(store, "enc.bwd", c.embed_dim, c.enc_hidden, r)?,
            tag_emb: Embedding::new(store, "tag.emb", Tag::COUNT + 1, c.tag_embed_dim, r)?,
            tagger: GruCell::new(store, "tag.rnn", c.tag_embed_dim + enc2, c.tagger_hidden, r)?,
            tag_out: Linear::new(store, "tag.out", c.tagger_hidden, Tag::COUNT, r)?,
            span_emb: Embedding::new(store, "dec.span_emb", nw, c.embed_dim, r)?,
            mid_fwd: GruCell::new(store, "dec.mid_fwd", c.embed_dim, c.mid_hidden, r)?,
            mid_bwd: GruCell::new(store, "dec.mid_bwd", c.embed_dim, c.mid_hidden, r)?,
            ctx_proj: Linear::new(store, "dec.ctx_proj", enc2, mem, r)?,
            attention: AdditiveAttention::new(
                store,
                "dec.att",
                c.dec_hidden,
                mem,
                c.attention_dim,
                r,
            )?,
            dec_init: Linear::new(store, "dec.init", enc2, c.dec_hidden, r)?,
            char_emb: Embedding::new(store, "dec.char_emb", nc, c.char_embed_dim, r)?,
            decoder: GruCell::new(store, "dec.rnn", c.char_embed_dim + mem, c.dec_hidden, r)?,
            char_out: Linear::new(store, "dec.out", c.dec_hidden + mem, nc, r)?,
        })
    }
}

/// Tagger plus span-restricted attentional decoder.
#[derive(Debug)]
pub struct CorrectionModel {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub(crate) store: ParameterStore,
    pub(crate) layers: Layers,
    decoder_calls: AtomicUsize,
}

impl Clone for CorrectionModel {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            store: self.store.clone(),
            layers: self.layers.clone(),
            decoder_calls: AtomicUsize::new(self.decoder_invocations()),
        }
    }
}

/// Output of [`CorrectionModel::correct`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub output_tokens: Vec<String>,
    pub tags: Vec<Tag>,
    pub span_outputs: Vec<String>,
    /// log-probability of each span output
    pub scores: Vec<f64>,
}

impl DecodeResult {
    pub fn text(&self) -> String {
        self.output_tokens.join(" ")
    }
}

/// Encoder states for one sentence.
struct Encoded {
    ids: Vec<usize>,
    fwd: Vec<NodeId>,
    bwd: Vec<NodeId>,
    states: Vec<NodeId>,
}

/// Decoder inputs for one span.
struct SpanMemory {
    memory: Vec<NodeId>,
    projected: Vec<NodeId>,
    d0: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub tagger: f64,
    pub decoder: f64,
}

impl CorrectionModel {
    pub fn new(config: ModelConfig, vocab: Vocabulary, seed: u64) -> Result<Self, CorrectorError> {
        config.validate()?;
        let mut store = ParameterStore::new();
        let layers = Layers::new(&config, &vocab, &mut store, seed)?;
        Ok(Self {
            config,
            vocab,
            store,
            layers,
            decoder_calls: AtomicUsize::new(0),
        })
    }

    pub fn store(&self) -> &ParameterStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }

    pub fn decoder_invocations(&self) -> usize {
        self.decoder_calls.load(Ordering::Relaxed)
    }

    pub fn reset_decoder_invocations(&self) {
        self.decoder_calls.store(0, Ordering::Relaxed);
    }

    /// `(encoder + tagger, mid encoder + attention + decoder)` parameter counts.
    pub fn param_count(&self) -> (usize, usize) {
        let mut counts = (0, 0);
        for (name, t) in self.store.iter() {
            if name.starts_with("dec.") {
                counts.1 += t.len();
            } else {
                counts.0 += t.len();
            }
        }
        counts
    }

    fn encode(&self, g: &mut Graph, tokens: &[String]) -> Result<Encoded, CorrectorError> {
        if tokens.is_empty() {
            return Err(CorrectorError::EmptyInput);
        }
        let ids: Vec<usize> = tokens.iter().map(|t| self.vocab.word_id(t)).collect();
        let xs = ids
            .iter()
            .map(|i| self.layers.word_emb.lookup(g, *i))
            .collect::<Result<Vec<_>, _>>()?;
        let (fwd, bwd) = birnn_states(g, &self.layers.enc_fwd, &self.layers.enc_bwd, &xs)?;
        let states = fwd
            .iter()
            .zip(&bwd)
            .map(|(a, b)| g.concat(&[*a, *b]))
            .collect();
        Ok(Encoded {
            ids,
            fwd,
            bwd,
            states,
        })
    }

    /// One tagger step; returns the new state and tag logits.
    fn tag_step(
        &self,
        g: &mut Graph,
        s_prev: NodeId,
        prev_tag: usize,
        h: NodeId,
    ) -> Result<(NodeId, NodeId), NnError> {
        let t = self.layers.tag_emb.lookup(g, prev_tag)?;
        let x = g.concat(&[t, h]);
        let s = gru_step(g, &self.layers.tagger, s_prev, x)?;
        let logits = self.layers.tag_out.forward(g, s)?;
        Ok((s, logits))
    }

    fn span_memory(
        &self,
        g: &mut Graph,
        enc: &Encoded,
        s: usize,
        e: usize,
    ) -> Result<SpanMemory, NnError> {
        let n = enc.ids.len();
        let eh = self.config.enc_hidden;
        let left = if s < e {
            enc.fwd[s]
        } else if s > 0 {
            enc.fwd[s - 1]
        } else {
            g.zeros(eh)
        };
        let right = if s < e {
            enc.bwd[e - 1]
        } else if s < n {
            enc.bwd[s]
        } else {
            g.zeros(eh)
        };
        let ctx = g.concat(&[left, right]);
        let mut memory = Vec::with_capacity(e - s + 1);
        if s < e {
            let xs = enc.ids[s..e]
                .iter()
                .map(|i| self.layers.span_emb.lookup(g, *i))
                .collect::<Result<Vec<_>, _>>()?;
            let (f, b) = birnn_states(g, &self.layers.mid_fwd, &self.layers.mid_bwd, &xs)?;
            memory.extend(f.into_iter().zip(b).map(|(a, b)| g.concat(&[a, b])));
        }
        memory.push(self.layers.ctx_proj.forward(g, ctx)?);
        let projected = self.layers.attention.project_keys(g, &memory)?;
        let d0 = self.layers.dec_init.forward(g, ctx)?;
        let d0 = g.tanh(d0);
        Ok(SpanMemory {
            memory,
            projected,
            d0,
        })
    }

    /// One decoder step from state `d` after emitting `prev`.
    fn dec_step(
        &self,
        g: &mut Graph,
        m: &SpanMemory,
        d: NodeId,
        prev: usize,
    ) -> Result<(NodeId, NodeId), NnError> {
        let (c, _) = self
            .layers
            .attention
            .attend_projected(g, d, &m.projected, &m.memory)?;
        let y = self.layers.char_emb.lookup(g, prev)?;
        let x = g.concat(&[y, c]);
        let d = gru_step(g, &self.layers.decoder, d, x)?;
        let o = g.concat(&[d, c]);
        let logits = self.layers.char_out.forward(g, o)?;
        Ok((d, logits))
    }

    /// Loss graph for one example with tagger weight `mix`.
    fn loss_node(
        &self,
        g: &mut Graph,
        ex: &AlignedExample,
        mix: f64,
    ) -> Result<(NodeId, LossParts), CorrectorError> {
        let enc = self.encode(g, &ex.input_tokens)?;
        let mut s = g.zeros(self.config.tagger_hidden);
        let mut prev = TAG_BOS;
        let mut tag_terms = Vec::with_capacity(ex.tags.len());
        for (h, gold) in enc.states.iter().zip(&ex.tags) {
            let (s2, logits) = self.tag_step(g, s, prev, *h)?;
            tag_terms.push(g.cross_entropy(logits, gold.index())?);
            s = s2;
            prev = gold.index();
        }
        let tag_sum = g.sum(&tag_terms)?;
        let tag_mean = g.scale(tag_sum, 1.0 / tag_terms.len() as f64);

        let mut dec_terms = Vec::new();
        for span in &ex.spans {
            let m = self.span_memory(g, &enc, span.s, span.e)?;
            let target = self.vocab.encode_target(&span.target.join(" "));
            let (mut d, mut prev) = (m.d0, BOS);
            for y in target {
                let (d2, logits) = self.dec_step(g, &m, d, prev)?;
                dec_terms.push(g.cross_entropy(logits, y)?);
                d = d2;
                prev = y;
            }
        }
        let tagger = g.scalar(tag_mean);
        let (root, decoder) = if dec_terms.is_empty() {
            (g.scale(tag_mean, mix), 0.0)
        } else {
            let dec_sum = g.sum(&dec_terms)?;
            let dec_mean = g.scale(dec_sum, 1.0 / dec_terms.len() as f64);
            let a = g.scale(tag_mean, mix);
            let b = g.scale(dec_mean, 1.0 - mix);
            (g.sum(&[a, b])?, g.scalar(dec_mean))
        };
        let total = g.scalar(root);
        Ok((
            root,
            LossParts {
                total,
                tagger,
                decoder,
            },
        ))
    }

    pub fn loss(&self, ex: &AlignedExample) -> Result<f64, CorrectorError> {
        Ok(self.loss_parts(ex, self.config.loss_mix)?.total)
    }

    /// Loss with an explicit tagger weight in `[0, 1]`.
    pub fn loss_parts(&self, ex: &AlignedExample, mix: f64) -> Result<LossParts, CorrectorError> {
        let mut g = Graph::new(&self.store);
        Ok(self.loss_node(&mut g, ex, mix)?.1)
    }

    pub fn loss_and_grads_with(
        &self,
        store: &ParameterStore,
        ex: &AlignedExample,
        mix: f64,
    ) -> Result<(f64, Gradients), CorrectorError> {
        let mut g = Graph::new(store);
        let (root, parts) = self.loss_node(&mut g, ex, mix)?;
        Ok((parts.total, g.backward(root)?))
    }

    pub fn loss_and_grads(&self, ex: &AlignedExample) -> Result<(f64, Gradients), CorrectorError> {
        self.loss_and_grads_with(&self.store, ex, self.config.loss_mix)
    }

    fn tag_encoded(&self, g: &mut Graph, enc: &Encoded) -> Result<Vec<Tag>, CorrectorError> {
        struct Beam {
            score: f64,
            state: NodeId,
            tags: Vec<Tag>,
        }
        let width = self.config.tag_beam.max(1);
        let s0 = g.zeros(self.config.tagger_hidden);
        let mut beams = vec![Beam {
            score: 0.0,
            state: s0,
            tags: Vec::new(),
        }];
        for h in &enc.states {
            let mut next = Vec::new();
            for b in &beams {
                let prev = b.tags.last().copied();
                let (s, logits) =
                    self.tag_step(g, b.state, prev.map_or(TAG_BOS, Tag::index), *h)?;
                let lp = log_softmax(g.value(logits));
                for t in Tag::ALL {
                    if t.may_follow(prev) {
                        let mut tags = b.tags.clone();
                        tags.push(t);
                        next.push(Beam {
                            score: b.score + lp[t.index()],
                            state: s,
                            tags,
                        });
                    }
                }
            }
            next.sort_by(|a, b| b.score.total_cmp(&a.score));
            next.truncate(width);
            beams = next;
        }
        Ok(beams.swap_remove(0).tags)
    }

    pub fn tag(&self, tokens: &[String]) -> Result<Vec<Tag>, CorrectorError> {
        let mut g = Graph::new(&self.store);
        let enc = self.encode(&mut g, tokens)?;
        self.tag_encoded(&mut g, &enc)
    }

    fn decode_encoded(
        &self,
        g: &mut Graph,
        enc: &Encoded,
        s: usize,
        e: usize,
    ) -> Result<(String, f64), CorrectorError> {
        self.decoder_calls.fetch_add(1, Ordering::Relaxed);
        if self.config.max_decode_len == 0 {
            return Ok((String::new(), 0.0));
        }
        let m = self.span_memory(g, enc, s, e)?;
        struct Hyp {
            score: f64,
            state: NodeId,
            chars: Vec<usize>,
        }
        let width = self.config.decode_beam.max(1);
        let mut live = vec![Hyp {
            score: 0.0,
            state: m.d0,
            chars: Vec::new(),
        }];
        let mut done: Vec<Hyp> = Vec::new();
        for _ in 0..self.config.max_decode_len {
            let mut next = Vec::new();
            for h in &live {
                let prev = h.chars.last().copied().unwrap_or(BOS);
                let (d, logits) = self.dec_step(g, &m, h.state, prev)?;
                let lp = log_softmax(g.value(logits));
                let mut order: Vec<usize> = (0..lp.len()).filter(|c| *c != BOS).collect();
                order.sort_by(|a, b| lp[*b].total_cmp(&lp[*a]));
                for c in order.into_iter().take(width) {
                    let mut chars = h.chars.clone();
                    chars.push(c);
                    next.push(Hyp {
                        score: h.score + lp[c],
                        state: d,
                        chars,
                    });
                }
            }
            next.sort_by(|a, b| b.score.total_cmp(&a.score));
            next.truncate(width);
            live.clear();
            for h in next {
                if h.chars.last() == Some(&EOS) {
                    done.push(h);
                } else {
                    live.push(h);
                }
            }
            let best_done = done
                .iter()
                .map(|h| h.score)
                .fold(f64::NEG_INFINITY, f64::max);
            if live.is_empty() || live.iter().all(|h| h.score <= best_done) {
                break;
            }
        }
        // a hypothesis cut off by the length cap still counts
        done.extend(live);
        let best = done
            .into_iter()
            .max_by(|a, b| a.score.total_cmp(&b.score))
            .expect("at least one hypothesis");
        let text: String = best
            .chars
            .iter()
            .filter_map(|c| self.vocab.char(*c))
            .collect();
        Ok((text, best.score))
    }

    /// Decode span `[s, e)` of `tokens`; `s == e` decodes from context alone.
    pub fn decode_span(
        &self,
        tokens: &[String],
        s: usize,
        e: usize,
    ) -> Result<String, CorrectorError> {
        if s > e || e > tokens.len() {
            return Err(CorrectorError::BadSpan {
                s,
                e,
                len: tokens.len(),
            });
        }
        let mut g = Graph::new(&self.store);
        let enc = self.encode(&mut g, tokens)?;
        Ok(self.decode_encoded(&mut g, &enc, s, e)?.0)
    }

    /// Tag, decode every non-trivial span, splice the results back.
    pub fn correct(&self, tokens: &[String]) -> Result<DecodeResult, CorrectorError> {
        let mut g = Graph::new(&self.store);
        let enc = self.encode(&mut g, tokens)?;
        let tags = self.tag_encoded(&mut g, &enc)?;
        let mut spans = Vec::new();
        let mut span_outputs = Vec::new();
        let mut scores = Vec::new();
        for (s, e) in spanalign::segments(&tags) {
            let (text, score) = self.decode_encoded(&mut g, &enc, s, e)?;
            spans.push(Span {
                s,
                e,
                target: Vec::new(),
            });
            span_outputs.push(text);
            scores.push(score);
        }
        let skeleton = AlignedExample {
            input_tokens: tokens.to_vec(),
            tags: tags.clone(),
            spans,
        };
        let pieces: Vec<Vec<String>> = span_outputs
            .iter()
            .map(|t| t.split_whitespace().map(String::from).collect())
            .collect();
        let output_tokens = spanalign::reconstruct(&skeleton, &pieces)?;
        Ok(DecodeResult {
            output_tokens,
            tags,
            span_outputs,
            scores,
        })
    }

    pub fn correct_text(&self, text: &str) -> Result<DecodeResult, CorrectorError> {
        let tokens: Vec<String> = text.split_whitespace().map(String::from).collect();
        self.correct(&tokens)
    }
}
