use super::gradcheck::check_gradients;
use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn randvec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

/// Fill every parameter (biases included) with random values so that gradient
/// checks exercise all terms.
fn randomize(store: &mut ParameterStore, seed: u64) {
    let mut r = rng(seed);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for v in &mut store.get_mut(id).data {
            *v = r.gen_range(-0.8..0.8);
        }
    }
}

fn assert_grads<F>(store: &mut ParameterStore, f: F)
where
    F: Fn(&mut Graph) -> NodeId,
{
    let report = check_gradients(store, H, |s| {
        let mut g = Graph::new(s);
        let l = f(&mut g);
        (g.scalar(l), g.backward(l).unwrap())
    });
    assert!(report.checked > 0);
    assert!(report.passes(TOL), "{report:?}");
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[test]
fn gru_zero_parameters_halve_state() {
    let mut store = ParameterStore::new();
    let cell = GruCell::new(&mut store, "g", 3, 4, &mut rng(0)).unwrap();
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        store.get_mut(id).data.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut g = Graph::new(&store);
    let h = g.input(vec![1.0, -2.0, 0.5, 4.0]);
    let x = g.input(vec![3.0, 1.0, -1.0]);
    let out = gru_step(&mut g, &cell, h, x).unwrap();
    assert_eq!(g.value(out), &[0.5, -1.0, 0.25, 2.0]);
}

#[test]
fn gru_scalar_oracle() {
    let mut store = ParameterStore::new();
    let cell = GruCell::new(&mut store, "g", 1, 1, &mut rng(1)).unwrap();
    randomize(&mut store, 2);
    let p = |id: ParamId| store.get(id).data[0];
    let (h, x) = (0.3, -0.7);
    let z = sigmoid(p(cell.wz) * x + p(cell.uz) * h + p(cell.bz));
    let r = sigmoid(p(cell.wr) * x + p(cell.ur) * h + p(cell.br));
    let n = (p(cell.wn) * x + p(cell.un) * (r * h) + p(cell.bn)).tanh();
    let expected = (1.0 - z) * n + z * h;
    let mut g = Graph::new(&store);
    let hn = g.input(vec![h]);
    let xn = g.input(vec![x]);
    let out = gru_step(&mut g, &cell, hn, xn).unwrap();
    assert!((g.scalar(out) - expected).abs() < 1e-14);
}

#[test]
fn gru_shape_mismatch() {
    let mut store = ParameterStore::new();
    let cell = GruCell::new(&mut store, "g", 3, 4, &mut rng(0)).unwrap();
    let mut g = Graph::new(&store);
    let h = g.zeros(4);
    let x = g.zeros(2);
    assert!(matches!(
        gru_step(&mut g, &cell, h, x),
        Err(NnError::ShapeMismatch { .. })
    ));
    let h = g.zeros(5);
    let x = g.zeros(3);
    assert!(matches!(
        gru_step(&mut g, &cell, h, x),
        Err(NnError::ShapeMismatch { .. })
    ));
}

#[test]
fn birnn_properties() {
    let mut store = ParameterStore::new();
    let f = GruCell::new(&mut store, "f", 3, 4, &mut rng(3)).unwrap();
    let b = GruCell::new(&mut store, "b", 3, 4, &mut rng(4)).unwrap();
    let mut r = rng(5);
    let xs_val: Vec<Vec<f64>> = (0..4).map(|_| randvec(&mut r, 3)).collect();

    let mut g = Graph::new(&store);
    assert_eq!(
        birnn_encode(&mut g, &f, &b, &[]),
        Err(NnError::EmptySequence)
    );

    let x0 = g.input(xs_val[0].clone());
    let one = birnn_encode(&mut g, &f, &b, &[x0]).unwrap();
    assert_eq!(g.dim(one[0]), 8);
    let h0 = g.zeros(4);
    let hf = gru_step(&mut g, &f, h0, x0).unwrap();
    let hb = gru_step(&mut g, &b, h0, x0).unwrap();
    let expect: Vec<f64> = [g.value(hf), g.value(hb)].concat();
    assert_eq!(g.value(one[0]), expect.as_slice());

    let xs: Vec<NodeId> = xs_val.iter().map(|v| g.input(v.clone())).collect();
    let rev: Vec<NodeId> = xs.iter().rev().copied().collect();
    let out = birnn_encode(&mut g, &f, &b, &xs).unwrap();
    let swapped = birnn_encode(&mut g, &b, &f, &rev).unwrap();
    for i in 0..4 {
        let a = g.value(out[i]);
        let s = g.value(swapped[3 - i]);
        assert_eq!(&a[..4], &s[4..]);
        assert_eq!(&a[4..], &s[..4]);
    }
}

#[test]
fn attention_examples() {
    let mut store = ParameterStore::new();
    let att = AdditiveAttention::new(&mut store, "a", 3, 2, 5, &mut rng(6)).unwrap();
    randomize(&mut store, 7);
    let mut r = rng(8);
    let mut g = Graph::new(&store);
    let q = g.input(randvec(&mut r, 3));

    let k = g.input(randvec(&mut r, 2));
    let v = g.input(randvec(&mut r, 4));
    let (c, w) = additive_attention(&mut g, &att, q, &[k], &[v]).unwrap();
    assert_eq!(g.value(w), &[1.0]);
    assert_eq!(g.value(c), g.value(v));

    let v2 = g.input(randvec(&mut r, 4));
    let (_, w) = additive_attention(&mut g, &att, q, &[k, k], &[v, v2]).unwrap();
    assert!((g.value(w)[0] - 0.5).abs() < 1e-15);

    assert_eq!(
        additive_attention(&mut g, &att, q, &[], &[]),
        Err(NnError::EmptySequence)
    );

    // direct formula oracle
    let qv = g.value(q).to_vec();
    let keys: Vec<Vec<f64>> = (0..3).map(|_| randvec(&mut r, 2)).collect();
    let vals: Vec<Vec<f64>> = (0..3).map(|_| randvec(&mut r, 4)).collect();
    let wq = &store.get(att.wq).data;
    let wk = &store.get(att.wk).data;
    let bb = &store.get(att.b).data;
    let vv = &store.get(att.v).data;
    let scores: Vec<f64> = keys
        .iter()
        .map(|k| {
            (0..5)
                .map(|a| {
                    let pre = (0..3).map(|j| wq[a * 3 + j] * qv[j]).sum::<f64>()
                        + (0..2).map(|j| wk[a * 2 + j] * k[j]).sum::<f64>()
                        + bb[a];
                    vv[a] * pre.tanh()
                })
                .sum()
        })
        .collect();
    let z: f64 = scores.iter().map(|s| s.exp()).sum();
    let weights: Vec<f64> = scores.iter().map(|s| s.exp() / z).collect();
    let ctx: Vec<f64> = (0..4)
        .map(|d| (0..3).map(|i| weights[i] * vals[i][d]).sum())
        .collect();
    let kn: Vec<NodeId> = keys.iter().map(|k| g.input(k.clone())).collect();
    let vn: Vec<NodeId> = vals.iter().map(|v| g.input(v.clone())).collect();
    let (c, w) = additive_attention(&mut g, &att, q, &kn, &vn).unwrap();
    for (a, b) in g.value(w).iter().zip(&weights) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in g.value(c).iter().zip(&ctx) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn cross_entropy_examples() {
    let store = ParameterStore::new();
    let mut g = Graph::new(&store);
    let l = g.input(vec![0.3; 7]);
    let ce = cross_entropy(&mut g, l, 2).unwrap();
    assert!((g.scalar(ce) - 7f64.ln()).abs() < 1e-12);
    let l = g.input(vec![0.0, 20.0, 0.0]);
    let ce = cross_entropy(&mut g, l, 1).unwrap();
    assert!(g.scalar(ce) <= 1e-8);
    let l = g.input(vec![0.0, 0.0]);
    let ce = cross_entropy(&mut g, l, 0).unwrap();
    assert!((g.scalar(ce) - std::f64::consts::LN_2).abs() < 1e-12);
    assert_eq!(
        cross_entropy(&mut g, l, 2),
        Err(NnError::IndexOutOfRange { index: 2, len: 2 })
    );
    let big = g.input(vec![1000.0, -1000.0]);
    let ce = cross_entropy(&mut g, big, 1).unwrap();
    assert!((g.scalar(ce) - 2000.0).abs() < 1e-9);
}

#[test]
fn backward_basics() {
    let mut store = ParameterStore::new();
    let w = store.add("w", Tensor::vector(vec![3.0])).unwrap();
    let u = store.add("u", Tensor::vector(vec![1.0, 2.0])).unwrap();
    let g = {
        let mut g = Graph::new(&store);
        let c = g.input(vec![5.0]);
        let gr = g.backward(c).unwrap();
        assert!(gr.get(w).is_none() && gr.get(u).is_none());
        let wn = g.param(w);
        let sq = g.mul(wn, wn).unwrap();
        let gr = g.backward(sq).unwrap();
        assert_eq!(gr.get(w).unwrap(), &[6.0]);
        assert!(gr.get(u).is_none());
        gr
    };
    store.accumulate(&g);
    assert_eq!(store.grad(w).data, vec![6.0]);
    assert_eq!(store.grad(u).data, vec![0.0, 0.0]);

    let mut g = Graph::new(&store);
    let v = g.input(vec![1.0, 2.0]);
    assert!(matches!(g.backward(v), Err(NnError::ShapeMismatch { .. })));
    let nan = g.input(vec![f64::NAN]);
    assert_eq!(g.backward(nan).unwrap_err(), NnError::NonFinite);
}

#[test]
fn adam_behaviour() {
    let mut store = ParameterStore::new();
    let w = store.add("w", Tensor::vector(vec![1.0])).unwrap();
    let mut opt = Adam::new(
        AdamConfig {
            lr: 0.1,
            ..Default::default()
        },
        &store,
    );
    assert_eq!(opt.step(&mut store), Err(NnError::MissingGradients));

    store.accumulate(&Graph::new(&store).backward_zero_for_tests());
    opt.step(&mut store).unwrap();
    assert_eq!(store.get(w).data, vec![1.0]);

    let grads = {
        let mut g = Graph::new(&store);
        let p = g.param(w);
        g.backward(p).unwrap()
    };
    store.accumulate(&grads);
    opt.step(&mut store).unwrap();
    assert!(store.get(w).data[0] < 1.0);

    // minimize (w - 2)^2 from 0
    let mut store = ParameterStore::new();
    let w = store.add("w", Tensor::vector(vec![0.0])).unwrap();
    let mut opt = Adam::new(
        AdamConfig {
            lr: 0.1,
            ..Default::default()
        },
        &store,
    );
    for _ in 0..200 {
        let grads = {
            let mut g = Graph::new(&store);
            let p = g.param(w);
            let target = g.input(vec![-2.0]);
            let d = g.add(p, target).unwrap();
            let sq = g.mul(d, d).unwrap();
            g.backward(sq).unwrap()
        };
        store.accumulate(&grads);
        opt.step(&mut store).unwrap();
    }
    assert!(
        (store.get(w).data[0] - 2.0).abs() < 1e-3,
        "{}",
        store.get(w).data[0]
    );
}

impl Graph<'_> {
    fn backward_zero_for_tests(&mut self) -> Gradients {
        let c = self.input(vec![0.0]);
        self.backward(c).unwrap()
    }
}

#[test]
fn checkpoint_round_trip_and_errors() {
    let mut store = ParameterStore::new();
    GruCell::new(&mut store, "enc", 3, 2, &mut rng(9)).unwrap();
    let mut t = Tensor::new(vec![2, 2], vec![1.5, -0.25, 3.0, 1e-300]).unwrap();
    t.dtype = DType::F32;
    store.add("half", t).unwrap();
    store.get_mut(ParamId(0)).data[0] = f64::MIN_POSITIVE;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&store, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    for ((n1, a), (n2, b)) in store.iter().zip(back.iter()) {
        assert_eq!(n1, n2);
        assert_eq!(a.shape, b.shape);
        if a.dtype == DType::F64 {
            assert!(a
                .data
                .iter()
                .zip(&b.data)
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        } else {
            assert_eq!(b.data, vec![1.5, -0.25, 3.0, 0.0]);
        }
    }

    let bytes = to_bytes(&store);
    for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
        assert!(matches!(
            from_bytes(&bytes[..cut]),
            Err(CheckpointError::CorruptFile(_))
        ));
    }
    let mut flipped = bytes.clone();
    flipped[40] ^= 1;
    assert!(matches!(
        from_bytes(&flipped),
        Err(CheckpointError::CorruptFile(_))
    ));
    let mut bumped = bytes.clone();
    bumped[4..8].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    assert!(matches!(
        from_bytes(&bumped),
        Err(CheckpointError::VersionMismatch {
            found: 2,
            expected: 1
        })
    ));
}

#[test]
fn store_names_are_unique() {
    let mut store = ParameterStore::new();
    store.add("a", Tensor::zeros(&[2])).unwrap();
    assert_eq!(
        store.add("a", Tensor::zeros(&[1])),
        Err(NnError::DuplicateParameter("a".into()))
    );
    assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
}

#[test]
fn gradcheck_gru_step() {
    let mut store = ParameterStore::new();
    let cell = GruCell::new(&mut store, "g", 3, 4, &mut rng(10)).unwrap();
    randomize(&mut store, 11);
    let mut r = rng(12);
    let (h0, x0, proj) = (randvec(&mut r, 4), randvec(&mut r, 3), randvec(&mut r, 4));
    assert_grads(&mut store, |g| {
        let h = g.input(h0.clone());
        let x = g.input(x0.clone());
        let out = gru_step(g, &cell, h, x).unwrap();
        let p = g.input(proj.clone());
        g.dot(out, p).unwrap()
    });
}

#[test]
fn gradcheck_birnn_and_embedding() {
    let mut store = ParameterStore::new();
    let emb = Embedding::new(&mut store, "emb", 6, 3, &mut rng(13)).unwrap();
    let f = GruCell::new(&mut store, "f", 3, 4, &mut rng(14)).unwrap();
    let b = GruCell::new(&mut store, "b", 3, 4, &mut rng(15)).unwrap();
    let lin = Linear::new(&mut store, "out", 8, 5, &mut rng(16)).unwrap();
    randomize(&mut store, 17);
    assert_grads(&mut store, |g| {
        let xs: Vec<NodeId> = [1, 4, 1, 0]
            .iter()
            .map(|i| emb.lookup(g, *i).unwrap())
            .collect();
        let hs = birnn_encode(g, &f, &b, &xs).unwrap();
        let losses: Vec<NodeId> = hs
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let logits = lin.forward(g, *h).unwrap();
                cross_entropy(g, logits, i % 5).unwrap()
            })
            .collect();
        g.sum(&losses).unwrap()
    });
}

#[test]
fn gradcheck_attention() {
    let mut store = ParameterStore::new();
    let att = AdditiveAttention::new(&mut store, "a", 4, 3, 5, &mut rng(18)).unwrap();
    let q = store.add("q", Tensor::glorot(&[4], &mut rng(19))).unwrap();
    let keys: Vec<ParamId> = (0..3)
        .map(|i| {
            store
                .add(&format!("k{i}"), Tensor::glorot(&[3], &mut rng(20 + i)))
                .unwrap()
        })
        .collect();
    randomize(&mut store, 23);
    assert_grads(&mut store, |g| {
        let qn = g.param(q);
        let kn: Vec<NodeId> = keys.iter().map(|k| g.param(*k)).collect();
        let (c, w) = additive_attention(g, &att, qn, &kn, &kn).unwrap();
        let proj = g.input(vec![0.3, -1.2, 0.7]);
        let a = g.dot(c, proj).unwrap();
        let wp = g.input(vec![1.0, -0.5, 2.0]);
        let b = g.dot(w, wp).unwrap();
        g.sum(&[a, b]).unwrap()
    });
}

#[test]
fn gradcheck_cross_entropy_and_scale() {
    let mut store = ParameterStore::new();
    let l = store.add("l", Tensor::glorot(&[6], &mut rng(24))).unwrap();
    randomize(&mut store, 25);
    assert_grads(&mut store, |g| {
        let ln = g.param(l);
        let ce = cross_entropy(g, ln, 3).unwrap();
        let sm = g.softmax(ln);
        let one = g.one_minus(sm);
        let p = g.input(vec![0.1, 0.2, 0.3, -0.4, 0.5, 0.6]);
        let d = g.dot(one, p).unwrap();
        let both = g.sum(&[ce, d]).unwrap();
        g.scale(both, 0.7)
    });
}

proptest! {
    #[test]
    fn ops_are_deterministic_and_finite(vals in proptest::collection::vec(-50.0f64..50.0, 1..8), t in 0usize..8) {
        let store = ParameterStore::new();
        let run = || {
            let mut g = Graph::new(&store);
            let x = g.input(vals.clone());
            let s = g.sigmoid(x);
            let th = g.tanh(x);
            let m = g.mul(s, th).unwrap();
            let sm = g.softmax(m);
            let ce = g.cross_entropy(x, t % vals.len()).unwrap();
            let total: f64 = g.value(sm).iter().sum();
            (g.value(sm).to_vec(), g.scalar(ce), total)
        };
        let (a, ce, total) = run();
        prop_assert_eq!(run(), (a.clone(), ce, total));
        prop_assert!(a.iter().all(|v| v.is_finite() && *v >= 0.0));
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(ce.is_finite() && ce >= 0.0);
    }
}
