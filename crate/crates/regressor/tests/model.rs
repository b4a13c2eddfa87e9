use igo_core::Point;
use igo_regressor::*;
use igo_tensor::{finite_diff_check, Graph, ParamStore, Tensor, Var};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny(pe: PeKind, seed: u64) -> ModelConfig {
    ModelConfig {
        x_range: [-4.0, 4.0],
        y_range: [-4.0, 4.0],
        pillar_channels: 3,
        embed_dim: 4,
        heads: 2,
        encoder_layers: 1,
        decoder_layers: 2,
        ffn_dim: 6,
        patch_size: 4,
        positional_encoding: pe,
        head_widths: vec![3],
        init_seed: seed,
        ..ModelConfig::default()
    }
}

fn cloud(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Point::new(
                rng.random_range(-3.9..3.9),
                rng.random_range(-3.9..3.9),
                rng.random_range(-1.8..1.0),
                rng.random_range(0.0..1.0),
            )
        })
        .collect()
}

fn constants<T: igo_tensor::Scalar>(g: &mut Graph<T>, p: &ParamStore<T>) -> Vec<Var> {
    p.tensors().iter().map(|t| g.constant(t.clone())).collect()
}

// ---------------------------------------------------------------- oracle

struct Mat {
    rows: usize,
    cols: usize,
    v: Vec<f64>,
}

impl Mat {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.v[r * self.cols + c]
    }
}

struct Weights<'a>(&'a ParamStore<f64>);

impl Weights<'_> {
    fn vec(&self, name: &str) -> Vec<f64> {
        self.0.get(name).unwrap_or_else(|| panic!("{name}")).data().to_vec()
    }

    fn linear(&self, name: &str, x: &Mat) -> Mat {
        let w = self.0.get(&format!("{name}.w")).unwrap();
        let (fi, fo) = (w.shape()[0], w.shape()[1]);
        assert_eq!(fi, x.cols, "{name}");
        let b = self.vec(&format!("{name}.b"));
        let mut v = vec![0.0; x.rows * fo];
        for r in 0..x.rows {
            for o in 0..fo {
                let mut s = b[o];
                for i in 0..fi {
                    s += x.at(r, i) * w.data()[i * fo + o];
                }
                v[r * fo + o] = s;
            }
        }
        Mat { rows: x.rows, cols: fo, v }
    }

    fn norm(&self, name: &str, x: &Mat) -> Mat {
        let g = self.vec(&format!("{name}.g"));
        let b = self.vec(&format!("{name}.b"));
        let mut v = Vec::with_capacity(x.v.len());
        for r in 0..x.rows {
            let row = &x.v[r * x.cols..(r + 1) * x.cols];
            let mean = row.iter().sum::<f64>() / x.cols as f64;
            let var = row.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / x.cols as f64;
            for (c, a) in row.iter().enumerate() {
                v.push((a - mean) / (var + 1e-5).sqrt() * g[c] + b[c]);
            }
        }
        Mat { rows: x.rows, cols: x.cols, v }
    }

    fn attention(&self, name: &str, q_in: &Mat, kv_in: &Mat, heads: usize) -> Mat {
        let q = self.linear(&format!("{name}.q"), q_in);
        let kw = self.0.get(&format!("{name}.k.w")).unwrap();
        let k = Mat {
            rows: kv_in.rows,
            cols: kw.shape()[1],
            v: (0..kv_in.rows * kw.shape()[1])
                .map(|i| {
                    let (r, o) = (i / kw.shape()[1], i % kw.shape()[1]);
                    (0..kv_in.cols).map(|j| kv_in.at(r, j) * kw.data()[j * kw.shape()[1] + o]).sum()
                })
                .collect(),
        };
        let v = self.linear(&format!("{name}.v"), kv_in);
        let d = q.cols;
        let dh = d / heads;
        let mut out = vec![0.0; q.rows * d];
        for h in 0..heads {
            for i in 0..q.rows {
                let s: Vec<f64> = (0..k.rows)
                    .map(|j| (0..dh).map(|t| q.at(i, h * dh + t) * k.at(j, h * dh + t)).sum::<f64>() / (dh as f64).sqrt())
                    .collect();
                let mx = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = s.iter().map(|x| (x - mx).exp()).collect();
                let z: f64 = e.iter().sum();
                for t in 0..dh {
                    out[i * d + h * dh + t] = (0..k.rows).map(|j| e[j] / z * v.at(j, h * dh + t)).sum();
                }
            }
        }
        self.linear(&format!("{name}.o"), &Mat { rows: q.rows, cols: d, v: out })
    }
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x * x * x)).tanh())
}

fn add(a: &Mat, b: &Mat) -> Mat {
    Mat {
        rows: a.rows,
        cols: a.cols,
        v: a.v.iter().zip(&b.v).map(|(x, y)| x + y).collect(),
    }
}

fn map(a: Mat, f: impl Fn(f64) -> f64) -> Mat {
    Mat {
        rows: a.rows,
        cols: a.cols,
        v: a.v.into_iter().map(f).collect(),
    }
}

fn sinusoid(count: usize, dim: usize) -> Mat {
    let mut v = Vec::new();
    for pos in 0..count {
        for slot in 0..dim {
            let freq = 1.0 / 10000f64.powf((slot / 2 * 2) as f64 / dim as f64);
            let a = pos as f64 * freq;
            v.push(if slot % 2 == 0 { a.sin() } else { a.cos() });
        }
    }
    Mat { rows: count, cols: dim, v }
}

fn block(w: &Weights, pre: &str, q: Mat, kv: Option<&Mat>, heads: usize) -> Mat {
    let n = w.norm(&format!("{pre}.ln1"), &q);
    let a = match kv {
        None => w.attention(&format!("{pre}.attn"), &n, &n, heads),
        Some(mem) => {
            let m = w.norm(&format!("{pre}.ln_mem"), mem);
            w.attention(&format!("{pre}.attn"), &n, &m, heads)
        }
    };
    let q = add(&q, &a);
    let n = w.norm(&format!("{pre}.ln2"), &q);
    let f = map(w.linear(&format!("{pre}.ffn1"), &n), gelu);
    add(&q, &w.linear(&format!("{pre}.ffn2"), &f))
}

/// Straight-line forward pass with plain loops over the stated architecture.
fn oracle_score(cfg: &ModelConfig, params: &ParamStore<f64>, points: &[Point]) -> f64 {
    let w = Weights(params);
    let (gw, gh, c, p, d) = (
        cfg.grid_width(),
        cfg.grid_height(),
        cfg.pillar_channels,
        cfg.patch_size,
        cfg.embed_dim,
    );
    // pillar statistics straight from their definitions
    let mut cells: Vec<Vec<Point>> = vec![Vec::new(); gw * gh];
    for pt in points {
        let (x, y) = (pt.x as f64, pt.y as f64);
        if x >= cfg.x_range[0] && x < cfg.x_range[1] && y >= cfg.y_range[0] && y < cfg.y_range[1] {
            let col = ((x - cfg.x_range[0]) / cfg.cell_size) as usize;
            let row = ((y - cfg.y_range[0]) / cfg.cell_size) as usize;
            cells[row * gw + col].push(*pt);
        }
    }
    let mut raw = Vec::new();
    for (i, pts) in cells.iter().enumerate() {
        if pts.is_empty() {
            raw.extend([0.0; 6]);
            continue;
        }
        let n = pts.len() as f64;
        let cx = cfg.x_range[0] + ((i % gw) as f64 + 0.5) * cfg.cell_size;
        let cy = cfg.y_range[0] + ((i / gw) as f64 + 0.5) * cfg.cell_size;
        raw.push(pts.iter().map(|q| q.x as f64 - cx).sum::<f64>() / n);
        raw.push(pts.iter().map(|q| q.y as f64 - cy).sum::<f64>() / n);
        raw.push(pts.iter().map(|q| q.z as f64).sum::<f64>() / n);
        raw.push(pts.iter().map(|q| q.z as f64).fold(f64::NEG_INFINITY, f64::max));
        raw.push((1.0 + n).ln());
        raw.push(pts.iter().map(|q| q.intensity as f64).sum::<f64>() / n);
    }
    let feats = Mat { rows: gw * gh, cols: 6, v: raw };
    let mut bev = map(w.linear("pillar", &feats), |x| x.max(0.0));
    for (i, pts) in cells.iter().enumerate() {
        if pts.is_empty() {
            bev.v[i * c..(i + 1) * c].iter_mut().for_each(|x| *x = 0.0);
        }
    }
    for l in 0..2 {
        let mut cols = Mat {
            rows: gw * gh,
            cols: 9 * c,
            v: vec![0.0; gw * gh * 9 * c],
        };
        for r in 0..gh as isize {
            for q in 0..gw as isize {
                for dy in 0..3isize {
                    for dx in 0..3isize {
                        let (sr, sq) = (r + dy - 1, q + dx - 1);
                        if sr < 0 || sq < 0 || sr >= gh as isize || sq >= gw as isize {
                            continue;
                        }
                        for ch in 0..c {
                            let dst = (r as usize * gw + q as usize) * 9 * c + (dy as usize * 3 + dx as usize) * c + ch;
                            cols.v[dst] = bev.at(sr as usize * gw + sq as usize, ch);
                        }
                    }
                }
            }
        }
        bev = map(w.linear(&format!("conv{l}"), &cols), |x| x.max(0.0));
    }
    let (ph, pw) = (gh / p, gw / p);
    let mut patches = Vec::new();
    for pr in 0..ph {
        for pc in 0..pw {
            for dy in 0..p {
                for dx in 0..p {
                    for ch in 0..c {
                        patches.push(bev.at((pr * p + dy) * gw + pc * p + dx, ch));
                    }
                }
            }
        }
    }
    let patches = Mat {
        rows: ph * pw,
        cols: p * p * c,
        v: patches,
    };
    let mut q = w.linear("embed", &patches);
    let mut mem = w.linear("map", &bev);
    match cfg.positional_encoding {
        PeKind::None => {}
        PeKind::Sinusoidal => {
            q = add(&q, &sinusoid(q.rows, d));
            mem = add(&mem, &sinusoid(mem.rows, d));
        }
        PeKind::Learned => {
            let pq = Mat { rows: q.rows, cols: d, v: w.vec("pe.query") };
            let pm = Mat { rows: mem.rows, cols: d, v: w.vec("pe.map") };
            q = add(&q, &pq);
            mem = add(&mem, &pm);
        }
    }
    for i in 0..cfg.encoder_layers {
        q = block(&w, &format!("enc{i}"), q, None, cfg.heads);
    }
    for i in 0..cfg.decoder_layers {
        q = block(&w, &format!("dec{i}"), q, Some(&mem), cfg.heads);
    }
    let mut hdn = w.norm("head.ln", &q);
    for j in 0..cfg.head_widths.len() {
        hdn = map(w.linear(&format!("head.{j}"), &hdn), gelu);
    }
    let out = w.linear("head.out", &hdn);
    50.0 + 25.0 * out.v.iter().sum::<f64>() / out.rows as f64
}

// ---------------------------------------------------------------- tests

/// Fresh weights plus uniform jitter, so zero-initialized biases take part
/// and empty BEV cells do not sit exactly on a ReLU kink.
fn jittered(cfg: &ModelConfig, seed: u64) -> Model<f64> {
    let model = Model::<f64>::new(cfg.clone()).unwrap();
    let mut params = model.params().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in params.tensors_mut() {
        t.data_mut().iter_mut().for_each(|v| *v += rng.random_range(-0.1..0.1));
    }
    Model::from_params(cfg.clone(), params).unwrap()
}

#[test]
fn forward_matches_plain_loop_oracle() {
    for (pe, seed) in [(PeKind::Sinusoidal, 1), (PeKind::None, 2), (PeKind::Learned, 3)] {
        let cfg = tiny(pe, seed);
        let model = jittered(&cfg, seed);
        let pts = cloud(60, seed);
        let got = model.predict(&pts).unwrap();
        let want = oracle_score(&cfg, model.params(), &pts);
        assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "{pe:?}: {got} vs {want}");
    }
}

#[test]
fn three_point_cloud_matches_oracle() {
    let cfg = tiny(PeKind::Sinusoidal, 11);
    let model = Model::<f64>::new(cfg.clone()).unwrap();
    let pts = [
        Point::new(0.2, 0.3, 1.0, 0.1),
        Point::new(0.7, 0.6, 3.0, 0.9),
        Point::new(-3.5, 2.5, -1.0, 0.4),
    ];
    let got = model.predict(&pts).unwrap();
    let want = oracle_score(&cfg, model.params(), &pts);
    assert!((got - want).abs() < 1e-9, "{got} vs {want}");
}

#[test]
fn end_to_end_gradient_check_is_tight() {
    for seed in 0..12u64 {
        let pe = [PeKind::Sinusoidal, PeKind::Learned, PeKind::None][seed as usize % 3];
        let cfg = tiny(pe, seed);
        let model = jittered(&cfg, seed);
        let input = ModelInput::<f64>::from_points(&cloud(40, seed), &cfg);
        let params = model.params().tensors().to_vec();
        let check = finite_diff_check(
            |g, vars| Ok(model.forward(g, vars, &input).expect("forward").score),
            &params,
            1e-5,
        )
        .unwrap();
        assert!(check.max_rel_error < 1e-4, "{pe:?} seed {seed}: {check:?}");
    }
}

#[test]
fn loss_gradients_pass_the_check_too() {
    let cfg = tiny(PeKind::Sinusoidal, 8);
    let model = jittered(&cfg, 8);
    let input = ModelInput::<f64>::from_points(&cloud(30, 8), &cfg);
    let params = model.params().tensors().to_vec();
    let check = finite_diff_check(
        |g, vars| {
            let s = model.forward(g, vars, &input).expect("forward").score;
            let t = g.constant(Tensor::scalar(71.0));
            Ok(l2_loss(g, s, t).expect("loss"))
        },
        &params,
        1e-5,
    )
    .unwrap();
    assert!(check.max_rel_error < 1e-4, "{check:?}");
}

#[test]
fn attention_rows_sum_to_one_with_expected_shapes() {
    let cfg = tiny(PeKind::Sinusoidal, 0);
    let model = Model::<f64>::new(cfg.clone()).unwrap();
    let input = ModelInput::from_points(&cloud(50, 0), &cfg);
    let mut g = Graph::new();
    let vars = constants(&mut g, model.params());
    let f = model.forward(&mut g, &vars, &input).unwrap();
    assert_eq!(g.shape(f.score), [1]);
    assert_eq!(f.attention.len(), cfg.encoder_layers + cfg.decoder_layers);
    let (nq, nk) = (cfg.query_count(), cfg.cell_count());
    for (i, &a) in f.attention.iter().enumerate() {
        let keys = if i < cfg.encoder_layers { nq } else { nk };
        assert_eq!(g.shape(a), [cfg.heads, nq, keys]);
        for row in g.value(a).data().chunks(keys) {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&w| w >= 0.0));
        }
    }
}

#[test]
fn one_query_one_token_attends_with_weight_one() {
    let cfg = ModelConfig {
        x_range: [0.0, 1.0],
        y_range: [0.0, 1.0],
        patch_size: 1,
        heads: 1,
        embed_dim: 4,
        pillar_channels: 2,
        ffn_dim: 4,
        encoder_layers: 0,
        decoder_layers: 1,
        head_widths: vec![],
        ..ModelConfig::default()
    };
    let model = Model::<f64>::new(cfg.clone()).unwrap();
    let input = ModelInput::from_points(&[Point::new(0.5, 0.5, 0.2, 0.3)], &cfg);
    let mut g = Graph::new();
    let vars = constants(&mut g, model.params());
    let f = model.forward(&mut g, &vars, &input).unwrap();
    assert_eq!(g.value(f.attention[0]).data(), &[1.0]);
    assert_eq!(cfg.query_count(), 1);
}

#[test]
fn point_order_does_not_change_the_score() {
    let cfg = tiny(PeKind::Sinusoidal, 2);
    let model = Model::<f32>::new(cfg).unwrap();
    let mut pts = cloud(200, 5);
    let a = model.predict(&pts).unwrap();
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(a.to_bits(), model.predict(&pts).unwrap().to_bits());
}

#[test]
fn points_outside_the_grid_are_ignored() {
    let cfg = tiny(PeKind::Sinusoidal, 2);
    let model = Model::<f32>::new(cfg).unwrap();
    let mut pts = cloud(100, 6);
    let a = model.predict(&pts).unwrap();
    pts.extend([
        Point::new(4.0, 0.0, 0.0, 1.0),
        Point::new(0.0, -4.01, 0.0, 1.0),
        Point::new(50.0, 50.0, 0.0, 1.0),
    ]);
    assert_eq!(a.to_bits(), model.predict(&pts).unwrap().to_bits());
}

#[test]
fn patchify_matches_hand_slices() {
    // 4x4 map, 2 channels, value = 10·cell + channel
    let (h, w, c, p) = (4, 4, 2, 2);
    let data: Vec<f64> = (0..h * w * c).map(|i| (10 * (i / c) + i % c) as f64).collect();
    let mut g = Graph::new();
    let m = g.constant(Tensor::new(vec![h * w, c], data).unwrap());
    let q = patchify(&mut g, m, h, w, c, p).unwrap();
    assert_eq!(g.shape(q), [4, 8]);
    let cell = |r: usize, col: usize| [(10 * (r * w + col)) as f64, (10 * (r * w + col) + 1) as f64];
    let patch = |pr: usize, pc: usize| {
        let mut v = Vec::new();
        for dy in 0..p {
            for dx in 0..p {
                v.extend(cell(pr * p + dy, pc * p + dx));
            }
        }
        v
    };
    let rows: Vec<&[f64]> = g.value(q).data().chunks(8).collect();
    assert_eq!(rows[0], patch(0, 0).as_slice());
    assert_eq!(rows[1], patch(0, 1).as_slice());
    assert_eq!(rows[2], patch(1, 0).as_slice());
    assert_eq!(rows[3], patch(1, 1).as_slice());
    assert_eq!(rows[1], &[20.0, 21.0, 30.0, 31.0, 60.0, 61.0, 70.0, 71.0]);
    assert!(matches!(patchify(&mut g, m, h, w, c, 3), Err(RegressorError::NotDivisible { .. })));
}

#[test]
fn adamw_without_decay_is_textbook_adam() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let init: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut store = ParamStore::new();
    store.insert("w", Tensor::new(vec![7], init.clone()).unwrap());
    let mut state = AdamState::zeros(&store);
    let h = AdamParams {
        lr: 0.01,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
        weight_decay: 0.0,
    };
    let (mut x, mut m, mut v) = (init, vec![0.0; 7], vec![0.0; 7]);
    for t in 1..=25 {
        let grad: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
        adamw_step(&mut store, std::slice::from_ref(&grad), &mut state, &h).unwrap();
        for i in 0..7 {
            m[i] = 0.9 * m[i] + 0.1 * grad[i];
            v[i] = 0.999 * v[i] + 0.001 * grad[i] * grad[i];
            let mh = m[i] / (1.0 - 0.9f64.powi(t));
            let vh = v[i] / (1.0 - 0.999f64.powi(t));
            x[i] -= 0.01 * mh / (vh.sqrt() + 1e-8);
        }
    }
    for (a, b) in store.tensor(0).data().iter().zip(&x) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

fn tiny_samples(n: usize) -> Vec<(String, Vec<Point>, f64)> {
    (0..n)
        .map(|i| {
            let pts = cloud(20 + 15 * i, 100 + i as u64);
            (format!("s{i}"), pts, 10.0 + 80.0 * i as f64 / n.max(2) as f64)
        })
        .collect()
}

#[test]
fn a_single_sample_is_memorized() {
    let cfg = tiny(PeKind::Sinusoidal, 1);
    let data = prepare(&[("one".into(), cloud(50, 1), 83.0)], &cfg);
    let mut model = Model::<f32>::new(cfg).unwrap();
    let tc = TrainConfig {
        epochs: 150,
        batch_size: 1,
        max_lr: 5e-3,
        base_lr: 1e-3,
        cycle_len: 40,
        ..TrainConfig::default()
    };
    train(&mut model, &data, &tc, |_| {}).unwrap();
    let pred = predict_all(&model, &data).unwrap()[0];
    assert!((pred - 83.0).abs() < 1.0, "prediction {pred}");
}

#[test]
fn same_seed_gives_bit_identical_loss_curves() {
    let cfg = tiny(PeKind::Sinusoidal, 9);
    let data = prepare(&tiny_samples(6), &cfg);
    let run = |workers: usize| {
        let mut model = Model::<f32>::new(cfg.clone()).unwrap();
        let tc = TrainConfig {
            epochs: 5,
            batch_size: 4,
            workers,
            seed: 3,
            ..TrainConfig::default()
        };
        let h = train(&mut model, &data, &tc, |_| {}).unwrap();
        let bits: Vec<u64> = h.epochs.iter().map(|e| e.loss.to_bits()).collect();
        (bits, h.to_csv())
    };
    let first = run(1);
    assert_eq!(first, run(1));
    assert_eq!(first.0, run(2).0);
    assert!(first.1.starts_with("epoch,loss,lr\n"));
    assert_eq!(first.1.lines().count(), 6);
}

#[test]
fn different_seeds_shuffle_differently() {
    let cfg = tiny(PeKind::Sinusoidal, 9);
    let data = prepare(&tiny_samples(6), &cfg);
    let run = |seed: u64| {
        let mut model = Model::<f32>::new(cfg.clone()).unwrap();
        let tc = TrainConfig {
            epochs: 3,
            batch_size: 2,
            seed,
            ..TrainConfig::default()
        };
        train(&mut model, &data, &tc, |_| {}).unwrap().final_loss().unwrap()
    };
    assert_ne!(run(1).to_bits(), run(2).to_bits());
}

#[test]
fn training_input_errors() {
    let cfg = tiny(PeKind::Sinusoidal, 0);
    let mut model = Model::<f32>::new(cfg.clone()).unwrap();
    let tc = TrainConfig::default();
    assert!(matches!(train(&mut model, &[], &tc, |_| {}), Err(RegressorError::EmptyTrainingSet)));
    let bad = prepare(&[("x".into(), cloud(5, 0), 120.0)], &cfg);
    assert!(matches!(
        train(&mut model, &bad, &tc, |_| {}),
        Err(RegressorError::TargetOutOfRange(t)) if t == 120.0
    ));
    let zero_batch = TrainConfig {
        batch_size: 0,
        ..TrainConfig::default()
    };
    assert!(train(&mut model, &bad, &zero_batch, |_| {}).is_err());
}

#[test]
fn evaluate_reports_degenerate_inputs() {
    let cfg = tiny(PeKind::Sinusoidal, 0);
    let model = Model::<f32>::new(cfg.clone()).unwrap();
    let one = prepare(&tiny_samples(1), &cfg);
    assert!(matches!(
        evaluate(&model, &one),
        Err(RegressorError::Core(igo_core::Error::TooFewSamples { .. }))
    ));
    let mut params = model.params().clone();
    let slot = params.slot("head.out.w").unwrap();
    params.tensor_mut(slot).data_mut().iter_mut().for_each(|v| *v = 0.0);
    let flat = Model::from_params(cfg.clone(), params).unwrap();
    let many = prepare(&tiny_samples(4), &cfg);
    assert!(matches!(
        evaluate(&flat, &many),
        Err(RegressorError::Core(igo_core::Error::ZeroVariance))
    ));
    let ok = evaluate(&model, &many).unwrap();
    assert_eq!(ok.predictions.len(), 4);
    assert!(ok.report.plcc.abs() <= 1.0);
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("checkpoint.bin");
    let cfg = tiny(PeKind::Learned, 5);
    let model = Model::<f32>::new(cfg.clone()).unwrap();
    save_checkpoint(&model, serde_json::json!({"note": "x"}), &path).unwrap();
    let (back, extra) = load_checkpoint(&path).unwrap();
    assert_eq!(back.config(), &cfg);
    assert_eq!(extra["note"], "x");
    let pts = cloud(80, 2);
    assert_eq!(model.predict(&pts).unwrap().to_bits(), back.predict(&pts).unwrap().to_bits());
}

#[test]
fn mismatched_weights_are_rejected() {
    let a = Model::<f32>::new(tiny(PeKind::Sinusoidal, 0)).unwrap();
    let other = tiny(PeKind::Learned, 0);
    assert!(matches!(
        Model::from_params(other, a.params().clone()),
        Err(RegressorError::CheckpointMismatch(_))
    ));
}

#[test]
fn voxel_backbone_is_a_stub() {
    let cfg = ModelConfig {
        backbone: Backbone::VoxelStub,
        ..tiny(PeKind::Sinusoidal, 0)
    };
    let err = Model::<f32>::new(cfg).unwrap_err();
    assert_eq!(err.to_string(), "voxel backbone not implemented at desk scale");
}

#[test]
fn input_shape_is_checked() {
    let cfg = tiny(PeKind::Sinusoidal, 0);
    let model = Model::<f64>::new(cfg).unwrap();
    let wrong = ModelInput::from_points(&cloud(10, 0), &tiny_grid(16));
    assert!(matches!(model.predict_input(&wrong), Err(RegressorError::ShapeMismatch(_))));
}

fn tiny_grid(extent: usize) -> ModelConfig {
    ModelConfig {
        x_range: [0.0, extent as f64],
        y_range: [0.0, extent as f64],
        ..tiny(PeKind::Sinusoidal, 0)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn shuffled_clouds_score_identically(seed in 0u64..10_000, n in 0usize..120) {
        let cfg = tiny(PeKind::Sinusoidal, seed % 7);
        let model = Model::<f32>::new(cfg).unwrap();
        let mut pts = cloud(n, seed);
        let a = model.predict(&pts).unwrap();
        pts.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xabc));
        prop_assert_eq!(a.to_bits(), model.predict(&pts).unwrap().to_bits());
        prop_assert!(a.is_finite());
    }
}
