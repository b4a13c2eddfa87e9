//! Acceptance criteria, run in one test so the timed criteria do not share
//! the CPU with each other. Each prints a `AC<n> PASS|FAIL` line; set
//! `IGO_ACCEPTANCE_ONLY=3,7` to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use igo_core::point_saliency::{camera_point_saliency, point_saliency};
use igo_core::pooling::frame_raw_score;
use igo_core::scoring::{frame_saliency_maps, score_with_manifest};
use igo_core::{
    bin_score, fit_dataset, generate_dataset, generate_scene, mean_l1, normalize_score, plcc,
    srcc, BinningConfig, Frame, Point, QualityBin, SaliencyMap, SceneRanges, SceneSpec, ScoringConfig, SyntheticFrame,
};
use igo_regressor::{evaluate, prepare, train, Model, ModelConfig, ModelInput, PeKind, TrainConfig};
use igo_tensor::{finite_diff_check, Graph, Tensor, Var};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AC1_REL_TOL: f64 = 1e-12;
const AC2_REL_TOL: f64 = 1e-9;
const AC2_SECONDS: f64 = 60.0;
const AC5_TOL: f64 = 1e-12;
const AC5_AFFINE_TOL: f64 = 1e-12;
const AC6_REL_TOL: f64 = 1e-4;
const AC6_SECONDS: f64 = 120.0;
const AC6_STEP: f64 = 1e-5;
const AC7_MIN_PLCC: f64 = 0.95;
const AC7_MAX_L1: f64 = 5.0;
const AC7_SECONDS: f64 = 300.0;
const AC10_MIN_SRCC: f64 = 0.6;

const DATASET_SEED: u64 = 2024;
const DATASET_FRAMES: usize = 64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

/// The 64-frame synthetic set shared by the scoring and learning criteria.
struct Shared {
    frames: Vec<SyntheticFrame>,
    scores: Vec<f64>,
}

fn shared() -> Shared {
    let frames = generate_dataset(DATASET_FRAMES, &SceneRanges::default(), DATASET_SEED).unwrap();
    let plain: Vec<Frame> = frames.iter().map(|f| f.frame.clone()).collect();
    let cfg = ScoringConfig::default();
    let fitted = fit_dataset(&plain, &cfg).unwrap();
    let scores = fitted.records(&plain, &cfg.binning).iter().map(|r| r.igo_pqa).collect();
    Shared { frames, scores }
}

// ---------------------------------------------------------------- AC1

fn ac1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let p = Point::new(
            rng.random_range(-80.0..80.0),
            rng.random_range(-80.0..80.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(0.0..1.0),
        );
        let d_max = rng.random_range(1.0..100.0);
        let i: f64 = rng.random_range(0.0..=1.0);
        let (x, y, z) = (p.x as f64, p.y as f64, p.z as f64);
        let want = ((x * x + y * y + z * z).sqrt() / d_max).min(1.0) * i;
        let got = point_saliency(&p, d_max, i).unwrap();
        let err = if want == 0.0 { got.abs() } else { rel_err(got, want) };
        worst = worst.max(err);
    }
    outcome(
        worst <= AC1_REL_TOL,
        format!("200 triples, max rel err {worst:.2e} (tol {AC1_REL_TOL:.0e})"),
    )
}

// ---------------------------------------------------------------- AC2

/// Project → sample → splat over every canvas cell → sum, from the raw
/// calibration arrays.
fn brute_force_raw(frame: &Frame, maps: &[SaliencyMap], d_max: f64, radius: f64, sigma: f64) -> f64 {
    let mut total = 0.0;
    for (cam, map) in frame.cameras.iter().zip(maps) {
        let c = &cam.calib;
        let (k, e) = (&c.intrinsic, &c.extrinsic);
        let (w, h) = (c.width as usize, c.height as usize);
        let mut canvas = vec![vec![0.0f64; w]; h];
        for p in &frame.points {
            let (x, y, z) = (p.x as f64, p.y as f64, p.z as f64);
            let xc = e[0] * x + e[1] * y + e[2] * z + e[3];
            let yc = e[4] * x + e[5] * y + e[6] * z + e[7];
            let zc = e[8] * x + e[9] * y + e[10] * z + e[11];
            if zc <= 1e-6 {
                continue;
            }
            let hx = k[0] * xc + k[1] * yc + k[2] * zc;
            let hy = k[3] * xc + k[4] * yc + k[5] * zc;
            let hz = k[6] * xc + k[7] * yc + k[8] * zc;
            let (u, v) = (hx / hz, hy / hz);
            if !(u >= 0.0 && u < w as f64 && v >= 0.0 && v < h as f64) {
                continue;
            }
            let intensity = map.values()[v.floor() as usize * w + u.floor() as usize];
            let s = ((x * x + y * y + z * z).sqrt() / d_max).min(1.0) * intensity;
            for (row, line) in canvas.iter_mut().enumerate() {
                for (col, cell) in line.iter_mut().enumerate() {
                    let d2 = (col as f64 - u).powi(2) + (row as f64 - v).powi(2);
                    if d2 <= radius * radius {
                        *cell += s * (-d2 / (2.0 * sigma * sigma)).exp();
                    }
                }
            }
        }
        total += canvas.iter().flatten().sum::<f64>();
    }
    total
}

fn ac2() -> Outcome {
    let start = Instant::now();
    let ranges = SceneRanges {
        n_cameras: 4,
        image_width: 128,
        image_height: 72,
        ..SceneRanges::default()
    };
    let frames = generate_dataset(10, &ranges, 22).unwrap();
    let cfg = ScoringConfig::default();
    let mut worst = 0.0f64;
    for f in &frames {
        let frame = &f.frame;
        let d_max = frame.max_range();
        let maps = frame_saliency_maps(frame, &cfg.saliency).unwrap();
        let got = frame_raw_score(frame, &maps, d_max, &cfg.pooling).unwrap();
        let want = brute_force_raw(frame, &maps, d_max, cfg.pooling.radius, cfg.pooling.sigma);
        worst = worst.max(rel_err(got, want));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= AC2_REL_TOL && secs < AC2_SECONDS,
        format!("10 frames, max rel err {worst:.2e} (tol {AC2_REL_TOL:.0e}), {secs:.1}s (limit {AC2_SECONDS}s)"),
    )
}

// ---------------------------------------------------------------- AC3

fn small_scene(seed: u64) -> Frame {
    generate_scene(&SceneSpec {
        seed,
        n_cameras: 3,
        density: 0.3,
        max_range: 20.0,
        n_objects: 2,
        image_width: 96,
        image_height: 54,
        ..SceneSpec::default()
    })
    .unwrap()
}


/// A point `depth` meters in front of camera `cam` at the center of pixel
/// `(px, py)`, mapped back through the transposed extrinsic rotation.
fn point_at_pixel(frame: &Frame, cam: usize, px: u32, py: u32, depth: f64) -> Point {
    let c = &frame.cameras[cam].calib;
    let (k, e) = (&c.intrinsic, &c.extrinsic);
    let xc = (px as f64 + 0.5 - k[2]) / k[0] * depth;
    let yc = (py as f64 + 0.5 - k[5]) / k[4] * depth;
    let d = [xc - e[3], yc - e[7], depth - e[11]];
    let p: Vec<f64> = (0..3)
        .map(|j| e[j] * d[0] + e[4 + j] * d[1] + e[8 + j] * d[2])
        .collect();
    Point::new(p[0] as f32, p[1] as f32, p[2] as f32, 0.5)
}

fn ac3() -> Outcome {
    let cfg = ScoringConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut increased, mut invariant) = (0, 0);
    let trials = 50;
    for trial in 0..trials {
        let mut frame = small_scene(300 + trial);
        let d_max = frame.max_range();
        let maps = frame_saliency_maps(&frame, &cfg.saliency).unwrap();
        let before = frame_raw_score(&frame, &maps, d_max, &cfg.pooling).unwrap();

        let cam = rng.random_range(0..frame.cameras.len());
        let map = &maps[cam];
        let (px, py) = loop {
            let (x, y) = (rng.random_range(0..map.width()), rng.random_range(0..map.height()));
            if map.get(x, y) > 0.05 {
                break (x, y);
            }
        };
        let p = point_at_pixel(&frame, cam, px, py, rng.random_range(2.0..15.0));
        let mut alone = frame.clone();
        alone.points = vec![p];
        let s = camera_point_saliency(&alone, cam, map, d_max).unwrap();
        frame.points.push(p);
        let after = frame_raw_score(&frame, &maps, d_max, &cfg.pooling).unwrap();
        if s.first().is_some_and(|h| h.s > 0.0) && after > before {
            increased += 1;
        }

        let mut shuffled = frame.clone();
        shuffled.points.shuffle(&mut rng);
        let again = frame_raw_score(&shuffled, &maps, d_max, &cfg.pooling).unwrap();
        if again.to_bits() == after.to_bits() {
            invariant += 1;
        }
    }
    outcome(
        increased == trials && invariant == trials,
        format!("{increased}/{trials} strictly increased, {invariant}/{trials} bit-identical after shuffling"),
    )
}

// ---------------------------------------------------------------- AC4

fn ac4(shared: &Shared) -> Outcome {
    let cfg = ScoringConfig::default();
    let plain: Vec<Frame> = shared.frames.iter().map(|f| f.frame.clone()).collect();
    let fitted = fit_dataset(&plain, &cfg).unwrap();
    let m = &fitted.manifest;
    let lo = shared.scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = shared.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let endpoints = lo == 0.0 && hi == 100.0;

    let b = BinningConfig::default();
    let cases = [
        (0.0, QualityBin::Low),
        (33.9, QualityBin::Low),
        (33.999_999_999, QualityBin::Low),
        (34.0, QualityBin::Medium),
        (66.999_999_999, QualityBin::Medium),
        (67.0, QualityBin::High),
        (100.0, QualityBin::High),
    ];
    let bins = cases.iter().all(|&(s, want)| bin_score(s, &b) == want);

    let extremes = SceneRanges {
        density: (0.02, 3.0),
        max_range: (6.0, 30.0),
        ..SceneRanges::default()
    };
    let held: Vec<Frame> = [(0.02, 6.0), (3.0, 30.0), (2.5, 29.0), (0.03, 7.0)]
        .iter()
        .enumerate()
        .map(|(i, &(density, max_range))| {
            generate_scene(&SceneSpec {
                seed: 9_000 + i as u64,
                density,
                max_range,
                n_cameras: extremes.n_cameras,
                image_width: extremes.image_width,
                image_height: extremes.image_height,
                ..SceneSpec::default()
            })
            .unwrap()
        })
        .collect();
    let records = score_with_manifest(&held, m, &cfg).unwrap();
    let in_range = records.iter().all(|r| (0.0..=100.0).contains(&r.igo_pqa));
    let clamped_low = records.iter().any(|r| r.raw_score < m.raw_min() && r.igo_pqa == 0.0);
    let clamped_high = records.iter().any(|r| r.raw_score > m.raw_max() && r.igo_pqa == 100.0);
    let direct = normalize_score(m.raw_min() - 1.0, m) == 0.0 && normalize_score(m.raw_max() * 2.0, m) == 100.0;
    outcome(
        endpoints && bins && in_range && clamped_low && clamped_high && direct,
        format!(
            "min->{lo} max->{hi}, half-open bins at 34/67 {}, held-out clamp low {clamped_low} high {clamped_high}",
            if bins { "ok" } else { "WRONG" }
        ),
    )
}

// ---------------------------------------------------------------- AC5

fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Rank = (number strictly below) + (ties including itself + 1) / 2.
fn rank_oracle(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&a| {
            let below = x.iter().filter(|&&b| b < a).count() as f64;
            let equal = x.iter().filter(|&&b| b == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn ac5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut worst_inv) = (0.0f64, 0.0f64);
    let (mut tied_pairs, mut monotone_ok, mut no_tie_formula_ok) = (0, true, true);
    for pair in 0..100 {
        let n = rng.random_range(3..60);
        let tied = pair % 2 == 0;
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            let v: f64 = rng.random_range(-1.0..1.0);
            if tied {
                (v * 4.0).round() / 4.0
            } else {
                v
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|&a| 0.6 * a + 0.8 * draw(&mut rng)).collect();
        let y: Vec<f64> = if tied { y.iter().map(|v| (v * 4.0).round() / 4.0).collect() } else { y };
        let spread = |v: &[f64]| v.iter().any(|&a| a != v[0]);
        if !spread(&x) || !spread(&y) {
            continue;
        }
        if tied && (1..n).any(|i| x[..i].contains(&x[i])) {
            tied_pairs += 1;
        }

        let p = plcc(&x, &y).unwrap();
        let s = srcc(&x, &y).unwrap();
        let l = mean_l1(&x, &y).unwrap();
        worst = worst
            .max((p - pearson_oracle(&x, &y)).abs())
            .max((s - pearson_oracle(&rank_oracle(&x), &rank_oracle(&y))).abs())
            .max((l - x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64).abs());

        if !tied {
            let (rx, ry) = (rank_oracle(&x), rank_oracle(&y));
            let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
            let nf = n as f64;
            let textbook = 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0));
            no_tie_formula_ok &= (s - textbook).abs() <= AC5_TOL;
        }

        let (a, b) = (rng.random_range(0.1..10.0), rng.random_range(-5.0..5.0));
        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let neg: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
        let shifted: (Vec<f64>, Vec<f64>) = (x.iter().map(|v| v + b).collect(), y.iter().map(|v| v + b).collect());
        worst_inv = worst_inv
            .max((plcc(&ax, &y).unwrap() - p).abs())
            .max((plcc(&neg, &y).unwrap() + p).abs())
            .max((mean_l1(&shifted.0, &shifted.1).unwrap() - l).abs())
            .max((mean_l1(&y, &x).unwrap() - l).abs());
        let mono: Vec<f64> = x.iter().map(|v| v.exp() + v.powi(3)).collect();
        monotone_ok &= srcc(&mono, &y).unwrap() == s && srcc(&neg, &y).unwrap() == -s;
    }
    let pass = worst <= AC5_TOL && worst_inv <= AC5_AFFINE_TOL && monotone_ok && no_tie_formula_ok && tied_pairs > 0;
    outcome(
        pass,
        format!(
            "oracle err {worst:.2e} (tol {AC5_TOL:.0e}), invariance err {worst_inv:.2e}, {tied_pairs} tied pairs, \
             monotone srcc exact {monotone_ok}"
        ),
    )
}

// ---------------------------------------------------------------- AC6

fn randn(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(-1.0..1.0))
}

/// Random linear functional of `out`, so every output coordinate matters.
fn probe(g: &mut Graph<f64>, out: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = g.shape(out).to_vec();
    let w = g.constant(randn(&mut rng, &shape));
    let prod = g.mul(out, w).unwrap();
    g.sum_all(prod)
}

type OpFn = fn(&mut Graph<f64>, &[Var]) -> igo_tensor::Result<Var>;

fn op_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, Vec<Tensor<f64>>, OpFn)> {
    let mut r = |s: &[usize]| randn(rng, s);
    vec![
        ("matmul", vec![r(&[3, 4]), r(&[4, 2])], |g, v| g.matmul(v[0], v[1])),
        ("batched_matmul", vec![r(&[2, 3, 4]), r(&[2, 4, 2])], |g, v| g.matmul(v[0], v[1])),
        ("add", vec![r(&[3, 4]), r(&[4])], |g, v| g.add(v[0], v[1])),
        ("sub", vec![r(&[2, 3, 4]), r(&[3, 4])], |g, v| g.sub(v[0], v[1])),
        ("mul", vec![r(&[3, 4]), r(&[4])], |g, v| g.mul(v[0], v[1])),
        ("scale", vec![r(&[5])], |g, v| Ok(g.scale(v[0], -1.7))),
        ("add_scalar", vec![r(&[5])], |g, v| Ok(g.add_scalar(v[0], 0.25))),
        ("relu", vec![r(&[8])], |g, v| Ok(g.relu(v[0]))),
        ("gelu", vec![r(&[8])], |g, v| Ok(g.gelu(v[0]))),
        ("abs", vec![r(&[8])], |g, v| Ok(g.abs(v[0]))),
        ("softmax_strided", vec![r(&[2, 4, 3])], |g, v| g.softmax(v[0], 1)),
        ("softmax_rows", vec![r(&[3, 19])], |g, v| g.softmax(v[0], 1)),
        ("layer_norm", vec![r(&[3, 6])], |g, v| g.layer_norm(v[0], 1, 1e-5)),
        ("layer_norm_axis0", vec![r(&[5, 2])], |g, v| g.layer_norm(v[0], 0, 1e-5)),
        ("reshape", vec![r(&[2, 6])], |g, v| g.reshape(v[0], &[3, 4])),
        ("transpose", vec![r(&[3, 5])], |g, v| g.transpose(v[0], 0, 1)),
        ("permute", vec![r(&[2, 3, 4])], |g, v| g.permute(v[0], &[2, 0, 1])),
        ("concat", vec![r(&[2, 3]), r(&[2, 1])], |g, v| g.concat(&[v[0], v[1]], 1)),
        ("sum", vec![r(&[3, 4, 2])], |g, v| g.sum(v[0], 1)),
        ("sum_rows", vec![r(&[2, 21])], |g, v| g.sum(v[0], 1)),
        ("mean", vec![r(&[3, 4, 2])], |g, v| g.mean(v[0], 2)),
        ("sum_all", vec![r(&[3, 4])], |g, v| Ok(g.sum_all(v[0]))),
        ("mean_all", vec![r(&[3, 4])], |g, v| Ok(g.mean_all(v[0]))),
        ("slice", vec![r(&[4, 5])], |g, v| g.slice(v[0], 1, 1, 4)),
        ("im2col", vec![r(&[4, 5, 2])], |g, v| g.im2col(v[0], 3)),
    ]
}

fn tiny_model_config(pe: PeKind, seed: u64) -> ModelConfig {
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

fn tiny_cloud(n: usize, seed: u64) -> Vec<Point> {
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

fn ac6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = (0.0f64, "");
    for (i, (name, params, op)) in op_cases(&mut rng).into_iter().enumerate() {
        let err = finite_diff_check(
            |g, v| {
                let out = op(g, v)?;
                Ok(probe(g, out, 600 + i as u64))
            },
            &params,
            AC6_STEP,
        )
        .unwrap()
        .max_rel_error;
        if err >= worst.0 {
            worst = (err, name);
        }
    }
    let ops_worst = worst;

    let mut model_worst = 0.0f64;
    for (seed, pe) in [(1u64, PeKind::Sinusoidal), (2, PeKind::Learned), (3, PeKind::None)] {
        let cfg = tiny_model_config(pe, seed);
        let mut params = Model::<f64>::new(cfg.clone()).unwrap().params().clone();
        // lift zero-initialized biases off the ReLU kinks of empty cells
        let mut jitter = ChaCha8Rng::seed_from_u64(60 + seed);
        for t in params.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v += jitter.random_range(-0.1..0.1));
        }
        let model = Model::from_params(cfg.clone(), params).unwrap();
        let input = ModelInput::<f64>::from_points(&tiny_cloud(40, seed), &cfg);
        let check = finite_diff_check(
            |g, vars| Ok(model.forward(g, vars, &input).expect("forward").score),
            model.params().tensors(),
            AC6_STEP,
        )
        .unwrap();
        model_worst = model_worst.max(check.max_rel_error);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        ops_worst.0 < AC6_REL_TOL && model_worst < AC6_REL_TOL && secs < AC6_SECONDS,
        format!(
            "ops max rel err {:.2e} ({}), tiny model {model_worst:.2e} (tol {AC6_REL_TOL:.0e}), {secs:.1}s",
            ops_worst.0, ops_worst.1
        ),
    )
}

// ---------------------------------------------------------------- AC7

fn ac7(shared: &Shared) -> Outcome {
    let mcfg = ModelConfig::default();
    let samples: Vec<_> = shared
        .frames
        .iter()
        .zip(&shared.scores)
        .map(|(f, &s)| (f.frame.frame_id.clone(), f.frame.points.clone(), s))
        .collect();
    let start = Instant::now();
    let data = prepare(&samples, &mcfg);
    let tcfg = TrainConfig::default();
    let mut model = Model::<f32>::new(mcfg.clone()).unwrap();
    let history = train(&mut model, &data, &tcfg, |_| {}).unwrap();
    let eval = evaluate(&model, &data).unwrap();
    let secs = start.elapsed().as_secs_f64();

    let rerun_cfg = TrainConfig { epochs: 2, ..tcfg.clone() };
    let mut again = Model::<f32>::new(mcfg).unwrap();
    let rerun = train(&mut again, &data, &rerun_cfg, |_| {}).unwrap();
    let bit_exact = rerun
        .epochs
        .iter()
        .zip(&history.epochs)
        .all(|(a, b)| a.loss.to_bits() == b.loss.to_bits());

    let r = &eval.report;
    outcome(
        r.plcc >= AC7_MIN_PLCC && r.mean_l1 <= AC7_MAX_L1 && secs <= AC7_SECONDS && bit_exact,
        format!(
            "{} epochs: train PLCC {:.4} (>= {AC7_MIN_PLCC}), L1 {:.3} (<= {AC7_MAX_L1}), {secs:.0}s \
             (limit {AC7_SECONDS}s), same-seed rerun bit-exact {bit_exact}",
            tcfg.epochs, r.plcc, r.mean_l1
        ),
    )
}

// ---------------------------------------------------------------- AC8

/// A fixed point cluster translated by whole patches; the target depends
/// only on which patch it sits in. The cluster's receptive field stays
/// inside its own patch and off the outermost cells, so without positional
/// encoding patches are only told apart by whether they touch the border.
fn positional_samples(cfg: &ModelConfig) -> Vec<(String, Vec<Point>, f64)> {
    let p = cfg.patch_size as f64 * cfg.cell_size;
    let per_side = cfg.grid_width() / cfg.patch_size;
    let mut out = Vec::new();
    for shape in 0..2u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(80 + shape);
        let n = 12 + 10 * shape as usize;
        let cluster: Vec<(f64, f64, f64)> = (0..n)
            .map(|_| {
                // dyadic offsets keep every translated coordinate exact in f32
                let q = |v: f64| (v * 64.0).round() / 64.0;
                (
                    q(rng.random_range(3.0..5.0) * cfg.cell_size),
                    q(rng.random_range(3.0..5.0) * cfg.cell_size),
                    q(rng.random_range(-1.5..1.0)),
                )
            })
            .collect();
        for pr in 0..per_side {
            for pc in 0..per_side {
                let (x0, y0) = (cfg.x_range[0] + pc as f64 * p, cfg.y_range[0] + pr as f64 * p);
                let pts = cluster
                    .iter()
                    .map(|&(dx, dy, z)| Point::new((x0 + dx) as f32, (y0 + dy) as f32, z as f32, 0.5))
                    .collect();
                let side = (per_side - 1) as f64;
                let target = 10.0 + 80.0 * (0.75 * pc as f64 + 0.25 * pr as f64) / side;
                out.push((format!("s{shape}_{pr}_{pc}"), pts, target));
            }
        }
    }
    out
}

fn ac8() -> Outcome {
    let base = ModelConfig {
        x_range: [-16.0, 16.0],
        y_range: [-16.0, 16.0],
        pillar_channels: 8,
        embed_dim: 16,
        heads: 2,
        encoder_layers: 1,
        decoder_layers: 1,
        ffn_dim: 32,
        patch_size: 8,
        head_widths: vec![16],
        init_seed: 8,
        ..ModelConfig::default()
    };
    let tcfg = TrainConfig {
        epochs: 60,
        batch_size: 4,
        max_lr: 3e-3,
        cycle_len: 16,
        seed: 8,
        ..TrainConfig::default()
    };
    let samples = positional_samples(&base);
    let final_loss = |pe: PeKind| {
        let cfg = ModelConfig {
            positional_encoding: pe,
            ..base.clone()
        };
        let data = prepare(&samples, &cfg);
        let mut model = Model::<f32>::new(cfg).unwrap();
        train(&mut model, &data, &tcfg, |_| {}).unwrap().final_loss().unwrap()
    };
    let (sin, none) = (final_loss(PeKind::Sinusoidal), final_loss(PeKind::None));
    outcome(
        sin < none,
        format!(
            "{} samples, {} epochs: final L1 sinusoidal {sin:.3} vs none {none:.3}",
            samples.len(),
            tcfg.epochs
        ),
    )
}

// ---------------------------------------------------------------- AC9

fn run_cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = igo_cli::run(std::iter::once("igo-pqa").chain(args.iter().copied()), &mut out, &mut err);
    let mut text = String::from_utf8(out).unwrap();
    text.push_str(&String::from_utf8(err).unwrap());
    (code, text)
}

fn ac9() -> Outcome {
    let readme = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md");
    let text = std::fs::read_to_string(&readme).unwrap_or_default();
    let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let disclaimer = ["0.864", "0.975", "GPU", "out of desk scope"].iter().all(|k| text.contains(k));

    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let config = root.join("tiny.toml");
    std::fs::write(
        &config,
        "[model]\nx_range = [-16.0, 16.0]\ny_range = [-16.0, 16.0]\npillar_channels = 4\nembed_dim = 8\n\
         heads = 2\nencoder_layers = 1\ndecoder_layers = 1\nffn_dim = 8\npatch_size = 8\nhead_widths = [8]\n\n\
         [train]\nepochs = 2\n\n[synth]\nn_cameras = 2\nimage_width = 64\nimage_height = 36\n",
    )
    .unwrap();
    let (c, d, ck) = (config.to_str().unwrap(), root.join("data"), root.join("ckpt"));
    let (d, ck) = (d.to_str().unwrap(), ck.to_str().unwrap());
    let steps = [
        run_cli(&["--config", c, "synth", "--n", "6", "--out", d]),
        run_cli(&["--config", c, "generate", "--data", d, "--out", d]),
        run_cli(&["--config", c, "train", "--data", d, "--out", ck]),
        run_cli(&[
            "--config",
            c,
            "eval",
            "--checkpoint",
            &format!("{ck}/checkpoint.bin"),
            "--data",
            d,
        ]),
    ];
    let ok = steps.iter().all(|(code, _)| *code == 0);
    let table = &steps[3].1;
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split("  ").map(str::trim).filter(|s| !s.is_empty()).collect();
    let row: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    let format_ok = header.get(1..4) == Some(&["PLCC", "SRCC", "Avg. L1"][..])
        && row.first() == Some(&"synthetic")
        && row.len() >= 4
        && row[1..4].iter().all(|v| v.parse::<f64>().is_ok());
    outcome(
        disclaimer && ok && format_ok,
        format!("README disclaimer {disclaimer}, eval table columns {header:?} {format_ok}"),
    )
}

// ---------------------------------------------------------------- AC10

fn ac10(shared: &Shared) -> Outcome {
    let proxy: Vec<f64> = shared.frames.iter().map(|f| f.spec.density * f.spec.max_range).collect();
    let s = srcc(&shared.scores, &proxy).unwrap();
    outcome(
        s > AC10_MIN_SRCC,
        format!("{} frames, SRCC(score, density x range) {s:.4} (> {AC10_MIN_SRCC})", shared.frames.len()),
    )
}

#[test]
fn acceptance_criteria() {
    let only: Option<Vec<usize>> = std::env::var("IGO_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    let shared = [4, 7, 10].into_iter().any(wanted).then(shared);
    let s = || shared.as_ref().expect("shared dataset");
    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, "point saliency oracle", Box::new(ac1)),
        (2, "pipeline brute force", Box::new(ac2)),
        (3, "additivity and order invariance", Box::new(ac3)),
        (4, "normalization and binning", Box::new(move || ac4(s()))),
        (5, "metric oracles", Box::new(ac5)),
        (6, "gradient fidelity", Box::new(ac6)),
        (7, "desk-scale learning", Box::new(move || ac7(s()))),
        (8, "positional encoding ablation", Box::new(ac8)),
        (9, "disclaimer and report format", Box::new(ac9)),
        (10, "synthetic-set sanity", Box::new(move || ac10(s()))),
    ];
    let mut failed = Vec::new();
    for (n, name, run) in criteria {
        if !wanted(n) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| run()))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                outcome(false, format!("panicked: {msg}"))
            });
        println!(
            "AC{n} {} {name}: {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
        if !result.pass {
            failed.push(n);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
