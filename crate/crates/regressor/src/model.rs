//! Pillar encoder → conv backbone → patch queries → transformer encoder →
//! cross-attention decoder over BEV tokens → per-query MLP → mean.
//!
//! Feature maps are kept token-major: a BEV map is `[H·W, C]` with token
//! `row · W + col`, which is what every linear layer and attention block
//! consumes directly.

use igo_core::Point;
use igo_tensor::{Graph, ParamStore, Scalar, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{Backbone, ModelConfig, PeKind};
use crate::encoding::positional_encoding;
use crate::error::{RegressorError, Result};
use crate::pillar::{pillar_features, PillarFeatures, RAW_FEATURES};

/// Score = `SCORE_PRIOR + SCORE_SCALE · mean(head output)`, so a unit-scale
/// head spans the 0–100 range.
pub const SCORE_PRIOR: f64 = 50.0;
pub const SCORE_SCALE: f64 = 25.0;
pub const LN_EPS: f64 = 1e-5;
const BACKBONE_LAYERS: usize = 2;
const KERNEL: usize = 3;

#[derive(Clone, Copy, Debug)]
enum Init {
    /// `N(0, gain² / fan_in)` with fan-in taken from the first dimension.
    Fan(f64),
    Zeros,
    Ones,
    Const(f64),
    LearnedPe,
}

struct Spec {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

fn linear_specs(out: &mut Vec<Spec>, name: &str, fan_in: usize, fan_out: usize, gain: f64) {
    out.push(Spec {
        name: format!("{name}.w"),
        shape: vec![fan_in, fan_out],
        init: Init::Fan(gain),
    });
    out.push(Spec {
        name: format!("{name}.b"),
        shape: vec![fan_out],
        init: Init::Zeros,
    });
}

fn norm_specs(out: &mut Vec<Spec>, name: &str, dim: usize) {
    out.push(Spec {
        name: format!("{name}.g"),
        shape: vec![dim],
        init: Init::Ones,
    });
    out.push(Spec {
        name: format!("{name}.b"),
        shape: vec![dim],
        init: Init::Zeros,
    });
}

fn block_specs(out: &mut Vec<Spec>, prefix: &str, cfg: &ModelConfig, cross: bool) {
    let d = cfg.embed_dim;
    norm_specs(out, &format!("{prefix}.ln1"), d);
    if cross {
        norm_specs(out, &format!("{prefix}.ln_mem"), d);
    }
    // no key bias: it shifts a whole score row and cancels in the softmax
    linear_specs(out, &format!("{prefix}.attn.q"), d, d, 1.0);
    out.push(Spec {
        name: format!("{prefix}.attn.k.w"),
        shape: vec![d, d],
        init: Init::Fan(1.0),
    });
    for p in ["v", "o"] {
        linear_specs(out, &format!("{prefix}.attn.{p}"), d, d, 1.0);
    }
    norm_specs(out, &format!("{prefix}.ln2"), d);
    linear_specs(out, &format!("{prefix}.ffn1"), d, cfg.ffn_dim, 1.0);
    linear_specs(out, &format!("{prefix}.ffn2"), cfg.ffn_dim, d, 1.0);
}

/// Every parameter of `cfg`, in slot order.
fn layout(cfg: &ModelConfig) -> Vec<Spec> {
    let (c, d, p) = (cfg.pillar_channels, cfg.embed_dim, cfg.patch_size);
    let relu_gain = 2f64.sqrt();
    let mut out = Vec::new();
    linear_specs(&mut out, "pillar", RAW_FEATURES, c, relu_gain);
    for l in 0..BACKBONE_LAYERS {
        linear_specs(&mut out, &format!("conv{l}"), KERNEL * KERNEL * c, c, relu_gain);
    }
    linear_specs(&mut out, "embed", p * p * c, d, 1.0);
    linear_specs(&mut out, "map", c, d, 1.0);
    if cfg.positional_encoding == PeKind::Learned {
        out.push(Spec {
            name: "pe.query".into(),
            shape: vec![cfg.query_count(), d],
            init: Init::LearnedPe,
        });
        out.push(Spec {
            name: "pe.map".into(),
            shape: vec![cfg.cell_count(), d],
            init: Init::LearnedPe,
        });
    }
    for i in 0..cfg.encoder_layers {
        block_specs(&mut out, &format!("enc{i}"), cfg, false);
    }
    for i in 0..cfg.decoder_layers {
        block_specs(&mut out, &format!("dec{i}"), cfg, true);
    }
    norm_specs(&mut out, "head.ln", d);
    let mut width = d;
    for (j, &h) in cfg.head_widths.iter().enumerate() {
        linear_specs(&mut out, &format!("head.{j}"), width, h, 1.0);
        width = h;
    }
    out.push(Spec {
        name: "head.out.w".into(),
        shape: vec![width, 1],
        init: Init::Fan(1.0),
    });
    out.push(Spec {
        name: "head.out.b".into(),
        shape: vec![1],
        init: Init::Const(0.0),
    });
    out
}

/// Model inputs for one cloud.
#[derive(Clone, Debug)]
pub struct ModelInput<T> {
    /// `[H·W, RAW_FEATURES]`
    pub features: Tensor<T>,
    /// `[H·W, C]`, 1 on occupied pillars.
    pub mask: Tensor<T>,
}

impl<T: Scalar> ModelInput<T> {
    pub fn from_features(f: &PillarFeatures, cfg: &ModelConfig) -> Self {
        Self {
            features: f.tensor(),
            mask: f.mask(cfg.pillar_channels),
        }
    }

    pub fn from_points(points: &[Point], cfg: &ModelConfig) -> Self {
        Self::from_features(&pillar_features(points, cfg), cfg)
    }
}

/// Graph outputs of one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    /// Predicted score, shape `[1]`.
    pub score: Var,
    /// Softmax weights `[heads, queries, keys]` of every attention block,
    /// encoder blocks first.
    pub attention: Vec<Var>,
}

#[derive(Clone, Debug)]
pub struct Model<T> {
    config: ModelConfig,
    params: ParamStore<T>,
    pe_query: Option<Tensor<T>>,
    pe_map: Option<Tensor<T>>,
}

/// Parameter lookup on one graph.
struct Bound<'a, T> {
    store: &'a ParamStore<T>,
    vars: &'a [Var],
}

impl<T: Scalar> Bound<'_, T> {
    fn get(&self, name: &str) -> Var {
        let slot = self
            .store
            .slot(name)
            .unwrap_or_else(|| panic!("parameter {name} missing from layout"));
        self.vars[slot]
    }
}

fn check_backbone(cfg: &ModelConfig) -> Result<()> {
    cfg.validate()?;
    match cfg.backbone {
        Backbone::Pillar => Ok(()),
        Backbone::VoxelStub => Err(RegressorError::VoxelStub),
    }
}

impl<T: Scalar> Model<T> {
    /// Fresh weights drawn from `config.init_seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        check_backbone(&config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut params = ParamStore::new();
        for spec in layout(&config) {
            let t = match spec.init {
                Init::Fan(gain) => {
                    let std = gain / (spec.shape[0] as f64).sqrt();
                    let normal = Normal::new(0.0, std).expect("valid std");
                    Tensor::from_fn(spec.shape, |_| T::from_f64_lossy(normal.sample(&mut rng)))
                }
                Init::Zeros => Tensor::zeros(spec.shape),
                Init::Ones => Tensor::full(spec.shape, T::one()),
                Init::Const(v) => Tensor::full(spec.shape, T::from_f64_lossy(v)),
                Init::LearnedPe => {
                    positional_encoding(PeKind::Learned, spec.shape[0], spec.shape[1], &mut rng)?
                }
            };
            params.insert(spec.name, t);
        }
        Self::from_params(config, params)
    }

    /// Wraps existing weights after checking names and shapes against `config`.
    pub fn from_params(config: ModelConfig, params: ParamStore<T>) -> Result<Self> {
        check_backbone(&config)?;
        let specs = layout(&config);
        if specs.len() != params.len() {
            return Err(RegressorError::CheckpointMismatch(format!(
                "expected {} tensors, found {}",
                specs.len(),
                params.len()
            )));
        }
        for (slot, spec) in specs.iter().enumerate() {
            let (name, t) = (params.name(slot), params.tensor(slot));
            if name != spec.name || t.shape() != spec.shape.as_slice() {
                return Err(RegressorError::CheckpointMismatch(format!(
                    "slot {slot}: expected {} {:?}, found {name} {:?}",
                    spec.name,
                    spec.shape,
                    t.shape()
                )));
            }
        }
        let (pe_query, pe_map) = if config.positional_encoding == PeKind::Sinusoidal {
            let mut unused = ChaCha8Rng::seed_from_u64(0);
            (
                Some(positional_encoding(PeKind::Sinusoidal, config.query_count(), config.embed_dim, &mut unused)?),
                Some(positional_encoding(PeKind::Sinusoidal, config.cell_count(), config.embed_dim, &mut unused)?),
            )
        } else {
            (None, None)
        };
        Ok(Self {
            config,
            params,
            pe_query,
            pe_map,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn into_params(self) -> ParamStore<T> {
        self.params
    }

    /// Same architecture with weights converted to another precision.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model::from_params(self.config.clone(), self.params.cast()).expect("cast keeps the layout")
    }

    /// Builds the forward graph with `vars` bound to this model's
    /// parameters in slot order (see [`ParamStore::bind`]).
    pub fn forward(&self, g: &mut Graph<T>, vars: &[Var], input: &ModelInput<T>) -> Result<Forward> {
        let cfg = &self.config;
        let (h, w, c, p) = (cfg.grid_height(), cfg.grid_width(), cfg.pillar_channels, cfg.patch_size);
        if input.features.shape() != [h * w, RAW_FEATURES] || input.mask.shape() != [h * w, c] {
            return Err(RegressorError::ShapeMismatch(format!(
                "features {:?} / mask {:?} for a {h}x{w} grid with {c} channels",
                input.features.shape(),
                input.mask.shape()
            )));
        }
        if vars.len() != self.params.len() {
            return Err(RegressorError::ShapeMismatch(format!(
                "{} vars for {} parameters",
                vars.len(),
                self.params.len()
            )));
        }
        let b = Bound {
            store: &self.params,
            vars,
        };

        let feats = g.constant(input.features.clone());
        let mask = g.constant(input.mask.clone());
        let x = linear(g, &b, "pillar", feats)?;
        let x = g.relu(x);
        let mut bev = g.mul(x, mask)?;
        for l in 0..BACKBONE_LAYERS {
            let grid = g.reshape(bev, &[h, w, c])?;
            let cols = g.im2col(grid, KERNEL)?;
            let y = linear(g, &b, &format!("conv{l}"), cols)?;
            bev = g.relu(y);
        }

        let mut q = patchify(g, bev, h, w, c, p)?;
        q = linear(g, &b, "embed", q)?;
        let mut mem = linear(g, &b, "map", bev)?;
        match cfg.positional_encoding {
            PeKind::None => {}
            PeKind::Sinusoidal => {
                let pq = g.constant(self.pe_query.clone().expect("sinusoidal table"));
                let pm = g.constant(self.pe_map.clone().expect("sinusoidal table"));
                q = g.add(q, pq)?;
                mem = g.add(mem, pm)?;
            }
            PeKind::Learned => {
                q = g.add(q, b.get("pe.query"))?;
                mem = g.add(mem, b.get("pe.map"))?;
            }
        }

        let mut attention = Vec::new();
        for i in 0..cfg.encoder_layers {
            let pre = format!("enc{i}");
            let n = layer_norm(g, &b, &format!("{pre}.ln1"), q)?;
            let (a, weights) = multi_head_attention(g, &b, &format!("{pre}.attn"), n, n, cfg.heads)?;
            attention.push(weights);
            q = g.add(q, a)?;
            q = feed_forward_residual(g, &b, &pre, q)?;
        }
        for i in 0..cfg.decoder_layers {
            let pre = format!("dec{i}");
            let n = layer_norm(g, &b, &format!("{pre}.ln1"), q)?;
            let kv = layer_norm(g, &b, &format!("{pre}.ln_mem"), mem)?;
            let (a, weights) = multi_head_attention(g, &b, &format!("{pre}.attn"), n, kv, cfg.heads)?;
            attention.push(weights);
            q = g.add(q, a)?;
            q = feed_forward_residual(g, &b, &pre, q)?;
        }

        let mut hdn = layer_norm(g, &b, "head.ln", q)?;
        for j in 0..cfg.head_widths.len() {
            let y = linear(g, &b, &format!("head.{j}"), hdn)?;
            hdn = g.gelu(y);
        }
        let out = linear(g, &b, "head.out", hdn)?;
        let pooled = g.mean_all(out);
        let scaled = g.scale(pooled, T::from_f64_lossy(SCORE_SCALE));
        let score = g.add_scalar(scaled, T::from_f64_lossy(SCORE_PRIOR));
        Ok(Forward { score, attention })
    }

    /// Inference on precomputed inputs.
    pub fn predict_input(&self, input: &ModelInput<T>) -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = self
            .params
            .tensors()
            .iter()
            .map(|t| g.constant(t.clone()))
            .collect();
        let f = self.forward(&mut g, &vars, input)?;
        Ok(g.value(f.score).data()[0].as_f64())
    }

    pub fn predict(&self, points: &[Point]) -> Result<f64> {
        self.predict_input(&ModelInput::from_points(points, &self.config))
    }
}

/// `x · W + b` with parameters `{name}.w`, `{name}.b`.
fn linear<T: Scalar>(g: &mut Graph<T>, b: &Bound<T>, name: &str, x: Var) -> Result<Var> {
    let y = g.matmul(x, b.get(&format!("{name}.w")))?;
    Ok(g.add(y, b.get(&format!("{name}.b")))?)
}

/// Layer norm over the last axis with a learned gain and bias.
fn layer_norm<T: Scalar>(g: &mut Graph<T>, b: &Bound<T>, name: &str, x: Var) -> Result<Var> {
    let axis = g.shape(x).len() - 1;
    let n = g.layer_norm(x, axis, T::from_f64_lossy(LN_EPS))?;
    let n = g.mul(n, b.get(&format!("{name}.g")))?;
    Ok(g.add(n, b.get(&format!("{name}.b")))?)
}

fn feed_forward_residual<T: Scalar>(g: &mut Graph<T>, b: &Bound<T>, prefix: &str, x: Var) -> Result<Var> {
    let n = layer_norm(g, b, &format!("{prefix}.ln2"), x)?;
    let hdn = linear(g, b, &format!("{prefix}.ffn1"), n)?;
    let hdn = g.gelu(hdn);
    let y = linear(g, b, &format!("{prefix}.ffn2"), hdn)?;
    Ok(g.add(x, y)?)
}

/// Scaled dot-product attention of `queries [Nq, D]` over `keys [Nk, D]`.
/// Returns the projected output `[Nq, D]` and the weights `[heads, Nq, Nk]`.
fn multi_head_attention<T: Scalar>(
    g: &mut Graph<T>,
    b: &Bound<T>,
    prefix: &str,
    queries: Var,
    keys: Var,
    heads: usize,
) -> Result<(Var, Var)> {
    let (nq, d) = (g.shape(queries)[0], g.shape(queries)[1]);
    let nk = g.shape(keys)[0];
    let dh = d / heads;
    let q = linear(g, b, &format!("{prefix}.q"), queries)?;
    // 1/√dh applied to the (small) query side rather than the score matrix
    let q = g.scale(q, T::from_f64_lossy(1.0 / (dh as f64).sqrt()));
    let k = g.matmul(keys, b.get(&format!("{prefix}.k.w")))?;
    let v = linear(g, b, &format!("{prefix}.v"), keys)?;
    let q = g.reshape(q, &[nq, heads, dh])?;
    let q = g.permute(q, &[1, 0, 2])?;
    let k = g.reshape(k, &[nk, heads, dh])?;
    let k = g.permute(k, &[1, 2, 0])?;
    let v = g.reshape(v, &[nk, heads, dh])?;
    let v = g.permute(v, &[1, 0, 2])?;
    let scores = g.matmul(q, k)?;
    let weights = g.softmax(scores, 2)?;
    let o = g.matmul(weights, v)?;
    let o = g.permute(o, &[1, 0, 2])?;
    let o = g.reshape(o, &[nq, d])?;
    Ok((linear(g, b, &format!("{prefix}.o"), o)?, weights))
}

/// Token-major `[H·W, C]` map → `[(H/P)·(W/P), P·P·C]` patch rows.
///
/// Patches are numbered row-major over the patch grid; inside a patch the
/// flattened order is `(dy, dx, c)`.
pub fn patchify<T: Scalar>(g: &mut Graph<T>, map: Var, h: usize, w: usize, c: usize, p: usize) -> Result<Var> {
    if p == 0 || h % p != 0 || w % p != 0 {
        return Err(RegressorError::NotDivisible {
            height: h,
            width: w,
            patch: p,
        });
    }
    let x = g.reshape(map, &[h / p, p, w / p, p, c])?;
    let x = g.permute(x, &[0, 2, 1, 3, 4])?;
    Ok(g.reshape(x, &[(h / p) * (w / p), p * p * c])?)
}
