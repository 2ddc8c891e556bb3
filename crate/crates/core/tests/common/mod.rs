#![allow(dead_code)]

pub mod laws;

use gaitrisk::model::{backbone_forward, head_forward, ModelConfig, ModelParameters, ParamVars};
use gaitrisk::numerics::{grad_check_many, Graph, Tensor, Var};
use gaitrisk::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRAD_EPS: f64 = 1e-6;
pub const GRAD_TOLERANCE: f64 = 1e-4;

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// `Σ (y + r)²` with a fixed random offset `r`: a scalar whose gradient
/// reaches every element of `y` with a distinct weight.
pub fn project(g: &mut Graph<f64>, y: Var, salt: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ salt);
    let r = random_tensor(g.shape(y), &mut rng);
    let r = g.leaf(r, false);
    let s = g.add(y, r)?;
    let s = g.square(s);
    Ok(g.sum(s))
}

fn check(inputs: Vec<Tensor<f64>>, probes: usize, f: impl Fn(&mut Graph<f64>, &[Var]) -> Result<Var>) -> f64 {
    grad_check_many(f, &inputs, GRAD_EPS, probes).expect("gradient check runs")
}

/// Worst relative error of every differentiable op, plus the whole tiny model.
pub fn gradient_suite() -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut out = Vec::new();
    let mut rt = |s: &[usize]| random_tensor(s, &mut rng);

    out.push((
        "conv3d (lowered)",
        check(
            vec![rt(&[2, 5, 8, 6]), rt(&[3, 2, 3, 3, 3]), rt(&[3])],
            usize::MAX,
            |g, v| {
                let y = g.conv3d(v[0], v[1], v[2], None)?;
                project(g, y, 1)
            },
        ),
    ));
    out.push((
        "conv3d (banded)",
        check(
            vec![rt(&[2, 4, 8, 5]), rt(&[2, 2, 3, 3, 3]), rt(&[2])],
            usize::MAX,
            |g, v| {
                let y = g.conv3d(v[0], v[1], v[2], Some(2))?;
                project(g, y, 2)
            },
        ),
    ));
    out.push((
        "conv3d (per-band weights)",
        check(
            vec![rt(&[1, 3, 8, 5]), rt(&[4, 2, 1, 3, 3, 3]), rt(&[4, 2])],
            usize::MAX,
            |g, v| {
                let y = g.conv3d(v[0], v[1], v[2], Some(2))?;
                project(g, y, 3)
            },
        ),
    ));
    out.push((
        "conv3d (direct)",
        check(vec![rt(&[1, 4, 8, 32]), rt(&[2, 1, 3, 3, 3]), rt(&[2])], 400, |g, v| {
            let y = g.conv3d(v[0], v[1], v[2], Some(4))?;
            project(g, y, 4)
        }),
    ));
    out.push((
        "leaky_relu",
        check(vec![rt(&[3, 7])], usize::MAX, |g, v| {
            let y = g.leaky_relu(v[0], 0.1);
            project(g, y, 5)
        }),
    ));
    out.push((
        "add",
        check(vec![rt(&[2, 3]), rt(&[2, 3])], usize::MAX, |g, v| {
            let y = g.add(v[0], v[1])?;
            project(g, y, 6)
        }),
    ));
    out.push((
        "square+sum",
        check(vec![rt(&[5])], usize::MAX, |g, v| {
            let y = g.square(v[0]);
            Ok(g.sum(y))
        }),
    ));
    out.push((
        "temporal_compress",
        check(vec![rt(&[2, 6, 3, 2]), rt(&[3])], usize::MAX, |g, v| {
            let y = g.temporal_compress(v[0], v[1])?;
            project(g, y, 7)
        }),
    ));
    out.push((
        "max_pool2",
        check(vec![rt(&[2, 2, 4, 6])], usize::MAX, |g, v| {
            let y = g.max_pool2(v[0])?;
            project(g, y, 8)
        }),
    ));
    out.push((
        "spatial_max",
        check(vec![rt(&[3, 2, 4, 3])], usize::MAX, |g, v| {
            let y = g.spatial_max(v[0])?;
            project(g, y, 9)
        }),
    ));
    out.push((
        "linear (vector)",
        check(vec![rt(&[4]), rt(&[2, 4]), rt(&[2])], usize::MAX, |g, v| {
            let y = g.linear(v[0], v[1], v[2])?;
            project(g, y, 10)
        }),
    ));
    out.push((
        "linear (batch)",
        check(vec![rt(&[3, 4]), rt(&[2, 4]), rt(&[2])], usize::MAX, |g, v| {
            let y = g.linear(v[0], v[1], v[2])?;
            project(g, y, 11)
        }),
    ));
    out.push((
        "cross_entropy",
        check(vec![rt(&[4, 2])], usize::MAX, |g, v| {
            g.cross_entropy(v[0], &[0, 1, 1, 0])
        }),
    ));
    out.push((
        "triplet_batch_all",
        check(vec![rt(&[6, 3])], usize::MAX, |g, v| {
            g.triplet_batch_all(v[0], &[0, 0, 1, 1, 2, 2], 0.5)
        }),
    ));
    out.push(("tiny model end to end", tiny_model_error(&mut rng)));
    out
}

/// Cross-entropy of the tiny model on one random clip, differentiated with
/// respect to every parameter and the clip itself.
fn tiny_model_error(rng: &mut ChaCha8Rng) -> f64 {
    let cfg = ModelConfig::tiny();
    let params = ModelParameters::<f64>::init(&cfg, 5).unwrap();
    let names = params.names().to_vec();
    let mut inputs: Vec<Tensor<f64>> = params.tensors().to_vec();
    inputs.push(Tensor::from_fn(&[1, cfg.clip_len, cfg.height, cfg.width], |_| {
        rng.gen_range(0.0..1.0)
    }));
    check(inputs, 64, |g, v| {
        let (clip, ps) = v.split_last().unwrap();
        let vars = ParamVars::from_vars(&cfg, &names, ps.to_vec());
        let trace = backbone_forward(g, &cfg, &vars, *clip)?;
        let logits = head_forward(g, &vars, trace.embedding)?;
        g.cross_entropy(logits, &[0])
    })
}

/// A short-sequence corpus for training tests.
pub fn small_dataset(n_subjects: usize, seed: u64) -> gaitrisk::data::Dataset {
    gaitrisk::synth::generate_in_memory(&gaitrisk::synth::GeneratorConfig {
        n_subjects,
        seed,
        min_frames: 40,
        max_frames: 80,
        ..Default::default()
    })
    .unwrap()
}

/// Narrow model on the full clip geometry with a small PK batch.
pub fn desk_model_and_training(steps: u64, seed: u64) -> (ModelConfig, gaitrisk::train::TrainConfig) {
    let model = ModelConfig::with_channels([2, 4, 8]);
    let training = gaitrisk::train::TrainConfig {
        steps,
        decay_step: steps.saturating_sub(1).max(1) * 4 / 5,
        lr: 1e-3,
        subjects_per_batch: 4,
        sequences_per_subject: 2,
        seed,
        checkpoint_every: 0,
        ..Default::default()
    };
    (model, training)
}

pub fn single_threaded<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}
