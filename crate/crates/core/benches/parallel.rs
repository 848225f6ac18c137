use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ifsnn::events::EventFrame;
use ifsnn::neuron::{NeuronModelKind, NeuronParams};
use ifsnn::pipeline::{
    convolve, init_weights, step_layer, Architecture, LayerState, Network, NetworkConfig, StdpConfig, WeightInit,
};
use ifsnn::Exec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIDE: usize = 34;

fn config(model: NeuronModelKind) -> NetworkConfig {
    NetworkConfig {
        model,
        neuron: NeuronParams::default(),
        stdp: StdpConfig::default(),
        lambda: 0.85,
        architecture: Architecture {
            populations: 16,
            kernel_size: 5,
        },
        init: WeightInit::default(),
        input: (1, SIDE, SIDE),
    }
}

fn frames(n: usize, density: f64, seed: u64) -> Vec<EventFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|t| {
            let mut f = EventFrame::empty(1, SIDE, SIDE, t, 1.0);
            for y in 0..SIDE {
                for x in 0..SIDE {
                    if rng.random_bool(density) {
                        f.set(0, y, x);
                    }
                }
            }
            f
        })
        .collect()
}

fn bench_convolve(c: &mut Criterion) {
    let cfg = config(NeuronModelKind::Lif);
    let kernel = init_weights(cfg.kernel_shape(), cfg.init, 0.0, 1.0, 1).unwrap();
    let frame = frames(1, 0.05, 2).remove(0);
    let mut group = c.benchmark_group("convolve");
    for &exec in Exec::available() {
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| convolve(&frame, &kernel, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_step_layer(c: &mut Criterion) {
    let cfg = config(NeuronModelKind::Qif);
    let kernel = init_weights(cfg.kernel_shape(), cfg.init, 0.0, 1.0, 1).unwrap();
    let input = frames(50, 0.05, 3);
    let (h, w) = cfg.output_dims();
    let mut group = c.benchmark_group("step_layer");
    for &exec in Exec::available() {
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| {
                let mut layer = LayerState::new(16, h, w, &cfg.neuron, 1.0);
                for (t, f) in input.iter().enumerate() {
                    step_layer(f, &kernel, &mut layer, cfg.model, &cfg.neuron, t as u64, exec).unwrap();
                }
                layer
            })
        });
    }
    group.finish();
}

fn bench_train_sample(c: &mut Criterion) {
    let cfg = config(NeuronModelKind::Lif);
    let input = frames(90, 0.03, 4);
    let mut group = c.benchmark_group("train_sample");
    group.sample_size(20);
    for &exec in Exec::available() {
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter_batched(
                || Network::new(cfg.clone(), 5).unwrap().with_exec(exec),
                |mut net| net.train_sample(&input).unwrap(),
                criterion::BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, bench_convolve, bench_step_layer, bench_train_sample);
criterion_main!(benches);
