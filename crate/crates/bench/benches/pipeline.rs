use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use rxnseq::augment::{
    augment_sample, compose_vertical, sample_rng, transform, AugmentConfig, ImageStore,
};
use rxnseq::decoder::replay_oracle;
use rxnseq::{
    decode_tokens, encode, evaluate, greedy_decode, DecodeConfig, MatchConfig, MatchMode,
    OrderingPolicy,
};
use rxnseq_bench::{image_pool, Fixture};

fn codec(c: &mut Criterion) {
    let fx = Fixture::new(256, 1);
    let mut g = c.benchmark_group("codec");
    g.throughput(Throughput::Elements(fx.dataset.len() as u64));
    g.bench_function("encode", |b| {
        b.iter(|| {
            for r in &fx.dataset.records {
                black_box(encode(r, &fx.vocab, OrderingPolicy::Reading).unwrap());
            }
        })
    });
    g.bench_function("decode_tokens", |b| {
        b.iter(|| {
            for s in &fx.sequences {
                black_box(decode_tokens(s, &fx.vocab));
            }
        })
    });
    g.finish();
}

fn decoding(c: &mut Criterion) {
    let fx = Fixture::new(32, 2);
    let cfg = DecodeConfig {
        vocab: fx.vocab,
        ..DecodeConfig::default()
    };
    let mut g = c.benchmark_group("decoder");
    g.throughput(Throughput::Elements(fx.sequences.len() as u64));
    g.bench_function("greedy_replay", |b| {
        b.iter(|| {
            for s in &fx.sequences {
                let mut src = replay_oracle(&s.tokens, &fx.vocab, 0.0, 0).unwrap();
                black_box(greedy_decode(&mut src, &cfg, s.width, s.height).unwrap());
            }
        })
    });
    g.finish();
}

fn metrics(c: &mut Criterion) {
    let fx = Fixture::new(512, 3);
    let cfg = MatchConfig::default();
    let mut g = c.benchmark_group("metrics");
    g.throughput(Throughput::Elements(fx.dataset.len() as u64));
    for mode in [MatchMode::Hard, MatchMode::Soft] {
        g.bench_function(format!("evaluate_{mode}"), |b| {
            b.iter(|| black_box(evaluate(&fx.dataset, &fx.predictions, mode, &cfg).unwrap()))
        });
    }
    g.finish();
}

fn augmentation(c: &mut Criterion) {
    let (pool, images) = image_pool(8, 4);
    let config = AugmentConfig {
        target_size: 512,
        ..AugmentConfig::default()
    };
    let first = &pool.records[0];
    let first_img = images.load(first).unwrap();
    let pair: Vec<_> = pool.records[..2]
        .iter()
        .map(|r| (images.load(r).unwrap(), r.clone()))
        .collect();

    let mut g = c.benchmark_group("augment");
    g.sample_size(20);
    g.bench_function("transform", |b| {
        let mut i = 0;
        b.iter_batched(
            || {
                i += 1;
                sample_rng(0, i)
            },
            |mut rng| black_box(transform(&first_img, first, &config, &mut rng).unwrap()),
            BatchSize::SmallInput,
        )
    });
    g.bench_function("compose_pair", |b| {
        let mut rng = sample_rng(1, 0);
        b.iter(|| black_box(compose_vertical(&pair, config.pad_color, &mut rng).unwrap()))
    });
    g.bench_function("sample", |b| {
        let mut i = 0;
        b.iter(|| {
            i += 1;
            black_box(augment_sample(&pool, &images, &config, &mut sample_rng(2, i)).unwrap())
        })
    });
    g.finish();
}

criterion_group!(benches, codec, decoding, metrics, augmentation);
criterion_main!(benches);
