use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use sigret_bench::corpus;
use sigret_core::dwt::dwt2_forward;
use sigret_core::{
    query, CurveletConfig, CurveletPlan, FeatureDb, FeatureExtractor, FeatureRecord, TransformSpec,
    Wavelet,
};

fn transforms(c: &mut Criterion) {
    let img = corpus(2, 1).remove(0);
    let raster = img.as_raster().clone();

    c.bench_function("dwt_forward_db4_l3_256", |b| {
        b.iter(|| dwt2_forward(black_box(&raster), 3, Wavelet::Db4).unwrap())
    });

    let plan = CurveletPlan::new(256, CurveletConfig::new(5, 16)).unwrap();
    c.bench_function("curvelet_forward_j5_256", |b| {
        b.iter(|| plan.forward(black_box(&raster)).unwrap())
    });
    let coeffs = plan.forward(&raster).unwrap();
    c.bench_function("curvelet_inverse_j5_256", |b| {
        b.iter(|| plan.inverse(black_box(&coeffs)).unwrap())
    });
}

fn features(c: &mut Criterion) {
    let img = corpus(2, 1).remove(0);
    for spec in [
        TransformSpec::Dwt {
            levels: 3,
            wavelet: Wavelet::Db4,
        },
        TransformSpec::Curvelet(CurveletConfig::new(5, 16)),
    ] {
        let extractor = FeatureExtractor::new(spec, 256).unwrap();
        c.bench_function(&format!("extract_{}", spec.name()), |b| {
            b.iter(|| extractor.extract(black_box(&img)).unwrap())
        });
    }
}

fn retrieval(c: &mut Criterion) {
    let images = corpus(16, 12);
    let extractor =
        FeatureExtractor::new(TransformSpec::Curvelet(CurveletConfig::new(5, 16)), 256).unwrap();
    let records: Vec<FeatureRecord> = extractor
        .extract_batch(&images)
        .into_iter()
        .enumerate()
        .map(|(i, v)| FeatureRecord {
            id: format!("r{i:03}"),
            writer: format!("w{:02}", i / 12),
            source: "synthetic".into(),
            vector: v.unwrap(),
        })
        .collect();
    let probe = records[0].vector.clone();
    let db = FeatureDb::new(extractor.layout(), records).unwrap();
    c.bench_function("query_192_curvelet", |b| {
        b.iter(|| query(black_box(&db), black_box(&probe), 12).unwrap())
    });
    c.bench_function("db_without_192", |b| {
        b.iter(|| db.without(black_box("r100")))
    });
}

criterion_group!(benches, transforms, features, retrieval);
criterion_main!(benches);
