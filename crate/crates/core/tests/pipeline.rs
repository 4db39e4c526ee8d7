use std::fs;
use std::path::PathBuf;

use sigret_core::eval::{self, CutSummary, EvalReport, Protocol};
use sigret_core::image_io::{load_image, ImageError};
use sigret_core::store::{decode_db, encode_db, StoreError};
use sigret_core::synth::{generate_corpus, read_manifest, write_corpus, MANIFEST_NAME};
use sigret_core::{
    load_db, preprocess, query, save_db, CurveletConfig, FeatureDb, FeatureExtractor,
    FeatureRecord, SynthSpec, TransformSpec, Wavelet,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn report(name: &str, cuts: &[(usize, f64, f64)]) -> EvalReport {
    EvalReport {
        transform: name.into(),
        protocol: Protocol {
            cuts: cuts.iter().map(|c| c.0).collect(),
            ..Protocol::default()
        },
        cuts: cuts
            .iter()
            .map(|&(k, precision, recall)| CutSummary {
                k,
                precision,
                recall,
            })
            .collect(),
        rows: vec![],
    }
}

fn index(
    spec: TransformSpec,
    side: usize,
    corpus: &[sigret_core::synth::SynthSample],
) -> FeatureDb {
    let extractor = FeatureExtractor::new(spec, side).unwrap();
    let images: Vec<_> = corpus.iter().map(|s| s.image.clone()).collect();
    let records = corpus
        .iter()
        .zip(extractor.extract_batch(&images))
        .map(|(s, v)| FeatureRecord {
            id: s.id(),
            writer: s.writer.clone(),
            source: "synthetic".into(),
            vector: v.unwrap(),
        })
        .collect();
    FeatureDb::new(extractor.layout(), records).unwrap()
}

#[test]
fn tiny_pgm_normalizes_by_maxval() {
    let img = load_image(fixture("tiny.pgm")).unwrap();
    assert_eq!((img.width(), img.height()), (2, 2));
    assert_eq!(img.pixels(), &[0.0, 0.2, 0.4, 1.0]);
}

#[test]
fn missing_and_unknown_files() {
    assert!(matches!(
        load_image(fixture("nope.pgm")),
        Err(ImageError::FileNotFound(_))
    ));
    assert!(matches!(
        load_image(fixture("comparison.csv")),
        Err(ImageError::UnsupportedFormat(_))
    ));
}

#[test]
fn golden_sigdb_round_trips_byte_for_byte() {
    let bytes = fs::read(fixture("two_records.sigdb")).unwrap();
    let db = decode_db(bytes.as_slice()).unwrap();
    assert_eq!(db.len(), 2);
    assert_eq!(
        db.layout().transform,
        TransformSpec::Dwt {
            levels: 1,
            wavelet: Wavelet::Haar
        }
    );
    assert_eq!(
        db.get("w02/01").unwrap().vector.energies(),
        &[1.5, 2.5, 3.5, 4.5]
    );
    assert_eq!(encode_db(&db).unwrap(), bytes);

    let probe = db.get("w01/01").unwrap().vector.clone();
    let ranked = query(&db, &probe, 5).unwrap();
    assert_eq!(ranked.len(), 2);
    assert_eq!(ranked.entries[0].id, "w01/01");
    assert_eq!(ranked.entries[0].distance, 0.0);
}

#[test]
fn tampered_sigdb_is_rejected() {
    let text = fs::read_to_string(fixture("two_records.sigdb")).unwrap();
    let bumped = text.replacen("\"version\":1", "\"version\":2", 1);
    assert!(matches!(
        decode_db(bumped.as_bytes()),
        Err(StoreError::VersionMismatch { found: 2 })
    ));
    let short = text.replacen(",0.25]", "]", 1);
    assert!(matches!(
        decode_db(short.as_bytes()),
        Err(StoreError::DimensionMismatch { line: 2, .. })
    ));
    let truncated: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
    assert!(decode_db(truncated.as_bytes()).is_err());
}

#[test]
fn golden_comparison_csv() {
    let a = report(
        "a",
        &[
            (1, 100.0, 100.0 / 12.0),
            (2, 75.0, 12.5),
            (5, 160.0 / 3.0, 200.0 / 9.0),
        ],
    );
    let b = report(
        "b",
        &[
            (1, 100.0, 100.0 / 12.0),
            (2, 100.0, 100.0 / 6.0),
            (5, 260.0 / 3.0, 1300.0 / 36.0),
        ],
    );
    let expected = fs::read_to_string(fixture("comparison.csv")).unwrap();
    assert_eq!(eval::comparison_csv(&a, &b).unwrap(), expected);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cmp.csv");
    eval::emit_comparison(&a, &b, &path).unwrap();
    assert_eq!(fs::read_to_string(path).unwrap(), expected);

    let other = report("c", &[(1, 1.0, 1.0)]);
    assert!(eval::comparison_csv(&a, &other).is_err());
}

#[test]
fn corpus_on_disk_indexes_like_in_memory() {
    let mut spec = SynthSpec::new(3, 3, 11);
    spec.side = 64;
    let corpus = generate_corpus(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let entries = write_corpus(&corpus, dir.path()).unwrap();
    assert_eq!(entries.len(), 9);

    let manifest = read_manifest(dir.path().join(MANIFEST_NAME)).unwrap();
    let tspec = TransformSpec::Dwt {
        levels: 2,
        wavelet: Wavelet::Db2,
    };
    let extractor = FeatureExtractor::new(tspec, 64).unwrap();
    let in_memory = index(tspec, 64, &corpus);
    for (path, entry) in manifest {
        let img = preprocess(&load_image(&path).unwrap(), 64);
        let v = extractor.extract(&img).unwrap();
        let stored = in_memory
            .get(&format!("{}/{}", entry.writer, entry.sample))
            .unwrap();
        // 8-bit quantization on disk
        let d = sigret_core::canberra(&v.values, &stored.vector.values).unwrap();
        assert!(d < 0.5, "{path:?}: {d}");
    }
}

#[test]
fn small_curvelet_pipeline_end_to_end() {
    let mut spec = SynthSpec::new(4, 4, 3);
    spec.side = 64;
    let corpus = generate_corpus(&spec).unwrap();
    let db = index(
        TransformSpec::Curvelet(CurveletConfig::for_side(64)),
        64,
        &corpus,
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.sigdb");
    save_db(&db, &path).unwrap();
    let loaded = load_db(&path).unwrap();
    assert_eq!(loaded, db);

    let protocol = Protocol {
        cuts: vec![1, 2, 4],
        ..Protocol::default()
    };
    let report = eval::run_benchmark(&loaded, &protocol).unwrap();
    assert_eq!(report.at(1).unwrap().precision, 100.0);
    assert_eq!(report.at(1).unwrap().recall, 25.0);
    assert_eq!(report.rows.len(), 4 * 3);

    let left_out = eval::run_benchmark(
        &loaded,
        &Protocol {
            query_in_db: false,
            ..protocol
        },
    )
    .unwrap();
    assert!(left_out.rows.iter().all(|r| r.total_relevant == 3));
}
