#![allow(dead_code)]

use std::sync::Arc;

use dqrank::config::TrainerConfig;
use dqrank::context::SearchContext;
use dqrank::corpus::CorpusIndex;
use dqrank::encoder::HashEncoder;
use dqrank::policy::parse_logged;
use dqrank::synth::{generate, SynthParams, SyntheticData};
use dqrank::trainer::Dataset;

/// Two topics, sixteen queries: big enough to fill slates, small enough to
/// train in a few seconds.
pub fn small_synth(seed: u64) -> SyntheticData {
    generate(SynthParams {
        seed,
        topics: 2,
        ..SynthParams::default()
    })
    .unwrap()
}

pub fn context(index: CorpusIndex, dim: usize) -> SearchContext {
    SearchContext::new(Arc::new(index), HashEncoder::new(dim).unwrap())
}

pub fn dataset(data: &SyntheticData, index: &CorpusIndex) -> Dataset {
    let logged = parse_logged(&dqrank::policy::logged_to_jsonl(&data.logged).unwrap(), index).unwrap();
    Dataset {
        queries: data.queries.clone(),
        qrels: data.qrels.clone(),
        logged,
        augmenter: dqrank::augment::Augmenter::new(
            data.lexicon.clone(),
            dqrank::augment::Stopwords::from_lines(&data.stopwords.join("\n")),
        ),
    }
}

pub fn synth_setup(seed: u64, dim: usize) -> (SyntheticData, SearchContext, Dataset) {
    let data = small_synth(seed);
    let ctx = context(data.index().unwrap(), dim);
    let ds = dataset(&data, ctx.index());
    (data, ctx, ds)
}

/// Shrunk training run for tests that only need a working model.
pub fn quick_config() -> TrainerConfig {
    TrainerConfig {
        episodes: 16,
        steps: 4,
        pretrain_epochs: 10,
        dim: 128,
        hidden: 32,
        ..TrainerConfig::default()
    }
}

/// A briefly trained model behind a service engine, with the synthetic
/// queries known and the qrels configured as the evaluation split.
pub fn quick_engine(seed: u64) -> (dqrank::service::Engine, SyntheticData) {
    let (data, ctx, ds) = synth_setup(seed, 128);
    let config = TrainerConfig { seed, ..quick_config() };
    let out = dqrank::trainer::train(&config, &ctx, &ds, &data.queries).unwrap();
    let mut engine = dqrank::service::Engine::new(ctx, out.model, config, &data.queries);
    engine.eval = Some((data.queries[..4].to_vec(), data.qrels.clone()));
    (engine, data)
}

/// Binds an ephemeral port and serves `state` until the test runtime ends.
pub async fn spawn_service(state: Arc<dqrank::service::AppState>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(dqrank::service::serve(listener, state, std::future::pending()));
    format!("http://{addr}")
}

/// Checks the object has exactly these keys.
pub fn assert_keys(v: &serde_json::Value, keys: &[&str]) {
    let obj = v.as_object().unwrap_or_else(|| panic!("not an object: {v}"));
    let mut got: Vec<&str> = obj.keys().map(String::as_str).collect();
    got.sort_unstable();
    let mut want = keys.to_vec();
    want.sort_unstable();
    assert_eq!(got, want, "keys of {v}");
}

/// Validates a results array: `n` unique documents, each with the normative
/// fields and a selected index inside its sentence list.
pub fn assert_results(v: &serde_json::Value, n: usize) {
    let items = v.as_array().unwrap();
    assert_eq!(items.len(), n);
    let mut ids = std::collections::BTreeSet::new();
    for it in items {
        assert_keys(it, &["doc_id", "score", "selected_idx", "sentences"]);
        assert!(ids.insert(it["doc_id"].as_str().unwrap().to_string()));
        assert!(it["score"].is_f64());
        let k = it["selected_idx"].as_u64().unwrap() as usize;
        let sentences = it["sentences"].as_array().unwrap();
        assert!(k < sentences.len());
        assert!(sentences.iter().all(|s| s.is_string()));
    }
}
