//! Command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::augment::Augmenter;
use crate::checkpoint::Checkpoint;
use crate::config::TrainerConfig;
use crate::context::SearchContext;
use crate::corpus::{ingest_corpus, load_qrels, load_queries, CorpusIndex, Query, QrelTable};
use crate::encoder::HashEncoder;
use crate::policy::{exhaustive_best, initial_u_ranking, load_logged, sliding_window_rank, LoggedData};
use crate::qnet::QParams;
use crate::replay::FeedbackPool;
use crate::service::{self, AppState, Engine};
use crate::state::State;
use crate::synth::{self, SynthParams};
use crate::trainer::{evaluate, kfold_split, pretrain_user, traces_to_jsonl, train, Dataset, EvalMode, Model};
use crate::user_model::UserModel;

pub const MODEL_FILE: &str = "model.ckpt";
pub const TRACES_FILE: &str = "traces.jsonl";
pub const POOL_FILE: &str = "pool.jsonl";

#[derive(Debug, Parser)]
#[command(name = "dqrank", version, about = "Interactive search with slate Q-learning and sentence feedback")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a corpus and write its normalized JSONL form.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the seeded synthetic dataset.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        topics: usize,
        #[arg(long, default_value_t = 30)]
        docs_per_topic: usize,
        #[arg(long, default_value_t = 8)]
        queries_per_topic: usize,
    },
    /// Pretrain the user simulation model and write a U-only checkpoint.
    PretrainU {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Offline training; writes model.ckpt, traces.jsonl and pool.jsonl.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate one ranking mode and print the metric report as JSON.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        /// bm25 | u_only | dqrank
        #[arg(long, default_value = "dqrank")]
        mode: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Run the HTTP session service.
    Serve {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Without a checkpoint the service answers 503 on session routes.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Feedback pool file, loaded if present and rewritten on updates.
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = 1800)]
        ttl_secs: u64,
    },
    /// Time the sliding-window ranker on a random value network; prints CSV.
    BenchWindow {
        #[arg(long)]
        g: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 256)]
        dim: usize,
        #[arg(long, default_value_t = 128)]
        hidden: usize,
        /// Number of random networks to rank with.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
    },
    /// Train and evaluate on k query folds; one JSON line per fold.
    Kfold {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Also write each fold's artifacts under this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Input files. `--data DIR` fills any path not given explicitly with the
/// synthetic dataset's file names.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Directory written by `synth`
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Corpus JSONL
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Queries TSV
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// TREC qrels TSV
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// Logged slates JSONL
    #[arg(long)]
    pub logged: Option<PathBuf>,
    /// Synonym lexicon TSV
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Trainer configuration JSON; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl RunArgs {
    pub fn config(&self) -> Result<TrainerConfig> {
        let mut c = match &self.config {
            Some(p) => TrainerConfig::load(p)?,
            None => TrainerConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c.validate()?;
        Ok(c)
    }
}

impl DataArgs {
    fn path(&self, explicit: &Option<PathBuf>, file: &str) -> Option<PathBuf> {
        explicit
            .clone()
            .or_else(|| self.data.as_ref().map(|d| d.join(file)).filter(|p| p.exists()))
    }

    fn required(&self, explicit: &Option<PathBuf>, file: &str, flag: &str) -> Result<PathBuf> {
        self.path(explicit, file)
            .with_context(|| format!("missing --{flag} (or --data with {file})"))
    }

    pub fn context(&self, config: &TrainerConfig) -> Result<SearchContext> {
        let path = self.required(&self.corpus, synth::CORPUS_FILE, "corpus")?;
        let index = ingest_corpus(&path)?;
        Ok(SearchContext::new(Arc::new(index), HashEncoder::new(config.dim)?))
    }

    pub fn queries(&self) -> Result<Vec<Query>> {
        Ok(load_queries(&self.required(&self.queries, synth::QUERIES_FILE, "queries")?)?)
    }

    pub fn qrels(&self) -> Result<QrelTable> {
        Ok(load_qrels(&self.required(&self.qrels, synth::QRELS_FILE, "qrels")?)?)
    }

    pub fn dataset(&self, index: &CorpusIndex) -> Result<Dataset> {
        let logged = match self.path(&self.logged, synth::LOGGED_FILE) {
            Some(p) => load_logged(&p, index)?,
            None => LoggedData::new(),
        };
        let augmenter = match self.path(&self.lexicon, synth::LEXICON_FILE) {
            Some(lex) => Augmenter::load(&lex, self.path(&self.stopwords, synth::STOPWORDS_FILE).as_deref())?,
            None => Augmenter::default(),
        };
        Ok(Dataset {
            queries: self.queries()?,
            qrels: self.qrels()?,
            logged,
            augmenter,
        })
    }
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn load_model(path: &Path, ctx: &SearchContext) -> Result<Model> {
    Ok(Model::from_checkpoint(Checkpoint::load(path)?, ctx.encoder())?)
}

fn load_pool(path: Option<&Path>) -> Result<FeedbackPool> {
    match path {
        Some(p) if p.exists() => Ok(FeedbackPool::load(p)?),
        _ => Ok(FeedbackPool::new()),
    }
}

/// Runs a parsed command and returns what it prints on stdout.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Ingest { corpus, out } => {
            let index = ingest_corpus(&corpus)?;
            write(&out, index.to_jsonl())?;
            Ok(format!("{}\n", json!({ "documents": index.len() })))
        }
        Command::Synth {
            seed,
            out,
            topics,
            docs_per_topic,
            queries_per_topic,
        } => {
            let d = synth::generate(SynthParams {
                seed,
                topics,
                docs_per_topic,
                queries_per_topic,
                ..SynthParams::default()
            })?;
            d.write(&out)?;
            Ok(format!(
                "{}\n",
                json!({ "documents": d.documents.len(), "queries": d.queries.len() })
            ))
        }
        Command::PretrainU { data, run, out } => {
            let config = run.config()?;
            let ctx = data.context(&config)?;
            let dataset = data.dataset(ctx.index())?;
            let mut user = Model::init(&config).user;
            let report = pretrain_user(&config, &ctx, &dataset, &dataset.queries, &mut user)?;
            Checkpoint::from_models(ctx.encoder(), &user, None).save(&out)?;
            Ok(format!("{}\n", serde_json::to_string(&report)?))
        }
        Command::Train { data, run, out } => {
            let config = run.config()?;
            let ctx = data.context(&config)?;
            let dataset = data.dataset(ctx.index())?;
            let summary = train_to_dir(&config, &ctx, &dataset, &dataset.queries, &out)?;
            Ok(format!("{summary}\n"))
        }
        Command::Eval {
            data,
            run,
            mode,
            checkpoint,
            pool,
        } => {
            let config = run.config()?;
            let mode: EvalMode = mode.parse().context("--mode")?;
            let ctx = data.context(&config)?;
            let model = match (&checkpoint, mode) {
                (Some(p), _) => Some(load_model(p, &ctx)?),
                (None, EvalMode::Bm25) => None,
                (None, _) => bail!("--checkpoint is required for this mode"),
            };
            let pool = load_pool(pool.as_deref())?;
            let report = evaluate(
                &config,
                &ctx,
                model.as_ref(),
                Some(&pool),
                &data.queries()?,
                &data.qrels()?,
                mode,
            )?;
            Ok(format!("{}\n", serde_json::to_string(&report)?))
        }
        Command::Serve {
            data,
            run,
            checkpoint,
            pool,
            host,
            port,
            ttl_secs,
        } => {
            let config = run.config()?;
            let ctx = data.context(&config)?;
            let known = data.path(&data.queries, synth::QUERIES_FILE).map(|p| load_queries(&p)).transpose()?;
            let engine = match checkpoint {
                Some(p) => {
                    let model = load_model(&p, &ctx)?;
                    let mut e = Engine::new(ctx, model, config, known.as_deref().unwrap_or_default());
                    if let (Some(q), Some(r)) = (known, data.path(&data.qrels, synth::QRELS_FILE)) {
                        e.eval = Some((q, load_qrels(&r)?));
                    }
                    Some(e)
                }
                None => None,
            };
            let state = AppState::new(engine, load_pool(pool.as_deref())?, pool, Duration::from_secs(ttl_secs));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .with_context(|| format!("binding {host}:{port}"))?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                service::serve(listener, state, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
                Ok::<_, anyhow::Error>(())
            })?;
            Ok(String::new())
        }
        Command::BenchWindow {
            g,
            m,
            seed,
            dim,
            hidden,
            repeats,
        } => bench_window(g, m, seed, dim, hidden, repeats),
        Command::Kfold { data, run, k, out } => {
            let config = run.config()?;
            let ctx = data.context(&config)?;
            let dataset = data.dataset(ctx.index())?;
            let mut lines = String::new();
            for (f, (train_q, test_q)) in kfold_split(&dataset.queries, k, config.seed)?.into_iter().enumerate() {
                let line = run_fold(&config, &ctx, &dataset, &train_q, &test_q, out.as_ref().map(|o| o.join(format!("fold{f}"))))?;
                let mut v = line;
                v["fold"] = json!(f);
                writeln!(lines, "{v}")?;
            }
            Ok(lines)
        }
    }
}

/// Trains on `queries` and writes model, traces and pool into `out`.
pub fn train_to_dir(
    config: &TrainerConfig,
    ctx: &SearchContext,
    data: &Dataset,
    queries: &[Query],
    out: &Path,
) -> Result<serde_json::Value> {
    let t0 = Instant::now();
    let o = train(config, ctx, data, queries)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    o.model.to_checkpoint(ctx.encoder()).save(&out.join(MODEL_FILE))?;
    write(&out.join(TRACES_FILE), traces_to_jsonl(&o.traces)?)?;
    o.pool.save(&out.join(POOL_FILE))?;
    Ok(json!({
        "episodes": o.traces.len(),
        "train_steps": o.train_steps,
        "pool_size": o.pool.len(),
        "pretrain": o.pretrain,
        "seconds": t0.elapsed().as_secs_f64(),
    }))
}

/// Trains on one fold and evaluates its test queries in every mode.
pub fn run_fold(
    config: &TrainerConfig,
    ctx: &SearchContext,
    data: &Dataset,
    train_q: &[Query],
    test_q: &[Query],
    out: Option<PathBuf>,
) -> Result<serde_json::Value> {
    let o = train(config, ctx, data, train_q)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        o.model.to_checkpoint(ctx.encoder()).save(&dir.join(MODEL_FILE))?;
        write(&dir.join(TRACES_FILE), traces_to_jsonl(&o.traces)?)?;
        o.pool.save(&dir.join(POOL_FILE))?;
    }
    let mut v = json!({ "test_queries": test_q.len() });
    for mode in [EvalMode::Bm25, EvalMode::UOnly, EvalMode::Dqrank] {
        let r = evaluate(config, ctx, Some(&o.model), Some(&o.pool), test_q, &data.qrels, mode)?;
        v[serde_json::to_value(mode)?.as_str().unwrap_or_default()] = json!({ "ndcg_at_10": r.ndcg_at_10, "mrr": r.mrr });
    }
    Ok(v)
}

pub const BENCH_HEADER: &str = "G,m,evaluations,q_initial,q_window,q_exhaustive,wall_ms";

/// Ranks a `g`-document slate of the synthetic corpus with freshly seeded
/// networks and reports one CSV row per repeat.
pub fn bench_window(g: usize, m: usize, seed: u64, dim: usize, hidden: usize, repeats: usize) -> Result<String> {
    if g < 2 {
        bail!("--g must be at least 2");
    }
    let data = synth::generate(SynthParams { seed, ..SynthParams::default() })?;
    let ctx = SearchContext::new(Arc::new(data.index()?), HashEncoder::new(dim)?);
    let query = data.queries.first().context("synthetic corpus has no queries")?.clone();
    let pool: Vec<u32> = ctx.index().bm25_retrieve(&query.text, g).into_iter().map(|(d, _)| d).collect();
    if pool.len() < g {
        bail!("--g {g} exceeds the {} documents the benchmark query retrieves", pool.len());
    }
    let user = UserModel::init(dim, seed);
    let prepared = ctx.prepare(&State::new(query));
    let slate = initial_u_ranking(&ctx, &user, &prepared, &pool, g, 10)?;
    let mut out = format!("{BENCH_HEADER}\n");
    for r in 0..repeats.max(1) {
        let params = QParams::init(g, dim, hidden, seed.wrapping_add(r as u64));
        let t0 = Instant::now();
        let w = sliding_window_rank(&ctx, &params, &prepared, &slate, m)?;
        let wall = t0.elapsed().as_secs_f64() * 1e3;
        let exhaustive = if g <= 6 {
            exhaustive_best(&ctx, &params, &prepared, &slate)?.to_string()
        } else {
            String::new()
        };
        writeln!(out, "{g},{m},{},{},{},{exhaustive},{wall:.3}", w.evaluations, w.q_initial, w.q_final)?;
    }
    Ok(out)
}
