//! Hand-sized fixtures for retrieval, the selection model, the value network
//! and the ranking policy, each checked against a direct computation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dqrank::augment::{Augmenter, Stopwords, SynonymLexicon};
use dqrank::context::{PreparedState, SearchContext};
use dqrank::corpus::{tokenize, CorpusIndex, Document, Query};
use dqrank::encoder::{cosine, hash_gram, HashEncoder, Vector};
use dqrank::metrics::LoggedSlate;
use dqrank::policy::{
    candidate_set, epsilon_greedy, greedy_slate, initial_u_ranking, random_slate, sliding_window_rank, Branch,
    PolicyParams,
};
use dqrank::qnet::{
    ndcg_weights, q_value, q_value_augmented, select_representative, slate_embeddings, td_target, v_score,
    weighted_embed, with_representatives, QNet, QParams, TrainSample,
};
use dqrank::replay::{FeedbackPool, ReplayMemory, Transition};
use dqrank::state::{SlateAction, State};
use dqrank::user_model::{Label, PretrainPair, UserModel};

const DIM: usize = 64;

fn docs() -> Vec<Document> {
    let d = |id: &str, s: &[&str]| Document::from_sentences(id, s.iter().map(|t| t.to_string()).collect());
    vec![
        d("d0", &["solar panels convert sunlight.", "panels need cleaning.", "wind turbines spin."]),
        d("d1", &["battery storage holds energy."]),
        d("d2", &["solar farms cover land.", "panels degrade slowly over time."]),
        d("d3", &["coal plants emit smoke and soot."]),
        d("d4", &["solar panels on solar roofs.", "wind and solar mix well."]),
    ]
}

fn ctx() -> SearchContext {
    SearchContext::new(
        Arc::new(CorpusIndex::from_documents(docs()).unwrap()),
        HashEncoder::new(DIM).unwrap(),
    )
}

fn query() -> Query {
    Query::new("q", "solar panels").unwrap()
}

fn state(feedback: &[&str]) -> State {
    State::with_feedback(query(), feedback.iter().map(|s| s.to_string()).collect())
}

fn sentence(ctx: &SearchContext, doc: u32, i: usize) -> String {
    ctx.doc(doc).sentences[i].text.clone()
}

/// `V` computed from raw texts and the closed-form weights.
fn v_oracle(ctx: &SearchContext, user: &UserModel, s: &State, doc: u32, i: usize) -> f64 {
    let raw: Vec<f64> = (0..=s.e_cur()).map(|e| 1.0 / ((e + 2) as f64).ln()).collect();
    let total: f64 = raw.iter().sum();
    s.left_texts()
        .zip(raw)
        .map(|(f, w)| w / total * user.u_score(ctx.encoder(), f, &sentence(ctx, doc, i)).unwrap())
        .sum()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn bm25_matches_brute_force() {
    let docs = docs();
    let index = CorpusIndex::from_documents(docs.clone()).unwrap();
    let toks: Vec<Vec<String>> = docs
        .iter()
        .map(|d| d.sentences.iter().flat_map(|s| tokenize(&s.text)).collect())
        .collect();
    let n = toks.len() as f64;
    let avg = toks.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let q = "solar panels wind";
    let terms: BTreeSet<String> = tokenize(q).into_iter().collect();
    let mut expected: Vec<(u32, f64)> = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        let mut score = 0.0;
        let mut hit = false;
        for term in &terms {
            let df = toks.iter().filter(|d| d.contains(term)).count() as f64;
            let tf = t.iter().filter(|w| *w == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            hit = true;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            score += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * t.len() as f64 / avg));
        }
        if hit {
            expected.push((i as u32, score));
        }
    }
    expected.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let got = index.bm25_retrieve(q, 10);
    assert_eq!(got.len(), expected.len());
    for (g, e) in got.iter().zip(&expected) {
        assert_eq!(g.0, e.0);
        assert!((g.1 - e.1).abs() < 1e-12, "{g:?} vs {e:?}");
    }
    assert_eq!(index.bm25_retrieve(q, 2), expected[..2]);
    assert!(index.bm25_retrieve("zeppelin", 5).is_empty());
}

#[test]
fn pretraining_separates_a_balanced_fixture() {
    let enc = HashEncoder::new(DIM).unwrap();
    let pos = [
        "solar panels convert light.",
        "panels on the roof.",
        "solar cells and panels.",
        "cheap solar panels.",
        "solar output rises.",
        "panels face south.",
        "solar panels need sun.",
        "new solar panels.",
        "solar roof panels.",
        "panels and solar racks.",
    ];
    let neg = [
        "coal plants emit smoke.",
        "rivers flood in spring.",
        "the market closed early.",
        "bread rises in ovens.",
        "cats chase string.",
        "trains run late today.",
        "glaciers carve valleys.",
        "violins need rosin.",
        "chess openings vary.",
        "tides follow the moon.",
    ];
    let pair = |s: &&str, label| PretrainPair {
        left_text: "solar panels".into(),
        sentence: s.to_string(),
        label,
    };
    let pairs: Vec<PretrainPair> = pos
        .iter()
        .map(|s| pair(s, Label::Selected))
        .chain(neg.iter().map(|s| pair(s, Label::NotSelected)))
        .collect();
    let mut user = UserModel::init(DIM, 3);
    let report = user.pretrain(&enc, &pairs, 50, 0.001, 4, 3).unwrap();
    assert!(report.accuracy >= 0.9, "{report:?}");
    assert!(report.final_loss < report.initial_loss);
    assert_eq!(report.steps, 50 * 5);
}

#[test]
fn rearrangement_loss_fixtures() {
    let ctx = ctx();
    let mut user = UserModel::init(DIM, 11);
    let p = ctx.prepare(&state(&[]));
    let a = SlateAction {
        docs: vec![0, 2],
        reps: vec![0, 0],
    };
    let before = user.clone();
    assert_eq!(user.rearrangement_update(&ctx, &p, &a, &a, 0.01).unwrap(), 0.0);
    assert_eq!(user, before);

    let swapped = SlateAction {
        docs: vec![2, 0],
        reps: vec![0, 0],
    };
    let u0 = user.u_score(ctx.encoder(), "solar panels", &sentence(&ctx, 0, 0)).unwrap();
    let u2 = user.u_score(ctx.encoder(), "solar panels", &sentence(&ctx, 2, 0)).unwrap();
    let (loss, _) = user.rearrangement_gradient(&ctx, &p, &swapped, &a).unwrap();
    assert!((loss - (u2 - u0).powi(2)).abs() < 1e-15);
    assert!(loss > 0.0);

    let mut last = f64::INFINITY;
    for _ in 0..10 {
        let l = user.rearrangement_update(&ctx, &p, &swapped, &a, 0.001).unwrap();
        assert!(l <= last, "{l} > {last}");
        last = l;
    }
}

#[test]
fn value_reductions() {
    let ctx = ctx();
    let user = UserModel::init(DIM, 5);
    let s0 = state(&[]);
    let p0 = ctx.prepare(&s0);
    for d in 0..5u32 {
        let u = user.u_score(ctx.encoder(), "solar panels", &sentence(&ctx, d, 0)).unwrap();
        assert!((v_score(&ctx, &user, &p0, d, 0) - u).abs() < 1e-15);
        let x = weighted_embed(&ctx, &p0, d, 0);
        assert_eq!(x, ctx.encoder().encode_pair("solar panels", &sentence(&ctx, d, 0)));
    }

    let f = "panels need cleaning.";
    let s1 = state(&[f]);
    let p1 = ctx.prepare(&s1);
    let (a, b) = (0.6131, 0.3869);
    assert!((p1.weights[0] - a).abs() < 1e-4 && (p1.weights[1] - b).abs() < 1e-4);
    let text = sentence(&ctx, 2, 1);
    let uq = user.u_score(ctx.encoder(), "solar panels", &text).unwrap();
    let uf = user.u_score(ctx.encoder(), f, &text).unwrap();
    let w = ndcg_weights(1);
    assert!((v_score(&ctx, &user, &p1, 2, 1) - (w[0] * uq + w[1] * uf)).abs() < 1e-12);
    assert!((v_score(&ctx, &user, &p1, 2, 1) - (a * uq + b * uf)).abs() < 1e-4);

    let x = weighted_embed(&ctx, &p1, 2, 1);
    let eq = ctx.encoder().encode_pair("solar panels", &text);
    let ef = ctx.encoder().encode_pair(f, &text);
    for j in 0..DIM {
        assert!((x[j] - (w[0] * eq[j] + w[1] * ef[j])).abs() < 1e-12);
    }
}

#[test]
fn representative_is_the_v_argmax() {
    let ctx = ctx();
    let user = UserModel::init(DIM, 8);
    let s = state(&["wind turbines spin."]);
    let p = ctx.prepare(&s);
    assert_eq!(select_representative(&ctx, &user, &p, 1, 10).unwrap().0, 0);
    let vals: Vec<f64> = (0..3).map(|i| v_oracle(&ctx, &user, &s, 0, i)).collect();
    let best = (0..3).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
    let (rep, v) = select_representative(&ctx, &user, &p, 0, 10).unwrap();
    assert_eq!(rep, best);
    assert!((v - vals[best]).abs() < 1e-12);
    assert_eq!(select_representative(&ctx, &user, &p, 0, 1).unwrap().0, 0);
}

#[test]
fn q_value_properties() {
    let ctx = ctx();
    let user = UserModel::init(DIM, 2);
    let params = QParams::init(3, DIM, 8, 9);
    let p = ctx.prepare(&state(&[]));
    let a = q_value(&ctx, &params, &user, &p, &[0, 2, 4], 10).unwrap();
    let b = q_value(&ctx, &params, &user, &p, &[2, 0, 4], 10).unwrap();
    assert_ne!(a, b);

    let same = q_value_augmented(&ctx, &params, &user, &p, &[p.clone(), p.clone()], &[0, 2, 4], 10).unwrap();
    assert!((same - a).abs() < 1e-12);

    let a1 = ctx.prepare(&State::new(Query::new("q", "solar cells").unwrap()));
    let a2 = ctx.prepare(&State::new(Query::new("q", "sun panels").unwrap()));
    let mean = [&p, &a1, &a2]
        .iter()
        .map(|s| q_value(&ctx, &params, &user, s, &[0, 2, 4], 10).unwrap())
        .sum::<f64>()
        / 3.0;
    let got = q_value_augmented(&ctx, &params, &user, &p, &[a1, a2], &[0, 2, 4], 10).unwrap();
    assert!((got - mean).abs() < 1e-12);

    assert_eq!(td_target(0.4, true, 0.6, &[9.0]).unwrap(), 0.4);
    assert!((td_target(0.4, false, 0.6, &[1.0, 2.0]).unwrap() - 1.6).abs() < 1e-12);
    assert!(td_target(0.4, false, 0.6, &[]).is_err());
}

fn random_inputs(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vector> {
    use rand::Rng;
    (0..n)
        .map(|_| Vector((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect()
}

#[test]
fn target_network_and_td_regression() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let samples = vec![
        TrainSample {
            target: 0.8,
            inputs: vec![random_inputs(&mut rng, 2, 16)],
        },
        TrainSample {
            target: -0.3,
            inputs: vec![random_inputs(&mut rng, 2, 16)],
        },
    ];
    let mut net = QNet::new(2, 16, 8, 1);
    let init = net.online.clone();
    assert_eq!(net.target, init);
    let first = net.train_step(&samples, 0.01).unwrap();
    assert_eq!(net.target, init);
    assert_ne!(net.online, init);
    net.sync_target();
    assert_eq!(net.target, net.online);
    net.train_step(&samples, 0.01).unwrap();
    assert_ne!(net.target, net.online);
    let mut last = first;
    for _ in 0..20 {
        last = net.train_step(&samples, 0.01).unwrap();
    }
    assert!(last < first, "{last} !< {first}");
}

#[test]
fn candidate_set_orders_by_selection_score() {
    let ctx = ctx();
    let user = UserModel::init(DIM, 6);
    let pool: Vec<u32> = (0..5).collect();
    let mut oracle: Vec<(u32, f64)> = pool
        .iter()
        .map(|&d| {
            let best = (0..ctx.doc(d).sentences.len())
                .map(|i| user.u_score(ctx.encoder(), "solar panels", &sentence(&ctx, d, i)).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            (d, best)
        })
        .collect();
    oracle.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let all = candidate_set(&ctx, &user, "solar panels", &pool, 5, 10).unwrap();
    assert_eq!(all, oracle.iter().map(|o| o.0).collect::<Vec<_>>());
    let top = candidate_set(&ctx, &user, "solar panels", &pool, 1, 10).unwrap();
    assert_eq!(top, [oracle[0].0]);
    assert!(candidate_set(&ctx, &user, "solar panels", &[], 1, 10).is_err());
}

#[test]
fn initial_ranking_follows_v() {
    let ctx = ctx();
    let user = UserModel::init(DIM, 12);
    let pool: Vec<u32> = (0..5).collect();
    let cands = candidate_set(&ctx, &user, "solar panels", &pool, 5, 10).unwrap();
    let s0 = state(&[]);
    let r0 = initial_u_ranking(&ctx, &user, &ctx.prepare(&s0), &cands, 5, 10).unwrap();
    assert_eq!(r0.docs, cands);

    let s1 = state(&["wind turbines spin."]);
    let mut oracle: Vec<(u32, f64)> = pool
        .iter()
        .map(|&d| {
            let v = (0..ctx.doc(d).sentences.len())
                .map(|i| v_oracle(&ctx, &user, &s1, d, i))
                .fold(f64::NEG_INFINITY, f64::max);
            (d, v)
        })
        .collect();
    oracle.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let r1 = initial_u_ranking(&ctx, &user, &ctx.prepare(&s1), &cands, 3, 10).unwrap();
    assert_eq!(r1.docs, oracle[..3].iter().map(|o| o.0).collect::<Vec<_>>());
    assert!(initial_u_ranking(&ctx, &user, &ctx.prepare(&s1), &cands, 6, 10).is_err());
}

fn forward_order(ctx: &SearchContext, params: &QParams, p: &PreparedState, slate: &SlateAction, order: &[usize]) -> f64 {
    let s = SlateAction {
        docs: order.iter().map(|&i| slate.docs[i]).collect(),
        reps: order.iter().map(|&i| slate.reps[i]).collect(),
    };
    params.forward(&slate_embeddings(ctx, p, &s).unwrap()).unwrap()
}

#[test]
fn window_of_two_picks_the_better_order() {
    let ctx = ctx();
    let user = UserModel::init(DIM, 1);
    let p = ctx.prepare(&state(&[]));
    for seed in 0..20 {
        let params = QParams::init(2, DIM, 8, seed);
        let slate = with_representatives(&ctx, &user, &p, &[0, 4], 10).unwrap();
        let keep = forward_order(&ctx, &params, &p, &slate, &[0, 1]);
        let swap = forward_order(&ctx, &params, &p, &slate, &[1, 0]);
        let w = sliding_window_rank(&ctx, &params, &p, &slate, 2).unwrap();
        assert_eq!(w.evaluations, 2);
        let want = if swap > keep { vec![4, 0] } else { vec![0, 4] };
        assert_eq!(w.slate.docs, want);
        assert!((w.q_final - keep.max(swap)).abs() < 1e-12);
    }
}

#[test]
fn window_leaves_an_optimal_slate_alone() {
    let ctx = ctx();
    let user = UserModel::init(DIM, 1);
    let p = ctx.prepare(&state(&["panels need cleaning."]));
    for seed in 0..10 {
        let params = QParams::init(4, DIM, 8, seed);
        let slate = with_representatives(&ctx, &user, &p, &[0, 1, 2, 4], 10).unwrap();
        let best = permutations(4)
            .into_iter()
            .max_by(|a, b| {
                forward_order(&ctx, &params, &p, &slate, a).total_cmp(&forward_order(&ctx, &params, &p, &slate, b))
            })
            .unwrap();
        let optimal = SlateAction {
            docs: best.iter().map(|&i| slate.docs[i]).collect(),
            reps: best.iter().map(|&i| slate.reps[i]).collect(),
        };
        for m in 2..=4 {
            let w = sliding_window_rank(&ctx, &params, &p, &optimal, m).unwrap();
            assert_eq!(w.slate, optimal);
            assert_eq!(w.q_initial, w.q_final);
        }
    }
}

#[test]
fn epsilon_greedy_branches() {
    let ctx = ctx();
    let user = UserModel::init(DIM, 1);
    let params = QParams::init(2, DIM, 8, 3);
    let p = ctx.prepare(&state(&[]));
    let cands: Vec<u32> = vec![4, 0, 2, 1];
    let pp = PolicyParams {
        n: 2,
        window: 2,
        sentences: 10,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut none = VecDeque::new();
    let (_, greedy) = greedy_slate(&ctx, &user, &params, &p, &cands, pp).unwrap();
    for _ in 0..5 {
        let (a, b) = epsilon_greedy(&mut rng, 0.0, &mut none, &ctx, &user, &params, &p, &cands, pp).unwrap();
        assert_eq!(b, Branch::Greedy);
        assert_eq!(a, greedy.slate);
    }
    for _ in 0..5 {
        let (a, b) = epsilon_greedy(&mut rng, 1.0, &mut none, &ctx, &user, &params, &p, &cands, pp).unwrap();
        assert_eq!(b, Branch::Random);
        assert_eq!(a.len(), 2);
        assert!(!a.has_duplicates());
        assert!(a.docs.iter().all(|d| cands.contains(d)));
    }
    let mut logged: VecDeque<LoggedSlate> = [vec![0, 2], vec![1, 4]]
        .into_iter()
        .map(|docs| LoggedSlate { docs, reward: None })
        .collect();
    let mut branches = Vec::new();
    for _ in 0..3 {
        let (a, b) = epsilon_greedy(&mut rng, 1.0, &mut logged, &ctx, &user, &params, &p, &cands, pp).unwrap();
        if branches.len() < 2 {
            assert_eq!(a.docs, [[0, 2], [1, 4]][branches.len()]);
        }
        branches.push(b);
    }
    assert_eq!(branches, [Branch::Logged, Branch::Logged, Branch::Random]);
    assert!(logged.is_empty());
    assert!(epsilon_greedy(&mut rng, 1.5, &mut none, &ctx, &user, &params, &p, &cands, pp).is_err());
}

fn within_3_sigma(counts: &[usize], draws: usize) {
    let k = counts.len() as f64;
    let mean = draws as f64 / k;
    let sigma = (draws as f64 * (1.0 / k) * (1.0 - 1.0 / k)).sqrt();
    for &c in counts {
        assert!((c as f64 - mean).abs() <= 3.0 * sigma, "{counts:?}");
    }
}

#[test]
fn random_slate_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cands = [7u32, 3, 9, 1, 5];
    let mut counts = [0usize; 5];
    for _ in 0..10_000 {
        let s = random_slate(&mut rng, &cands, 1);
        counts[cands.iter().position(|c| *c == s[0]).unwrap()] += 1;
    }
    within_3_sigma(&counts, 10_000);
}

fn transition(reward: f64) -> Transition {
    Transition {
        state: state(&[]),
        action: SlateAction::new(vec![0, 1]),
        reward,
        next_state: state(&["x."]),
        terminal: false,
        augmentations: Vec::new(),
        candidates: vec![0, 1, 2],
    }
}

#[test]
fn replay_sampling() {
    let mut one = ReplayMemory::new(8);
    one.push(transition(0.5));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let batch = one.sample(&mut rng, 4).unwrap();
    assert_eq!(batch.len(), 4);
    assert!(batch.iter().all(|t| **t == transition(0.5)));
    assert!(ReplayMemory::new(4).sample(&mut rng, 1).is_err());

    let mut mem = ReplayMemory::new(10);
    for i in 0..10 {
        mem.push(transition(i as f64));
    }
    let draw = |seed| -> Vec<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        mem.sample(&mut r, 16).unwrap().iter().map(|t| t.reward).collect()
    };
    assert_eq!(draw(5), draw(5));
    let mut counts = [0usize; 10];
    let mut r = ChaCha8Rng::seed_from_u64(77);
    for t in mem.sample(&mut r, 10_000).unwrap() {
        counts[t.reward as usize] += 1;
    }
    within_3_sigma(&counts, 10_000);
}

/// Cosine of hashed unigram+bigram count vectors built directly from the
/// gram hashes.
fn gram_cosine(a: &str, b: &str, dim: usize) -> f64 {
    let vec = |t: &str| {
        let toks = tokenize(t);
        let mut v = vec![0.0; dim];
        let grams = toks.iter().cloned().chain(toks.windows(2).map(|w| format!("{} {}", w[0], w[1])));
        for g in grams {
            v[(hash_gram(&g) % dim as u64) as usize] += 1.0;
        }
        v
    };
    let (x, y) = (vec(a), vec(b));
    let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    let n = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (n(&x) * n(&y))
}

#[test]
fn pool_retrieval_threshold() {
    let enc = HashEncoder::new(256).unwrap();
    let mut pool = FeedbackPool::new();
    let stored = State::with_feedback(Query::new("q1", "p q r s").unwrap(), vec!["p is q.".into()]);
    assert!(pool.push_final_state(&enc, &stored, 0.7));
    let expected = gram_cosine("p q r s", "p q", 256);
    assert!((expected - 3.0 / 21f64.sqrt()).abs() < 1e-12);
    let actual = cosine(&enc.encode_single("p q r s"), &enc.encode_single("p q")).unwrap();
    assert!((actual - expected).abs() < 1e-12);

    let probe = Query::new("q2", "p q").unwrap();
    assert!(pool.nearest(&enc, "p q", 0.8).is_none());
    assert_eq!(pool.retrieve_state(&enc, &probe, 0.8), State::new(probe.clone()));
    let got = pool.retrieve_state(&enc, &probe, 0.6);
    assert_eq!(got.query, probe);
    assert_eq!(got.feedback, stored.feedback);

    assert!(!pool.push_final_state(&enc, &stored, 0.5));
    assert!(pool.push_final_state(&enc, &state(&[]), 0.1));
    assert_eq!(pool.len(), 2);
}

#[test]
fn augmented_states_differ_only_in_query_text() {
    let aug = Augmenter::new(
        SynonymLexicon::from_tsv("solar\tsun,photovoltaic\npanels\tmodules\n").unwrap(),
        Stopwords::from_lines("the\n"),
    );
    let s = state(&["panels need cleaning."]);
    let out = aug.augment_state(&s, 2);
    assert_eq!(out.len(), 2);
    let texts: BTreeSet<&str> = out.iter().map(|a| a.query.text.as_str()).collect();
    assert_eq!(texts.len(), 2);
    for a in &out {
        assert_ne!(a.query.text, s.query.text);
        assert_eq!(a.query.query_id, s.query.query_id);
        assert_eq!(a.feedback, s.feedback);
    }
    let plain = Augmenter::default().augment_state(&s, 2);
    assert!(plain.iter().all(|a| *a == s));
}

#[test]
fn representatives_follow_the_state() {
    let ctx = ctx();
    let user = UserModel::init(DIM, 30);
    let mut seen = BTreeMap::new();
    for f in ["panels need cleaning.", "wind turbines spin.", "solar panels convert sunlight."] {
        let s = state(&[f]);
        let p = ctx.prepare(&s);
        let slate = with_representatives(&ctx, &user, &p, &[0], 10).unwrap();
        let rep = slate.reps[0];
        let oracle = (0..3).fold(0, |b, i| {
            if v_oracle(&ctx, &user, &s, 0, i) > v_oracle(&ctx, &user, &s, 0, b) {
                i
            } else {
                b
            }
        });
        assert_eq!(rep, oracle);
        seen.insert(f, rep);
    }
    assert_eq!(seen.len(), 3);
}
