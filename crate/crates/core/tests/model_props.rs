//! Encoder and score-head properties: parameter count, attention masking,
//! label-permutation equivariance, head oracles and checkpoints.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uniex::data::fixture::make_fixture;
use uniex::data::Vocabulary;
use uniex::encoder::{self, normal_array, EncoderConfig};
use uniex::model::{Ablations, Model, ModelConfig};
use uniex::ndiff::{sigmoid, Array, ParamStore};
use uniex::schema::{PromptOptions, TaskKind};
use uniex::scoring::{self, ScoringHead};

fn small(layers: usize, head: ScoringHead, prompt: PromptOptions) -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig {
            layers,
            d: 16,
            heads: 2,
            ffn_hidden: 32,
            max_position: 96,
            seed: 5,
            init_std: 0.3,
            ..Default::default()
        },
        head,
        prompt,
    }
}

fn relation_model(config: ModelConfig) -> (Model, Vec<uniex::data::ExDocument>) {
    let f = make_fixture(TaskKind::Relation, 6, 2);
    let vocab = Vocabulary::build(&f.documents, [&f.schemas]);
    (Model::new(config, vocab, f.schemas).unwrap(), f.documents)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parameter_count_matches_store(layers in 0usize..3, h in 1usize..4, dm in 1usize..4, f in 1usize..20, v in 1usize..30, p in 1usize..20) {
        let d = h * dm;
        let c = EncoderConfig { layers, d, heads: h, ffn_hidden: f, vocab_size: v, max_position: p, ..Default::default() };
        let mut store = ParamStore::new();
        encoder::init_params(&c, &mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        prop_assert_eq!(store.num_scalars(), c.param_count());
    }

    #[test]
    fn multihead_selection_matches_loops(seed in any::<u64>(), ns in 1usize..4, nx in 1usize..5) {
        let d = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hs = normal_array(&[ns, d], 1.0, &mut rng);
        let hxs = normal_array(&[nx, d], 1.0, &mut rng);
        let hxe = normal_array(&[nx, d], 1.0, &mut rng);
        let u = normal_array(&[d, d], 1.0, &mut rng);
        let v = normal_array(&[d, d], 1.0, &mut rng);
        let got = scoring::multihead_from_parts(&hs, &hxs, &hxe, &u, &v).unwrap();
        for r in 0..ns {
            for p in 0..nx {
                for q in 0..nx {
                    let mut acc = 0.0;
                    for a in 0..d {
                        for b in 0..d {
                            acc += hs.at(&[r, a]) * u.at(&[a, b]) * hxs.at(&[p, b]);
                            acc += hs.at(&[r, a]) * v.at(&[a, b]) * hxe.at(&[q, b]);
                        }
                    }
                    prop_assert!((got.get(r, p, q) - sigmoid(acc)).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn multihead_logits_are_separable_and_triaffine_ones_are_not() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let d = 4;
    let hs = normal_array(&[2, d], 0.5, &mut rng);
    let hxs = normal_array(&[4, d], 0.5, &mut rng);
    let hxe = normal_array(&[4, d], 0.5, &mut rng);
    let u = normal_array(&[d, d], 0.5, &mut rng);
    let v = normal_array(&[d, d], 0.5, &mut rng);
    let w = normal_array(&[d, d, d], 0.5, &mut rng);
    let mhs = scoring::multihead_from_parts(&hs, &hxs, &hxe, &u, &v).unwrap();
    let tri = scoring::triaffine_from_parts(&hs, &hxs, &hxe, &w).unwrap();
    let gap = |s: &scoring::ScoreTensor, r: usize| {
        let l = |p, q| logit(s.get(r, p, q));
        (l(0, 1) + l(2, 3) - l(0, 3) - l(2, 1)).abs()
    };
    for r in 0..2 {
        assert!(gap(&mhs, r) < 1e-9);
        assert!(gap(&tri, r) > 1e-3);
    }
}

#[test]
fn hidden_tokens_do_not_reach_text_in_one_layer() {
    let (model, docs) = relation_model(small(1, ScoringHead::Triaffine, PromptOptions::default()));
    let input = model.prompt(&docs[0].tokens).unwrap();
    let base = encoder::encode(&input, &model.config.encoder, &model.params).unwrap();
    // swap a label word for another id: text may not attend label blocks
    let label_word = (0..input.len())
        .find(|&i| {
            matches!(input.block_index[i], uniex::schema::Block::Label(_))
                && input.roles[i] == uniex::schema::TokenRole::SchemaWord
        })
        .unwrap();
    let mut perturbed = input.clone();
    perturbed.tokens[label_word] = model.vocab.unk();
    let after = encoder::encode(&perturbed, &model.config.encoder, &model.params).unwrap();
    assert_eq!(base.hx, after.hx);
    assert_ne!(base.hs, after.hs);

    // with text attending labels the change reaches the text rows
    let open = PromptOptions { text_sees_labels: true, ..Default::default() };
    let (model, _) = relation_model(small(1, ScoringHead::Triaffine, open));
    let input = model.prompt(&docs[0].tokens).unwrap();
    let mut perturbed = input.clone();
    perturbed.tokens[label_word] = model.vocab.unk();
    let a = encoder::encode(&input, &model.config.encoder, &model.params).unwrap();
    let b = encoder::encode(&perturbed, &model.config.encoder, &model.params).unwrap();
    assert!(a.hx.max_abs_diff(&b.hx) > 1e-9);
}

#[test]
fn unbound_label_blocks_are_isolated_in_one_layer() {
    let (model, docs) = relation_model(small(1, ScoringHead::Triaffine, PromptOptions::default()));
    let input = model.prompt(&docs[0].tokens).unwrap();
    let s = &model.schemas;
    let table = |n: &str| s.schema_names().position(|x| x == n).unwrap();
    let (live, org) = (table("live in"), table("Organization"));
    assert!(!s.bound("live in", "Organization"));
    let mut perturbed = input.clone();
    perturbed.tokens[input.schema_anchor[org] + 1] = model.vocab.unk();
    let a = encoder::encode(&input, &model.config.encoder, &model.params).unwrap();
    let b = encoder::encode(&perturbed, &model.config.encoder, &model.params).unwrap();
    let row = |x: &Array, r: usize| x.data()[r * 16..(r + 1) * 16].to_vec();
    assert_eq!(row(&a.hs, live), row(&b.hs, live));
    assert_ne!(row(&a.hs, org), row(&b.hs, org));
}

#[test]
fn reordering_labels_permutes_score_tables() {
    for head in [ScoringHead::Triaffine, ScoringHead::MultiHeadSelection] {
        let (model, docs) = relation_model(small(2, head, PromptOptions::default()));
        let nc = model.schemas.n_classification();
        let na = model.schemas.n_association();
        let corder: Vec<usize> = (0..nc).rev().collect();
        let aorder: Vec<usize> = (0..na).map(|i| (i + 1) % na).collect();
        let reordered = model.with_schemas(model.schemas.reordered(&corder, &aorder)).unwrap();
        let mut table_order = vec![0];
        table_order.extend(corder.iter().map(|&i| 1 + i));
        table_order.extend(aorder.iter().map(|&i| 1 + nc + i));
        for d in &docs {
            let a = model.scores(&model.prompt(&d.tokens).unwrap()).unwrap();
            let b = reordered.scores(&reordered.prompt(&d.tokens).unwrap()).unwrap();
            let diff = a.permute_schemas(&table_order).values().max_abs_diff(b.values());
            assert!(diff < 1e-12, "{head:?}: {diff}");
        }
    }
}

#[test]
fn ablations_compose() {
    for bits in 0..8u8 {
        let a = Ablations { no_sam: bits & 1 != 0, no_triaffine: bits & 2 != 0, no_label_names: bits & 4 != 0 };
        let (model, docs) =
            relation_model(small(1, ScoringHead::Triaffine, PromptOptions::default()).with_ablations(a));
        let p = model.predict(&docs[0].tokens, 0.5).unwrap();
        p.record.validate(&model.schemas, docs[0].tokens.len()).unwrap();
        let input = model.prompt(&docs[0].tokens).unwrap();
        assert_eq!(input.mask.all_visible(), a.no_sam);
        assert_eq!(model.params.contains("head.w"), !a.no_triaffine);
    }
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let (model, docs) = relation_model(small(2, ScoringHead::Triaffine, PromptOptions::default()));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    model.save(&path).unwrap();
    let back = Model::load(&path).unwrap();
    assert_eq!(back, model);
    for d in &docs {
        let a = model.scores(&model.prompt(&d.tokens).unwrap()).unwrap();
        let b = back.scores(&back.prompt(&d.tokens).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn untrained_scores_sit_near_one_half() {
    let mut config = small(2, ScoringHead::Triaffine, PromptOptions::default());
    config.encoder.init_std = 0.02;
    let (model, docs) = relation_model(config);
    let p = model.predict(&docs[0].tokens, 0.999).unwrap();
    assert!(p.record.is_empty());
    let s = model.scores(&model.prompt(&docs[0].tokens).unwrap()).unwrap();
    assert!(s.values().data().iter().all(|&v| (v - 0.5).abs() < 0.05));
}

#[test]
fn init_is_seeded() {
    let (a, _) = relation_model(small(2, ScoringHead::Triaffine, PromptOptions::default()));
    let (b, _) = relation_model(small(2, ScoringHead::Triaffine, PromptOptions::default()));
    assert_eq!(a.params, b.params);
    let mut other = small(2, ScoringHead::Triaffine, PromptOptions::default());
    other.encoder.seed = 6;
    let (c, _) = relation_model(other);
    assert_ne!(a.params, c.params);
}
