//! Loss masking, the learning-rate schedule and training-loop behaviour.

mod common;

use std::ops::ControlFlow;

use proptest::prelude::*;
use uniex::data::fixture::make_fixture;
use uniex::model::Ablations;
use uniex::ndiff::{Graph, ParamStore};
use uniex::schema::TaskKind;
use uniex::scoring::ScoreTensor;
use uniex::structures::build_target_tensor;
use uniex::train::{learning_rate_at, masked_loss, trace_csv, train, TrainConfig};

fn tiny_run(epochs: usize, seed: u64) -> (uniex::model::Model, Vec<uniex::train::EpochStats>) {
    let f = make_fixture(TaskKind::Entity, 3, 0);
    let mut model = common::fixture_model(&f.documents, &f.schemas, seed, Ablations::default());
    let config = TrainConfig { epochs, batch_size: 2, seed, ..common::fixture_train_config(epochs, seed) };
    let trace = train(&mut model, &f.documents, &config, |_| ControlFlow::Continue(())).unwrap();
    (model, trace)
}

#[test]
fn invalid_cells_contribute_nothing() {
    let f = make_fixture(TaskKind::Relation, 2, 3);
    let model = common::fixture_model(&f.documents, &f.schemas, 0, Ablations::default());
    let doc = &f.documents[0];
    let ex = model.example(doc).unwrap();
    let scores = model.scores(&ex.input).unwrap();
    let base = masked_loss(&scores, &ex.target).unwrap();

    // loss recorded on the graph equals the array-level loss
    let mut g = Graph::new();
    let l = model.loss_on(&mut g, &ex, &model.params).unwrap();
    assert!((g.value(l).item() - base).abs() < 1e-9 * base.max(1.0));

    // overwriting invalid cells leaves the loss unchanged
    let mut probe = scores.clone();
    let (ns, n) = (probe.n_schemas(), probe.n_text());
    for r in 0..ns {
        for p in 0..n {
            for q in 0..n {
                if !ex.target.is_valid(r, p, q) {
                    probe.set(r, p, q, if (r + p + q) % 2 == 0 { 1e-9 } else { 1.0 - 1e-9 });
                }
            }
        }
    }
    assert_eq!(masked_loss(&probe, &ex.target).unwrap(), base);

    // and their gradient is exactly zero
    let mut store = ParamStore::new();
    store.insert("s", scores.values().clone());
    let mut g = Graph::new();
    let s = g.param(&store, "s").unwrap();
    let l = g.bce_sum(s, &ex.target.values, &ex.target.valid).unwrap();
    let grads = g.backward(l).unwrap();
    let gs = grads.get(s).unwrap();
    for (i, (&v, &gv)) in ex.target.valid.data().iter().zip(gs.data()).enumerate() {
        if v == 0.0 {
            assert_eq!(gv, 0.0, "cell {i}");
        }
    }
}

#[test]
fn perfect_scores_have_near_zero_loss() {
    let f = make_fixture(TaskKind::Event, 1, 0);
    let d = &f.documents[0];
    let t = build_target_tensor(&d.gold, &f.schemas, d.tokens.len()).unwrap();
    let s = ScoreTensor::from_array(t.values.clone()).unwrap();
    assert!(masked_loss(&s, &t).unwrap() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_warms_up_then_decays(total in 1usize..400, rate in 0.0f64..0.5, lr in 1e-5f64..1e-1) {
        let c = TrainConfig { learning_rate: lr, warmup_rate: rate, ..Default::default() };
        let warm = (rate * total as f64).ceil() as usize;
        let lrs: Vec<f64> = (0..total).map(|s| learning_rate_at(&c, s, total)).collect();
        for (s, &x) in lrs.iter().enumerate() {
            prop_assert!(x > 0.0 && x <= lr * (1.0 + 1e-12));
            if s > 0 && s < warm {
                prop_assert!(x > lrs[s - 1]);
            }
            if s > warm.max(1) - 1 && s > 0 && s >= warm {
                prop_assert!(x <= lrs[s - 1] * (1.0 + 1e-12));
            }
        }
        if warm < total {
            prop_assert!((lrs[warm] - lr).abs() < 1e-15);
        }
        let flat = TrainConfig { linear_decay: false, ..c.clone() };
        prop_assert_eq!(learning_rate_at(&flat, total.saturating_sub(1).max(warm), total), lr);
    }
}

#[test]
fn training_is_deterministic() {
    let (a, ta) = tiny_run(3, 4);
    let (b, tb) = tiny_run(3, 4);
    assert_eq!(a.params, b.params);
    assert_eq!(ta, tb);
    let (c, _) = tiny_run(3, 5);
    assert_ne!(a.params, c.params);
}

#[test]
fn zero_epochs_leave_the_initial_parameters() {
    let f = make_fixture(TaskKind::Entity, 3, 0);
    let init = common::fixture_model(&f.documents, &f.schemas, 1, Ablations::default());
    let (m, trace) = tiny_run(0, 1);
    assert!(trace.is_empty());
    assert_eq!(m.params, init.params);
}

#[test]
fn training_lowers_the_loss() {
    let (_, trace) = tiny_run(15, 0);
    assert_eq!(trace.len(), 15);
    assert!(trace.last().unwrap().mean_loss < trace[0].mean_loss);
    let csv = trace_csv(&trace);
    assert!(csv.starts_with("epoch,loss,f1\n1,"));
    assert_eq!(csv.lines().count(), 16);
}

#[test]
fn callback_can_stop_training() {
    let f = make_fixture(TaskKind::Entity, 2, 0);
    let mut model = common::fixture_model(&f.documents, &f.schemas, 0, Ablations::default());
    let config = common::fixture_train_config(50, 0);
    let trace = train(&mut model, &f.documents, &config, |s| {
        if s.epoch == 2 {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })
    .unwrap();
    assert_eq!(trace.len(), 2);
}

#[test]
fn bad_inputs_are_rejected() {
    let f = make_fixture(TaskKind::Entity, 2, 0);
    let mut model = common::fixture_model(&f.documents, &f.schemas, 0, Ablations::default());
    let ok = common::fixture_train_config(1, 0);
    assert!(train(&mut model, &[], &ok, |_| ControlFlow::Continue(())).is_err());
    let bad = TrainConfig { batch_size: 0, ..ok.clone() };
    assert!(train(&mut model, &f.documents, &bad, |_| ControlFlow::Continue(())).is_err());
    let bad = TrainConfig { learning_rate: f64::NAN, ..ok };
    assert!(train(&mut model, &f.documents, &bad, |_| ControlFlow::Continue(())).is_err());
}

#[test]
fn diverging_run_is_an_error() {
    let f = make_fixture(TaskKind::Entity, 2, 0);
    let mut model = common::fixture_model(&f.documents, &f.schemas, 0, Ablations::default());
    let config = TrainConfig { learning_rate: 1e300, warmup_rate: 0.0, ..common::fixture_train_config(5, 0) };
    let err = train(&mut model, &f.documents, &config, |_| ControlFlow::Continue(())).unwrap_err();
    assert!(err.to_string().contains("non-finite"), "{err}");
}
