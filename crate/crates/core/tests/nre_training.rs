mod common;

use common::{born_corpus, gold_signs, small_nre_config};
use patdiag_core::corpus::{Corpus, EntitySpan, Instance, Label, Vocabulary};
use patdiag_core::eval::prf1;
use patdiag_core::nre::{train, NreConfig, NreError, NreModel};
use patdiag_core::numerics::{AdamState, SeededRng};

fn kellogg(shift: usize) -> Instance {
    let mut tokens = vec![
        "Marjorie_Kellogg",
        "was",
        "born",
        "in",
        "Santa_Barbara",
        ".",
    ];
    for _ in 0..shift {
        tokens.insert(0, "so");
    }
    Instance::new(
        "k",
        &tokens,
        EntitySpan::new(shift, shift + 1, "PER"),
        EntitySpan::new(shift + 4, shift + 5, "CITY"),
        "born_in",
        Label::Positive,
    )
}

#[test]
fn embedding_shapes_and_decomposition() {
    let vocab = Vocabulary::from_tokens(["Marjorie_Kellogg", "was", "born", "in", "so"]);
    let model = NreModel::new(NreConfig::default(), vocab, 0).unwrap();
    let single = Instance::new(
        "s",
        &["x"],
        EntitySpan::new(0, 1, "PER"),
        EntitySpan::new(0, 1, "CITY"),
        "r",
        Label::Negative,
    );
    assert_eq!(model.embed(&single).shape(), &[110, 1]);

    let a = model.embed(&kellogg(0));
    assert_eq!(a, model.embed(&kellogg(0)));
    // Shifting the whole sentence keeps every relative position.
    let b = model.embed(&kellogg(1));
    assert_eq!(a.column(2), b.column(3));
    let c = model.embed(&Instance {
        head: EntitySpan::new(1, 2, "PER"),
        ..kellogg(0)
    });
    // Moving only the head changes the position rows of "born".
    let (x, y) = (a.column(2), c.column(2));
    assert_eq!(x[..100], y[..100]);
    assert_ne!(x[100..], y[100..]);
}

#[test]
fn zero_parameters_predict_one_half() {
    let corpus = born_corpus(&mut SeededRng::new(0), 4);
    let mut model = NreModel::new(small_nre_config(), corpus.vocabulary.clone(), 3).unwrap();
    model.params_mut().zero_all();
    for inst in &corpus.instances {
        assert_eq!(model.predict_instance(inst), 0.5);
    }
}

#[test]
fn prediction_ignores_batch_composition() {
    let corpus = born_corpus(&mut SeededRng::new(1), 30);
    let model = NreModel::new(small_nre_config(), corpus.vocabulary.clone(), 1).unwrap();
    let together = model.predict_corpus(&corpus);
    let mut reversed = corpus.instances.clone();
    reversed.reverse();
    let rev = model.predict_corpus(&Corpus::from_instances(reversed, "born_in").unwrap());
    for (i, inst) in corpus.instances.iter().enumerate() {
        let alone = model.predict_instance(inst);
        assert_eq!(alone, together[i]);
        assert_eq!(alone, rev[corpus.len() - 1 - i]);
        assert!(alone > 0.0 && alone < 1.0);
    }
}

#[test]
fn overfits_a_separable_toy_corpus() {
    let corpus = born_corpus(&mut SeededRng::new(2), 50);
    let config = NreConfig {
        max_epochs: 200,
        ..small_nre_config()
    };
    let model = NreModel::new(config, corpus.vocabulary.clone(), 0).unwrap();
    let out = train(&model, &corpus, &corpus.ds_targets(), 0).unwrap();
    let probs = out.model.predict_corpus(&corpus);
    let m = prf1(&probs, &gold_signs(&corpus), 0.5).unwrap();
    assert_eq!(m.f1, 1.0, "best epoch {}", out.best_epoch);
}

#[test]
fn uniform_soft_targets_give_uniform_predictions() {
    let corpus = born_corpus(&mut SeededRng::new(3), 50);
    let model = NreModel::new(small_nre_config(), corpus.vocabulary.clone(), 0).unwrap();
    let out = train(&model, &corpus, &vec![0.5; corpus.len()], 0).unwrap();
    let probs = out.model.predict_corpus(&corpus);
    let dev = probs.iter().map(|p| (p - 0.5).abs()).sum::<f64>() / probs.len() as f64;
    assert!(dev < 0.05, "mean |p - 0.5| = {dev}");
}

#[test]
fn training_is_deterministic_per_seed() {
    let corpus = born_corpus(&mut SeededRng::new(4), 40);
    let config = NreConfig {
        max_epochs: 3,
        dropout_embed: 0.3,
        dropout_encoder: 0.3,
        dropout_final: 0.5,
        validation_fraction: 0.1,
        ..small_nre_config()
    };
    let run = |seed| {
        let model = NreModel::new(config.clone(), corpus.vocabulary.clone(), seed).unwrap();
        train(&model, &corpus, &corpus.ds_targets(), seed)
            .unwrap()
            .model
            .checkpoint()
    };
    assert_eq!(run(0), run(0));
    assert_ne!(run(0), run(1));
}

#[test]
fn small_steps_do_not_increase_the_loss() {
    let corpus = born_corpus(&mut SeededRng::new(5), 20);
    let mut model = NreModel::new(small_nre_config(), corpus.vocabulary.clone(), 0).unwrap();
    let targets = corpus.ds_targets();
    let batch: Vec<(&Instance, f64)> = corpus.instances.iter().zip(targets).collect();
    let mut adam = AdamState::new(model.params(), 1e-4);
    let mut last = f64::INFINITY;
    for _ in 0..20 {
        let (loss, grads) = model.loss_and_grads(&batch, None).unwrap();
        assert!(loss <= last, "{loss} > {last}");
        last = loss;
        adam.step(model.params_mut(), &grads).unwrap();
    }
}

#[test]
fn rejects_bad_labels() {
    let corpus = born_corpus(&mut SeededRng::new(6), 4);
    let model = NreModel::new(small_nre_config(), corpus.vocabulary.clone(), 0).unwrap();
    assert!(matches!(
        train(&model, &corpus, &[0.0, 1.0, 1.5, 0.0], 0),
        Err(NreError::LabelOutOfRange { index: 2, .. })
    ));
    assert!(matches!(
        train(&model, &corpus, &[0.0], 0),
        Err(NreError::LabelCount { .. })
    ));
    let empty = Corpus::from_instances(Vec::new(), "born_in").unwrap();
    assert!(matches!(
        train(&model, &empty, &[], 0),
        Err(NreError::EmptyCorpus)
    ));
}
