use patdiag_core::corpus::{generate_synthetic, Corpus, Label, SyntheticSpec};
use patdiag_core::eval::prf1;
use patdiag_core::numerics::SeededRng;
use patdiag_core::pattern::{MatchIndex, Pattern};
use patdiag_core::refinement::{
    accepted_patterns, create_session, VerdictClass, DEFAULT_P_H, DEFAULT_P_L,
};

fn noise_free(n: usize) -> Corpus {
    generate_synthetic(&SyntheticSpec {
        n_instances: n,
        fn_rate: 0.0,
        fp_rate: 0.0,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

fn pattern(text: &str) -> Pattern {
    text.parse().unwrap()
}

#[test]
fn oracle_separates_planted_from_distractor_templates() {
    let corpus = noise_free(1000);
    let planted = pattern("ENTITY1:PER PAD{1,3} born PAD{1,3} ENTITY2:CITY");
    let distractor = pattern("ENTITY1:PER PAD{1,3} visited PAD{1,3} ENTITY2:CITY");
    let mut s = create_session(
        &[planted.clone(), distractor.clone()],
        &corpus,
        10,
        0,
        DEFAULT_P_H,
        DEFAULT_P_L,
    )
    .unwrap();
    assert!(!s.is_complete());
    s.oracle_annotate(&corpus).unwrap();
    assert!(s.is_complete());
    let verdicts = s.finalize().unwrap();
    assert_eq!(verdicts[0].pattern, planted);
    assert_eq!(verdicts[0].accuracy, 1.0);
    assert_eq!(verdicts[0].class, VerdictClass::Positive);
    assert_eq!(verdicts[1].accuracy, 0.0);
    assert_eq!(verdicts[1].class, VerdictClass::Negative);
    assert_eq!(
        accepted_patterns(&verdicts),
        (vec![planted], vec![distractor])
    );
}

#[test]
fn session_size_and_membership() {
    let corpus = noise_free(2000);
    let index = MatchIndex::new(&corpus);
    let mut patterns = Vec::new();
    for w in ["born", "native", "visited", "left"] {
        for text in [
            format!("{w} PAD{{1,3}} ENTITY2:CITY"),
            format!("ENTITY1:PER PAD{{1,3}} {w}"),
            format!("ENTITY1:PER PAD{{4,9}} {w}"),
            format!("ENTITY2:CITY {w}"),
        ] {
            let p = pattern(&text);
            if !index.matching(&p).is_empty() {
                patterns.push(p);
            }
        }
    }
    assert!(patterns.len() >= 5, "{patterns:?}");
    let s = create_session(&patterns, &corpus, 10, 7, DEFAULT_P_H, DEFAULT_P_L).unwrap();
    let again = create_session(&patterns, &corpus, 10, 7, DEFAULT_P_H, DEFAULT_P_L).unwrap();
    assert_eq!(s, again);
    assert!(s.items().len() <= patterns.len() * 10);
    for sp in &s.patterns {
        let matched: Vec<&str> = index
            .matching(&sp.pattern)
            .into_iter()
            .map(|i| corpus.instances[i].id.as_str())
            .collect();
        assert_eq!(sp.items.len(), sp.n_matched.min(10));
        assert!(sp.items.iter().all(|id| matched.contains(&id.as_str())));
    }
}

#[test]
fn prf1_counts_never_grow_with_the_threshold() {
    let mut rng = SeededRng::new(41);
    let probs: Vec<f64> = (0..300).map(|_| rng.uniform()).collect();
    let gold: Vec<i8> = (0..300)
        .map(|_| if rng.bernoulli(0.4) { 1 } else { -1 })
        .collect();
    let mut last_tp = usize::MAX;
    for k in 0..=20 {
        let m = prf1(&probs, &gold, k as f64 / 20.0).unwrap();
        assert!(m.tp <= last_tp);
        last_tp = m.tp;
    }
    let mut order: Vec<usize> = (0..300).collect();
    rng.shuffle(&mut order);
    let p2: Vec<f64> = order.iter().map(|&i| probs[i]).collect();
    let g2: Vec<i8> = order.iter().map(|&i| gold[i]).collect();
    assert_eq!(
        prf1(&probs, &gold, 0.5).unwrap(),
        prf1(&p2, &g2, 0.5).unwrap()
    );
}

#[test]
fn gold_labels_are_required_for_the_oracle() {
    let mut corpus = noise_free(200);
    let p = pattern("ENTITY1:PER PAD{1,3} born PAD{1,3} ENTITY2:CITY");
    let mut s = create_session(&[p], &corpus, 10, 0, DEFAULT_P_H, DEFAULT_P_L).unwrap();
    for inst in &mut corpus.instances {
        inst.gold_label = None;
    }
    assert!(s.oracle_annotate(&corpus).is_err());
    let first = s.items()[0].to_string();
    s.record(&first, Label::Negative).unwrap();
    s.record(&first, Label::Positive).unwrap();
    assert_eq!(s.label(&first), Some(Label::Positive));
}
