mod common;

use common::{brute_force_match, random_corpus, random_instance, random_pattern};
use patdiag_core::agent::ActionSequence;
use patdiag_core::corpus::Corpus;
use patdiag_core::numerics::SeededRng;
use patdiag_core::pattern::{induce, matches, MatchIndex};

#[test]
fn matcher_agrees_with_exhaustive_alignment() {
    let mut rng = SeededRng::new(21);
    let mut positives = 0;
    for k in 0..1000 {
        let t = rng.range_inclusive(2, 15);
        let inst = random_instance(&mut rng, t, "i");
        let p = random_pattern(&mut rng, 4);
        let expected = brute_force_match(&p, &inst);
        assert_eq!(
            matches(&p, &inst),
            expected,
            "case {k}: {p} on {:?}",
            inst.tokens
        );
        positives += expected as usize;
    }
    // Both outcomes must be well represented for the comparison to mean much.
    assert!((100..900).contains(&positives), "{positives} matches");
}

#[test]
fn induced_pattern_matches_its_source() {
    let mut rng = SeededRng::new(22);
    for _ in 0..1000 {
        let t = rng.range_inclusive(2, 30);
        let inst = random_instance(&mut rng, t, "i");
        let actions = ActionSequence::new((0..t).map(|_| rng.bernoulli(0.7) as u8).collect());
        let p = induce(&inst, &actions).unwrap();
        assert!(matches(&p, &inst), "{p} on {:?}", inst.tokens);
        assert!(brute_force_match(&p, &inst));
    }
}

#[test]
fn index_is_independent_of_corpus_order() {
    let mut rng = SeededRng::new(23);
    let corpus = random_corpus(&mut rng, 200, 12);
    let mut shuffled = corpus.instances.clone();
    rng.shuffle(&mut shuffled);
    let other = Corpus::from_instances(shuffled, "r").unwrap();
    let (a, b) = (MatchIndex::new(&corpus), MatchIndex::new(&other));
    for _ in 0..200 {
        let p = random_pattern(&mut rng, 3);
        let ids = |c: &Corpus, pos: Vec<usize>| {
            let mut v: Vec<String> = pos.into_iter().map(|i| c.instances[i].id.clone()).collect();
            v.sort();
            v
        };
        let first = ids(&corpus, a.matching(&p));
        assert_eq!(first, ids(&other, b.matching(&p)));
        assert_eq!(first, ids(&corpus, a.matching(&p)));
    }
}
