"""Smoke test for the `patdiag` extension module.

Build and install first:

    pip install --no-build-isolation maturin
    pip install --no-build-isolation -e crates/py

then run `python python/smoke_test.py`.
"""

import math
import tempfile

import patdiag


def check_pattern():
    inst = patdiag.Instance(
        "s1",
        ["Ada", "was", "born", "in", "Paris"],
        (0, 1, "PER"),
        (4, 5, "CITY"),
        "birthplace",
        1,
    )
    p = patdiag.Pattern("ENTITY1:PER PAD{1,3} born PAD{1,3} ENTITY2:CITY")
    assert p.matches(inst)
    assert not patdiag.Pattern("ENTITY1:PER visited ENTITY2:CITY").matches(inst)
    induced = patdiag.induce_pattern(inst, [0, 1, 0, 1, 0])
    assert str(induced) == str(p), induced
    assert induced == p and hash(induced) == hash(p)
    try:
        patdiag.Pattern("PAD{1,3}")
    except ValueError:
        pass
    else:
        raise AssertionError("bad pattern accepted")


def check_label_model():
    p = patdiag.posterior([-1, 1], [0.6, 0.95], [1.0, 1.0])
    assert math.isclose(p, 0.38 / 0.41, abs_tol=1e-12), p
    rows = [[1, 0], [1, 1], [-1, -1], [-1, 0]]
    alpha, beta = patdiag.estimate(rows, [1, 1, -1, -1])
    assert len(alpha) == 2 and all(0.0 < a < 1.0 for a in alpha + beta)
    assert patdiag.reward(0.0, 0.0, 0.5, 10, 2) == 0.4
    prec, rec, f1 = patdiag.metrics([0.9, 0.2, 0.7], [1, -1, -1])
    assert (prec, rec) == (0.5, 1.0)
    assert math.isclose(f1, 2 / 3)


def check_pipeline():
    corpus = patdiag.synthetic_corpus(n_instances=200, seed=3)
    assert len(corpus) == 200
    assert all(i.gold_label in (1, -1) for i in corpus)
    overrides = "\n".join(
        [
            "synth_vocab_size = 40",
            "synth_n_instances = 300",
            "nre_word_dim = 8",
            "nre_hidden = 6",
            "nre_max_epochs = 2",
            "agent_hidden = 4",
            "agent_epochs = 1",
            "eta_grid = [0.5]",
            "n_r = 4",
            "n_a = 5",
            "seeds = [0]",
        ]
    )
    with tempfile.TemporaryDirectory() as work:
        pipe = patdiag.Pipeline(workdir=work, overrides=overrides)
        try:
            pipe.extract()
        except patdiag.PatdiagError as e:
            assert "train-nre" in str(e)
        else:
            raise AssertionError("extract ran without its inputs")
        report = pipe.run_synthetic_oracle()
        assert report["relation"] == "birthplace"
        assert len(report["per_seed"]) == 1
        assert pipe.synth() == "up_to_date"
        diag = pipe.diagnose()
        assert diag["annotated"] > 0
        print(pipe.report_text(), end="")


if __name__ == "__main__":
    check_pattern()
    check_label_model()
    check_pipeline()
    print("smoke test passed")
