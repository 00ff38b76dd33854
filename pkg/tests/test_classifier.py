import numpy as np
import pytest
import torch

from subjtransfer.classifier import (
    ClassifierConfig,
    ClassifierError,
    accuracy_from_scores,
    build_classifier,
    evaluate,
    train_classifier,
)
from subjtransfer.dataio import SubjectDataset

from conftest import make_dataset


def test_parameter_count_hand_computed():
    # temporal 8*500, BN 2*8, spatial 16*8, BN 2*16, separable 16*16 + 16*16, BN 2*16, dense 16*31*2 + 2
    m = build_classifier(ClassifierConfig(temporal_kernel=500), c=8, p=1000)
    assert sum(p.numel() for p in m.model.parameters()) == 5714


@pytest.mark.parametrize("p", [500, 333])
def test_output_shapes(p):
    m = build_classifier(ClassifierConfig(), c=8, p=p)
    x = np.random.default_rng(0).normal(size=(3, 8, p))
    assert m.logits(x).shape == (3, 2)
    np.testing.assert_allclose(m.predict_proba(x).sum(axis=1), 1.0, atol=1e-12)
    with pytest.raises(ClassifierError, match="expected trials"):
        m.logits(x[:, :4])


def test_too_short_trials_rejected():
    with pytest.raises(ClassifierError, match="too short"):
        build_classifier(ClassifierConfig(temporal_kernel=5), c=2, p=20)


def _separable(n=40, c=4, p=128, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    t = np.arange(p) / 128.0
    x = 0.5 * rng.normal(size=(n, c, p))
    x[labels == 1, 0] += 2 * np.sin(2 * np.pi * 10 * t)
    return make_dataset(x, labels=labels, fs=128.0)


def test_learns_separable_problem_and_is_deterministic():
    cfg = ClassifierConfig(epochs=15, temporal_kernel=32, seed=3)
    train, test = _separable(seed=0), _separable(seed=1)
    base = build_classifier(cfg, 4, 128, fs=128.0)
    f1 = train_classifier(base, train)
    f2 = train_classifier(base, train)
    assert evaluate(f1, test) >= 0.9
    np.testing.assert_array_equal(f1.logits(test.data), f2.logits(test.data))
    assert len(f1.training_curve) == 15
    # training works on a copy
    assert not torch.equal(base.model.dense.weight, f1.model.dense.weight)


def test_max_norm_constraints_hold_after_training():
    cfg = ClassifierConfig(epochs=3, temporal_kernel=32, learning_rate=0.05)
    f = train_classifier(build_classifier(cfg, 4, 128, fs=128.0), _separable())
    w = f.model.spatial.weight.detach().flatten(1).norm(dim=1)
    assert float(w.max()) <= 1.0 + 1e-6
    assert float(f.model.dense.weight.detach().norm(dim=1).max()) <= 0.25 + 1e-6


def test_evaluate_rejects_augmented_trials():
    ds = _separable(n=4)
    m = build_classifier(ClassifierConfig(temporal_kernel=32), 4, 128, fs=128.0)
    leaked = SubjectDataset(ds.trials, ds.labels, "x", provenance=("real", "aug:noise", "real", "real"))
    with pytest.raises(ClassifierError, match="non-real"):
        evaluate(m, leaked)


def test_single_class_rejected():
    ds = _separable(n=4).subset([0, 2])
    m = build_classifier(ClassifierConfig(temporal_kernel=32), 4, 128, fs=128.0)
    with pytest.raises(ClassifierError, match="single class"):
        train_classifier(m, ds)


def test_accuracy_from_scores_ties_go_to_first_class():
    scores = np.array([[0.5, 0.5], [0.1, 0.9], [0.8, 0.2]])
    assert accuracy_from_scores(scores, np.array([0, 1, 1])) == pytest.approx(2 / 3)
