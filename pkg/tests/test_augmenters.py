import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from subjtransfer.augmenters import (
    AugmentError,
    AugmenterConfig,
    add_uniform_noise,
    build_augmented_set,
    flip_signal,
    multiply_scale,
    resample_indices,
)
from subjtransfer.transfer import GanTrainConfig, init_bundle

from conftest import make_dataset

D = np.array([[1.0, -2.0, 3.0, 0.0], [2.0, 2.0, -4.0, 6.0]])


def test_noise_hand_fixture():
    # mean 2, every deviation +-1 -> population std exactly 1
    d = np.array([[1.0, 3.0, 1.0, 3.0], [3.0, 1.0, 3.0, 1.0]])
    u = np.array([[1.0, -1.0, 0.5, 0.0], [-0.5, 0.25, 1.0, -1.0]])
    out = add_uniform_noise(d, gamma=4.0, u=u)
    np.testing.assert_array_equal(out, [[1.25, 2.75, 1.125, 3.0], [2.875, 1.0625, 3.25, 0.75]])


def test_noise_draw_bounded_and_seeded():
    a = add_uniform_noise(D, 2.0, seed=(3, 4))
    np.testing.assert_array_equal(a, add_uniform_noise(D, 2.0, seed=(3, 4)))
    assert np.all(np.abs(a - D) <= D.std() / 2.0)
    assert not np.array_equal(a, add_uniform_noise(D, 2.0, seed=(3, 5)))


def test_multiply_hand_fixture():
    np.testing.assert_array_equal(multiply_scale(D, 0.5), 1.5 * D)
    np.testing.assert_array_equal(multiply_scale(np.array([2.0, -4.0]), 0.25), [2.5, -5.0])


def test_flip_hand_fixture():
    # min over the whole trial is -4
    np.testing.assert_array_equal(flip_signal(D), [[-5.0, -2.0, -7.0, -4.0], [-6.0, -6.0, 0.0, -10.0]])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (2, 5), elements=st.floats(-1e6, 1e6)))
def test_flip_property(d):
    f = flip_signal(d)
    np.testing.assert_array_equal(f, -d + d.min())
    assert f.max() <= 0.0


def test_noise_rejects_bad_gamma():
    with pytest.raises(AugmentError):
        add_uniform_noise(D, 0.0)


def _target(n=6):
    return make_dataset(np.random.default_rng(0).normal(size=(n, 2, 16)), subject_id="t")


@pytest.mark.parametrize("ratio", [10, 20, 30, 40, 50])
@pytest.mark.parametrize("method", ["noise", "multiple", "flip"])
def test_augmented_counts_baselines(method, ratio):
    tgt = _target()
    out = build_augmented_set(tgt, None, None, AugmenterConfig(method, None, ratio, 0))
    assert len(out) == (ratio + 1) * len(tgt)
    np.testing.assert_array_equal(out.data[: len(tgt)], tgt.data)
    assert out.provenance.count("real") == len(tgt)
    assert out.provenance.count(f"aug:{method}") == ratio * len(tgt)
    # balanced round-robin keeps class proportions
    np.testing.assert_array_equal(np.bincount(out.labels), (ratio + 1) * np.bincount(tgt.labels))
    assert out.metadata["augmentation"]["n_augmented"] == ratio * len(tgt)


@pytest.mark.parametrize("ratio", [10, 20, 30, 40, 50])
def test_augmented_counts_cycle_gan(ratio):
    tgt = _target()
    pool = make_dataset(np.random.default_rng(1).normal(size=(25, 2, 16)), subject_id="pool")
    bundle = init_bundle(2, 16, GanTrainConfig(gen_hidden=2, critic_hidden=2, n_res_blocks=0))
    out = build_augmented_set(tgt, pool, bundle, AugmenterConfig("cycle_gan", None, ratio, 0))
    assert len(out) == (ratio + 1) * len(tgt)
    assert out.provenance.count("aug:cycle_gan") == ratio * len(tgt)
    meta = out.metadata["augmentation"]
    assert meta["with_replacement"] is True and len(meta["bundle_sha256"]) == 64


def test_cycle_gan_requires_bundle():
    with pytest.raises(AugmentError, match="bundle"):
        build_augmented_set(_target(), _target(), None, AugmenterConfig("cycle_gan", None, 10, 0))


def test_multiply_default_gamma_applied():
    tgt = _target(2)
    out = build_augmented_set(tgt, None, None, AugmenterConfig("multiple", None, 10, 0))
    np.testing.assert_array_equal(out.data[2], 1.1 * tgt.data[0])
    np.testing.assert_array_equal(out.data[3], 1.1 * tgt.data[1])


@given(st.integers(1, 50), st.integers(1, 200), st.integers(0, 2**31 - 1))
def test_resample_indices_property(n_pool, n_needed, seed):
    idx = resample_indices(n_pool, n_needed, seed)
    assert len(idx) == n_needed and idx.min() >= 0 and idx.max() < n_pool
    if n_pool >= n_needed:
        assert len(set(idx.tolist())) == n_needed
    np.testing.assert_array_equal(idx, resample_indices(n_pool, n_needed, seed))
