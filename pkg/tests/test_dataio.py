import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from subjtransfer.dataio import (
    DatasetError,
    SubjectDataset,
    SynthConfig,
    TrialTensor,
    concat_datasets,
    load_dataset,
    load_subjects,
    save_dataset,
    save_subjects,
    split_target,
    synth_generate,
)

from conftest import make_dataset


@settings(max_examples=25, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 4), st.integers(1, 3), st.integers(1, 8)),
              elements=st.floats(-1e6, 1e6, width=32)))
def test_save_load_roundtrip_bit_exact(tmp_path_factory, x):
    ds = make_dataset(x.astype(np.float64))
    path = save_dataset(ds, tmp_path_factory.mktemp("ds"))
    back = load_dataset(path)
    np.testing.assert_array_equal(back.data, ds.data)
    np.testing.assert_array_equal(back.labels, ds.labels)
    assert back.trials.channel_names == ds.trials.channel_names
    assert back.subject_id == ds.subject_id and back.trials.fs == ds.trials.fs


def test_manifest_stores_label_names(tmp_path):
    ds = make_dataset(np.zeros((3, 1, 2)) + 1.0, labels=[1, 0, 1])
    save_dataset(ds, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["labels"] == ["right", "left", "right"]
    assert "trial_provenance" not in manifest


def test_provenance_and_extra_roundtrip(tmp_path):
    ds = SubjectDataset(TrialTensor(np.ones((2, 1, 3)), 100.0, ("a",)), np.array([0, 1]), "x",
                        provenance=("real", "aug:flip"), metadata={"augmentation": {"ratio": 1}})
    save_dataset(ds, tmp_path, extra={"provenance": {"method": "flip"}})
    back = load_dataset(tmp_path)
    assert back.provenance == ("real", "aug:flip")
    assert back.metadata == {"augmentation": {"ratio": 1}}
    assert json.loads((tmp_path / "manifest.json").read_text())["provenance"] == {"method": "flip"}


def test_corrupt_files_rejected(tmp_path):
    ds = make_dataset(np.ones((2, 2, 4)))
    save_dataset(ds, tmp_path)
    (tmp_path / "trials.f32").write_bytes(b"\x00" * 12)
    with pytest.raises(DatasetError, match="corrupt manifest"):
        load_dataset(tmp_path)
    save_dataset(ds, tmp_path)
    m = json.loads((tmp_path / "manifest.json").read_text())
    m["labels"][0] = "feet"
    (tmp_path / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(DatasetError, match="unknown class label 'feet'"):
        load_dataset(tmp_path)
    with pytest.raises(DatasetError, match="missing file"):
        load_dataset(tmp_path / "nope")


def test_invariants_enforced():
    with pytest.raises(DatasetError, match="non-finite"):
        TrialTensor(np.array([[[np.nan]]]), 1.0, ("a",))
    with pytest.raises(DatasetError, match="channel names"):
        TrialTensor(np.ones((1, 2, 3)), 1.0, ("a",))
    with pytest.raises(DatasetError, match="duplicate"):
        TrialTensor(np.ones((1, 2, 3)), 1.0, ("a", "a"))
    with pytest.raises(DatasetError, match="labels for"):
        make_dataset(np.ones((2, 1, 3)), labels=[0])
    with pytest.raises(DatasetError, match="unknown class label"):
        make_dataset(np.ones((2, 1, 3)), labels=[0, 2])
    with pytest.raises(DatasetError, match="non-finite"):
        save_dataset(make_dataset(np.full((1, 1, 1), 1e300)), "/tmp/never-written")


def test_split_target():
    subs = [make_dataset(np.ones((2, 1, 3)), subject_id=s) for s in ("a", "b", "c")]
    src, tgt, spec = split_target(subs, "b")
    assert tgt.subject_id == "b" and [s.subject_id for s in src] == ["a", "c"]
    assert spec.source_subjects == ("a", "c")
    with pytest.raises(DatasetError, match="unknown subject"):
        split_target(subs, "z")
    with pytest.raises(DatasetError, match="duplicate"):
        split_target(subs + subs[:1], "a")


def test_concat_and_subset():
    a = make_dataset(np.zeros((2, 1, 3)), subject_id="a")
    b = make_dataset(np.ones((3, 1, 3)), subject_id="b")
    ab = concat_datasets([a, b], "ab")
    assert len(ab) == 5 and ab.subject_id == "ab"
    sub = ab.subset([4, 0])
    np.testing.assert_array_equal(sub.data[:, 0, 0], [1.0, 0.0])


def test_synth_shapes_balance_and_determinism(tmp_path):
    cfg = SynthConfig(n_subjects=3, trials_per_class=5, c=4, p=64, noise_level=0.5, seed=9)
    subs = synth_generate(cfg)
    assert [s.subject_id for s in subs] == ["s001", "s002", "s003"]
    for s in subs:
        assert s.data.shape == (10, 4, 64)
        np.testing.assert_array_equal(np.bincount(s.labels), [5, 5])
    again = synth_generate(cfg)
    for s, t in zip(subs, again):
        np.testing.assert_array_equal(s.data, t.data)
    save_subjects(subs, tmp_path)
    loaded = load_subjects(tmp_path)
    for s, t in zip(subs, loaded):
        np.testing.assert_array_equal(s.data, t.data)


def test_synth_class_frequency_visible():
    cfg = SynthConfig(n_subjects=1, trials_per_class=4, c=3, p=500, noise_level=0.0, subject_mixing_jitter=0.0)
    s = synth_generate(cfg)[0]
    for label, f in zip((0, 1), cfg.class_freqs):
        spec = np.abs(np.fft.rfft(s.data[s.labels == label], axis=-1)).mean(axis=(0, 1))
        assert np.fft.rfftfreq(500, 1 / 250.0)[np.argmax(spec)] == f


def test_synth_validation():
    with pytest.raises(DatasetError, match="class_freqs"):
        synth_generate(SynthConfig(class_freqs=(10.0, 200.0)))
