"""Synthetic data generation, tail construction, cache files, metrics."""

import numpy as np
import pytest

from byzlab.errors import ConfigError, EvalError
from byzlab.model import (
    Dataset,
    ModelSpec,
    backdoor_eval,
    evaluate,
    gen_synthetic,
    init_params,
    load_dataset,
    local_train,
    save_dataset,
    shard,
    split,
)


def test_zero_tail_fraction():
    ds = gen_synthetic(features=5, classes=2, samples=200, tail_fraction=0.0, seed=1)
    assert not ds.tail_mask.any()


def test_tail_count_matches_fraction():
    ds = gen_synthetic(features=10, classes=3, samples=5000, tail_fraction=0.02, seed=3)
    assert abs(int(ds.tail_mask.sum()) - 100) <= 1


def test_tail_geometrically_separated():
    ds = gen_synthetic(features=8, classes=3, samples=1000, tail_fraction=0.05, seed=7)
    tail_center = ds.features[ds.tail_mask].mean(axis=0)
    for c in range(3):
        main = ds.features[(ds.labels == c) & ~ds.tail_mask]
        assert np.linalg.norm(main.mean(axis=0) - tail_center) >= 6.0


def test_tail_belongs_to_class_zero():
    ds = gen_synthetic(features=5, classes=3, samples=500, tail_fraction=0.04, seed=2)
    assert (ds.labels[ds.tail_mask] == 0).all()


def test_deterministic_per_seed():
    a = gen_synthetic(features=4, classes=2, samples=300, tail_fraction=0.02, seed=5)
    b = gen_synthetic(features=4, classes=2, samples=300, tail_fraction=0.02, seed=5)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)
    c = gen_synthetic(features=4, classes=2, samples=300, tail_fraction=0.02, seed=6)
    assert not np.array_equal(a.features, c.features)


def test_invalid_tail_fraction():
    with pytest.raises(ConfigError):
        gen_synthetic(features=4, classes=2, samples=300, tail_fraction=0.2, seed=1)


def test_clean_baseline_reaches_90_percent():
    spec = ModelSpec(arch="logreg", features=20, classes=3)
    ds = gen_synthetic(features=20, classes=3, samples=6000, tail_fraction=0.02, seed=0)
    train, heldout = split(ds, 4000)
    delta = local_train(
        spec, init_params(spec), train.features, train.labels,
        epochs=3, lr=0.5, batch_size=64, rng=np.random.default_rng(0),
    )
    assert evaluate(spec, delta, heldout) >= 0.9


def test_untrained_binary_model_is_chance_level():
    spec = ModelSpec(arch="logreg", features=10, classes=2)
    accs = []
    for seed in range(20):
        ds = gen_synthetic(
            features=10, classes=2, samples=2000, tail_fraction=0.0, seed=seed
        )
        # weight seed independent of the data seed, so the random model
        # carries no information about the cluster directions
        w = init_params(spec, np.random.default_rng(10_000 + seed))
        accs.append(evaluate(spec, w, ds))
    assert abs(float(np.mean(accs)) - 0.5) <= 0.05


def test_backdoor_eval_ordering():
    """A model overfit to backdoor-labeled tail data beats the clean
    model's tail error at sending tail samples to the target."""
    spec = ModelSpec(arch="logreg", features=10, classes=3)
    ds = gen_synthetic(features=10, classes=3, samples=2000, tail_fraction=0.05, seed=4)
    tail = ds.subset(np.flatnonzero(ds.tail_mask))
    poisoned = Dataset(
        features=tail.features,
        labels=np.full(len(tail), ds.backdoor_target, dtype=np.int64),
        tail_mask=tail.tail_mask,
        backdoor_target=ds.backdoor_target,
    )
    overfit = local_train(
        spec, init_params(spec), poisoned.features, poisoned.labels,
        epochs=20, lr=0.5, batch_size=32, rng=np.random.default_rng(1),
    )
    clean = local_train(
        spec, init_params(spec), ds.features, ds.labels,
        epochs=3, lr=0.5, batch_size=32, rng=np.random.default_rng(1),
    )
    assert backdoor_eval(spec, overfit, ds) >= backdoor_eval(spec, clean, ds)
    assert backdoor_eval(spec, overfit, ds) >= 0.9


def test_evaluate_empty_slices_error():
    spec = ModelSpec(arch="logreg", features=4, classes=2)
    ds = gen_synthetic(features=4, classes=2, samples=200, tail_fraction=0.05, seed=1)
    all_tail = ds.with_tail_mask(np.ones(len(ds), dtype=bool))
    with pytest.raises(EvalError):
        evaluate(spec, init_params(spec), all_tail)
    no_tail = ds.with_tail_mask(np.zeros(len(ds), dtype=bool))
    with pytest.raises(EvalError):
        backdoor_eval(spec, init_params(spec), no_tail)


def test_split_and_shard():
    ds = gen_synthetic(features=4, classes=2, samples=1000, tail_fraction=0.02, seed=1)
    train, heldout = split(ds, 700)
    assert len(train) == 700 and len(heldout) == 300
    shards = shard(train, 7)
    assert sum(len(s) for s in shards) == 700
    assert {len(s) for s in shards} == {100}


def test_cache_file_roundtrip(tmp_path):
    ds = gen_synthetic(features=6, classes=3, samples=300, tail_fraction=0.03, seed=9)
    path = tmp_path / "cache.txt"
    save_dataset(ds, path)
    loaded = load_dataset(path)
    np.testing.assert_allclose(loaded.features, ds.features)
    assert np.array_equal(loaded.labels, ds.labels)
    assert np.array_equal(loaded.tail_mask, ds.tail_mask)
    assert loaded.backdoor_target == ds.backdoor_target


def test_cache_file_validates_labels(tmp_path):
    ds = gen_synthetic(features=3, classes=2, samples=150, tail_fraction=0.0, seed=9)
    path = tmp_path / "cache.txt"
    save_dataset(ds, path)
    text = path.read_text().splitlines()
    text[0] = "# features=3 classes=1 backdoor_target=0"
    path.write_text("\n".join(text) + "\n")
    with pytest.raises(ConfigError):
        load_dataset(path)
