import math

import numpy as np
import pytest

from splitmetric.databench import (
    DEFAULT_PERMUTATIONS,
    POLICIES,
    Dataset,
    Provenance,
    bench_table,
    load_dataset,
    permutation_loss,
    permutation_losses,
    policy_sizes,
)
from splitmetric.errors import DataError, DomainError


def write_csv(path, rows):
    path.write_text("\n".join(",".join(str(c) for c in r) for r in rows) + "\n")
    return path


def synthetic(tmp_path, m, n, seed=0, noise=1.0, name="synth.csv"):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((m, n))
    y = x @ rng.standard_normal(n) + noise * rng.standard_normal(m)
    return write_csv(tmp_path / name, np.column_stack([y, x]).tolist())


def in_memory(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    return Dataset(x - x.mean(0), y - y.mean(), Provenance("memory"))


def test_missing_token_imputed_and_centred(tmp_path):
    f = write_csv(tmp_path / "a.csv", [[1, 1], [2, "?"], [3, 3]])
    d = load_dataset(f, target_column=1)
    assert d.target.tolist() == [-1.0, 0.0, 1.0]
    assert d.features[:, 0].tolist() == [-1.0, 0.0, 1.0]
    assert any("imputed 1" in s for s in d.provenance.log)


def test_constant_column_centres_to_zero(tmp_path):
    f = write_csv(tmp_path / "c.csv", [[1, 5, 2], [2, 5, 7], [3, 5, 1]])
    d = load_dataset(f)
    assert np.all(d.features[:, 0] == 0)


@pytest.mark.parametrize("bad", ["nan", "NaN", ""])
def test_nan_rows_dropped(tmp_path, bad):
    f = write_csv(tmp_path / "n.csv", [[1, 2], [bad, 3], [4, 5], [6, 7]])
    d = load_dataset(f)
    assert d.m == 3
    assert any("dropped 1 rows" in s for s in d.provenance.log)


def test_imputation_uses_mean_after_row_drops(tmp_path):
    f = write_csv(tmp_path / "i.csv", [["nan", 100], [1, 2], [2, "?"], [3, 4]])
    d = load_dataset(f)
    # column 1 mean over surviving rows is 3, not 106 / 3
    assert d.features[:, 0].tolist() == [-1.0, 0.0, 1.0]


def test_dropped_columns_and_header(tmp_path):
    f = write_csv(tmp_path / "h.csv", [["id", "x", "y"], [10, 1, 2], [11, 2, 4], [12, 3, 9]])
    d = load_dataset(f, target_column=2, drop_columns=[0], header=True)
    assert (d.m, d.n) == (3, 1)
    assert d.target.tolist() == pytest.approx([-3.0, -1.0, 4.0])


def test_parse_error_reports_location(tmp_path):
    f = write_csv(tmp_path / "p.csv", [[1, 2], [3, "abc"]])
    with pytest.raises(DataError, match=r"p\.csv:2: column 1"):
        load_dataset(f)


def test_ragged_and_bad_indices(tmp_path):
    f = tmp_path / "r.csv"
    f.write_text("1,2\n3\n")
    with pytest.raises(DataError, match=":2:"):
        load_dataset(f)
    g = write_csv(tmp_path / "g.csv", [[1, 2], [3, 4]])
    with pytest.raises(DomainError):
        load_dataset(g, target_column=5)
    with pytest.raises(DomainError):
        load_dataset(g, target_column=0, drop_columns=[0])


def test_empty_after_cleaning(tmp_path):
    with pytest.raises(DomainError, match="no rows left"):
        load_dataset(write_csv(tmp_path / "e.csv", [[1, "nan"], ["", 2]]))
    empty = tmp_path / "z.csv"
    empty.write_text("\n\n")
    with pytest.raises(DomainError, match="no data rows"):
        load_dataset(empty)


def test_all_missing_column(tmp_path):
    with pytest.raises(DomainError, match="no non-missing"):
        load_dataset(write_csv(tmp_path / "q.csv", [[1, "?"], [2, "?"]]))


def test_centering_idempotent(tmp_path):
    f = synthetic(tmp_path, 50, 4)
    d = load_dataset(f)
    back = np.column_stack([d.target, d.features])
    f2 = write_csv(tmp_path / "again.csv", [[repr(v) for v in r] for r in back.tolist()])
    d2 = load_dataset(f2)
    assert np.max(np.abs(d2.features - d.features)) < 1e-12
    assert np.max(np.abs(d2.target - d.target)) < 1e-12


def test_noise_free_loss_vanishes():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((40, 3))
    d = in_memory(x, x @ np.array([1.0, -2.0, 0.5]))
    assert permutation_loss(d, 20, permutations=50, seed=0) < 1e-16 * np.mean(d.target**2)


def test_losses_deterministic_and_thread_independent():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((30, 2))
    d = in_memory(x, x[:, 0] + rng.standard_normal(30))
    a = permutation_losses(d, 10, 600, seed=5, threads=1)
    assert np.array_equal(a, permutation_losses(d, 10, 600, seed=5, threads=4))
    assert np.array_equal(a[:100], permutation_losses(d, 10, 100, seed=5))


def test_loss_invariant_to_row_preshuffle():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((60, 3))
    y = x @ np.ones(3) + rng.standard_normal(60)
    d = in_memory(x, y)
    order = rng.permutation(60)
    d2 = in_memory(x[order], y[order])
    a = permutation_losses(d, 30, 2000, seed=0)
    b = permutation_losses(d2, 30, 2000, seed=0)
    se = math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
    assert abs(a.mean() - b.mean()) < 3 * se


def test_rank_deficient_training_noted():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((30, 3))
    x[:, 2] = x[:, 0]
    d = in_memory(x, rng.standard_normal(30))
    losses = permutation_losses(d, 10, 20, seed=0)
    assert np.all(np.isfinite(losses))
    assert any("rank-deficient" in s for s in d.provenance.log)


def test_permutation_domain():
    d = in_memory(np.ones((10, 2)) + np.arange(20).reshape(10, 2) ** 2, np.arange(10))
    for p in (2, 10):
        with pytest.raises(DomainError):
            permutation_losses(d, p, 5, seed=0)
    with pytest.raises(DomainError):
        permutation_losses(d, 5, 0, seed=0)


@pytest.mark.parametrize(
    "m,n,expected",
    [(243, 10, {"half": 122, "three_quarter": 182, "optimal": 128}),
     (165, 49, {"half": 83, "three_quarter": 124, "optimal": 141}),
     (20, 2, {"half": 10, "three_quarter": 15, "optimal": 12})],
)
def test_policy_sizes(m, n, expected):
    sizes, notes = policy_sizes(m, n)
    assert sizes == expected and notes == []


def test_policy_sizes_clamped_and_degenerate():
    sizes, notes = policy_sizes(10, 7)
    assert sizes == {"half": 8, "three_quarter": 8, "optimal": 9}
    assert len(notes) == 2


@pytest.mark.parametrize("m,n,ratio", [(243, 10, 0.5267), (165, 49, 0.8545)])
def test_bench_optimal_ratio_on_synthetic_tables(tmp_path, m, n, ratio):
    d = load_dataset(synthetic(tmp_path, m, n))
    rep = bench_table(d, permutations=20, seed=0)
    assert round(rep.optimal_ratio, 4) == ratio
    assert [r.policy for r in rep.policies] == list(POLICIES)


def test_optimal_ratio_depends_only_on_shape(tmp_path):
    a = bench_table(load_dataset(synthetic(tmp_path, 120, 6, seed=0, name="a.csv")), permutations=5)
    b = bench_table(load_dataset(synthetic(tmp_path, 120, 6, seed=9, noise=10, name="b.csv")), permutations=5)
    assert a.optimal_ratio == b.optimal_ratio
    assert a.policy("optimal").mean_loss != b.policy("optimal").mean_loss


def test_records_schema(tmp_path):
    rep = bench_table(load_dataset(synthetic(tmp_path, 40, 3)), permutations=10, seed=2)
    recs = rep.records()
    assert [r["policy"] for r in recs] == list(POLICIES)
    assert set(recs[0]) == {"policy", "p", "mean_loss", "ratio", "m", "n", "permutations", "seed"}
    assert all(r["permutations"] == 10 and r["seed"] == 2 for r in recs)


def test_default_permutations():
    assert DEFAULT_PERMUTATIONS == 10_000


def test_optimal_policy_loss_between_half_and_three_quarter(tmp_path):
    d = load_dataset(synthetic(tmp_path, 299, 12, seed=5))
    sizes, _ = policy_sizes(d.m, d.n)
    per = {k: permutation_losses(d, p, 2000, seed=0) for k, p in sizes.items()}
    mean = {k: v.mean() for k, v in per.items()}
    se = {k: v.std(ddof=1) / math.sqrt(v.size) for k, v in per.items()}
    lo = min(mean["half"], mean["three_quarter"]) - 3 * (se["optimal"] + max(se.values()))
    hi = max(mean["half"], mean["three_quarter"]) + 3 * (se["optimal"] + max(se.values()))
    assert lo <= mean["optimal"] <= hi
