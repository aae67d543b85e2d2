import numpy as np
import pytest
from codednfv.convcode import BlockCode
from codednfv.designer import (
    ErasureModel,
    erasure_perr,
    measure_f,
    read_f_table,
    search_gnfv,
    write_f_table,
)
from codednfv.errors import InvalidArgumentError
from codednfv.gf2 import BitMatrix, rank


def test_erasure_model():
    model = ErasureModel(0.1, {1: 0.2, 2: 0.5})
    assert model.erasure_probability(1) == pytest.approx(0.28)
    assert model.erasure_probability(2) == pytest.approx(0.55)
    with pytest.raises(InvalidArgumentError):
        model.erasure_probability(3)


@pytest.mark.parametrize(
    "table", [{}, {1: 0.5, 2: 0.1}, {1: 1.5}]
)
def test_invalid_erasure_model(table):
    with pytest.raises(InvalidArgumentError):
        ErasureModel(0.1, table)


@pytest.mark.parametrize("q", [0.01, 0.1, 0.3])
def test_erasure_perr_closed_forms(q):
    model = ErasureModel.constant(q, 0.0, 2)
    coded = BitMatrix.parse("101/011")
    diversity = BitMatrix.parse("100/011")
    assert erasure_perr(coded, model) == pytest.approx(3 * q**2 * (1 - q) + q**3)
    assert erasure_perr(diversity, model) == pytest.approx(q + (1 - q) * q**2)
    assert erasure_perr(BitMatrix.identity(2), model) == pytest.approx(1 - (1 - q) ** 2)


def test_erasure_perr_uses_column_weight():
    # the parity column is erased with e_2 = q + (1 - q) f(2)
    model = ErasureModel(0.0, {1: 0.0, 2: 0.5})
    assert erasure_perr(BitMatrix.parse("101/011"), model) == pytest.approx(0.0)
    assert erasure_perr(BitMatrix.parse("11"), model) == pytest.approx(0.0)
    model = ErasureModel(0.1, {1: 0.0, 2: 0.5})
    e1, e2 = 0.1, 0.55
    expected = e1**2 + 2 * e1 * (1 - e1) * e2
    assert erasure_perr(BitMatrix.parse("101/011"), model) == pytest.approx(expected)


def test_search_prefers_distance_two():
    model = ErasureModel.constant(1e-2, 1e-3, 2)
    reports = search_gnfv(2, 3, model, budget=1000)
    assert len(reports) == 7
    best = reports[0]
    assert best.min_dist == 2
    assert best.mfr == 2
    assert best.matrix == BitMatrix.parse("011/101")
    assert all(best.p_err < r.p_err for r in reports if r.mfr == 1)
    assert [r.p_err for r in reports] == sorted(r.p_err for r in reports)


def test_search_single_server():
    model = ErasureModel.constant(0.2, 0.1, 1)
    reports = search_gnfv(1, 1, model, budget=1)
    assert len(reports) == 1
    assert reports[0].matrix == BitMatrix.parse("1")
    assert reports[0].p_err == pytest.approx(model.erasure_probability(1))
    assert reports[0].to_json()["matrix"] == "1"


def test_search_samples_large_spaces():
    model = ErasureModel.constant(0.05, 0.01, 3)
    reports = search_gnfv(3, 5, model, budget=50, seed=4)
    assert 0 < len(reports) <= 50
    assert all(rank(r.matrix) == 3 for r in reports)
    assert reports == search_gnfv(3, 5, model, budget=50, seed=4, workers=2)


def test_search_invalid():
    model = ErasureModel.constant(0.1, 0.0, 2)
    with pytest.raises(InvalidArgumentError):
        search_gnfv(2, 3, model, budget=0)
    with pytest.raises(InvalidArgumentError):
        search_gnfv(3, 2, model, budget=10)


def test_measure_f():
    code = BlockCode.repetition(3)
    table = measure_f(code, 0.1, 3, trials=20_000, seed=2)
    assert sorted(table) == [1, 2, 3]
    assert table[1] <= table[2] <= table[3]
    # repetition code fails on two or more flips of three
    assert table[1] == pytest.approx(3 * 0.1**2 * 0.9 + 0.1**3, abs=0.01)
    assert measure_f(code, 0.0, 2, trials=1000, seed=2) == {1: 0.0, 2: 0.0}


def test_f_table_file(tmp_path):
    path = tmp_path / "f.csv"
    write_f_table(path, {1: 0.01, 2: 0.2})
    assert read_f_table(path) == {1: 0.01, 2: 0.2}


def test_erasure_perr_ignores_server_order(rng):
    model = ErasureModel(0.05, {1: 0.01, 2: 0.04, 3: 0.2})
    checked = 0
    while checked < 30:
        g = BitMatrix(rng.integers(0, 2, size=(3, 5), dtype=np.uint8))
        if rank(g) < 3 or 0 in g.column_weights:
            continue
        expected = erasure_perr(g, model)
        for _ in range(5):
            shuffled = g.select_columns(rng.permutation(g.cols).tolist())
            assert erasure_perr(shuffled, model) == pytest.approx(expected)
        checked += 1


def test_search_avoids_combining_when_xor_is_costly():
    """If decoding a XOR of two frames almost always fails, duplicating frames wins."""
    model = ErasureModel(0.01, {1: 1e-3, 2: 0.9})
    reports = search_gnfv(2, 3, model, budget=1000)
    assert [r.max_col_weight for r in reports[:2]] == [1, 1]
    assert all(r.max_col_weight == 2 for r in reports[2:])
    coded = next(r for r in reports if r.matrix == BitMatrix.parse("011/101"))
    assert reports[0].p_err < coded.p_err
