import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linksight.imaging import (
    ImageKind,
    export_image,
    gadf,
    gasf,
    minmax_rescale,
    polar_encode,
    read_csv_matrix,
    read_pgm,
    recurrence_plot,
    ts_snapshot,
)


def brute_rp(s):
    n = len(s)
    return [[abs(s[i] - s[j]) for j in range(n)] for i in range(n)]


def test_rp_constant():
    assert np.array_equal(recurrence_plot([5, 5, 5]).cells, np.zeros((3, 3)))


def test_rp_worked_example():
    rp = recurrence_plot([0, 1, 3])
    assert rp.cells.tolist() == brute_rp([0, 1, 3]) == [[0, 1, 3], [1, 0, 2], [3, 2, 0]]
    assert rp.kind is ImageKind.RP


def test_rp_binarized_worked_example():
    rp = recurrence_plot([0, 1, 3], epsilon=1.5, binarize=True)
    expected = [[1 if d <= 1.5 else 0 for d in row] for row in brute_rp([0, 1, 3])]
    assert rp.cells.tolist() == expected == [[1, 1, 0], [1, 1, 0], [0, 0, 1]]


def test_rp_heaviside_at_zero_is_one():
    rp = recurrence_plot([0, 2], epsilon=2, binarize=True)
    assert rp.cells.tolist() == [[1, 1], [1, 1]]


def test_rp_binarize_needs_epsilon():
    with pytest.raises(ValueError):
        recurrence_plot([1, 2, 3], binarize=True)


def test_rp_needs_two_samples():
    with pytest.raises(ValueError):
        recurrence_plot([1.0])


def test_minmax_examples():
    assert minmax_rescale([0, 5, 10]).tolist() == [-1, 0, 1]
    assert minmax_rescale([7, 7, 7]).tolist() == [0, 0, 0]


def test_minmax_extrema(rng):
    for _ in range(100):
        x = minmax_rescale(rng.normal(size=int(rng.integers(2, 50))))
        assert x.min() == -1 and x.max() == 1


def test_polar_encoding():
    enc = polar_encode([0, 5, 10])
    assert np.allclose(enc.angles, [np.pi, np.pi / 2, 0])
    assert np.allclose(np.cos(enc.angles), enc.scaled, atol=1e-15)


def test_gasf_worked_example():
    # scaled series (-1, 0, 1) -> angles (pi, pi/2, 0)
    g = gasf([0, 5, 10])
    expected = [[np.cos(a + b) for b in (np.pi, np.pi / 2, 0)] for a in (np.pi, np.pi / 2, 0)]
    assert np.allclose(g.cells, expected, atol=1e-15)
    assert g.cells.tolist() == [[1, 0, -1], [0, -1, 0], [-1, 0, 1]]


def test_gasf_constant():
    assert np.all(gasf([3, 3, 3, 3]).cells == -1)


def test_gasf_diagonal_identity(rng):
    s = rng.normal(size=40)
    x = minmax_rescale(s)
    assert np.allclose(np.diag(gasf(s).cells), 2 * x**2 - 1, atol=1e-12)


def test_gadf_worked_example():
    g = gadf([0, 5, 10]).cells
    assert g[0, 2] == 0  # sin(pi - 0)
    assert g[1, 2] == 1  # sin(pi/2 - 0)
    angles = (np.pi, np.pi / 2, 0)
    expected = [[np.sin(a - b) for b in angles] for a in angles]
    assert np.allclose(g, expected, atol=1e-15)


def test_gadf_antisymmetric(rng):
    g = gadf(rng.normal(size=30)).cells
    assert np.all(np.diag(g) == 0)
    assert np.array_equal(g, -g.T)


def test_gaf_matches_trig_definition(rng):
    s = rng.normal(size=25)
    phi = np.arccos(minmax_rescale(s))
    assert np.allclose(gasf(s).cells, np.cos(phi[:, None] + phi[None, :]), atol=1e-12)
    assert np.allclose(gadf(s).cells, np.sin(phi[:, None] - phi[None, :]), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    vals=st.lists(st.floats(0, 127, allow_nan=False), min_size=2, max_size=40),
    alpha=st.floats(0.1, 10),
    beta=st.floats(-50, 50),
)
def test_affine_properties(vals, alpha, beta):
    s = np.array(vals)
    moved = alpha * s + beta
    assert np.allclose(recurrence_plot(moved).cells, alpha * recurrence_plot(s).cells,
                       rtol=1e-9, atol=1e-9)
    if np.ptp(s) > 1e-6:
        assert np.allclose(gasf(moved).cells, gasf(s).cells, atol=1e-9)
        assert np.allclose(gadf(moved).cells, gadf(s).cells, atol=1e-9)


def test_transforms_pure(rng):
    s = rng.normal(size=20)
    for fn in (recurrence_plot, gasf, gadf, ts_snapshot):
        assert np.array_equal(fn(s).cells, fn(s.copy()).cells)


def test_snapshot_constant_is_horizontal_line():
    img = ts_snapshot(np.full(16, 40.0)).cells
    rows = np.flatnonzero(img.sum(axis=1))
    assert len(rows) == 1 and img[rows[0]].sum() == 16


def test_snapshot_one_pixel_per_column(rng):
    for _ in range(20):
        s = rng.integers(0, 128, size=32)
        img = ts_snapshot(s).cells
        assert np.count_nonzero(img) == 32
        assert np.all(img.sum(axis=0) == 1)
        assert set(np.unique(img)) <= {0.0, 1.0}


def test_snapshot_ramp_is_anti_diagonal():
    n = 128
    img = ts_snapshot(np.arange(n, dtype=float)).cells
    assert np.array_equal(img, np.flipud(np.eye(n)))


def test_export_pgm_zeros():
    data = export_image(np.zeros((2, 2)), "pgm")
    assert data == b"P5\n2 2\n255\n\x00\x00\x00\x00"


def test_export_pgm_scaling():
    data = export_image(np.array([[0.0, 1.0], [2.0, 4.0]]), "pgm")
    assert read_pgm(data).tolist() == [[0, 64], [128, 255]]


def test_export_csv_rp_example():
    assert export_image(recurrence_plot([0, 1, 3]), "csv") == b"0,1,3\n1,0,2\n3,2,0\n"


def test_export_csv_round_trip(rng):
    m = rng.normal(size=(7, 7))
    assert np.array_equal(read_csv_matrix(export_image(m, "csv")), m)


def test_export_unknown_format():
    with pytest.raises(ValueError):
        export_image(np.zeros((2, 2)), "png")
