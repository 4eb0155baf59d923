import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bqc.datasets import (
    BasGrid,
    GaussianSpec,
    MixtureSpec,
    bas_patterns,
    bas_target,
    decode_image,
    discretized_gaussian,
    encode_image,
    mixture_target,
    point_mass,
    read_distribution_csv,
    write_distribution_csv,
)
from bqc.distribution import total_variation
from bqc.errors import ValidationError


def brute_force_bas(rows, cols):
    """Every bitstring whose image has all-constant columns or all-constant rows."""
    out = []
    for idx in range(2 ** (rows * cols)):
        img = [[(idx >> (rows * cols - 1 - (r * cols + c))) & 1 for c in range(cols)] for r in range(rows)]
        bars = all(len({img[r][c] for r in range(rows)}) == 1 for c in range(cols))
        stripes = all(len(set(img[r])) == 1 for r in range(rows))
        if bars or stripes:
            out.append(idx)
    return out


def test_bas_2x2():
    assert bas_patterns(BasGrid(2, 2)) == [0, 3, 5, 10, 12, 15]


def test_bas_small_grids():
    assert len(bas_patterns(BasGrid(3, 3))) == 14
    assert bas_patterns(BasGrid(1, 1)) == [0, 1]
    assert bas_patterns(BasGrid(1, 2)) == [0, 1, 2, 3]
    np.testing.assert_allclose(bas_target(BasGrid(1, 2)).probs, [0.25] * 4)


def test_bas_targets():
    p = bas_target(BasGrid(2, 2)).probs
    assert np.all(p[[0, 3, 5, 10, 12, 15]] == 1 / 6)
    assert p.sum() == pytest.approx(1, abs=1e-12)
    q = bas_target(BasGrid(3, 3)).probs
    assert np.count_nonzero(q) == 14
    assert q.max() == pytest.approx(0.0714, abs=1e-4)


@pytest.mark.parametrize("rows", [1, 2, 3, 4])
@pytest.mark.parametrize("cols", [1, 2, 3, 4])
def test_count_law_exhaustive(rows, cols):
    pats = bas_patterns(BasGrid(rows, cols))
    assert len(pats) == 2 ** rows + 2 ** cols - 2
    assert pats == brute_force_bas(rows, cols)
    assert 0 in pats and 2 ** (rows * cols) - 1 in pats
    assert abs(bas_target(BasGrid(rows, cols)).probs.sum() - 1) <= 1e-12


@pytest.mark.parametrize("rows,cols", [(1, 3), (2, 3), (2, 4), (3, 4)])
def test_transpose_symmetry(rows, cols):
    a = bas_patterns(BasGrid(rows, cols))
    b = bas_patterns(BasGrid(cols, rows))
    transposed = sorted(encode_image(decode_image(i, BasGrid(rows, cols)).T) for i in a)
    assert transposed == b


@given(st.integers(0, 2 ** 12 - 1))
def test_image_round_trip(index):
    g = BasGrid(3, 4)
    assert encode_image(decode_image(index, g)) == index


def test_pixel_order_is_row_major():
    assert encode_image([[1, 0], [0, 0]]) == 8
    assert encode_image([[0, 0], [0, 1]]) == 1


def test_invalid_grid():
    with pytest.raises(ValidationError):
        BasGrid(0, 2)
    with pytest.raises(ValidationError):
        BasGrid(5, 5)


def test_point_mass():
    np.testing.assert_array_equal(point_mass(2, 4).probs, [0, 0, 1, 0])


def test_gaussian_peak_and_ratio():
    p = discretized_gaussian(GaussianSpec(16, 2, 7)).probs
    assert np.argmax(p) == 16
    assert p[16] / p[18] == pytest.approx(np.exp(0.5), rel=1e-12)


def test_gaussian_flat_limit():
    p = discretized_gaussian(GaussianSpec(0, 1e6, 3))
    assert total_variation(p, np.full(8, 1 / 8)) <= 1e-6


def test_gaussian_symmetry():
    p = discretized_gaussian(GaussianSpec(64, 4, 7)).probs
    assert abs(p[60] - p[68]) <= 1e-12


@settings(max_examples=50)
@given(st.floats(0, 127.9), st.floats(0.1, 50), st.integers(7, 7))
def test_gaussian_normalized(mu, sigma, n):
    p = discretized_gaussian(GaussianSpec(mu, sigma, n)).probs
    assert abs(p.sum() - 1) <= 1e-12
    assert np.all(p >= 0)


@pytest.mark.parametrize("kwargs", [dict(mean=128, sigma=1, num_qubits=7), dict(mean=-1, sigma=1, num_qubits=7),
                                    dict(mean=3, sigma=0, num_qubits=7)])
def test_gaussian_errors(kwargs):
    with pytest.raises(ValidationError):
        GaussianSpec(**kwargs)


def test_mixture():
    g1, g2 = GaussianSpec(16, 2, 7), GaussianSpec(64, 4, 7)
    p = mixture_target(MixtureSpec(((0.7, g1), (0.3, g2)))).probs
    assert np.argmax(p[:40]) == 16 and 40 + np.argmax(p[40:]) == 64
    assert p[:40].sum() / p[40:].sum() == pytest.approx(0.7 / 0.3, rel=1e-6)
    np.testing.assert_allclose(mixture_target(MixtureSpec(((1.0, g1), (0.0, g2)))).probs,
                               discretized_gaussian(g1).probs, atol=1e-15)
    np.testing.assert_allclose(mixture_target(MixtureSpec(((0.5, g1), (0.5, g1)))).probs,
                               discretized_gaussian(g1).probs, atol=1e-15)


def test_mixture_errors():
    g = GaussianSpec(16, 2, 7)
    with pytest.raises(ValidationError):
        MixtureSpec(((0.7, g), (0.2, g)))
    with pytest.raises(ValidationError):
        MixtureSpec(((0.5, g), (0.5, GaussianSpec(1, 1, 3))))


def test_csv_round_trip(tmp_path):
    p = discretized_gaussian(GaussianSpec(5, 1.3, 4))
    write_distribution_csv(tmp_path / "d.csv", p)
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == "index,probability"
    np.testing.assert_array_equal(read_distribution_csv(tmp_path / "d.csv").probs, p.probs)
