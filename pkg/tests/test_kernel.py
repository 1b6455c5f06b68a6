import math

import numpy as np
import pytest

from marchenko.kernel import (
    DivergentRegion,
    PotentialProfile,
    convergence_abscissa,
    eval_diagonal,
    eval_kernel,
    eval_potential,
    geometric_diagonal,
    geometric_potential,
    potential_csv,
)
from marchenko.recursion import expand
from marchenko.spectrum import validate_dataset

EMPTY = validate_dataset([])


def _fd(exp, xs, h=1e-5):
    return (eval_diagonal(exp, xs + h) - eval_diagonal(exp, xs - h)) / (2 * h)


def test_empty_expansion():
    exp = expand(EMPTY, 5)
    assert eval_kernel(exp, 0.3, 0.7) == 0
    xs = np.linspace(0, 1, 5)
    assert np.all(eval_diagonal(exp, xs) == 0)
    prof = eval_potential(exp, xs)
    assert np.all(prof.values == 0)
    assert prof.imaginary_residual == 0


def test_seed_only_value(fig1):
    exp = expand(fig1, 1)
    assert eval_kernel(exp, 0.0, 0.0) == pytest.approx(-2.0)


def test_kernel_at_origin_matches_closed_form(fig1):
    exp = expand(fig1, 30)
    assert eval_kernel(exp, 0.0, 0.0) == pytest.approx(-2 / 1.1, rel=1e-12)
    assert eval_kernel(exp, 0.0, 0.0).real == pytest.approx(-1.8181818, abs=1e-7)


def test_off_diagonal_closed_form(fig1):
    # K(x, y) = -A e^{iky} e^{ikx} / (1 - r e^{2ikx}) for one component
    exp = expand(fig1, 30)
    c = fig1[0]
    for x, y in [(0.0, 0.3), (0.1, 0.5), (0.4, 0.45)]:
        q = np.exp(2j * c.wavenumber * x)
        ref = -c.amplitude * np.exp(1j * c.wavenumber * (x + y)) / (1 - c.ratio * q)
        assert eval_kernel(exp, x, y) == pytest.approx(ref, rel=1e-12)


def test_diagonal_closed_form_point(fig1):
    exp = expand(fig1, 30)
    val = eval_diagonal(exp, [0.1])[0]
    ref = geometric_diagonal(fig1[0], 0.1)
    assert abs(val - ref) / abs(ref) < 1e-10


def test_diagonal_large_x(fig1):
    exp = expand(fig1, 30)
    assert abs(eval_diagonal(exp, [5.0])[0]) < 1e-8


def test_potential_matches_finite_difference(fig1):
    exp = expand(fig1, 30)
    xs = np.array([0.2])
    v = eval_potential(exp, xs).values
    fd = -2 * _fd(exp, xs)
    assert abs(v[0] - fd[0]) / abs(v[0]) < 1e-6


def test_potential_matches_closed_form_derivative(fig1):
    exp = expand(fig1, 30)
    v = eval_potential(exp, [0.2]).values[0]
    ref = geometric_potential(fig1[0], 0.2)
    assert abs(v - ref) < 1e-8


def test_geometric_potential_is_derivative_of_diagonal(fig2):
    c = fig2[0]
    x, h = 1.3, 1e-5
    fd = (geometric_diagonal(c, x + h) - geometric_diagonal(c, x - h)) / (2 * h)
    assert geometric_potential(c, x) == pytest.approx(-2 * fd, rel=1e-8)


@pytest.mark.parametrize(
    "pairs,lo,hi",
    [
        ([(2.0, 10j)], 0.0, 1.0),
        ([(1.0, 1j), (1.0, 2j)], 0.5, 2.0),
        ([(0.8 - 0.3j, 0.5 + 1.5j), (0.2j, 3j)], 0.2, 1.5),
    ],
)
def test_potential_fd_interior(pairs, lo, hi):
    ds = validate_dataset(pairs)
    exp = expand(ds, 30)
    xs = np.linspace(lo, hi, 41)[1:-1]
    v = eval_potential(exp, xs, check=False).values
    fd = -2 * _fd(exp, xs)
    rel = np.abs(v - fd) / np.abs(v)
    assert np.max(rel) < 1e-6


@pytest.mark.parametrize("a,beta", [(2.0, 10.0), (2.0, 0.49), (1.0, 1.0), (3.0 - 1j, 2.0)])
def test_series_vs_closed_form_above_abscissa(a, beta):
    ds = validate_dataset([(a, 1j * beta)])
    xstar = convergence_abscissa(ds)
    xs = np.linspace(max(xstar + 0.1, 0.0), xstar + 3.0, 50)
    ref = geometric_diagonal(ds[0], xs)
    # enough generations that the geometric tail at x* + 0.1 is gone
    ratio = math.exp(-2 * beta * 0.1)
    gens = max(30, int(math.log(1e-13) / math.log(ratio)) + 2)
    exp = expand(ds, gens, 0.0)
    rel = np.abs(eval_diagonal(exp, xs) - ref) / np.abs(ref)
    assert np.max(rel) < 1e-10


def test_truncation_monotonicity(fig2):
    xs = np.linspace(0.8, 2.0, 25)
    ref = geometric_diagonal(fig2[0], xs)
    prev = None
    for g in range(1, 60, 3):
        err = np.abs(eval_diagonal(expand(fig2, g, 0.0), xs) - ref)
        if prev is not None:
            assert np.all(err <= prev + 1e-12)
        prev = err


def test_convergence_abscissa_values(fig1, fig2):
    assert convergence_abscissa(fig1) == pytest.approx(math.log(0.1) / 20)
    assert convergence_abscissa(fig1) == pytest.approx(-0.1151, abs=1e-4)
    assert convergence_abscissa(fig2) == pytest.approx(math.log(2 / 0.98) / 0.98)
    assert convergence_abscissa(fig2) == pytest.approx(0.7279, abs=1e-4)
    assert convergence_abscissa(EMPTY) == -math.inf


@pytest.mark.parametrize("ds_fixture", ["fig1", "fig2"])
def test_abscissa_matches_tail_ratio(request, ds_fixture):
    """Ratio of successive diagonal contributions crosses 1 at the abscissa."""
    ds = request.getfixturevalue(ds_fixture)
    exp = expand(ds, 12, 0.0)
    xstar = convergence_abscissa(ds)
    keys = sorted(exp.terms, key=lambda k: k[0][0])
    k = ds[0].wavenumber

    def contrib(key, x):
        return abs(exp.terms[key] * np.exp(1j * k * (key[0][0] + 1) * x))

    for x, below in [(xstar - 0.05, False), (xstar + 0.05, True)]:
        ratio = contrib(keys[-1], x) / contrib(keys[-2], x)
        assert (ratio < 1) == below


def test_divergent_region_raised(fig2):
    exp = expand(fig2, 40)
    with pytest.raises(DivergentRegion) as info:
        eval_diagonal(exp, np.linspace(0, 1, 11))
    assert info.value.abscissa == pytest.approx(0.7279, abs=1e-4)
    with pytest.raises(DivergentRegion):
        eval_potential(exp, [0.5])
    # slack of 1e-9 below the abscissa is tolerated
    xstar = convergence_abscissa(fig2)
    eval_diagonal(exp, [xstar - 5e-10])


def test_imaginary_residual_reported():
    ds = validate_dataset([(1.0 + 0.5j, 0.3 + 2j)])
    prof = eval_potential(expand(ds, 30), np.linspace(0, 1, 11))
    assert prof.imaginary_residual > 0
    assert prof.imaginary_residual == pytest.approx(np.max(np.abs(prof.values.imag)))


def test_real_data_gives_real_potential(fig1):
    prof = eval_potential(expand(fig1, 30), np.linspace(0, 1, 11))
    assert prof.imaginary_residual == 0


def test_profile_requires_increasing_grid(fig1):
    with pytest.raises(ValueError):
        eval_potential(expand(fig1, 5), [0.3, 0.2])
    with pytest.raises(ValueError):
        PotentialProfile(np.array([0.0, 1.0]), np.array([1.0, np.inf]), 0.0)


def test_potential_csv(fig1):
    text = potential_csv(expand(fig1, 30), np.linspace(0, 1, 3))
    lines = text.splitlines()
    assert lines[0] == "x,k_re,k_im,v_re,v_im"
    assert len(lines) == 4
    x, k_re, k_im, v_re, v_im = map(float, lines[1].split(","))
    assert x == 0 and k_re == pytest.approx(-2 / 1.1, abs=1e-6)
