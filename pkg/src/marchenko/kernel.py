"""Evaluation of the truncated kernel series and the recovered potential.

The potential is ``V(x) = -2 d/dx K(x, x)``, computed by differentiating every
exponential of the diagonal exactly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .recursion import KernelExpansion
from .spectrum import FourierComponent, SpectralDataset

#: Grid points may lie this far below the convergence abscissa.
ABSCISSA_SLACK = 1e-9


class DivergentRegion(ValueError):
    def __init__(self, abscissa: float, offending: np.ndarray):
        offending = np.atleast_1d(offending)
        super().__init__(
            f"series diverges below x* = {abscissa:.6g}; "
            f"{offending.size} grid point(s) starting at x = {offending.min():.6g}"
        )
        self.abscissa = abscissa
        self.offending = offending


@dataclass(frozen=True)
class PotentialProfile:
    x_grid: np.ndarray
    values: np.ndarray
    imaginary_residual: float

    def __post_init__(self):
        x = np.asarray(self.x_grid, dtype=float)
        if x.size > 1 and np.any(np.diff(x) <= 0):
            raise ValueError("x_grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("potential is not finite on the grid")


def convergence_abscissa(dataset: SpectralDataset) -> float:
    """Largest x at which a single component's geometric ratio reaches 1.

    For a component ``(A, k)`` the diagonal series advances by
    ``|A / (2k)| exp(-2 Im(k) x)`` per generation, which falls below 1 for
    ``x > log(|A| / (2|k|)) / (2 Im k)``.  Returns ``-inf`` for an empty
    dataset.  Exact for purely imaginary wavenumbers; a heuristic otherwise.
    """
    if len(dataset) == 0:
        return -math.inf
    return max(
        math.log(abs(c.amplitude) / (2 * abs(c.wavenumber))) / (2 * c.wavenumber.imag)
        for c in dataset
    )


def _check_region(expansion: KernelExpansion, xs: np.ndarray) -> None:
    xstar = convergence_abscissa(expansion.dataset)
    bad = xs[xs < xstar - ABSCISSA_SLACK]
    if bad.size:
        raise DivergentRegion(xstar, bad)


def eval_kernel(expansion: KernelExpansion, x, y):
    """Sum of the expansion terms at ``(x, y)``; broadcasts over arrays.

    No convergence check is made here.
    """
    xs, ys = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    amps = expansion.amplitudes
    if amps.size == 0:
        out = np.zeros(xs.shape, dtype=complex)
    else:
        phase = 1j * (
            np.multiply.outer(xs, expansion.x_frequencies)
            + np.multiply.outer(ys, expansion.y_frequencies)
        )
        out = np.exp(phase) @ amps
    return complex(out) if out.ndim == 0 else out


def eval_diagonal(expansion: KernelExpansion, x_grid, check: bool = True) -> np.ndarray:
    """``K(x, x)`` on a grid.

    Raises
    ------
    DivergentRegion
        If ``check`` and a grid point lies below the convergence abscissa.
    """
    xs = np.atleast_1d(np.asarray(x_grid, dtype=float))
    if check:
        _check_region(expansion, xs)
    return np.asarray(eval_kernel(expansion, xs, xs))


def diagonal_derivative(expansion: KernelExpansion, x_grid) -> np.ndarray:
    xs = np.atleast_1d(np.asarray(x_grid, dtype=float))
    amps = expansion.amplitudes
    if amps.size == 0:
        return np.zeros(xs.shape, dtype=complex)
    kappa = expansion.x_frequencies + expansion.y_frequencies
    return np.exp(1j * np.multiply.outer(xs, kappa)) @ (amps * 1j * kappa)


def eval_potential(expansion: KernelExpansion, x_grid, check: bool = True) -> PotentialProfile:
    xs = np.atleast_1d(np.asarray(x_grid, dtype=float))
    if check:
        _check_region(expansion, xs)
    values = -2.0 * diagonal_derivative(expansion, xs)
    resid = float(np.max(np.abs(values.imag))) if values.size else 0.0
    return PotentialProfile(xs, values, resid)


# -- single-component closed form ------------------------------------------

def geometric_diagonal(component: FourierComponent, x):
    """Resummed single-component diagonal ``-A q / (1 - r q)``, ``q = exp(2ikx)``."""
    q = np.exp(2j * component.wavenumber * np.asarray(x, dtype=float))
    return -component.amplitude * q / (1.0 - component.ratio * q)


def geometric_potential(component: FourierComponent, x):
    """``-2 d/dx`` of :func:`geometric_diagonal`."""
    q = np.exp(2j * component.wavenumber * np.asarray(x, dtype=float))
    dq = 2j * component.wavenumber * q
    dk = -component.amplitude * dq / (1.0 - component.ratio * q) ** 2
    return -2.0 * dk


def potential_csv(expansion: KernelExpansion, x_grid, check: bool = True) -> str:
    """CSV text ``x,k_re,k_im,v_re,v_im`` for a grid."""
    xs = np.atleast_1d(np.asarray(x_grid, dtype=float))
    kxx = eval_diagonal(expansion, xs, check=check)
    prof = eval_potential(expansion, xs, check=False)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "k_re", "k_im", "v_re", "v_im"])
    for x, k, v in zip(xs, kxx, prof.values):
        w.writerow([repr(float(x)), repr(float(k.real)), repr(float(k.imag)), repr(float(v.real)), repr(float(v.imag))])
    return buf.getvalue()
