"""Direct Nyström solution of the Marchenko equation.

For fixed ``x`` the equation

    K(x, y) + A(x + y) + \\int_x^inf K(x, z) A(y + z) dz = 0

is truncated to ``z in [x, L]`` and discretised on an equispaced grid, giving
the dense system ``(I + G) u = -a`` with ``a_p = A(x + y_p)`` and
``G_pq = w_q A(y_p + z_q)``.  The solver knows nothing about the coefficient
recursion, which makes it an independent check on the series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.linalg.lapack

from .kernel import ABSCISSA_SLACK, convergence_abscissa, eval_diagonal
from .recursion import KernelExpansion
from .spectrum import SpectralDataset, evaluate_data

TAIL_TOLERANCE = 1e-12
PIVOT_FLOOR = 1e-13
DEFAULT_GRID_SIZE = 1024
MIN_GRID_SIZE = 16

# end corrections of the fourth-order extended trapezoid rule
_GREGORY_ENDS = np.array([17.0, 59.0, 43.0, 49.0]) / 48.0


class OracleError(ArithmeticError):
    pass


class SingularOperator(OracleError):
    pass


class TruncationInsufficient(OracleError):
    pass


def quadrature_weights(n: int, h: float, rule: str = "gregory") -> np.ndarray:
    """Equispaced quadrature weights on ``n`` nodes with spacing ``h``.

    ``"trapezoid"`` is the composite trapezoid rule (second order);
    ``"gregory"`` adds end corrections making it fourth order.
    """
    w = np.full(n, h)
    if rule == "trapezoid":
        w[0] = w[-1] = 0.5 * h
    elif rule == "gregory":
        if n < 8:
            raise ValueError("gregory weights need at least 8 nodes")
        w[:4] = h * _GREGORY_ENDS
        w[-4:] = h * _GREGORY_ENDS[::-1]
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    return w


def default_truncation(dataset: SpectralDataset, x: float) -> float:
    """Right end ``L`` of the interval, so that ``|A(x + L)|`` is negligible.

    Each component is bounded separately by ``TAIL_TOLERANCE / (10 N)``; at
    least one unit of length is always kept.
    """
    if len(dataset) == 0:
        return x + 1.0
    target = TAIL_TOLERANCE / (10.0 * len(dataset))
    need = max(math.log(abs(c.amplitude) / target) / c.wavenumber.imag for c in dataset)
    return max(x + 1.0, need - x)


@dataclass(frozen=True)
class DirectSolution:
    x: float
    y_grid: np.ndarray
    kernel_values: np.ndarray
    truncation_length: float
    grid_size: int
    residual_norm: float
    rule: str = "gregory"

    @property
    def diagonal(self) -> complex:
        """``K(x, x)``, the first grid value."""
        return complex(self.kernel_values[0])


def solve_direct(
    dataset: SpectralDataset,
    x: float,
    grid_size: int = DEFAULT_GRID_SIZE,
    L: float | None = None,
    rule: str = "gregory",
) -> DirectSolution:
    """Solve the discretised Marchenko equation on ``[x, L]``.

    Raises
    ------
    TruncationInsufficient
        If ``|A(x + L)| >= 1e-12``.
    SingularOperator
        If an LU pivot of ``I + G``, or its reciprocal condition estimate,
        falls below ``1e-13``.
    """
    if grid_size < MIN_GRID_SIZE:
        raise ValueError(f"grid_size must be >= {MIN_GRID_SIZE}")
    x = float(x)
    if L is None:
        L = default_truncation(dataset, x)
    if L <= x:
        raise ValueError("truncation point L must exceed x")
    y = np.linspace(x, L, grid_size)

    if len(dataset) == 0:
        return DirectSolution(x, y, np.zeros(grid_size, dtype=complex), L, grid_size, 0.0, rule)

    tail = abs(evaluate_data(dataset, x + L))
    if not tail < TAIL_TOLERANCE:
        raise TruncationInsufficient(f"|A(x + L)| = {tail:.3e} at L = {L:g}")

    w = quadrature_weights(grid_size, y[1] - y[0], rule)
    a = evaluate_data(dataset, x + y)
    # A(y_p + z_q) = sum_n A_n e^{i k_n y_p} e^{i k_n z_q}: build G from the rank-N factors
    phases = np.exp(1j * np.multiply.outer(y, dataset.wavenumbers))
    left = phases * dataset.amplitudes
    right = phases * w[:, None]
    if not (np.all(np.isfinite(left)) and np.all(np.isfinite(right))):
        raise OracleError(f"non-finite operator entries at x = {x:g}")
    op = left @ right.T
    op.flat[:: grid_size + 1] += 1.0
    op_norm = np.linalg.norm(op, 1)
    lu, piv = scipy.linalg.lu_factor(op, overwrite_a=True, check_finite=False)
    pivot = float(np.min(np.abs(np.diag(lu))))
    # partial pivoting can spread a singularity over many moderate pivots
    rcond, info = scipy.linalg.lapack.zgecon(lu, op_norm, norm="1")
    if pivot < PIVOT_FLOOR or info != 0 or rcond < PIVOT_FLOOR:
        raise SingularOperator(
            f"operator not invertible at x = {x:g} (min pivot {pivot:.3e}, rcond {rcond:.3e})"
        )
    u = scipy.linalg.lu_solve((lu, piv), -a, check_finite=False)
    # defect of the discrete system, with G applied through its rank-N factors
    residual = float(np.max(np.abs(u + left @ (right.T @ u) + a)))
    return DirectSolution(x, y, u, L, grid_size, residual, rule)


@dataclass(frozen=True)
class ComparisonPoint:
    x: float
    series: complex | None
    direct: complex
    abs_err: float | None
    rel_err: float | None

    @property
    def divergent(self) -> bool:
        return self.series is None


@dataclass(frozen=True)
class ComparisonReport:
    points: tuple[ComparisonPoint, ...]
    abscissa: float
    residuals: tuple[float, ...] = field(default_factory=tuple)

    @property
    def divergent_points(self) -> list[float]:
        return [p.x for p in self.points if p.divergent]

    @property
    def max_rel_err(self) -> float:
        errs = [p.rel_err for p in self.points if p.rel_err is not None]
        return max(errs) if errs else 0.0

    @property
    def mean_rel_err(self) -> float:
        errs = [p.rel_err for p in self.points if p.rel_err is not None]
        return float(np.mean(errs)) if errs else 0.0

    @property
    def max_abs_err(self) -> float:
        errs = [p.abs_err for p in self.points if p.abs_err is not None]
        return max(errs) if errs else 0.0

    def to_json(self) -> dict:
        def pair(z):
            return None if z is None else [z.real, z.imag]

        return {
            "points": [
                {
                    "x": p.x,
                    "series": pair(p.series),
                    "direct": pair(p.direct),
                    "abs_err": p.abs_err,
                    "rel_err": p.rel_err,
                    "divergent": p.divergent,
                }
                for p in self.points
            ],
            "max_rel_err": self.max_rel_err,
            "mean_rel_err": self.mean_rel_err,
            "max_abs_err": self.max_abs_err,
            "abscissa": self.abscissa if math.isfinite(self.abscissa) else None,
            "divergent_points": self.divergent_points,
        }


def compare(
    expansion: KernelExpansion,
    dataset: SpectralDataset,
    x_grid,
    grid_size: int = DEFAULT_GRID_SIZE,
    L: float | None = None,
    rule: str = "gregory",
) -> ComparisonReport:
    """Series ``K(x, x)`` against the direct solve at each grid point.

    Points below the series' convergence abscissa carry ``series=None`` and
    are left out of the error summary; the direct value is still reported.
    The relative error uses ``|direct|`` as the scale (absolute error when
    the direct value is zero).
    """
    if expansion.dataset != dataset:
        raise ValueError("expansion was built from a different dataset")
    xstar = convergence_abscissa(dataset)
    points = []
    residuals = []
    for x in np.atleast_1d(np.asarray(x_grid, dtype=float)):
        sol = solve_direct(dataset, x, grid_size, L, rule)
        residuals.append(sol.residual_norm)
        direct = sol.diagonal
        if x < xstar - ABSCISSA_SLACK:
            points.append(ComparisonPoint(float(x), None, direct, None, None))
            continue
        series = complex(eval_diagonal(expansion, [x])[0])
        err = abs(series - direct)
        scale = abs(direct)
        points.append(ComparisonPoint(float(x), series, direct, err, err / scale if scale > 0 else err))
    return ComparisonReport(tuple(points), xstar, tuple(residuals))
