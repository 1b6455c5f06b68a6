"""Per-component Lyapunov analysis of the kernel recursion.

Each component ``(A, k)`` drives a diagonal chain of coefficients
``B^(1) = -A``, ``B^(j+1) = r B^(j)`` with ``r = A / (2ik)``.  Errors in the data
(dA, dk) and in the coefficients (dB) are pushed through that chain, and the
growth of ``|dB^(j)|`` decides whether the component is safe to keep.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .spectrum import FourierComponent, SpectralDataset, SpectrumError

DEFAULT_MARGIN = 1e-6
DEFAULT_RELATIVE_PERTURBATION = 1e-6
DEFAULT_ITERATIONS = 50
#: Sequences at least this long are classified by their growth rate.
MIN_GROWTH_SAMPLES = 10


class AllZeroSequence(ValueError):
    pass


class Classification(str, enum.Enum):
    STABLE = "stable"
    MARGINAL = "marginal"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class PerturbationSpec:
    """Data uncertainties, one entry per component."""

    delta_amplitude: np.ndarray
    delta_wavenumber: np.ndarray
    delta_seed: np.ndarray

    def __post_init__(self):
        arrs = [np.atleast_1d(np.asarray(a, dtype=complex)) for a in
                (self.delta_amplitude, self.delta_wavenumber, self.delta_seed)]
        if len({a.size for a in arrs}) != 1:
            raise ValueError("perturbation vectors must have equal length")
        for name, a in zip(("delta_amplitude", "delta_wavenumber", "delta_seed"), arrs):
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return self.delta_amplitude.size

    @classmethod
    def relative(cls, dataset: SpectralDataset, rel: float = DEFAULT_RELATIVE_PERTURBATION) -> "PerturbationSpec":
        """Amplitude errors ``rel * |A_n|``, no wavenumber or seed errors."""
        n = len(dataset)
        return cls(rel * np.abs(dataset.amplitudes), np.zeros(n), np.zeros(n))

    @classmethod
    def seed_only(cls, dataset: SpectralDataset, delta: complex = 1.0) -> "PerturbationSpec":
        n = len(dataset)
        return cls(np.zeros(n), np.zeros(n), np.full(n, delta, dtype=complex))


def closed_form_exponent(component: FourierComponent) -> float:
    """``log |A / (2k)|``: log magnitude of one diagonal recursion step."""
    return math.log(abs(component.ratio))


def printed_exponent(component: FourierComponent) -> float:
    """The alternative ``log(d / (2 beta))`` with ``A = 2d``, ``k = i beta``.

    Generalised through magnitudes as ``log(|A| / (4|k|))``; it differs from
    :func:`closed_form_exponent` by ``log 2``.  Kept for comparison only.
    """
    return math.log(abs(component.amplitude) / (4.0 * abs(component.wavenumber)))


def propagate_perturbation(
    component: FourierComponent,
    delta_amplitude: complex = 0.0,
    delta_wavenumber: complex = 0.0,
    delta_seed: complex = 0.0,
    n_iterations: int = DEFAULT_ITERATIONS,
    forcing: str = "printed",
) -> np.ndarray:
    """Error sequence ``dB^(1..n)`` along the diagonal chain of one component.

    The homogeneous part multiplies by ``r = A/(2ik)`` each step.  The data
    errors add a source term proportional to ``B^(j)``:

    ``forcing="printed"``
        ``-(B dA - 2 A B dk) / (4 k^2)``, starting from ``dB^(1) = delta_seed``
        (or ``dA`` when the seed error is zero).
    ``forcing="linear"``
        the first-order Taylor expansion of ``(A+dA) B / (2i(k+dk))``, i.e.
        ``B dA / (2ik) - A B dk / (2i k^2)``, starting from
        ``dB^(1) = delta_seed - dA``.

    If the sequence overflows it is cut at the last finite entry, so the
    result may be shorter than ``n_iterations``.
    """
    if n_iterations < 1:
        raise ValueError("n_iterations must be >= 1")
    a = component.amplitude
    k = component.wavenumber
    r = component.ratio
    da = complex(delta_amplitude)
    dk = complex(delta_wavenumber)
    if forcing == "printed":
        seed = complex(delta_seed) if delta_seed != 0 else da
        source = -(da - 2.0 * a * dk) / (4.0 * k * k)
    elif forcing == "linear":
        seed = complex(delta_seed) - da
        source = da / (2j * k) - a * dk / (2j * k * k)
    else:
        raise ValueError(f"unknown forcing {forcing!r}")

    out = np.empty(n_iterations, dtype=complex)
    b = -a
    db = seed
    out[0] = db
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(1, n_iterations):
            db = r * db + source * b
            b = r * b
            if not (math.isfinite(db.real) and math.isfinite(db.imag)):
                return out[:j]
            out[j] = db
    return out


def empirical_exponent(error_sequence: Sequence[float]) -> float:
    """Log of the arithmetic mean of ``|dB^(j)|``."""
    seq = np.abs(np.asarray(error_sequence, dtype=complex))
    if seq.size == 0:
        raise ValueError("empty error sequence")
    mean = float(seq.mean())
    if mean == 0.0:
        raise AllZeroSequence("error sequence vanishes identically")
    return math.log(mean)


def growth_rate(error_sequence: Sequence[float]) -> float:
    """Mean per-step log growth over the trailing half of the sequence.

    Equals ``log(|dB_n| / |dB_m|) / (n - m)`` with ``m`` the midpoint; for a
    geometric sequence this is exactly the log of its ratio.  Returns ``-inf``
    when the tail has decayed to zero.
    """
    seq = np.abs(np.asarray(error_sequence, dtype=complex))
    if seq.size < 2:
        raise ValueError("need at least two entries for a growth rate")
    if not np.any(seq > 0):
        raise AllZeroSequence("error sequence vanishes identically")
    n = seq.size - 1
    m = n // 2
    if seq[n] == 0.0:
        return -math.inf
    if seq[m] == 0.0:
        return math.inf
    return math.log(seq[n] / seq[m]) / (n - m)


@dataclass(frozen=True)
class ComponentReport:
    component: FourierComponent
    closed_form_exponent: float
    empirical_exponent: float
    growth_rate: float
    error_sequence: np.ndarray
    classification: Classification
    iterations_used: int

    @property
    def deciding_exponent(self) -> float:
        if self.error_sequence.size >= MIN_GROWTH_SAMPLES:
            return self.growth_rate
        if self.error_sequence.size:
            return self.empirical_exponent
        return self.closed_form_exponent

    def to_json(self) -> dict:
        a, k = self.component.amplitude, self.component.wavenumber
        return {
            "a": [a.real, a.imag],
            "k": [k.real, k.imag],
            "lambda_closed": self.closed_form_exponent,
            "lambda_empirical": _finite_or_none(self.empirical_exponent),
            "growth_rate": _finite_or_none(self.growth_rate),
            "class": self.classification.value,
        }


def _finite_or_none(v: float):
    return v if math.isfinite(v) else None


def _pair_json(c: FourierComponent) -> dict:
    return {"a": [c.amplitude.real, c.amplitude.imag], "k": [c.wavenumber.real, c.wavenumber.imag]}


@dataclass(frozen=True)
class LyapunovReport:
    entries: tuple[ComponentReport, ...]
    margin: float
    kept: tuple[FourierComponent, ...] = field(default_factory=tuple)
    removed: tuple[FourierComponent, ...] = field(default_factory=tuple)
    all_unstable: bool = False

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i: int) -> ComponentReport:
        return self.entries[i]

    @property
    def all_stable(self) -> bool:
        return all(e.classification is Classification.STABLE for e in self.entries)

    def to_json(self) -> dict:
        return {
            "components": [e.to_json() for e in self.entries],
            "kept": [_pair_json(c) for c in self.kept],
            "removed": [_pair_json(c) for c in self.removed],
            "margin": self.margin,
            "all_unstable": self.all_unstable,
        }


def classify(entry: ComponentReport | float, margin: float = DEFAULT_MARGIN) -> Classification:
    """Stable below ``-margin``, unstable above ``+margin``, marginal between.

    ``entry`` is either a report entry (its deciding exponent is used) or a
    bare exponent.
    """
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    lam = entry.deciding_exponent if isinstance(entry, ComponentReport) else float(entry)
    if lam < -margin:
        return Classification.STABLE
    if lam > margin:
        return Classification.UNSTABLE
    return Classification.MARGINAL


def analyse_component(
    component: FourierComponent,
    delta_amplitude: complex = 0.0,
    delta_wavenumber: complex = 0.0,
    delta_seed: complex = 0.0,
    n_iterations: int = DEFAULT_ITERATIONS,
    margin: float = DEFAULT_MARGIN,
    forcing: str = "printed",
) -> ComponentReport:
    seq = propagate_perturbation(
        component, delta_amplitude, delta_wavenumber, delta_seed, n_iterations, forcing
    )
    mags = np.abs(seq)
    try:
        lam_emp = empirical_exponent(mags)
    except AllZeroSequence:
        lam_emp = -math.inf
    try:
        rate = growth_rate(mags) if mags.size >= 2 else math.nan
    except AllZeroSequence:
        rate = -math.inf
    if mags.size and not np.any(mags > 0):
        # nothing was perturbed: fall back on the closed form
        mags = np.zeros(0)
    entry = ComponentReport(
        component=component,
        closed_form_exponent=closed_form_exponent(component),
        empirical_exponent=lam_emp,
        growth_rate=rate,
        error_sequence=mags,
        classification=Classification.MARGINAL,
        iterations_used=int(seq.size),
    )
    return _with_class(entry, classify(entry, margin))


def _with_class(entry: ComponentReport, cls: Classification) -> ComponentReport:
    return ComponentReport(
        entry.component,
        entry.closed_form_exponent,
        entry.empirical_exponent,
        entry.growth_rate,
        entry.error_sequence,
        cls,
        entry.iterations_used,
    )


def lyapunov_report(
    dataset: SpectralDataset,
    perturbation: PerturbationSpec | None = None,
    n_iterations: int = DEFAULT_ITERATIONS,
    margin: float = DEFAULT_MARGIN,
    forcing: str = "printed",
) -> LyapunovReport:
    """Analyse every component independently, in dataset order."""
    if perturbation is None:
        perturbation = PerturbationSpec.relative(dataset)
    if len(perturbation) != len(dataset):
        raise SpectrumError(
            f"perturbation has {len(perturbation)} entries for {len(dataset)} components"
        )
    entries = tuple(
        analyse_component(
            c,
            perturbation.delta_amplitude[i],
            perturbation.delta_wavenumber[i],
            perturbation.delta_seed[i],
            n_iterations,
            margin,
            forcing,
        )
        for i, c in enumerate(dataset)
    )
    kept = tuple(e.component for e in entries if e.classification is Classification.STABLE)
    removed = tuple(e.component for e in entries if e.classification is not Classification.STABLE)
    return LyapunovReport(entries, margin, kept, removed, all_unstable=bool(entries) and not kept)


def filter_stable(
    dataset: SpectralDataset,
    margin: float = DEFAULT_MARGIN,
    perturbation: PerturbationSpec | None = None,
    n_iterations: int = DEFAULT_ITERATIONS,
) -> tuple[SpectralDataset, list[tuple[complex, complex]], LyapunovReport]:
    """Drop every component that is not classified stable.

    Marginal components are removed as well.  Returns the stable sub-dataset,
    the removed ``(A, k)`` pairs and the full report.
    """
    report = lyapunov_report(dataset, perturbation, n_iterations, margin)
    if report.all_unstable:
        warnings.warn("no component of the dataset is stable", RuntimeWarning, stacklevel=2)
    kept = SpectralDataset(report.kept)
    removed = [(c.amplitude, c.wavenumber) for c in report.removed]
    return kept, removed, report
