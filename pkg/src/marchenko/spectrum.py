"""Spectral data model for exponential-sum data-sets.

The data-set is a finite sum of decaying complex exponentials

    A(x) = sum_n A_n exp(i k_n x),    Im k_n > 0,

stored as an ordered, immutable collection of ``FourierComponent``.  Besides
validation and evaluation this module converts two other representations into
components: the poles/residues of a rational reflection coefficient, and
sampled values of A(x) on a fixed wavenumber grid (linear least squares).

File formats
------------
Dataset (JSON)::

    {"components": [{"a_re": .., "a_im": .., "k_re": .., "k_im": ..}, ...]}

Samples (CSV), header ``x,a_re,a_im``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

#: Two wavenumbers closer than this are treated as the same component.
SAME_WAVENUMBER_TOL = 1e-12

#: Design matrices with a larger condition estimate are rejected by the fit.
MAX_CONDITION = 1e12


class SpectrumError(ValueError):
    """Base class for invalid spectral data."""


class NonDecayingComponent(SpectrumError):
    pass


class PoleInLowerHalfPlane(SpectrumError):
    pass


class LengthMismatch(SpectrumError):
    pass


class Underdetermined(SpectrumError):
    pass


class RankDeficient(SpectrumError):
    pass


@dataclass(frozen=True)
class FourierComponent:
    """One term ``amplitude * exp(i * wavenumber * x)`` of the data-set."""

    amplitude: complex
    wavenumber: complex

    def __post_init__(self):
        a = complex(self.amplitude)
        k = complex(self.wavenumber)
        if not (math.isfinite(a.real) and math.isfinite(a.imag)):
            raise SpectrumError(f"amplitude {a!r} is not finite")
        if not (math.isfinite(k.real) and math.isfinite(k.imag)):
            raise SpectrumError(f"wavenumber {k!r} is not finite")
        if k.imag <= 0.0:
            raise NonDecayingComponent(
                f"wavenumber {k!r} must have a strictly positive imaginary part"
            )
        if a == 0:
            raise SpectrumError("zero-amplitude components are not stored")
        object.__setattr__(self, "amplitude", a)
        object.__setattr__(self, "wavenumber", k)

    @property
    def ratio(self) -> complex:
        """Multiplier of one diagonal recursion step, ``A / (2ik)``."""
        return self.amplitude / (2j * self.wavenumber)


@dataclass(frozen=True)
class SpectralDataset:
    """Ordered, duplicate-free collection of Fourier components.

    Build instances with :func:`validate_dataset` (or ``from_pairs``), which
    merges duplicate wavenumbers and drops zero amplitudes.
    """

    components: tuple[FourierComponent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        comps = tuple(self.components)
        for i, c in enumerate(comps):
            if not isinstance(c, FourierComponent):
                raise TypeError(f"component {i} is not a FourierComponent")
            for other in comps[:i]:
                if abs(other.wavenumber - c.wavenumber) < SAME_WAVENUMBER_TOL:
                    raise SpectrumError(
                        f"duplicate wavenumber {c.wavenumber!r}; use validate_dataset to merge"
                    )
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[complex, complex]]) -> "SpectralDataset":
        return validate_dataset(pairs)

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i: int) -> FourierComponent:
        return self.components[i]

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([c.amplitude for c in self.components], dtype=complex)

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.array([c.wavenumber for c in self.components], dtype=complex)

    def pairs(self) -> list[tuple[complex, complex]]:
        return [(c.amplitude, c.wavenumber) for c in self.components]

    def __call__(self, x):
        return evaluate_data(self, x)


def validate_dataset(raw_components: Iterable[tuple[complex, complex]]) -> SpectralDataset:
    """Build a dataset from ``(amplitude, wavenumber)`` pairs.

    Components whose wavenumbers agree to within ``SAME_WAVENUMBER_TOL`` are
    merged by adding amplitudes (the first occurrence fixes the wavenumber and
    the position); amplitudes that are exactly zero after merging are dropped.
    An empty input is legal.

    Raises
    ------
    NonDecayingComponent
        If any wavenumber has ``Im k <= 0``.
    """
    merged: list[list[complex]] = []
    for a, k in raw_components:
        a = complex(a)
        k = complex(k)
        if not (math.isfinite(k.real) and math.isfinite(k.imag)):
            raise SpectrumError(f"wavenumber {k!r} is not finite")
        if k.imag <= 0.0:
            raise NonDecayingComponent(
                f"wavenumber {k!r} must have a strictly positive imaginary part"
            )
        for slot in merged:
            if abs(slot[1] - k) < SAME_WAVENUMBER_TOL:
                slot[0] += a
                break
        else:
            merged.append([a, k])
    return SpectralDataset(
        tuple(FourierComponent(a, k) for a, k in merged if a != 0)
    )


def evaluate_data(dataset: SpectralDataset, x):
    """Evaluate ``A(x) = sum_n A_n exp(i k_n x)``; ``x`` may be scalar or array."""
    xs = np.asarray(x, dtype=float)
    if len(dataset) == 0:
        out = np.zeros(xs.shape, dtype=complex)
    else:
        phase = np.multiply.outer(xs, 1j * dataset.wavenumbers)
        out = np.exp(phase) @ dataset.amplitudes
    return complex(out) if out.ndim == 0 else out


def rational_to_components(
    poles: Sequence[complex], residues: Sequence[complex]
) -> SpectralDataset:
    """Components of the data-set for a reflection coefficient with simple poles.

    For ``R(k) = sum_n r_n / (k - p_n)`` with every ``p_n`` in the upper
    half-plane, closing the contour above gives, for ``t > 0``,

        (2 pi)^-1 \\int R(k) exp(ikt) dk = sum_n i r_n exp(i p_n t),

    so each pole contributes a component with amplitude ``i * r_n``.
    """
    if len(poles) != len(residues):
        raise LengthMismatch(f"{len(poles)} poles but {len(residues)} residues")
    for p in poles:
        if complex(p).imag <= 0.0:
            raise PoleInLowerHalfPlane(f"pole {p!r} is not in the upper half-plane")
    return validate_dataset((1j * complex(r), complex(p)) for p, r in zip(poles, residues))


@dataclass(frozen=True)
class FitResult:
    dataset: SpectralDataset
    residual_norm: float
    condition: float


def fit_amplitudes(
    samples: Sequence[tuple[float, complex]], wavenumbers: Sequence[complex]
) -> FitResult:
    """Least-squares amplitudes for sampled data on a fixed wavenumber grid.

    Parameters
    ----------
    samples
        ``(x, A(x))`` pairs.
    wavenumbers
        Candidate ``k_n``; each must have a positive imaginary part.

    Returns
    -------
    FitResult
        Fitted dataset (zero amplitudes dropped), the 2-norm of the residual
        and the condition estimate of the design matrix.
    """
    ks = np.asarray([complex(k) for k in wavenumbers], dtype=complex)
    if np.any(ks.imag <= 0.0):
        raise NonDecayingComponent("all fit wavenumbers need Im k > 0")
    if len(samples) < len(ks):
        raise Underdetermined(
            f"{len(samples)} samples cannot determine {len(ks)} amplitudes"
        )
    if len(ks) == 0:
        values = np.asarray([complex(v) for _, v in samples], dtype=complex)
        return FitResult(SpectralDataset(), float(np.linalg.norm(values)), 1.0)

    xs = np.asarray([float(x) for x, _ in samples])
    values = np.asarray([complex(v) for _, v in samples], dtype=complex)
    design = np.exp(1j * np.multiply.outer(xs, ks))
    cond = float(np.linalg.cond(design))
    if not cond < MAX_CONDITION:
        raise RankDeficient(f"design matrix condition estimate {cond:.3e} exceeds {MAX_CONDITION:.0e}")
    amps, *_ = np.linalg.lstsq(design, values, rcond=None)
    residual = float(np.linalg.norm(design @ amps - values))
    return FitResult(validate_dataset(zip(amps, ks)), residual, cond)


# -- file formats -----------------------------------------------------------

def dataset_to_json(dataset: SpectralDataset) -> dict:
    return {
        "components": [
            {
                "a_re": c.amplitude.real,
                "a_im": c.amplitude.imag,
                "k_re": c.wavenumber.real,
                "k_im": c.wavenumber.imag,
            }
            for c in dataset
        ]
    }


def dataset_from_json(obj: dict) -> SpectralDataset:
    try:
        rows = obj["components"]
        pairs = [
            (complex(float(r["a_re"]), float(r["a_im"])), complex(float(r["k_re"]), float(r["k_im"])))
            for r in rows
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise SpectrumError(f"malformed dataset document: {exc}") from exc
    return validate_dataset(pairs)


def load_dataset(path: str | Path) -> SpectralDataset:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpectrumError(f"{path}: {exc}") from exc
    return dataset_from_json(obj)


def save_dataset(dataset: SpectralDataset, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dataset_to_json(dataset), indent=2) + "\n")


def load_samples(path: str | Path) -> list[tuple[float, complex]]:
    """Read a ``x,a_re,a_im`` CSV file."""
    samples = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"x", "a_re", "a_im"} <= set(reader.fieldnames):
            raise SpectrumError(f"{path}: expected header x,a_re,a_im")
        for row in reader:
            try:
                samples.append((float(row["x"]), complex(float(row["a_re"]), float(row["a_im"]))))
            except (TypeError, ValueError) as exc:
                raise SpectrumError(f"{path}: bad row {row}: {exc}") from exc
    return samples
