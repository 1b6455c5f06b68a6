"""Coefficient recursion for the Marchenko kernel of an exponential-sum data-set.

The kernel is expanded as

    K(x, y) = sum_terms B * exp(i (m . k) x) * exp(i k_l y),

where ``m`` is a vector of nonnegative integers (``x_exponents``) and ``l``
(``y_index``) selects the single wavenumber carrying the y-dependence.
Substituting into the Marchenko equation and matching exponentials gives

* seeds   ``B = -A_n`` with ``m = e_n``, ``l = n``;
* rule j  ``(B, m, l) -> (A_j B / (i (k_l + k_j)), m + e_l + e_j, j)``.

Every rule application adds 2 to the total degree ``sum(m) + 1``, so terms are
organised in generations; terms of one generation that land on the same
``(m, l)`` are merged by adding their amplitudes.

Component indices are zero-based throughout.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

from .spectrum import SpectralDataset

DEFAULT_MAX_GENERATION = 40
DEFAULT_PRUNE_TOLERANCE = 1e-14
DEFAULT_TERM_BUDGET = 10**6
DENOMINATOR_FLOOR = 1e-14


class ExpansionError(ArithmeticError):
    """Base class for recursion failures."""


class DegenerateDenominator(ExpansionError):
    pass


class TermBudgetExceeded(ExpansionError):
    def __init__(self, count: int, budget: int, generation: int):
        super().__init__(
            f"{count} live terms at generation {generation} exceed the budget of {budget}"
        )
        self.count = count
        self.budget = budget
        self.generation = generation


Key = tuple[tuple[int, ...], int]


@dataclass(frozen=True)
class KernelTerm:
    amplitude: complex
    x_exponents: tuple[int, ...]
    y_index: int

    def __post_init__(self):
        m = tuple(int(v) for v in self.x_exponents)
        if any(v < 0 for v in m):
            raise ValueError(f"negative x exponent in {m}")
        if not 0 <= self.y_index < len(m):
            raise ValueError(f"y_index {self.y_index} out of range for {len(m)} components")
        if m[self.y_index] < 1:
            raise ValueError(f"x exponent of the y frequency must be >= 1, got {m}")
        object.__setattr__(self, "x_exponents", m)
        object.__setattr__(self, "amplitude", complex(self.amplitude))

    @property
    def key(self) -> Key:
        return (self.x_exponents, self.y_index)

    @property
    def degree(self) -> int:
        """Total exponential degree ``sum(m) + 1``."""
        return sum(self.x_exponents) + 1

    @property
    def generation(self) -> int:
        return self.degree // 2


def seed_terms(dataset: SpectralDataset) -> list[KernelTerm]:
    """Generation-1 terms: ``B = -A_n`` on ``exp(i k_n (x + y))``."""
    n = len(dataset)
    out = []
    for i, comp in enumerate(dataset):
        m = [0] * n
        m[i] = 1
        out.append(KernelTerm(-comp.amplitude, tuple(m), i))
    return out


def apply_rule(term: KernelTerm, j: int, dataset: SpectralDataset) -> KernelTerm:
    """Apply recursion rule ``j`` (zero-based) to one term."""
    n = len(dataset)
    if not 0 <= j < n:
        raise IndexError(f"rule index {j} out of range for {n} components")
    comp_j = dataset[j]
    denom = 1j * (dataset[term.y_index].wavenumber + comp_j.wavenumber)
    if abs(denom) < DENOMINATOR_FLOOR:
        raise DegenerateDenominator(f"|k_l + k_j| = {abs(denom):.3e}")
    m = list(term.x_exponents)
    m[term.y_index] += 1
    m[j] += 1
    return KernelTerm(comp_j.amplitude * term.amplitude / denom, tuple(m), j)


def _advance(terms: dict[Key, complex], amps: np.ndarray, ks: np.ndarray) -> dict[Key, complex]:
    out: dict[Key, complex] = defaultdict(complex)
    amps = [complex(a) for a in amps]
    ks = [complex(k) for k in ks]
    n = len(amps)
    for (m, l), b in terms.items():
        for j in range(n):
            denom = 1j * (ks[l] + ks[j])
            if abs(denom) < DENOMINATOR_FLOOR:
                raise DegenerateDenominator(f"|k_l + k_j| = {abs(denom):.3e}")
            mm = list(m)
            mm[l] += 1
            mm[j] += 1
            out[(tuple(mm), j)] += amps[j] * b / denom
    return dict(out)


def iterate(terms: Iterable[KernelTerm], dataset: SpectralDataset) -> list[KernelTerm]:
    """Advance one generation: every rule on every term, merged by key.

    The output is sorted by key so that it does not depend on input order.
    """
    current: dict[Key, complex] = defaultdict(complex)
    gens = set()
    for t in terms:
        current[t.key] += t.amplitude
        gens.add(t.generation)
    if len(gens) > 1:
        raise ValueError(f"terms from several generations: {sorted(gens)}")
    nxt = _advance(current, dataset.amplitudes, dataset.wavenumbers)
    return [KernelTerm(b, m, l) for (m, l), b in sorted(nxt.items())]


@dataclass(frozen=True)
class KernelExpansion:
    """Truncated kernel series.

    ``terms`` maps ``(x_exponents, y_index)`` to the merged amplitude; keys of
    different generations never collide because the total degree identifies
    the generation.  ``terminated_at`` is the generation whose terms were all
    pruned (``None`` if the expansion ran to ``max_generation``).
    """

    dataset: SpectralDataset
    terms: dict[Key, complex]
    max_generation: int
    prune_tolerance: float
    generations_computed: int = 0
    terminated_at: int | None = None
    term_counts: tuple[int, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.terms)

    def kernel_terms(self) -> list[KernelTerm]:
        return [KernelTerm(b, m, l) for (m, l), b in self.terms.items()]

    @cached_property
    def _arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ks = self.dataset.wavenumbers
        if not self.terms:
            empty = np.zeros(0, dtype=complex)
            return empty, empty, empty
        keys = list(self.terms)
        amps = np.array([self.terms[key] for key in keys], dtype=complex)
        m = np.array([key[0] for key in keys], dtype=float)
        kx = m @ ks
        ky = ks[[key[1] for key in keys]]
        return amps, kx, ky

    @property
    def amplitudes(self) -> np.ndarray:
        return self._arrays[0]

    @property
    def x_frequencies(self) -> np.ndarray:
        """Per term, the x-frequency ``sum_i m_i k_i``."""
        return self._arrays[1]

    @property
    def y_frequencies(self) -> np.ndarray:
        return self._arrays[2]

    def dump(self) -> list[dict]:
        """Terms in the debug dump format, ordered by generation then key."""
        rows = []
        for (m, l), b in sorted(self.terms.items(), key=lambda kv: (sum(kv[0][0]), kv[0])):
            rows.append(
                {
                    "x_exp": list(m),
                    "y_index": l,
                    "amp_re": b.real,
                    "amp_im": b.imag,
                    "generation": (sum(m) + 1) // 2,
                }
            )
        return rows

    def dumps(self) -> str:
        return json.dumps(self.dump(), indent=1)


def expand(
    dataset: SpectralDataset,
    max_generation: int = DEFAULT_MAX_GENERATION,
    prune_tolerance: float = DEFAULT_PRUNE_TOLERANCE,
    term_budget: int = DEFAULT_TERM_BUDGET,
) -> KernelExpansion:
    """Collect generations ``1..max_generation`` of the kernel series.

    After each generation, terms with ``|B| < prune_tolerance`` are removed; if
    nothing survives the expansion stops early.
    """
    if max_generation < 1:
        raise ValueError("max_generation must be >= 1")
    if prune_tolerance < 0:
        raise ValueError("prune_tolerance must be nonnegative")

    amps = dataset.amplitudes
    ks = dataset.wavenumbers
    live: dict[Key, complex] = {t.key: t.amplitude for t in seed_terms(dataset)}
    collected: dict[Key, complex] = {}
    counts = []
    terminated_at = None
    computed = 0

    for gen in range(1, max_generation + 1):
        if gen > 1:
            live = _advance(live, amps, ks)
        live = {key: b for key, b in live.items() if abs(b) >= prune_tolerance and b != 0}
        computed = gen
        if len(live) > term_budget:
            raise TermBudgetExceeded(len(live), term_budget, gen)
        counts.append(len(live))
        if not live:
            terminated_at = gen
            break
        collected.update(live)

    return KernelExpansion(
        dataset=dataset,
        terms=collected,
        max_generation=max_generation,
        prune_tolerance=prune_tolerance,
        generations_computed=computed,
        terminated_at=terminated_at,
        term_counts=tuple(counts),
    )
