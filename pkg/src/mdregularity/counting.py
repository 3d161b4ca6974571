"""Occurrence counting of a target submatrix and the counting lower bounds.

Two counters with different units:

* ``count_structured``: one index per slab of a grid partition on every
  axis, positions fixed, so grid cell beta must hold the target entry c_beta.
* ``count_unstructured``: distinct tuples of per-axis index subsets whose
  induced submatrix equals the target after some permutation of hyperplanes.
  Each subset tuple is counted once however many permutations match; the
  number of (subset tuple, permutation) embeddings is also available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations, product
from typing import Sequence

import numpy as np

from .partition import BlockPartition
from .rational import as_fraction, fmt
from .regularity import ScaleError, check_regularity
from .tensor import Tensor, extract

DEFAULT_NODE_BUDGET = 10**8


class CountingError(ValueError):
    pass


def _target_indices(a: Tensor, c: Tensor) -> np.ndarray | None:
    """c's entries as indices into a's alphabet, or None if c uses a symbol a lacks."""
    lookup = []
    for s in c.alphabet.symbols:
        lookup.append(a.alphabet.symbols.index(s) if s in a.alphabet.symbols else -1)
    idx = np.asarray(lookup, dtype=np.int64)[c.array]
    return None if np.any(idx < 0) else idx


def grid_slabs(p: BlockPartition) -> list[list[tuple[int, ...]]]:
    """Per-axis slabs of an all-ordinary grid partition, ordered by first index."""
    if any(not b.ordinary for b in p.blocks):
        raise CountingError("counting needs an all-ordinary grid partition")
    slabs = [sorted({b.ref.axes[i] for b in p.blocks}) for i in range(p.d)]
    if math.prod(len(s) for s in slabs) != len(p.blocks):
        raise CountingError("partition is not a grid of slab products")
    return slabs


def grid_position(slabs, ref) -> tuple[int, ...]:
    return tuple(ax.index(r) for ax, r in zip(slabs, ref.axes))


class _Budget:
    def __init__(self, limit: int) -> None:
        self.limit = limit
        self.nodes = 0

    def tick(self, n: int = 1) -> None:
        self.nodes += n
        if self.nodes > self.limit:
            raise ScaleError(f"counting exceeded the node budget of {self.limit}")


def count_structured(a: Tensor, p: BlockPartition, c: Tensor, node_budget: int = DEFAULT_NODE_BUDGET) -> int:
    """Tuples with one index per slab per axis whose grid cells reproduce ``c``."""
    if p.dims != a.dims:
        raise CountingError("partition does not match the matrix")
    slabs = grid_slabs(p)
    if tuple(len(s) for s in slabs) != c.dims:
        raise CountingError(f"grid shape {tuple(len(s) for s in slabs)} does not match target sizes {c.dims}")
    cidx = _target_indices(a, c)
    if cidx is None:
        return 0
    A = a.array
    d = a.d
    last = [np.asarray(s, dtype=np.intp) for s in slabs[-1]]
    if d == 1:
        return math.prod(int(np.count_nonzero(A[L] == cidx[j])) for j, L in enumerate(last))

    budget = _Budget(node_budget)
    slots = [(i, j) for i in range(d - 1) for j in range(len(slabs[i]))]
    chosen: list[list[int]] = [[0] * len(slabs[i]) for i in range(d - 1)]

    def restrict(masks, s: int, x: int):
        # cells (chosen prefix..., x on axis d-2, last slab j) must equal c[..., s, j]
        pre = [np.asarray(chosen[i], dtype=np.intp) for i in range(d - 2)]
        out = []
        for j, L in enumerate(last):
            vals = A[np.ix_(*pre, np.asarray([x], dtype=np.intp), L)][..., 0, :]
            want = cidx[(Ellipsis, s, j)]
            ok = np.all((vals == want[..., None]).reshape(-1, len(L)), axis=0)
            m = masks[j] & ok
            if not m.any():
                return None
            out.append(m)
        return out

    def rec(k: int, masks) -> int:
        if k == len(slots):
            return math.prod(int(m.sum()) for m in masks)
        i, j = slots[k]
        total = 0
        for x in slabs[i][j]:
            budget.tick()
            chosen[i][j] = x
            nxt = restrict(masks, j, x) if i == d - 2 else masks
            if nxt is not None:
                total += rec(k + 1, nxt)
        return total

    return rec(0, [np.ones(len(L), dtype=bool) for L in last])


@dataclass(frozen=True)
class UnstructuredCount:
    distinct: int
    embeddings: int

    def to_json(self) -> dict:
        return {"distinct": self.distinct, "embeddings": self.embeddings}


def _injective_sets(compat: np.ndarray, budget: _Budget) -> tuple[set[tuple[int, ...]], int]:
    rows = [np.flatnonzero(r) for r in compat]
    found: set[tuple[int, ...]] = set()
    n_emb = 0
    used: list[int] = []

    def rec(j: int) -> None:
        nonlocal n_emb
        if j == len(rows):
            found.add(tuple(sorted(used)))
            n_emb += 1
            return
        for x in rows[j]:
            budget.tick()
            if x in used:
                continue
            used.append(int(x))
            rec(j + 1)
            used.pop()

    rec(0)
    return found, n_emb


def unstructured_counts(a: Tensor, c: Tensor, node_budget: int = DEFAULT_NODE_BUDGET) -> UnstructuredCount:
    if a.d != c.d:
        raise CountingError("target and matrix dimensions differ")
    if any(tj > nj for tj, nj in zip(c.dims, a.dims)):
        raise CountingError(f"target sizes {c.dims} exceed matrix sizes {a.dims}")
    cidx = _target_indices(a, c)
    if cidx is None:
        return UnstructuredCount(0, 0)
    A = a.array
    d = a.d
    budget = _Budget(node_budget)
    # compare every last-axis position j of c against every last-axis index of a
    want = np.moveaxis(cidx, -1, 0)  # (t_last, prefix...)
    distinct = 0
    embeddings = 0
    prefix_combos = [combinations(range(n), t) for n, t in zip(a.dims[:-1], c.dims[:-1])]
    for combo in product(*prefix_combos):
        budget.tick()
        sub = A[np.ix_(*[np.asarray(s, dtype=np.intp) for s in combo], np.arange(a.dims[-1]))] if d > 1 else A
        subsets: set[tuple[int, ...]] = set()
        for perm in product(*[permutations(range(len(s))) for s in combo]):
            budget.tick()
            view = sub[np.ix_(*[np.asarray(q, dtype=np.intp) for q in perm], np.arange(a.dims[-1]))] if d > 1 else sub
            eq = view[None, ...] == want[..., None]  # (t_last, prefix..., n_last)
            compat = eq.reshape(c.dims[-1], -1, a.dims[-1]).all(axis=1)
            if not compat.any(axis=1).all():
                continue
            found, n_emb = _injective_sets(compat, budget)
            subsets |= found
            embeddings += n_emb
        distinct += len(subsets)
    return UnstructuredCount(distinct, embeddings)


def count_unstructured(a: Tensor, c: Tensor, node_budget: int = DEFAULT_NODE_BUDGET) -> int:
    """Distinct subset tuples inducing ``c`` up to per-axis permutations."""
    return unstructured_counts(a, c, node_budget).distinct


def hyperplane_permutations(c: Tensor):
    """Every tensor obtained from ``c`` by permuting hyperplanes along each axis."""
    seen = set()
    for perms in product(*[permutations(range(n)) for n in c.dims]):
        arr = c.array[np.ix_(*[np.asarray(q, dtype=np.intp) for q in perms])]
        key = arr.tobytes()
        if key in seen:
            continue
        seen.add(key)
        yield Tensor(c.dims, c.alphabet, arr.reshape(-1))


def permute_axes(a: Tensor, perms: Sequence[Sequence[int]]) -> Tensor:
    arr = a.array[np.ix_(*[np.asarray(q, dtype=np.intp) for q in perms])]
    return Tensor(a.dims, a.alphabet, arr.reshape(-1))


# -- bounds -------------------------------------------------------------------


def _check_delta(delta) -> Fraction:
    delta = as_fraction(delta)
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return delta


def bound_multi(sizes: Sequence[Sequence[int]], densities, delta) -> Fraction:
    """(1 - delta) * prod of every slab size on every axis * prod over grid cells of rho."""
    delta = _check_delta(delta)
    rho = np.asarray(densities, dtype=object)
    shape = tuple(len(ax) for ax in sizes)
    if rho.shape != shape:
        raise ValueError(f"densities shape {rho.shape} does not match grid {shape}")
    total = Fraction(1) - delta
    for ax in sizes:
        for m in ax:
            if m < 1:
                raise ValueError("slab sizes must be positive")
            total *= m
    for r in rho.reshape(-1):
        r = as_fraction(r)
        if not 0 < r <= 1:
            raise ValueError(f"densities must lie in (0, 1], got {r}")
        total *= r
    return total


def bound_2d(row_sizes: Sequence[int], col_sizes: Sequence[int], densities, delta) -> Fraction:
    """(1 - delta) * prod m_i * prod n_j * prod rho_ij(c_ij) for a t x s grid."""
    return bound_multi([row_sizes, col_sizes], densities, delta)


# -- verification -------------------------------------------------------------


@dataclass
class CountReport:
    structured_count: int
    bound: Fraction
    densities: dict[tuple[int, ...], Fraction]
    hypothesis: str
    hypotheses: dict[tuple[int, ...], object]
    hypotheses_hold: bool
    certified: bool
    satisfied: bool
    notes: list[str] = field(default_factory=list)
    unstructured: UnstructuredCount | None = None

    @property
    def margin(self) -> Fraction:
        return self.structured_count - self.bound

    @property
    def advisory(self) -> bool:
        return not self.certified

    def to_json(self) -> dict:
        def key(b):
            return ",".join(map(str, b))

        return {
            "structured_count": self.structured_count,
            "bound": fmt(self.bound),
            "margin": fmt(self.margin),
            "satisfied": self.satisfied,
            "hypothesis": self.hypothesis,
            "hypotheses_hold": self.hypotheses_hold,
            "certified": self.certified,
            "advisory": self.advisory,
            "densities": {key(b): fmt(r) for b, r in sorted(self.densities.items())},
            "hypotheses": {key(b): h.to_json() for b, h in sorted(self.hypotheses.items())},
            "counting_units": "structured: one index per slab per axis, positions fixed",
            "unstructured": self.unstructured.to_json() if self.unstructured else None,
            "notes": self.notes,
        }


HYPOTHESES = ("regular", "pattern", "pattern-relative")


def verify_counting(
    a: Tensor,
    p: BlockPartition,
    c: Tensor,
    delta,
    hypothesis: str = "regular",
    eps="1/4",
    mode: str | None = None,
    budget: int | None = None,
    seed: int | None = 0,
    probes: int = 20,
    include_unstructured: bool = False,
) -> CountReport:
    """Certify the block hypotheses, then compare the structured count to the lower bound.

    ``hypothesis="regular"`` checks every block for eps-regularity (default
    mode exhaustive-intervals); ``"pattern"`` runs the pattern checker
    (default mode exhaustive, sampled when out of reach); ``"pattern-relative"``
    restricts pattern probes to those found in the partition's blocks.
    The bound uses each block's actual density of the symbol the target puts there.
    """
    from .patterns import check_pattern, check_pattern_relative, probes_from_blocks

    delta = _check_delta(delta)
    if hypothesis not in HYPOTHESES:
        raise ValueError(f"hypothesis must be one of {HYPOTHESES}")
    slabs = grid_slabs(p)
    if tuple(len(s) for s in slabs) != c.dims:
        raise CountingError("grid shape does not match target sizes")
    notes: list[str] = []
    if hypothesis == "regular" and a.d != 2:
        notes.append("block regularity guarantees the count only for 2-dimensional matrices")

    blocks = {grid_position(slabs, b.ref): extract(a, b.ref) for b in p.blocks}
    rho: dict[tuple[int, ...], Fraction] = {}
    for beta, blk in blocks.items():
        sym = c.alphabet.symbols[int(c.array[beta])]
        w = int(np.count_nonzero(blk.array == blk.alphabet.index(sym))) if sym in blk.alphabet.symbols else 0
        rho[beta] = Fraction(w, blk.size)

    certs: dict[tuple[int, ...], object] = {}
    hold = True
    certified = True
    source = probes_from_blocks(list(blocks.values())) if hypothesis == "pattern-relative" else None
    for k, (beta, blk) in enumerate(sorted(blocks.items())):
        if hypothesis == "regular":
            cert = check_regularity(blk, eps, mode or "exhaustive-intervals", budget=budget, seed=(seed or 0) + k)
            ok, exact = cert.regular, cert.certified
        else:
            pmode = mode or "exhaustive"
            try:
                if hypothesis == "pattern":
                    cert = check_pattern(blk, eps, pmode, probes=probes, seed=(seed or 0) + k)
                else:
                    cert = check_pattern_relative(blk, eps, source, pmode, probes=probes, seed=(seed or 0) + k)
            except ScaleError:
                if hypothesis == "pattern":
                    cert = check_pattern(blk, eps, "sampled", probes=probes, seed=(seed or 0) + k)
                else:
                    cert = check_pattern_relative(blk, eps, source, "sampled", probes=probes, seed=(seed or 0) + k)
                notes.append(f"block {beta}: exhaustive pattern check out of reach, sampled instead")
            ok = cert.verdict != "not-pattern"
            exact = cert.verdict != "non-refuted"
        certs[beta] = cert
        hold &= ok
        certified &= exact

    if any(r == 0 for r in rho.values()):
        bound = Fraction(0)
        notes.append("a required symbol has density 0 in its block; the lower bound is vacuous")
    else:
        shape = c.dims
        dens = np.empty(shape, dtype=object)
        for beta, r in rho.items():
            dens[beta] = r
        bound = bound_multi([[len(s) for s in ax] for ax in slabs], dens, delta)
    count = count_structured(a, p, c)
    report = CountReport(
        structured_count=count,
        bound=bound,
        densities=rho,
        hypothesis=hypothesis,
        hypotheses=certs,
        hypotheses_hold=hold,
        certified=certified,
        satisfied=count >= bound,
        notes=notes,
    )
    if include_unstructured:
        report.unstructured = unstructured_counts(a, c)
    return report

