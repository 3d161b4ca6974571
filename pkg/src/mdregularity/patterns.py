"""Epsilon-regular patterns, random and Hadamard-derived matrices, and the
three-dimensional counterexample.

A 1-dimensional matrix is always a pattern. A d-dimensional matrix M of
order n with symbol densities rho_sigma is a pattern when, for every binary
(d-1)-dimensional pattern probe P of order n and density rho' >= eps, and
for every direction, at least (1 - eps) n hyperplanes H satisfy: the masked
hyperplane H * P is a (d-1)-dimensional pattern whose density of each symbol
sigma (with rho_sigma > 0) is at least rho_sigma rho' (1 - eps).

Probe families:

``exhaustive``  every binary probe of sufficient density (itself certified)
``sampled``     random balanced probes, certified before use
``relative``    probes cut from a supplied set of blocks
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .partition import Block, BlockPartition
from .rational import as_fraction, ceil_mul, epsilon as _epsilon, fmt
from .regularity import RegularityCertificate, ScaleError, check_regularity
from .tensor import Alphabet, BlockRef, Tensor, TensorError, densities as _densities, entrywise_product, hyperplane

DEFAULT_PATTERN_CAP = 2**24
MAX_TRANSCRIPT = 5


def exhaustive_work(d: int, n: int) -> int:
    """Rough count of hyperplane evaluations an exhaustive check of a d-dim order-n matrix needs."""
    if d <= 1:
        return 1
    if d == 2:
        return 2**n * 2 * n
    inner = exhaustive_work(d - 1, n)
    return 2 ** (n ** (d - 1)) * (d * n + 1) * inner


def exhaustive_feasible(t: Tensor, cap: int = DEFAULT_PATTERN_CAP) -> bool:
    return t.d == 1 or exhaustive_work(t.d, t.dims[0]) <= cap


@dataclass(frozen=True)
class ProbeFailure:
    probe: Tensor
    direction: int
    passed: int
    required: int
    probe_certified: bool = True

    def to_json(self) -> dict:
        return {
            "probe": {"dims": list(self.probe.dims), "data": [int(x) for x in self.probe.array.reshape(-1)]},
            "direction": self.direction,
            "passed": self.passed,
            "required": self.required,
            "probe_certified": self.probe_certified,
        }


@dataclass
class PatternCertificate:
    verdict: str  # pattern | not-pattern | non-refuted
    eps: Fraction
    densities: dict[str, Fraction]
    probes: dict
    pass_counts: list[int | None]
    required: int
    failures: list[ProbeFailure] = field(default_factory=list)
    relative: bool = False

    @property
    def is_pattern(self) -> bool:
        return self.verdict == "pattern"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "eps": fmt(self.eps),
            "relative": self.relative,
            "densities": {s: fmt(q) for s, q in self.densities.items()},
            "probes": self.probes,
            "min_pass_counts": self.pass_counts,
            "required": self.required,
            "failures": [f.to_json() for f in self.failures],
        }


def _key(t: Tensor) -> tuple:
    return (t.dims, t.alphabet.symbols, t.array.tobytes())


def _bits(n_bits: int, min_weight: int) -> np.ndarray:
    codes = np.arange(2**n_bits, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(n_bits)) & 1).astype(np.int8)
    return bits[bits.sum(axis=1) >= min_weight]


def _binary(arr: np.ndarray) -> Tensor:
    return Tensor(arr.shape, Alphabet.binary(), arr.reshape(-1))


@dataclass
class _Outcome:
    passed: bool
    n_probes: int
    min_pass: list[int | None]
    failures: list[ProbeFailure]
    discarded: int = 0


class _Checker:
    """Recursive evaluator sharing a cache across nested pattern checks."""

    def __init__(self, eps: Fraction, exact: bool, probes: int, seed: int, cap: int) -> None:
        self.eps = eps
        self.exact = exact
        self.probes = probes
        self.seed = seed
        self.cap = cap
        self.cache: dict[tuple, bool] = {}
        self.certified_cache: dict[tuple, bool] = {}

    # -- probe families ------------------------------------------------

    def required(self, n: int) -> int:
        return ceil_mul(1 - self.eps, n)

    def probe_weight(self, volume: int) -> int:
        return max(-(-volume // 2), ceil_mul(self.eps, volume))

    def inner_exact(self, d: int, n: int) -> bool:
        # sampled checks certify their probes by sampled checks too
        return self.exact

    def exhaustive_probes(self, k: int, n: int) -> list[np.ndarray]:
        """All binary k-dim probes of order n with density >= eps that are patterns."""
        vol = n**k
        bits = _bits(vol, ceil_mul(self.eps, vol))
        if k == 1:
            return list(bits)
        return [b.reshape((n,) * k) for b in bits if self.is_pattern(_binary(b.reshape((n,) * k)))]

    def sampled_probes(self, k: int, n: int, salt: int) -> tuple[list[np.ndarray], int, bool]:
        vol = n**k
        w = self.probe_weight(vol)
        out, discarded = [], 0
        certified = k == 1 or self.inner_exact(k, n)
        draw = 0
        while len(out) < self.probes and draw < 4 * self.probes + 16:
            rng = np.random.default_rng([self.seed, salt, k, n, draw])
            draw += 1
            flat = np.zeros(vol, dtype=np.int8)
            flat[rng.choice(vol, size=w, replace=False)] = 1
            probe = flat.reshape((n,) * k) if k > 1 else flat
            if k > 1 and not self.is_pattern(_binary(probe)):
                discarded += 1
                continue
            out.append(probe)
        return out, discarded, certified

    # -- core --------------------------------------------------------------

    def is_pattern(self, m: Tensor) -> bool:
        if m.d == 1:
            return True
        key = _key(m)
        hit = self.cache.get(key)
        if hit is None:
            n = m.dims[0]
            exact = self.inner_exact(m.d, n)
            if exact and exhaustive_work(m.d, n) > self.cap:
                hit = self._constant_rule(m)
                if hit is None:
                    raise ScaleError(f"exhaustive pattern check of a {m.d}-dim matrix of order {n} exceeds the cap")
            else:
                if exact:
                    probes = self.exhaustive_probes(m.d - 1, n)
                else:
                    probes, _, _ = self.sampled_probes(m.d - 1, n, zlib.crc32(key[2]))
                hit = self.evaluate(m, probes, stop_early=True).passed
            self.cache[key] = hit
        return hit

    @staticmethod
    def _constant_rule(m: Tensor) -> bool | None:
        # masking a constant matrix by a pattern probe yields a relabelled probe
        # (or the all-"0" matrix), which is again a pattern meeting every floor
        return True if np.unique(m.array).size == 1 else None

    def _floors(self, m: Tensor) -> list[tuple[int, int, bool]]:
        """(symbol index, weight in m, symbol is "0") for every symbol present in m."""
        counts = np.bincount(m.array.reshape(-1), minlength=m.alphabet.size)
        return [(s, int(w), m.alphabet.symbols[s] == "0") for s, w in enumerate(counts) if w > 0]

    def evaluate(self, m: Tensor, probes: Sequence[np.ndarray], stop_early: bool, certified: bool = True) -> _Outcome:
        n, d = m.dims[0], m.d
        need = self.required(n)
        min_pass: list[int | None] = [None] * d
        failures: list[ProbeFailure] = []
        if not probes:
            return _Outcome(True, 0, min_pass, failures)
        floors = self._floors(m)
        vol = m.size
        q, p = self.eps.denominator, self.eps.numerator
        if d == 2:
            P = np.asarray(probes, dtype=np.int64)  # (K, n)
            ones = P.sum(axis=1)
            for direction in range(2):
                lines = m.array if direction == 0 else m.array.T  # line h = hyperplane at position h
                ok = np.ones((len(P), n), dtype=bool)
                for s, w_all, is_zero in floors:
                    w = P @ (lines == s).T.astype(np.int64)
                    if is_zero:
                        w = w + (n - ones)[:, None]
                    ok &= w * vol * q >= (w_all * (q - p)) * ones[:, None]
                counts = ok.sum(axis=1)
                min_pass[direction] = int(counts.min())
                bad = np.flatnonzero(counts < need)
                for b in bad[:MAX_TRANSCRIPT - len(failures)]:
                    failures.append(ProbeFailure(_binary(P[b].astype(np.int8)), direction, int(counts[b]), need, certified))
                if bad.size and stop_early:
                    break
            return _Outcome(not failures, len(P), min_pass, failures)

        examined = 0
        for probe in probes:
            examined += 1
            pt = _binary(np.asarray(probe, dtype=np.int8))
            rho_p = int(pt.array.sum())
            for direction in range(d):
                passed = 0
                for h in range(n):
                    prod = entrywise_product(hyperplane(m, direction, h), pt)
                    if self._meets_floors(prod, floors, m.alphabet, vol, rho_p, q, p) and self.is_pattern(prod):
                        passed += 1
                min_pass[direction] = passed if min_pass[direction] is None else min(min_pass[direction], passed)
                if passed < need:
                    if len(failures) < MAX_TRANSCRIPT:
                        failures.append(ProbeFailure(pt, direction, passed, need, certified))
                    if stop_early:
                        return _Outcome(False, examined, min_pass, failures)
        return _Outcome(not failures, examined, min_pass, failures)

    @staticmethod
    def _meets_floors(prod: Tensor, floors, alphabet: Alphabet, vol: int, ones: int, q: int, p: int) -> bool:
        counts = np.bincount(prod.array.reshape(-1), minlength=prod.alphabet.size)
        for s, w_all, _ in floors:
            w = int(counts[prod.alphabet.index(alphabet.symbols[s])])
            # w / |prod| >= (w_all / vol) * (ones / |prod|) * (1 - eps)
            if w * vol * q < w_all * ones * (q - p):
                return False
        return True


def _require_cubical(t: Tensor) -> int:
    if not t.is_cubical():
        raise TensorError(f"pattern checks need a cubical matrix, got dims {t.dims}")
    return t.dims[0]


def check_pattern(
    t: Tensor,
    eps,
    mode: str = "exhaustive",
    probes: int = 50,
    seed: int | None = 0,
    cap: int = DEFAULT_PATTERN_CAP,
) -> PatternCertificate:
    """Certify (exhaustive) or try to refute (sampled) that ``t`` is an eps-regular pattern."""
    eps = _epsilon(eps)
    n = _require_cubical(t)
    dens = _densities(t)
    seed = 0 if seed is None else int(seed)
    if t.d == 1:
        return PatternCertificate("pattern", eps, dens, {"kind": "definition"}, [], 0)
    if mode not in ("exhaustive", "sampled"):
        raise ValueError("pattern mode must be 'exhaustive' or 'sampled'")
    need = ceil_mul(1 - eps, n)
    if mode == "exhaustive":
        checker = _Checker(eps, True, probes, seed, cap)
        if exhaustive_work(t.d, n) > cap:
            if _Checker._constant_rule(t):
                return PatternCertificate("pattern", eps, dens, {"kind": "constant"}, [n] * t.d, need)
            raise ScaleError(
                f"scale too large: exhaustive pattern check of a {t.d}-dim matrix of order {n} "
                f"needs ~{exhaustive_work(t.d, n)} evaluations (cap {cap}); use sampled mode"
            )
        plist = checker.exhaustive_probes(t.d - 1, n)
        out = checker.evaluate(t, plist, stop_early=False)
        verdict = "pattern" if out.passed else "not-pattern"
        desc = {"kind": "exhaustive", "count": out.n_probes}
    else:
        checker = _Checker(eps, False, probes, seed, cap)
        plist, discarded, certified = checker.sampled_probes(t.d - 1, n, salt=0)
        out = checker.evaluate(t, plist, stop_early=False, certified=certified)
        verdict = "non-refuted" if out.passed else "not-pattern"
        desc = {"kind": "sampled", "requested": probes, "count": len(plist), "seed": seed, "discarded": discarded, "probes_certified": certified}
    return PatternCertificate(verdict, eps, dens, desc, out.min_pass, need, out.failures)


def probes_from_blocks(blocks: Iterable[Tensor]) -> list[Tensor]:
    """Binary matrices found in ``blocks``: each block's symbol indicators and their hyperplanes.

    A binary block contributes itself; other blocks contribute one indicator
    per symbol other than "0". Every d-dimensional candidate also contributes
    all of its hyperplanes, so the list serves checks of either dimension.
    """
    seen: dict[tuple, Tensor] = {}

    def add(x: Tensor) -> None:
        seen.setdefault(_key(x), x)

    for blk in blocks:
        if blk.alphabet.is_binary:
            inds = [blk]
        else:
            inds = [_binary(blk.indicator(s).astype(np.int8)) for s in blk.alphabet.symbols if s != "0"]
        for ind in inds:
            add(ind)
            if ind.d > 1:
                for direction in range(ind.d):
                    for h in range(ind.dims[direction]):
                        add(hyperplane(ind, direction, h))
    return list(seen.values())


def check_pattern_relative(
    t: Tensor,
    eps,
    probe_source: Iterable[Tensor] | tuple[Tensor, BlockPartition],
    mode: str = "exhaustive",
    probes: int = 50,
    seed: int | None = 0,
    cap: int = DEFAULT_PATTERN_CAP,
) -> PatternCertificate:
    """Pattern check quantifying only over probes cut from ``probe_source``.

    ``probe_source`` is either a list of tensors or a ``(host, partition)``
    pair whose blocks are used. Candidate probes of the wrong shape or of
    density below eps are ignored; the rest must themselves be patterns.
    The certificate is labelled relative: it is weaker than :func:`check_pattern`.
    """
    eps = _epsilon(eps)
    n = _require_cubical(t)
    dens = _densities(t)
    seed = 0 if seed is None else int(seed)
    if isinstance(probe_source, tuple) and len(probe_source) == 2 and isinstance(probe_source[1], BlockPartition):
        from .tensor import extract

        host, part = probe_source
        probe_source = probes_from_blocks(extract(host, b.ref) for b in part.blocks)
    candidates = [x for x in probe_source if x.alphabet.is_binary and x.dims == (n,) * (t.d - 1)]
    if t.d == 1:
        return PatternCertificate("pattern", eps, dens, {"kind": "definition"}, [], 0, relative=True)
    need = ceil_mul(1 - eps, n)
    exact = mode == "exhaustive"
    if not exact and mode != "sampled":
        raise ValueError("pattern mode must be 'exhaustive' or 'sampled'")
    checker = _Checker(eps, exact, probes, seed, cap)
    vol = n ** (t.d - 1)
    usable, discarded = [], 0
    for x in candidates:
        if int(x.array.sum()) < ceil_mul(eps, vol):
            continue
        if checker.is_pattern(x):
            usable.append(x.array)
        else:
            discarded += 1
    if not exact and len(usable) > probes:
        rng = np.random.default_rng([seed, 1])
        keep = sorted(rng.choice(len(usable), size=probes, replace=False))
        usable = [usable[i] for i in keep]
    certified = t.d == 2 or checker.inner_exact(t.d - 1, n)
    out = checker.evaluate(t, usable, stop_early=False, certified=certified)
    if out.passed:
        verdict = "pattern" if exact else "non-refuted"
    else:
        verdict = "not-pattern"
    desc = {"kind": "relative", "count": len(usable), "candidates": len(candidates), "discarded": discarded,
            "mode": mode, "seed": seed}
    return PatternCertificate(verdict, eps, dens, desc, out.min_pass, need, out.failures, relative=True)


# -- generators ---------------------------------------------------------------


def random_tensor(dims: Sequence[int], alphabet: Sequence[str] | Alphabet, densities, seed: int = 0) -> Tensor:
    """i.i.d. entries equal to symbol sigma with probability densities[sigma]."""
    if not isinstance(alphabet, Alphabet):
        alphabet = Alphabet(tuple(alphabet))
    probs = [as_fraction(r) for r in densities]
    if len(probs) != alphabet.size:
        raise ValueError("one density per symbol is required")
    if any(r < 0 for r in probs) or sum(probs) != 1:
        raise ValueError(f"densities must be non-negative and sum to 1, got {[fmt(r) for r in probs]}")
    rng = np.random.default_rng(seed)
    data = rng.choice(alphabet.size, size=math.prod(dims), p=[float(r) for r in probs])
    return Tensor(dims, alphabet, data)


def random_balanced_binary(dims: Sequence[int], seed: int = 0) -> Tensor:
    """Binary matrix with exactly floor(|A|/2) ones at uniformly random positions."""
    size = math.prod(dims)
    rng = np.random.default_rng(seed)
    flat = np.zeros(size, dtype=np.int64)
    flat[rng.choice(size, size=size // 2, replace=False)] = 1
    return Tensor(dims, Alphabet.binary(), flat)


def sylvester(k: int) -> np.ndarray:
    """The order 2^k Sylvester-Hadamard matrix with entries +1/-1."""
    h = np.ones((1, 1), dtype=np.int64)
    for _ in range(k):
        h = np.block([[h, h], [h, -h]])
    return h


def hadamard_regular_matrix(
    k: int, variant: str = "balanced", eps=None, mode: str = "exhaustive-intervals"
) -> tuple[Tensor, RegularityCertificate | None]:
    """Sylvester matrix with -1 -> 0; ``balanced`` swaps the all-ones first row for 0,1,0,1,...

    Returns the matrix and, when ``eps`` is given, its regularity report.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    arr = (sylvester(k) == 1).astype(np.int64)
    if variant == "balanced":
        arr[0] = np.arange(arr.shape[1]) % 2
    elif variant != "raw":
        raise ValueError("variant must be 'raw' or 'balanced'")
    t = Tensor.from_array(arr)
    cert = check_regularity(t, eps, mode) if eps is not None else None
    return t, cert


# -- counterexample -------------------------------------------------------------


def counterexample_target() -> Tensor:
    """Order-2 binary U with u000 = u001 = u110 = 1, u111 = 0 and the other entries 0."""
    u = np.zeros((2, 2, 2), dtype=np.int64)
    u[0, 0, 0] = u[0, 0, 1] = u[1, 1, 0] = 1
    return Tensor.from_array(u)


@dataclass(frozen=True)
class Counterexample:
    matrix: Tensor
    partition: BlockPartition
    target: Tensor
    seed_matrix: Tensor


def build_counterexample(h: Tensor) -> Counterexample:
    """Order-2n 3-dim matrix whose block (b1,b2,b3) is h (even parity) or 1-h (odd), constant along axis 3."""
    if h.d != 2 or not h.is_cubical():
        raise TensorError("the seed matrix must be square and 2-dimensional")
    if not h.alphabet.is_binary:
        raise TensorError("the seed matrix must be binary")
    n = h.dims[0]
    H = h.array
    A = np.empty((2 * n,) * 3, dtype=np.int64)
    blocks = []
    for beta in np.ndindex(2, 2, 2):
        sl = tuple(slice(b * n, (b + 1) * n) for b in beta)
        face = H if sum(beta) % 2 == 0 else 1 - H
        A[sl] = face[:, :, None]
        blocks.append(Block(BlockRef.intervals([(b * n, (b + 1) * n) for b in beta])))
    a = Tensor.from_array(A)
    part = BlockPartition(a.dims, blocks)
    rho = Fraction(int(H.sum()), H.size)
    for blk in part.blocks:
        beta = tuple(ax[0] // n for ax in blk.ref.axes)
        want = rho if sum(beta) % 2 == 0 else 1 - rho
        got = Fraction(int(A[blk.ref.index()].sum()), n**3)
        if got != want:
            raise AssertionError(f"block {beta} has density {got}, expected {want}")
    return Counterexample(a, part, counterexample_target(), h)
