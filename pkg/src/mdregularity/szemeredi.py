"""Energy-increment regularity decomposition for cubical tensors.

Start from a balanced grid partition of order t0, then repeat refinement
rounds until the partition is epsilon-regular. A round splits every
irregular ordinary block along its witness, intersects the splits that fall
in a common slab into atoms, cuts each atom into pieces of a common order l
and demotes what is left over to exceptional blocks. The order l is the
largest one for which the round's exceptional-volume, cardinality and order
guarantees hold; l = 1 always qualifies, so a round never fails.

Each round is audited: refinement of the input, energy increment of at
least eps^(d+3) (1 - eps) |A|, exceptional growth of at most d 2^(-dt) |A|,
cardinality at most 8^(d^2 t) times the input's.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Sequence

from .partition import (
    BalancedPartition,
    Block,
    BlockPartition,
    PartitionVerdict,
    energy,
    is_eps_regular_partition,
    is_refinement,
)
from .rational import as_fraction, fmt
from .regularity import MODES, RegularityCertificate
from .tensor import BlockRef, Tensor


class DecompositionError(ValueError):
    pass


class NotIrregularError(DecompositionError):
    """refinement_round was handed a partition that is already regular."""


class InvariantError(AssertionError):
    """A guarantee of the energy-increment argument was violated."""


def round_bound(eps, d: int) -> int:
    """ceil(eps^(-d-3) (1 - eps)^(-1)): the maximal number of refinement rounds."""
    eps = as_fraction(eps)
    q = 1 / (eps ** (d + 3) * (1 - eps))
    return -((-q.numerator) // q.denominator)


def headroom(eps, d: int, t: int) -> Fraction:
    """eps - 2d / 2^(dt): the fraction of |A| the initial exceptional volume must stay below."""
    return as_fraction(eps) - Fraction(2 * d, 2 ** (d * t))


def minimal_order(eps, d: int) -> int:
    t = 1
    while headroom(eps, d, t) <= 0:
        t += 1
    return t


def increment_bound(eps, d: int, vol: int) -> Fraction:
    eps = as_fraction(eps)
    return eps ** (d + 3) * (1 - eps) * vol


@dataclass(frozen=True)
class DecompositionConfig:
    eps: Fraction
    initial_order: int | None = None
    mode: str = "exhaustive-intervals"
    budget: int | None = None
    seed: int | None = 0
    max_rounds: int | None = None
    cap: int | None = None

    def __post_init__(self) -> None:
        eps = as_fraction(self.eps)
        if not 0 < eps < Fraction(1, 2):
            raise DecompositionError(f"decomposition needs 0 < eps < 1/2, got {eps}")
        object.__setattr__(self, "eps", eps)
        if self.mode not in MODES:
            raise DecompositionError(f"unknown mode {self.mode!r}")
        if self.initial_order is not None and self.initial_order < 1:
            raise DecompositionError("initial order must be positive")

    def order_for(self, d: int) -> int:
        t0 = self.initial_order if self.initial_order is not None else minimal_order(self.eps, d)
        if headroom(self.eps, d, t0) <= 0:
            raise DecompositionError(
                f"initial order {t0} leaves no exceptional headroom at eps={fmt(self.eps)}, d={d}; "
                f"use at least {minimal_order(self.eps, d)}"
            )
        return t0

    def rounds_for(self, d: int) -> int:
        bound = round_bound(self.eps, d)
        if self.max_rounds is None:
            return bound
        if self.max_rounds < bound:
            raise DecompositionError(f"max_rounds {self.max_rounds} is below the guaranteed bound {bound}")
        return self.max_rounds

    def to_json(self) -> dict:
        return {
            "eps": fmt(self.eps),
            "initial_order": self.initial_order,
            "mode": self.mode,
            "budget": self.budget,
            "seed": self.seed,
            "max_rounds": self.max_rounds,
            "cap": self.cap,
        }


# -- grid assembly ------------------------------------------------------------


def _residue_boxes(parent: BlockRef, keep: Sequence[set[int]]) -> list[BlockRef]:
    """Disjoint boxes covering parent minus the product of (parent axis & keep)."""
    kept = [tuple(i for i in ax if i in k) for ax, k in zip(parent.axes, keep)]
    out = []
    for i, ax in enumerate(parent.axes):
        rest = tuple(j for j in ax if j not in keep[i])
        if not rest:
            continue
        axes = kept[:i] + [rest] + list(parent.axes[i + 1 :])
        if all(axes):
            out.append(BlockRef(tuple(axes)))
    return out


def _assemble(
    dims: Sequence[int],
    slabs: Sequence[Sequence[tuple[int, ...]]],
    parents: Sequence[Block],
    order: int,
    block_order: int,
) -> BalancedPartition:
    """Grid of ordinary slab products plus exceptional residue inside the old ordinary blocks."""
    keep = [set().union(*ax) for ax in slabs]
    blocks = [Block(BlockRef(choice), "ordinary") for choice in product(*slabs)]
    for parent in parents:
        if parent.ordinary:
            blocks.extend(Block(r, "exceptional") for r in _residue_boxes(parent.ref, keep))
        else:
            blocks.append(parent)
    return BalancedPartition(BlockPartition(dims, blocks), order, block_order)


def _check_cubical(t: Tensor) -> int:
    if not t.is_cubical():
        raise DecompositionError(f"decomposition needs a cubical tensor, got dims {t.dims}")
    return t.dims[0]


def initial_partition(t: Tensor, cfg: DecompositionConfig) -> BalancedPartition:
    """Grid of t0^d blocks of order floor(n/t0) in the corner; the shell is exceptional."""
    n = _check_cubical(t)
    d = t.d
    t0 = cfg.order_for(d)
    h = headroom(cfg.eps, d, t0)

    def exceptional(size: int) -> int:
        return size**d - (t0 * (size // t0)) ** d

    if n < t0 or not exceptional(n) < h * n**d:
        ok = next(s for s in range(max(n, t0), n + t0 + 1) if exceptional(s) < h * s**d)
        raise DecompositionError(
            f"order {n} too small for initial order {t0} at eps={fmt(cfg.eps)}: "
            f"exceptional volume {exceptional(n) if n >= t0 else 'n/a'} exceeds headroom; smallest working order >= {n} is {ok}"
        )
    m = n // t0
    slabs = [[tuple(range(j * m, (j + 1) * m)) for j in range(t0)] for _ in range(d)]
    return _assemble(t.dims, slabs, [Block(BlockRef.full(t.dims), "ordinary")], t0, m)


# -- refinement rounds --------------------------------------------------------


@dataclass(frozen=True)
class RoundAudit:
    refinement: bool
    increment: Fraction
    increment_required: Fraction | None
    exceptional_growth: int
    exceptional_allowed: Fraction
    cardinality_ratio_ok: bool

    @property
    def ok(self) -> bool:
        inc_ok = self.increment_required is None or self.increment >= self.increment_required
        return self.refinement and inc_ok and self.exceptional_growth <= self.exceptional_allowed and self.cardinality_ratio_ok

    def to_json(self) -> dict:
        return {
            "refinement": self.refinement,
            "increment": fmt(self.increment),
            "increment_required": fmt(self.increment_required) if self.increment_required is not None else None,
            "exceptional_growth": self.exceptional_growth,
            "exceptional_allowed": fmt(self.exceptional_allowed),
            "cardinality_ok": self.cardinality_ratio_ok,
            "ok": self.ok,
        }


@dataclass
class RoundResult:
    partition: BalancedPartition
    audit: RoundAudit
    refined: list[int]
    piece_order: int


def _grid_slabs(bp: BalancedPartition) -> list[list[tuple[int, ...]]]:
    slabs = bp.slabs()
    if any(len(ax) != bp.order for ax in slabs):
        raise DecompositionError("refinement rounds need a grid-shaped balanced partition")
    return slabs


def _atoms(slab: tuple[int, ...], cuts: list[set[int]]) -> list[tuple[int, ...]]:
    groups: dict[tuple[bool, ...], list[int]] = {}
    for i in slab:
        groups.setdefault(tuple(i in c for c in cuts), []).append(i)
    return sorted((tuple(g) for g in groups.values()), key=lambda g: g[0])


def refinement_round(
    t: Tensor,
    bp: BalancedPartition,
    cfg: DecompositionConfig,
    verdict: PartitionVerdict | None = None,
) -> RoundResult:
    """One energy-increment round: witness splits, common grid, rebalance."""
    part = bp.partition
    d, vol = t.d, t.size
    eps = cfg.eps
    if verdict is None:
        verdict = is_eps_regular_partition(t, bp, eps, cfg.mode, cfg.budget, cfg.seed, cfg.cap)
    if verdict.regular:
        raise NotIrregularError("not irregular: the partition is already eps-regular in this mode")
    if not verdict.irregular:
        raise NotIrregularError("not irregular: no witnesses found")
    v_old = part.exceptional_volume()
    if v_old > eps * vol:
        raise DecompositionError("exceptional volume already exceeds eps|A|")

    slabs = _grid_slabs(bp)
    slab_of = [{i: j for j, s in enumerate(ax) for i in s} for ax in slabs]
    cuts: list[list[list[set[int]]]] = [[[] for _ in ax] for ax in slabs]
    refined = sorted(verdict.irregular)
    for bid in refined:
        ref = part.blocks[bid].ref
        wit = ref.compose(verdict.irregular[bid].witness.block)
        for i, ax in enumerate(wit.axes):
            cuts[i][slab_of[i][ref.axes[i][0]]].append(set(ax))
    atoms = [[a for j, s in enumerate(ax) for a in _atoms(s, cuts[i][j])] for i, ax in enumerate(slabs)]

    t_old, m_old = bp.order, bp.block_order
    allowed = Fraction(d * vol, 2 ** (d * t_old))
    card_cap = 8 ** (d * d * t_old) * part.cardinality
    for l in range(m_old, 0, -1):
        pieces = [[a[k * l : (k + 1) * l] for a in ax for k in range(len(a) // l)] for ax in atoms]
        t_new = min(len(p) for p in pieces)
        if t_new <= t_old:
            continue
        v_new = vol - (t_new * l) ** d
        if v_new - v_old > allowed or v_new > eps * vol or t_new**d > card_cap:
            continue
        break
    else:  # pragma: no cover - l = 1 always qualifies when a block is irregular
        raise InvariantError("no admissible rebalancing order")

    new_slabs = [sorted(p[:t_new], key=lambda s: s[0]) for p in pieces]
    new = _assemble(t.dims, new_slabs, part.blocks, t_new, l)

    e_old, e_new = energy(t, part).total, energy(t, new.partition).total
    audit = RoundAudit(
        refinement=is_refinement(new.partition, part, allow_demotion=True),
        increment=e_new - e_old,
        increment_required=increment_bound(eps, d, vol) if len(refined) > eps * part.cardinality else None,
        exceptional_growth=new.partition.exceptional_volume() - v_old,
        exceptional_allowed=allowed,
        cardinality_ratio_ok=new.partition.cardinality <= card_cap,
    )
    if not audit.ok:
        raise InvariantError(f"refinement round violated its guarantees: {audit.to_json()}")
    return RoundResult(new, audit, refined, l)


# -- driver -------------------------------------------------------------------


@dataclass(frozen=True)
class RoundRecord:
    round: int
    energy: Fraction
    exceptional_volume: int
    cardinality: int
    order: int
    block_order: int
    irregular: int
    refined: int
    audit: RoundAudit | None = None

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "energy": fmt(self.energy),
            "exceptional_volume": self.exceptional_volume,
            "cardinality": self.cardinality,
            "order": self.order,
            "block_order": self.block_order,
            "irregular": self.irregular,
            "refined": self.refined,
            "audit": self.audit.to_json() if self.audit else None,
        }


@dataclass
class Decomposition:
    partition: BalancedPartition
    trace: list[RoundRecord]
    certificates: dict[int, RegularityCertificate]
    config: DecompositionConfig
    round_bound: int
    certified: bool = field(default=True)

    @property
    def rounds(self) -> int:
        return len(self.trace) - 1

    def summary(self) -> dict:
        irregular = sorted(i for i, c in self.certificates.items() if not c.regular)
        return {
            "config": self.config.to_json(),
            "rounds": self.rounds,
            "round_bound": self.round_bound,
            "certified": self.certified,
            "label": "certified" if self.certified else "non-certified (sampled witness search)",
            "final_energy": fmt(self.trace[-1].energy),
            "exceptional_volume": self.trace[-1].exceptional_volume,
            "cardinality": self.partition.partition.cardinality,
            "order": self.partition.order,
            "block_order": self.partition.block_order,
            "irregular_blocks": irregular,
        }


def decompose(t: Tensor, cfg: DecompositionConfig) -> Decomposition:
    """Refine from the initial grid until the partition is eps-regular in cfg.mode."""
    _check_cubical(t)
    d, vol = t.d, t.size
    limit = cfg.rounds_for(d)
    bound = round_bound(cfg.eps, d)
    bp = initial_partition(t, cfg)
    trace: list[RoundRecord] = []
    audit = None
    refined = 0
    for k in range(limit + 1):
        verdict = is_eps_regular_partition(t, bp, cfg.eps, cfg.mode, cfg.budget, cfg.seed, cfg.cap)
        e = energy(t, bp.partition).total
        if e > vol:
            raise InvariantError(f"energy {e} exceeds |A| = {vol}")
        if verdict.exceptional_volume > cfg.eps * vol:
            raise InvariantError("exceptional volume exceeds eps|A|")
        trace.append(
            RoundRecord(k, e, verdict.exceptional_volume, verdict.cardinality, bp.order, bp.block_order,
                        len(verdict.irregular), refined, audit)
        )
        if verdict.regular:
            return Decomposition(bp, trace, verdict.certificates, cfg, bound, certified=cfg.mode != "sampled")
        if k == limit:
            break
        result = refinement_round(t, bp, cfg, verdict)
        bp, audit, refined = result.partition, result.audit, len(result.refined)
    raise InvariantError(f"no eps-regular partition after {limit} rounds (guaranteed bound {bound})")
