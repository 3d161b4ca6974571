"""Block partitions with ordinary/exceptional classes and their energy.

The energy of an ordinary block B is sum_sigma rho_sigma(B)^2 |B|; an
exceptional block contributes its volume. A partition's energy is the sum
over its blocks. Refinement never lowers it and it never exceeds |A|.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from .rational import epsilon as _epsilon, fmt
from .regularity import RegularityCertificate, check_regularity
from .tensor import BlockRef, Tensor, extract, volume, weights

BlockClass = Literal["ordinary", "exceptional"]
CLASSES = ("ordinary", "exceptional")


class PartitionError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Block:
    ref: BlockRef
    cls: str = "ordinary"

    def __post_init__(self) -> None:
        if self.cls not in CLASSES:
            raise PartitionError(f"block class must be one of {CLASSES}, got {self.cls!r}")

    @property
    def ordinary(self) -> bool:
        return self.cls == "ordinary"


def _as_block(item) -> Block:
    if isinstance(item, Block):
        return item
    if isinstance(item, BlockRef):
        return Block(item)
    ref, cls = item
    return Block(ref if isinstance(ref, BlockRef) else BlockRef.from_sets(ref), cls)


class BlockPartition:
    """Disjoint boxes covering the index set, each tagged ordinary or exceptional.

    Blocks are stored sorted lexicographically by their axis subsets, so a
    block id is a stable position in :attr:`blocks`.
    """

    __slots__ = ("dims", "blocks", "_labels")

    def __init__(self, dims: Sequence[int], blocks: Iterable, validate: bool = True) -> None:
        self.dims = tuple(int(n) for n in dims)
        self.blocks: tuple[Block, ...] = tuple(sorted((_as_block(b) for b in blocks), key=lambda b: b.ref.axes))
        self._labels: np.ndarray | None = None
        if validate:
            self._validate()

    def _validate(self) -> None:
        cover = np.zeros(self.dims, dtype=np.int64)
        for b in self.blocks:
            b.ref.validate(self.dims)
            cover[b.ref.index()] += 1
        if np.any(cover > 1):
            raise PartitionError("blocks overlap")
        if np.any(cover == 0):
            raise PartitionError("blocks do not cover the matrix")
        ordinary = [b.ref for b in self.blocks if b.ordinary]
        if ordinary:
            proj = [set().union(*(r.axes[i] for r in ordinary)) for i in range(len(self.dims))]
            if sum(volume(r) for r in ordinary) != math.prod(len(p) for p in proj):
                raise PartitionError("ordinary blocks do not form a box")

    # -- structure -------------------------------------------------------

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def volume(self) -> int:
        return math.prod(self.dims)

    @property
    def cardinality(self) -> int:
        return sum(1 for b in self.blocks if b.ordinary)

    def ordinary_ids(self) -> list[int]:
        return [i for i, b in enumerate(self.blocks) if b.ordinary]

    def exceptional_volume(self) -> int:
        return sum(volume(b.ref) for b in self.blocks if not b.ordinary)

    def ordinary_box(self) -> BlockRef | None:
        ordinary = [b.ref for b in self.blocks if b.ordinary]
        if not ordinary:
            return None
        return BlockRef.from_sets(set().union(*(r.axes[i] for r in ordinary)) for i in range(self.d))

    def labels(self) -> np.ndarray:
        """Array over the index set holding the id of the covering block."""
        if self._labels is None:
            lab = np.empty(self.dims, dtype=np.int64)
            for i, b in enumerate(self.blocks):
                lab[b.ref.index()] = i
            lab.flags.writeable = False
            self._labels = lab
        return self._labels

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BlockPartition):
            return NotImplemented
        return self.dims == other.dims and self.blocks == other.blocks

    def __repr__(self) -> str:
        return f"BlockPartition(dims={self.dims}, blocks={len(self.blocks)}, cardinality={self.cardinality})"

    @classmethod
    def singletons(cls, dims: Sequence[int], block_class: str = "ordinary") -> BlockPartition:
        cells = np.ndindex(*dims)
        return cls(dims, [Block(BlockRef(tuple((i,) for i in c)), block_class) for c in cells])

    @classmethod
    def whole(cls, dims: Sequence[int], block_class: str = "ordinary") -> BlockPartition:
        return cls(dims, [Block(BlockRef.full(dims), block_class)])

    @classmethod
    def grid(cls, slabs: Sequence[Sequence[Sequence[int]]], dims: Sequence[int] | None = None) -> BlockPartition:
        """All-ordinary partition into products of per-axis slabs."""
        if dims is None:
            dims = [sum(len(s) for s in ax) for ax in slabs]
        blocks = [Block(BlockRef.from_sets(choice)) for choice in product(*slabs)]
        return cls(dims, blocks)

    # -- serialization ---------------------------------------------------

    def to_json(self) -> dict:
        return {
            "dims": list(self.dims),
            "blocks": [{"axes": b.ref.to_json(), "class": b.cls} for b in self.blocks],
        }

    @classmethod
    def from_json(cls, doc: dict) -> BlockPartition:
        try:
            blocks = [Block(BlockRef.from_sets(b["axes"]), b.get("class", "ordinary")) for b in doc["blocks"]]
            return cls(doc["dims"], blocks)
        except KeyError as exc:
            raise PartitionError(f"partition document missing field {exc}") from None

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), separators=(",", ":")) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> BlockPartition:
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class BalancedPartition:
    """A partition whose t^d ordinary blocks all have order m and fill a box of order t*m."""

    partition: BlockPartition
    order: int
    block_order: int

    def __post_init__(self) -> None:
        p, t, m = self.partition, self.order, self.block_order
        if t < 1 or m < 1:
            raise PartitionError("order and block order must be positive")
        for b in p.blocks:
            if b.ordinary and set(b.ref.sizes) != {m}:
                raise PartitionError(f"ordinary block of sizes {b.ref.sizes} is not of order {m}")
        if p.cardinality != t**p.d:
            raise PartitionError(f"balanced partition of order {t} needs {t**p.d} ordinary blocks, has {p.cardinality}")
        box = p.ordinary_box()
        if box is None or set(box.sizes) != {t * m}:
            raise PartitionError(f"ordinary blocks must fill a box of order {t * m}")

    @classmethod
    def infer(cls, p: BlockPartition) -> BalancedPartition:
        ordinary = [b.ref for b in p.blocks if b.ordinary]
        if not ordinary:
            raise PartitionError("a balanced partition needs ordinary blocks")
        m = ordinary[0].sizes[0]
        return cls(p, p.ordinary_box().sizes[0] // m, m)

    def slabs(self) -> list[list[tuple[int, ...]]]:
        """Distinct axis subsets used by ordinary blocks, per axis, ordered by first index."""
        out = []
        for i in range(self.partition.d):
            seen = {b.ref.axes[i] for b in self.partition.blocks if b.ordinary}
            out.append(sorted(seen))
        return out


# -- energy -----------------------------------------------------------------


def energy_block(t: Tensor, b: BlockRef, cls: str = "ordinary") -> Fraction:
    b.validate(t.dims)
    v = volume(b)
    if cls == "exceptional":
        return Fraction(v)
    if cls != "ordinary":
        raise PartitionError(f"unknown block class {cls!r}")
    return Fraction(sum(w * w for w in weights(t, b).values()), v)


@dataclass(frozen=True)
class EnergyReport:
    per_block: tuple[Fraction, ...]
    total: Fraction
    exceptional_volume: int
    volume: int

    def to_json(self) -> dict:
        return {
            "per_block": [fmt(q) for q in self.per_block],
            "total": fmt(self.total),
            "exceptional_volume": self.exceptional_volume,
            "volume": self.volume,
        }


def energy(t: Tensor, p: BlockPartition) -> EnergyReport:
    if t.dims != p.dims:
        raise PartitionError(f"partition dims {p.dims} do not match tensor dims {t.dims}")
    per = tuple(energy_block(t, b.ref, b.cls) for b in p.blocks)
    total = sum(per, Fraction(0))
    report = EnergyReport(per, total, p.exceptional_volume(), t.size)
    if not 0 <= total <= t.size:
        raise AssertionError(f"energy {total} outside [0, {t.size}]")
    return report


# -- refinement --------------------------------------------------------------


def is_refinement(c: BlockPartition, b: BlockPartition, allow_demotion: bool = False) -> bool:
    """True iff every block of ``c`` lies inside one block of ``b`` and inherits its class.

    With ``allow_demotion`` an ordinary block of ``b`` may also contain
    exceptional blocks of ``c`` (the residue demotion used when rebalancing).
    """
    if c.dims != b.dims:
        return False
    lab = b.labels()
    for blk in c.blocks:
        inside = np.unique(lab[blk.ref.index()])
        if inside.size != 1:
            return False
        parent = b.blocks[int(inside[0])]
        if blk.cls != parent.cls and not (allow_demotion and parent.ordinary and not blk.ordinary):
            return False
    return True


def refine_block(p: BlockPartition, beta: int, sub: Iterable) -> BlockPartition:
    """Replace block ``beta`` of ``p`` by the blocks ``sub`` that partition it."""
    if not 0 <= beta < len(p.blocks):
        raise PartitionError(f"no block with id {beta}")
    parent = p.blocks[beta]
    subs = [_as_block(s) for s in sub]
    cover = np.zeros(p.dims, dtype=np.int64)
    for s in subs:
        s.ref.validate(p.dims)
        if s.cls != parent.cls:
            raise PartitionError("refinement must preserve the block class")
        if not parent.ref.contains(s.ref):
            raise PartitionError("sub-block leaves the parent block")
        cover[s.ref.index()] += 1
    if np.any(cover > 1) or int(cover.sum()) != volume(parent.ref):
        raise PartitionError("sub-blocks do not partition the parent block")
    blocks = [blk for i, blk in enumerate(p.blocks) if i != beta] + subs
    return BlockPartition(p.dims, blocks)


# -- regular partitions ------------------------------------------------------


def block_seed(seed: int | None, block_id: int) -> int:
    base = 0 if seed is None else int(seed)
    return int(np.random.SeedSequence([base, block_id]).generate_state(1)[0])


@dataclass(frozen=True)
class PartitionVerdict:
    regular: bool
    irregular: dict[int, RegularityCertificate]
    certificates: dict[int, RegularityCertificate]
    exceptional_volume: int
    cardinality: int
    eps: Fraction
    mode: str

    @property
    def certified(self) -> bool:
        return all(c.certified for c in self.certificates.values())

    def to_json(self) -> dict:
        return {
            "regular": self.regular,
            "eps": fmt(self.eps),
            "mode": self.mode,
            "exceptional_volume": self.exceptional_volume,
            "cardinality": self.cardinality,
            "irregular_blocks": sorted(self.irregular),
            "certificates": {str(i): c.to_json() for i, c in sorted(self.certificates.items())},
        }


def check_blocks(
    t: Tensor, p: BlockPartition, eps, mode: str = "exhaustive-intervals", budget=None, seed=0, cap=None
) -> dict[int, RegularityCertificate]:
    kw = {} if cap is None else {"cap": cap}
    return {
        i: check_regularity(extract(t, p.blocks[i].ref), eps, mode, budget=budget, seed=block_seed(seed, i), **kw)
        for i in p.ordinary_ids()
    }


def is_eps_regular_partition(
    t: Tensor,
    p: BalancedPartition | BlockPartition,
    eps,
    mode: str = "exhaustive-intervals",
    budget: int | None = None,
    seed: int | None = 0,
    cap: int | None = None,
) -> PartitionVerdict:
    """Exceptional volume at most eps|A| and at most eps|B| ordinary blocks irregular."""
    eps = _epsilon(eps)
    part = p.partition if isinstance(p, BalancedPartition) else p
    if t.dims != part.dims:
        raise PartitionError("partition does not match tensor")
    certs = check_blocks(t, part, eps, mode, budget, seed, cap)
    irregular = {i: c for i, c in certs.items() if not c.regular}
    v = part.exceptional_volume()
    regular = v <= eps * t.size and len(irregular) <= eps * part.cardinality
    return PartitionVerdict(regular, irregular, certs, v, part.cardinality, eps, mode)
