"""Seeded generators of tensors, partitions and refinements for the tests."""

from __future__ import annotations

from itertools import product

import numpy as np

from mdregularity.partition import Block, BlockPartition, refine_block
from mdregularity.tensor import Alphabet, BlockRef, Tensor

SYMBOLS = ("0", "1", "2")


def random_tensor(rng: np.random.Generator, dims, n_symbols: int) -> Tensor:
    alphabet = Alphabet(SYMBOLS[:n_symbols])
    return Tensor(dims, alphabet, rng.integers(0, n_symbols, size=int(np.prod(dims))))


def random_slabs(rng: np.random.Generator, n: int, max_parts: int = 3) -> list[tuple[int, ...]]:
    """Split range(n) into up to max_parts nonempty, not necessarily contiguous, slabs."""
    k = int(rng.integers(1, min(n, max_parts) + 1))
    perm = rng.permutation(n)
    cuts = sorted(rng.choice(np.arange(1, n), size=k - 1, replace=False)) if k > 1 else []
    parts = np.split(perm, cuts)
    return sorted(tuple(sorted(int(x) for x in p)) for p in parts)


def random_partition(rng: np.random.Generator, dims) -> BlockPartition:
    """Grid of random slabs; blocks outside a random sub-box of slabs become exceptional."""
    slabs = [random_slabs(rng, n) for n in dims]
    keep = [set(rng.choice(len(s), size=int(rng.integers(1, len(s) + 1)), replace=False).tolist()) for s in slabs]
    blocks = []
    for pick in product(*[range(len(s)) for s in slabs]):
        ordinary = all(j in k for j, k in zip(pick, keep))
        ref = BlockRef(tuple(slabs[i][j] for i, j in enumerate(pick)))
        blocks.append(Block(ref, "ordinary" if ordinary else "exceptional"))
    return BlockPartition(dims, blocks)


def split_block(rng: np.random.Generator, block: Block) -> list[Block] | None:
    """Cut one axis of ``block`` into two random nonempty halves."""
    axes = [i for i, ax in enumerate(block.ref.axes) if len(ax) > 1]
    if not axes:
        return None
    i = int(rng.choice(axes))
    ax = list(block.ref.axes[i])
    rng.shuffle(ax)
    cut = int(rng.integers(1, len(ax)))
    out = []
    for half in (ax[:cut], ax[cut:]):
        parts = list(block.ref.axes)
        parts[i] = tuple(sorted(half))
        out.append(Block(BlockRef(tuple(parts)), block.cls))
    return out


def random_refinement(rng: np.random.Generator, p: BlockPartition, steps: int = 3) -> BlockPartition:
    """Apply a few random single-block splits, keeping classes."""
    for _ in range(steps):
        beta = int(rng.integers(len(p.blocks)))
        sub = split_block(rng, p.blocks[beta])
        if sub is not None:
            p = refine_block(p, beta, sub)
    return p


def random_dims(rng: np.random.Generator, d: int, n_max: int) -> tuple[int, ...]:
    return tuple(int(x) for x in rng.integers(2, n_max + 1, size=d))
