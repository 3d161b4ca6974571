"""Dense d-dimensional matrices over finite alphabets.

Entries are stored as symbol indices in a read-only numpy array (row-major,
last axis fastest). Weights and volumes are Python ints and densities are
``fractions.Fraction`` so nothing here touches floating point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

BINARY = ("0", "1")


class TensorError(ValueError):
    """Raised for malformed tensors, blocks or symbols."""


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]

    def __post_init__(self) -> None:
        symbols = tuple(str(s) for s in self.symbols)
        if not symbols:
            raise TensorError("alphabet must contain at least one symbol")
        if len(set(symbols)) != len(symbols):
            raise TensorError(f"duplicate symbols in alphabet {symbols!r}")
        object.__setattr__(self, "symbols", symbols)

    @classmethod
    def binary(cls) -> Alphabet:
        return cls(BINARY)

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def is_binary(self) -> bool:
        return self.symbols == BINARY

    def index(self, sigma: str) -> int:
        try:
            return self.symbols.index(str(sigma))
        except ValueError:
            raise TensorError(f"unknown symbol {sigma!r} for alphabet {self.symbols!r}") from None

    def __iter__(self):
        return iter(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)


@dataclass(frozen=True)
class BlockRef:
    """A combinatorial box: one strictly increasing index subset per axis."""

    axes: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        axes = tuple(tuple(int(i) for i in ax) for ax in self.axes)
        if not axes:
            raise TensorError("a block needs at least one axis")
        for k, ax in enumerate(axes):
            if not ax:
                raise TensorError(f"axis {k} of block is empty")
            if any(b <= a for a, b in zip(ax, ax[1:])):
                raise TensorError(f"axis {k} indices must be strictly increasing: {ax}")
            if ax[0] < 0:
                raise TensorError(f"negative index on axis {k}")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def full(cls, dims: Sequence[int]) -> BlockRef:
        return cls(tuple(tuple(range(n)) for n in dims))

    @classmethod
    def from_sets(cls, axes: Iterable[Iterable[int]]) -> BlockRef:
        return cls(tuple(tuple(sorted(set(ax))) for ax in axes))

    @classmethod
    def intervals(cls, bounds: Sequence[tuple[int, int]]) -> BlockRef:
        """Box from half-open ``(lo, hi)`` ranges."""
        return cls(tuple(tuple(range(lo, hi)) for lo, hi in bounds))

    @property
    def d(self) -> int:
        return len(self.axes)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(ax) for ax in self.axes)

    def validate(self, dims: Sequence[int]) -> None:
        if len(dims) != self.d:
            raise TensorError(f"block has {self.d} axes, tensor has {len(dims)}")
        for k, (ax, n) in enumerate(zip(self.axes, dims)):
            if ax[-1] >= n:
                raise TensorError(f"index {ax[-1]} out of range on axis {k} (size {n})")

    def index(self):
        """Open-mesh index usable on a numpy array of the host tensor."""
        return np.ix_(*[np.asarray(ax, dtype=np.intp) for ax in self.axes])

    def compose(self, inner: BlockRef) -> BlockRef:
        """Map a block given in this block's local coordinates back to host coordinates."""
        if inner.d != self.d:
            raise TensorError("dimension mismatch in block composition")
        inner.validate(self.sizes)
        return BlockRef(tuple(tuple(ax[i] for i in sub) for ax, sub in zip(self.axes, inner.axes)))

    def contains(self, other: BlockRef) -> bool:
        return all(set(o) <= set(a) for a, o in zip(self.axes, other.axes))

    def to_json(self) -> list[list[int]]:
        return [list(ax) for ax in self.axes]


def volume(b: BlockRef) -> int:
    return math.prod(b.sizes)


class Tensor:
    """Immutable d-dimensional matrix over an :class:`Alphabet`."""

    __slots__ = ("_dims", "_alphabet", "_data")

    def __init__(self, dims: Sequence[int], alphabet: Alphabet | Sequence[str], entries) -> None:
        dims = tuple(int(n) for n in dims)
        if not dims or any(n < 1 for n in dims):
            raise TensorError(f"dims must be a nonempty list of positive integers, got {dims}")
        if not isinstance(alphabet, Alphabet):
            alphabet = Alphabet(tuple(alphabet))
        data = np.asarray(entries)
        if data.dtype == object or not np.issubdtype(data.dtype, np.integer):
            if data.size and not np.all(np.equal(np.mod(data, 1), 0)):
                raise TensorError("entries must be integer symbol indices")
        data = np.array(data, dtype=np.int64).reshape(-1)
        if data.size != math.prod(dims):
            raise TensorError(f"expected {math.prod(dims)} entries, got {data.size}")
        if data.size and (data.min() < 0 or data.max() >= alphabet.size):
            raise TensorError("entry index outside alphabet")
        data = data.reshape(dims)
        data.flags.writeable = False
        self._dims = dims
        self._alphabet = alphabet
        self._data = data

    @classmethod
    def from_array(cls, array, alphabet: Alphabet | Sequence[str] = BINARY) -> Tensor:
        array = np.asarray(array)
        return cls(array.shape, alphabet, array.reshape(-1))

    @classmethod
    def constant(cls, dims: Sequence[int], sigma: str = "1", alphabet: Alphabet | Sequence[str] = BINARY) -> Tensor:
        if not isinstance(alphabet, Alphabet):
            alphabet = Alphabet(tuple(alphabet))
        return cls(dims, alphabet, np.full(math.prod(dims), alphabet.index(sigma)))

    @property
    def dims(self) -> tuple[int, ...]:
        return self._dims

    @property
    def d(self) -> int:
        return len(self._dims)

    @property
    def alphabet(self) -> Alphabet:
        return self._alphabet

    @property
    def array(self) -> np.ndarray:
        """Read-only view of the symbol-index array."""
        return self._data

    @property
    def size(self) -> int:
        return self._data.size

    def is_cubical(self) -> bool:
        return len(set(self._dims)) == 1

    def full_block(self) -> BlockRef:
        return BlockRef.full(self._dims)

    def indicator(self, sigma: str) -> np.ndarray:
        return self._data == self._alphabet.index(sigma)

    def symbols_at(self) -> np.ndarray:
        return np.asarray(self._alphabet.symbols, dtype=object)[self._data]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return (
            self._dims == other._dims
            and self._alphabet == other._alphabet
            and np.array_equal(self._data, other._data)
        )

    def __hash__(self) -> int:
        return hash((self._dims, self._alphabet, self._data.tobytes()))

    def __repr__(self) -> str:
        return f"Tensor(dims={self._dims}, alphabet={self._alphabet.symbols})"

    # -- serialization ---------------------------------------------------

    def to_json(self) -> dict:
        return {
            "dims": list(self._dims),
            "alphabet": list(self._alphabet.symbols),
            "data": [int(x) for x in self._data.reshape(-1)],
        }

    @classmethod
    def from_json(cls, doc: dict) -> Tensor:
        try:
            return cls(doc["dims"], Alphabet(tuple(doc["alphabet"])), doc["data"])
        except KeyError as exc:
            raise TensorError(f"matrix document missing field {exc}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Tensor:
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _block_or_full(t: Tensor, b: BlockRef | None) -> BlockRef:
    if b is None:
        return t.full_block()
    b.validate(t.dims)
    return b


def weight(t: Tensor, b: BlockRef | None, sigma: str) -> int:
    """Number of entries of block ``b`` equal to ``sigma``."""
    b = _block_or_full(t, b)
    k = t.alphabet.index(sigma)
    return int(np.count_nonzero(t.array[b.index()] == k))


def weights(t: Tensor, b: BlockRef | None = None) -> dict[str, int]:
    b = _block_or_full(t, b)
    counts = np.bincount(t.array[b.index()].reshape(-1), minlength=t.alphabet.size)
    return {s: int(c) for s, c in zip(t.alphabet.symbols, counts)}


def density(t: Tensor, b: BlockRef | None, sigma: str) -> Fraction:
    b = _block_or_full(t, b)
    return Fraction(weight(t, b, sigma), volume(b))


def densities(t: Tensor, b: BlockRef | None = None) -> dict[str, Fraction]:
    b = _block_or_full(t, b)
    v = volume(b)
    return {s: Fraction(w, v) for s, w in weights(t, b).items()}


def extract(t: Tensor, b: BlockRef) -> Tensor:
    b.validate(t.dims)
    return Tensor(b.sizes, t.alphabet, t.array[b.index()].reshape(-1))


def entrywise_product(t: Tensor, p: Tensor) -> Tensor:
    """Mask ``t`` by the binary tensor ``p``: keep t's symbol where p is 1, "0" elsewhere."""
    if not p.alphabet.is_binary:
        raise TensorError("mask tensor must be binary")
    if t.dims != p.dims:
        raise TensorError(f"dimension mismatch: {t.dims} vs {p.dims}")
    alphabet = t.alphabet
    if "0" not in alphabet.symbols:
        alphabet = Alphabet(alphabet.symbols + ("0",))
    zero = alphabet.index("0")
    data = np.where(p.array == 1, t.array, zero)
    return Tensor(t.dims, alphabet, data.reshape(-1))


def hyperplane(t: Tensor, direction: int, position: int) -> Tensor:
    """The (d-1)-dimensional slice with coordinate ``direction`` fixed at ``position``."""
    if t.d < 2:
        raise TensorError("hyperplanes need a tensor of dimension at least 2")
    if not 0 <= direction < t.d:
        raise TensorError(f"direction {direction} out of range for d={t.d}")
    if not 0 <= position < t.dims[direction]:
        raise TensorError(f"position {position} out of range on axis {direction}")
    sl = np.take(t.array, position, axis=direction)
    return Tensor(sl.shape, t.alphabet, sl.reshape(-1))
