"""Permutations of ``range(k)`` in one-line form, plus XOR maps on t-bit words.

The draw result is ``phi_1(phi_2(...phi_n(a)...))``: a composition of the
guarantors' permutations applied to the initiator's number.  If any one of
the inputs is uniform, so is the result.  XOR-by-``b`` is the special case
``k = 2**t`` that motivates the construction, so it is kept here as a
first-class object to make that property testable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

if TYPE_CHECKING:
    from .crypto import EntropySource


class PermutationError(ValueError):
    pass


@dataclass(frozen=True)
class Permutation:
    """A bijection on ``range(k)``; ``mapping[i]`` is the image of ``i``."""

    mapping: tuple[int, ...]

    def __post_init__(self) -> None:
        mapping = tuple(self.mapping)
        object.__setattr__(self, "mapping", mapping)
        k = len(mapping)
        if k < 1:
            raise PermutationError("permutation domain must be non-empty")
        seen = bytearray(k)
        for image in mapping:
            if not isinstance(image, int) or not 0 <= image < k or seen[image]:
                raise PermutationError(f"not a bijection on range({k}): {mapping!r}")
            seen[image] = 1

    @property
    def k(self) -> int:
        return len(self.mapping)

    def __len__(self) -> int:
        return len(self.mapping)

    def __call__(self, a: int) -> int:
        return apply(self, a)

    def __matmul__(self, other: Permutation) -> Permutation:
        return compose(self, other)


def is_bijection(mapping: Sequence[int]) -> bool:
    k = len(mapping)
    return k >= 1 and sorted(mapping) == list(range(k))


def identity(k: int) -> Permutation:
    if k < 1:
        raise PermutationError("k must be at least 1")
    return Permutation(tuple(range(k)))


def inverse(p: Permutation) -> Permutation:
    inv = [0] * p.k
    for i, image in enumerate(p.mapping):
        inv[image] = i
    return Permutation(tuple(inv))


def apply(p: Permutation, a: int) -> int:
    if not 0 <= a < p.k:
        raise PermutationError(f"{a} is outside range({p.k})")
    return p.mapping[a]


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Return ``p o q``, i.e. ``x -> p(q(x))``."""
    if p.k != q.k:
        raise PermutationError(f"size mismatch: {p.k} != {q.k}")
    pm = p.mapping
    return Permutation(tuple(pm[x] for x in q.mapping))


def compose_all(perms: Iterable[Permutation], k: int) -> Permutation:
    """Compose left to right: ``[p1, p2, p3]`` gives ``p1 o p2 o p3``."""
    out = identity(k)
    for p in perms:
        out = compose(out, p)
    return out


def random_permutation(k: int, src: EntropySource) -> Permutation:
    """Uniform permutation of ``range(k)`` by Fisher-Yates driven by ``src``."""
    if k < 1:
        raise PermutationError("k must be at least 1")
    items = list(range(k))
    for i in range(k - 1, 0, -1):
        j = src.next_below(i + 1)
        items[i], items[j] = items[j], items[i]
    return Permutation(tuple(items))


def forcing_permutation(base: Permutation, x: int, y: int) -> Permutation:
    """A permutation sending ``x`` to ``y`` that differs from ``base`` when possible.

    Used by the adaptive adversary: it keeps ``base`` where it can and swaps
    two images.  If ``base`` already maps ``x`` to ``y`` another pair of
    images is swapped so the result is still a fresh input (needs k >= 3).
    """
    m = list(base.mapping)
    if m[x] != y:
        j = m.index(y)
        m[x], m[j] = m[j], m[x]
    elif base.k >= 3:
        others = [i for i in range(base.k) if i != x]
        i, j = others[0], others[1]
        m[i], m[j] = m[j], m[i]
    return Permutation(tuple(m))


@dataclass(frozen=True)
class XorMap:
    """``a -> a XOR b`` on ``t``-bit words."""

    b: int
    t: int

    def __post_init__(self) -> None:
        if self.t < 0:
            raise PermutationError("bit width must be non-negative")
        if not 0 <= self.b < (1 << self.t):
            raise PermutationError(f"b={self.b} does not fit in {self.t} bits")

    def __call__(self, a: int) -> int:
        return xor_map_apply(self, a)


def xor_map_apply(m: XorMap, a: int) -> int:
    if not 0 <= a < (1 << m.t):
        raise PermutationError(f"{a} does not fit in {m.t} bits")
    return a ^ m.b


def xor_map_as_permutation(m: XorMap) -> Permutation:
    return Permutation(tuple(a ^ m.b for a in range(1 << m.t)))
