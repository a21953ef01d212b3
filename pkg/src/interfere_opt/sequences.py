"""Treatment sequences, their relabeling orbits ("symmetric blocks") and
per-sequence counting statistics.

A sequence is a tuple of 1-based treatment labels. Orbits under relabeling of
the ``t`` treatments are represented by their restricted-growth-string form:
labels introduced left to right as 1, 2, 3, ...
"""

from dataclasses import dataclass
from itertools import permutations
from math import perm

from .errors import CapacityError, InvalidInputError

MAX_SEQUENCES = 10**7


def check_sequence(s, t):
    s = tuple(int(v) for v in s)
    if len(s) < 1:
        raise InvalidInputError("empty sequence")
    if t < 1 or any(v < 1 or v > t for v in s):
        raise InvalidInputError(f"labels of {s} must lie in 1..{t}")
    return s


def canonical_form(s):
    """First-occurrence relabeling of ``s``."""
    seen = {}
    out = []
    for v in s:
        if v not in seen:
            seen[v] = len(seen) + 1
        out.append(seen[v])
    return tuple(out)


@dataclass(frozen=True, order=True)
class SymmetricBlock:
    representative: tuple
    t: int

    @property
    def k(self):
        return len(self.representative)

    @property
    def distinct_count(self):
        return max(self.representative)

    @property
    def orbit_size(self):
        return perm(self.t, self.distinct_count)

    def members(self):
        """All relabelings of the representative, in lexicographic order."""
        h = self.distinct_count
        out = {tuple(sig[v - 1] for v in self.representative)
               for sig in permutations(range(1, self.t + 1), h)}
        return sorted(out)

    def dual(self):
        return SymmetricBlock(canonical_form(self.representative[::-1]), self.t)

    def label(self):
        return "".join(str(v) for v in self.representative) if self.t < 10 else \
            "-".join(str(v) for v in self.representative)


def canonicalize(s, t):
    s = check_sequence(s, t)
    return SymmetricBlock(canonical_form(s), t)


def _rgs(k, t):
    # restricted growth strings of length k with at most t symbols, lexicographic
    seq = [1] * k
    yield tuple(seq)
    while True:
        i = k - 1
        while i > 0:
            cap = max(seq[:i]) + 1
            if seq[i] < min(cap, t):
                break
            i -= 1
        if i == 0:
            return
        seq[i] += 1
        for j in range(i + 1, k):
            seq[j] = 1
        yield tuple(seq)


def enumerate_blocks(k, t):
    """All symmetric blocks for block size ``k`` and ``t`` treatments."""
    if k < 3 or t < 2:
        raise InvalidInputError(f"need k >= 3 and t >= 2, got k={k}, t={t}")
    if t**k > MAX_SEQUENCES:
        raise CapacityError(f"t^k = {t}^{k} exceeds {MAX_SEQUENCES} sequences")
    return [SymmetricBlock(r, t) for r in _rgs(k, t)]


def dual(s):
    return tuple(s)[::-1]


@dataclass(frozen=True)
class SequenceStats:
    phi: int
    varphi: int
    freq: tuple
    chi: int
    first_label: int
    last_label: int


def stats(s, t=None):
    """Adjacent-equal count, gap-2 equal count, label frequencies and their square sum."""
    s = tuple(s)
    if t is None:
        t = max(s)
    s = check_sequence(s, t)
    k = len(s)
    phi = sum(s[i] == s[i + 1] for i in range(k - 1))
    varphi = sum(s[i - 1] == s[i + 1] for i in range(1, k - 1))
    freq = tuple(s.count(m) for m in range(1, t + 1))
    chi = sum(f * f for f in freq)
    return SequenceStats(phi, varphi, freq, chi, s[0], s[-1])
