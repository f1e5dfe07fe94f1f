"""Dense float64 vector helpers and a deterministic random stream.

All vectors are 1-D numpy float64 arrays; matrices are 2-D float64 arrays.
Randomness comes from :class:`RngStream`, a xoshiro256** generator seeded
through splitmix64. Both are fixed published algorithms, so a given seed
produces the same draw sequence on every platform and numpy version, which
is what makes whole experiment runs bit-reproducible.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_INV_2_53 = 1.0 / (1 << 53)


def _splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step; returns (output, next_state)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31), state


def _fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


def derive_seed(seed: int, *tokens) -> int:
    """Derive a child seed from a parent seed and context tokens.

    Tokens (ints or strings) are folded in with FNV-1a over their UTF-8
    representation, then mixed with splitmix64. Used for per-run, per-epoch
    and per-user streams so that substreams are independent yet fully
    determined by the master seed.
    """
    h = seed & _MASK64
    for tok in tokens:
        h ^= _fnv1a64(str(tok).encode("utf-8"))
        h, _ = _splitmix64(h)
    return h


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class RngStream:
    """xoshiro256** random stream with a fixed cross-platform sequence.

    Single-owner: never share one instance across threads. Uniform doubles
    take the top 53 bits of each 64-bit output; normals use Box-Muller with
    the spare value cached.
    """

    __slots__ = ("seed", "_s", "_spare")

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        state = self.seed
        s = []
        for _ in range(4):
            out, state = _splitmix64(state)
            s.append(out)
        self._s = s
        self._spare = None

    def next_uint64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        """One double in [0, 1)."""
        return (self.next_uint64() >> 11) * _INV_2_53

    def normal(self) -> float:
        """One standard normal draw (Box-Muller)."""
        if self._spare is not None:
            z = self._spare
            self._spare = None
            return z
        # u1 in (0, 1] so log() is safe
        u1 = ((self.next_uint64() >> 11) + 1) * _INV_2_53
        u2 = (self.next_uint64() >> 11) * _INV_2_53
        r = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare = r * math.sin(theta)
        return r * math.cos(theta)

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("below() requires n >= 1")
        limit = _MASK64 - (_MASK64 + 1) % n
        while True:
            x = self.next_uint64()
            if x <= limit:
                return x % n

    def shuffle(self, seq: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.below(i + 1)
            seq[i], seq[j] = seq[j], seq[i]

    def spawn(self, *tokens) -> "RngStream":
        """Independent child stream keyed by the given tokens."""
        return RngStream(derive_seed(self.seed, *tokens))


def as_vector(x) -> np.ndarray:
    """Coerce to a 1-D float64 array (copies only when needed)."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    return v


def dot(a, b) -> float:
    a = as_vector(a)
    b = as_vector(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(a @ b)


def axpy(alpha: float, x, y) -> np.ndarray:
    """alpha * x + y, elementwise."""
    x = as_vector(x)
    y = as_vector(y)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    return alpha * x + y


def softmax(logits) -> np.ndarray:
    """Stable softmax over the last axis (max-subtraction before exp)."""
    z = np.asarray(logits, dtype=np.float64)
    if z.size == 0:
        raise ValueError("softmax of an empty vector")
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def minmax_unit(v) -> np.ndarray:
    """Min-max rescale to [0, 1]; a constant vector maps to all 0.5."""
    v = as_vector(v)
    if v.size == 0:
        raise ValueError("cannot rescale an empty vector")
    lo = float(v.min())
    hi = float(v.max())
    if hi - lo <= 0.0:
        return np.full(v.shape, 0.5)
    return (v - lo) / (hi - lo)


def rand_uniform(rng: RngStream, n: int) -> np.ndarray:
    """n uniform draws in [0, 1) from the stream."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.array([rng.uniform() for _ in range(n)], dtype=np.float64)


def rand_normal(rng: RngStream, n: int) -> np.ndarray:
    """n standard normal draws from the stream (Box-Muller)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.array([rng.normal() for _ in range(n)], dtype=np.float64)
