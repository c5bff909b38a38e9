"""Exact stabilizer-state simulation over GF(2).

The tableau keeps ``2m`` bit-packed rows: rows ``0..m-1`` are destabilizers,
rows ``m..2m-1`` are stabilizers.  Each row is a Pauli ``i^(x.z) X^x Z^z`` with
a sign bit, so ``x=z=1`` on a qubit means a Hermitian ``Y``.  An outcome bit
``b`` of a measurement corresponds to eigenvalue ``(-1)^b``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import gf2
from .circuit import Gate, GateKind, LayeredCircuit, gate as make_gate

_ONE = np.uint64(1)


class PauliOp(IntEnum):
    """Single-qubit Pauli with code ``x_bit + 2*z_bit``."""

    I = 0
    X = 1
    Z = 2
    Y = 3

    @property
    def x_bit(self) -> int:
        return int(self) & 1

    @property
    def z_bit(self) -> int:
        return int(self) >> 1


class CoinExhaustedError(RuntimeError):
    """Raised when a measurement needs a random bit and the coin source is empty."""


# ---------------------------------------------------------------------------
# Pauli products on packed rows


def _product_phase(x1, z1, x2, z2) -> np.ndarray:
    """Exponent ``g`` (mod 4) with ``P1 P2 = i^g P(x1^x2, z1^z2)``, summed per row."""
    nx2, nz2 = ~x2, ~z2
    y1 = x1 & z1
    xo1 = x1 & ~z1
    zo1 = ~x1 & z1
    plus = (y1 & nx2 & z2) | (xo1 & x2 & z2) | (zo1 & x2 & nz2)
    minus = (y1 & x2 & nz2) | (xo1 & nx2 & z2) | (zo1 & x2 & z2)
    return gf2.popcount(plus) - gf2.popcount(minus)


def _tree_product(xs: np.ndarray, zs: np.ndarray, signs: np.ndarray):
    """Product of a stack of mutually commuting Pauli rows.

    ``signs`` may be 1-D (one bit per row) or 2-D packed sign vectors, in which
    case bit 0 of word 0 carries the constant phase.
    """
    xs, zs, signs = xs.copy(), zs.copy(), signs.copy()
    symbolic = signs.ndim == 2
    while xs.shape[0] > 1:
        h = xs.shape[0] // 2
        a, b = slice(0, 2 * h, 2), slice(1, 2 * h, 2)
        g = _product_phase(xs[a], zs[a], xs[b], zs[b])
        flip = ((g & 3) >> 1).astype(np.uint8)
        nx = xs[a] ^ xs[b]
        nz = zs[a] ^ zs[b]
        ns = signs[a] ^ signs[b]
        if symbolic:
            ns[:, 0] ^= flip.astype(np.uint64)
        else:
            ns ^= flip
        if xs.shape[0] % 2:
            nx = np.concatenate([nx, xs[-1:]])
            nz = np.concatenate([nz, zs[-1:]])
            ns = np.concatenate([ns, signs[-1:]])
        xs, zs, signs = nx, nz, ns
    return xs[0], zs[0], signs[0]


# ---------------------------------------------------------------------------
# Tableau


@dataclass
class Tableau:
    m: int
    xs: np.ndarray
    zs: np.ndarray
    signs: np.ndarray

    @property
    def words(self) -> int:
        return self.xs.shape[1]

    def copy(self) -> "Tableau":
        return Tableau(self.m, self.xs.copy(), self.zs.copy(), self.signs.copy())

    def stabilizer_bits(self):
        """Unpacked ``(x, z, sign)`` arrays of the stabilizer rows."""
        m = self.m
        return (
            gf2.unpack_bits(self.xs[m:], m),
            gf2.unpack_bits(self.zs[m:], m),
            self.signs[m:].copy(),
        )

    def stabilizer_strings(self) -> list[str]:
        """Rows as ``"+XZ"``-style strings (small tableaux only)."""
        x, z, s = self.stabilizer_bits()
        letters = np.array(["I", "X", "Z", "Y"])
        return ["-+"[1 - int(si)] + "".join(letters[xr + 2 * zr]) for xr, zr, si in zip(x, z, s)]

    # -- single gate on the packed layout ---------------------------------

    def _check_qubit(self, q: int) -> None:
        if not 0 <= q < self.m:
            raise IndexError(f"qubit {q} out of range for {self.m} qubits")

    def _col(self, a: np.ndarray, q: int) -> np.ndarray:
        return (a[:, q >> 6] >> np.uint64(q & 63)) & _ONE

    def _xor_col(self, a: np.ndarray, q: int, bits: np.ndarray) -> None:
        a[:, q >> 6] ^= bits << np.uint64(q & 63)

    def apply(self, g: Gate) -> "Tableau":
        if not g.kind.clifford:
            raise ValueError(f"{g.kind.name} is not a Clifford gate")
        for q in g.qubits:
            self._check_qubit(q)
        k = g.kind
        if k is GateKind.R:
            self.apply(Gate(GateKind.S_DAGGER, g.qubits))
            return self.apply(Gate(GateKind.H, g.qubits))
        if k.arity == 2:
            a, b = g.qubits
            if a == b:
                raise ValueError("two-qubit gate needs distinct qubits")
            xa, za = self._col(self.xs, a), self._col(self.zs, a)
            xb, zb = self._col(self.xs, b), self._col(self.zs, b)
            if k is GateKind.CZ:
                self.signs ^= (xa & xb & (za ^ zb)).astype(np.uint8)
                self._xor_col(self.zs, a, xb)
                self._xor_col(self.zs, b, xa)
            else:  # CNOT, control a, target b
                self.signs ^= (xa & zb & (xb ^ za ^ _ONE)).astype(np.uint8)
                self._xor_col(self.xs, b, xa)
                self._xor_col(self.zs, a, zb)
            return self
        (q,) = g.qubits
        x, z = self._col(self.xs, q), self._col(self.zs, q)
        if k is GateKind.H:
            self.signs ^= (x & z).astype(np.uint8)
            d = x ^ z
            self._xor_col(self.xs, q, d)
            self._xor_col(self.zs, q, d)
        elif k is GateKind.S:
            self.signs ^= (x & z).astype(np.uint8)
            self._xor_col(self.zs, q, x)
        elif k is GateKind.S_DAGGER:
            self.signs ^= (x & (z ^ _ONE)).astype(np.uint8)
            self._xor_col(self.zs, q, x)
        elif k is GateKind.PAULI_X:
            self.signs ^= z.astype(np.uint8)
        elif k is GateKind.PAULI_Z:
            self.signs ^= x.astype(np.uint8)
        elif k is GateKind.PAULI_Y:
            self.signs ^= (x ^ z).astype(np.uint8)
        else:  # pragma: no cover - enum is exhaustive
            raise ValueError(k)
        return self

    def apply_pauli(self, p: PauliOp, q: int) -> "Tableau":
        """Inject a Pauli fault: flips the sign of every anticommuting row."""
        self._check_qubit(q)
        p = PauliOp(p)
        if p is PauliOp.I:
            return self
        x, z = self._col(self.xs, q), self._col(self.zs, q)
        flip = (x & np.uint64(p.z_bit)) ^ (z & np.uint64(p.x_bit))
        self.signs ^= flip.astype(np.uint8)
        return self

    # -- layers in bulk ----------------------------------------------------

    def apply_layers(self, layers: Iterable[Sequence[Gate]], chunk_bits: int = 1 << 24) -> "Tableau":
        """Apply whole layers at once, rows processed in unpacked chunks.

        Conjugation acts on each row independently, so every chunk of rows
        runs through the full layer list before being repacked.
        """
        plan = [_group_layer(layer) for layer in layers]
        for kinds in plan:
            for k, qs in kinds.items():
                if not k.clifford:
                    raise ValueError(f"{k.name} is not a Clifford gate")
                if qs.size and (qs.min() < 0 or qs.max() >= self.m):
                    raise IndexError("qubit index out of range")
        rows = 2 * self.m
        step = max(64, chunk_bits // max(self.m, 1))
        for lo in range(0, rows, step):
            hi = min(rows, lo + step)
            x = gf2.unpack_bits(self.xs[lo:hi], self.m)
            z = gf2.unpack_bits(self.zs[lo:hi], self.m)
            s = self.signs[lo:hi].copy()
            for kinds in plan:
                for k, qs in kinds.items():
                    s ^= _bulk_apply(k, qs, x, z)
            self.xs[lo:hi] = gf2.pack_bits(x)
            self.zs[lo:hi] = gf2.pack_bits(z)
            self.signs[lo:hi] = s
        return self

    # -- row multiplication --------------------------------------------------

    def _rowsum(self, targets: np.ndarray, p: int, signs: np.ndarray | None = None) -> None:
        """Replace each target row h by ``P_p * P_h`` (phase tracked)."""
        if targets.size == 0:
            return
        lo_x, hi_x = gf2.nonzero_word_span(self.xs[p])
        lo_z, hi_z = gf2.nonzero_word_span(self.zs[p])
        if hi_x == 0:
            lo, hi = lo_z, hi_z
        elif hi_z == 0:
            lo, hi = lo_x, hi_x
        else:
            lo, hi = min(lo_x, lo_z), max(hi_x, hi_z)
        xp, zp = self.xs[p, lo:hi], self.zs[p, lo:hi]
        xt, zt = self.xs[targets, lo:hi], self.zs[targets, lo:hi]
        flip = ((_product_phase(xp, zp, xt, zt) & 3) >> 1).astype(np.uint8)
        self.xs[targets, lo:hi] = xt ^ xp
        self.zs[targets, lo:hi] = zt ^ zp
        if signs is None:
            self.signs[targets] ^= self.signs[p] ^ flip
        else:
            signs[targets] ^= signs[p]
            signs[targets, 0] ^= flip.astype(np.uint64)

    def _measure(self, a: int, signs: np.ndarray | None = None):
        """Shared Aaronson-Gottesman measurement step.

        Returns ``("random", p)`` after collapsing onto row ``p`` (whose sign the
        caller must set), or ``("det", sign)`` with the product sign.
        """
        m = self.m
        xa = self._col(self.xs, a)
        stab_hits = np.flatnonzero(xa[m:])
        sg = self.signs if signs is None else signs
        if stab_hits.size:
            p = m + int(stab_hits[0])
            targets = np.flatnonzero(xa)
            targets = targets[targets != p]
            self._rowsum(targets, p, signs)
            d = p - m
            self.xs[d] = self.xs[p]
            self.zs[d] = self.zs[p]
            sg[d] = sg[p]
            self.xs[p] = 0
            self.zs[p] = 0
            self.zs[p, a >> 6] = _ONE << np.uint64(a & 63)
            return "random", p
        rows = m + np.flatnonzero(xa[:m])
        _, _, s = _tree_product(self.xs[rows], self.zs[rows], sg[rows])
        return "det", s


def _group_layer(layer: Sequence[Gate]) -> dict[GateKind, np.ndarray]:
    out: dict[GateKind, list] = {}
    for g in layer:
        if g.kind is GateKind.R:
            raise ValueError("expand R into S_DAGGER, H layers before bulk application")
        out.setdefault(g.kind, []).append(g.qubits)
    return {k: np.array(v, dtype=np.int64).reshape(len(v), k.arity) for k, v in out.items()}


def _xor_reduce(a: np.ndarray) -> np.ndarray:
    if a.shape[1] == 0:
        return np.zeros(a.shape[0], dtype=np.uint8)
    return np.bitwise_xor.reduce(a, axis=1)


def _bulk_apply(k: GateKind, qs: np.ndarray, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Apply all gates of one kind in a layer to unpacked rows; return sign flips."""
    if k.arity == 2:
        a, b = qs[:, 0], qs[:, 1]
        xa, za, xb, zb = x[:, a], z[:, a], x[:, b], z[:, b]
        if k is GateKind.CZ:
            flip = _xor_reduce(xa & xb & (za ^ zb))
            z[:, a] = za ^ xb
            z[:, b] = zb ^ xa
        else:
            flip = _xor_reduce(xa & zb & (xb ^ za ^ 1))
            x[:, b] = xb ^ xa
            z[:, a] = za ^ zb
        return flip
    q = qs[:, 0]
    xq, zq = x[:, q], z[:, q]
    if k is GateKind.H:
        x[:, q], z[:, q] = zq, xq
        return _xor_reduce(xq & zq)
    if k is GateKind.S:
        z[:, q] = zq ^ xq
        return _xor_reduce(xq & zq)
    if k is GateKind.S_DAGGER:
        z[:, q] = zq ^ xq
        return _xor_reduce(xq & (zq ^ 1))
    if k is GateKind.PAULI_X:
        return _xor_reduce(zq)
    if k is GateKind.PAULI_Z:
        return _xor_reduce(xq)
    if k is GateKind.PAULI_Y:
        return _xor_reduce(xq ^ zq)
    raise ValueError(k)  # pragma: no cover


# ---------------------------------------------------------------------------
# Functional surface


def new_tableau(m: int) -> Tableau:
    """Tableau of ``|0...0>``: destabilizers ``X_i``, stabilizers ``+Z_i``."""
    if m < 1:
        raise ValueError("a tableau needs at least one qubit")
    w = gf2.n_words(m)
    xs = np.zeros((2 * m, w), dtype=np.uint64)
    zs = np.zeros((2 * m, w), dtype=np.uint64)
    idx = np.arange(m)
    xs[idx, idx >> 6] = _ONE << (idx & 63).astype(np.uint64)
    zs[m + idx, idx >> 6] = _ONE << (idx & 63).astype(np.uint64)
    return Tableau(m, xs, zs, np.zeros(2 * m, dtype=np.uint8))


def apply_gate(t: Tableau, g: Gate | GateKind, *qubits: int) -> Tableau:
    """Conjugate ``t`` by one gate in place and return it."""
    if isinstance(g, GateKind):
        g = make_gate(g, *qubits)
    return t.apply(g)


def apply_pauli_fault(t: Tableau, p: PauliOp, qubit: int) -> Tableau:
    return t.apply_pauli(p, qubit)


def _coin_source(coin):
    if coin is None:
        return None
    if isinstance(coin, np.random.Generator):
        return lambda: int(coin.integers(2))
    if callable(coin):
        return coin
    it = iter(coin) if not isinstance(coin, Iterator) else coin

    def draw():
        try:
            return int(next(it)) & 1
        except StopIteration:
            raise CoinExhaustedError("random-bit source exhausted during measurement") from None

    return draw


def measure_z(t: Tableau, qubit: int, coin=None) -> tuple[int, Tableau]:
    """Measure ``qubit`` in the Z basis, updating ``t`` in place.

    ``coin`` supplies the outcome of a random measurement: a numpy Generator,
    a zero-argument callable, or an iterable of bits.
    """
    t._check_qubit(qubit)
    draw = _coin_source(coin)
    kind, val = t._measure(qubit)
    if kind == "det":
        return int(val), t
    if draw is None:
        raise CoinExhaustedError("measurement is random but no coin source was given")
    bit = int(draw()) & 1
    t.signs[val] = bit
    return bit, t


def simulate(circuit: LayeredCircuit, faults: Mapping[tuple[int, int], PauliOp] | None = None) -> Tableau:
    """Run a layered circuit (basis changes compiled) from ``|0...0>``.

    ``faults`` maps ``(layer, qubit)`` to a Pauli injected right after that layer.
    """
    c = circuit if all(b == "Z" for b in circuit.measure) else circuit.with_basis_change()
    t = new_tableau(c.qubit_count)
    if not faults:
        return t.apply_layers(_expand_r(c.layers))
    by_layer: dict[int, list] = {}
    for (layer, q), p in faults.items():
        if not 0 <= layer < c.depth:
            raise IndexError(f"fault layer {layer} outside circuit depth {c.depth}")
        by_layer.setdefault(layer, []).append((q, p))
    start = 0
    for layer in sorted(by_layer):
        t.apply_layers(_expand_r(c.layers[start : layer + 1]))
        for q, p in by_layer[layer]:
            t.apply_pauli(p, q)
        start = layer + 1
    return t.apply_layers(_expand_r(c.layers[start:]))


def _expand_r(layers):
    out = []
    for layer in layers:
        if any(g.kind is GateKind.R for g in layer):
            pre = [Gate(GateKind.S_DAGGER, g.qubits) for g in layer if g.kind is GateKind.R]
            post = [Gate(GateKind.H, g.qubits) if g.kind is GateKind.R else g for g in layer]
            out.extend([pre, post])
        else:
            out.append(layer)
    return out


# ---------------------------------------------------------------------------
# Group-level checks


def symplectic_check(t: Tableau) -> bool:
    """Stabilizers commute pairwise, destabilizers pair with them, full rank."""
    m = t.m
    x = gf2.unpack_bits(t.xs, m).astype(np.int64)
    z = gf2.unpack_bits(t.zs, m).astype(np.int64)
    omega = (x @ z.T + z @ x.T) % 2
    expected = np.zeros((2 * m, 2 * m), dtype=np.int64)
    expected[np.arange(m), m + np.arange(m)] = 1
    expected[m + np.arange(m), np.arange(m)] = 1
    # destabilizer-destabilizer commutation is not tracked by the AG update
    omega[:m, :m] = 0
    if not np.array_equal(omega, expected):
        return False
    stab = np.concatenate([t.xs[m:], t.zs[m:]], axis=1)
    return gf2.rank(stab, 2 * t.words * 64) == m


def stabilizer_sign(t: Tableau, x_bits, z_bits) -> int:
    """``+1``/``-1`` if ``±P`` lies in the stabilizer group, else ``0``.

    ``P`` is given by its X and Z support (Hermitian form, ``x=z=1`` is Y).
    """
    m = t.m
    px, pz = gf2.pack_bits(np.asarray(x_bits)), gf2.pack_bits(np.asarray(z_bits))
    stab_anti = gf2.parity(t.xs[m:] & pz) ^ gf2.parity(t.zs[m:] & px)
    if stab_anti.any():
        return 0
    destab_anti = gf2.parity(t.xs[:m] & pz) ^ gf2.parity(t.zs[:m] & px)
    rows = m + np.flatnonzero(destab_anti)
    if rows.size == 0:
        return 1 if not (px.any() or pz.any()) else 0
    gx, gz, gs = _tree_product(t.xs[rows], t.zs[rows], t.signs[rows])
    if not (np.array_equal(gx, px) and np.array_equal(gz, pz)):
        return 0
    return -1 if gs else 1


# ---------------------------------------------------------------------------
# Affine subspaces


@dataclass
class AffineSubspace:
    """Solution set ``{y : C y = b}`` over GF(2); ``C`` stored bit-packed.

    Rows of ``C`` are independent.  ``consistent=False`` marks an empty system.
    """

    m: int
    C: np.ndarray
    b: np.ndarray
    consistent: bool = True
    _echelon: tuple | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_equations(cls, C, b, m: int | None = None, column_order=None) -> "AffineSubspace":
        """Build from any (possibly dependent or inconsistent) system.

        ``C`` may be an unpacked 0/1 matrix or packed words (then pass ``m``).
        """
        C = np.asarray(C)
        if C.dtype != np.uint64:
            m = C.shape[1] if C.ndim == 2 else (m or 0)
            C = gf2.pack_bits(C.reshape(-1, m)) if C.size else np.zeros((0, gf2.n_words(m)), np.uint64)
        if m is None:
            raise ValueError("m is required for packed rows")
        b = np.asarray(b, dtype=np.uint8).reshape(-1)
        if C.shape[0] != b.shape[0]:
            raise ValueError("C and b disagree on the number of equations")
        red, rhs, piv = gf2.echelon(C, m, b, column_order=column_order)
        r = len(piv)
        consistent = not rhs[r:].any()
        return cls(m, red[:r].copy(), rhs[:r].copy(), consistent, (red[:r].copy(), rhs[:r].copy(), piv))

    @property
    def r(self) -> int:
        return int(self.C.shape[0])

    @property
    def matrix(self) -> np.ndarray:
        return gf2.unpack_bits(self.C, self.m)

    def count(self) -> int:
        return 2 ** (self.m - self.r) if self.consistent else 0

    def echelon_form(self, column_order=None):
        if self._echelon is None or column_order is not None:
            red, rhs, piv = gf2.echelon(self.C, self.m, self.b, column_order=column_order)
            form = (red[: len(piv)], rhs[: len(piv)], piv)
            if column_order is not None:
                return form
            self._echelon = form
        return self._echelon

    def intersect(self, other: "AffineSubspace") -> "AffineSubspace":
        if other.m != self.m:
            raise ValueError("ambient dimensions differ")
        sub = AffineSubspace.from_equations(
            np.concatenate([self.C, other.C]), np.concatenate([self.b, other.b]), self.m
        )
        sub.consistent = sub.consistent and self.consistent and other.consistent
        return sub

    def enumerate(self) -> np.ndarray:
        """All solutions as a ``(count, m)`` array; only for ``m - r <= 20``."""
        if not self.consistent:
            return np.zeros((0, self.m), dtype=np.uint8)
        if self.m - self.r > 20:
            raise ValueError("solution set too large to enumerate")
        rows, rhs, piv = self.echelon_form()
        free = np.setdiff1d(np.arange(self.m), piv)
        n = 1 << free.size
        ys = np.zeros((n, self.m), dtype=np.uint8)
        codes = np.arange(n)
        for j, col in enumerate(free):
            ys[:, col] = (codes >> j) & 1
        dense = gf2.unpack_bits(rows, self.m)
        for i in range(len(piv) - 1, -1, -1):
            ys[:, piv[i]] = 0
            ys[:, piv[i]] = (ys @ dense[i] + rhs[i]) % 2
        return ys


def extract_affine_subspace(t: Tableau, column_order=None) -> AffineSubspace:
    """Support of the Z-basis outcome distribution of ``t``.

    Gaussian elimination on the X parts of the stabilizer rows leaves a basis
    of the Z-only subgroup; each such ``±Z^c`` contributes ``c . y = sign``.
    ``column_order`` only changes the pivot order (and hence fill-in), never
    the resulting solution set.
    """
    m = t.m
    work = Tableau(m, t.xs[m:].copy(), t.zs[m:].copy(), t.signs[m:].copy())
    free = np.ones(m, dtype=bool)
    order = range(m) if column_order is None else column_order
    for c in order:
        col = ((work.xs[:, c >> 6] >> np.uint64(c & 63)) & _ONE).astype(bool)
        hits = np.flatnonzero(col & free)
        if hits.size == 0:
            continue
        # sparsest candidate limits fill-in
        if hits.size > 1:
            weight = gf2.popcount(work.xs[hits]) + gf2.popcount(work.zs[hits])
            hits = hits[np.argsort(weight, kind="stable")]
        p = int(hits[0])
        work._rowsum(hits[1:], p)
        free[p] = False
    rows = np.flatnonzero(free)
    if work.xs[rows].any():  # pragma: no cover - would mean a broken tableau
        raise AssertionError("elimination left X support on a Z-only row")
    return AffineSubspace(m, work.zs[rows].copy(), work.signs[rows].copy())


def member(s: AffineSubspace, y) -> bool:
    y = np.asarray(y, dtype=np.uint8).reshape(-1)
    if y.size != s.m:
        raise ValueError(f"expected {s.m} bits, got {y.size}")
    if not s.consistent:
        return False
    if s.r == 0:
        return True
    return bool(np.array_equal(gf2.matvec(s.C, gf2.pack_bits(y)), s.b))


def member_many(s: AffineSubspace, ys: np.ndarray) -> np.ndarray:
    """Vectorised :func:`member` over rows of ``ys``."""
    ys = np.asarray(ys, dtype=np.uint8)
    if ys.shape[-1] != s.m:
        raise ValueError(f"expected {s.m} bits per row")
    if not s.consistent:
        return np.zeros(ys.shape[0], dtype=bool)
    if s.r == 0:
        return np.ones(ys.shape[0], dtype=bool)
    packed = gf2.pack_bits(ys)
    syn = gf2.parity(packed[:, None, :] & s.C[None, :, :])
    return ~(syn ^ s.b[None, :]).any(axis=1)


def sample_member(s: AffineSubspace, rng: np.random.Generator, shots: int | None = None) -> np.ndarray:
    """Uniform draw(s) from the solution set."""
    if not s.consistent:
        raise ValueError("inconsistent system has no solutions")
    rows, rhs, piv = s.echelon_form()
    n = 1 if shots is None else shots
    ys = rng.integers(0, 2, size=(n, s.m), dtype=np.uint8)
    if piv:
        piv_arr = np.asarray(piv)
        packed = gf2.pack_bits(ys)
        for i in range(len(piv) - 1, -1, -1):
            c = piv_arr[i]
            w, sh = c >> 6, np.uint64(c & 63)
            cur = gf2.parity(packed & rows[i])
            bad = np.flatnonzero(cur ^ rhs[i])
            packed[bad, w] ^= _ONE << sh
        ys = gf2.unpack_bits(packed, s.m)
    return ys[0] if shots is None else ys


def conditional_guess_probability(
    s: AffineSubspace, fixed: Mapping[int, int], free: Sequence[int]
) -> float:
    """Probability that uniformly guessing the ``free`` bits completes ``fixed``.

    Equals ``#{valid completions} / 2^|free|``, obtained from the rank of the
    restricted system (never by enumeration).
    """
    free = np.asarray(sorted(int(i) for i in free), dtype=np.int64)
    fixed_idx = np.asarray(sorted(int(i) for i in fixed), dtype=np.int64)
    if free.size + fixed_idx.size != s.m or np.intersect1d(free, fixed_idx).size:
        raise ValueError("fixed and free must partition the bit positions")
    if free.size and (free.min() < 0 or free.max() >= s.m):
        raise ValueError("free index out of range")
    if not s.consistent:
        return 0.0
    if s.r == 0:
        return 1.0
    y = np.zeros(s.m, dtype=np.uint8)
    for i in fixed_idx:
        y[i] = int(fixed[int(i)]) & 1
    rhs = s.b ^ gf2.matvec(s.C, gf2.pack_bits(y))
    if free.size == 0:
        return 0.0 if rhs.any() else 1.0
    sub = gf2.pack_bits(s.matrix[:, free])
    _, v, piv = gf2.echelon(sub, free.size, rhs)
    if v[len(piv):].any():
        return 0.0
    return math.ldexp(1.0, -len(piv))


# ---------------------------------------------------------------------------
# Sampling all qubits through sequential measurement


@dataclass
class OutcomeMap:
    """Outcomes of measuring every qubit: ``y = offset ^ M c`` for uniform coins ``c``."""

    offset: np.ndarray
    matrix: np.ndarray  # packed (m, words) over coin indices
    n_coins: int

    def sample(self, rng: np.random.Generator, shots: int = 1) -> np.ndarray:
        if self.n_coins == 0:
            return np.repeat(self.offset[None, :], shots, axis=0)
        coins = rng.integers(0, 2, size=(shots, self.n_coins), dtype=np.uint8)
        packed = gf2.pack_bits(coins)
        flips = gf2.parity(packed[:, None, :] & self.matrix[None, :, :])
        return flips ^ self.offset[None, :]


def measurement_map(t: Tableau, order: Sequence[int] | None = None, consume: bool = False) -> OutcomeMap:
    """Measure all qubits of a copy of ``t`` with symbolic coin outcomes.

    Each random measurement introduces a fresh coin; deterministic outcomes
    come out as affine functions of earlier coins.  This runs the same
    measurement rule as :func:`measure_z` and is independent of
    :func:`extract_affine_subspace`.  With ``consume=True`` the tableau is
    measured in place instead of copied.
    """
    m = t.m
    work = t if consume else t.copy()
    wk = gf2.n_words(m + 1)
    signs = np.zeros((2 * m, wk), dtype=np.uint64)
    signs[:, 0] = work.signs.astype(np.uint64)
    outcome = np.zeros((m, wk), dtype=np.uint64)
    coins = 0
    for a in range(m) if order is None else order:
        # only words already holding coins (plus the next one) can be nonzero
        active = signs[:, : ((coins + 1) >> 6) + 1]
        kind, val = work._measure(a, active)
        if kind == "random":
            coins += 1
            signs[val] = 0
            signs[val, coins >> 6] = _ONE << np.uint64(coins & 63)
            outcome[a] = signs[val]
        else:
            outcome[a, : active.shape[1]] = val
    del signs, work
    offset = (outcome[:, 0] & _ONE).astype(np.uint8)
    if not coins:
        return OutcomeMap(offset, np.zeros((m, 1), np.uint64), 0)
    # drop the constant bit: coin c moves from bit c to bit c-1
    used = gf2.n_words(coins + 1)
    out = outcome[:, :used] >> _ONE
    out[:, :-1] |= outcome[:, 1:used] << np.uint64(63)
    return OutcomeMap(offset, np.ascontiguousarray(out[:, : gf2.n_words(coins)]), coins)
