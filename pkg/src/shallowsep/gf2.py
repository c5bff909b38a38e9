"""Bit-packed GF(2) helpers.

Bit ``j`` of a packed row lives in word ``j >> 6`` at position ``j & 63``
(little-endian within each ``uint64`` word).
"""

from __future__ import annotations

import numpy as np

WORD = 64


def n_words(n_bits: int) -> int:
    return (n_bits + WORD - 1) // WORD


def pack_bits(bits) -> np.ndarray:
    """Pack a ``(..., n)`` 0/1 array into ``(..., n_words(n))`` uint64 words."""
    bits = np.asarray(bits, dtype=np.uint8)
    n = bits.shape[-1]
    w = n_words(n)
    pad = w * WORD - n
    if pad:
        bits = np.concatenate(
            [bits, np.zeros(bits.shape[:-1] + (pad,), dtype=np.uint8)], axis=-1
        )
    packed = np.packbits(bits, axis=-1, bitorder="little")
    packed = np.ascontiguousarray(packed)
    return packed.view("<u8").astype(np.uint64, copy=False).reshape(bits.shape[:-1] + (w,))


def unpack_bits(words: np.ndarray, n_bits: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`; returns uint8 array of shape ``(..., n_bits)``."""
    words = np.ascontiguousarray(words, dtype=np.uint64)
    as_bytes = words.view(np.uint8).reshape(words.shape[:-1] + (words.shape[-1] * 8,))
    bits = np.unpackbits(as_bytes, axis=-1, bitorder="little")
    return bits[..., :n_bits]


def get_bit(words: np.ndarray, j: int) -> np.ndarray:
    """Bit ``j`` of every row of a ``(rows, W)`` packed matrix, as uint8."""
    return ((words[..., j >> 6] >> np.uint64(j & 63)) & np.uint64(1)).astype(np.uint8)


def parity(words: np.ndarray) -> np.ndarray:
    """Parity of the set bits along the last axis."""
    return (np.bitwise_count(words).sum(axis=-1, dtype=np.int64) & 1).astype(np.uint8)


def popcount(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)


def nonzero_word_span(row: np.ndarray) -> tuple[int, int]:
    """Half-open word range covering the nonzero words of a packed row."""
    nz = np.flatnonzero(row)
    if nz.size == 0:
        return 0, 0
    return int(nz[0]), int(nz[-1]) + 1


def echelon(
    rows: np.ndarray,
    n_cols: int,
    rhs: np.ndarray | None = None,
    column_order=None,
    reduced: bool = False,
):
    """Gaussian elimination on packed rows over GF(2).

    Returns ``(rows, rhs, pivots)`` where the first ``len(pivots)`` rows are the
    independent echelon rows (row ``i`` has its pivot at column ``pivots[i]``)
    and the remaining rows are zero.  Columns are visited in ``column_order``
    (default: natural order).  With ``reduced=True`` every pivot column is
    cleared from all other rows.
    """
    a = np.array(rows, dtype=np.uint64, copy=True)
    if a.ndim == 1:
        a = a.reshape(0, n_words(n_cols)) if a.size == 0 else a[None, :]
    n_rows = a.shape[0]
    v = None if rhs is None else np.array(rhs, dtype=np.uint8, copy=True)
    order = range(n_cols) if column_order is None else column_order
    pivots: list[int] = []
    top = 0
    for c in order:
        if top == n_rows:
            break
        w, sh = c >> 6, np.uint64(c & 63)
        col = (a[top:, w] >> sh) & np.uint64(1)
        hits = np.flatnonzero(col)
        if hits.size == 0:
            continue
        p = top + int(hits[0])
        if p != top:
            a[[top, p]] = a[[p, top]]
            if v is not None:
                v[[top, p]] = v[[p, top]]
        if reduced:
            targets = np.flatnonzero((a[:, w] >> sh) & np.uint64(1))
            targets = targets[targets != top]
        else:
            targets = top + hits[1:]
        if targets.size:
            lo, hi = nonzero_word_span(a[top])
            a[targets, lo:hi] ^= a[top, lo:hi]
            if v is not None:
                v[targets] ^= v[top]
        pivots.append(c)
        top += 1
    return a, v, pivots


def rank(rows: np.ndarray, n_cols: int) -> int:
    return len(echelon(rows, n_cols)[2])


def matvec(rows: np.ndarray, vec_words: np.ndarray) -> np.ndarray:
    """``rows @ vec`` over GF(2) for packed rows and a packed vector."""
    return parity(rows & vec_words)


def left_nullspace(rows: np.ndarray, n_cols: int) -> np.ndarray:
    """Packed basis (over the row index space) of ``{u : u^T rows = 0}``."""
    rows = np.asarray(rows, dtype=np.uint64)
    n_rows = rows.shape[0]
    if n_rows == 0:
        return np.zeros((0, 0), dtype=np.uint64)
    # augment each row with an identity tag tracking row combinations
    tag = pack_bits(np.eye(n_rows, dtype=np.uint8))
    aug = np.concatenate([rows, tag], axis=1)
    red, _, piv = echelon(aug, n_cols)
    w = rows.shape[1]
    return red[len(piv):, w:]
