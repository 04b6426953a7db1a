"""Regular Gallager-ensemble LDPC codes.

Construction draws a uniform (w_c, w_r)-biregular parity-check matrix by
random edge-socket matching (with double-edge repair), redrawing until the
GF(2) rank reaches the design number of checks whenever possible.  Encoding
is systematic via GF(2) elimination; decoding is batched sum-product with
exact tanh check updates and extrinsic outputs for turbo loops.

LLR convention used project-wide: positive LLR favors bit 0 (BPSK symbol +1).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .euler import ParameterError


class ConstructionError(RuntimeError):
    """Code construction failed within the retry budget."""


# ---------------------------------------------------------------------------
# GF(2) linear algebra


def gf2_row_reduce(mat: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2); returns (rref, pivot columns)."""
    A = (np.asarray(mat, dtype=np.uint8) & 1).copy()
    rows, cols = A.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        hits = np.flatnonzero(A[r:, c]) + r
        if hits.size == 0:
            continue
        if hits[0] != r:
            A[[r, hits[0]]] = A[[hits[0], r]]
        elim = np.flatnonzero(A[:, c])
        elim = elim[elim != r]
        A[elim] ^= A[r]
        pivots.append(c)
        r += 1
    return A, pivots


def gf2_rank(mat: np.ndarray) -> int:
    return len(gf2_row_reduce(mat)[1])


# ---------------------------------------------------------------------------
# Code object


@dataclass(eq=False)
class LdpcCode:
    """Immutable after construction; decode calls are reentrant."""

    h: np.ndarray              # (m, n) uint8 parity-check matrix
    gen: np.ndarray            # (k, n) uint8 systematic generator, gen @ h.T = 0
    systematic_cols: np.ndarray  # (k,) columns carrying the message bits
    w_c: int
    w_r: int
    seed: int
    h_rank: int

    @property
    def n(self) -> int:
        return self.h.shape[1]

    @property
    def m(self) -> int:
        return self.h.shape[0]

    @property
    def k(self) -> int:
        return self.gen.shape[0]

    @property
    def rate(self) -> float:
        return self.k / self.n

    @cached_property
    def _graph(self) -> dict:
        """Edge arrays for message passing, grouped by check and by variable."""
        chk, var = np.nonzero(self.h)
        order = np.lexsort((var, chk))
        e_chk = chk[order].astype(np.int64)
        e_var = var[order].astype(np.int64)
        chk_ptr = np.searchsorted(e_chk, np.arange(self.m))
        by_var = np.argsort(e_var, kind="stable")
        var_ptr = np.searchsorted(e_var[by_var], np.arange(self.n))
        return {"e_chk": e_chk, "e_var": e_var, "chk_ptr": chk_ptr,
                "by_var": by_var, "var_ptr": var_ptr}

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        """Parity of each check for hard bits with shape (..., n)."""
        g = self._graph
        onedim = bits.ndim == 1
        b = np.atleast_2d(bits).astype(np.uint8, copy=False)
        # row weights are far below 256, so uint8 accumulation cannot wrap
        syn = np.add.reduceat(b[:, g["e_var"]], g["chk_ptr"], axis=1) & 1
        return syn[0] if onedim else syn


def _draw_biregular(n: int, m: int, w_c: int, w_r: int,
                    rng: np.random.Generator, max_fix: int = 10_000) -> np.ndarray | None:
    """One (w_c, w_r)-biregular 0/1 matrix via socket matching + swap repair."""
    var_sockets = np.repeat(np.arange(n), w_c)
    chk_sockets = np.repeat(np.arange(m), w_r)
    rng.shuffle(var_sockets)
    pairs = list(zip(chk_sockets.tolist(), var_sockets.tolist()))
    for _ in range(max_fix):
        seen: dict[tuple[int, int], int] = {}
        dup = -1
        for idx, pr in enumerate(pairs):
            if pr in seen:
                dup = idx
                break
            seen[pr] = idx
        if dup < 0:
            H = np.zeros((m, n), dtype=np.uint8)
            for c, v in pairs:
                H[c, v] = 1
            return H
        # swap the duplicate's variable endpoint with a random other edge
        j = int(rng.integers(len(pairs)))
        ci, vi = pairs[dup]
        cj, vj = pairs[j]
        if ci == cj or vi == vj:
            continue
        if (ci, vj) in seen or seen.get((cj, vi), j) != j:
            continue
        pairs[dup] = (ci, vj)
        pairs[j] = (cj, vi)
    return None


def gallager_construct(n: int, w_c: int, w_r: int, seed: int = 0,
                       max_tries: int = 60) -> LdpcCode:
    """Draw a regular (w_c, w_r) code of length n with k = n (1 - w_c/w_r).

    Retries the draw until the parity-check matrix reaches full design rank
    n - k; if no full-rank instance appears within the budget the best
    (highest-rank) draw is kept, with the transmitted code being a k-dim
    subcode of its nullspace.
    """
    if w_c < 2 or w_r <= w_c:
        raise ParameterError(f"need 2 <= w_c < w_r, got ({w_c}, {w_r})")
    if (n * w_c) % w_r != 0:
        raise ParameterError(f"n*w_c = {n * w_c} not divisible by w_r = {w_r}")
    m = n * w_c // w_r
    k = n - m
    if k < 1:
        raise ParameterError(f"non-positive message length for (n={n}, w_c={w_c}, w_r={w_r})")

    best: tuple[int, np.ndarray] | None = None
    for attempt in range(max_tries):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt, n, w_c, w_r]))
        H = _draw_biregular(n, m, w_c, w_r, rng)
        if H is None:
            continue
        rank = gf2_rank(H)
        if best is None or rank > best[0]:
            best = (rank, H)
        if rank == m:
            break
    if best is None:
        raise ConstructionError(f"no simple biregular graph found for (n={n}, {w_c}, {w_r})")
    rank, H = best

    rref, pivots = gf2_row_reduce(H)
    free_cols = np.setdiff1d(np.arange(n), pivots)
    if free_cols.size < k:
        raise ConstructionError("parity-check nullity below design dimension")
    sys_cols = free_cols[:k]
    gen = np.zeros((k, n), dtype=np.uint8)
    piv = np.asarray(pivots, dtype=np.int64)
    for j, col in enumerate(sys_cols):
        gen[j, col] = 1
        if piv.size:
            gen[j, piv] = rref[:piv.size, col]
    assert not ((gen.astype(np.int32) @ H.T.astype(np.int32)) & 1).any()
    return LdpcCode(h=H, gen=gen, systematic_cols=sys_cols, w_c=w_c, w_r=w_r,
                    seed=seed, h_rank=rank)


_CODE_CACHE: dict[tuple[int, int, int, int], LdpcCode] = {}


def cached_code(n: int, w_c: int, w_r: int, seed: int = 0) -> LdpcCode:
    key = (n, w_c, w_r, seed)
    if key not in _CODE_CACHE:
        _CODE_CACHE[key] = gallager_construct(n, w_c, w_r, seed)
    return _CODE_CACHE[key]


# ---------------------------------------------------------------------------
# Encoding


def encode(code: LdpcCode, message_bits: np.ndarray) -> np.ndarray:
    """Systematic encoding of (..., k) message bits to (..., n) codewords."""
    msg = np.asarray(message_bits)
    if msg.shape[-1] != code.k:
        raise ParameterError(f"message length {msg.shape[-1]} != k = {code.k}")
    cw = (msg.astype(np.int32) @ code.gen.astype(np.int32)) & 1
    return cw.astype(np.uint8)


def extract_message(code: LdpcCode, codeword_bits: np.ndarray) -> np.ndarray:
    """Read the message back off the systematic positions."""
    return np.asarray(codeword_bits)[..., code.systematic_cols]


# ---------------------------------------------------------------------------
# Interleaving


@dataclass(frozen=True)
class Interleaver:
    perm: np.ndarray
    inv: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[..., self.perm]

    def invert(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[..., self.inv]


def make_interleaver(n: int, seed) -> Interleaver:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    perm = rng.permutation(n)
    return Interleaver(perm=perm, inv=np.argsort(perm))


# ---------------------------------------------------------------------------
# Sum-product decoding


@dataclass
class BpResult:
    llr_posterior: np.ndarray
    llr_extrinsic: np.ndarray
    hard_bits: np.ndarray
    parity_ok: np.ndarray     # bool per batch row (scalar for 1-d input)
    iters_used: np.ndarray


_TANH_FLOOR = 1e-12
_ATANH_CEIL = 1.0 - 1e-15


def bp_decode(code: LdpcCode, llr_in: np.ndarray, max_iters: int = 50) -> BpResult:
    """Batched sum-product decoding on the parity-check factor graph.

    ``llr_in`` has shape (n,) or (B, n); positive values favor bit 0.  Each
    batch row exits as soon as all its parity checks are satisfied (converged
    rows are dropped from the working arrays), and
    ``llr_extrinsic = llr_posterior - llr_in`` holds exactly.
    """
    arr = np.asarray(llr_in, dtype=np.float64)
    onedim = arr.ndim == 1
    llr = np.atleast_2d(arr)
    B, n = llr.shape
    if n != code.n:
        raise ParameterError(f"LLR length {n} != code length {code.n}")
    g = code._graph
    e_var, e_chk = g["e_var"], g["e_chk"]
    chk_ptr, by_var, var_ptr = g["chk_ptr"], g["by_var"], g["var_ptr"]

    post_out = llr.copy()
    ok_out = np.zeros(B, dtype=bool)
    iters_out = np.zeros(B, dtype=np.int64)

    def _syn_ok(posterior: np.ndarray) -> np.ndarray:
        hard = (posterior < 0).astype(np.uint8)
        return ~(code.syndrome(hard).astype(bool).any(axis=1))

    ok0 = _syn_ok(llr)
    ok_out[ok0] = True
    live = np.flatnonzero(~ok0)
    if live.size == 0 or max_iters == 0:
        return _finish(llr, post_out, ok_out, iters_out, onedim)

    llr_live = llr[live]
    m_cv = np.zeros((live.size, len(e_var)), dtype=np.float64)
    tot_v = np.zeros((live.size, n), dtype=np.float64)
    posterior = llr_live.copy()
    for iteration in range(1, max_iters + 1):
        # variable -> check, leave-one-out via the previous iteration's totals
        m_vc = llr_live[:, e_var] + tot_v[:, e_var] - m_cv
        # check -> variable with the exact tanh rule in log-magnitude/sign form
        t = np.tanh(0.5 * m_vc)
        mag = np.log(np.maximum(np.abs(t), _TANH_FLOOR))
        neg = (t < 0).astype(np.int64)
        sum_mag = np.add.reduceat(mag, chk_ptr, axis=1)
        sum_neg = np.add.reduceat(neg, chk_ptr, axis=1)
        loo_mag = np.exp(np.minimum(sum_mag[:, e_chk] - mag, 0.0))
        loo_sign = 1.0 - 2.0 * ((sum_neg[:, e_chk] - neg) & 1)
        m_cv = 2.0 * np.arctanh(np.minimum(loo_mag, _ATANH_CEIL)) * loo_sign

        tot_v = np.add.reduceat(m_cv[:, by_var], var_ptr, axis=1)
        posterior = llr_live + tot_v
        ok = _syn_ok(posterior)
        if ok.any():
            rows = live[ok]
            post_out[rows] = posterior[ok]
            iters_out[rows] = iteration
            ok_out[rows] = True
            keep = ~ok
            live, llr_live = live[keep], llr_live[keep]
            m_cv, tot_v, posterior = m_cv[keep], tot_v[keep], posterior[keep]
            if live.size == 0:
                break
    if live.size:
        post_out[live] = posterior
        iters_out[live] = max_iters
    return _finish(llr, post_out, ok_out, iters_out, onedim)


def _finish(llr, post_out, ok_out, iters_out, onedim) -> BpResult:
    extr = post_out - llr
    hard = (post_out < 0).astype(np.uint8)
    if onedim:
        return BpResult(llr_posterior=post_out[0], llr_extrinsic=extr[0],
                        hard_bits=hard[0], parity_ok=ok_out[0], iters_used=iters_out[0])
    return BpResult(llr_posterior=post_out, llr_extrinsic=extr,
                    hard_bits=hard, parity_ok=ok_out, iters_used=iters_out)


# ---------------------------------------------------------------------------
# alist import/export (MacKay's text format)


def write_alist(code_or_h, path) -> None:
    H = code_or_h.h if isinstance(code_or_h, LdpcCode) else np.asarray(code_or_h)
    m, n = H.shape
    col_lists = [np.flatnonzero(H[:, j]) + 1 for j in range(n)]
    row_lists = [np.flatnonzero(H[i]) + 1 for i in range(m)]
    cmax = max(len(c) for c in col_lists)
    rmax = max(len(r) for r in row_lists)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{n} {m}\n{cmax} {rmax}\n")
        fh.write(" ".join(str(len(c)) for c in col_lists) + "\n")
        fh.write(" ".join(str(len(r)) for r in row_lists) + "\n")
        for lst in col_lists:
            pad = [0] * (cmax - len(lst))
            fh.write(" ".join(map(str, list(lst) + pad)) + "\n")
        for lst in row_lists:
            pad = [0] * (rmax - len(lst))
            fh.write(" ".join(map(str, list(lst) + pad)) + "\n")


def read_alist(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().split()
    it = iter(tokens)
    n, m = int(next(it)), int(next(it))
    next(it), next(it)
    col_deg = [int(next(it)) for _ in range(n)]
    [int(next(it)) for _ in range(m)]
    H = np.zeros((m, n), dtype=np.uint8)
    cmax = max(col_deg)
    for j in range(n):
        entries = [int(next(it)) for _ in range(cmax)]
        for e in entries:
            if e > 0:
                H[e - 1, j] = 1
    return H
