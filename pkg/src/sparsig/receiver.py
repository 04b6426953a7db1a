"""Peeling + message-passing receiver with turbo FEC exchange.

Pipeline (fixed order): prune the factor graph to the genie-known active
columns, peel block-wise from single-ton resources with FEC-verified
subtraction, then run symbol-level sum-product multiuser detection on the
residual graph, exchanging extrinsic LLRs with the per-user LDPC decoders.

All LLRs follow the project convention: positive favors bit 0 / symbol +1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .channel import ActiveSet, Link
from .euler import BudgetExceededError, ParameterError, SparseMapping
from .ldpc import bp_decode, extract_message

LLR_CLAMP = 30.0


# ---------------------------------------------------------------------------
# Graph pruning and check-node classification


@dataclass(frozen=True)
class PrunedGraph:
    cols: np.ndarray           # active signature columns (distinct)
    f_sub: np.ndarray          # (n_s, A) restriction of the mapping
    check_degree: np.ndarray   # (n_s,)

    @property
    def zero_tons(self) -> np.ndarray:
        return np.flatnonzero(self.check_degree == 0)

    @property
    def single_tons(self) -> np.ndarray:
        return np.flatnonzero(self.check_degree == 1)

    @property
    def multi_tons(self) -> np.ndarray:
        return np.flatnonzero(self.check_degree >= 2)


def prune_and_classify(fm: SparseMapping | np.ndarray, active_cols) -> PrunedGraph:
    F = fm.matrix if isinstance(fm, SparseMapping) else np.asarray(fm)
    cols = np.unique(np.asarray(active_cols, dtype=np.int64))
    if cols.size and (cols[0] < 0 or cols[-1] >= F.shape[1]):
        raise ParameterError("active column index out of range")
    f_sub = F[:, cols]
    return PrunedGraph(cols=cols, f_sub=f_sub,
                       check_degree=f_sub.sum(axis=1).astype(np.int64))


# ---------------------------------------------------------------------------
# Structural (graph-only) peeling


@dataclass
class StructuralPeel:
    deg_hist_before: np.ndarray
    deg_hist_after: np.ndarray
    peeled: int
    total: int
    rounds: list[int]          # users peeled per round

    @property
    def peeled_fraction(self) -> float:
        return self.peeled / self.total if self.total else 0.0


def peel_structural(fm: SparseMapping | np.ndarray, active_cols) -> StructuralPeel:
    """Idealized peeling where every single-ton decode succeeds.

    Pure graph computation (independent of SNR): repeatedly remove every
    active column incident to a degree-1 check until none remains.
    """
    graph = prune_and_classify(fm, active_cols)
    f_sub = graph.f_sub.astype(np.int64)
    alive = np.ones(graph.cols.size, dtype=bool)
    deg0 = f_sub @ alive
    hist_before = np.bincount(deg0, minlength=int(deg0.max(initial=0)) + 1)
    rounds: list[int] = []
    while True:
        deg = f_sub @ alive
        singles = deg == 1
        if not singles.any():
            break
        cand = alive & (f_sub[singles].sum(axis=0) > 0)
        if not cand.any():
            break
        rounds.append(int(cand.sum()))
        alive &= ~cand
    deg_after = f_sub @ alive
    hist_after = np.bincount(deg_after, minlength=hist_before.size)
    return StructuralPeel(deg_hist_before=hist_before, deg_hist_after=hist_after,
                          peeled=int((~alive).sum()), total=int(graph.cols.size),
                          rounds=rounds)


# ---------------------------------------------------------------------------
# Peeling with FEC-verified subtraction (Algorithm level)


@dataclass
class PeelResult:
    decoded: dict              # col -> message bits (parity-verified)
    codewords: dict            # col -> decoded codeword bits
    residual_cols: np.ndarray
    y_residual: np.ndarray
    rounds: list[list[int]]    # columns decoded per peeling round

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)


def _singleton_llrs(link: Link, y_res: np.ndarray, col: int,
                    single_rows: np.ndarray, snr: float) -> np.ndarray:
    """Matched-filter symbol LLRs from a user's single-ton rows, MRC-combined."""
    h = np.sqrt(snr) * link.signatures.matrix[single_rows, col]
    contrib = 4.0 * np.real(np.conj(h)[:, None] * y_res[single_rows])
    return contrib.sum(axis=0)


def peel(link: Link, Y: np.ndarray, active_cols, snr: float,
         bp_iters: int = 40) -> PeelResult:
    """Successively decode and subtract users seen on single-ton resources.

    A candidate is any remaining column incident to at least one degree-1
    check.  Candidates whose FEC decode fails its parity checks are not
    subtracted and stay in the residual graph; they are retried only once
    their set of single-ton observations changes.
    """
    F = link.mapping.matrix
    cols = np.unique(np.asarray(active_cols, dtype=np.int64))
    y_res = np.array(Y, dtype=np.complex128, copy=True)
    alive = np.ones(cols.size, dtype=bool)
    f_sub = F[:, cols].astype(np.int64)
    decoded: dict[int, np.ndarray] = {}
    codewords: dict[int, np.ndarray] = {}
    rounds: list[list[int]] = []
    tried: dict[int, frozenset] = {}

    while True:
        deg = f_sub @ alive
        singles = deg == 1
        if not singles.any():
            break
        cand_idx = np.flatnonzero(alive & (f_sub[singles].sum(axis=0) > 0))
        batch = []
        for idx in cand_idx:
            col = int(cols[idx])
            rows = np.flatnonzero(singles & (f_sub[:, idx] > 0))
            key = frozenset(rows.tolist())
            if tried.get(col) == key:
                continue
            tried[col] = key
            batch.append((idx, col, rows))
        if not batch:
            break
        llrs = np.empty((len(batch), link.code.n))
        for b, (idx, col, rows) in enumerate(batch):
            sym_llr = _singleton_llrs(link, y_res, col, rows, snr)
            llrs[b] = np.clip(link.interleaver(col).invert(sym_llr), -LLR_CLAMP, LLR_CLAMP)
        res = bp_decode(link.code, llrs, max_iters=bp_iters)
        peeled_now: list[int] = []
        for b, (idx, col, rows) in enumerate(batch):
            if not res.parity_ok[b]:
                continue
            cw = res.hard_bits[b]
            symbols = link.symbols_for(col, cw)
            y_res -= np.sqrt(snr) * link.signatures.matrix[:, col][:, None] * symbols[None, :]
            decoded[col] = extract_message(link.code, cw)
            codewords[col] = cw
            alive[idx] = False
            peeled_now.append(col)
        if not peeled_now:
            break
        rounds.append(peeled_now)
    return PeelResult(decoded=decoded, codewords=codewords,
                      residual_cols=cols[alive], y_residual=y_res, rounds=rounds)


# ---------------------------------------------------------------------------
# Message-passing multiuser detection on the residual graph


def _sign_matrix(d: int) -> np.ndarray:
    bits = (np.arange(2 ** d)[:, None] >> np.arange(d)[None, :]) & 1
    return (1.0 - 2.0 * bits)  # (2^d, d), +1 for bit 0


def mpa_mud(y_res: np.ndarray, f_sub: np.ndarray, s_sub: np.ndarray, snr: float,
            prior_llrs: np.ndarray | None = None, iters: int = 4,
            max_check_degree: int = 12, symbol_chunk: int = 4096) -> np.ndarray:
    """Symbol-level sum-product detection; returns extrinsic LLRs (A, ell).

    Check-to-variable messages marginalize the Gaussian likelihood over the
    2^(d-1) interferer hypotheses of each degree-d resource node (exact,
    in the log domain); variable-to-check messages combine priors with
    extrinsic inputs.  Refuses residual check degrees above the cap.
    """
    n_s, A = f_sub.shape
    ell = y_res.shape[1]
    deg = f_sub.sum(axis=1)
    if deg.max(initial=0) > max_check_degree:
        raise BudgetExceededError(
            f"residual check degree {int(deg.max())} exceeds cap {max_check_degree}")
    prior = np.zeros((A, ell)) if prior_llrs is None else np.clip(prior_llrs, -LLR_CLAMP, LLR_CLAMP)
    if A == 0:
        return np.zeros((0, ell))

    chk, var = np.nonzero(f_sub)
    E = chk.size
    if E == 0:
        return np.zeros((A, ell))
    # edges sorted by check (np.nonzero is row-major already)
    by_var = np.argsort(var, kind="stable")
    var_sorted = var[by_var]
    var_ptr = np.searchsorted(var_sorted, np.arange(A))
    coef = np.sqrt(snr) * s_sub[chk, var]          # per-edge channel gains

    # degree classes: groups of checks with equal degree, edges reshaped (nc, d)
    classes = []
    edge_start = np.searchsorted(chk, np.arange(n_s))
    for d in np.unique(deg):
        if d == 0:
            continue
        rows = np.flatnonzero(deg == d)
        eidx = np.stack([edge_start[r] + np.arange(d) for r in rows])  # (nc, d)
        X = _sign_matrix(int(d))
        sel_plus = (X.T > 0).astype(np.float64)     # (d, 2^d) hypothesis selectors
        sel_minus = 1.0 - sel_plus
        classes.append((int(d), rows, eidx, X, sel_plus, sel_minus))

    m_cv = np.zeros((E, ell))
    for _ in range(iters):
        tot = np.add.reduceat(m_cv[by_var], var_ptr, axis=0)
        m_vc = prior[var] + tot[var] - m_cv
        np.clip(m_vc, -LLR_CLAMP, LLR_CLAMP, out=m_vc)
        for d, rows, eidx, X, sel_plus, sel_minus in classes:
            V = m_vc[eidx]                          # (nc, d, ell)
            M = coef[eidx] @ X.T                    # (nc, 2^d) config means
            chunk = max(1, symbol_chunk * 512 // max(1, rows.size * (1 << d)))
            for lo in range(0, ell, chunk):
                hi = min(ell, lo + chunk)
                diff = y_res[rows, lo:hi][:, None, :] - M[:, :, None]
                T = -(diff.real ** 2 + diff.imag ** 2)
                T += 0.5 * np.einsum("xd,cdl->cxl", X, V[:, :, lo:hi])
                # normalized exp table shared by every edge of the check
                T -= T.max(axis=1, keepdims=True)
                np.exp(T, out=T)
                flat = T.transpose(0, 2, 1).reshape(-1, 1 << d)   # (nc*chunk, 2^d)
                tiny = np.finfo(np.float64).tiny
                ratio = (np.log(np.maximum(flat @ sel_plus.T, tiny))
                         - np.log(np.maximum(flat @ sel_minus.T, tiny)))
                ratio = ratio.reshape(rows.size, hi - lo, d).transpose(0, 2, 1)
                m_cv[eidx, lo:hi] = np.clip(ratio - V[:, :, lo:hi],
                                            -LLR_CLAMP, LLR_CLAMP)
    extrinsic = np.add.reduceat(m_cv[by_var], var_ptr, axis=0)
    return extrinsic


def exact_map(Y: np.ndarray, s_active: np.ndarray, snr: float,
              prior_llrs: np.ndarray | None = None,
              max_hypotheses: int = 2 ** 20) -> np.ndarray:
    """Brute-force per-user posterior symbol LLRs on the full Gaussian MAC.

    Enumerates all 2^A BPSK hypotheses of the active users jointly per symbol
    column (oracle for MPA verification); raises when the hypothesis count
    exceeds the budget.
    """
    n_s, A = s_active.shape
    ell = Y.shape[1]
    if 2 ** A > max_hypotheses:
        raise BudgetExceededError(f"2^{A} hypotheses exceed budget {max_hypotheses}")
    X = _sign_matrix(A)                            # (2^A, A)
    M = np.sqrt(snr) * (s_active @ X.T)            # (n_s, 2^A)
    out = np.empty((A, ell))
    chunk = max(1, (1 << 22) // max(1, n_s * (1 << A)))
    for lo in range(0, ell, chunk):
        hi = min(ell, lo + chunk)
        diff = Y[:, None, lo:hi] - M[:, :, None]
        logl = -(diff.real ** 2 + diff.imag ** 2).sum(axis=0)   # (2^A, chunk)
        if prior_llrs is not None:
            logl = logl + 0.5 * (X @ np.clip(prior_llrs[:, lo:hi], -LLR_CLAMP, LLR_CLAMP))
        for u in range(A):
            plus = X[:, u] > 0
            out[u, lo:hi] = logsumexp(logl[plus], axis=0) - logsumexp(logl[~plus], axis=0)
    return out


# ---------------------------------------------------------------------------
# Turbo exchange and the full receiver


@dataclass
class DecodeOutcome:
    decisions: dict            # col -> message bits, or None (declared inactive)
    peel_rounds: list[list[int]]
    peeled_cols: np.ndarray
    residual_cols: np.ndarray
    turbo_passes: int
    residual_parity_ok: int

    @property
    def peeled_fraction(self) -> float:
        total = self.peeled_cols.size + self.residual_cols.size
        return self.peeled_cols.size / total if total else 0.0


def turbo_receive(link: Link, Y: np.ndarray, active_cols, snr: float,
                  outer_iters: int = 3, inner_iters: int = 4,
                  bp_iters: int = 40, max_check_degree: int = 12) -> DecodeOutcome:
    """Peeling followed by turbo MPA/FEC decoding of the residual graph.

    ``outer_iters`` counts the extrinsic feedback exchanges after the first
    MUD + FEC pass (0 = one-shot).  Residual users whose final parity check
    fails are declared inactive (decision None).
    """
    pres = peel(link, Y, active_cols, snr, bp_iters=bp_iters)
    decisions = dict(pres.decoded)
    res_cols = pres.residual_cols
    turbo_passes = 0
    parity_ok_count = 0
    if res_cols.size:
        f_sub = link.mapping.matrix[:, res_cols].astype(np.int64)
        s_sub = link.signatures.matrix[:, res_cols]
        A = res_cols.size
        itls = [link.interleaver(int(c)) for c in res_cols]
        fec_prior = np.zeros((A, link.code.n))
        fec_res = None
        for t in range(outer_iters + 1):
            turbo_passes = t + 1
            ext = mpa_mud(pres.y_residual, f_sub, s_sub, snr,
                          prior_llrs=fec_prior, iters=inner_iters,
                          max_check_degree=max_check_degree)
            llr_cw = np.stack([itls[u].invert(ext[u]) for u in range(A)])
            fec_res = bp_decode(link.code, llr_cw, max_iters=bp_iters)
            if fec_res.parity_ok.all() or t == outer_iters:
                break
            fec_ext = np.clip(fec_res.llr_extrinsic, -LLR_CLAMP, LLR_CLAMP)
            fec_prior = np.stack([itls[u].apply(fec_ext[u]) for u in range(A)])
        for u, col in enumerate(res_cols.tolist()):
            if fec_res.parity_ok[u]:
                decisions[col] = extract_message(link.code, fec_res.hard_bits[u])
                parity_ok_count += 1
            else:
                decisions[col] = None
    return DecodeOutcome(decisions=decisions, peel_rounds=pres.rounds,
                         peeled_cols=np.asarray(sorted(pres.decoded), dtype=np.int64),
                         residual_cols=res_cols, turbo_passes=turbo_passes,
                         residual_parity_ok=parity_ok_count)


# ---------------------------------------------------------------------------
# Error-event accounting


@dataclass
class TrialErrors:
    n_active: int
    errors: int
    e1: int
    e2: int
    e3: int
    denominator: int           # K (scheduled) or K_a (random access)

    @property
    def pe_contribution(self) -> float:
        return self.errors / self.denominator if self.denominator else 0.0


def account_errors(outcome: DecodeOutcome, truth: ActiveSet, mode: str) -> TrialErrors:
    """Per-trial E1/E2/E3 counts and the trial's error-probability contribution.

    Unsourced signature collisions count as errors for every colliding user
    (flagged E3, not further classified); among the rest, a missed user
    (decision None) is E2 in the random-access modes and folds into E1 for
    scheduled access, and a wrong message is E1.  The three flags are
    disjoint, so errors = e1 + e2 + e3.
    """
    collided = set(truth.collided_cols.tolist()) if mode == "unsourced" else set()
    e1 = e2 = e3 = 0
    for i, col in enumerate(truth.cols.tolist()):
        if col in collided:
            e3 += 1
            continue
        w_hat = outcome.decisions.get(col)
        if w_hat is None:
            if mode == "scheduled":
                e1 += 1
            else:
                e2 += 1
        elif not np.array_equal(w_hat, truth.messages[i]):
            e1 += 1
    return TrialErrors(n_active=truth.ka, errors=e1 + e2 + e3, e1=e1, e2=e2, e3=e3,
                       denominator=truth.ka)
