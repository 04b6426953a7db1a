"""Euler squares and the sparse user-to-resource mapping built from them.

An Euler square E(gamma, rho) is a gamma x gamma array of rho-tuples obtained
by superimposing rho mutually orthogonal Latin squares of order gamma.  Each
of the gamma^2 tuples becomes one column of a binary mapping matrix F of shape
(gamma*rho) x gamma^2: the tuple's r-th symbol selects one row inside the r-th
band of gamma rows.  Columns of F are the access patterns (signatures support)
of the gamma^2 users; rows are the shared resource blocks.

The resulting matrix is biregular (rho ones per column, gamma per row),
row-column constrained (any two rows, and any two columns, overlap in at most
one position), and its transpose is a gamma x rho array of circulant
permutation matrices.  Those structural facts, plus girth / cycle-count /
connectivity computations and the partial-geometry axioms, live here.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np


class ParameterError(ValueError):
    """Invalid or out-of-domain parameters."""


class UnsupportedParameterError(ParameterError):
    """Parameters are plausible but no enabled construction covers them."""


class BudgetExceededError(RuntimeError):
    """An exhaustive enumeration exceeded its configured work budget."""


class CpmStructureError(ValueError):
    """A matrix expected to be an array of circulant permutation blocks is not."""


# ---------------------------------------------------------------------------
# Euler squares


@dataclass(frozen=True)
class EulerSquare:
    """Order-gamma, degree-rho Euler square.

    ``layers[r]`` is the r-th Latin square (0-indexed symbols); the tuple at
    cell (i, j) is ``layers[:, i, j]``.
    """

    gamma: int
    rho: int
    layers: np.ndarray  # (rho, gamma, gamma) ints in 0..gamma-1

    @property
    def cells(self) -> np.ndarray:
        """gamma x gamma x rho view: cells[i, j] is the rho-tuple at (i, j)."""
        return np.transpose(self.layers, (1, 2, 0))

    def violations(self) -> list[str]:
        """Return a list of invariant violations (empty when valid)."""
        g, r = self.gamma, self.rho
        out = []
        if self.layers.shape != (r, g, g):
            return [f"layer array has shape {self.layers.shape}, expected {(r, g, g)}"]
        if self.layers.min() < 0 or self.layers.max() >= g:
            out.append("symbols outside 0..gamma-1")
        target = np.arange(g)
        for idx in range(r):
            layer = self.layers[idx]
            if not (np.sort(layer, axis=1) == target).all():
                out.append(f"layer {idx} is not Latin by rows")
            if not (np.sort(layer, axis=0) == target[:, None]).all():
                out.append(f"layer {idx} is not Latin by columns")
        for a in range(r):
            for b in range(a + 1, r):
                pairs = self.layers[a] * g + self.layers[b]
                if np.unique(pairs).size != g * g:
                    out.append(f"layers {a} and {b} are not orthogonal")
        # pairwise-distinct tuples (implied by orthogonality for rho >= 2,
        # but checked directly so rho == 1 degenerate inputs are caught too)
        codes = np.zeros((g, g), dtype=np.int64)
        for idx in range(r):
            codes = codes * g + self.layers[idx]
        if np.unique(codes).size != g * g:
            out.append("tuples are not pairwise distinct")
        return out

    def is_valid(self) -> bool:
        return not self.violations()

    @staticmethod
    def from_cells(cells) -> "EulerSquare":
        """Build from a gamma x gamma x rho tuple array and validate."""
        arr = np.asarray(cells, dtype=np.int64)
        if arr.ndim != 3 or arr.shape[0] != arr.shape[1]:
            raise ParameterError(f"expected (gamma, gamma, rho) cells, got {arr.shape}")
        es = EulerSquare(gamma=arr.shape[0], rho=arr.shape[2],
                         layers=np.ascontiguousarray(np.transpose(arr, (2, 0, 1))))
        bad = es.violations()
        if bad:
            raise ParameterError("not an Euler square: " + "; ".join(bad))
        return es


def _min_prime_power_factor(n: int) -> int:
    """Smallest maximal prime-power factor p^a of n (MacNeish bound input)."""
    best = n
    m, p = n, 2
    while p * p <= m:
        if m % p == 0:
            q = 1
            while m % p == 0:
                q *= p
                m //= p
            best = min(best, q)
        p += 1
    if m > 1:
        best = min(best, m)
    return best


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in range(2, int(math.isqrt(n)) + 1):
        if n % p == 0:
            return False
    return True


def euler_square_exists(gamma: int, rho: int) -> bool:
    """Whether E(gamma, rho) is covered by the known explicit constructions.

    True iff rho + 1 does not exceed the smallest maximal prime-power factor
    of gamma (which reduces to rho <= gamma - 1 for primes and prime powers),
    including downward closure in rho.  False means "not covered", not a
    nonexistence proof.
    """
    if gamma < 3:
        raise ParameterError(f"gamma must be >= 3, got {gamma}")
    if rho < 2:
        raise ParameterError(f"rho must be >= 2, got {rho}")
    if rho >= gamma:
        return False
    return rho + 1 <= _min_prime_power_factor(gamma)


def construct_euler_square(gamma: int, rho: int, method: str = "prime") -> EulerSquare:
    """Construct E(gamma, rho).

    The mandatory ``prime`` method needs prime gamma and uses the classic
    modular family: layer r holds symbol (r*i + j) mod gamma at cell (i, j),
    r = 1..rho.  Keeping the cell-column increment at +1 in every layer is
    what makes the transposed mapping an array of circulant permutations.
    """
    if not euler_square_exists(gamma, rho):
        raise ParameterError(f"no known E({gamma}, {rho}) construction")
    if method != "prime":
        raise UnsupportedParameterError(f"unknown construction method {method!r}")
    if not _is_prime(gamma):
        raise UnsupportedParameterError(
            f"gamma={gamma} is not prime; only the prime-order method is enabled")
    i = np.arange(gamma).reshape(1, gamma, 1)
    j = np.arange(gamma).reshape(1, 1, gamma)
    r = np.arange(1, rho + 1).reshape(rho, 1, 1)
    layers = (r * i + j) % gamma
    return EulerSquare(gamma=gamma, rho=rho, layers=layers.astype(np.int64))


# ---------------------------------------------------------------------------
# Mapping matrix


@dataclass(frozen=True)
class SparseMapping:
    """Binary incidence matrix between users (columns) and resources (rows)."""

    gamma: int
    rho: int
    matrix: np.ndarray  # uint8, shape (gamma*rho, gamma**2)

    @property
    def n_s(self) -> int:
        """Signature length = number of resource blocks (rows)."""
        return self.gamma * self.rho

    @property
    def n_users(self) -> int:
        """Number of supported users / signatures (columns)."""
        return self.gamma ** 2

    def column_support(self, col: int) -> np.ndarray:
        return np.flatnonzero(self.matrix[:, col])


def build_mapping_matrix(es: EulerSquare) -> SparseMapping:
    """Expand an Euler square into its (gamma*rho) x gamma^2 mapping matrix.

    Column j corresponds to cell (j // gamma, j % gamma) in row-major order;
    the tuple's r-th symbol s sets row r*gamma + s.
    """
    bad = es.violations()
    if bad:
        raise ParameterError("invalid Euler square: " + "; ".join(bad))
    g, r = es.gamma, es.rho
    F = np.zeros((g * r, g * g), dtype=np.uint8)
    cols = np.arange(g * g)
    a, b = cols // g, cols % g
    for layer in range(r):
        F[layer * g + es.layers[layer, a, b], cols] = 1
    return SparseMapping(gamma=g, rho=r, matrix=F)


@dataclass(frozen=True)
class PropertyReport:
    biregular: bool
    rc_constrained: bool
    cpm_array: bool

    @property
    def all_ok(self) -> bool:
        return self.biregular and self.rc_constrained and self.cpm_array


def verify_properties(fm: SparseMapping) -> PropertyReport:
    """Independently test biregularity, the RC constraint, and CPM structure."""
    F = fm.matrix
    g, r = fm.gamma, fm.rho
    biregular = bool((F.sum(axis=0) == r).all() and (F.sum(axis=1) == g).all())

    # Row pairs: overlap counts fit in a small n_s x n_s Gram matrix.
    R = F.astype(np.int32) @ F.T.astype(np.int32)
    np.fill_diagonal(R, 0)
    rows_ok = bool(R.max(initial=0) <= 1)
    # Column pairs: two columns overlapping twice would put the same column
    # pair inside two different rows, so it suffices to check that the
    # per-row column-pair codes are globally unique.
    codes = []
    K = F.shape[1]
    for row in range(F.shape[0]):
        cols = np.flatnonzero(F[row])
        if cols.size >= 2:
            iu, ju = np.triu_indices(cols.size, k=1)
            codes.append(cols[iu].astype(np.int64) * K + cols[ju])
    if codes:
        allcodes = np.concatenate(codes)
        cols_ok = bool(np.unique(allcodes).size == allcodes.size)
    else:
        cols_ok = True
    rc = rows_ok and cols_ok

    try:
        extract_protograph(fm)
        cpm = True
    except (CpmStructureError, ParameterError):
        cpm = False
    return PropertyReport(biregular=biregular, rc_constrained=rc, cpm_array=cpm)


def _column_overlaps_ok(F: np.ndarray) -> bool:
    # Fallback for irregular matrices: direct Gram on the column side.
    G = F.T.astype(np.int32) @ F.astype(np.int32)
    np.fill_diagonal(G, 0)
    return bool(G.max(initial=0) <= 1)


# ---------------------------------------------------------------------------
# Bipartite graph analysis

# Vertices get global ids: users (columns) 0..K-1, then resources K..K+n_s-1.


def _adjacency(F: np.ndarray) -> list[list[int]]:
    n_rows, n_cols = F.shape
    adj: list[list[int]] = [[] for _ in range(n_cols + n_rows)]
    rr, cc = np.nonzero(F)
    for row, col in zip(rr.tolist(), cc.tolist()):
        adj[col].append(n_cols + row)
        adj[n_cols + row].append(col)
    return adj


def girth(fm: SparseMapping | np.ndarray) -> int | None:
    """Exact shortest-cycle length via BFS from every user node (None if acyclic).

    Every cycle in the bipartite graph passes through a user node, so rooting
    the search on that side is sufficient.
    """
    F = fm.matrix if isinstance(fm, SparseMapping) else np.asarray(fm)
    adj = _adjacency(F)
    n_cols = F.shape[1]
    best: int | None = None
    for root in range(n_cols):
        dist = [-1] * len(adj)
        parent = [-1] * len(adj)
        dist[root] = 0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            if best is not None and 2 * dist[u] >= best:
                break
            for w in adj[u]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    queue.append(w)
                elif w != parent[u]:
                    cycle = dist[u] + dist[w] + 1
                    if best is None or cycle < best:
                        best = cycle
    return best


def count_cycles(fm: SparseMapping | np.ndarray, length: int,
                 max_ops: int = 20_000_000) -> int:
    """Count distinct simple cycles of the given length, each counted once.

    Exhaustive depth-first enumeration anchored at each cycle's smallest
    vertex, intended for small orders (gamma <= 7).  Raises
    :class:`BudgetExceededError` when the search exceeds ``max_ops`` visited
    path extensions.
    """
    F = fm.matrix if isinstance(fm, SparseMapping) else np.asarray(fm)
    if length < 4 or length % 2 != 0:
        return 0  # bipartite graphs only have even cycles
    adj = _adjacency(F)
    n_vertices = len(adj)
    ops = 0
    count = 0
    on_path = [False] * n_vertices
    path: list[int] = []

    def dfs(u: int, start: int, depth: int) -> None:
        # depth = number of vertices currently on the path; closing the path
        # back to ``start`` yields a cycle with exactly ``depth`` edges.
        nonlocal ops, count
        ops += 1
        if ops > max_ops:
            raise BudgetExceededError(
                f"cycle enumeration exceeded {max_ops} operations")
        for w in adj[u]:
            if w == start:
                if depth == length and path[1] < path[-1]:
                    count += 1
                continue
            if depth >= length or w < start or on_path[w]:
                continue
            on_path[w] = True
            path.append(w)
            dfs(w, start, depth + 1)
            path.pop()
            on_path[w] = False

    for start in range(n_vertices):
        if len(adj[start]) < 2:
            continue
        on_path[start] = True
        path.append(start)
        dfs(start, start, 1)
        path.pop()
        on_path[start] = False
    return count


def connectivity(fm: SparseMapping | np.ndarray, start: int = 0) -> int:
    """Number of distinct user nodes reachable from ``start`` by a length-2 path."""
    F = fm.matrix if isinstance(fm, SparseMapping) else np.asarray(fm)
    if not 0 <= start < F.shape[1]:
        raise ParameterError(f"start column {start} out of range")
    rows = np.flatnonzero(F[:, start])
    if rows.size == 0:
        return 0
    reach = np.flatnonzero(F[rows].any(axis=0))
    return int(reach.size - (start in reach))


# ---------------------------------------------------------------------------
# Protograph (CPM array) view


@dataclass(frozen=True)
class Protograph:
    """gamma x rho array of circulant offsets describing the mapping transpose."""

    gamma: int
    rho: int
    generators: np.ndarray  # (gamma, rho) ints in 0..gamma-1


def extract_protograph(fm: SparseMapping) -> Protograph:
    """Read the circulant generators off F^T; raises if any block is not a CPM."""
    g, r = fm.gamma, fm.rho
    T = fm.matrix.T
    if T.shape != (g * g, g * r):
        raise ParameterError(f"matrix shape {fm.matrix.shape} does not match (gamma, rho)")
    gens = np.zeros((g, r), dtype=np.int64)
    shift = np.arange(g)
    for i in range(g):
        for j in range(r):
            block = T[i * g:(i + 1) * g, j * g:(j + 1) * g]
            if not ((block.sum(axis=1) == 1).all() and (block.sum(axis=0) == 1).all()):
                raise CpmStructureError(f"block ({i}, {j}) is not a permutation matrix")
            pos = block.argmax(axis=1)
            k = int(pos[0])
            if not (pos == (k + shift) % g).all():
                raise CpmStructureError(f"block ({i}, {j}) is a permutation but not circulant")
            gens[i, j] = k
    return Protograph(gamma=g, rho=r, generators=gens)


def expand_protograph(proto: Protograph) -> np.ndarray:
    """Rebuild the transposed mapping matrix from circulant generators."""
    g, r = proto.gamma, proto.rho
    T = np.zeros((g * g, g * r), dtype=np.uint8)
    shift = np.arange(g)
    for i in range(g):
        for j in range(r):
            cols = (proto.generators[i, j] + shift) % g
            T[i * g + shift, j * g + cols] = 1
    return T


# ---------------------------------------------------------------------------
# Partial geometry axioms


def check_partial_geometry(fm: SparseMapping) -> bool:
    """Verify the PaG(gamma, rho, rho-1) axioms on the transposed mapping.

    Points are the rows of F (resources), lines the columns (users): each
    point lies on gamma lines, each line passes through rho points, two
    points share at most one line, and every non-incident point/line pair is
    joined by exactly rho-1 lines through the point meeting the line.
    """
    F = fm.matrix.astype(np.float32)
    g, r = fm.gamma, fm.rho
    if not (fm.matrix.sum(axis=1) == g).all():
        return False
    if not (fm.matrix.sum(axis=0) == r).all():
        return False
    P = F @ F.T  # point-pair common-line counts
    np.fill_diagonal(P, 0.0)
    if P.max(initial=0.0) > 1.0:
        return False
    # counts[p, l] = number of lines through point p that meet line l
    counts = P @ F
    non_incident = fm.matrix == 0
    return bool((counts[non_incident] == float(r - 1)).all())


# ---------------------------------------------------------------------------
# Plain-text export


def write_triplets(fm: SparseMapping, path) -> None:
    """Sparse export: header ``gamma rho`` then one 0-based ``row col`` per line."""
    rr, cc = np.nonzero(fm.matrix)
    lines = [f"{fm.gamma} {fm.rho}"]
    lines += [f"{row} {col}" for row, col in zip(rr.tolist(), cc.tolist())]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_triplets(path) -> SparseMapping:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ParameterError(f"{path}: expected 'gamma rho' header")
        g, r = int(header[0]), int(header[1])
        F = np.zeros((g * r, g * g), dtype=np.uint8)
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row, col = (int(tok) for tok in line.split())
            F[row, col] = 1
    return SparseMapping(gamma=g, rho=r, matrix=F)


def write_dense(fm: SparseMapping, path) -> None:
    """Dense 0/1 grid export for small instances (same header as triplets)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{fm.gamma} {fm.rho}\n")
        for row in fm.matrix:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def read_dense(path) -> SparseMapping:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        g, r = int(header[0]), int(header[1])
        rows = [[int(tok) for tok in line.split()] for line in fh if line.strip()]
    F = np.asarray(rows, dtype=np.uint8)
    if F.shape != (g * r, g * g):
        raise ParameterError(f"{path}: grid shape {F.shape} does not match header")
    return SparseMapping(gamma=g, rho=r, matrix=F)
