"""Reference implementations used only by the tests.

Nothing here imports the code under test's numerics: the state-vector oracle
builds full 2^n x 2^n operators with Kronecker products, the counting oracle
walks the kernel op by op, and the sort oracle searches assignments exhaustively.
"""

from __future__ import annotations

import functools
import itertools
import math

import numpy as np

I2 = np.eye(2)
P0 = np.array([[1, 0], [0, 0]])
P1 = np.array([[0, 0], [0, 1]])
X = np.array([[0, 1], [1, 0]])
Z = np.array([[1, 0], [0, -1]])
H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


def rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


ORACLE_1Q = {"h": H, "x": X, "z": Z, "y": np.array([[0, -1j], [1j, 0]]),
             "s": np.diag([1, 1j]), "t": np.diag([1, np.exp(1j * math.pi / 4)])}
ORACLE_ROT = {"rx": rx, "ry": ry, "rz": rz}


def embed(ops: dict[int, np.ndarray], n: int) -> np.ndarray:
    """Tensor product with qubit 0 as the least significant (rightmost) factor."""
    out = np.eye(1)
    for q in reversed(range(n)):
        out = np.kron(out, ops.get(q, I2))
    return out


def controlled(u: np.ndarray, c: int, t: int, n: int) -> np.ndarray:
    return embed({c: P0}, n) + embed({c: P1, t: u}, n)


def kernel_distribution(kernel) -> dict[str, float]:
    """Exact outcome distribution of a kernel whose measurements all come last."""
    n = kernel.num_qubits
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1
    meas = {}
    for op in kernel.ops:
        kind = type(op).__name__
        if kind == "Gate1Q":
            psi = embed({op.qubit: ORACLE_1Q[op.gate_name]}, n) @ psi
        elif kind == "Gate1QAngle":
            psi = embed({op.qubit: ORACLE_ROT[op.gate_name](op.angle)}, n) @ psi
        elif kind == "Gate2Q":
            u = {"cnot": X, "cz": Z}[op.gate_name]
            psi = controlled(u, op.control, op.target, n) @ psi
        elif kind == "Measure":
            meas[op.result] = op.qubit
    probs = np.abs(psi) ** 2
    dist: dict[str, float] = {}
    for idx, p in enumerate(probs):
        if p < 1e-12:
            continue
        bits = "".join(str(idx >> meas[r] & 1) if r in meas else "0"
                       for r in range(kernel.num_results))
        dist[bits] = dist.get(bits, 0.0) + float(p)
    return dist


def count_words(kernel, neutral_atom: bool = False) -> int:
    """Instruction count by direct enumeration of what each op needs on the wire."""
    total = 1  # EnvInit
    if neutral_atom:
        total += 4
    for op in kernel.ops:
        kind = type(op).__name__
        if kind in ("Gate1Q", "Gate1QAngle"):
            total += 1 + 1  # address load, gate
        elif kind == "Gate2Q":
            prefix = 0 if op.target == op.control + 1 else 1
            total += prefix + 1 + 1
        elif kind == "Measure":
            total += 1 + 1 + 1  # address + lane, mz, fetch
    return total + 1  # Halt


def brute_force_sort_cost(occupied: list[tuple[int, int]], target: list[tuple[int, int]]) -> int:
    """Minimum total Manhattan distance to cover every target site with a distinct atom.

    Any atom may serve any site (atoms already on target are not pinned), and the
    search enumerates injective assignments with memoized branch-and-bound.
    """
    atoms = tuple(occupied)
    sites = tuple(target)

    @functools.lru_cache(maxsize=None)
    def best(i: int, used: int) -> int:
        if i == len(sites):
            return 0
        r, c = sites[i]
        out = math.inf
        for j, (ar, ac) in enumerate(atoms):
            if not used >> j & 1:
                out = min(out, abs(ar - r) + abs(ac - c) + best(i + 1, used | 1 << j))
        return out

    return best(0, 0)


def permutation_sort_cost(occupied, target) -> int:
    """Plain permutation search; only for tiny cases, used to cross-check the memoized oracle."""
    best = math.inf
    for chosen in itertools.permutations(occupied, len(target)):
        best = min(best, sum(abs(a[0] - t[0]) + abs(a[1] - t[1]) for a, t in zip(chosen, target)))
    return best


def exhaustive_sort_costs(rows: int, cols: int, target: list[tuple[int, int]]) -> np.ndarray:
    """Minimum fill cost for every occupancy of a rows x cols grid at once.

    Entry ``m`` covers the grid whose row-major site ``i`` is occupied iff bit ``i``
    of ``m`` is set; grids with too few atoms get ``inf``. Sites are scanned in
    order and each occupied one may fill any still-open target site or stay idle,
    which visits every injective atom-to-target assignment.
    """
    n, t = rows * cols, len(target)
    occ = (np.arange(1 << n)[None, :] >> np.arange(n)[:, None] & 1).astype(bool)
    dp = np.full((1 << t, 1 << n), np.inf)  # [filled-target mask, grid]
    dp[0] = 0
    for i in range(n):
        r, c = divmod(i, cols)
        dist = [abs(r - tr) + abs(c - tc) for tr, tc in target]
        new = dp.copy()
        for mask in range(1 << t):
            for j in range(t):
                if not mask >> j & 1:
                    np.minimum(new[mask | 1 << j], dp[mask] + dist[j], out=new[mask | 1 << j])
        dp = np.where(occ[i], new, dp)
    return dp[-1]
