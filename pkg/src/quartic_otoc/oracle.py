"""Exact diagonalization of the quartic oscillator in a truncated Fock basis.

This is the independent reference for the closed-form series: build
H = a^+a + 1/2 + g x^4 on levels 0..N-1, diagonalize it with cyclic Jacobi
rotations, and express x in the numerical eigenbasis.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .perturbation import potential_element
from .spectra import X_OFFSETS, Spectrum, TransitionTable

MIN_DIMENSION = 8


class OracleConvergenceError(RuntimeError):
    def __init__(self, residual, sweeps):
        super().__init__(f"Jacobi sweeps did not converge: off-diagonal max "
                         f"{residual:.3g} after {sweeps} sweeps")
        self.residual = residual
        self.sweeps = sweeps


@dataclass(frozen=True, eq=False)
class TruncatedHamiltonian:
    N: int
    g: float
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class EigenSystem:
    values: np.ndarray  # ascending
    vectors: np.ndarray  # columns are eigenvectors
    off_diagonal: float
    sweeps: int
    hamiltonian: TruncatedHamiltonian


def build_hamiltonian(N, g):
    if N < MIN_DIMENSION:
        raise ValueError(f"truncation N={N} too small, need N >= {MIN_DIMENSION}")
    if g < 0:
        raise ValueError(f"coupling must be >= 0, got {g}")
    H = np.diag(np.arange(N) + 0.5)
    for j in range(N):
        for i in range(max(0, j - 4), min(N, j + 5)):
            H[i, j] += g * potential_element(i, j)
    return TruncatedHamiltonian(N, g, H)


def _round_robin(N):
    """Pairings for one sweep in which every index pair meets exactly once.

    Each round is a set of disjoint (p, q) pairs, so all its rotations commute
    and can be applied at once.
    """
    players = list(range(N)) + ([-1] if N % 2 else [])
    M = len(players)
    rounds = []
    for _ in range(M - 1):
        pairs = [(players[i], players[M - 1 - i]) for i in range(M // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a >= 0 and b >= 0]
        rounds.append((np.array([a for a, _ in pairs]), np.array([b for _, b in pairs])))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _off_max(A):
    return float(np.max(np.abs(A - np.diag(np.diag(A)))))


def diagonalize(H: TruncatedHamiltonian, tol=1e-14, max_sweeps=60):
    """Cyclic Jacobi eigendecomposition.

    Sweeps until the largest off-diagonal entry drops below
    ``tol * max|H|``.  Eigenvectors are sign-fixed so their largest-magnitude
    component is positive.
    """
    if tol < 1e-14:
        raise ValueError(f"tol must be >= 1e-14, got {tol}")
    A = np.array(H.matrix, dtype=float)
    N = A.shape[0]
    V = np.eye(N)
    scale = float(np.max(np.abs(A))) or 1.0
    rounds = _round_robin(N)
    off = _off_max(A)
    sweeps = 0
    while off > tol * scale:
        if sweeps >= max_sweeps:
            raise OracleConvergenceError(off, sweeps)
        for p, q in rounds:
            apq = A[p, q]
            live = np.abs(apq) > 1e-300
            theta = np.where(live, (A[q, q] - A[p, p]) / (2 * np.where(live, apq, 1.0)), 0.0)
            t = np.where(live, np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
            t[live & (theta == 0)] = 1.0
            c = 1 / np.sqrt(t * t + 1)
            s = t * c
            Ap, Aq = A[:, p], A[:, q]
            A[:, p], A[:, q] = c * Ap - s * Aq, s * Ap + c * Aq
            Ap, Aq = A[p, :], A[q, :]
            A[p, :], A[q, :] = c[:, None] * Ap - s[:, None] * Aq, s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = A[q, p] = 0.0
            Vp, Vq = V[:, p], V[:, q]
            V[:, p], V[:, q] = c * Vp - s * Vq, s * Vp + c * Vq
        sweeps += 1
        off = _off_max(A)
    order = np.argsort(np.diag(A), kind="stable")
    values = np.diag(A)[order]
    V = V[:, order]
    peak = np.argmax(np.abs(V), axis=0)
    V *= np.sign(V[peak, np.arange(N)])
    return EigenSystem(values, V, off, sweeps, H)


def position_matrix(N):
    """x = (a + a^+)/sqrt(2) on levels 0..N-1."""
    off = np.sqrt(np.arange(1, N) / 2)
    return np.diag(off, 1) + np.diag(off, -1)


def oracle_transition_table(es: EigenSystem, keep=None, margin=None):
    """(Spectrum, TransitionTable) of the lowest ``keep`` eigenstates.

    The top ``margin`` states (default N/4) feel the basis cut-off and are
    discarded.
    """
    N = len(es.values)
    margin = N // 4 if margin is None else margin
    keep = N - margin if keep is None else keep
    if keep > N - margin or keep < 1:
        raise ValueError(f"keep={keep} exceeds N - margin = {N - margin}")
    Q = es.vectors[:, :keep]
    x = Q.T @ position_matrix(N) @ Q
    band = np.zeros((keep, len(X_OFFSETS)))
    for i, d in enumerate(X_OFFSETS):
        cols = np.arange(max(0, -d), min(keep, keep - d))
        band[cols, i] = x[cols + d, cols]
    src = f"oracle(N={N})"
    return (Spectrum(es.values[:keep].copy(), source=src),
            TransitionTable(band, g=es.hamiltonian.g, order=None, source=src))


def oracle_backend(g, N=200, keep=None, margin=None):
    es = diagonalize(build_hamiltonian(N, g))
    return oracle_transition_table(es, keep=keep, margin=margin)


def write_oracle_csv(path, spec: Spectrum, table: TransitionTable):
    """Dump eigenvalues and the x_mn band, one row per level."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# {spec.source} g={table.g!r}\n")
        w = csv.writer(fh)
        w.writerow(["n", "energy"] + [f"x_n{d:+d}_n" for d in X_OFFSETS])
        for n in range(len(spec)):
            w.writerow([n, f"{spec.energies[n]:.16e}"]
                       + [f"{v:.16e}" for v in table.band[n]])
