"""Post-hoc analysis: proximity maps, snapshot modal decomposition, envelopes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Embedding:
    """Two-dimensional proximity map from classical multidimensional scaling.

    coordinates       : (n, 2), centered; axes ordered by eigenvalue
    eigenvalues       : full spectrum of the centered Gram matrix, descending
    point_ids         : caller-supplied identifiers, one per point
    negative_retained : True when a retained eigenvalue is negative (the
                        distance data was not exactly Euclidean)
    """

    coordinates: np.ndarray
    eigenvalues: np.ndarray
    point_ids: np.ndarray
    negative_retained: bool


def classical_mds(points, target_dim: int = 2, point_ids=None) -> Embedding:
    """Embed points in target_dim dimensions via the double-centered Gram matrix.

    Squared pairwise distances are double-centered, eigendecomposed, and the
    top eigenpairs scaled by sqrt(eigenvalue) give the coordinates.  Negative
    eigenvalues are truncated to zero for coordinates but reported.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or x.shape[0] < 3:
        raise ValueError("need at least 3 points of equal dimensionality")
    n = x.shape[0]
    sq = np.sum(x**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d2, 0.0)
    d2 = np.maximum(d2, 0.0)
    row = d2.mean(axis=1)
    gram = -0.5 * (d2 - row[:, None] - row[None, :] + row.mean())
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    top = evals[:target_dim]
    coords = evecs[:, :target_dim] * np.sqrt(np.maximum(top, 0.0))[None, :]
    coords = coords - coords.mean(axis=0, keepdims=True)
    if point_ids is None:
        point_ids = np.arange(n)
    return Embedding(
        coordinates=coords,
        eigenvalues=evals,
        point_ids=np.asarray(point_ids),
        negative_retained=bool(np.any(top < 0)),
    )


@dataclass
class PodResult:
    """Energy-ranked orthonormal modes of a snapshot ensemble.

    mean_field       : (n,) ensemble average
    modes            : (n, k) orthonormal spatial modes, energy-descending
    coefficients     : (m, k) modal coefficients per snapshot
    energy_fractions : (k,) eigenvalue / trace, non-increasing
    eigenvalues      : (k,) retained eigenvalues of the temporal correlation
    """

    mean_field: np.ndarray
    modes: np.ndarray
    coefficients: np.ndarray
    energy_fractions: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.modes.shape[1]

    def reconstruct(self) -> np.ndarray:
        """Snapshots rebuilt from the mean and all retained modes."""
        return self.mean_field[None, :] + self.coefficients @ self.modes.T


def snapshot_pod(snapshots, rel_tol: float = 1e-12) -> PodResult:
    """Snapshot-method decomposition of an (m, n) ensemble.

    The ensemble mean is removed, the m x m temporal correlation matrix is
    eigendecomposed, and spatial modes are reconstructed from the snapshots.
    Modes below rel_tol of the leading eigenvalue are dropped; retaining all
    of them reproduces every snapshot to round-off.
    """
    s = np.asarray(snapshots, dtype=float)
    if s.ndim != 2:
        raise ValueError("snapshots must form an (m, n) matrix of equal-length fields")
    m = s.shape[0]
    if m < 2:
        raise ValueError("need at least 2 snapshots")
    mean = s.mean(axis=0)
    fluct = s - mean
    corr = (fluct @ fluct.T) / m
    evals, evecs = np.linalg.eigh(corr)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    # Eigenvalues at the round-off scale of the mean subtraction are noise,
    # not modes; the floor follows the snapshot magnitude.
    roundoff = (np.finfo(float).eps * np.abs(s).max(initial=0.0)) ** 2 * s.shape[1]
    scale = np.abs(evals[0]) if evals.size else 0.0
    floor = max(rel_tol * scale, roundoff)
    keep = evals > floor
    if not keep.any():
        return PodResult(
            mean_field=mean,
            modes=np.zeros((s.shape[1], 0)),
            coefficients=np.zeros((m, 0)),
            energy_fractions=np.zeros(0),
            eigenvalues=np.zeros(0),
        )
    evals = evals[keep]
    evecs = evecs[:, keep]
    modes = (fluct.T @ evecs) / np.sqrt(m * evals)[None, :]
    coeffs = fluct @ modes
    trace = float(np.trace(corr))
    return PodResult(
        mean_field=mean,
        modes=modes,
        coefficients=coeffs,
        energy_fractions=evals / trace,
        eigenvalues=evals,
    )


@dataclass
class Envelope:
    """Pointwise min/max of best-so-far curves across runs."""

    lower: np.ndarray
    upper: np.ndarray
    best_run_index: int


def learning_envelope(curves) -> Envelope:
    """Envelope of one or more learning curves of equal length.

    The best run attains the global minimum final value; ties break toward
    the run that reached it at the earliest iteration.
    """
    arrays = []
    for c in curves:
        arr = np.asarray(getattr(c, "best_so_far", c), dtype=float)
        if arr.ndim != 1:
            raise ValueError("each curve must be one-dimensional")
        arrays.append(arr)
    if not arrays:
        raise ValueError("need at least one curve")
    length = len(arrays[0])
    if any(len(a) != length for a in arrays):
        raise ValueError("curves must have equal length")
    stack = np.stack(arrays)
    finals = stack[:, -1]
    best_final = finals.min()
    tied = np.flatnonzero(finals == best_final)
    attained = [int(np.argmax(stack[i] == best_final)) for i in tied]
    best = int(tied[int(np.argmin(attained))])
    return Envelope(lower=stack.min(axis=0), upper=stack.max(axis=0), best_run_index=best)
