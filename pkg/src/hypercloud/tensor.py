"""Supersymmetric rank-decomposed adjacency tensors: dense reconstruction,
contraction with hypergraph signals, and norms.

Dense tensors are test oracles behind a size cap; production paths use the
factored spectral form throughout.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

DENSE_ENTRY_CAP = 10_000_000
ORTHONORMALITY_TOL = 1e-9


@dataclass(frozen=True)
class AdjacencyTensor:
    """Dense M-th order, N-dimensional supersymmetric tensor."""

    entries: np.ndarray
    order: int
    dim: int

    def __post_init__(self):
        if self.entries.shape != (self.dim,) * self.order:
            raise ValueError(
                f"entries shape {self.entries.shape} does not match "
                f"order {self.order}, dim {self.dim}")


def _check_orthonormal(vectors: np.ndarray) -> None:
    n = vectors.shape[1]
    gram_err = np.abs(vectors.T @ vectors - np.eye(n)).max()
    if gram_err > ORTHONORMALITY_TOL:
        raise ValueError(f"basis is not orthonormal (max Gram error {gram_err:.3e})")


def _lambdas(pairs) -> np.ndarray:
    """Unnormalized frequency coefficients of a spectral-pairs object."""
    return np.asarray(pairs.sigma, dtype=np.float64) * float(pairs.lambda_max)


def reconstruct_adjacency(pairs, order: int = 3,
                          entry_cap: int = DENSE_ENTRY_CAP) -> AdjacencyTensor:
    """Materialize the rank-form tensor sum_r lambda_r f_r x ... x f_r densely.

    Guarded by an entry cap: N**order must not exceed it.
    """
    V = pairs.basis.vectors
    n = V.shape[0]
    if order < 2:
        raise ValueError("tensor order must be >= 2")
    if n ** order > entry_cap:
        raise ValueError(
            f"dense tensor would need {n ** order} entries (cap {entry_cap})")
    _check_orthonormal(V)
    lam = _lambdas(pairs)
    letters = string.ascii_lowercase[:order]
    spec = "r," + ",".join(f"{c}r" for c in letters) + "->" + letters
    entries = np.einsum(spec, lam, *([V] * order))
    return AdjacencyTensor(entries=entries, order=order, dim=n)


def contract(tensor_or_pairs, signal: np.ndarray, order: int = 3) -> np.ndarray:
    """Contract the adjacency tensor with the (M-1)-fold outer power of signal.

    Given a dense AdjacencyTensor the contraction is evaluated entrywise;
    given spectral pairs it is computed in factored form,
    sum_r lambda_r (f_r . s)^(M-1) f_r, without materializing the tensor.
    """
    s = np.asarray(signal, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError("signal must be a vector")
    if isinstance(tensor_or_pairs, AdjacencyTensor):
        t = tensor_or_pairs
        if order != t.order:
            raise ValueError(f"order {order} does not match tensor order {t.order}")
        if s.shape[0] != t.dim:
            raise ValueError(f"signal length {s.shape[0]} != tensor dim {t.dim}")
        out = t.entries
        for _ in range(t.order - 1):
            out = np.tensordot(out, s, axes=([-1], [0]))
        return out
    pairs = tensor_or_pairs
    V = pairs.basis.vectors
    if s.shape[0] != V.shape[0]:
        raise ValueError(f"signal length {s.shape[0]} != basis dim {V.shape[0]}")
    if order < 2:
        raise ValueError("tensor order must be >= 2")
    lam = _lambdas(pairs)
    proj = V.T @ s
    return V @ (lam * proj ** (order - 1))


def tensor_norm_sq(pairs) -> float:
    """Squared entrywise tensor norm, evaluated as sum_r lambda_r^2."""
    _check_orthonormal(pairs.basis.vectors)
    lam = _lambdas(pairs)
    return float(lam @ lam)


def dump_entries_csv(tensor: AdjacencyTensor, path) -> None:
    """Write dense entries as flat CSV rows (i1,...,iM,value) for debugging."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        idx_hdr = ",".join(f"i{k + 1}" for k in range(tensor.order))
        fh.write(f"{idx_hdr},value\n")
        for idx in np.ndindex(*tensor.entries.shape):
            fh.write(",".join(str(i) for i in idx)
                     + f",{tensor.entries[idx]!r}\n")
