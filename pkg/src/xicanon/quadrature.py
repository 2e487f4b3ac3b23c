"""Small cached quadrature building blocks (Gauss rules, barycentric weights)."""

from __future__ import annotations

from functools import lru_cache
from typing import Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi


@lru_cache(maxsize=64)
def gauss_legendre(m: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]."""
    x, w = leggauss(m)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=256)
def gauss_jacobi_left(m: int, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    """Rule on [-1, 1] for the weight (1 + s)**alpha (singular at the left end)."""
    x, w = roots_jacobi(m, 0.0, alpha)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=256)
def gauss_jacobi_right(m: int, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    """Rule on [-1, 1] for the weight (1 - s)**alpha (singular at the right end)."""
    x, w = roots_jacobi(m, alpha, 0.0)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def left_singular_rule(left: float, right: float, alpha: float, m: int):
    """Nodes and weights for integral_left^right (y - left)**alpha f(y) dy.

    The returned weights already include the singular factor, so the rule is
    applied to the smooth part ``f`` only.
    """
    s, w = gauss_jacobi_left(m, alpha)
    half = 0.5 * (right - left)
    return left + half * (s + 1.0), w * half ** (alpha + 1.0)


def legendre_rule(left: float, right: float, m: int):
    s, w = gauss_legendre(m)
    half = 0.5 * (right - left)
    return left + half * (s + 1.0), w * half


@lru_cache(maxsize=64)
def legendre_bary_weights(m: int) -> np.ndarray:
    """Barycentric weights of the m-point Gauss--Legendre nodes (scale free)."""
    x, _ = gauss_legendre(m)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    # log-sum for stability at large m
    sign = np.prod(np.sign(diff), axis=1)
    logabs = -np.sum(np.log(np.abs(diff)), axis=1)
    bw = sign * np.exp(logabs - logabs.max())
    bw.setflags(write=False)
    return bw


def lagrange_basis(ref_nodes: np.ndarray, bary: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Values of the Lagrange basis on ``ref_nodes`` at ``pts``.

    ``pts`` may carry leading batch dimensions; the basis index is appended
    as the last axis.  Points that coincide with a node get the exact
    Kronecker row.
    """
    d = pts[..., None] - ref_nodes
    exact = d == 0.0
    d = np.where(exact, 1.0, d)
    t = bary / d
    L = t / t.sum(axis=-1, keepdims=True)
    hit = exact.any(axis=-1)
    if np.any(hit):
        L[hit] = exact[hit].astype(float)
    return L


def graded_reference_rule(levels: int, ratio: float, m: int):
    """Composite Gauss--Legendre rule on [-1, 1] graded geometrically toward -1.

    Used for integrands that are smooth on the interval but have a
    singularity just outside its left end.
    """
    edges = [0.0] + [ratio ** k for k in range(levels, 0, -1)] + [1.0]
    xs, ws = [], []
    s, w = gauss_legendre(m)
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        xs.append(-1.0 + 2.0 * (lo + half * (s + 1.0)))
        ws.append(2.0 * half * w)
    return np.concatenate(xs), np.concatenate(ws)
