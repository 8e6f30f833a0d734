"""Brute-force reference solver for small dimensions.

Enumerates every candidate set of binding off-diagonal constraints, solves
the equality-restricted problem for each by a dense Newton iteration that is
wholly independent of the coordinate-descent code paths, and keeps the
candidate whose solution satisfies the full sign system.  Exactly one
candidate passes on generic inputs, which makes this a trustworthy oracle
for validating the production solver at p <= 5.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .matcore import SymMatrix, rescale_solution, to_correlation
from .solver import KktCertificate, MleDoesNotExist, exists_mle, kkt_certificate

logger = logging.getLogger(__name__)

MAX_ORACLE_DIM = 5
SIGN_TOL = 1e-9
NEWTON_TOL = 1e-12


class NoKktPoint(RuntimeError):
    """No candidate active set satisfied the full optimality system."""


@dataclass(frozen=True, eq=False)
class ActiveSetSolution:
    """Binding set (pairs where the covariance matches the sample) and solution."""

    active_set: frozenset[tuple[int, int]]
    sigma: SymMatrix
    kkt: KktCertificate


def _restricted_mle(r: np.ndarray, support_pairs) -> np.ndarray | None:
    """Newton iteration maximizing the likelihood over K supported on the pairs.

    Returns the precision matrix with gradient residual below NEWTON_TOL, or
    None when the iteration fails to make progress.
    """
    p = r.shape[0]
    idx_i = np.array([i for i in range(p)] + [i for i, _ in support_pairs], dtype=int)
    idx_j = np.array([i for i in range(p)] + [j for _, j in support_pairs], dtype=int)
    mult = np.where(idx_i == idx_j, 1.0, 2.0)

    def assemble(theta):
        k = np.zeros((p, p))
        k[idx_i, idx_j] = theta
        k[idx_j, idx_i] = theta
        return k

    def chol_logdet(k):
        try:
            low = np.linalg.cholesky(k)
        except np.linalg.LinAlgError:
            return None
        return 2.0 * float(np.log(low.diagonal()).sum())

    theta = np.zeros(len(idx_i))
    theta[:p] = 1.0  # identity start on correlation scale
    k = assemble(theta)
    ll = chol_logdet(k) - float((r * k).sum())
    for _ in range(200):
        sigma = np.linalg.inv(k)
        grad = mult * (sigma[idx_i, idx_j] - r[idx_i, idx_j])
        if np.abs(grad).max() < NEWTON_TOL:
            return k
        hess = -0.5 * np.outer(mult, mult) * (
            sigma[np.ix_(idx_i, idx_i)] * sigma[np.ix_(idx_j, idx_j)]
            + sigma[np.ix_(idx_i, idx_j)] * sigma[np.ix_(idx_j, idx_i)]
        )
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            return None
        t = 1.0
        for _ in range(60):
            cand = assemble(theta + t * step)
            logdet = chol_logdet(cand)
            if logdet is not None:
                cand_ll = logdet - float((r * cand).sum())
                if cand_ll >= ll - 1e-12:
                    theta = theta + t * step
                    k = cand
                    ll = cand_ll
                    break
            t /= 2.0
        else:
            return None
    return None


def active_set_oracle(s: SymMatrix) -> ActiveSetSolution:
    """Reference solution by exhausting candidate binding sets.

    For every subset E of off-diagonal pairs, solves the problem restricted
    to covariances matching the sample on E (equivalently, precisions
    supported on E), then accepts the solution iff its precision entries on
    E are nonpositive and its covariance dominates the sample off E.  The
    lexicographically smallest passing set is returned; generically it is
    unique.
    """
    if s.dim > MAX_ORACLE_DIM:
        raise ValueError(f"oracle supports p <= {MAX_ORACLE_DIM}")
    if not exists_mle(s):
        raise MleDoesNotExist("oracle requires an input with an attained optimum")
    r, scale = to_correlation(s)
    rv = r.values
    p = r.dim
    all_pairs = list(combinations(range(p), 2))
    passing: list[tuple[tuple[tuple[int, int], ...], np.ndarray]] = []
    for size in range(len(all_pairs) + 1):
        for subset in combinations(all_pairs, size):
            k = _restricted_mle(rv, subset)
            if k is None:
                logger.info("restricted solve failed for candidate set %s", subset)
                continue
            sigma = np.linalg.inv(k)
            chosen = set(subset)
            ok = True
            for i, j in all_pairs:
                if (i, j) in chosen:
                    if k[i, j] > SIGN_TOL:
                        ok = False
                        break
                elif sigma[i, j] - rv[i, j] < -SIGN_TOL:
                    ok = False
                    break
            if ok:
                passing.append((subset, sigma))
    if not passing:
        raise NoKktPoint("no candidate active set satisfied the optimality system")
    if len(passing) > 1:
        logger.info("%d candidate sets passed; keeping the smallest", len(passing))
    subset, sigma = min(passing, key=lambda entry: sorted(entry[0]))
    sigma_r = SymMatrix((sigma + sigma.T) / 2.0, labels=s.labels)
    sigma_full = rescale_solution(sigma_r, scale)
    cert = kkt_certificate(s, sigma_full)
    return ActiveSetSolution(frozenset(subset), sigma_full, cert)
