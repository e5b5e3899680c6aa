"""Subset-selection criteria over residual covariances.

A criterion assigns a real objective to an ordered index set ``S`` given a
PSD matrix ``sigma``; all six are *minimized*.  With ``R(S)`` denoting the
residual covariance after projecting out the selected columns
(:func:`csskit.symmat.residual_covariance`) and ``-S`` the complement:

``CssTrace``
    ``trace(R(S))`` -- total residual variance, i.e. the squared
    reconstruction error of regressing every column on the selection.
``DetResidual``
    ``log det(R(S)[-S, -S])`` -- log-volume of the unexplained block.
``FrobResidual``
    ``||R(S)[-S, -S]||_F^2`` -- squared Frobenius mass of the unexplained
    block.
``CanonCorr``
    ``-trace(pinv(sigma_S) sigma_{S,-S} pinv(sigma_{-S}) sigma_{-S,S})`` --
    negated sum of squared canonical correlations between the selection and
    the rest (negated so that smaller is better).
``DiagDet``
    ``log det(sigma_S) + sum_{j not in S} log R(S)_{jj}`` -- the
    log-likelihood-shaped objective whose minimization is equivalent to a
    diagonal-residual Gaussian fit.  Returns ``-inf`` when a residual
    diagonal entry underflows (perfect fit) or the selected block is
    singular.
``IsoLrt``
    ``log det(sigma_S) + (p - k) log(trace(R(S)) / (p - k))`` -- the
    isotropic-residual analogue; ``k`` is a fixed parameter of the
    criterion, not the current subset size.

Greedy and swap searches never rank candidates by re-evaluating from
scratch; they use :func:`score_candidate` / :func:`score_all`, whose values
are *order-equivalent* to the objective (argmin over candidates matches
argmin of ``evaluate`` on the grown subset) but cheaper by at least one
power of ``p``.  State is carried by :class:`SubsetState`, updated in
O(p^2) per move by :func:`advance` / :func:`retract`.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import symmat
from .errors import DimMismatch
from .symmat import RANK_TOL, IndexSet, SymMatrix


class CriterionKind(str, Enum):
    CSS_TRACE = "CssTrace"
    DET_RESIDUAL = "DetResidual"
    FROB_RESIDUAL = "FrobResidual"
    CANON_CORR = "CanonCorr"
    DIAG_DET = "DiagDet"
    ISO_LRT = "IsoLrt"


@dataclass(frozen=True)
class Criterion:
    """A selection criterion bound to a problem dimension and target size.

    ``k`` is the intended subset size.  Only ``IsoLrt`` uses it inside the
    objective (as the fixed exponent ``p - k``); the others carry it for
    bookkeeping.  ``IsoLrt`` requires ``k < p``.
    """

    kind: CriterionKind
    p: int
    k: int

    def __post_init__(self):
        if self.p < 1:
            raise DimMismatch(f"dimension must be positive, got {self.p}")
        if not 1 <= self.k <= self.p:
            raise DimMismatch(f"k={self.k} out of range for p={self.p}")
        if self.kind == CriterionKind.ISO_LRT and self.k >= self.p:
            raise DimMismatch("IsoLrt requires k < p")


@dataclass
class CanonCorrCache:
    """Extra state for CanonCorr scoring.

    ``complement`` is kept ascending; ``complement_pinv`` is
    ``pinv(sigma[-U, -U])``, downdated/updated as the subset changes and
    rebuilt from scratch every ``ceil(p / 2)`` modifications to bound drift.
    ``swapped_residual`` is the role-reversed residual
    ``sigma_U - sigma_{U,-U} pinv(sigma_{-U}) sigma_{-U,U}`` over the subset
    in its insertion order.
    """

    complement: IndexSet
    complement_pinv: np.ndarray
    swapped_residual: np.ndarray
    mods: int = 0


@dataclass
class SubsetState:
    """Incremental caches for one ordered subset of one matrix.

    Fields mirror what the search algorithms need: the full residual
    covariance, the pseudo-inverse of the selected block (in subset order),
    its log-determinant (``-inf`` once the block goes numerically
    singular), and criterion-specific extras.  ``sigma`` is a read-only
    reference to the source matrix, kept so that scoring can reach raw
    entries without re-plumbing every call site.
    """

    subset: IndexSet
    residual: np.ndarray
    block_pinv: np.ndarray
    log_det_block: float
    sigma: np.ndarray
    extras: Optional[CanonCorrCache] = None

    def complement(self) -> np.ndarray:
        mask = np.ones(self.sigma.shape[0], dtype=bool)
        if self.subset:
            mask[list(self.subset)] = False
        return np.flatnonzero(mask)


def _zero_tol(res: np.ndarray) -> float:
    """Indicator tolerance for rank-one pivots: RANK_TOL * trace / p."""
    p = res.shape[0]
    if p == 0:
        return 0.0
    return RANK_TOL * max(float(np.trace(res)), 0.0) / p


def _complement_of(p: int, subset: Sequence[int]) -> List[int]:
    chosen = set(subset)
    return [j for j in range(p) if j not in chosen]


# ---------------------------------------------------------------------------
# From-scratch evaluation (the definitional path; searches use score_*)
# ---------------------------------------------------------------------------


def evaluate(criterion: Criterion, sigma: SymMatrix, subset: Sequence[int]) -> float:
    """Objective value of ``subset`` under ``criterion``, from scratch.

    The subset may be any size (greedy evaluates its prefixes); order is
    irrelevant to the value.  This is the reference implementation the
    incremental paths are tested against.
    """
    sigma = np.asarray(sigma, dtype=float)
    p = criterion.p
    if sigma.shape != (p, p):
        raise DimMismatch(f"sigma shape {sigma.shape} does not match p={p}")
    u = symmat.check_subset(p, subset)
    comp = _complement_of(p, u)
    kind = criterion.kind

    if kind == CriterionKind.CANON_CORR:
        if not u or not comp:
            return 0.0
        uu = list(u)
        pinv_s = symmat.pseudo_inverse(sigma[np.ix_(uu, uu)])
        pinv_c = symmat.pseudo_inverse(sigma[np.ix_(comp, comp)])
        cross = sigma[np.ix_(uu, comp)]
        # trace(pinv_s @ cross @ pinv_c @ cross.T) without forming products
        left = pinv_s @ cross
        right = cross @ pinv_c
        return -float(np.sum(left * right))

    res = symmat.residual_covariance(sigma, u)

    if kind == CriterionKind.CSS_TRACE:
        return float(np.trace(res))
    if kind == CriterionKind.FROB_RESIDUAL:
        block = res[np.ix_(comp, comp)]
        return float(np.sum(block * block))
    if kind == CriterionKind.DET_RESIDUAL:
        return symmat.log_det(res[np.ix_(comp, comp)])

    # DiagDet / IsoLrt share the selected-block log-determinant
    uu = list(u)
    ld_block = symmat.log_det(sigma[np.ix_(uu, uu)]) if u else 0.0
    if kind == CriterionKind.DIAG_DET:
        tol = _zero_tol(sigma)
        diag = res.diagonal()[comp]
        if len(comp) == 0:
            return ld_block
        if np.min(diag) <= tol:
            return float("-inf")
        return ld_block + float(np.sum(np.log(diag)))
    if kind == CriterionKind.ISO_LRT:
        m = criterion.p - criterion.k
        tr = float(np.sum(res.diagonal()[comp]))
        tol = _zero_tol(sigma)
        if tr <= tol * max(len(comp), 1):
            return float("-inf")
        return ld_block + m * math.log(tr / m)
    raise DimMismatch(f"unknown criterion kind {kind}")


# ---------------------------------------------------------------------------
# State construction and incremental moves
# ---------------------------------------------------------------------------


def init_state(criterion: Criterion, sigma: SymMatrix) -> SubsetState:
    """Fresh state for the empty subset."""
    sigma = np.asarray(sigma, dtype=float)
    p = criterion.p
    if sigma.shape != (p, p):
        raise DimMismatch(f"sigma shape {sigma.shape} does not match p={p}")
    extras = None
    if criterion.kind == CriterionKind.CANON_CORR:
        extras = CanonCorrCache(
            complement=tuple(range(p)),
            complement_pinv=symmat.pseudo_inverse(sigma),
            swapped_residual=np.zeros((0, 0)),
        )
    return SubsetState(
        subset=(),
        residual=sigma.copy(),
        block_pinv=np.zeros((0, 0)),
        log_det_block=0.0,
        sigma=sigma,
        extras=extras,
    )


def state_from_subset(
    criterion: Criterion, sigma: SymMatrix, subset: Sequence[int]
) -> SubsetState:
    """State for an explicit subset, built by successive advances."""
    state = init_state(criterion, sigma)
    for i in symmat.check_subset(criterion.p, subset):
        state = advance(criterion, state, state.sigma, i)
    return state


def _rebuild_swapped_residual(
    sigma: np.ndarray, subset: IndexSet, complement: IndexSet, cpinv: np.ndarray
) -> np.ndarray:
    if not subset:
        return np.zeros((0, 0))
    uu = list(subset)
    if not complement:
        return sigma[np.ix_(uu, uu)].copy()
    cc = list(complement)
    cross = sigma[np.ix_(uu, cc)]
    out = sigma[np.ix_(uu, uu)] - cross @ (cpinv @ cross.T)
    out = (out + out.T) / 2.0
    d = np.einsum("ii->i", out)
    np.maximum(d, 0.0, out=d)
    return out


def _advance_extras(
    state: SubsetState, sigma: np.ndarray, i: int, new_subset: IndexSet
) -> CanonCorrCache:
    cache = state.extras
    pos = cache.complement.index(i)
    new_comp = cache.complement[:pos] + cache.complement[pos + 1 :]
    mods = cache.mods + 1
    if mods >= math.ceil(sigma.shape[0] / 2) or not new_comp:
        cpinv = (
            symmat.pseudo_inverse(sigma[np.ix_(list(new_comp), list(new_comp))])
            if new_comp
            else np.zeros((0, 0))
        )
        mods = 0
    else:
        cpinv = symmat.pinv_remove(
            cache.complement_pinv, cache.complement, pos, sigma=sigma
        )
    swapped = _rebuild_swapped_residual(sigma, new_subset, new_comp, cpinv)
    return CanonCorrCache(new_comp, cpinv, swapped, mods)


def _retract_extras(
    state: SubsetState, sigma: np.ndarray, var: int, new_subset: IndexSet
) -> CanonCorrCache:
    cache = state.extras
    new_comp = tuple(sorted(cache.complement + (var,)))
    mods = cache.mods + 1
    if mods >= math.ceil(sigma.shape[0] / 2):
        cpinv = symmat.pseudo_inverse(sigma[np.ix_(list(new_comp), list(new_comp))])
        mods = 0
    else:
        grown = symmat.pinv_add(cache.complement_pinv, sigma, cache.complement, var)
        # pinv_add appends ``var`` last; permute back to ascending order
        order = list(cache.complement) + [var]
        perm = [order.index(t) for t in new_comp]
        cpinv = grown[np.ix_(perm, perm)]
    swapped = _rebuild_swapped_residual(sigma, new_subset, new_comp, cpinv)
    return CanonCorrCache(new_comp, cpinv, swapped, mods)


def advance(
    criterion: Criterion, state: SubsetState, sigma: SymMatrix, i: int
) -> SubsetState:
    """Grow the state by variable ``i`` (appended to the subset order).

    Rank-one update of the residual, bordered update of the selected-block
    pseudo-inverse, and pivot update of its log-determinant
    (``log det(sigma_{U+i}) = log det(sigma_U) + log(residual_ii)``).
    Cost O(p^2).  Returns a new state; the input is not modified.
    """
    sigma = np.asarray(sigma, dtype=float)
    i = int(i)
    if i in state.subset:
        raise DimMismatch(f"index {i} already selected")
    pivot = float(state.residual[i, i])
    ztol = _zero_tol(state.residual)
    new_res = symmat.residual_add(state.residual, i, ztol)
    new_pinv = symmat.pinv_add(state.block_pinv, sigma, state.subset, i)
    if pivot > ztol and math.isfinite(state.log_det_block):
        new_ld = state.log_det_block + math.log(pivot)
    else:
        new_ld = float("-inf")
    new_subset = state.subset + (i,)
    extras = None
    if criterion.kind == CriterionKind.CANON_CORR:
        extras = _advance_extras(state, sigma, i, new_subset)
    return SubsetState(new_subset, new_res, new_pinv, new_ld, state.sigma, extras)


def retract(
    criterion: Criterion, state: SubsetState, sigma: SymMatrix, position: int
) -> SubsetState:
    """Drop the subset entry at ``position``, undoing its contribution.

    The selected-block pseudo-inverse is downdated (with verification
    against ``sigma``); the residual is rebuilt by re-adding the removed
    variable's residual profile ``beta = sigma[:, v] - sigma[:, U] @
    pinv(sigma_U) @ sigma[U, v]`` as a rank-one term ``beta beta^T /
    beta_v``.  Because ``beta`` is recomputed from ``sigma`` and the fresh
    pseudo-inverse, the result is one rank-one update away from the
    from-scratch residual regardless of the state's history.  A redundant
    variable (``beta_v`` at noise level) leaves the residual unchanged.
    Cost O(p^2 + p k).
    """
    sigma = np.asarray(sigma, dtype=float)
    k = len(state.subset)
    if not 0 <= position < k:
        raise DimMismatch(f"position {position} out of range for subset size {k}")
    var = state.subset[position]
    new_subset = state.subset[:position] + state.subset[position + 1 :]
    new_pinv = symmat.pinv_remove(state.block_pinv, state.subset, position, sigma=sigma)

    idx = list(new_subset)
    if idx:
        t = new_pinv @ sigma[idx, var]
        beta = sigma[:, var] - sigma[:, idx] @ t
    else:
        beta = sigma[:, var].copy()
    pivot = float(beta[var])
    ztol = _zero_tol(sigma)
    if pivot > ztol:
        new_res = state.residual + np.outer(beta, beta / pivot)
        new_res = (new_res + new_res.T) / 2.0
        d = np.einsum("ii->i", new_res)
        np.maximum(d, 0.0, out=d)
        if math.isfinite(state.log_det_block):
            new_ld = state.log_det_block - math.log(pivot)
        else:
            new_ld = symmat.log_det(sigma[np.ix_(idx, idx)]) if idx else 0.0
    else:
        # removed variable was numerically redundant: span unchanged
        new_res = state.residual
        new_ld = symmat.log_det(sigma[np.ix_(idx, idx)]) if idx else 0.0

    extras = None
    if criterion.kind == CriterionKind.CANON_CORR:
        extras = _retract_extras(state, sigma, var, new_subset)
    return SubsetState(new_subset, new_res, new_pinv, new_ld, state.sigma, extras)


# ---------------------------------------------------------------------------
# Candidate scoring
# ---------------------------------------------------------------------------


def score_all(
    criterion: Criterion, state: SubsetState, candidates: Optional[Sequence[int]] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Scores for appending each candidate to the current subset.

    Returns ``(candidates, scores)`` with candidates in ascending order
    (default: the full complement).  Scores are order-equivalent to
    ``evaluate`` on the grown subset: the argmin candidate is the same, and
    ties are broken toward the lowest index by taking the first minimum.
    ``-inf`` marks a perfect fit under DiagDet/IsoLrt.
    """
    sigma = state.sigma
    p = criterion.p
    if candidates is None:
        cands = state.complement()
    else:
        cands = np.asarray(sorted(int(c) for c in candidates), dtype=int)
        if len(set(cands.tolist())) != len(cands):
            raise DimMismatch("duplicate candidates")
        for c in cands.tolist():
            if not 0 <= c < p or c in state.subset:
                raise DimMismatch(f"candidate {c} invalid for subset {state.subset}")
    if cands.size == 0:
        return cands, np.zeros(0)

    res = state.residual
    kind = criterion.kind
    ztol = _zero_tol(res)
    diag = res.diagonal()[cands].astype(float, copy=True)
    ok = diag > ztol
    safe = np.where(ok, diag, 1.0)

    if kind == CriterionKind.CSS_TRACE:
        cols = res[:, cands]
        colsq = np.einsum("ij,ij->j", cols, cols)
        return cands, np.where(ok, -colsq / safe, 0.0)

    if kind == CriterionKind.DET_RESIDUAL:
        return cands, -diag

    if kind == CriterionKind.FROB_RESIDUAL:
        cols = res[:, cands]
        colsq = np.einsum("ij,ij->j", cols, cols)
        cubic = np.einsum("ij,ij->j", cols, res @ cols)
        scores = (colsq / safe) ** 2 - 2.0 * cubic / safe
        return cands, np.where(ok, scores, 0.0)

    if kind == CriterionKind.ISO_LRT:
        m = criterion.p - criterion.k
        tr = max(float(np.trace(res)), 0.0)
        cols = res[:, cands]
        colsq = np.einsum("ij,ij->j", cols, cols)
        rest = np.maximum(tr - np.where(ok, colsq / safe, 0.0), 0.0)
        with np.errstate(divide="ignore"):
            scores = np.log(np.where(ok, diag, 0.0)) + m * np.log(rest)
        return cands, scores

    if kind == CriterionKind.DIAG_DET:
        comp = state.complement()
        rc = res[np.ix_(comp, comp)]
        dg = rc.diagonal().astype(float, copy=True)
        pos = np.searchsorted(comp, cands)  # positions of candidates in comp
        dref = dg[pos]
        cok = dref > ztol
        csafe = np.where(cok, dref, 1.0)
        rows = rc[pos, :]
        terms = dg[None, :] - np.where(cok[:, None], rows * rows / csafe[:, None], 0.0)
        np.maximum(terms, 0.0, out=terms)
        with np.errstate(divide="ignore"):
            logs = np.log(terms)
            head = np.log(np.where(cok, dref, 0.0))
        logs[np.arange(len(cands)), pos] = 0.0  # exclude j == i from the sum
        return cands, head + logs.sum(axis=1)

    if kind == CriterionKind.CANON_CORR:
        return cands, _score_canon_corr(criterion, state, cands)

    raise DimMismatch(f"unknown criterion kind {kind}")


def _score_canon_corr(
    criterion: Criterion, state: SubsetState, cands: np.ndarray
) -> np.ndarray:
    """Scores for CanonCorr: for each candidate i, with V = U + (i,),

        f(i) = trace(pinv(sigma_V)[:k, :k] @ swapped_residual)
             + beta^T pinv(sigma_V) beta / beta_i   [if beta_i > tol]
             - 1{residual_ii > tol}

    where beta is the column of the residual of V on the rest, restricted
    to V.  Order-equivalent to evaluate on V (argmin matches).
    """
    sigma = state.sigma
    cache = state.extras
    u = state.subset
    k = len(u)
    uu = list(u)
    tol = _zero_tol(sigma)
    rtol = _zero_tol(state.residual)
    scores = np.empty(len(cands))
    for a, i in enumerate(cands.tolist()):
        pos = cache.complement.index(i)
        rest = cache.complement[:pos] + cache.complement[pos + 1 :]
        cpinv_rest = symmat.pinv_remove(
            cache.complement_pinv, cache.complement, pos, sigma=sigma
        )
        vpinv = symmat.pinv_add(state.block_pinv, sigma, u, i)
        vv = uu + [i]
        if rest:
            rr = list(rest)
            t = cpinv_rest @ sigma[rr, i]
            beta = sigma[vv, i] - sigma[np.ix_(vv, rr)] @ t
        else:
            beta = sigma[vv, i].astype(float, copy=True)
        bj = float(beta[-1])
        term2 = float(beta @ vpinv @ beta) / bj if bj > tol else 0.0
        term1 = float(np.sum(vpinv[:k, :k] * cache.swapped_residual)) if k else 0.0
        ind = 1.0 if float(state.residual[i, i]) > rtol else 0.0
        scores[a] = term1 + term2 - ind
    return scores


def score_candidate(criterion: Criterion, state: SubsetState, i: int) -> float:
    """Score of a single candidate; see :func:`score_all`."""
    _, scores = score_all(criterion, state, [int(i)])
    return float(scores[0])


# ---------------------------------------------------------------------------
# Objective readout from a live state (cheap paths where available)
# ---------------------------------------------------------------------------


def objective_from_state(criterion: Criterion, state: SubsetState) -> float:
    """Objective of the state's subset, read from the caches when cheap.

    Agrees with :func:`evaluate` to update-roundoff (tested at 1e-8).
    CanonCorr and DetResidual fall back to ``evaluate``.
    """
    kind = criterion.kind
    res = state.residual
    if kind == CriterionKind.CSS_TRACE:
        return float(np.trace(res))
    comp = state.complement()
    if kind == CriterionKind.FROB_RESIDUAL:
        block = res[np.ix_(comp, comp)]
        return float(np.sum(block * block))
    if kind == CriterionKind.DIAG_DET:
        if comp.size == 0:
            return state.log_det_block
        tol = _zero_tol(state.sigma)
        diag = res.diagonal()[comp]
        if np.min(diag) <= tol:
            return float("-inf")
        return state.log_det_block + float(np.sum(np.log(diag)))
    if kind == CriterionKind.ISO_LRT:
        m = criterion.p - criterion.k
        tr = float(np.sum(res.diagonal()[comp]))
        tol = _zero_tol(state.sigma)
        if tr <= tol * max(comp.size, 1):
            return float("-inf")
        return state.log_det_block + m * math.log(tr / m)
    return evaluate(criterion, state.sigma, state.subset)
