"""Batched, globally adaptive Gauss-Kronrod (7/15) quadrature.

Several independent integrals are refined together: each panel carries the
index of the integral it belongs to, and the integrand is evaluated on all
panels in one vectorized call.  Error estimates follow the QUADPACK qk15
heuristics.

Nodes are handed to the integrand as (anchor, offset) pairs.  Near a sharp
resonance at a large abscissa the spacing of representable floats can be a
visible fraction of the linewidth; anchoring each panel at the nearest
resonance keeps the offsets, and hence the resonant differences, exact.
"""

from __future__ import annotations

import numpy as np

from .errors import QuadratureFailure

# Kronrod abscissae (non-negative half) and weights; Gauss weights sit on every odd index.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]
GAUSS_WEIGHTS[7] = _WG[3]

_EPS = np.finfo(float).eps


def panel_sums(f, anchor, lo, hi, owner):
    """Per-panel (kronrod, gauss, resasc, resabs) sums for integrand ``f``."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    offset = mid[:, None] + half[:, None] * NODES[None, :]
    fx = f(anchor[:, None], offset, owner[:, None])
    # row-wise sums (not BLAS) keep each panel's value independent of the batch
    kron = half * (fx * KRONROD_WEIGHTS).sum(axis=1)
    gauss = half * (fx * GAUSS_WEIGHTS).sum(axis=1)
    mean = kron / np.where(half > 0, 2 * half, 1.0)
    resasc = half * (np.abs(fx - mean[:, None]) * KRONROD_WEIGHTS).sum(axis=1)
    resabs = half * (np.abs(fx) * KRONROD_WEIGHTS).sum(axis=1)
    return kron, gauss, resasc, resabs


def _estimates(kron, gauss, resasc, resabs):
    """(value, error, settled) per panel from its sums; settled marks the round-off floor."""
    err = np.abs(kron - gauss)
    ratio = np.where(resasc > 0, (200 * err / np.where(resasc > 0, resasc, 1.0)) ** 1.5, 0.0)
    err = np.where((resasc > 0) & (err > 0), resasc * np.minimum(1.0, ratio), err)
    floor = 50 * _EPS * resabs
    err = np.maximum(err, floor)
    return kron, err, err <= floor


def _anchor_panels(edges: np.ndarray, anchors: np.ndarray | None):
    lo, hi = edges[:-1], edges[1:]
    if anchors is None or len(anchors) == 0:
        return np.zeros_like(lo), lo, hi
    anchors = np.asarray(anchors, dtype=float)
    mid = 0.5 * (lo + hi)
    nearest = anchors[np.argmin(np.abs(mid[:, None] - anchors[None, :]), axis=1)]
    return nearest, lo - nearest, hi - nearest


def integrate_panels(
    f, edges: list[np.ndarray], anchors=None, rtol: float = 1e-9, max_rounds: int = 60, max_panels: int = 20_000
):
    """Integrate ``f`` for several integrals at once.

    ``edges[k]`` is the sorted breakpoint array of integral ``k`` and
    ``anchors[k]`` (optional) the abscissae its panels may be anchored to.
    ``f(anchor, offset, k)`` receives broadcastable arrays and must return
    the integrand at anchor + offset.  Returns (values, relative_error_estimates).
    Integrals that miss ``rtol`` raise QuadratureFailure with the worst
    accuracy reached.  Refinement stops after ``max_rounds`` bisection rounds;
    an integral holding ``max_panels`` panels, or whose offending panels are
    all at their round-off floor, is not refined further.
    """
    n = len(edges)
    if anchors is None:
        anchors = [None] * n
    pieces = [_anchor_panels(np.asarray(e, dtype=float), a) for e, a in zip(edges, anchors)]
    anchor = np.concatenate([p[0] for p in pieces])
    lo = np.concatenate([p[1] for p in pieces])
    hi = np.concatenate([p[2] for p in pieces])
    owner = np.concatenate([np.full(len(e) - 1, k) for k, e in enumerate(edges)])
    return integrate_flat(f, anchor, lo, hi, owner, n, rtol=rtol, max_rounds=max_rounds, max_panels=max_panels)


def integrate_flat(
    f, anchor, lo, hi, owner, n: int, rtol: float = 1e-9, max_rounds: int = 60, max_panels: int = 20_000,
    sums=None,
):
    """Core of integrate_panels on pre-built panels.

    Panel ``i`` covers [anchor + lo, anchor + hi] and contributes to integral
    ``owner[i]`` (0 <= owner < n).  ``sums(anchor, lo, hi, owner)``, when
    given, replaces the evaluation of ``f`` and must return what
    ``panel_sums`` would.
    """
    if sums is None:
        def sums(anchor, lo, hi, owner):
            return panel_sums(f, anchor, lo, hi, owner)

    val, err, settled = _estimates(*sums(anchor, lo, hi, owner))

    for _ in range(max_rounds):
        total = np.bincount(owner, weights=val, minlength=n)
        total_err = np.bincount(owner, weights=err, minlength=n)
        target = rtol * np.abs(total)
        open_owner = total_err > target
        if not open_owner.any():
            break
        count = np.bincount(owner, minlength=n)
        share = target[owner] / count[owner]
        # a panel at its round-off floor gains nothing from bisection
        split = open_owner[owner] & (err > share) & ~settled & (count[owner] < max_panels)
        # cannot bisect below floating-point resolution
        split &= (hi - lo) > 64 * _EPS * np.maximum(np.abs(lo), np.abs(hi))
        if not split.any():
            break
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        new_owner = np.concatenate([owner[split], owner[split]])
        new_anchor = np.concatenate([anchor[split], anchor[split]])
        new_val, new_err, new_settled = _estimates(*sums(new_anchor, new_lo, new_hi, new_owner))
        keep = ~split
        anchor = np.concatenate([anchor[keep], new_anchor])
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        owner = np.concatenate([owner[keep], new_owner])
        val = np.concatenate([val[keep], new_val])
        err = np.concatenate([err[keep], new_err])
        settled = np.concatenate([settled[keep], new_settled])

    total = np.bincount(owner, weights=val, minlength=n)
    total_err = np.bincount(owner, weights=err, minlength=n)
    rel = total_err / np.abs(total)
    if np.any(rel > rtol):
        raise QuadratureFailure(float(np.max(rel)))
    return total, rel


def graded_breakpoints(centers, widths, upper: float, ratio: float = 4.0) -> np.ndarray:
    """Breakpoints in [0, upper] that refine geometrically towards each centre.

    Around a centre c with half-width h the points c +- h * ratio**j are
    generated until they leave [0, upper].
    """
    points = [np.array([0.0, upper])]
    for c, h in zip(centers, widths):
        h = max(float(h), 1e-300)
        n_steps = int(np.ceil(np.log(max(upper, h) / h) / np.log(ratio))) + 1
        offsets = h * ratio ** np.arange(n_steps)
        points.append(np.concatenate([[c], c - offsets, c + offsets]))
    pts = np.concatenate(points)
    pts = pts[(pts >= 0) & (pts <= upper)]
    return np.unique(pts)
