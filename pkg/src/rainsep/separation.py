"""Rain/background layer separation by L1 minimization.

For each channel the rain layer ``v`` minimizes ``||A v - b||_1`` where the
rows of ``A`` are derivative-filter responses (and pixel indicators) with
their weights folded in.  The L1 problem is solved by iteratively
reweighted least squares starting from the ordinary least-squares solution.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .imaging import as_image, as_mask

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """The weighted least-squares solve did not reach the requested tolerance."""


@dataclass(frozen=True)
class SeparationConfig:
    lambda_: float = 0.25
    eta: float = 0.1
    irls_iters: int = 3
    epsilon_irls: float = 1e-6
    solver_tol: float = 1e-8
    clamp_rain: bool = True

    def __post_init__(self):
        if self.lambda_ <= 0:
            raise ValueError("lambda must be positive")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.irls_iters < 1:
            raise ValueError("irls_iters must be >= 1")
        if self.epsilon_irls <= 0:
            raise ValueError("epsilon_irls must be positive")
        if self.solver_tol <= 0:
            raise ValueError("solver_tol must be positive")


@dataclass(frozen=True)
class Kernel:
    name: str
    offsets: tuple  # (dr, dc) of each support pixel relative to the anchor
    coeffs: tuple


FilterBank = tuple


def build_filter_bank() -> FilterBank:
    """First and second differences along columns and rows."""
    return (
        Kernel("dx", ((0, 0), (0, 1)), (-1.0, 1.0)),
        Kernel("dy", ((0, 0), (1, 0)), (-1.0, 1.0)),
        Kernel("dxx", ((0, -1), (0, 0), (0, 1)), (1.0, -2.0, 1.0)),
        Kernel("dyy", ((-1, 0), (0, 0), (1, 0)), (1.0, -2.0, 1.0)),
    )


def _anchors(kernel: Kernel, h: int, w: int):
    drs = [o[0] for o in kernel.offsets]
    dcs = [o[1] for o in kernel.offsets]
    rows = np.arange(-min(drs), h - max(drs))
    cols = np.arange(-min(dcs), w - max(dcs))
    if rows.size == 0 or cols.size == 0:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return rr.ravel(), cc.ravel()


def filter_matrix(shape, bank: FilterBank = None):
    """Sparse operator mapping a vectorized ``(H, W)`` channel to all valid responses.

    Returns ``(D, support)`` where ``support`` is a list of flat-index arrays,
    one per support slot, padded with the first slot for short kernels.
    """
    bank = build_filter_bank() if bank is None else bank
    h, w = shape
    data, rows, cols = [], [], []
    support = []
    start = 0
    width = max(len(k.offsets) for k in bank)
    for kernel in bank:
        ar, ac = _anchors(kernel, h, w)
        n = ar.size
        slots = []
        for (dr, dc), coef in zip(kernel.offsets, kernel.coeffs):
            idx = (ar + dr) * w + (ac + dc)
            rows.append(np.arange(start, start + n))
            cols.append(idx)
            data.append(np.full(n, coef))
            slots.append(idx)
        slots += [slots[0]] * (width - len(slots))
        support.append(np.stack(slots) if n else np.empty((width, 0), dtype=np.intp))
        start += n
    D = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(start, h * w),
    )
    return D, np.concatenate(support, axis=1)


@dataclass(frozen=True)
class SparseL1System:
    """Weighted rows of the L1 objective ``||A v - b||_1``.

    ``terms`` maps each objective term to its row slice: ``rain_grad``
    (rain-layer responses toward zero), ``background_grad`` (background
    responses toward zero), ``agreement`` (rain-classified responses toward
    the image response, others toward zero, weighted by lambda) and
    ``anchor`` (rain layer toward zero on non-rain pixels, weighted by eta).
    """

    A: sp.csr_matrix
    b: np.ndarray
    terms: dict
    n_responses: int
    rain_responses: np.ndarray


def assemble_system(channel, rain_mask, bank: FilterBank = None,
                    config: SeparationConfig = SeparationConfig()) -> SparseL1System:
    channel = np.asarray(channel, dtype=np.float64)
    if channel.ndim != 2:
        raise ValueError("channel must be a 2-D array")
    rain_mask = as_mask(rain_mask, channel.shape)
    h, w = channel.shape
    n = h * w

    D, support = filter_matrix((h, w), bank)
    F = D.shape[0]
    response = D @ channel.ravel()
    rain_flat = rain_mask.ravel()
    is_rain = rain_flat[support].any(axis=0) if F else np.zeros(0, dtype=bool)

    anchored = np.flatnonzero(~rain_flat)
    if anchored.size == 0:
        warnings.warn("no non-rain pixels; anchoring every pixel to keep the system solvable",
                      RuntimeWarning, stacklevel=2)
        anchored = np.arange(n)
    P = sp.csr_matrix((np.ones(anchored.size), (np.arange(anchored.size), anchored)),
                      shape=(anchored.size, n))

    lam, eta = config.lambda_, config.eta
    A = sp.vstack([D, D, lam * D, eta * P], format="csr")
    b = np.concatenate([
        np.zeros(F),
        response,
        lam * np.where(is_rain, response, 0.0),
        np.zeros(anchored.size),
    ])
    terms = {
        "rain_grad": slice(0, F),
        "background_grad": slice(F, 2 * F),
        "agreement": slice(2 * F, 3 * F),
        "anchor": slice(3 * F, 3 * F + anchored.size),
    }
    return SparseL1System(A=A, b=b, terms=terms, n_responses=F, rain_responses=is_rain)


def l1_objective(system, v) -> float:
    A, b = (system.A, system.b) if isinstance(system, SparseL1System) else system
    return float(np.abs(A @ v - b).sum())


def _weighted_lstsq(A, b, weights, tol):
    """Solve min ||diag(sqrt(weights)) (A v - b)||_2 through the normal equations."""
    At = A.T.tocsr()
    if weights is None:
        N = (At @ A).tocsc()
        rhs = At @ b
    else:
        N = (At @ sp.diags(weights) @ A).tocsc()
        rhs = At @ (weights * b)
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0:
        return np.zeros(A.shape[1])
    try:
        # N is symmetric positive definite, so symmetric mode is safe and much faster.
        lu = splu(N, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options={"SymmetricMode": True})
    except RuntimeError:
        try:
            lu = splu(N)
        except RuntimeError as exc:
            raise SolverError(f"normal equations are singular: {exc}") from exc
    v = lu.solve(rhs)
    for _ in range(5):
        resid = rhs - N @ v
        rel = np.linalg.norm(resid) / rhs_norm
        if rel <= tol:
            return v
        v += lu.solve(resid)
    resid = rhs - N @ v
    rel = np.linalg.norm(resid) / rhs_norm
    if not np.isfinite(rel) or rel > tol:
        raise SolverError(f"relative residual {rel:.3e} exceeds tolerance {tol:.1e}")
    return v


def irls_solve(system, config: SeparationConfig = SeparationConfig(), history=None):
    """Approximately minimize ``||A v - b||_1`` by IRLS.

    ``system`` is a :class:`SparseL1System` or an ``(A, b)`` pair.  Each
    iteration weights row ``i`` by ``max(|r_i|, epsilon)**-1`` in the squared
    loss, i.e. by ``z_i = max(|r_i|, epsilon)**-0.5`` on the residual.  If
    ``history`` is a list, the L1 objective of the initializer and of every
    iterate is appended to it.
    """
    A, b = (system.A, system.b) if isinstance(system, SparseL1System) else system
    A = sp.csr_matrix(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    v = _weighted_lstsq(A, b, None, config.solver_tol)
    if history is not None:
        history.append(float(np.abs(A @ v - b).sum()))
    for t in range(config.irls_iters):
        e = np.abs(A @ v - b)
        z = np.maximum(e, config.epsilon_irls) ** -0.5
        v = _weighted_lstsq(A, b, z * z, config.solver_tol)
        if history is not None:
            history.append(float(np.abs(A @ v - b).sum()))
        log.debug("irls iteration %d: objective %.6g", t + 1, np.abs(A @ v - b).sum())
    return v


@dataclass(frozen=True)
class LayerPair:
    rain: np.ndarray
    background: np.ndarray


def split_exact(image, rain):
    """Return ``(rain, background)`` with ``rain + background == image`` bitwise.

    Exact whenever ``-image <= rain <= 2 * image``.  Outside that band the
    exact sum of two nearly cancelling floats sits on a grid coarser than
    the spacing of ``image``, so no float pair close to ``rain`` can hit
    ``image`` exactly and the error is a few units in the last place of
    ``rain``.
    """
    background = image - rain
    rain = image - background
    for _ in range(3):
        bad = (rain + background) != image
        if not bad.any():
            break
        background = np.where(bad, image - rain, background)
        rain = np.where(bad, image - background, rain)
    return rain, background


def separate_layers(image, rain_mask, config: SeparationConfig = SeparationConfig(),
                    histories=None) -> LayerPair:
    """Split ``image`` into an additive rain layer and a background layer.

    Channels are solved independently with a shared mask.  ``histories``, if
    given, receives one objective history list per channel.
    """
    image = as_image(image)
    rain_mask = as_mask(rain_mask, image.shape)
    bank = build_filter_bank()
    rain = np.zeros_like(image)
    if not rain_mask.any():
        # Every filter response is non-rain: v = 0 zeroes every row exactly.
        if histories is not None:
            histories.extend([0.0, 0.0] for _ in range(3))
        return LayerPair(rain=rain, background=image.copy())
    for ch in range(3):
        system = assemble_system(image[..., ch], rain_mask, bank, config)
        hist = [] if histories is not None else None
        v = irls_solve(system, config, hist)
        if histories is not None:
            histories.append(hist)
        rain[..., ch] = v.reshape(image.shape[:2])
    if config.clamp_rain:
        rain = np.clip(rain, 0.0, image)
    rain, background = split_exact(image, rain)
    return LayerPair(rain=rain, background=background)
