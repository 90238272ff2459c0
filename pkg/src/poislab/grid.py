"""Chebyshev collocation primitives on [-1, 1].

Everything downstream works with nodal samples on the Chebyshev-Gauss-Lobatto
grid y_j = cos(j*pi/N).  Differentiation matrices, Clenshaw-Curtis quadrature
weights, barycentric off-grid evaluation, and an antiderivative operator are
bundled here so solver modules never touch coefficient space directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "Grid",
    "ModeProfile",
    "build_grid",
    "differentiate",
    "integrate",
    "antiderivative",
    "interpolate",
    "parity_parts",
    "resolution_for_beta",
    "cheb_nodes",
    "cheb_coefficients",
    "coefficient_derivative",
    "eval_coefficients",
]


def _cgl_nodes(n: int) -> np.ndarray:
    # cos is exact enough; force the symmetric values so y[N-j] == -y[j] holds
    # bit-for-bit (parity splits rely on it).
    j = np.arange(n + 1)
    y = np.cos(j * np.pi / n)
    y[n // 2] = 0.0 if n % 2 == 0 else y[n // 2]
    return (y - y[::-1]) / 2.0


def _diff_matrix(y: np.ndarray) -> np.ndarray:
    """First-derivative collocation matrix with the negative-sum trick."""
    n = len(y) - 1
    c = np.ones(n + 1)
    c[0] = c[n] = 2.0
    c *= (-1.0) ** np.arange(n + 1)
    dy = y[:, None] - y[None, :]
    np.fill_diagonal(dy, 1.0)
    d = (c[:, None] / c[None, :]) / dy
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def _clenshaw_curtis(n: int) -> np.ndarray:
    """Quadrature weights matching the CGL nodes.  Requires n even."""
    theta = np.arange(n + 1) * np.pi / n
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    for k in range(1, n // 2):
        v -= 2.0 * np.cos(2.0 * k * theta[1:-1]) / (4.0 * k * k - 1.0)
    v -= np.cos(n * theta[1:-1]) / (n * n - 1.0)
    w[0] = w[n] = 1.0 / (n * n - 1.0)
    w[1:-1] = 2.0 * v / n
    return w


@dataclass(frozen=True)
class Grid:
    """Immutable bundle of nodes, derivative operators, and weights.

    Attributes
    ----------
    n : polynomial order (number of intervals; there are n+1 nodes).
    nodes : CGL nodes, descending from +1 to -1.
    diff : tuple of dense operators for derivative orders 1..4.
    weights : Clenshaw-Curtis weights (positive, sum to 2).
    """

    n: int
    nodes: np.ndarray = field(repr=False)
    diff: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray] = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)
        for d in self.diff:
            d.setflags(write=False)


@lru_cache(maxsize=64)
def build_grid(n: int) -> Grid:
    """Construct the order-``n`` collocation grid.

    ``n`` must be even and at least 8: quadrature weights use the even
    closed form, and parity splitting needs a node at y = 0.
    """
    if n < 8 or n % 2:
        raise ValueError(f"grid order must be even and >= 8, got {n}")
    y = _cgl_nodes(n)
    d1 = _diff_matrix(y)
    ops = [d1]
    for _ in range(3):
        dk = d1 @ ops[-1]
        # re-zero row sums so constants stay exactly in the kernel
        np.fill_diagonal(dk, np.diag(dk) - dk.sum(axis=1))
        ops.append(dk)
    return Grid(n=n, nodes=y, diff=tuple(ops), weights=_clenshaw_curtis(n))


@dataclass
class ModeProfile:
    """Nodal samples of one transverse profile at a fixed x-frequency.

    ``nhat`` is the scaled wavenumber n/L carried along so operators that
    need it (mode Laplacian, velocity recovery) cannot be fed mismatched
    arguments silently.
    """

    grid: Grid
    samples: np.ndarray
    nhat: float

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.shape != self.grid.nodes.shape:
            raise ValueError(
                f"sample count {self.samples.shape} does not match "
                f"grid with {self.grid.n + 1} nodes"
            )

    def like(self, samples: np.ndarray) -> "ModeProfile":
        return ModeProfile(self.grid, samples, self.nhat)


def differentiate(p: ModeProfile, order: int = 1) -> ModeProfile:
    """Spectral derivative of the given order (1..4)."""
    if not 1 <= order <= 4:
        raise ValueError(f"derivative order must be in 1..4, got {order}")
    return p.like(p.grid.diff[order - 1] @ p.samples)


def integrate(p: ModeProfile) -> complex:
    """Clenshaw-Curtis integral of the samples over [-1, 1]."""
    return complex(np.dot(p.grid.weights, p.samples))


def antiderivative(p: ModeProfile) -> ModeProfile:
    """Antiderivative vanishing at y = -1.

    Solves D q = p with the y = -1 row replaced by q(-1) = 0; exact whenever
    the samples come from a polynomial of degree < n.
    """
    g = p.grid
    a = g.diff[0].copy()
    rhs = p.samples.copy()
    a[-1, :] = 0.0
    a[-1, -1] = 1.0
    rhs[-1] = 0.0
    return p.like(np.linalg.solve(a, rhs))


def _bary_weights(n: int) -> np.ndarray:
    w = np.ones(n + 1)
    w[1::2] = -1.0
    w[0] *= 0.5
    w[n] *= 0.5
    return w


def interpolate(p: ModeProfile, targets: np.ndarray) -> np.ndarray:
    """Barycentric evaluation of the nodal interpolant at arbitrary points."""
    t = np.atleast_1d(np.asarray(targets, dtype=float))
    w = _bary_weights(p.grid.n)
    diff = t[:, None] - p.grid.nodes[None, :]
    exact_row, exact_col = np.nonzero(diff == 0.0)
    np.copyto(diff, 1.0, where=(diff == 0.0))
    k = w[None, :] / diff
    out = (k @ p.samples) / k.sum(axis=1)
    out[exact_row] = p.samples[exact_col]
    return out if np.ndim(targets) else out[0]


def parity_parts(p: ModeProfile) -> tuple[ModeProfile, ModeProfile]:
    """Even and odd parts about y = 0 (grid is reflection-symmetric)."""
    flipped = p.samples[::-1]
    return p.like(0.5 * (p.samples + flipped)), p.like(0.5 * (p.samples - flipped))


def resolution_for_beta(beta: float, nhat: float = 0.0) -> int:
    """Grid order resolving a wall layer of width 1/beta (and 1/|nhat|).

    Chebyshev nodes cluster like n^-2 at the walls, so order ~ sqrt(beta)
    suffices; the factor 22 keeps ~10 nodes inside the layer, enough to push
    interior equation defects to ~1e-12 in the flux range exercised here,
    three orders under the 1e-9 gate.  Rounded up to even for quadrature.
    """
    n = max(64, int(np.ceil(22.0 * np.sqrt(max(beta, 0.0)))),
            int(np.ceil(22.0 * np.sqrt(abs(nhat)))))
    return n + (n % 2)


# pi to long-double precision; np.pi alone would poison extended tables.
_LD_PI = np.arccos(np.longdouble(-1.0))


def _wants_extended(arr: np.ndarray) -> bool:
    return arr.dtype in (np.dtype(np.longdouble), np.dtype(np.clongdouble))


@lru_cache(maxsize=6)
def _cos_block(rows: int, order: int, cols: int, extended: bool) -> np.ndarray:
    # cos(pi * i * k / order), i < rows, k < cols; serves analysis (square)
    # and synthesis (tall) directions.  Direct matrices, no FFT: sizes stay
    # small enough that the quadratic cost never matters here.
    if extended:
        i = np.arange(rows, dtype=np.longdouble)[:, None]
        k = np.arange(cols, dtype=np.longdouble)[None, :]
        return np.cos((_LD_PI / order) * i * k)
    i = np.arange(rows, dtype=float)[:, None]
    k = np.arange(cols, dtype=float)[None, :]
    return np.cos((np.pi / order) * i * k)


def cheb_nodes(order: int, extended: bool = False) -> np.ndarray:
    """Gauss-Lobatto nodes of the given order, descending from +1 to -1."""
    if order < 2:
        raise ValueError("order must be at least 2")
    if extended:
        theta = np.arange(order + 1, dtype=np.longdouble) * (_LD_PI / order)
    else:
        theta = np.arange(order + 1) * (np.pi / order)
    y = np.cos(theta)
    return 0.5 * (y - y[::-1])


def cheb_coefficients(samples: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients of the nodal interpolant on Gauss-Lobatto points.

    Sample order must match cheb_nodes / build_grid: index 0 is y = +1.
    Long-double input keeps the whole analysis in long double; diagnostics
    lean on that, since derivative noise scales with the working epsilon.
    """
    v = np.asarray(samples)
    n = v.shape[0] - 1
    if n < 2:
        raise ValueError("need at least three samples")
    extended = _wants_extended(v)
    if not (extended or np.iscomplexobj(v)):
        v = v.astype(float)
    scaled = v.copy()
    scaled[0] *= 0.5
    scaled[n] *= 0.5
    coeffs = (2.0 / scaled.real.dtype.type(n)) * (
        _cos_block(n + 1, n, n + 1, extended).T @ scaled)
    coeffs[0] *= 0.5
    coeffs[n] *= 0.5
    return coeffs


def coefficient_derivative(coeffs: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients of the derivative, via the standard recurrence.

    b_{k-1} = b_{k+1} + 2 k a_k with b_n = 0; exact in exact arithmetic and
    rounding-stable, unlike dense differentiation matrices whose entries grow
    like n^2.
    """
    a = np.asarray(coeffs)
    n = a.shape[0] - 1
    b = np.zeros_like(a)
    if n == 0:
        return b
    b[n - 1] = 2.0 * n * a[n]
    for k in range(n - 1, 0, -1):
        b[k - 1] = b[k + 1] + 2.0 * k * a[k]
    b[0] *= 0.5
    return b


def eval_coefficients(coeffs: np.ndarray, order: int) -> np.ndarray:
    """Evaluate a Chebyshev series at the Gauss-Lobatto nodes of `order`.

    cos(k arccos y_i) = cos(pi i k / order) at those nodes, so synthesis is a
    single cosine-matrix product.
    """
    a = np.asarray(coeffs)
    if order < a.shape[0] - 1:
        raise ValueError("target order must not truncate the series")
    return _cos_block(order + 1, order, a.shape[0], _wants_extended(a)) @ a
