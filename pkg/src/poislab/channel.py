"""Base flow, mode parameters, and regime bookkeeping for the periodic strip.

The strip is (x, y) in T_{2*L*pi} x [-1, 1].  The background shear is the
flux-normalized parabola U(y) = (3/4) * phi * (1 - y^2), so U integrates to
phi across the channel and U'' is the constant -(3/2) * phi.  A horizontal
Fourier mode n sees the scaled wavenumber nhat = n / L.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, ModeProfile, differentiate, resolution_for_beta

__all__ = [
    "BaseFlow",
    "ChannelParams",
    "RegimeThresholds",
    "ForcingMode",
    "base_flow",
    "mode_rhs",
    "vorticity_of",
    "velocity_of",
    "layer_width",
    "resolution_for",
]


@dataclass(frozen=True)
class ChannelParams:
    """Flux, half-period multiplier, and mode index for one solve."""

    phi: float
    L: float
    n: int

    def __post_init__(self) -> None:
        # phi = 0 is the Stokes limit, kept as a clean validation case.
        if self.phi < 0.0:
            raise ValueError(f"flux must be non-negative, got {self.phi}")
        if self.L <= 0.0:
            raise ValueError(f"period multiplier must be positive, got {self.L}")

    @property
    def nhat(self) -> float:
        return self.n / self.L


@dataclass(frozen=True)
class RegimeThresholds:
    """Cutoffs separating the intermediate and high frequency regimes.

    ``c_tilde`` scales the (astronomical) flux floor phi >= c_tilde*(1+L)^63
    under which the full closure argument operates; it is reported as a
    diagnostic, never enforced at desk scale.  ``eps1`` splits the regimes
    at |n| = eps1 * L * sqrt(phi).
    """

    c_tilde: float = 1.0
    eps1: float = 0.1

    def __post_init__(self) -> None:
        if self.c_tilde <= 0.0 or self.eps1 <= 0.0:
            raise ValueError("regime thresholds must be positive")

    def in_intermediate(self, p: ChannelParams) -> bool:
        return 1 <= abs(p.n) <= self.eps1 * p.L * np.sqrt(p.phi)

    def in_high(self, p: ChannelParams) -> bool:
        return (abs(p.n) >= self.eps1 * p.L * np.sqrt(p.phi)
                and self.eps1 ** 2 * p.phi >= 276.0)

    def flux_floor(self, L: float) -> float:
        return self.c_tilde * (1.0 + L) ** 63


@dataclass
class BaseFlow:
    """Parabolic shear sampled on a grid, with first two derivatives."""

    phi: float
    u: ModeProfile
    du: ModeProfile
    d2u: ModeProfile


def base_flow(phi: float, grid: Grid) -> BaseFlow:
    if phi < 0.0:
        raise ValueError(f"flux must be non-negative, got {phi}")
    y = grid.nodes
    u = 0.75 * phi * (1.0 - y * y)
    du = -1.5 * phi * y
    d2u = np.full_like(y, -1.5 * phi)
    return BaseFlow(
        phi=phi,
        u=ModeProfile(grid, u, 0.0),
        du=ModeProfile(grid, du, 0.0),
        d2u=ModeProfile(grid, d2u, 0.0),
    )


@dataclass
class ForcingMode:
    """One Fourier mode of the body force, horizontal and vertical parts."""

    f1: ModeProfile
    f2: ModeProfile

    def __post_init__(self) -> None:
        if self.f1.grid is not self.f2.grid:
            raise ValueError("forcing components must share a grid")
        if self.f1.nhat != self.f2.nhat:
            raise ValueError(
                f"forcing components disagree on nhat: "
                f"{self.f1.nhat} vs {self.f2.nhat}"
            )

    @property
    def nhat(self) -> float:
        return self.f1.nhat

    def l2_norm(self) -> float:
        """sqrt of the y-integral of |f1|^2 + |f2|^2."""
        w = self.f1.grid.weights
        s = np.dot(w, np.abs(self.f1.samples) ** 2 + np.abs(self.f2.samples) ** 2)
        return float(np.sqrt(s.real))


def mode_rhs(forcing: ForcingMode) -> ModeProfile:
    """Scalar vorticity forcing i*nhat*f2 - f1' driving the stream equation."""
    df1 = differentiate(forcing.f1)
    return forcing.f1.like(1j * forcing.nhat * forcing.f2.samples - df1.samples)


def vorticity_of(psi: ModeProfile) -> ModeProfile:
    """Mode vorticity psi'' - nhat^2 psi."""
    d2 = differentiate(psi, 2)
    return psi.like(d2.samples - psi.nhat ** 2 * psi.samples)


def velocity_of(psi: ModeProfile) -> tuple[ModeProfile, ModeProfile]:
    """Velocity mode (v1, v2) = (-psi', i*nhat*psi); divergence-free by form."""
    dpsi = differentiate(psi)
    return psi.like(-dpsi.samples), psi.like(1j * psi.nhat * psi.samples)


def layer_width(params: ChannelParams) -> float:
    """Boundary layer scale beta = |3*phi*nhat/2|^(1/3)."""
    return abs(1.5 * params.phi * params.nhat) ** (1.0 / 3.0)


def resolution_for(params: ChannelParams) -> int:
    """Even grid order resolving both the beta-layer and the e^{-nhat y} walls."""
    return resolution_for_beta(layer_width(params), params.nhat)
