"""Scattering coefficients of a charged quantum dot in a double-sided micropillar cavity.

All rates and frequencies are expressed in units of the cavity decay rate
``kappa`` (``kappa = 1`` by convention).  Only the closed-form weak-excitation
coefficients are evaluated; no time-domain dynamics are integrated.

Two sign conventions for the coupled transmission coefficient are supported:

``"printed"`` (default)
    ``t = +kappa [i(wX - w) + gamma/2] / den``.  At resonance ``t > 0``, which
    gives ``T = t - t0 > 1`` for weak coupling.
``"physical"``
    ``t = -kappa [i(wX - w) + gamma/2] / den``, which reduces to ``t0`` at
    ``g = 0`` and keeps ``|T| <= 1``.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

CONVENTIONS = ("printed", "physical")
_SINGULAR_TOL = 1e-15


class SingularParametersError(ValueError):
    """Raised when a coefficient denominator vanishes."""


@dataclass(frozen=True)
class ScatteringParams:
    """Physical parameters of the QD-cavity system, in units of ``kappa``."""

    omega: float = 0.0
    omega_c: float = 0.0
    omega_X: float = 0.0
    gamma: float = 0.1
    kappa: float = 1.0
    kappa_s: float = 0.0
    g: float = 2.0

    def __post_init__(self) -> None:
        for name in ("omega", "omega_c", "omega_X", "gamma", "kappa", "kappa_s", "g"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")
        if self.kappa_s < 0:
            raise ValueError("kappa_s must be >= 0")
        if self.g < 0:
            raise ValueError("g must be >= 0")

    @classmethod
    def resonant(cls, g_ratio: float, kappa_s: float = 0.0, gamma: float = 0.1) -> "ScatteringParams":
        """Resonant parameters with the coupling given as ``g / (kappa + kappa_s)``."""
        return cls(gamma=gamma, kappa=1.0, kappa_s=kappa_s, g=g_ratio * (1.0 + kappa_s))


@dataclass(frozen=True)
class ScatteringCoefficients:
    r: complex
    t: complex
    r0: complex
    t0: complex
    D: complex
    T: complex

    @classmethod
    def ideal(cls) -> "ScatteringCoefficients":
        """Perfect scattering: every photon takes the pass branch."""
        return cls(r=1.0 + 0j, t=0j, r0=0j, t0=-1.0 + 0j, D=0j, T=1.0 + 0j)

    @classmethod
    def from_branches(cls, T: complex, D: complex) -> "ScatteringCoefficients":
        """Coefficients fixed only through the branch amplitudes.

        The underlying ``r, t, r0, t0`` are reconstructed with ``r = 1 + t`` and
        ``r0 = 1 + t0`` so the algebraic identities still hold.
        """
        # D + T = 1 + 2t, D - T = 1 + 2t0
        t = (D + T - 1) / 2
        t0 = (D - T - 1) / 2
        return cls(r=1 + t, t=t, r0=1 + t0, t0=t0, D=complex(D), T=complex(T))


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown sign convention {convention!r}; expected one of {CONVENTIONS}")


def coupled_coefficients(p: ScatteringParams, convention: str = "printed") -> tuple[complex, complex]:
    """Reflection and transmission ``(r, t)`` when the photon couples to the trion."""
    _check_convention(convention)
    dipole = 1j * (p.omega_X - p.omega) + p.gamma / 2
    cavity = 1j * (p.omega_c - p.omega) + p.kappa + p.kappa_s / 2
    den = dipole * cavity + p.g**2
    if abs(den) < _SINGULAR_TOL:
        raise SingularParametersError(f"coupled denominator vanishes for {p}")
    t = p.kappa * dipole / den
    if convention == "physical":
        t = -t
    return complex(1 + t), complex(t)


def decoupled_coefficients(p: ScatteringParams) -> tuple[complex, complex]:
    """Reflection and transmission ``(r0, t0)`` of the empty cavity."""
    den = 1j * (p.omega_c - p.omega) + p.kappa + p.kappa_s / 2
    if abs(den) < _SINGULAR_TOL:
        raise SingularParametersError(f"decoupled denominator vanishes for {p}")
    t0 = -p.kappa / den
    return complex(1 + t0), complex(t0)


def branch_amplitudes(p: ScatteringParams, convention: str = "printed") -> ScatteringCoefficients:
    r, t = coupled_coefficients(p, convention)
    r0, t0 = decoupled_coefficients(p)
    D = (t + r + t0 + r0) / 2
    T = (t + r - t0 - r0) / 2
    return ScatteringCoefficients(r=r, t=t, r0=r0, t0=t0, D=D, T=T)


def qnd_efficiency(p: ScatteringParams, convention: str = "printed") -> float:
    """Success probability ``|T|**4`` of one parity-check QND."""
    return abs(branch_amplitudes(p, convention).T) ** 4


def swap_efficiency(p: ScatteringParams, convention: str = "printed") -> float:
    """Success probability ``|T|**8`` of one P-P SWAP gate."""
    return abs(branch_amplitudes(p, convention).T) ** 8
