"""Riemann kernel of the constant-coefficient operator u_xy + c*u.

The kernel is R(xi, eta; x, y) = 0F1(1; -c*(xi - x)*(eta - y)), an entire
function of its argument.  Cells are small at desk scale, so the argument
stays tiny and plain series summation is both fast and accurate; there is no
asymptotic branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["KernelRangeError", "RiemannKernel", "hyp0f1", "riemann", "riemann_d1", "riemann_d2"]

Z_MAX = 1.0e4
MAX_TERMS = 500


class KernelRangeError(ValueError):
    """Series argument too large: the mesh cell must be refined."""


def hyp0f1(b: float, z: float) -> float:
    """Confluent limit function 0F1(b; z) by direct series summation.

    Terms follow t_{k+1} = t_k * z / ((b + k) * (k + 1)); summation stops when
    |t_k| drops below 1e-17 of the largest partial-sum magnitude seen, or
    after 500 terms.  Arguments with |z| > 1e4 are rejected.
    """
    if b <= 0:
        raise ValueError(f"lower parameter must be positive, got b={b}")
    if abs(z) > Z_MAX:
        raise KernelRangeError(f"|z| = {abs(z):.3g} exceeds {Z_MAX:.0g}; refine the mesh")
    total = 1.0
    term = 1.0
    peak = 1.0
    for k in range(MAX_TERMS):
        term *= z / ((b + k) * (k + 1))
        total += term
        peak = max(peak, abs(total))
        if abs(term) <= 1.0e-17 * peak:
            break
    return total


def hyp0f1_array(b: float, z: np.ndarray, zmax: float | None = None) -> np.ndarray:
    """Vectorized 0F1 over an array, by Horner evaluation of the series.

    The truncation order is chosen from `zmax` (defaults to max |z|) so that
    the dropped tail is below 1e-18 relative; agrees with `hyp0f1` to
    roundoff.
    """
    z = np.asarray(z, dtype=float)
    if zmax is None:
        zmax = float(np.max(np.abs(z))) if z.size else 0.0
    if zmax > Z_MAX:
        raise KernelRangeError(f"|z| = {zmax:.3g} exceeds {Z_MAX:.0g}; refine the mesh")
    coeffs = _series_coeffs(b, zmax)
    out = np.full(z.shape, coeffs[-1])
    for c in coeffs[-2::-1]:
        out *= z
        out += c
    return out


def _series_coeffs(b: float, zmax: float) -> np.ndarray:
    # 1/((b)_k k!) up to the order where the tail at |z| = zmax is negligible
    coeffs = [1.0]
    term = 1.0
    for k in range(MAX_TERMS):
        coeffs.append(coeffs[-1] / ((b + k) * (k + 1)))
        term *= zmax / ((b + k) * (k + 1))
        if term <= 1.0e-18:
            break
    return np.array(coeffs)


@dataclass(frozen=True)
class RiemannKernel:
    """Riemann function of u_xy + c*u with the signed cell coefficient c.

    R is normalized to 1 when the two argument pairs coincide.
    """

    c: float


def riemann(kernel: RiemannKernel, xi: float, eta: float, x: float, y: float) -> float:
    """R(xi, eta; x, y) = 0F1(1; -c*(xi - x)*(eta - y))."""
    return hyp0f1(1.0, -kernel.c * (xi - x) * (eta - y))


def riemann_d1(kernel: RiemannKernel, xi: float, eta: float, x: float, y: float) -> float:
    """Partial derivative of `riemann` in its first slot xi."""
    z = -kernel.c * (xi - x) * (eta - y)
    return hyp0f1(2.0, z) * kernel.c * (y - eta)


def riemann_d2(kernel: RiemannKernel, xi: float, eta: float, x: float, y: float) -> float:
    """Partial derivative of `riemann` in its second slot eta."""
    z = -kernel.c * (xi - x) * (eta - y)
    return hyp0f1(2.0, z) * kernel.c * (x - xi)
