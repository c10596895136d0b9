"""Truncated power-series arithmetic and Adomian polynomials.

Given a multiplier function N(u) = sum_s nu_s u^s and a finite expansion
v(tau) = sum_s v_s tau^s, the Adomian polynomial A_n(N; v_0..v_n) is the n-th
Taylor coefficient of N(v(tau)) at tau = 0.  The solver computes them by
truncated series composition; the explicit partition sum is kept as an
independent test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial
from typing import Callable

import numpy as np

__all__ = [
    "TruncatedSeries",
    "Nonlinearity",
    "series_mul",
    "series_compose_nonlinearity",
    "adomian_partition",
]

PARTITION_ORDER_CAP = 10


@dataclass(frozen=True)
class TruncatedSeries:
    """Coefficients c_0..c_K of a formal power series truncated at order K."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must form a non-empty 1-d array")
        if not np.all(np.isfinite(c)):
            raise ValueError("series coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __mul__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        return series_mul(self, other)


def series_mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """Cauchy product truncated at the smaller of the two orders."""
    k = min(a.order, b.order)
    out = np.zeros(k + 1)
    for i in range(k + 1):
        out[i] = a.coeffs[: i + 1] @ b.coeffs[i::-1]
    return TruncatedSeries(out)


def _mul_trunc_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Cauchy product of coefficient stacks shaped (K+1, ...), truncated at K.
    out = np.zeros_like(a)
    k = a.shape[0] - 1
    for i in range(k + 1):
        out[i:] += a[i] * b[: k + 1 - i]
    return out


def compose_with_tail(taylor: np.ndarray, tail: np.ndarray) -> np.ndarray:
    """Coefficients of N(v(tau)) from Taylor rows of N at v_0 and the tail v - v_0.

    Both stacks are shaped (K+1, ...) and may carry trailing point axes;
    `tail[0]` must be zero.  Horner evaluation in the tail keeps every
    intermediate truncated at order K.
    """
    k = taylor.shape[0] - 1
    res = np.zeros_like(taylor)
    res[0] = taylor[k]
    for j in range(k - 1, -1, -1):
        res = _mul_trunc_arrays(res, tail)
        res[0] += taylor[j]
    return res


class Nonlinearity:
    """The multiplier N(u) with value, derivative, and recentered Taylor data.

    `series_coeffs` are the global coefficients nu_s of N(u) = sum nu_s u^s.
    `eval` and `deriv` are defined through `taylor_at`, so the three views can
    never disagree.  A preset may install an analytic `taylor_fn(center,
    order)`; otherwise the coefficients are treated as a polynomial and
    recentered exactly by binomial re-expansion.
    """

    def __init__(self, series_coeffs, taylor_fn: Callable | None = None, name: str = "custom"):
        nu = np.atleast_1d(np.asarray(series_coeffs, dtype=float))
        if nu.ndim != 1 or nu.size == 0:
            raise ValueError("need at least the constant coefficient nu_0")
        if not np.all(np.isfinite(nu)):
            raise ValueError("multiplier coefficients must be finite")
        self.series_coeffs = nu
        self._taylor_fn = taylor_fn
        self.name = name

    @classmethod
    def from_series(cls, nu, name: str = "series") -> "Nonlinearity":
        """Polynomial multiplier defined by its global coefficients."""
        return cls(nu, taylor_fn=None, name=name)

    def taylor_at(self, center, order: int):
        """Taylor coefficients a_0..a_order of N around `center`.

        `center` may be a scalar or an array; the result gains a leading
        order axis.
        """
        if order < 0:
            raise ValueError(f"order must be non-negative, got {order}")
        if self._taylor_fn is not None:
            out = np.asarray(self._taylor_fn(center, order), dtype=float)
        else:
            out = _recenter_poly(self.series_coeffs, center, order)
        expect = (order + 1,) + np.shape(center)
        if out.shape != expect:
            raise ValueError(
                f"taylor_at must supply {order + 1} coefficient rows, got shape {out.shape}"
            )
        return out

    def eval(self, u):
        """N(u); safe at removable singularities of closed forms."""
        return self.taylor_at(u, 0)[0]

    def deriv(self, u):
        """N'(u)."""
        return self.taylor_at(u, 1)[1]


def _recenter_poly(nu: np.ndarray, center, order: int) -> np.ndarray:
    # a_k = sum_{s >= k} nu_s C(s, k) center^(s-k); exact polynomial algebra.
    t = np.asarray(center, dtype=float)
    deg = len(nu) - 1
    out = np.zeros((order + 1,) + t.shape)
    for k in range(min(order, deg) + 1):
        acc = np.zeros_like(t)
        for s in range(deg, k - 1, -1):
            acc = acc * t + nu[s] * comb(s, k)
        out[k] = acc
    return out


def series_compose_nonlinearity(nl: Nonlinearity, v: TruncatedSeries) -> TruncatedSeries:
    """Coefficients of N(v(tau)) truncated at v's order.

    Coefficient n is the Adomian polynomial A_n(N; v_0..v_n).
    """
    k = v.order
    taylor = nl.taylor_at(float(v.coeffs[0]), k)
    tail = v.coeffs.copy()
    tail[0] = 0.0
    return TruncatedSeries(compose_with_tail(taylor, tail))


def adomian_partition(nl: Nonlinearity, v) -> float:
    """A_n(N; v_0..v_n) by direct enumeration of the defining partition sum.

    The sum runs over integer tuples alpha_1 >= ... >= alpha_n >= alpha_{n+1} = 0
    with alpha_1 + ... + alpha_n = n; each contributes
    N^(alpha_1)(v_0) * prod_i v_i^(alpha_i - alpha_{i+1}) / (alpha_i - alpha_{i+1})!.
    Kept deliberately independent of the composition path; n is capped at 10
    because enumeration is the point, not speed.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    n = len(v) - 1
    if n > PARTITION_ORDER_CAP:
        raise ValueError(f"partition enumeration supports n <= {PARTITION_ORDER_CAP}, got n={n}")
    if n == 0:
        return float(nl.eval(v[0]))
    taylor = nl.taylor_at(float(v[0]), n)
    total = 0.0
    for parts in _partitions(n, n):
        alphas = list(parts) + [0] * (n + 1 - len(parts))
        a1 = alphas[0]
        term = taylor[a1] * factorial(a1)
        for i in range(n):
            d = alphas[i] - alphas[i + 1]
            if d:
                term *= v[i + 1] ** d / factorial(d)
        total += term
    return float(total)


def _partitions(n: int, max_part: int):
    # Non-increasing positive integer tuples summing to n, parts <= max_part.
    if n == 0:
        yield ()
        return
    for first in range(min(n, max_part), 0, -1):
        for rest in _partitions(n - first, first):
            yield (first,) + rest
