"""Truncated Taylor (jet) arithmetic in one real or complex variable.

Coefficients are stored in divided form ``c_m = f^(m)/m!`` so that
magnitudes stay tame up to order 8 and beyond; raw derivatives are
recovered on extraction by multiplying back the factorials.

Two containers are provided:

* ``Jet`` -- coefficients ``c_0..c_J`` of a function of one variable.
* ``BiJet`` -- a ``(J+1) x (J+1)`` array ``c_{a,b}`` representing
  ``d^a dbar^b / (a! b!)`` of a real-analytic function of one complex
  variable and its conjugate.

All arithmetic is exact (to the stored order) for polynomial inputs and
is dtype-generic: coefficients may be floats, complex numbers, or mpmath
``mpf``/``mpc`` values for the extended-precision paths.  The low-level
helpers operate on plain numpy arrays whose *trailing* axes are the jet
axes, so callers may batch many jets through one call by prepending
leading axes.
"""

from __future__ import annotations

import cmath
import math
from typing import Callable

import mpmath
import numpy as np

MAX_ORDER = 12


class SingularJetError(ZeroDivisionError):
    """Division by a jet whose constant term vanishes."""


class JetDomainError(ValueError):
    """log/pow of a jet whose constant term is outside the real-positive domain."""


class OrderMismatchError(ValueError):
    """Operands (or outer/inner of a composition) have incompatible orders."""


def _check_order(order: int) -> int:
    if not isinstance(order, (int, np.integer)) or order < 0:
        raise ValueError(f"jet order must be a non-negative integer, got {order!r}")
    if order > MAX_ORDER:
        raise ValueError(f"jet order {order} exceeds the supported maximum {MAX_ORDER}")
    return int(order)


def _is_mp(x) -> bool:
    return isinstance(x, (mpmath.mpf, mpmath.mpc))


def _exp_scalar(x):
    if _is_mp(x):
        return mpmath.exp(x)
    if isinstance(x, (complex, np.complexfloating)):
        return cmath.exp(x)
    return math.exp(x)


def _log_scalar(x):
    if _is_mp(x):
        return mpmath.log(x)
    if isinstance(x, (complex, np.complexfloating)):
        return cmath.log(x)
    return math.log(x)


def _pow_scalar(x, r):
    if _is_mp(x) or _is_mp(r):
        return mpmath.power(x, r)
    if isinstance(x, (complex, np.complexfloating)):
        return x ** r
    return float(x) ** r


def _as_coeff_array(values, order: int, ndim: int) -> np.ndarray:
    arr = np.asarray(values)
    expected = (order + 1,) * ndim
    if arr.shape != expected:
        raise ValueError(f"coefficient array has shape {arr.shape}, expected {expected}")
    if arr.dtype != object:
        arr = arr.astype(np.complex128) if np.iscomplexobj(arr) else arr.astype(np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("jet coefficients must be finite")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# low-level array kernels (trailing jet axes; leading axes broadcast)
# ---------------------------------------------------------------------------


def mul1(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated Cauchy product along the last axis."""
    J = a.shape[-1] - 1
    out = np.zeros(np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (J + 1,),
                   dtype=np.result_type(a, b))
    for i in range(J + 1):
        out[..., i:] = out[..., i:] + a[..., i, None] * b[..., : J + 1 - i]
    return out


def mul2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated 2-D convolution over the last two axes.

    Every entry ``(p, q)`` with ``p, q <= J`` of the result is the exact
    product coefficient: truncation never feeds back into the kept block.
    """
    J = a.shape[-1] - 1
    out = np.zeros(np.broadcast_shapes(a.shape[:-2], b.shape[:-2]) + (J + 1, J + 1),
                   dtype=np.result_type(a, b))
    for i in range(J + 1):
        for j in range(J + 1):
            aij = a[..., i, j]
            if a.ndim == 2 and aij == 0:
                continue
            out[..., i:, j:] = out[..., i:, j:] + aij[..., None, None] * b[..., : J + 1 - i, : J + 1 - j]
    return out


def _split_constant(a: np.ndarray, ndim: int):
    """Return (constant term, a with constant entry zeroed)."""
    idx = (Ellipsis,) + (0,) * ndim
    c0 = a[idx]
    if isinstance(c0, np.ndarray) and c0.ndim == 0:
        c0 = c0[()]  # unwrap 0-d array to a true scalar
    rest = a.copy()
    rest[idx] = 0 * c0
    return c0, rest


def series_apply(series, a: np.ndarray, ndim: int) -> np.ndarray:
    """Evaluate ``sum_m series[m] * a**m`` by Horner with truncated products.

    ``a`` must have zero constant term.  ``series`` is indexed by power and
    may be a 1-D array or list of scalars shared across any leading batch
    axes of ``a``.
    """
    mul = mul1 if ndim == 1 else mul2
    out = np.zeros_like(a)
    idx = (Ellipsis,) + (0,) * ndim
    out[idx] = series[-1]
    for cm in reversed(series[:-1]):
        out = mul(out, a)
        out[idx] = out[idx] + cm
    return out


def _map_constant(fn_scalar: Callable, fn_numpy: Callable, c0):
    """Apply a scalar function to the constant term(s), dtype-generic."""
    if np.ndim(c0) == 0:
        return fn_scalar(c0)
    if np.asarray(c0).dtype == object:
        return np.frompyfunc(fn_scalar, 1, 1)(c0)
    return fn_numpy(c0)


def _expand(scale, ndim: int):
    """Append jet axes to a batch of scalars for broadcasting."""
    if np.ndim(scale) == 0:
        return scale
    return scale[(Ellipsis,) + (None,) * ndim]


def _normalized_transcendental(kind: str, a: np.ndarray, ndim: int, exponent=None) -> np.ndarray:
    """exp/log/pow/reciprocal of a coefficient array, any dtype, batched.

    The series is taken long enough that every stored entry of a BiJet
    (total degree up to 2J) is exact; 1-D jets need only J+1 terms but
    the extra ones cost little.  Batched calls (leading axes on ``a``)
    skip the domain check on the constant term; the caller guarantees it.
    """
    c0, rest = _split_constant(a, ndim)
    J = a.shape[-1] - 1
    nterms = (2 * J if ndim == 2 else J) + 1
    one = 1 + 0 * (c0 if np.ndim(c0) == 0 else c0.flat[0])

    if kind == "exp":
        series = [one]
        for m in range(1, nterms):
            series.append(series[-1] / m)
        out = series_apply(series, rest, ndim)
        return out * _expand(_map_constant(_exp_scalar, np.exp, c0), ndim)

    if kind == "recip":
        if np.ndim(c0) == 0 and c0 == 0:
            raise SingularJetError("reciprocal of a jet with zero constant term")
        x = rest / _expand(c0, ndim)
        series = [one if m % 2 == 0 else -one for m in range(nterms)]
        return series_apply(series, x, ndim) / _expand(c0, ndim)

    # log and pow branch along the positive real axis
    if np.ndim(c0) == 0:
        c0r = complex(c0).real if not _is_mp(c0) else mpmath.re(c0)
        if not c0r > 0:
            raise JetDomainError(f"{kind} requires a positive constant term, got {c0!r}")
    x = rest / _expand(c0, ndim)
    idx = (Ellipsis,) + (0,) * ndim

    if kind == "log":
        series = [0 * one]
        for m in range(1, nterms):
            series.append((one if m % 2 == 1 else -one) / m)
        out = series_apply(series, x, ndim)
        out[idx] = out[idx] + _map_constant(_log_scalar, np.log, c0)
        return out

    if kind == "pow":
        r = exponent
        series = [one]
        for m in range(1, nterms):
            series.append(series[-1] * (r - (m - 1)) / m)
        out = series_apply(series, x, ndim)
        return out * _expand(_map_constant(lambda t: _pow_scalar(t, r), lambda t: t ** r, c0), ndim)

    raise ValueError(f"unknown transcendental {kind!r}")


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------


class Jet:
    """Truncated Taylor coefficients of a function of one variable.

    ``coeffs[m]`` holds ``f^(m)(x0)/m!``.  Instances are immutable.
    """

    __slots__ = ("order", "coeffs")
    _ndim = 1

    def __init__(self, order: int, coeffs):
        object.__setattr__(self, "order", _check_order(order))
        object.__setattr__(self, "coeffs", _as_coeff_array(coeffs, order, 1))

    def __setattr__(self, name, value):
        raise AttributeError("jets are immutable")

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, value, order: int) -> "Jet":
        dtype = object if _is_mp(value) else np.result_type(type(value), np.float64)
        c = np.zeros(order + 1, dtype=dtype)
        c[0] = value
        return cls(order, c)

    @classmethod
    def variable(cls, value, order: int) -> "Jet":
        """Jet of the identity map expanded at ``value``."""
        jet = cls.constant(value, order)
        c = jet.coeffs.copy()
        if order >= 1:
            c[1] = 1 + 0 * value
        return cls(order, c)

    # -- extraction ----------------------------------------------------
    def derivative(self, m: int):
        """Raw derivative ``f^(m)``, i.e. ``coeffs[m] * m!``."""
        if not 0 <= m <= self.order:
            raise ValueError(f"derivative order {m} outside 0..{self.order}")
        return self.coeffs[m] * math.factorial(m)

    def differentiate(self) -> "Jet":
        """Jet of f', one order lower."""
        if self.order == 0:
            raise OrderMismatchError("cannot differentiate an order-0 jet")
        c = np.array([(m + 1) * self.coeffs[m + 1] for m in range(self.order)], dtype=self.coeffs.dtype)
        return Jet(self.order - 1, c)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise OrderMismatchError(f"cannot extend order {self.order} jet to {order}")
        return Jet(order, self.coeffs[: order + 1])

    # -- arithmetic ----------------------------------------------------
    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.order != self.order:
                raise OrderMismatchError(f"jet orders differ: {self.order} vs {other.order}")
            return other
        return Jet.constant(other, self.order)

    def __add__(self, other):
        other = self._coerce(other)
        return Jet(self.order, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.order, -self.coeffs)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        return Jet(self.order, mul1(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other.coeffs[0] == 0:
            raise SingularJetError("division by a jet with zero constant term")
        return Jet(self.order, mul1(self.coeffs, _normalized_transcendental("recip", other.coeffs, 1)))

    def __rtruediv__(self, other):
        return Jet.constant(other, self.order) / self

    def exp(self) -> "Jet":
        return Jet(self.order, _normalized_transcendental("exp", self.coeffs, 1))

    def log(self) -> "Jet":
        return Jet(self.order, _normalized_transcendental("log", self.coeffs, 1))

    def pow(self, r) -> "Jet":
        return Jet(self.order, _normalized_transcendental("pow", self.coeffs, 1, exponent=r))

    def __repr__(self):
        return f"Jet(order={self.order}, coeffs={np.array2string(np.asarray(self.coeffs), precision=6)})"


class BiJet:
    """Taylor coefficients ``c_{a,b}`` in one complex variable and its conjugate.

    ``coeffs[a, b]`` holds ``d^a dbar^b F / (a! b!)`` at the expansion point.
    For jets of a real-valued function the array is Hermitian:
    ``c_{a,b} = conj(c_{b,a})``.
    """

    __slots__ = ("order", "coeffs")
    _ndim = 2

    def __init__(self, order: int, coeffs):
        object.__setattr__(self, "order", _check_order(order))
        object.__setattr__(self, "coeffs", _as_coeff_array(coeffs, order, 2))

    def __setattr__(self, name, value):
        raise AttributeError("jets are immutable")

    @classmethod
    def constant(cls, value, order: int) -> "BiJet":
        dtype = object if _is_mp(value) else np.result_type(type(value), np.float64)
        c = np.zeros((order + 1, order + 1), dtype=dtype)
        c[0, 0] = value
        return cls(order, c)

    @classmethod
    def variable(cls, value, order: int) -> "BiJet":
        """Jet of the map ``w -> value + w``, holomorphic in ``w``."""
        jet = cls.constant(value, order)
        c = jet.coeffs.copy()
        if order >= 1:
            c[1, 0] = 1 + 0 * value
        return cls(order, c)

    def conj(self) -> "BiJet":
        c = self.coeffs
        if c.dtype == object:
            cc = np.frompyfunc(mpmath.conj, 1, 1)(c.T).copy()
        else:
            cc = np.conj(c.T).copy()
        return BiJet(self.order, cc)

    def derivative(self, a: int, b: int):
        """Raw mixed derivative ``d^a dbar^b F``."""
        if not (0 <= a <= self.order and 0 <= b <= self.order):
            raise ValueError(f"derivative orders ({a},{b}) outside 0..{self.order}")
        return self.coeffs[a, b] * (math.factorial(a) * math.factorial(b))

    def hermitian_defect(self) -> float:
        c = self.coeffs
        if c.dtype == object:
            d = max(abs(complex(c[a, b] - mpmath.conj(c[b, a]))) for a in range(self.order + 1) for b in range(self.order + 1))
            return float(d)
        return float(np.max(np.abs(c - np.conj(c.T))))

    def _coerce(self, other) -> "BiJet":
        if isinstance(other, BiJet):
            if other.order != self.order:
                raise OrderMismatchError(f"jet orders differ: {self.order} vs {other.order}")
            return other
        return BiJet.constant(other, self.order)

    def __add__(self, other):
        other = self._coerce(other)
        return BiJet(self.order, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return BiJet(self.order, -self.coeffs)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        return BiJet(self.order, mul2(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other.coeffs[0, 0] == 0:
            raise SingularJetError("division by a jet with zero constant term")
        return BiJet(self.order, mul2(self.coeffs, _normalized_transcendental("recip", other.coeffs, 2)))

    def __rtruediv__(self, other):
        return BiJet.constant(other, self.order) / self

    def exp(self) -> "BiJet":
        return BiJet(self.order, _normalized_transcendental("exp", self.coeffs, 2))

    def log(self) -> "BiJet":
        return BiJet(self.order, _normalized_transcendental("log", self.coeffs, 2))

    def pow(self, r) -> "BiJet":
        return BiJet(self.order, _normalized_transcendental("pow", self.coeffs, 2, exponent=r))

    def __repr__(self):
        return f"BiJet(order={self.order})"


# ---------------------------------------------------------------------------
# functional API
# ---------------------------------------------------------------------------


def jet_arith(a, b, op: str):
    """Binary jet arithmetic: ``op`` in {'add', 'mul', 'div'}."""
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown op {op!r}; expected add, mul or div")


def jet_transcendental(a, fn: str, exponent=None):
    """Apply exp, log or pow(r) to a jet by truncated series composition."""
    if fn == "exp":
        return a.exp()
    if fn == "log":
        return a.log()
    if fn == "pow":
        if exponent is None:
            raise ValueError("pow requires an exponent")
        return a.pow(exponent)
    raise ValueError(f"unknown transcendental {fn!r}; expected exp, log or pow")


def compose(outer: Jet, inner):
    """Taylor coefficients of ``outer ∘ inner``.

    ``outer`` must be expanded at ``inner``'s constant term (the caller's
    responsibility; the expansion point itself is not stored).  The result
    has ``inner``'s shape and order.  Entries of total order up to
    ``outer.order`` are exact, so for a full-rectangle-exact ``BiJet``
    result of order J supply an outer jet of order ``2 J``.
    """
    if not isinstance(outer, Jet):
        raise TypeError("outer factor of a composition must be a 1-D Jet")
    if outer.order < inner.order:
        raise OrderMismatchError(
            f"outer order {outer.order} is below inner order {inner.order}")
    _, rest = _split_constant(inner.coeffs, inner._ndim)
    out = series_apply(outer.coeffs, rest, inner._ndim)
    return type(inner)(inner.order, out)
