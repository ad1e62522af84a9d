"""Monomials and posynomials over named positive variables.

Expressions are immutable and built with ordinary Python operators::

    >>> x, y = variable("x"), variable("y")
    >>> p = x**-1 + y**2
    >>> p.eval({"x": 2.0, "y": 3.0})
    9.5

Terms with identical exponent vectors are merged on construction, so
repeated additions do not grow the term list.
"""
from __future__ import annotations

import math
from numbers import Real
from typing import Iterable, Mapping

import numpy as np

from .errors import ContractError

__all__ = [
    "Posynomial",
    "Monomial",
    "variable",
    "constant",
    "combine",
    "log_transform",
    "LogPosynomial",
]


def _key(exponents):
    items = []
    for name, e in exponents.items() if isinstance(exponents, Mapping) else exponents:
        e = float(e)
        if not math.isfinite(e):
            raise ContractError(f"non-finite exponent for {name!r}")
        if e != 0.0:
            items.append((str(name), e))
    items.sort()
    # duplicates only arise from raw iterables; fold them
    merged = []
    for name, e in items:
        if merged and merged[-1][0] == name:
            merged[-1] = (name, merged[-1][1] + e)
        else:
            merged.append((name, e))
    return tuple((n, e) for n, e in merged if e != 0.0)


def _mul_keys(k1, k2):
    out = dict(k1)
    for name, e in k2:
        out[name] = out.get(name, 0.0) + e
    return tuple(sorted((n, e) for n, e in out.items() if e != 0.0))


def _make(terms):
    """Build a Posynomial (or Monomial, for a single term) from (coef, key) pairs."""
    merged = {}
    for c, k in terms:
        merged[k] = merged.get(k, 0.0) + c
    items = tuple((c, k) for k, c in merged.items())
    if len(items) == 1:
        return Monomial._from_term(*items[0])
    return Posynomial._from_terms(items)


class Posynomial:
    """Sum of monomials with positive coefficients.

    Parameters
    ----------
    terms : iterable of Monomial
        Non-empty collection of monomial terms.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Iterable["Monomial"]):
        terms = list(terms)
        if not terms:
            raise ContractError("a posynomial needs at least one term")
        pairs = []
        for t in terms:
            if not isinstance(t, Posynomial):
                raise TypeError(f"posynomial terms must be monomials, got {type(t).__name__}")
            pairs.extend(t._terms)
        merged = {}
        for c, k in pairs:
            merged[k] = merged.get(k, 0.0) + c
        self._terms = tuple((c, k) for k, c in merged.items())

    @classmethod
    def _from_terms(cls, terms):
        obj = object.__new__(cls)
        obj._terms = tuple(terms)
        return obj

    # -- inspection ---------------------------------------------------------
    @property
    def terms(self):
        """Tuple of the monomial terms."""
        return tuple(Monomial._from_term(c, k) for c, k in self._terms)

    @property
    def raw_terms(self):
        """Tuple of ``(coefficient, ((name, exponent), ...))`` pairs."""
        return self._terms

    @property
    def variables(self):
        return frozenset(name for _, k in self._terms for name, _ in k)

    @property
    def is_monomial(self):
        return len(self._terms) == 1

    def __len__(self):
        return len(self._terms)

    def eval(self, x: Mapping[str, float]) -> float:
        """Value at the positive point ``x`` (mapping of variable name to value)."""
        total = 0.0
        for c, k in self._terms:
            val = c
            for name, e in k:
                try:
                    xi = x[name]
                except KeyError:
                    raise ContractError(f"variable {name!r} is unbound") from None
                if not xi > 0:
                    raise ContractError(f"variable {name!r} must be positive, got {xi}")
                val *= xi**e
            total += val
        return total

    __call__ = eval

    def to_arrays(self, index: Mapping[str, int], n_vars: int | None = None):
        """Exponent matrix and log-coefficients in the variable order ``index``.

        Returns
        -------
        A : ndarray, shape (n_terms, n_vars)
        b : ndarray, shape (n_terms,)
            ``log`` of the coefficients.
        """
        if n_vars is None:
            n_vars = len(index)
        A = np.zeros((len(self._terms), n_vars))
        b = np.empty(len(self._terms))
        for t, (c, k) in enumerate(self._terms):
            b[t] = math.log(c)
            for name, e in k:
                try:
                    A[t, index[name]] = e
                except KeyError:
                    raise ContractError(f"variable {name!r} is not declared") from None
        return A, b

    # -- arithmetic ---------------------------------------------------------
    @staticmethod
    def _coerce(other):
        if isinstance(other, Posynomial):
            return other
        if isinstance(other, Real) and not isinstance(other, bool):
            return constant(float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return _make(self._terms + other._terms)

    __radd__ = __add__

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return _make((c1 * c2, _mul_keys(k1, k2)) for c1, k1 in self._terms for c2, k2 in other._terms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if not other.is_monomial:
            raise ContractError("a posynomial can only be divided by a monomial")
        return self * Monomial._from_term(*other._terms[0]) ** -1

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other / self

    def __pow__(self, k):
        if isinstance(k, int) and k >= 1:
            out = self
            for _ in range(k - 1):
                out = out * self
            return out
        raise ContractError("a posynomial can only be raised to a positive integer power")

    # -- comparison / display ----------------------------------------------
    def _canonical(self):
        return tuple(sorted((k, c) for c, k in self._terms))

    def __eq__(self, other):
        if not isinstance(other, Posynomial):
            return NotImplemented
        return self._canonical() == other._canonical()

    def __hash__(self):
        return hash(self._canonical())

    def __repr__(self):
        parts = []
        for k, c in self._canonical():
            factors = [f"{c:g}"] + [n if e == 1 else f"{n}^{e:g}" for n, e in k]
            parts.append("*".join(factors))
        return " + ".join(parts)


class Monomial(Posynomial):
    """Single term ``c * prod(x_i ** b_i)`` with ``c > 0``."""

    __slots__ = ()

    def __init__(self, coefficient: float = 1.0, exponents: Mapping[str, float] | None = None):
        coefficient = float(coefficient)
        if not (coefficient > 0 and math.isfinite(coefficient)):
            raise ContractError(f"monomial coefficient must be positive and finite, got {coefficient}")
        self._terms = ((coefficient, _key(exponents or {})),)

    @classmethod
    def _from_term(cls, c, k):
        if not c > 0:
            raise ContractError(f"monomial coefficient must be positive, got {c}")
        obj = object.__new__(cls)
        obj._terms = ((c, k),)
        return obj

    @property
    def coefficient(self) -> float:
        return self._terms[0][0]

    @property
    def exponents(self) -> dict:
        return dict(self._terms[0][1])

    def __pow__(self, a):
        if not isinstance(a, Real):
            return NotImplemented
        a = float(a)
        c, k = self._terms[0]
        return Monomial._from_term(c**a, tuple((n, e * a) for n, e in k if e * a != 0.0))


def variable(name: str) -> Monomial:
    return Monomial(1.0, {name: 1.0})


def constant(c: float) -> Monomial:
    return Monomial(c)


def combine(a, b, op: str):
    """Combine two posynomials with ``op`` in ``{"add", "mul", "div_by_monomial"}``."""
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "div_by_monomial":
        b = Posynomial._coerce(b)
        if not b.is_monomial:
            raise ContractError("div_by_monomial requires a single-monomial divisor")
        return a / b
    raise ValueError(f"unknown op {op!r}")


class LogPosynomial:
    """``y -> log(p(exp(y)))``, convex in ``y``.

    Evaluated as a log-sum-exp of affine functions ``A y + b`` with a
    max-shift; a single-term posynomial is the affine function itself.
    """

    def __init__(self, A, b, variables):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.variables = tuple(variables)
        self.affine = self.A.shape[0] == 1

    def _weights(self, y):
        z = self.A @ y + self.b
        if self.affine:
            return z[0], np.ones(1)
        zmax = z.max()
        e = np.exp(z - zmax)
        s = e.sum()
        return zmax + math.log(s), e / s

    def value(self, y):
        return float(self._weights(np.asarray(y, dtype=float))[0])

    __call__ = value

    def grad(self, y):
        _, p = self._weights(np.asarray(y, dtype=float))
        return self.A.T @ p

    def hess(self, y):
        if self.affine:
            n = self.A.shape[1]
            return np.zeros((n, n))
        _, p = self._weights(np.asarray(y, dtype=float))
        g = self.A.T @ p
        return (self.A.T * p) @ self.A - np.outer(g, g)


def log_transform(p: Posynomial, variables: Iterable[str] | None = None) -> LogPosynomial:
    """Log-space form of ``p`` over ``variables`` (default: sorted names in ``p``)."""
    if variables is None:
        variables = sorted(p.variables)
    variables = list(variables)
    index = {name: i for i, name in enumerate(variables)}
    A, b = p.to_arrays(index, len(variables))
    return LogPosynomial(A, b, variables)
