"""Sparse polynomial kernels ``sum_k c_k x**a_k y**b_k``."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .operators import monomial_name

ROLES = ("aggregation", "breakage_rate", "breakage_birth", "stoichiometry", "growth", "generic")


def _clean(terms: dict) -> dict:
    return {k: float(v) for k, v in sorted(terms.items()) if v != 0}


@dataclass(frozen=True)
class KernelExpression:
    """Linear combination of monomials in ``(x, y)``.

    ``terms`` maps exponent pairs ``(a, b)`` to coefficients.
    """

    terms: dict = field(default_factory=dict)
    role: str = "generic"

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown kernel role {self.role!r}")
        cleaned = _clean({(int(a), int(b)): v for (a, b), v in dict(self.terms).items()})
        if not all(np.isfinite(v) for v in cleaned.values()):
            raise ValueError("kernel coefficients must be finite")
        if self.role in ("breakage_rate", "growth") and any(b for _, b in cleaned):
            raise ValueError(f"{self.role} kernels depend on x only")
        if self.role == "breakage_birth" and any(a for a, _ in cleaned):
            raise ValueError("breakage birth kernels depend on y only")
        object.__setattr__(self, "terms", cleaned)

    @classmethod
    def monomial(cls, a=0, b=0, coef=1.0, role="generic") -> "KernelExpression":
        return cls({(a, b): coef}, role)

    @classmethod
    def constant(cls, value, role="generic") -> "KernelExpression":
        return cls({(0, 0): value}, role)

    def with_role(self, role) -> "KernelExpression":
        return KernelExpression(self.terms, role)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __call__(self, x, y=None):
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast_shapes(x.shape, np.shape(y) if y is not None else ()))
        for (a, b), c in self.terms.items():
            term = c * x**a
            if b:
                if y is None:
                    raise ValueError("kernel depends on y")
                term = term * np.asarray(y, dtype=float) ** b
            out = out + term
        return out

    def __add__(self, other: "KernelExpression") -> "KernelExpression":
        merged = dict(self.terms)
        for k, v in other.terms.items():
            merged[k] = merged.get(k, 0.0) + v
        return KernelExpression(merged, self.role if self.role == other.role else "generic")

    def scale(self, factor: float) -> "KernelExpression":
        return KernelExpression({k: v * factor for k, v in self.terms.items()}, self.role)

    def swap(self) -> "KernelExpression":
        """Exchange the roles of ``x`` and ``y``."""
        return KernelExpression({(b, a): v for (a, b), v in self.terms.items()}, self.role)

    def is_symmetric(self, rtol=1e-9) -> bool:
        return self.isclose(self.swap(), rtol)

    def shift_x(self) -> "KernelExpression | None":
        """Substitute ``x -> x - y``; ``None`` if a negative power of x appears."""
        out: dict = {}
        for (a, b), c in self.terms.items():
            if a < 0:
                return None
            for r in range(a + 1):
                key = (r, b + a - r)
                out[key] = out.get(key, 0.0) + c * comb(a, r) * (-1) ** (a - r)
        return KernelExpression(out, self.role)

    def isclose(self, other: "KernelExpression", rtol=1e-9, atol=1e-12) -> bool:
        keys = set(self.terms) | set(other.terms)
        return all(
            np.isclose(self.terms.get(k, 0.0), other.terms.get(k, 0.0), rtol=rtol, atol=atol) for k in keys
        )

    def proportional_to(self, other: "KernelExpression", rtol=1e-6) -> float | None:
        """Factor ``c`` with ``self == c * other`` or ``None``."""
        if set(self.terms) != set(other.terms) or not self.terms:
            return None
        ratios = [self.terms[k] / other.terms[k] for k in self.terms]
        if np.allclose(ratios, ratios[0], rtol=rtol):
            return float(ratios[0])
        return None

    def divide_monomial(self, other: "KernelExpression") -> "KernelExpression | None":
        """Exact quotient when ``other`` is a single monomial, else ``None``."""
        if len(other.terms) != 1:
            return None
        ((oa, ob), oc), = other.terms.items()
        if oc == 0:
            return None
        return KernelExpression({(a - oa, b - ob): c / oc for (a, b), c in self.terms.items()})

    def in_variable(self, var: str) -> "KernelExpression":
        """Rename the single variable of a one-variable kernel to ``var``."""
        if var == "y" and all(b == 0 for _, b in self.terms):
            return KernelExpression({(0, a): c for (a, _), c in self.terms.items()})
        if var == "x" and all(a == 0 for a, _ in self.terms):
            return KernelExpression({(b, 0): c for (_, b), c in self.terms.items()})
        return self

    def integrate_x(self, upper_var="y") -> "KernelExpression | None":
        """``int_0^y f(x, y) dx`` for kernels with nonnegative powers of x."""
        out: dict = {}
        for (a, b), c in self.terms.items():
            if a < 0:
                return None
            key = (0, a + 1 + b)
            out[key] = out.get(key, 0.0) + c / (a + 1)
        return KernelExpression(out)

    def multiply_monomial(self, a=0, b=0, coef=1.0) -> "KernelExpression":
        return KernelExpression({(ka + a, kb + b): c * coef for (ka, kb), c in self.terms.items()}, self.role)

    def text(self, pretty=True, digits=4) -> str:
        if not self.terms:
            return "0"
        parts = []
        # highest degree first, x before y within a degree: "x + y", "xy - y^2"
        for (a, b), c in sorted(self.terms.items(), key=lambda kv: (-(kv[0][0] + kv[0][1]), -kv[0][0])):
            name = monomial_name(a, b, pretty=pretty)
            mag = abs(c)
            if name == "1":
                body = f"{mag:.{digits}g}"
            elif np.isclose(mag, 1.0, rtol=1e-12):
                body = name
            elif name.startswith("1/"):
                body = f"{mag:.{digits}g}{name[1:]}"
            else:
                body = f"{mag:.{digits}g}{name}" if pretty else f"{mag:.{digits}g}*{name}"
            parts.append(("-" if c < 0 else "+", body))
        first_sign, first = parts[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, body in parts[1:]:
            out += f" {sign} {body}"
        return out

    def __str__(self):
        return self.text()

    def to_dict(self) -> dict:
        return {"role": self.role, "terms": [[a, b, c] for (a, b), c in self.terms.items()]}

    @classmethod
    def from_dict(cls, data) -> "KernelExpression":
        return cls({(int(a), int(b)): float(c) for a, b, c in data["terms"]}, data.get("role", "generic"))
