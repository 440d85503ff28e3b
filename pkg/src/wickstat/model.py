"""Model parameters for the driven fractional-heat family on the torus.

A model is the equation

    d/dt u + (1 - Laplacian)^{sigma/2} u + F(u) = <grad>^m (white noise),
    F(u) = N_0(grad) prod_{i=1..k} N_i(grad) u,

specified by the dimension d, dissipation exponent sigma, nonlinearity
degree k, and the multiplier exponents (m, n_0, .., n_k).  By default the
multipliers are bracket powers N_i = <grad>^{n_i} and the noise amplitude
is M = <grad>^m; each can be overridden by a general symbol table as long
as the symbol satisfies the reality condition a(-l) = conj(a(l)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fourier import multiplier_weight

# Symbols are serializable tuples: ("power", p) for <l>^p, ("constant", v)
# for the constant v, ("i_component", axis) for i*l[axis].  Callables taking
# a (P, d) point array are accepted programmatically but do not serialize.


def evaluate_symbol(symbol, points: np.ndarray) -> np.ndarray:
    """Evaluate a multiplier symbol at lattice points (last axis = coords)."""
    if callable(symbol):
        return np.asarray(symbol(points), dtype=np.complex128)
    kind = symbol[0]
    if kind == "power":
        return multiplier_weight(points, float(symbol[1])).astype(np.complex128)
    if kind == "constant":
        value = float(symbol[1])
        return np.full(np.asarray(points).shape[:-1], value, dtype=np.complex128)
    if kind == "i_component":
        axis = int(symbol[1])
        return 1j * np.asarray(points, dtype=np.float64)[..., axis]
    raise ValueError(f"unknown symbol kind {kind!r}")


def canonical_symbol(symbol):
    """Normalize a config-supplied symbol (list or tuple) to a tuple spec."""
    if symbol is None or callable(symbol):
        return symbol
    kind, *args = symbol
    if kind == "power":
        return ("power", float(args[0]))
    if kind == "constant":
        value = float(args[0])
        return ("constant", value)
    if kind == "i_component":
        return ("i_component", int(args[0]))
    raise ValueError(f"unknown symbol kind {kind!r}")


def symbol_is_real_operator(symbol, d: int) -> bool:
    """Check a(-l) = conj(a(l)) on a small probe lattice."""
    probe = np.stack(
        np.meshgrid(*([np.arange(-3, 4)] * d), indexing="ij"), axis=-1
    ).reshape(-1, d)
    vals = evaluate_symbol(symbol, probe)
    mirrored = evaluate_symbol(symbol, -probe)
    return bool(np.allclose(mirrored, np.conj(vals), atol=1e-12))


@dataclass(frozen=True)
class ModelParams:
    """One equation of the family; see the module docstring."""

    d: int
    sigma: float
    k: int
    m: float = 0.0
    n0: float = 0.0
    n: tuple = ()
    noise_symbol: object = None  # M; default ("power", m)
    outer_symbol: object = None  # N_0; default ("power", n0)
    factor_symbols: object = None  # (N_1 .. N_k); default ("power", n_i)
    wick_closable: object = None  # None -> family default

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2, or 3, got {self.d}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not isinstance(self.k, int) or self.k < 1:
            raise ValueError(f"nonlinearity degree must be an integer >= 1, got {self.k}")
        n = tuple(float(v) for v in self.n) if self.n else (0.0,) * self.k
        if len(n) != self.k:
            raise ValueError(f"need {self.k} factor exponents, got {len(n)}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "noise_symbol", canonical_symbol(self.noise_symbol))
        object.__setattr__(self, "outer_symbol", canonical_symbol(self.outer_symbol))
        if self.factor_symbols is not None:
            syms = tuple(canonical_symbol(s) for s in self.factor_symbols)
            if len(syms) != self.k:
                raise ValueError(f"need {self.k} factor symbols, got {len(syms)}")
            object.__setattr__(self, "factor_symbols", syms)
        for sym in self.all_symbols():
            if sym is not None and not symbol_is_real_operator(sym, self.d):
                raise ValueError("multiplier symbol violates a(-l) = conj(a(l))")

    def all_symbols(self):
        out = [self.noise_symbol, self.outer_symbol]
        if self.factor_symbols is not None:
            out.extend(self.factor_symbols)
        return out

    @property
    def has_general_multipliers(self) -> bool:
        return any(s is not None for s in self.all_symbols())

    # -- multiplier tables ---------------------------------------------------

    def noise_weight_sq(self, points) -> np.ndarray:
        """|M(l)|^2; the stationary mode variance is this times <l>^{-sigma}."""
        if self.noise_symbol is None:
            return multiplier_weight(points, 2.0 * self.m)
        return np.abs(evaluate_symbol(self.noise_symbol, points)) ** 2

    def outer_weights(self, points) -> np.ndarray:
        """N_0(l) applied after the k-fold product."""
        if self.outer_symbol is None:
            return multiplier_weight(points, self.n0).astype(np.complex128)
        return evaluate_symbol(self.outer_symbol, points)

    def factor_weights(self, i: int, points) -> np.ndarray:
        """N_i(l) applied to the i-th factor, i in 0..k-1."""
        if self.factor_symbols is None:
            return multiplier_weight(points, self.n[i]).astype(np.complex128)
        return evaluate_symbol(self.factor_symbols[i], points)

    @property
    def simulable(self) -> bool:
        """Whether first-order (Wick) renormalization closes the equation.

        Explicit override wins; the family default enables the d=1 models
        and the d=2, sigma=2 case, where no higher-order counterterms arise
        at desk scale.
        """
        if self.wick_closable is not None:
            return bool(self.wick_closable)
        return self.d == 1 or (self.d == 2 and self.sigma == 2.0)

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        def enc(sym):
            if sym is None:
                return None
            if callable(sym):
                raise TypeError("callable multiplier symbols do not serialize")
            return list(sym)

        return {
            "d": self.d,
            "sigma": self.sigma,
            "k": self.k,
            "m": self.m,
            "n0": self.n0,
            "n": list(self.n),
            "noise_symbol": enc(self.noise_symbol),
            "outer_symbol": enc(self.outer_symbol),
            "factor_symbols": None
            if self.factor_symbols is None
            else [enc(s) for s in self.factor_symbols],
            "wick_closable": self.wick_closable,
        }

    @staticmethod
    def from_dict(data: dict) -> "ModelParams":
        data = dict(data)
        return ModelParams(
            d=int(data["d"]),
            sigma=float(data["sigma"]),
            k=int(data["k"]),
            m=float(data.get("m", 0.0)),
            n0=float(data.get("n0", 0.0)),
            n=tuple(data.get("n") or ()),
            noise_symbol=data.get("noise_symbol"),
            outer_symbol=data.get("outer_symbol"),
            factor_symbols=data.get("factor_symbols"),
            wick_closable=data.get("wick_closable"),
        )
