"""Model constants, coefficient fields and the global-existence / persistence hypotheses.

Coefficients use the separable sinusoid family

    c(t, x) = mean + time_amp * sin(time_freq * t + time_phase)
                   + space_amp * cos(space_mode * pi * x / L)

which covers constant, time-periodic and space-heterogeneous environments and
has closed-form ranges, so every hypothesis is checked against exact bounds.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BoundsViolation, InvalidSpec

COEFFICIENT_NAMES = ("a0", "a1", "a2", "b0", "b1", "b2")


def _finite(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise InvalidSpec(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class ModelConstants:
    d1: float
    d2: float
    d3: float
    chi1: float
    chi2: float
    k: float
    l: float
    lam: float

    def __post_init__(self):
        for name in ("d1", "d2", "d3", "lam"):
            value = _finite(name, getattr(self, name))
            if value <= 0.0:
                raise InvalidSpec(f"{name} must be strictly positive, got {value!r}")
            object.__setattr__(self, name, value)
        for name in ("chi1", "chi2", "k", "l"):
            value = _finite(name, getattr(self, name))
            if value < 0.0:
                raise InvalidSpec(f"{name} must be nonnegative, got {value!r}")
            object.__setattr__(self, name, value)

    # Chemotactic coupling ratios used throughout: k*chi1/d3 etc.
    @property
    def kappa1(self) -> float:
        return self.k * self.chi1 / self.d3

    @property
    def kappa2(self) -> float:
        return self.k * self.chi2 / self.d3

    @property
    def ell1(self) -> float:
        return self.l * self.chi1 / self.d3

    @property
    def ell2(self) -> float:
        return self.l * self.chi2 / self.d3


@dataclass(frozen=True)
class CoefficientField:
    """Positive coefficient c(t, x) with declared global bounds.

    ``inf`` / ``sup`` default to the conservative envelope
    ``mean -/+ (|time_amp| + |space_amp|)``.
    """

    mean: float
    time_amp: float = 0.0
    time_freq: float = 0.0
    time_phase: float = 0.0
    space_amp: float = 0.0
    space_mode: int = 0
    inf: Optional[float] = None
    sup: Optional[float] = None

    def __post_init__(self):
        for name in ("mean", "time_amp", "time_freq", "time_phase", "space_amp"):
            object.__setattr__(self, name, _finite(name, getattr(self, name)))
        mode = self.space_mode
        if isinstance(mode, float) and mode.is_integer():
            mode = int(mode)
        if not isinstance(mode, (int, np.integer)) or isinstance(mode, bool) or mode < 0:
            raise InvalidSpec(f"space_mode must be a nonnegative integer, got {self.space_mode!r}")
        object.__setattr__(self, "space_mode", int(mode))
        lo, hi = self.envelope()
        inf = lo if self.inf is None else _finite("inf", self.inf)
        sup = hi if self.sup is None else _finite("sup", self.sup)
        if not (0.0 < inf <= sup):
            raise InvalidSpec(f"coefficient bounds need 0 < inf <= sup, got [{inf!r}, {sup!r}]")
        object.__setattr__(self, "inf", inf)
        object.__setattr__(self, "sup", sup)

    @classmethod
    def constant(cls, value: float) -> "CoefficientField":
        return cls(mean=value)

    def envelope(self) -> tuple[float, float]:
        """Conservative analytic envelope mean -/+ (|time_amp| + |space_amp|)."""
        spread = abs(self.time_amp) + abs(self.space_amp)
        return self.mean - spread, self.mean + spread

    def exact_range(self) -> tuple[float, float]:
        """Exact inf/sup of c over t in R and x in [0, L]."""
        if self.time_freq == 0.0:
            c = self.time_amp * math.sin(self.time_phase)
            t_lo = t_hi = c
        else:
            t_lo, t_hi = -abs(self.time_amp), abs(self.time_amp)
        s_lo, s_hi = self._space_range()
        return self.mean + t_lo + s_lo, self.mean + t_hi + s_hi

    def _space_range(self):
        if self.space_mode == 0:
            return self.space_amp, self.space_amp
        return -abs(self.space_amp), abs(self.space_amp)

    @property
    def is_constant(self) -> bool:
        return self.inf == self.sup

    @property
    def is_space_independent(self) -> bool:
        return self.space_amp == 0.0 or self.space_mode == 0

    @property
    def is_time_independent(self) -> bool:
        return self.time_amp == 0.0 or self.time_freq == 0.0

    def time_term(self, t):
        return self.time_amp * np.sin(self.time_freq * np.asarray(t, dtype=float) + self.time_phase)

    def __call__(self, t, x=0.0, length: float = 1.0):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        space = self.space_amp * np.cos(self.space_mode * math.pi * x / length)
        out = self.mean + self.time_term(t) + space
        return out if out.ndim else float(out)

    def inf_at(self, t):
        """inf over x of c(t, x); exact for the cosine profile."""
        return self.mean + self.time_term(t) + self._space_range()[0]

    def sup_at(self, t):
        return self.mean + self.time_term(t) + self._space_range()[1]

    def period(self) -> Optional[float]:
        if self.is_time_independent:
            return None
        return 2.0 * math.pi / abs(self.time_freq)


@dataclass(frozen=True)
class ModelSpec:
    constants: ModelConstants
    a0: CoefficientField
    a1: CoefficientField
    a2: CoefficientField
    b0: CoefficientField
    b1: CoefficientField
    b2: CoefficientField
    length: float = 1.0

    def __post_init__(self):
        if not isinstance(self.constants, ModelConstants):
            raise InvalidSpec("constants must be a ModelConstants")
        length = _finite("length", self.length)
        if length <= 0.0:
            raise InvalidSpec(f"domain length must be positive, got {length!r}")
        object.__setattr__(self, "length", length)
        for name in COEFFICIENT_NAMES:
            fld = getattr(self, name)
            if not isinstance(fld, CoefficientField):
                raise InvalidSpec(f"{name} must be a CoefficientField")
            lo, hi = fld.exact_range()
            slack = 1e-14 * max(abs(lo), abs(hi))
            if lo < fld.inf - slack or hi > fld.sup + slack:
                raise InvalidSpec(
                    f"{name}: range [{lo!r}, {hi!r}] not contained in declared [{fld.inf!r}, {fld.sup!r}]"
                )

    def fields(self) -> dict[str, CoefficientField]:
        return {name: getattr(self, name) for name in COEFFICIENT_NAMES}

    @property
    def is_space_independent(self) -> bool:
        return all(f.is_space_independent for f in self.fields().values())

    @property
    def is_time_independent(self) -> bool:
        return all(f.is_time_independent for f in self.fields().values())

    @property
    def is_constant(self) -> bool:
        return all(f.is_constant for f in self.fields().values())

    def periods(self) -> list[float]:
        return [p for p in (f.period() for f in self.fields().values()) if p is not None]


def constant_spec(a0, a1, a2, b0, b1, b2, *, d1=1.0, d2=1.0, d3=1.0, chi1=0.0, chi2=0.0,
                  k=1.0, l=1.0, lam=1.0, length=1.0) -> ModelSpec:
    """Spec with all six coefficients constant."""
    c = CoefficientField.constant
    return ModelSpec(
        ModelConstants(d1, d2, d3, chi1, chi2, k, l, lam),
        c(a0), c(a1), c(a2), c(b0), c(b1), c(b2), length=length,
    )


def band_spec(a0, a1, a2, b0, b1, b2, realize: str = "space", **constants) -> ModelSpec:
    """Spec whose coefficients are given as (inf, sup) pairs.

    Each band is swept either by a cos(pi x / L) profile (``realize="space"``)
    or by sin(t) (``realize="time"``), so the declared bounds are exact.
    """
    if realize not in ("space", "time"):
        raise ValueError(f"realize must be 'space' or 'time', got {realize!r}")
    fields = []
    for lo, hi in (a0, a1, a2, b0, b1, b2):
        lo, hi = float(lo), float(hi)
        mean, amp = 0.5 * (lo + hi), 0.5 * (hi - lo)
        if realize == "space":
            fld = CoefficientField(mean=mean, space_amp=amp, space_mode=1 if hi > lo else 0,
                                   inf=lo, sup=hi)
        else:
            fld = CoefficientField(mean=mean, time_amp=amp, time_freq=1.0 if hi > lo else 0.0,
                                   inf=lo, sup=hi)
        fields.append(fld)
    length = constants.pop("length", 1.0)
    defaults = dict(d1=1.0, d2=1.0, d3=1.0, chi1=0.0, chi2=0.0, k=1.0, l=1.0, lam=1.0)
    defaults.update(constants)
    return ModelSpec(ModelConstants(**defaults), *fields, length=length)


# ---------------------------------------------------------------------------
# derived bounds


@dataclass(frozen=True)
class UltimateBounds:
    """Ultimate upper bounds; ``None`` marks a bound whose guard fails."""

    A_bar_1: Optional[float]
    A_bar_2: Optional[float]
    B_bar_1: Optional[float]
    B_bar_2: Optional[float]


def derive_bounds(spec: ModelSpec) -> UltimateBounds:
    c = spec.constants
    a0s, a1i = spec.a0.sup, spec.a1.inf
    b0s, b2i = spec.b0.sup, spec.b2.inf
    den1 = a1i - c.kappa1
    den2 = b2i - c.ell2
    A1 = a0s / den1 if den1 > 0.0 else None
    A2 = b0s / den2 if den2 > 0.0 else None
    B1 = B2 = None
    det = den1 * den2 - c.kappa2 * c.ell1
    if den1 > 0.0 and den2 > 0.0 and det > 0.0:
        B1 = (a0s * den2 + c.ell1 * b0s) / det
        B2 = (b0s * den1 + c.kappa2 * a0s) / det
    return UltimateBounds(A1, A2, B1, B2)


# ---------------------------------------------------------------------------
# hypotheses


@dataclass(frozen=True)
class HypothesisReport:
    h1: bool
    h2: bool
    h3: bool
    h4: bool
    h5: bool
    h6: bool
    h7: Optional[bool]  # None: not applicable (space-dependent coefficients)
    cond_1_5: bool
    A_bar_1: Optional[float]
    A_bar_2: Optional[float]
    B_bar_1: Optional[float]
    B_bar_2: Optional[float]
    margins: dict = field(default_factory=dict)

    def verdicts(self) -> dict:
        return {name: getattr(self, name)
                for name in ("h1", "h2", "h3", "h4", "h5", "h6", "h7", "cond_1_5")}


def _inf_of_difference(f: CoefficientField, g: CoefficientField) -> float:
    """inf over t of f(t) - g(t) for space-independent fields.

    Exact when the two time sinusoids share a frequency (phasor sum) or when
    at most one is non-constant; otherwise returns the lower envelope, which
    is the exact infimum for incommensurate frequencies and a lower bound in
    general.
    """
    const = f.mean - g.mean + f._space_range()[0] - g._space_range()[0]
    waves = []
    for sign, h in ((1.0, f), (-1.0, g)):
        if h.time_amp == 0.0:
            continue
        if h.time_freq == 0.0:
            const += sign * h.time_amp * math.sin(h.time_phase)
        else:
            waves.append((sign * h.time_amp, h.time_freq, h.time_phase))
    if not waves:
        return const
    if len(waves) == 2 and waves[0][1] == waves[1][1]:
        amp = abs(waves[0][0] * cmath.exp(1j * waves[0][2]) + waves[1][0] * cmath.exp(1j * waves[1][2]))
        return const - amp
    return const - sum(abs(w[0]) for w in waves)


def check_hypotheses(spec: ModelSpec) -> HypothesisReport:
    c = spec.constants
    k1, k2, l1, l2 = c.kappa1, c.kappa2, c.ell1, c.ell2
    a0i, a0s = spec.a0.inf, spec.a0.sup
    a1i = spec.a1.inf
    a2i, a2s = spec.a2.inf, spec.a2.sup
    b0i, b0s = spec.b0.inf, spec.b0.sup
    b1i, b1s = spec.b1.inf, spec.b1.sup
    b2i = spec.b2.inf
    bounds = derive_bounds(spec)
    A1, A2, B1, B2 = bounds.A_bar_1, bounds.A_bar_2, bounds.B_bar_1, bounds.B_bar_2
    m = {}

    m["h1.a1"] = a1i - k1
    m["h1.a2"] = a2i - l1
    m["h1.b1"] = b1i - k2
    m["h1.b2"] = b2i - l2
    h1 = m["h1.a1"] > 0 and m["h1.a2"] >= 0 and m["h1.b1"] >= 0 and m["h1.b2"] > 0

    m["h2.a1"] = a1i - k1
    m["h2.b2"] = b2i - l2
    m["h2.det"] = (a1i - k1) * (b2i - l2) - k2 * l1
    h2 = m["h2.a1"] > 0 and m["h2.b2"] > 0 and m["h2.det"] > 0

    m["cond_1_5.a"] = a0i - a2s * b0s / b2i
    m["cond_1_5.b"] = b0i - a0s * b1s / a1i
    cond = m["cond_1_5.a"] > 0 and m["cond_1_5.b"] > 0

    h3 = h5 = False
    if A1 is not None and A2 is not None:
        m["h3.a"] = a0i - a2s * A2
        m["h3.b"] = b0i - b1s * A1
        h3 = h1 and m["h3.a"] > 0 and m["h3.b"] > 0
        m["h5.a"] = a0i - (a2s * A2 + k1 * A1)
        m["h5.b"] = b0i - (b1s * A1 + l2 * A2)
        h5 = h1 and m["h5.a"] > 0 and m["h5.b"] > 0

    h4 = h6 = False
    if B1 is not None and B2 is not None:
        m["h4.a"] = a0i - (max(a2s - l1, 0.0) * B2 + l1 * B2)
        m["h4.b"] = b0i - (max(b1s - k2, 0.0) * B1 + k2 * B1)
        h4 = h2 and m["h4.a"] > 0 and m["h4.b"] > 0
        m["h6.a"] = a0i - ((a2s + l1) * B2 + k1 * B1)
        m["h6.b"] = b0i - ((b1s + k2) * B1 + l2 * B2)
        h6 = h2 and m["h6.a"] > 0 and m["h6.b"] > 0

    h7 = None
    if spec.is_space_independent:
        m["h7.a"] = _inf_of_difference(spec.a1, spec.b1) - 2.0 * c.k / c.d3 * (c.chi1 + c.chi2)
        m["h7.b"] = _inf_of_difference(spec.b2, spec.a2) - 2.0 * c.l / c.d3 * (c.chi1 + c.chi2)
        h7 = cond and m["h7.a"] > 0 and m["h7.b"] > 0

    return HypothesisReport(
        h1=bool(h1), h2=bool(h2), h3=bool(h3), h4=bool(h4), h5=bool(h5), h6=bool(h6),
        h7=None if h7 is None else bool(h7), cond_1_5=bool(cond),
        A_bar_1=A1, A_bar_2=A2, B_bar_1=B1, B_bar_2=B2, margins=m,
    )


# ---------------------------------------------------------------------------
# sampled bound validation


@dataclass(frozen=True)
class FieldBoundsCheck:
    passed: bool
    worst: float  # largest excursion outside [inf, sup]; <= 0 when passed
    worst_t: float
    worst_x: float
    worst_value: float
    envelope: tuple


def validate_field_bounds(fld: CoefficientField, samples_t: int = 256, samples_x: int = 64,
                          length: float = 1.0, raise_on_violation: bool = True) -> FieldBoundsCheck:
    """Sample c(t, x) on a tensor grid over one period and [0, L].

    Raises BoundsViolation at the worst offending sample unless
    ``raise_on_violation`` is False.
    """
    if samples_t < 2 or samples_x < 2:
        raise ValueError("need at least two samples in each direction")
    t_end = fld.period() if fld.time_freq != 0.0 else 1.0
    if t_end is None:
        t_end = 2.0 * math.pi / abs(fld.time_freq)
    t = np.linspace(0.0, t_end, samples_t)
    x = np.linspace(0.0, length, samples_x)
    values = fld(t[:, None], x[None, :], length)
    excursion = np.maximum(fld.inf - values, values - fld.sup)
    i, j = np.unravel_index(np.argmax(excursion), excursion.shape)
    check = FieldBoundsCheck(
        passed=bool(excursion[i, j] <= 0.0),
        worst=float(excursion[i, j]),
        worst_t=float(t[i]),
        worst_x=float(x[j]),
        worst_value=float(values[i, j]),
        envelope=fld.envelope(),
    )
    if not check.passed and raise_on_violation:
        raise BoundsViolation(check.worst_t, check.worst_x, check.worst_value, fld.inf, fld.sup)
    return check
