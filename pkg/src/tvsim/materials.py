"""Heat-capacity laws and the scalar functionals derived from them.

A heat-capacity law kappa is a continuous nonnegative function on [0, inf),
positive on (0, inf).  Everything else in the thermal analysis is built from
its primitives:

    K(x)        = int_0^x kappa                      (thermal energy density)
    ell(x)      = int_1^x kappa(s)/s ds              (entropy density)
    ell_hat(x)  = int_0^x ln^2(s+M) kappa(s)/(s+M)   (log-weighted entropy)
    Lambda(x)   = int_1^x kappa(s) max(1, 1/s) ds
    K_w(x)      = int_0^x kappa(s) w(s) ds           (renormalized energies)
    ell_cut(x)  = int_1^x rho_M(s) kappa(s)/s ds     (cutoff entropy)

Evaluation uses closed forms where a variant has them, otherwise cached
composite Gauss-Legendre ladders in log-transformed coordinates, accurate to
roughly 1e-13 relative and safe near the origin where kappa/s may blow up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

#: smallest admissible weight shift for the log-weighted entropy
M_MIN = math.exp(4.0)
M_DEFAULT = M_MIN

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _as_array(xi):
    arr = np.asarray(xi, dtype=float)
    return arr, arr.ndim == 0


class _CumulativeQuad:
    """Growable cumulative integral of a smooth integrand over an s-lattice.

    The lattice starts at s0 and extends in steps of at most `step`, with the
    supplied kink locations inserted as panel boundaries so every panel is
    smooth.  Values are cumulative integrals from s0; evaluation combines the
    table with a Gauss-Legendre rule on the partial panel.
    """

    def __init__(self, fn, s0=0.0, step=0.25, kinks=()):
        self.fn = fn
        self.s0 = float(s0)
        self.step = float(step)
        self.kinks = np.array(sorted(float(k) for k in kinks))
        self.nodes = np.array([self.s0])
        self.cum = np.array([0.0])

    def _panel_integral(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        pts = mid[None, :] + half[None, :] * _GL_X[:, None]
        vals = self.fn(pts.ravel()).reshape(pts.shape)
        return half * np.einsum("k,kn->n", _GL_W, vals)

    def _ladder_points(self, lo, hi):
        ticks = [lo]
        k = math.floor(lo / self.step) + 1
        while k * self.step < hi - 1e-14:
            ticks.append(k * self.step)
            k += 1
        ticks.append(hi)
        inner = self.kinks[(self.kinks > lo + 1e-14) & (self.kinks < hi - 1e-14)]
        pts = np.unique(np.concatenate([np.array(ticks), inner]))
        return pts

    def _extend_to(self, s_lo, s_hi):
        if s_hi > self.nodes[-1]:
            pts = self._ladder_points(self.nodes[-1], s_hi + self.step)
            inc = self._panel_integral(pts[:-1], pts[1:])
            cum = self.cum[-1] + np.cumsum(inc)
            self.nodes = np.concatenate([self.nodes, pts[1:]])
            self.cum = np.concatenate([self.cum, cum])
        if s_lo < self.nodes[0]:
            pts = self._ladder_points(s_lo - self.step, self.nodes[0])
            inc = self._panel_integral(pts[:-1], pts[1:])
            # cumulative measured from s0: value at pts[i] = cum(first node) - tail
            tail = np.concatenate([[0.0], np.cumsum(inc[::-1])])[::-1]
            cum = self.cum[0] - tail[:-1]
            self.nodes = np.concatenate([pts[:-1], self.nodes])
            self.cum = np.concatenate([cum, self.cum])

    def value(self, s):
        s = np.asarray(s, dtype=float)
        if s.size == 0:
            return np.zeros_like(s)
        self._extend_to(float(s.min()), float(s.max()))
        idx = np.clip(np.searchsorted(self.nodes, s, side="right") - 1, 0, len(self.nodes) - 1)
        a = self.nodes[idx]
        flat_a = a.ravel()
        flat_s = s.ravel()
        partial = self._panel_integral(flat_a, flat_s).reshape(s.shape)
        return self.cum[idx] + partial

    def lower_limit(self, max_span=4000.0):
        """Limit of the cumulative value as s -> -inf, if it converges."""
        s = self.nodes[0]
        val = self.cum[0]
        span = 0.0
        while span < max_span:
            s_next = s - 8 * self.step
            self._extend_to(s_next, self.nodes[-1])
            new_val = self.cum[0]
            if abs(new_val - val) <= 1e-15 * (1.0 + abs(new_val)):
                return float(new_val)
            val = new_val
            s = s_next
            span += 8 * self.step
        raise ConfigError("entropy primitive did not converge toward xi = 0")


def adaptive_simpson(fn, a, b, rel_tol=1e-10, kinks=(), max_depth=48):
    """Adaptive Simpson quadrature of a scalar callable, split at kinks."""
    pieces = [a] + [k for k in sorted(kinks) if a < k < b] + [b]

    def simpson(x0, x2, f0, f2):
        x1 = 0.5 * (x0 + x2)
        f1 = fn(x1)
        return x1, f1, (x2 - x0) * (f0 + 4.0 * f1 + f2) / 6.0

    def recurse(x0, x2, f0, f2, whole, x1, f1, depth, scale):
        xl, fl, left = simpson(x0, x1, f0, f1)
        xr, fr, right = simpson(x1, x2, f1, f2)
        if depth >= max_depth or abs(left + right - whole) <= 15.0 * rel_tol * scale:
            return left + right + (left + right - whole) / 15.0
        half_scale = max(scale * 0.5, 1e-300)
        return (recurse(x0, x1, f0, f1, left, xl, fl, depth + 1, half_scale)
                + recurse(x1, x2, f1, f2, right, xr, fr, depth + 1, half_scale))

    total = 0.0
    for x0, x2 in zip(pieces[:-1], pieces[1:]):
        if x2 <= x0:
            continue
        f0, f2 = fn(x0), fn(x2)
        x1, f1, whole = simpson(x0, x2, f0, f2)
        scale = max(abs(whole), (x2 - x0) * max(abs(f0), abs(f1), abs(f2)), 1e-300)
        total += recurse(x0, x2, f0, f2, whole, x1, f1, 0, scale)
    return total


def _bisect_increasing(fn, z, tol_abs=1e-12, max_expand=2000):
    """Solve fn(x) = z for a strictly increasing fn by bracketed bisection."""
    a = b = 1.0
    fa = fb = fn(1.0)
    n = 0
    while fb < z:
        b *= 2.0
        fb = fn(b)
        n += 1
        if n > max_expand or not math.isfinite(b):
            raise ConfigError("monotone inversion failed to bracket from above")
    n = 0
    while fa > z:
        a *= 0.5
        fa = fn(a)
        n += 1
        if n > max_expand:
            raise ConfigError("monotone inversion failed to bracket from below")
    while b - a > tol_abs + 8.0 * np.finfo(float).eps * max(1.0, abs(b)):
        mid = 0.5 * (a + b)
        if fn(mid) < z:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


@dataclass(frozen=True)
class HypothesisFlags:
    """Which growth hypotheses a heat-capacity law satisfies.

    bounded_below_at_infinity: liminf of kappa at large temperature is positive.
    log_weighted_divergent: kappa(x) * ln(x) diverges (the planar-case condition).
    heuristic: flags were sampled from a tail rather than derived analytically.
    """

    variant: str
    bounded_below_at_infinity: bool
    log_weighted_divergent: bool
    heuristic: bool = False

    def as_dict(self):
        return {
            "variant": self.variant,
            "bounded_below_at_infinity": self.bounded_below_at_infinity,
            "log_weighted_divergent": self.log_weighted_divergent,
            "heuristic": self.heuristic,
        }


class HeatCapacity:
    """Base class: continuous kappa >= 0 on [0, inf), positive on (0, inf)."""

    #: kink locations of kappa in (0, inf), panel boundaries for quadrature
    kinks: tuple = ()

    def __init__(self):
        self._caches = {}

    # -- to be provided by variants ------------------------------------
    def kappa_values(self, xi):
        raise NotImplementedError

    def describe(self):
        raise NotImplementedError

    def classify(self):
        raise NotImplementedError

    # closed-form hooks; return None when unavailable
    def _K_closed(self, xi):
        return None

    def _ell_closed(self, xi):
        return None

    def _ell_hat_closed(self, xi, m_shift):
        return None

    # -- shared evaluation ---------------------------------------------
    def kappa(self, xi):
        arr, scalar = _as_array(xi)
        if np.any(arr < 0):
            raise ConfigError("kappa requested at a negative temperature")
        out = self.kappa_values(arr)
        return float(out) if scalar else out

    @property
    def divergent_at_zero(self):
        """Whether int_0^1 kappa(s)/s ds diverges (kappa(0) > 0 for all variants)."""
        return float(self.kappa_values(np.array(0.0))) > 0.0

    def _cache(self, key, builder):
        if key not in self._caches:
            self._caches[key] = builder()
        return self._caches[key]

    def _K_quad(self):
        # s = ln(1 + sigma)
        def integrand(s):
            sig = np.expm1(s)
            return self.kappa_values(sig) * np.exp(s)
        kink_s = [math.log1p(k) for k in self.kinks]
        return self._cache("K", lambda: _CumulativeQuad(integrand, kinks=kink_s))

    def _ell_quad(self):
        # s = ln(sigma); d(ell) = kappa(e^s) ds
        def integrand(s):
            return self.kappa_values(np.exp(s))
        kink_s = [math.log(k) for k in self.kinks if k > 0]
        return self._cache("ell", lambda: _CumulativeQuad(integrand, kinks=kink_s))

    def _ell_hat_quad(self, m_shift):
        def integrand(s):
            sig = np.expm1(s)
            w = np.log(sig + m_shift) ** 2 / (sig + m_shift)
            return self.kappa_values(sig) * w * np.exp(s)
        kink_s = [math.log1p(k) for k in self.kinks]
        return self._cache(("ell_hat", m_shift),
                           lambda: _CumulativeQuad(integrand, kinks=kink_s))

    def K(self, xi):
        """Thermal-energy primitive int_0^xi kappa."""
        arr, scalar = _as_array(xi)
        if np.any(arr < 0):
            raise ConfigError("K requested at a negative temperature")
        closed = self._K_closed(arr)
        if closed is None:
            closed = self._K_quad().value(np.log1p(arr))
        return float(closed) if scalar else closed

    def ell(self, xi):
        """Entropy primitive int_1^xi kappa(s)/s ds.

        Returns the -inf sentinel at xi = 0 when the lower integral diverges.
        """
        arr, scalar = _as_array(xi)
        if np.any(arr < 0):
            raise ConfigError("ell requested at a negative temperature")
        out = np.empty_like(arr)
        zero = arr == 0.0
        pos = ~zero
        closed = self._ell_closed(arr[pos]) if np.any(pos) else np.array([])
        if closed is None:
            closed = self._ell_quad().value(np.log(arr[pos]))
        out[pos] = closed
        if np.any(zero):
            out[zero] = -math.inf if self.divergent_at_zero else self.ell_at_zero()
        return float(out) if scalar else out

    def ell_at_zero(self):
        """Finite limit of ell at 0 (only when the integral converges there)."""
        if self.divergent_at_zero:
            return -math.inf
        quad = self._ell_quad()
        quad.value(np.array([-2.0]))  # seed the ladder
        return self._cache("ell0", quad.lower_limit)

    def ell_hat(self, xi, m_shift=M_DEFAULT):
        """Log-weighted entropy int_0^xi ln^2(s+M) kappa(s)/(s+M) ds, M >= e^4."""
        if m_shift < M_MIN - 1e-9:
            raise ConfigError(f"log-weighted entropy needs M >= e^4, got {m_shift}")
        arr, scalar = _as_array(xi)
        if np.any(arr < 0):
            raise ConfigError("ell_hat requested at a negative temperature")
        closed = self._ell_hat_closed(arr, m_shift)
        if closed is None:
            closed = self._ell_hat_quad(m_shift).value(np.log1p(arr))
        return float(closed) if scalar else closed

    def Lambda(self, xi):
        """Mixed primitive int_1^xi kappa(s) max(1, 1/s) ds."""
        arr, scalar = _as_array(xi)
        if np.any(arr < 0):
            raise ConfigError("Lambda requested at a negative temperature")
        low = np.minimum(arr, 1.0)
        out = self.ell(low) + np.where(arr > 1.0, self.K(np.maximum(arr, 1.0)) - self.K(1.0), 0.0)
        return float(out) if scalar else out

    def K_weighted(self, xi, weight, rel_tol=1e-10):
        """Renormalized energy int_0^xi kappa(s) w(s) ds for a scalar weight w."""
        if xi < 0:
            raise ConfigError("K_weighted requested at a negative temperature")
        if xi == 0:
            return 0.0
        fn = lambda s: float(self.kappa_values(np.array(s))) * weight(s)
        return adaptive_simpson(fn, 0.0, float(xi), rel_tol=rel_tol, kinks=self.kinks)

    def ell_cut(self, xi, m_cut):
        """Cutoff entropy with the piecewise-linear cutoff at level M > 1.

        The cutoff is 1 on [0, M], decays linearly to 0 on [M, M+1] and
        vanishes beyond, so the result agrees with ell below M.
        """
        if m_cut <= 1.0:
            raise ConfigError(f"cutoff entropy needs M > 1, got {m_cut}")
        if xi < 0:
            raise ConfigError("ell_cut requested at a negative temperature")
        xi = float(xi)
        base = self.ell(min(xi, m_cut))
        if xi <= m_cut:
            return base
        hi = min(xi, m_cut + 1.0)
        fn = lambda s: (m_cut + 1.0 - s) * float(self.kappa_values(np.array(s))) / s
        return base + adaptive_simpson(fn, m_cut, hi, rel_tol=1e-12, kinks=self.kinks)

    def kappa_chord(self, a, b):
        """Mean value of kappa over [a, b]: (K(b) - K(a)) / (b - a), elementwise.

        Falls back to the midpoint value on vanishing intervals, so the result
        is exactly consistent with differences of K wherever they are resolvable.
        """
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        delta = b - a
        tiny = np.abs(delta) <= 1e-7 * (1.0 + np.abs(a) + np.abs(b))
        safe = np.where(tiny, 1.0, delta)
        chord = (self.K(np.abs(b)) - self.K(np.abs(a))) / safe
        mid = self.kappa_values(np.maximum(0.5 * (a + b), 0.0))
        return np.where(tiny, mid, chord)

    def ell_inverse(self, z):
        """Inverse of the strictly increasing entropy primitive."""
        z = float(z)
        if not self.divergent_at_zero and z < self.ell_at_zero():
            raise ConfigError(
                f"value {z:g} lies below the infimum {self.ell_at_zero():g} of ell")
        return _bisect_increasing(lambda x: float(self.ell(x)), z)

    def K_inverse(self, z):
        """Inverse of the strictly increasing energy primitive (z >= 0)."""
        z = float(z)
        if z < 0:
            raise ConfigError("K is nonnegative; cannot invert a negative value")
        if z == 0.0:
            return 0.0
        return _bisect_increasing(lambda x: float(self.K(x)), z)

    def floor(self, eps):
        """Regularized law max(kappa, eps), eps in (0, 1).

        Guarantees kappa_eps >= eps and sup |kappa_eps - kappa| <= eps, and
        leaves kappa untouched wherever it already sits above the floor.
        """
        if not 0.0 < eps < 1.0:
            raise ConfigError(f"regularization level must lie in (0, 1), got {eps}")
        if self._provable_lower_bound() >= eps:
            return self
        return FlooredCapacity(self, eps)

    def _provable_lower_bound(self):
        return 0.0


@dataclass
class ConstantCapacity(HeatCapacity):
    """kappa == k0."""

    k0: float

    def __post_init__(self):
        super().__init__()
        if self.k0 <= 0:
            raise ConfigError("constant heat capacity needs k0 > 0")

    def kappa_values(self, xi):
        return np.full_like(np.asarray(xi, dtype=float), self.k0)

    def _K_closed(self, xi):
        return self.k0 * xi

    def _ell_closed(self, xi):
        return self.k0 * np.log(xi)

    def _ell_hat_closed(self, xi, m_shift):
        return self.k0 * (np.log(xi + m_shift) ** 3 - math.log(m_shift) ** 3) / 3.0

    def _provable_lower_bound(self):
        return self.k0

    def describe(self):
        return {"variant": "constant", "k0": self.k0}

    def classify(self):
        return HypothesisFlags("constant", True, True)


@dataclass
class PowerGrowthCapacity(HeatCapacity):
    """kappa(x) = k0 (1 + x)^omega with omega >= 0."""

    k0: float
    omega: float

    def __post_init__(self):
        super().__init__()
        if self.k0 <= 0 or self.omega < 0:
            raise ConfigError("power-growth law needs k0 > 0 and omega >= 0")

    def kappa_values(self, xi):
        return self.k0 * (1.0 + np.asarray(xi, dtype=float)) ** self.omega

    def _K_closed(self, xi):
        return self.k0 * ((1.0 + xi) ** (self.omega + 1.0) - 1.0) / (self.omega + 1.0)

    def _ell_closed(self, xi):
        if self.omega == 0.0:
            return self.k0 * np.log(xi)
        if self.omega == 1.0:
            return self.k0 * (np.log(xi) + xi - 1.0)
        return None

    def _provable_lower_bound(self):
        return self.k0

    def describe(self):
        return {"variant": "power_growth", "k0": self.k0, "omega": self.omega}

    def classify(self):
        return HypothesisFlags("power_growth", True, True)


@dataclass
class DebyeLikeCapacity(HeatCapacity):
    """kappa(x) = k0 x^3 / (x^3 + xi_d^3): cubic degeneracy at low temperature."""

    k0: float
    xi_d: float

    def __post_init__(self):
        super().__init__()
        if self.k0 <= 0 or self.xi_d <= 0:
            raise ConfigError("Debye-like law needs k0 > 0 and xi_d > 0")

    def kappa_values(self, xi):
        x = np.asarray(xi, dtype=float)
        x3 = x ** 3
        return self.k0 * x3 / (x3 + self.xi_d ** 3)

    def describe(self):
        return {"variant": "debye", "k0": self.k0, "xi_d": self.xi_d}

    def classify(self):
        return HypothesisFlags("debye", True, True)


@dataclass
class SlowDecayCapacity(HeatCapacity):
    """kappa(x) = k0 / ln^alpha(e + x), alpha in (0, 1): decays, but slower than 1/ln."""

    k0: float
    alpha: float

    def __post_init__(self):
        super().__init__()
        if self.k0 <= 0 or not 0.0 < self.alpha < 1.0:
            raise ConfigError("slow-decay law needs k0 > 0 and alpha in (0, 1)")

    def kappa_values(self, xi):
        x = np.asarray(xi, dtype=float)
        return self.k0 / np.log(math.e + x) ** self.alpha

    def describe(self):
        return {"variant": "slow_decay", "k0": self.k0, "alpha": self.alpha}

    def classify(self):
        # kappa -> 0 at infinity, but kappa * ln x ~ k0 ln^(1-alpha) x -> inf
        return HypothesisFlags("slow_decay", False, True)


@dataclass
class TabulatedCapacity(HeatCapacity):
    """Piecewise-linear kappa through sample points, clamped beyond the table."""

    xi_pts: np.ndarray
    kappa_pts: np.ndarray

    def __post_init__(self):
        super().__init__()
        xi = np.asarray(self.xi_pts, dtype=float)
        ka = np.asarray(self.kappa_pts, dtype=float)
        if xi.ndim != 1 or xi.size < 2 or xi.shape != ka.shape:
            raise ConfigError("tabulated law needs matching 1-d sample arrays")
        if np.any(np.diff(xi) <= 0) or xi[0] < 0:
            raise ConfigError("tabulated temperatures must be nonnegative and increasing")
        if np.any(ka < 0) or np.any(ka[xi > 0] <= 0):
            raise ConfigError("tabulated kappa must be positive away from zero")
        self.xi_pts = xi
        self.kappa_pts = ka
        self.kinks = tuple(float(p) for p in xi if p > 0)

    def kappa_values(self, xi):
        return np.interp(np.asarray(xi, dtype=float), self.xi_pts, self.kappa_pts)

    def _provable_lower_bound(self):
        return float(self.kappa_pts.min())

    def describe(self):
        return {"variant": "tabulated",
                "xi_pts": self.xi_pts.tolist(), "kappa_pts": self.kappa_pts.tolist()}

    def classify(self):
        # no analytic tail: sample the clamped extension
        tail = float(self.kappa_pts[-1])
        return HypothesisFlags("tabulated", tail > 0.0, tail > 0.0, heuristic=True)


class FlooredCapacity(HeatCapacity):
    """max(kappa, eps) regularization of a base law."""

    def __init__(self, base, eps):
        super().__init__()
        self.base = base
        self.eps = float(eps)
        self.kinks = tuple(sorted(set(base.kinks) | set(self._crossings())))

    def _crossings(self):
        """Points where the base law crosses the floor level."""
        grid = np.concatenate([[0.0], np.geomspace(1e-8, 1e8, 161)])
        vals = self.base.kappa_values(grid) - self.eps
        out = []
        for lo, hi, flo, fhi in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
            if flo == 0.0:
                out.append(lo)
            if flo * fhi < 0:
                a, b = lo, hi
                for _ in range(100):
                    mid = 0.5 * (a + b)
                    fm = float(self.base.kappa_values(np.array(mid))) - self.eps
                    if flo * fm <= 0:
                        b = mid
                    else:
                        a, flo = mid, fm
                out.append(0.5 * (a + b))
        return out

    def kappa_values(self, xi):
        return np.maximum(self.base.kappa_values(xi), self.eps)

    def _provable_lower_bound(self):
        return self.eps

    def describe(self):
        return {"variant": "floored", "eps": self.eps, "base": self.base.describe()}

    def classify(self):
        flags = self.base.classify()
        return HypothesisFlags(f"floored({flags.variant})", True, True,
                               heuristic=flags.heuristic)


def regularize_kappa(model, eps):
    """Floor a heat-capacity law at eps in (0, 1); see HeatCapacity.floor."""
    return model.floor(eps)


def model_from_config(cfg):
    """Build a heat-capacity law from its config mapping."""
    try:
        variant = cfg["variant"]
    except (KeyError, TypeError) as exc:
        raise ConfigError("kappa config needs a 'variant' key") from exc
    if variant == "constant":
        return ConstantCapacity(k0=float(cfg["k0"]))
    if variant == "power_growth":
        return PowerGrowthCapacity(k0=float(cfg["k0"]), omega=float(cfg["omega"]))
    if variant == "debye":
        return DebyeLikeCapacity(k0=float(cfg["k0"]), xi_d=float(cfg["xi_d"]))
    if variant == "slow_decay":
        return SlowDecayCapacity(k0=float(cfg["k0"]), alpha=float(cfg["alpha"]))
    if variant == "tabulated":
        return TabulatedCapacity(xi_pts=np.asarray(cfg["xi_pts"], dtype=float),
                                 kappa_pts=np.asarray(cfg["kappa_pts"], dtype=float))
    raise ConfigError(f"unknown heat-capacity variant {variant!r}")


@dataclass(frozen=True)
class ScalarFunctionals:
    """Evaluators for K, ell, ell_hat and Lambda bound to one law and one M."""

    model: HeatCapacity
    m_shift: float = M_DEFAULT

    def __post_init__(self):
        if self.m_shift < M_MIN - 1e-9:
            raise ConfigError(f"scalar functionals need M >= e^4, got {self.m_shift}")

    def K(self, xi):
        return self.model.K(xi)

    def ell(self, xi):
        return self.model.ell(xi)

    def ell_hat(self, xi):
        return self.model.ell_hat(xi, self.m_shift)

    def Lambda(self, xi):
        return self.model.Lambda(xi)

    def ell_inverse(self, z):
        return self.model.ell_inverse(z)


@dataclass(frozen=True)
class AdmissibilityReport:
    """Outcome of the initial-temperature admissibility check."""

    not_identically_zero: bool
    has_negative_cells: bool
    K_integral: float
    ell_integral_abs: float
    ell_finite: bool
    cells_below_floor: int
    floor: float

    @property
    def passed(self):
        return (self.not_identically_zero and not self.has_negative_cells
                and math.isfinite(self.K_integral) and self.ell_finite)

    def reasons(self):
        out = []
        if self.has_negative_cells:
            out.append("initial temperature has negative cells")
        if not self.not_identically_zero:
            out.append("initial temperature vanishes identically")
        if not math.isfinite(self.K_integral):
            out.append("K(theta0) is not integrable")
        if not self.ell_finite:
            out.append("ell(theta0) is not integrable (zero cells with a "
                       "divergent entropy primitive)")
        return out


def admissibility_check(model, theta0, weights, theta_floor=0.0):
    """Check that an initial temperature field is admissible for a law.

    Requires theta0 >= 0 with theta0 not identically zero, a finite weighted
    sum of |K(theta0)| and a finite weighted sum of |ell(theta0)|; the latter
    fails exactly when some cell is zero and kappa(s)/s is not integrable at
    the origin.  Cells below theta_floor are counted but only reported.
    """
    theta0 = np.asarray(theta0, dtype=float)
    weights = np.asarray(weights, dtype=float)
    neg = bool(np.any(theta0 < 0))
    work = np.maximum(theta0, 0.0)
    k_int = float(np.sum(np.abs(model.K(work)) * weights))
    has_zero = bool(np.any(work == 0.0))
    if has_zero and model.divergent_at_zero:
        ell_int, ell_finite = math.inf, False
    else:
        ell_vals = model.ell(work)
        ell_int = float(np.sum(np.abs(ell_vals) * weights))
        ell_finite = math.isfinite(ell_int)
    return AdmissibilityReport(
        not_identically_zero=bool(np.any(work > 0)),
        has_negative_cells=neg,
        K_integral=k_int,
        ell_integral_abs=ell_int,
        ell_finite=ell_finite,
        cells_below_floor=int(np.sum(work < theta_floor)) if theta_floor > 0 else 0,
        floor=theta_floor,
    )
