"""Collision kernels B(g, theta), their angular integral A(g), truncation, and
numerical checks of the large-momentum admissibility conditions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import integrate, optimize, special
from scipy.interpolate import RegularGridInterpolator

GAMMA_MARGIN = 1e-9


class IntegrabilityError(ValueError):
    """The angular integral of the kernel diverges."""


def sin_power_integral(power: float) -> float:
    """``int_0^pi sin^power(theta) dtheta`` for ``power > -1``."""
    if power <= -1.0:
        raise IntegrabilityError(f"int sin^{power} diverges")
    return math.sqrt(math.pi) * math.exp(
        special.gammaln((power + 1.0) / 2.0) - special.gammaln(power / 2.0 + 1.0)
    )


@dataclass(frozen=True)
class CollisionKernel:
    """A kernel family with optional truncation level.

    ``family`` is ``"hard-power"`` (``C s^1/2 g^(beta+1) sin^gamma``),
    ``"zero"`` or ``"tabulated"`` (linear interpolation of a ``g theta B`` table).
    """

    family: str = "hard-power"
    beta: float = 0.0
    gamma: float = 0.0
    scale: float = 1.0
    truncation_n: float | None = None
    table: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.family == "hard-power":
            if self.gamma <= -2.0 + GAMMA_MARGIN:
                raise IntegrabilityError("gamma must exceed -2")
            if not 0.0 <= self.beta < min(2.0, 2.0 + self.gamma):
                raise ValueError("hard-power kernel needs 0 <= beta < min(2, 2 + gamma)")
            if self.scale <= 0:
                raise ValueError("scale must be positive")
        elif self.family == "tabulated":
            if self.table is None:
                raise ValueError("tabulated kernel requires a table")
        elif self.family != "zero":
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.truncation_n is not None and self.truncation_n < 1:
            raise ValueError("truncation level must be >= 1")

    # -- evaluation ----------------------------------------------------------
    def _raw(self, g, theta):
        g = np.asarray(g, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if self.family == "zero":
            return np.zeros(np.broadcast(g, theta).shape)
        if self.family == "tabulated":
            gs, ths, vals = self.table
            interp = RegularGridInterpolator((gs, ths), vals, bounds_error=False, fill_value=None)
            gg, tt = np.broadcast_arrays(g, theta)
            pts = np.stack([np.clip(gg, gs[0], gs[-1]), np.clip(tt, ths[0], ths[-1])], -1)
            return np.maximum(interp(pts.reshape(-1, 2)).reshape(gg.shape), 0.0)
        s = 4.0 * (1.0 + g * g)
        with np.errstate(divide="ignore"):
            ang = np.sin(theta) ** self.gamma if self.gamma != 0 else np.ones_like(theta)
        return self.scale * np.sqrt(s) * g ** (self.beta + 1.0) * ang

    def __call__(self, g, theta):
        return self.evaluate(g, theta)

    def evaluate(self, g, theta):
        """Kernel value; +inf at theta in {0, pi} when gamma < 0."""
        b = self._raw(g, theta)
        if self.truncation_n is not None:
            n = self.truncation_n
            b = np.where(np.asarray(g) <= n, np.minimum(b, n), 0.0)
        return float(b) if np.ndim(b) == 0 else b

    # -- angular integral ----------------------------------------------------
    def angular_integral(self, g):
        """``A(g) = int_{S^2} B dOmega``; closed form for untruncated hard-power."""
        g = np.asarray(g, dtype=float)
        if self.family == "zero":
            out = np.zeros_like(g)
        elif self.family == "hard-power" and self.truncation_n is None:
            s = 4.0 * (1.0 + g * g)
            out = (2.0 * math.pi * self.scale * sin_power_integral(self.gamma + 1.0)
                   * np.sqrt(s) * g ** (self.beta + 1.0))
        else:
            out = np.vectorize(self._angular_quad, otypes=[float])(g)
        return float(out) if out.ndim == 0 else out

    def _angular_quad(self, g: float) -> float:
        if self.truncation_n is not None and g > self.truncation_n:
            return 0.0
        if self.family == "hard-power":
            return self._truncated_power_integral(g)
        pts = list(self.table[1][1:-1]) if self.family == "tabulated" else None
        val, _ = integrate.quad(lambda t: float(self.evaluate(g, t)) * math.sin(t), 0.0, math.pi,
                                points=pts, limit=max(200, 4 * len(pts or [])), epsabs=0.0, epsrel=1e-9)
        return 2.0 * math.pi * val

    def _truncated_power_integral(self, g: float) -> float:
        """``2 pi int min(c sin^gamma, n) sin dtheta``: closed form minus the capped excess."""
        c = self.scale * math.sqrt(4.0 * (1 + g * g)) * g ** (self.beta + 1.0)
        return 2.0 * math.pi * c * sin_power_integral(self.gamma + 1.0) - self._cap_excess(g, self.truncation_n)

    def _cap_excess(self, g: float, n: float) -> float:
        """``2 pi int (c sin^gamma - n)_+ sin dtheta`` for a hard-power kernel, ``c`` the prefactor at g."""
        gam = self.gamma
        c = self.scale * math.sqrt(4.0 * (1 + g * g)) * g ** (self.beta + 1.0)
        if c == 0.0:
            return 0.0
        if gam == 0.0:
            return 4.0 * math.pi * max(c - n, 0.0)
        x = (n / c) ** (1.0 / gam)
        if gam > 0:
            if x >= 1.0:
                return 0.0
            a = math.asin(x)
            w = math.pi / 2 - a
            if w < 1e-6:
                # the excess is quadratic in theta - pi/2 over a tiny window: Simpson is exact enough
                f = lambda t: c * math.sin(t) ** (gam + 1.0) - n * math.sin(t)
                ex = w / 6.0 * (f(a) + 4.0 * f(a + w / 2) + f(math.pi / 2))
            else:
                ex, _ = integrate.quad(lambda t: c * math.sin(t) ** (gam + 1.0) - n * math.sin(t),
                                       a, math.pi / 2, epsabs=1e-15 * c, epsrel=1e-12, limit=200)
        else:
            a = math.asin(min(x, 1.0))
            # excess c sin^(gam+1) - n sin on [0, a], written as smooth(t) * t^(gam+1)
            def smooth(t):
                if t == 0.0:
                    return c
                return c * (math.sin(t) / t) ** (gam + 1.0) - n * math.sin(t) * t ** (-(gam + 1.0))
            ex, _ = integrate.quad(smooth, 0.0, a, weight="alg", wvar=(gam + 1.0, 0.0),
                                   epsabs=1e-15 * c, epsrel=1e-12, limit=200)
        return 2.0 * math.pi * 2.0 * max(ex, 0.0)

    def truncate(self, n: float) -> "CollisionKernel":
        """``B_n = min(B, n) * 1[g <= n]``."""
        if n < 1:
            raise ValueError("truncation level must be >= 1")
        if self.truncation_n is not None:
            n = min(n, self.truncation_n)
        return replace(self, truncation_n=float(n))

    @property
    def untruncated(self) -> "CollisionKernel":
        return replace(self, truncation_n=None)


def hard_power(beta: float = 0.0, gamma: float = 0.0, scale: float = 1.0) -> CollisionKernel:
    return CollisionKernel("hard-power", beta, gamma, scale)


def zero_kernel() -> CollisionKernel:
    return CollisionKernel("zero")


def load_table(path) -> CollisionKernel:
    """Read a tabulated kernel: whitespace columns ``g theta B`` on a uniform
    tensor grid (any row order); ``#`` starts a comment."""
    data = np.loadtxt(Path(path), comments="#", ndmin=2)
    if data.shape[1] != 3:
        raise ValueError("kernel table needs three columns: g theta B")
    gs = np.unique(data[:, 0])
    ths = np.unique(data[:, 1])
    if gs.size * ths.size != data.shape[0]:
        raise ValueError("kernel table is not a full tensor grid")
    if ths[0] < 0 or ths[-1] > math.pi or gs[0] < 0:
        raise ValueError("kernel table outside g >= 0, theta in [0, pi]")
    for axis in (gs, ths):
        if axis.size > 2 and not np.allclose(np.diff(axis), axis[1] - axis[0], rtol=1e-6):
            raise ValueError("kernel table grid must be uniform")
    vals = np.empty((gs.size, ths.size))
    vals[np.searchsorted(gs, data[:, 0]), np.searchsorted(ths, data[:, 1])] = data[:, 2]
    if np.any(vals < 0):
        raise ValueError("kernel table has negative entries")
    return CollisionKernel("tabulated", table=(gs, ths, vals))


def save_table(kernel: CollisionKernel, path, g_max: float, ng: int = 65, nth: int = 65) -> None:
    gs = np.linspace(0.0, g_max, ng)
    ths = np.linspace(0.0, math.pi, nth)
    G, T = np.meshgrid(gs, ths, indexing="ij")
    with np.errstate(invalid="ignore"):
        B = np.nan_to_num(np.asarray(kernel.evaluate(G, T)), posinf=0.0)
    np.savetxt(path, np.column_stack([G.ravel(), T.ravel(), B.ravel()]),
               header="g theta B", fmt="%.17g")


# -- integrals over a momentum ball -------------------------------------------

def ball_integral(afunc, p_abs: float, R: float, epsrel: float = 1e-10) -> float:
    """``int_{|p1| <= R} afunc(g) / p10 d^3p1`` for ``p = (0, 0, p_abs)``.

    Azimuthal symmetry reduces this to a (radius, cosine) double integral.
    """
    p0 = math.sqrt(1.0 + p_abs * p_abs)

    def inner(mu, r):
        p10 = math.sqrt(1.0 + r * r)
        g2 = max((p10 * p0 - r * p_abs * mu - 1.0) / 2.0, 0.0)
        return r * r * float(afunc(math.sqrt(g2))) / p10

    val, _ = integrate.dblquad(inner, 0.0, R, -1.0, 1.0, epsabs=0.0, epsrel=epsrel)
    return 2.0 * math.pi * val


def hard_bound_closed_form(C: float, R: float, p0: float) -> float:
    """``2 pi C [p0 R^3/3 - R sqrt(1+R^2)/2 + asinh(R)/2]``: the exact ball
    integral of ``C g^2 / p10``."""
    if C <= 0 or R < 0 or p0 < 1:
        raise ValueError("need C > 0, R >= 0, p0 >= 1")
    return 2.0 * math.pi * C * (p0 * R**3 / 3.0 - R * math.sqrt(1 + R * R) / 2.0
                                + math.log(R + math.sqrt(1 + R * R)) / 2.0)


@dataclass
class ConditionReport:
    name: str
    p_abs: np.ndarray
    values: np.ndarray
    decays: bool
    limit_estimate: float

    @property
    def passed(self) -> bool:
        return self.decays

    def lines(self) -> list[str]:
        out = [f"{self.name}: |p| value"]
        out += [f"  {a:12.5g} {v:.8g}" for a, v in zip(self.p_abs, self.values)]
        out.append(f"  verdict: {'PASS (decays to 0)' if self.decays else 'FAIL'}"
                   f"  last value {self.limit_estimate:.6g}")
        return out


def decays_to_zero(values, rel: float = 1e-3, tail: int = 5) -> bool:
    """Last value below ``rel`` of the first and the last ``tail`` values nonincreasing."""
    v = np.asarray(values, dtype=float)
    if v.size == 0 or np.all(v == 0):
        return True
    last = v[-tail:]
    return bool(v[-1] < rel * v[0] and np.all(np.diff(last) <= 1e-14 * abs(v[0])))


def _angular(k):
    return k.angular_integral if isinstance(k, CollisionKernel) else k


def _sequence(k, R, p_sequence, power):
    a = _angular(k)
    ps = np.array([np.linalg.norm(p) if np.ndim(p) else float(p) for p in p_sequence])
    if np.any(np.diff(ps) <= 0):
        raise ValueError("|p| must be strictly increasing along the sequence")
    vals = np.array([ball_integral(a, q, R) / (1.0 + q * q) ** (power / 2.0) for q in ps])
    return ps, vals


def check_condition_hard(k, R: float, p_sequence) -> ConditionReport:
    """``(1/p0^2) int_{B_R} A(g)/p10 d^3p1`` along the sequence; must decay to 0.

    ``k`` is a kernel or any callable ``A(g)``.
    """
    ps, vals = _sequence(k, R, p_sequence, 2)
    return ConditionReport("p0^-2 condition", ps, vals, decays_to_zero(vals), float(vals[-1]))


def check_condition_de(k, R: float, p_sequence) -> ConditionReport:
    """``(1/p0) int_{B_R} A(g)/p10 d^3p1``; hard kernels keep a nonzero limit."""
    ps, vals = _sequence(k, R, p_sequence, 1)
    return ConditionReport("p0^-1 condition", ps, vals, decays_to_zero(vals), float(vals[-1]))


def de_leading_term(k: CollisionKernel, R: float) -> float:
    """Large-|p| limit of the p0^-1 sequence for a beta = 0 hard-power kernel.

    For large g, A(g) ~ 8 pi C a g^2 with a = int sin^(gamma+1) / 2, and the
    ball integral of g^2/p10 grows like 2 pi p0 R^3 / 3.
    """
    if k.family != "hard-power" or k.beta != 0:
        raise ValueError("leading term only defined for beta = 0 hard-power kernels")
    coef = 4.0 * math.pi * k.scale * sin_power_integral(k.gamma + 1.0)
    return 2.0 * math.pi * coef * R**3 / 3.0


def sigma_jacobian(g):
    """``g (1+g^2)^1/2`` written through ``s``: equals ``g s^1/2 / 2``."""
    g = np.asarray(g, dtype=float)
    return g * np.sqrt(4.0 * (1.0 + g * g)) / 2.0


# -- truncation error ---------------------------------------------------------

def _excess_angular(k: CollisionKernel, n: float, g: float) -> float:
    """``int_{S^2} (B - B_n) dOmega`` at fixed g."""
    full = k.untruncated
    if g > n:
        return float(full.angular_integral(g))
    if full.family == "hard-power":
        return full._cap_excess(g, n)
    return max(float(full.angular_integral(g)) - float(full.truncate(n).angular_integral(g)), 0.0)


def _shell_integral(F, R: float, q: float, g_points=()) -> float:
    """``int_{B_R} F(g(p, p1)) d^3p`` for ``|p1| = q``.

    The polar angle between p and p1 is traded for g, which removes the square
    root kink of g at p = p1 (``d mu = -4 g dg / (|p| q)``).
    """
    q0 = math.sqrt(1.0 + q * q)
    g_top = math.sqrt((math.sqrt(1.0 + R * R) * q0 + R * q - 1.0) / 2.0)
    tiny = 1e-14 * abs(F(g_top)) * (1.0 + g_top) ** 2  # absolute floor for inner integrals that vanish

    def radial(r):
        p0 = math.sqrt(1.0 + r * r)
        lo = math.sqrt(max((p0 * q0 - r * q - 1.0) / 2.0, 0.0))
        if r * q == 0.0:
            return 2.0 * r * r * F(lo)
        hi = math.sqrt(max((p0 * q0 + r * q - 1.0) / 2.0, 0.0))
        if hi - lo <= 1e-9 * (1.0 + hi):
            mid = 0.5 * (lo + hi)
            return 4.0 * r * F(mid) * mid * (hi - lo) / q
        pts = [x for x in g_points if lo < x < hi]
        val, _ = integrate.quad(lambda g: F(g) * g, lo, hi, points=pts or None,
                                epsabs=tiny, epsrel=1e-11, limit=200)
        return 4.0 * r * val / q

    # radii where a breakpoint in g meets an end of the g range: cosh(eta_p -+ eta_q) = 1 + 2g^2
    eta = math.asinh(q)
    radii = {q}
    for x in g_points:
        a = math.acosh(1.0 + 2.0 * x * x)
        radii.update((abs(math.sinh(eta + a)), abs(math.sinh(eta - a))))
    pts = sorted(r for r in radii if 0.0 < r < R) or None
    val, _ = integrate.quad(radial, 0.0, R, points=pts, epsabs=tiny * R**3, epsrel=1e-10, limit=400)
    return 2.0 * math.pi * val


def _kinks(k: CollisionKernel, n: float) -> list[float]:
    """g values where ``B - B_n`` is not smooth: the support cut and, for hard-power, ``max B = n``."""
    pts = [n]
    if k.family == "hard-power" and k.gamma >= 0:
        def c(g):
            return k.scale * math.sqrt(4.0 * (1.0 + g * g)) * g ** (k.beta + 1.0) - n
        if c(n) > 0:
            pts.append(optimize.brentq(c, 0.0, n, xtol=1e-14))
    return pts


def truncation_error(k: CollisionKernel, n: float, R: float, kmax: float, n_k: int = 6) -> float:
    """``max_{|p1| <= kmax} iint_{B_R x S^2} |B_n - B| d^3p dOmega`` over a radial grid of |p1|."""
    if R <= 0 or kmax <= 0:
        raise ValueError("R and kmax must be positive")
    full = k.untruncated
    pts = _kinks(full, n)
    return max(_shell_integral(lambda g: _excess_angular(full, n, g), R, q, pts)
               for q in np.linspace(0.0, kmax, n_k))


def total_mass_of_kernel(k: CollisionKernel, R: float, kmax: float, n_k: int = 6) -> float:
    """``max_{|p1| <= kmax} iint_{B_R x S^2} B d^3p dOmega`` (reference scale)."""
    full = k.untruncated
    return max(_shell_integral(lambda g: float(full.angular_integral(g)), R, q)
               for q in np.linspace(0.0, kmax, n_k))
