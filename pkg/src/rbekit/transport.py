"""Free transport, split-step solver for the renormalized equation, the
initial-data ladder (regularization, spatial truncation) and the causality
monitor."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .collision import CollisionOperator
from .quadrature import MomentumGrid

log = logging.getLogger(__name__)

GEOMETRIES = ("homogeneous", "slab", "box3")


class PositivityError(RuntimeError):
    """The collision update could not be kept nonnegative."""


@dataclass(frozen=True)
class SpatialGrid:
    """Cell-centred spatial cells on ``[-L, L]`` per resolved axis.

    ``slab`` resolves x only (quantities are per unit transverse area),
    ``box3`` resolves all three axes, ``homogeneous`` is a single unit cell.
    """

    geometry: str = "slab"
    L: float = 2.0
    cells: int = 64
    boundary: str = "outflow"

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"geometry must be one of {GEOMETRIES}")
        if self.boundary not in ("outflow", "periodic"):
            raise ValueError("boundary must be 'outflow' or 'periodic'")
        if self.geometry != "homogeneous" and (self.L <= 0 or self.cells < 1):
            raise ValueError("need L > 0 and at least one cell")

    @property
    def dims(self) -> int:
        return {"homogeneous": 0, "slab": 1, "box3": 3}[self.geometry]

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.cells if self.dims else 1.0

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells,) * self.dims if self.dims else (1,)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dims if self.dims else 1.0

    @property
    def axis(self) -> np.ndarray:
        return (np.arange(self.cells) + 0.5) * self.dx - self.L

    @property
    def positions(self) -> np.ndarray:
        """Cell centres as 3-vectors (unresolved components are 0), shape (size, 3)."""
        out = np.zeros((self.size, 3))
        if self.dims == 1:
            out[:, 0] = self.axis
        elif self.dims == 3:
            X = np.meshgrid(self.axis, self.axis, self.axis, indexing="ij")
            out[:] = np.stack([x.ravel() for x in X], axis=1)
        return out

    @property
    def outer_radius(self) -> np.ndarray:
        """Largest |x| reached inside each cell."""
        if self.dims == 0:
            return np.zeros(1)
        pos = np.abs(self.positions[:, : self.dims]) + self.dx / 2.0
        return np.linalg.norm(pos, axis=1)


@dataclass
class PhaseSpaceDistribution:
    """Values ``f(x_i, p_j)`` with shape ``(space.size, momentum.size)``."""

    space: SpatialGrid
    momentum: MomentumGrid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.space.size, self.momentum.size):
            raise ValueError(f"values must have shape {(self.space.size, self.momentum.size)}")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("distribution must be finite and nonnegative")

    @property
    def measure(self) -> float:
        return self.space.cell_volume * self.momentum.cell_volume

    def mass(self) -> float:
        return float(np.sum(self.values) * self.measure)

    def with_values(self, values, t=None) -> "PhaseSpaceDistribution":
        return PhaseSpaceDistribution(self.space, self.momentum, values, self.t if t is None else t)


@dataclass(frozen=True)
class ApproximationLadder:
    """Kernel truncation / renormalization level ``n`` and spatial radius ``m``."""

    n: float = 10.0
    m: float = math.inf

    def __post_init__(self):
        if self.n < 1 or self.m <= 0:
            raise ValueError("need n >= 1 and m > 0")


# -- initial data -------------------------------------------------------------

def truncate_initial(f0: PhaseSpaceDistribution, m: float) -> PhaseSpaceDistribution:
    """Zero every cell whose centre lies outside the open ball ``|x| < m``."""
    if m <= 0:
        raise ValueError("m must be positive")
    r = np.linalg.norm(f0.space.positions, axis=1)
    keep = (r < m)[:, None]
    return f0.with_values(np.where(keep, f0.values, 0.0))


def regularize_initial(f0: PhaseSpaceDistribution, n: int) -> PhaseSpaceDistribution:
    """Gaussian mollification of width ``1/n`` in x and p, then cutoff at radius ``n``.

    The discrete kernels are normalized, so mass is kept up to what the cutoff removes.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    sp, mg = f0.space, f0.momentum
    vals = f0.values.reshape(sp.shape + (mg.N,) * 3)
    sig_x = [1.0 / (n * sp.dx)] * sp.dims if sp.dims else [0.0]
    sig = sig_x + [1.0 / (n * mg.h)] * 3
    out = ndimage.gaussian_filter(vals, sigma=sig, mode="constant", truncate=4.0)
    out = np.maximum(out.reshape(f0.values.shape), 0.0)
    x_out = np.linalg.norm(sp.positions, axis=1) > n
    p_out = np.linalg.norm(mg.nodes, axis=1) > n
    out[x_out, :] = 0.0
    out[:, p_out] = 0.0
    return f0.with_values(out)


def weighted_l1_distance(f: PhaseSpaceDistribution, g: PhaseSpaceDistribution) -> float:
    """``sum |f - g| (1 + p0 |x|^2 + p0)`` over phase space."""
    x2 = np.sum(f.space.positions**2, axis=1)[:, None]
    p0 = f.momentum.p0[None, :]
    return float(np.sum(np.abs(f.values - g.values) * (1.0 + p0 * x2 + p0)) * f.measure)


def entropy_integral(f: PhaseSpaceDistribution) -> float:
    v = f.values
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(v > 0, v * np.abs(np.log(v)), 0.0)
    return float(np.sum(t) * f.measure)


# -- transport ----------------------------------------------------------------

def _lw_sweep(vals: np.ndarray, courant: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    """One flux-form quadratic-upwind (Lax-Wendroff) sweep along ``axis``.

    ``vals`` has the momentum index last; ``courant`` is v dt / dx per momentum
    node with |courant| <= 1. Each face flux is capped by the donor cell content,
    which keeps the update nonnegative without widening the stencil.
    """
    out = vals.copy()
    for sign in (1.0, -1.0):
        sel = courant * sign > 0
        if not np.any(sel):
            continue
        a = np.abs(courant[sel])
        u = vals[..., sel]
        if sign < 0:
            u = np.flip(u, axis=axis)
        if periodic:
            nxt = np.roll(u, -1, axis=axis)
        else:
            pad = [(0, 0)] * u.ndim
            pad[axis] = (0, 1)
            nxt = np.delete(np.pad(u, pad), 0, axis=axis)
        flux = a * ((1.0 + a) / 2.0 * u + (1.0 - a) / 2.0 * nxt)
        flux = np.minimum(flux, u)
        if periodic:
            inflow = np.roll(flux, 1, axis=axis)
        else:
            pad = [(0, 0)] * u.ndim
            pad[axis] = (1, 0)
            inflow = np.delete(np.pad(flux, pad), -1, axis=axis)
        new = u - flux + inflow
        if sign < 0:
            new = np.flip(new, axis=axis)
        out[..., sel] = new
    return np.maximum(out, 0.0)


def free_stream(f: PhaseSpaceDistribution, dt: float) -> PhaseSpaceDistribution:
    """Advance ``f_t + (p/p0) . grad_x f = 0`` by ``dt``.

    Constant speeds per momentum node make this an exact quadratic
    semi-Lagrangian remap in flux form: mass and the first two spatial moments
    of every momentum slice move exactly, except where the donor cap engages.
    Large ``dt`` is split into substeps with Courant number <= 1.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    sp = f.space
    if dt == 0 or sp.dims == 0:
        return f.with_values(f.values.copy(), f.t + dt)
    v = f.momentum.nodes / f.momentum.p0[:, None]
    vmax = float(np.max(np.abs(v[:, : 3 if sp.dims == 3 else 1])))
    nsub = max(1, math.ceil(dt * vmax / sp.dx - 1e-12))
    h = dt / nsub
    vals = f.values.reshape(sp.shape + (f.momentum.size,))
    periodic = sp.boundary == "periodic"
    for _ in range(nsub):
        for ax in range(sp.dims):
            vals = _lw_sweep(vals, v[:, ax] * h / sp.dx, ax, periodic)
    return f.with_values(vals.reshape(f.values.shape), f.t + dt)


# -- split step ---------------------------------------------------------------

@dataclass
class CollisionStats:
    substeps: int = 1
    dissipation: float = 0.0
    leakage: float = 0.0


def renormalized_rate(op: CollisionOperator, vals: np.ndarray, n: float, block: int = 2):
    """``Q~_n`` for every spatial row; rows with no mass are skipped."""
    out = np.zeros_like(vals)
    live = np.flatnonzero(np.any(vals > 0, axis=1))
    for i in range(0, live.size, block):
        rows = live[i:i + block]
        out[rows] = op.renormalized(vals[rows], n)
    return out


def _row_entropy(vals: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sum(np.where(vals > 0, vals * np.log(np.where(vals > 0, vals, 1.0)), 0.0), axis=1)


def collide(f: PhaseSpaceDistribution, dt: float, n: float, op: CollisionOperator,
            max_halvings: int = 20, stats: CollisionStats | None = None) -> PhaseSpaceDistribution:
    """Explicit Euler collision update over ``dt``, split into ``2^k`` equal substeps.

    A substep is rejected when it would make a value negative or raise the
    entropy ``sum f ln f`` of a cell (the Euler step adds a convexity term of
    order ``dt^2`` that can outweigh the dissipation). The first rejection
    estimates ``k`` from the largest relative loss rate.
    """
    vals = f.values
    q0 = renormalized_rate(op, vals, n)
    k = 0
    while k <= max_halvings:
        nsub = 2**k
        h = dt / nsub
        cur, ok, neg_fail = vals, True, False
        h_cur = _row_entropy(cur)
        for i in range(nsub):
            q = q0 if i == 0 else renormalized_rate(op, cur, n)
            nxt = cur + h * q
            neg = nxt < 0
            if np.any(neg):
                # rounding-level undershoot is clipped; anything else rejects the attempt
                if np.all(-nxt[neg] <= 1e-13 * np.max(cur)):
                    nxt = np.maximum(nxt, 0.0)
                else:
                    ok, neg_fail = False, True
                    break
            h_nxt = _row_entropy(nxt)
            tol = 1e-13 * (np.sum(np.abs(cur), axis=1) + np.abs(h_cur))
            if np.any(h_nxt > h_cur + tol):
                ok = False
                break
            cur, h_cur = nxt, h_nxt
        if ok:
            if stats is not None:
                stats.substeps = nsub
            return f.with_values(cur)
        if i == 0 and neg_fail:
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(q0 < 0, -q0 * dt / np.where(vals > 0, vals, np.inf), 0.0)
            need = max(k + 1, math.ceil(math.log2(max(float(np.max(ratio)), 1.0) * 1.25)))
            log.debug("collision update not positive at dt=%g; using %d halvings", h, need)
            k = need
        else:
            k += 1
    raise PositivityError(f"collision update not positive after {max_halvings} halvings")


def step(f: PhaseSpaceDistribution, dt: float, ladder: ApproximationLadder,
         op: CollisionOperator | None, stats: CollisionStats | None = None) -> PhaseSpaceDistribution:
    """Strang step: half transport, collision over dt, half transport."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    g = free_stream(f, dt / 2.0)
    if op is not None:
        g = collide(g, dt, ladder.n, op, stats=stats)
    out = free_stream(g, dt / 2.0)
    out.t = f.t + dt
    return out


# -- causality -----------------------------------------------------------------

@dataclass
class CausalityReport:
    times: np.ndarray
    outside_fraction: np.ndarray
    tolerance: float

    @property
    def max_violation(self) -> float:
        return float(np.max(self.outside_fraction)) if self.outside_fraction.size else 0.0

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance


def mass_outside(f: PhaseSpaceDistribution, radius: float) -> float:
    """Fraction of mass in cells reaching beyond ``|x| <= radius``."""
    per_cell = np.sum(f.values, axis=1)
    total = np.sum(per_cell)
    if total == 0:
        return 0.0
    out = f.space.outer_radius > radius * (1.0 + 1e-12) + 1e-12
    return float(np.sum(per_cell[out]) / total)


def causality_check(trajectory, R0: float, tolerance: float = 1e-8) -> CausalityReport:
    """Mass fraction outside the light cone ``|x| <= R0 + t`` at every stored state."""
    ts, frac = [], []
    for st in trajectory.states:
        ts.append(st.t)
        frac.append(mass_outside(st, R0 + st.t))
    return CausalityReport(np.array(ts), np.array(frac), tolerance)


def agreement_inside_cone(a: PhaseSpaceDistribution, b: PhaseSpaceDistribution, radius: float) -> float:
    """Max |a - b| over cells lying entirely in ``|x| <= radius``, relative to max |a|."""
    inside = a.space.outer_radius <= radius * (1.0 + 1e-12) + 1e-12
    if not np.any(inside):
        return 0.0
    scale = max(float(np.max(np.abs(a.values))), 1e-300)
    return float(np.max(np.abs(a.values[inside] - b.values[inside])) / scale)


# -- driver ---------------------------------------------------------------------

def run(config, keep_states: bool = False, on_step=None, operator=None):
    """Integrate from ``t = 0`` to ``config.T`` and return a :class:`Trajectory`.

    ``config`` is a :class:`rbekit.config.RunConfig`. Diagnostics are sampled
    every ``max(dt, T/200)`` unless the config sets an interval. States are
    stored at sample times when ``keep_states`` is true (needed by the
    causality check); the final state is always available as ``traj.final``.
    A prebuilt ``operator`` for the same grid and kernel skips the event build.
    """
    from .diagnostics import Trajectory, record

    f = config.initial_state()
    op = operator if operator is not None else config.collision_operator()
    ladder = config.ladder
    n = ladder.n if op is not None else None
    T, dt = float(config.T), float(config.dt)
    nsteps = 0 if T == 0 else max(1, int(round(T / dt)))
    if nsteps and abs(nsteps * dt - T) > 1e-9 * max(T, 1.0):
        dt = T / nsteps
        log.info("dt adjusted to %g so that T is reached exactly", dt)
    interval = config.sample_interval if config.sample_interval else max(dt, T / 200.0)
    every = max(1, int(round(interval / dt))) if nsteps else 1

    traj = Trajectory(records=[record(f, op, n)], spatial_dims=f.space.dims, seed=config.seed)
    if keep_states:
        traj.states.append(f)
    stats = CollisionStats()
    max_sub = 1
    for k in range(1, nsteps + 1):
        try:
            f = step(f, dt, ladder, op, stats)
        except PositivityError as exc:
            exc.state = f  # last good state, for the caller to persist
            traj.final = f
            raise
        f.t = k * dt
        max_sub = max(max_sub, stats.substeps)
        if k % every == 0 or k == nsteps:
            traj.records.append(record(f, op, n))
            if keep_states:
                traj.states.append(f)
        if on_step is not None:
            on_step(f)
    traj.final = f
    traj.meta.update(steps=nsteps, dt=dt, collision_substeps=max_sub)
    return traj


# -- snapshots ----------------------------------------------------------------------

def write_snapshot(f: PhaseSpaceDistribution, path) -> None:
    """Text table ``ix ipx ipy ipz f`` (nonzero entries only) after one metadata line."""
    sp, mg = f.space, f.momentum
    rows, cols = np.nonzero(f.values)
    idx = mg.index[cols]
    with open(path, "w") as fh:
        fh.write(f"# geometry={sp.geometry} L={sp.L!r} cells={sp.cells} boundary={sp.boundary} "
                 f"P={mg.P!r} N={mg.N} t={f.t!r}\n")
        for r, (i, j, k), c in zip(rows, idx, cols):
            fh.write(f"{r} {i} {j} {k} {float(f.values[r, c])!r}\n")


def read_snapshot(path) -> PhaseSpaceDistribution:
    with open(path) as fh:
        head = fh.readline()
        if not head.startswith("#"):
            raise ValueError("snapshot is missing its metadata line")
        meta = dict(item.split("=", 1) for item in head[1:].split())
        data = np.loadtxt(fh, ndmin=2)
    sp = SpatialGrid(meta["geometry"], float(meta["L"]), int(meta["cells"]), meta["boundary"])
    mg = MomentumGrid(float(meta["P"]), int(meta["N"]))
    vals = np.zeros((sp.size, mg.size))
    if data.size:
        ix = data[:, 0].astype(int)
        col = mg.flat(data[:, 1:4].astype(int))
        vals[ix, col] = data[:, 4]
    return PhaseSpaceDistribution(sp, mg, vals, float(meta["t"]))
