"""Event-driven simulation of the particle (q_t, p_t) and its renewal skeleton.

The particle starts at q0 in [0,1) with speed p0 > 0, hits the wall at 1
after T0 = (1-q0)/p0, and is re-emitted from 0 with i.i.d. speeds v_i; cycle
i lasts tau_i = 1/v_i. The state is piecewise affine between collisions and
right-continuous at them (the state at a collision instant belongs to the
next cycle).

Trajectories extend their cycle list lazily, so heavy-tailed interarrival
laws cannot stall a fixed-count pre-generation. Prefix sums are compensated
(extended-precision carry) so 1e6+ cycles do not drift.

Batch Monte Carlo (``batch_states``, ``cross_batch``) runs on the kernel
backend; replicas are merged by summation and are deterministic given the
generator state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from hotwall import _kernels as kernels
from hotwall import laws

__all__ = [
    "ProcessError",
    "HorizonExceeded",
    "BeforeFirstRenewal",
    "BoundaryConditionViolated",
    "StateSample",
    "RecurrencePair",
    "Trajectory",
    "simulate",
    "simulate_undelayed",
    "evaluate",
    "renewal_counts",
    "recurrence",
    "batch_states",
    "cross_batch",
    "QPFunction",
    "semigroup_report",
    "semigroup_residual",
    "generator_report",
    "generator_residual",
]


class ProcessError(Exception):
    pass


class HorizonExceeded(ProcessError):
    """Evaluation time beyond the trajectory's horizon or generated cycles."""


class BeforeFirstRenewal(ProcessError):
    """Recurrence times are undefined before the renewal skeleton starts."""


class BoundaryConditionViolated(ProcessError):
    """Test function does not satisfy f(1, p) = E[f(0, V)]."""


@dataclass(frozen=True)
class StateSample:
    t: float
    q: float
    p: float
    n_collisions: int


@dataclass(frozen=True)
class RecurrencePair:
    """Recurrence times of the current cycle at time t.

    ``forward`` is the residual time A until the next collision and
    ``backward`` the age B since the previous one, indexed so that
    q_t = B/(A+B) and p_t = 1/(A+B) hold exactly (the elapsed fraction of
    the cycle is the age over the cycle length).
    """

    forward: float  # A: time to the next collision
    backward: float  # B: time since the previous collision

    @property
    def cycle_length(self) -> float:
        return self.forward + self.backward


class Trajectory:
    """One realization: initial segment (q0, p0) plus cycles tau_1, tau_2, ...

    Collision times are T_n = T0 + tau_1 + ... + tau_n with T0 = (1-q0)/p0.
    ``undelayed`` trajectories are built from a speed stream (v_1, v_2, ...)
    as q0 = 0, p0 = v_1, cycles 1/v_2, ...: their collision times coincide
    with the renewal skeleton S_n = 1/v_1 + ... + 1/v_n.
    """

    _CHUNK = 1024

    def __init__(self, q0: float, p0: float, taus=(), horizon: float = math.inf,
                 law=None, rng: Optional[np.random.Generator] = None,
                 undelayed: bool = False):
        if not (0.0 <= q0 < 1.0):
            raise ValueError(f"q0 must be in [0,1), got {q0}")
        if not p0 > 0.0:
            raise ValueError(f"p0 must be positive, got {p0}")
        if not horizon > 0.0:
            raise ValueError("horizon must be positive")
        self.q0 = float(q0)
        self.p0 = float(p0)
        self.horizon = float(horizon)
        self.undelayed = bool(undelayed)
        self._taus = np.asarray(taus, dtype=np.float64).copy()
        if np.any(self._taus <= 0.0):
            raise ValueError("cycle durations must be positive")
        self._carry = np.longdouble(0.0)
        self._prefix = np.empty(0, dtype=np.float64)
        self._append_prefix(self._taus)
        self._law = law
        self._rng = rng

    # -- storage ------------------------------------------------------------

    def _append_prefix(self, chunk: np.ndarray) -> None:
        if chunk.size == 0:
            return
        cs = np.cumsum(chunk.astype(np.longdouble)) + self._carry
        self._carry = cs[-1]
        self._prefix = np.concatenate([self._prefix, cs.astype(np.float64)])

    @property
    def T0(self) -> float:
        return (1.0 - self.q0) / self.p0

    @property
    def taus(self) -> np.ndarray:
        return self._taus

    @property
    def n_cycles(self) -> int:
        return int(self._taus.size)

    def cycle_prefix(self) -> np.ndarray:
        """S_n = tau_1 + ... + tau_n for the stored cycles (strictly increasing)."""
        return self._prefix

    def collision_times(self) -> np.ndarray:
        """T_0, T_1, ..., T_n for the generated cycles."""
        return np.concatenate([[self.T0], self.T0 + self._prefix])

    def renewal_stream(self) -> np.ndarray:
        """The undelayed cycle stream: (1/p0, tau_1, ...) when undelayed,
        the stored cycles otherwise."""
        if self.undelayed:
            return np.concatenate([[1.0 / self.p0], self._taus])
        return self._taus

    def ensure_time(self, t: float) -> None:
        """Generate cycles until the collision skeleton passes t."""
        if t >= self.horizon:
            raise HorizonExceeded(f"t={t} >= horizon={self.horizon}")
        while self.T0 + (self._prefix[-1] if self._prefix.size else 0.0) <= t:
            if self._law is None:
                raise HorizonExceeded("trajectory has no law to extend its cycles")
            speeds = np.asarray(laws.sample(self._law, self._rng, size=self._CHUNK))
            chunk = 1.0 / speeds
            self._taus = np.concatenate([self._taus, chunk])
            self._append_prefix(chunk)

    # -- serialization ------------------------------------------------------

    def dump_csv(self, path) -> None:
        """Columns: index, tau, prefix_sum (17 significant digits)."""
        with open(path, "w") as fh:
            fh.write("index,tau,prefix_sum\n")
            for i, (tau, s) in enumerate(zip(self._taus, self._prefix), start=1):
                fh.write(f"{i},{tau:.17g},{s:.17g}\n")

    @classmethod
    def load_csv(cls, path, q0: float, p0: float, horizon: float = math.inf,
                 undelayed: bool = False) -> "Trajectory":
        taus = np.loadtxt(path, delimiter=",", skiprows=1, usecols=1, ndmin=1)
        return cls(q0, p0, taus, horizon=horizon, undelayed=undelayed)


def simulate(q0: float, p0: float, horizon: float, phi, rng: np.random.Generator) -> Trajectory:
    """Delayed trajectory from (q0, p0) with speeds drawn lazily from phi."""
    traj = Trajectory(q0, p0, horizon=horizon, law=phi, rng=rng)
    traj.ensure_time(min(horizon * (1 - 1e-12), horizon - 1e-12) if math.isfinite(horizon) else 1.0)
    return traj


def simulate_undelayed(horizon: float, phi, rng: np.random.Generator) -> Trajectory:
    """Undelayed trajectory: emitted from 0 at time 0 with speed v_1 ~ phi."""
    v1 = float(np.asarray(laws.sample(phi, rng, size=1))[0])
    traj = Trajectory(0.0, v1, horizon=horizon, law=phi, rng=rng, undelayed=True)
    if math.isfinite(horizon):
        traj.ensure_time(horizon * (1 - 1e-12))
    return traj


def evaluate(traj: Trajectory, t: float) -> StateSample:
    """Exact state at time t: (q0 + p0 t, p0) before T0, then
    ((t - T_{n-1})/tau_n, 1/tau_n) on [T_{n-1}, T_n)."""
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    if t >= traj.horizon:
        raise HorizonExceeded(f"t={t} >= horizon={traj.horizon}")
    if t < traj.T0:
        return StateSample(t=t, q=traj.q0 + traj.p0 * t, p=traj.p0, n_collisions=0)
    traj.ensure_time(t)
    s = t - traj.T0
    prefix = traj.cycle_prefix()
    k = int(np.searchsorted(prefix, s, side="right"))
    s_prev = prefix[k - 1] if k > 0 else 0.0
    tau = traj.taus[k]
    return StateSample(t=t, q=(s - s_prev) / tau, p=1.0 / tau, n_collisions=k + 1)


def renewal_counts(traj: Trajectory, t: float) -> tuple[float, int]:
    """(S_{N_t}, N_t): the number of collisions by time t and the last
    collision epoch (0 when none). For an undelayed trajectory the collision
    epochs are exactly the renewal skeleton S_n of its cycle stream."""
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    traj.ensure_time(t)
    times = traj.collision_times()
    n = int(np.searchsorted(times, t, side="right"))
    s_n = float(times[n - 1]) if n > 0 else 0.0
    return s_n, n


def recurrence(traj: Trajectory, t: float) -> RecurrencePair:
    """Recurrence pair at t; q_t = B/(A+B) and p_t = 1/(A+B) hold exactly.

    Defined from the first renewal epoch on: time 0 for an undelayed
    trajectory, the first collision for a delayed one (raises
    BeforeFirstRenewal earlier than that).
    """
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    traj.ensure_time(t)
    times = traj.collision_times()
    if traj.undelayed:
        times = np.concatenate([[0.0], times])
    n = int(np.searchsorted(times, t, side="right"))
    if n == 0:
        raise BeforeFirstRenewal(f"t={t} precedes the first renewal epoch")
    if n >= times.size:
        traj.ensure_time(t + traj.taus[-1])
        return recurrence(traj, t)
    prev, nxt = float(times[n - 1]), float(times[n])
    return RecurrencePair(forward=nxt - t, backward=t - prev)


# ---------------------------------------------------------------------------
# Batch Monte Carlo engine
# ---------------------------------------------------------------------------


def cross_batch(t_targets: np.ndarray, phi, rng: np.random.Generator,
                g_of_tau: Optional[Callable] = None):
    """Advance undelayed renewal paths to per-path horizons.

    Returns (S, N, tau_next, G): the renewal epoch S_{N_t}, the count N_t,
    the duration of the straddling cycle, and (when ``g_of_tau`` is given)
    the compensated per-path sums of g over consumed cycles.
    """
    t_targets = np.ascontiguousarray(t_targets, dtype=np.float64)
    n = t_targets.size
    S = np.zeros(n)
    C = np.zeros(n)
    N = np.zeros(n, dtype=np.int64)
    G = np.zeros(n)
    GC = np.zeros(n)
    tau_next = np.zeros(n)
    done = np.zeros(n, dtype=bool)
    active = np.arange(n)
    K = 64
    while active.size:
        speeds = np.asarray(laws.sample(phi, rng, size=(active.size, K)), dtype=np.float64)
        taus = np.ascontiguousarray(1.0 / speeds)
        gvals = None
        if g_of_tau is not None:
            gvals = np.ascontiguousarray(g_of_tau(taus), dtype=np.float64)
        sS, sC = S[active], C[active]
        sN, sG, sGC = N[active], G[active], GC[active]
        sT, sD = tau_next[active], done[active].astype(np.uint8)
        kernels.cross_scan(taus, gvals, t_targets[active], sS, sC, sN, sG, sGC, sT, sD)
        S[active], C[active], N[active] = sS, sC, sN
        G[active], GC[active], tau_next[active] = sG, sGC, sT
        done[active] = sD.astype(bool)
        active = active[~sD.astype(bool)]
        K = min(2 * K, 4096)
    return S, N, tau_next, G


def batch_states(q0: float, p0: float, t: float, phi, rng: np.random.Generator,
                 n: int):
    """States (q, p) of n independent paths from (q0, p0) at time t."""
    T0 = (1.0 - q0) / p0
    if t < T0:
        return np.full(n, q0 + p0 * t), np.full(n, p0)
    rem = np.full(n, t - T0)
    S, _, tau_next, _ = cross_batch(rem, phi, rng)
    q = (rem - S) / tau_next
    p = 1.0 / tau_next
    return q, p


def batch_states_from(q: np.ndarray, p: np.ndarray, s: float, phi,
                      rng: np.random.Generator):
    """Evolve per-path states (q_i, p_i) for a further duration s with fresh
    randomness (used by the semigroup check's inner estimate)."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    T0 = (1.0 - q) / p
    out_q = np.empty_like(q)
    out_p = np.empty_like(p)
    free = s < T0
    out_q[free] = q[free] + p[free] * s
    out_p[free] = p[free]
    idx = np.nonzero(~free)[0]
    if idx.size:
        rem = s - T0[idx]
        S, _, tau_next, _ = cross_batch(rem, phi, rng)
        out_q[idx] = (rem - S) / tau_next
        out_p[idx] = 1.0 / tau_next
    return out_q, out_p


# ---------------------------------------------------------------------------
# Semigroup and generator residuals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QPFunction:
    """Test function on [0,1) x R+ with optional exact q-derivative."""

    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dq: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    name: str = ""

    def __call__(self, q, p):
        return self.value(np.asarray(q, dtype=np.float64), np.asarray(p, dtype=np.float64))


def semigroup_report(f: QPFunction, t: float, s: float, n_samples: int, phi,
                     rng: np.random.Generator, q0: float = 0.2, p0: float = 1.0):
    """Monte Carlo check of P_{t+s} f = P_t P_s f at (q0, p0).

    Both sides use fresh randomness; returns (residual, combined stderr).
    """
    q1, p1 = batch_states(q0, p0, t + s, phi, rng, n_samples)
    v1 = f(q1, p1)
    qt, pt = batch_states(q0, p0, t, phi, rng, n_samples)
    q2, p2 = batch_states_from(qt, pt, s, phi, rng)
    v2 = f(q2, p2)
    m1, m2 = float(v1.mean()), float(v2.mean())
    se = math.sqrt(v1.var(ddof=1) / n_samples + v2.var(ddof=1) / n_samples)
    return abs(m1 - m2), se


def semigroup_residual(f: QPFunction, t: float, s: float, n_samples: int, phi,
                       rng: np.random.Generator, q0: float = 0.2, p0: float = 1.0) -> float:
    """|E[f(q_{t+s}, p_{t+s})] - E[(P_s f)(q_t, p_t)]|, both Monte Carlo."""
    return semigroup_report(f, t, s, n_samples, phi, rng, q0, p0)[0]


def check_boundary_condition(f: QPFunction, phi, tol: float = 1e-9) -> float:
    """The generator's domain requires f(1, p) = E[f(0, V)] for all p."""
    rhs = laws.signed_expectation(phi, lambda p: f.value(np.ones_like(p), p))
    if isinstance(phi, laws.AtomicLaw):
        probes = phi.atoms
    else:
        a, b = phi.support
        hi = b if math.isfinite(b) else 100.0
        probes = np.linspace(max(a, 1e-3), hi, 13)
    lhs = f(np.ones_like(probes), probes)
    dev = float(np.max(np.abs(lhs - rhs)))
    if dev > tol:
        raise BoundaryConditionViolated(
            f"max |f(1,p) - E[f(0,V)]| = {dev:.3e} exceeds {tol}")
    return dev


def _paths_matrix(q0: float, p0: float, t: float, phi, rng: np.random.Generator,
                  n: int):
    """Cycle matrix (n, K) whose compensated row prefixes all exceed t - T0."""
    T0 = (1.0 - q0) / p0
    rem = max(t - T0, 0.0)
    cols = []
    carry = np.zeros((n, 1), dtype=np.longdouble)
    K = 64
    for _ in range(40):
        speeds = np.asarray(laws.sample(phi, rng, size=(n, K)), dtype=np.float64)
        taus = 1.0 / speeds
        cols.append(taus)
        carry = carry + np.cumsum(taus.astype(np.longdouble), axis=1)[:, -1:]
        if carry.min() > rem:
            break
        K = min(2 * K, 2048)
    taus = np.concatenate(cols, axis=1)
    prefix = np.cumsum(taus.astype(np.longdouble), axis=1).astype(np.float64)
    return taus, prefix


def _states_on_grid(q0, p0, s_grid, taus, prefix):
    """Vectorized states at each node of s_grid for all paths in the matrix."""
    T0 = (1.0 - q0) / p0
    n = taus.shape[0]
    Q = np.empty((len(s_grid), n))
    P = np.empty((len(s_grid), n))
    for i, sv in enumerate(s_grid):
        if sv < T0:
            Q[i] = q0 + p0 * sv
            P[i] = p0
            continue
        rem = sv - T0
        k = (prefix <= rem).sum(axis=1)
        s_prev = np.where(k > 0, prefix[np.arange(n), np.maximum(k - 1, 0)], 0.0)
        tau = taus[np.arange(n), k]
        Q[i] = (rem - s_prev) / tau
        P[i] = 1.0 / tau
    return Q, P


def _gl_nodes(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1.0) / 2.0, w / 2.0  # mapped to [0, 1]


def _pathwise_lf_integral(f: QPFunction, q0, p0, t, taus, prefix, order: int):
    """Per-path integral of Lf = p df/dq over [0, t], composite Gauss-Legendre
    segmented at the path's own cycle boundaries (Lf is smooth within a
    cycle, where q moves affinely at speed p)."""
    xi, w = _gl_nodes(order)
    T0 = (1.0 - q0) / p0
    # initial free-flight piece [0, min(T0, t)], identical across paths
    d0 = min(T0, t)
    q_nodes = q0 + p0 * d0 * xi
    base = d0 * float(np.dot(w, p0 * f.dq(q_nodes, np.full_like(q_nodes, p0))))
    if T0 >= t:
        return np.full(taus.shape[0], base)
    # cycle k of a path occupies [T0 + prefix_{k-1}, T0 + prefix_k)
    start = T0 + np.concatenate([np.zeros((taus.shape[0], 1)), prefix[:, :-1]], axis=1)
    end = np.minimum(T0 + prefix, t)
    dur = np.clip(end - start, 0.0, None)
    v = 1.0 / taus
    total = np.full(taus.shape[0], base)
    for j in range(order):
        qj = xi[j] * dur * v  # affine flight from q = 0 within the cycle
        total += w[j] * np.sum(dur * v * f.dq(qj, v), axis=1)
    return total


def generator_report(f: QPFunction, t: float, n_samples: int, phi,
                     rng: np.random.Generator, q0: float = 0.2, p0: float = 1.0,
                     quad_order: int = 8):
    """Monte Carlo residual of P_t f = f + integral_0^t P_s(p df/dq) ds.

    The time integral is composite Gauss-Legendre per path, segmented at the
    path's cycle boundaries (the only places Lf along a path is not smooth).
    The difference is paired per path, so the stderr reflects the correlated
    estimates. Returns (residual, stderr, quad_tol) with quad_tol from
    comparing against the half-order rule.
    """
    if f.dq is None:
        raise ValueError("generator check needs the exact q-derivative")
    check_boundary_condition(f, phi)
    taus, prefix = _paths_matrix(q0, p0, t, phi, rng, n_samples)
    integral_full = _pathwise_lf_integral(f, q0, p0, t, taus, prefix, quad_order)
    integral_half = _pathwise_lf_integral(f, q0, p0, t, taus, prefix, max(quad_order // 2, 2))
    f0 = float(f(np.asarray([q0]), np.asarray([p0]))[0])
    x = f0 + integral_full
    Qt, Pt = _states_on_grid(q0, p0, np.asarray([t]), taus, prefix)
    d = f(Qt[0], Pt[0]) - x
    residual = abs(float(d.mean()))
    se = float(d.std(ddof=1)) / math.sqrt(n_samples)
    quad_tol = abs(float((integral_full - integral_half).mean())) + 1e-12
    return residual, se, quad_tol


def generator_residual(f: QPFunction, t: float, n_samples: int, phi,
                       rng: np.random.Generator, q0: float = 0.2, p0: float = 1.0) -> float:
    """Monte Carlo residual of the generator identity at (q0, p0)."""
    return generator_report(f, t, n_samples, phi, rng, q0, p0)[0]
