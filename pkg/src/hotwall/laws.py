"""Probability laws on (0, +inf) for speeds and interarrival times.

The catalog supports the transforms the rate theory needs: the reciprocal
pushforward between speed and interarrival laws, size-biasing, exponential
tilting by a boundary function, and the two small-speed tail exponents

    xi      = sup{ c : E[exp(c/V)] < +inf }
    xi_bar  = -lim_{delta->0} liminf_{eps->0} eps * log P(V in [eps(1-delta), eps(1+delta)))

Window probabilities use half-open intervals [lo, hi) throughout; the dyadic
counterexample law depends on that boundary convention.

Representations
---------------
AtomicLaw
    Finitely many materialized atoms with exact log-weights. An optional
    ``AtomSeries`` describes an infinite continuation (atoms strictly
    decreasing to 0) so tail-sensitive quantities stay exact: a finite atom
    list always has xi = +inf, so a law like the dyadic one must know its
    tail.
DensityLaw
    A density on an interval of (0, +inf), with optional exact log-cdf and
    inverse cdf used for window probabilities and conditional sampling.
MixtureLaw
    Finite convex combination of the above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from hotwall.extreal import INF, XR

__all__ = [
    "LawError",
    "InconclusiveConvergence",
    "InfiniteMean",
    "ZeroMean",
    "DivergentNormalizer",
    "AtomSeries",
    "AtomicLaw",
    "DensityLaw",
    "MixtureLaw",
    "TailExponentReport",
    "atomic",
    "dyadic",
    "exp_interarrival",
    "polynomial",
    "sample",
    "speed_to_interarrival",
    "interarrival_to_speed",
    "expectation",
    "exp_over_p_moment",
    "compute_xi",
    "window_probability",
    "log_window_probability",
    "estimate_xi_bar",
    "size_bias",
    "inverse_size_bias",
    "tilt_by_boundary_function",
    "law_mean",
    "law_mean_inverse",
    "law_from_config",
    "law_to_config",
]

ROLE_SPEED = "speed-law"
ROLE_INTERARRIVAL = "interarrival-law"

LOG_TINY = -745.0  # below this, exp underflows to 0.0
_SERIES_JMAX = 400
_DIVERGENCE_SUM = 1e12


class LawError(Exception):
    """Base error for the law catalog."""


class InconclusiveConvergence(LawError):
    """Neither convergence nor divergence could be certified at the tolerance."""


class InfiniteMean(LawError):
    """The required mean is +inf."""


class ZeroMean(LawError):
    """The required mean is 0."""


class DivergentNormalizer(LawError):
    """A tilt normalizer integral diverges."""


@dataclass(frozen=True)
class AtomSeries:
    """Exact description of an infinite atomic family.

    ``term(j)`` returns ``(atom_j, log_weight_j)`` for j = 0, 1, 2, ... with
    atoms strictly decreasing to 0 and log-weights normalized against the
    full series. Streaming consumers assume the log-terms they build are
    eventually monotone, which holds for every catalog family.
    """

    term: Callable[[int], tuple[float, float]]


@dataclass(frozen=True)
class AtomicLaw:
    atoms: np.ndarray  # ascending, strictly positive
    log_weights: np.ndarray  # aligned with atoms, logsumexp == 0
    role: str = ROLE_SPEED
    series: Optional[AtomSeries] = None
    spec: Optional[dict] = None
    _reciprocal_of: Optional["AtomicLaw"] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=np.float64)
        logw = np.asarray(self.log_weights, dtype=np.float64)
        if atoms.ndim != 1 or atoms.shape != logw.shape or atoms.size == 0:
            raise ValueError("atoms and log_weights must be matching 1-d arrays")
        if np.any(atoms <= 0.0):
            raise ValueError("atoms must be strictly positive")
        order = np.argsort(atoms, kind="stable")
        atoms = atoms[order]
        logw = logw[order]
        if np.any(np.diff(atoms) == 0.0):
            raise ValueError("atoms must be distinct")
        total = _logsumexp(logw)
        if abs(total) > 1e-9:
            raise ValueError(f"weights must sum to 1 (logsumexp={total:.3e})")
        logw = logw - total
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "log_weights", logw)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def log_mass(self, x) -> np.ndarray:
        """Log weight at exact atom values (-inf off-atom)."""
        x = np.asarray(x, dtype=np.float64)
        idx = np.clip(np.searchsorted(self.atoms, x), 0, self.atoms.size - 1)
        return np.where(self.atoms[idx] == x, self.log_weights[idx], -np.inf)


@dataclass(frozen=True)
class DensityLaw:
    pdf: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]  # (a, b), 0 <= a < b <= inf, mass on (a, b)
    role: str = ROLE_SPEED
    log_pdf: Optional[Callable[[np.ndarray], np.ndarray]] = None
    log_cdf: Optional[Callable[[float], float]] = None  # log P(V <= p), exact
    ppf: Optional[Callable[[np.ndarray], np.ndarray]] = None  # inverse cdf on (0,1)
    quad_points: tuple[float, ...] = ()
    spec: Optional[dict] = None
    _reciprocal_of: Optional["DensityLaw"] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        a, b = self.support
        if not (0.0 <= a < b):
            raise ValueError(f"bad support {self.support}")

    def log_mass(self, x) -> np.ndarray:
        if self.log_pdf is not None:
            return np.asarray(self.log_pdf(np.asarray(x, dtype=np.float64)), dtype=np.float64)
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(np.asarray(x, dtype=np.float64)))


@dataclass(frozen=True)
class MixtureLaw:
    parts: tuple[tuple[float, object], ...]  # (weight, law)
    role: str = ROLE_SPEED
    spec: Optional[dict] = None

    def __post_init__(self):
        w = np.array([p[0] for p in self.parts], dtype=np.float64)
        if np.any(w <= 0):
            raise ValueError("mixture weights must be positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")


Law = object  # AtomicLaw | DensityLaw | MixtureLaw


def _logsumexp(logs) -> float:
    logs = np.asarray(logs, dtype=np.float64)
    logs = logs[~np.isneginf(logs)]
    if logs.size == 0:
        return -math.inf
    m = float(logs.max())
    return m + math.log(float(np.exp(logs - m).sum()))


# ---------------------------------------------------------------------------
# Built-ins
# ---------------------------------------------------------------------------


def atomic(atoms: Sequence[float], weights: Sequence[float], role: str = ROLE_SPEED) -> AtomicLaw:
    """Finite atomic law from linear weights (must sum to 1 within 1e-9)."""
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    s = float(w.sum())
    if abs(s - 1.0) > 1e-9:
        raise ValueError(f"weights sum to {s}, expected 1")
    return AtomicLaw(
        atoms=np.asarray(atoms, dtype=np.float64),
        log_weights=np.log(w / s),
        role=role,
        spec={"kind": "atomic", "atoms": [float(a) for a in atoms], "weights": [float(x) for x in w]},
    )


_DYADIC_LOG_Z = _logsumexp([-(2.0**j) for j in range(0, 40)])
_DYADIC_JMAT = 160  # materialized atoms reach 2^-159; analysis ops stream further


def dyadic() -> AtomicLaw:
    """Speed law with atoms 2^-j and weights exp(-2^j)/Z, j >= 0.

    The canonical law with xi = 1 and xi_bar = +inf: windows centered at
    3 * 2^-j with relative half-width below 1/3 contain no atom.
    """

    def term(j: int) -> tuple[float, float]:
        return (2.0 ** (-j), -(2.0**j) - _DYADIC_LOG_Z)

    js = np.arange(_DYADIC_JMAT, dtype=np.float64)
    return AtomicLaw(
        atoms=2.0 ** (-js),
        log_weights=-(2.0**js) - _DYADIC_LOG_Z,
        role=ROLE_SPEED,
        series=AtomSeries(term),
        spec={"kind": "builtin", "name": "dyadic"},
    )


def exp_interarrival(xi0: float) -> DensityLaw:
    """Speed law whose interarrival times are Exp(xi0).

    Density xi0 * exp(-xi0/p) / p^2 on (0, inf), cdf exp(-xi0/p); here
    xi = xi_bar = xi0.
    """
    if xi0 <= 0:
        raise ValueError("xi0 must be positive")

    def pdf(p):
        p = np.asarray(p, dtype=np.float64)
        out = np.zeros_like(p)
        pos = p > 0
        out[pos] = xi0 * np.exp(-xi0 / p[pos]) / p[pos] ** 2
        return out

    def log_pdf(p):
        p = np.asarray(p, dtype=np.float64)
        out = np.full_like(p, -np.inf)
        pos = p > 0
        out[pos] = math.log(xi0) - xi0 / p[pos] - 2.0 * np.log(p[pos])
        return out

    def ppf(u):
        u = np.clip(np.asarray(u, dtype=np.float64), 1e-300, 1.0 - 1e-16)
        return -xi0 / np.log(u)

    return DensityLaw(
        pdf=pdf,
        support=(0.0, math.inf),
        role=ROLE_SPEED,
        log_pdf=log_pdf,
        log_cdf=lambda p: -xi0 / p if p > 0 else -math.inf,
        ppf=ppf,
        quad_points=(xi0 / 8, xi0, 8 * xi0),
        spec={"kind": "density", "name": "exp_interarrival", "xi0": float(xi0)},
    )


def polynomial(kappa: float) -> DensityLaw:
    """Speed law with density kappa * p^(kappa-1) on (0, 1]; xi = xi_bar = 0."""
    if kappa <= 2:
        raise ValueError("kappa must exceed 2")

    def pdf(p):
        p = np.asarray(p, dtype=np.float64)
        out = np.zeros_like(p)
        ok = (p > 0) & (p <= 1)
        out[ok] = kappa * p[ok] ** (kappa - 1.0)
        return out

    def log_pdf(p):
        p = np.asarray(p, dtype=np.float64)
        out = np.full_like(p, -np.inf)
        ok = (p > 0) & (p <= 1)
        out[ok] = math.log(kappa) + (kappa - 1.0) * np.log(p[ok])
        return out

    def ppf(u):
        u = np.clip(np.asarray(u, dtype=np.float64), 1e-300, 1.0)
        return u ** (1.0 / kappa)

    return DensityLaw(
        pdf=pdf,
        support=(0.0, 1.0),
        role=ROLE_SPEED,
        log_pdf=log_pdf,
        log_cdf=lambda p: kappa * math.log(min(p, 1.0)) if p > 0 else -math.inf,
        ppf=ppf,
        spec={"kind": "density", "name": "polynomial", "kappa": float(kappa)},
    )


# ---------------------------------------------------------------------------
# Sampling and the reciprocal pushforward
# ---------------------------------------------------------------------------


def sample(law: Law, rng: np.random.Generator, size=None):
    """Draw from the law; reproducible given the generator state."""
    if isinstance(law, AtomicLaw):
        cum = np.cumsum(law.weights)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, rng.random(size), side="right")
        return law.atoms[idx]
    if isinstance(law, DensityLaw):
        if law.ppf is None:
            raise NotImplementedError("density law without inverse cdf cannot be sampled")
        return law.ppf(rng.random(size))
    if isinstance(law, MixtureLaw):
        w = np.array([p[0] for p in law.parts])
        n = 1 if size is None else int(np.prod(size))
        comp = rng.choice(len(law.parts), size=n, p=w / w.sum())
        out = np.empty(n, dtype=np.float64)
        for k, (_, sub) in enumerate(law.parts):
            mask = comp == k
            if mask.any():
                out[mask] = np.asarray(sample(sub, rng, size=int(mask.sum())))
        return float(out[0]) if size is None else out.reshape(size)
    raise TypeError(f"not a law: {law!r}")


def _flip_role(role: str) -> str:
    return ROLE_INTERARRIVAL if role == ROLE_SPEED else ROLE_SPEED


def _reciprocal(law: Law) -> Law:
    prev = getattr(law, "_reciprocal_of", None)
    if prev is not None:
        return prev  # exact involution by construction
    if isinstance(law, AtomicLaw):
        series = None
        if law.series is not None:
            src = law.series.term

            def term(j, _src=src):
                p, lw = _src(j)
                return 1.0 / p, lw

            series = AtomSeries(term)
        return AtomicLaw(
            atoms=1.0 / law.atoms,
            log_weights=law.log_weights.copy(),
            role=_flip_role(law.role),
            series=series,
            _reciprocal_of=law,
        )
    if isinstance(law, DensityLaw):
        a, b = law.support
        inv_support = (0.0 if math.isinf(b) else 1.0 / b, math.inf if a == 0.0 else 1.0 / a)
        src_pdf, src_logcdf, src_ppf = law.pdf, law.log_cdf, law.ppf
        src_logpdf = law.log_pdf

        def pdf(t):
            t = np.asarray(t, dtype=np.float64)
            out = np.zeros_like(t)
            pos = t > 0
            out[pos] = src_pdf(1.0 / t[pos]) / t[pos] ** 2
            return out

        log_pdf = None
        if src_logpdf is not None:
            def log_pdf(t, _f=src_logpdf):
                t = np.asarray(t, dtype=np.float64)
                out = np.full_like(t, -np.inf)
                pos = t > 0
                out[pos] = np.asarray(_f(1.0 / t[pos]), dtype=np.float64) - 2.0 * np.log(t[pos])
                return out

        log_cdf = None
        if src_logcdf is not None:
            # P(1/V <= t) = P(V >= 1/t) = 1 - cdf(1/t) for continuous laws
            def log_cdf(t, _f=src_logcdf):
                if t <= 0:
                    return -math.inf
                c = _f(1.0 / t)
                return math.log1p(-math.exp(c)) if c < 0 else -math.inf

        ppf = None
        if src_ppf is not None:
            def ppf(u, _f=src_ppf):
                u = np.asarray(u, dtype=np.float64)
                return 1.0 / _f(1.0 - u)

        return DensityLaw(
            pdf=pdf,
            support=inv_support,
            role=_flip_role(law.role),
            log_pdf=log_pdf,
            log_cdf=log_cdf,
            ppf=ppf,
            quad_points=tuple(sorted(1.0 / p for p in law.quad_points if p > 0)),
            _reciprocal_of=law,
        )
    if isinstance(law, MixtureLaw):
        return MixtureLaw(
            parts=tuple((w, _reciprocal(sub)) for w, sub in law.parts),
            role=_flip_role(law.role),
        )
    raise TypeError(f"not a law: {law!r}")


def speed_to_interarrival(phi: Law) -> Law:
    """Pushforward of a speed law under v -> 1/v (the interarrival law)."""
    return _reciprocal(phi)


def interarrival_to_speed(psi: Law) -> Law:
    """Pushforward of an interarrival law under tau -> 1/tau (the speed law)."""
    return _reciprocal(psi)


# ---------------------------------------------------------------------------
# Expectations with divergence certification
# ---------------------------------------------------------------------------


def _scalar(f: Callable, p: float) -> float:
    return float(np.asarray(f(np.asarray([p], dtype=np.float64)), dtype=np.float64)[0])


def _series_log_expectation(series: AtomSeries, log_g: Callable, tol: float) -> XR:
    """Sum w_j * g(p_j) over an infinite decreasing-atom family, g >= 0.

    Exact partial sums in log space with a geometric tail bound once the
    log-terms decay; divergence certified when the log-terms stop decreasing
    while staying above the underflow floor (terms not tending to 0), or when
    a single term is already astronomically large.
    """
    log_sum = -math.inf
    prev_logterm = None
    nondec = 0
    cut = math.log(max(tol, 1e-15)) - 10.0
    for j in range(_SERIES_JMAX):
        p, logw = series.term(j)
        logterm = logw + _scalar(log_g, p)
        if logterm > 709.0:
            return INF
        if not math.isinf(logterm):
            log_sum = float(np.logaddexp(log_sum, logterm))
        if prev_logterm is not None and not math.isinf(prev_logterm) and not math.isinf(logterm):
            diff = logterm - prev_logterm
            if diff >= -1e-12 and logterm > LOG_TINY:
                nondec += 1
                if j >= 6 and nondec >= 3:
                    return INF
            else:
                nondec = 0
            if diff < 0 and logterm < log_sum + cut:
                r = math.exp(diff)
                tail = logterm + math.log(r / (1.0 - r)) if r > 0.0 else -math.inf
                log_sum = float(np.logaddexp(log_sum, tail))
                return XR(math.exp(log_sum))
        prev_logterm = logterm
    raise InconclusiveConvergence("series terms neither certified convergent nor divergent")


def _probe_divergence_log(h_log: Callable[[float], float], x0: float) -> bool:
    """Certify divergence of integral(exp(h_log)) on [x0, inf).

    Walks the dyadic probe grid x0, 2*x0, 4*x0, ... accumulating the
    log-space lower sums min(h_log at endpoints) + log(width). Divergence is
    certified when the lower sums blow past a huge threshold, or when the
    per-octave contributions stop decaying (a 1/x-type integrand adds a
    constant per octave). Assumes the integrand is piecewise monotone between
    probes and its octave contributions are eventually monotone, both true
    for the catalog integrands."""
    log_total = -math.inf
    x = x0
    hx = h_log(x)
    prev_piece = None
    flat = 0
    for _ in range(80):
        x2 = x * 2.0
        hx2 = h_log(x2)
        if math.isnan(hx2):
            return False
        if hx2 > 745.0:
            return True
        piece = min(hx, hx2) + math.log(x2 - x)
        log_total = float(np.logaddexp(log_total, piece))
        if log_total > math.log(_DIVERGENCE_SUM):
            return True
        if prev_piece is not None and piece > LOG_TINY:
            flat = flat + 1 if piece >= prev_piece - 1e-9 else 0
            if flat >= 12:
                return True
        prev_piece = piece
        x, hx = x2, hx2
    return False


def _probe_cutoff(h_log: Callable[[float], float], x0: float) -> float:
    """Upper cutoff for quadrature on [x0, inf): walk the dyadic grid until
    the log-integrand has fallen 80 nats below its running peak (truncation
    error ~ e^-80 relative, negligible)."""
    peak = -math.inf
    x = x0
    for _ in range(100):
        h = h_log(x)
        if not math.isnan(h) and not math.isinf(h):
            peak = max(peak, h)
        if peak > -math.inf and (math.isinf(h) or h < peak - 80.0):
            return x
        x *= 2.0
    return x


def _quad_piece(f, lo, hi, tol, points=None):
    kwargs = dict(limit=400, epsabs=tol, epsrel=max(1e-10, tol))
    if points and not math.isinf(hi):
        pts = sorted(p for p in points if lo < p < hi)
        if pts:
            kwargs["points"] = pts
    val, err = quad(f, lo, hi, **kwargs)
    if err > 10.0 * max(tol, abs(val) * 1e-6) + 1e-13:
        raise InconclusiveConvergence(f"quadrature error {err:.2e} too large on [{lo}, {hi}]")
    return val


def _quad_geometric(f, lo, hi, tol, points=None):
    """Integrate over [lo, hi], walking dyadic segments when the interval
    spans many octaves (a single adaptive pass can miss a feature that is
    narrow relative to the interval). Stops early once segment contributions
    become negligible and decreasing."""
    if hi / lo <= 16.0:
        return _quad_piece(f, lo, hi, tol, points)
    total = 0.0
    x = lo
    prev = math.inf
    fading = 0
    while x < hi:
        x2 = min(x * 2.0, hi)
        seg = _quad_piece(f, x, x2, tol, points)
        total += seg
        if abs(seg) < max(tol, abs(total)) * 1e-10 and abs(seg) <= prev:
            fading += 1
            if fading >= 3:
                break
        else:
            fading = 0
        prev = abs(seg)
        x = x2
    return total


def expectation(law: Law, g: Callable, tol: float = 1e-9, log_g: Optional[Callable] = None) -> XR:
    """Integral of a nonnegative g against the law, as an extended real.

    Atomic laws: exact weighted sums (series laws stream in log space with a
    geometric tail bound). Density laws: adaptive quadrature after divergence
    probing at unbounded support endpoints. Passing ``log_g`` keeps integrands
    that overflow double (like exp(c/p) near 0) analyzable; required for
    series laws. Raises InconclusiveConvergence when undecidable.
    """
    if isinstance(law, AtomicLaw):
        if law.series is not None:
            if log_g is None:
                def log_g(p, _g=g):
                    with np.errstate(divide="ignore"):
                        return np.log(np.asarray(_g(p), dtype=np.float64))
            return _series_log_expectation(law.series, log_g, tol)
        vals = np.asarray(g(law.atoms), dtype=np.float64)
        if np.any(vals < 0):
            raise LawError("expectation requires a nonnegative integrand")
        total = float(np.dot(np.exp(law.log_weights), vals))
        return INF if math.isinf(total) else XR(total)
    if isinstance(law, DensityLaw):
        return _density_expectation(law, g, tol, log_g)
    if isinstance(law, MixtureLaw):
        total = XR(0.0)
        for w, sub in law.parts:
            total = total + XR(w) * expectation(sub, g, tol, log_g)
        return total
    raise TypeError(f"not a law: {law!r}")


def _density_expectation(law: DensityLaw, g: Callable, tol: float,
                         log_g: Optional[Callable]) -> XR:
    a, b = law.support
    pdf = law.pdf

    if log_g is not None and law.log_pdf is not None:
        log_pdf = law.log_pdf

        def log_integrand(p: float) -> float:
            return _scalar(log_g, p) + _scalar(log_pdf, p)

        def integrand(p: float) -> float:
            return math.exp(min(log_integrand(p), 709.0))

    else:
        def log_integrand(p: float) -> float:
            v = integrand(p)
            return math.log(v) if v > 0 else -math.inf

        def integrand(p: float) -> float:
            arr = np.asarray([p], dtype=np.float64)
            d = float(pdf(arr)[0])
            if d == 0.0:
                return 0.0
            return float(np.asarray(g(arr), dtype=np.float64)[0]) * d

    split = min(1.0, b)
    total = 0.0
    if a < split:
        # small-p part in u = 1/p coordinates (tames the 0+ endpoint)
        u_hi = math.inf if a == 0.0 else 1.0 / a
        u_lo = 1.0 / split

        def u_log_integrand(u: float) -> float:
            return log_integrand(1.0 / u) - 2.0 * math.log(u)

        def u_integrand(u: float) -> float:
            return integrand(1.0 / u) / (u * u)

        if math.isinf(u_hi):
            if _probe_divergence_log(u_log_integrand, max(u_lo, 1.0)):
                return INF
            u_hi = _probe_cutoff(u_log_integrand, max(u_lo, 1.0))
        total += _quad_geometric(u_integrand, u_lo, u_hi, tol,
                                 points=tuple(1.0 / p for p in law.quad_points if a < p < split))
    if split < b:
        hi = b
        if math.isinf(b):
            if _probe_divergence_log(log_integrand, max(split, 1.0)):
                return INF
            hi = _probe_cutoff(log_integrand, max(split, 1.0))
        total += _quad_geometric(integrand, split, hi, tol,
                                 points=tuple(p for p in law.quad_points if split < p < hi))
    if total < -1e-12:
        raise LawError("expectation requires a nonnegative integrand")
    return XR(max(total, 0.0))


def signed_expectation(law: Law, g: Callable, tol: float = 1e-9) -> float:
    """Integral of a bounded (possibly signed) g against the law.

    Atomic laws sum over materialized atoms (for series laws the dropped
    tail carries zero double-precision weight). Density laws integrate over
    a cutoff chosen from the density's own decay, which a bounded g cannot
    disturb.
    """
    if isinstance(law, AtomicLaw):
        vals = np.asarray(g(law.atoms), dtype=np.float64)
        return float(np.dot(np.exp(law.log_weights), vals))
    if isinstance(law, DensityLaw):
        a, b = law.support
        pdf = law.pdf

        def integrand(p: float) -> float:
            arr = np.asarray([p], dtype=np.float64)
            d = float(pdf(arr)[0])
            return 0.0 if d == 0.0 else d * float(np.asarray(g(arr), dtype=np.float64)[0])

        def log_density(p: float) -> float:
            return float(np.asarray(law.log_mass(np.asarray([p])))[0])

        split = min(1.0, b)
        total = 0.0
        if a < split:
            u_hi = math.inf if a == 0.0 else 1.0 / a

            def u_integrand(u: float) -> float:
                return integrand(1.0 / u) / (u * u)

            if math.isinf(u_hi):
                u_hi = _probe_cutoff(lambda u: log_density(1.0 / u) - 2.0 * math.log(u),
                                     max(1.0 / split, 1.0))
            total += _quad_geometric(u_integrand, 1.0 / split, u_hi, tol,
                                     points=tuple(1.0 / p for p in law.quad_points if a < p < split))
        if split < b:
            hi = b if math.isfinite(b) else _probe_cutoff(log_density, max(split, 1.0))
            total += _quad_geometric(integrand, split, hi, tol,
                                     points=tuple(p for p in law.quad_points if split < p < hi))
        return total
    if isinstance(law, MixtureLaw):
        return sum(w * signed_expectation(sub, g, tol) for w, sub in law.parts)
    raise TypeError(f"not a law: {law!r}")


def law_mean(law: Law, tol: float = 1e-9) -> XR:
    """The mean of the law (its first moment)."""
    return expectation(law, lambda p: p, tol, log_g=np.log)


def law_mean_inverse(law: Law, tol: float = 1e-9) -> XR:
    """The harmonic moment E[1/V] (the mean interarrival time of a speed law)."""
    return expectation(law, lambda p: 1.0 / p, tol, log_g=lambda p: -np.log(p))


# ---------------------------------------------------------------------------
# Tail exponents
# ---------------------------------------------------------------------------


def exp_over_p_moment(phi: Law, c: float, tol: float = 1e-9) -> XR:
    """E[exp(c/V)] as an extended real (the xi finiteness predicate)."""
    if c == 0.0:
        return XR(1.0)

    def g(p):
        p = np.asarray(p, dtype=np.float64)
        with np.errstate(over="ignore"):
            return np.exp(c / p)

    return expectation(phi, g, tol, log_g=lambda p: c / np.asarray(p, dtype=np.float64))


def compute_xi(phi: Law, tol: float = 1e-6, c_max: float = 1e3) -> XR:
    """Bisection for xi = sup{c : E[exp(c/V)] < inf}, capped at c_max.

    Returns 0 when already divergent at c = tol and +inf when still finite
    at c_max. A finite atomic law without a tail series has xi = +inf
    exactly (every moment is a finite sum).
    """
    if isinstance(phi, AtomicLaw) and phi.series is None:
        return INF

    def finite(c: float) -> bool:
        return exp_over_p_moment(phi, c, tol=1e-7).is_finite

    if not finite(tol):
        return XR(0.0)
    if finite(c_max):
        return INF
    lo, hi = tol, c_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if finite(mid):
            lo = mid
        else:
            hi = mid
    return XR(0.5 * (lo + hi))


def _series_atoms_in(law: AtomicLaw, lo: float, hi: float) -> list[tuple[float, float]]:
    """(atom, log_weight) pairs of non-materialized series atoms in [lo, hi)."""
    if law.series is None:
        return []
    floor = float(law.atoms[0])
    if lo >= floor:
        return []
    out = []
    j = law.atoms.size
    for _ in range(5000):
        p, lw = law.series.term(j)
        if p < lo or p <= 0.0:
            return out
        if lo <= p < hi:
            out.append((p, lw))
        j += 1
    raise InconclusiveConvergence("series atom scan did not reach the window floor")


def window_probability(phi: Law, eps: float, delta: float) -> float:
    """Mass of the half-open window [eps(1-delta), eps(1+delta)).

    Exact for atomic laws (direct weight sums with half-open semantics) and
    for densities with an exact cdf.
    """
    if not (eps > 0 and 0 < delta < 1):
        raise ValueError("need eps > 0 and delta in (0,1)")
    lo, hi = eps * (1.0 - delta), eps * (1.0 + delta)
    return _interval_mass(phi, lo, hi)


def _interval_mass(phi: Law, lo: float, hi: float) -> float:
    if isinstance(phi, AtomicLaw):
        i = np.searchsorted(phi.atoms, lo, side="left")
        j = np.searchsorted(phi.atoms, hi, side="left")
        total = float(np.exp(phi.log_weights[i:j]).sum())
        total += sum(math.exp(lw) for _, lw in _series_atoms_in(phi, lo, hi))
        return total
    if isinstance(phi, MixtureLaw):
        return sum(w * _interval_mass(sub, lo, hi) for w, sub in phi.parts)
    lw = _log_interval_mass(phi, lo, hi)
    return 0.0 if lw == -math.inf else math.exp(lw)


def log_window_probability(phi: Law, eps: float, delta: float) -> float:
    """Log of the window mass; -inf for an exactly empty window.

    Exact in log space for atomic laws and for densities with a log-cdf,
    which keeps windows far below double underflow usable.
    """
    if not (eps > 0 and 0 < delta < 1):
        raise ValueError("need eps > 0 and delta in (0,1)")
    lo, hi = eps * (1.0 - delta), eps * (1.0 + delta)
    return _log_interval_mass(phi, lo, hi)


def _log_interval_mass(phi: Law, lo: float, hi: float) -> float:
    if isinstance(phi, AtomicLaw):
        i = np.searchsorted(phi.atoms, lo, side="left")
        j = np.searchsorted(phi.atoms, hi, side="left")
        logs = list(phi.log_weights[i:j])
        logs.extend(lw for _, lw in _series_atoms_in(phi, lo, hi))
        return _logsumexp(logs)
    if isinstance(phi, DensityLaw):
        a, b = phi.support
        if hi <= a or lo >= b:
            return -math.inf
        if phi.log_cdf is not None:
            la, lb = phi.log_cdf(max(lo, a)), phi.log_cdf(min(hi, b))
            if lb <= la:
                return -math.inf
            if math.isinf(la):
                return lb
            return lb + math.log1p(-math.exp(la - lb))
        val = _quad_piece(lambda p: float(phi.pdf(np.asarray([p]))[0]),
                          max(lo, a), min(hi, b), 1e-12, points=phi.quad_points)
        return math.log(val) if val > 0 else -math.inf
    if isinstance(phi, MixtureLaw):
        logs = []
        for w, sub in phi.parts:
            lm = _log_interval_mass(sub, lo, hi)
            if not math.isinf(lm):
                logs.append(math.log(w) + lm)
        return _logsumexp(logs)
    raise TypeError(f"not a law: {phi!r}")


def _window_certified_empty(phi: Law, lo: float, hi: float) -> bool:
    """True only when the window provably carries no mass (atoms enumerated,
    support disjoint), never from numerical underflow."""
    if isinstance(phi, AtomicLaw):
        i = np.searchsorted(phi.atoms, lo, side="left")
        j = np.searchsorted(phi.atoms, hi, side="left")
        return j <= i and not _series_atoms_in(phi, lo, hi)
    if isinstance(phi, DensityLaw):
        a, b = phi.support
        return hi <= a or lo >= b
    if isinstance(phi, MixtureLaw):
        return all(_window_certified_empty(sub, lo, hi) for _, sub in phi.parts)
    raise TypeError(f"not a law: {phi!r}")


@dataclass(frozen=True)
class TailExponentReport:
    xi: XR
    xi_bar_lower: XR
    xi_bar_upper: XR
    diagnostics: dict

    def __post_init__(self):
        if not (self.xi_bar_lower <= self.xi_bar_upper):
            raise ValueError("xi_bar bracket inverted")
        if not (self.xi <= self.xi_bar_upper):
            raise ValueError("xi exceeds the xi_bar upper bracket")


def estimate_xi_bar(phi: Law, delta_grid: Sequence[float], eps_grid: Sequence[float],
                    xi: Optional[XR] = None) -> TailExponentReport:
    """Bracket xi_bar on finite grids.

    For each delta, the liminf over eps is approximated on the smallest half
    of the eps grid by the max of -eps*log(window mass); the delta -> 0 trend
    is monotone, so the lower bracket is the max over delta and the upper
    bracket corrects for the window half-width. Certified-empty windows
    recurring on a grid tail set the +inf flag (and then both brackets).
    """
    delta_grid = sorted({float(d) for d in delta_grid}, reverse=True)
    eps_grid = sorted({float(e) for e in eps_grid}, reverse=True)
    if not delta_grid or not eps_grid:
        raise ValueError("grids must be nonempty")
    tail = eps_grid[-max(3, len(eps_grid) // 2):]

    per_delta: dict[float, float] = {}
    empty_hits: dict[float, int] = {}
    uncertified_zeros = 0
    for d in delta_grid:
        finite_vals = []
        empties = 0
        for e in tail:
            lo, hi = e * (1.0 - d), e * (1.0 + d)
            lw = log_window_probability(phi, e, d)
            if lw == -math.inf:
                if _window_certified_empty(phi, lo, hi):
                    empties += 1
                else:
                    uncertified_zeros += 1
            else:
                finite_vals.append(-e * lw)
        per_delta[d] = max(finite_vals) if finite_vals else math.nan
        empty_hits[d] = empties

    d_min = delta_grid[-1]
    infinite = any(n >= 2 for n in empty_hits.values())
    if infinite:
        lower = upper = INF
    else:
        finite_inner = [v for v in per_delta.values() if not math.isnan(v)]
        if not finite_inner:
            raise InconclusiveConvergence("no usable window values on the grid")
        lo_val = max(finite_inner)
        lower = XR(lo_val)
        upper = XR(lo_val * (1.0 + d_min) / (1.0 - d_min))
    if xi is None:
        xi = compute_xi(phi)
    diagnostics = {
        "delta_grid": delta_grid,
        "eps_tail": tail,
        "per_delta": per_delta,
        "empty_windows": empty_hits,
        "uncertified_zeros": uncertified_zeros,
        "infinite_flag": infinite,
    }
    return TailExponentReport(xi=xi, xi_bar_lower=lower, xi_bar_upper=upper,
                              diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# Size-biasing and tilting
# ---------------------------------------------------------------------------


def size_bias(pi: Law) -> Law:
    """The law p*pi(dp)/pi(p) (speeds that make cycle time-averages match pi)."""
    m = law_mean(pi)
    if m.is_inf:
        raise InfiniteMean("size bias needs a finite mean")
    if m.value <= 0.0:
        raise ZeroMean("size bias needs a positive mean")
    return _exp_tilt(pi, np.log, math.log(m.value))


def inverse_size_bias(law: Law) -> Law:
    """The law pi(dp)/(p * pi(1/p)): weight by 1/p. Inverts size_bias."""
    h = law_mean_inverse(law)
    if h.is_inf:
        raise InfiniteMean("inverse size bias needs a finite harmonic moment")
    if h.value <= 0.0:
        raise ZeroMean("inverse size bias needs a positive harmonic moment")
    return _exp_tilt(law, lambda p: -np.log(p), math.log(h.value))


def _exp_tilt(law: Law, log_factor: Callable, log_norm: float) -> Law:
    """Reweight a law by exp(log_factor(p) - log_norm)."""
    if isinstance(law, AtomicLaw):
        series = None
        if law.series is not None:
            src = law.series.term

            def term(j, _src=src):
                p, lw = _src(j)
                return p, lw + float(np.asarray(log_factor(np.asarray([p])))[0]) - log_norm

            series = AtomSeries(term)
        return AtomicLaw(
            atoms=law.atoms.copy(),
            log_weights=law.log_weights + np.asarray(log_factor(law.atoms), dtype=np.float64) - log_norm,
            role=law.role,
            series=series,
        )
    if isinstance(law, DensityLaw):
        src_pdf = law.pdf
        src_logpdf = law.log_pdf

        def pdf(p):
            p = np.asarray(p, dtype=np.float64)
            out = src_pdf(p)
            pos = out > 0
            fac = np.zeros_like(p)
            fac[pos] = np.exp(np.asarray(log_factor(p[pos]), dtype=np.float64) - log_norm)
            return out * fac

        log_pdf = None
        if src_logpdf is not None:
            def log_pdf(p, _f=src_logpdf):
                p = np.asarray(p, dtype=np.float64)
                return (np.asarray(_f(p), dtype=np.float64)
                        + np.asarray(log_factor(p), dtype=np.float64) - log_norm)

        return DensityLaw(pdf=pdf, support=law.support, role=law.role,
                          log_pdf=log_pdf, quad_points=law.quad_points)
    if isinstance(law, MixtureLaw):
        # components tilt individually; mixture weights pick up component normalizers
        parts = []
        for w, sub in law.parts:
            sub_norm = expectation(sub, lambda p: np.exp(np.asarray(log_factor(p), dtype=np.float64)),
                                   log_g=log_factor)
            if sub_norm.is_inf:
                raise InfiniteMean("mixture component tilt diverges")
            parts.append((w * sub_norm.value / math.exp(log_norm),
                          _exp_tilt(sub, log_factor, math.log(sub_norm.value))))
        total = sum(w for w, _ in parts)
        return MixtureLaw(parts=tuple((w / total, sub) for w, sub in parts), role=law.role)
    raise TypeError(f"not a law: {law!r}")


def tilt_by_boundary_function(phi: Law, fbar1: Callable) -> tuple[Law, float]:
    """Tilt by exp(fbar1(v)/v); returns (tilted law, normalizer C_f).

    ``fbar1(v)`` is the unit-cycle average of a boundary test function at
    speed v, so C_f = E[exp(fbar1(V)/V)].
    """

    def g(p):
        p = np.asarray(p, dtype=np.float64)
        return np.exp(np.asarray(fbar1(p), dtype=np.float64) / p)

    def log_g(p):
        p = np.asarray(p, dtype=np.float64)
        return np.asarray(fbar1(p), dtype=np.float64) / p

    c_f = expectation(phi, g, log_g=log_g)
    if c_f.is_inf:
        raise DivergentNormalizer("boundary tilt normalizer diverges")
    if c_f.value <= 0.0:
        raise DivergentNormalizer("boundary tilt normalizer vanishes")

    def log_factor(p):
        p = np.asarray(p, dtype=np.float64)
        return np.asarray(fbar1(p), dtype=np.float64) / p

    return _exp_tilt(phi, log_factor, math.log(c_f.value)), c_f.value


# ---------------------------------------------------------------------------
# Config dialect
# ---------------------------------------------------------------------------


def law_from_config(cfg: dict) -> Law:
    """Build a law from the structured config dialect.

    kinds: atomic {atoms, weights}, density/builtin {name, params...},
    mixture {parts: [{weight, law}]}.
    """
    kind = cfg.get("kind")
    if kind == "atomic":
        return atomic(cfg["atoms"], cfg["weights"])
    if kind in ("density", "builtin"):
        name = cfg["name"]
        if name == "dyadic":
            return dyadic()
        if name == "exp_interarrival":
            return exp_interarrival(float(cfg["xi0"]))
        if name == "polynomial":
            return polynomial(float(cfg["kappa"]))
        raise ValueError(f"unknown built-in law {name!r}")
    if kind == "mixture":
        parts = tuple((float(p["weight"]), law_from_config(p["law"])) for p in cfg["parts"])
        return MixtureLaw(parts=parts)
    raise ValueError(f"unknown law kind {kind!r}")


def law_to_config(law: Law) -> dict:
    spec = getattr(law, "spec", None)
    if spec is not None:
        return dict(spec)
    if isinstance(law, AtomicLaw) and law.series is None:
        return {"kind": "atomic", "atoms": law.atoms.tolist(), "weights": law.weights.tolist()}
    if isinstance(law, MixtureLaw):
        return {"kind": "mixture",
                "parts": [{"weight": w, "law": law_to_config(sub)} for w, sub in law.parts]}
    raise ValueError("law has no serializable config")
