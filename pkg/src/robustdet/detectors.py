"""Detection statistics for adaptive radar detection with secondary data.

Implemented family, all functions of the cell under test z, the secondary
scatter S (factorized), and the nominal steering v:

- Kelly's statistic and the AMF statistic;
- the GLRT for a rank-one perturbation of the signature (search over a
  bounded nuisance scale b and a segment parameter t);
- the covariance-shaped perturbation GLRT and its parametric generalization
  indexed by epsilon >= 0 (epsilon = 0 recovers the plain statistic);
- the sufficient pair (t_tilde, b) through which the epsilon family and its
  null distributions are expressed.

All (K+1)-power expressions are accumulated in the log domain; natural-scale
values are produced by exponentiation at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateSteering, DomainError, InvalidZeta, ParallelUV, ZeroVector
from .linalg import HermitianPD, as_vector, proj_perp

PARALLEL_UV_RTOL = 1e-12  # ||Pperp_u v||^2 / ||v||^2 below this routes to the closed form

# Golden-section constants for the optional local refinement.
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_GOLDEN_TOL = 1e-9
_GOLDEN_ITERS = 80


class DetectorKind(str, Enum):
    KELLY = "kelly"
    AMF = "amf"
    RANK_ONE_GLRT = "rank_one_glrt"
    SIGMA_C = "sigma_c"
    PARAMETRIC_EPSILON = "parametric_epsilon"


@dataclass(frozen=True)
class SufficientPair:
    """The pair (t_tilde, b): monotone Kelly transform and the beta-distributed
    companion scalar. t_tilde >= 0 and 0 < b <= 1 always."""

    t_tilde: float
    b: float


@dataclass(frozen=True)
class RankOneGlrtParams:
    """Search parameters for the rank-one perturbation GLRT.

    u is the perturbation direction (normalized to unit Euclidean norm at
    construction). The nuisance scale b is searched on a logarithmic grid
    over [0, b_max] (b = 0 prepended, smallest positive node b_max * 1e-6)
    and the segment parameter t on a uniform grid over [0, 1]; refine turns
    on coordinate-wise golden-section polish around the best grid cell.
    """

    u: np.ndarray
    b_max: float = 1e3
    n_b: int = 60
    n_t: int = 41
    refine: bool = True

    def __post_init__(self):
        u = as_vector(self.u)
        nrm = float(np.linalg.norm(u))
        if nrm <= 0.0:
            raise ZeroVector("perturbation direction u must be nonzero")
        object.__setattr__(self, "u", u / nrm)
        if not self.b_max > 0:
            raise ValueError("b_max must be positive")
        if self.n_b < 2 or self.n_t < 2:
            raise ValueError("n_b and n_t must be at least 2")


@dataclass(frozen=True)
class DetectorSpec:
    """A detector choice plus its parameters; name overrides the CSV label."""

    kind: DetectorKind
    epsilon: float = 0.0
    rank_one: RankOneGlrtParams | None = None
    name: str | None = None

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.kind is DetectorKind.RANK_ONE_GLRT and self.rank_one is None:
            raise ValueError("rank_one params required for the rank-one GLRT")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind is DetectorKind.PARAMETRIC_EPSILON:
            return f"epsilon_{self.epsilon:g}"
        return self.kind.value


def kelly(name: str | None = None) -> DetectorSpec:
    return DetectorSpec(kind=DetectorKind.KELLY, name=name)


def amf(name: str | None = None) -> DetectorSpec:
    return DetectorSpec(kind=DetectorKind.AMF, name=name)


def sigma_c(name: str | None = None) -> DetectorSpec:
    return DetectorSpec(kind=DetectorKind.SIGMA_C, name=name)


def parametric_epsilon(epsilon: float, name: str | None = None) -> DetectorSpec:
    return DetectorSpec(kind=DetectorKind.PARAMETRIC_EPSILON, epsilon=epsilon, name=name)


def rank_one_glrt(params: RankOneGlrtParams, name: str | None = None) -> DetectorSpec:
    return DetectorSpec(kind=DetectorKind.RANK_ONE_GLRT, rank_one=params, name=name)


@dataclass(frozen=True)
class _CoreForms:
    """Whitened quantities shared by every statistic for one (z, S, v)."""

    z_w: np.ndarray
    v_w: np.ndarray
    zz: float      # z^H S^-1 z
    vv: float      # v^H S^-1 v
    vz: complex    # v^H S^-1 z
    p_perp_v_z: float  # ||Pperp_{v_w} z_w||^2, clamped nonnegative

    @property
    def residual_plus_one(self) -> float:
        return 1.0 + self.p_perp_v_z


def _core_forms(z, scatter: HermitianPD, v) -> _CoreForms:
    # whiten() validates shape and finiteness of the stacked columns
    zv_cols = scatter.whiten(np.column_stack([z, v]).astype(complex, copy=False))
    z_w = zv_cols[:, 0]
    v_w = zv_cols[:, 1]
    zz = float(np.vdot(z_w, z_w).real)
    vv = float(np.vdot(v_w, v_w).real)
    if not vv > 0.0:
        raise DegenerateSteering("steering vector whitens to zero energy")
    vz = complex(np.vdot(v_w, z_w))
    p_perp_v_z = max(zz - abs(vz) ** 2 / vv, 0.0)
    return _CoreForms(z_w=z_w, v_w=v_w, zz=zz, vv=vv, vz=vz, p_perp_v_z=p_perp_v_z)


def sufficient_pair(z, scatter: HermitianPD, v) -> SufficientPair:
    """Compute (t_tilde, b) from the three whitened inner products."""
    return _sufficient_pair_from(_core_forms(z, scatter, v))


def _sufficient_pair_from(c: _CoreForms) -> SufficientPair:
    denom = c.residual_plus_one
    return SufficientPair(t_tilde=(abs(c.vz) ** 2 / c.vv) / denom, b=1.0 / denom)


def kelly_statistic(z, scatter: HermitianPD, v) -> float:
    """|v^H S^-1 z|^2 / (v^H S^-1 v (1 + z^H S^-1 z)), in [0, 1)."""
    c = _core_forms(z, scatter, v)
    return abs(c.vz) ** 2 / (c.vv * (1.0 + c.zz))


def amf_statistic(z, scatter: HermitianPD, v) -> float:
    """|v^H S^-1 z|^2 / (v^H S^-1 v), nonnegative."""
    c = _core_forms(z, scatter, v)
    return abs(c.vz) ** 2 / c.vv


def zeta_shape(k: int, n: int, epsilon: float) -> float:
    """Branch shape parameter zeta = (K+1)(1+epsilon)/N; must exceed 1."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    zeta = (k + 1) * (1.0 + epsilon) / n
    if zeta <= 1.0:
        raise InvalidZeta(f"zeta = {zeta} must exceed 1 (k={k}, n={n}, epsilon={epsilon})")
    return zeta


def sigma_c_statistic(z, scatter: HermitianPD, v, epsilon: float, k: int) -> float:
    """Parametric covariance-perturbation GLRT statistic; epsilon = 0 is the
    plain variant. k is the number of secondary vectors behind the scatter."""
    c = _core_forms(z, scatter, v)
    return math.exp(_sigma_c_log_from(c, epsilon, k))


def _sigma_c_log_from(c: _CoreForms, epsilon: float, k: int) -> float:
    n = c.z_w.shape[0]
    zeta = zeta_shape(k, n, epsilon)
    pz = c.p_perp_v_z
    if pz > 1.0 / (zeta - 1.0):
        return (
            math.log1p(c.zz)
            + math.log1p(-1.0 / zeta)
            - (math.log(zeta - 1.0) + math.log(pz)) / zeta
        )
    return math.log1p(c.zz) - math.log1p(pz)


def sigma_c_from_pair(pair: SufficientPair, n: int, k: int, epsilon: float) -> float:
    """The same statistic expressed through (t_tilde, b); the branch condition
    becomes b < 1 - 1/zeta."""
    zeta = zeta_shape(k, n, epsilon)
    t1 = math.log1p(pair.t_tilde)
    if pair.b < 1.0 - 1.0 / zeta:
        log_val = (
            t1
            - math.log(pair.b)
            + math.log1p(-1.0 / zeta)
            - (math.log(zeta - 1.0) + math.log(1.0 / pair.b - 1.0)) / zeta
        )
        return math.exp(log_val)
    return math.exp(t1)


def scale_profile(nu: float, a: float, k: int, n: int) -> float:
    """(1+nu)^(N/(K+1)) (1 + a/(1+nu)), the profile function minimized below."""
    return (1.0 + nu) ** (n / (k + 1.0)) * (1.0 + a / (1.0 + nu))


def minimize_scale_profile(a: float, k: int, n: int) -> tuple[float, float]:
    """Unique minimizer of scale_profile over nu >= 0 and its value."""
    if a <= 0:
        raise DomainError("a must be positive")
    if k < n:
        raise DomainError("k must be at least n")
    ratio = (k + 1.0) / n
    nu_hat = max((ratio - 1.0) * a - 1.0, 0.0)
    lead = (k + 1.0 - n) / n * a
    if lead > 1.0:
        f_min = lead ** (n / (k + 1.0)) * (k + 1.0) / (k + 1.0 - n)
    else:
        f_min = 1.0 + a
    return nu_hat, f_min


def alpha_endpoints(z_w, v_w, u_w) -> tuple[complex, complex]:
    """Least-squares endpoints of the segment carrying the optimal amplitude.

    alpha_1 minimizes ||z_w - alpha v_w||^2; alpha_2 minimizes the same
    residual after projecting both vectors orthogonally to u_w. Raises
    ParallelUV when the projected steering is numerically zero, in which case
    the caller must route to the Kelly-equivalent closed form.
    """
    z_w = as_vector(z_w)
    v_w = as_vector(v_w, z_w.shape[0])
    u_w = as_vector(u_w, z_w.shape[0])
    vv = np.vdot(v_w, v_w).real
    if not vv > 0.0:
        raise DegenerateSteering("whitened steering has zero energy")
    pu_v = proj_perp(u_w, v_w)
    c2 = np.vdot(pu_v, pu_v).real
    if c2 < PARALLEL_UV_RTOL * vv:
        raise ParallelUV(
            f"projected steering energy {c2:.3e} below {PARALLEL_UV_RTOL:g} * {vv:.3e}"
        )
    alpha_1 = complex(np.vdot(v_w, z_w) / vv)
    alpha_2 = complex(np.vdot(pu_v, proj_perp(u_w, z_w)) / c2)
    return alpha_1, alpha_2


def rank_one_alpha_objective(b: float, alphas, z_w, v_w, u_w, k: int) -> np.ndarray:
    """Log objective of the rank-one GLRT at fixed b as a function of the
    complex amplitude alpha, up to terms independent of (b, alpha).

    Vectorized over alphas; used by the segment-geometry oracle checks.
    """
    al = np.atleast_1d(np.asarray(alphas, dtype=complex))
    d = z_w[:, None] - al[None, :] * v_w[:, None]
    y1 = np.einsum("ij,ij->j", d.conj(), d).real
    uu = np.vdot(u_w, u_w).real
    if uu < 1e-30:
        raise ZeroVector("u_w must be nonzero")
    coef = (u_w.conj() @ d) / uu
    resid = d - u_w[:, None] * coef[None, :]
    y2 = np.einsum("ij,ij->j", resid.conj(), resid).real
    return (
        -np.log1p(b)
        - (k + 1) * np.log(1.0 + b + y1)
        + (k + 1) * (np.log(1.0 + b + y2) - np.log1p(y2))
    )


def b_search_grid(b_max: float, n_b: int) -> np.ndarray:
    """Logarithmic b-grid on [0, b_max] with 0 prepended explicitly."""
    return np.concatenate([[0.0], np.geomspace(b_max * 1e-6, b_max, n_b - 1)])


def _golden_max(f, lo: float, hi: float) -> tuple[float, float]:
    """Golden-section maximization of a unimodal scalar function on [lo, hi]."""
    a, b = lo, hi
    h = b - a
    if h <= 0.0:
        return lo, f(lo)
    c = b - _INV_PHI * h
    d = a + _INV_PHI * h
    fc, fd = f(c), f(d)
    for _ in range(_GOLDEN_ITERS):
        if h <= _GOLDEN_TOL * max(1.0, abs(a) + abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            h = b - a
            c = b - _INV_PHI * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + _INV_PHI * h
            fd = f(d)
    if fc > fd:
        return c, fc
    return d, fd


def rank_one_glrt_log(z, scatter: HermitianPD, v, params: RankOneGlrtParams, k: int) -> float:
    """Log of the rank-one perturbation GLRT statistic.

    Maximizes, over the nuisance scale b in [0, b_max] and the segment
    parameter t in [0, 1], the log objective

        -log(1+b) - (K+1) log(1+b+y1(t))
        + (K+1) [log(1+b+y2(t)) - log(1+y2(t))] + (K+1) log(1+z^H S^-1 z)

    where y1 and y2 are the full and projected whitened residual energies at
    the amplitude alpha(t) = t alpha_1 + (1-t) alpha_2. When the whitened u
    is numerically parallel to the whitened steering the statistic collapses
    to the Kelly-equivalent closed form log((1+z^H S^-1 z)/(1+resid)).
    """
    c = _core_forms(z, scatter, v)
    return _rank_one_log_from(c, scatter.whiten(params.u), params, k)


def _rank_one_log_from(c: _CoreForms, u_w, params: RankOneGlrtParams, k: int) -> float:
    pz = c.p_perp_v_z
    try:
        alpha_1, alpha_2 = alpha_endpoints(c.z_w, c.v_w, u_w)
    except ParallelUV:
        return math.log1p(c.zz) - math.log1p(pz)
    pu_v = proj_perp(u_w, c.v_w)
    pu_z = proj_perp(u_w, c.z_w)
    c1 = c.vv
    c2 = np.vdot(pu_v, pu_v).real
    r2 = abs(alpha_1 - alpha_2) ** 2
    proj_resid = max(np.vdot(pu_z, pu_z).real - abs(np.vdot(pu_v, pu_z)) ** 2 / c2, 0.0)

    t_grid = np.linspace(0.0, 1.0, params.n_t)
    y1 = pz + (1.0 - t_grid) ** 2 * r2 * c1
    y2 = proj_resid + t_grid**2 * r2 * c2
    b_grid = b_search_grid(params.b_max, params.n_b)

    zz_term = (k + 1) * math.log1p(c.zz)
    b_col = b_grid[:, None]
    phi = (
        -np.log1p(b_grid)[:, None]
        - (k + 1) * np.log(1.0 + b_col + y1[None, :])
        + (k + 1) * (np.log(1.0 + b_col + y2[None, :]) - np.log1p(y2)[None, :])
        + zz_term
    )
    flat_best = int(np.argmax(phi))
    j, i = np.unravel_index(flat_best, phi.shape)
    best = float(phi[j, i])
    if not params.refine:
        return best

    def phi_at(b: float, t: float) -> float:
        yy1 = pz + (1.0 - t) ** 2 * r2 * c1
        yy2 = proj_resid + t * t * r2 * c2
        return (
            -math.log1p(b)
            - (k + 1) * math.log(1.0 + b + yy1)
            + (k + 1) * (math.log(1.0 + b + yy2) - math.log1p(yy2))
            + zz_term
        )

    b_best = float(b_grid[j])
    t_best = float(t_grid[i])
    for _ in range(2):
        t_lo = float(t_grid[max(i - 1, 0)])
        t_hi = float(t_grid[min(i + 1, params.n_t - 1)])
        t_best, _ = _golden_max(lambda t: phi_at(b_best, t), t_lo, t_hi)
        b_lo = float(b_grid[max(j - 1, 0)])
        b_hi = float(b_grid[min(j + 1, params.n_b - 1)])
        b_best, val = _golden_max(lambda b: phi_at(b, t_best), b_lo, b_hi)
        best = max(best, val)
    return best


def rank_one_glrt_statistic(z, scatter: HermitianPD, v, params: RankOneGlrtParams, k: int) -> float:
    """Natural-scale rank-one GLRT statistic (exp of rank_one_glrt_log)."""
    return math.exp(rank_one_glrt_log(z, scatter, v, params, k))


def decide(statistic: float, eta: float) -> bool:
    """Detection decision: strictly above threshold means detect."""
    return statistic > eta


def evaluate(spec: DetectorSpec, z, scatter: HermitianPD, v, k: int) -> float:
    """Dispatch one statistic evaluation; k is the secondary sample count."""
    return evaluate_all([spec], z, scatter, v, k)[0]


def evaluate_all(specs, z, scatter: HermitianPD, v, k: int) -> list[float]:
    """Evaluate several statistics on one dataset, sharing the whitening."""
    c = _core_forms(z, scatter, v)
    out = []
    for spec in specs:
        if spec.kind is DetectorKind.KELLY:
            out.append(abs(c.vz) ** 2 / (c.vv * (1.0 + c.zz)))
        elif spec.kind is DetectorKind.AMF:
            out.append(abs(c.vz) ** 2 / c.vv)
        elif spec.kind in (DetectorKind.SIGMA_C, DetectorKind.PARAMETRIC_EPSILON):
            eps = spec.epsilon if spec.kind is DetectorKind.PARAMETRIC_EPSILON else 0.0
            out.append(math.exp(_sigma_c_log_from(c, eps, k)))
        elif spec.kind is DetectorKind.RANK_ONE_GLRT:
            u_w = scatter.whiten(spec.rank_one.u)
            out.append(math.exp(_rank_one_log_from(c, u_w, spec.rank_one, k)))
        else:
            raise ValueError(f"unknown detector kind {spec.kind!r}")
    return out
