"""Deterministic fluid-limit dynamics of the occupancy vector.

fluid_step applies the one-slot expectation map: cells (class, age) are
served in decreasing order of their index value until the budget alpha
is spent, ties sharing the residual budget proportionally to their mass,
and every class then ages or resets with its own success probability.

Inside the region j_wstar, where the budget saturates exactly around the
critical index value w_star, the map is affine. assemble_linear builds
that affine map explicitly: one coordinate per class is eliminated
through the per-class mass constraint (the age l_star_k - 1 coordinate
for k != m, age l_star_m for the critical class), giving z' = Q z + c on
the reduced coordinates. The spectral radius of Q certifies local
geometric convergence to the fixed point z_star and is computed by two
independent routes that must agree.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, DegenerateThresholdError, ShapeError
from .index import TIE_TOL, whittle_index_table
from .model import NetworkConfig, OccupancyVector
from .relaxed import RelaxedSolution

REGION_TOL = 1e-12
AFFINE_TOL = 1e-10
ROUTE_TOL = 1e-8
NILPOTENT_TOL = 1e-9
ZERO_DIST = 1e-14


@dataclass(frozen=True, eq=False)
class LinearRegionSystem:
    """Affine map z' = q z + c on the reduced coordinates of j_wstar.

    reduction[k] is the 1-based age coordinate eliminated for class k.
    q is block structured: one (l-1) x (l-1) diagonal block per class,
    with off-diagonal coupling only in the critical class's block row.
    """

    q: np.ndarray
    c: np.ndarray
    reduction: tuple[int, ...]
    p: tuple[float, ...]
    l_star: tuple[int, ...]
    m: int
    l: int


@dataclass(frozen=True, eq=False)
class FluidTrajectory:
    """Distances to z_star, region membership flags, and tail contraction."""

    distances: np.ndarray
    in_region: np.ndarray
    contraction: float | None
    converged: bool
    final: OccupancyVector


def _as_array(z) -> np.ndarray:
    if isinstance(z, OccupancyVector):
        return np.array(z.z, dtype=float)
    return np.array(z, dtype=float)


@lru_cache(maxsize=32)
def _descending_groups(cfg: NetworkConfig) -> tuple:
    """Flat cell indices grouped by equal index value, best first."""
    table = whittle_index_table(cfg.p_vector(), cfg.l).ravel()
    order = np.argsort(-table, kind="stable")
    groups = []
    current = [order[0]]
    for c in order[1:]:
        if table[current[-1]] - table[c] <= TIE_TOL:
            current.append(c)
        else:
            groups.append(np.array(current, dtype=np.intp))
            current = [c]
    groups.append(np.array(current, dtype=np.intp))
    return tuple(groups)


def fluid_step(z, cfg: NetworkConfig, sol: RelaxedSolution | None = None):
    """One slot of the fluid dynamics; total on the occupancy simplex.

    The sol argument is accepted for call-site symmetry with the linear
    region helpers; the update itself only needs the configuration.
    """
    del sol
    zmat = _as_array(z)
    if zmat.shape != (cfg.k, cfg.l):
        raise ShapeError(f"occupancy shape {zmat.shape} != {(cfg.k, cfg.l)}")
    flat = zmat.ravel()
    frac = np.zeros_like(flat)
    residual = cfg.alpha
    for cells in _descending_groups(cfg):
        if residual <= 0.0:
            break
        mass = flat[cells].sum()
        if mass <= residual:
            frac[cells] = 1.0
            residual -= mass
        else:
            if mass > 0.0:
                frac[cells] = residual / mass
            residual = 0.0
    sched = (frac * flat).reshape(cfg.k, cfg.l)
    p = cfg.p_vector()[:, None]
    nxt = np.empty_like(zmat)
    nxt[:, 0] = (p[:, 0] * sched.sum(axis=1))
    nxt[:, 1:] = zmat[:, :-1] - p * sched[:, :-1]
    nxt[:, -1] += zmat[:, -1] - p[:, 0] * sched[:, -1]
    return OccupancyVector(z=nxt)


def in_region(z, cfg: NetworkConfig, sol: RelaxedSolution) -> bool:
    """Membership in j_wstar, both edges included (closed set).

    Inside, the mass strictly above w_star is below alpha and the mass at
    or above w_star covers alpha, so the scheduled fraction is exactly
    alpha and the partially served cells are the ones tied at w_star.
    """
    zmat = _as_array(z)
    table = whittle_index_table(cfg.p_vector(), cfg.l)
    above = zmat[table > sol.w_star + TIE_TOL].sum()
    at_or_above = above + zmat[np.abs(table - sol.w_star) <= TIE_TOL].sum()
    return bool(
        above < cfg.alpha + REGION_TOL and at_or_above >= cfg.alpha - REGION_TOL
    )


def assemble_linear(cfg: NetworkConfig, sol: RelaxedSolution) -> LinearRegionSystem:
    """Build the affine map of the linear region from the flow structure.

    The full-coordinate update inside j_wstar is affine: cells above
    w_star are fully served, the critical class's tied cells absorb the
    affine residual alpha minus the fully-served mass, and every other
    cell idles. The per-class mass constraints then eliminate one
    coordinate per class, yielding (q, c) on k*(l-1) coordinates.
    """
    k_cls, l, m = cfg.k, cfg.l, sol.m
    p_vec = cfg.p_vector()
    gamma = cfg.gamma_vector()
    dim = k_cls * l

    for k in range(k_cls):
        if k != m and sol.l_star[k] < 2:
            raise DegenerateThresholdError(
                f"class {k}: effective threshold {sol.l_star[k]} leaves no "
                "coordinate to eliminate"
            )

    def cell(k: int, age: int) -> int:
        return k * l + age - 1

    # Cells served in full inside the region.
    full = np.zeros(dim, dtype=bool)
    for k in range(k_cls):
        start = sol.thresholds[m][0] if k == m else sol.l_star[k]
        for age in range(start, l + 1):
            full[cell(k, age)] = True

    # Scheduled mass as an affine function s(z) = m_s z + v_s. The
    # critical class's first tied cell carries the whole residual; the
    # class flows only see tied sums, so this matches the proportional
    # rule on the region.
    m_s = np.zeros((dim, dim))
    v_s = np.zeros(dim)
    m_s[full, full] = 1.0
    c0 = cell(m, sol.l_star[m])
    m_s[c0, full] -= 1.0
    v_s[c0] = cfg.alpha

    # Flows: z'(z, s) = a_z z + a_s s.
    a_z = np.zeros((dim, dim))
    a_s = np.zeros((dim, dim))
    for k in range(k_cls):
        for age in range(1, l + 1):
            a_s[cell(k, 1), cell(k, age)] += p_vec[k]
        for age in range(2, l + 1):
            a_z[cell(k, age), cell(k, age - 1)] += 1.0
            a_s[cell(k, age), cell(k, age - 1)] -= p_vec[k]
        a_z[cell(k, l), cell(k, l)] += 1.0
        a_s[cell(k, l), cell(k, l)] -= p_vec[k]

    b = a_z + a_s @ m_s
    d = a_s @ v_s

    # Reduced coordinates: drop age l_star-1 for k != m, age l_star for m.
    reduction = tuple(
        sol.l_star[k] if k == m else sol.l_star[k] - 1 for k in range(k_cls)
    )
    kept = [
        cell(k, age)
        for k in range(k_cls)
        for age in range(1, l + 1)
        if age != reduction[k]
    ]
    kept = np.array(kept, dtype=np.intp)
    embed = np.zeros((dim, len(kept)))
    offset = np.zeros(dim)
    for col, c in enumerate(kept):
        embed[c, col] = 1.0
    for k in range(k_cls):
        dropped = cell(k, reduction[k])
        cols = [col for col, c in enumerate(kept) if c // l == k]
        embed[dropped, cols] = -1.0
        offset[dropped] = gamma[k]

    q = (b @ embed)[kept, :]
    c_vec = (b @ offset + d)[kept]
    return LinearRegionSystem(
        q=q,
        c=c_vec,
        reduction=reduction,
        p=tuple(float(x) for x in p_vec),
        l_star=tuple(sol.l_star),
        m=m,
        l=l,
    )


def _closed_form_radius(sys: LinearRegionSystem) -> float:
    """Spectral radius from the per-class characteristic factors.

    For a non-critical class with effective threshold l_star <= l the
    nonzero eigenvalues are the roots of
    lambda**(l_star-1) + p * sum_{i<l_star-1} lambda**i; a never-served
    class (l_star = l+1) and the critical class contribute only zeros.
    """
    rho = 0.0
    for k, l_star in enumerate(sys.l_star):
        if k == sys.m or l_star == sys.l + 1:
            continue
        coeffs = np.concatenate(([1.0], np.full(l_star - 1, sys.p[k])))
        roots = np.roots(coeffs)
        if roots.size:
            rho = max(rho, float(np.abs(roots).max()))
    return rho


def _block_spectrum(sys: LinearRegionSystem) -> np.ndarray:
    """Eigenvalues of q, one diagonal class block at a time.

    Rows of a non-critical class never reference other classes, so q is
    block triangular and its spectrum is the union of the class blocks.
    The critical class and never-served classes are nilpotent by
    construction; a dense eigensolve on such a defective block returns
    spurious values of size eps**(1/dim), so those blocks are certified
    by squaring past the nilpotency index and contribute exact zeros.
    """
    d = sys.l - 1
    parts = []
    for k in range(len(sys.l_star)):
        blk = sys.q[k * d:(k + 1) * d, k * d:(k + 1) * d]
        if k == sys.m or sys.l_star[k] == sys.l + 1:
            power = blk
            exponent = 1
            while exponent < 4 * d:
                power = power @ power
                exponent *= 2
            residual = float(np.abs(power).max())
            if residual > NILPOTENT_TOL:
                raise ConvergenceError(
                    f"class {k}: expected nilpotent block, residual "
                    f"{residual:.3e} after power {exponent}"
                )
            parts.append(np.zeros(d, dtype=complex))
            continue
        try:
            parts.append(np.linalg.eigvals(blk))
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"eigenvalue solver failed: {exc}") from exc
    return np.concatenate(parts)


def spectral_radius(sys: LinearRegionSystem) -> float:
    """max |eigenvalue| of q, certified by two independent routes."""
    eigs = _block_spectrum(sys)
    dense = float(np.abs(eigs).max()) if eigs.size else 0.0
    closed = _closed_form_radius(sys)
    if abs(dense - closed) > ROUTE_TOL:
        raise ConvergenceError(
            f"spectral routes disagree: dense {dense} vs closed form {closed}"
        )
    return dense


def spectral_report(sys: LinearRegionSystem) -> dict:
    """JSON-ready report: radius, eigenvalues, and route agreement."""
    eigs = _block_spectrum(sys)
    dense = float(np.abs(eigs).max()) if eigs.size else 0.0
    closed = _closed_form_radius(sys)
    order = np.argsort(-np.abs(eigs))
    return {
        "rho": dense,
        "rho_closed_form": closed,
        "route_agreement": abs(dense - closed),
        "eigenvalues": [[float(e.real), float(e.imag)] for e in eigs[order]],
    }


def reduce_occupancy(z, sys: LinearRegionSystem) -> np.ndarray:
    """Drop the eliminated coordinate of each class."""
    zmat = _as_array(z)
    cols = [
        (k, age)
        for k in range(zmat.shape[0])
        for age in range(1, sys.l + 1)
        if age != sys.reduction[k]
    ]
    return np.array([zmat[k, age - 1] for k, age in cols])


def fluid_trajectory(
    z0, steps: int, cfg: NetworkConfig, sol: RelaxedSolution
) -> FluidTrajectory:
    """Iterate fluid_step and report convergence toward z_star.

    Records the Euclidean distance to z_star and region membership at
    every step, plus the geometric mean of the tail distance ratios as
    the empirical contraction factor.
    """
    z = _as_array(z0)
    z_star = sol.z_star.z
    distances = np.empty(steps + 1)
    flags = np.empty(steps + 1, dtype=bool)
    distances[0] = float(np.linalg.norm(z - z_star))
    flags[0] = in_region(z, cfg, sol)
    for t in range(1, steps + 1):
        z = fluid_step(z, cfg).z
        distances[t] = float(np.linalg.norm(z - z_star))
        flags[t] = in_region(z, cfg, sol)
    ratios = []
    for t in range(steps // 2, steps):
        if distances[t] > ZERO_DIST and distances[t + 1] > ZERO_DIST:
            ratios.append(distances[t + 1] / distances[t])
    if ratios:
        contraction = float(np.exp(np.mean(np.log(ratios))))
    elif distances[-1] <= 1e-10:
        contraction = 0.0
    else:
        contraction = None
    return FluidTrajectory(
        distances=distances,
        in_region=flags,
        contraction=contraction,
        converged=bool(distances[-1] < 1e-8),
        final=OccupancyVector(z=z),
    )
