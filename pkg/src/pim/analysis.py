"""Manufactured solutions, error norms, and convergence studies.

Each manufactured case pairs a closed-form u with its negative intrinsic
Laplacian f and boundary trace b, so solving with (f, b) and comparing the
reconstruction against u measures the full discretization error.  The
hand-derived f are guarded by :func:`fd_laplacian_check`, which re-derives
the Laplacian by central differences in local coordinates at random points.

The convergence sweep couples the kernel bandwidth and penalty weight to
the realized fill distance as t = c_t * h^gamma (gamma < 2/3, so the
consistency ratio h/t^(3/2) vanishes under refinement) and
beta = c_beta * sqrt(t), which lets all error contributions decay
together.  Results are recorded as CSV rows; runs are deterministic apart
from the wall-time column.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .assembly import assemble
from .interpolate import Interpolant
from .kernel import KernelParams, KernelProfile, cubic_profile
from .pointcloud import ManifoldSpec, PointCloud, fill_distance, generate
from .solve import SolveOptions, SolverError, solve

__all__ = [
    "ManufacturedCase",
    "builtin_cases",
    "get_case",
    "fd_laplacian_check",
    "l2_error",
    "h1_error",
    "boundary_l2_error",
    "l2_norm",
    "lemma_norm_check",
    "Coupling",
    "Guardrails",
    "SweepRow",
    "SweepResult",
    "SweepAborted",
    "solve_case_on_cloud",
    "convergence_sweep",
    "robin_gap_study",
    "error_floor_study",
    "SWEEP_HEADER",
]


# ---------------------------------------------------------------------------
# manufactured cases
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManufacturedCase:
    """Closed-form solution u with f = -Laplacian(u) and b = u on the boundary."""

    name: str
    spec: ManifoldSpec
    u: Callable[[np.ndarray], np.ndarray]
    grad_u: Callable[[np.ndarray], np.ndarray]   # ambient tangential gradient
    f: Callable[[np.ndarray], np.ndarray]
    b: Callable[[np.ndarray], np.ndarray]
    description: str = ""


def _interval_case() -> ManufacturedCase:
    pi = math.pi
    return ManufacturedCase(
        name="interval_sine",
        spec=ManifoldSpec.interval(0.0, 1.0, 101),
        u=lambda X: np.sin(pi * X[:, 0]),
        grad_u=lambda X: pi * np.cos(pi * X[:, 0])[:, None],
        f=lambda X: pi * pi * np.sin(pi * X[:, 0]),
        b=lambda X: np.zeros(X.shape[0]),
        description="u = sin(pi x) on [0,1], homogeneous boundary",
    )


def _disk_case() -> ManufacturedCase:
    return ManufacturedCase(
        name="disk_paraboloid",
        spec=ManifoldSpec.disk(500),
        u=lambda X: 1.0 - X[:, 0] ** 2 - X[:, 1] ** 2,
        grad_u=lambda X: -2.0 * X,
        f=lambda X: np.full(X.shape[0], 4.0),
        b=lambda X: np.zeros(X.shape[0]),
        description="u = 1 - x^2 - y^2 on the unit disk, homogeneous boundary",
    )


def _rectangle_case() -> ManufacturedCase:
    return ManufacturedCase(
        name="rectangle_quadratic",
        spec=ManifoldSpec.rectangle(1.0, 1.0, 400),
        u=lambda X: X[:, 0] ** 2 + X[:, 1] ** 2,
        grad_u=lambda X: 2.0 * X,
        f=lambda X: np.full(X.shape[0], -4.0),
        b=lambda X: X[:, 0] ** 2 + X[:, 1] ** 2,
        description="u = x^2 + y^2 on the unit square, non-homogeneous boundary",
    )


def _cap_case(z0: float = 0.5) -> ManufacturedCase:
    return ManufacturedCase(
        name="cap_linear",
        spec=ManifoldSpec.spherical_cap(z0, 500),
        u=lambda X: X[:, 2].copy(),
        # tangential part of the constant ambient field e_z on the unit sphere
        grad_u=lambda X: (np.array([0.0, 0.0, 1.0])[None, :]
                          - X[:, 2][:, None] * X),
        f=lambda X: 2.0 * X[:, 2],
        b=lambda X: X[:, 2].copy(),
        description="u = z (degree-1 spherical harmonic) on the cap z >= z0",
    )


def builtin_cases() -> list[ManufacturedCase]:
    return [_interval_case(), _disk_case(), _rectangle_case(), _cap_case()]


def get_case(name: str) -> ManufacturedCase:
    for case in builtin_cases():
        if case.name == name:
            return case
    names = [c.name for c in builtin_cases()]
    raise ValueError(f"unknown case {name!r}; available: {names}")


# ---------------------------------------------------------------------------
# finite-difference guard on the hand-derived f
# ---------------------------------------------------------------------------

def _random_interior_points(case: ManufacturedCase, count: int, rng) -> np.ndarray:
    """Random manifold points at least 5% of the domain scale from the boundary."""
    spec = case.spec
    if spec.shape == "interval":
        margin = 0.05 * (spec.b - spec.a)
        x = rng.uniform(spec.a + margin, spec.b - margin, size=count)
        return x[:, None]
    if spec.shape == "rectangle":
        wx, wy = spec.widths
        x = rng.uniform(0.05 * wx, 0.95 * wx, size=count)
        y = rng.uniform(0.05 * wy, 0.95 * wy, size=count)
        return np.column_stack([x, y])
    if spec.shape == "disk":
        r = np.sqrt(rng.uniform(0.0, 0.95 ** 2, size=count))
        th = rng.uniform(0.0, 2.0 * math.pi, size=count)
        return np.column_stack([r * np.cos(th), r * np.sin(th)])
    # spherical cap: z above the rim by 5% of the cap height
    z = rng.uniform(spec.z0 + 0.05 * (1.0 - spec.z0), 1.0, size=count)
    th = rng.uniform(0.0, 2.0 * math.pi, size=count)
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack([r * np.cos(th), r * np.sin(th), z])


def _fd_laplacian_flat(u_fn, X: np.ndarray, step: float) -> np.ndarray:
    lap = np.zeros(X.shape[0])
    u0 = u_fn(X)
    for axis in range(X.shape[1]):
        e = np.zeros(X.shape[1])
        e[axis] = step
        lap += (u_fn(X + e) - 2.0 * u0 + u_fn(X - e)) / (step * step)
    return lap


def _tangent_basis(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.array([0.0, 0.0, 1.0]) if abs(x[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(x, a)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(x, e1)


def _fd_laplacian_sphere(u_fn, X: np.ndarray, step: float) -> np.ndarray:
    # Chart y(s) = (x + s1 e1 + s2 e2)/|x + ...| has identity metric and
    # vanishing Christoffel symbols at s = 0, so the intrinsic Laplacian is
    # the plain sum of second differences of the pullback.
    lap = np.empty(X.shape[0])
    for i, x in enumerate(X):
        e1, e2 = _tangent_basis(x)
        acc = -4.0 * float(u_fn(x[None, :])[0])
        for e in (e1, e2):
            for sgn in (1.0, -1.0):
                y = x + sgn * step * e
                y /= np.linalg.norm(y)
                acc += float(u_fn(y[None, :])[0])
        lap[i] = acc / (step * step)
    return lap


def fd_laplacian_check(case: ManufacturedCase, n_points: int = 100,
                       seed: int = 0, step: float = 1e-4) -> float:
    """Max relative mismatch between -FD-Laplacian(u) and f at random points.

    Guards the hand-derived source terms; relative to max(1, |f|).
    """
    rng = np.random.default_rng(seed)
    X = _random_interior_points(case, n_points, rng)
    if case.spec.shape == "spherical_cap":
        lap = _fd_laplacian_sphere(case.u, X, step)
    else:
        lap = _fd_laplacian_flat(case.u, X, step)
    fx = case.f(X)
    rel = np.abs(-lap - fx) / np.maximum(1.0, np.abs(fx))
    return float(rel.max())


# ---------------------------------------------------------------------------
# error norms on a reference quadrature cloud
# ---------------------------------------------------------------------------

def l2_error(interp: Interpolant, case: ManufacturedCase,
             reference_cloud: PointCloud, relative: bool = False) -> float:
    q = reference_cloud.points
    w = reference_cloud.volume_weights
    diff = case.u(q) - interp.eval_many(q)
    err = math.sqrt(float(np.sum(diff * diff * w)))
    if relative:
        norm = l2_norm(case, reference_cloud)
        return err / norm if norm > 0.0 else err
    return err


def l2_norm(case: ManufacturedCase, reference_cloud: PointCloud) -> float:
    q = reference_cloud.points
    vals = case.u(q)
    return math.sqrt(float(np.sum(vals * vals * reference_cloud.volume_weights)))


def h1_error(interp: Interpolant, case: ManufacturedCase,
             reference_cloud: PointCloud) -> float:
    q = reference_cloud.points
    w = reference_cloud.volume_weights
    diff = case.u(q) - interp.eval_many(q)
    gdiff = case.grad_u(q) - interp.grad_many(q)
    total = float(np.sum(diff * diff * w)) + \
        float(np.sum(np.einsum("qd,qd->q", gdiff, gdiff) * w))
    return math.sqrt(total)


def boundary_l2_error(interp: Interpolant, case: ManufacturedCase,
                      reference_cloud: PointCloud) -> float:
    """L2 mismatch of the reconstruction on the boundary sample set."""
    sb = reference_cloud.boundary_points
    aw = reference_cloud.area_weights
    diff = case.u(sb) - interp.eval_many(sb)
    return math.sqrt(float(np.sum(diff * diff * aw)))


def lemma_norm_check(interp: Interpolant, reference_cloud: PointCloud) -> dict:
    """Both sides of the discrete-vs-reconstruction norm comparison.

    lhs: (sum u_i^2 V_i)^(1/2) + t^(1/4) (sum u_l^2 A_l)^(1/2) over samples;
    rhs: H1 norm of the reconstruction plus sqrt(h) t^(3/4) max|f|.
    The ratio lhs/rhs should stay below a level-independent constant under
    refinement; the constant itself is empirical.
    """
    cl = interp.cloud
    t = interp.params.t
    u = interp.u
    u_s = u[cl.boundary_indices]
    lhs_vol = math.sqrt(float(np.sum(u * u * cl.volume_weights)))
    lhs_bnd = math.sqrt(float(np.sum(u_s * u_s * cl.area_weights)))
    lhs = lhs_vol + t ** 0.25 * lhs_bnd

    q = reference_cloud.points
    w = reference_cloud.volume_weights
    vals = interp.eval_many(q)
    grads = interp.grad_many(q)
    h1_sq = float(np.sum(vals * vals * w)) + \
        float(np.sum(np.einsum("qd,qd->q", grads, grads) * w))
    h1 = math.sqrt(h1_sq)
    h = cl.metadata.get("h") or fill_distance(cl)
    f_inf = float(np.max(np.abs(interp.f))) if interp.f.size else 0.0
    rhs = h1 + math.sqrt(h) * t ** 0.75 * f_inf
    if rhs > 0.0:
        ratio = lhs / rhs
    else:
        ratio = 0.0 if lhs == 0.0 else math.inf
    return {"lhs": lhs, "rhs": rhs, "ratio": ratio,
            "lhs_volume": lhs_vol, "lhs_boundary": lhs_bnd,
            "h1_norm": h1, "f_sup": f_inf, "h": h, "t": t}


# ---------------------------------------------------------------------------
# parameter coupling and guardrails
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Coupling:
    """t = c_t * h^gamma_t, beta = c_beta * sqrt(t)."""

    c_t: float = 0.1
    gamma_t: float = 4.0 / 7.0
    c_beta: float = 0.5

    def __post_init__(self):
        if self.c_t <= 0.0 or self.c_beta <= 0.0:
            raise ValueError("coupling constants must be positive")
        if not 0.0 < self.gamma_t < 2.0 / 3.0:
            raise ValueError(
                f"gamma_t must lie in (0, 2/3) so h/t^(3/2) vanishes under "
                f"refinement; got {self.gamma_t}")

    def t_of(self, h: float) -> float:
        return self.c_t * h ** self.gamma_t

    def beta_of(self, t: float) -> float:
        return self.c_beta * math.sqrt(t)


@dataclass(frozen=True)
class Guardrails:
    """Config-overridable ceilings on the stability ratios (empirical defaults)."""

    r0_penalty: float = 2.0    # ceiling for sqrt(t)/beta
    r0_density: float = 20.0   # ceiling for h/t^(3/2)

    def check(self, t: float, beta: float, h: float, warn: bool = True) -> list[str]:
        flags = []
        ratio_tb = math.sqrt(t) / beta
        if ratio_tb > self.r0_penalty:
            flags.append(f"sqrt(t)/beta={ratio_tb:.3g}>{self.r0_penalty:.3g}")
        ratio_ht = h / t ** 1.5
        if ratio_ht > self.r0_density:
            flags.append(f"h/t^1.5={ratio_ht:.3g}>{self.r0_density:.3g}")
        if warn:
            for msg in flags:
                warnings.warn(f"stability guardrail exceeded: {msg}",
                              RuntimeWarning, stacklevel=2)
        return flags


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

SWEEP_HEADER = "level,n,h,t,beta,l2_error,h1_error,boundary_l2_error,residual,wall_time_s"


@dataclass
class SweepRow:
    level: int
    n: int
    h: float
    t: float
    beta: float
    l2_error: float
    h1_error: float
    boundary_l2_error: float
    residual: float
    wall_time_s: float
    flags: list[str] = field(default_factory=list)

    def csv_cells(self) -> list[str]:
        def g(x):
            return format(float(x), ".17g")
        return [str(self.level), str(self.n), g(self.h), g(self.t), g(self.beta),
                g(self.l2_error), g(self.h1_error), g(self.boundary_l2_error),
                g(self.residual), g(self.wall_time_s)]


@dataclass
class SweepResult:
    case_name: str
    rows: list[SweepRow]

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.csv_text())

    def csv_text(self) -> str:
        lines = [SWEEP_HEADER]
        lines += [",".join(r.csv_cells()) for r in self.rows]
        return "\n".join(lines) + "\n"


class SweepAborted(RuntimeError):
    """Solver failure mid-sweep; completed rows are preserved in .partial."""

    def __init__(self, partial: SweepResult, cause: Exception):
        self.partial = partial
        self.cause = cause
        super().__init__(
            f"sweep aborted after {len(partial.rows)} level(s): {cause}")


def solve_case_on_cloud(case: ManufacturedCase, cloud: PointCloud, t: float,
                        beta: float, profile: Optional[KernelProfile] = None,
                        solver_options: Optional[SolveOptions] = None,
                        dense_cutoff: int = 512):
    """Assemble + solve one manufactured case; returns (interp, report)."""
    profile = profile or cubic_profile
    params = KernelParams(t=t, k=cloud.intrinsic_dim)
    fvals = case.f(cloud.points)
    bvals = case.b(cloud.boundary_points)
    system = assemble(cloud, params, profile, beta, fvals, bvals,
                      dense_cutoff=dense_cutoff)
    report = solve(system, solver_options)
    interp = Interpolant(cloud=cloud, params=params, profile=profile,
                         beta=beta, u=report.solution, f=fvals, b=bvals)
    return interp, report


def convergence_sweep(case: ManufacturedCase, levels: Sequence[int],
                      coupling: Optional[Coupling] = None,
                      profile: Optional[KernelProfile] = None,
                      solver_options: Optional[SolveOptions] = None,
                      guardrails: Optional[Guardrails] = None,
                      reference_factor: int = 4,
                      dense_cutoff: int = 512,
                      seed: int = 0,
                      collect_lemma: bool = False) -> SweepResult:
    """Solve the case across resolutions with h-coupled t and beta.

    Raises :class:`SweepAborted` (partial rows attached) on solver failure.
    With ``collect_lemma`` each row also gets a ``lemma`` attribute holding
    the norm-comparison record.
    """
    coupling = coupling or Coupling()
    guardrails = guardrails or Guardrails()
    result = SweepResult(case_name=case.name, rows=[])
    for level, n in enumerate(levels):
        start = time.perf_counter()
        cloud = generate(case.spec.with_resolution(int(n)), seed=seed)
        h = cloud.metadata["h"]
        t = coupling.t_of(h)
        beta = coupling.beta_of(t)
        flags = guardrails.check(t, beta, h)
        try:
            interp, report = solve_case_on_cloud(
                case, cloud, t, beta, profile, solver_options, dense_cutoff)
        except SolverError as exc:
            raise SweepAborted(result, exc) from exc
        ref = generate(case.spec.with_resolution(int(n) * reference_factor),
                       seed=seed)
        row = SweepRow(
            level=level, n=cloud.n, h=h, t=t, beta=beta,
            l2_error=l2_error(interp, case, ref),
            h1_error=h1_error(interp, case, ref),
            boundary_l2_error=boundary_l2_error(interp, case, ref),
            residual=report.residual_norm,
            wall_time_s=time.perf_counter() - start,
            flags=flags,
        )
        if collect_lemma:
            row.lemma = lemma_norm_check(interp, ref)
        result.rows.append(row)
    return result


def robin_gap_study(case: ManufacturedCase, t: float, n: int,
                    betas: Sequence[float],
                    profile: Optional[KernelProfile] = None,
                    solver_options: Optional[SolveOptions] = None,
                    guardrails: Optional[Guardrails] = None,
                    reference_factor: int = 4,
                    dense_cutoff: int = 512,
                    seed: int = 0) -> SweepResult:
    """Fix t and the cloud, vary the penalty weight beta (decreasing).

    Shrinking beta tightens the boundary condition, so the boundary
    L2 mismatch should fall until the t/h floor takes over.
    """
    betas = list(betas)
    if any(b2 >= b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValueError("beta sequence must be strictly decreasing")
    guardrails = guardrails or Guardrails()
    cloud = generate(case.spec.with_resolution(n), seed=seed)
    ref = generate(case.spec.with_resolution(n * reference_factor), seed=seed)
    h = cloud.metadata["h"]
    result = SweepResult(case_name=case.name, rows=[])
    for level, beta in enumerate(betas):
        start = time.perf_counter()
        flags = guardrails.check(t, beta, h)
        try:
            interp, report = solve_case_on_cloud(
                case, cloud, t, beta, profile, solver_options, dense_cutoff)
        except SolverError as exc:
            raise SweepAborted(result, exc) from exc
        result.rows.append(SweepRow(
            level=level, n=cloud.n, h=h, t=t, beta=beta,
            l2_error=l2_error(interp, case, ref),
            h1_error=h1_error(interp, case, ref),
            boundary_l2_error=boundary_l2_error(interp, case, ref),
            residual=report.residual_norm,
            wall_time_s=time.perf_counter() - start,
            flags=flags,
        ))
    return result


def error_floor_study(case: ManufacturedCase, t: float, beta: float,
                      levels: Sequence[int],
                      profile: Optional[KernelProfile] = None,
                      solver_options: Optional[SolveOptions] = None,
                      reference_factor: int = 4,
                      dense_cutoff: int = 512,
                      seed: int = 0) -> SweepResult:
    """Refine h with t and beta frozen: the error should flatten, not vanish.

    The t- and beta-controlled contributions do not shrink with h, so once
    the h term is subdominant the L2 error stalls at a floor.
    """
    guardrails = Guardrails(r0_penalty=math.inf, r0_density=math.inf)
    result = SweepResult(case_name=case.name, rows=[])
    for level, n in enumerate(levels):
        start = time.perf_counter()
        cloud = generate(case.spec.with_resolution(int(n)), seed=seed)
        ref = generate(case.spec.with_resolution(int(n) * reference_factor),
                       seed=seed)
        h = cloud.metadata["h"]
        flags = guardrails.check(t, beta, h, warn=False)
        try:
            interp, report = solve_case_on_cloud(
                case, cloud, t, beta, profile, solver_options, dense_cutoff)
        except SolverError as exc:
            raise SweepAborted(result, exc) from exc
        result.rows.append(SweepRow(
            level=level, n=cloud.n, h=h, t=t, beta=beta,
            l2_error=l2_error(interp, case, ref),
            h1_error=h1_error(interp, case, ref),
            boundary_l2_error=boundary_l2_error(interp, case, ref),
            residual=report.residual_norm,
            wall_time_s=time.perf_counter() - start,
            flags=flags,
        ))
    return result
