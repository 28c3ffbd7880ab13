"""Continuous and discrete optimization drivers.

Three registration modes share one coarse-to-fine pyramid driver:

* ``simplex``  - Nelder-Mead on the 6 parameters at every level.
* ``discrete`` - repeated MRF labeling with shrinking offset magnitudes,
  accepting a candidate only when the true criterion strictly improves.
* ``refined``  - the discrete pass followed by a simplex pass started from
  the discrete solution.

Every mode finishes with a full-resolution comparison against its starting
point (and, for refined, the intermediate discrete solution), so a mode can
never return parameters worse than what it started from.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .imgcore import build_pyramid
from .mrf import apply_labeling, build_label_space, build_pairwise_costs, \
    evaluate_costs, solve_exact
from .rigid import RigidParams, SliceGeometry

MODES = ("simplex", "discrete", "refined")

# Defaults for the continuous passes; steps are commensurate with the
# perturbation scales the benchmarks draw from.
SIMPLEX_STEP = (0.05, 0.05, 0.05, 5.0, 5.0, 5.0)
SIMPLEX_TOL = 1e-6
SIMPLEX_MAX_EVALS = 2000

# Consecutive non-accepting iterations tolerated before a level stops.
PATIENCE = 3


@dataclass(frozen=True)
class LevelConfig:
    """Hyperparameters of one pyramid level of the discrete loop."""

    omega_rot: float
    omega_trans: float
    alpha: float
    max_iters: int
    kappa: int
    min_omega_factor: float


@dataclass(frozen=True)
class Schedule:
    """Per-level hyperparameters, ordered coarse to fine."""

    num_levels: int
    omega_rot: tuple
    omega_trans: tuple
    alpha: tuple
    max_iters: tuple
    kappa: int = 2
    min_omega_factor: float = 0.01

    def __post_init__(self):
        if self.num_levels < 1:
            raise ValueError("num_levels must be >= 1")
        for name in ("omega_rot", "omega_trans", "alpha", "max_iters"):
            values = getattr(self, name)
            if len(values) != self.num_levels:
                raise ValueError(f"{name} must have {self.num_levels} entries")
        if any(w <= 0 for w in self.omega_rot + self.omega_trans):
            raise ValueError("omegas must be positive")
        if any(not 0 < a < 1 for a in self.alpha):
            raise ValueError("alphas must lie in (0, 1)")
        if any(m < 1 for m in self.max_iters):
            raise ValueError("max_iters must be positive")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if not 0 < self.min_omega_factor < 1:
            raise ValueError("min_omega_factor must lie in (0, 1)")

    def level(self, k):
        return LevelConfig(omega_rot=self.omega_rot[k],
                           omega_trans=self.omega_trans[k],
                           alpha=self.alpha[k],
                           max_iters=self.max_iters[k],
                           kappa=self.kappa,
                           min_omega_factor=self.min_omega_factor)


def default_schedule():
    """Four-level schedule used throughout the benchmarks."""
    return Schedule(num_levels=4,
                    omega_rot=(0.02, 0.015, 0.0125, 0.01),
                    omega_trans=(7.0, 6.5, 6.0, 5.0),
                    alpha=(0.08, 0.07, 0.05, 0.03),
                    max_iters=(200, 100, 150, 600))


@dataclass
class RegistrationResult:
    final_params: RigidParams
    final_cost: float
    cost_trace: list
    num_cost_evaluations: int
    wall_time: float


class _Recorder:
    """Accumulates criterion-evaluation counts and the accepted-cost trace."""

    def __init__(self):
        self.evals = 0
        self.trace = []

    def count(self, n=1):
        self.evals += n

    def accept(self, level, iteration, cost):
        self.trace.append((level, iteration, float(cost)))


def nelder_mead(objective, x0, step, max_evals, tol):
    """Downhill simplex minimization.

    Coefficients: reflection 1, expansion 2, contraction 0.5, shrink 0.5.
    The initial simplex is x0 plus one vertex per axis offset by step[i].
    Stops when the best-worst spread of the simplex drops below ``tol`` or
    the evaluation budget is exhausted. Returns the best point ever
    evaluated, so the result is never worse than ``objective(x0)``.
    """
    x0 = np.asarray(x0, dtype=float)
    step = np.asarray(step, dtype=float)
    n = x0.size
    if step.size != n or np.any(step <= 0):
        raise ValueError("step must be positive and match x0's length")
    if max_evals < 1 or tol <= 0:
        raise ValueError("max_evals and tol must be positive")

    evals = 0
    best_x = x0.copy()
    best_f = np.inf

    def ev(x):
        nonlocal evals, best_x, best_f
        f = float(objective(x))
        evals += 1
        if f < best_f:
            best_f = f
            best_x = x.copy()
        return f

    pts = [x0.copy()]
    fs = [ev(x0)]
    for i in range(n):
        if evals >= max_evals:
            return best_x, best_f
        x = x0.copy()
        x[i] += step[i]
        pts.append(x)
        fs.append(ev(x))

    while evals < max_evals:
        order = sorted(range(n + 1), key=lambda k: fs[k])
        pts = [pts[k] for k in order]
        fs = [fs[k] for k in order]
        if fs[-1] - fs[0] < tol:
            break
        centroid = np.mean(pts[:-1], axis=0)
        xr = centroid + (centroid - pts[-1])
        fr = ev(xr)
        if fr < fs[0]:
            if evals < max_evals:
                xe = centroid + 2.0 * (centroid - pts[-1])
                fe = ev(xe)
                if fe < fr:
                    pts[-1], fs[-1] = xe, fe
                else:
                    pts[-1], fs[-1] = xr, fr
            else:
                pts[-1], fs[-1] = xr, fr
        elif fr < fs[-2]:
            pts[-1], fs[-1] = xr, fr
        else:
            if evals >= max_evals:
                break
            if fr < fs[-1]:
                xc = centroid + 0.5 * (xr - centroid)
                fc = ev(xc)
                accepted = fc <= fr
            else:
                xc = centroid + 0.5 * (pts[-1] - centroid)
                fc = ev(xc)
                accepted = fc < fs[-1]
            if accepted:
                pts[-1], fs[-1] = xc, fc
            else:
                for k in range(1, n + 1):
                    if evals >= max_evals:
                        break
                    pts[k] = pts[0] + 0.5 * (pts[k] - pts[0])
                    fs[k] = ev(pts[k])
    return best_x, best_f


def _cost(I, J, params, geom, criterion):
    return float(evaluate_costs(I, J, [params], geom, criterion)[0])


def decayed_omega(omega0, alpha, steps, min_factor):
    """Offset bound after ``steps`` decay applications, floored at
    min_factor * omega0."""
    return max(omega0 * (1.0 - alpha) ** steps, min_factor * omega0)


def register_discrete_level(I, J, init, geom, level_cfg, criterion,
                            recorder=None, level=0):
    """Incremental discrete refinement at one resolution.

    Repeatedly builds the pairwise cost tables around the current estimate,
    solves exactly, and accepts the resulting candidate only if its true
    criterion cost strictly decreases. The offset magnitudes shrink by the
    factor (1 - alpha) per iteration, floored at min_omega_factor times the
    level's initial magnitudes. Stops at max_iters or after PATIENCE
    consecutive rejections.
    """
    rec = recorder if recorder is not None else _Recorder()
    cur = init
    cur_cost = _cost(I, J, cur, geom, criterion)
    rec.count(1)
    rec.accept(level, 0, cur_cost)

    rejections = 0
    for it in range(1, level_cfg.max_iters + 1):
        w_r = decayed_omega(level_cfg.omega_rot, level_cfg.alpha, it - 1,
                            level_cfg.min_omega_factor)
        w_t = decayed_omega(level_cfg.omega_trans, level_cfg.alpha, it - 1,
                            level_cfg.min_omega_factor)
        ls = build_label_space((w_r, w_r, w_r, w_t, w_t, w_t), level_cfg.kappa)
        m = build_pairwise_costs(I, J, cur, geom, ls, criterion)
        rec.count(m.num_evaluations)
        candidate = apply_labeling(cur, ls, solve_exact(m))
        cand_cost = _cost(I, J, candidate, geom, criterion)
        rec.count(1)
        if cand_cost < cur_cost:
            cur, cur_cost = candidate, cand_cost
            rejections = 0
            rec.accept(level, it, cand_cost)
        else:
            rejections += 1
            if rejections >= PATIENCE:
                break
    return cur


def register(mode, I, J, init, geom, schedule=None, criterion="ssd"):
    """Coarse-to-fine registration of a 2D image to a volume.

    Builds matched pyramids of both inputs (level k of one paired with level
    k of the other), runs the selected mode per level feeding each result to
    the next finer level, and reports the criterion cost of the returned
    parameters at full resolution. Translations stay in mm throughout, so
    they carry across levels unchanged.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if schedule is None:
        schedule = default_schedule()
    if geom.dims != I.dims or geom.spacing != I.spacing:
        raise ValueError("slice geometry must match the 2D image lattice")

    t_start = time.perf_counter()
    ipyr = build_pyramid(I, schedule.num_levels)
    jpyr = build_pyramid(J, schedule.num_levels)
    geoms = [SliceGeometry(ipyr[k].dims, ipyr[k].spacing)
             for k in range(schedule.num_levels)]
    rec = _Recorder()

    def simplex_pass(start):
        params = start
        for k in range(schedule.num_levels):
            ik, jk, gk = ipyr[k], jpyr[k], geoms[k]
            state = {"best": np.inf}

            def objective(x, ik=ik, jk=jk, gk=gk, k=k, state=state):
                c = _cost(ik, jk, RigidParams.from_array(x), gk, criterion)
                rec.count(1)
                if c < state["best"]:
                    state["best"] = c
                    rec.accept(k, rec.evals, c)
                return c

            x, _ = nelder_mead(objective, params.as_array(), SIMPLEX_STEP,
                               SIMPLEX_MAX_EVALS, SIMPLEX_TOL)
            params = RigidParams.from_array(x)
        return params

    def discrete_pass(start):
        params = start
        for k in range(schedule.num_levels):
            params = register_discrete_level(ipyr[k], jpyr[k], params, geoms[k],
                                             schedule.level(k), criterion,
                                             recorder=rec, level=k)
        return params

    candidates = [init]
    if mode == "simplex":
        candidates.append(simplex_pass(init))
    elif mode == "discrete":
        candidates.append(discrete_pass(init))
    else:
        discrete_result = discrete_pass(init)
        candidates.append(discrete_result)
        candidates.append(simplex_pass(discrete_result))

    # Full-resolution guard: keep the best candidate seen, starting from the
    # initializer, so no mode can end worse than where it began.
    best_params = None
    best_cost = np.inf
    for p in candidates:
        c = _cost(I, J, p, geom, criterion)
        rec.count(1)
        if c < best_cost:
            best_params, best_cost = p, c
    return RegistrationResult(final_params=best_params,
                              final_cost=best_cost,
                              cost_trace=rec.trace,
                              num_cost_evaluations=rec.evals,
                              wall_time=time.perf_counter() - t_start)
