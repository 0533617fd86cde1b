"""Simulation design with a latent mixture class, ground-truth oracles and coverage studies.

Units draw Z2 ~ Bernoulli(1/2) and a class C in {0, 1, 2} with probabilities
(p, (1-p)/2, (1-p)/2). Class 0 copies Z2 into Z1, class 1 always takes Z1=1,
class 2 never does. Covariates are N(m_C 1_d, I) with m = (0, 0.25, 0.5), the
confounder is U = kappa + delta Z2 + nu, and the outcome is either
``theta Z1 + gamma'X + U + eps`` or ``(a sin(X1/2) + b) Z1 + gamma'X + U + eps``.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .ate import Direction, Estimator2, ate_bounds
from .cate import cate_bounds, fit_cate_kernels
from .data import Dataset
from .errors import DiffboundError
from .inference import EstimatorConfig, bootstrap_estimates, confidence_region, worker_count
from .mc import MCValue, MeanAccumulator
from .propensity import fit_logistic

CLASS_MEANS = (0.0, 0.25, 0.5)
HOMOGENEOUS = "homogeneous"
HETEROGENEOUS = "heterogeneous"
ORACLE_DRAWS = 10_000_000
_CHUNK = 500_000


@dataclass(frozen=True)
class SimConfig:
    n: int = 1000
    d: int = 5
    p: float = 0.7
    delta: float = 0.0
    outcome: str = HOMOGENEOUS
    kappa: float = 1.0
    sigma2_nu: float = 1.0
    omega2_eps: float = 1.0
    gamma: tuple[float, ...] | None = None
    theta: float = 3.0
    alpha_het: float = 2.0
    beta_het: float = 2.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.n < 10:
            raise ValueError("n must be at least 10")
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if self.outcome not in (HOMOGENEOUS, HETEROGENEOUS):
            raise ValueError(f"unknown outcome model {self.outcome!r}")
        g = (1.0,) * self.d if self.gamma is None else tuple(float(v) for v in self.gamma)
        if len(g) != self.d:
            raise ValueError("gamma must have length d")
        object.__setattr__(self, "gamma", g)

    @property
    def class_probs(self) -> np.ndarray:
        q = (1.0 - self.p) / 2.0
        return np.array([self.p, q, q])

    def summary(self) -> dict:
        return {"n": self.n, "d": self.d, "p": self.p, "delta": self.delta, "outcome": self.outcome}


def _draw(cfg: SimConfig, rng: np.random.Generator, n: int) -> dict:
    z2 = (rng.random(n) < 0.5).astype(np.int8)
    c = rng.choice(3, size=n, p=cfg.class_probs)
    z1 = np.where(c == 0, z2, np.where(c == 1, 1, 0)).astype(np.int8)
    x = rng.standard_normal((n, cfg.d)) + np.asarray(CLASS_MEANS)[c][:, None]
    u = cfg.kappa + cfg.delta * z2 + math.sqrt(cfg.sigma2_nu) * rng.standard_normal(n)
    eps = math.sqrt(cfg.omega2_eps) * rng.standard_normal(n)
    effect = _effect(cfg, x[:, 0])
    y = effect * z1 + x @ np.asarray(cfg.gamma) + u + eps
    return {"y": y, "z1": z1, "z2": z2, "x": x, "u": u, "c": c}


def _effect(cfg: SimConfig, x1):
    if cfg.outcome == HOMOGENEOUS:
        return np.full(np.shape(x1), cfg.theta) if np.ndim(x1) else cfg.theta
    return cfg.alpha_het * np.sin(np.asarray(x1) / 2.0) + cfg.beta_het


def generate(cfg: SimConfig, seed: int | np.random.SeedSequence | None = None) -> Dataset:
    """One simulated dataset of size ``cfg.n``; ``seed`` defaults to ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    s = _draw(cfg, rng, cfg.n)
    return Dataset(s["y"], s["z1"], s["z2"], s["x"])


def true_propensity(cfg: SimConfig, z2, x) -> np.ndarray:
    """Exact P(Z1=1 | Z2, X): class posterior given X, combined with the Z1 rule.

    The class posterior depends on X only through the covariate sum, because
    the class means shift every coordinate equally.
    """
    x = np.asarray(x, dtype=np.float64)
    s = x.sum(axis=1)
    m = np.asarray(CLASS_MEANS)
    with np.errstate(divide="ignore"):
        logw = np.log(cfg.class_probs)
    L = logw[None, :] + s[:, None] * m[None, :] - 0.5 * cfg.d * m[None, :] ** 2
    L -= L.max(axis=1, keepdims=True)
    P = np.exp(L)
    P /= P.sum(axis=1, keepdims=True)
    return np.where(np.asarray(z2) == 1, P[:, 0] + P[:, 1], P[:, 1])


def true_ate(cfg: SimConfig, draws: int = ORACLE_DRAWS, seed: int = 0) -> MCValue:
    """Population ATE; exact when the effect is constant, else Monte Carlo over X1."""
    if cfg.outcome == HOMOGENEOUS:
        return MCValue(cfg.theta)
    if cfg.alpha_het == 0.0:
        return MCValue(cfg.beta_het)
    rng = np.random.default_rng(seed)
    acc = MeanAccumulator()
    done = 0
    while done < draws:
        k = min(_CHUNK, draws - done)
        c = rng.choice(3, size=k, p=cfg.class_probs)
        x1 = rng.standard_normal(k) + np.asarray(CLASS_MEANS)[c]
        acc.add(_effect(cfg, x1))
        done += k
    return acc.result()


def true_ate_analytic(cfg: SimConfig) -> float:
    """Closed form using E sin(X/2) = exp(-1/8) sin(m/2) for X ~ N(m, 1)."""
    if cfg.outcome == HOMOGENEOUS:
        return cfg.theta
    es = math.exp(-0.125) * float(cfg.class_probs @ np.sin(np.asarray(CLASS_MEANS) / 2.0))
    return cfg.alpha_het * es + cfg.beta_het


def true_cate(cfg: SimConfig, x1: float) -> float:
    """Conditional effect at X1 = x1 (exact)."""
    return float(_effect(cfg, np.float64(x1)))


def mu_oracle(cfg: SimConfig, draws: int = ORACLE_DRAWS, seed: int = 0) -> tuple[MCValue, MCValue]:
    """Population limits of the differential-effect and IPW estimators.

    Evaluated on ``draws`` simulated units, the IPW contrast using the exact
    propensity from :func:`true_propensity`.
    """
    rng = np.random.default_rng(seed)
    a10, a01, a2 = MeanAccumulator(), MeanAccumulator(), MeanAccumulator()
    done = 0
    while done < draws:
        k = min(_CHUNK, draws - done)
        s = _draw(cfg, rng, k)
        z1, z2, y = s["z1"], s["z2"], s["y"]
        a10.add(y[(z1 == 1) & (z2 == 0)])
        a01.add(y[(z1 == 0) & (z2 == 1)])
        ps = true_propensity(cfg, z2, s["x"])
        a2.add(z1 * y / ps - (1 - z1) * y / (1.0 - ps))
        done += k
    m10, m01 = a10.result(), a01.result()
    mu1 = MCValue(m10.value - m01.value, math.hypot(m10.se, m01.se), draws)
    return mu1, a2.result()


def brackets(mu1: MCValue, mu2: MCValue, truth: MCValue, k: float = 3.0) -> bool:
    """True if ``truth`` lies between the two limits up to ``k`` combined standard errors."""
    lo, hi = (mu1, mu2) if mu1.value <= mu2.value else (mu2, mu1)
    return (truth.value >= lo.value - k * math.hypot(lo.se, truth.se)
            and truth.value <= hi.value + k * math.hypot(hi.se, truth.se))


# ---------------------------------------------------------------- coverage studies

@dataclass
class CoverageRow:
    config: dict
    target: str
    reps: int
    truth: float
    bound_coverage: float
    ci_coverage: float | None
    mean_interval: tuple[float, float]
    mean_region: tuple[float, float] | None = None
    failures: int = 0
    failed: bool = False
    errors: list[str] = field(default_factory=list)

    @property
    def bound_hits(self) -> int:
        return int(round(self.bound_coverage * (self.reps - self.failures)))

    @property
    def ci_hits(self) -> int | None:
        if self.ci_coverage is None:
            return None
        return int(round(self.ci_coverage * (self.reps - self.failures)))

    def as_dict(self) -> dict:
        out = asdict(self)
        out["mean_interval"] = list(self.mean_interval)
        out["mean_region"] = list(self.mean_region) if self.mean_region else None
        return out


def _rep_seeds(master: int, cell: int, rep: int) -> tuple[np.random.SeedSequence, int]:
    ss = np.random.SeedSequence(master, spawn_key=(cell, rep))
    data_ss, boot_ss = ss.spawn(2)
    return data_ss, int(boot_ss.generate_state(1)[0])


def _run_rep(job) -> dict:
    cfg, target, want_ci, truth, L, alpha, beta, x1, master, cell, rep = job
    data_ss, boot_seed = _rep_seeds(master, cell, rep)
    direction = Direction.MU2_UPPER
    try:
        d = generate(cfg, data_ss)
        m = fit_logistic(d)
        if target == "ate":
            est = ate_bounds(d, m, direction, Estimator2.IPW)
            ec = EstimatorConfig()
        else:
            kern = fit_cate_kernels(d, m, cov_index=0, kind="gaussian")
            est = cate_bounds(d, m, x1, kern, direction, cov_index=0)
            ec = EstimatorConfig(target="cate", kernels=kern, x0=x1)
        lo = est.tau_minus if target == "ate" else est.tau_minus_x
        hi = est.tau_plus if target == "ate" else est.tau_plus_x
        out = {"ok": True, "lo": lo, "hi": hi, "bound_in": lo <= truth <= hi}
        if want_ci:
            bd = bootstrap_estimates(d, ec, L, boot_seed, estimate=est, workers=1)
            reg = confidence_region(bd, alpha, beta, direction)
            out.update(r_lo=reg.lower, r_hi=reg.upper, ci_in=reg.contains(truth))
        return out
    except DiffboundError as exc:
        return {"ok": False, "error": f"{exc.stage}: {exc}"}


def coverage_study(cells: Sequence[SimConfig], reps: int = 200, L: int = 500, alpha: float = 0.05,
                   beta: float = 0.005, target: str = "ate", what: str = "ci", seed: int = 0,
                   workers: int | None = None, x1: float = 1.0,
                   cell_ids: Sequence[int] | None = None) -> list[CoverageRow]:
    """Coverage of the truth by raw bounds (always) and confidence regions (``what="ci"``).

    ``target`` is ``"ate"`` or ``"cate"`` (CATE at X1 = ``x1``). Replicate
    seeds derive from (``seed``, cell id, replicate index), so results do not
    depend on the worker count. A cell is flagged failed when more than 5% of
    its replicates raise.
    """
    if reps < 50:
        raise ValueError("reps must be at least 50")
    if target not in ("ate", "cate"):
        raise ValueError("target must be 'ate' or 'cate'")
    if what not in ("bounds", "ci"):
        raise ValueError("what must be 'bounds' or 'ci'")
    want_ci = what == "ci"
    nw = worker_count(workers)
    ids = list(cell_ids) if cell_ids is not None else list(range(len(cells)))
    rows = []
    for cid, cfg in zip(ids, cells):
        truth = true_ate(cfg).value if target == "ate" else true_cate(cfg, x1)
        jobs = [(cfg, target, want_ci, truth, L, alpha, beta, x1, seed, cid, r) for r in range(reps)]
        if nw > 1:
            with ProcessPoolExecutor(max_workers=nw) as ex:
                res = list(ex.map(_run_rep, jobs, chunksize=max(1, reps // (4 * nw))))
        else:
            res = [_run_rep(j) for j in jobs]
        good = [r for r in res if r["ok"]]
        fails = len(res) - len(good)
        errs = sorted({r["error"] for r in res if not r["ok"]})
        if good:
            bc = float(np.mean([r["bound_in"] for r in good]))
            mi = (float(np.mean([r["lo"] for r in good])), float(np.mean([r["hi"] for r in good])))
        else:
            bc, mi = float("nan"), (float("nan"), float("nan"))
        cc = mr = None
        if want_ci and good:
            cc = float(np.mean([r["ci_in"] for r in good]))
            mr = (float(np.mean([r["r_lo"] for r in good])), float(np.mean([r["r_hi"] for r in good])))
        rows.append(CoverageRow(cfg.summary(), target, reps, float(truth), bc, cc, mi, mr, fails,
                                fails > 0.05 * reps, errs))
    return rows


def two_proportion_test(x1: int, n1: int, x2: int, n2: int) -> tuple[float, float]:
    """One-sided pooled z-test of H1: p1 < p2. Returns (z, p-value)."""
    p1, p2 = x1 / n1, x2 / n2
    pool = (x1 + x2) / (n1 + n2)
    se = math.sqrt(pool * (1.0 - pool) * (1.0 / n1 + 1.0 / n2))
    if se == 0.0:
        z = 0.0 if p1 == p2 else math.copysign(math.inf, p1 - p2)
    else:
        z = (p1 - p2) / se
    return z, float(norm.cdf(z))


# ---------------------------------------------------------------- presets and tables

TABLE_N = (1000, 2000, 5000)
TABLE_D = (5, 10, 20)
TABLE_OUTCOMES = (HOMOGENEOUS, HETEROGENEOUS)
TABLE_DELTA = (0.0, 1.0)
TABLE_P = (0.7, 0.8, 0.9)
# table number -> (target, what)
TABLES = {1: ("ate", "ci"), 2: ("cate", "ci"), 4: ("ate", "bounds"), 5: ("cate", "bounds")}


def table_cells() -> list[SimConfig]:
    """All factor combinations in table row-major order: n, d, outcome, delta, p."""
    return [SimConfig(n=n, d=d, p=p, delta=dl, outcome=o)
            for n in TABLE_N for d in TABLE_D for o in TABLE_OUTCOMES
            for dl in TABLE_DELTA for p in TABLE_P]


@dataclass(frozen=True)
class Preset:
    name: str
    cell_id: int
    config: SimConfig
    target: str
    what: str


def preset(name: str) -> Preset:
    """Resolve names like ``table1-cell1`` (cells numbered from 1 in row-major order)."""
    try:
        tpart, cpart = name.split("-")
        tnum = int(tpart.removeprefix("table"))
        cnum = int(cpart.removeprefix("cell"))
        if not tpart.startswith("table") or not cpart.startswith("cell"):
            raise ValueError
    except ValueError:
        raise KeyError(f"unknown preset {name!r}") from None
    cells = table_cells()
    if tnum not in TABLES or not 1 <= cnum <= len(cells):
        raise KeyError(f"unknown preset {name!r}")
    target, what = TABLES[tnum]
    return Preset(name, cnum - 1, cells[cnum - 1], target, what)


def preset_names() -> list[str]:
    return [f"table{t}-cell{c}" for t in sorted(TABLES) for c in range(1, len(table_cells()) + 1)]


def _value(row: CoverageRow) -> float | None:
    return row.ci_coverage if row.ci_coverage is not None else row.bound_coverage


def _layout(rows: Sequence[CoverageRow]):
    cols = [(dl, p) for dl in TABLE_DELTA for p in TABLE_P]
    grid: dict[tuple, dict] = {}
    extra_cols = []
    for r in rows:
        c = r.config
        key = (c["n"], c["d"], c["outcome"])
        col = (c["delta"], c["p"])
        if col not in cols and col not in extra_cols:
            extra_cols.append(col)
        grid.setdefault(key, {})[col] = _value(r)
    return grid, cols + extra_cols


def format_table_csv(rows: Sequence[CoverageRow]) -> str:
    """One line per (n, d, outcome); columns delta x p, as in the published layout."""
    grid, cols = _layout(rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "d", "outcome"] + [f"delta={dl:g};p={p:g}" for dl, p in cols])
    for (n, d, o), vals in grid.items():
        w.writerow([n, d, o] + ["" if vals.get(c) is None else f"{vals[c]:.3f}" for c in cols])
    return buf.getvalue()


def format_table_text(rows: Sequence[CoverageRow]) -> str:
    grid, cols = _layout(rows)
    head = ["n", "d", "outcome"] + [f"d{dl:g}/p{p:g}" for dl, p in cols]
    body = [[str(n), str(d), o] + ["-" if vals.get(c) is None else f"{vals[c]:.3f}" for c in cols]
            for (n, d, o), vals in grid.items()]
    widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
    fmt = lambda r: "  ".join(s.rjust(wd) if i >= 3 else s.ljust(wd)  # noqa: E731
                              for i, (s, wd) in enumerate(zip(r, widths)))
    return "\n".join([fmt(head)] + [fmt(r) for r in body]) + "\n"
