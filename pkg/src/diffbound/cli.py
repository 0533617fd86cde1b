"""Command-line interface: ``diffbound {ate,cate,simulate,irt}``.

Exit codes: 0 success, 1 computation error (stage and hint on stderr),
2 usage error.
"""
from __future__ import annotations

import argparse
import sys
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ate import Direction, Estimator2
from .cate import fit_cate_kernels, density_estimates
from .data import ColumnMap, cell_counts, load_csv, read_columns, validate
from .errors import DataError, DiffboundError
from .inference import EstimatorConfig, bootstrap_estimates, confidence_region, full_sample_estimate
from .irt import fit_2pl, monotonicity_check
from .propensity import check_positivity, fit_logistic
from .report import AnalysisReport
from .sim import coverage_study, format_table_csv, format_table_text, preset, preset_names


@dataclass
class RunConfig:
    subcommand: str
    input: str | None = None
    columns: ColumnMap | None = None
    direction: Direction | None = None
    estimator2: Estimator2 = Estimator2.IPW
    x0: float | None = None
    cov_index: int = 0
    kernel: str = "gaussian"
    bandwidth: float | None = None
    cv_grid: tuple[float, ...] | None = None
    alpha: float = 0.05
    beta: float = 0.005
    n_boot: int = 1000
    seed: int = 0
    drop_missing: bool = False
    ridge: float = 0.0
    phi_variant: str = "global"
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["columns"] = asdict(self.columns) if self.columns else None
        d["direction"] = self.direction.value if self.direction else None
        d["estimator2"] = self.estimator2.value
        return d


class UsageError(Exception):
    pass


@contextmanager
def stage(name: str):
    """Tag any library error raised inside the block with the pipeline stage."""
    try:
        yield
    except DiffboundError as exc:
        exc.stage = name
        raise


def _load(cfg: RunConfig, rep: AnalysisReport):
    with stage("load"):
        d = load_csv(cfg.input, cfg.columns, drop_missing=cfg.drop_missing)
    with stage("validate"):
        v = validate(d)
        if not v.ok:
            raise DataError("; ".join(v.errors), hint="check the treatment columns")
        rep.warn(*v.warnings)
    with stage("propensity"):
        m = fit_logistic(d, ridge=cfg.ridge)
        if not m.converged:
            rep.warn(f"propensity fit stopped after {m.iterations} iterations without converging")
    with stage("positivity"):
        pos = check_positivity(m, d)
        rep.warn(*pos.warnings)
    diag = {
        "n": d.n,
        "cell_counts": cell_counts(d).as_dict(),
        "propensity": {"coefficients": [float(c) for c in m.coefficients],
                       "converged": m.converged, "iterations": m.iterations,
                       "log_likelihood": m.log_likelihood},
        "positivity_warnings": len(pos.warnings),
    }
    return d, m, diag


def _infer(cfg: RunConfig, d, ec: EstimatorConfig, est, rep: AnalysisReport):
    with stage("bootstrap"):
        bd = bootstrap_estimates(d, ec, cfg.n_boot, cfg.seed, estimate=est)
    with stage("region"):
        reg = confidence_region(bd, cfg.alpha, cfg.beta, cfg.direction)
    rep.warn(*reg.warnings)
    return reg


def run_ate(cfg: RunConfig) -> AnalysisReport:
    rep = AnalysisReport("ate")
    d, m, diag = _load(cfg, rep)
    ec = EstimatorConfig(estimator2=cfg.estimator2, ridge=cfg.ridge)
    with stage("bounds"):
        est = full_sample_estimate(d, ec, cfg.direction, model=m)
    rep.warn(*est.warnings)
    reg = _infer(cfg, d, ec, est, rep)
    rep.sections = {"bounds": est.as_dict(), "region": reg.as_dict(), "diagnostics": diag}
    rep.stamp(cfg.seed, cfg.as_dict())
    return rep


def run_cate(cfg: RunConfig) -> AnalysisReport:
    rep = AnalysisReport("cate")
    d, m, diag = _load(cfg, rep)
    with stage("bandwidth"):
        kern = fit_cate_kernels(d, m, cfg.cov_index, cfg.kernel, grid=cfg.cv_grid,
                                bandwidth=cfg.bandwidth)
    ec = EstimatorConfig(target="cate", kernels=kern, x0=cfg.x0, cov_index=cfg.cov_index,
                         ridge=cfg.ridge, phi_variant=cfg.phi_variant)
    with stage("bounds"):
        est = full_sample_estimate(d, ec, cfg.direction, model=m)
        dens = density_estimates(d, cfg.x0, kern, cfg.cov_index)
    rep.warn(*est.warnings)
    reg = _infer(cfg, d, ec, est, rep)
    diag["densities"] = {"f10_hat": dens.f10_hat, "f01_hat": dens.f01_hat, "f_hat": dens.f_hat}
    diag["bandwidth_source"] = "fixed" if cfg.bandwidth is not None else "cv"
    bounds = est.as_dict()
    bounds["covariate"] = d.x_names[cfg.cov_index]
    rep.sections = {"bounds": bounds, "region": reg.as_dict(), "diagnostics": diag}
    rep.stamp(cfg.seed, cfg.as_dict())
    return rep


def run_simulate(cfg: RunConfig) -> AnalysisReport:
    names = cfg.extra["presets"]
    reps, L = cfg.extra["reps"], cfg.n_boot
    rows = []
    with stage("simulate"):
        for name in names:
            ps = preset(name)
            rows.extend(coverage_study([ps.config], reps=reps, L=L, alpha=cfg.alpha, beta=cfg.beta,
                                       target=ps.target, what=ps.what, seed=cfg.seed,
                                       cell_ids=[ps.cell_id]))
    rep = AnalysisReport("simulate")
    for name, r in zip(names, rows):
        if r.failed:
            rep.warn(f"{name}: {r.failures} of {r.reps} replicates failed")
    rep.sections = {
        "rows": [{"preset": nm, **r.as_dict()} for nm, r in zip(names, rows)],
        "table_csv": format_table_csv(rows),
        "table_text": format_table_text(rows),
    }
    rep.stamp(cfg.seed, cfg.as_dict())
    return rep


def run_irt(cfg: RunConfig) -> AnalysisReport:
    items = cfg.extra["items"]
    with stage("load"):
        Y, dropped = read_columns(cfg.input, items, drop_missing=cfg.drop_missing, binary=items)
    with stage("irt"):
        fit = fit_2pl(Y.astype(np.int8), item_names=items)
    rep = AnalysisReport("irt")
    if not fit.converged:
        rep.warn("2PL fit did not reach the gradient tolerance; estimates are the best iterate")
    sections = {
        "items": [{"item": nm, "discrimination": a, "discrimination_se": sa,
                   "difficulty": b, "difficulty_se": sb} for nm, a, sa, b, sb in fit.rows()],
        "fit": {"log_likelihood": fit.log_likelihood, "converged": fit.converged,
                "iterations": fit.iterations, "n": int(Y.shape[0]), "dropped_rows": dropped},
    }
    treat, second = cfg.extra.get("treat_item"), cfg.extra.get("second_item")
    if treat is not None and second is not None:
        sug = monotonicity_check(fit, items.index(treat), items.index(second),
                                 outcome_monotone=cfg.extra.get("outcome_monotone", True))
        sections["suggestion"] = sug.as_dict()
    width = max(len(nm) for nm in items)
    head = f"{'item'.ljust(width)}  {'discrimination':>16}  {'std_error':>22}"
    body = [f"{nm.ljust(width)}  {a!r:>16}  {sa!r:>22}" for nm, a, sa, _, _ in fit.rows()]
    sections["table_text"] = "\n".join([head, *body]) + "\n"
    rep.sections = sections
    rep.stamp(cfg.seed, cfg.as_dict())
    return rep


# ---------------------------------------------------------------- argument parsing

def _floats(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _names(text: str) -> tuple[str, ...]:
    vals = tuple(v.strip() for v in text.split(",") if v.strip())
    if not vals:
        raise argparse.ArgumentTypeError("empty column list")
    return vals


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--pretty", action="store_true", help="aligned text instead of JSON")


def _analysis(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--y", required=True, help="outcome column")
    p.add_argument("--z1", required=True, help="treatment of interest (0/1)")
    p.add_argument("--z2", required=True, help="second treatment (0/1)")
    p.add_argument("--x", required=True, type=_names, help="covariate columns, comma separated")
    p.add_argument("--direction", required=True, choices=[d.value for d in Direction])
    p.add_argument("--estimator2", default="ipw", choices=[e.value for e in Estimator2])
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--beta", type=float, default=0.005)
    p.add_argument("--boot", type=int, default=1000, help="bootstrap draws (>= 100)")
    p.add_argument("--drop-missing", action="store_true", help="skip rows with missing values")
    p.add_argument("--ridge", type=float, default=0.0, help="ridge penalty for the propensity fit")
    _common(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diffbound", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    _analysis(sub.add_parser("ate", help="bounds and confidence region for the ATE"))

    pc = sub.add_parser("cate", help="bounds and confidence region for the CATE at x0")
    _analysis(pc)
    pc.add_argument("--x0", type=float, required=True, help="query value of the conditioning covariate")
    pc.add_argument("--cov-index", type=int, default=0, help="0-based position in --x (default 0)")
    pc.add_argument("--kernel", default="gaussian", choices=["gaussian", "epanechnikov"])
    g = pc.add_mutually_exclusive_group()
    g.add_argument("--bandwidth", type=float, help="fixed bandwidth for all three smoothers")
    g.add_argument("--cv-grid", type=_floats, help="comma-separated bandwidth grid for LOO-CV")
    pc.add_argument("--phi-variance", choices=["global", "local"], default="global",
                    help="IPW-summand variance: global n^-2 form or kernel-weighted")

    ps = sub.add_parser("simulate", help="coverage study for named table cells")
    ps.add_argument("--preset", required=True, type=_names,
                    help="comma-separated presets such as table1-cell1")
    ps.add_argument("--reps", type=int, default=200)
    ps.add_argument("--boot", type=int, default=500)
    ps.add_argument("--alpha", type=float, default=0.05)
    ps.add_argument("--beta", type=float, default=0.005)
    ps.add_argument("--csv", action="store_true", help="emit the coverage table as CSV")
    _common(ps)

    pi = sub.add_parser("irt", help="2PL fit of binary behaviour items")
    pi.add_argument("--input", required=True)
    pi.add_argument("--items", required=True, type=_names, help="binary item columns")
    pi.add_argument("--treat-item", help="item of the treatment of interest")
    pi.add_argument("--second-item", help="item of the second treatment")
    pi.add_argument("--outcome-not-monotone", action="store_true",
                    help="do not assume a non-decreasing outcome when suggesting a direction")
    pi.add_argument("--drop-missing", action="store_true")
    _common(pi)
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cmd = ns.subcommand
    cfg = RunConfig(cmd, seed=ns.seed)
    if cmd in ("ate", "cate"):
        cfg.input = ns.input
        cfg.columns = ColumnMap(ns.y, ns.z1, ns.z2, ns.x)
        cfg.direction = Direction(ns.direction)
        cfg.estimator2 = Estimator2(ns.estimator2)
        cfg.n_boot = ns.boot
        cfg.drop_missing = ns.drop_missing
        cfg.ridge = ns.ridge
        if ns.ridge < 0:
            raise UsageError("--ridge must be non-negative")
    if cmd in ("ate", "cate", "simulate"):
        cfg.alpha, cfg.beta = ns.alpha, ns.beta
        if not 0.0 < ns.beta < ns.alpha < 1.0:
            raise UsageError("need 0 < --beta < --alpha < 1")
        if ns.boot < 100:
            raise UsageError("--boot must be at least 100")
    if cmd == "cate":
        if not 0 <= ns.cov_index < len(ns.x):
            raise UsageError(f"--cov-index must be in [0, {len(ns.x) - 1}]")
        if ns.bandwidth is not None and not ns.bandwidth > 0:
            raise UsageError("--bandwidth must be positive")
        if ns.cv_grid is not None and min(ns.cv_grid) <= 0:
            raise UsageError("--cv-grid values must be positive")
        cfg.x0, cfg.cov_index, cfg.kernel = ns.x0, ns.cov_index, ns.kernel
        cfg.bandwidth, cfg.cv_grid = ns.bandwidth, ns.cv_grid
        cfg.phi_variant = ns.phi_variance
        if cfg.estimator2 is not Estimator2.IPW:
            raise UsageError("the CATE path supports --estimator2 ipw only")
    if cmd == "simulate":
        known = set(preset_names())
        bad = [p for p in ns.preset if p not in known]
        if bad:
            raise UsageError(f"unknown preset(s): {', '.join(bad)}")
        if ns.reps < 50:
            raise UsageError("--reps must be at least 50")
        cfg.n_boot = ns.boot
        cfg.extra = {"presets": list(ns.preset), "reps": ns.reps}
    if cmd == "irt":
        items = list(ns.items)
        if len(items) < 2:
            raise UsageError("--items needs at least two columns")
        for flag, v in (("--treat-item", ns.treat_item), ("--second-item", ns.second_item)):
            if v is not None and v not in items:
                raise UsageError(f"{flag} {v!r} is not among --items")
        if (ns.treat_item is None) != (ns.second_item is None):
            raise UsageError("--treat-item and --second-item go together")
        cfg.input = ns.input
        cfg.drop_missing = ns.drop_missing
        cfg.extra = {"items": items, "treat_item": ns.treat_item, "second_item": ns.second_item,
                     "outcome_monotone": not ns.outcome_not_monotone}
    return cfg


RUNNERS = {"ate": run_ate, "cate": run_cate, "simulate": run_simulate, "irt": run_irt}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)  # exits with 2 on malformed flags
    try:
        cfg = config_from_args(ns)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"diffbound: error: {exc}", file=sys.stderr)
        return 2
    try:
        rep = RUNNERS[cfg.subcommand](cfg)
    except DiffboundError as exc:
        print(f"diffbound: {exc.stage} failed: {exc}", file=sys.stderr)
        if exc.hint:
            print(f"hint: {exc.hint}", file=sys.stderr)
        return 1
    if cfg.subcommand == "simulate" and ns.csv:
        text = rep.sections["table_csv"]
    else:
        text = rep.to_text() if ns.pretty else rep.to_json()
    if ns.out:
        Path(ns.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
