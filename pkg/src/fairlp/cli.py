"""Command-line front end.

Exit codes: 0 success, 1 a checked claim failed (``compare``) or an
unexpected numerical failure, 2 invalid configuration or input, 3 infeasible
budget, 4 substitution unavailable.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analysis, fair_post, fair_pre, io
from .errors import (
    ConventionViolated,
    DegenerateConditioning,
    FairLPError,
    InfeasibleBudget,
    InvalidInput,
    ParseError,
    SubstitutionUnavailable,
    TooLarge,
)
from .prob_core import (
    Channel,
    Criterion,
    DistortionMode,
    JointDistribution,
    induced_prediction_channel,
    post_induced_channel,
)

EXIT_OK = 0
EXIT_CLAIM_FAILED = 1
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3
EXIT_NO_SUBSTITUTION = 4

ORACLE_POINTS = 5


class ConfigError(InvalidInput):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    data: Optional[str] = None
    counts: Optional[str] = None
    joint: Optional[str] = None
    classifier: Optional[str] = None
    criterion: str = "eo"
    use_a: bool = False
    distortion: str = "zero-one"
    per_x: bool = False
    grid: int = 33
    d_list: Optional[tuple] = None
    oracle: bool = False
    step: float = 0.02
    seed: int = 0
    jobs: int = 1
    out: str = "out"
    dump_lp: bool = False
    n: int = 10000
    post_channel: Optional[str] = None

    def validate(self) -> None:
        for name in ("data", "counts", "joint", "classifier", "post_channel"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"--{name.replace('_', '-')} {path}: no such file")
        if self.distortion != "zero-one" and not Path(self.distortion).is_file():
            raise ConfigError(f"--distortion {self.distortion}: expected 'zero-one' or an existing file")
        if self.d_list is not None and len(self.d_list) == 0:
            raise ConfigError("--d-list is empty")
        if self.grid < 1:
            raise ConfigError("--grid must be at least 1")
        if self.oracle and not 0 < self.step <= 0.1:
            raise ConfigError("--step must lie in (0, 0.1]")
        if self.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if self.command == "scatter" and self.n < 1:
            raise ConfigError("--n must be at least 1")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["d_list"] = list(self.d_list) if self.d_list is not None else None
        return out


def _d_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairlp", description="Fairness-distortion trade-offs over finite alphabets.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1, help="parallel LP solves; results do not depend on it")
    common.add_argument("--out", default="out", help="output directory")

    source = argparse.ArgumentParser(add_help=False)
    group = source.add_mutually_exclusive_group(required=True)
    group.add_argument("--data", help="dataset CSV with header a,x,y")
    group.add_argument("--counts", help="counts CSV with header a,x,y,count")
    group.add_argument("--joint", help="joint JSON written by 'estimate'")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--classifier", required=True, help="classifier channel JSON")
    model.add_argument("--criterion", choices=["eo", "dp"], default="eo")
    model.add_argument("--distortion", default="zero-one", help="'zero-one' or a matrix JSON file")

    curve = argparse.ArgumentParser(add_help=False)
    grid = curve.add_mutually_exclusive_group()
    grid.add_argument("--grid", type=int, default=33, help="number of evenly spaced budgets")
    grid.add_argument("--d-list", type=_d_list, help="explicit budgets, comma separated")
    curve.add_argument("--oracle", action="store_true", help="cross-check a few budgets by grid search")
    curve.add_argument("--step", type=float, default=0.02, help="grid-search lattice spacing")
    curve.add_argument("--dump-lp", action="store_true", help="write each solved program as JSON")

    sub.add_parser("estimate", parents=[source, common], help="estimate the joint law from data")
    pre = sub.add_parser("pre-curve", parents=[source, model, curve, common], help="pre-processing trade-off curve")
    pre.add_argument("--use-a", action="store_true", help="let the pre-processor see the sensitive attribute")
    pre.add_argument("--per-x", action="store_true", help="bound distortion for every feature value")
    sub.add_parser("post-curve", parents=[source, model, curve, common], help="post-processing trade-off curve")
    sub.add_parser("compare", parents=[source, model, common], help="compare pre- and post-processing")
    scatter = sub.add_parser("scatter", parents=[common], help="TV versus mutual information on random joints")
    scatter.add_argument("--n", type=int, default=10000)
    subst = sub.add_parser("substitute", parents=[source, model, common],
                           help="replace a post-processor by an equivalent pre-processor")
    subst.add_argument("--post-channel", required=True, help="post-processor channel JSON (one or two channels)")
    return parser


def parse_config(argv: Sequence[str] | None = None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    fields = RunConfig.__dataclass_fields__
    return RunConfig(**{k: v for k, v in ns.items() if k in fields and v is not None})


# shared loading

def _load_classifier(cfg: RunConfig) -> Channel:
    w = io.load_channel(cfg.classifier)
    if isinstance(w, tuple):
        raise ConfigError("--classifier must hold a single channel, not a group-conditioned pair")
    return w


def _load_joint(cfg: RunConfig, n_x: int | None = None, n_y: int | None = None) -> JointDistribution:
    if cfg.joint is not None:
        return io.load_joint(cfg.joint)
    return io.load_joint_from_data(cfg.data, cfg.counts, n_x, n_y)


def _load_model(cfg: RunConfig):
    w = _load_classifier(cfg)
    joint = _load_joint(cfg, w.n_in, w.n_out)
    if (joint.n_x, joint.n_y) != (w.n_in, w.n_out):
        raise ConfigError(f"classifier is {w.n_in}x{w.n_out} but the data has |X|={joint.n_x}, |Y|={joint.n_y}")
    return joint, w, io.load_distortion(cfg.distortion, joint.n_y)


def _out(cfg: RunConfig) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# commands

def cmd_estimate(cfg: RunConfig) -> int:
    joint = _load_joint(cfg)
    payload = io.joint_to_dict(joint)
    payload["config"] = cfg.to_dict()
    target = _out(cfg) / "joint.json"
    io.write_json(target, payload)
    if np.all(joint.p_a > 0):
        y_given_a = joint.p_ya / joint.p_a[:, None]
        gap = f"{float(np.abs(y_given_a[0] - y_given_a[1]).max()):.6f}"
    else:
        gap = "undefined (a group has no rows)"
    print(f"|A|=2 |X|={joint.n_x} |Y|={joint.n_y}")
    print("P_Y = " + " ".join(f"{v:.6f}" for v in joint.p_y))
    print(f"base-rate gap max_y |P(y|A=0) - P(y|A=1)| = {gap}")
    print(f"wrote {target}")
    return EXIT_OK


class _CurveSide:
    """Uniform access to the pre- and post-processing programs."""

    def __init__(self, cfg: RunConfig, side: str):
        joint, w, d = _load_model(cfg)
        self.side = side
        self.joint = joint
        if side == "pre":
            mode = DistortionMode.PER_X if cfg.per_x else DistortionMode.GLOBAL
            self.prob = fair_pre.PreProblem(joint, w, d, use_a=cfg.use_a, criterion=Criterion(cfg.criterion),
                                            distortion_mode=mode)
            self.mod = fair_pre
            self.d_min = fair_pre.d_min_pre(self.prob)
            self.d_max_bound = fair_pre.d_max_bound_pre(self.prob)
            self.build_lp = fair_pre.build_pre_lp
        else:
            self.prob = fair_post.PostProblem(fair_post.derive_pred_joint(w, joint), d, Criterion(cfg.criterion))
            self.mod = fair_post
            self.d_min = fair_post.d_min_post(self.prob)
            self.d_max_bound = fair_post.d_max_bound_post(self.prob)
            self.build_lp = fair_post.build_post_lp

    def curve(self, grid, jobs):
        if self.side == "pre":
            return fair_pre.tradeoff_curve(self.prob, grid, jobs)
        return fair_post.tradeoff_curve_post(self.prob, grid, jobs)

    def d_max_exact(self) -> float:
        if self.side == "pre":
            return fair_pre.d_max_exact(self.prob)
        return fair_post.d_max_exact_post(self.prob)

    def disc(self, D: float) -> float:
        if self.side == "pre":
            return fair_pre.disc_pre(self.prob, D).value
        return fair_post.disc_post(self.prob, D).value


def _oracle_checks(side: _CurveSide, points, step: float) -> dict:
    if side.prob.criterion is not Criterion.EQUALIZED_ODDS:
        return {"available": False, "reason": "grid search covers the equalized-odds objective only", "step": step}
    if side.side == "pre" and side.prob.distortion_mode is not DistortionMode.GLOBAL:
        return {"available": False, "reason": "grid search covers the global distortion budget only", "step": step}
    idx = sorted({int(i) for i in np.linspace(0, len(points) - 1, min(ORACLE_POINTS, len(points)))})
    checks = []
    try:
        for i in idx:
            p = points[i]
            res = analysis.brute_force_disc(side.prob, p.D, step=step)
            gap = res.value - p.disc if np.isfinite(res.value) else None
            checks.append({"D": p.D, "lp": p.disc, "oracle": res.value, "gap": gap,
                           "lipschitz": res.lipschitz, "bound": res.lipschitz * step})
    except TooLarge as exc:
        return {"available": False, "reason": str(exc), "step": step}
    gaps = [c["gap"] for c in checks if c["gap"] is not None]
    return {"available": True, "step": step, "points": checks,
            "max_gap": max((abs(g) for g in gaps), default=None)}


def cmd_curve(cfg: RunConfig, side_name: str) -> int:
    if side_name == "post" and cfg.per_x:
        raise ConfigError("--per-x applies to pre-processing only")
    side = _CurveSide(cfg, side_name)
    grid = list(cfg.d_list) if cfg.d_list is not None else cfg.grid
    curve = side.curve(grid, cfg.jobs)
    out = _out(cfg)
    channel_dir = out / f"{side_name}_channels"
    lp_dir = out / f"{side_name}_lp"
    config = cfg.to_dict()

    grid_points = curve.grid_points()
    point_rows = []
    for i, p in enumerate(grid_points):
        name = f"D_{i:03d}.json"
        disc = side.mod.discrimination_of(side.prob, p.channel)
        dist = side.mod.distortion_of(side.prob, p.channel)
        io.write_json(channel_dir / name, {"side": side_name, "D": p.D, "disc": disc, "distortion": dist,
                                           "channel": io.channel_payload(p.channel)})
        if cfg.dump_lp:
            io.write_text(lp_dir / name, side.build_lp(side.prob, p.D).dumps() + "\n")
        point_rows.append({"D": p.D, "disc": disc, "lp_value": p.disc, "distortion": dist,
                           "channel_file": f"{channel_dir.name}/{name}"})

    breakpoints = [{"D": b, "disc": side.disc(b)} for b in curve.breakpoints]
    rows = [(p.D, p.disc, False) for p in grid_points] + [(b["D"], b["disc"], True) for b in breakpoints]
    rows.sort(key=lambda r: (r[0], r[2]))
    io.write_text(out / f"{side_name}_curve.csv", io.curve_csv(rows, config))

    report = {
        "side": side_name,
        "config": config,
        "alphabet": {"a": 2, "x": side.joint.n_x, "y": side.joint.n_y},
        "d_min": side.d_min.value,
        "d_min_channel": io.channel_payload(side.d_min.channel),
        "d_max_bound": side.d_max_bound,
        "d_max_exact": side.d_max_exact(),
        "breakpoints": breakpoints,
        "checks": curve.checks,
        "points": point_rows,
        "oracle": _oracle_checks(side, grid_points, cfg.step) if cfg.oracle else None,
    }
    io.write_json(out / f"{side_name}_report.json", report)
    print(f"{side_name}: d_min={side.d_min.value:.6g} d_max_bound={side.d_max_bound:.6g} "
          f"d_max_exact={report['d_max_exact']:.6g} breakpoints={len(breakpoints)}")
    failed = [k for k in ("non_increasing", "convex", "chord_linear") if not curve.checks[k]]
    if failed:
        print(f"warning: curve checks failed: {', '.join(failed)}", file=sys.stderr)
    if report["oracle"] is not None and report["oracle"].get("available"):
        print(f"oracle max gap {report['oracle']['max_gap']}")
    return EXIT_OK


def cmd_compare(cfg: RunConfig) -> int:
    if cfg.criterion != "eo":
        raise ConfigError("compare is defined for equalized odds only")
    joint, w, d = _load_model(cfg)
    report = analysis.compare_pre_post(joint, w, d)
    payload = report.to_dict()
    payload["config"] = cfg.to_dict()
    target = _out(cfg) / "comparison.json"
    io.write_json(target, payload)
    print(f"verdict {report.dominance_verdict.value}; d_min pre={report.d_min_pre_a:.6g} post={report.d_min_post:.6g}; "
          f"disc pre={report.disc_at_dmin_pre:.6g} post={report.disc_at_dmin_post:.6g}")
    if report.prop4_applicable and not report.prop4_holds:
        print("pre-processing does not strictly dominate at the minimal budgets", file=sys.stderr)
        return EXIT_CLAIM_FAILED
    return EXIT_OK


def cmd_scatter(cfg: RunConfig) -> int:
    pairs = analysis.tv_mi_scatter(cfg.n, cfg.seed)
    target = _out(cfg) / "scatter.csv"
    io.write_text(target, io.scatter_csv(pairs, cfg.seed, cfg.to_dict()))
    print(f"wrote {len(pairs)} points to {target}")
    return EXIT_OK


def cmd_substitute(cfg: RunConfig) -> int:
    joint, w, d = _load_model(cfg)
    if w.n_out != 2:
        raise ConfigError("substitution needs a binary classifier")
    witness = analysis.check_substitution(w)
    if witness is None:
        raise SubstitutionUnavailable("no feature is mapped deterministically to 0 and another to 1")
    post = io.load_channel(cfg.post_channel)
    pre = analysis.substitute_post_with_pre(post, w, joint, *witness)
    pred = fair_post.derive_pred_joint(w, joint)
    target_cond = post_induced_channel(post, pred)
    got_cond = induced_prediction_channel(pre, w, joint, strict=False)
    live = ~np.isnan(target_cond)
    deviation = float(np.abs(got_cond[live] - target_cond[live]).max()) if live.any() else 0.0
    pre_prob = fair_pre.PreProblem(joint, w, d, use_a=True)
    post_prob = fair_post.PostProblem(pred, d)
    out = _out(cfg)
    io.write_json(out / "pre_channel.json", {"side": "pre", "channel": io.channel_payload(pre)})
    io.write_json(out / "substitution_report.json", {
        "config": cfg.to_dict(),
        "witness": {"x0": witness[0], "x1": witness[1]},
        "max_conditional_deviation": deviation,
        "pre": {"disc": fair_pre.discrimination_of(pre_prob, pre), "distortion": fair_pre.distortion_of(pre_prob, pre)},
        "post": {"disc": fair_post.discrimination_of(post_prob, post),
                 "distortion": fair_post.distortion_of(post_prob, post)},
    })
    print(f"witness features x0={witness[0]} x1={witness[1]}; max deviation {deviation:.3g}")
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "pre-curve": lambda cfg: cmd_curve(cfg, "pre"),
    "post-curve": lambda cfg: cmd_curve(cfg, "post"),
    "compare": cmd_compare,
    "scatter": cmd_scatter,
    "substitute": cmd_substitute,
}


def run(cfg: RunConfig) -> int:
    try:
        cfg.validate()
        return COMMANDS[cfg.command](cfg)
    except InfeasibleBudget as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SubstitutionUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_SUBSTITUTION
    except (InvalidInput, ParseError, ConventionViolated, DegenerateConditioning, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FairLPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CLAIM_FAILED


def main(argv: Sequence[str] | None = None) -> int:
    return run(parse_config(argv))


if __name__ == "__main__":
    sys.exit(main())
