"""Command-line interface.

Exit codes: 0 success, 2 bad input (parse errors, invalid flags, infeasible
scene), 3 domain or numerical failure.  Only machine-readable payloads go
to stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import csv
import functools
import json
import secrets
import sys
from pathlib import Path

import click

from . import io as wio
from .errors import InfeasibleSpecError, NonFiniteLossError, WHDError
from .geometry import GridSpec
from .metrics import count_metrics, evaluate, f_vs_r_sweep
from .optimizer import SceneSpec, generate_scene, optimize_map
from .postprocess import localize
from .whd import whd

EXIT_INPUT = 2
EXIT_DOMAIN = 3


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InfeasibleSpecError as exc:
            _fail(EXIT_INPUT, exc)
        except WHDError as exc:
            _fail(EXIT_DOMAIN, exc)
        except (wio.ParseError, ValueError) as exc:
            _fail(EXIT_INPUT, exc)

    return wrapper


def _emit(payload):
    click.echo(json.dumps(payload, sort_keys=True))


def _grid(text) -> GridSpec:
    try:
        return GridSpec.parse(text)
    except ValueError as exc:
        raise wio.ParseError(str(exc)) from exc


def _report_dict(report):
    d = report.to_dict()
    d["counts"].pop("r")
    return d


@click.group()
def cli():
    """Weighted Hausdorff distance tools: synthesize, optimize, localize, evaluate."""


@cli.command("synth")
@click.option("--size", default="64x64", show_default=True, help="Grid size HxW.")
@click.option("--num-points", type=int, required=True)
@click.option("--min-sep", type=float, default=0.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output CSV (stdout if omitted).")
@_exit_codes
def cmd_synth(size, num_points, min_sep, seed, out):
    """Generate a random ground-truth point set."""
    pts = generate_scene(SceneSpec(_grid(size), num_points, min_sep, seed))
    if out is None:
        click.echo(wio.format_points(pts), nl=False)
    else:
        wio.write_points(out, pts)


@cli.command("loss")
@click.option("--map", "map_path", type=click.Path(dir_okay=False), required=True)
@click.option("--points", type=click.Path(dir_okay=False), required=True)
@click.option("--alpha", default=None, help="Negative exponent, or 'min' for the exact minimum.")
@click.option("--eps", default=None, type=float)
@click.option("--scale", default=None, help="s_row,s_col factors from resized to original pixels.")
@click.option("--grad", is_flag=True, help="Include d(total)/dp as a nested JSON array.")
@click.option("--config", type=click.Path(dir_okay=False), default=None)
@_exit_codes
def cmd_loss(map_path, points, alpha, eps, scale, grad, config):
    """Evaluate the weighted Hausdorff distance of a map to a point set."""
    cfg = wio.RunConfig.load(config).override(alpha=alpha, epsilon=eps, scale=scale)
    p = wio.read_pgm(map_path)
    Y = wio.read_points(points)
    br = whd(p, Y, cfg.whd_params(), gradient=grad)
    payload = {"total": br.total, "term1": br.term1, "term2": br.term2, "mass": br.mass}
    if grad:
        payload["gradient"] = br.gradient.tolist()
    _emit(payload)


@cli.command("optimize")
@click.option("--points", type=click.Path(dir_okay=False), required=True)
@click.option("--size", required=True, help="Grid size HxW.")
@click.option("--iters", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--adam/--gd", "adam", default=None, help="Adaptive moments or plain descent.")
@click.option("--alpha", default=None)
@click.option("--eps", type=float, default=None)
@click.option("--mass-reg", type=float, default=None)
@click.option("--init", "init_value", type=float, default=None)
@click.option("--out-map", type=click.Path(dir_okay=False), required=True)
@click.option("--out-trace", type=click.Path(dir_okay=False), default=None)
@click.option("--config", type=click.Path(dir_okay=False), default=None)
@_exit_codes
def cmd_optimize(points, size, iters, lr, seed, adam, alpha, eps, mass_reg, init_value, out_map, out_trace, config):
    """Fit a probability map to a point set by direct descent."""
    cfg = wio.RunConfig.load(config).override(
        iterations=iters, learning_rate=lr, seed=seed, use_adam_moments=adam, alpha=alpha,
        epsilon=eps, mass_reg_weight=mass_reg, init_value=init_value,
    )
    seed = cfg.seed if cfg.seed is not None else 0
    result = _run_optimize(wio.read_points(points), _grid(size), cfg, seed)
    wio.write_pgm(out_map, result.prob_map)
    if out_trace:
        Path(out_trace).write_text(result.trace.to_csv(), encoding="utf-8", newline="\n")
    tr = result.trace
    _emit({
        "iterations": len(tr),
        "initial_total": tr.total[0] if len(tr) else None,
        "final_total": tr.total[-1] if len(tr) else None,
        "best_total": result.best_loss if len(tr) else None,
        "seed": seed,
    })


def _run_optimize(Y, grid, cfg, seed):
    try:
        return optimize_map(Y, grid, cfg.whd_params(), cfg.optimizer_config(seed))
    except NonFiniteLossError as exc:
        _fail(EXIT_DOMAIN, f"{exc} (iteration {exc.iteration})")


@cli.command("localize")
@click.option("--map", "map_path", type=click.Path(dir_okay=False), required=True)
@click.option("--method", default=None, help="fixed:<tau>, otsu or bmm.")
@click.option("--count", type=int, default=None, help="Known object count (skips blob counting).")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Output points CSV.")
@click.option("--meta", type=click.Path(dir_okay=False), default=None, help="Also write metadata JSON here.")
@click.option("--config", type=click.Path(dir_okay=False), default=None)
@_exit_codes
def cmd_localize(map_path, method, count, seed, out, meta, config):
    """Threshold a map and extract object locations with a Gaussian mixture."""
    cfg = wio.RunConfig.load(config).override(method=method, seed=seed)
    seed = cfg.seed if cfg.seed is not None else 0
    res = localize(wio.read_pgm(map_path), cfg.method, count, seed)
    wio.write_points(out, res.locations)
    payload = _localize_meta(res, seed)
    if meta:
        Path(meta).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    _emit(payload)


def _localize_meta(res, seed):
    return {
        "tau": res.tau,
        "method": res.method,
        "count_estimate": res.count_estimate,
        "fallback_used": res.fallback_used,
        "fallback_reason": res.fallback_reason,
        "seed": seed,
    }


def _read_counts(path):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        true = [int(r["true"]) for r in rows]
        est = [int(r["estimated"]) for r in rows]
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise wio.ParseError(f"counts file needs integer columns 'true,estimated': {exc}") from exc
    return true, est


@cli.command("evaluate")
@click.option("--est", type=click.Path(dir_okay=False), required=True)
@click.option("--gt", type=click.Path(dir_okay=False), required=True)
@click.option("--r", "radius", type=float, default=None, help="Match radius in pixels [default: 5].")
@click.option("--r-sweep", default=None, help="lo:hi:step, inclusive.")
@click.option("--sweep-out", type=click.Path(dir_okay=False), default=None, help="Write the sweep as CSV r,fscore.")
@click.option("--counts-file", type=click.Path(dir_okay=False), default=None,
              help="Per-image CSV with columns true,estimated for MAE/RMSE/MAPE.")
@click.option("--size", default=None, help="Grid HxW; AHD of an empty estimate is reported as its d_max.")
@click.option("--config", type=click.Path(dir_okay=False), default=None)
@_exit_codes
def cmd_evaluate(est, gt, radius, r_sweep, sweep_out, counts_file, size, config):
    """Score estimated locations against ground truth."""
    cfg = wio.RunConfig.load(config).override(radius=radius, radii=r_sweep)
    est_pts = wio.read_points(est)
    gt_pts = wio.read_points(gt)
    grid = _grid(size) if size else None
    report = evaluate(est_pts, gt_pts, cfg.radius, grid)
    payload = {"r": cfg.radius, **_report_dict(report)}
    if cfg.radii is not None:
        sweep = f_vs_r_sweep(est_pts, gt_pts, cfg.radii)
        payload["sweep"] = [{"r": r, "fscore": f} for r, f in sweep]
        if sweep_out:
            lines = ["r,fscore"] + [f"{r!r},{'' if f is None else repr(f)}" for r, f in sweep]
            Path(sweep_out).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    if counts_file:
        cm = count_metrics(*_read_counts(counts_file))
        payload["count_metrics"] = {"mae": cm.mae, "rmse": cm.rmse, "mape": cm.mape}
        if cm.mape_undefined:
            payload["undefined"]["mape"] = "all true counts are zero"
    _emit(payload)


@cli.command("demo")
@click.option("--seed", type=int, default=None, help="Drawn at random and recorded when omitted.")
@click.option("--out-dir", type=click.Path(file_okay=False), default="demo_out", show_default=True)
@click.option("--size", default="64x64", show_default=True)
@click.option("--num-points", type=int, default=3, show_default=True)
@click.option("--min-sep", type=float, default=12.0, show_default=True)
@click.option("--iters", type=int, default=2000, show_default=True)
def cmd_demo(seed, out_dir, size, num_points, min_sep, iters):
    """Run synth -> optimize -> localize (bmm) -> evaluate end to end."""
    if seed is None:
        seed = secrets.randbelow(2**31)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = wio.RunConfig(iterations=iters, seed=seed)
    stage = "synth"
    try:
        grid = _grid(size)
        gt = generate_scene(SceneSpec(grid, num_points, min_sep, seed))
        wio.write_points(out / "gt.csv", gt)

        stage = "optimize"
        result = optimize_map(gt, grid, cfg.whd_params(), cfg.optimizer_config(seed))
        wio.write_pgm(out / "map.pgm", result.prob_map)
        (out / "trace.csv").write_text(result.trace.to_csv(), encoding="utf-8", newline="\n")

        stage = "localize"
        # localize what was written, so the files alone reproduce the run
        res = localize(wio.read_pgm(out / "map.pgm"), cfg.method, None, seed)
        wio.write_points(out / "est.csv", res.locations)

        stage = "evaluate"
        report = evaluate(res.locations, gt, cfg.radius, grid)
    except (WHDError, ValueError) as exc:
        _fail(EXIT_DOMAIN, f"stage {stage} failed: {exc}")

    summary = {
        "seed": seed,
        "size": str(grid),
        "num_points": num_points,
        "iterations": iters,
        "final_total": result.trace.total[-1] if len(result.trace) else None,
        "localize": _localize_meta(res, seed),
        "r": cfg.radius,
        **_report_dict(report),
    }
    (out / "config.txt").write_text(cfg.to_text(), encoding="utf-8", newline="\n")
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    _emit(summary)
    if report.fscore is None or report.fscore < 0.9:
        click.echo(f"error: stage evaluate failed: fscore {report.fscore} < 0.9", err=True)
        sys.exit(1)


def main(argv=None):
    cli.main(args=argv, prog_name="whdloc")


if __name__ == "__main__":
    main()
