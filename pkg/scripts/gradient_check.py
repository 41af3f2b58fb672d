"""Compare the analytic WHD gradient with central differences on random maps."""

import click
import numpy as np

from whdloc.geometry import GridSpec
from whdloc.whd import WhdEvaluator, WhdParams


def central_differences(fn, p, h):
    out = np.empty_like(p)
    for idx in np.ndindex(p.shape):
        q = p.copy()
        q[idx] += h
        plus = fn(q)
        q[idx] -= 2 * h
        out[idx] = (plus - fn(q)) / (2 * h)
    return out


@click.command()
@click.option("--instances", type=int, default=100, show_default=True)
@click.option("--max-side", type=int, default=16, show_default=True)
@click.option("--max-points", type=int, default=5, show_default=True)
@click.option("--alpha", type=float, default=-1.0, show_default=True)
@click.option("--h", type=float, default=1e-5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def main(instances, max_side, max_points, alpha, h, seed):
    rng = np.random.default_rng(seed)
    params = WhdParams(alpha=alpha)
    scaled, elementwise = [], []
    for _ in range(instances):
        grid = GridSpec(*(int(v) for v in rng.integers(2, max_side + 1, 2)))
        Y = rng.uniform(0, [grid.height - 1, grid.width - 1], (int(rng.integers(1, max_points + 1)), 2))
        p = rng.uniform(2 * h, 1 - 2 * h, grid.shape)
        ev = WhdEvaluator(grid, Y, params)
        g = ev(p, gradient=True).gradient
        fd = central_differences(lambda q: ev(q).total, p, h)
        err = np.abs(g - fd)
        scaled.append(err.max() / max(np.abs(fd).max(), 1e-12))
        elementwise.append((err / np.maximum(np.abs(fd), 1e-8)).max())
    click.echo(f"max relative error (scaled by max |fd|): {max(scaled):.3e}")
    click.echo(f"max relative error (per pixel):          {max(elementwise):.3e}")


if __name__ == "__main__":
    main()
