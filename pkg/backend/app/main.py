import logging
import sys

import click

from app.api import routes
from app.core.config import DEFAULT_EPS_LIST, get_settings
from app.core.errors import Monge1DError
from app.crud.instance import write_report

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


# ---------------- Error mapping ----------------
class Monge1DGroup(click.Group):
    """Maps library errors to exit codes (2: bad input, 3: invariant violation)."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except Monge1DError as e:
            click.echo(f"❌ {type(e).__name__}: {e.detail}", err=True)
            ctx.exit(e.exit_code)


def _emit(model, out):
    text = write_report(model, out)
    if out is None:
        click.echo(text, nl=False)


def _eps_list(value):
    try:
        return tuple(float(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter(f"expected comma-separated reals, got {value!r}")


# ---------------- CLI ----------------
@click.group(cls=Monge1DGroup)
@click.option("--log-level", default=None, help="Overrides MONGE1D_LOG_LEVEL.")
@click.pass_context
def cli(ctx, log_level):
    """Optimal transport on the line for the cost |y - x| and its entropic selection."""
    settings = get_settings()
    level = (log_level or settings.log_level).upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format=LOG_FORMAT, stream=sys.stderr)
    ctx.obj = settings


@cli.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--n-quad", default=0, show_default=True, help="Also evaluate factor entropies by quadrature.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def analyze(path, n_quad, out):
    """Sign regions, W1, potential, (H1)/(H2) and min F of an instance."""
    _emit(routes.cmd_analyze(path, n_quad=n_quad), out)


@cli.command("limit-plan")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--n-quad", default=1024, show_default=True)
@click.option("--marginal-n", default=0, show_default=True, help="Quadrature size for the marginal check.")
@click.option("--grid", "grid_n", type=int, default=None, help="Grid size of the CSV dump (default 256).")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def limit_plan(path, n_quad, marginal_n, grid_n, csv_path, out):
    """Per-factor entropy table of the limit plan, optionally its dense grid."""
    _emit(routes.cmd_limit_plan(path, n_quad=n_quad, marginal_n=marginal_n, grid_n=grid_n, csv_path=csv_path), out)


@cli.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--eps", type=float, required=True)
@click.option("--grid", "n", type=int, required=True)
@click.option("--tol", type=float, default=None)
@click.option("--max-iter", type=int, default=None)
@click.option("--plan-csv", type=click.Path(dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def solve(path, eps, n, tol, max_iter, plan_csv, out):
    """Entropic plan on an n-cell grid by log-domain Sinkhorn."""
    _emit(routes.cmd_solve(path, eps, n, tol=tol, max_iter=max_iter, plan_csv=plan_csv), out)


@cli.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--eps-list", default=",".join(str(e) for e in DEFAULT_EPS_LIST), show_default=True)
@click.option("--cap-n", type=int, default=None, help="Overrides MONGE1D_CAP_N.")
@click.option("--tol", type=float, default=None)
@click.option("--max-iter", type=int, default=None)
@click.option("--jobs", default=1, show_default=True, help="Worker processes across instances.")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def sweep(paths, eps_list, cap_n, tol, max_iter, jobs, csv_path, out):
    """ε-sweep: min J_eps, residual r(eps), distance to the limit plan, fitted min F."""
    summaries = routes.cmd_sweep(paths, _eps_list(eps_list), cap_n=cap_n, tol=tol, max_iter=max_iter,
                                 jobs=jobs, csv_path=csv_path)
    for summary in summaries:
        _emit(summary, out if len(summaries) == 1 else None)


@cli.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Overrides MONGE1D_SEED.")
@click.option("--quick", is_flag=True, help="Skip the ε-sweep checks.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def verify(ctx, path, seed, quick, out):
    """Run the acceptance checks on an instance; exit 1 if any fails."""
    report = routes.cmd_verify(path, seed=seed, quick=quick)
    for check in report.checks:
        mark = "✅" if check.passed else "❌"
        value = "" if check.value is None else f"{check.value:.3e}"
        limit = "" if check.threshold is None else f"<= {check.threshold:.0e}"
        click.echo(f"{mark} {check.name:<28} {value:>11} {limit:<9} {check.detail}".rstrip())
    if out is not None:
        write_report(report, out)
    if not report.passed:
        ctx.exit(1)


if __name__ == "__main__":
    cli()
