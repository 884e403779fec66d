"""Command-line interface.

Subcommands: ``generate`` (synthetic data), ``test`` (aggregated test on a
CSV), ``simulate`` (replication studies), ``sclt-check`` (limit-law Monte
Carlo), ``density`` (distribution grids). Exit codes: 0 success, 2 validation
error, 3 runtime failure.
"""

from __future__ import annotations

import json
import math
import sys

import click
import numpy as np

from .baselines import cuped_test, dim_test
from .distributions import BanditParams, bandit_cdf, bandit_density, bandit_tail_prob, normal_cdf
from .errors import BanditABError, ValidationError
from .harness import (
    ExperimentGrid,
    emit_power_curves,
    ingest_csv,
    load_config,
    run_sclt_check,
    run_study,
    write_csv,
)
from .datagen import DgpConfig, generate
from .learners import LearnerSpec
from .permutation import pwtab_test
from .policy import LambdaConfig

_LEARNER_CHOICES = ("gbt_a", "gbt_b", "gbt", "linear", "logistic", "stacking")


def _parse_propensity(text: str) -> float | None:
    if text == "fit":
        return None
    if text.startswith("known:"):
        try:
            value = float(text.split(":", 1)[1])
        except ValueError:
            raise ValidationError(f"bad propensity value in {text!r}") from None
        if not 0.0 < value < 1.0:
            raise ValidationError("known propensity must lie strictly inside (0, 1)")
        return value
    raise ValidationError("propensity must be 'fit' or 'known:<value>'")


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    click.echo(text)


@click.group()
def cli():
    """Sensitive A/B testing via the permuted weighted bandit statistic."""


@cli.command("generate")
@click.option("--f", "f_kind", type=click.Choice(["I", "II", "III", "IV"]), default="I")
@click.option("--g", "g_kind", type=click.Choice(["I", "II", "III", "IV"]), default="I")
@click.option("--sigma-eps", type=float, default=0.5)
@click.option("--n", type=int, default=20000)
@click.option("--p-treat", type=float, default=0.5)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(), required=True)
def generate_cmd(f_kind, g_kind, sigma_eps, n, p_treat, seed, out):
    """Write one synthetic dataset as CSV."""
    data = generate(DgpConfig(f_kind=f_kind, g_kind=g_kind, sigma_eps=sigma_eps,
                              n=n, p_treat=p_treat, seed=seed))
    write_csv(data, out)
    click.echo(f"wrote {data.n} rows to {out}")


@cli.command("test")
@click.option("--input", "input_path", type=click.Path(exists=True), required=True)
@click.option("--k", type=int, default=2)
@click.option("--learner", type=click.Choice(_LEARNER_CHOICES), default="gbt_a")
@click.option("--tau", type=float, default=0.03)
@click.option("--b", type=int, default=25)
@click.option("--seed", type=int, default=0)
@click.option("--alpha", type=float, default=0.05)
@click.option("--propensity", default="known:0.5", show_default=True,
              help="'known:<value>' for a randomized trial, or 'fit'.")
@click.option("--lambda-mode", type=click.Choice(["threshold", "fixed", "bootstrap"]),
              default="threshold")
@click.option("--lambda", "lam", type=float, default=None,
              help="weight for --lambda-mode fixed")
@click.option("--out", type=click.Path(), default=None)
def test_cmd(input_path, k, learner, tau, b, seed, alpha, propensity,
             lambda_mode, lam, out):
    """Run the aggregated test plus baselines on a CSV dataset."""
    data = ingest_csv(input_path)
    known = _parse_propensity(propensity)
    spec = LearnerSpec(kind=learner)
    lconf = LambdaConfig(mode=lambda_mode, lam=lam, tau=tau)
    report = pwtab_test(data, spec, k=k, lambda_config=lconf, b=b, seed=seed,
                        known_propensity=known,
                        alphas=sorted({0.01, 0.05, 0.1, alpha}))
    z = math.sqrt(report.n) * report.ate_estimate / report.sigma_hat
    baselines = {
        "zDML": {
            "estimate": report.ate_estimate,
            "z": z,
            "p_two_sided": max(2.0 * normal_cdf(-abs(z)), 1e-300),
        },
        "CUPED": cuped_test(data).to_dict(),
        "DIM": dim_test(data).to_dict(),
    }
    payload = report.to_dict()
    payload["alpha"] = alpha
    payload["reject"] = bool(report.p_aggregated <= alpha)
    payload["baselines"] = baselines
    _emit(payload, out)


def _csv_list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


@cli.command("simulate")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="flat key=value manifest; explicit flags override it")
@click.option("--f", default="I", help="comma-separated F kinds")
@click.option("--g", default="I", help="comma-separated G kinds")
@click.option("--sigma-eps", default="0.5", help="comma-separated noise levels")
@click.option("--n", default="20000", help="comma-separated sample sizes")
@click.option("--methods", default="PWTAB,WTAB,zDML,CUPED,DIM")
@click.option("--replications", type=int, default=500)
@click.option("--alpha", type=float, default=0.05)
@click.option("--learner", type=click.Choice(_LEARNER_CHOICES), default="linear")
@click.option("--k", type=int, default=2)
@click.option("--tau", type=float, default=0.03)
@click.option("--b", type=int, default=25)
@click.option("--seed", type=int, default=0)
@click.option("--p-treat", type=float, default=0.5)
@click.option("--propensity", type=click.Choice(["known", "fit"]), default="known")
@click.option("--power-axis", default=None,
              help="also emit <prefix>_power.csv along this axis (f|g|sigma_eps|n)")
@click.option("--out-prefix", type=click.Path(), required=True)
@click.pass_context
def simulate_cmd(ctx, config_path, f, g, sigma_eps, n, methods, replications, alpha,
                 learner, k, tau, b, seed, p_treat, propensity, power_axis, out_prefix):
    """Replication study over a grid of data-generating settings."""
    values = {
        "f": f, "g": g, "sigma_eps": sigma_eps, "n": n, "methods": methods,
        "replications": replications, "alpha": alpha, "learner": learner,
        "k": k, "tau": tau, "b": b, "seed": seed, "p_treat": p_treat,
        "propensity": propensity, "power_axis": power_axis,
    }
    if config_path:
        from click.core import ParameterSource
        file_values = load_config(config_path)
        for key, raw in file_values.items():
            if key not in values:
                raise ValidationError(f"unknown config key {key!r}")
            source = ctx.get_parameter_source(key)
            if source is not ParameterSource.COMMANDLINE:
                values[key] = raw
    grid = ExperimentGrid(
        f_kinds=tuple(_csv_list(str(values["f"]))),
        g_kinds=tuple(_csv_list(str(values["g"]))),
        sigma_eps=tuple(float(v) for v in _csv_list(str(values["sigma_eps"]))),
        n_values=tuple(int(v) for v in _csv_list(str(values["n"]))),
        methods=tuple(_csv_list(str(values["methods"]))),
        replications=int(values["replications"]),
        alpha=float(values["alpha"]),
        learner=LearnerSpec(kind=str(values["learner"])),
        k=int(values["k"]),
        tau=float(values["tau"]),
        b=int(values["b"]),
        root_seed=int(values["seed"]),
        p_treat=float(values["p_treat"]),
        propensity=str(values["propensity"]),
    )
    report = run_study(grid, out_prefix=out_prefix)
    axis = values["power_axis"]
    if axis:
        emit_power_curves(report, str(axis), path=f"{out_prefix}_power.csv")
    for cell in report.cells:
        for m, r in cell.methods.items():
            click.echo(
                f"F={cell.f_kind} G={cell.g_kind} sigma={cell.sigma_eps} n={cell.n} "
                f"{m}: rate={r.rejection_rate:.4f} se={r.stderr:.4f} "
                f"failed={cell.n_failed}")
    click.echo(f"wrote {out_prefix}.json and {out_prefix}.csv "
               f"({report.runtime_seconds:.1f}s)")


@cli.command("sclt-check")
@click.option("--mu", type=float, default=0.0)
@click.option("--sigma", type=float, default=1.0)
@click.option("--lambda", "lam", type=float, default=0.5)
@click.option("--n", type=int, default=2000)
@click.option("--reps", type=int, default=10000)
@click.option("--seed", type=int, default=0)
@click.option("--cdf", type=click.Choice(["quadrature", "closed_form"]),
              default="quadrature")
@click.option("--out", type=click.Path(), default=None)
def sclt_cmd(mu, sigma, lam, n, reps, seed, cdf, out):
    """Monte Carlo agreement between the policy statistic and its limit law."""
    report = run_sclt_check(mu, sigma, lam, n, reps, seed=seed, cdf=cdf)
    _emit(report.to_dict(), out)


@cli.command("density")
@click.option("--omega", type=float, required=True)
@click.option("--sigma0", type=float, default=1.0)
@click.option("--grid-min", type=float, default=-6.0)
@click.option("--grid-max", type=float, default=6.0)
@click.option("--grid-step", type=float, default=0.01)
@click.option("--out", type=click.Path(), default=None)
def density_cmd(omega, sigma0, grid_min, grid_max, grid_step, out):
    """Emit a CSV grid (y, f, F, tail) of the spike distribution."""
    if grid_step <= 0 or grid_max < grid_min:
        raise ValidationError("need grid_step > 0 and grid_max >= grid_min")
    params = BanditParams(omega=omega, sigma0=sigma0)
    ys = np.arange(grid_min, grid_max + grid_step / 2, grid_step)
    lines = ["y,f,F,tail"]
    f = bandit_density(ys, params)
    F = bandit_cdf(ys, params)
    tails = bandit_tail_prob(np.abs(ys), params)
    for y, fy, Fy, ty in zip(ys, f, F, tails):
        lines.append(f"{float(y)!r},{float(fy)!r},{float(Fy)!r},{float(ty)!r}")
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
        click.echo(f"wrote {len(ys)} grid rows to {out}")
    else:
        click.echo(text, nl=False)


def main():
    try:
        cli.main(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.UsageError as exc:
        exc.show()
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except BanditABError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    sys.exit(0)


if __name__ == "__main__":
    main()
