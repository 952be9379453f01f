"""Command-line interface.

Subcommands: simulate, fit, mixing, spectral, benchmark, predict.  Every
report path writes delimited artifacts (CSV/JSON) and, unless --no-figures
is passed, renders matplotlib figures alongside them.

Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.
"""

from __future__ import annotations

import json
import logging
import os

import click
import jsonschema
import numpy as np
import yaml

from . import __version__
from .chain_analysis import (
    VERIFY_STATE_CAP,
    build_transition_matrix,
    spectral_gap,
    tv_curve,
    tv_curve_to_csv,
    verify_bounds,
)
from .coupling import (
    curve_to_csv,
    init_fixed,
    init_null,
    init_posterior_draw,
    mixing_time_estimate,
    records_to_json,
    sample_meeting_times,
    tv_bound_curve,
)
from .datasets import load_dataset, load_matrix, save_dataset
from .elastic_net import cv_select, fit_elastic_net, lambda_grid, support_of
from .experiment import run_experiment
from .metrics import _mean_response, f1_score, median_model, modal_model, rmse
from .posterior import OlapModel, one_step
from .samplers import inclusion_probs, run_chain
from .simulate import SimConfig, simulate as simulate_data
from .support import Support

log = logging.getLogger(__name__)

_FAMILIES = click.Choice(["logistic", "poisson", "gaussian"])


def _outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _write_json(payload, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fit_initial(data, folds, lambda2, seed):
    grid = lambda_grid(data)
    best = cv_select(data, data.family, folds=folds, lambda1_grid=grid,
                     lambda2=lambda2, seed=seed)
    result = fit_elastic_net(data, best)
    return best, result, support_of(result)


@click.group()
@click.version_option(version=__version__, prog_name="onestep-select")
def cli():
    """Variable selection for sparse GLMs via one-step model scores."""


@cli.command()
@click.option("--n", type=int, required=True, help="Sample size.")
@click.option("--p", type=int, required=True, help="Number of covariates.")
@click.option("--rho", type=float, default=0.0, show_default=True,
              help="AR(1) design correlation.")
@click.option("--s-star", type=int, default=10, show_default=True,
              help="Number of active coefficients.")
@click.option("--signal-low", type=float, default=2.0, show_default=True)
@click.option("--signal-high", type=float, default=3.0, show_default=True)
@click.option("--family", type=_FAMILIES, default="logistic", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True,
              help="Output directory.")
def simulate(n, p, rho, s_star, signal_low, signal_high, family, seed, out):
    """Draw a synthetic dataset; write data.csv and truth.json."""
    cfg = SimConfig(n=n, p=p, rho=rho, s_star=s_star, signal_low=signal_low,
                    signal_high=signal_high, family=family, seed=seed)
    data, theta_star, delta_star = simulate_data(cfg)
    out = _outdir(out)
    save_dataset(data, os.path.join(out, "data.csv"))
    _write_json(
        {
            "family": family,
            "n": n,
            "p": p,
            "rho": rho,
            "seed": seed,
            "theta_star": [float(v) for v in theta_star],
            "delta_star": list(delta_star.indices),
        },
        os.path.join(out, "truth.json"),
    )
    click.echo(f"wrote {out}/data.csv and {out}/truth.json (n={n}, p={p})")


def _export_models(model, trace, burnin, cap=50):
    """Distinct retained supports with weights and one-step coefficients."""
    kept = [m for s, m in zip(trace.steps_recorded, trace._retained_masks)
            if s >= burnin]
    weights = {}
    for m in kept:
        weights[m] = weights.get(m, 0) + 1
    items = sorted(weights.items(), key=lambda kv: (-kv[1], kv[0]))
    truncated = len(items) > cap
    items = items[:cap]
    total = float(sum(w for _, w in items))
    models = []
    for m, w in items:
        sup = Support(model.p, m)
        theta = one_step(model, sup)
        if not np.all(np.isfinite(theta)):
            continue
        models.append(
            {
                "delta": list(sup.indices),
                "weight": w / total,
                "theta_check": [float(v) for v in theta],
            }
        )
    return models, truncated


@cli.command()
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Training CSV with header row.")
@click.option("--family", type=_FAMILIES, required=True)
@click.option("--response-column", default="y", show_default=True)
@click.option("--u", type=float, default=0.8, show_default=True,
              help="Sparsity penalty exponent.")
@click.option("--steps", type=int, default=3000, show_default=True)
@click.option("--j", "j_sub", type=int, default=None,
              help="Coordinates per step [default: min(100, p)].")
@click.option("--burnin", type=int, default=None,
              help="Burn-in steps [default: steps // 2].")
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--lambda2", type=float, default=0.0, show_default=True)
@click.option("--thin", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def fit(data_path, family, response_column, u, steps, j_sub, burnin, folds,
        lambda2, thin, seed, out, figures):
    """Fit the initial estimator, run the sampler, report selections."""
    data = load_dataset(data_path, family, response_column)
    ss = np.random.SeedSequence(seed)
    cv_ss, chain_ss = ss.spawn(2)
    best, result, lasso_sup = _fit_initial(
        data, folds, lambda2, int(cv_ss.generate_state(1)[0])
    )
    model = OlapModel(data, result.theta_tilde, u=u)
    j_sub = j_sub if j_sub is not None else min(100, data.p)
    trace = run_chain(model, lasso_sup, steps, J=j_sub, seed=chain_ss, thin=thin)
    burnin = steps // 2 if burnin is None else burnin
    probs = inclusion_probs(trace, burnin)
    med = median_model(trace, burnin)
    mod = modal_model(trace, burnin)
    out = _outdir(out)
    with open(os.path.join(out, "inclusion.csv"), "w", encoding="utf-8") as fh:
        fh.write("coordinate,probability\n")
        for jj, pr in enumerate(probs, start=1):
            fh.write(f"{jj},{pr:.10g}\n")
    models, truncated = _export_models(model, trace, burnin)
    _write_json(
        {
            "schema_version": 1,
            "family": family,
            "p": data.p,
            "u": u,
            "lambda1": best.lambda1,
            "burnin": burnin,
            "steps": steps,
            "J": j_sub,
            "median_model": list(med.indices),
            "modal_model": list(mod.indices),
            "lasso_support": list(lasso_sup.indices),
            "truncated": truncated,
            "models": models,
        },
        os.path.join(out, "models.json"),
    )
    trace.save_jsonl(os.path.join(out, "trace.jsonl"))
    if figures:
        from . import figures as figmod

        figmod.inclusion_bar(probs, os.path.join(out, "inclusion.png"))
    click.echo(
        f"median model {list(med.indices)} | modal {list(mod.indices)} "
        f"| lasso start {len(lasso_sup.indices)} vars"
    )


@cli.command()
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--family", type=_FAMILIES, required=True)
@click.option("--response-column", default="y", show_default=True)
@click.option("--u", type=float, default=0.8, show_default=True)
@click.option("--lag", "-l", "lag", type=int, default=1, show_default=True)
@click.option("--records", type=int, default=30, show_default=True)
@click.option("--max-steps", type=int, default=100000, show_default=True)
@click.option("--threshold", type=float, default=0.25, show_default=True)
@click.option("--j", "j_sub", type=int, default=1, show_default=True)
@click.option("--init", type=click.Choice(["lasso", "null", "posterior"]),
              default="lasso", show_default=True)
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--lambda2", type=float, default=0.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=None)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def mixing(data_path, family, response_column, u, lag, records, max_steps,
           threshold, j_sub, init, folds, lambda2, seed, workers, out, figures):
    """Estimate mixing time from lagged-coupling meeting times."""
    data = load_dataset(data_path, family, response_column)
    ss = np.random.SeedSequence(seed)
    cv_ss, coup_ss = ss.spawn(2)
    _, result, lasso_sup = _fit_initial(
        data, folds, lambda2, int(cv_ss.generate_state(1)[0])
    )
    model = OlapModel(data, result.theta_tilde, u=u)
    if init == "lasso":
        sampler = init_fixed(lasso_sup, kind="lasso")
    elif init == "null":
        sampler = init_null()
    else:
        sampler = init_posterior_draw()
    recs = sample_meeting_times(
        model, records, lag, sampler, max_steps,
        int(coup_ss.generate_state(1)[0]), J=j_sub, workers=workers,
    )
    kept = [r for r in recs if not r.censored]
    out = _outdir(out)
    records_to_json(recs, os.path.join(out, "records.json"))
    payload = {
        "L": lag,
        "threshold": threshold,
        "J": j_sub,
        "init": init,
        "records": len(recs),
        "censored": len(recs) - len(kept),
    }
    if kept:
        t_max = max(r.tau - r.L for r in kept)
        curve = tv_bound_curve(recs, t_max)
        est = mixing_time_estimate(curve, threshold)
        curve_to_csv(curve, os.path.join(out, "curve.csv"))
        payload["mixing_time"] = est
        if figures:
            from . import figures as figmod

            figmod.decay_curves([curve], os.path.join(out, "curve.png"),
                                threshold=threshold)
        click.echo(f"mixing-time estimate {est} (threshold {threshold}, L={lag})")
    else:
        click.echo("all records censored; no curve written", err=True)
    _write_json(payload, os.path.join(out, "mixing.json"))


@cli.command()
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--family", type=_FAMILIES, required=True)
@click.option("--response-column", default="y", show_default=True)
@click.option("--u", type=float, default=0.8, show_default=True)
@click.option("--max-p", type=int, default=12, show_default=True,
              help="Refuse exhaustive analysis beyond this dimension.")
@click.option("--epsilons", default="0.02,0.05", show_default=True,
              help="Comma-separated epsilon levels for the composite bound.")
@click.option("--j0", type=int, default=1, show_default=True,
              help="Support-size margin defining the restricted ball.")
@click.option("--delta-star", "delta_star_arg", default=None,
              help="Comma-separated 1-based reference support "
                   "[default: posterior mode].")
@click.option("--tv-steps", type=int, default=200, show_default=True)
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--lambda2", type=float, default=0.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def spectral(data_path, family, response_column, u, max_p, epsilons, j0,
             delta_star_arg, tv_steps, folds, lambda2, seed, out, figures):
    """Exact finite-state chain analysis (small p only)."""
    data = load_dataset(data_path, family, response_column)
    _, result, _ = _fit_initial(data, folds, lambda2, seed)
    model = OlapModel(data, result.theta_tilde, u=u)
    chain = build_transition_matrix(model, max_p=max_p)
    if delta_star_arg:
        idx = [int(t) for t in delta_star_arg.split(",") if t.strip()]
        delta_star = Support.from_indices(data.p, idx)
    else:
        delta_star = chain.states[int(np.argmax(chain.pi))]
    eps_list = [float(t) for t in epsilons.split(",") if t.strip()]
    out = _outdir(out)
    null0 = np.zeros(chain.n_states)
    null0[0] = 1.0
    curve = tv_curve(chain, null0, tv_steps)
    tv_curve_to_csv(curve, os.path.join(out, "tv_curve.csv"))
    if chain.n_states <= VERIFY_STATE_CAP:
        report = verify_bounds(chain, delta_star, eps_list, J0=j0)
        report.to_json(os.path.join(out, "report.json"))
        status = "pass" if report.passed else "FAIL"
        click.echo(
            f"lambda={report.lam:.6g} "
            f"phi={report.phi_by_zeta.get(0.0, float('nan')):.6g} "
            f"assertions {status}"
        )
    else:
        lam = spectral_gap(chain)
        _write_json(
            {
                "lambda": lam,
                "phi_by_zeta": {},
                "m_X0": None,
                "assertions": [],
                "note": (
                    f"{chain.n_states} states exceeds the verification cap "
                    f"{VERIFY_STATE_CAP}; spectral gap and TV curve only"
                ),
            },
            os.path.join(out, "report.json"),
        )
        click.echo(f"lambda={lam:.6g} (conductance skipped at this size)")
    if figures:
        from . import figures as figmod

        figmod.decay_curves([curve], os.path.join(out, "tv_curve.png"),
                            title="Exact distance to stationarity")


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="YAML experiment config.")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def benchmark(config_path, out, figures):
    """Run a replicated simulation study from a config file."""
    report = run_experiment(config_path)
    written = report.write(_outdir(out), figures=figures)
    s = report.summary
    f1 = s.get("f1_median")
    click.echo(
        f"{s['n_success']}/{s['replications']} replications succeeded"
        + (f"; median-model F1 median {f1['median']:.3f}" if f1 else "")
    )
    for path in written:
        log.info("wrote %s", path)
    if s["incomplete"]:
        click.echo("report is incomplete (failed replications recorded)", err=True)


@cli.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="models.json from the fit subcommand.")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="CSV of new rows (response column optional).")
@click.option("--response-column", default="y", show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def predict(model_path, data_path, response_column, out):
    """Posterior-averaged predictions for new design rows."""
    with open(model_path, encoding="utf-8") as fh:
        spec = json.load(fh)
    if spec.get("schema_version") != 1:
        raise ValueError(f"unsupported models.json schema {spec.get('schema_version')!r}")
    from .families import family_from_tag

    family = family_from_tag(spec["family"])
    p = int(spec["p"])
    header, arr = load_matrix(data_path)
    y = None
    if response_column in header:
        pos = header.index(response_column)
        y = arr[:, pos]
        arr = np.delete(arr, pos, axis=1)
    if arr.shape[1] != p:
        raise ValueError(
            f"{data_path}: {arr.shape[1]} feature columns, model expects {p}"
        )
    models = spec["models"]
    if not models:
        raise ValueError("models.json carries no usable models")
    total = sum(m["weight"] for m in models)
    preds = np.zeros(arr.shape[0])
    for m in models:
        idx = np.asarray(m["delta"], dtype=np.intp) - 1
        theta = np.asarray(m["theta_check"], dtype=float)
        eta = arr[:, idx] @ theta if idx.size else np.zeros(arr.shape[0])
        preds += _mean_response(family, eta) * (m["weight"] / total)
    out = _outdir(out)
    with open(os.path.join(out, "predictions.csv"), "w", encoding="utf-8") as fh:
        fh.write("row,prediction" + (",response\n" if y is not None else "\n"))
        for i, v in enumerate(preds, start=1):
            line = f"{i},{v:.10g}"
            if y is not None:
                line += f",{y[i - 1]:.10g}"
            fh.write(line + "\n")
    if y is not None:
        _write_json({"rmse": rmse(y, preds), "n": int(arr.shape[0])},
                    os.path.join(out, "metrics.json"))
        click.echo(f"rmse {rmse(y, preds):.6g} over {arr.shape[0]} rows")
    else:
        click.echo(f"wrote predictions for {arr.shape[0]} rows")


def main(argv=None):
    """Entry point mapping exceptions onto the documented exit codes."""
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (ValueError, TypeError, KeyError, FileNotFoundError,
            NotADirectoryError, IsADirectoryError,
            jsonschema.ValidationError, yaml.YAMLError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except Exception as exc:
        click.echo(f"runtime failure: {type(exc).__name__}: {exc}", err=True)
        return 2
    return 0
