"""Replication harness: simulate, fit, sample, summarize.

Each replication owns a seed stream spawned from the master seed (child r
is SeedSequence(master).spawn's r-th child, further split into simulate /
cross-validation / chain / auxiliary streams), so a rerun with the same
config reproduces every row byte for byte.  Timing is kept out of the
report body for exactly that reason.

A replication that fails is recorded as a row carrying the error text and
the aggregate marks itself incomplete; one bad seed never aborts a study.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass

import numpy as np

from .config import load_config, validate_config
from .coupling import (
    init_fixed,
    init_null,
    mixing_time_estimate,
    sample_meeting_times,
    tv_bound_curve,
)
from .elastic_net import NetConfig, cv_select, fit_elastic_net, lambda_grid, support_of
from .metrics import f1_score, median_model, modal_model, predict, rmse
from .posterior import OlapModel
from .samplers import DaConfig, inclusion_probs, run_chain, run_da_chain
from .simulate import RateOverflowError, SimConfig, design_matrix, draw_response, simulate
from .support import Support


@dataclass
class ExperimentReport:
    """Merged config echo, per-replication rows, and their summaries.

    body() is the deterministic part; timing lives next to it and is
    written to a separate file so byte-comparing two report bodies works.
    """

    config: dict
    rows: list
    summary: dict
    timing: dict

    def body(self):
        return {"config": self.config, "rows": self.rows, "summary": self.summary}

    def body_json(self):
        return json.dumps(self.body(), indent=2, sort_keys=True)

    def write(self, outdir, figures=True):
        import os

        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "report.json"), "w", encoding="utf-8") as fh:
            fh.write(self.body_json())
            fh.write("\n")
        with open(os.path.join(outdir, "timing.json"), "w", encoding="utf-8") as fh:
            json.dump(self.timing, fh, indent=2)
        self._write_rows_csv(os.path.join(outdir, "replications.csv"))
        written = [
            os.path.join(outdir, "report.json"),
            os.path.join(outdir, "timing.json"),
            os.path.join(outdir, "replications.csv"),
        ]
        if figures:
            from . import figures as figmod

            groups = {}
            for key, label in (("f1_median", "median model"), ("f1_modal", "modal model")):
                vals = [r[key] for r in self.rows if key in r]
                if vals:
                    groups[label] = vals
            if groups:
                path = os.path.join(outdir, "f1_boxplot.png")
                figmod.f1_boxplot(groups, path)
                written.append(path)
            curves = [r["coupling"]["curve"] for r in self.rows
                      if "coupling" in r and r["coupling"].get("curve")]
            if curves:
                path = os.path.join(outdir, "mixing_curves.png")
                figmod.decay_curves(
                    curves, path,
                    threshold=self.config["coupling"]["threshold"],
                )
                written.append(path)
        return written

    _CSV_COLUMNS = (
        "rep", "error", "burnin", "f1_median", "f1_modal", "f1_lasso",
        "size_median", "size_modal", "size_lasso", "lambda1", "rmse",
        "mixing_time", "coupling_censored", "da_f1_median", "da_accept_rate",
    )

    def _write_rows_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self._CSV_COLUMNS)
            for row in self.rows:
                flat = dict(row)
                if "coupling" in row:
                    flat["mixing_time"] = row["coupling"].get("mixing_time")
                    flat["coupling_censored"] = row["coupling"].get("censored")
                if "da" in row:
                    flat["da_f1_median"] = row["da"].get("f1_median")
                    flat["da_accept_rate"] = row["da"].get("accept_rate")
                writer.writerow(
                    ["" if flat.get(c) is None else flat.get(c, "")
                     for c in self._CSV_COLUMNS]
                )


def _seed_int(seed_seq):
    return int(seed_seq.generate_state(1)[0])


def _summarize(values):
    vals = [float(v) for v in values if v is not None]
    if not vals:
        return None
    arr = np.array(vals)
    return {
        "median": float(np.median(arr)),
        "std_error": float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0,
        "count": int(arr.size),
    }


def _pick_init(kind, lasso_sup, delta_star, p):
    if kind == "lasso":
        return lasso_sup
    if kind == "null":
        return Support.empty(p)
    if kind == "truth":
        return delta_star
    raise ValueError(f"unknown init kind {kind!r}")


def _coupling_sampler(kind, lasso_sup, delta_star):
    if kind == "lasso":
        return init_fixed(lasso_sup, kind="lasso")
    if kind == "null":
        return init_null()
    if kind == "truth":
        return init_fixed(delta_star, kind="truth")
    raise ValueError(f"unknown init kind {kind!r}")


def _one_replication(cfg, rep, child):
    sim_ss, cv_ss, chain_ss, aux_ss = child.spawn(4)
    sim = cfg["sim"]
    sim_cfg = SimConfig(
        n=sim["n"], p=sim["p"], rho=sim["rho"], s_star=sim["s_star"],
        signal_low=sim["signal_low"], signal_high=sim["signal_high"],
        family=sim["family"], seed=sim_ss,
    )
    data, theta_star, delta_star = simulate(sim_cfg)

    net = cfg["net"]
    grid = lambda_grid(data, size=net["grid_size"], ratio=net["grid_ratio"])
    best = cv_select(
        data, data.family, folds=net["folds"], lambda1_grid=grid,
        lambda2=net["lambda2"], seed=_seed_int(cv_ss),
    )
    result = fit_elastic_net(data, best)
    lasso_sup = support_of(result)

    model = OlapModel(
        data, result.theta_tilde, u=cfg["olap"]["u"],
        cache_cap=cfg["olap"]["cache_cap"],
    )
    chain_cfg = cfg["chain"]
    delta0 = _pick_init(chain_cfg["init"], lasso_sup, delta_star, sim["p"])
    steps = chain_cfg["steps"]
    trace = run_chain(
        model, delta0, steps, J=chain_cfg["J"], seed=chain_ss,
        thin=chain_cfg["thin"],
    )

    test_ss, coup_ss, da_ss = aux_ss.spawn(3)

    row = {
        "rep": rep,
        "f1_lasso": f1_score(lasso_sup, delta_star),
        "size_lasso": lasso_sup.weight,
        "lambda1": best.lambda1,
        "delta0_kind": chain_cfg["init"],
    }

    coupling_cfg = cfg["coupling"]
    mixing_est = None
    if coupling_cfg["enabled"]:
        sampler = _coupling_sampler(coupling_cfg["init"], lasso_sup, delta_star)
        records = sample_meeting_times(
            model, coupling_cfg["records"], coupling_cfg["L"], sampler,
            coupling_cfg["max_steps"], _seed_int(coup_ss), J=coupling_cfg["J"],
        )
        kept = [r for r in records if not r.censored]
        info = {"censored": len(records) - len(kept)}
        if kept:
            t_max = max(r.tau - r.L for r in kept)
            curve = tv_bound_curve(records, t_max)
            est = mixing_time_estimate(curve, coupling_cfg["threshold"])
            info["curve"] = [float(v) for v in curve]
            info["mixing_time"] = est
            mixing_est = est
        row["coupling"] = info

    burnin_cfg = cfg["experiment"]["burnin"]
    burnin_rule = burnin_cfg["kind"]
    if burnin_rule == "mixing" and mixing_est is not None \
            and coupling_cfg["J"] == chain_cfg["J"]:
        burnin = min(mixing_est, steps - 1)
    else:
        if burnin_rule == "mixing":
            burnin_rule = "fraction (mixing unavailable)"
        burnin = min(int(steps * burnin_cfg["fraction"]), steps - 1)
    row["burnin"] = burnin
    row["burnin_rule"] = burnin_rule

    med = median_model(trace, burnin)
    mod = modal_model(trace, burnin)
    row.update(
        f1_median=f1_score(med, delta_star),
        f1_modal=f1_score(mod, delta_star),
        size_median=med.weight,
        size_modal=mod.weight,
        median_model=list(med.indices),
        modal_model=list(mod.indices),
        inclusion_top=_top_inclusions(trace, burnin),
    )

    rmse_cfg = cfg["experiment"]["rmse"]
    if rmse_cfg["enabled"]:
        n_test = rmse_cfg["n_test"] or sim["n"]
        rng_t = np.random.default_rng(test_ss)
        X_test = design_matrix(n_test, sim["p"], sim["rho"], rng_t)
        eta_test = X_test[:, : sim["s_star"]] @ theta_star[: sim["s_star"]]
        try:
            y_test = draw_response(data.family, eta_test, rng_t)
            preds = predict(model, trace, burnin, X_test)
            row["rmse"] = rmse(y_test, preds)
        except RateOverflowError:
            row["rmse"] = None

    da_cfg = cfg["da"]
    if da_cfg["enabled"]:
        dc = DaConfig(
            rho0=da_cfg["rho0"], mala_step=da_cfg["mala_step"],
            adapt=da_cfg["adapt"],
        )
        da_steps = da_cfg["steps"]
        trace_da = run_da_chain(
            model, result.theta_tilde, delta0, da_steps, dc, seed=da_ss,
        )
        da_burn = min(da_steps // 2, max(da_steps - 1, 0))
        med_da = median_model(trace_da, da_burn)
        row["da"] = {
            "f1_median": f1_score(med_da, delta_star),
            "accept_rate": trace_da.accept_rate,
            "mala_step": trace_da.mala_step_final,
        }
    return row


def _top_inclusions(trace, burnin, k=15):
    probs = inclusion_probs(trace, burnin)
    order = np.argsort(-probs, kind="stable")[:k]
    return [[int(j) + 1, float(probs[j])] for j in order if probs[j] > 0]


def run_experiment(config):
    """Run every replication of a validated (or file-path) config.

    Per-replication failures become error rows; the summary marks the
    report incomplete rather than raising.  Fully deterministic given the
    merged config, master seed included.
    """
    if isinstance(config, (str, bytes)):
        cfg = load_config(config)
    else:
        cfg = validate_config(config)
    reps = cfg["experiment"]["replications"]
    root = np.random.SeedSequence(cfg["experiment"]["master_seed"])
    children = root.spawn(reps)
    rows = []
    per_rep_seconds = []
    t_start = time.perf_counter()
    for rep in range(reps):
        t0 = time.perf_counter()
        try:
            rows.append(_one_replication(cfg, rep, children[rep]))
        except Exception as exc:  # recorded, never fatal
            rows.append({"rep": rep, "error": f"{type(exc).__name__}: {exc}"})
        per_rep_seconds.append(time.perf_counter() - t0)
    total = time.perf_counter() - t_start

    good = [r for r in rows if "error" not in r]
    summary = {
        "replications": reps,
        "n_success": len(good),
        "n_failed": reps - len(good),
        "incomplete": len(good) < reps,
        "burnin_rules": sorted({r["burnin_rule"] for r in good}),
        "f1_median": _summarize(r.get("f1_median") for r in good),
        "f1_modal": _summarize(r.get("f1_modal") for r in good),
        "f1_lasso": _summarize(r.get("f1_lasso") for r in good),
        "rmse": _summarize(r.get("rmse") for r in good),
    }
    if cfg["coupling"]["enabled"]:
        summary["mixing_time"] = _summarize(
            r["coupling"].get("mixing_time") for r in good if "coupling" in r
        )
    if cfg["da"]["enabled"]:
        summary["da_f1_median"] = _summarize(
            r["da"].get("f1_median") for r in good if "da" in r
        )
    timing = {
        "total_seconds": total,
        "per_replication_seconds": per_rep_seconds,
    }
    return ExperimentReport(config=cfg, rows=rows, summary=summary, timing=timing)
