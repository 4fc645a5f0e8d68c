"""Command-line surface.

Subcommands: fit, bound, placebo, synth-demo, lipschitz.  Reports are JSON
documents (plus CSV summaries where natural); the report paths also render
matplotlib figures next to the data files.  Exit codes: 0 success, 2
malformed input, 3 schema violation, 4 numerical failure.
"""

from __future__ import annotations

import dataclasses
import functools
import os
import sys
from pathlib import Path

import click
import numpy as np

from ._version import __version__
from . import io
from .dgp import DgpConfig, dgp_lipschitz, generate_panel
from .errors import InputDataError, NumericalFailureError, SchemaViolationError
from .estimators import (
    FitResult,
    PanelData,
    coverage_report,
    fit_james_bound,
    fit_m_bound,
    fit_standard_sc,
    placebo_study,
)
from .ot import DiscreteDistribution, align_to_union, l1_cost_matrix, w1_exact
from .simplex import PgdConfig

METHOD_FLAGS = {"standard": "standard", "m": "m_bound", "james": "james_bound"}


def _die(code: int, kind: str, err: BaseException) -> None:
    click.echo(f"scbounds: {kind}: {err}", err=True)
    sys.exit(code)


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InputDataError as exc:
            _die(2, "input-error", exc)
        except SchemaViolationError as exc:
            _die(3, "schema-error", exc)
        except NumericalFailureError as exc:
            _die(4, "numeric-error", exc)
        except ValueError as exc:
            _die(3, "schema-error", exc)

    return wrapper


def _fit_options(fn):
    fn = click.option(
        "--lr", type=float, default=5e-6, show_default=True,
        help="Projected-descent learning rate.",
    )(fn)
    fn = click.option(
        "--epochs", type=int, default=200_000, show_default=True,
        help="Projected-descent epochs.",
    )(fn)
    fn = click.option(
        "--tolerance", type=float, default=None,
        help="Optional early-stop threshold on the weight change.",
    )(fn)
    fn = click.option(
        "--trace-every", type=int, default=0, show_default=True,
        help="Record the objective every N epochs (0 disables).",
    )(fn)
    fn = click.option(
        "--solver", type=click.Choice(["exact", "entropic"]), default="exact",
        show_default=True, help="Transport solver for W1 and its gradient.",
    )(fn)
    fn = click.option(
        "--epsilon", type=float, default=None,
        help="Entropic regularization (default: 0.01 x median cost entry).",
    )(fn)
    return fn


def _figures_option(fn):
    return click.option(
        "--figures/--no-figures", default=True, show_default=True,
        help="Render matplotlib figures next to the output files.",
    )(fn)


def _pgd_config(lr, epochs, tolerance, trace_every) -> PgdConfig:
    try:
        return PgdConfig(
            learning_rate=lr,
            epochs=epochs,
            tolerance=tolerance,
            trace_every=trace_every,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc


def _config_echo(config: PgdConfig, solver: str, epsilon, lam=None) -> dict:
    return {
        "learning_rate": config.learning_rate,
        "epochs": config.epochs,
        "tolerance": config.tolerance,
        "trace_every": config.trace_every,
        "solver": solver,
        "epsilon": epsilon,
        "lambda": lam,
    }


def _load_fit_inputs(panel_path, target, t0_label, dists_path):
    panel = io.read_panel_table(panel_path).to_panel(target, t0_label)
    dists = None
    if dists_path is not None:
        dists = io.read_dists_json(dists_path)
        missing = [u for u in panel.unit_ids if u not in dists]
        if missing:
            raise SchemaViolationError(
                f"no cause distribution for unit(s): {', '.join(missing)}"
            )
    return panel, dists


def _w1_at_weights(
    panel: PanelData, dists: dict, weights: np.ndarray
) -> float:
    """Exact W1 between the target distribution and the donor mixture."""
    aligned = align_to_union(
        [dists[panel.target_id]] + [dists[u] for u in panel.donor_ids]
    )
    p0, donor_dists = aligned[0], aligned[1:]
    cost = l1_cost_matrix(p0.atom_set, donor_dists[0].atom_set)
    mix = DiscreteDistribution(
        donor_dists[0].atom_set,
        weights @ np.stack([d.probs for d in donor_dists]),
    )
    return w1_exact(p0, mix, cost).value


def _run_fit(panel, dists, method, lam, config, solver, epsilon) -> FitResult:
    if method == "standard":
        fit = fit_standard_sc(panel, config)
        if dists is not None:
            w1 = _w1_at_weights(panel, dists, fit.weights.values)
            fit = dataclasses.replace(fit, w1_at_solution=w1)
        return fit
    p0 = dists[panel.target_id]
    donor_dists = [dists[u] for u in panel.donor_ids]
    if method == "m_bound":
        return fit_m_bound(p0, donor_dists, config, solver, epsilon)
    return fit_james_bound(panel, p0, donor_dists, lam, config, solver, epsilon)


def _fit_figures(out_path: str, doc: dict, title: str) -> None:
    from . import plots

    stem = str(Path(out_path).with_suffix(""))
    plots.save_weights_figure(
        stem + "_weights.png", doc["weights"], title=f"{title}: weights"
    )
    recs = doc["periods"]
    has_bounds = recs and recs[0]["lower"] is not None
    plots.save_series_figure(
        stem + "_series.png",
        [r["period_label"] for r in recs],
        [r["observed_target"] for r in recs],
        [r["synthetic"] for r in recs],
        t0_index=[r["period_label"] for r in recs].index(doc["t0_label"]),
        lower=[r["lower"] for r in recs] if has_bounds else None,
        upper=[r["upper"] for r in recs] if has_bounds else None,
        title=title,
    )


@click.group()
@click.version_option(__version__, prog_name="scbounds")
def main() -> None:
    """Synthetic controls with misspecification bounds."""


@main.command()
@click.option("--panel", "panel_path", required=True, help="Long-format panel CSV.")
@click.option("--target", required=True, help="Target unit id.")
@click.option("--t0", "t0_label", required=True,
              help="First intervention period label.")
@click.option("--method", type=click.Choice(list(METHOD_FLAGS)), required=True)
@click.option("--dists", "dists_path", default=None,
              help="Unit cause distributions (JSON).")
@click.option("--lambda", "lam", type=float, default=None,
              help="Trade-off weight on W1 for the james method.")
@click.option("--lipschitz", "ell", type=float, default=None,
              help="Lipschitz constant; also sets lambda when it is omitted.")
@_fit_options
@click.option("--out", "out_path", default="fit.json", show_default=True)
@_figures_option
@_handle_errors
def fit(panel_path, target, t0_label, method, dists_path, lam, ell,
        lr, epochs, tolerance, trace_every, solver, epsilon, out_path, figures):
    """Fit SC weights and write a result document."""
    method = METHOD_FLAGS[method]
    if method in ("m_bound", "james_bound") and dists_path is None:
        raise click.UsageError(f"--method {method} requires --dists")
    if method == "james_bound":
        if lam is None:
            if ell is None:
                raise click.UsageError(
                    "--method james requires --lambda or --lipschitz"
                )
            lam = ell
    config = _pgd_config(lr, epochs, tolerance, trace_every)
    panel, dists = _load_fit_inputs(panel_path, target, t0_label, dists_path)
    result = _run_fit(panel, dists, method, lam, config, solver, epsilon)
    doc = io.result_document(
        panel=panel,
        fit=result,
        ell=ell,
        lam=lam,
        config_echo=_config_echo(config, solver, epsilon, lam),
    )
    io.write_result_json(out_path, doc)
    if figures:
        _fit_figures(out_path, doc, title=f"{method} fit for {target}")
    click.echo(f"{method}: objective {result.objective_value:.6g}", err=False)
    for unit, weight in zip(panel.donor_ids, result.weights.values):
        if weight > 1e-6:
            click.echo(f"  {unit}: {weight:.4f}")
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--fit", "fit_path", required=True, help="Result document from fit.")
@click.option("--lipschitz", "ell", type=float, required=True)
@click.option("--out", "out_path", default="bound.json", show_default=True)
@_figures_option
@_handle_errors
def bound(fit_path, ell, out_path, figures):
    """Add misspecification intervals and coverage flags to a fit."""
    doc = io.read_result_json(fit_path)
    out = io.apply_bounds(doc, ell)
    io.write_result_json(out_path, out)
    if figures:
        _fit_figures(out_path, out, title=f"{out['method']} intervals")
    inside_pre = sum(
        1 for r in out["periods"]
        if r["inside"] and _pre(r, out)
    )
    total_pre = sum(1 for r in out["periods"] if _pre(r, out))
    click.echo(
        f"half-width {out['half_width']:.6g}; pre-period coverage "
        f"{inside_pre}/{total_pre}"
    )
    click.echo(f"wrote {out_path}")


def _pre(record: dict, doc: dict) -> bool:
    labels = [r["period_label"] for r in doc["periods"]]
    return labels.index(record["period_label"]) < labels.index(doc["t0_label"])


@main.command()
@click.option("--panel", "panel_path", required=True)
@click.option("--target", required=True)
@click.option("--t0", "t0_label", required=True)
@click.option("--method", type=click.Choice(list(METHOD_FLAGS)), required=True)
@click.option("--dists", "dists_path", required=True)
@click.option("--lipschitz", "ell", type=float, required=True)
@click.option("--lambda", "lam", type=float, default=None,
              help="james trade-off; defaults to --lipschitz.")
@_fit_options
@click.option("--workers", type=int, default=os.cpu_count() or 1,
              show_default="logical cores")
@click.option("--out-dir", "out_dir", required=True)
@_figures_option
@_handle_errors
def placebo(panel_path, target, t0_label, method, dists_path, ell, lam,
            lr, epochs, tolerance, trace_every, solver, epsilon,
            workers, out_dir, figures):
    """Refit with each donor as target; write per-unit documents + summary."""
    method = METHOD_FLAGS[method]
    config = _pgd_config(lr, epochs, tolerance, trace_every)
    panel, dists = _load_fit_inputs(panel_path, target, t0_label, dists_path)
    results = placebo_study(
        panel, dists, method,
        ell=ell, lam=lam, config=config, solver=solver, epsilon=epsilon,
        workers=max(1, workers),
    )
    outp = Path(out_dir)
    outp.mkdir(parents=True, exist_ok=True)
    summary_rows = []
    for unit, res in results.items():
        doc = io.result_document(
            panel=res.panel,
            fit=res.fit,
            ell=ell,
            lam=lam,
            config_echo=_config_echo(config, solver, epsilon, lam),
        )
        doc = io.apply_bounds(doc, ell)
        path = outp / f"placebo_{unit}.json"
        io.write_result_json(str(path), doc)
        if figures:
            _fit_figures(str(path), doc, title=f"placebo: {unit}")
        cov = coverage_report(res.panel, res.intervals)
        summary_rows.append(
            {
                "unit": unit,
                "method": method,
                "w1": res.fit.w1_at_solution,
                "pre_fit_max_abs_error": res.fit.pre_fit_max_abs_error,
                "half_width": doc["half_width"],
                "pre_inside": cov.pre_inside,
                "pre_total": cov.pre_total,
                "post_inside": cov.post_inside,
                "post_total": cov.post_total,
            }
        )
    summary_path = outp / "summary.csv"
    _write_summary_csv(summary_path, summary_rows)
    click.echo(f"wrote {len(summary_rows)} placebo documents to {out_dir}")
    click.echo(f"wrote {summary_path}")


def _write_summary_csv(path, rows) -> None:
    import csv

    fields = [
        "unit", "method", "w1", "pre_fit_max_abs_error", "half_width",
        "pre_inside", "pre_total", "post_inside", "post_total",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    k: (repr(float(v)) if isinstance(v, float) else v)
                    for k, v in row.items()
                }
            )


def _dgp_options(fn):
    fn = click.option("--periods", type=int, default=50, show_default=True)(fn)
    fn = click.option("--t0-index", type=int, default=15, show_default=True)(fn)
    fn = click.option("--atom-count", type=int, default=200, show_default=True)(fn)
    fn = click.option("--sigma", type=float, default=5.0, show_default=True)(fn)
    fn = click.option("--atom-max", type=float, default=90.0, show_default=True)(fn)
    fn = click.option("--noise-sigma", type=float, default=0.0, show_default=True)(fn)
    fn = click.option("--seed", type=int, default=0, show_default=True)(fn)
    return fn


def _dgp_config(periods, t0_index, atom_count, sigma, atom_max,
                noise_sigma, seed) -> DgpConfig:
    try:
        return DgpConfig(
            periods=periods,
            t0=t0_index,
            atom_count=atom_count,
            sigma=sigma,
            atom_max=atom_max,
            noise_sigma=noise_sigma,
            seed=seed,
        )
    except ValueError as exc:
        raise InputDataError(f"invalid generator config: {exc}") from exc


@main.command("synth-demo")
@_dgp_options
@_fit_options
@click.option("--out-dir", "out_dir", required=True)
@_figures_option
@_handle_errors
def synth_demo(periods, t0_index, atom_count, sigma, atom_max, noise_sigma,
               seed, lr, epochs, tolerance, trace_every, solver, epsilon,
               out_dir, figures):
    """Generate the synthetic benchmark, then run all three fits on it."""
    cfg = _dgp_config(
        periods, t0_index, atom_count, sigma, atom_max, noise_sigma, seed
    )
    config = _pgd_config(lr, epochs, tolerance, trace_every)
    outp = Path(out_dir)
    outp.mkdir(parents=True, exist_ok=True)
    gen_panel, gen_dists, truth = generate_panel(cfg)
    io.write_panel_csv(str(outp / "panel.csv"), gen_panel)
    io.write_dists_json(str(outp / "dists.json"), gen_dists)
    with open(outp / "truth.csv", "w", encoding="utf-8") as fh:
        fh.write("period,truth\n")
        for label, y in zip(gen_panel.period_labels, truth):
            fh.write(f"{label},{float(y)!r}\n")
    # Everything below goes through the same ingestion path as real data.
    target = gen_panel.target_id
    t0_label = str(gen_panel.period_labels[gen_panel.t0])
    panel, dists = _load_fit_inputs(
        str(outp / "panel.csv"), target, t0_label, str(outp / "dists.json")
    )
    ell = float(dgp_lipschitz(cfg).ell)
    click.echo(f"lipschitz constant from the outcome surface: {ell:.4f}")
    report: dict = {
        "tool": "scbounds",
        "version": __version__,
        "ell": ell,
        "target": target,
        "methods": {},
    }
    panels_fig = {}
    for method in ("standard", "m_bound", "james_bound"):
        result = _run_fit(
            panel, dists, method, ell, config, solver, epsilon
        )
        doc = io.result_document(
            panel=panel, fit=result, ell=ell,
            lam=ell if method == "james_bound" else None,
            config_echo=_config_echo(
                config, solver, epsilon, ell if method == "james_bound" else None
            ),
        )
        doc = io.apply_bounds(doc, ell)
        io.write_result_json(str(outp / f"fit_{method}.json"), doc)
        recs = doc["periods"]
        truth_inside = [
            bool(r["lower"] <= y <= r["upper"]) for r, y in zip(recs, truth)
        ]
        report["methods"][method] = {
            "weights": doc["weights"],
            "w1": result.w1_at_solution,
            "pre_fit_max_abs_error": result.pre_fit_max_abs_error,
            "half_width": doc["half_width"],
            "observed_inside": sum(1 for r in recs if r["inside"]),
            "truth_inside": sum(truth_inside),
            "periods": len(recs),
        }
        panels_fig[method] = {
            "synthetic": [r["synthetic"] for r in recs],
            "lower": [r["lower"] for r in recs],
            "upper": [r["upper"] for r in recs],
        }
        click.echo(
            f"{method}: w1 {result.w1_at_solution:.4f}, "
            f"half-width {doc['half_width']:.4f}, truth inside "
            f"{sum(truth_inside)}/{len(recs)}"
        )
    io.write_result_json(str(outp / "report.json"), report)
    if figures:
        from . import plots

        plots.save_comparison_figure(
            str(outp / "comparison.png"),
            list(panel.period_labels),
            list(truth),
            panels_fig,
            t0_index=panel.t0,
        )
        for method in report["methods"]:
            plots.save_weights_figure(
                str(outp / f"weights_{method}.png"),
                report["methods"][method]["weights"],
                title=f"{method} weights",
            )
    click.echo(f"wrote demo outputs to {out_dir}")


@main.command()
@click.option("--survey", "survey_path", default=None, help="Survey microdata CSV.")
@click.option("--schema", "schema_path", default=None, help="Cause schema JSON.")
@click.option("--from-dgp", is_flag=True, default=False,
              help="Use the synthetic benchmark's outcome surface instead.")
@_dgp_options
@click.option("--out", "out_path", default="lipschitz.json", show_default=True)
@_handle_errors
def lipschitz(survey_path, schema_path, from_dgp, periods, t0_index,
              atom_count, sigma, atom_max, noise_sigma, seed, out_path):
    """Estimate the Lipschitz constant of the conditional-outcome map."""
    if from_dgp:
        cfg = _dgp_config(
            periods, t0_index, atom_count, sigma, atom_max, noise_sigma, seed
        )
        est = dgp_lipschitz(cfg)
        source = "dgp"
    else:
        if survey_path is None or schema_path is None:
            raise click.UsageError(
                "either --from-dgp or both --survey and --schema are required"
            )
        schema = io.read_schema_json(schema_path)
        data = io.read_survey_csv(survey_path, schema)
        from .causes import estimate_lipschitz

        est = estimate_lipschitz(data)
        source = survey_path
    doc = {
        "tool": "scbounds",
        "version": __version__,
        "source": source,
        "ell": est.ell,
        "n_pairs": est.n_pairs,
        "argmax_pair": [
            [float(c) for c in est.argmax_pair[0]],
            [float(c) for c in est.argmax_pair[1]],
        ],
    }
    io.write_result_json(out_path, doc)
    click.echo(f"ell = {est.ell:.6g} over {est.n_pairs} pairs")
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
