"""Command-line entry point: ``spectemp <subcommand> ...``.

Exit codes: 0 success, 2 configuration, 3 file format / data,
4 numerical failure, 5 I/O.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from spectemp import matio
from spectemp.errors import ConfigError, SpecTempError
from spectemp.evalhar import harness
from spectemp.evalhar.metrics import METRICS
from spectemp.evalhar.search import SIMILARITIES, default_ids
from spectemp.evalhar.synthetic import SynthSpec, generate_synthetic
from spectemp.spectral import SOLVERS
from spectemp.tempering import (
    DEFAULT_TAIL_FRACTION,
    build_plan,
    check_tail_fraction,
    fit_model,
    transform,
)

log = logging.getLogger("spectemp")

DEFAULT_SEED = 1999
DEFAULT_CAP = 1_000_000
DEFAULT_DIMS = "768,512,256,128,64"
SENSITIVITY_FRACTIONS = "0.05,0.10,0.15,0.20"
EXIT_IO = 5


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list is empty")
    return values


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list is empty")
    return values


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _spikes(text: str) -> list[tuple[int, float]]:
    out = []
    for item in _str_list(text):
        count, _, var = item.partition(":")
        try:
            out.append((int(count), float(var)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"spike tier {item!r} is not COUNT:VARIANCE") from None
    return out


def _check_dims(dims, d):
    bad = [k for k in dims if not (1 <= k <= d)]
    if bad:
        raise ConfigError(f"dims outside [1, {d}]: {', '.join(map(str, bad))}")


def _check_gamma(gamma):
    if gamma is not None and not (0.0 <= gamma <= 1.0):
        raise ConfigError(f"--gamma must lie in [0, 1], got {gamma}")


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_task(args):
    docs = matio.load_embeddings(args.docs)
    queries = matio.load_embeddings(args.queries)
    qrels = matio.load_qrels(args.qrels)
    doc_ids = matio.load_ids(args.doc_ids) if args.doc_ids else default_ids("d", docs.n)
    query_ids = matio.load_ids(args.query_ids) if args.query_ids else default_ids("q", queries.n)
    if len(doc_ids) != docs.n or len(query_ids) != queries.n:
        raise ConfigError("id file length does not match the embedding rows")
    return docs, queries, qrels, doc_ids, query_ids


def _model_for_task(args, docs):
    if getattr(args, "model", None):
        model = matio.load_model(args.model)
        if model.dim != docs.d:
            raise ConfigError(f"model dim {model.dim} != corpus dim {docs.d}")
        return model
    return fit_model(docs, args.sample_cap, args.seed, args.tail_fraction)


def cmd_fit(args) -> int:
    check_tail_fraction(args.tail_fraction)
    corpus = matio.load_embeddings(args.input)
    model = fit_model(corpus, args.sample_cap, args.seed, args.tail_fraction, args.solver)
    matio.save_model(model, args.output)
    print(f"dim            {model.dim}")
    print(f"rows used      {model.n_samples}")
    print(f"noise floor    {model.noise_floor:.6g}")
    print(f"knee index     {model.knee_index}")
    print(f"reference snr  {model.ref_snr:.6g}")
    return 0


def report_payload(model, dims):
    spectrum = [
        {"rank": i + 1, "eigenvalue": float(lam), "snr": float(s)}
        for i, (lam, s) in enumerate(zip(model.eigenvalues, model.snr))
    ]
    gammas = [{"k": k, "gamma": model.gamma(k)} for k in dims]
    return {
        "dim": model.dim,
        "n_samples": model.n_samples,
        "tail_fraction": model.tail_fraction,
        "noise_floor": model.noise_floor,
        "knee_index": model.knee_index,
        "ref_snr": model.ref_snr,
        "spectrum": spectrum,
        "gamma": gammas,
    }


def cmd_report(args) -> int:
    model = matio.load_model(args.model)
    dims = args.dims if args.dims is not None else [k for k in _int_list(DEFAULT_DIMS) if k <= model.dim]
    _check_dims(dims, model.dim)
    payload = report_payload(model, dims)

    if args.json:
        text = json.dumps(payload, indent=2) + "\n"
    elif args.csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "eigenvalue", "snr"])
        for row in payload["spectrum"]:
            w.writerow([row["rank"], repr(row["eigenvalue"]), repr(row["snr"])])
        w.writerow([])
        w.writerow(["k", "gamma"])
        for row in payload["gamma"]:
            w.writerow([row["k"], repr(row["gamma"])])
        text = buf.getvalue()
    else:
        lines = [
            f"dim {model.dim}  rows {model.n_samples}  tail {model.tail_fraction:g}  "
            f"noise floor {model.noise_floor:.6g}  knee {model.knee_index}  ref snr {model.ref_snr:.6g}",
            "",
            f"{'rank':>6} {'eigenvalue':>14} {'snr':>12}",
        ]
        lines += [f"{r['rank']:>6} {r['eigenvalue']:>14.6g} {r['snr']:>12.6g}" for r in payload["spectrum"]]
        lines += ["", f"{'k':>6} {'gamma':>8}"]
        lines += [f"{r['k']:>6} {r['gamma']:>8.4f}" for r in payload["gamma"]]
        text = "\n".join(lines) + "\n"
    _emit(text, args.output)
    return 0


def cmd_transform(args) -> int:
    _check_gamma(args.gamma)
    model = matio.load_model(args.model)
    x = matio.load_embeddings(args.input)
    plan = build_plan(model, args.k, gamma=args.gamma, l2_normalize=not args.no_normalize)
    y = transform(plan, x)
    matio.save_embeddings(matio.EmbeddingMatrix(y.astype(np.float32)), args.output)
    print(f"wrote {x.n} x {args.k} (gamma {plan.gamma:.4f}) to {args.output}")
    return 0


def cmd_eval(args) -> int:
    docs, queries, qrels, doc_ids, query_ids = _load_task(args)
    _check_dims(args.dims, docs.d)
    check_tail_fraction(args.tail_fraction)
    model = matio.load_model(args.model) if args.model else None
    if model is not None and model.dim != docs.d:
        raise ConfigError(f"model dim {model.dim} != corpus dim {docs.d}")
    report = harness.run_matrix(
        args.methods,
        args.dims,
        docs,
        queries,
        qrels,
        seeds=args.seeds,
        metrics=args.metrics,
        doc_ids=doc_ids,
        query_ids=query_ids,
        model=model,
        tail_fraction=args.tail_fraction,
        sample_cap=args.sample_cap,
        similarity=args.similarity,
        l2_normalize=not args.no_normalize,
        gamma_fixed=args.gamma_fixed,
    )
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n", encoding="utf-8")
    sys.stdout.write(report.to_table())
    return 0


def cmd_grid(args) -> int:
    docs, queries, qrels, doc_ids, query_ids = _load_task(args)
    _check_dims(args.dims, docs.d)
    check_tail_fraction(args.tail_fraction)
    model = _model_for_task(args, docs)
    out_dir = Path(args.output_dir) if args.output_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    summary = io.StringIO()
    w = csv.writer(summary, lineterminator="\n")
    w.writerow(["k", "best_gamma", "best_score", "predicted_gamma", "predicted_score"])
    print(f"{'k':>6} {'gamma*':>7} {'score*':>8} {'gamma(k)':>9} {'score':>8}")
    for k in args.dims:
        result = harness.grid_search_gamma(
            model, docs, queries, qrels, k, args.step, args.metric,
            doc_ids, query_ids, args.similarity, not args.no_normalize,
        )
        g = model.gamma(k)
        predicted = harness.score_compressed(
            *harness.compress("spectemp", k, docs, queries, model, l2_normalize=not args.no_normalize),
            qrels, [args.metric], doc_ids, query_ids, args.similarity,
        )[args.metric]
        w.writerow([k, f"{result.best_gamma:.2f}", repr(result.best_score), repr(g), repr(predicted)])
        if out_dir:
            (out_dir / f"grid_k{k}.csv").write_text(result.to_csv(), encoding="utf-8")
        print(f"{k:>6} {result.best_gamma:>7.2f} {100 * result.best_score:>8.2f} {g:>9.4f} {100 * predicted:>8.2f}")
    if out_dir:
        (out_dir / "grid_summary.csv").write_text(summary.getvalue(), encoding="utf-8")
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(
        n_docs=args.n_docs,
        n_queries=args.n_queries,
        d=args.dim,
        spikes=args.spikes,
        noise_variance=args.noise_variance,
        query_noise=args.query_noise,
        seed=args.seed,
        query_drift=args.query_drift,
    )
    task = generate_synthetic(spec)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    matio.save_embeddings(task.docs, out / "docs.embf")
    matio.save_embeddings(task.queries, out / "queries.embf")
    matio.save_qrels(task.qrels, out / "qrels.txt")
    matio.save_ids(task.doc_ids, out / "docs.ids")
    matio.save_ids(task.query_ids, out / "queries.ids")
    print(f"wrote {spec.n_docs} docs, {spec.n_queries} queries (d={spec.d}) to {out}")
    return 0


def sensitivity_rows(docs, queries, qrels, dims, fractions, metric, doc_ids, query_ids,
                     base_model, similarity="cosine", l2_normalize=True):
    """(k, tail_fraction, gamma, score) for every pair; reuses one eigendecomposition."""
    rows = []
    for frac in fractions:
        model = base_model.with_tail_fraction(frac)
        for k in dims:
            dc, qc = harness.compress("spectemp", k, docs, queries, model, l2_normalize=l2_normalize)
            score = harness.score_compressed(dc, qc, qrels, [metric], doc_ids, query_ids, similarity)[metric]
            rows.append((k, frac, model.gamma(k), score))
    return rows


def cmd_sensitivity(args) -> int:
    for f in args.fractions:
        check_tail_fraction(f)
    docs, queries, qrels, doc_ids, query_ids = _load_task(args)
    _check_dims(args.dims, docs.d)
    base = fit_model(docs, args.sample_cap, args.seed, args.fractions[0])
    rows = sensitivity_rows(
        docs, queries, qrels, args.dims, args.fractions, args.metric, doc_ids, query_ids,
        base, args.similarity, not args.no_normalize,
    )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "tail_fraction", "gamma", "score"])
    for k, frac, g, s in rows:
        w.writerow([k, repr(frac), repr(g), repr(s)])
    if args.csv:
        Path(args.csv).write_text(buf.getvalue(), encoding="utf-8")

    worst = 0.0
    print(f"{'k':>6} {'spread (x100)':>14}")
    for k in args.dims:
        scores = [s for kk, _, _, s in rows if kk == k]
        spread = 100 * (max(scores) - min(scores))
        worst = max(worst, spread)
        print(f"{k:>6} {spread:>14.3f}")
    print(f"max spread {worst:.3f} points")
    return 0


def _add_task_args(p, with_model=True):
    p.add_argument("--docs", required=True, help="document embeddings (EMBF)")
    p.add_argument("--queries", required=True, help="query embeddings (EMBF)")
    p.add_argument("--qrels", required=True, help="TREC-style qrels file")
    p.add_argument("--doc-ids", help="one document id per line, in row order")
    p.add_argument("--query-ids", help="one query id per line, in row order")
    if with_model:
        p.add_argument("--model", help="fitted STM1 model; fitted from --docs when omitted")
    _add_fit_args(p)
    p.add_argument("--similarity", choices=SIMILARITIES, default="cosine")
    p.add_argument("--no-normalize", action="store_true", help="skip L2 normalization after projection")


def _add_fit_args(p):
    p.add_argument("--tail-fraction", type=float, default=DEFAULT_TAIL_FRACTION)
    p.add_argument("--sample-cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectemp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model from corpus embeddings")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _add_fit_args(p)
    p.add_argument("--solver", choices=SOLVERS, default="lapack")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="eigenvalues, SNR profile and gamma(k) of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--dims", type=_int_list, help=f"target dims (default {DEFAULT_DIMS}, those <= d)")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true")
    p.add_argument("--output", help="write to this file instead of stdout")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("transform", help="compress embeddings with a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--gamma", type=float, help="fixed exponent in [0, 1] instead of gamma(k)")
    p.add_argument("--no-normalize", action="store_true")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("eval", help="method x dim x seed retrieval evaluation")
    _add_task_args(p)
    p.add_argument("--methods", type=_str_list, default=list(harness.METHODS))
    p.add_argument("--dims", type=_int_list, required=True)
    p.add_argument("--seeds", type=_int_list, default=list(harness.DEFAULT_SEEDS))
    p.add_argument("--metrics", type=_str_list, default=["ndcg_at_10"], help=f"any of {METRICS}")
    p.add_argument("--gamma-fixed", type=float, default=0.5)
    p.add_argument("--csv", help="write the report as CSV")
    p.add_argument("--json", help="write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="oracle gamma grid search per k")
    _add_task_args(p)
    p.add_argument("--dims", type=_int_list, required=True)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--metric", choices=METRICS, default="ndcg_at_10")
    p.add_argument("--output-dir", help="write grid_k<k>.csv curves and grid_summary.csv here")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("synth", help="generate a spiked-covariance retrieval task")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--n-docs", type=int, default=10_000)
    p.add_argument("--n-queries", type=int, default=1_000)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--spikes", type=_spikes, default=_spikes("4:200,12:60,32:20"), help="COUNT:VAR,...")
    p.add_argument("--noise-variance", type=float, default=1.0)
    p.add_argument("--query-noise", type=float, default=4.0)
    p.add_argument("--query-drift", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sensitivity", help="SpecTemp score spread across tail fractions")
    _add_task_args(p, with_model=False)
    p.add_argument("--dims", type=_int_list, required=True)
    p.add_argument("--fractions", type=_float_list, default=_float_list(SENSITIVITY_FRACTIONS))
    p.add_argument("--metric", choices=METRICS, default="ndcg_at_10")
    p.add_argument("--csv", help="write k,tail_fraction,gamma,score rows here")
    p.set_defaults(func=cmd_sensitivity)
    return parser


def _thread_limit():
    raw = os.environ.get("SPECTEMP_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"SPECTEMP_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError(f"SPECTEMP_THREADS must be >= 0, got {n}")
    if n == 0:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        with _thread_limit():
            return args.func(args)
    except SpecTempError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
