"""Command-line front end: ``netrel {simulate,train,predict,sensitivity,exact}``.

Settings come from flags, optionally preloaded from ``--config file.json``
(keys are the long flag names with dashes or underscores); flags win.
Exit codes: 0 success, 2 usage error, 3 data/validation error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path

from . import datasets
from .errors import DataError, NumericalError
from .fragility import load_bridges, load_fragility_table
from .hazard import FixedMagnitude, load_gmpe, load_magnitude_dist
from .montecarlo import (DEFAULT_EPICENTER, SeismicScenario, estimate_connectivity,
                         estimate_probabilistic_event)
from .network import exact_reliability, load_network
from .neural import TrainConfig, load_model, save_model
from .surrogates import (CLASSIFIER_HIDDEN, E2E_HIDDEN, ClassifierSurrogate, EndToEndSurrogate,
                         generate_classifier_dataset, generate_e2e_dataset, oat_sensitivity,
                         train_classifier, train_e2e)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


# -- helpers ------------------------------------------------------------------

def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc


def _read_or_bundled(path, name) -> str:
    return _read(path) if path else datasets.read_text(name)


def _network(args):
    return load_network(_read_or_bundled(args.network, datasets.NETWORK), args.network or "")


def _scenario(args) -> SeismicScenario:
    net = _network(args)
    frag = load_fragility_table(_read_or_bundled(args.fragility, datasets.FRAGILITY))
    bridges = load_bridges(_read_or_bundled(args.bridges, datasets.BRIDGES), frag)
    gmpe = load_gmpe(_read_or_bundled(args.gmpe, datasets.GMPE))
    if getattr(args, "sigma_ln", None) is not None:
        gmpe = gmpe.with_sigma(args.sigma_ln)
    return SeismicScenario(net, bridges, gmpe, tuple(args.epicenter))


def _magnitude_source(args, default_file=None):
    if args.magnitude is not None and args.magnitude_dist:
        raise UsageError("give either --magnitude or --magnitude-dist, not both")
    if args.magnitude is not None:
        return FixedMagnitude(args.magnitude)
    if args.magnitude_dist:
        return load_magnitude_dist(_read(args.magnitude_dist))
    if default_file:
        return load_magnitude_dist(datasets.read_text(default_file))
    raise UsageError("one of --magnitude or --magnitude-dist is required")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def _hidden(text, default):
    if text is None:
        return tuple(default)
    try:
        dims = tuple(int(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise UsageError(f"--hidden expects comma-separated integers, got {text!r}") from None
    if not dims or min(dims) < 1:
        raise UsageError("--hidden needs at least one positive layer width")
    return dims


def _checker(spec: str, n_links: int):
    if spec == "dfs":
        return "dfs"
    kind, _, path = spec.partition(":")
    if kind != "classifier" or not path:
        raise UsageError(f"--checker must be 'dfs' or 'classifier:<model-file>', got {spec!r}")
    sur = ClassifierSurrogate(load_model(_read(path)))
    if sur.n_links != n_links:
        raise DataError(f"classifier expects {sur.n_links} roadways, network has {n_links}")
    return sur


def _train_config(args, loss):
    return TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                       learning_rate=args.learning_rate, loss=loss, shuffle_seed=args.seed)


# -- commands -----------------------------------------------------------------

def cmd_simulate(args) -> int:
    scenario = _scenario(args)
    dist = _magnitude_source(args)
    check = _checker(args.checker, scenario.net.n_links)
    if isinstance(dist, FixedMagnitude) and not args.residuals:
        est = estimate_connectivity(scenario.net, scenario.probs_at(dist.magnitude), args.samples,
                                    check, args.seed, args.workers)
    else:
        est = estimate_probabilistic_event(scenario, dist, args.events, args.samples,
                                           args.residuals, check, args.seed, args.workers)
    out = _out_dir(args)
    _write_json(out / "estimate.json", est.summary())
    (out / "convergence.csv").write_text(est.trace_csv(), encoding="utf-8")
    print(f"p_hat={est.p_hat:.6f} n_samples={est.n_samples} std_err={est.std_err:.2e} "
          f"({est.elapsed_seconds:.2f} s)")
    return EXIT_OK


def cmd_train(args) -> int:
    scenario = _scenario(args)
    out = _out_dir(args)
    t0 = time.perf_counter()
    if args.kind == "classifier":
        epochs = 150 if args.epochs is None else args.epochs
        args.epochs = epochs
        data = generate_classifier_dataset(scenario, args.samples, args.realizations, args.seed,
                                           augment_disconnected=args.augment_disconnected)
        sur = train_classifier(data, _hidden(args.hidden, CLASSIFIER_HIDDEN),
                               _train_config(args, "bce"), init_seed=args.seed,
                               threshold=args.threshold)
        metrics = sur.metrics.to_dict() if sur.metrics else {}
        model, history, train_set = sur.model, sur.history, data.train
    else:
        args.epochs = 2000 if args.epochs is None else args.epochs
        if args.label_with == "dfs":
            checker = "dfs"
        else:
            if not args.classifier:
                raise UsageError("e2e training labels with a classifier: pass --classifier "
                                 "<model-file> or --label-with dfs")
            checker = _checker(f"classifier:{args.classifier}", scenario.net.n_links)
        data = generate_e2e_dataset(scenario, checker, args.magnitudes, args.topologies,
                                    args.seed, with_residuals=args.residual_sigma is not None,
                                    residual_sigma=args.residual_sigma, workers=args.workers)
        sur = train_e2e(data, _hidden(args.hidden, E2E_HIDDEN), _train_config(args, "mse"),
                        init_seed=args.seed)
        metrics = {"alpha_qoi": sur.qoi_accuracy}
        model, history, train_set = sur.model, sur.history, data.train
    (out / "model.json").write_text(save_model(model), encoding="utf-8")
    lines = ["epoch,loss"] + [f"{i + 1},{v!r}" for i, v in enumerate(history)]
    (out / "loss_history.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(out / "metrics.json", metrics)
    if args.dataset_out:
        Path(args.dataset_out).write_text(train_set.to_csv(), encoding="utf-8")
    print(f"trained {args.kind} in {time.perf_counter() - t0:.1f} s: {json.dumps(metrics)}")
    return EXIT_OK


def cmd_predict(args) -> int:
    scenario = _scenario(args)
    sur = EndToEndSurrogate(load_model(_read(args.model)))
    if sur.n_links != scenario.net.n_links:
        raise DataError(f"model expects {sur.n_links} roadway inputs, network has "
                        f"{scenario.net.n_links} roadways")
    dist = _magnitude_source(args)
    n_events = 1 if isinstance(dist, FixedMagnitude) else args.events
    mags, _ = scenario.draw_events(dist, n_events, args.seed)
    P = scenario.roadway_probs(scenario.bridge_survivals(mags))
    t0 = time.perf_counter()
    pred = sur.predict_batch(P)
    seconds = time.perf_counter() - t0
    out = _out_dir(args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["event", "magnitude", "p_connect"])
    for k, (m, p) in enumerate(zip(mags, pred)):
        w.writerow([k, repr(float(m)), repr(float(p))])
    (out / "predictions.csv").write_text(buf.getvalue(), encoding="utf-8")
    summary = {"mean_connectivity": float(pred.mean()), "n_events": n_events,
               "prediction_seconds": seconds}
    _write_json(out / "prediction_summary.json", summary)
    print(f"mean connectivity {pred.mean():.6f} over {n_events} events "
          f"(prediction {seconds * 1e3:.1f} ms)")
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    scenario = _scenario(args)
    dist = _magnitude_source(args, default_file=datasets.MAGNITUDE_OAT)
    sur = None
    if args.estimator == "e2e":
        if not args.model:
            raise UsageError("--estimator e2e needs --model <e2e-model-file>")
        sur = EndToEndSurrogate(load_model(_read(args.model)))
    res = oat_sensitivity(scenario, dist, args.amplification, args.estimator, sur,
                          n_events=args.events, n_inner=args.samples, seed=args.seed,
                          workers=args.workers)
    out = _out_dir(args)
    (out / "ranking.csv").write_text(res.to_csv(), encoding="utf-8")
    _write_json(out / "sensitivity_summary.json",
                {"baseline": res.baseline, "estimator": res.estimator,
                 "amplification": args.amplification, "elapsed_seconds": res.elapsed_seconds})
    top = ", ".join(f"{r.bridge_id} ({r.improvement_pct:.2f}%)" for r in res.rows[:3])
    print(f"baseline {res.baseline:.4f}; top bridges: {top} ({res.elapsed_seconds:.2f} s)")
    return EXIT_OK


def cmd_exact(args) -> int:
    net = _network(args)
    if args.probs is not None:
        try:
            probs = [float(x) for x in args.probs.split(",")]
        except ValueError:
            raise UsageError("--probs expects comma-separated numbers") from None
    elif args.uniform_prob is not None:
        probs = [args.uniform_prob] * net.n_links
    elif args.magnitude is not None:
        probs = _scenario(args).probs_at(args.magnitude).tolist()
    else:
        raise UsageError("give --probs, --uniform-prob or --magnitude")
    value = exact_reliability(net, probs)
    out = _out_dir(args)
    _write_json(out / "exact.json", {"reliability": value, "n_links": net.n_links})
    print(f"exact reliability {value!r}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _workers_default() -> int:
    raw = os.environ.get("NETREL_WORKERS", "1")
    try:
        return int(raw)
    except ValueError:
        return 1


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("inputs")
    g.add_argument("--network", help="network JSON (default: bundled synthetic network)")
    g.add_argument("--bridges", help="bridge inventory JSON")
    g.add_argument("--fragility", help="fragility table CSV")
    g.add_argument("--gmpe", help="GMPE coefficient JSON")
    g.add_argument("--epicenter", nargs=2, type=float, metavar=("LAT", "LON"),
                   default=list(DEFAULT_EPICENTER))
    p.add_argument("--config", help="JSON file with default values for any flag")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=_workers_default(),
                   help="worker threads (default: $NETREL_WORKERS or 1)")
    p.add_argument("--out", default=".", help="output directory")


def _magnitude_flags(p, events_default):
    p.add_argument("--magnitude", type=float, help="fixed moment magnitude")
    p.add_argument("--magnitude-dist", help='JSON {"beta":..,"m_min":..,"m_max":..}')
    p.add_argument("--events", type=int, default=events_default,
                   help="earthquake draws for a magnitude distribution")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netrel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices

    p = sub.add_parser("simulate", help="Monte Carlo connectivity estimate")
    _common(p)
    _magnitude_flags(p, events_default=100)
    p.add_argument("--samples", type=int, default=100000,
                   help="topologies (per event for a magnitude distribution)")
    p.add_argument("--residuals", action="store_true", help="sample GMPE residuals per bridge")
    p.add_argument("--sigma-ln", type=float, help="override the GMPE residual log-std")
    p.add_argument("--checker", default="dfs", help="dfs or classifier:<model-file>")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train a classifier or end-to-end surrogate")
    _common(p)
    p.add_argument("--kind", choices=("classifier", "e2e"), required=True)
    p.add_argument("--samples", type=int, default=10000, help="classifier magnitude samples")
    p.add_argument("--realizations", type=int, default=1, help="topologies per magnitude")
    p.add_argument("--augment-disconnected", type=int, default=0,
                   help="extra failed-topology rows per disconnected training row")
    p.add_argument("--magnitudes", type=int, default=3000, help="e2e magnitude samples")
    p.add_argument("--topologies", type=int, default=100000, help="e2e topologies per magnitude")
    p.add_argument("--classifier", help="classifier model used to label e2e data")
    p.add_argument("--label-with", choices=("classifier", "dfs"), default="classifier")
    p.add_argument("--residual-sigma", type=float,
                   help="draw per-bridge residuals with this log-std for e2e inputs")
    p.add_argument("--epochs", type=int, help="default 150 (classifier) or 2000 (e2e)")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--hidden", help="comma-separated hidden widths")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--dataset-out", help="also write the training rows as CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="end-to-end surrogate predictions")
    _common(p)
    _magnitude_flags(p, events_default=10000)
    p.add_argument("--model", required=True, help="e2e model JSON")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sensitivity", help="one-at-a-time bridge retrofit ranking")
    _common(p)
    _magnitude_flags(p, events_default=100)
    p.add_argument("--amplification", type=float, default=0.10)
    p.add_argument("--estimator", choices=("mc-dfs", "e2e", "exact"), default="mc-dfs")
    p.add_argument("--model", help="e2e model JSON (for --estimator e2e)")
    p.add_argument("--samples", type=int, default=10000, help="topologies per event (mc-dfs)")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("exact", help="exact reliability by state enumeration")
    _common(p)
    p.add_argument("--probs", help="comma-separated roadway survival probabilities")
    p.add_argument("--uniform-prob", type=float, help="same survival probability on every roadway")
    p.add_argument("--magnitude", type=float, help="derive probabilities from the hazard model")
    p.set_defaults(func=cmd_exact)
    return parser


def _apply_config(parser, argv):
    """Re-parse with defaults taken from --config; explicit flags still win."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = json.loads(_read(args.config))
    except json.JSONDecodeError as exc:
        raise DataError(f"config {args.config} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise DataError("config file must hold a JSON object")
    known = vars(args)
    sub = parser.subcommands[args.command]
    defaults = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("command", "func", "config"):
            raise UsageError(f"unknown config key {key!r} for '{args.command}'")
        defaults[dest] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if args.workers < 1:
            raise UsageError("--workers must be at least 1")
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"netrel: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"netrel: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError) as exc:
        print(f"netrel: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
