"""Command-line front end.

    ratio-mc gen-data  --config cfg.json [--output-dir DIR]
    ratio-mc train     --config cfg.json [--output-dir DIR]
    ratio-mc sample    --config cfg.json [--output-dir DIR] [--oracle]
    ratio-mc evaluate  --config cfg.json [--output-dir DIR] [--oracle]
    ratio-mc demo      --preset NAME     [--output-dir DIR] [--oracle]

Exit codes: 0 success, 1 usage or config error, 2 runtime error, 3 sampling
budget exhausted (partial output written and flagged).

Every artifact embeds the config hash and package version; rerunning any
command with the same config reproduces its outputs byte for byte.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .classifier import OraclePosterior, load_model, save_model, train
from .config import (
    NAMED_INTEGRANDS,
    STREAM_INSTRUMENTAL_DATA,
    STREAM_PROJECTIONS,
    STREAM_REFERENCE,
    STREAM_SAMPLER,
    STREAM_SHUFFLE,
    STREAM_TARGET_DATA,
    RunConfig,
    config_from_dict,
    load_run_config,
    preset_config,
)
from .dataset import from_samples, load_csv, save_csv
from .diagnostics import Grid, two_sample_report
from .distributions import distribution_from_spec, fit_gaussian_moments
from .errors import ConfigError, RatioMcError
from .ratio import RatioEstimator, estimate_envelope
from .rng import RngStream
from .samplers import Integrand, ar_sample, imh_chain, is_estimate, sir_sample
from .serialize import read_points_csv, write_json, write_points_csv

DATASET_FILE = "dataset.csv"
GEN_MANIFEST_FILE = "gen_data_manifest.json"
MODEL_FILE = "model.json"
LOSS_TRACE_FILE = "loss_trace.csv"
TRAIN_MANIFEST_FILE = "train_manifest.json"
SAMPLES_FILE = "samples.csv"
SAMPLE_META_FILE = "sample_meta.json"
IS_ESTIMATE_FILE = "is_estimate.json"
REPORT_FILE = "evaluation_report.json"
REFERENCE_FILE = "reference.csv"
RATIO_GRID_FILE = "ratio_grid.csv"


def _manifest(cfg: RunConfig, command: str, **extra) -> dict:
    return {"config_sha256": cfg.sha256, "version": __version__, "command": command, **extra}


def _materialized_instrumental(cfg: RunConfig, out_dir: str):
    """The instrumental distribution actually used for this run.

    For moment_fit configs that is the Gaussian fitted during gen-data,
    read back from the gen-data manifest so every later stage uses the
    identical parameters.
    """
    if not cfg.moment_fit_instrumental:
        return distribution_from_spec(cfg.instrumental_spec)
    manifest_path = os.path.join(out_dir, GEN_MANIFEST_FILE)
    if not os.path.exists(manifest_path):
        raise ConfigError(
            "instrumental is 'moment_fit' but no gen-data manifest exists; run gen-data first"
        )
    from .serialize import read_json

    spec = read_json(manifest_path).get("instrumental_spec")
    if spec is None:
        raise ConfigError("gen-data manifest lacks instrumental_spec")
    return distribution_from_spec(spec)


def cmd_gen_data(cfg: RunConfig, oracle: bool = False) -> int:
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    target = cfg.target()
    x1 = target.sample(cfg.n1, RngStream(cfg.seed, STREAM_TARGET_DATA))
    if cfg.moment_fit_instrumental:
        instrumental = fit_gaussian_moments(x1)
    else:
        instrumental = distribution_from_spec(cfg.instrumental_spec)
    x0 = instrumental.sample(cfg.n0, RngStream(cfg.seed, STREAM_INSTRUMENTAL_DATA))
    ds = from_samples(x1, x0, RngStream(cfg.seed, STREAM_SHUFFLE))
    save_csv(ds, os.path.join(out, DATASET_FILE))
    write_json(
        os.path.join(out, GEN_MANIFEST_FILE),
        _manifest(
            cfg,
            "gen-data",
            seed=cfg.seed,
            n1=cfg.n1,
            n0=cfg.n0,
            dim=ds.dim,
            target_spec=cfg.target_spec,
            instrumental_spec=instrumental.to_spec(),
            instrumental_is_moment_fit=cfg.moment_fit_instrumental,
            streams={
                "target": STREAM_TARGET_DATA,
                "instrumental": STREAM_INSTRUMENTAL_DATA,
                "shuffle": STREAM_SHUFFLE,
            },
            rng=RngStream(cfg.seed, STREAM_TARGET_DATA).describe(),
        ),
    )
    print(f"gen-data: wrote {ds.n} rows to {os.path.join(out, DATASET_FILE)}")
    return 0


def cmd_train(cfg: RunConfig, oracle: bool = False) -> int:
    out = cfg.output_dir
    ds = load_csv(os.path.join(out, DATASET_FILE))
    clf, trace = train(
        ds,
        cfg.train_config(),
        hidden_layer_sizes=cfg.train["hidden_layers"],
        activation=cfg.train["activation"],
    )
    save_model(clf, os.path.join(out, MODEL_FILE))
    with open(os.path.join(out, LOSS_TRACE_FILE), "w", newline="\n") as fh:
        fh.write("epoch,train_loss,val_loss\n")
        for i, (tr, va) in enumerate(zip(trace.train_loss, trace.val_loss), start=1):
            fh.write("%d,%.17g,%.17g\n" % (i, tr, va))
    accuracy = float(np.mean(clf.predict(ds.points) == ds.labels))
    write_json(
        os.path.join(out, TRAIN_MANIFEST_FILE),
        _manifest(
            cfg,
            "train",
            best_epoch=trace.best_epoch,
            epochs_run=len(trace.train_loss),
            final_train_loss=trace.train_loss[-1] if trace.train_loss else None,
            final_val_loss=trace.val_loss[-1] if trace.val_loss else None,
            best_val_loss=(
                trace.val_loss[trace.best_epoch - 1] if trace.best_epoch >= 1 else None
            ),
            train_accuracy=accuracy,
            n0=ds.n0,
            n1=ds.n1,
        ),
    )
    print(
        f"train: best epoch {trace.best_epoch}, accuracy {accuracy:.4f}, "
        f"model at {os.path.join(out, MODEL_FILE)}"
    )
    return 0


def _ratio_estimator(cfg: RunConfig, out_dir: str, oracle: bool) -> RatioEstimator:
    if oracle:
        target = cfg.target()
        instrumental = _materialized_instrumental(cfg, out_dir)
        posterior = OraclePosterior(target, instrumental, cfg.n1, cfg.n0)
        return RatioEstimator(posterior, n0=cfg.n0, n1=cfg.n1)
    clf = load_model(os.path.join(out_dir, MODEL_FILE))
    return RatioEstimator(clf, n0=clf.n0_, n1=clf.n1_)


def cmd_sample(cfg: RunConfig, oracle: bool = False) -> int:
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    est = _ratio_estimator(cfg, out, oracle)
    proposal = _materialized_instrumental(cfg, out)
    rng = RngStream(cfg.seed, STREAM_SAMPLER)
    spec = cfg.sampler
    kind = spec["kind"]

    if kind == "is":
        f = Integrand(NAMED_INTEGRANDS[spec["f"]], spec["f"])
        estimate, stderr = is_estimate(est, proposal, f, spec["n"], rng)
        write_json(
            os.path.join(out, IS_ESTIMATE_FILE),
            _manifest(cfg, "sample", sampler="is", f=spec["f"], n=spec["n"],
                      estimate=estimate, std_error=stderr, oracle=oracle),
        )
        print(f"sample: IS estimate of {spec['f']} = {estimate!r} +- {stderr!r}")
        return 0

    if kind == "ar":
        ds = load_csv(os.path.join(out, DATASET_FILE))
        envelope = estimate_envelope(est, ds)
        result = ar_sample(est, envelope, proposal, spec["n_target"],
                           spec["max_proposals"], rng)
        points, meta = result.points, dict(result.meta)
        meta["envelope_initial"] = envelope.to_dict()
    elif kind == "imh":
        chain = imh_chain(est, proposal, spec["n_steps"], spec["burn_in"], None, rng)
        points, meta = chain.states, dict(chain.meta)
        meta["acceptance_rate"] = chain.acceptance_rate
        meta["burn_in"] = chain.burn_in
    else:  # sir
        result = sir_sample(est, proposal, spec["n_proposals"], spec["m_resampled"],
                            spec["scheme"], rng)
        points, meta = result.points, dict(result.meta)
        # The raw proposal matrix stays in memory only; weights go to the sidecar.
        meta.pop("proposal_points", None)
        meta["pre_resampling_weights"] = meta["pre_resampling_weights"].tolist()

    write_points_csv(os.path.join(out, SAMPLES_FILE), points)
    meta["oracle"] = oracle
    write_json(os.path.join(out, SAMPLE_META_FILE), _manifest(cfg, "sample", **meta))
    exhausted = bool(meta.get("budget_exhausted", False))
    print(
        f"sample: {kind} wrote {points.shape[0]} points"
        + (" (budget exhausted, partial output)" if exhausted else "")
    )
    return 3 if exhausted else 0


def cmd_evaluate(cfg: RunConfig, oracle: bool = False) -> int:
    out = cfg.output_dir
    samples = read_points_csv(os.path.join(out, SAMPLES_FILE))
    target = cfg.target()
    reference = target.sample(cfg.evaluation["n_reference"],
                              RngStream(cfg.seed, STREAM_REFERENCE))
    report = two_sample_report(
        samples, reference, cfg.evaluation["n_projections"],
        RngStream(cfg.seed, STREAM_PROJECTIONS),
    )
    alpha = cfg.evaluation["alpha"]
    write_points_csv(os.path.join(out, REFERENCE_FILE), reference)
    write_json(
        os.path.join(out, REPORT_FILE),
        _manifest(
            cfg,
            "evaluate",
            alpha=alpha,
            bonferroni_rejected=report.rejected(alpha),
            min_p_value=report.min_p_value(),
            report=report.to_dict(),
        ),
    )

    wrote_grid = False
    if samples.shape[1] == 2:
        try:
            est = _ratio_estimator(cfg, out, oracle)
        except (OSError, ConfigError, RatioMcError):
            est = None
        if est is not None:
            g = cfg.evaluation["ratio_grid"]
            grid = Grid.regular_2d(g["lo"], g["hi"], g["n_nodes"])
            pts = grid.points()
            values = est.log_ratio(pts)
            with open(os.path.join(out, RATIO_GRID_FILE), "w", newline="\n") as fh:
                fh.write("x0,x1,log_ratio\n")
                for (a, b), v in zip(pts, values):
                    fh.write("%.17g,%.17g,%.17g\n" % (a, b, v))
            wrote_grid = True

    verdict = "rejected" if report.rejected(alpha) else "not rejected"
    print(
        f"evaluate: KS {verdict} at alpha={alpha} (min p = {report.min_p_value():.3g})"
        + (f"; ratio grid at {os.path.join(out, RATIO_GRID_FILE)}" if wrote_grid else "")
    )
    return 0


def cmd_demo(cfg: RunConfig, oracle: bool = False) -> int:
    for step in (cmd_gen_data, cmd_train, cmd_sample, cmd_evaluate):
        code = step(cfg, oracle)
        if code != 0:
            return code
    return 0


class _Parser(argparse.ArgumentParser):
    """Argparse variant whose usage errors exit with code 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ratio-mc", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"ratio-mc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, needs_oracle=True, needs_config=True):
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("--config", required=(name != "demo"),
                           help="path to the run-config JSON")
        p.add_argument("--output-dir", default=None,
                       help="override the config's output directory")
        if needs_oracle:
            p.add_argument("--oracle", action="store_true",
                           help="use the exact-density posterior instead of a trained model")
        p.set_defaults(func=func)
        return p

    add("gen-data", cmd_gen_data, needs_oracle=False)
    add("train", cmd_train, needs_oracle=False)
    add("sample", cmd_sample)
    add("evaluate", cmd_evaluate)
    demo = add("demo", cmd_demo)
    demo.add_argument("--preset", default=None,
                      help="named preset: gaussian-1d, gmm-2d, two-moons, rings")
    return parser


def _load_config_for(args) -> RunConfig:
    if getattr(args, "preset", None):
        if args.config:
            raise ConfigError("give either --preset or --config, not both")
        out_dir = args.output_dir or args.preset
        os.makedirs(out_dir, exist_ok=True)
        doc = preset_config(args.preset)
        config_path = os.path.join(out_dir, "config.json")
        write_json(config_path, doc)
        cfg = load_run_config(config_path)
    else:
        if not getattr(args, "config", None):
            raise ConfigError("demo needs --preset or --config")
        cfg = load_run_config(args.config)
        if args.output_dir:
            cfg.output_dir = os.path.normpath(args.output_dir)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _load_config_for(args)
        return args.func(cfg, getattr(args, "oracle", False))
    except ConfigError as exc:
        print(f"ratio-mc: config error: {exc}", file=sys.stderr)
        return 1
    except (RatioMcError, OSError, ValueError) as exc:
        print(f"ratio-mc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
