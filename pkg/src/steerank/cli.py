"""Command-line entry points.

Exit codes: 0 on success, 1 on usage errors (bad flags, unknown
commands, malformed or invalid config), 2 on runtime failures.
"""

import csv
import json
import os
import sys

import click
import numpy as np

from . import datagen, evaluator, metrics, nn, snapshot, training
from .config import ConfigError, apply_override, load_config, validate

TRAIN_STREAM = 1
TEST_STREAM = 2
DEMO_SESSIONS = 24


def _config_options(fn):
    fn = click.option("--config", "-c", "config_path", type=click.Path(),
                      default=None, help="JSON run config")(fn)
    fn = click.option("--set", "-s", "overrides", multiple=True,
                      metavar="KEY=VALUE", help="dotted config override")(fn)
    return fn


@click.group(name="steerank")
def cli():
    """Preference-steerable multi-objective re-ranking."""


# --------------------------------------------------------- gen-data

@cli.command("gen-data")
@_config_options
@click.option("--out", "-o", "out_dir", type=click.Path(), default=None,
              help="output directory (default: config data_dir)")
def gen_data(config_path, overrides, out_dir):
    """Generate the synthetic interaction log (train/test/demo)."""
    cfg = load_config(config_path, overrides)
    out_dir = out_dir or cfg["data_dir"]
    os.makedirs(out_dir, exist_ok=True)
    dc = cfg["datagen"]
    seed = cfg["seed"]
    catalog = datagen.generate_catalog(dc, seed)
    model = datagen.build_click_model(dc, seed)
    train = datagen.generate_logs(catalog, model, dc, dc["n_train"], seed,
                                  stream=TRAIN_STREAM)
    test = datagen.generate_logs(catalog, model, dc, dc["n_test"], seed,
                                 stream=TEST_STREAM)
    datagen.save_jsonl(os.path.join(out_dir, "train.jsonl"), train)
    datagen.save_jsonl(os.path.join(out_dir, "test.jsonl"), test)
    # rerank-request skeletons (user + candidates, no weights) for the panel
    demo = [{"user": s.to_json()["user"], "candidates": s.to_json()["candidates"]}
            for s in test[:DEMO_SESSIONS]]
    with open(os.path.join(out_dir, "demo_sessions.json"), "w",
              encoding="utf-8") as f:
        json.dump(demo, f, separators=(",", ":"))
        f.write("\n")
    click.echo(f"wrote {len(train)} train / {len(test)} test samples to {out_dir}")


def _load_data(cfg, data_dir, name):
    path = os.path.join(data_dir or cfg["data_dir"], name)
    if not os.path.exists(path):
        raise click.ClickException(f"missing data file {path} (run gen-data first)")
    return datagen.load_jsonl(path)


# --------------------------------------------------- train-evaluator

@cli.command("train-evaluator")
@_config_options
@click.option("--data", "data_dir", type=click.Path(), default=None)
@click.option("--out", "-o", "out_dir", type=click.Path(), required=True)
def train_evaluator_cmd(config_path, overrides, data_dir, out_dir):
    """Pre-train the list evaluator alone; reports held-out AUC."""
    cfg = load_config(config_path, overrides)
    train = _load_data(cfg, data_dir, "train.jsonl")
    test = _load_data(cfg, data_dir, "test.jsonl")
    _, n = training.dims(cfg)
    prep = training.prepare_samples(train)
    d_in = prep[0].feats.shape[1]
    store = nn.ParamStore()
    evaluator.init_evaluator(
        store, cfg["model"], n, d_in,
        np.random.default_rng(np.random.SeedSequence([cfg["seed"], 11])))
    curve = training.train_evaluator(prep, store, cfg, cfg["seed"])

    heads = cfg["model"]["heads"]
    prep_test = training.prepare_samples(test)
    probs = training.exposure_prob_cache(prep_test, store, heads)
    labels = np.concatenate([p.labels for p in prep_test])
    auc = metrics.auc(labels, probs.reshape(-1))

    os.makedirs(out_dir, exist_ok=True)
    snapshot.save_store(os.path.join(out_dir, "evaluator.snap"), store.arrays())
    with open(os.path.join(out_dir, "eval_curve.csv"), "w", newline="",
              encoding="utf-8") as f:
        wr = csv.writer(f)
        wr.writerow(["step", "bce"])
        for step, loss in curve:
            wr.writerow([step, repr(loss)])
    with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as f:
        json.dump({"final_bce": curve[-1][1] if curve else None,
                   "test_auc": auc}, f, indent=1, sort_keys=True)
        f.write("\n")
    if curve:
        click.echo(f"evaluator trained: final bce={curve[-1][1]:.4f} "
                   f"test auc={auc:.4f}")
    else:
        click.echo(f"evaluator init only: test auc={auc:.4f}")


# ------------------------------------------------------------ train

@cli.command("train")
@_config_options
@click.option("--data", "data_dir", type=click.Path(), default=None)
@click.option("--out", "-o", "out_dir", type=click.Path(), required=True)
def train_cmd(config_path, overrides, data_dir, out_dir):
    """Train the conditional re-ranker; writes a serveable bundle."""
    cfg = load_config(config_path, overrides)
    train = _load_data(cfg, data_dir, "train.jsonl")
    test = _load_data(cfg, data_dir, "test.jsonl")
    n_eval = cfg["eval"]["n_samples"]
    if n_eval is not None:
        test = test[:n_eval]
    _, _, _, curve, _, artifacts = training.train(
        train, cfg, out_dir=out_dir, test_samples=test)
    last = curve[-1] if curve else None
    click.echo(f"bundle written to {artifacts['bundle']}")
    if last is not None:
        click.echo(f"final step: loss={last.loss:+.5f} advantage={last.advantage:+.5f}")


# ------------------------------------------------------- eval/sweep

def _bundle_config(bundle, overrides):
    cfg = bundle.config
    for item in overrides:
        apply_override(cfg, item)
    validate(cfg)
    return cfg


def _sweep_common(bundle_dir, overrides, data_dir):
    bundle = training.load_bundle(bundle_dir)
    cfg = _bundle_config(bundle, overrides)
    test = _load_data(cfg, data_dir, "test.jsonl")
    n_eval = cfg["eval"]["n_samples"]
    if n_eval is not None:
        test = test[:n_eval]
    return bundle, cfg, test


@cli.command("eval")
@click.option("--bundle", "bundle_dir", type=click.Path(), required=True)
@click.option("--set", "-s", "overrides", multiple=True, metavar="KEY=VALUE")
@click.option("--data", "data_dir", type=click.Path(), default=None)
@click.option("--out", "-o", "out_path", type=click.Path(), default=None)
def eval_cmd(bundle_dir, overrides, data_dir, out_path):
    """Evaluate a bundle on the test set at the configured weights."""
    bundle, cfg, test = _sweep_common(bundle_dir, overrides, data_dir)
    w = training.resolve_eval_weights(cfg, bundle.util_set)
    rows = training.evaluate_controllability(
        bundle.store, bundle.shapes, bundle.util_set, test, cfg, [w])
    out_path = out_path or os.path.join(bundle_dir, "eval.csv")
    training.write_sweep(out_path, rows, bundle.util_set, k=cfg["eval"]["k"])
    click.echo(f"wrote {out_path}")
    for key, val in rows[0].items():
        if key != "w":
            click.echo(f"  {key} = {val:.5f}")


@cli.command("sweep")
@click.option("--bundle", "bundle_dir", type=click.Path(), required=True)
@click.option("--set", "-s", "overrides", multiple=True, metavar="KEY=VALUE")
@click.option("--data", "data_dir", type=click.Path(), default=None)
@click.option("--grid", type=int, default=None, help="grid points (default from config)")
@click.option("--axis", type=str, default=None,
              help="utility to sweep, others held at eval weights")
@click.option("--out", "-o", "out_path", type=click.Path(), default=None)
def sweep_cmd(bundle_dir, overrides, data_dir, grid, axis, out_path):
    """Sweep preference weights over a grid; one CSV row per point."""
    bundle, cfg, test = _sweep_common(bundle_dir, overrides, data_dir)
    grid = grid if grid is not None else cfg["sweep"]["grid"]
    axis = axis if axis is not None else cfg["sweep"]["axis"]
    base = training.resolve_eval_weights(cfg, bundle.util_set)
    weights = training.sweep_weights(bundle.util_set, grid, axis=axis, base=base)
    rows = training.evaluate_controllability(
        bundle.store, bundle.shapes, bundle.util_set, test, cfg, weights)
    out_path = out_path or os.path.join(bundle_dir, "sweep.csv")
    training.write_sweep(out_path, rows, bundle.util_set, k=cfg["eval"]["k"])
    click.echo(f"wrote {len(rows)} rows to {out_path}")


# ------------------------------------------------------------ serve

@cli.command("serve")
@click.option("--bundle", "bundle_dir", type=click.Path(), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve_cmd(bundle_dir, host, port):
    """Serve the re-ranking API over HTTP."""
    import uvicorn

    from . import server
    server.SLOT.set(training.load_bundle(bundle_dir))
    app = server.create_app(server.SLOT)
    click.echo(f"serving bundle {bundle_dir} on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


# ---------------------------------------------------------- inspect

@cli.command("inspect")
@click.argument("target", type=click.Path())
@click.option("--out", "-o", "out_path", type=click.Path(), default=None)
def inspect_cmd(target, out_path):
    """Describe a snapshot or bundle: namespaces, shapes, value hashes."""
    lines = []
    if os.path.isdir(target):
        manifest_path = os.path.join(target, training.BUNDLE_MANIFEST)
        snap_path = os.path.join(target, training.BUNDLE_SNAPSHOT)
        with open(manifest_path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
        lines.append(f"bundle {target}")
        lines.append(f"  utilities: {', '.join(manifest['utility_names'])}")
        lines.append(f"  w_max: {manifest['w_max']}")
        lines.append(f"  snapshot: {manifest['snapshot_hash']}")
    else:
        snap_path = target
        lines.append(f"snapshot {target}")
    report = snapshot.inspect_report(snap_path)
    for namespace, entries in report.items():
        total = sum(int(np.prod(shape)) for _, shape, _ in entries)
        lines.append(f"{namespace}  {len(entries)} tensors  {total} values")
        for name, shape, digest in entries:
            lines.append(f"  {name}  {shape}  {digest[:16]}")
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as f:
            f.write(text)
    click.echo(text, nl=False)


# ------------------------------------------------------------- main

def main(argv=None):
    try:
        cli.main(args=argv, prog_name="steerank", standalone_mode=False)
        return 0
    except click.exceptions.Exit as e:
        return int(e.exit_code)
    except click.UsageError as e:
        e.show()
        return 1
    except ConfigError as e:
        click.echo(f"error: {e}", err=True)
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 2
    except click.ClickException as e:
        click.echo(f"error: {e.format_message()}", err=True)
        return 2
    except Exception as e:
        click.echo(f"error: {e}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
