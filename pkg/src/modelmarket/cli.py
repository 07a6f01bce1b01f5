"""Command-line front end.

Subcommands:

* ``run``             one instance: best-response dynamics plus metrics
* ``sweep``           grid over pool size, platform count, or population
* ``entry``           entry training plus before/after market comparison
* ``verify-fixtures`` re-derive every built-in expectation record
* ``list-fixtures``   show the fixture registry

Configs are single JSON files with ``instance`` / ``choice`` / ``dynamics`` /
``sweep`` / ``training`` / ``output`` blocks (see README for the schema and
annotated examples).  Given the same config and seed, emitted CSV/JSON files
are byte-for-byte identical; there are no timestamps in any output.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, MarketGameError
from .game import ChoiceRule, GameSpec, ScoreMatrix, UserPopulation, platform_utilities
from .equilibrium import DynamicsOutcome, enumerate_pne, run_dynamics
from .metrics import coverage_value, market_shares, social_optimum, welfare_figures
from .fixtures import builtin_instance, fixture_names, verify_fixture
from .synthetic import (
    GmmComponent,
    GmmPopulationSpec,
    RbfKernel,
    RbfModelSpec,
    gmm_population,
    rbf_scores,
)
from . import entry as entry_mod

OUT_DIR_ENV = "MODELMARKET_OUT"

STEP_COLUMNS = [
    "run_id", "seed", "sweep_axis", "sweep_value", "repetition", "step",
    "mover", "changed", "profile", "utilities", "coverage", "hhi", "support",
]


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _load_config(path: str) -> dict:
    try:
        with open(path) as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def _require(cfg: dict, key: str, where: str):
    if key not in cfg:
        raise ConfigError(f"missing {key!r} in the {where} block")
    return cfg[key]


# ---------------------------------------------------------------------------
# instance construction
# ---------------------------------------------------------------------------

def _spec_from_file_block(block: dict) -> GameSpec:
    scores = ScoreMatrix(_require(block, "scores", "instance"), block.get("model_labels"))
    weights = _require(block, "weights", "instance")
    labels = block.get("type_labels") or [f"t{i + 1}" for i in range(len(weights))]
    population = UserPopulation(labels, weights)
    choice = _choice_from_block(block.get("choice")) or ChoiceRule.hardmax()
    return GameSpec(scores, population, int(_require(block, "n_platforms", "instance")), choice)


def _spec_from_synthetic_block(block: dict) -> GameSpec:
    models = []
    for m in _require(block, "models", "synthetic"):
        kernels = [
            RbfKernel(tuple(k["center"]), float(k["amplitude"]), float(k["width"]))
            for k in _require(m, "kernels", "synthetic model")
        ]
        models.append(RbfModelSpec(float(m.get("bias", 0.0)), kernels))
    g = _require(block, "gmm", "synthetic")
    components = [
        GmmComponent(float(c["weight"]), tuple(c["mean"]), c["covariance"])
        for c in _require(g, "components", "gmm")
    ]
    gmm = GmmPopulationSpec(
        components,
        k_types=int(_require(g, "k_types", "gmm")),
        dx=float(g.get("dx", 0.0)),
        seed=int(g.get("seed", 0)),
        sample_size=int(g.get("sample_size", 10_000)),
    )
    population, anchors = gmm_population(gmm)
    scores = rbf_scores(models, anchors)
    return GameSpec(scores, population, int(_require(block, "n_platforms", "synthetic")))


def _choice_from_block(block: dict | None) -> ChoiceRule | None:
    if block is None:
        return None
    kind = _require(block, "kind", "choice")
    if kind == "hardmax":
        return ChoiceRule.hardmax()
    if kind == "softmax":
        return ChoiceRule.softmax(float(_require(block, "tau", "choice")))
    raise ConfigError(f"unknown choice kind {kind!r}")


def _build_instance(cfg: dict, base_dir: str | Path = ".") -> tuple[GameSpec, str, str]:
    """Returns (spec, instance_name, fixture_notes).

    Instance file paths resolve relative to the config file's directory.
    """
    block = _require(cfg, "instance", "top-level")
    sources = [k for k in ("builtin", "file", "synthetic") if k in block]
    if len(sources) != 1:
        raise ConfigError("instance block needs exactly one of: builtin, file, synthetic")
    if sources[0] == "builtin":
        fixture = builtin_instance(block["builtin"])
        spec, name, notes = fixture.spec, fixture.name, fixture.notes
    elif sources[0] == "file":
        path = Path(base_dir) / block["file"]
        spec, name, notes = _spec_from_file_block(_load_config(str(path))), path.stem, ""
    else:
        spec, name, notes = _spec_from_synthetic_block(block["synthetic"]), "synthetic", ""
    override = _choice_from_block(cfg.get("choice"))
    if override is not None:
        spec = spec.with_choice(override)
    return spec, name, notes


# ---------------------------------------------------------------------------
# single runs
# ---------------------------------------------------------------------------

def _draw_start(spec: GameSpec, seed: int) -> tuple[int, ...]:
    rng = np.random.default_rng(seed)
    return tuple(int(x) for x in rng.integers(0, spec.n_models, size=spec.n_platforms))


def _dynamics_params(cfg: dict, seed_override: int | None) -> tuple[Any, Any, int, int]:
    block = cfg.get("dynamics", {})
    max_steps = int(block.get("max_steps", 1000))
    if max_steps < 1:
        raise ConfigError("dynamics.max_steps must be at least 1")
    order = block.get("order", "round_robin")
    seed = int(seed_override if seed_override is not None else block.get("seed", 0))
    return block.get("start"), order, max_steps, seed


def _trajectory_rows(spec: GameSpec, outcome: DynamicsOutcome, run_id: str, seed: int,
                     sweep_axis: str = "", sweep_value: str = "", repetition: int = 0) -> list[dict]:
    rows = []
    for step in outcome.trajectory:
        shares = market_shares(spec, step.profile_after)
        rows.append({
            "run_id": run_id,
            "seed": seed,
            "sweep_axis": sweep_axis,
            "sweep_value": sweep_value,
            "repetition": repetition,
            "step": step.index,
            "mover": step.mover + 1,
            "changed": int(step.changed),
            "profile": "|".join(spec.profile_labels(step.profile_after)),
            "utilities": "|".join(_fmt(u) for u in step.utilities),
            "coverage": _fmt(coverage_value(spec, step.profile_after)),
            "hhi": _fmt(shares.hhi),
            "support": shares.support,
        })
    return rows


def _summarize(spec: GameSpec, outcome: DynamicsOutcome, run_id: str, seed: int,
               instance_name: str, pne_budget: int = 1_000_000) -> dict:
    opt = social_optimum(spec)
    summary: dict[str, Any] = {
        "run_id": run_id,
        "instance": instance_name,
        "seed": seed,
        "n_models": spec.n_models,
        "n_platforms": spec.n_platforms,
        "choice": {"kind": spec.choice.kind, "tau": spec.choice.tau},
        "start": list(spec.profile_labels(outcome.start)),
        "outcome_kind": outcome.kind,
        "social_optimum": opt.value,
        "social_optimum_profile": list(spec.profile_labels(opt.profile)),
    }
    try:
        pne = enumerate_pne(spec, budget=pne_budget)
        summary["pne"] = [list(spec.profile_labels(p.choices)) for p, _ in pne]
        summary["pne_count"] = len(pne)
    except MarketGameError as exc:
        summary["pne"] = None
        summary["pne_note"] = str(exc)
    if outcome.kind == "timeout":
        summary["welfare"] = None
        return summary
    figures = welfare_figures(spec, outcome)
    assert figures.value <= opt.value + 1e-12, "welfare exceeded the social optimum"
    summary["welfare"] = figures.value
    summary["welfare_state_average"] = figures.state_average
    summary["welfare_multiset_average"] = figures.multiset_average
    if outcome.kind == "equilibrium":
        profile = outcome.equilibrium_profile
        summary["equilibrium_profile"] = list(spec.profile_labels(profile))
    else:
        summary["cycle_profiles"] = [list(spec.profile_labels(p)) for p in outcome.cycle_profiles]
        profile = outcome.cycle_profiles[0]
    shares = market_shares(spec, profile)
    summary["hhi"] = shares.hhi
    summary["support"] = shares.support
    summary["shares"] = list(shares.shares)
    summary["final_utilities"] = [float(u) for u in platform_utilities(spec, profile)]
    return summary


def _out_dir(args, cfg: dict) -> Path:
    if args.out:
        base = args.out
    elif cfg.get("output", {}).get("dir"):
        base = cfg["output"]["dir"]
    else:
        base = os.environ.get(OUT_DIR_ENV, "out")
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)


def _write_json(path: Path, payload) -> None:
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    spec, instance_name, notes = _build_instance(cfg, Path(args.config).parent)
    start_cfg, order, max_steps, seed = _dynamics_params(cfg, args.seed)
    start = tuple(start_cfg) if start_cfg is not None else _draw_start(spec, seed)
    outcome = run_dynamics(spec, start, order=order, max_steps=max_steps)
    prefix = cfg.get("output", {}).get("prefix", f"run_{instance_name}")
    out = _out_dir(args, cfg)
    rows = _trajectory_rows(spec, outcome, prefix, seed)
    summary = _summarize(spec, outcome, prefix, seed, instance_name)
    if notes:
        summary["fixture_notes"] = notes
    _write_csv(out / f"{prefix}_steps.csv", STEP_COLUMNS, rows)
    _write_json(out / f"{prefix}_summary.json", summary)
    print(f"{prefix}: {outcome.kind} after {len(outcome.trajectory)} steps; "
          f"welfare={summary.get('welfare')}; files in {out}")
    return 0


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def _sweep_cells(cfg: dict, seed_override: int | None = None) -> list[dict]:
    sweep = _require(cfg, "sweep", "top-level")
    axis = _require(sweep, "axis", "sweep")
    if axis not in ("models", "platforms", "population"):
        raise ConfigError(f"unknown sweep axis {axis!r}")
    values = _require(sweep, "values", "sweep")
    reps = int(sweep.get("repetitions", 1))
    if reps < 1:
        raise ConfigError("sweep.repetitions must be at least 1")
    seeds = sweep.get("seeds")
    if seeds is not None and len(seeds) != reps:
        raise ConfigError("sweep.seeds must list one seed per repetition")
    base_seed = int(seed_override if seed_override is not None
                    else cfg.get("dynamics", {}).get("seed", 0))
    cells = []
    for vi, value in enumerate(values):
        for rep in range(reps):
            seed = int(seeds[rep]) if seeds is not None else base_seed + 1000 * vi + rep
            cells.append({"axis": axis, "value_index": vi, "value": value,
                          "repetition": rep, "seed": seed})
    return cells


def _apply_axis(spec: GameSpec, axis: str, value) -> GameSpec:
    if axis == "models":
        m = int(value)
        if not 1 <= m <= spec.n_models:
            raise ConfigError(f"model-pool size {m} out of range [1, {spec.n_models}]")
        return spec.with_models(m)
    if axis == "platforms":
        n = int(value)
        if n < 1:
            raise ConfigError("platform count must be at least 1")
        return spec.with_platforms(n)
    population = UserPopulation(spec.population.type_labels, value)
    return GameSpec(spec.scores, population, spec.n_platforms, spec.choice)


def _run_sweep_cell(payload: tuple[str, dict, dict]) -> tuple[list[dict], dict]:
    config_path, cfg, cell = payload
    spec, instance_name, _ = _build_instance(cfg, Path(config_path).parent)
    spec = _apply_axis(spec, cell["axis"], cell["value"])
    block = cfg.get("dynamics", {})
    max_steps = int(block.get("max_steps", 1000))
    order = block.get("order", "round_robin")
    start = _draw_start(spec, cell["seed"])
    outcome = run_dynamics(spec, start, order=order, max_steps=max_steps)
    run_id = f"{instance_name}_{cell['axis']}_{cell['value_index']}_r{cell['repetition']}"
    value_str = json.dumps(cell["value"]) if isinstance(cell["value"], list) else str(cell["value"])
    rows = _trajectory_rows(spec, outcome, run_id, cell["seed"], cell["axis"],
                            value_str, cell["repetition"])
    summary = _summarize(spec, outcome, run_id, cell["seed"], instance_name)
    summary["sweep_axis"] = cell["axis"]
    summary["sweep_value"] = cell["value"]
    summary["repetition"] = cell["repetition"]
    return rows, summary


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    cells = _sweep_cells(cfg, args.seed)
    payloads = [(args.config, cfg, cell) for cell in cells]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_sweep_cell, payloads))
    else:
        results = [_run_sweep_cell(p) for p in payloads]
    # deterministic order regardless of executor scheduling
    order = sorted(range(len(cells)), key=lambda i: (cells[i]["value_index"], cells[i]["repetition"]))
    rows = [row for i in order for row in results[i][0]]
    summaries = [results[i][1] for i in order]
    prefix = cfg.get("output", {}).get("prefix", "sweep")
    out = _out_dir(args, cfg)
    _write_csv(out / f"{prefix}_long.csv", STEP_COLUMNS, rows)
    _write_json(out / f"{prefix}_summary.json", summaries)
    print(f"{prefix}: {len(cells)} cells, {len(rows)} step rows; files in {out}")
    return 0


# ---------------------------------------------------------------------------
# entry training
# ---------------------------------------------------------------------------

def _training_payload(cfg: dict) -> dict:
    block = _require(cfg, "training", "top-level")
    outcomes = _require(block, "outcomes", "training")
    rewards = entry_mod.RewardTable(_require(block, "rewards", "training"))
    ds = _require(block, "dataset", "training")
    dataset = entry_mod.EntryDataset(
        outcomes,
        _require(ds, "counts", "training.dataset"),
        attributes=ds.get("attributes"),
        attribute_labels=tuple(ds.get("attribute_labels", ())),
        type_attribute_prefs=ds.get("type_preferences"),
    )
    params = block.get("params", {})
    rename = {"lambda": "lam"}
    kwargs = {rename.get(k, k): v for k, v in params.items()}
    config = entry_mod.TrainingConfig(**kwargs)
    return {
        "method": block.get("method", "both"),
        "estimator": block.get("estimator", "exact"),
        "rewards": rewards,
        "dataset": dataset,
        "config": config,
        "n_platforms": int(block.get("n_platforms", 3)),
    }


def _entry_market_section(report: entry_mod.EntrantReport) -> dict:
    return {
        "adopted": report.adopted,
        "entrant_scores": list(report.entrant_score_row),
        "pne": [list(report.spec.profile_labels(p)) for p in report.pne],
        "outcome_kind": report.outcome.kind,
        "welfare": report.metrics.welfare,
        "social_optimum": report.metrics.social_optimum,
        "hhi": report.metrics.hhi,
        "support": report.metrics.support,
    }


def cmd_entry(args) -> int:
    cfg = _load_config(args.config)
    spec, instance_name, _ = _build_instance(cfg, Path(args.config).parent)
    payload = _training_payload(cfg)
    if spec.population.n_types != payload["rewards"].n_types:
        raise ConfigError("training rewards and instance population disagree on user types")
    pool = entry_mod.OpponentPool.from_matrix(spec.scores)
    population = spec.population
    config: entry_mod.TrainingConfig = payload["config"]
    n_platforms = payload["n_platforms"]

    base_spec = spec.with_platforms(n_platforms)
    base_pne = enumerate_pne(base_spec)
    report_json: dict[str, Any] = {
        "instance": instance_name,
        "n_platforms": n_platforms,
        "config": {k: getattr(config, k) for k in (
            "beta", "gamma", "lam", "outer_rounds", "inner_epochs", "eval_budget",
            "learning_rate", "baseline_decay", "blend", "seed")},
        "pre_entry": {
            "pne": [list(base_spec.profile_labels(p.choices)) for p, _ in base_pne],
            "social_optimum": social_optimum(base_spec).value,
        },
    }
    out = _out_dir(args, cfg)
    prefix = cfg.get("output", {}).get("prefix", f"entry_{instance_name}")
    methods = ["resampling", "direct"] if payload["method"] == "both" else [payload["method"]]
    for method in methods:
        if method == "resampling":
            gen, trace = entry_mod.train_resampling(
                payload["dataset"], payload["rewards"], population, pool, config)
            columns = ["round", "objective"] + [f"score_{t}" for t in population.type_labels]
            rows = [
                {"round": r["round"], "objective": _fmt(r["objective"]),
                 **{f"score_{t}": _fmt(s) for t, s in zip(population.type_labels, r["scores"])}}
                for r in trace
            ]
        elif method == "direct":
            gen, trace = entry_mod.train_direct_gradient(
                payload["dataset"], payload["rewards"], population, pool, config,
                estimator=payload["estimator"])
            columns = ["epoch", "cross_entropy", "objective", "loss"] + [
                f"score_{t}" for t in population.type_labels]
            rows = [
                {"epoch": r["epoch"], "cross_entropy": _fmt(r["cross_entropy"]),
                 "objective": _fmt(r["objective"]), "loss": _fmt(r["loss"]),
                 **{f"score_{t}": _fmt(s) for t, s in zip(population.type_labels, r["scores"])}}
                for r in trace
            ]
        else:
            raise ConfigError(f"unknown training method {method!r}")
        report = entry_mod.evaluate_entrant(
            gen, payload["rewards"], population, spec.scores, n_platforms,
            choice=spec.choice, entrant_label=f"entrant_{method}")
        _write_csv(out / f"{prefix}_trace_{method}.csv", columns, rows)
        report_json[method] = _entry_market_section(report)
    _write_json(out / f"{prefix}_report.json", report_json)
    print(f"{prefix}: trained {', '.join(methods)}; files in {out}")
    return 0


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------

def cmd_verify_fixtures(args) -> int:
    failures = 0
    for name in fixture_names():
        checks = verify_fixture(name)
        bad = [c for c in checks if not c.passed]
        status = "ok" if not bad else "MISMATCH"
        print(f"{name}: {status} ({len(checks) - len(bad)}/{len(checks)} checks)")
        for c in bad:
            tol = f" tol={c.tol}" if c.tol is not None else ""
            print(f"  {c.name}: expected {c.expected!r}, actual {c.actual!r}{tol}")
        failures += len(bad)
    print(f"verify-fixtures: {'PASS' if failures == 0 else f'{failures} mismatches'}")
    return 0 if failures == 0 else 1


def cmd_list_fixtures(args) -> int:
    for name in fixture_names():
        fixture = builtin_instance(name)
        spec = fixture.spec
        print(f"{name}: M={spec.n_models} K={spec.population.n_types} N={spec.n_platforms} "
              f"choice={spec.choice.kind} -- {fixture.description}")
        if fixture.notes:
            print(f"    note: {fixture.notes}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modelmarket",
        description="Deterministic simulator for model-platform-user market games.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config: bool):
        if needs_config:
            p.add_argument("--config", required=True, help="path to the JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the dynamics seed")
        p.add_argument("--out", default=None, help=f"output directory (default: ${OUT_DIR_ENV} or ./out)")
        p.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")

    p_run = sub.add_parser("run", help="run dynamics and metrics on one instance")
    add_common(p_run, True)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep pool size, platform count, or population")
    add_common(p_sweep, True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_entry = sub.add_parser("entry", help="train an entrant and compare the market before/after")
    add_common(p_entry, True)
    p_entry.set_defaults(func=cmd_entry)

    p_verify = sub.add_parser("verify-fixtures", help="re-derive every built-in expectation record")
    p_verify.set_defaults(func=cmd_verify_fixtures)

    p_list = sub.add_parser("list-fixtures", help="list the built-in instances")
    p_list.set_defaults(func=cmd_list_fixtures)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MarketGameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
