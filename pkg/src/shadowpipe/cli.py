"""Command-line interface: corpus generation, pipeline runs, analysis,
benchmarks, and the HTTP service."""

from __future__ import annotations

import json
from pathlib import Path

import click

from .builtin import BUILTIN_PLANS, builtin_plan_text
from .calls import ReplayCache
from .corpus import CorpusConfig, CorpusError, export_corpus, generate_corpus, load_corpus, source_schemas
from .plan import PlanError, parse_plan
from .session import Session, SessionConfig


def _load_plan_text(plan_arg: str) -> str:
    if plan_arg in BUILTIN_PLANS:
        return builtin_plan_text(plan_arg)
    path = Path(plan_arg)
    if not path.exists():
        raise click.ClickException(f"plan file not found: {plan_arg}")
    return path.read_text("utf-8")


def _bundle(data_dir: str):
    try:
        return load_corpus(data_dir)
    except (CorpusError, FileNotFoundError) as e:
        raise click.ClickException(str(e)) from e


def _parse(plan_arg: str, bundle) -> object:
    try:
        return parse_plan(_load_plan_text(plan_arg), source_schemas(bundle))
    except PlanError as e:
        raise click.ClickException(str(e)) from e


@click.group()
def main() -> None:
    """Incremental pipeline engine with background improvement analyses."""


@main.command("gen-corpus")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON file with corpus settings.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--n-train", type=int, default=None)
@click.option("--n-test", type=int, default=None)
@click.option("--n-users", type=int, default=None)
def gen_corpus(config_path, out_dir, seed, n_train, n_test, n_users) -> None:
    """Generate the seeded synthetic corpus into a directory."""
    doc = {}
    if config_path:
        doc = json.loads(Path(config_path).read_text("utf-8"))
    overrides = {"seed": seed, "n_train_posts": n_train, "n_test_posts": n_test, "n_users": n_users}
    doc.update({k: v for k, v in overrides.items() if v is not None})
    try:
        config = CorpusConfig.from_doc(doc)
        bundle = generate_corpus(config)
        files = export_corpus(bundle, out_dir)
    except CorpusError as e:
        raise click.ClickException(str(e)) from e
    click.echo(json.dumps({"written": [str(f) for f in files]}, indent=1))


@main.command("run")
@click.option("--plan", "plan_arg", required=True, help="Plan file, or builtin name (rag, train).")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--replay-cache", type=click.Path(), default=None,
              help="Persist simulated external-call answers across runs.")
def run_cmd(plan_arg, data_dir, replay_cache) -> None:
    """Execute a pipeline plan; print metrics JSON."""
    from .engine import execute

    bundle = _bundle(data_dir)
    plan = _parse(plan_arg, bundle)
    replay = None
    if replay_cache and Path(replay_cache).exists():
        replay = ReplayCache.load(replay_cache)
    elif replay_cache:
        replay = ReplayCache()
    result = execute(plan, bundle, replay=replay)
    if replay_cache:
        replay.save(replay_cache)
    click.echo(json.dumps({
        "metrics": result.metrics,
        "invocations": {k: result.invocations.count(k)
                        for k in ("embed", "llm_infer", "translate", "spellcheck", "mlp_train")},
        "simulated_latency_ms": result.invocations.total_ms(),
    }, sort_keys=True, indent=1))


_SHADOW_FLAGS = {"slices": ("slices",), "label-errors": ("label_errors",),
                 "data-errors": ("data_errors",), "all": ("slices", "label_errors", "data_errors")}


@main.command("analyze")
@click.option("--plan", "plan_arg", required=True)
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--shadow", type=click.Choice(sorted(_SHADOW_FLAGS)), default="all")
@click.option("--seed", type=int, default=7)
def analyze(plan_arg, data_dir, shadow, seed) -> None:
    """Run the requested analyses and print ranked suggestions JSON."""
    bundle = _bundle(data_dir)
    plan = _parse(plan_arg, bundle)
    session = Session(plan, bundle, SessionConfig(seed=seed))
    session.run_shadows(_SHADOW_FLAGS[shadow])
    out = {
        "pipeline_accuracy": session.metrics()["accuracy"],
        "suggestions": [s.to_doc() for s in session.ranked_suggestions()],
        "findings": [f.to_doc() for f in session.findings],
    }
    click.echo(json.dumps(out, sort_keys=True, indent=1))


@main.command("bench")
@click.option("--scenarios", default="all",
              help='"all" or comma-separated pipeline:shadow[:mode] triples.')
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.option("--repetitions", type=int, default=7)
@click.option("--warmup", type=int, default=1)
def bench(scenarios, out_csv, repetitions, warmup) -> None:
    """Time naive vs optimised analysis computation (sleeps latencies)."""
    from .bench import BenchScenario, default_scenarios, run_bench, write_bench_csv

    if scenarios == "all":
        grid = default_scenarios(repetitions, warmup)
    else:
        grid = []
        for spec in scenarios.split(","):
            parts = spec.split(":")
            if len(parts) == 2:
                for mode in ("naive", "optimised"):
                    grid.append(BenchScenario(parts[0], parts[1], mode, repetitions, warmup))
            elif len(parts) == 3:
                grid.append(BenchScenario(parts[0], parts[1], parts[2], repetitions, warmup))
            else:
                raise click.ClickException(f"bad scenario spec: {spec!r}")
    rows = run_bench(grid)
    write_bench_csv(rows, out_csv)
    medians = [r for r in rows if r["rep"] == "median"]
    click.echo(json.dumps([{k: r[k] for k in ("scenario", "mode", "ms")} for r in medians], indent=1))


@main.command("maintain-bench")
@click.option("--edit", type=click.Choice(["regex"]), default="regex")
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.option("--cells", default="all", help='"all" or comma-separated pipeline:shadow pairs.')
@click.option("--repetitions", type=int, default=7)
@click.option("--warmup", type=int, default=1)
def maintain_bench(edit, out_csv, cells, repetitions, warmup) -> None:
    """Time naive vs incremental maintenance after the scripted regex edit."""
    from .bench import PIPELINES, SHADOWS, run_maintenance_bench, write_bench_csv

    if cells == "all":
        cell_list = [(p, s) for p in PIPELINES for s in SHADOWS]
    else:
        cell_list = []
        for spec in cells.split(","):
            p, s = spec.split(":")
            cell_list.append((p, s))
    rows = run_maintenance_bench(cell_list, repetitions=repetitions, warmup=warmup)
    write_bench_csv(rows, out_csv)
    medians = [r for r in rows if r["rep"] == "median"]
    click.echo(json.dumps([{k: r[k] for k in ("scenario", "mode", "ms")} for r in medians], indent=1))


@main.command("serve")
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--data", "data_dir", type=click.Path(exists=True), default=None,
              help="Restrict all sessions to this corpus directory.")
@click.option("--realistic-latency", is_flag=True, default=False,
              help="Actually sleep the artificial external-call latencies.")
@click.option("--static", "static_dir", type=click.Path(), default=None,
              help="Directory with the web UI build to serve at /.")
def serve(port, host, data_dir, realistic_latency, static_dir) -> None:
    """Serve the HTTP API (and the web UI when a build directory exists)."""
    import uvicorn

    from .service import create_app

    if static_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static_dir = str(candidate) if candidate.is_dir() else None
    app = create_app(data_dir, realistic_latency=realistic_latency, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
