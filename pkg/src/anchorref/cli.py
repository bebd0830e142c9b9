"""Command-line surface.

Subcommands: simulate, validate, build-bank, run, evaluate, ablate.
Exit codes: 0 success, 2 input/validation error, 3 domain error (e.g. no
static scene), 1 unexpected failure.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import metrics as metrics_mod
from . import pipeline as pipeline_mod
from . import simulate as sim
from .anchors import align_query, build_bank
from .config import RunConfig, default_config_text, load_config
from .container import TraceData, load_bank, load_trace, save_bank, save_grid_sequence, save_trace
from .core import AnchorRefError, EmptySceneError, QuerySpec, TraceFormatError, normalize
from .core import validate_trace as validate_trace_op

EXIT_INPUT = 2
EXIT_DOMAIN = 3


class InputError(AnchorRefError):
    pass


def _parse_sets(pairs: tuple[str, ...]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise InputError(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        out[key.strip()] = value.strip()
    return out


def _config(config_path: str | None, sets: tuple[str, ...]) -> RunConfig:
    return load_config(config_path, _parse_sets(sets))


def toy_text_embedding(text: str, dim: int) -> np.ndarray:
    """Deterministic stand-in embedder: hashes the text into a unit vector.

    This is a toy for smoke runs; precomputed embeddings are the canonical
    query input.
    """
    digest = np.frombuffer(text.encode("utf-8"), dtype=np.uint8)
    seed = [int(x) for x in digest[:8]] + [dim]
    rng = np.random.default_rng(seed)
    return normalize(rng.standard_normal(dim))


def _resolve_query(trace: TraceData, query_text: str | None, query_embedding: str | None) -> QuerySpec:
    if query_embedding:
        doc = json.loads(Path(query_embedding).read_text(encoding="utf-8"))
        return QuerySpec(
            text=doc.get("text", ""),
            embedding=np.asarray(doc["embedding"], dtype=np.float32),
        )
    if query_text is not None:
        return QuerySpec(text=query_text, embedding=toy_text_embedding(query_text, trace.d_l))
    if not trace.queries:
        raise InputError("trace carries no queries; pass --query or --query-embedding")
    return trace.queries[0]


def _write_jsonl(path: Path, records) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def _trajectory_records(result: pipeline_mod.RunResult):
    for e in result.trajectory:
        yield {
            "frame": e.frame,
            "status": e.status,
            "box": e.box.as_list() if e.box is not None else None,
            "score": e.score,
            "gate_score": e.gate_score,
            "mode": e.mode,
        }


def load_trajectory(path: str | Path):
    """Read a trajectory JSONL back into TrajectoryEntry records."""
    from .core import BBox, TrajectoryEntry

    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        entries.append(
            TrajectoryEntry(
                frame=rec["frame"],
                box=BBox(*rec["box"]) if rec.get("box") else None,
                score=rec.get("score"),
                gate_score=rec.get("gate_score"),
                mode=rec.get("mode", "tracking"),
            )
        )
    return entries


@click.group()
def cli() -> None:
    """Anchor-referenced long-term referring engine."""


@cli.command("init-config")
@click.option("--out", type=click.Path(), default="anchorref.conf", show_default=True)
def cmd_init_config(out: str) -> None:
    """Write the default configuration document."""
    Path(out).write_text(default_config_text(), encoding="utf-8")
    click.echo(f"wrote {out}")


@cli.command("validate")
@click.option("--trace", "trace_path", type=click.Path(exists=True), required=True)
def cmd_validate(trace_path: str) -> None:
    """Validate a trace container against the fixed-view contract."""
    trace = load_trace(trace_path)
    report = validate_trace_op(trace.frames, trace.queries[0] if trace.queries else None)
    if report.ok:
        click.echo(f"OK: {len(trace.frames)} frames, 0 violations")
        return
    for v in report.violations:
        click.echo(f"violation: {v}")
    raise InputError(f"{len(report.violations)} violations")


@cli.command("simulate")
@click.option("--out", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--suite", type=click.Choice(sorted(sim._FAMILIES)), default=None)
@click.option("--count", type=int, default=1, show_default=True, help="Seeds per suite.")
@click.option("--scenario", type=click.Path(exists=True), default=None,
              help="Scenario JSON to regenerate instead of a built-in family.")
def cmd_simulate(out: str, seed: int, suite: str | None, count: int, scenario: str | None) -> None:
    """Generate synthetic traces plus ground truth."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if scenario:
        specs = [sim.ScenarioSpec.load(scenario)]
    elif suite:
        specs = sim.make_suite(suite, list(range(seed, seed + count)))
    else:
        specs = [sim.default_scenario(seed)]
    for spec in specs:
        stem = f"{spec.name}_{spec.seed:04d}"
        trace, gt = sim.generate(spec)
        trace.ground_truth = f"{stem}_gt.json"
        gt.save(out_dir / f"{stem}_gt.json")
        spec.save(out_dir / f"{stem}_scenario.json")
        save_trace(trace, out_dir / f"{stem}_trace.json")
        click.echo(f"wrote {stem}: {spec.num_frames} frames, {len(gt.reentry_events)} re-entries")


@cli.command("build-bank")
@click.option("--trace", "trace_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--set", "sets", multiple=True, help="Config override key=value (repeatable).")
def cmd_build_bank(trace_path: str, out: str, config_path: str | None, sets: tuple[str, ...]) -> None:
    """Distill the static-region bank from a trace's warmup frames."""
    cfg = _config(config_path, sets)
    trace = load_trace(trace_path)
    report = validate_trace_op(trace.frames)
    if not report.ok:
        raise InputError(f"trace failed validation: {report.violations[0]}")
    warmup = trace.frames[: cfg.anchor_t0]
    bank = build_bank(
        warmup, cfg.anchor_k, cfg.anchor_static_threshold, cfg.anchor_min_region_px
    )
    out_path = Path(out)
    if out_path.suffix != ".json":
        out_path.mkdir(parents=True, exist_ok=True)
        out_path = out_path / "bank.json"
    save_bank(bank, out_path)
    note = " (truncated)" if bank.truncated else ""
    click.echo(f"bank: {len(bank)} anchors{note}, pooled on frame {bank.t_star}; wrote {out_path}")


@cli.command("run")
@click.option("--trace", "trace_path", type=click.Path(exists=True), required=True)
@click.option("--bank", "bank_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--query", "query_text", type=str, default=None,
              help="Raw text routed through the toy hash embedder.")
@click.option("--query-embedding", type=click.Path(exists=True), default=None,
              help="JSON file with {text, embedding}; the canonical query input.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--set", "sets", multiple=True)
@click.option("--dump-prior", is_flag=True, help="Persist per-frame prior grids.")
@click.option("--dump-gate", is_flag=True, help="Persist per-frame gate decisions as JSONL.")
def cmd_run(
    trace_path: str,
    bank_path: str,
    out: str,
    query_text: str | None,
    query_embedding: str | None,
    config_path: str | None,
    sets: tuple[str, ...],
    dump_prior: bool,
    dump_gate: bool,
) -> None:
    """Run the per-frame loop over a trace and write the trajectory."""
    cfg = _config(config_path, sets)
    trace = load_trace(trace_path)
    bank = load_bank(bank_path)
    query = _resolve_query(trace, query_text, query_embedding)
    result = pipeline_mod.run(trace, query, bank, cfg, snapshot_prior=dump_prior)

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_jsonl(out_dir / "trajectory.jsonl", _trajectory_records(result))
    _write_jsonl(out_dir / "diagnostics.jsonl", (d.as_record() for d in result.diagnostics))
    if dump_prior:
        save_grid_sequence(result.prior_snapshots, out_dir / "prior.json")
    if dump_gate:
        _write_jsonl(
            out_dir / "gate.jsonl",
            (
                {
                    "frame": d.frame,
                    "gate_score": d.gate_score,
                    "sim": d.gate_sim,
                    "anchor_evidence": d.gate_anchor_evidence,
                    "displacement": d.gate_displacement,
                    "accepted": d.accepted,
                    "k_star": d.k_star,
                }
                for d in result.diagnostics
            ),
        )
    boxes = sum(1 for e in result.trajectory if e.box is not None)
    click.echo(f"ran {len(result.trajectory)} frames: {boxes} boxes; wrote {out_dir}")


def _report_lines(report: metrics_mod.EvalReport, fmt: str, label: str = "") -> list[str]:
    def fv(x, digits=4):
        return "n/a" if x is None else f"{x:.{digits}f}"

    headers = ["IDF1", "RCR", "RCL", "P@0.5", "P@0.6", "P@0.7", "P@0.8", "P@0.9", "mAP", "mIoU"]
    values = [
        fv(report.idf1),
        fv(report.rcr, 3),
        fv(report.rcl, 2),
        *[fv(report.precision_at[t], 3) for t in metrics_mod.PRECISION_TAUS],
        fv(report.map),
        fv(report.miou),
    ]
    if label:
        headers = ["config", *headers]
        values = [label, *values]
    if fmt == "csv":
        return [",".join(headers), ",".join(values)]
    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    return [
        "  ".join(h.rjust(w) for h, w in zip(headers, widths)),
        "  ".join(v.rjust(w) for v, w in zip(values, widths)),
    ]


@cli.command("evaluate")
@click.option("--trajectory", "trajectory_path", type=click.Path(exists=True), required=True)
@click.option("--gt", "gt_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "table"]), default="table",
              show_default=True)
@click.option("--tau-sweep", is_flag=True, help="Also report re-capture rate per IoU threshold.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--set", "sets", multiple=True)
def cmd_evaluate(
    trajectory_path: str,
    gt_path: str,
    out: str | None,
    fmt: str,
    tau_sweep: bool,
    config_path: str | None,
    sets: tuple[str, ...],
) -> None:
    """Score a trajectory against ground truth."""
    cfg = _config(config_path, sets)
    predictions = load_trajectory(trajectory_path)
    gt = metrics_mod.GroundTruth.load(gt_path)
    if len(predictions) != len(gt):
        raise InputError(
            f"trajectory has {len(predictions)} frames but ground truth has {len(gt)}"
        )
    report = metrics_mod.evaluate(predictions, gt, tau=cfg.metrics_tau, rcr_sweep=tau_sweep)
    if fmt == "json":
        text = json.dumps(report.to_json(), indent=1)
    else:
        text = "\n".join(_report_lines(report, fmt))
    click.echo(text)
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(
            json.dumps(report.to_json(), indent=1) + "\n", encoding="utf-8"
        )


ABLATION_CONFIGS = [
    ("baseline", {"pipeline.use_anchor_map": "false", "pipeline.use_reid_gate": "false",
                  "pipeline.use_reentry_prior": "false"}),
    ("+gating", {"pipeline.use_anchor_map": "true", "pipeline.use_reid_gate": "true",
                 "pipeline.use_reentry_prior": "false"}),
    ("+prior", {"pipeline.use_anchor_map": "true", "pipeline.use_reid_gate": "false",
                "pipeline.use_reentry_prior": "true"}),
    ("full", {"pipeline.use_anchor_map": "true", "pipeline.use_reid_gate": "true",
              "pipeline.use_reentry_prior": "true"}),
]


def run_ablation(suite: str, seeds: list[int], cfg: RunConfig):
    """Run every ablation configuration over a suite; returns
    {config: {seed: EvalReport}} keyed in table order."""
    from .config import apply_overrides

    results: dict[str, dict[int, metrics_mod.EvalReport]] = {
        name: {} for name, _ in ABLATION_CONFIGS
    }
    for spec in sim.make_suite(suite, seeds):
        trace, gt = sim.generate(spec)
        base = apply_overrides(cfg, sim.recommended_overrides(spec))
        warmup = trace.frames[: base.anchor_t0]
        bank = build_bank(
            warmup, base.anchor_k, base.anchor_static_threshold, base.anchor_min_region_px
        )
        query = trace.queries[0]
        heads = pipeline_mod.resolve_heads(base, query.embedding.shape[0], trace.d_v)
        amap = align_query(query, bank, heads)
        for name, toggles in ABLATION_CONFIGS:
            run_cfg = apply_overrides(base, toggles)
            result = pipeline_mod.run(trace, query, bank, run_cfg, heads=heads, amap=amap)
            results[name][spec.seed] = metrics_mod.evaluate(
                result.trajectory, gt, tau=run_cfg.metrics_tau
            )
    return results


def _mean(values):
    return float(np.mean([v for v in values if v is not None])) if values else 0.0


def ablation_table(results, fmt: str) -> str:
    lines = []
    first = True
    for name, _ in ABLATION_CONFIGS:
        reports = list(results[name].values())
        pooled = metrics_mod.EvalReport(
            miou=_mean([r.miou for r in reports]),
            map=_mean([r.map for r in reports]),
            precision_at={
                t: _mean([r.precision_at[t] for r in reports]) for t in metrics_mod.PRECISION_TAUS
            },
            idf1=_mean([r.idf1 for r in reports]),
            rcr=_mean([r.rcr for r in reports]),
            rcl=_mean([r.rcl for r in reports]),
            redetected_fraction=_mean([r.redetected_fraction for r in reports]),
            num_reentries=sum(r.num_reentries for r in reports),
            num_frames=sum(r.num_frames for r in reports),
        )
        rows = _report_lines(pooled, fmt, label=name)
        lines.extend(rows if first else rows[1:])
        first = False
    return "\n".join(lines)


@cli.command("ablate")
@click.option("--suite", type=click.Choice(sorted(sim._FAMILIES)), default="ablation",
              show_default=True)
@click.option("--count", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="First seed.")
@click.option("--out", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "table"]), default="table",
              show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--set", "sets", multiple=True)
def cmd_ablate(
    suite: str,
    count: int,
    seed: int,
    out: str | None,
    fmt: str,
    config_path: str | None,
    sets: tuple[str, ...],
) -> None:
    """Run the component ablation grid over a synthetic suite."""
    cfg = _config(config_path, sets)
    results = run_ablation(suite, list(range(seed, seed + count)), cfg)
    if fmt == "json":
        doc = {
            name: {str(s): r.to_json() for s, r in per_seed.items()}
            for name, per_seed in results.items()
        }
        text = json.dumps(doc, indent=1)
    else:
        text = ablation_table(results, fmt)
    click.echo(text)
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"ablation.{ 'csv' if fmt == 'csv' else 'txt'}").write_text(
            text + "\n", encoding="utf-8"
        )


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return EXIT_INPUT
    except (InputError, TraceFormatError) as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_INPUT
    except EmptySceneError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_DOMAIN
    except AnchorRefError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_INPUT
    except (ValueError, OSError, json.JSONDecodeError) as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_INPUT
    except Exception as e:  # pragma: no cover - unexpected
        click.echo(f"unexpected error: {e}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
