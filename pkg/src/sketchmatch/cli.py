"""Operator command line: ingest, simulate, train, query, eval, serve.

Machine-readable JSON goes to stdout, human progress to stderr.
Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import json
import logging
import socket
import sys
from pathlib import Path

import click
import numpy as np

from sketchmatch.encoder import (
    EncoderConfig,
    TrainConfig,
    load_weights,
    save_weights,
    train,
    weights_hash,
)
from sketchmatch.evaluation import pair_retrieval_metrics
from sketchmatch.geometry import GeometryError
from sketchmatch.matcher import MatchError, SearchConfig, search
from sketchmatch.service import ServiceConfig, create_app, parse_visual_query
from sketchmatch.simulator import SimulationError, load_dataset, make_dataset
from sketchmatch.store import (
    DEFAULT_OBJECT_TYPES,
    StoreError,
    build_store,
    load_store,
    parse_mot,
    save_store,
)

DATASET_FILENAME = "dataset.jsonl"


def _fail(message: str) -> "click.ClickException":
    return click.ClickException(message)


def _resolve_dataset_path(data: Path) -> Path:
    if data.is_dir():
        candidate = data / DATASET_FILENAME
        if not candidate.exists():
            raise _fail(f"no {DATASET_FILENAME} inside {data}")
        return candidate
    if not data.exists():
        raise _fail(f"dataset path {data} does not exist")
    return data


@click.group()
def main() -> None:
    """Sketch-driven trajectory moment retrieval."""
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


@main.command()
@click.argument("mot_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--fps", type=float, required=True, help="Frame rate of the source video.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option(
    "--type-map",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="JSON file mapping tracker class ids to type names.",
)
@click.option("--min-conf", type=float, default=0.0, show_default=True)
def ingest(mot_file: Path, fps: float, out: Path, type_map: Path | None, min_conf: float):
    """Ingest a MOT tracker file into a persisted trajectory store."""
    mapping = None
    if type_map is not None:
        mapping = {int(k): str(v) for k, v in json.loads(type_map.read_text()).items()}
    try:
        with mot_file.open("r", encoding="utf-8") as fh:
            trajectories = parse_mot(fh, fps=fps, type_map=mapping, min_conf=min_conf)
        store = build_store(trajectories, fps=fps, dataset_id=mot_file.stem)
        save_store(store, out)
    except (StoreError, GeometryError, OSError) as exc:
        raise _fail(str(exc)) from exc
    click.echo(
        f"ingested {store.object_count} objects over {store.frame_count} frames -> {out}",
        err=True,
    )


@main.command()
@click.option("--seed", type=int, required=True)
@click.option("--events", type=click.IntRange(min=2), required=True)
@click.option("--cams", type=click.IntRange(min=2), required=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option(
    "--actors",
    type=(int, int),
    default=(1, 3),
    show_default=True,
    help="Min/max actors per event.",
)
def simulate(seed: int, events: int, cams: int, out: Path, actors: tuple[int, int]):
    """Generate a labeled synthetic clip dataset."""
    from sketchmatch.simulator import SimConfig

    out.mkdir(parents=True, exist_ok=True)
    path = out / DATASET_FILENAME
    try:
        clips = make_dataset(
            seed, events, cams, path, sim_config=SimConfig(actor_count_range=actors)
        )
    except SimulationError as exc:
        raise _fail(str(exc)) from exc
    click.echo(f"wrote {len(clips)} clips -> {path}", err=True)


def _encoder_config_from_file(path: Path | None) -> tuple[EncoderConfig, TrainConfig]:
    encoder_kwargs: dict = {}
    train_kwargs: dict = {}
    if path is not None:
        raw = json.loads(path.read_text())
        encoder_kwargs = raw.get("encoder", {})
        train_kwargs = raw.get("train", {})
    try:
        return EncoderConfig(**encoder_kwargs), TrainConfig(**train_kwargs)
    except (TypeError, ValueError) as exc:
        raise _fail(f"bad config file: {exc}") from exc


@main.command(name="train")
@click.option("--data", type=click.Path(path_type=Path), required=True)
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help='JSON with "encoder" and "train" sections (dataclass field names).',
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
def train_command(data: Path, config_path: Path | None, seed: int, out: Path):
    """Train encoder weights on a simulated dataset."""
    from sketchmatch.encoder.training import TrainingError

    dataset = _resolve_dataset_path(data)
    encoder_config, train_config = _encoder_config_from_file(config_path)
    try:
        weights, history = train(dataset, encoder_config, train_config, seed=seed)
    except TrainingError as exc:
        raise _fail(str(exc)) from exc
    save_weights(weights, out)
    chunk = max(1, len(history) // 10)
    for i in range(0, len(history), chunk):
        window = history[i : i + chunk]
        click.echo(f"steps {i:5d}..{i + len(window) - 1:5d}  loss {np.mean(window):.4f}", err=True)
    click.echo(f"weights {weights_hash(weights)[:16]} -> {out}", err=True)


@main.command()
@click.option("--store", "store_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--weights", "weights_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--query", "query_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--k", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--stride", type=int, default=None, help="Override stride in frames.")
@click.option("--nms-iou", type=float, default=None)
def query(store_path: Path, weights_path: Path, query_path: Path, k: int,
          stride: int | None, nms_iou: float | None):
    """Run a sketched query against a store; one JSON result per line."""
    try:
        store = load_store(store_path)
        weights = load_weights(weights_path)
        raw = json.loads(query_path.read_text())
        visual_query = parse_visual_query(raw, DEFAULT_OBJECT_TYPES)
        defaults = SearchConfig()
        cfg = SearchConfig(
            stride_frames=stride if stride is not None else defaults.stride_frames,
            length_factors=defaults.length_factors,
            k=k,
            nms_iou=nms_iou if nms_iou is not None else defaults.nms_iou,
            max_assignments_per_window=defaults.max_assignments_per_window,
            ticks_per_second=defaults.ticks_per_second,
        )
        results = search(store, visual_query, weights, cfg)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        raise _fail(str(exc)) from exc
    for r in results:
        click.echo(
            json.dumps(
                {
                    "startFrame": r.start_frame,
                    "endFrame": r.end_frame,
                    "objectIds": list(r.object_ids),
                    "score": r.score,
                },
                sort_keys=True,
            )
        )
    click.echo(f"{len(results)} results", err=True)


@main.command(name="eval")
@click.option("--data", type=click.Path(path_type=Path), required=True)
@click.option("--weights", "weights_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--distractors", type=click.IntRange(min=1), default=99, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def eval_command(data: Path, weights_path: Path, distractors: int, seed: int):
    """Paired-view retrieval metrics (recall@1, recall@5, AUC) on a dataset."""
    dataset = _resolve_dataset_path(data)
    try:
        _, clips = load_dataset(dataset)
        weights = load_weights(weights_path)
        metrics = pair_retrieval_metrics(weights, clips, n_distractors=distractors, seed=seed)
    except (SimulationError, ValueError) as exc:
        raise _fail(str(exc)) from exc
    click.echo(json.dumps(metrics.to_json(), sort_keys=True))
    click.echo(
        f"recall@1 {metrics.recall_at_1:.3f}  recall@5 {metrics.recall_at_5:.3f}  "
        f"auc {metrics.auc:.3f}  ({metrics.n_queries} queries)",
        err=True,
    )


@main.command()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
)
@click.option("--port", type=int, default=None, help="Override the configured port.")
def serve(config_path: Path | None, port: int | None):
    """Run the HTTP service."""
    import uvicorn

    config = ServiceConfig.from_file(config_path) if config_path else ServiceConfig()
    chosen_port = port if port is not None else config.port
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind(("0.0.0.0", chosen_port))
    except OSError as exc:
        raise _fail(f"cannot bind port {chosen_port}: {exc}") from exc
    finally:
        probe.close()
    app = create_app(config)
    uvicorn.run(app, host="0.0.0.0", port=chosen_port, log_level="info")


if __name__ == "__main__":
    main()
