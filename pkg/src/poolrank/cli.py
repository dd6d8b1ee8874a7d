"""Command-line entry point: corpus, rank, train, eval, serve subcommands."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import core, corpus as corpus_mod
from .core import (
    DEFAULT_POLICY,
    labeled_from_dict,
    labeled_to_dict,
    read_annotations,
    read_pools,
    write_pools,
)
from .evaluation import ConversationRecord, ab_analyze, compare, recall_at_1
from .heuristic import HeuristicRanker
from .probes import ProbeRanker, load_probe_sets
from .ranking import Ranker


def _load_pools(path: str):
    with open(path, encoding="utf-8") as fh:
        return list(read_pools(fh))


def _load_annotations(path: str):
    with open(path, encoding="utf-8") as fh:
        return list(read_annotations(fh))


def _load_test_set(pools_path: str, annotations_path: str):
    pools = {p.pool_id: p for p in _load_pools(pools_path)}
    return [
        (pools[a.pool_id], a)
        for a in _load_annotations(annotations_path)
        if a.pool_id in pools
    ]


class _UniformLM:
    """Stub backend: every continuation is equally likely. Smoke tests only."""

    identity = "uniform-stub"

    def conditional_log_likelihood(self, context_text: str, continuation_text: str) -> float:
        return -1.0


class _HttpLM:
    """Adapter for a local inference server: POST {context, continuation} -> {log_likelihood}."""

    def __init__(self, url: str):
        import httpx

        self.identity = f"http:{url}"
        self._client = httpx.Client(base_url=url)

    def conditional_log_likelihood(self, context_text: str, continuation_text: str) -> float:
        resp = self._client.post(
            "/", json={"context": context_text, "continuation": continuation_text}
        )
        resp.raise_for_status()
        return float(resp.json()["log_likelihood"])


def _make_backend(backend: str):
    if backend == "uniform":
        return _UniformLM()
    if backend.startswith("http://") or backend.startswith("https://"):
        return _HttpLM(backend)
    raise click.BadParameter(f"unknown backend {backend!r} (use 'uniform' or an http URL)")


def _make_ranker(ranker: str, metric: str | None, backend: str, checkpoint: str | None) -> Ranker:
    if ranker == "heuristic":
        return HeuristicRanker()
    if ranker == "probe":
        probe_sets = load_probe_sets()
        if metric not in probe_sets:
            raise click.BadParameter(
                f"--metric must be one of {sorted(probe_sets)}"
            )
        return ProbeRanker(probe_sets[metric], _make_backend(backend))
    if ranker == "learned":
        if not checkpoint:
            raise click.BadParameter("--checkpoint required for the learned ranker")
        from .learned import LearnedRanker, ModelHandle

        return LearnedRanker(ModelHandle.load(checkpoint))
    raise click.BadParameter(f"unknown ranker {ranker!r}")


@click.group()
def main() -> None:
    """Response-pool corpora, rankers, and evaluation."""


# ---------------------------------------------------------------- corpus ---

@main.group("corpus")
def corpus_group() -> None:
    """Build and describe annotation corpora."""


@corpus_group.command("sample")
@click.option("--logs", required=True, type=click.Path(exists=True))
@click.option("--topics", required=True, help="comma-separated topic ids")
@click.option("--per-topic", default=100, show_default=True)
@click.option("--per-rating-quota", default=20, show_default=True)
@click.option("--question-bias", default=0.40, show_default=True)
@click.option("--extra-question-instances", default=494, show_default=True)
@click.option("--min-pool-size", default=2, show_default=True)
@click.option("--seed", required=True, type=int)
@click.option("--out", required=True, type=click.Path())
def corpus_sample(logs, topics, per_topic, per_rating_quota, question_bias,
                  extra_question_instances, min_pool_size, seed, out) -> None:
    plan = corpus_mod.SamplingPlan(
        topics=tuple(t.strip() for t in topics.split(",") if t.strip()),
        per_topic=per_topic,
        per_rating_quota=per_rating_quota,
        question_bias=question_bias,
        extra_question_instances=extra_question_instances,
        min_pool_size=min_pool_size,
    )
    sampled, warnings = corpus_mod.sample_corpus(_load_pools(logs), plan, seed)
    with open(out, "w", encoding="utf-8") as fh:
        write_pools(sampled, fh)
    for w in warnings:
        click.echo(f"warning [{w.topic}]: {w.message}", err=True)
    click.echo(f"sampled {len(sampled)} pools -> {out}")


@corpus_group.command("normalize")
@click.option("--pools", required=True, type=click.Path(exists=True))
@click.option("--annotations", required=True, type=click.Path(exists=True))
@click.option("--seed", required=True, type=int)
@click.option("--out", required=True, type=click.Path())
@click.option("--report", type=click.Path(), default=None)
@click.option("--include-all-negative/--exclude-all-negative", default=False,
              show_default=True, help="keep pools where nothing was selected")
def corpus_normalize(pools, annotations, seed, out, report, include_all_negative) -> None:
    pool_list = _load_pools(pools)
    by_id = {p.pool_id: p for p in pool_list}
    examples = []
    for ann in _load_annotations(annotations):
        pool = by_id.get(ann.pool_id)
        if pool is None:
            continue
        if not include_all_negative and not core.preferred_set(pool, ann):
            continue
        examples.extend(core.derive_labels(pool, ann))
    kept, rep = corpus_mod.normalize(examples, seed)
    with open(out, "w", encoding="utf-8") as fh:
        for ex in kept:
            fh.write(json.dumps(labeled_to_dict(ex), ensure_ascii=False) + "\n")
    if report:
        Path(report).write_text(json.dumps(rep.to_dict(), indent=2), "utf-8")
    click.echo(f"{rep.n_examples_before} examples -> {rep.n_examples_after} after normalization")


@corpus_group.command("stats")
@click.option("--pools", required=True, type=click.Path(exists=True))
@click.option("--annotations", required=True, type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
def corpus_stats_cmd(pools, annotations, as_json) -> None:
    stats = corpus_mod.corpus_stats(_load_pools(pools), _load_annotations(annotations))
    if as_json:
        click.echo(json.dumps(stats.to_dict(), indent=2))
        return
    click.echo(f"{'pools':<28}{stats.n_pools}")
    click.echo(f"{'annotated responses':<28}{stats.n_annotated_responses}")
    click.echo(f"{'mean pool size':<28}{stats.mean_pool_size:.2f}")
    click.echo(f"{'median pool size':<28}{stats.median_pool_size:.1f}")
    click.echo(f"{'all-negative pools':<28}{stats.n_all_negative_pools}")
    click.echo(f"{'positive pools':<28}{stats.n_positive_pools}")


@corpus_group.command("split")
@click.option("--pools", required=True, type=click.Path(exists=True))
@click.option("--annotations", required=True, type=click.Path(exists=True))
@click.option("--test-size", required=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--train-out", required=True, type=click.Path())
@click.option("--test-out", required=True, type=click.Path())
def corpus_split(pools, annotations, test_size, seed, train_out, test_out) -> None:
    train, test = corpus_mod.split(
        _load_pools(pools), _load_annotations(annotations), test_size, seed
    )
    with open(train_out, "w", encoding="utf-8") as fh:
        write_pools(train, fh)
    with open(test_out, "w", encoding="utf-8") as fh:
        write_pools(test, fh)
    click.echo(f"train={len(train)} test={len(test)}")


# ------------------------------------------------------------------ rank ---

@main.command("rank")
@click.option("--ranker", required=True, type=click.Choice(["heuristic", "probe", "learned"]))
@click.option("--pools", required=True, type=click.Path(exists=True))
@click.option("--metric", default=None, help="probe metric name")
@click.option("--backend", default="uniform", show_default=True)
@click.option("--checkpoint", default=None, type=click.Path())
def rank_cmd(ranker, pools, metric, backend, checkpoint) -> None:
    """Rank every pool in a file, one JSON line per pool."""
    r = _make_ranker(ranker, metric, backend, checkpoint)
    for pool in _load_pools(pools):
        ranked = r.rank(pool)
        out = {"pool_id": ranked.pool_id, "ranking": list(ranked.ordered_ids)}
        if ranked.scores is not None:
            out["scores"] = list(ranked.scores)
        click.echo(json.dumps(out))


# ----------------------------------------------------------------- train ---

@main.group("train")
def train_group() -> None:
    """Train the learned ranker."""


@train_group.command("pretrain")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True),
              help="JSONL of {context: [...], state: {...}, candidate: {...}}")
@click.option("--out", required=True, type=click.Path())
@click.option("--epochs", default=10, show_default=True)
@click.option("--batch-size", default=32, show_default=True)
@click.option("--learning-rate", default=1e-3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--max-len", default=256, show_default=True)
def train_pretrain(corpus_path, out, epochs, batch_size, learning_rate, seed, max_len) -> None:
    from .learned import StateTokenScheme, TrainConfig, pretrain

    pairs = []
    with open(corpus_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            ex = labeled_from_dict({**d, "label": "POSITIVE", "v": 1})
            pairs.append((ex.context, ex.state, ex.candidate))
    texts = [t.text for ctx, _, _ in pairs for t in ctx] + [c.text for _, _, c in pairs]
    topics = {s.current_topic for _, s, _ in pairs}
    rg_names = {c.rg.name for _, _, c in pairs}
    scheme = StateTokenScheme.build(topics, rg_names, texts, max_len=max_len)
    cfg = TrainConfig(
        pretrain_corpus=corpus_path, epochs=epochs, batch_size=batch_size,
        learning_rate=learning_rate, seed=seed,
    )
    handle = pretrain(pairs, scheme, cfg)
    handle.save(out)
    click.echo(f"saved checkpoint {handle.checkpoint_id} "
               f"(val acc {handle.validation_accuracy}) -> {out}")


@train_group.command("finetune")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--examples", required=True, type=click.Path(exists=True),
              help="JSONL of labeled examples (corpus normalize output)")
@click.option("--out", required=True, type=click.Path())
@click.option("--epochs", default=10, show_default=True)
@click.option("--batch-size", default=32, show_default=True)
@click.option("--learning-rate", default=1e-3, show_default=True)
@click.option("--seed", default=0, show_default=True)
def train_finetune(checkpoint, examples, out, epochs, batch_size, learning_rate, seed) -> None:
    from .learned import ModelHandle, TrainConfig, fine_tune

    handle = ModelHandle.load(checkpoint)
    with open(examples, encoding="utf-8") as fh:
        exs = [labeled_from_dict(json.loads(line)) for line in fh if line.strip()]
    cfg = TrainConfig(
        fine_tune_corpus=examples, epochs=epochs, batch_size=batch_size,
        learning_rate=learning_rate, seed=seed,
        d_model=handle.cfg.d_model, n_heads=handle.cfg.n_heads, n_layers=handle.cfg.n_layers,
    )
    tuned = fine_tune(handle, exs, cfg)
    tuned.save(out)
    click.echo(f"saved checkpoint {tuned.checkpoint_id} "
               f"(val acc {tuned.validation_accuracy}) -> {out}")


# ------------------------------------------------------------------ eval ---

@main.group("eval")
def eval_group() -> None:
    """Evaluate rankers and A/B logs."""


@eval_group.command("recall1")
@click.option("--ranker", required=True, type=click.Choice(["heuristic", "probe", "learned"]))
@click.option("--test", "test_pools", required=True, type=click.Path(exists=True))
@click.option("--annotations", required=True, type=click.Path(exists=True))
@click.option("--metric", default=None)
@click.option("--backend", default="uniform", show_default=True)
@click.option("--checkpoint", default=None, type=click.Path())
@click.option("--json", "as_json", is_flag=True)
def eval_recall1(ranker, test_pools, annotations, metric, backend, checkpoint, as_json) -> None:
    r = _make_ranker(ranker, metric, backend, checkpoint)
    report = recall_at_1(r, _load_test_set(test_pools, annotations), DEFAULT_POLICY)
    if as_json:
        click.echo(json.dumps(report.to_dict(), indent=2))
    else:
        click.echo(f"{report.ranker_name}: Recall@1 = {report.recall_at_1:.2%} "
                   f"({report.hits}/{report.n})")


@eval_group.command("compare")
@click.option("--rankers", "ranker_names", required=True,
              help="comma-separated subset of heuristic,probe,learned")
@click.option("--test", "test_pools", required=True, type=click.Path(exists=True))
@click.option("--annotations", required=True, type=click.Path(exists=True))
@click.option("--metric", default=None)
@click.option("--backend", default="uniform", show_default=True)
@click.option("--checkpoint", default=None, type=click.Path())
def eval_compare(ranker_names, test_pools, annotations, metric, backend, checkpoint) -> None:
    rankers = [
        _make_ranker(name.strip(), metric, backend, checkpoint)
        for name in ranker_names.split(",")
        if name.strip()
    ]
    result = compare(rankers, _load_test_set(test_pools, annotations), DEFAULT_POLICY)
    click.echo(json.dumps(result.to_dict(), indent=2))


@eval_group.command("ab")
@click.option("--logs", required=True, type=click.Path(exists=True),
              help="JSONL of {arm, n_turns, n_system_turns, rating?}")
@click.option("--min-system-turns", default=4, show_default=True)
def eval_ab(logs, min_system_turns) -> None:
    with open(logs, encoding="utf-8") as fh:
        records = [ConversationRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
    report = ab_analyze(records, min_system_turns=min_system_turns)
    click.echo(json.dumps(report.to_dict(), indent=2))


# ----------------------------------------------------------------- serve ---

@main.command("serve")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--port", default=None, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve_cmd(config_path, port, host) -> None:
    """Run the selection/annotation HTTP service."""
    import uvicorn

    from .service import create_app, load_config

    cfg = load_config(config_path)
    if port is not None:
        cfg.port = port
    uvicorn.run(create_app(cfg), host=host, port=cfg.port)


if __name__ == "__main__":
    sys.exit(main())
