"""Batch command-line surface.

Subcommands: score, correlate, pairs, system, groups, convert, cost, cache.
Configuration comes from an optional JSON config file; flags override it.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import click

from . import baselines, datasets, reports, scoring, stats
from .core import EvaluationSample
from .providers import (
    CachingProvider,
    CostSummary,
    HttpProvider,
    MockOverlapProvider,
    MSCOCO_REFERENCE_MEAN_TOKENS,
    Provider,
    ProviderConfig,
    ResponseCache,
    cost_report,
)

CACHE_DIR_ENV = "CLAIR_CACHE_DIR"
CACHE_FILE_NAME = "responses.jsonl"

BASELINE_METRICS = ("bleu1", "bleu4", "rouge_l", "cider")


def _fail(message: str) -> None:
    raise click.ClickException(message)


def _load_config(config_path: Optional[str]) -> dict:
    if not config_path:
        return {}
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        _fail(f"cannot read config {config_path}: {exc}")


def _provider_configs(config: dict) -> list[ProviderConfig]:
    out = []
    for entry in config.get("providers", []):
        out.append(
            ProviderConfig(
                provider_id=entry["provider_id"],
                model_name=entry["model_name"],
                endpoint=entry.get("endpoint", ""),
                style=entry.get("style", "chat"),
                price_per_1k_input_tokens=entry.get("price_per_1k_input_tokens", 0.0),
                price_per_1k_output_tokens=entry.get("price_per_1k_output_tokens", 0.0),
                max_concurrent_requests=entry.get("max_concurrent_requests", 4),
                timeout=entry.get("timeout", 60.0),
                max_tokens_field=entry.get("max_tokens_field", "max_tokens"),
            )
        )
    return out


def _retry_policy(config: dict, max_retries: Optional[int]) -> scoring.RetryPolicy:
    retry = config.get("retry", {})
    return scoring.RetryPolicy(
        primary_temperature=retry.get("primary_temperature", 0.0),
        retry_temperature=retry.get("retry_temperature", 1.0),
        max_retries=max_retries or retry.get("max_retries", 3),
        drop_exhausted=retry.get("drop_exhausted", False),
    )


def _open_cache(cache_dir: Optional[str], config: dict) -> Optional[ResponseCache]:
    cache_dir = cache_dir or config.get("cache_dir") or os.environ.get(CACHE_DIR_ENV)
    if not cache_dir:
        return None
    return ResponseCache(Path(cache_dir) / CACHE_FILE_NAME)


def _build_providers(
    config: dict,
    mock: bool,
    provider_filter: Optional[str],
    cache: Optional[ResponseCache],
) -> list[Provider]:
    providers: list[Provider]
    if mock:
        providers = [MockOverlapProvider()]
    else:
        configs = _provider_configs(config)
        if provider_filter:
            wanted = {p.strip() for p in provider_filter.split(",") if p.strip()}
            configs = [c for c in configs if c.provider_id in wanted]
            missing = wanted - {c.provider_id for c in configs}
            if missing:
                _fail(f"unknown providers: {', '.join(sorted(missing))}")
        if not configs:
            _fail("no providers configured; pass --mock or a --config with providers")
        providers = [HttpProvider(c) for c in configs]
    if cache is not None:
        providers = [CachingProvider(p, cache) for p in providers]
    return providers


def _baseline_columns(samples: Sequence[EvaluationSample]) -> dict[str, dict[str, float]]:
    """Per-sample baseline scores keyed by sample id (first candidate only)."""
    tokenized = [
        (
            baselines.tokenize(s.candidates[0].text),
            [baselines.tokenize(r.text) for r in s.references],
        )
        for s in samples
    ]
    columns: dict[str, dict[str, float]] = {m: {} for m in BASELINE_METRICS}
    cider_scores: Optional[list[float]] = None
    if len(tokenized) >= 2:
        cider_scores = baselines.cider(tokenized)
    for i, sample in enumerate(samples):
        cand, refs = tokenized[i]
        columns["bleu1"][sample.id] = baselines.bleu(cand, refs, max_n=1)
        columns["bleu4"][sample.id] = baselines.bleu(cand, refs, max_n=4)
        columns["rouge_l"][sample.id] = baselines.rouge_l(cand, refs)
        if cider_scores is not None:
            columns["cider"][sample.id] = cider_scores[i]
    return columns


def _write_rows(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def _read_rows(path: str | Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def _print_cost(result: scoring.DatasetScores, providers: Sequence[Provider]) -> None:
    configs = {p.config.provider_id: p.config for p in providers}
    for provider_id, config in sorted(configs.items()):
        judgments = [
            per_provider[provider_id]
            for per_provider in result.judgments.values()
            if provider_id in per_provider
        ]
        if not judgments:
            continue
        total_in = sum(j.input_tokens for j in judgments)
        total_out = sum(j.output_tokens for j in judgments)
        cost = (
            total_in * config.price_per_1k_input_tokens
            + total_out * config.price_per_1k_output_tokens
        ) / 1000.0
        mean = (total_in + total_out) / len(judgments)
        click.echo(
            f"[cost] {provider_id}: {len(judgments)} samples, "
            f"{total_in + total_out} tokens ({mean:.3f}/sample), cost {cost:.6f}"
        )
    click.echo(
        f"[cost] reference point: {MSCOCO_REFERENCE_MEAN_TOKENS} mean tokens/sample "
        "reported for MS-COCO runs of this measure"
    )


@click.group()
def main():
    """Caption-judging toolkit: LLM-based scoring, baselines, and evaluation protocols."""


@main.command("score")
@click.argument("dataset_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True), help="JSON run config.")
@click.option("--mock", is_flag=True, help="Use the deterministic offline mock provider.")
@click.option("--providers", "provider_filter", help="Comma-separated provider ids to use.")
@click.option("--baselines", "with_baselines", is_flag=True, help="Add n-gram baseline columns.")
@click.option("--max-retries", type=int, default=None, help="Parse-failure retry budget.")
@click.option("--parallelism", type=int, default=None, help="Worker threads (default: config or 1).")
@click.option("--cache-dir", type=click.Path(file_okay=False), default=None,
              help=f"Response cache directory (or ${CACHE_DIR_ENV}).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True,
              help="Output score-table JSONL path.")
def cmd_score(dataset_path, config_path, mock, provider_filter, with_baselines,
              max_retries, parallelism, cache_dir, out_path):
    """Score every sample in a canonical samples JSONL file."""
    config = _load_config(config_path)
    samples = datasets.load_samples(dataset_path)
    cache = _open_cache(cache_dir, config)
    providers = _build_providers(config, mock, provider_filter, cache)
    policy = _retry_policy(config, max_retries)
    result = scoring.score_dataset(
        samples, providers, policy, parallelism=parallelism or config.get("parallelism", 1)
    )
    rows = result.rows()
    if with_baselines:
        columns = _baseline_columns(samples)
        for row in rows:
            row["baselines"] = {
                metric: columns[metric][row["id"]]
                for metric in BASELINE_METRICS
                if row["id"] in columns[metric]
            }
    _write_rows(Path(out_path), rows)
    _print_cost(result, providers)
    if result.failures:
        bad = sorted({pid for errs in result.failures.values() for pid in errs})
        click.echo(f"[warn] provider failures: {', '.join(bad)}", err=True)
        sys.exit(1)


def _metric_columns_from_rows(rows: list[dict]) -> dict[str, dict[str, float]]:
    """Extract every numeric metric column (ensemble, per-provider, baselines)."""
    columns: dict[str, dict[str, float]] = {}
    for row in rows:
        sample_id = row["id"]
        if "clair" in row:
            columns.setdefault("clair", {})[sample_id] = row["clair"]
        for provider_id, j in row.get("providers", {}).items():
            columns.setdefault(f"clair:{provider_id}", {})[sample_id] = j["score"]
        for metric, value in row.get("baselines", {}).items():
            columns.setdefault(metric, {})[sample_id] = value
    return columns


def _check_ids(metric_ids: set, dataset_ids: set) -> None:
    missing = sorted(dataset_ids - metric_ids)
    extra = sorted(metric_ids - dataset_ids)
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing from score table: {', '.join(missing[:10])}")
        if extra:
            parts.append(f"not in dataset: {', '.join(extra[:10])}")
        _fail("id mismatch between score table and dataset: " + "; ".join(parts))


def _emit_report(report: reports.CorrelationReport, out_path: Optional[str],
                 annotate: bool) -> None:
    if annotate:
        report.annotations = list(reports.LITERATURE_ANNOTATIONS)
    click.echo(report.to_markdown())
    if out_path:
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.to_json(), encoding="utf-8")
        out.with_suffix(".md").write_text(report.to_markdown(), encoding="utf-8")


@main.command("correlate")
@click.argument("score_table", type=click.Path(exists=True, dir_okay=False))
@click.argument("dataset_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--tau-variant", type=click.Choice(["b", "c"]), default="b", show_default=True)
@click.option("--full", is_flag=True, help="Also report Spearman and Pearson.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Report JSON path (a .md sibling is written too).")
@click.option("--annotate-paper", "annotate", is_flag=True,
              help="Echo literature values as labeled annotations.")
def cmd_correlate(score_table, dataset_path, tau_variant, full, out_path, annotate):
    """Sample-level correlation between metric scores and human ratings."""
    rows = _read_rows(score_table)
    samples = datasets.load_samples(dataset_path)
    rated = [s for s in samples if s.human_score is not None]
    if not rated:
        _fail("dataset has no human scores")
    columns = _metric_columns_from_rows(rows)
    if not columns:
        _fail("score table has no metric columns")
    _check_ids({r["id"] for r in rows}, {s.id for s in samples})
    human = {s.id: float(s.human_score) for s in rated}
    stat_names = ["tau"] + (["spearman", "pearson"] if full else [])
    report = reports.CorrelationReport(
        title="Sample-level correlation with human judgments",
        columns=stat_names,
    )
    for metric in sorted(columns):
        ids = [s.id for s in rated if s.id in columns[metric]]
        x = [columns[metric][i] for i in ids]
        y = [human[i] for i in ids]
        for name in stat_names:
            try:
                if name == "tau":
                    cell = stats.kendall_tau(x, y, variant=tau_variant)
                elif name == "spearman":
                    cell = stats.spearman(x, y)
                else:
                    cell = stats.pearson(x, y)
            except stats.DegenerateInputError:
                cell = "degenerate"
            report.set(metric, name, cell)
    _emit_report(report, out_path, annotate)


def _pair_member_samples(pairs) -> tuple[list[EvaluationSample], list[EvaluationSample]]:
    side_a = [
        EvaluationSample(id=f"{p.id}::a", candidates=(p.caption_a,), references=p.references)
        for p in pairs
    ]
    side_b = [
        EvaluationSample(id=f"{p.id}::b", candidates=(p.caption_b,), references=p.references)
        for p in pairs
    ]
    return side_a, side_b


@main.command("pairs")
@click.argument("pairs_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--mock", is_flag=True)
@click.option("--providers", "provider_filter", default=None)
@click.option("--baselines", "with_baselines", is_flag=True)
@click.option("--max-retries", type=int, default=None)
@click.option("--parallelism", type=int, default=1, show_default=True)
@click.option("--cache-dir", type=click.Path(file_okay=False), default=None)
@click.option("--ref-cap", type=int, default=datasets.DEFAULT_REFERENCE_CAP,
              show_default=True, help="Max references per pair.")
@click.option("--seed", type=int, default=None,
              help="Pick capped references at random with this seed (default: first k).")
@click.option("--tie-policy", type=click.Choice(["half", "wrong"]), default="half",
              show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.option("--annotate-paper", "annotate", is_flag=True)
def cmd_pairs(pairs_path, config_path, mock, provider_filter, with_baselines,
              max_retries, parallelism, cache_dir, ref_cap, seed, tie_policy,
              out_path, annotate):
    """Decision accuracy on a two-candidate pairs file (per category and overall).

    Each pair member is scored independently; the higher-scored caption is the
    predicted human choice.
    """
    pairs = datasets.cap_references(datasets.load_pairs(pairs_path), k=ref_cap, seed=seed)
    config = _load_config(config_path)
    cache = _open_cache(cache_dir, config)
    providers = _build_providers(config, mock, provider_filter, cache)
    policy = _retry_policy(config, max_retries)
    side_a, side_b = _pair_member_samples(pairs)
    result = scoring.score_dataset(
        side_a + side_b, providers, policy, parallelism=parallelism
    )
    if result.failures:
        _fail(f"provider failures on {len(result.failures)} pair members")
    categories = sorted({p.category for p in pairs})
    report = reports.CorrelationReport(
        title="Pairwise decision accuracy",
        columns=categories + ["All"],
    )

    def add_row(name: str, score_a: list[float], score_b: list[float]) -> None:
        acc = stats.pairwise_accuracy(pairs, score_a, score_b, tie_policy=tie_policy)
        for cat in categories:
            report.set(name, cat, acc.per_category.get(cat))
        report.set(name, "All", acc.overall)

    add_row(
        "clair",
        [result.ensembles[f"{p.id}::a"].value for p in pairs],
        [result.ensembles[f"{p.id}::b"].value for p in pairs],
    )
    if with_baselines:
        columns_a = _baseline_columns(side_a)
        columns_b = _baseline_columns(side_b)
        for metric in BASELINE_METRICS:
            if not columns_a[metric]:
                report.set(metric, "All", "unavailable")
                continue
            add_row(
                metric,
                [columns_a[metric][f"{p.id}::a"] for p in pairs],
                [columns_b[metric][f"{p.id}::b"] for p in pairs],
            )
    _emit_report(report, out_path, annotate)


@main.command("system")
@click.argument("score_table", type=click.Path(exists=True, dir_okay=False))
@click.argument("dataset_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--tau-variant", type=click.Choice(["b", "c"]), default="b", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.option("--annotate-paper", "annotate", is_flag=True)
def cmd_system(score_table, dataset_path, tau_variant, out_path, annotate):
    """System-level correlation over per-system mean scores."""
    rows = _read_rows(score_table)
    samples = datasets.load_samples(dataset_path)
    tagged = [s for s in samples if s.system and s.human_score is not None]
    if len({s.system for s in tagged}) < 2:
        _fail("need samples tagged with at least 2 systems and human scores")
    _check_ids({r["id"] for r in rows}, {s.id for s in samples})
    columns = _metric_columns_from_rows(rows)
    report = reports.CorrelationReport(
        title="System-level correlation with human judgments",
        columns=["tau", "spearman", "pearson"],
    )
    for metric in sorted(columns):
        usable = [s for s in tagged if s.id in columns[metric]]
        try:
            results = stats.system_level(
                [s.system for s in usable],
                [columns[metric][s.id] for s in usable],
                [float(s.human_score) for s in usable],
                tau_variant=tau_variant,
            )
            for name in ("tau", "spearman", "pearson"):
                report.set(metric, name, results[name])
        except (stats.DegenerateInputError, ValueError) as exc:
            for name in ("tau", "spearman", "pearson"):
                report.set(metric, name, f"degenerate: {exc}")
    _emit_report(report, out_path, annotate)


@main.command("groups")
@click.argument("groups_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--mock", is_flag=True)
@click.option("--providers", "provider_filter", default=None)
@click.option("--max-retries", type=int, default=None)
@click.option("--parallelism", type=int, default=1, show_default=True)
@click.option("--cache-dir", type=click.Path(file_okay=False), default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.option("--annotate-paper", "annotate", is_flag=True)
def cmd_groups(groups_path, config_path, mock, provider_filter, max_retries,
               parallelism, cache_dir, out_path, annotate):
    """Correlate set-vs-set scores with coverage and correctness ratings."""
    groups = datasets.load_groups(groups_path)
    config = _load_config(config_path)
    cache = _open_cache(cache_dir, config)
    providers = _build_providers(config, mock, provider_filter, cache)
    policy = _retry_policy(config, max_retries)
    samples = [
        EvaluationSample(id=g.id, candidates=g.candidates, references=g.references)
        for g in groups
    ]
    result = scoring.score_dataset(samples, providers, policy, parallelism=parallelism)
    if result.failures:
        _fail(f"provider failures on {len(result.failures)} groups")
    scores = [result.ensembles[g.id].value for g in groups]
    report = reports.CorrelationReport(
        title="Caption-group correlation with human judgments",
        columns=["coverage", "correctness"],
    )
    try:
        coverage, correctness = stats.group_correlation(groups, scores)
        report.set("clair", "coverage", coverage)
        report.set("clair", "correctness", correctness)
    except stats.DegenerateInputError as exc:
        report.set("clair", "coverage", f"degenerate: {exc}")
        report.set("clair", "correctness", f"degenerate: {exc}")
    _emit_report(report, out_path, annotate)


@main.command("convert")
@click.argument("raw_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("dataset_name", type=click.Choice(sorted(datasets.CONVERTERS)))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def cmd_convert(raw_path, dataset_name, out_path):
    """Convert a locally provided raw dump to the canonical JSONL schema."""
    with open(raw_path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        records = datasets.CONVERTERS[dataset_name](raw)
    except (KeyError, TypeError, ValueError) as exc:
        _fail(f"raw file does not match the documented {dataset_name} layout: {exc}")
    datasets.write_jsonl(out_path, records)
    click.echo(f"wrote {len(records)} records to {out_path}")


@main.command("cost")
@click.argument("score_table", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="Config supplying per-provider prices (default: zero prices).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def cmd_cost(score_table, config_path, out_path):
    """Token and cost summary for an existing score table."""
    rows = _read_rows(score_table)
    config = _load_config(config_path)
    prices = {c.provider_id: c for c in _provider_configs(config)}
    summary: dict[str, dict] = {}
    for provider_id in sorted(
        {pid for row in rows for pid in row.get("providers", {})}
    ):
        total_in = sum(
            row["providers"][provider_id]["input_tokens"]
            for row in rows if provider_id in row.get("providers", {})
        )
        total_out = sum(
            row["providers"][provider_id]["output_tokens"]
            for row in rows if provider_id in row.get("providers", {})
        )
        n = sum(1 for row in rows if provider_id in row.get("providers", {}))
        pconf = prices.get(
            provider_id, ProviderConfig(provider_id=provider_id, model_name="unknown")
        )
        cost = (
            total_in * pconf.price_per_1k_input_tokens
            + total_out * pconf.price_per_1k_output_tokens
        ) / 1000.0
        summary[provider_id] = {
            "samples": n,
            "input_tokens": total_in,
            "output_tokens": total_out,
            "mean_tokens_per_sample": (total_in + total_out) / n if n else 0.0,
            "cost": cost,
        }
    payload = {
        "providers": summary,
        "reference_mean_tokens_per_sample_mscoco": MSCOCO_REFERENCE_MEAN_TOKENS,
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    click.echo(text)
    if out_path:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        Path(out_path).write_text(text, encoding="utf-8")


@main.command("cache")
@click.argument("action", type=click.Choice(["list", "verify", "gc"]))
@click.option("--cache-dir", type=click.Path(file_okay=False), required=False, default=None)
def cmd_cache(action, cache_dir):
    """Inspect (list), check (verify), or compact (gc) the response cache."""
    cache_dir = cache_dir or os.environ.get(CACHE_DIR_ENV)
    if not cache_dir:
        _fail(f"no cache directory: pass --cache-dir or set ${CACHE_DIR_ENV}")
    cache = ResponseCache(Path(cache_dir) / CACHE_FILE_NAME)
    if action == "list":
        for key in cache.keys():
            response = cache.get(key)
            click.echo(f"{key} {response.provider_id}/{response.model_name} "
                       f"{response.input_tokens}+{response.output_tokens} tokens")
        click.echo(f"{len(cache)} entries")
    elif action == "verify":
        problems = cache.verify()
        for problem in problems:
            click.echo(problem, err=True)
        if problems:
            _fail(f"cache verification failed: {len(problems)} bad lines")
        click.echo(f"cache OK ({len(cache)} entries)")
    else:
        dropped = cache.compact()
        click.echo(f"compacted cache, dropped {dropped} duplicate lines")


if __name__ == "__main__":
    main()
