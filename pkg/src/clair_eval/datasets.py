"""Canonical JSONL schemas, loaders/writers, and dataset preprocessing rules.

Schemas (UTF-8, one JSON object per line, no header):

  samples: {"id", "candidates": [str], "references": [str],
            "human_score"?: num, "human_scale"?: [num, num],
            "source"?: str, "system"?: str}
  pairs:   {"id", "references": [str], "caption_a": str, "caption_b": str,
            "category": "HC"|"HI"|"HM"|"MM", "human_choice": "A"|"B"}
  groups:  {"id", "candidates": [str], "references": [str],
            "coverage_rating": num, "correctness_rating": num}
"""

from __future__ import annotations

import json
import random
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .core import (
    Caption,
    EvaluationSample,
    GroupSample,
    PairSample,
    canonicalize,
    validate_group,
    validate_pair,
    validate_sample,
)

DEFAULT_REFERENCE_CAP = 5


class DatasetError(ValueError):
    pass


def _iter_records(path: str | Path):
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed JSON line: {exc}") from exc
            if not isinstance(record, dict):
                raise DatasetError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, record


def _captions(record: dict, key: str, path, lineno) -> tuple[Caption, ...]:
    value = record.get(key)
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise DatasetError(f"{path}:{lineno}: {key!r} must be a list of strings")
    return tuple(Caption(v) for v in value)


def _check_unique(seen: set, sample_id, path, lineno) -> None:
    if not isinstance(sample_id, str) or not sample_id:
        raise DatasetError(f"{path}:{lineno}: missing or empty 'id'")
    if sample_id in seen:
        raise DatasetError(f"{path}:{lineno}: duplicate id {sample_id!r}")
    seen.add(sample_id)


def load_samples(path: str | Path) -> list[EvaluationSample]:
    samples = []
    seen: set[str] = set()
    for lineno, record in _iter_records(path):
        _check_unique(seen, record.get("id"), path, lineno)
        scale = record.get("human_scale")
        sample = EvaluationSample(
            id=record["id"],
            candidates=_captions(record, "candidates", path, lineno),
            references=_captions(record, "references", path, lineno),
            human_score=record.get("human_score"),
            human_scale=tuple(scale) if scale is not None else None,
            source=record.get("source"),
            system=record.get("system"),
        )
        problems = validate_sample(sample)
        if problems:
            raise DatasetError(f"{path}:{lineno}: invalid sample: {'; '.join(problems)}")
        samples.append(sample)
    return samples


def load_pairs(path: str | Path) -> list[PairSample]:
    pairs = []
    seen: set[str] = set()
    for lineno, record in _iter_records(path):
        _check_unique(seen, record.get("id"), path, lineno)
        pair = PairSample(
            id=record["id"],
            references=_captions(record, "references", path, lineno),
            caption_a=Caption(str(record.get("caption_a", ""))),
            caption_b=Caption(str(record.get("caption_b", ""))),
            category=str(record.get("category", "")),
            human_choice=str(record.get("human_choice", "")),
        )
        problems = validate_pair(pair)
        if problems:
            raise DatasetError(f"{path}:{lineno}: invalid pair: {'; '.join(problems)}")
        pairs.append(pair)
    return pairs


def load_groups(path: str | Path) -> list[GroupSample]:
    groups = []
    seen: set[str] = set()
    for lineno, record in _iter_records(path):
        _check_unique(seen, record.get("id"), path, lineno)
        for key in ("coverage_rating", "correctness_rating"):
            if not isinstance(record.get(key), (int, float)) or isinstance(record.get(key), bool):
                raise DatasetError(f"{path}:{lineno}: missing numeric {key!r}")
        group = GroupSample(
            id=record["id"],
            candidates=_captions(record, "candidates", path, lineno),
            references=_captions(record, "references", path, lineno),
            coverage_rating=float(record["coverage_rating"]),
            correctness_rating=float(record["correctness_rating"]),
        )
        problems = validate_group(group)
        if problems:
            raise DatasetError(f"{path}:{lineno}: invalid group: {'; '.join(problems)}")
        groups.append(group)
    return groups


def sample_to_record(sample: EvaluationSample) -> dict:
    record: dict = {
        "id": sample.id,
        "candidates": [c.text for c in sample.candidates],
        "references": [r.text for r in sample.references],
    }
    if sample.human_score is not None:
        record["human_score"] = sample.human_score
    if sample.human_scale is not None:
        record["human_scale"] = list(sample.human_scale)
    if sample.source is not None:
        record["source"] = sample.source
    if sample.system is not None:
        record["system"] = sample.system
    return record


def pair_to_record(pair: PairSample) -> dict:
    return {
        "id": pair.id,
        "references": [r.text for r in pair.references],
        "caption_a": pair.caption_a.text,
        "caption_b": pair.caption_b.text,
        "category": pair.category,
        "human_choice": pair.human_choice,
    }


def group_to_record(group: GroupSample) -> dict:
    return {
        "id": group.id,
        "candidates": [c.text for c in group.candidates],
        "references": [r.text for r in group.references],
        "coverage_rating": group.coverage_rating,
        "correctness_rating": group.correctness_rating,
    }


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def flickr8k_exclusion(
    samples: Sequence[EvaluationSample],
) -> tuple[list[EvaluationSample], list[EvaluationSample]]:
    """Partition out samples whose candidate duplicates a reference.

    A sample is excluded iff any canonicalized candidate equals any
    canonicalized reference. Returns (kept, excluded); union is the input.
    """
    kept, excluded = [], []
    for sample in samples:
        refs = {canonicalize(r.text) for r in sample.references}
        if any(canonicalize(c.text) in refs for c in sample.candidates):
            excluded.append(sample)
        else:
            kept.append(sample)
    return kept, excluded


def cap_references(
    pairs: Sequence[PairSample],
    k: int = DEFAULT_REFERENCE_CAP,
    seed: Optional[int] = None,
) -> list[PairSample]:
    """Keep at most k references per pair: the first k in file order, or a
    seeded random k when seed is given (for sensitivity checks)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = random.Random(seed) if seed is not None else None
    capped = []
    for pair in pairs:
        refs = pair.references
        if len(refs) > k:
            if rng is None:
                refs = refs[:k]
            else:
                idx = sorted(rng.sample(range(len(refs)), k))
                refs = tuple(refs[i] for i in idx)
        capped.append(
            PairSample(
                id=pair.id,
                references=refs,
                caption_a=pair.caption_a,
                caption_b=pair.caption_b,
                category=pair.category,
                human_choice=pair.human_choice,
            )
        )
    return capped


# --- Converters -------------------------------------------------------------
#
# Thin mappings from locally provided raw dumps to the canonical schemas. Each
# converter documents the raw layout it expects; raw files are never bundled
# or downloaded.


def convert_rated_captions(raw: dict, source: str, scale: tuple[float, float]) -> list[dict]:
    """Raw layout: {"items": [{"id", "candidate", "references": [str],
    "rating", "system"?}]} -> samples schema with one candidate per record."""
    records = []
    for item in raw["items"]:
        record = {
            "id": str(item["id"]),
            "candidates": [item["candidate"]],
            "references": list(item["references"]),
            "human_score": float(item["rating"]),
            "human_scale": list(scale),
            "source": source,
        }
        if "system" in item:
            record["system"] = str(item["system"])
        records.append(record)
    return records


def convert_composite(raw: dict) -> list[dict]:
    """COMPOSITE judgments: ratings on a 1-5 relevance scale."""
    return convert_rated_captions(raw, source="composite", scale=(1.0, 5.0))


def convert_flickr8k(raw: dict) -> list[dict]:
    """Flickr8K expert judgments: ratings on a 1-4 scale. The candidate-
    duplicates-reference exclusion is applied separately at load time."""
    return convert_rated_captions(raw, source="flickr8k", scale=(1.0, 4.0))


def convert_mscoco(raw: dict) -> list[dict]:
    """MS-COCO judgments: averaged ratings on a 1-5 scale, with system tags."""
    return convert_rated_captions(raw, source="mscoco", scale=(1.0, 5.0))


def convert_pascal50s(raw: dict) -> list[dict]:
    """Raw layout: {"pairs": [{"id", "references": [str], "caption_1",
    "caption_2", "category", "chosen": 1|2}]} -> pairs schema."""
    records = []
    for item in raw["pairs"]:
        records.append(
            {
                "id": str(item["id"]),
                "references": list(item["references"]),
                "caption_a": item["caption_1"],
                "caption_b": item["caption_2"],
                "category": item["category"],
                "human_choice": "A" if int(item["chosen"]) == 1 else "B",
            }
        )
    return records


def convert_cocosets(raw: dict) -> list[dict]:
    """Raw layout: {"groups": [{"id", "candidates": [str], "references":
    [str], "coverage", "correctness"}]} -> groups schema."""
    records = []
    for item in raw["groups"]:
        records.append(
            {
                "id": str(item["id"]),
                "candidates": list(item["candidates"]),
                "references": list(item["references"]),
                "coverage_rating": float(item["coverage"]),
                "correctness_rating": float(item["correctness"]),
            }
        )
    return records


CONVERTERS = {
    "composite": convert_composite,
    "flickr8k": convert_flickr8k,
    "mscoco": convert_mscoco,
    "pascal50s": convert_pascal50s,
    "cocosets": convert_cocosets,
}
