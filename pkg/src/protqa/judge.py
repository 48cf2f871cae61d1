"""Four-way judge-ranking protocol: byte-exact prompt, reply parsing and the
average-rank statistic.

The prompt template is a single versioned constant; tests golden-pin its
bytes. Replies like "B D A C" rank labels best to worst. Items whose reply
does not parse are recorded as unusable, never guessed.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import ContractError, RankingParseError

LABELS = ("A", "B", "C", "D")

JUDGE_TEMPLATE_VERSION = "judge-prompt/1"

JUDGE_TEMPLATE = (
    "Please select the sentence that is closest and most accurate in meaning to the "
    "Target sentence and rank sentences A, B, C and D accordingly, with the first "
    "place meaning the most identical and accurate in meaning to the Target. Only "
    "provide the answer, for example, 'B D A C' or 'A C D B', etc. "
    "Target: {target} A: {a} B: {b} C: {c} D: {d}"
)


def build_judge_prompt(target: str, answers: list[str]) -> str:
    """Instantiate the ranking prompt; answers map to labels A-D in order.

    Answers are embedded unescaped (newlines included).
    """
    if len(answers) != 4:
        raise ContractError(f"expected exactly 4 answers, got {len(answers)}")
    return JUDGE_TEMPLATE.format(target=target, a=answers[0], b=answers[1],
                                 c=answers[2], d=answers[3])


def parse_ranking(reply: str) -> list[str]:
    """Whitespace-separated labels, best first; case-insensitive; must be a
    permutation of A-D."""
    tokens = [t.upper() for t in reply.split()]
    if sorted(tokens) != sorted(LABELS):
        raise RankingParseError(f"reply {reply!r} is not a permutation of A-D")
    return tokens


def format_ranking(permutation: list[str]) -> str:
    return " ".join(permutation)


@dataclass
class RankingRecord:
    item_id: str
    permutation: list[str]  # labels best-to-worst

    def rank_of(self, label: str) -> int:
        return self.permutation.index(label) + 1


def placement_counts(records: list[RankingRecord], label: str) -> list[int]:
    counts = [0, 0, 0, 0]
    for r in records:
        counts[r.rank_of(label) - 1] += 1
    return counts


def average_from_counts(counts: list[int]) -> float:
    """Avg = sum(place * count) / sum(count)."""
    total = sum(counts)
    if total == 0:
        raise ContractError("no usable ranking records")
    return sum((place + 1) * c for place, c in enumerate(counts)) / total


def round_half_up(x: float, digits: int = 2) -> float:
    scale = 10**digits
    return int(x * scale + 0.5) / scale


def average_rank(records: list[RankingRecord]) -> dict[str, dict]:
    """Per-label placement counts and average rank over usable records."""
    if not records:
        raise ContractError("no usable ranking records")
    out = {}
    for label in LABELS:
        counts = placement_counts(records, label)
        avg = average_from_counts(counts)
        out[label] = {"counts": counts, "avg": avg, "avg_2dp": round_half_up(avg)}
    return out


# ---------------------------------------------------------------------------
# judge clients


class ReplayJudgeClient:
    """Replays stored replies from a JSON-Lines file of {"id", "reply"} rows."""

    def __init__(self, path: str | Path):
        self.replies: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    row = json.loads(line)
                    self.replies[str(row["id"])] = str(row["reply"])

    def rank(self, item_id: str, prompt: str) -> str:
        if item_id not in self.replies:
            raise RankingParseError(f"no stored reply for item {item_id!r}")
        return self.replies[item_id]


class HttpJudgeClient:
    """Generic chat-completion endpoint; configured via environment variables
    JUDGE_ENDPOINT, JUDGE_API_KEY and JUDGE_MODEL unless given explicitly."""

    def __init__(self, endpoint: str | None = None, api_key: str | None = None,
                 model: str | None = None, timeout: float = 60.0):
        self.endpoint = endpoint or os.environ.get("JUDGE_ENDPOINT", "")
        self.api_key = api_key or os.environ.get("JUDGE_API_KEY", "")
        self.model = model or os.environ.get("JUDGE_MODEL", "")
        self.timeout = timeout
        if not self.endpoint:
            raise ContractError("judge endpoint not configured (JUDGE_ENDPOINT)")

    def rank(self, item_id: str, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        resp = requests.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
        resp.raise_for_status()
        body = resp.json()
        return body["choices"][0]["message"]["content"]


def judge_items(client, items: list[tuple[str, str, list[str]]],
                max_workers: int = 4) -> tuple[list[RankingRecord], list[str]]:
    """Rank each (item_id, target, answers) with bounded concurrency.

    Returns usable records plus the ids of items whose reply did not parse.
    """
    records: list[RankingRecord] = []
    failures: list[str] = []

    def one(item):
        item_id, target, answers = item
        prompt = build_judge_prompt(target, answers)
        try:
            return item_id, parse_ranking(client.rank(item_id, prompt))
        except (RankingParseError, requests.RequestException) as e:
            return item_id, e

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        for item_id, result in pool.map(one, items):
            if isinstance(result, Exception):
                failures.append(item_id)
            else:
                records.append(RankingRecord(item_id=item_id, permutation=result))
    return records, failures
