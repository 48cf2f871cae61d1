import itertools
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from protqa.errors import ContractError, RankingParseError
from protqa.judge import (
    JUDGE_TEMPLATE,
    RankingRecord,
    ReplayJudgeClient,
    average_from_counts,
    average_rank,
    build_judge_prompt,
    format_ranking,
    judge_items,
    parse_ranking,
    placement_counts,
    round_half_up,
)

GOLDEN_PROMPT = (
    "Please select the sentence that is closest and most accurate in meaning to the "
    "Target sentence and rank sentences A, B, C and D accordingly, with the first "
    "place meaning the most identical and accurate in meaning to the Target. Only "
    "provide the answer, for example, 'B D A C' or 'A C D B', etc. "
    "Target: binds ATP A: answer one B: answer two C: answer three D: answer four"
)


class TestPrompt:
    def test_golden_bytes(self):
        prompt = build_judge_prompt(
            "binds ATP", ["answer one", "answer two", "answer three", "answer four"]
        )
        assert prompt.encode() == GOLDEN_PROMPT.encode()

    def test_newlines_embedded_unescaped(self):
        prompt = build_judge_prompt("t", ["line1\nline2", "b", "c", "d"])
        assert "line1\nline2" in prompt

    def test_wrong_count(self):
        with pytest.raises(ContractError):
            build_judge_prompt("t", ["a", "b", "c"])

    def test_template_has_single_instruction_block(self):
        assert JUDGE_TEMPLATE.count("{target}") == 1
        assert "closest and most accurate in meaning" in JUDGE_TEMPLATE


class TestParseRanking:
    def test_paper_example(self):
        assert parse_ranking("B D A C") == ["B", "D", "A", "C"]

    def test_case_insensitive(self):
        assert parse_ranking("b d a c") == ["B", "D", "A", "C"]

    def test_duplicate_label(self):
        with pytest.raises(RankingParseError):
            parse_ranking("B B A C")

    def test_missing_label(self):
        with pytest.raises(RankingParseError):
            parse_ranking("B A C")

    def test_extra_token(self):
        with pytest.raises(RankingParseError):
            parse_ranking("B D A C E")

    def test_round_trip_all_24_permutations(self):
        for perm in itertools.permutations("ABCD"):
            assert parse_ranking(format_ranking(list(perm))) == list(perm)

    @given(st.permutations(["A", "B", "C", "D"]))
    def test_round_trip_property(self, perm):
        assert parse_ranking(format_ranking(list(perm))) == list(perm)


class TestAverageRank:
    def test_table_rows(self):
        # placement counts -> average rank, four published rows
        assert abs(average_from_counts([386, 242, 13, 9]) - 1.45) < 0.005
        assert abs(average_from_counts([26, 57, 326, 241]) - 3.20) < 0.005
        assert abs(average_from_counts([18, 22, 252, 358]) - 3.46) < 0.005
        assert abs(average_from_counts([220, 329, 59, 42]) - 1.88) < 0.005

    def test_second_table_row_rounding_flagged(self):
        # raw ratio 974/650 = 1.498...; round-half-up prints 1.50
        avg = average_from_counts([359, 266, 17, 8])
        assert abs(avg - 974 / 650) < 1e-12
        assert round_half_up(avg) == 1.50

    def test_all_first(self):
        assert average_from_counts([650, 0, 0, 0]) == 1.0

    def test_zero_records(self):
        with pytest.raises(ContractError):
            average_from_counts([0, 0, 0, 0])
        with pytest.raises(ContractError):
            average_rank([])

    def test_counts_sum_to_item_count(self):
        records = [
            RankingRecord("1", ["A", "B", "C", "D"]),
            RankingRecord("2", ["B", "A", "D", "C"]),
            RankingRecord("3", ["A", "C", "B", "D"]),
        ]
        stats = average_rank(records)
        for label in "ABCD":
            assert sum(stats[label]["counts"]) == 3
        assert placement_counts(records, "A") == [2, 1, 0, 0]
        assert stats["A"]["avg"] == pytest.approx(4 / 3)


class TestReplayClient:
    def test_replay_and_judging(self, tmp_path):
        replies = tmp_path / "replies.jsonl"
        rows = [
            {"id": "x", "reply": "B D A C"},
            {"id": "y", "reply": "a c d b"},
            {"id": "z", "reply": "nonsense"},
        ]
        replies.write_text("".join(json.dumps(r) + "\n" for r in rows))
        client = ReplayJudgeClient(replies)
        items = [(i, "target", ["a1", "a2", "a3", "a4"]) for i in ("x", "y", "z", "missing")]
        records, failures = judge_items(client, items, max_workers=2)
        assert [r.item_id for r in records] == ["x", "y"]
        assert set(failures) == {"z", "missing"}
        assert records[0].rank_of("B") == 1
