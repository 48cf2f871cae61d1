import numpy as np
import pytest

from protqa import autograd as ag
from protqa.autograd import Tensor
from protqa.errors import ContractError, DimensionError, LengthError
from protqa.lm import (
    LMConfig,
    LoRAConfig,
    count_lora_params,
    count_trainable,
    encode_question,
    full_token_ids,
    generate,
    init_lm_weights,
    lm_forward,
    lora_inject,
    prompt_token_ids,
)
from protqa.tokenizer import BOS, EOS, VOCAB_SIZE, tokenize

CFG = LMConfig(layers=2, d_model=32, heads=4, kv_heads=2, max_context=128)


@pytest.fixture(scope="module")
def weights():
    return init_lm_weights(CFG, seed=0)


class TestForward:
    def test_logit_shape_no_prompt(self, weights):
        logits = lm_forward([65], None, weights, CFG)
        assert logits.shape == (1, VOCAB_SIZE)

    def test_logit_shape_with_prompt(self, weights, rng):
        prompt = Tensor(rng.normal(size=(4, 32)).astype(np.float32))
        logits = lm_forward([65, 66, 67], prompt, weights, CFG)
        assert logits.shape == (7, VOCAB_SIZE)

    def test_causality_bit_level(self, weights, rng):
        ids = list(rng.integers(0, 256, size=20))
        base = lm_forward(ids, None, weights, CFG).data
        j = 11
        changed = list(ids)
        changed[j] = (changed[j] + 1) % 256
        moved = lm_forward(changed, None, weights, CFG).data
        np.testing.assert_array_equal(moved[:j], base[:j])
        assert np.max(np.abs(moved[j:] - base[j:])) > 0

    def test_soft_prompt_reaches_first_answer_position(self, weights, rng):
        ids = tokenize("Q?")
        a = Tensor(rng.normal(size=(4, 32)).astype(np.float32))
        b = Tensor(a.data + rng.normal(scale=0.1, size=(4, 32)).astype(np.float32))
        la = lm_forward(ids, a, weights, CFG).data
        lb = lm_forward(ids, b, weights, CFG).data
        assert np.max(np.abs(la[-1] - lb[-1])) > 0

    def test_context_overflow(self, weights):
        with pytest.raises(LengthError):
            lm_forward(list(range(130)), None, weights, CFG)

    def test_prompt_width_mismatch(self, weights, rng):
        with pytest.raises(DimensionError):
            lm_forward([65], Tensor(rng.normal(size=(4, 16))), weights, CFG)

    def test_cache_matches_full_forward(self, weights, rng):
        ids = list(rng.integers(0, 256, size=12))
        prompt = Tensor(rng.normal(size=(3, 32)).astype(np.float32))
        full = lm_forward(ids, prompt, weights, CFG).data
        cache = []
        part1 = lm_forward(ids[:7], prompt, weights, CFG, cache=cache).data
        part2 = lm_forward(ids[7:], None, weights, CFG, cache=cache).data
        np.testing.assert_allclose(np.concatenate([part1, part2]), full, atol=2e-5)


class TestQuestionVector:
    def test_width_and_determinism(self, weights):
        v1 = encode_question("What is the function?", weights, CFG)
        v2 = encode_question("What is the function?", weights, CFG)
        assert v1.shape == (32,)
        np.testing.assert_array_equal(v1.data, v2.data)

    def test_distinct_questions(self, weights):
        a = encode_question("What is the function?", weights, CFG)
        b = encode_question("Where is the binding site?", weights, CFG)
        assert np.max(np.abs(a.data - b.data)) > 0

    def test_empty_question(self, weights):
        with pytest.raises(ContractError):
            encode_question("", weights, CFG)


class TestLoRA:
    def test_identity_at_injection(self, weights, rng):
        ids = list(rng.integers(0, 256, size=10))
        base = lm_forward(ids, None, weights, CFG).data
        lora = lora_inject(CFG, LoRAConfig(), seed=1)
        adapted = lm_forward(ids, None, weights, CFG, lora=lora, lora_cfg=LoRAConfig()).data
        np.testing.assert_array_equal(adapted, base)

    def test_training_step_moves_only_lora(self, weights, rng):
        from protqa.optim import AdamState, adam_step

        lora_cfg = LoRAConfig(dropout=0.0)
        lora = lora_inject(CFG, lora_cfg, seed=2)
        base_bytes = {k: t.data.tobytes() for k, t in weights.items()}
        ids = full_token_ids("Hi?", "Yes.")
        logits = lm_forward(ids[:-1], None, weights, CFG, lora=lora, lora_cfg=lora_cfg)
        loss = ag.cross_entropy(logits, ids[1:])
        ag.backward(loss)
        params = list(lora.values())
        adam_step(params, [p.grad for p in params], AdamState(lr=1e-2))
        assert any(np.max(np.abs(t.grad)) > 0 for t in lora.values())
        moved = sum(
            int(not np.array_equal(t.data, np.zeros_like(t.data))) for t in lora.values()
        )
        assert moved > 0
        for k, t in weights.items():
            assert t.data.tobytes() == base_bytes[k], f"base weight {k} changed"

    def test_count_formula_at_llama3_shapes(self):
        big = LMConfig(layers=32, d_model=4096, heads=32, kv_heads=8, max_context=1024)
        assert count_lora_params(big, LoRAConfig(rank=8)) == 3_407_872

    def test_count_formula_matches_enumeration(self):
        lora = lora_inject(CFG, LoRAConfig(rank=4), seed=0)
        assert count_lora_params(CFG, LoRAConfig(rank=4)) == sum(t.size for t in lora.values())

    def test_count_trainable_groups(self, weights):
        lora = lora_inject(CFG, LoRAConfig(), seed=0)
        named = {f"lm.{k}": t for k, t in weights.items()}
        named.update({f"lora.{k}": t for k, t in lora.items()})
        groups = count_trainable(named)
        assert groups["lora"] == count_lora_params(CFG, LoRAConfig())
        assert groups["lm"] == 0  # frozen base contributes nothing to tracked groups
        assert groups["frozen"] == sum(t.size for t in weights.values())


class TestGenerate:
    def test_greedy_deterministic(self, weights, rng):
        prompt = Tensor(rng.normal(size=(2, 32)).astype(np.float32))
        a = generate(prompt, "What?", weights, CFG, max_new=8)
        b = generate(prompt, "What?", weights, CFG, max_new=8)
        assert a == b

    def test_max_new_zero(self, weights):
        assert generate(None, "Q", weights, CFG, max_new=0) == ""

    def test_no_budget(self, weights, rng):
        long_q = "x" * 200
        with pytest.raises(LengthError):
            generate(None, long_q, weights, CFG, max_new=4)

    def test_temperature_seeded(self, weights):
        a = generate(None, "Q?", weights, CFG, max_new=6, mode="temperature", temperature=1.5, seed=9)
        b = generate(None, "Q?", weights, CFG, max_new=6, mode="temperature", temperature=1.5, seed=9)
        assert a == b

    def test_template_tokens(self):
        ids = full_token_ids("Q?", "A.")
        assert ids[0] == BOS and ids[-1] == EOS
        assert prompt_token_ids("Q?") == ids[: len(prompt_token_ids("Q?"))]
