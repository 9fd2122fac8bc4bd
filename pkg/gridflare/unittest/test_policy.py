# coding:utf-8

import os
from tempfile import TemporaryDirectory
import time
import unittest

import numpy as np

from gridflare.errors import CacheDesyncError
from gridflare.errors import CheckpointError
from gridflare.errors import ConfigError
from gridflare.errors import ContractError
from gridflare.grad import AdamState
from gridflare.grad import Tape
from gridflare.grad import backward
from gridflare.grad import ops
from gridflare.house.tasks import Instruction
from gridflare.house.tasks import TaskKind
from gridflare.house.tokens import CELL_VOCAB
from gridflare.house.tokens import PROPRIO_VOCAB
from gridflare.policy.act import act
from gridflare.policy.act import masked_distribution
from gridflare.policy.act import masked_log_probs
from gridflare.policy.config import PolicyConfig
from gridflare.policy.config import preset
from gridflare.policy.network import PolicyNet
from gridflare.policy.network import init_finetune
from gridflare.policy.network import sidecar_path

TINY = PolicyConfig(d_model=16, encoder_layers=1, encoder_heads=2, decoder_layers=2, decoder_heads=2, seed=3)  # noqa:E501


def random_tokens(rng: np.random.Generator, count: int) -> np.ndarray:
    window = rng.integers(0, CELL_VOCAB, size=(count, 49))
    proprio = rng.integers(0, PROPRIO_VOCAB, size=(count, 3))
    words = np.tile(Instruction(TaskKind.FETCH, ("apple",)).tokens(), (count, 1))  # noqa:E501
    return np.concatenate([window, proprio, words], axis=1)


class TestConfig(unittest.TestCase):

    def test_heads_divide_width(self):
        self.assertRaises(ConfigError, PolicyConfig, d_model=30, encoder_heads=4)  # noqa:E501
        self.assertRaises(ConfigError, PolicyConfig.from_dict, {"width": 3})

    def test_presets(self):
        paper = preset("paper")
        self.assertEqual((paper.d_model, paper.encoder_layers, paper.encoder_heads), (512, 3, 8))  # noqa:E501
        self.assertEqual(preset("desk"), PolicyConfig())
        self.assertRaises(ConfigError, preset, "huge")

    def test_round_trip(self):
        self.assertEqual(PolicyConfig.from_dict(TINY.to_dict()), TINY)


class TestEncoder(unittest.TestCase):

    def setUp(self):
        self.net = PolicyNet(TINY)
        self.tokens = random_tokens(np.random.default_rng(0), 3)

    def test_shape(self):
        self.assertEqual(self.net.encode_state(self.tokens).shape, (3, 16))
        self.assertEqual(self.net.encode_state(self.tokens[0]).shape, (1, 16))

    def test_token_out_of_vocabulary(self):
        tokens = self.tokens.copy()
        tokens[0, 0] = CELL_VOCAB
        self.assertRaises(ContractError, self.net.encode_state, tokens)
        self.assertRaises(ContractError, self.net.encode_state, self.tokens[:, :59])  # noqa:E501

    def test_padding_is_ignored(self):
        before = self.net.encode_state(self.tokens).data.copy()
        pad = self.net.params["embed.instruction"]
        values = pad.data.copy()
        values[0] += 5.0
        pad.assign(values)
        after = self.net.encode_state(self.tokens).data
        np.testing.assert_allclose(before, after, atol=1e-6)

    def test_one_cell_changes_state(self):
        tokens = self.tokens[:1].copy()
        changed = tokens.copy()
        changed[0, 10] = (changed[0, 10] + 1) % CELL_VOCAB
        first = self.net.encode_state(tokens).data
        second = self.net.encode_state(changed).data
        self.assertGreater(np.abs(first - second).max(), 1e-6)


class TestDecoder(unittest.TestCase):

    def setUp(self):
        self.net = PolicyNet(TINY)
        rng = np.random.default_rng(1)
        self.states = self.net.encode_state(random_tokens(rng, 12)).data
        self.actions = np.concatenate([[self.net.start_action], rng.integers(0, 20, size=11)])  # noqa:E501

    def sequential(self, start: int, count: int, offset: int = 0):
        cache = self.net.new_cache(offset=offset)
        return np.stack([self.net.decoder_step(self.states[start + i], int(self.actions[start + i]), offset + i, cache)  # noqa:E501
                         for i in range(count)])

    def test_first_step_matches_full_forward(self):
        full = self.net.full_forward(ops.tensor(self.states[:1]), self.actions[:1], [0], [0]).data  # noqa:E501
        np.testing.assert_allclose(self.sequential(0, 1), full, atol=1e-6)

    def test_cached_steps_match_full_forward(self):
        steps = np.arange(10)
        full = self.net.full_forward(ops.tensor(self.states[:10]), self.actions[:10], steps, np.zeros(10)).data  # noqa:E501
        self.assertLess(np.abs(self.sequential(0, 10) - full).max(), 1e-5)

    def test_cache_with_offset(self):
        steps = np.arange(5, 12)
        full = self.net.full_forward(ops.tensor(self.states[5:12]), self.actions[5:12], steps, np.zeros(7)).data  # noqa:E501
        self.assertLess(np.abs(self.sequential(5, 7, offset=5) - full).max(), 1e-5)  # noqa:E501

    def test_desync(self):
        cache = self.net.new_cache()
        self.net.decoder_step(self.states[0], self.net.start_action, 0, cache)
        self.assertRaises(CacheDesyncError, self.net.decoder_step, self.states[1], 3, 2, cache)  # noqa:E501
        self.assertEqual(cache.length, 1)

    def test_cache_belongs_to_one_episode(self):
        cache = self.net.new_cache(episode=("house", 1))
        self.net.decoder_step(self.states[0], self.net.start_action, 0, cache, ("house", 1))  # noqa:E501
        self.assertRaises(CacheDesyncError, self.net.decoder_step, self.states[1], 3, 1, cache, ("house", 2))  # noqa:E501
        self.assertRaises(CacheDesyncError, self.net.decoder_step, self.states[1], 3, 1, cache)  # noqa:E501
        self.assertEqual(cache.length, 1)
        cache.reset(episode=("house", 2))
        self.net.decoder_step(self.states[0], self.net.start_action, 0, cache, ("house", 2))  # noqa:E501
        self.assertEqual(cache.next_step, 1)

    def test_segments_do_not_mix(self):
        steps = np.asarray([0, 1, 2, 3, 0, 1, 2, 3])
        segments = np.asarray([0, 0, 0, 0, 1, 1, 1, 1])
        actions = self.actions[:8].copy()
        actions[4] = self.net.start_action
        joined = self.net.full_forward(ops.tensor(self.states[:8]), actions, steps, segments).data  # noqa:E501
        alone = self.net.full_forward(ops.tensor(self.states[4:8]), actions[4:8], steps[4:], segments[4:]).data  # noqa:E501
        np.testing.assert_allclose(joined[4:], alone, atol=1e-6)
        shuffled = self.states.copy()
        shuffled[:4] = shuffled[[3, 1, 0, 2]]
        again = self.net.full_forward(ops.tensor(shuffled[:8]), actions, steps, segments).data  # noqa:E501
        np.testing.assert_allclose(again[4:], joined[4:], atol=1e-6)

    def test_past_prefix(self):
        tokens = random_tokens(np.random.default_rng(2), 12)
        states = self.net.encode_state(tokens).data
        cache = self.net.new_cache()
        sequential = [self.net.decoder_step(states[t], int(self.actions[t]), t, cache) for t in range(12)]  # noqa:E501
        past = self.net.replay(tokens[:8], self.actions[:8], np.arange(8))
        full = self.net.full_forward(ops.tensor(states[8:]), self.actions[8:], np.arange(8, 12), np.zeros(4), past=past).data  # noqa:E501
        self.assertLess(np.abs(np.stack(sequential[8:]) - full).max(), 1e-5)
        windowed = self.net.full_forward(ops.tensor(states[8:]), self.actions[8:], np.arange(8, 12), np.zeros(4)).data  # noqa:E501
        self.assertGreater(np.abs(windowed - full).max(), 1e-6)


class TestLongEpisode(unittest.TestCase):

    LENGTH = 300

    @classmethod
    def setUpClass(cls):
        cls.net = PolicyNet(TINY)
        rng = np.random.default_rng(11)
        cls.states = cls.net.encode_state(random_tokens(rng, cls.LENGTH)).data
        cls.actions = np.concatenate([[cls.net.start_action], rng.integers(0, 20, size=cls.LENGTH - 1)])  # noqa:E501

    def step_times(self, cache, start: int, count: int):
        times = []
        for t in range(start, start + count):
            begin = time.perf_counter()
            self.net.decoder_step(self.states[t], int(self.actions[t]), t, cache)  # noqa:E501
            times.append(time.perf_counter() - begin)
        return times

    def test_cached_steps_match_full_episode(self):
        cache = self.net.new_cache()
        sequential = np.stack([self.net.decoder_step(self.states[t], int(self.actions[t]), t, cache)  # noqa:E501
                               for t in range(self.LENGTH)])
        full = self.net.full_forward(ops.tensor(self.states), self.actions, np.arange(self.LENGTH), np.zeros(self.LENGTH)).data  # noqa:E501
        self.assertEqual(cache.length, self.LENGTH)
        self.assertLess(np.abs(sequential - full).max(), 1e-4)

    def test_step_cost_stays_flat(self):
        count = 10
        late = self.net.replay(random_tokens(np.random.default_rng(12), self.LENGTH - count), self.actions[:self.LENGTH - count], np.arange(self.LENGTH - count))  # noqa:E501
        early = self.net.new_cache()
        self.net.decoder_step(self.states[0], int(self.actions[0]), 0, early)
        # warm both paths before timing
        self.step_times(self.net.new_cache(), 0, count)
        near_empty = min(self.step_times(early, 1, count))
        full = min(self.step_times(late, self.LENGTH - count, count))
        self.assertEqual(late.length, self.LENGTH)
        self.assertLess(full, 4.0 * near_empty)


class TestAct(unittest.TestCase):

    def test_forced_choice(self):
        valid = np.zeros(20, dtype=bool)
        valid[7] = True
        action, log_prob, probs = act(np.random.default_rng(0).normal(size=20), valid, "sample", np.random.default_rng(1))  # noqa:E501
        self.assertEqual(action, 7)
        self.assertEqual(log_prob, 0.0)
        self.assertEqual(probs[7], 1.0)

    def test_uniform(self):
        _, log_prob, probs = act(np.zeros(20), np.ones(20, dtype=bool), "argmax")  # noqa:E501
        np.testing.assert_allclose(probs, np.full(20, 0.05))
        self.assertAlmostEqual(log_prob, np.log(0.05))

    def test_masked_entries_are_zero(self):
        rng = np.random.default_rng(4)
        valid = rng.random(20) < 0.5
        valid[0] = True
        logits = rng.normal(scale=30.0, size=20)
        logits[~valid] += 100.0
        probs = masked_distribution(logits, valid)
        self.assertTrue(np.all(probs[~valid] == 0.0))
        self.assertAlmostEqual(probs.sum(), 1.0)
        for _ in range(200):
            action, _, _ = act(logits, valid, "sample", rng)
            self.assertTrue(valid[action])
        logp = masked_log_probs(ops.tensor(logits[None].astype(np.float32)), valid[None]).data  # noqa:E501
        self.assertTrue(np.all(np.exp(logp[0][~valid]) == 0.0))

    def test_all_invalid(self):
        self.assertRaises(ContractError, act, np.zeros(20), np.zeros(20, dtype=bool), "argmax")  # noqa:E501
        self.assertRaises(ContractError, act, np.zeros(20), np.ones(20, dtype=bool), "greedy")  # noqa:E501

    def test_seeded_sampling(self):
        logits = np.random.default_rng(0).normal(size=20)
        first = [act(logits, np.ones(20, dtype=bool), "sample", rng)[0] for rng in [np.random.default_rng(5)] * 30]  # noqa:E501
        second = [act(logits, np.ones(20, dtype=bool), "sample", rng)[0] for rng in [np.random.default_rng(5)] * 30]  # noqa:E501
        self.assertEqual(first, second)


class TestValue(unittest.TestCase):

    def test_zero_head(self):
        net = PolicyNet(TINY)
        for name in ("head.critic.weight", "head.critic.bias"):
            net.params[name].assign(np.zeros(net.params[name].shape))
        self.assertEqual(net.value(np.zeros(16, dtype=np.float32)).item(), 0.0)  # noqa:E501
        self.assertEqual(net.value(np.ones((4, 16), dtype=np.float32)).shape, (4,))  # noqa:E501

    def test_gradient_matches_finite_differences(self):
        net = PolicyNet(TINY).astype(np.float64)
        tokens = random_tokens(np.random.default_rng(6), 4)
        actions = np.asarray([net.start_action, 2, 0, 5])

        def loss():
            states = net.encode_state(tokens)
            return ops.sum(net.value(net.full_forward(states, actions, np.arange(4), np.zeros(4))))  # noqa:E501

        with Tape():
            out = loss()
            backward(out)
        for name in ("decoder.1.mlp.w1", "encoder.0.attn.wq", "head.critic.weight"):  # noqa:E501
            param = net.params[name]
            for index in [(0, 0), (3, 1), (1, 0)][:1 if name.startswith("head") else 3]:  # noqa:E501
                original = param.data[index]
                param.data[index] = original + 1e-6
                upper = loss().item()
                param.data[index] = original - 1e-6
                lower = loss().item()
                param.data[index] = original
                numeric = (upper - lower) / 2e-6
                analytic = param.grad[index]
                self.assertLess(abs(numeric - analytic), 1e-4 * max(1.0, abs(numeric)), msg=name)  # noqa:E501


class TestFinetuneInit(unittest.TestCase):

    def setUp(self):
        self.pretrained = PolicyNet(TINY)
        self.actor, self.critic = init_finetune(self.pretrained, seed=1)
        self.tokens = random_tokens(np.random.default_rng(7), 6)

    def greedy(self, net: PolicyNet) -> np.ndarray:
        states = net.encode_state(self.tokens)
        beliefs = net.full_forward(states, np.full(6, net.start_action), np.zeros(6), np.arange(6))  # noqa:E501
        return net.actor_logits(beliefs).data.argmax(axis=-1)

    def test_copies(self):
        for name in self.pretrained.trunk_names():
            np.testing.assert_array_equal(self.actor.params[name].data, self.pretrained.params[name].data)  # noqa:E501
            np.testing.assert_array_equal(self.critic.params[name].data, self.pretrained.params[name].data)  # noqa:E501
            self.assertIsNot(self.actor.params[name].data, self.critic.params[name].data)  # noqa:E501
        self.assertFalse(np.array_equal(self.critic.params["head.critic.weight"].data, self.pretrained.params["head.critic.weight"].data))  # noqa:E501
        self.assertLessEqual(np.abs(self.critic.params["head.critic.weight"].data).max(), 1e-2)  # noqa:E501
        np.testing.assert_array_equal(self.greedy(self.actor), self.greedy(self.pretrained))  # noqa:E501

    def test_critic_update_leaves_actor(self):
        before = self.greedy(self.actor)
        logits = self.actor.actor_logits(self.actor.encode_state(self.tokens)).data.copy()  # noqa:E501
        with Tape():
            states = self.critic.encode_state(self.tokens)
            beliefs = self.critic.full_forward(states, np.full(6, self.critic.start_action), np.zeros(6), np.arange(6))  # noqa:E501
            loss = ops.mean(ops.mul(self.critic.value(beliefs), self.critic.value(beliefs)))  # noqa:E501
            backward(loss)
        AdamState(1e-2).step(self.critic.params)
        np.testing.assert_array_equal(self.greedy(self.actor), before)
        np.testing.assert_array_equal(self.actor.actor_logits(self.actor.encode_state(self.tokens)).data, logits)  # noqa:E501
        self.assertFalse(np.array_equal(self.critic.params["decoder.0.mlp.w1"].data, self.actor.params["decoder.0.mlp.w1"].data))  # noqa:E501


class TestCheckpoint(unittest.TestCase):

    def test_save_load_save(self):
        net = PolicyNet(TINY)
        with TemporaryDirectory() as tempdir:
            first = os.path.join(tempdir, "a.flrb")
            second = os.path.join(tempdir, "b.flrb")
            net.save(first, {"phase": "bc"})
            self.assertTrue(os.path.isfile(sidecar_path(first)))
            loaded = PolicyNet.load(first)
            self.assertEqual(loaded.config, TINY)
            loaded.save(second)
            with open(first, "rb") as one, open(second, "rb") as two:
                self.assertEqual(one.read(), two.read())
            self.assertRaises(CheckpointError, PolicyNet.load, first, PolicyConfig(d_model=32, encoder_heads=2, decoder_heads=2))  # noqa:E501
            _, critic = init_finetune(first)
            self.assertEqual(critic.parameter_count(), net.parameter_count())

    def test_copy_is_independent(self):
        net = PolicyNet(TINY)
        twin = net.copy()
        twin.params["embed.state"].assign(np.zeros(16))
        self.assertFalse(np.array_equal(net.params["embed.state"].data, twin.params["embed.state"].data))  # noqa:E501


if __name__ == "__main__":
    unittest.main()
