# coding:utf-8

from collections import OrderedDict
import copy
import os
from typing import Any
from typing import Dict
from typing import Iterable
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np
from loguru import logger

from gridflare.config import read_json
from gridflare.config import write_json
from gridflare.errors import CacheDesyncError
from gridflare.errors import CheckpointError
from gridflare.errors import ContractError
from gridflare.grad import Tensor
from gridflare.grad import checkpoint
from gridflare.grad import ops
from gridflare.house.tokens import INSTRUCTION_LENGTH
from gridflare.house.tokens import PROPRIO_TOKENS
from gridflare.house.tokens import WINDOW_TOKENS
from gridflare.house.tokens import vocabulary_hash
from gridflare.policy.config import PolicyConfig
from gridflare.policy.layers import MASKED
from gridflare.policy.layers import Params
from gridflare.policy.layers import add_block
from gridflare.policy.layers import attend
from gridflare.policy.layers import block
from gridflare.policy.layers import finish_block
from gridflare.policy.layers import linear
from gridflare.policy.layers import project_qkv
from gridflare.policy.layers import segment_bias
from gridflare.policy.layers import sinusoid

HEAD_PREFIX = "head."
CRITIC_HEAD_SCALE = 1e-2
ACTOR_HEAD_SCALE = 1e-3


class KVCache():
    """Decoder keys and values of one episode, per layer.

    ``offset`` is the episode step of the first cached position; a cache that
    restarts mid-episode carries the step it restarted at.
    """

    def __init__(self, layers: int, heads: int, head_dim: int, offset: int = 0,  # noqa:E501
                 episode: Any = None, dtype=np.float32):
        self.__shape: Tuple[int, int] = (heads, head_dim)
        self.__keys: List[np.ndarray] = [np.zeros((heads, 16, head_dim), dtype=dtype) for _ in range(layers)]  # noqa:E501
        self.__values: List[np.ndarray] = [np.zeros((heads, 16, head_dim), dtype=dtype) for _ in range(layers)]  # noqa:E501
        self.__length: int = 0
        self.__offset: int = int(offset)
        self.__episode: Any = episode

    @property
    def length(self) -> int:
        return self.__length

    @property
    def offset(self) -> int:
        return self.__offset

    @property
    def episode(self) -> Any:
        return self.__episode

    @property
    def next_step(self) -> int:
        return self.__offset + self.__length

    def keys(self, layer: int) -> np.ndarray:
        return self.__keys[layer][:, :self.__length]

    def values(self, layer: int) -> np.ndarray:
        return self.__values[layer][:, :self.__length]

    def reset(self, offset: int = 0, episode: Any = None) -> None:
        self.__length = 0
        self.__offset = int(offset)
        self.__episode = episode

    def extend(self, layer: int, key: np.ndarray, value: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:  # noqa:E501
        """Write the pending position of ``layer``; returns keys and values up to it."""  # noqa:E501
        if self.__length >= self.__keys[layer].shape[1]:
            self.__keys[layer] = np.concatenate([self.__keys[layer], np.zeros_like(self.__keys[layer])], axis=1)  # noqa:E501
            self.__values[layer] = np.concatenate([self.__values[layer], np.zeros_like(self.__values[layer])], axis=1)  # noqa:E501
        self.__keys[layer][:, self.__length] = key.reshape(self.__shape)
        self.__values[layer][:, self.__length] = value.reshape(self.__shape)
        end = self.__length + 1
        return self.__keys[layer][:, :end], self.__values[layer][:, :end]

    def advance(self) -> None:
        self.__length += 1


class PolicyNet():
    """Transformer state encoder, causal decoder and actor/critic heads.

    Every parameter lives in one ordered registry; the trunk is everything
    outside ``head.``.
    """

    def __init__(self, config: Optional[PolicyConfig] = None, params: Optional[Params] = None):  # noqa:E501
        self.__config: PolicyConfig = config or PolicyConfig()
        self.__params: Params = params if params is not None else self._initialize()  # noqa:E501

    def _initialize(self) -> Params:
        cfg = self.__config
        rng = np.random.default_rng(cfg.seed)
        d = cfg.d_model
        params: Params = OrderedDict()

        def register(name: str, value: np.ndarray) -> None:
            params[name] = Tensor(value, requires_grad=True, dtype=np.float32)

        register("embed.cell", rng.normal(0.0, 1.0, size=(cfg.cell_vocab, d)))
        register("embed.proprio", rng.normal(0.0, 1.0, size=(cfg.proprio_vocab, d)))  # noqa:E501
        register("embed.instruction", rng.normal(0.0, 1.0, size=(cfg.instruction_vocab, d)))  # noqa:E501
        register("embed.position", rng.normal(0.0, 0.1, size=(cfg.tokens, d)))
        register("embed.state", rng.normal(0.0, 1.0, size=(d,)))
        for layer in range(cfg.encoder_layers):
            add_block(params, rng, f"encoder.{layer}", d, cfg.mlp_ratio)
        register("encoder.ln.gain", np.ones(d))
        register("encoder.ln.bias", np.zeros(d))
        # one extra row: the START symbol fed at an episode's first step
        register("decoder.action", rng.normal(0.0, 1.0, size=(cfg.action_count + 1, d)))  # noqa:E501
        for layer in range(cfg.decoder_layers):
            add_block(params, rng, f"decoder.{layer}", d, cfg.mlp_ratio)
        register("decoder.ln.gain", np.ones(d))
        register("decoder.ln.bias", np.zeros(d))
        register("head.actor.weight", rng.uniform(-ACTOR_HEAD_SCALE, ACTOR_HEAD_SCALE, size=(d, cfg.action_count)))  # noqa:E501
        register("head.actor.bias", np.zeros(cfg.action_count))
        register("head.critic.weight", rng.uniform(-CRITIC_HEAD_SCALE, CRITIC_HEAD_SCALE, size=(d, 1)))  # noqa:E501
        register("head.critic.bias", np.zeros(1))
        return params

    @property
    def config(self) -> PolicyConfig:
        return self.__config

    @property
    def params(self) -> Params:
        return self.__params

    @property
    def start_action(self) -> int:
        return self.__config.action_count

    @property
    def dtype(self) -> np.dtype:
        return self.__params["embed.state"].dtype

    def trunk_names(self) -> List[str]:
        return [name for name in self.__params if not name.startswith(HEAD_PREFIX)]  # noqa:E501

    def head_names(self) -> List[str]:
        return [name for name in self.__params if name.startswith(HEAD_PREFIX)]  # noqa:E501

    def parameters(self, names: Optional[Iterable[str]] = None) -> Dict[str, Tensor]:  # noqa:E501
        names = list(self.__params) if names is None else list(names)
        return OrderedDict((name, self.__params[name]) for name in names)

    def parameter_count(self) -> int:
        return int(sum(param.size for param in self.__params.values()))

    def zero_grad(self) -> None:
        for param in self.__params.values():
            param.zero_grad()

    def _check_tokens(self, tokens: np.ndarray) -> None:
        cfg = self.__config
        limits = ((0, WINDOW_TOKENS, cfg.cell_vocab),
                  (WINDOW_TOKENS, WINDOW_TOKENS + PROPRIO_TOKENS, cfg.proprio_vocab),  # noqa:E501
                  (WINDOW_TOKENS + PROPRIO_TOKENS, WINDOW_TOKENS + PROPRIO_TOKENS + INSTRUCTION_LENGTH, cfg.instruction_vocab))  # noqa:E501
        if tokens.shape[-1] != cfg.tokens - 1:
            raise ContractError(f"expected {cfg.tokens - 1} observation tokens, got {tokens.shape[-1]}")  # noqa:E501
        for start, stop, vocab in limits:
            part = tokens[..., start:stop]
            if part.size and (part.min() < 0 or part.max() >= vocab):
                raise ContractError(f"token out of vocabulary [0, {vocab}) at positions {start}..{stop - 1}")  # noqa:E501

    def encode_state(self, tokens) -> Tensor:
        """State vectors [B, d] for observation tokens [B, 60].

        Attention is non-causal over the observation tokens plus a trailing
        STATE token; instruction padding is masked out as keys.
        """
        cfg, p = self.__config, self.__params
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.ndim == 1:
            tokens = tokens[None]
        self._check_tokens(tokens)
        batch = tokens.shape[0]
        window = ops.embedding(p["embed.cell"], tokens[:, :WINDOW_TOKENS])
        proprio = ops.embedding(p["embed.proprio"], tokens[:, WINDOW_TOKENS:WINDOW_TOKENS + PROPRIO_TOKENS])  # noqa:E501
        words = ops.embedding(p["embed.instruction"], tokens[:, WINDOW_TOKENS + PROPRIO_TOKENS:])  # noqa:E501
        state = ops.matmul(Tensor(np.ones((batch, 1, 1), dtype=self.dtype)), ops.reshape(p["embed.state"], (1, cfg.d_model)))  # noqa:E501
        x = ops.add(ops.concat([window, proprio, words, state], axis=1), p["embed.position"])  # noqa:E501
        keys = np.ones((batch, cfg.tokens), dtype=bool)
        keys[:, WINDOW_TOKENS + PROPRIO_TOKENS:cfg.tokens - 1] = tokens[:, WINDOW_TOKENS + PROPRIO_TOKENS:] != 0  # noqa:E501
        bias = np.where(keys, 0.0, MASKED).astype(self.dtype)[:, None, None, :]
        for layer in range(cfg.encoder_layers):
            x = block(p, f"encoder.{layer}", x, cfg.encoder_heads, bias)
        out = ops.getitem(x, (slice(None), cfg.tokens - 1))
        return ops.layer_norm(out, p["encoder.ln.gain"], p["encoder.ln.bias"])  # noqa:E501

    def _decoder_inputs(self, states: Tensor, prev_actions: np.ndarray, steps: np.ndarray) -> Tensor:  # noqa:E501
        prev_actions = np.asarray(prev_actions, dtype=np.int64)
        steps = np.asarray(steps, dtype=np.int64)
        actions = ops.embedding(self.__params["decoder.action"], prev_actions)
        position = sinusoid(steps, self.__config.d_model).astype(self.dtype)
        return ops.add(ops.add(states, actions), position)

    def new_cache(self, offset: int = 0, episode: Any = None) -> KVCache:
        cfg = self.__config
        return KVCache(cfg.decoder_layers, cfg.decoder_heads, cfg.d_model // cfg.decoder_heads,  # noqa:E501
                       offset=offset, episode=episode, dtype=self.dtype)

    def decoder_step(self, state, prev_action: int, t: int, cache: KVCache, episode: Any = None) -> np.ndarray:  # noqa:E501
        """Belief [d] at step ``t`` of ``episode``; appends this step to ``cache``."""  # noqa:E501
        if episode != cache.episode:
            raise CacheDesyncError(f"cache belongs to episode {cache.episode!r}, not {episode!r}")  # noqa:E501
        if t != cache.next_step:
            raise CacheDesyncError(f"decoder step {t} does not follow cache at {cache.next_step}")  # noqa:E501
        cfg, p = self.__config, self.__params
        state = Tensor(np.asarray(getattr(state, "data", state), dtype=self.dtype).reshape(1, cfg.d_model))  # noqa:E501
        x = self._decoder_inputs(state, np.asarray([prev_action]), np.asarray([t]))  # noqa:E501
        for layer in range(cfg.decoder_layers):
            prefix = f"decoder.{layer}"
            q, k, v = project_qkv(p, prefix, x, cfg.decoder_heads)
            keys, values = cache.extend(layer, k.data, v.data)
            context = attend(q, Tensor(keys, dtype=self.dtype), Tensor(values, dtype=self.dtype), None)  # noqa:E501
            x = finish_block(p, prefix, x, context)
        cache.advance()
        belief = ops.layer_norm(x, p["decoder.ln.gain"], p["decoder.ln.bias"])
        return belief.data[0].copy()

    def full_forward(self, states: Tensor, prev_actions, steps, segments, past: Optional[KVCache] = None) -> Tensor:  # noqa:E501
        """Beliefs [T, d] for a stream of T consecutive steps.

        ``segments`` labels the episode of every step; attention is causal and
        never crosses a segment. ``past`` holds constant keys and values that
        precede the first segment.
        """
        cfg, p = self.__config, self.__params
        x = self._decoder_inputs(states, prev_actions, steps)
        history = 0 if past is None else past.length
        bias = segment_bias(np.asarray(segments), history)
        for layer in range(cfg.decoder_layers):
            prefix = f"decoder.{layer}"
            q, k, v = project_qkv(p, prefix, x, cfg.decoder_heads)
            if history:
                k = ops.concat([Tensor(past.keys(layer), dtype=self.dtype), k], axis=1)  # type: ignore[union-attr]  # noqa:E501
                v = ops.concat([Tensor(past.values(layer), dtype=self.dtype), v], axis=1)  # type: ignore[union-attr]  # noqa:E501
            x = finish_block(p, prefix, x, attend(q, k, v, bias))
        return ops.layer_norm(x, p["decoder.ln.gain"], p["decoder.ln.bias"])

    def replay(self, tokens, prev_actions, steps, episode: Any = None) -> KVCache:  # noqa:E501
        """Cache of an episode prefix recomputed under the current parameters."""  # noqa:E501
        steps = np.asarray(steps, dtype=np.int64)
        cache = self.new_cache(offset=int(steps[0]) if steps.size else 0, episode=episode)  # noqa:E501
        if steps.size:
            states = self.encode_state(tokens)
            for row, (action, t) in enumerate(zip(prev_actions, steps)):
                self.decoder_step(states.data[row], int(action), int(t), cache, episode)  # noqa:E501
        return cache

    def _head(self, name: str, beliefs) -> Tensor:
        beliefs = ops.tensor(beliefs)
        rows = beliefs if beliefs.ndim > 1 else ops.reshape(beliefs, (1, beliefs.shape[0]))  # noqa:E501
        out = linear(rows, self.__params[f"head.{name}.weight"], self.__params[f"head.{name}.bias"])  # noqa:E501
        return out if beliefs.ndim > 1 else ops.reshape(out, out.shape[1:])

    def actor_logits(self, beliefs) -> Tensor:
        return self._head("actor", beliefs)

    def value(self, beliefs) -> Tensor:
        """Critic values with the trailing unit axis dropped."""
        out = self._head("critic", beliefs)
        return ops.reshape(out, out.shape[:-1])

    def state_dict(self) -> Dict[str, np.ndarray]:
        return OrderedDict((name, param.data.copy()) for name, param in self.__params.items())  # noqa:E501

    def load_state_dict(self, tensors: Dict[str, np.ndarray]) -> None:
        if missing := [name for name in self.__params if name not in tensors]:
            raise CheckpointError(f"checkpoint lacks {len(missing)} tensors, first {missing[0]!r}")  # noqa:E501
        if extra := [name for name in tensors if name not in self.__params]:
            raise CheckpointError(f"checkpoint has unknown tensor {extra[0]!r}")  # noqa:E501
        for name, param in self.__params.items():
            if tensors[name].shape != param.shape:
                raise CheckpointError(f"{name}: checkpoint shape {tensors[name].shape} does not match {param.shape}")  # noqa:E501
            param.assign(tensors[name])

    def copy(self) -> "PolicyNet":
        """Deep copy with its own storage and empty gradients."""
        params: Params = OrderedDict((name, Tensor(param.data.copy(), requires_grad=True, dtype=param.dtype))  # noqa:E501
                                     for name, param in self.__params.items())  # noqa:E501
        return PolicyNet(self.__config, params)

    def astype(self, dtype) -> "PolicyNet":
        params: Params = OrderedDict((name, Tensor(param.data.copy(), requires_grad=True, dtype=dtype))  # noqa:E501
                                     for name, param in self.__params.items())  # noqa:E501
        return PolicyNet(self.__config, params)

    def save(self, path: str, provenance: Optional[Dict[str, Any]] = None) -> None:  # noqa:E501
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        checkpoint.save(path, self.state_dict())
        write_json(sidecar_path(path), {"config": self.__config.to_dict(), "vocabulary_hash": vocabulary_hash(),  # noqa:E501
                                        "provenance": copy.deepcopy(provenance or {})})  # noqa:E501
        logger.debug("saved {} parameters to {}", self.parameter_count(), path)

    @classmethod
    def load(cls, path: str, config: Optional[PolicyConfig] = None) -> "PolicyNet":  # noqa:E501
        tensors = checkpoint.load(path)
        meta = read_sidecar(path)
        if config is None:
            config = PolicyConfig.from_dict(meta["config"]) if meta else PolicyConfig()  # noqa:E501
        if meta and meta.get("vocabulary_hash") not in (None, vocabulary_hash()):  # noqa:E501
            raise CheckpointError(f"{path} was written for another token vocabulary")  # noqa:E501
        net = cls(config)
        net.load_state_dict(tensors)
        return net


def sidecar_path(path: str) -> str:
    return f"{path}.json"


def read_sidecar(path: str) -> Dict[str, Any]:
    meta = sidecar_path(path)
    return read_json(meta) if os.path.isfile(meta) else {}


def init_finetune(source, seed: int = 0) -> Tuple[PolicyNet, PolicyNet]:
    """Independent actor and critic networks from a pretrained policy.

    The actor is an exact copy. The critic copies the trunk too, but its
    value head is redrawn uniformly in [-0.01, 0.01].
    """
    pretrained = PolicyNet.load(source) if isinstance(source, str) else source
    actor = pretrained.copy()
    critic = pretrained.copy()
    rng = np.random.default_rng([seed, 17])
    for name in ("head.critic.weight", "head.critic.bias"):
        param = critic.params[name]
        param.assign(rng.uniform(-CRITIC_HEAD_SCALE, CRITIC_HEAD_SCALE, size=param.shape))  # noqa:E501
    return actor, critic
