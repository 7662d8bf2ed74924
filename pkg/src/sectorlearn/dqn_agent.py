"""Epsilon-greedy double-DQN agent with one network and replay buffer per sector.

A single-sector agent is simply the ``n_sectors == 1`` case: one exploration
coin, one network, one buffer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ArchitectureMismatch, InsufficientSamples
from .neural import (
    AdamState, LayerSpec, QNetwork, adam_arrays, adam_step, copy_weights, load_adam_arrays,
    load_net_arrays, net_arrays,
)


@dataclass(frozen=True)
class EpsilonSchedule:
    eps_max: float = 1.0
    eps_min: float = 1e-6
    decay_rate: float = 5e-4

    def __post_init__(self):
        if not 0.0 <= self.eps_min <= self.eps_max <= 1.0:
            raise ValueError("need 0 <= eps_min <= eps_max <= 1")
        if self.decay_rate < 0:
            raise ValueError("decay_rate must be non-negative")


def epsilon_at(schedule: EpsilonSchedule, t: int) -> float:
    return max(schedule.eps_min, schedule.eps_max * math.exp(-schedule.decay_rate * t))


@dataclass
class Experience:
    state: np.ndarray
    action: int
    reward: int
    next_state: np.ndarray
    terminal: bool = False


class ReplayBuffer:
    """Fixed-capacity FIFO ring of experiences with uniform sampling (with replacement)."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.size = 0
        self.head = 0  # slot the next store writes
        self._s = self._s2 = None
        self._a = np.zeros(self.capacity, dtype=np.int64)
        self._r = np.zeros(self.capacity, dtype=np.float64)
        self._t = np.zeros(self.capacity, dtype=bool)

    def __len__(self) -> int:
        return self.size

    def _alloc(self, shape, dtype):
        self._s = np.zeros((self.capacity,) + tuple(shape), dtype=dtype)
        self._s2 = np.zeros_like(self._s)

    def store(self, exp: Experience) -> None:
        state = np.asarray(exp.state)
        if self._s is None:
            self._alloc(state.shape, state.dtype)
        i = self.head
        self._s[i] = state
        self._s2[i] = exp.next_state
        self._a[i] = exp.action
        self._r[i] = exp.reward
        self._t[i] = exp.terminal
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _slots(self) -> np.ndarray:
        """Physical slots ordered oldest first."""
        start = (self.head - self.size) % self.capacity
        return (start + np.arange(self.size)) % self.capacity

    def _experience(self, slot: int) -> Experience:
        return Experience(self._s[slot].copy(), int(self._a[slot]), self._r[slot].item(),
                          self._s2[slot].copy(), bool(self._t[slot]))

    def entries(self) -> list[Experience]:
        return [self._experience(s) for s in self._slots()]

    def sample_indices(self, batch: int, rng: np.random.Generator, min_size: int | None = None) -> np.ndarray:
        """Uniform draw with replacement. Raises unless at least ``min_size`` (default ``batch``) are held."""
        need = batch if min_size is None else max(1, min_size)
        if self.size < need:
            raise InsufficientSamples(f"buffer holds {self.size} experiences, batch needs {need}")
        return self._slots()[rng.integers(0, self.size, size=batch)]

    def sample(self, batch: int, rng: np.random.Generator, min_size: int | None = None) -> list[Experience]:
        return [self._experience(s) for s in self.sample_indices(batch, rng, min_size)]

    def batch_arrays(self, slots: np.ndarray):
        return self._s[slots], self._a[slots], self._r[slots], self._s2[slots], self._t[slots]

    def to_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        slots = self._slots()
        out = {f"{prefix}/a": self._a[slots], f"{prefix}/r": self._r[slots], f"{prefix}/t": self._t[slots]}
        if self._s is not None:
            out[f"{prefix}/s"] = self._s[slots]
            out[f"{prefix}/s2"] = self._s2[slots]
        return out

    def load_arrays(self, arrays, prefix: str) -> None:
        a = np.asarray(arrays[f"{prefix}/a"])
        n = len(a)
        if n > self.capacity:
            raise ValueError(f"stored buffer of {n} exceeds capacity {self.capacity}")
        self.size, self.head = n, n % self.capacity
        if n:
            s = np.asarray(arrays[f"{prefix}/s"])
            self._alloc(s.shape[1:], s.dtype)
            self._s[:n] = s
            self._s2[:n] = arrays[f"{prefix}/s2"]
        self._a[:n] = a
        self._r[:n] = arrays[f"{prefix}/r"]
        self._t[:n] = arrays[f"{prefix}/t"]


def greedy(q: np.ndarray) -> int:
    """Argmax with ties going to the lowest index."""
    return int(np.argmax(q))


def select_action(net: QNetwork, state, epsilon: float, rng: np.random.Generator) -> int:
    if rng.random() <= epsilon:
        return int(rng.integers(net.n_outputs))
    return greedy(net.forward(state))


def td_targets(eval_net: QNetwork, target_net: QNetwork, rewards, next_states, terminals,
               gamma: float, double: bool = True) -> np.ndarray:
    rewards = np.asarray(rewards, dtype=np.float64)
    if gamma == 0.0:
        return rewards.copy()
    q_target = target_net.forward(next_states)
    if double:
        chosen = np.argmax(eval_net.forward(next_states), axis=1)
    else:
        chosen = np.argmax(q_target, axis=1)
    boot = q_target[np.arange(len(rewards)), chosen]
    return np.where(np.asarray(terminals, dtype=bool), rewards, rewards + gamma * boot)


def td_target(eval_net: QNetwork, target_net: QNetwork, exp: Experience, gamma: float,
              double: bool = True) -> float:
    """Bootstrapped target from the *next* state; terminal experiences return the reward."""
    if eval_net.architecture() != target_net.architecture():
        raise ArchitectureMismatch("evaluation and target networks differ")
    if exp.terminal:
        return float(exp.reward)
    ns = np.asarray(exp.next_state)[None]
    return float(td_targets(eval_net, target_net, [exp.reward], ns, [False], gamma, double)[0])


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 1e-4
    learning_rate: float = 1e-3
    batch_size: int = 32
    replay_capacity: int = 10_000
    target_sync_steps: int = 100
    double_dqn: bool = True
    shared_exploration: bool = True
    epsilon: EpsilonSchedule = EpsilonSchedule()


class DQNAgent:
    """M independent learners sharing one exploration schedule and step counter."""

    def __init__(
        self,
        n_beams: Sequence[int],
        state_shape: Sequence[int],
        layers_for: Callable[[int], list[LayerSpec]],
        config: AgentConfig = AgentConfig(),
        init_rng: np.random.Generator | None = None,
        rng: np.random.Generator | None = None,
        dtype=np.float64,
    ):
        self.config = config
        self.n_beams = tuple(int(j) for j in n_beams)
        self.rng = rng if rng is not None else np.random.default_rng()
        init_rng = init_rng if init_rng is not None else np.random.default_rng()
        self.eval_nets, self.target_nets, self.adams, self.buffers = [], [], [], []
        for J in self.n_beams:
            net = QNetwork(state_shape, layers_for(J), init_rng, dtype=dtype)
            target = QNetwork(state_shape, layers_for(J), dtype=dtype)
            copy_weights(net, target)
            self.eval_nets.append(net)
            self.target_nets.append(target)
            self.adams.append(AdamState.for_params(net.params(), learning_rate=config.learning_rate))
            self.buffers.append(ReplayBuffer(config.replay_capacity))
        self.step = 0
        self.last_loss = [float("nan")] * self.n_sectors

    @property
    def n_sectors(self) -> int:
        return len(self.n_beams)

    @property
    def total_outputs(self) -> int:
        return sum(net.n_outputs for net in self.eval_nets)

    def epsilon(self) -> float:
        return epsilon_at(self.config.epsilon, self.step)

    def greedy_actions(self, state) -> tuple[int, ...]:
        return tuple(greedy(net.forward(state)) for net in self.eval_nets)

    def act(self, state, epsilon: float | None = None) -> tuple[int, ...]:
        eps = self.epsilon() if epsilon is None else epsilon
        if self.config.shared_exploration:
            if self.rng.random() <= eps:
                return tuple(int(self.rng.integers(J)) for J in self.n_beams)
            return self.greedy_actions(state)
        return tuple(select_action(net, state, eps, self.rng) for net in self.eval_nets)

    def remember(self, state, actions, reward, next_state, terminal=False) -> None:
        for buf, a in zip(self.buffers, actions):
            buf.store(Experience(state, int(a), reward, next_state, terminal))

    def learn(self) -> None:
        cfg = self.config
        for m, (net, target, adam, buf) in enumerate(zip(self.eval_nets, self.target_nets, self.adams, self.buffers)):
            if len(buf) < cfg.batch_size:
                continue
            S, A, R, S2, T = buf.batch_arrays(buf.sample_indices(cfg.batch_size, self.rng))
            y = td_targets(net, target, R, S2, T, cfg.gamma, cfg.double_dqn)
            self.last_loss[m], grads = net.loss_and_grads(S, A, y)
            adam_step(adam, net.params(), grads)

    def finish_step(self) -> None:
        self.step += 1
        if self.step % self.config.target_sync_steps == 0:
            for net, target in zip(self.eval_nets, self.target_nets):
                copy_weights(net, target)

    # -- checkpoint support

    def to_arrays(self, include_buffers: bool = True) -> dict[str, np.ndarray]:
        out = {"agent/step": np.array(self.step, dtype="<i8")}
        for m in range(self.n_sectors):
            out.update(net_arrays(self.eval_nets[m], f"eval{m}"))
            out.update(net_arrays(self.target_nets[m], f"target{m}"))
            out.update(adam_arrays(self.adams[m], f"adam{m}"))
            if include_buffers:
                out.update(self.buffers[m].to_arrays(f"buffer{m}"))
        return out

    def load_arrays(self, arrays, load_optimizer: bool = True) -> None:
        for m in range(self.n_sectors):
            load_net_arrays(self.eval_nets[m], arrays, f"eval{m}")
            load_net_arrays(self.target_nets[m], arrays, f"target{m}")
            if load_optimizer:
                self.step = int(arrays["agent/step"])
                load_adam_arrays(self.adams[m], arrays, f"adam{m}")
                if f"buffer{m}/a" in arrays:
                    self.buffers[m].load_arrays(arrays, f"buffer{m}")


@dataclass
class StepOutcome:
    actions: tuple[int, ...]
    reward: int
    next_state: np.ndarray
    epsilon: float
    info: dict


EnvStep = Callable[[tuple[int, ...]], tuple[int, np.ndarray, bool, dict]]


def train_step_multi(agent: DQNAgent, state: np.ndarray, env_step: EnvStep) -> StepOutcome:
    """Act, observe, store in every sector's buffer, train each sector, maybe sync targets."""
    eps = agent.epsilon()
    actions = agent.act(state, eps)
    reward, next_state, terminal, info = env_step(actions)
    agent.remember(state, actions, reward, next_state, terminal)
    agent.learn()
    agent.finish_step()
    return StepOutcome(actions, reward, next_state, eps, info)


def train_step_single(agent: DQNAgent, state: np.ndarray, env_step: EnvStep) -> StepOutcome:
    if agent.n_sectors != 1:
        raise ValueError(f"single-sector step on an agent with {agent.n_sectors} sectors")
    return train_step_multi(agent, state, env_step)
