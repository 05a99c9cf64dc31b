"""Safe Q-learning agent with constraint networks and DRO-tightened costs,
plus a conventional DQN baseline.

The safe agent keeps one objective Q-network and one constraint network per
inequality constraint. Action selection is restricted to the set where every
constraint network is non-positive; training targets for the constraint
networks use a cost whose boundary is pulled into the safe region by an
offset computed from the networks' own TD-error distribution (see `dro`).

Environments are duck-typed: they expose `reset() -> state`,
`step(state, action_value) -> (next_state, reward, g_values, info)`,
`action_values`, and the input ranges `state_low/state_high` and
`action_low/action_high` used for min-max input normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .dro import DroOffset, WassersteinConfig, compute_offset


@dataclass(frozen=True)
class TransitionRecord:
    """One stored step; g holds the raw constraint values, never pre-offset."""

    state: np.ndarray
    action_index: int
    next_state: np.ndarray
    reward: float
    g: tuple[float, ...]
    terminal: bool = False


@dataclass(frozen=True)
class ActionChoice:
    index: int
    mode: str
    feasible_count: int
    fallback: bool


@dataclass(frozen=True)
class StepLog:
    step: int
    mode: str
    action_index: int
    action_value: float
    state: np.ndarray
    next_state: np.ndarray
    reward: float
    g: tuple[float, ...]
    c: tuple[float, ...]
    feasible_count: int
    fallback: bool
    info: dict


@dataclass
class FitReport:
    """Outcome of one refit: TD samples and offsets per constraint plus
    final training losses."""

    td_samples: list[np.ndarray] = field(default_factory=list)
    offsets: list[DroOffset] = field(default_factory=list)
    d_losses: list[float] = field(default_factory=list)
    q_loss: float = 0.0


def constraint_cost(g: float, q: float) -> float:
    """Tightened violation cost: 0 below the offset boundary, g + q above."""
    return 0.0 if g <= -q else g + q


def constraint_cost_array(g: np.ndarray, q: float) -> np.ndarray:
    return np.where(g <= -q, 0.0, g + q)


@dataclass(frozen=True)
class InputEncoder:
    """Min-max normalization of the concatenated (state, action) vector."""

    low: np.ndarray
    high: np.ndarray

    @classmethod
    def from_env(cls, env) -> "InputEncoder":
        low = np.append(np.asarray(env.state_low, dtype=float), env.action_low)
        high = np.append(np.asarray(env.state_high, dtype=float), env.action_high)
        if np.any(high <= low):
            raise ValueError("encoder ranges must have high > low")
        return cls(low, high)

    @property
    def width(self) -> int:
        return len(self.low)

    def encode(self, state: np.ndarray, action_value: float) -> np.ndarray:
        raw = np.append(np.asarray(state, dtype=float), action_value)
        return (raw - self.low) / (self.high - self.low)

    def encode_many(self, states: np.ndarray, action_values: np.ndarray) -> np.ndarray:
        raw = np.column_stack([states, action_values])
        return (raw - self.low) / (self.high - self.low)


class DrqAgent:
    """Constraint-aware Q-learning agent.

    The first episode of a run behaves like plain epsilon-greedy (no
    feasibility pruning); each refit afterwards re-derives the constraint
    costs from the stored raw g values and the current offsets, fits the
    constraint networks before the objective network, and recomputes the
    offsets from the fresh TD-error distributions.
    """

    def __init__(
        self,
        encoder: InputEncoder,
        action_values: np.ndarray,
        n_constraints: int,
        q_hidden: tuple[int, ...],
        d_hidden: tuple[int, ...],
        gamma: float,
        explore_prob: float,
        q_train: nn.TrainConfig,
        d_train: nn.TrainConfig,
        dro_cfg: WassersteinConfig,
        feasibility_tolerance: float | np.ndarray = 0.0,
        clamp_d_targets: bool = False,
        fit_sweeps: int = 3,
        td_scope: str = "episode",
        rng: np.random.Generator | None = None,
    ):
        if not 0 < gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0 <= explore_prob <= 1:
            raise ValueError("explore_prob must lie in [0, 1]")
        rng = rng or np.random.default_rng(0)
        self.encoder = encoder
        self.action_values = np.asarray(action_values, dtype=float)
        self.n_constraints = n_constraints
        self.gamma = gamma
        self.explore_prob = explore_prob
        self.q_train = q_train
        self.d_train = d_train
        self.dro_cfg = dro_cfg
        self.tolerance = np.broadcast_to(
            np.asarray(feasibility_tolerance, dtype=float), (n_constraints,)
        ).copy()
        self.clamp_d_targets = clamp_d_targets
        if fit_sweeps < 1:
            raise ValueError("fit_sweeps must be >= 1")
        self.fit_sweeps = fit_sweeps
        if td_scope not in ("episode", "store"):
            raise ValueError("td_scope must be 'episode' or 'store'")
        self.td_scope = td_scope
        self._fresh_from = 0  # store index where the newest records begin

        d_in = encoder.width
        self.q_params = nn.init_params(
            nn.LayerSpec((d_in, *q_hidden, 1)),
            replace(q_train, seed=int(rng.integers(2**31))),
        )
        self.d_params = [
            nn.init_params(
                nn.LayerSpec((d_in, *d_hidden, 1)),
                replace(d_train, seed=int(rng.integers(2**31))),
            )
            for _ in range(n_constraints)
        ]
        self._fit_seed = int(rng.integers(2**31))
        self._fit_count = 0

        self.offsets = [dro_cfg.support_diameter] * n_constraints
        self.offset_info: list[DroOffset | None] = [None] * n_constraints
        self.td_samples: list[np.ndarray] = [np.array([])] * n_constraints
        self.store: list[TransitionRecord] = []
        self.episodes_completed = 0

    # -- evaluation over the action grid ---------------------------------

    def _grid_inputs(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        n, a = len(states), len(self.action_values)
        return self.encoder.encode_many(
            np.repeat(states, a, axis=0), np.tile(self.action_values, n)
        )

    def d_values(self, states: np.ndarray) -> np.ndarray:
        """Constraint-network values, shape (n_constraints, n_states, n_actions)."""
        x = self._grid_inputs(states)
        n = x.shape[0] // len(self.action_values)
        return np.stack(
            [nn.forward_many(p, x).reshape(n, -1) for p in self.d_params]
        )

    def q_values(self, states: np.ndarray) -> np.ndarray:
        x = self._grid_inputs(states)
        n = x.shape[0] // len(self.action_values)
        return nn.forward_many(self.q_params, x).reshape(n, -1)

    def _feasibility(self, d_vals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Mask of feasible actions per state; rows with no feasible action
        collapse to the singleton minimizing ||D(s, a)|| (lowest index on
        ties, which argmin provides)."""
        mask = np.all(d_vals <= self.tolerance[:, None, None], axis=0)
        fallback = ~mask.any(axis=1)
        if fallback.any():
            norms = np.linalg.norm(d_vals[:, fallback, :], axis=0)
            mask[fallback, :] = False
            mask[np.flatnonzero(fallback), norms.argmin(axis=1)] = True
        return mask, fallback

    def feasible_actions(self, state: np.ndarray) -> tuple[np.ndarray, bool]:
        """Indices with every constraint network <= tolerance; never empty."""
        mask, fallback = self._feasibility(self.d_values(state[None, :]))
        return np.flatnonzero(mask[0]), bool(fallback[0])

    # -- action selection -------------------------------------------------

    @property
    def uses_mask(self) -> bool:
        return self.episodes_completed >= 1

    def _pick(
        self,
        candidates: np.ndarray,
        state: np.ndarray,
        exploring: bool,
        rng: np.random.Generator | None,
    ) -> int:
        if exploring:
            if rng is None:
                raise ValueError("exploring selection needs an rng")
            return int(candidates[rng.integers(len(candidates))])
        q = self.q_values(state[None, :])[0, candidates]
        return int(candidates[int(np.argmax(q))])  # first max: lowest index

    def select_action(
        self,
        state: np.ndarray,
        exploring: bool,
        rng: np.random.Generator | None = None,
        masked: bool = True,
    ) -> tuple[int, bool]:
        if masked:
            candidates, fallback = self.feasible_actions(state)
        else:
            candidates, fallback = np.arange(len(self.action_values)), False
        return self._pick(candidates, state, exploring, rng), fallback

    def action_choice(
        self, state: np.ndarray, exploring: bool, rng: np.random.Generator | None
    ) -> ActionChoice:
        if self.uses_mask:
            candidates, fallback = self.feasible_actions(state)
            mode = "fallback" if fallback else ("explore" if exploring else "greedy")
        else:
            candidates, fallback = np.arange(len(self.action_values)), False
            mode = "vanilla"
        idx = self._pick(candidates, state, exploring, rng)
        return ActionChoice(idx, mode, len(candidates), fallback)

    # -- training ----------------------------------------------------------

    def observe(self, record: TransitionRecord) -> None:
        self.store.append(record)

    def constraint_costs(self, g: tuple[float, ...]) -> tuple[float, ...]:
        return tuple(constraint_cost(gi, qi) for gi, qi in zip(g, self.offsets))

    def q_target(self, record: TransitionRecord) -> float:
        if record.terminal:
            return record.reward
        q_next = self.q_values(record.next_state[None, :])
        mask, _ = self._feasibility(self.d_values(record.next_state[None, :]))
        return record.reward + self.gamma * float(q_next[0, mask[0]].max())

    def d_target(self, record: TransitionRecord, constraint: int) -> float:
        cost = constraint_cost(record.g[constraint], self.offsets[constraint])
        if record.terminal:
            return cost
        d_next = self.d_values(record.next_state[None, :])
        mask, _ = self._feasibility(d_next)
        boot = float(d_next[constraint, 0, mask[0]].min())
        target = cost + self.gamma * boot
        return max(0.0, target) if self.clamp_d_targets else target

    def td_errors(self, constraint: int) -> np.ndarray:
        """TD residuals for one constraint network over the whole store,
        under current parameters and offsets."""
        if not self.store:
            raise ValueError("td_errors requires a nonempty store")
        (_, _, x_sa, next_states, _, g, terminal) = self._store_arrays()
        d_next = self.d_values(next_states)
        mask, _ = self._feasibility(d_next)
        boot = np.where(mask, d_next[constraint], np.inf).min(axis=1)
        cost = constraint_cost_array(g[:, constraint], self.offsets[constraint])
        target = cost + np.where(terminal, 0.0, self.gamma * boot)
        return target - nn.forward_many(self.d_params[constraint], x_sa)

    def _store_arrays(self):
        states = np.stack([r.state for r in self.store])
        action_vals = self.action_values[[r.action_index for r in self.store]]
        x_sa = self.encoder.encode_many(states, action_vals)
        next_states = np.stack([r.next_state for r in self.store])
        rewards = np.array([r.reward for r in self.store])
        g = np.array([r.g for r in self.store])
        terminal = np.array([r.terminal for r in self.store])
        return states, action_vals, x_sa, next_states, rewards, g, terminal

    def _next_fit_cfg(self, base: nn.TrainConfig) -> nn.TrainConfig:
        cfg = replace(base, seed=(self._fit_seed + self._fit_count) % 2**31)
        self._fit_count += 1
        return cfg

    def refit(self) -> FitReport:
        """One full update pass over the store.

        Constraint costs are recomputed from raw g under the current
        offsets; constraint networks fit first (fit_sweeps rounds of
        target-recompute + regression, since each round applies one Bellman
        contraction); TD errors and fresh offsets come from the final
        constraint networks; the objective network fits last, seeing the
        constraint networks only through the post-fit feasibility masks.
        """
        if not self.store:
            raise ValueError("refit requires a nonempty store")
        (_, _, x_sa, next_states, rewards, g, terminal) = self._store_arrays()
        not_term = ~terminal
        costs = np.column_stack(
            [constraint_cost_array(g[:, i], self.offsets[i]) for i in range(self.n_constraints)]
        )

        report = FitReport()
        d_losses = [0.0] * self.n_constraints
        for _ in range(self.fit_sweeps):
            d_next = self.d_values(next_states)
            mask, _ = self._feasibility(d_next)
            for i in range(self.n_constraints):
                boot = np.where(mask, d_next[i], np.inf).min(axis=1)
                target = costs[:, i] + np.where(not_term, self.gamma * boot, 0.0)
                if self.clamp_d_targets:
                    target = np.maximum(0.0, target)
                self.d_params[i], residuals = nn.fit(
                    self.d_params[i],
                    nn.LabeledDataset(x_sa, target),
                    self._next_fit_cfg(self.d_train),
                )
                d_losses[i] = float(np.mean(residuals**2))
        report.d_losses = d_losses

        # TD samples feeding the offset: the records gathered since the last
        # refit (td_scope="episode", the default) or the whole store
        fresh = slice(self._fresh_from, None)
        if self.td_scope == "store" or self._fresh_from >= len(self.store):
            fresh = slice(0, None)
        d_next_post = self.d_values(next_states)
        mask_post, _ = self._feasibility(d_next_post)
        for i in range(self.n_constraints):
            boot = np.where(mask_post, d_next_post[i], np.inf).min(axis=1)
            td = (
                costs[:, i]
                + np.where(not_term, self.gamma * boot, 0.0)
                - nn.forward_many(self.d_params[i], x_sa)
            )[fresh]
            self.td_samples[i] = td
            info = compute_offset(td, self.dro_cfg)
            self.offsets[i] = info.offset
            self.offset_info[i] = info
            report.td_samples.append(td)
            report.offsets.append(info)
        self._fresh_from = len(self.store)

        q_loss = 0.0
        for _ in range(self.fit_sweeps):
            q_next = self.q_values(next_states)
            q_boot = np.where(mask_post, q_next, -np.inf).max(axis=1)
            q_target = rewards + np.where(not_term, self.gamma * q_boot, 0.0)
            self.q_params, q_res = nn.fit(
                self.q_params,
                nn.LabeledDataset(x_sa, q_target),
                self._next_fit_cfg(self.q_train),
            )
            q_loss = float(np.mean(q_res**2))
        report.q_loss = q_loss
        return report

    def end_episode(self) -> FitReport:
        if self.episodes_completed == 0:
            # first fit of a run starts from the configured support diameter
            self.offsets = [self.dro_cfg.support_diameter] * self.n_constraints
        report = self.refit()
        self.episodes_completed += 1
        return report


class DqnAgent:
    """Conventional epsilon-greedy deep Q-learning over the full action grid,
    trained on the engineered reward r - 1(any g > 0)."""

    def __init__(
        self,
        encoder: InputEncoder,
        action_values: np.ndarray,
        n_constraints: int,
        hidden: tuple[int, ...],
        gamma: float,
        explore_prob: float,
        train: nn.TrainConfig,
        fit_sweeps: int = 3,
        rng: np.random.Generator | None = None,
    ):
        rng = rng or np.random.default_rng(0)
        self.encoder = encoder
        self.action_values = np.asarray(action_values, dtype=float)
        self.n_constraints = n_constraints
        self.gamma = gamma
        self.explore_prob = explore_prob
        self.train = train
        if fit_sweeps < 1:
            raise ValueError("fit_sweeps must be >= 1")
        self.fit_sweeps = fit_sweeps
        self.q_params = nn.init_params(
            nn.LayerSpec((encoder.width, *hidden, 1)),
            replace(train, seed=int(rng.integers(2**31))),
        )
        self._fit_seed = int(rng.integers(2**31))
        self._fit_count = 0
        self.store: list[TransitionRecord] = []
        self.episodes_completed = 0

    @property
    def uses_mask(self) -> bool:
        return False

    def q_values(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        n, a = len(states), len(self.action_values)
        x = self.encoder.encode_many(
            np.repeat(states, a, axis=0), np.tile(self.action_values, n)
        )
        return nn.forward_many(self.q_params, x).reshape(n, -1)

    def select_action(
        self,
        state: np.ndarray,
        exploring: bool,
        rng: np.random.Generator | None = None,
        masked: bool = False,
    ) -> tuple[int, bool]:
        candidates = np.arange(len(self.action_values))
        if exploring:
            if rng is None:
                raise ValueError("exploring selection needs an rng")
            return int(candidates[rng.integers(len(candidates))]), False
        q = self.q_values(state[None, :])[0]
        return int(np.argmax(q)), False

    def action_choice(
        self, state: np.ndarray, exploring: bool, rng: np.random.Generator | None
    ) -> ActionChoice:
        idx, _ = self.select_action(state, exploring, rng)
        mode = "explore" if exploring else "greedy"
        return ActionChoice(idx, mode, len(self.action_values), False)

    def observe(self, record: TransitionRecord) -> None:
        self.store.append(record)

    def constraint_costs(self, g: tuple[float, ...]) -> tuple[float, ...]:
        return tuple(1.0 if gi > 0 else 0.0 for gi in g)

    def refit(self) -> FitReport:
        if not self.store:
            raise ValueError("refit requires a nonempty store")
        states = np.stack([r.state for r in self.store])
        action_vals = self.action_values[[r.action_index for r in self.store]]
        x_sa = self.encoder.encode_many(states, action_vals)
        next_states = np.stack([r.next_state for r in self.store])
        g = np.array([r.g for r in self.store])
        terminal = np.array([r.terminal for r in self.store])
        reward_eng = np.array([r.reward for r in self.store]) - np.sum(g > 0, axis=1)
        q_loss = 0.0
        for _ in range(self.fit_sweeps):
            boot = self.q_values(next_states).max(axis=1)
            target = reward_eng + np.where(terminal, 0.0, self.gamma * boot)
            self._fit_count += 1
            self.q_params, res = nn.fit(
                self.q_params,
                nn.LabeledDataset(x_sa, target),
                replace(self.train, seed=(self._fit_seed + self._fit_count) % 2**31),
            )
            q_loss = float(np.mean(res**2))
        return FitReport(q_loss=q_loss)

    def end_episode(self) -> FitReport:
        report = self.refit()
        self.episodes_completed += 1
        return report


def run_episode(
    agent,
    env,
    horizon: int,
    rng: np.random.Generator,
    refit_per_step: bool = False,
) -> tuple[list[StepLog], FitReport]:
    """One learning episode: epsilon-greedy stepping (masked once the agent
    has fit at least once), transitions appended to the agent's store, and a
    refit at episode end."""
    state = env.reset()
    logs: list[StepLog] = []
    for t in range(1, horizon + 1):
        exploring = bool(rng.random() < agent.explore_prob)
        choice = agent.action_choice(state, exploring, rng)
        value = float(agent.action_values[choice.index])
        next_state, reward, g, info = env.step(state, value)
        agent.observe(
            TransitionRecord(state, choice.index, next_state, reward, g, t == horizon)
        )
        logs.append(
            StepLog(
                step=t,
                mode=choice.mode,
                action_index=choice.index,
                action_value=value,
                state=state,
                next_state=next_state,
                reward=reward,
                g=g,
                c=agent.constraint_costs(g),
                feasible_count=choice.feasible_count,
                fallback=choice.fallback,
                info=info,
            )
        )
        if refit_per_step:
            agent.refit()
        state = next_state
    return logs, agent.end_episode()


def run_greedy_eval(agent, env, horizon: int) -> list[StepLog]:
    """Greedy rollout without exploration, learning, or storage."""
    state = env.reset()
    logs: list[StepLog] = []
    for t in range(1, horizon + 1):
        choice = agent.action_choice(state, False, None)
        value = float(agent.action_values[choice.index])
        next_state, reward, g, info = env.step(state, value)
        logs.append(
            StepLog(
                step=t,
                mode=choice.mode,
                action_index=choice.index,
                action_value=value,
                state=state,
                next_state=next_state,
                reward=reward,
                g=g,
                c=agent.constraint_costs(g),
                feasible_count=choice.feasible_count,
                fallback=choice.fallback,
                info=info,
            )
        )
        state = next_state
    return logs
