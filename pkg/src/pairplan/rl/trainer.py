"""GRPO training loop of the tree sampler."""

from collections.abc import Sequence
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from pairplan.exceptions import ConfigurationError, PairPlanIOError
from pairplan.nn import GradientSet, OptimizerState, adamw_step
from pairplan.parallel import ordered_map
from pairplan.sampler import PrefixRolloutValue, SamplerPolicy, sample_group
from pairplan.settings import ExperimentConfig
from pairplan.sim import Scenario, encode_scene, trajectory_pdms

from .objective import GroupSample, grpo_objective, update_beta

log = logging.getLogger(__name__)

LOG_COLUMNS = ["update", "scenario_batch", "mean_reward", "max_reward", "kl", "beta", "objective"]


def collect_group(
    policy: SamplerPolicy,
    scenario: Scenario,
    config: ExperimentConfig,
    rng: np.random.Generator,
) -> GroupSample:
    """Sample a group rooted at the expert and reward every member by PDMS."""
    reference = scenario.expert_trajectory
    features = encode_scene(scenario, config.net)
    value = PrefixRolloutValue(scenario, reference, config.metrics)
    members = sample_group(policy, reference, features, config.grpo.group_size, rng, value)
    rewards = ordered_map(
        lambda m: trajectory_pdms(scenario, m.trajectory, config.metrics), members
    )
    return GroupSample.build(scenario.id, reference, features, members, rewards)


def write_training_log(rows: Sequence[dict], path: Path | str) -> Path:
    """Write the per-update training log as CSV."""
    path = Path(path)
    frame = pd.DataFrame(list(rows), columns=LOG_COLUMNS)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format="%.6f")
    except OSError as err:
        raise PairPlanIOError("Cannot write training log", path) from err
    return path


def train_rl(
    suite: Sequence[Scenario],
    config: ExperimentConfig | None = None,
    policy: SamplerPolicy | None = None,
    seed: int | None = None,
    log_path: Path | str | None = None,
) -> SamplerPolicy:
    """Optimise the sampler with GRPO against simulator rewards.

    Every update snapshots the policy, samples one group per scenario of the
    batch, then runs `inner_epochs` ascent steps on the mean objective and
    adapts beta from the measured KL.

    Raises:
        ConfigurationError: If the suite is empty.

    """
    if not suite:
        raise ConfigurationError("Cannot train the sampler on an empty suite")
    config = config or ExperimentConfig()
    seed = config.seed if seed is None else seed
    grpo = config.grpo
    if policy is None:
        policy = SamplerPolicy.create(
            config.net,
            config.sampler,
            suite[0].horizon,
            suite[0].dt,
            config.simulator.speed_limit,
            seed,
        )
    rng = np.random.default_rng(seed)
    state = OptimizerState.create(policy.params, grpo.optim, grpo.updates * grpo.inner_epochs)
    beta = grpo.beta_init
    batch = min(grpo.batch_size, len(suite))
    order = rng.permutation(len(suite))
    cursor = 0
    rows: list[dict] = []

    for update in range(grpo.updates):
        if cursor + batch > len(suite):
            order = rng.permutation(len(suite))
            cursor = 0
        indices = order[cursor : cursor + batch]
        cursor += batch
        snapshot = policy
        groups = []
        for idx in indices:
            group_rng = np.random.default_rng(np.random.SeedSequence([seed, update, int(idx)]))
            groups.append(collect_group(snapshot, suite[idx], config, group_rng))
        active = [g for g in groups if not g.degenerate]
        if len(active) < len(groups):
            log.warning(
                "Update %d: %d of %d groups had no reward spread",
                update,
                len(groups) - len(active),
                len(groups),
            )

        objective, kl = 0.0, 0.0
        for _ in range(grpo.inner_epochs):
            if not active:
                break
            total = GradientSet.like(policy.params)
            objective, kl = 0.0, 0.0
            for group in active:
                result = grpo_objective(policy, group, beta, grpo.clip_eps)
                total.values += result.grads.values / len(active)
                objective += result.value / len(active)
                kl += result.kl / len(active)
            params, state = adamw_step(policy.params, total.scaled(-1.0), state)
            policy = policy.with_params(params)
        beta = update_beta(beta, kl, grpo.kl_target, grpo)

        rewards = np.concatenate([g.rewards for g in groups])
        row = {
            "update": update,
            "scenario_batch": ";".join(g.scenario_id for g in groups),
            "mean_reward": float(rewards.mean()),
            "max_reward": float(np.mean([g.rewards.max() for g in groups])),
            "kl": kl,
            "beta": beta,
            "objective": objective,
        }
        rows.append(row)
        log.info(
            "RL update %d: mean reward %.4f, group max %.4f, kl %.5f, beta %.4g",
            update,
            row["mean_reward"],
            row["max_reward"],
            kl,
            beta,
        )

    if log_path is not None:
        write_training_log(rows, log_path)
    policy = policy.with_params(policy.params)
    policy.metadata.update(
        {
            "updates": grpo.updates,
            "seed": seed,
            "beta": beta,
            "beta_trace": [r["beta"] for r in rows],
            "max_reward_curve": [r["max_reward"] for r in rows],
            "skipped_updates": state.skipped,
        }
    )
    return policy
