"""A small end-to-end demo of pairplan.

It generates a handful of scenarios, trains tiny IL, sampler and reward
world model networks on them and compares the IL plan with the PaIR plan
of every scenario by its simulator PDMS.
"""

import logging
import sys

from pairplan.il import il_forward, train_il
from pairplan.pipeline import plan
from pairplan.rl import train_rl
from pairplan.rwm import train_rwm
from pairplan.settings import (
    ExperimentConfig,
    GrpoConfig,
    IlConfig,
    NetConfig,
    RwmConfig,
)
from pairplan.sim import build_suite, encode_scene, trajectory_pdms

log = logging.getLogger()
log.setLevel(logging.INFO)
log.addHandler(logging.StreamHandler(sys.stdout))


def main() -> None:
    """Train the three networks on a toy suite and report per-scenario PDMS."""
    config = ExperimentConfig(
        net=NetConfig(token_dim=16, feature_dim=96, heads=2, hidden_dim=32, feature_pool=4),
        il=IlConfig(epochs=20, batch_size=4),
        grpo=GrpoConfig(updates=10, batch_size=2, group_size=8),
        rwm=RwmConfig(epochs=20, batch_size=32),
    )
    suite = build_suite(
        config.suite.families,
        2,
        config.seed,
        config.suite.corrupted_fraction,
        config.simulator,
        config.metrics,
    )
    log.info("Generated %d scenarios", len(suite))

    il = train_il(suite, config)
    sampler = train_rl(suite, config)
    rwm = train_rwm(suite, sampler, config)

    for scenario in suite:
        il_plan = il_forward(il, encode_scene(scenario, config.net))
        pair_plan = plan(scenario, il, sampler, rwm, 1, config, seed=config.seed)
        log.info(
            "%s: IL %.3f, PaIR %.3f",
            scenario.id,
            trajectory_pdms(scenario, il_plan, config.metrics),
            trajectory_pdms(scenario, pair_plan, config.metrics),
        )


if __name__ == "__main__":
    main()
