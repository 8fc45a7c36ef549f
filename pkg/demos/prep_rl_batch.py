"""Turn retained trajectories into an RL training batch with proxy prompts.

Every trajectory step that produced an image is a candidate sample: cut the
context just before the image, rebuild the dual prompts (full prompt so far
for T2I, last edit instruction for I2I), and score the target image with the
frozen reward pair. Sampling weights control the T2I/I2I mix and the bucket
distribution over prior-edit depth.
"""

import numpy as np

from clvr import (
    RewardInputs,
    SimEnv,
    SimEnvConfig,
    TaskMixWeights,
    build_rl_batch,
    proxy_reward,
    synthesize_dataset,
)

N_PROMPTS = 300
BATCH_SIZE = 24
SEED = 11


def main():
    env = SimEnv(
        SimEnvConfig(
            per_item_success_prob=0.75,
            judge_agreement_prob=0.8,
            master_seed=SEED,
        )
    )
    prompts = [f"scene number {i}" for i in range(N_PROMPTS)]
    trajectories, stats = synthesize_dataset(prompts, env.adapters(), 3, SEED)
    print(f"engine retained {stats.retained}/{stats.attempted} trajectories")

    weights = TaskMixWeights(t2i_weight=1.0, i2i_weight=1.0)
    rng = np.random.default_rng(SEED)
    batch = build_rl_batch(trajectories, rng, weights, n=BATCH_SIZE)

    n_t2i = sum(item.sample.t == 0 for item in batch)
    print(f"batch of {len(batch)}: {n_t2i} t2i, {len(batch) - n_t2i} i2i\n")

    for item in batch[:4]:
        scores = RewardInputs(
            item.sample.t,
            env.t2i_reward(item.prompts.p_t2i, item.target),
            None
            if item.sample.t == 0
            else env.i2i_reward(item.prompts.p_i2i, item.target),
        )
        print(f"t={item.sample.t}  target={item.target.id}")
        print(f"  p_t2i: {item.prompts.p_t2i[:68]}")
        if item.sample.t > 0:
            print(f"  p_i2i: {item.prompts.p_i2i[:68]}")
        print(f"  proxy reward: {proxy_reward(scores):.3f}")


if __name__ == "__main__":
    main()
