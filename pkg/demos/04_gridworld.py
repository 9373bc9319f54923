"""Which robot is it? Sensor scheduling on the bundled 6x4 grid world.

Three robot types start in different cells and head for their own goals,
slipping sideways 20% of the time. Five sensors report the robot with 90%
probability when it is in range; the observer may read one sensor per step.
We train a memory-2 policy and compare it with the best of 50 random ones.

Pass a smaller iteration count as the first argument for a quicker run.
"""

import sys
import time

from activepercept import FiniteStatePolicy, TrainConfig, random_policy_search, train
from activepercept.gridworld import compile_gridworld, paper_environment
from activepercept.inference import support_forward
from activepercept.optimizer import estimate_entropy
from activepercept.simulator import sample_arrays

iterations = int(sys.argv[1]) if len(sys.argv) > 1 else 300
env = compile_gridworld(paper_environment())
hmm = env.hmm
print(f"{hmm.num_states} states, observations {list(hmm.observations)}")

t0 = time.perf_counter()
policy, log = train(hmm, FiniteStatePolicy.for_hmm(hmm, 2),
                    TrainConfig(iterations=iterations, log_every=max(1, iterations // 10)))
for e in log.entries:
    print(f"  iteration {e.iteration:5d}  batch entropy {e.entropy_bits:.3f}")
print(f"trained in {time.perf_counter() - t0:.0f}s")

search = random_policy_search(hmm, 10, 50, seed=0, memory_length=2)
trained_h, se = estimate_entropy(hmm, policy, 10, 10_000, seed=1)
print(f"H(S0 | Y): trained {trained_h:.3f} +- {se:.3f}, best random {search.entropy:.3f}")

for k, robot in enumerate(env.spec.robot_types):
    masses = []
    for p in (policy, search.policy):
        s0 = env.initial_state(k)
        batch = sample_arrays(hmm, p, 10, 2000, seed=10 + k, initial_state=s0)
        _, post = support_forward(hmm, batch.o, batch.a)
        masses.append(post[:, list(hmm.initial_support).index(s0)].mean())
    print(f"{robot.name}: P(true type | y) trained {masses[0]:.2f}, random {masses[1]:.2f}")
