"""Why the objective is not a belief-dependent reward.

Two equally likely initial states. The first observation reveals which one
we started in; after that the chain forgets and every observation is noise.
Observing "0" then "1" leaves the belief unchanged at the second step, yet
the entropy decrements along the path are 1 bit and then 0 bits. A reward
that depends only on the current belief would have to assign the same
belief two different values.
"""

import numpy as np

from activepercept import Hmm, ObservationRecord, entropy_given_observation, posterior
from activepercept.inference import entropy_bits

t = np.zeros((4, 4))
t[2, 0] = t[3, 1] = t[2, 2] = t[3, 3] = 1.0
e = np.array([[[1.0, 0.0, 0.5, 0.5],
               [0.0, 1.0, 0.5, 0.5]]])
hmm = Hmm(t, e, [0.5, 0.5, 0.0, 0.0], observations=["0", "1"], actions=["look"])

h_prev = entropy_bits(hmm.mu0[hmm.initial_support])
print(f"prior over initial states: {hmm.mu0[:2]}, entropy {h_prev:.1f} bit")
for n in (1, 2):
    record = ObservationRecord.from_symbols(hmm, ["0", "1"][:n], ["look"] * n)
    belief = posterior(hmm, None, record)
    h = entropy_given_observation(belief)
    print(f"after {n} observation(s): belief {belief.probs}, entropy {h:.1f}, "
          f"decrement {h_prev - h:.1f}")
    h_prev = h
