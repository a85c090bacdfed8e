# Copyright 2026 The mftts Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Golden CFM loss for the tiny linear field in test_flow.cpp."""

import numpy as np

from mtrng import Rng

wrng = Rng(8)
w = np.array(wrng.randn(5, 5, 0.3))
b = np.array(wrng.randn(1, 5, 0.3))
drng = Rng(9)
x1s = [np.array(drng.randn(4, 5)) for _ in range(3)]

rng = Rng(42)
losses = []
for x1 in x1s:
    x0 = np.array(rng.randn(*x1.shape))
    t = rng.uniform()
    xt = (1 - t) * x0 + t * x1
    v = xt @ w + t * b
    losses.append(np.mean((v - (x1 - x0)) ** 2))
print(repr(float(np.mean(losses))))
