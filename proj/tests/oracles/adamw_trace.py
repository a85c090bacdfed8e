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

"""torch.optim.AdamW trace on a scalar for the optimizer golden in test_optim."""

import torch

w = torch.tensor([0.5], dtype=torch.float64, requires_grad=True)
opt = torch.optim.AdamW([w], lr=0.1, betas=(0.9, 0.98), eps=1e-8, weight_decay=0.01)
for step in range(10):
    opt.zero_grad()
    loss = (w - 3.0) ** 2 + 0.3 * torch.sin(4.0 * w)
    loss.backward()
    opt.step()
    print(repr(w.item()))
