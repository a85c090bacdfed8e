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

"""numpy/scipy reference for the log-mel and MCD goldens in test_audio."""

import numpy as np
from scipy.fft import dct

SR, FRAME, HOP, NFFT, BINS, FLOOR = 16000, 800, 200, 1024, 80, 1e-5


def htk(f):
    return 2595.0 * np.log10(1.0 + f / 700.0)


def inv_htk(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def fbank():
    edges = inv_htk(np.linspace(htk(0.0), htk(SR / 2), BINS + 2))
    f = np.arange(NFFT // 2 + 1) * SR / NFFT
    l, c, r = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = np.where((f > l) & (f <= c), (f - l) / (c - l), 0.0)
    down = np.where((f > c) & (f < r), (r - f) / (r - c), 0.0)
    return up + down, edges[1:-1]


def logmel(x):
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(FRAME) / FRAME)
    n = (len(x) - FRAME) // HOP + 1
    frames = np.stack([x[i * HOP:i * HOP + FRAME] * w for i in range(n)])
    mag = np.abs(np.fft.rfft(frames, NFFT))
    fb, _ = fbank()
    return np.log(np.maximum(mag @ fb.T, FLOOR))


def main():
    t = np.arange(SR) / SR
    mel = logmel(0.5 * np.sin(2 * np.pi * 440.0 * t))
    _, centres = fbank()
    print("frames", mel.shape[0])
    print("argmax", int(np.argmax(mel[10])), "nearest", int(np.argmin(abs(centres - 440))))
    for b in (3, 7, 40):
        print(f"mel[10][{b}] = {mel[10][b]!r}")
    # MCD between two ramps.
    a = np.array([[0.1 * i + 0.01 * f for i in range(BINS)] for f in range(3)])
    b = np.array([[np.sin(0.3 * i + f) for i in range(BINS)] for f in range(3)])
    ca, cb = dct(a, type=2, norm="ortho", axis=1), dct(b, type=2, norm="ortho", axis=1)
    d = (10 / np.log(10)) * np.sqrt(2 * ((ca[:, 1:14] - cb[:, 1:14]) ** 2).sum(1))
    print("mcd", repr(d.mean()))


if __name__ == "__main__":
    main()
