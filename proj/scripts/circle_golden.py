# Copyright 2026 The Atlas Audit Authors
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
"""Golden top-hole persistence for fixtures/circle, from scratch in numpy.

kNN graph (union) -> dense pseudoinverse -> corrected resistance ->
full Vietoris-Rips boundary matrix over GF(2), reduced column by column.
Shares no code with the C++ library.
"""

import itertools
import json
import struct
import sys
from pathlib import Path

import numpy as np


def read_skmb(path):
    raw = Path(path).read_bytes()
    magic, version, n, d = struct.unpack_from("<4sIQI", raw, 0)
    assert magic == b"SKMB" and version == 1
    x = np.frombuffer(raw, dtype="<f4", count=n * d, offset=20).reshape(n, d)
    x = x.astype(np.float64)
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def knn_adjacency(x, k):
    n = len(x)
    dist = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)
    a = np.zeros((n, n))
    for i in range(n):
        order = sorted((j for j in range(n) if j != i), key=lambda j: (dist[i, j], j))
        for j in order[:k]:
            a[i, j] = a[j, i] = 1.0
    return a


def corrected_resistance(a):
    deg = a.sum(axis=1)
    lp = np.linalg.pinv(np.diag(deg) - a)
    diag = np.diag(lp)
    r = diag[:, None] + diag[None, :] - 2.0 * lp
    r = r - 1.0 / deg[:, None] - 1.0 / deg[None, :] + 2.0 * a / np.outer(deg, deg)
    np.fill_diagonal(r, 0.0)
    return np.maximum((r + r.T) / 2.0, 0.0)


def h1_pairs(dist):
    n = len(dist)
    simplices = [((0.0,), (v,)) for v in range(n)]
    for e in itertools.combinations(range(n), 2):
        simplices.append(((dist[e],), e))
    for t in itertools.combinations(range(n), 3):
        simplices.append(((max(dist[t[0], t[1]], dist[t[0], t[2]], dist[t[1], t[2]]),), t))
    simplices.sort(key=lambda s: (s[0][0], len(s[1]), s[1]))
    index = {s[1]: i for i, s in enumerate(simplices)}
    low_of = {}
    pairs = []
    for j, (value, simplex) in enumerate(simplices):
        if len(simplex) == 1:
            continue
        col = {index[f] for f in itertools.combinations(simplex, len(simplex) - 1)}
        while col and max(col) in low_of:
            col ^= low_of[max(col)]
        if col:
            low = max(col)
            low_of[low] = col
            if len(simplex) == 3:
                birth = simplices[low][0][0]
                if value[0] > birth:
                    pairs.append((birth, value[0]))
    return sorted(pairs, key=lambda p: p[1] - p[0], reverse=True)


def main():
    root = Path(sys.argv[1] if len(sys.argv) > 1 else "fixtures/circle")
    config = json.loads((root / "config.json").read_text())
    x = read_skmb(root / "embeddings.skmb")
    r = corrected_resistance(knn_adjacency(x, config["graph_k"]))
    pairs = h1_pairs(r)
    birth, death = pairs[0]
    golden = {
        "graph_k": config["graph_k"],
        "corrected": True,
        "top_birth": birth,
        "top_death": death,
        "top_persistence": death - birth,
        "runner_up_persistence": pairs[1][1] - pairs[1][0] if len(pairs) > 1 else 0.0,
        "n_pairs": len(pairs),
    }
    (root / "golden.json").write_text(json.dumps(golden, indent=2, sort_keys=True) + "\n")
    print(json.dumps(golden, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
