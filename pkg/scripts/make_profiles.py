"""Regenerate the synthetic device profiles bundled with the package.

The magnitudes are representative, not measurements: readout flips of a
few percent with two ~30% outliers, and per-coupling CNOT depolarizing
between 1% and 8%.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from noisebench.circuits import Topology, toronto_topology
from noisebench.qpu import save_profile, synthetic_profile

PATCH_QUBITS = (0, 1, 2, 3, 5, 8, 9, 11, 13, 14, 22, 24, 25, 26)


def patch_topology(full: Topology, qubits: tuple[int, ...]) -> Topology:
    edges = tuple((a, b) for a, b in full.edges if a in qubits and b in qubits)
    return Topology(qubits, edges)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default=Path(__file__).parent.parent
                        / "src" / "noisebench" / "profiles")
    args = parser.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    full = toronto_topology()
    save_profile(
        synthetic_profile("toronto27-synthetic", full, seed=2701,
                          outliers={13: 0.30, 15: 0.28}),
        out / "toronto27_synthetic.json",
    )
    save_profile(
        synthetic_profile("patch14-synthetic", patch_topology(full, PATCH_QUBITS),
                          seed=1401, cnot_range=(0.01, 0.05)),
        out / "patch14_synthetic.json",
    )
    save_profile(
        synthetic_profile("line6-synthetic", Topology.line(6), seed=601),
        out / "line6_synthetic.json",
    )
    print(f"profiles written to {out}")


if __name__ == "__main__":
    main()
