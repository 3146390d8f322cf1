"""Benchmark orchestration: run targets on the virtual device, simulate every
model, and report TVDs against noiseless and self-simulation baselines."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from .circuits import Circuit, GhzMapping, build_bell, build_bv, build_ghz, default_ghz_mapping
from .metrics import bv_accuracy, fit_exp_decay, ghz_expected_rate, tvd, tvd_error
from .qpu import VirtualQPU, derived_seed
from .sim import Counts, ExactModeCapExceeded, NoiseModel, run_exact, run_shots
from .gst import GSTEstimate
from .sim import simulate_gst_model

log = logging.getLogger(__name__)

NOISELESS = "noiseless"
SELF_SIM = "self-sim"


class CoverageError(RuntimeError):
    pass


@dataclass(frozen=True)
class BenchTargets:
    """Which circuits the benchmark runs."""

    ghz_sizes: tuple[int, ...] = ()
    bv_secrets: tuple[str, ...] = ()
    bell_pairs: tuple[tuple[int, int], ...] = ()
    ghz_mapping: GhzMapping | None = None
    bv_data_qubits: tuple[int, ...] = (22, 24, 26)
    bv_oracle: int = 25

    def circuits(self) -> list[tuple[str, Circuit]]:
        mapping = self.ghz_mapping or default_ghz_mapping()
        out = []
        for c, t in self.bell_pairs:
            out.append((f"bell:{c}-{t}", build_bell(c, t)))
        for n in self.ghz_sizes:
            out.append((f"ghz:{n}", build_ghz(n, mapping=mapping)))
        for secret in self.bv_secrets:
            out.append((f"bv:{secret}", build_bv(secret, self.bv_data_qubits, self.bv_oracle)))
        if not out:
            raise ValueError("no benchmark targets selected")
        return out


@dataclass(frozen=True)
class BenchRow:
    target: str
    model: str
    tvd: float
    dtvd: float
    shots: int
    runtime_s: float


@dataclass(frozen=True)
class BenchmarkReport:
    rows: tuple[BenchRow, ...]
    decays: dict[str, tuple[float, float, float]] = field(default_factory=dict)
    bv_accuracies: dict[str, dict[str, float]] = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def row(self, target: str, model: str) -> BenchRow:
        for r in self.rows:
            if r.target == target and r.model == model:
                return r
        raise KeyError((target, model))

    def series(self, model: str, prefix: str = "ghz:") -> list[tuple[str, float]]:
        return [(r.target, r.tvd) for r in self.rows
                if r.model == model and r.target.startswith(prefix)]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["target", "model", "tvd", "dtvd", "shots", "runtime_s"])
            for r in self.rows:
                writer.writerow([r.target, r.model, f"{r.tvd:.6f}", f"{r.dtvd:.6f}",
                                 r.shots, f"{r.runtime_s:.4f}"])

    def to_plot_json(self) -> dict:
        targets = sorted({r.target for r in self.rows})
        models = sorted({r.model for r in self.rows})
        series = {}
        for m in models:
            by_target = {r.target: r.tvd for r in self.rows if r.model == m}
            series[m] = [by_target.get(t) for t in targets]
        return {
            "targets": targets,
            "series": series,
            "decays": {k: list(v) for k, v in self.decays.items()},
            "bv_accuracies": self.bv_accuracies,
            "provenance": self.provenance,
        }

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.to_csv(out / "report.csv")
        (out / "plot_data.json").write_text(json.dumps(self.to_plot_json(), indent=1))


ModelLike = NoiseModel | GSTEstimate


def _model_prediction(circuit: Circuit, model: ModelLike, shots: int,
                      seed: int, exact_cap: int):
    if isinstance(model, GSTEstimate):
        return simulate_gst_model(circuit, model), True
    try:
        return run_exact(circuit, model, cap=exact_cap), True
    except ExactModeCapExceeded:
        return run_shots(circuit, model, shots, seed), False


def bench_compare(qpu: VirtualQPU, models: dict[str, ModelLike], targets: BenchTargets,
                  shots: int = 8192, seed: int = 0, exact_cap: int = 12,
                  trim: tuple[int, ...] | None = None) -> BenchmarkReport:
    """TVD of every model against the device for every target circuit.

    Adds a noiseless baseline and a self-simulation baseline (an
    independent rerun of the same device with a fresh seed).  `trim`
    marginalizes GHZ targets to the given measured positions in extra
    ``[trim]`` rows.  Raises CoverageError when a model says nothing about
    a hard gate or a measured qubit of some target.
    """
    named = targets.circuits()
    gaps = []
    for model_name, model in models.items():
        if not isinstance(model, NoiseModel):
            continue
        for target_name, circuit in named:
            for gap in model.coverage_gaps(circuit):
                gaps.append(f"{model_name} / {target_name}: {gap}")
    if gaps:
        raise CoverageError("benchmark models leave gaps:\n  " + "\n  ".join(gaps))

    circuits = [c for _, c in named]
    exp_records = qpu.submit(circuits, shots, seed=derived_seed(seed, 0))
    self_records = qpu.submit(circuits, shots, seed=derived_seed(seed, 1))
    experiment = [c for r in exp_records for c in r.results]
    selfsim = [c for r in self_records for c in r.results]
    job_ids = [r.job_id for r in exp_records + self_records]

    rows: list[BenchRow] = []
    bv_acc: dict[str, dict[str, float]] = {}

    def add_row(target: str, model_name: str, exp: Counts, pred):
        t0 = time.perf_counter()
        value = tvd(exp, pred)
        if isinstance(pred, Counts):
            err = tvd_error(exp, pred)
        else:
            err = tvd_error(exp, exp, model_exact=True)  # experiment-side shot noise only
        rows.append(BenchRow(target, model_name, value, err, shots,
                             time.perf_counter() - t0))

    for idx, (target_name, circuit) in enumerate(named):
        exp = experiment[idx]
        noiseless = run_exact(circuit, None)
        add_row(target_name, NOISELESS, exp, noiseless)
        add_row(target_name, SELF_SIM, exp, selfsim[idx])
        if target_name.startswith("bv:"):
            secret = target_name.split(":")[1]
            bv_acc.setdefault(target_name, {})["experiment"] = bv_accuracy(exp, secret)
        for model_name, model in models.items():
            pred_seed = derived_seed(seed, 1000 + idx)
            t0 = time.perf_counter()
            pred, exact_pred = _model_prediction(circuit, model, shots, pred_seed, exact_cap)
            runtime = time.perf_counter() - t0
            value = tvd(exp, pred)
            if exact_pred:
                err = tvd_error(exp, exp, model_exact=True)
            else:
                err = tvd_error(exp, pred)
            rows.append(BenchRow(target_name, model_name, value, err, shots, runtime))
            if target_name.startswith("bv:"):
                secret = target_name.split(":")[1]
                if isinstance(pred, Counts):
                    acc = bv_accuracy(pred, secret)
                else:
                    acc = pred.prob(secret)
                bv_acc[target_name][model_name] = acc
        if trim is not None and target_name.startswith("ghz:"):
            positions = list(trim)
            exp_t = exp.marginal(positions)
            add_row(f"{target_name}[trim]", NOISELESS, exp_t, noiseless.marginal(positions))
            add_row(f"{target_name}[trim]", SELF_SIM, exp_t, selfsim[idx].marginal(positions))

    decays = {}
    ghz_named = [(name, c) for name, c in named if name.startswith("ghz:")]
    if len(ghz_named) >= 2:
        sizes, rates = [], []
        for idx, (name, circuit) in enumerate(named):
            if not name.startswith("ghz:"):
                continue
            n = int(name.split(":")[1])
            rate = ghz_expected_rate(experiment[idx], n)
            if rate > 0:
                sizes.append(n)
                rates.append(rate)
        if len(sizes) >= 2:
            decays["experiment_ghz_rate"] = fit_exp_decay(sizes, rates)

    report = BenchmarkReport(
        tuple(rows), decays, bv_acc,
        provenance={"profile": qpu.profile.name, "seed": seed, "shots": shots,
                    "job_ids": job_ids},
    )
    return report
