"""Simulated device endpoint with ground-truth injected noise.

A :class:`VirtualQPU` wraps a :class:`DeviceProfile` (topology + noise
model + base seed) behind a job interface with the same shape a hosted
device imposes: at most 900 circuits per job, at most 8192 shots, and
persisted job records.  Every characterization protocol in this package
runs against it, so the profile doubles as the closed-loop ground truth.
"""

from __future__ import annotations

import hashlib
import json
import logging
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .circuits import Circuit, Topology, circuit_from_json, serialize
from .paulis import ReadoutError
from .sim import Counts, NoiseModel, run_shots

log = logging.getLogger(__name__)

CIRCUITS_PER_JOB = 900
MAX_SHOTS = 8192


class JobError(RuntimeError):
    pass


@dataclass(frozen=True)
class DeviceProfile:
    """Topology plus the ground-truth noise the virtual device applies."""

    name: str
    topology: Topology
    noise: NoiseModel
    seed: int
    drift_readout_per_job: float = 0.0  # optional p0/p1 ramp; off by default

    def __post_init__(self):
        for a, b in self.topology.edges:
            key = ("CNOT", (a, b))
            if key not in self.noise.gates and key not in self.noise.overrotation:
                raise ValueError(f"profile {self.name!r} missing CNOT channel for edge ({a}, {b})")
        for q in self.topology.nodes:
            if q not in self.noise.readout:
                raise ValueError(f"profile {self.name!r} missing readout error for qubit {q}")

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "seed": self.seed,
            "topology": self.topology.to_json(),
            "noise": self.noise.to_json(),
        }
        if self.drift_readout_per_job:
            out["drift_readout_per_job"] = self.drift_readout_per_job
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "DeviceProfile":
        return cls(
            name=obj["name"],
            topology=Topology.from_json(obj["topology"]),
            noise=NoiseModel.from_json(obj["noise"]),
            seed=int(obj["seed"]),
            drift_readout_per_job=float(obj.get("drift_readout_per_job", 0.0)),
        )


def load_profile(path: str | Path) -> DeviceProfile:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    return DeviceProfile.from_json(obj)


def save_profile(profile: DeviceProfile, path: str | Path) -> None:
    Path(path).write_text(json.dumps(profile.to_json(), indent=1) + "\n")


@dataclass(frozen=True)
class JobRecord:
    job_id: str
    profile: str
    shots: int
    seed: int
    circuit_hashes: tuple[str, ...]
    results: tuple[Counts, ...]
    submitted_at: str
    finished_at: str

    def __post_init__(self):
        if len(self.results) != len(self.circuit_hashes):
            raise ValueError("one result per circuit required")
        if self.shots > MAX_SHOTS:
            raise ValueError(f"shots {self.shots} above the cap of {MAX_SHOTS}")

    def to_json(self) -> dict:
        return {
            "job_id": self.job_id,
            "profile": self.profile,
            "shots": self.shots,
            "seed": self.seed,
            "circuits": list(self.circuit_hashes),
            "results": [c.to_json() for c in self.results],
            "submitted_at": self.submitted_at,
            "finished_at": self.finished_at,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "JobRecord":
        return cls(
            job_id=obj["job_id"],
            profile=obj["profile"],
            shots=int(obj["shots"]),
            seed=int(obj["seed"]),
            circuit_hashes=tuple(obj["circuits"]),
            results=tuple(Counts.from_json(r) for r in obj["results"]),
            submitted_at=obj["submitted_at"],
            finished_at=obj["finished_at"],
        )


def circuit_hash(circuit: Circuit) -> str:
    return hashlib.sha256(serialize(circuit).encode()).hexdigest()[:16]


def derived_seed(base: int, index: int) -> int:
    return int(np.random.SeedSequence((base, index)).generate_state(1)[0])


def synthetic_profile(name: str, topology: Topology, seed: int,
                      readout_range: tuple[float, float] = (0.01, 0.05),
                      cnot_range: tuple[float, float] = (0.01, 0.08),
                      outliers: dict[int, float] | None = None) -> DeviceProfile:
    """Random but reproducible ground truth: per-qubit readout flips and one
    isotropic depolarizing parameter per directed coupling.

    `outliers` pins specific qubits to a given readout flip rate (both p0
    and p1), mimicking the occasional badly calibrated register element.
    """
    from .paulis import DepolarizingParams

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    readout = {}
    for q in topology.nodes:
        if outliers and q in outliers:
            readout[q] = ReadoutError(outliers[q], outliers[q])
        else:
            p0, p1 = rng.uniform(*readout_range, size=2)
            readout[q] = ReadoutError(float(p0), float(p1))
    gates = {}
    for a, b in topology.edges:
        gates[("CNOT", (a, b))] = DepolarizingParams(
            float(rng.uniform(*cnot_range)), (a, b)
        )
    return DeviceProfile(name, topology, NoiseModel(gates=gates, readout=readout), seed)


class VirtualQPU:
    """Job-oriented front end over the trajectory simulator.

    Per-circuit RNG streams are derived from (submission seed, circuit
    index), so two identical submissions return identical counts and the
    result is independent of job chunking.
    """

    def __init__(self, profile: DeviceProfile, store_dir: str | Path | None = None):
        self.profile = profile
        self.store_dir = Path(store_dir) if store_dir is not None else None
        self._memory: dict[str, JobRecord] = {}
        if self.store_dir is not None:
            (self.store_dir / "jobs").mkdir(parents=True, exist_ok=True)
            (self.store_dir / "circuits").mkdir(parents=True, exist_ok=True)

    # -- store ----------------------------------------------------------------

    def _jobs_done(self) -> int:
        if self.store_dir is None:
            return len(self._memory)
        return len(list((self.store_dir / "jobs").glob("*.json")))

    def _persist(self, record: JobRecord, circuits: list[Circuit]) -> None:
        self._memory[record.job_id] = record
        if self.store_dir is None:
            return
        for c, h in zip(circuits, record.circuit_hashes):
            path = self.store_dir / "circuits" / f"{h}.json"
            if not path.exists():
                path.write_text(serialize(c))
        (self.store_dir / "jobs" / f"{record.job_id}.json").write_text(
            json.dumps(record.to_json(), indent=1)
        )

    def fetch(self, job_id: str) -> JobRecord:
        if job_id in self._memory:
            return self._memory[job_id]
        if self.store_dir is not None:
            path = self.store_dir / "jobs" / f"{job_id}.json"
            if path.exists():
                return JobRecord.from_json(json.loads(path.read_text()))
        raise JobError(f"unknown job id {job_id!r}")

    def fetch_circuit(self, circuit_hash_: str) -> Circuit:
        if self.store_dir is None:
            raise JobError("no on-disk store configured")
        path = self.store_dir / "circuits" / f"{circuit_hash_}.json"
        if not path.exists():
            raise JobError(f"unknown circuit hash {circuit_hash_!r}")
        return circuit_from_json(json.loads(path.read_text()))

    # -- execution --------------------------------------------------------------

    def _drifted_noise(self, jobs_done: int) -> NoiseModel:
        ramp = self.profile.drift_readout_per_job
        if not ramp:
            return self.profile.noise
        bumped = {
            q: ReadoutError(min(r.p0 + ramp * jobs_done, 0.5), min(r.p1 + ramp * jobs_done, 0.5))
            for q, r in self.profile.noise.readout.items()
        }
        return replace(self.profile.noise, readout=bumped)

    def submit(self, circuits: list[Circuit], shots: int,
               seed: int | None = None) -> list[JobRecord]:
        """Run circuits in jobs of at most 900 at up to 8192 shots each."""
        if shots > MAX_SHOTS:
            raise JobError(f"shots {shots} above the per-circuit cap of {MAX_SHOTS}")
        if shots < 1:
            raise JobError("shots must be >= 1")
        if not circuits:
            raise JobError("no circuits submitted")
        base_seed = self.profile.seed if seed is None else seed
        records = []
        for start in range(0, len(circuits), CIRCUITS_PER_JOB):
            chunk = circuits[start:start + CIRCUITS_PER_JOB]
            submitted = datetime.now(timezone.utc).isoformat()
            noise = self._drifted_noise(self._jobs_done())
            results = []
            hashes = []
            for offset, circuit in enumerate(chunk):
                circuit_seed = derived_seed(base_seed, start + offset)
                results.append(run_shots(circuit, noise, shots, circuit_seed))
                hashes.append(circuit_hash(circuit))
            record = JobRecord(
                job_id=f"job-{uuid.uuid4().hex[:12]}",
                profile=self.profile.name,
                shots=shots,
                seed=base_seed,
                circuit_hashes=tuple(hashes),
                results=tuple(results),
                submitted_at=submitted,
                finished_at=datetime.now(timezone.utc).isoformat(),
            )
            self._persist(record, chunk)
            records.append(record)
            log.info("job %s: %d circuits at %d shots", record.job_id, len(chunk), shots)
        return records

    def run(self, circuits: list[Circuit], shots: int,
            seed: int | None = None) -> list[Counts]:
        """Submit and return the flat list of counts in circuit order."""
        records = self.submit(circuits, shots, seed=seed)
        return [c for r in records for c in r.results]
