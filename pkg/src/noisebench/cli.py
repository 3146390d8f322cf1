"""Command-line surface: qpu, rc, edc, knr, gst, and bench subcommands."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench as bench_mod
from . import edc as edc_mod
from . import gst as gst_mod
from . import knr as knr_mod
from . import rc as rc_mod
from .circuits import (
    build_ghz,
    circuit_from_json,
    circuit_to_json,
    default_ghz_mapping,
    parse,
    serialize,
)
from .qpu import VirtualQPU, load_profile
from .sim import Counts, NoiseModel

log = logging.getLogger(__name__)


def _load_circuits(path: str) -> list:
    obj = json.loads(Path(path).read_text())
    if isinstance(obj, dict) and "circuits" in obj:
        obj = obj["circuits"]
    if isinstance(obj, dict):
        obj = [obj]
    return [circuit_from_json(c) for c in obj]


def _load_counts_list(path: str) -> list[Counts]:
    obj = json.loads(Path(path).read_text())
    if isinstance(obj, dict) and "counts_list" in obj:
        obj = obj["counts_list"]
    return [Counts.from_json(c) for c in obj]


def _write_counts_list(path: Path, counts: list[Counts]) -> None:
    path.write_text(json.dumps({"counts_list": [c.to_json() for c in counts]}, indent=1))


def _load_model(path: str) -> NoiseModel:
    obj = json.loads(Path(path).read_text())
    if "cnot" in obj and "readout" in obj:
        return edc_mod.EDCModel.from_json(obj).noise_model()
    return NoiseModel.from_json(obj)


# ---------------------------------------------------------------------------

def _cmd_qpu_submit(args) -> int:
    qpu = VirtualQPU(load_profile(args.profile), store_dir=args.store)
    circuits = _load_circuits(args.circuits)
    records = qpu.submit(circuits, args.shots, seed=args.seed)
    for r in records:
        print(f"{r.job_id}: {len(r.results)} circuits at {r.shots} shots")
    if args.out:
        _write_counts_list(Path(args.out), [c for r in records for c in r.results])
    return 0


def _cmd_qpu_fetch(args) -> int:
    qpu = VirtualQPU(load_profile(args.profile), store_dir=args.store)
    print(json.dumps(qpu.fetch(args.job_id).to_json(), indent=1))
    return 0


def _cmd_rc_compile(args) -> int:
    base = parse(Path(args.circuit).read_text())
    rcs = rc_mod.rc_set(base, args.n, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    members = []
    for i, c in enumerate(rcs.circuits):
        name = f"rc_{i:03d}.json"
        (out / name).write_text(serialize(c))
        members.append(name)
    manifest = {
        "base": circuit_to_json(base),
        "n_randomizations": rcs.n_randomizations,
        "seed": rcs.seed,
        "members": members,
    }
    (out / "rcset.json").write_text(json.dumps(manifest, indent=1))
    print(f"wrote {len(members)} twirled circuits to {out}")
    return 0


def _cmd_edc_characterize(args) -> int:
    qpu = VirtualQPU(load_profile(args.profile), store_dir=args.store)
    mode = edc_mod.SuiteMode.from_string(args.mode)
    model, _ = edc_mod.characterize(qpu, mode, shots=args.shots, seed=args.seed)
    Path(args.out).write_text(json.dumps(model.to_json(), indent=1))
    print(f"wrote {args.out} ({len(model.cnot)} couplings, {len(model.readout)} qubits)")
    return 0


def _cmd_knr_design(args) -> int:
    lengths = tuple(int(v) for v in args.lengths.split(","))
    config = knr_mod.KNRConfig(lengths, args.randomizations, args.shots)
    topology = None
    if args.profile:
        topology = load_profile(args.profile).topology
    sizes = _parse_range(args.ghz_sizes)
    specs = knr_mod.unique_cycles([build_ghz(n) for n in sizes])
    circuits, manifest = knr_mod.design_knr(specs, config, topology=topology, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "circuits.json").write_text(
        json.dumps({"circuits": [circuit_to_json(c) for c in circuits]}, indent=1))
    (out / "manifest.json").write_text(json.dumps(manifest.to_json(), indent=1))
    print(f"designed {len(circuits)} circuits for {len(specs)} cycles into {out}")
    return 0


def _cmd_knr_fit(args) -> int:
    manifest = knr_mod.KNRManifest.from_json(json.loads(Path(args.manifest).read_text()))
    counts = _load_counts_list(args.counts)
    topology = load_profile(args.profile).topology if args.profile else None
    fits = knr_mod.estimate_fidelities(manifest, counts)
    results = knr_mod.reconstruct(fits, topology)
    resolved = {}
    for spec in manifest.cycles:
        resolved[spec.id] = knr_mod.resolve_degeneracies(results[spec.id], spec.cycle)
    out = {
        cid: {
            **res.to_json(),
            "depolarizing_summary": knr_mod.depolarizing_summary(res),
        }
        for cid, res in resolved.items()
    }
    Path(args.out).write_text(json.dumps(out, indent=1))
    print(f"wrote {args.out} ({len(out)} cycles)")
    return 0


def _cmd_gst_design(args) -> int:
    gs = _gateset_for(args.gateset)
    circuits, manifest = gst_mod.design_gst(gs)
    spam_circuits, spam_manifest = gst_mod.design_spam(gs.n_qubits)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "circuits.json").write_text(json.dumps(
        {"circuits": [circuit_to_json(c) for c in circuits + spam_circuits]}, indent=1))
    (out / "manifest.json").write_text(json.dumps(
        {"gateset": args.gateset, "keys": [list(k) for k in manifest + spam_manifest]},
        indent=1))
    print(f"designed {len(circuits)} sequences + {len(spam_circuits)} preparations into {out}")
    return 0


def _cmd_gst_fit(args) -> int:
    mobj = json.loads(Path(args.manifest).read_text())
    gs = _gateset_for(mobj["gateset"])
    keys = [tuple(k) for k in mobj["keys"]]
    counts = _load_counts_list(args.counts)
    ds = gst_mod.collect(keys, counts, gs.n_qubits)
    est = gst_mod.lgst_reconstruct(ds, gs)
    Path(args.out).write_text(json.dumps(est.to_json(), indent=1))
    print(f"wrote {args.out} (gauge residual {est.gauge['residual']:.3e})")
    return 0


def _gateset_for(name: str) -> gst_mod.GateSet:
    if name == "1q":
        return gst_mod.single_qubit_gateset()
    if name == "2q":
        return gst_mod.two_qubit_gateset()
    if name == "2q-reduced":
        return gst_mod.two_qubit_gateset(kinds=("RX90", "RY90", "RZ90"))
    raise SystemExit(f"unknown gate set {name!r}; use 1q, 2q, or 2q-reduced")


def _parse_range(text: str) -> list[int]:
    lo, _, hi = text.partition("-")
    if hi:
        return list(range(int(lo), int(hi) + 1))
    return [int(lo)]


def _parse_targets(text: str, args) -> bench_mod.BenchTargets:
    ghz_sizes: list[int] = []
    bv_secrets: list[str] = []
    bells: list[tuple[int, int]] = []
    data_qubits = tuple(int(q) for q in args.bv_qubits.split(","))
    for part in text.split(","):
        kind, _, spec = part.partition(":")
        if kind == "ghz":
            ghz_sizes += _parse_range(spec)
        elif kind == "bv":
            if spec == "all":
                bv_secrets += [format(v, f"0{len(data_qubits)}b")
                               for v in range(2 ** len(data_qubits))]
            else:
                bv_secrets.append(spec)
        elif kind == "bell":
            if spec:
                c, t = (int(v) for v in spec.split("-"))
            else:
                c, t = (int(v) for v in args.bell.split(","))
            bells.append((c, t))
        else:
            raise SystemExit(f"unknown target {part!r}")
    return bench_mod.BenchTargets(
        ghz_sizes=tuple(ghz_sizes),
        bv_secrets=tuple(bv_secrets),
        bell_pairs=tuple(bells),
        ghz_mapping=default_ghz_mapping(),
        bv_data_qubits=data_qubits,
        bv_oracle=args.bv_oracle,
    )


def _cmd_bench_run(args) -> int:
    qpu = VirtualQPU(load_profile(args.profile), store_dir=args.store)
    models = {}
    for path in args.models.split(","):
        models[Path(path).stem] = _load_model(path)
    targets = _parse_targets(args.targets, args)
    trim = tuple(int(v) for v in args.trim.split(",")) if args.trim else None
    try:
        report = bench_mod.bench_compare(
            qpu, models, targets, shots=args.shots, seed=args.seed, trim=trim)
    except bench_mod.CoverageError as exc:
        print(exc, file=sys.stderr)
        return 2
    report.save(args.out)
    for row in report.rows:
        print(f"{row.target:>14}  {row.model:>12}  tvd={row.tvd:.4f} +/- {row.dtvd:.4f}")
    print(f"report written to {args.out}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisebench",
        description="Characterize a simulated noisy device and benchmark the fitted models.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="group", required=True)

    qpu = sub.add_parser("qpu", help="submit circuits to the virtual device")
    qpu_sub = qpu.add_subparsers(dest="cmd", required=True)
    submit = qpu_sub.add_parser("submit")
    submit.add_argument("--profile", required=True)
    submit.add_argument("--shots", type=int, default=8192)
    submit.add_argument("--seed", type=int, default=None)
    submit.add_argument("--store", default=None)
    submit.add_argument("--out", default=None, help="write the counts list here")
    submit.add_argument("circuits", help="JSON file with a circuit or circuit list")
    submit.set_defaults(func=_cmd_qpu_submit)
    fetch = qpu_sub.add_parser("fetch")
    fetch.add_argument("--profile", required=True)
    fetch.add_argument("--store", required=True)
    fetch.add_argument("job_id")
    fetch.set_defaults(func=_cmd_qpu_fetch)

    rc = sub.add_parser("rc", help="randomized compiling")
    rc_sub = rc.add_subparsers(dest="cmd", required=True)
    compile_ = rc_sub.add_parser("compile")
    compile_.add_argument("--n", type=int, default=32)
    compile_.add_argument("--seed", type=int, default=0)
    compile_.add_argument("circuit")
    compile_.add_argument("out_dir")
    compile_.set_defaults(func=_cmd_rc_compile)

    edc = sub.add_parser("edc", help="empirical direct characterization")
    edc_sub = edc.add_subparsers(dest="cmd", required=True)
    char = edc_sub.add_parser("characterize")
    char.add_argument("--profile", required=True)
    char.add_argument("--mode", default="2c-full",
                      help="2c-full | 2c-perqubit | 3c-full | 3c-perqubit")
    char.add_argument("--shots", type=int, default=8192)
    char.add_argument("--seed", type=int, default=None)
    char.add_argument("--store", default=None)
    char.add_argument("--out", required=True)
    char.set_defaults(func=_cmd_edc_characterize)

    knr = sub.add_parser("knr", help="cycle noise reconstruction")
    knr_sub = knr.add_subparsers(dest="cmd", required=True)
    design = knr_sub.add_parser("design")
    design.add_argument("--ghz-sizes", default="2-6",
                        help="chain sizes whose per-gate cycles to characterize")
    design.add_argument("--lengths", default="4,12")
    design.add_argument("--randomizations", type=int, default=30)
    design.add_argument("--shots", type=int, default=128)
    design.add_argument("--seed", type=int, default=0)
    design.add_argument("--profile", default=None, help="topology source (optional)")
    design.add_argument("--out-dir", required=True)
    design.set_defaults(func=_cmd_knr_design)
    fit = knr_sub.add_parser("fit")
    fit.add_argument("--manifest", required=True)
    fit.add_argument("--counts", required=True)
    fit.add_argument("--profile", default=None)
    fit.add_argument("--out", required=True)
    fit.set_defaults(func=_cmd_knr_fit)

    gst = sub.add_parser("gst", help="gate set tomography")
    gst_sub = gst.add_subparsers(dest="cmd", required=True)
    gdesign = gst_sub.add_parser("design")
    gdesign.add_argument("--gateset", default="1q")
    gdesign.add_argument("--out-dir", required=True)
    gdesign.set_defaults(func=_cmd_gst_design)
    gfit = gst_sub.add_parser("fit")
    gfit.add_argument("--manifest", required=True)
    gfit.add_argument("--counts", required=True)
    gfit.add_argument("--out", required=True)
    gfit.set_defaults(func=_cmd_gst_fit)

    bench = sub.add_parser("bench", help="closed-loop model benchmarking")
    bench_sub = bench.add_subparsers(dest="cmd", required=True)
    run = bench_sub.add_parser("run")
    run.add_argument("--profile", required=True)
    run.add_argument("--models", required=True, help="comma-separated model JSON files")
    run.add_argument("--targets", default="bell,ghz:2-6,bv:all")
    run.add_argument("--shots", type=int, default=8192)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--store", default=None)
    run.add_argument("--trim", default=None, help="measured positions for trimmed rows")
    run.add_argument("--bv-qubits", default="22,24,26")
    run.add_argument("--bv-oracle", type=int, default=25)
    run.add_argument("--bell", default="0,1")
    run.add_argument("--out", required=True)
    run.set_defaults(func=_cmd_bench_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
