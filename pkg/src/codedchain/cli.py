"""Command-line harness: run one scenario, sweep a parameter, or diff the
coded pipeline against the uncoded replay."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path
from typing import Optional

from .netsim import SCHEMA, ConfigError, SafetyViolation, Scenario, Simulator, verify_oracle

log = logging.getLogger("codedchain")

SWEEP_AXES = ("N", "Q", "K", "f", "epochs")


def resolve(path: str) -> Path:
    """A filesystem path, or the name of a bundled scenario."""
    p = Path(path)
    if p.exists():
        return p
    bundled = resources.files("codedchain") / "scenarios" / path
    if bundled.is_file():
        return Path(str(bundled))
    return p


def load_scenario(path: str, seed: Optional[int] = None) -> Scenario:
    sc = Scenario.load(resolve(path))
    return sc.replace(seed=seed) if seed is not None else sc


def write_jsonl(records, out: Optional[str]) -> None:
    if out is None:
        return
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def print_table(rows: list[dict], cols: list[str]) -> None:
    def fmt(v):
        return f"{v:.4g}" if isinstance(v, float) else str(v)
    cells = [[fmt(r.get(c, "")) for c in cols] for r in rows]
    widths = [max([len(c)] + [len(x[i]) for x in cells]) for i, c in enumerate(cols)]
    print("  ".join(c.rjust(w) for c, w in zip(cols, widths)))
    for x in cells:
        print("  ".join(v.rjust(w) for v, w in zip(x, widths)))


# run

def cmd_run(config: str, seed: Optional[int] = None, out: Optional[str] = None, oracle: bool = False) -> int:
    sc = load_scenario(config, seed)
    t0 = time.perf_counter()
    result = Simulator(sc).run()
    wall = time.perf_counter() - t0
    records = result.metrics.records()
    write_jsonl(records, out)
    rows = [r for r in records if r["type"] == "epoch"]
    print_table(rows, ["height", "view", "latency_views", "confirmed", "invalid", "collateral", "oracle_equal"])
    for a in (r for r in records if r["type"] == "attack"):
        state = "rejected" if a["rejected"] else "COMMITTED"
        print(f"attack view {a['view']} ({a['strategy']}, leader {a['leader']}): {state} {a['honest_notes']}")
    s = records[-1]
    print(f"epochs {s['epochs_committed']}/{s['epochs_target']}  messages {s['total_messages']}  "
          f"bits {s['total_bits']}  safety {'ok' if s['safety_ok'] else 'VIOLATED'}  "
          f"oracle {'ok' if s['oracle_ok'] else 'MISMATCH'}  wall {wall:.2f}s")
    if not result.report.safety_ok:
        log.error("safety violation: %s", "; ".join(result.report.safety))
        return 3
    if not result.report.ok:
        log.error("oracle mismatch: %s", result.report.mismatches[0])
        return 4
    if oracle:
        return cmd_verify_oracle(config, seed)
    return 0


# verify-oracle

def cmd_verify_oracle(config: str, seed: Optional[int] = None) -> int:
    sc = load_scenario(config, seed)
    try:
        ok, report = verify_oracle(sc)
    except SafetyViolation as e:
        log.error("safety violation: %s", e)
        return 3
    print(report)
    if not ok:
        log.error("coded and uncoded confirmed sets differ")
        return 4
    print("coded pipeline matches the uncoded replay")
    return 0


# sweep

def max_feasible_K(base: dict) -> Optional[int]:
    best = None
    K = 1
    while K <= base["N"]:
        try:
            Scenario.from_dict(dict(base, K=K))
        except ConfigError:
            if best is not None:
                break
        else:
            best = K
        K += 1
    return best


def sweep_points(spec: dict) -> list[dict]:
    """Expand a sweep document into concrete scenario dicts (infeasible ones skipped)."""
    for key in ("base", "axis", "values"):
        if key not in spec:
            raise ConfigError(f"sweep needs {key!r}")
    axis = spec["axis"]
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    reps = spec.get("repetitions", 1)
    policy = spec.get("seed_policy", "same")
    if policy not in ("same", "increment"):
        raise ConfigError("seed_policy must be same or increment")
    f_ratio = spec.get("f_ratio")
    points = []
    for value in spec["values"]:
        d = dict(spec["base"])
        d[axis] = value
        if f_ratio is not None and axis != "f":
            d["f"] = int(d["N"] * f_ratio)
        if d.get("K") == "max":
            K = max_feasible_K(dict(d, K=1))
            if K is None:
                log.warning("skipping %s=%s: no feasible K", axis, value)
                continue
            d["K"] = K
        try:
            Scenario.from_dict(d)
        except ConfigError as e:
            log.warning("skipping %s=%s: %s", axis, value, e)
            continue
        for rep in range(reps):
            seed = d.get("seed", 0) + (rep if policy == "increment" else 0)
            points.append(dict(d, seed=seed, _rep=rep, _value=value))
    return points


def run_point(d: dict) -> dict:
    rep, value = d.pop("_rep"), d.pop("_value")
    sc = Scenario.from_dict(d)
    sim = Simulator(sc)
    result = sim.run()
    s = result.metrics.summary
    st = sim.st
    views = s["commit_views"]
    per_view = [result.metrics.views[v] for v in views]
    epochs = max(result.committed, 1)
    bits_epoch = result.metrics.total_bits / epochs
    R = [st.layout(st.T_for(h)).R for h in range(1, epochs + 1)]
    uncoded = sc.N * st.K ** 2 * st.Q * (sum(R) / len(R)) * st.F.bits
    mu = sc.f / sc.N
    return {
        "schema": SCHEMA, "type": "sweep-point", "value": value, "rep": rep, "seed": sc.seed,
        "N": sc.N, "K": sc.K, "Q": sc.Q, "f": sc.f, "q": st.q,
        "epochs_committed": result.committed,
        "messages_per_view": sum(v["messages"] for v in per_view) / max(len(per_view), 1),
        "bits_per_view": sum(v["bits"] for v in per_view) / max(len(per_view), 1),
        "bits_per_epoch": bits_epoch,
        "total_bits": result.metrics.total_bits, "total_messages": result.metrics.total_messages,
        "gain": uncoded / bits_epoch,
        "tradeoff": 1 / (1 - 3 * mu) ** 2,
        "safety_ok": result.report.safety_ok, "oracle_ok": result.report.ok,
    }


def run_sweep(spec: dict, jobs: int = 1) -> list[dict]:
    points = sweep_points(spec)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(run_point, points))
    return [run_point(p) for p in points]


def cmd_sweep(sweep: str, out: Optional[str] = None, jobs: int = 1) -> int:
    path = resolve(sweep)
    try:
        spec = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}") from None
    rows = run_sweep(spec, jobs)
    write_jsonl(rows, out)
    for r in rows:
        r["log2_q"] = math.ceil(math.log2(r["q"]))
    print_table(rows, ["value", "rep", "N", "K", "Q", "f", "log2_q", "epochs_committed",
                       "messages_per_view", "bits_per_view", "gain", "tradeoff"])
    if not all(r["safety_ok"] and r["oracle_ok"] for r in rows):
        log.error("a sweep point failed its safety or oracle check")
        return 4
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="codedchain", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario and write JSON-lines metrics")
    r.add_argument("--config", required=True, help="scenario JSON (path or bundled name)")
    r.add_argument("--seed", type=int, help="override the scenario seed")
    r.add_argument("--out", help="metrics output path (JSON-lines)")
    r.add_argument("--oracle", action="store_true", help="also diff against the uncoded replay")

    s = sub.add_parser("sweep", help="sweep one parameter and tabulate bits and messages")
    s.add_argument("--sweep", required=True, help="sweep JSON (path or bundled name)")
    s.add_argument("--out", help="rows output path (JSON-lines)")
    s.add_argument("--jobs", type=int, default=1, help="worker processes")

    v = sub.add_parser("verify-oracle", help="diff coded and uncoded confirmed sets per epoch")
    v.add_argument("--config", required=True)
    v.add_argument("--seed", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args.config, args.seed, args.out, args.oracle)
        if args.command == "sweep":
            return cmd_sweep(args.sweep, args.out, args.jobs)
        return cmd_verify_oracle(args.config, args.seed)
    except ConfigError as e:
        print(f"codedchain: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
