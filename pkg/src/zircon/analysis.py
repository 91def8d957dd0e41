"""Quantitative models over completed runs.

Energy: a node's draw is its average power times the sum of the acquisition,
sensing, computation, transmit, and sleep windows; reported in millijoules.
Computation time is charged as a fixed per-operation cost times the node's
watermark-operation count, so runs stay bit-reproducible across hosts.

Provenance cost compares four schemes as functions of path length H:
full per-hop signature records (42 bytes each), compact per-hop marks
(6 bytes each), a bloom filter sized for a target false-positive rate, and
the constant 24-byte watermark that never grows with H.

Detection reporting replays an event log and correlates attack events with
the verdicts that followed them.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Union

from .adversary import DROP, EAVESDROP, REPLAY, STORE_PROBE
from .nodes import ACCEPTED, ROLE_SOURCE

SCHEME_ZIRCON = "zircon"
SCHEME_SSP = "ssp"
SCHEME_MP = "mp"
SCHEME_BFP = "bfp"
SCHEMES = (SCHEME_ZIRCON, SCHEME_SSP, SCHEME_MP, SCHEME_BFP)

SSP_RECORD_BYTES = 42
MP_RECORD_BYTES = 6
ZIRCON_BYTES = 24


@dataclass(frozen=True)
class EnergyParams:
    p_n_mw: float = 30.0
    t_a_ms: float = 1.0
    t_s_ms: float = 0.5
    t_tr_ms: float = 300.0
    t_sl_ms: float = 299.0
    e0_mj: float = 100.0
    intermediate_multiplier: float = 1.0

    def __post_init__(self) -> None:
        for name in ("p_n_mw", "t_a_ms", "t_s_ms", "t_tr_ms", "t_sl_ms",
                     "e0_mj", "intermediate_multiplier"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def node_energy(params: EnergyParams, t_c_ms: float) -> float:
    """Energy of one duty cycle in millijoules (power in mW, windows in ms)."""
    if t_c_ms < 0:
        raise ValueError("computation time cannot be negative")
    active = params.t_a_ms + params.t_s_ms + t_c_ms + params.t_tr_ms + params.t_sl_ms
    return params.p_n_mw * active / 1000.0


def node_budget(params: EnergyParams, role: str) -> float:
    """Initial energy budget by role: plain nodes get the base budget,
    verifying nodes get the base plus the configured multiple of it."""
    if role == ROLE_SOURCE:
        return params.e0_mj
    return params.e0_mj + params.intermediate_multiplier * params.e0_mj


@dataclass(frozen=True)
class CostModel:
    scheme: str
    hops: int
    p_fp: float = 0.02

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.hops < 1:
            raise ValueError("hop count must be >= 1")
        if not 0.0 < self.p_fp < 1.0:
            raise ValueError("false-positive rate must be in (0, 1)")


def bfp_bits(hops: int, p_fp: float = 0.02) -> float:
    """Bloom-filter size in bits for the given path length and target
    false-positive probability: (-H ln p) / (ln 2)^2."""
    return (-hops * math.log(p_fp)) / (math.log(2) ** 2)


def provenance_size(model: CostModel) -> int:
    """Provenance bytes carried per packet under the given scheme."""
    if model.scheme == SCHEME_SSP:
        return SSP_RECORD_BYTES * model.hops
    if model.scheme == SCHEME_MP:
        return MP_RECORD_BYTES * model.hops
    if model.scheme == SCHEME_BFP:
        return math.ceil(bfp_bits(model.hops, model.p_fp) / 8)
    return ZIRCON_BYTES


def cost_rows(max_hops: int = 30, p_fp: float = 0.02) -> List[dict]:
    rows = []
    for hops in range(1, max_hops + 1):
        rows.append({
            "H": hops,
            "zircon": ZIRCON_BYTES,
            "ssp": SSP_RECORD_BYTES * hops,
            "mp": MP_RECORD_BYTES * hops,
            "bfp_bytes": math.ceil(bfp_bits(hops, p_fp) / 8),
            "bfp_bits": bfp_bits(hops, p_fp),
        })
    return rows


def write_cost_csv(out, max_hops: int = 30, p_fp: float = 0.02) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["H", "zircon", "ssp", "mp", "bfp_bytes", "bfp_bits"])
    for row in cost_rows(max_hops, p_fp):
        writer.writerow([row["H"], row["zircon"], row["ssp"], row["mp"],
                         row["bfp_bytes"], str(row["bfp_bits"])])


def write_energy_csv(out, report: dict, params: EnergyParams) -> None:
    """One row per node from a run report: identity, traffic handled,
    charged computation time, and the resulting duty-cycle energy."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["node", "role", "packets", "T_C_ms", "energy_mJ"])
    nodes = report.get("nodes", {})
    for node_id in sorted(nodes, key=int):
        info = nodes[node_id]
        t_c = float(info["t_c_ms"])
        writer.writerow([
            node_id, info["role"], info["packets"], str(t_c),
            str(node_energy(params, t_c)),
        ])


# -- detection reporting ------------------------------------------------------

def _parse_log(lines: Iterable[str]):
    """Split a log into typed records; each carries its line index so causal
    order survives events that share a timestamp."""
    emits, verdicts, attacks, stores, deletes = [], [], [], [], []
    for idx, raw in enumerate(lines):
        line = raw.strip()
        if not line:
            continue
        parts = line.split("|")
        kind = parts[0]
        try:
            if kind == "emit":
                emits.append({"idx": idx, "node": int(parts[1]),
                              "src": int(parts[2]), "seq": int(parts[3]),
                              "hop": int(parts[4]), "time": int(parts[5])})
            elif kind == "verdict":
                src = None if parts[2] == "-" else int(parts[2])
                seq = None if parts[3] == "-" else int(parts[3])
                hop = None if parts[4] == "-" else int(parts[4])
                verdicts.append({"idx": idx, "node": int(parts[1]), "src": src,
                                 "seq": seq, "hop": hop, "outcome": parts[5],
                                 "time": int(parts[6])})
            elif kind == "attack":
                src = None if parts[3] == "-" else int(parts[3])
                seq = None if parts[4] == "-" else int(parts[4])
                attacks.append({"idx": idx, "kind": parts[1],
                                "target": parts[2], "src": src, "seq": seq,
                                "detail": parts[5], "time": int(parts[6])})
            elif kind == "store":
                stores.append({"idx": idx, "src": int(parts[1]),
                               "seq": int(parts[2]), "hop": int(parts[3]),
                               "by": int(parts[5]), "time": int(parts[6])})
            elif kind == "delete":
                deletes.append({"idx": idx, "src": int(parts[1]),
                                "seq": int(parts[2]), "count": int(parts[3]),
                                "time": int(parts[4])})
            elif kind in ("deliver", "rotate"):
                pass
            else:
                raise ValueError(f"unknown event kind {kind!r}")
        except (IndexError, ValueError) as err:
            raise ValueError(f"malformed log line {line!r}") from err
    return emits, verdicts, attacks, stores, deletes


def _replay_delay(detail: str) -> int:
    for chunk in detail.split(","):
        if chunk.startswith("delay="):
            return int(chunk.split("=", 1)[1])
    return 0


def detection_report(log: Union[str, Iterable[str]]) -> dict:
    """Correlate attacks with the verdicts that followed them.

    An active attack on a packet counts as detected when a non-accepted
    verdict for that packet appears later in the log (for replays, no
    earlier than the scheduled re-delivery time).  A false accept means the
    packet's last verdict is an acceptance issued after the attack.  Drops
    count as detected when the packet's records sit stranded in the store:
    stored but never deleted and never accepted after the drop.
    Eavesdropping is passive and excluded from rates; store probes report
    what the access check returned.
    """
    lines = log.splitlines() if isinstance(log, str) else list(log)
    emits, verdicts, attacks, stores, deletes = _parse_log(lines)

    by_packet_verdicts: Dict[tuple, List[dict]] = {}
    for v in verdicts:
        if v["src"] is not None and v["seq"] is not None:
            by_packet_verdicts.setdefault((v["src"], v["seq"]), []).append(v)

    stored_hops: Dict[tuple, int] = {}
    for s in stores:
        key = (s["src"], s["seq"])
        stored_hops[key] = max(stored_hops.get(key, 0), s["hop"])
    deleted_ids = {(d["src"], d["seq"]) for d in deletes}

    kinds: Dict[str, dict] = {}

    def bucket(kind: str) -> dict:
        return kinds.setdefault(kind, {"attacks": 0, "detected": 0, "rate": None})

    false_accepts = 0
    drop_localization = {}
    attacked_ids = set()

    for a in attacks:
        entry = bucket(a["kind"])
        entry["attacks"] += 1
        key = (a["src"], a["seq"])
        if a["src"] is not None:
            attacked_ids.add(key)
        packet_verdicts = by_packet_verdicts.get(key, [])

        if a["kind"] == EAVESDROP:
            continue
        if a["kind"] == STORE_PROBE:
            if "result=retrieved" not in a["detail"]:
                entry["detected"] += 1
            continue
        if a["kind"] == DROP:
            accepted_after = any(v["outcome"] == ACCEPTED and v["idx"] > a["idx"]
                                 for v in packet_verdicts)
            stranded = key in stored_hops and key not in deleted_ids
            if stranded and not accepted_after:
                entry["detected"] += 1
                drop_localization[f"{a['src']}:{a['seq']}"] = stored_hops[key]
            continue

        horizon = a["time"]
        if a["kind"] == REPLAY:
            horizon += _replay_delay(a["detail"])
        rejected_after = any(
            v["outcome"] != ACCEPTED and v["idx"] > a["idx"]
            and v["time"] >= horizon
            for v in packet_verdicts
        )
        if rejected_after:
            entry["detected"] += 1
        if packet_verdicts:
            last = max(packet_verdicts, key=lambda v: v["idx"])
            if last["outcome"] == ACCEPTED and last["idx"] > a["idx"]:
                false_accepts += 1

    for entry in kinds.values():
        if entry["attacks"] and entry["detected"] is not None:
            entry["rate"] = entry["detected"] / entry["attacks"]
    if EAVESDROP in kinds:
        kinds[EAVESDROP]["detected"] = None
        kinds[EAVESDROP]["rate"] = None

    false_rejects = 0
    clean_accepted = 0
    for e in emits:
        key = (e["src"], e["seq"])
        if key in attacked_ids:
            continue
        packet_verdicts = by_packet_verdicts.get(key, [])
        if any(v["outcome"] == ACCEPTED for v in packet_verdicts):
            clean_accepted += 1
        elif packet_verdicts:
            false_rejects += 1

    return {
        "kinds": kinds,
        "false_accepts": false_accepts,
        "false_rejects": false_rejects,
        "clean_accepted": clean_accepted,
        "drop_localization": drop_localization,
    }
