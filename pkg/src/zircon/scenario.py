"""Scenario configuration: dataclasses, validation, and YAML round-trip.

A scenario fixes everything a run needs: topology and routes inside an
L x W area, traffic schedules, the attack list, key-rotation policy, energy
constants, and the master seed.  A validated config plus its seed fully
determines the simulation output, byte for byte.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import yaml

from .adversary import (
    FAKE_INJECT,
    LINK_KINDS,
    MODIFY_WATERMARK,
    STORE_PROBE,
    AttackSpec,
    AttackSpecError,
)
from .nodes import ROLE_GATEWAY, ROLE_INTERMEDIATE, ROLE_SOURCE, ROLES
from .watermark import parse_ip

MODE_SINGLEHOP = "singlehop"
MODE_MULTIHOP = "multihop"
MODES = (MODE_SINGLEHOP, MODE_MULTIHOP)


class ConfigError(ValueError):
    """Scenario validation failed; .errors lists every offending field."""

    def __init__(self, errors: List[str]):
        super().__init__("invalid scenario config:\n  " + "\n  ".join(errors))
        self.errors = errors


@dataclass
class NodeSpec:
    id: int
    ip: str
    role: str
    x: float = 0.0
    y: float = 0.0
    registered: bool = True


@dataclass
class TrafficSpec:
    source: int
    count: int
    interval_ms: int = 1000
    start_ms: int = 0
    payload_bytes: int = 16


@dataclass
class EnergyConfig:
    p_n_mw: float = 30.0
    t_a_ms: float = 1.0
    t_s_ms: float = 0.5
    t_tr_ms: float = 300.0
    t_sl_ms: float = 299.0
    e0_mj: float = 100.0
    intermediate_multiplier: float = 1.0
    tc_per_op_ms: float = 0.5


@dataclass
class KeyRotationConfig:
    min_generations: int
    max_generations: int


@dataclass
class ScenarioConfig:
    seed: int = 1
    mode: str = MODE_MULTIHOP
    freshness_s: int = 60
    per_hop_delay_ms: int = 300
    purge_on_delivery: bool = True
    drop_timeout_ms: Optional[int] = None  # defaults to 5x per-hop delay
    area: Tuple[float, float] = (100.0, 100.0)
    key_rotation: Optional[KeyRotationConfig] = None
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    nodes: List[NodeSpec] = field(default_factory=list)
    routes: List[List[int]] = field(default_factory=list)
    traffic: List[TrafficSpec] = field(default_factory=list)
    attacks: List[AttackSpec] = field(default_factory=list)

    def timeout_ms(self) -> int:
        if self.drop_timeout_ms is not None:
            return self.drop_timeout_ms
        return 5 * self.per_hop_delay_ms


def validate(config: ScenarioConfig) -> None:
    """Raise ConfigError listing every problem found."""
    errors: List[str] = []
    if config.mode not in MODES:
        errors.append(f"mode: must be one of {MODES}, got {config.mode!r}")
    if config.freshness_s <= 0:
        errors.append("freshness_s: must be positive")
    if config.per_hop_delay_ms <= 0:
        errors.append("per_hop_delay_ms: must be positive")
    if len(config.area) != 2 or config.area[0] <= 0 or config.area[1] <= 0:
        errors.append("area: needs positive (length, width)")

    ids: Dict[int, NodeSpec] = {}
    ips = set()
    if not config.nodes:
        errors.append("nodes: at least one node required")
    for n in config.nodes:
        if n.id in ids:
            errors.append(f"nodes: duplicate id {n.id}")
        ids[n.id] = n
        if n.role not in ROLES:
            errors.append(f"nodes[{n.id}].role: unknown role {n.role!r}")
        try:
            ip = parse_ip(n.ip)
            if ip in ips:
                errors.append(f"nodes[{n.id}].ip: duplicate address {n.ip}")
            ips.add(ip)
        except ValueError:
            errors.append(f"nodes[{n.id}].ip: bad address {n.ip!r}")
        if len(config.area) == 2:
            length, width = config.area
            if not (0 <= n.x <= length and 0 <= n.y <= width):
                errors.append(f"nodes[{n.id}]: position outside {length}x{width} area")

    links = set()
    for ri, route in enumerate(config.routes):
        if len(route) < 2:
            errors.append(f"routes[{ri}]: needs at least source and gateway")
            continue
        missing = [nid for nid in route if nid not in ids]
        if missing:
            errors.append(f"routes[{ri}]: unknown node ids {missing}")
            continue
        if ids[route[0]].role != ROLE_SOURCE:
            errors.append(f"routes[{ri}]: first node must be a source")
        if ids[route[-1]].role != ROLE_GATEWAY:
            errors.append(f"routes[{ri}]: last node must be a gateway")
        for nid in route[1:-1]:
            if ids[nid].role != ROLE_INTERMEDIATE:
                errors.append(f"routes[{ri}]: node {nid} in the middle must be intermediate")
        if config.mode == MODE_SINGLEHOP and len(route) != 2:
            errors.append(f"routes[{ri}]: singlehop routes are source->gateway only")
        unregistered = [nid for nid in route if not ids[nid].registered]
        if unregistered:
            # unregistered ids cannot store records, so traffic through them
            # would die on an authorization error instead of a verdict
            errors.append(
                f"routes[{ri}]: unregistered nodes {unregistered} cannot relay"
            )
        links.update(zip(route, route[1:]))

    route_sources = {r[0] for r in config.routes if r}
    for ti, t in enumerate(config.traffic):
        if t.source not in ids or ids[t.source].role != ROLE_SOURCE:
            errors.append(f"traffic[{ti}].source: {t.source} is not a source node")
        elif t.source not in route_sources:
            errors.append(f"traffic[{ti}].source: {t.source} has no route")
        if t.count < 1:
            errors.append(f"traffic[{ti}].count: must be >= 1")
        if t.interval_ms < 1:
            errors.append(f"traffic[{ti}].interval_ms: must be >= 1")
        if not 0 <= t.payload_bytes <= 0xFFFF:
            errors.append(f"traffic[{ti}].payload_bytes: must fit 16 bits")

    for ai, a in enumerate(config.attacks):
        if a.kind in LINK_KINDS:
            if (a.from_id, a.to_id) not in links:
                errors.append(
                    f"attacks[{ai}]: link {a.from_id}->{a.to_id} is not on any route"
                )
            if config.mode == MODE_SINGLEHOP and (
                    a.kind == MODIFY_WATERMARK
                    or (a.kind == "replay" and a.mutate_timestamp)):
                errors.append(
                    f"attacks[{ai}]: singlehop frames carry no watermark to modify"
                )
        elif a.kind == FAKE_INJECT:
            if a.to_id not in ids:
                errors.append(f"attacks[{ai}]: inject target {a.to_id} unknown")
            if a.seq is None:
                errors.append(f"attacks[{ai}]: fake_inject needs a forged seq")
        elif a.kind == STORE_PROBE:
            if a.src is None or a.seq is None:
                errors.append(f"attacks[{ai}]: store_probe needs src and seq")

    if config.key_rotation is not None:
        kr = config.key_rotation
        if not 1 <= kr.min_generations <= kr.max_generations:
            errors.append("key_rotation: need 1 <= min_generations <= max_generations")

    if errors:
        raise ConfigError(errors)


# -- YAML round-trip ---------------------------------------------------------

def _attack_to_dict(a: AttackSpec) -> dict:
    d: dict = {"kind": a.kind}
    if a.from_id is not None:
        d["from"] = a.from_id
    if a.to_id is not None:
        d["to"] = a.to_id
    if a.src is not None:
        d["src"] = a.src
    if a.seq is not None:
        d["seq"] = a.seq
    if a.after_ms:
        d["after_ms"] = a.after_ms
    if a.kind == "replay":
        d["delay_ms"] = a.delay_ms
        if a.mutate_timestamp:
            d["mutate_timestamp"] = True
    if a.kind == "insert_bits":
        d["offset_bits"] = a.offset_bits
        d["bits"] = list(a.bits)
    if a.kind == "delete_bits":
        d["q"] = a.q
        if a.offset_bits is not None:
            d["offset_bits"] = a.offset_bits
    if a.kind in ("modify_payload", "modify_watermark"):
        d["edits"] = [[off, mask] for off, mask in a.edits]
    if a.kind == "fake_inject":
        d["ip"] = ".".join(str(b) for b in a.ip)
        d["payload_hex"] = a.payload.hex()
        d["key_material_hex"] = a.key_material.hex()
        d["key_epoch"] = a.key_epoch
        d["hop"] = a.hop
    if a.kind == "store_probe":
        d["caller_id"] = a.caller_id
    return d


def _attack_from_dict(d: dict) -> AttackSpec:
    kwargs = dict(
        kind=d.get("kind"),
        from_id=d.get("from"),
        to_id=d.get("to"),
        src=d.get("src"),
        seq=d.get("seq"),
        after_ms=d.get("after_ms", 0),
        delay_ms=d.get("delay_ms", 1000),
        mutate_timestamp=bool(d.get("mutate_timestamp", False)),
        offset_bits=d.get("offset_bits"),
        bits=tuple(d.get("bits", ())),
        q=d.get("q", 1),
        edits=tuple((off, mask) for off, mask in d.get("edits", ())),
        key_epoch=d.get("key_epoch", 0),
        hop=d.get("hop", 1),
        caller_id=d.get("caller_id"),
    )
    if "ip" in d:
        kwargs["ip"] = parse_ip(d["ip"])
    if "payload_hex" in d:
        kwargs["payload"] = bytes.fromhex(d["payload_hex"])
    if "key_material_hex" in d:
        kwargs["key_material"] = bytes.fromhex(d["key_material_hex"])
    return AttackSpec(**kwargs)


def to_dict(config: ScenarioConfig) -> dict:
    return {
        "seed": config.seed,
        "mode": config.mode,
        "freshness_s": config.freshness_s,
        "per_hop_delay_ms": config.per_hop_delay_ms,
        "purge_on_delivery": config.purge_on_delivery,
        "drop_timeout_ms": config.drop_timeout_ms,
        "area": list(config.area),
        "key_rotation": (
            None if config.key_rotation is None else {
                "min_generations": config.key_rotation.min_generations,
                "max_generations": config.key_rotation.max_generations,
            }
        ),
        "energy": {
            "p_n_mw": config.energy.p_n_mw,
            "t_a_ms": config.energy.t_a_ms,
            "t_s_ms": config.energy.t_s_ms,
            "t_tr_ms": config.energy.t_tr_ms,
            "t_sl_ms": config.energy.t_sl_ms,
            "e0_mj": config.energy.e0_mj,
            "intermediate_multiplier": config.energy.intermediate_multiplier,
            "tc_per_op_ms": config.energy.tc_per_op_ms,
        },
        "nodes": [
            {"id": n.id, "ip": n.ip, "role": n.role, "x": n.x, "y": n.y,
             "registered": n.registered}
            for n in config.nodes
        ],
        "routes": [list(r) for r in config.routes],
        "traffic": [
            {"source": t.source, "count": t.count, "interval_ms": t.interval_ms,
             "start_ms": t.start_ms, "payload_bytes": t.payload_bytes}
            for t in config.traffic
        ],
        "attacks": [_attack_to_dict(a) for a in config.attacks],
    }


def from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError(["top level: expected a mapping"])
    energy = EnergyConfig(**data.get("energy", {}))
    kr = data.get("key_rotation")
    rotation = None if kr is None else KeyRotationConfig(**kr)
    try:
        attacks = [_attack_from_dict(a) for a in data.get("attacks", [])]
    except (AttackSpecError, TypeError, KeyError) as err:
        raise ConfigError([f"attacks: {err}"]) from err
    area = data.get("area", [100.0, 100.0])
    return ScenarioConfig(
        seed=data.get("seed", 1),
        mode=data.get("mode", MODE_MULTIHOP),
        freshness_s=data.get("freshness_s", 60),
        per_hop_delay_ms=data.get("per_hop_delay_ms", 300),
        purge_on_delivery=data.get("purge_on_delivery", True),
        drop_timeout_ms=data.get("drop_timeout_ms"),
        area=(float(area[0]), float(area[1])),
        key_rotation=rotation,
        energy=energy,
        nodes=[NodeSpec(**n) for n in data.get("nodes", [])],
        routes=[list(r) for r in data.get("routes", [])],
        traffic=[TrafficSpec(**t) for t in data.get("traffic", [])],
        attacks=attacks,
    )


def load_config(stream) -> ScenarioConfig:
    """Parse and validate a YAML scenario from a stream or string."""
    if isinstance(stream, (str, bytes)):
        stream = io.StringIO(stream if isinstance(stream, str) else stream.decode())
    try:
        data = yaml.safe_load(stream)
    except yaml.YAMLError as err:
        raise ConfigError([f"yaml: {err}"]) from err
    try:
        config = from_dict(data)
    except TypeError as err:
        raise ConfigError([str(err)]) from err
    validate(config)
    return config


def dump_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(to_dict(config), sort_keys=False)


EXAMPLE_CONFIG = """\
# Example scenario: one source, two intermediates, one gateway.
# Every random choice in the run derives from this seed alone.
seed: 7
# singlehop: bare frames, the watermark never leaves the database.
# multihop: frames carry the 24-byte watermark tail hop by hop.
mode: multihop
# maximum accepted age (seconds) of the source timestamp at the gateway
freshness_s: 60
# simulated link latency; also the transmit window in the energy model
per_hop_delay_ms: 300
# delete a packet's records once the gateway has retrieved and accepted them
purge_on_delivery: true
# packets whose newest record is older than this are flagged as dropped;
# null means 5x per_hop_delay_ms
drop_timeout_ms: null
# deployment area (length, width) for node placement
area: [100.0, 100.0]
# rotate the shared key after a generation count drawn from this range;
# null disables rotation
key_rotation:
  min_generations: 40
  max_generations: 80
energy:
  p_n_mw: 30.0        # average node power draw
  t_a_ms: 1.0         # acquisition window
  t_s_ms: 0.5         # sensing window
  t_tr_ms: 300.0      # transmit window
  t_sl_ms: 299.0      # sleep window
  e0_mj: 100.0        # base energy budget of a plain node
  intermediate_multiplier: 1.0   # intermediates get e0 + multiplier * e0
  tc_per_op_ms: 0.5   # computation charge per watermark operation
nodes:
  - {id: 1, ip: 10.0.0.1, role: source, x: 10.0, y: 50.0}
  - {id: 2, ip: 10.0.0.2, role: intermediate, x: 40.0, y: 50.0}
  - {id: 3, ip: 10.0.0.3, role: intermediate, x: 70.0, y: 50.0}
  - {id: 9, ip: 10.0.0.9, role: gateway, x: 95.0, y: 50.0}
routes:
  - [1, 2, 3, 9]
traffic:
  # 20 packets of 16 random bytes, one per second
  - {source: 1, count: 20, interval_ms: 1000, start_ms: 0, payload_bytes: 16}
# attacks list; empty means a clean run.  Example entries:
#  - {kind: modify_payload, from: 2, to: 3, seq: 5, edits: [[0, 1]]}
#  - {kind: replay, from: 1, to: 2, delay_ms: 5000}
#  - {kind: store_probe, caller_id: 666, src: 1, seq: 1, after_ms: 500}
attacks: []
"""
