"""Config schema: YAML round-trip and the validation catalog."""
import pytest

from zircon.adversary import AttackSpec
from zircon.scenario import (
    EXAMPLE_CONFIG,
    ConfigError,
    EnergyConfig,
    KeyRotationConfig,
    NodeSpec,
    ScenarioConfig,
    TrafficSpec,
    dump_config,
    from_dict,
    load_config,
    to_dict,
    validate,
)


def small_config(**overrides):
    cfg = ScenarioConfig(
        seed=3,
        nodes=[
            NodeSpec(id=1, ip="10.0.0.1", role="source", x=5, y=5),
            NodeSpec(id=2, ip="10.0.0.2", role="intermediate", x=50, y=5),
            NodeSpec(id=9, ip="10.0.0.9", role="gateway", x=95, y=5),
        ],
        routes=[[1, 2, 9]],
        traffic=[TrafficSpec(source=1, count=3)],
    )
    for name, value in overrides.items():
        setattr(cfg, name, value)
    return cfg


def errors_of(cfg):
    with pytest.raises(ConfigError) as exc:
        validate(cfg)
    return exc.value.errors


def test_example_config_is_valid():
    cfg = load_config(EXAMPLE_CONFIG)
    assert cfg.seed == 7
    assert cfg.mode == "multihop"
    assert [n.id for n in cfg.nodes] == [1, 2, 3, 9]
    assert cfg.routes == [[1, 2, 3, 9]]
    assert cfg.traffic[0].count == 20
    assert cfg.key_rotation == KeyRotationConfig(40, 80)
    assert cfg.attacks == []


def test_yaml_roundtrip_preserves_everything():
    cfg = small_config()
    cfg.key_rotation = KeyRotationConfig(5, 9)
    cfg.drop_timeout_ms = 1234
    cfg.energy = EnergyConfig(p_n_mw=25.0, tc_per_op_ms=0.25)
    cfg.attacks = [
        AttackSpec(kind="eavesdrop", from_id=1, to_id=2),
        AttackSpec(kind="replay", from_id=1, to_id=2, delay_ms=9000,
                   mutate_timestamp=True),
        AttackSpec(kind="insert_bits", from_id=2, to_id=9, offset_bits=12,
                   bits=(1, 0, 1)),
        AttackSpec(kind="delete_bits", from_id=2, to_id=9, q=5, offset_bits=3),
        AttackSpec(kind="modify_payload", from_id=1, to_id=2, seq=2,
                   edits=((0, 1), (3, 0x80))),
        AttackSpec(kind="modify_watermark", from_id=2, to_id=9,
                   edits=((17, 0xFF),)),
        AttackSpec(kind="drop", from_id=2, to_id=9, after_ms=1500),
        AttackSpec(kind="fake_inject", to_id=2, src=1, seq=4,
                   ip=bytes([10, 0, 0, 1]), payload=b"fp",
                   key_material=bytes(16), key_epoch=3, hop=2),
        AttackSpec(kind="store_probe", caller_id=666, src=1, seq=1,
                   after_ms=10),
    ]
    text = dump_config(cfg)
    back = load_config(text)
    assert to_dict(back) == to_dict(cfg)
    # and a second round-trip is a fixed point
    assert dump_config(back) == text


def test_load_config_accepts_stream(tmp_path):
    p = tmp_path / "scenario.yaml"
    p.write_text(EXAMPLE_CONFIG)
    with open(p) as fh:
        cfg = load_config(fh)
    assert cfg.seed == 7


def test_bad_yaml_and_bad_shape():
    with pytest.raises(ConfigError):
        load_config("nodes: [unclosed")
    with pytest.raises(ConfigError):
        load_config("- just\n- a list\n")
    with pytest.raises(ConfigError):
        from_dict(["not", "a", "mapping"])


def test_timeout_default_is_five_hop_delays():
    cfg = small_config()
    assert cfg.timeout_ms() == 1500
    cfg.per_hop_delay_ms = 100
    assert cfg.timeout_ms() == 500
    cfg.drop_timeout_ms = 99
    assert cfg.timeout_ms() == 99


# -- validation catalog ---------------------------------------------------------

def test_validate_accepts_small_config():
    validate(small_config())


def test_unknown_mode():
    assert any("mode:" in e for e in errors_of(small_config(mode="hybrid")))


def test_duplicate_node_ids_and_ips():
    cfg = small_config()
    cfg.nodes.append(NodeSpec(id=1, ip="10.0.0.5", role="source"))
    assert any("duplicate id" in e for e in errors_of(cfg))
    cfg = small_config()
    cfg.nodes.append(NodeSpec(id=5, ip="10.0.0.1", role="source"))
    assert any("duplicate address" in e for e in errors_of(cfg))


def test_bad_ip_and_position():
    cfg = small_config()
    cfg.nodes[0].ip = "999.0.0.1"
    assert any("bad address" in e for e in errors_of(cfg))
    cfg = small_config()
    cfg.nodes[0].x = -1
    assert any("outside" in e for e in errors_of(cfg))


def test_route_shape_checks():
    cfg = small_config(routes=[[1]])
    assert any("at least source and gateway" in e for e in errors_of(cfg))
    cfg = small_config(routes=[[1, 2, 7]])
    assert any("unknown node ids" in e for e in errors_of(cfg))
    cfg = small_config(routes=[[2, 1, 9]])
    errs = errors_of(cfg)
    assert any("first node must be a source" in e for e in errs)
    cfg = small_config(routes=[[1, 2, 2, 9]])
    validate(cfg)  # repeating an intermediate is odd but well-formed
    cfg = small_config(routes=[[1, 9, 9]])
    assert any("must be intermediate" in e for e in errors_of(cfg))


def test_unregistered_nodes_cannot_relay():
    cfg = small_config()
    cfg.nodes[1].registered = False
    assert any("unregistered" in e for e in errors_of(cfg))


def test_singlehop_route_and_attack_restrictions():
    cfg = small_config(mode="singlehop")
    assert any("source->gateway only" in e for e in errors_of(cfg))
    cfg = small_config(mode="singlehop", routes=[[1, 9]])
    validate(cfg)
    cfg.attacks = [AttackSpec(kind="modify_watermark", from_id=1, to_id=9,
                              edits=((0, 1),))]
    assert any("no watermark" in e for e in errors_of(cfg))
    cfg.attacks = [AttackSpec(kind="replay", from_id=1, to_id=9,
                              mutate_timestamp=True)]
    assert any("no watermark" in e for e in errors_of(cfg))
    cfg.attacks = [AttackSpec(kind="replay", from_id=1, to_id=9)]
    validate(cfg)  # plain replay of a bare frame is fine


def test_traffic_checks():
    cfg = small_config()
    cfg.traffic[0].source = 2
    assert any("not a source node" in e for e in errors_of(cfg))
    cfg = small_config()
    cfg.nodes.append(NodeSpec(id=5, ip="10.0.0.5", role="source"))
    cfg.traffic.append(TrafficSpec(source=5, count=1))
    assert any("has no route" in e for e in errors_of(cfg))
    cfg = small_config()
    cfg.traffic[0].count = 0
    assert any("count" in e for e in errors_of(cfg))
    cfg = small_config()
    cfg.traffic[0].payload_bytes = 70000
    assert any("16 bits" in e for e in errors_of(cfg))


def test_attack_link_must_exist():
    cfg = small_config()
    cfg.attacks = [AttackSpec(kind="drop", from_id=2, to_id=1)]
    assert any("not on any route" in e for e in errors_of(cfg))


def test_fake_inject_and_probe_requirements():
    cfg = small_config()
    cfg.attacks = [AttackSpec(kind="fake_inject", to_id=7, src=1,
                              ip=bytes(4), key_material=bytes(16))]
    errs = errors_of(cfg)
    assert any("target 7 unknown" in e for e in errs)
    assert any("needs a forged seq" in e for e in errs)
    cfg = small_config()
    cfg.attacks = [AttackSpec(kind="store_probe", caller_id=6)]
    assert any("needs src and seq" in e for e in errors_of(cfg))


def test_rotation_bounds():
    cfg = small_config(key_rotation=KeyRotationConfig(0, 5))
    assert any("key_rotation" in e for e in errors_of(cfg))
    cfg = small_config(key_rotation=KeyRotationConfig(6, 5))
    assert any("key_rotation" in e for e in errors_of(cfg))
    validate(small_config(key_rotation=KeyRotationConfig(5, 5)))


def test_scalar_bounds():
    assert any("freshness_s" in e for e in errors_of(small_config(freshness_s=0)))
    assert any("per_hop_delay_ms" in e
               for e in errors_of(small_config(per_hop_delay_ms=0)))
    assert any("area" in e for e in errors_of(small_config(area=(0.0, 50.0))))
