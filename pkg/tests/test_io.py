import json

import numpy as np
import pytest

from handgeom.anatomy import LossConfig, fit_stats
from handgeom.errors import ConfigError, ParseError, SchemaViolation
from handgeom.hand_model import DEFAULT_INTRINSICS, HandSample, random_fk_params
from handgeom.io import (
    file_digest,
    ingest,
    load_config,
    parse_config_text,
    remap_tables,
    sample_to_record,
    write_manifest,
    write_samples,
)


def fk_samples(n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        p = random_fk_params(rng)
        out.append((p, HandSample(f"fk/{i}", p.build(), DEFAULT_INTRINSICS)))
    return out


def record(**over):
    rec = {"id": "a", "side": "right", "kp2d": [[1.0, 2.0]] * 21,
           "kp3d": [[1.0, 2.0, 3.0]] * 21, "vis": [True] * 21, "intrinsics": None}
    rec.update(over)
    return rec


def write_lines(path, rows):
    path.write_text("".join((r if isinstance(r, str) else json.dumps(r)) + "\n" for r in rows))
    return path


def test_empty_file(tmp_path):
    p = tmp_path / "empty.jsonl"
    p.write_text("")
    assert ingest(p) == []


def test_twenty_keypoints_names_the_line(tmp_path):
    p = write_lines(tmp_path / "a.jsonl", [record(), record(kp2d=[[0.0, 0.0]] * 20)])
    with pytest.raises(SchemaViolation) as exc:
        ingest(p)
    assert exc.value.line == 2
    assert "line 2" in str(exc.value)


@pytest.mark.parametrize("bad", [
    {"side": "both"},
    {"id": ""},
    {"kp3d": [[1.0, 2.0]] * 21},
    {"vis": [1] * 21},
    {"intrinsics": {"fx": 1.0}},
])
def test_schema_violations(tmp_path, bad):
    p = write_lines(tmp_path / "a.jsonl", [record(**bad)])
    with pytest.raises(SchemaViolation):
        ingest(p)


def test_non_finite_rejected(tmp_path):
    p = tmp_path / "a.jsonl"
    rec = json.dumps(record()).replace("3.0]", "NaN]", 1)
    p.write_text(rec + "\n")
    with pytest.raises(SchemaViolation):
        ingest(p)


def test_bad_json_is_parse_error(tmp_path):
    p = write_lines(tmp_path / "a.jsonl", [record(), "{not json"])
    with pytest.raises(ParseError) as exc:
        ingest(p)
    assert exc.value.line == 2


def test_null_kp3d_means_no_3d(tmp_path):
    p = write_lines(tmp_path / "a.jsonl", [record(kp3d=None)])
    (s,) = ingest(p)
    assert not s.has_3d
    assert sample_to_record(s)["kp3d"] is None


def test_round_trip_is_lossless(tmp_path):
    samples = [s for _, s in fk_samples(20)]
    samples.append(HandSample("no3d", samples[0].pose, None, has_3d=False))
    p = tmp_path / "a.jsonl"
    write_samples(samples, p)
    back = ingest(p)
    assert len(back) == len(samples)
    for a, b in zip(samples, back):
        if a.has_3d:
            assert a == b
        else:
            assert (a.id, a.has_3d, a.intrinsics) == (b.id, b.has_3d, b.intrinsics)
            assert np.array_equal(a.pose.joints2d, b.pose.joints2d)
    p2 = tmp_path / "b.jsonl"
    write_samples(back, p2)
    assert p.read_bytes() == p2.read_bytes()


def test_fk_fixture_stats_round_trip(tmp_path):
    pairs = fk_samples(100, seed=5)
    p = tmp_path / "fk.jsonl"
    write_samples([s for _, s in pairs], p)
    samples = ingest(p)
    assert len(samples) == 100
    stats = fit_stats(samples)
    flex = np.array([pp.flexion_angles for pp, _ in pairs])
    abd = np.array([pp.abduction_angles for pp, _ in pairs])
    lo, hi = stats.range_arrays()
    assert np.allclose(lo, np.concatenate([flex.min(0), abd.min(0)]), rtol=1e-9)
    assert np.allclose(hi, np.concatenate([flex.max(0), abd.max(0)]), rtol=1e-9)
    assert np.allclose(stats.finger_lengths_norm, [6.4, 9.5, 10.0, 9.0, 7.4], rtol=1e-9)


def test_remap_tables_are_permutations():
    for name, perm in remap_tables().items():
        assert sorted(perm) == list(range(21)), name


def test_rhd_order_is_remapped(tmp_path):
    (_, s), = fk_samples(1)
    canon = s.pose.joints3d
    # rhd stores each finger tip-first
    rhd = np.zeros_like(canon)
    rhd[0] = canon[0]
    for f in range(5):
        for j in range(4):
            rhd[1 + 4 * f + (3 - j)] = canon[1 + 4 * f + j]
    rec = sample_to_record(s)
    rec["kp3d"] = rhd.tolist()
    p = write_lines(tmp_path / "rhd.jsonl", [rec])
    (got,) = ingest(p, order="rhd")
    assert np.array_equal(got.pose.joints3d, canon)


def test_stb_order_is_remapped(tmp_path):
    (_, s), = fk_samples(1)
    canon = s.pose.joints3d
    # stb stores little first, thumb last, each MCP to TIP
    stb = np.zeros_like(canon)
    stb[0] = canon[0]
    for k, f in enumerate([4, 3, 2, 1, 0]):
        stb[1 + 4 * k:5 + 4 * k] = canon[1 + 4 * f:5 + 4 * f]
    rec = sample_to_record(s)
    rec["kp3d"] = stb.tolist()
    (got,) = ingest(write_lines(tmp_path / "stb.jsonl", [rec]), order="stb")
    assert np.array_equal(got.pose.joints3d, canon)


def test_unknown_order():
    with pytest.raises(ConfigError):
        ingest("whatever.jsonl", order="mpii")


def test_config_file_and_env(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nbeta_fr = 10\nline_search = false\nseed = 3\n\nthreads=2\n")
    cfg = load_config(p, env={})
    assert cfg.loss.beta_fr == 10.0 and cfg.loss.line_search is False
    assert cfg.seed == 3 and cfg.threads == 2
    cfg = load_config(p, env={"HANDGEOM_BETA_FR": "5", "OTHER": "x"})
    assert cfg.loss.beta_fr == 5.0
    cfg = load_config(p, env={"HANDGEOM_SEED": "4"}, overrides={"seed": 9})
    assert cfg.seed == 9


@pytest.mark.parametrize("text", ["bogus = 1", "delta = -1", "tau = 2", "threads = 0", "beta_fr = abc", "no equals"])
def test_config_rejections(tmp_path, text):
    p = tmp_path / "bad.cfg"
    p.write_text(text + "\n")
    with pytest.raises(ConfigError):
        load_config(p, env={})


def test_config_env_unknown_key():
    with pytest.raises(ConfigError):
        load_config(env={"HANDGEOM_NOPE": "1"})


def test_config_covers_every_loss_field():
    keys = set(parse_config_text("\n".join(f"{k} = 1" for k in ("lam", "sigma", "step"))))
    assert keys == {"lam", "sigma", "step"}
    for name in LossConfig.field_names():
        parse_config_text(f"{name} = 1")


def test_manifest(tmp_path):
    inp = tmp_path / "in.txt"
    inp.write_text("hello")
    out = tmp_path / "out.txt"
    out.write_text("world")
    cfg = load_config(env={}, overrides={"seed": 12})
    m = write_manifest(tmp_path / "m.json", "synth", ["synth"], cfg, [inp], [out])
    assert m["seed"] == 12
    assert m["inputs"][str(inp)] == file_digest(inp)
    assert len(m["config_sha256"]) == 64
    assert json.loads((tmp_path / "m.json").read_text()) == m
    assert load_config(env={}, overrides={"seed": 12}).digest() == cfg.digest()
