import json

import pytest

from ringpairs.config import (
    RunManifest,
    config_hash,
    load_config,
    paper_config_path,
    parse_config,
    with_overrides,
)
from ringpairs.errors import ConfigError


@pytest.fixture
def document():
    return json.loads(paper_config_path().read_text())


def test_paper_config_constants(paper):
    assert paper.acquisition.seed == 20240611
    assert paper.source.brightness == pytest.approx(2.09e6)
    assert paper.source.coupling_loss_total == 8.0
    assert paper.detectors["signal"].efficiency == 0.75
    assert paper.detectors["idler"].dark_rate == 80.0
    assert paper.umi.delay == pytest.approx(10e-9)
    assert len(paper.table1.channels) == 7
    assert paper.source.pair_correlation_time == pytest.approx(0.354e-9, rel=0.01)


def test_missing_seed_rejected(document):
    del document["acquisition"]["seed"]
    with pytest.raises(ConfigError) as exc:
        parse_config(document)
    assert exc.value.path == "acquisition.seed"


@pytest.mark.parametrize("dotted, value, path", [
    ("detectors.signal.efficiency", 1.5, "detectors.signal.efficiency"),
    ("detectors.idler.dark_rate", "high", "detectors.idler.dark_rate"),
    ("franson.dwell", [1], "franson.dwell"),
    ("hbt.channel", 99, "hbt.channel"),
    ("table1.channels", [2, 3, 42], "table1.channels.2"),
    ("umi.two_photon_visibility", -0.1, "umi.two_photon_visibility"),
    ("acquisition.seed", 1.5, "acquisition.seed"),
    ("pairs.bogus", 1, "pairs.bogus"),
])
def test_errors_are_path_qualified(document, dotted, value, path):
    with pytest.raises(ConfigError) as exc:
        parse_config(with_overrides(document, **{dotted: value}))
    assert exc.value.path == path
    assert str(exc.value).startswith(path)


def test_unknown_section(document):
    document["extras"] = {}
    with pytest.raises(ConfigError) as exc:
        parse_config(document)
    assert exc.value.path == "extras"


def test_hash_stable_under_key_order(document):
    reordered = json.loads(json.dumps(document, sort_keys=True))
    reversed_doc = {k: document[k] for k in reversed(list(document))}
    assert config_hash(document) == config_hash(reordered) == config_hash(reversed_doc)
    changed = with_overrides(document, **{"acquisition.seed": 7})
    assert config_hash(changed) != config_hash(document)


def test_overrides_do_not_mutate(document):
    before = json.dumps(document, sort_keys=True)
    out = with_overrides(document, **{"franson.dwell": 3.0})
    assert json.dumps(document, sort_keys=True) == before
    assert parse_config(out).franson.dwell == 3.0


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_manifest_round_trip(tmp_path):
    m = RunManifest("pairs", "abc", 5)
    m.start()
    m.add("singles", tmp_path / "singles.csv")
    m.stop()
    m.write(tmp_path / "manifest.json")
    data = json.loads((tmp_path / "manifest.json").read_text())
    assert data["command"] == "pairs" and data["seed"] == 5
    assert data["artifacts"]["singles"].endswith("singles.csv")
    assert "wall_seconds" in data["runtime"]
