import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from ringpairs.config import paper_config, paper_config_path, with_overrides


@pytest.fixture(scope="session")
def paper():
    return paper_config()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


QUICK_OVERRIDES = {
    "pairs.duration": 0.5,
    "spectrum.step_nm": 0.05,
    "multichannel.duration": 0.5,
    "franson.dwell": 0.5,
    "franson.mc_iterations": 50,
    "hbt.g2_duration": 0.5,
    "hbt.herald_duration": 1.0,
    "hbt.sweep_duration": 1.0,
    "table1.channels": [5, 6],
    "table1.g2_duration": 0.5,
    "table1.herald_duration": 1.0,
    "table1.franson_dwell": 0.5,
    "table1.mc_iterations": 50,
}


@pytest.fixture(scope="session")
def quick_config(tmp_path_factory):
    """Shipped config with desk durations cut down for plumbing tests."""
    doc = json.loads(paper_config_path().read_text())
    path = tmp_path_factory.mktemp("cfg") / "quick.json"
    path.write_text(json.dumps(with_overrides(doc, **QUICK_OVERRIDES)))
    return path


def _digest(run_dir):
    """sha256 of every artifact under ``run_dir``; manifest runtime metadata excluded."""
    out = {}
    for path in sorted(Path(run_dir).rglob("*")):
        if not path.is_file():
            continue
        data = path.read_bytes()
        if path.name == "manifest.json":
            doc = json.loads(data)
            doc.pop("runtime", None)
            data = json.dumps(doc, sort_keys=True).encode()
        out[str(path.relative_to(run_dir))] = hashlib.sha256(data).hexdigest()
    return out


@pytest.fixture(scope="session")
def digest():
    return _digest


_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def report():
    """Record one acceptance line: report(number, passed, detail)."""
    def _report(number, passed, detail):
        _ACCEPTANCE[number] = ("PASS" if passed else "FAIL", detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
        return passed
    return _report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {detail}")
