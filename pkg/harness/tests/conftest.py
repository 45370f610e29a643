import json
import os
import subprocess
import sys

import pytest

os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "2")


def run_dataset_cli(*args):
    """Invoke the dataset tooling CLI; the harness only consumes its files."""
    result = subprocess.run(
        [sys.executable, "-m", "sonosim.cli", *map(str, args)],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    return result.stdout


@pytest.fixture(scope="session")
def fixtures_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("conformance") / "fixtures"
    run_dataset_cli("fixtures", "--out", out, "--seed", "7")
    return out


@pytest.fixture(scope="session")
def sim8_manifest(fixtures_dir):
    return fixtures_dir / "sim8" / "manifest.json"


@pytest.fixture(scope="session")
def invivo_like_manifest(tmp_path_factory, sim8_manifest):
    """The tiny simulated set relabeled as an in vivo style target manifest."""
    raw = json.loads(sim8_manifest.read_text())
    raw["dataset_kind"] = "invivo"
    out = sim8_manifest.parent / "manifest_invivo_like.json"
    out.write_text(json.dumps(raw, sort_keys=True, indent=2) + "\n")
    return out
