import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import pytest

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")
REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


@pytest.fixture(scope="session")
def dataset_fixture() -> str:
    return os.path.join(FIXTURE_DIR, "dataset_10traj.jsonl")


@pytest.fixture(scope="session")
def golden_fixture() -> str:
    return os.path.join(REPO_ROOT, "fixtures", "annotator_golden.json")


@pytest.fixture(scope="session")
def fixture_pipeline_output(dataset_fixture, tmp_path_factory):
    """One shared mock-backend pipeline run over the committed dataset."""
    from ecotkit.pipeline import PipelineConfig, run

    out = tmp_path_factory.mktemp("pipe") / "out.jsonl"
    cfg = PipelineConfig(dataset=dataset_fixture, output=str(out), backend="mock", seed=7)
    report = run(cfg)
    return str(out), report
