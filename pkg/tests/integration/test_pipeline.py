"""Runs the command line pipeline end to end on small federations"""

import json
import os

import numpy as np
import pytest

from perfedavg_simulator.cli.main import main
from perfedavg_simulator.common.constants import ENV_VARS, EXIT_CODES, OUTPUT_FILES
from perfedavg_simulator.diagnostics.bound_formulas import corollary_schedule
from perfedavg_simulator.diagnostics.checks import average_stationarity
from perfedavg_simulator.federation.config import BetaSchedule, FederationConfig
from perfedavg_simulator.federation.output import read_model_blob
from perfedavg_simulator.federation.server import run_training
from perfedavg_simulator.kernel.rng import RngStream
from perfedavg_simulator.metagrad.estimator_config import EstimatorKind, MetaEstimator
from perfedavg_simulator.objective.quadratic import make_synthetic_federation

QUADRATIC = """
seed: 11
task:
  dim: 3
federation:
  n: 6
  r: 0.5
  tau: 3
  rounds: 20
estimator:
  kind: hf
  inner_batch: 4
  outer_batch: 4
  hessian_batch: 4
diagnostics:
  mc_trials: 200
  probes: 4
  smoothness_pairs: 20
  seeds: 3
  compare_seeds: 2
  personalization_batch: 8
"""

MNIST = """
profile: full
federation:
  n: 4
  rounds: 2
  tau: 2
partition:
  a: 20
task:
  hidden: [8]
diagnostics:
  compare_seeds: 1
"""


def write_config(directory, text):
    path = os.path.join(directory, "run.yaml")
    with open(path, "w", encoding="utf-8") as config_file:
        config_file.write(text)
    return path


def run_command(command, config, out_dir, *extra):
    args = [command, "--config", config, "--out-dir", out_dir, "--log-level", "warning"]
    return main([*args, *extra])


class TestQuadraticPipeline:
    def test_train_diagnose_compare(self, tmp_path):
        config = write_config(tmp_path, QUADRATIC)
        for command in ("train", "diagnose", "compare"):
            out_dir = os.path.join(tmp_path, command)
            assert run_command(command, config, out_dir) == EXIT_CODES.SUCCESS

        w_final = read_model_blob(os.path.join(tmp_path, "train", OUTPUT_FILES.MODEL_BLOB))
        assert w_final.shape == (3,) and np.all(np.isfinite(w_final))

        with open(os.path.join(tmp_path, "diagnose", OUTPUT_FILES.DIAGNOSTICS)) as report_file:
            diagnostics = json.load(report_file)
        names = {report["name"] for report in diagnostics["reports"]}
        assert {"meta.smoothness", "meta.dissimilarity", "hf.bias", "stationarity"} <= names
        # constants of quadratic tasks are declared, so these bounds must hold
        deterministic = ("meta.smoothness", "meta.dissimilarity", "stationarity")
        assert all(
            report["passed"] for report in diagnostics["reports"] if report["name"] in deterministic
        )

        with open(os.path.join(tmp_path, "compare", OUTPUT_FILES.COMPARISON)) as comparison_file:
            rows = json.load(comparison_file)["rows"]
        assert [row["label"] for row in rows] == ["fedavg", "perfedavg-fo", "perfedavg-hf"]

    def test_replays_with_seed_and_workers(self, tmp_path):
        config = write_config(tmp_path, QUADRATIC)
        outputs = {}
        for name, workers in (("one", "1"), ("two", "1"), ("pooled", "3")):
            out_dir = os.path.join(tmp_path, name)
            assert run_command("train", config, out_dir, "--workers", workers) == 0
            with open(os.path.join(out_dir, OUTPUT_FILES.ROUND_LOG), "rb") as log:
                outputs[name] = log.read()
        assert outputs["one"] == outputs["two"] == outputs["pooled"]

    def test_seed_override_changes_run(self, tmp_path):
        config = write_config(tmp_path, QUADRATIC)
        blobs = []
        for seed in ("1", "2"):
            out_dir = os.path.join(tmp_path, seed)
            assert run_command("train", config, out_dir, "--seed", seed) == 0
            blobs.append(read_model_blob(os.path.join(out_dir, OUTPUT_FILES.MODEL_BLOB)))
        assert not np.array_equal(blobs[0], blobs[1])


@pytest.mark.skipif(
    not os.environ.get(ENV_VARS.MNIST_DIR), reason=f"{ENV_VARS.MNIST_DIR} is not set"
)
def test_mnist_subset_pipeline(tmp_path):
    config = write_config(tmp_path, MNIST)
    for command in ("partition", "train"):
        out_dir = os.path.join(tmp_path, command)
        assert run_command(command, config, out_dir) == EXIT_CODES.SUCCESS
    assert os.path.isfile(os.path.join(tmp_path, "partition", OUTPUT_FILES.SIMILARITY))
    assert os.path.isfile(os.path.join(tmp_path, "train", OUTPUT_FILES.PARTITION))


def test_schedule_reaches_stationarity():
    epsilon = 0.1
    schedule = corollary_schedule(epsilon)
    tasks = make_synthetic_federation(10, 5, (0.5, 0.2), (0.0, 0.0), RngStream.from_seed(17))
    cfg = FederationConfig(
        n=10,
        r=1.0,
        tau=schedule.tau,
        K=schedule.K,
        beta=BetaSchedule(schedule.beta),
        estimator=MetaEstimator(alpha=0.1, kind=EstimatorKind.EXACT),
        retain_models=False,
    )
    assert average_stationarity(run_training(tasks, cfg)) < 2.0 * epsilon
