import pytest

from perfedavg_simulator.cli.run_spec import parse_run_spec

SMALL_QUADRATIC = """
seed: 3
task:
  dim: 2
federation:
  n: 4
  tau: 2
  rounds: 3
estimator:
  inner_batch: 2
  outer_batch: 2
  hessian_batch: 2
diagnostics:
  mc_trials: 20
  probes: 3
  smoothness_pairs: 5
  seeds: 2
  compare_seeds: 2
  personalization_batch: 4
"""

SMALL_LOGISTIC = """
seed: 5
task:
  family: logistic
  feature_dim: 4
  per_class: 40
federation:
  n: 4
  tau: 2
  rounds: 2
  beta: 0.01
estimator:
  inner_batch: 4
  outer_batch: 4
  hessian_batch: 4
partition:
  a: 8
diagnostics:
  probes: 3
"""


@pytest.fixture
def quadratic_text():
    return SMALL_QUADRATIC


@pytest.fixture
def quadratic_spec():
    return parse_run_spec(SMALL_QUADRATIC)


@pytest.fixture
def logistic_spec():
    return parse_run_spec(SMALL_LOGISTIC)
