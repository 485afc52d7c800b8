import os
import sys
from functools import lru_cache

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from rho.features import emit_dataset, parse_dataset  # noqa: E402
from rho.pipeline import build_group  # noqa: E402
from rho.placement import CostModelConfig, default_suite, generate_trace  # noqa: E402

SUITE_SEED = 7


@lru_cache(maxsize=None)
def oracle_suite(n_groups=30, seed=SUITE_SEED):
    """(rows, times, results) for the generated suite, rows re-read from CSV text."""
    suite = default_suite(n_groups, seed=seed)
    results = [build_group(generate_trace(g, 1000 + i), g.name, CostModelConfig())
               for i, g in enumerate(suite.groups)]
    rows = parse_dataset(emit_dataset([r.rows for r in results]))
    times = {r.name: dict(r.times) for r in results}
    return rows, times, results


@pytest.fixture(scope="session")
def suite30():
    return oracle_suite()
