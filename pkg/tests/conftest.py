from __future__ import annotations

import pytest

from diecam.meshgen import synthetic_die
from diecam.pipeline import (AnalysisStages, PipelineConfig,
                             default_compatibility,
                             default_technological_data,
                             default_tool_library)


@pytest.fixture(scope="session")
def die_mesh():
    return synthetic_die()


@pytest.fixture(scope="session")
def die_config():
    # the die's rim and base fillets sit around 0.4% of total area, so the
    # default 1% floor would absorb them; 0.2% keeps them as features
    return PipelineConfig(min_region_area_frac=0.002)


@pytest.fixture(scope="session")
def die_stages(die_mesh, die_config):
    return AnalysisStages(die_mesh, die_config, default_tool_library(),
                          default_technological_data(),
                          default_compatibility())


@pytest.fixture(scope="session")
def die_plan(die_stages):
    return die_stages.plan()
