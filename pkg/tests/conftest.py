import sys
from datetime import date, datetime
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from modeboost.core import DemandPanel, TimeGrid, chronological_split
from modeboost.ingest import SynthSpec, generate_synthetic


@pytest.fixture
def tiny_panel():
    """Two entities, 30 deterministic minutes starting on a Monday."""
    grid = TimeGrid(datetime(2021, 1, 4, 9, 0), 30)
    rng = np.random.default_rng(11)
    return DemandPanel.from_values(
        grid,
        {
            "centrum": rng.poisson(6.0, 30),
            "haven": rng.poisson(2.0, 30),
        },
    )


@pytest.fixture(scope="session")
def small_synth_panel():
    """Three entities over four days with weekly structure and a holiday dip."""
    spec = SynthSpec(
        entities=3,
        days=4,
        amplitudes=(8.0, 14.0, 20.0),
        weekly_factor=0.5,
        noise=1.0,
        holiday_dates=(date(2021, 12, 8),),
        seed=42,
    )
    return generate_synthetic(spec)


@pytest.fixture(scope="session")
def small_split(small_synth_panel):
    return chronological_split(small_synth_panel)
