import sys
from pathlib import Path

import pytest

# let tests import the shared scripted-client harness
sys.path.insert(0, str(Path(__file__).parent))

from tapstroop.signal import Material, MaterialParams


@pytest.fixture
def rubber():
    return MaterialParams(Material.RUBBER, amplitude_coeff=1.0, decay_rate=90.0, frequency=110.0)


@pytest.fixture
def aluminum():
    return MaterialParams(Material.ALUMINUM, amplitude_coeff=1.0, decay_rate=35.0, frequency=700.0)


@pytest.fixture
def materials(rubber, aluminum):
    return {Material.RUBBER: rubber, Material.ALUMINUM: aluminum}
