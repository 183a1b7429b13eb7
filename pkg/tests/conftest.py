import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hybridqkd import MemoryParams, SystemModel  # noqa: E402

FIG2 = dict(T=0.1, xi=0.01, eta=0.6, v_el=0.015)


@pytest.fixture
def fig2_model():
    def make(V=5.0, tau=1.0, omega=1.0, **kw):
        return SystemModel(V=V, **{**FIG2, **kw}, memory=MemoryParams.identical(tau, omega))
    return make
