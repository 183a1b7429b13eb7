import pytest

from hybridqkd.gaussian import von_neumann_entropy
from hybridqkd.protocol import (
    DetectorModelError,
    MemoryParams,
    SystemModel,
    bob_variance,
    derived_noises,
    detector_dilated_state,
    mutual_info_ab,
    mutual_info_ab_numeric,
)


@pytest.mark.parametrize("eta,v_el", [(0.6, 0.015), (1.0, 0.0), (0.9, 0.2)])
def test_mutual_information_routes(eta, v_el):
    m = SystemModel(V=12.0, T=0.3, xi=0.02, eta=eta, v_el=v_el)
    assert mutual_info_ab(m) == pytest.approx(mutual_info_ab_numeric(m), abs=1e-12)


def test_bob_variance_matches_dilation():
    m = SystemModel(V=8.0, T=0.2, xi=0.05, eta=0.7, v_el=0.03)
    state = detector_dilated_state(m)
    assert state.block(["B2"])[0, 0] == pytest.approx(bob_variance(m))
    assert bob_variance(m) == pytest.approx(0.7 * 0.2 * (8 + derived_noises(m).chi_t))


def test_detector_dilation_is_invertible_only_below_unit_efficiency():
    with pytest.raises(DetectorModelError):
        detector_dilated_state(SystemModel(V=3.0, T=0.5, eta=1.0, v_el=0.1))
    ideal = detector_dilated_state(SystemModel(V=3.0, T=0.5))
    assert ideal.labels == ("A", "B2")


def test_detector_dilation_is_pure_on_a_noiseless_line():
    m = SystemModel(V=5.0, T=1.0, eta=0.6, v_el=0.1)
    assert von_neumann_entropy(detector_dilated_state(m)) == pytest.approx(0.0, abs=1e-9)
    lossy = SystemModel(V=5.0, T=0.4, eta=0.6, v_el=0.1)
    assert von_neumann_entropy(detector_dilated_state(lossy)) > 0.1


@pytest.mark.parametrize("field,value", [("V", 0.5), ("T", 0.0), ("T", 1.2), ("xi", -0.1), ("eta", 0.0), ("v_el", -1)])
def test_model_validation(field, value):
    kw = dict(V=3.0, T=0.5)
    kw[field] = value
    with pytest.raises(ValueError):
        SystemModel(**kw)


def test_memory_validation():
    with pytest.raises(ValueError):
        MemoryParams(tau1=1.1)
    with pytest.raises(ValueError):
        MemoryParams(omega2=0.9)
    assert MemoryParams.identical(0.3, 2.0) == MemoryParams(0.3, 0.3, 2.0, 2.0)
