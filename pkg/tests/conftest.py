import pytest

from tsmcast.model import CacheDesign, ModelBundle, NetworkConfig, SchemeConfig, db_to_linear, zipf_popularity

DEFAULT_P = (0.7, 0.2, 0.06, 0.02, 0.02)


@pytest.fixture(scope="session")
def ref_net():
    return NetworkConfig(lambda_b=0.01, lambda_u=0.1, alpha=4.0, bandwidth_w=1e7, snr_ratio=db_to_linear(30))


@pytest.fixture(scope="session")
def ref_pop():
    return zipf_popularity(5, 2.0)


@pytest.fixture(scope="session")
def ref_design():
    return CacheDesign.dense(5, 4, DEFAULT_P)


@pytest.fixture(scope="session")
def ref_bundle(ref_net, ref_pop, ref_design):
    return ModelBundle(ref_net, ref_pop, ref_design, SchemeConfig(2, 1e6))
