import pytest

from dpcache.traces import ZipfSpec, generate_zipf

# Desk-scale workload: a frozen synthetic trace whose hit-ratio regime at
# capacity 128 (k=8, d=16) sits where the published single-region numbers do.
DESK_SPEC = ZipfSpec(N=700, s=0.99, length=200_000, seed=2026)


@pytest.fixture(scope="session")
def desk_trace():
    return generate_zipf(DESK_SPEC)


@pytest.fixture(scope="session")
def zipf_1m_trace():
    return generate_zipf(ZipfSpec(N=10**6, s=0.99, length=10**6, seed=42))
