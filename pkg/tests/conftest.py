import numpy as np
import pytest

from hcattn.quantizer import Codebook, QuantizerConfig
from hcattn.tensor_io import SyntheticSpec, gen_synthetic


def planted_keys(n, d, g, clusters, seed, noise=0.0):
    spec = SyntheticSpec("planted-clusters", n=n, d=d, seed=seed, clusters=clusters,
                         noise=noise, groups=g)
    return gen_synthetic(spec).data


def random_codebook(rng, d, g, c):
    cfg = QuantizerConfig(d=d, g=g, c=c)
    return Codebook(rng.normal(size=(g, c, d // g)).astype(np.float32), cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
