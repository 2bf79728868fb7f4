import numpy as np
import pytest

from simlabel.embedding_store import EmbeddingMatrix


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def unit_matrix(rng, n, d):
    """Random rows on the unit sphere."""
    m = rng.standard_normal((n, d))
    m /= np.linalg.norm(m, axis=1, keepdims=True)
    return EmbeddingMatrix(data=m.astype(np.float32))
