import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from crisisspot.config import ModelConfig
from crisisspot.lexicons import Lexicons
from crisisspot.model import CrisisSpotModel, prepare_split
from crisisspot.social import SocialNormStats
from crisisspot.synthetic import generate_synthetic

MICRO_DIMS = (4, 6, 8, 6)


@pytest.fixture(autouse=True, scope="session")
def single_thread():
    with threadpool_limits(limits=1):
        yield


@pytest.fixture(scope="session")
def lexicons():
    return Lexicons.default()


def micro_setup(task="informative", n=12, seed=3, dtype=np.float32, dropout=0.0, lexicons=None,
                jitter=0.0):
    """Tiny corpus + model for gradient and training checks.

    ``jitter`` moves gains, shifts and biases off their initial 1/0 values so
    gradient checks exercise every term.
    """
    lex = lexicons or Lexicons.default()
    corpus = generate_synthetic(seed, n, task=task, dims=MICRO_DIMS, separation=1.0)
    cfg = ModelConfig.for_dims(*MICRO_DIMS, d_se=5, task=task, dropout=dropout, threshold=0.3, sample_size=3)
    norm = SocialNormStats.fit(corpus.records, lex)
    data = prepare_split(corpus, lex, norm, cfg)
    model = CrisisSpotModel.create(cfg, seed=1, dtype=dtype)
    if jitter:
        rng = np.random.default_rng(99)
        for name, t in model.store.params.items():
            if name.endswith((".b", ".gamma", ".beta")):
                t.data += (jitter * rng.standard_normal(t.shape)).astype(t.dtype)
        for name, value in model.store.buffers().items():
            delta = jitter * rng.standard_normal(value.shape)
            value = value + (np.abs(delta) if name.endswith("var") else delta)
            model.store.set_buffer(name, value.astype(dtype))
    return model, data


def model_loss_fn(model, data, idx=None, aggregators=None):
    """Deterministic full-model loss as a function of a parameter store."""
    idx = np.arange(len(data)) if idx is None else idx
    aggs = aggregators or model.aggregators(data, seed=[0])
    twins = {}

    def loss_fn(store):
        if store is model.store:
            m = model
        else:
            m = twins.get(id(store)) or twins.setdefault(id(store), model.with_store(store))
        logits = m.forward(data, idx, "train", aggregators=aggs, update_stats=False)
        return m.loss(logits, data.labels[idx])
    return loss_fn


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
