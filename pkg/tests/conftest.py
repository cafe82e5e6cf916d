import numpy as np
import pytest

from midmod import features, simulator
from midmod.eventlog import EventLog, EventRecord, Topic

ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def acceptance(request):
    """Callable recording one acceptance verdict line for the run summary."""
    lines = request.config.stash[ACCEPTANCE]

    def record(number, ok, detail):
        lines[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])


@pytest.fixture(scope="session")
def small_world():
    """A 600-user synthetic world, shared by the tests that only read it."""
    return simulator.synthesize_dataset(simulator.SimulationConfig(users=600, rng_seed=3))


@pytest.fixture(scope="session")
def small_datasets(small_world):
    w = small_world
    return features.build_datasets(w.graph, w.log, w.profiles, w.topics[0])


@pytest.fixture
def coffee():
    return Topic("coffee", frozenset({"coffee", "espresso"}))


def tweet(event_id, user, ts, tokens=(), **kw):
    return EventRecord(event_id, user, float(ts), "tweet", tokens=tuple(tokens), **kw)


def react(event_id, user, ts, kind, ref, tokens=(), **kw):
    return EventRecord(event_id, user, float(ts), kind, ref_event=ref.event_id, ref_author=ref.user,
                       tokens=tuple(tokens), **kw)


def make_log(records, window=None):
    return EventLog(records, window=window)


def planted_xy(n=2000, p=10, col=7, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, p))
    y = (X[:, col] > 0.5).astype(int)
    return X, y
