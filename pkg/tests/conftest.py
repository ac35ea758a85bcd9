import itertools

import pytest

from srs.core import Spike

_ids = itertools.count(1)


def mkspike(sid, age=0, cause=(), payload=None):
    s = Spike(next(_ids), sid, frozenset(cause), payload)
    s.age = age
    return s


@pytest.fixture
def spike():
    return mkspike
