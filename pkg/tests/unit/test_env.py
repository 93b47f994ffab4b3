import os
from unittest.mock import patch

from bicomb.env import _positive_int


def test_positive_int_default_when_unset():
    with patch.dict(os.environ, {}, clear=True):
        assert _positive_int("BICOMBING_LAB_THREADS", 4) == 4


def test_positive_int_reads_value():
    with patch.dict(os.environ, {"BICOMBING_LAB_THREADS": "3"}):
        assert _positive_int("BICOMBING_LAB_THREADS", 4) == 3


def test_positive_int_falls_back_to_one():
    with patch.dict(os.environ, {"BICOMBING_LAB_THREADS": "many"}):
        assert _positive_int("BICOMBING_LAB_THREADS", 4) == 1
    with patch.dict(os.environ, {"BICOMBING_LAB_THREADS": "-2"}):
        assert _positive_int("BICOMBING_LAB_THREADS", 4) == 1
