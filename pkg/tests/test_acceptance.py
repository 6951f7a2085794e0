"""Acceptance suite at the default manifest sizes and tolerances.

Each criterion prints one ``[PASS]``/``[FAIL]`` line (shown even without
``-s``).  Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import pytest

from loopmoment import experiments as X

IDS = sorted(X.CRITERIA) + [11]


@pytest.fixture(scope="module")
def manifest():
    return X.ExperimentManifest()


@pytest.mark.slow
@pytest.mark.parametrize("cid", IDS)
def test_criterion(cid, manifest, capsys):
    fn = X.criterion_determinism if cid == 11 else X.CRITERIA[cid]
    result = fn(manifest)
    with capsys.disabled():
        print("\n" + result.line(), flush=True)
    assert result.id == cid
    assert result.passed, result.line()
