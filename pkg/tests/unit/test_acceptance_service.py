"""
Tests for the acceptance service on its fast criteria.
"""
import pytest

from spinlab.core.exceptions import ConfigurationError
from spinlab.dynamics.rng import RandomStream
from spinlab.services.acceptance_service import (
    SUITES,
    AcceptanceService,
    acceptance_corpus,
    format_report,
    random_pinning,
)


def test_corpus_is_small():
    corpus = acceptance_corpus()
    assert len(corpus) == 12
    assert all(system.n <= 8 for _, system in corpus)
    assert SUITES["all"] == tuple(range(1, 13))


def test_random_pinning_leaves_a_free_vertex():
    for i, (_, system) in enumerate(acceptance_corpus()):
        pinning = random_pinning(system, RandomStream(3, (i,)))
        assert len(pinning) < system.n


def test_oracle_suite_passes():
    report = AcceptanceService(seed=1, quick=True).run("oracle")
    assert report.passed
    assert [r.criterion for r in report.results] == [1, 2, 12]
    assert report.results[0].metrics["Z(P3) error"] == pytest.approx(0.0, abs=1e-12)
    assert "suite oracle: PASS" in format_report(report)


def test_injected_fault_fails_only_its_criterion():
    report = AcceptanceService(seed=1, quick=True, inject_fault=12).run("oracle")
    assert not report.passed
    assert [r.criterion for r in report.failed()] == [12]
    assert "FAIL" in format_report(report)


def test_bad_arguments():
    with pytest.raises(ConfigurationError):
        AcceptanceService().run("")
    with pytest.raises(ConfigurationError):
        AcceptanceService().run("everything")
    with pytest.raises(ConfigurationError):
        AcceptanceService(inject_fault=13)
