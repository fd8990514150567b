"""Unit tests for the counterfeiting experiments."""

from __future__ import annotations

import pytest

import src.piracy.counterfeit as counterfeit
from src.core.errors import PreconditionError
from src.piracy.counterfeit import ATTACKS, counterfeit_experiment, get_attack, reference_curve


def test_reference_curve_values() -> None:
    assert reference_curve(4, 0) == pytest.approx(0.25)
    # one Grover round already saturates at n=4
    assert reference_curve(4, 1) == pytest.approx(1.0)
    assert reference_curve(8, 0) == pytest.approx(2.0**-4)
    assert all(0.0 <= reference_curve(12, q) <= 1.0 for q in range(20))


def test_attack_registry() -> None:
    assert set(ATTACKS) == {"measure-and-guess", "grover-search", "both-copies"}
    assert not get_attack("both-copies").legal
    with pytest.raises(PreconditionError):
        get_attack("photocopier")


@pytest.mark.parametrize("predicate", ["pair", "nonzero"])
def test_measure_and_guess_exact_matches_closed_form(predicate) -> None:
    curve = counterfeit_experiment(4, "measure-and-guess", [0, 1, 2, 4], trials=3, seed=1, mode="exact", predicate=predicate)
    assert [p.q for p in curve.points] == [0, 1, 2, 4]
    for point in curve.points:
        assert point.matches_closed_form
        assert point.ci_low == pytest.approx(point.ci_high)


def test_measure_and_guess_pair_values() -> None:
    curve = counterfeit_experiment(4, "measure-and-guess", [0, 2], trials=2, seed=2, mode="exact")
    rates = [p.rate for p in curve.points]
    assert rates == pytest.approx([0.25, 1 - 0.75**2])
    assert all(p.below_reference for p in curve.points)


def test_grover_search_tracks_the_reference_curve() -> None:
    curve = counterfeit_experiment(8, "grover-search", [0, 1, 2], trials=2, seed=3, mode="exact")
    for point in curve.points:
        assert point.rate == pytest.approx(reference_curve(8, point.q), abs=1e-9)
        assert point.matches_closed_form


def test_grover_search_hits_certainty_at_n_four() -> None:
    curve = counterfeit_experiment(4, "grover-search", [1], trials=2, seed=4, mode="exact")
    assert curve.points[0].rate == pytest.approx(1.0)


def test_grover_closed_form_only_for_pair_predicate() -> None:
    curve = counterfeit_experiment(4, "grover-search", [1], trials=1, seed=5, mode="exact", predicate="nonzero")
    assert curve.points[0].closed_form is None
    assert curve.points[0].matches_closed_form is None


def test_both_copies_always_succeeds() -> None:
    curve = counterfeit_experiment(8, "both-copies", [0], trials=50, seed=6)
    assert curve.mode == "monte_carlo"
    assert not curve.legal
    assert curve.points[0].successes == 50
    assert curve.points[0].rate == 1.0


def test_monte_carlo_rate_near_closed_form() -> None:
    curve = counterfeit_experiment(4, "measure-and-guess", [2], trials=3000, seed=7)
    point = curve.points[0]
    assert abs(point.rate - point.closed_form) < 0.05
    assert point.queries <= 2 * 3000


def test_duplicate_budgets_collapse_and_rows_follow() -> None:
    curve = counterfeit_experiment(4, "measure-and-guess", [1, 1, 0], trials=1, seed=8, mode="exact")
    rows = curve.to_rows()
    assert [row["q"] for row in rows] == [0, 1]
    assert rows[0]["attack"] == "measure-and-guess"


def test_experiment_rejects_bad_arguments() -> None:
    with pytest.raises(PreconditionError):
        counterfeit_experiment(4, "grover-search", [1], trials=1, mode="guesswork")
    with pytest.raises(PreconditionError):
        counterfeit_experiment(4, "grover-search", [1], trials=1, predicate="any")
    with pytest.raises(PreconditionError):
        counterfeit_experiment(4, "grover-search", [1], trials=0)
    with pytest.raises(PreconditionError):
        counterfeit_experiment(4, "grover-search", [-1], trials=1)
    with pytest.raises(PreconditionError):
        counterfeit_experiment(6, "grover-search", [1], trials=1)


def test_exact_points_get_a_real_interval_when_instances_differ(monkeypatch) -> None:
    def varying_unit(n, attack_name, q, predicate, seed, index):
        return 0.5 if index % 2 else 0.3

    monkeypatch.setattr(counterfeit, "_exact_unit", varying_unit)
    point = counterfeit_experiment(4, "measure-and-guess", [1], trials=6, seed=9, mode="exact", jobs=1).points[0]
    assert point.rate == pytest.approx(0.4)
    assert point.ci_low < 0.4 < point.ci_high
    assert point.successes is None
