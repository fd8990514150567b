"""Unit tests for the anti-piracy game, pirates, verifier registry and query POVM."""

from __future__ import annotations

import numpy as np
import pytest

import src.piracy.game as game
from src.core.errors import PreconditionError
from src.gf2.linear import membership_mask, sample_subspace, sample_subspace_of
from src.oracles.membership import MembershipOracle, QueryLog, with_flag
from src.oracles.programs import effective_accept_operator
from src.piracy.game import (
    GameOutcome,
    get_protocol,
    lab_round,
    monte_carlo_sigma,
    play_pirate,
    run_piracy_game,
)
from src.piracy.pirates import available_pirates, copy_in_basis, get_pirate
from src.piracy.povm import povm_accept_probability, query_povm_measure, reduction_chain
from src.piracy.stats import binomial_sigma, draw_interval, hoeffding_radius, wilson_interval
from src.piracy.verifiers import available_verifiers, get_verifier
from src.protocol.instances import make_instance
from src.protocol.vstar import vstar_oracles
from src.statesim.states import subspace_state

LEGAL_PIRATES = ["forward-and-pad", "measure-resend", "coherent-copy", "membership-probe"]


# ---------------------------------------------------------------------------
# Registries
# ---------------------------------------------------------------------------


def test_pirate_registry() -> None:
    assert set(LEGAL_PIRATES) <= set(available_pirates())
    assert "oracle-cheat" in available_pirates()
    assert "oracle-cheat" not in available_pirates(legal_only=True)
    assert not get_pirate("oracle-cheat").legal
    with pytest.raises(PreconditionError):
        get_pirate("teleporter")


def test_verifier_registry_loads_candidate_plugin() -> None:
    names = available_verifiers()
    assert {"vstar", "vstar-swapped", "vstar-dummy", "candidate"} <= set(names)
    with pytest.raises(PreconditionError):
        get_verifier("nobody", 4)


def test_dummy_queries_cancel_out() -> None:
    inst = make_instance(4, "NO_BA", 5)
    plain = effective_accept_operator(get_verifier("vstar", 4), vstar_oracles(inst)).to_dense()
    dummy = effective_accept_operator(get_verifier("vstar-dummy", 4), vstar_oracles(inst)).to_dense()
    assert np.allclose(plain, dummy, atol=1e-12)
    assert get_verifier("vstar-dummy", 4).query_count == 4


def test_unknown_protocol_is_rejected() -> None:
    assert get_protocol("lab") is lab_round
    with pytest.raises(PreconditionError):
        get_protocol("smoke-signals")


def test_lab_round_refuses_sizes_without_instances(rng) -> None:
    with pytest.raises(PreconditionError):
        lab_round(6, rng)


# ---------------------------------------------------------------------------
# Pirates
# ---------------------------------------------------------------------------


def test_copy_in_basis_is_normalized(rng) -> None:
    amps = subspace_state(sample_subspace(4, 2, rng)).amplitudes
    state = copy_in_basis(amps, 4)
    assert np.isclose(np.linalg.norm(state.to_joint()), 1.0)
    assert np.allclose(np.real(np.diag(state.reduced_left())), np.abs(amps) ** 2)


def test_measure_resend_branches_follow_proof_distribution(rng) -> None:
    game_round = lab_round(4, rng)
    ensemble, setup = play_pirate(game_round, get_pirate("measure-resend"), rng, None)
    assert len(ensemble.entries) == 4
    assert np.allclose(ensemble.weights, 0.25)
    assert setup.queries_made == 0


def test_coherent_copy_spends_one_query(rng) -> None:
    game_round = lab_round(4, rng)
    _, setup = play_pirate(game_round, get_pirate("coherent-copy"), rng, None)
    assert setup.queries_made == 1


def test_membership_probe_respects_budget(rng) -> None:
    game_round = lab_round(8, rng)
    _, setup = play_pirate(game_round, get_pirate("membership-probe"), rng, 3)
    assert setup.queries_made <= 3


# ---------------------------------------------------------------------------
# Game
# ---------------------------------------------------------------------------


def test_forward_and_pad_exact_value() -> None:
    outcome = run_piracy_game(4, "forward-and-pad", trials=1, seed=1, mode="exact", exact_instances=3)
    assert outcome.mode == "exact"
    assert outcome.joint_accept == pytest.approx(2.0**-2)
    assert outcome.ci_low == pytest.approx(outcome.ci_high)
    assert outcome.queries == 0
    assert outcome.legal


def test_measure_resend_exact_value() -> None:
    outcome = run_piracy_game(4, "measure-resend", trials=1, seed=2, mode="exact", exact_instances=2)
    assert outcome.joint_accept == pytest.approx(2.0**-4)


@pytest.mark.parametrize("pirate", LEGAL_PIRATES)
def test_legal_pirates_stay_below_the_zero_proof_level(pirate) -> None:
    outcome = run_piracy_game(4, pirate, trials=1, seed=3, mode="exact", exact_instances=2)
    assert outcome.joint_accept <= 2.0**-2 + 1e-9


def test_swapped_verifier_pair() -> None:
    outcome = run_piracy_game(
        4, "forward-and-pad", "vstar", "vstar-swapped", trials=1, seed=4, mode="exact", exact_instances=2
    )
    # register 2 holds |0^n>, which passes the Hadamard-basis B-test with mass |B|/2^n
    assert outcome.joint_accept == pytest.approx(2.0**-2)


def test_illegal_baseline_is_flagged_and_wins() -> None:
    outcome = run_piracy_game(4, "oracle-cheat", trials=1, seed=5, mode="exact", exact_instances=2)
    assert outcome.joint_accept == pytest.approx(1.0)
    assert not outcome.legal
    assert "illegal-baseline" in outcome.notes


def test_monte_carlo_estimate_is_close_to_exact() -> None:
    outcome = run_piracy_game(4, "forward-and-pad", trials=2000, seed=6, mode="monte_carlo")
    assert outcome.mode == "monte_carlo"
    assert outcome.successes is not None
    assert outcome.ci_low <= outcome.joint_accept <= outcome.ci_high
    assert abs(outcome.joint_accept - 0.25) < 0.05
    assert monte_carlo_sigma(outcome) > 0.0


def test_game_is_reproducible_for_a_seed() -> None:
    first = run_piracy_game(4, "measure-resend", trials=300, seed=9, mode="monte_carlo")
    second = run_piracy_game(4, "measure-resend", trials=300, seed=9, mode="monte_carlo")
    assert first.successes == second.successes


def test_auto_mode_picks_exact_for_small_sizes() -> None:
    outcome = run_piracy_game(4, "forward-and-pad", trials=1, seed=0, exact_instances=1)
    assert outcome.mode == "exact"
    assert monte_carlo_sigma(outcome) == 0.0


def test_oracle_guessing_pirate_is_exact_because_every_draw_agrees() -> None:
    # register 2 is a basis state inside A, which passes V* with mass 2^{-n/2}
    outcome = run_piracy_game(4, "membership-probe", trials=1, seed=11, mode="exact", exact_instances=4)
    assert outcome.mode == "exact"
    assert outcome.joint_accept == pytest.approx(2.0**-2)
    assert outcome.ci_low == pytest.approx(outcome.ci_high)


def test_exact_mode_reports_instance_average_when_draws_disagree(monkeypatch) -> None:
    draws = {0: 0.1, 1: 0.2, 2: 0.3, 3: 0.4}

    def varying_unit(n, pirate, v1, v2, protocol, budget, seed, index):
        return draws[index], 1

    monkeypatch.setattr(game, "_exact_unit", varying_unit)
    outcome = run_piracy_game(
        4, "forward-and-pad", trials=1, seed=0, mode="exact", exact_instances=4, jobs=1
    )

    assert outcome.mode == "instance_average"
    assert outcome.joint_accept == pytest.approx(0.25)
    assert outcome.ci_low < 0.25 < outcome.ci_high
    assert outcome.ci_high - outcome.ci_low > 0.3 - 0.2
    assert "instance-dependent" in outcome.notes
    assert outcome.queries == 4
    expected_sigma = np.std(list(draws.values()), ddof=1) / 2.0
    assert monte_carlo_sigma(outcome) == pytest.approx(expected_sigma)


@pytest.mark.slow
def test_monte_carlo_agrees_with_exact_within_three_sigma() -> None:
    exact = run_piracy_game(4, "forward-and-pad", trials=1, seed=12, mode="exact", exact_instances=2)
    sampled = run_piracy_game(4, "forward-and-pad", trials=10_000, seed=12, mode="monte_carlo")
    assert sampled.trials == 10_000
    assert abs(sampled.joint_accept - exact.joint_accept) <= 3 * monte_carlo_sigma(sampled)


def test_game_rejects_bad_arguments() -> None:
    with pytest.raises(PreconditionError):
        run_piracy_game(4, "forward-and-pad", trials=0)
    with pytest.raises(PreconditionError):
        run_piracy_game(4, "forward-and-pad", mode="psychic")
    with pytest.raises(PreconditionError):
        run_piracy_game(4, "forward-and-pad", mode="exact", exact_instances=0)


def test_outcome_interval_must_bracket_estimate() -> None:
    with pytest.raises(PreconditionError):
        GameOutcome(4, "p", "vstar", "vstar", "lab", "exact", 1, 0.5, 0.6, 0.7, 0, True)


# ---------------------------------------------------------------------------
# Query POVM and the reduction chain
# ---------------------------------------------------------------------------


def test_povm_on_logged_queries(rng) -> None:
    a = sample_subspace(4, 2, rng)
    smaller = sample_subspace_of(a, 1, rng)
    log = QueryLog()
    oracle = MembershipOracle(a, "A", log=log, record_distribution=True)
    oracle.apply(with_flag(subspace_state(a)))
    assert povm_accept_probability(log) == pytest.approx(1.0)
    assert povm_accept_probability(log, {"A": smaller}) == pytest.approx(0.5)
    verdict = query_povm_measure(log, rng)
    assert verdict.accept
    assert verdict.query_index == 0
    assert verdict.sampled is not None and membership_mask(a)[verdict.sampled.bits]


def test_povm_without_queries_rejects(rng) -> None:
    verdict = query_povm_measure(QueryLog(), rng)
    assert not verdict.accept
    assert verdict.sampled is None
    assert povm_accept_probability(QueryLog()) == 0.0


def test_povm_needs_distributions(rng) -> None:
    a = sample_subspace(3, 1, rng)
    log = QueryLog()
    MembershipOracle(a, "A", log=log).apply(with_flag(subspace_state(a)))
    with pytest.raises(PreconditionError):
        query_povm_measure(log, rng)


@pytest.mark.parametrize("pirate", ["forward-and-pad", "measure-resend", "coherent-copy"])
def test_reduction_chain_holds(pirate) -> None:
    chain = reduction_chain(4, pirate, seed=7, instances=2)
    assert chain.p1 == chain.p2 == 2
    assert chain.holds
    assert chain.joint_vv <= chain.chain_bound + 1e-9
    assert chain.to_row()["holds"] is True


def test_reduction_chain_needs_instances() -> None:
    with pytest.raises(PreconditionError):
        reduction_chain(4, "forward-and-pad", instances=0)


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def test_wilson_interval_brackets_the_estimate() -> None:
    low, high = wilson_interval(30, 100)
    assert low < 0.3 < high
    assert wilson_interval(0, 10)[0] == 0.0
    assert wilson_interval(10, 10)[1] == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        wilson_interval(11, 10)
    with pytest.raises(PreconditionError):
        wilson_interval(0, 0)


def test_draw_interval_over_instance_values() -> None:
    assert draw_interval([0.25, 0.25, 0.25]) == (0.25, 0.25, 0.25, 0.0)
    assert draw_interval([0.4]) == (0.4, 0.4, 0.4, 0.0)
    mean, low, high, sem = draw_interval([0.0, 1.0])
    assert mean == pytest.approx(0.5)
    # the t interval on two draws is wider than [0, 1] and gets clipped
    assert (low, high) == (0.0, 1.0)
    assert sem == pytest.approx(0.5)
    with pytest.raises(PreconditionError):
        draw_interval([])


def test_hoeffding_and_binomial_sigma() -> None:
    assert hoeffding_radius(200) == pytest.approx(np.sqrt(np.log(40) / 400))
    assert binomial_sigma(0.5, 100) == pytest.approx(0.05)
    with pytest.raises(PreconditionError):
        hoeffding_radius(0)
