"""Unit tests for membership oracles, query logs, verifier programs and hybrids."""

from __future__ import annotations

import numpy as np
import pytest

from src.core.errors import DimensionMismatchError, PreconditionError, QueryBudgetError
from src.gf2.linear import full_space, membership_mask, sample_subspace, sample_subspace_of
from src.oracles.hybrid import difference_mass_set, replace_oracle_hybrid
from src.oracles.membership import (
    QUERY_LOG_COLUMNS,
    MassSet,
    MembershipOracle,
    QueryLog,
    drop_flag,
    oracle_apply,
    query_mass,
    with_flag,
)
from src.oracles.programs import (
    ApplyHadamard,
    Query,
    VerifierProgram,
    effective_accept_operator,
    program_accept_probability,
    run_program,
)
from src.protocol.instances import make_instance
from src.protocol.vstar import honest_prove, vstar_accept_operator, vstar_oracles, vstar_program
from src.statesim.states import basis_state, subspace_state, zero_state


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def test_oracle_flips_flag_on_members_only(rng) -> None:
    s = sample_subspace(3, 1, rng)
    oracle = MembershipOracle(s, "A")
    member_index = s.basis[0]
    out = oracle_apply(oracle, with_flag(basis_state(3, member_index)))
    assert np.isclose(abs(out.amplitudes[member_index + 8]), 1.0)
    outsider = next(x for x in range(1, 8) if x != member_index)
    out = oracle_apply(oracle, with_flag(basis_state(3, outsider)))
    assert np.isclose(abs(out.amplitudes[outsider]), 1.0)
    assert oracle.query_count == 2


def test_oracle_is_self_inverse(rng) -> None:
    s = sample_subspace(4, 2, rng)
    oracle = MembershipOracle(s, "A")
    psi = with_flag(subspace_state(sample_subspace(4, 3, rng)))
    assert oracle.apply(oracle.apply(psi)).allclose(psi)


def test_oracle_budget_is_enforced(rng) -> None:
    oracle = MembershipOracle(sample_subspace(3, 1, rng), "B", budget=2)
    oracle.classical_query(0)
    oracle.classical_query(1)
    with pytest.raises(QueryBudgetError):
        oracle.classical_query(2)
    assert oracle.query_count == 2


def test_classical_query_answers_membership(rng) -> None:
    s = sample_subspace(4, 2, rng)
    oracle = MembershipOracle(s, "A")
    mask = membership_mask(s)
    assert all(oracle.classical_query(x) == bool(mask[x]) for x in range(16))


def test_oracle_rejects_wrong_width(rng) -> None:
    oracle = MembershipOracle(sample_subspace(3, 1, rng), "A")
    with pytest.raises(DimensionMismatchError):
        oracle.apply(zero_state(3))


def test_flag_helpers() -> None:
    psi = basis_state(2, 3)
    flagged = with_flag(psi)
    assert flagged.n_qubits == 3
    assert drop_flag(flagged).allclose(psi)
    with pytest.raises(PreconditionError):
        drop_flag(basis_state(3, 7))


# ---------------------------------------------------------------------------
# Query logs
# ---------------------------------------------------------------------------


def test_query_mass_on_difference_set(rng) -> None:
    a = sample_subspace(4, 2, rng)
    smaller = sample_subspace_of(a, 1, rng)
    psi = with_flag(subspace_state(a))
    assert np.isclose(query_mass(psi, MassSet("A", a)), 1.0)
    assert np.isclose(query_mass(psi, difference_mass_set("A", a, smaller)), 0.5)


def test_mass_set_rejects_mixed_spaces(rng) -> None:
    with pytest.raises(DimensionMismatchError):
        MassSet("bad", sample_subspace(3, 1, rng), sample_subspace(4, 1, rng))


def test_logged_oracle_records_masses(rng, tmp_path) -> None:
    a = sample_subspace(4, 2, rng)
    log = QueryLog(trial=3)
    oracle = MembershipOracle(a, "A", log=log, mass_sets=(MassSet("A", a),), record_distribution=True)
    oracle.apply(with_flag(subspace_state(a)))
    oracle.apply(with_flag(zero_state(4)))
    assert len(log) == 2
    assert log.masses_for("A") == pytest.approx([1.0, 1.0])
    record = log.records[0]
    assert record.trial == 3
    assert record.distribution is not None and np.isclose(record.distribution.sum(), 1.0)

    frame = log.to_frame()
    assert list(frame.columns) == QUERY_LOG_COLUMNS
    assert frame["query_index"].tolist() == [0, 1]
    with_member = log.to_frame(include_member=True)
    assert with_member["mass_set_id"].tolist() == ["A", "member", "A", "member"]
    assert with_member["mass"].tolist() == pytest.approx([1.0, 1.0, 1.0, 1.0])
    written = log.to_csv(tmp_path / "queries.csv")
    assert written.exists()


def test_query_log_concat_of_nothing() -> None:
    frame = QueryLog.concat([])
    assert frame.empty
    assert list(frame.columns) == QUERY_LOG_COLUMNS


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------


def test_program_must_measure() -> None:
    with pytest.raises(PreconditionError):
        VerifierProgram("silent", 2, (Query("A"), ApplyHadamard()))


def test_program_slot_bookkeeping() -> None:
    program = vstar_program(4)
    assert program.query_count == 2
    assert program.measurement_count == 2
    assert program.slots == ("A", "B")
    assert program.query_slots() == ("A", "B")


def test_vstar_program_accepts_honest_proof(yes_instance) -> None:
    proof = honest_prove(yes_instance)
    value = program_accept_probability(vstar_program(8), proof, vstar_oracles(yes_instance))
    assert value == pytest.approx(1.0)


def test_program_requires_bound_slots(yes_instance) -> None:
    oracles = {"A": MembershipOracle(yes_instance.A, "A")}
    with pytest.raises(PreconditionError):
        run_program(vstar_program(8), honest_prove(yes_instance), oracles)


def test_effective_operator_matches_closed_form(rng) -> None:
    inst = make_instance(4, "NO_AB", rng)
    program_op = effective_accept_operator(vstar_program(4), vstar_oracles(inst)).to_dense()
    closed = vstar_accept_operator(inst).to_dense()
    assert np.allclose(program_op, closed, atol=1e-12)


def test_batched_run_counts_queries_once(yes_instance) -> None:
    oracles = vstar_oracles(yes_instance)
    batch = np.stack([honest_prove(yes_instance).amplitudes, zero_state(8).amplitudes])
    run = run_program(vstar_program(8), batch, oracles)
    assert run.queries_used == 2
    assert oracles["A"].query_count == 1
    assert run.accept_probabilities[0] == pytest.approx(1.0)
    assert run.accept_probabilities[1] == pytest.approx(2.0**-4)


def test_query_grams_average_member_mass(yes_instance) -> None:
    run = run_program(
        vstar_program(8), honest_prove(yes_instance), vstar_oracles(yes_instance), collect_query_grams=True
    )
    assert [slot for slot, _ in run.query_grams] == ["A", "B"]
    # the honest proof is a full member at both queries
    assert np.real(run.povm_gram()[0, 0]) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# Hybrids
# ---------------------------------------------------------------------------


def test_hybrid_gap_within_mass_bound(yes_instance, rng) -> None:
    replacement = sample_subspace_of(yes_instance.A, 2, rng)
    report = replace_oracle_hybrid(
        vstar_program(8),
        honest_prove(yes_instance),
        {"A": yes_instance.A, "B": yes_instance.B},
        "A",
        replacement,
    )
    assert report.prob_original == pytest.approx(1.0)
    assert report.per_query_masses == pytest.approx([1.0 - 2.0**-2])
    assert report.within_bound


def test_hybrid_with_identical_replacement_has_no_gap(yes_instance) -> None:
    report = replace_oracle_hybrid(
        vstar_program(8),
        zero_state(8),
        {"A": yes_instance.A, "B": yes_instance.B},
        "B",
        yes_instance.B,
    )
    assert report.gap == pytest.approx(0.0, abs=1e-12)
    assert report.bound == pytest.approx(0.0, abs=1e-12)


def test_hybrid_requires_nested_replacement(yes_instance, rng) -> None:
    with pytest.raises(PreconditionError):
        replace_oracle_hybrid(
            vstar_program(8),
            honest_prove(yes_instance),
            {"A": yes_instance.A, "B": yes_instance.B},
            "A",
            full_space(8),
        )
