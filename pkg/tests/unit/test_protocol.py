"""Unit tests for promise-problem instances, the honest prover and V*."""

from __future__ import annotations

import numpy as np
import pytest

from src.core.errors import DimensionMismatchError, PreconditionError
from src.gf2.linear import BitVector, canonicalize, dual, is_subspace_of, membership_mask
from src.protocol.instances import (
    Instance,
    InstanceKind,
    generator_G,
    instance_from_json,
    instance_to_json,
    make_instance,
)
from src.protocol.vstar import (
    VSTAR_QUERIES,
    VerifierReport,
    honest_prove,
    max_cheat_probability,
    sample_vstar,
    verify_vstar,
)
from src.statesim.states import PureState, basis_state, random_state, zero_state


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "kind, dims",
    [("YES", (4, 4)), ("NO_AB", (4, 2)), ("NO_BA", (2, 4))],
)
def test_make_instance_dimensions(kind, dims) -> None:
    inst = make_instance(8, kind, 3)
    assert (inst.A.dim, inst.B.dim) == dims
    assert is_subspace_of(inst.B, dual(inst.A))


def test_yes_instance_pairs_a_with_its_dual(yes_instance) -> None:
    assert yes_instance.is_yes
    assert yes_instance.B == dual(yes_instance.A)


def test_instance_rejects_bad_sizes() -> None:
    with pytest.raises(PreconditionError):
        make_instance(6, "YES", 0)
    good = make_instance(8, "YES", 0)
    with pytest.raises(PreconditionError):
        Instance(8, good.A, good.B, InstanceKind.NO_AB)


def test_instance_rejects_b_outside_dual() -> None:
    a = canonicalize([BitVector.from_string("1000"), BitVector.from_string("0100")])
    # YES dimensions, but B = A is not inside dual(A)
    with pytest.raises(PreconditionError):
        Instance(4, a, a, InstanceKind.YES)


def test_generator_is_undefined_off_multiples_of_four() -> None:
    assert generator_G(6, 0) is None
    assert generator_G(0, 0) is None
    inst = generator_G(4, 0)
    assert inst is not None and inst.is_yes


def test_generator_is_seed_deterministic() -> None:
    assert generator_G(8, 5).instance_id == generator_G(8, 5).instance_id


def test_instance_json_round_trip(no_ba_instance) -> None:
    restored = instance_from_json(instance_to_json(no_ba_instance))
    assert restored == no_ba_instance
    assert restored.instance_id == no_ba_instance.instance_id


# ---------------------------------------------------------------------------
# Honest prover and exact V*
# ---------------------------------------------------------------------------


def test_honest_proof_is_accepted_with_certainty(yes_instance) -> None:
    report = verify_vstar(yes_instance, BitVector.zero(8), honest_prove(yes_instance))
    assert report.accept_probability == pytest.approx(1.0)
    assert report.step_rejected is None
    assert report.queries_used == VSTAR_QUERIES


def test_honest_prover_refuses_no_instances(no_ab_instance) -> None:
    with pytest.raises(PreconditionError):
        honest_prove(no_ab_instance)


def test_nonzero_statement_is_rejected_at_step_one(yes_instance) -> None:
    x = BitVector.from_string("10000000")
    report = verify_vstar(yes_instance, x, honest_prove(yes_instance))
    assert report.accept_probability == 0.0
    assert report.step_rejected == 1
    assert report.queries_used == 0


def test_zero_proof_acceptance(yes_instance) -> None:
    report = verify_vstar(yes_instance, BitVector.zero(8), zero_state(8))
    assert report.accept_probability == pytest.approx(2.0**-4)


def test_proof_outside_a_is_rejected_at_the_a_check(yes_instance) -> None:
    outsider = int(np.flatnonzero(~membership_mask(yes_instance.A))[0])
    report = verify_vstar(yes_instance, BitVector.zero(8), basis_state(8, outsider))
    assert report.accept_probability == pytest.approx(0.0)
    assert report.step_rejected == 2


def test_balanced_proof_inside_a_is_rejected_at_the_b_check(no_ba_instance) -> None:
    a1 = no_ba_instance.A.basis[0]
    amps = np.zeros(256, dtype=np.complex128)
    amps[0], amps[a1] = 2**-0.5, -(2**-0.5)
    report = verify_vstar(no_ba_instance, BitVector.zero(8), PureState(8, amps))
    assert report.accept_probability == pytest.approx(0.0, abs=1e-12)
    assert report.step_rejected == 4


def test_verify_rejects_mismatched_dimensions(yes_instance) -> None:
    with pytest.raises(DimensionMismatchError):
        verify_vstar(yes_instance, BitVector.zero(4), honest_prove(yes_instance))
    with pytest.raises(DimensionMismatchError):
        verify_vstar(yes_instance, BitVector.zero(8), zero_state(4))


def test_report_rejects_out_of_range_probability() -> None:
    with pytest.raises(PreconditionError):
        VerifierReport(accept_probability=1.5)


# ---------------------------------------------------------------------------
# Soundness
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n", [4, 8])
@pytest.mark.parametrize("kind", ["NO_AB", "NO_BA"])
def test_max_cheat_equals_quarter_power(n, kind) -> None:
    for seed in range(3):
        value = max_cheat_probability(make_instance(n, kind, seed))
        assert value == pytest.approx(2.0 ** (-n / 4), abs=1e-9)


@pytest.mark.parametrize("kind", ["NO_AB", "NO_BA"])
def test_random_proofs_never_beat_the_cheating_optimum(kind, rng) -> None:
    x = BitVector.zero(8)
    for seed in range(2):
        inst = make_instance(8, kind, seed)
        bound = max_cheat_probability(inst)
        accepted = [
            verify_vstar(inst, x, random_state(8, rng)).accept_probability for _ in range(1000)
        ]
        assert max(accepted) <= bound + 1e-9


def test_max_cheat_on_yes_instance_is_one(yes_instance) -> None:
    assert max_cheat_probability(yes_instance) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.slow
def test_max_cheat_at_n_twelve() -> None:
    value = max_cheat_probability(make_instance(12, "NO_AB", 0))
    assert value == pytest.approx(2.0**-3, abs=1e-9)


# ---------------------------------------------------------------------------
# Sampled V*
# ---------------------------------------------------------------------------


def test_sampled_vstar_on_honest_proof(yes_instance) -> None:
    report = sample_vstar(yes_instance, BitVector.zero(8), honest_prove(yes_instance), 200, seed=1)
    assert report.mode == "sampled"
    assert report.accept_probability == 1.0
    assert report.queries_used == 2 * 200
    assert report.ci_radius == pytest.approx(np.sqrt(np.log(2 / 0.05) / 400))


def test_sampled_vstar_estimate_within_radius(yes_instance) -> None:
    report = sample_vstar(yes_instance, BitVector.zero(8), zero_state(8), 4000, seed=2)
    assert abs(report.accept_probability - 2.0**-4) <= report.ci_radius


def test_sampled_vstar_rejects_nonpositive_shots(yes_instance) -> None:
    with pytest.raises(PreconditionError):
        sample_vstar(yes_instance, BitVector.zero(8), zero_state(8), 0)
