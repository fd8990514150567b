from __future__ import annotations

import time

import pytest

from src.gf2.linear import BitVector, dual, sample_subspace
from src.piracy.counterfeit import counterfeit_experiment
from src.piracy.game import run_piracy_game
from src.protocol.instances import make_instance
from src.protocol.vstar import honest_prove, max_cheat_probability, verify_vstar


@pytest.mark.performance
def test_honest_verification_at_sixteen_qubits() -> None:
    inst = make_instance(16, "YES", 1)
    proof = honest_prove(inst)

    start = time.perf_counter()
    for _ in range(20):
        report = verify_vstar(inst, BitVector.zero(16), proof)
        assert report.accept_probability == pytest.approx(1.0)
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0


@pytest.mark.performance
@pytest.mark.slow
def test_max_cheat_eigensolve_at_twelve_qubits() -> None:
    inst = make_instance(12, "NO_AB", 2)

    start = time.perf_counter()
    value = max_cheat_probability(inst)
    elapsed = time.perf_counter() - start
    assert value == pytest.approx(2.0**-3, abs=1e-6)
    assert elapsed < 30.0


@pytest.mark.performance
def test_dual_computation_throughput(rng) -> None:
    subspaces = [sample_subspace(24, 12, rng) for _ in range(200)]

    start = time.perf_counter()
    for s in subspaces:
        assert dual(dual(s)) == s
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0


@pytest.mark.performance
def test_exact_piracy_game_at_eight_qubits() -> None:
    start = time.perf_counter()
    outcome = run_piracy_game(8, "coherent-copy", trials=1, seed=5, mode="exact", exact_instances=2)
    elapsed = time.perf_counter() - start
    assert outcome.joint_accept <= 2.0**-4 + 1e-9
    assert elapsed < 20.0


@pytest.mark.performance
def test_monte_carlo_counterfeit_sweep() -> None:
    start = time.perf_counter()
    curve = counterfeit_experiment(8, "measure-and-guess", [1, 2, 4, 8], trials=2000, seed=11)
    elapsed = time.perf_counter() - start
    assert len(curve.points) == 4
    assert elapsed < 20.0
