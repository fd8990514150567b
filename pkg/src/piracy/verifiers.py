"""
Registry of admissible verifier programs for the piracy game.

Every registered program ends with a membership check whose flag must read 1,
so its accept operator is dominated by query_count times the query POVM.
"""

from __future__ import annotations

import importlib
from typing import Callable

from src.core.errors import PreconditionError
from src.oracles.programs import ApplyHadamard, MeasureFlag, Query, VerifierProgram
from src.protocol.vstar import vstar_program

ProgramFactory = Callable[[int], VerifierProgram]

_VERIFIERS: dict[str, ProgramFactory] = {}

# Registered by modules that are imported on first lookup.
_PLUGIN_MODULES = {"candidate": "src.npcand.candidate"}


def register_verifier(name: str) -> Callable[[ProgramFactory], ProgramFactory]:
    def decorator(factory: ProgramFactory) -> ProgramFactory:
        _VERIFIERS[name] = factory
        return factory

    return decorator


def _load_plugin(name: str) -> None:
    module = _PLUGIN_MODULES.get(name)
    if module is not None and name not in _VERIFIERS:
        importlib.import_module(module)


def get_verifier(name: str, n: int) -> VerifierProgram:
    _load_plugin(name)
    try:
        factory = _VERIFIERS[name]
    except KeyError:
        raise PreconditionError(
            f"unknown verifier {name!r}; available: {', '.join(available_verifiers())}"
        ) from None
    return factory(n)


def available_verifiers() -> list[str]:
    for name in _PLUGIN_MODULES:
        _load_plugin(name)
    return sorted(_VERIFIERS)


@register_verifier("vstar")
def _vstar(n: int) -> VerifierProgram:
    return vstar_program(n)


@register_verifier("vstar-swapped")
def _vstar_swapped(n: int) -> VerifierProgram:
    """B-test in the Hadamard basis first, then the A-test."""
    return VerifierProgram(
        "vstar-swapped",
        n,
        (
            ApplyHadamard(),
            Query("B"),
            MeasureFlag(),
            ApplyHadamard(),
            Query("A"),
            MeasureFlag(),
        ),
    )


@register_verifier("vstar-dummy")
def _vstar_dummy(n: int) -> VerifierProgram:
    """V* with two extra A-queries that cancel before the first measurement."""
    return VerifierProgram(
        "vstar-dummy",
        n,
        (
            Query("A"),
            Query("A"),
            Query("A"),
            MeasureFlag(),
            ApplyHadamard(),
            Query("B"),
            MeasureFlag(),
        ),
    )
