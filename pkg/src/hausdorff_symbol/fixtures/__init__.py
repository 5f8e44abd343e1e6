"""Bundled operator and test-function fixtures."""

from __future__ import annotations

from importlib import resources

from ..spec_model import FunctionSpec, OperatorSpec, parse_config, parse_function

OPERATORS = (
    "cesaro-1-1",
    "cesaro-2-2",
    "qcesaro-0.25",
    "qcesaro-neg0.25",
    "reflection",
    "constant-atom",
    "zero-kernel",
)
FUNCTIONS = ("fn-power-1e", "fn-mirror-1e", "fn-smooth-two-sided", "fn-box-2d")


def fixture_text(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.json").read_text(encoding="utf-8")


def load_fixture(name: str) -> OperatorSpec:
    if name not in OPERATORS:
        raise KeyError(f"unknown operator fixture {name!r}; choose from {', '.join(OPERATORS)}")
    return parse_config(fixture_text(name), source=f"{name}.json")


def load_function(name: str) -> FunctionSpec:
    if name not in FUNCTIONS:
        raise KeyError(f"unknown function fixture {name!r}; choose from {', '.join(FUNCTIONS)}")
    return parse_function(fixture_text(name))
