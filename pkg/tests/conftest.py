# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Fixtures for elkc."""


from pytest import Parser


def pytest_addoption(parser: Parser):
    """Add options to pytest parser.

    Args:
        parser: The pytest argument parser.
    """
    parser.addoption(
        "--convergence-seeds",
        action="store",
        type=int,
        default=5,
        help="The number of seeds the convergence comparison runs per codec.",
    )
    parser.addoption(
        "--sweep-cases",
        action="store",
        type=int,
        default=10_000,
        help="The number of randomized cases of each codec round trip sweep.",
    )
