"""Subproblem-based inference for a small probabilistic lambda calculus."""

__version__ = "0.1.0"

from .lang import parse, print_program, Program, ParseError  # noqa: E402
from .executor import execute, replay, rollback, revalidate, Trace  # noqa: E402
