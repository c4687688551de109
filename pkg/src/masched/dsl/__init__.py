"""Guarded-command network descriptions: parser, linker, and composition.

The textual format (extension `.man`) describes a network of processes with
bounded integer and boolean variables, probabilistic commands (action label,
guard, weighted update branches) and Markovian commands (rate expression,
guard, single update). The grammar is documented in `docs/grammar.md`.
"""

from .parser import parse, parse_declarations
from .network import NetworkModel, pretty_print

__all__ = ["parse", "parse_declarations", "NetworkModel", "pretty_print"]
