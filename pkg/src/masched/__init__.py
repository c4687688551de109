"""Statistical model checking and strategy synthesis for Markov automata.

The library simulates networks of Markov automata described in a
guarded-command format, estimates time-bounded expected accumulated
rewards under uniform-random, hash-sampled, and learned strategies,
extracts the winning strategy as a table, and compresses it into a
lossless decision tree. The `masched` command line wires the pieces
together; see the README for a tour.
"""

__version__ = "0.1.0"
