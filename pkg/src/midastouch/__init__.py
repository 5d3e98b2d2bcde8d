"""Deterministic simulator of an inscription-driven contract middleware.

Inscriptions on a simulated UTXO chain are collected by a validator
committee, agreed on, executed against a simulated contract platform, and
answered with receipt inscriptions written back to the originating chain.
"""

__version__ = "0.1.0"
