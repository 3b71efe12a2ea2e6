"""
hscaler - state-independent momentum and position scaling in harmonic traps

Designs time-dependent trap frequency programs ω²(t) from polynomial
reference trajectories and verifies them with three independent engines:
exact moment propagation, split-step wave packets and classical ensembles.

Usage:
    hscaler design --config configs/momentum_slow_5.json --out out/
    hscaler serve --mode rest --port 3000
"""

__version__ = "0.3.0"

__all__ = ["__version__"]
