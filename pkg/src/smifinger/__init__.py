"""Simulation and analysis toolkit for a self-mixing-interferometry fingertip
and an acoustic fingertip: physics, readout chains, time-domain metrics,
log-Mel spectrograms, a small content classifier and a command-line driver."""

__version__ = "0.1.0"
