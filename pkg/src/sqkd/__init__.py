"""Simulator and attack analysis for single-state semi-quantum key distribution
with selective modulation (phase-encoded, time-bin qubits)."""

__version__ = "0.1.0"
