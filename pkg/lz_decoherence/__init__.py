"""Landau-Zener sweeps of a two-level system under decoherence."""
