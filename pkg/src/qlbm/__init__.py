"""Amplitude-encoded quantum lattice Boltzmann simulation."""
