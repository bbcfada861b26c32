"""Rotation-symmetric bosonic codes: construction, noise, recovery and benchmarks."""
