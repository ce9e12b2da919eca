"""Finite-volume solver for viscoelastic Maxwell shallow-water flows."""
