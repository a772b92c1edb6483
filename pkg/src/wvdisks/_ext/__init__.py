"""Compiled kernels; see ``wvdisks.kernels`` for the selection logic."""
