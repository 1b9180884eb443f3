"""Desk-scale simulated HPC facility with a gateway API, batch scheduler,
tiered storage, scoped credentials, and a deterministic scenario harness."""

__version__ = "0.1.0"
