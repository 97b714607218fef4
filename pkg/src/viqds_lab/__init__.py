"""Simulation and verification toolkit for a Weyl-eigenstate quantum
zero-knowledge protocol and the verifier-initiated quantum signature built
on top of it."""

__version__ = "0.1.0"
