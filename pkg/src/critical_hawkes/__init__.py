"""Critical mean-field Hawkes order flow: exact simulation, limit SDE and verification."""

__version__ = "0.1.0"
