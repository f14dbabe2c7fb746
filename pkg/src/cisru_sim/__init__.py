"""Deterministic multi-rover ISRU simulation suite.

Goal-oriented E4 autonomy for a Leader/Secondary rover pair and an astronaut,
Fast Marching Square navigation, cooperative map fusion, manipulation state
machines, supervision with emergency escalation, and a mission-console
gateway speaking a length-prefixed JSON wire protocol.
"""

__version__ = "0.1.0"
