"""Photon-pair blockade in a voltage-biased Josephson-photonics circuit."""

__version__ = "0.1.0"
