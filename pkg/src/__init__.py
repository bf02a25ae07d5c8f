"""localq-cert - certification of quantum properties from projected ensembles and local shadows."""

__version__ = "1.0.0"
