"""dcpkit: Dual-Cross Pattern descriptors, MDML face features and matching protocols."""

__version__ = "0.1.0"
