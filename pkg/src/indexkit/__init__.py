"""Structural statistics and typology for subject-indexing systems.

Flat tagging, classification trees and thesauri share one data model
(:mod:`indexkit.model`); :mod:`indexkit.ingest` reads TSV bundles,
:mod:`indexkit.metrics` and :mod:`indexkit.distfit` compute and fit the
characteristic distributions, :mod:`indexkit.typology` classifies and
reports.
"""

__version__ = "0.1.0"
