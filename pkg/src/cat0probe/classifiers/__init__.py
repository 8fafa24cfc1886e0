"""Empirical classifiers for contraction, divergence and Morse stability."""

from cat0probe.classifiers.contraction import (
    CONTRACTING,
    NOT_CONTRACTING,
    ContractionReport,
    ball_projection_diameter,
    contraction_scan,
)
from cat0probe.classifiers.divergence import DivergenceProfile, divergence_profile, fit_growth
from cat0probe.classifiers.lemma31 import Lemma31Witness, lemma31_dissect
from cat0probe.classifiers.morse import (
    MORSE,
    NOT_MORSE,
    MorseReport,
    morse_adversarial_search,
    morse_bound,
)

INCONCLUSIVE = "inconclusive"

__all__ = [
    "CONTRACTING", "NOT_CONTRACTING", "MORSE", "NOT_MORSE", "INCONCLUSIVE",
    "ContractionReport", "DivergenceProfile", "MorseReport", "Lemma31Witness",
    "contraction_scan", "ball_projection_diameter", "divergence_profile", "fit_growth",
    "morse_bound", "morse_adversarial_search", "lemma31_dissect",
]
