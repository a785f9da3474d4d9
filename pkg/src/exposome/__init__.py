"""Multi-sensor exposure and wellbeing analysis pipeline."""

__version__ = "0.1.0"
