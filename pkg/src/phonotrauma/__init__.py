"""Daily Phonotrauma Index: ambulatory voice features, classification and evaluation."""
__version__ = "0.1.0"
