"""Underwater image translation toolkit (uwtranslate).

Trains, runs and evaluates paired and unpaired image-to-image translation models that turn
uniform-lighting synthetic renders into realistic underwater images, including a depth-aware
contrastive refiner.
"""

__version__ = "0.1.0"
