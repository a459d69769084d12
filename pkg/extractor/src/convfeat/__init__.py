"""Batch CNN feature extraction into the SPFM matrix format.

Walks an image directory, resizes each image to 256x256 with Lanczos
resampling, runs a convolutional backbone to its final pooling stage, and
writes one flattened feature row per image, plus a binary-label file derived
from bounding-box annotations and a manifest naming the processed images.
"""

__version__ = "0.1.0"
