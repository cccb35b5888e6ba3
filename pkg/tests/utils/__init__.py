"""
Test utilities shared across test modules.
"""

from .instances import LinearInstance
from .instances import binary_instance
from .instances import boundary_distances
from .instances import minimum_distance
from .instances import random_binary_instance
from .instances import random_multiclass_instance
