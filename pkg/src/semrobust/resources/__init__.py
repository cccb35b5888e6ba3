"""Static resources for semantic robustness experiments."""
