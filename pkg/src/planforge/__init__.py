"""planforge: mine programming-plan candidates from code corpora and refine them into plans.

The package covers the full loop: prompt-driven corpus generation, subgoal
segmentation, embedding + clustering into plan candidates, complexity and
distribution metrics for corpus comparison, and an HTTP authoring service.
"""

__version__ = "0.1.0"
