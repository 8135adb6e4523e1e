"""steerank: preference-steerable multi-objective re-ranking.

One trained model, any trade-off at inference time: a hypernetwork
maps preference weights to the scoring head of a pointer-style list
generator, trained with REINFORCE against a frozen learned evaluator
plus closed-form business utilities.
"""

__version__ = "0.1.0"
