"""Housing-valuation model benchmark.

Fits a hedonic OLS price model (with White-corrected inference), a
feedforward ReLU network, a bagged regression forest, and kNN regression on
a shared preprocessed design, then compares them under a repeated
train/validation/test split protocol with paired t-tests, permutation
importance, and partial-dependence curves.
"""

__version__ = "0.1.0"
