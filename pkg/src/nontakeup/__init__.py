"""Take-up of a means-tested minimum-income benefit: entitlement simulation,
spell-data covariates, sample selection, probit take-up models and
non-take-up metrics."""

__version__ = "0.1.0"
