"""duetfe: generator-critic feature transformation for tabular data."""

__version__ = "0.1.0"

from . import agents, classifiers, dataset, diagnosis, dsl, evaluation, loop, synth  # noqa: F401
