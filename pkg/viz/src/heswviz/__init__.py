"""Post-processing for hesw run directories.

Standalone by design: this package parses the documented snapshot and
CSV formats itself and never imports the solver, so figures can be made
anywhere the output files land.
"""

__version__ = "0.1.0"
