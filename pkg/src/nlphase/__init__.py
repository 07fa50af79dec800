"""Nonlocal second-order phase-field energies on grids.

The energy combines a double-well penalty at strength 1/eps with an
eps-weighted kernel average of squared gradient differences.  The
package evaluates and minimizes it, computes the anisotropic surface
density of flat interfaces by a periodic cell problem, and runs the
numerical studies that confront the sharp-interface limit predictions.
"""

__version__ = "0.1.0"

from . import cellproblem, energy, experiments, fields, kernels, potentials, solver

__all__ = [
    "__version__",
    "kernels",
    "potentials",
    "fields",
    "energy",
    "solver",
    "cellproblem",
    "experiments",
]
