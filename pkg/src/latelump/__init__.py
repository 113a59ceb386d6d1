"""Late-lumping boundary feedback and observer design for a hyperbolic plant."""
from .spectral import (EigenPair, Spectrum, SpectrumLabel, StateFunction, Window,
                       biorthonormalize, inner_product, modal_weight)
from .plant import BoundaryDynamics, PlantParameters, PAPER_PLANT

__version__ = "0.1.0"
