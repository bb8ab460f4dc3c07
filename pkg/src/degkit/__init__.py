"""degkit: degradation analytics for complex reliability data.

Modules: data model and CSV I/O (`data`), seeded RNG streams (`rng`),
B-spline utilities (`splines`), copula sampling/fitting (`copulas`),
multi-channel degradation index fusion (`degindex`), copula Wiener
multivariate degradation and first passage (`mvdeg`), functional data and
FPCA (`funcdata`), penalized model-based clustering (`sigclust`), lifetime
regression with complex covariates (`covreg`), spatio-temporal fields
(`stdeg`), and the batch CLI (`cli`).
"""

__version__ = "0.1.0"

from .data import DataError, Dataset, UnitRecord, load_dataset  # noqa: F401
from .rng import RngSpec  # noqa: F401
