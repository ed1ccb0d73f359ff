"""Variable-length data series analytics.

Two engines share one set of series and distance primitives:

* :class:`~varlen.ulisse.UlisseIndex` answers k-NN subsequence queries of
  any length within a range from a single envelope index.
* :class:`~varlen.mad.VariableLengthMiner` finds motif pairs and Top-k m-th
  discords for every length in a range, reusing lower bounds across lengths.

Both are checked against the brute-force routines in :mod:`varlen.oracle`.
"""

import warnings

# numba probes for TBB on first parallel launch; the fallback layer is fine
warnings.filterwarnings("ignore", message="The TBB threading layer")

from .series import DataSeries, SubsequenceRef, build_series, znormalize

__version__ = "0.1.0"

__all__ = ["DataSeries", "SubsequenceRef", "build_series", "znormalize", "__version__"]
