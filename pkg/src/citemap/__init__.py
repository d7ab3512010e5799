"""citemap: science mapping from citation corpora.

Builds co-citation and bibliographic coupling networks from bipartite
page -> DOI citation data, clusters them with the Leiden algorithm over a
resolution sweep, coarsens the results into supernetworks, and emits
fractional-counting field tables, citation-flow matrices and summary
statistics.
"""

from ._core import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
