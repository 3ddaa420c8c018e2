"""irworkbench: offline IR experiment evaluation workbench.

Parses TREC-style queries, qrels, and run files; computes standard
effectiveness measures with significance testing; and serves analysis
reports through a CLI, an HTTP API, and a web dashboard.
"""

from .errors import WorkbenchError

__version__ = "0.1.0"

__all__ = ["WorkbenchError", "__version__"]
