"""Water transport on graphs: pairwise averaging moves, the sharing-a-drink
dual, bounds on the best achievable level, and Monte Carlo laws."""

__version__ = "0.1.0"

from .graph import Graph, HalfLineSpec, graph_distance, make_comb, make_halfline, make_path  # noqa: E402
from .dynamics import Move, apply_move, apply_sequence, balance, energy, energy_delta  # noqa: E402
from .sad import dual_of, run_sad, verify_duality  # noqa: E402
from .optimizer import KappaEstimate, kappa_exact_edge, kappa_exact_path3, kappa_search, kappa_upper_cap  # noqa: E402
