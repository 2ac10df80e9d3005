"""Sound bounds on the output difference of two structurally identical ReLU networks."""

from .forward import forward_pass, symbolic_pass
from .interval import Interval
from .network import Network, NetworkPair, parse_nnet, truncate_f16, write_nnet
from .symbolic import InputRegion
from .verifier import Status, VerificationQuery, Verdict, verify

__all__ = [
    "Interval", "InputRegion", "Network", "NetworkPair", "Status", "VerificationQuery",
    "Verdict", "forward_pass", "parse_nnet", "symbolic_pass", "truncate_f16", "verify",
    "write_nnet",
]
