"""Calibration-pinned conventions, isolated so the suite can probe them.

The nominal values below reproduce the mandatory oracle suite (lambda_1,
Riemann--Roch ranks, the self-loop stratum pairing) and the genus-0
equivalence battery.  They are deliberately mutable module state: the
calibration command verifies them and records a fingerprint, and the test
harness corrupts them (via SPINHODGE_TEST_CORRUPT) to confirm that a wrong
constant is surfaced as a failure rather than silently absorbed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction


@dataclass
class Conventions:
    #: outer constant of the boundary sum in the Chern character formula
    #: (each weighting and each half-edge order enumerated separately)
    boundary_half: Fraction = Fraction(1, 2)
    #: sign arrangement on the edge decoration: (-psi')^x psi''^y if True,
    #: psi'^x (-psi'')^y otherwise.  Pinned False by the limit-existence
    #: battery (genus 1-2, r up to 5); both toggles are invisible at r = 1.
    edge_sign_on_first: bool = False
    #: excess factor of a doubled edge is -(psi'+psi'')/r if True, plain
    #: -(psi'+psi'') if False.  Pinned False by the same battery.
    excess_over_r: bool = False
    #: opposite half-edge weights satisfy k + k' = balance_offset mod r
    balance_offset: int = 0

    def fingerprint_data(self) -> dict:
        return {
            "boundary_half": str(self.boundary_half),
            "edge_sign_on_first": self.edge_sign_on_first,
            "excess_over_r": self.excess_over_r,
            "balance_offset": self.balance_offset,
            "bernoulli_b1": "-1/2",
            "eps": "t**-1 - 1",
            "pairing": "r**(2g-1-h1)/|Aut|",
        }


CONVENTIONS = Conventions()

_corrupt = os.environ.get("SPINHODGE_TEST_CORRUPT")
if _corrupt == "boundary_half":
    CONVENTIONS.boundary_half = Fraction(1, 3)
elif _corrupt == "edge_sign":
    CONVENTIONS.edge_sign_on_first = False
elif _corrupt == "excess":
    CONVENTIONS.excess_over_r = False
