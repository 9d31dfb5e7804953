import math
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from services.green_service import GreenService
from services.oracle_service import kk_product_residual, residue_residual
from services.specfun_service import bessel_i, bessel_k, k0_split
from utils.common import format_duration, loglog_slope
from utils.domain import SpinChannel
from utils.errors import SpectralError

ALPHAS = (0.1, 0.3, 0.5, 0.7, 0.9)
SUITES = ("residue", "residue-oracle", "continuity", "connection", "kk-residual", "k0-split")


@dataclass(frozen=True)
class SuiteResult:
    name: str
    worst: float
    tolerance: float
    passed: bool
    seconds: float
    detail: str = ""


def phi_grid(n=50, gap=0.05):
    """n angle differences in (-2pi, 2pi) kept at least gap away from +-pi."""
    phi = np.linspace(-2.0 * math.pi + gap, 2.0 * math.pi - gap, n)
    near = np.abs(np.abs(phi) - math.pi) < gap
    return np.where(near, np.sign(phi) * (math.pi + np.where(np.abs(phi) < math.pi, -gap, gap)), phi)


class IdentityManager:

    def __init__(self, alphas: Sequence[float] = ALPHAS, n_phi=50, verbose=False):
        self.alphas = tuple(alphas)
        self.n_phi = int(n_phi)
        self.verbose = verbose

    def residue(self):
        worst = 0.0
        for alpha in self.alphas:
            green = GreenService(alpha)
            for phi in phi_grid(self.n_phi):
                worst = max(worst, green.residue_identity_residual(phi))
        return worst, 1e-8, ""

    def residue_oracle(self):
        worst = 0.0
        for alpha in self.alphas:
            for phi in phi_grid(6, gap=0.3):
                worst = max(worst, residue_residual(alpha, phi))
        return worst, 1e-10, "tanh-sinh"

    def continuity(self, offset=1e-4):
        worst = 0.0
        for alpha in self.alphas:
            green = GreenService(alpha)
            below = green.friedrichs_many(-1.0, 1.0, math.pi - offset, 1.5, 0.0)
            above = green.friedrichs_many(-1.0, 1.0, math.pi + offset, 1.5, 0.0)
            worst = max(worst, float(abs(below - above) / abs(below)))
        return worst, 1e-3, f"offset {offset:g}"

    def connection(self):
        worst = 0.0
        w = np.array([0.05, 0.2, 1.0, 3.0, 10.0, 25.0])
        for nu in (0.1, 0.3, 0.5, 0.7, 0.9):
            lhs = bessel_i(-nu, w) - bessel_i(nu, w)
            rhs = 2.0 / math.pi * math.sin(math.pi * nu) * bessel_k(nu, w)
            worst = max(worst, float(np.max(np.abs(lhs - rhs) / (1.0 + np.abs(bessel_i(-nu, w))))))
        return worst, 1e-10, ""

    def kk_residual(self):
        worst = 0.0
        z_values = (-1e-4, -1e-6, -1e-8)
        for alpha in (0.3, 0.5, 0.7):
            for spin in SpinChannel:
                residual = [kk_product_residual(alpha, z, 1.0, 2.0, spin) for z in z_values]
                slope, _ = loglog_slope([abs(z) for z in z_values], residual)
                expected = 1.0 - spin.nu(GreenService(alpha).flux)
                worst = max(worst, abs(slope - expected) / expected)
        return worst, 0.1, "relative slope error"

    def k0_split(self):
        w = np.geomspace(1e-8, 30.0, 40)
        f, g = k0_split(w)
        worst = float(np.max(np.abs(np.log(w) * f + g - bessel_k(0, w))))
        return worst, 1e-12, ""

    def run(self, suites: Optional[Sequence[str]] = None) -> List[SuiteResult]:
        handlers: Dict[str, callable] = {
            "residue": self.residue,
            "residue-oracle": self.residue_oracle,
            "continuity": self.continuity,
            "connection": self.connection,
            "kk-residual": self.kk_residual,
            "k0-split": self.k0_split,
        }
        results = []
        for name in suites or SUITES:
            started = time.perf_counter()
            try:
                worst, tol, detail = handlers[name]()
                passed = worst <= tol
            except SpectralError as e:
                worst, tol, detail, passed = math.inf, math.nan, str(e), False
            seconds = time.perf_counter() - started
            result = SuiteResult(name, worst, tol, passed, seconds, detail)
            marker = "✓" if passed else "✗"
            print(f"{marker} {name}: worst {worst:.3e} (tol {tol:.0e}) in {format_duration(seconds)} {detail}".rstrip())
            results.append(result)
        return results
