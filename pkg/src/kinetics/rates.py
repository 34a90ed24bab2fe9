"""
Explicit convergence rates.

Formulas evaluated here:

- the hypocoercive entropy rate kappa from the constants (Nc, lambda, Lambda, m, rho, eta)
- the explicit rate bound chi for a validated model
- the uniform log-Sobolev constant eta
- the exact spectrum and spectral gap of the quadratic drift matrix

The 20th and higher powers in kappa and chi are evaluated in log space; the
values are around 1e-63 for unit parameters.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

from .exceptions import ModelValidationError


@dataclass(frozen=True)
class HypocoercivityParams:
    Nc: int
    lambda_: float
    Lambda: float
    m: float
    rho: float
    eta: float

    def __post_init__(self):
        if int(self.Nc) != self.Nc or self.Nc < 1:
            raise ModelValidationError('Nc must be a positive integer.')
        for name in ('lambda_', 'Lambda', 'rho', 'eta'):
            if not getattr(self, name) > 0:
                raise ModelValidationError(f"{name.rstrip('_')} must be > 0.")
        if self.m < 0:
            raise ModelValidationError('m must be >= 0.')
        if self.lambda_ > self.Lambda:
            raise ModelValidationError('lambda must not exceed Lambda.')


def log_hypocoercive_kappa(p):
    inner = (100.0 / p.lambda_) * (p.Nc ** 2 + p.Lambda ** 2 / p.lambda_ + p.m)
    return math.log(p.rho) - math.log(p.eta) - 20 * p.Nc ** 2 * math.log(inner)


def hypocoercive_kappa(p):
    """rho / eta * (100 / lambda * (Nc^2 + Lambda^2 / lambda + m))^(-20 Nc^2)."""
    return math.exp(log_hypocoercive_kappa(p))


def _sup_term(model):
    return (model.hessV_sup + 2.0 * model.hessW_sup) ** 2


def log_chi_bound(model):
    margin = min(model.convexity_margin, 1.0)
    inner = 100.0 * (2.0 + 2.0 / model.sigma ** 2 + model.gamma ** 2 + _sup_term(model))
    return math.log(2.0 * margin) - 2.0 * math.log(model.sigma) - 20.0 * math.log(inner)


def chi_bound(model):
    """The explicit (very rough) entropic convergence rate of the particle system."""
    return math.exp(log_chi_bound(model))


def lsi_eta(model):
    """Log-Sobolev constant of the Gibbs law, uniform in N: sigma^2 / (4 gamma min(c1 - 2 c2, 1))."""
    return model.sigma ** 2 / (4.0 * model.gamma * min(model.convexity_margin, 1.0))


def kinetic_params(model):
    """
    Hypocoercivity constants for the kinetic particle system.

    Nc = 1 and lambda = Lambda = rho = 1. The constant eta here is the one
    normalising entropy dissipation against the velocity gradient, which is
    2 gamma times the log-Sobolev constant, so that kappa equals chi_bound.
    """
    m = 2.0 / model.sigma ** 2 + model.gamma ** 2 + _sup_term(model)
    return HypocoercivityParams(Nc=1, lambda_=1.0, Lambda=1.0, m=m, rho=1.0,
                                eta=2.0 * model.gamma * lsi_eta(model))


def entropy_envelope(kappa, Nc, t):
    """Entropy contraction factor exp(-kappa t (1 - e^-t)^(2 Nc))."""
    return math.exp(-kappa * t * (-math.expm1(-t)) ** (2 * Nc))


def chaos_exponent(b, chi):
    """Uniform-in-time chaos exponent 1 / (1 + b / chi) from a growth rate b and a decay rate chi."""
    if not chi > 0 or b < 0:
        raise ModelValidationError('Need chi > 0 and b >= 0.')
    return 1.0 / (1.0 + b / chi)


@dataclass(frozen=True)
class SpectralReport:
    spectrum: tuple
    gap: float
    chi_exact: float
    critical: bool


def spectrum_quadratic(a, b, gamma, N, d):
    """
    Eigenvalues of the quadratic drift matrix A with multiplicities.

    The position stiffness has eigenvalue a (multiplicity d, centroid mode)
    and a + b (multiplicity d (N - 1)); each gives the pair
    gamma/2 ± sqrt(gamma^2/4 - lambda). Equal eigenvalues are merged.
    """
    if not a > 0 or not a + b > 0:
        raise ModelValidationError('Need a > 0 and a + b > 0.')
    if not gamma > 0 or N < 1 or d < 1:
        raise ModelValidationError('Need gamma > 0, N >= 1 and d >= 1.')

    merged = {}
    for stiffness, multiplicity in ((a, d), (a + b, d * (N - 1))):
        if multiplicity == 0:
            continue
        root = cmath.sqrt(gamma ** 2 / 4.0 - stiffness)
        for eigenvalue in (gamma / 2.0 - root, gamma / 2.0 + root):
            merged[eigenvalue] = merged.get(eigenvalue, 0) + multiplicity
    spectrum = tuple(sorted(merged.items(), key=lambda item: (item[0].real, item[0].imag)))
    gap = min(value.real for value, _ in spectrum)

    smallest = min(a, a + b)
    discriminant = gamma ** 2 / 4.0 - smallest
    if discriminant < 0:
        chi_exact = gamma / 2.0
    else:
        chi_exact = gamma / 2.0 - math.sqrt(discriminant)
    return SpectralReport(spectrum=spectrum, gap=gap, chi_exact=chi_exact, critical=discriminant == 0)


@dataclass(frozen=True)
class RateReport:
    chi_bound: float
    log_chi_bound: float
    eta: float
    kappa: float
    log_kappa: float
    chi_exact: float | None = None
    chi_prime: float | None = None
    spectrum: tuple = field(default_factory=tuple)
    gap: float | None = None
    critical: bool = False
    n_particles: int | None = None

    def as_dict(self):
        return {
            'chi_bound': self.chi_bound,
            'log_chi_bound': self.log_chi_bound,
            'eta': self.eta,
            'kappa': self.kappa,
            'log_kappa': self.log_kappa,
            'chi_exact': self.chi_exact,
            'chi_prime': self.chi_prime,
            'spectrum': [
                {'real': value.real, 'imag': value.imag, 'multiplicity': multiplicity}
                for value, multiplicity in self.spectrum
            ],
            'gap': self.gap,
            'critical': self.critical,
            'n_particles': self.n_particles,
        }


def rate_report(model, n_particles=2):
    """Every rate available for the model; spectral entries only when it is quadratic."""
    params = kinetic_params(model)
    report = dict(
        chi_bound=chi_bound(model),
        log_chi_bound=log_chi_bound(model),
        eta=lsi_eta(model),
        kappa=hypocoercive_kappa(params),
        log_kappa=log_hypocoercive_kappa(params),
    )
    if model.is_quadratic:
        a, b = model.quadratic_coefficients()
        spectral = spectrum_quadratic(a, b, model.gamma, n_particles, model.d)
        report.update(
            chi_exact=spectral.chi_exact,
            chi_prime=spectral.chi_exact / 4.0,
            spectrum=spectral.spectrum,
            gap=spectral.gap,
            critical=spectral.critical,
            n_particles=n_particles,
        )
    return RateReport(**report)
