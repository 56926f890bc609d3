"""Shared fixtures and a run-wide property check on every computed spectrum.

``second_order_spectrum`` is wrapped (in every module that re-exports it) so
each spectrum produced anywhere in the test run is checked for conjugate
symmetry, total algebraic multiplicity 2n, containment in the disk over the
Galerkin hull and invariance under a change of trial basis.  A test fails at
teardown if any spectrum it produced violates these properties.
"""
from __future__ import annotations

import functools
import math

import numpy as np
import pytest
import scipy.linalg as sla

import sospec
import sospec.cli
import sospec.experiments
import sospec.fem1d
import sospec.pencil
import sospec.toys
from sospec.pencil import (ClusterConfig, PencilTriple, cluster_eigenvalues, galerkin_spectrum,
                           multiset_distance)

_ORIGINAL_SPECTRUM = sospec.pencil.second_order_spectrum

DISK_INFLATION = 1e-8
BASIS_TOL = 1e-7
BASIS_CHECK_MAX_N = 80


class SpectrumRegistry:
    def __init__(self):
        self.checked = 0
        self.basis_checked = 0
        self.violations: list[str] = []

    def record(self, p: PencilTriple, spec):
        self.checked += 1
        msgs = spectrum_property_violations(p, spec)
        if p.n <= BASIS_CHECK_MAX_N:
            self.basis_checked += 1
        self.violations.extend(msgs)


REGISTRY = SpectrumRegistry()


def spectrum_property_violations(p: PencilTriple, spec) -> list[str]:
    out = []
    pts = sorted((pt.re, pt.im, pt.algebraic_mult, pt.geometric_mult) for pt in spec)
    mirrored = sorted((re, -im, a, g) for re, im, a, g in pts)
    if pts != mirrored:
        out.append(f"n={p.n}: spectrum is not exactly conjugate-symmetric")
    if spec.total_algebraic != 2 * p.n:
        out.append(f"n={p.n}: algebraic multiplicities sum to {spec.total_algebraic}")
    # every point solves a scalar real quadratic u^H Q(z) u = 0, hence
    # Re z lies in the Galerkin hull and |z|^2 <= lambda_max(m2, m0)
    gal = galerkin_spectrum(p)
    top = float(sla.eigh(p.m2, p.m0, eigvals_only=True)[-1])
    scale = max(1.0, abs(gal[0]), abs(gal[-1]), np.sqrt(max(top, 0.0)))
    slack = DISK_INFLATION * scale
    re = np.array([pt.re for pt in spec])
    mod = np.array([abs(pt.value) for pt in spec])
    if re.min() < gal[0] - slack or re.max() > gal[-1] + slack:
        out.append(f"n={p.n}: real part outside the Galerkin hull")
    if mod.max() > np.sqrt(max(top, 0.0)) + slack:
        out.append(f"n={p.n}: |z| exceeds sqrt(lambda_max(m2, m0))")
    bounds = getattr(p, "_spectrum_bounds", None)
    if bounds is not None:
        lo, hi = bounds
        for pt in spec:
            if math.isinf(hi):
                excess = lo - pt.re
            else:
                excess = abs(pt.value - 0.5 * (lo + hi)) - 0.5 * (hi - lo)
            if excess > slack:
                out.append(f"n={p.n}: {pt.value} outside D[{lo}, {hi}] by {excess:.3e}")
                break
    if p.n <= BASIS_CHECK_MAX_N and spec.raw is not None:
        rng = np.random.default_rng(p.n)
        t = np.eye(p.n) + 0.3 * rng.standard_normal((p.n, p.n)) / np.sqrt(p.n)
        moved = PencilTriple(*(t.conj().T @ m @ t for m in (p.m0, p.m1, p.m2)))
        # clustered centers: raw eigenvalues of a defective point are only
        # sqrt(eps)-accurate, the mean of each group is accurate to first
        # order.  Both sides are grouped at the coarser of the two widths,
        # since the random basis change can worsen the conditioning.
        other = _ORIGINAL_SPECTRUM(moved)
        width = max(spec.cluster_tol, other.cluster_tol)
        scale = max(1.0, float(np.max(np.abs(spec.raw))))
        dist = multiset_distance(_centers(spec.raw, width), _centers(other.raw, width))
        if dist > BASIS_TOL * scale:
            out.append(f"n={p.n}: basis change moves eigenvalues by {dist:.3e}")
    return out


def _centers(raw, width):
    groups = cluster_eigenvalues(raw, ClusterConfig(), width)
    return [z for z, alg in groups for _ in range(alg)]


def _wrap(fn):
    @functools.wraps(fn)
    def checked(p, *args, **kwargs):
        spec = fn(p, *args, **kwargs)
        REGISTRY.record(p, spec)
        return spec
    return checked


def _annotate(p, bounds):
    # test-only tag: the exact disk D[lambda_min(A), lambda_max(A)] when known
    object.__setattr__(p, "_spectrum_bounds", bounds)
    return p


def _wrap_assemble(fn):
    @functools.wraps(fn)
    def tagged(model, *args, **kwargs):
        p = fn(model, *args, **kwargs)
        op = getattr(model, "operator", None)
        if op is not None:
            ev = np.linalg.eigvalsh(op)
            _annotate(p, (float(ev[0]), float(ev[-1])))
        elif getattr(model, "exact_spectrum", None):
            _annotate(p, (min(model.exact_spectrum), max(model.exact_spectrum)))
        return p
    return tagged


def _wrap_schrodinger(fn):
    @functools.wraps(fn)
    def tagged(space, potential, *args, **kwargs):
        p = fn(space, potential, *args, **kwargs)
        mesh = space.mesh
        x = np.linspace(mesh.x_lo, mesh.x_hi, 20001)
        # Dirichlet -u'' + V >= (pi / length)^2 + min V; small margin for sampling min V
        lower = (math.pi / (mesh.x_hi - mesh.x_lo)) ** 2 + float(potential.eval(x).min()) - 1e-6
        return _annotate(p, (lower, math.inf))
    return tagged


def _patch(name, wrapper, modules):
    wrapped = wrapper(getattr(modules[0], name))
    for mod in modules:
        if hasattr(mod, name):
            setattr(mod, name, wrapped)


_MODULES = (sospec.pencil, sospec, sospec.toys, sospec.experiments, sospec.cli, sospec.fem1d)
_patch("second_order_spectrum", _wrap, _MODULES)
_patch("assemble_pencil", _wrap_assemble, _MODULES)
_patch("assemble_schrodinger", _wrap_schrodinger, (sospec.fem1d, sospec.experiments))


@pytest.fixture(autouse=True)
def _spectrum_properties():
    start = len(REGISTRY.violations)
    yield
    new = REGISTRY.violations[start:]
    if new:
        pytest.fail("spectrum property violations:\n" + "\n".join(new[:10]))


@pytest.fixture
def spectrum_registry():
    return REGISTRY


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
