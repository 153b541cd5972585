"""Local harmonic-mode approximation of the commutation weight.

Each particle is treated as a test particle in the frozen field of the
others: its share of the potential is minimized by Newton's method, the
Hessian at that minimum is diagonalized, and every eigenmode becomes an
independent oscillator whose energy-series weight is known in closed form.
Particles that are not near a minimum fall back to the classical weight.

Units are m = hbar = 1; potential parameters set the remaining scales.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .commutation import series_1d
from .state import SeriesTruncation


@dataclass
class PotentialModel:
    """One- and two-body potential with analytic derivatives.

    ``one_body(r, j)`` may depend on the particle index; ``two_body(r, s)``
    must be symmetric, and its gradient and Hessian are taken with respect
    to the first argument.
    """

    d: int
    one_body: Optional[Callable] = None
    one_body_grad: Optional[Callable] = None
    one_body_hess: Optional[Callable] = None
    two_body: Optional[Callable] = None
    two_body_grad: Optional[Callable] = None
    two_body_hess: Optional[Callable] = None

    def total_energy(self, config):
        q = _as_config(config, self.d)
        n = q.shape[0]
        total = 0.0
        if self.one_body is not None:
            total += sum(self.one_body(q[j], j) for j in range(n))
        if self.two_body is not None:
            total += sum(self.two_body(q[j], q[k]) for j in range(n) for k in range(j + 1, n))
        return total

    def test_energy(self, r, config, j):
        """U_j with particle j moved to r, all others frozen."""
        q = _as_config(config, self.d)
        r = np.asarray(r, dtype=float)
        u = self.one_body(r, j) if self.one_body is not None else 0.0
        if self.two_body is not None:
            u += 0.5 * sum(self.two_body(r, q[k]) for k in range(q.shape[0]) if k != j)
        return u

    def test_gradient(self, r, config, j):
        q = _as_config(config, self.d)
        r = np.asarray(r, dtype=float)
        g = np.zeros(self.d)
        if self.one_body_grad is not None:
            g += self.one_body_grad(r, j)
        if self.two_body_grad is not None:
            for k in range(q.shape[0]):
                if k != j:
                    g += 0.5 * np.asarray(self.two_body_grad(r, q[k]))
        return g

    def test_hessian(self, r, config, j):
        q = _as_config(config, self.d)
        r = np.asarray(r, dtype=float)
        h = np.zeros((self.d, self.d))
        if self.one_body_hess is not None:
            h += self.one_body_hess(r, j)
        if self.two_body_hess is not None:
            for k in range(q.shape[0]):
                if k != j:
                    h += 0.5 * np.asarray(self.two_body_hess(r, q[k]))
        return h


def _as_config(config, d):
    q = np.asarray(config, dtype=float)
    if q.ndim == 1:
        q = q.reshape(-1, d)
    if q.shape[-1] != d:
        raise ValueError(f"configuration shape {q.shape} does not match d={d}")
    return q


# --------------------------------------------------------------------------
# bundled potentials

def harmonic_external(d, stiffness=1.0, center=None):
    """u1(r, j) = 1/2 (r - c)^T K (r - c); stiffness may be a scalar, a
    d-vector (diagonal K), a d x d matrix, or a per-particle list of those."""

    def _k(j):
        k = stiffness[j] if isinstance(stiffness, (list, tuple)) else stiffness
        k = np.asarray(k, dtype=float)
        if k.ndim == 0:
            return k * np.eye(d)
        if k.ndim == 1:
            return np.diag(k)
        return k

    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)

    def u(r, j):
        x = np.asarray(r) - c
        return 0.5 * x @ _k(j) @ x

    def grad(r, j):
        return _k(j) @ (np.asarray(r) - c)

    def hess(r, j):
        return _k(j)

    return u, grad, hess


def lennard_jones_pair(epsilon=1.0, sigma=1.0):
    """4 eps [(sigma/rho)^12 - (sigma/rho)^6] with gradient and Hessian in r."""

    def radial(rho):
        s6 = (sigma / rho) ** 6
        u = 4.0 * epsilon * (s6 * s6 - s6)
        du = 4.0 * epsilon * (-12.0 * s6 * s6 + 6.0 * s6) / rho
        d2u = 4.0 * epsilon * (156.0 * s6 * s6 - 42.0 * s6) / rho ** 2
        return u, du, d2u

    def u(r, s):
        rho = np.linalg.norm(np.asarray(r) - np.asarray(s))
        return radial(rho)[0]

    def grad(r, s):
        x = np.atleast_1d(np.asarray(r) - np.asarray(s))
        rho = np.linalg.norm(x)
        return radial(rho)[1] * x / rho

    def hess(r, s):
        x = np.atleast_1d(np.asarray(r) - np.asarray(s))
        rho = np.linalg.norm(x)
        _, du, d2u = radial(rho)
        n = x / rho
        nn = np.outer(n, n)
        return d2u * nn + du / rho * (np.eye(x.size) - nn)

    return u, grad, hess


def lennard_jones_chain(d=1, epsilon=1.0, sigma=1.0, confinement=0.0):
    """Demo model: Lennard-Jones pairs plus harmonic confinement about the origin."""
    u2, g2, h2 = lennard_jones_pair(epsilon, sigma)
    model = PotentialModel(d, two_body=u2, two_body_grad=g2, two_body_hess=h2)
    if confinement:
        model.one_body, model.one_body_grad, model.one_body_hess = \
            harmonic_external(d, confinement)
    return model


# --------------------------------------------------------------------------
# per-particle energy and minimization

def per_particle_energy(model, config, j):
    """U_j = u1(q_j) + 1/2 sum_{k != j} u2(q_j, q_k); these sum to U."""
    q = _as_config(config, model.d)
    if not 0 <= j < q.shape[0]:
        raise IndexError(f"particle index {j} out of range")
    return model.test_energy(q[j], q, j)


@dataclass
class NewtonResult:
    q_bar: np.ndarray
    converged: bool
    iterations: int
    residual: float


def newton_local_min(model, config, j, tol=1e-10, max_iter=20, max_step=10.0):
    """Newton iteration for the nearest stationary point of U_j(r; q).

    Only particle j moves.  Failure (singular Hessian, a step longer than
    ``max_step``, or no convergence) is reported through ``converged``;
    whether the point is a minimum is decided from the Hessian afterwards.
    """
    q = _as_config(config, model.d)
    r = q[j].copy()
    g = model.test_gradient(r, q, j)
    res = float(np.linalg.norm(g))
    if res == 0.0:
        return NewtonResult(r, True, 0, res)
    # at least one step is taken even below tol, which polishes the minimum
    for it in range(1, max_iter + 1):
        h = model.test_hessian(r, q, j)
        try:
            step = np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            return NewtonResult(r, False, it - 1, res)
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) > max_step:
            return NewtonResult(r, False, it - 1, res)
        r = r - step
        g = model.test_gradient(r, q, j)
        res = float(np.linalg.norm(g))
        if res < tol:
            return NewtonResult(r, True, it, res)
    return NewtonResult(r, False, max_iter, res)


def hessian_eigen(a, tol=1e-14, max_sweeps=50):
    """Cyclic Jacobi eigendecomposition of a small symmetric matrix.

    Returns ascending eigenvalues and the matching orthonormal eigenvectors
    as columns.
    """
    a = np.array(a, dtype=float, ndmin=2)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"matrix must be square, got {a.shape}")
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-12:
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    scale = max(np.max(np.abs(a), initial=0.0), 1.0)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    vals = np.diag(a).copy()
    order = np.argsort(vals)
    return vals[order], v[:, order]


@dataclass
class LocalMode:
    q_bar: np.ndarray
    u_bar: float
    eigvals: np.ndarray
    eigvecs: np.ndarray
    freqs: np.ndarray
    valid: bool
    note: str = ""


def build_local_modes(model, config, tol=1e-10, max_iter=20, max_shift=2.0):
    """Local mode of every particle for the frozen configuration.

    A mode is invalid when Newton fails, when the minimum lies further than
    ``max_shift`` from the particle, or when any curvature is not positive.
    Invalid modes carry the particle's actual energy as ``u_bar`` so the
    weight falls back to the classical Boltzmann factor.
    """
    q = _as_config(config, model.d)
    modes: List[LocalMode] = []
    for j in range(q.shape[0]):
        res = newton_local_min(model, q, j, tol, max_iter)
        u_here = model.test_energy(q[j], q, j)
        empty = np.zeros(model.d)
        if not res.converged:
            modes.append(LocalMode(q[j].copy(), u_here, empty, np.eye(model.d), empty, False,
                                   "newton failed"))
            continue
        if np.linalg.norm(res.q_bar - q[j]) > max_shift:
            modes.append(LocalMode(q[j].copy(), u_here, empty, np.eye(model.d), empty, False,
                                   "minimum too far"))
            continue
        vals, vecs = hessian_eigen(model.test_hessian(res.q_bar, q, j))
        if np.any(vals <= 0.0):
            modes.append(LocalMode(q[j].copy(), u_here, vals, vecs, empty, False,
                                   "non-positive curvature"))
            continue
        modes.append(LocalMode(res.q_bar, model.test_energy(res.q_bar, q, j), vals, vecs,
                               np.sqrt(vals), True))
    return modes


def particle_weights(modes, config, momenta, beta, trunc=SeriesTruncation()):
    """Per-particle complex factors whose product is the mean-field weight."""
    if not modes:
        raise ValueError("no modes given")
    d = modes[0].q_bar.size
    q = _as_config(config, d)
    p = _as_config(momenta, d)
    if q.shape[0] != len(modes) or p.shape != q.shape:
        raise ValueError("modes, configuration and momenta do not match")
    out = np.empty(len(modes), dtype=complex)
    for j, mode in enumerate(modes):
        factor = np.exp(-beta * mode.u_bar) + 0j
        if not mode.valid:
            out[j] = factor * np.exp(-0.5 * beta * (p[j] @ p[j]))
            continue
        x = mode.eigvecs.T @ (q[j] - mode.q_bar)
        k = mode.eigvecs.T @ p[j]
        P = k / np.sqrt(mode.freqs)
        Q = np.sqrt(mode.freqs) * x
        # series_1d carries e^{-iPQ}; the prefactor belongs to the raw q.p
        series = series_1d(P, Q, beta * mode.freqs, trunc) * np.exp(1j * P * Q)
        out[j] = factor * np.exp(-1j * (q[j] @ p[j])) * np.prod(series)
    return out


def meanfield_weight(modes, config, momenta, beta, trunc=SeriesTruncation()):
    """prod_k e^{-beta Ubar_k} prod_{j, alpha} (mode series), with phase e^{-i q.p}."""
    return complex(np.prod(particle_weights(modes, config, momenta, beta, trunc)))


__all__ = [
    "PotentialModel", "harmonic_external", "lennard_jones_pair", "lennard_jones_chain",
    "per_particle_energy", "NewtonResult", "newton_local_min", "hessian_eigen",
    "LocalMode", "build_local_modes", "particle_weights", "meanfield_weight",
]
