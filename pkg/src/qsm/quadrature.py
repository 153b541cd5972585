"""Phase-space integrals for loop grand potentials and average energies.

The measure z^N / (h^{dN} N!) dGamma becomes z^N / N! (2 pi)^{-dN} dP dQ
in oscillator units, since dp dq = hbar dP dQ per axis.  Monomers and
dimers (l = 1, 2) are integrated on deterministic tensor grids; longer
loops go through :func:`mc_loop_grand_potential`.

Reductions are blocked with a block layout fixed by the grid, not by the
worker count, and partial sums are combined in block order, so results do
not depend on ``QSM_WORKERS``.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .commutation import hamiltonian, weighted_w, weighted_wh
from .special import hermite_functions, i_power
from .state import ThermoState, WMethod
from .symmetrization import CutoffPolicy, cutoff_accept, loop_phase

TWO_PI = 2.0 * math.pi
SQRT_2PI = math.sqrt(TWO_PI)
_BLOCK = 16
# 32 nodes per axis misses the dimer at beta = 0.2 by ~80%; 64 is converged
DIMER_NODES = 64


class UnsupportedLoopOrder(ValueError):
    """Deterministic grids only handle monomers and dimers."""


def n_workers():
    try:
        return max(1, int(os.environ.get("QSM_WORKERS", "1")))
    except ValueError:
        return 1


def _ordered_sum(fn, n_items):
    """sum(fn(i) for i in range(n_items)) with a fixed combination order."""
    workers = n_workers()
    if workers == 1 or n_items == 1:
        parts = [fn(i) for i in range(n_items)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, range(n_items)))
    total = parts[0]
    for part in parts[1:]:
        total = total + part
    return total


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor grid on [-limit_p, limit_p] x [-limit_q, limit_q] per axis.

    ``shift_p`` and ``shift_q`` displace the nodes; nonzero values break the
    reflection symmetry and exist to exercise :func:`imaginary_residual`.
    In d = 1 the imaginary part is odd in P and in Q, so both must move.
    """

    limit_p: float
    limit_q: float
    nodes_per_axis: int = 64
    rule: str = "gauss_legendre"
    shift_p: float = 0.0
    shift_q: float = 0.0

    def __post_init__(self):
        if not (self.limit_p > 0 and self.limit_q > 0):
            raise ValueError("integration limits must be positive")
        if self.nodes_per_axis < 8:
            raise ValueError("need at least 8 nodes per axis")
        if self.rule not in ("gauss_legendre", "midpoint"):
            raise ValueError(f"unknown rule {self.rule!r}")

    @classmethod
    def default(cls, beta, nodes_per_axis=64, method=None, scale=6.0):
        """Limits max(6, 6/sqrt(beta)); a fixed-length energy series is also
        confined to sqrt(2 n_max + 1) + 6, beyond which its states vanish."""
        lim = max(scale, scale / math.sqrt(beta))
        if method is not None and method.kind == "exact" and not method.truncation.adaptive:
            lim = min(lim, math.sqrt(2 * method.truncation.n_max + 1) + scale)
        return cls(lim, lim, nodes_per_axis)

    @property
    def symmetric(self):
        return self.shift_p == 0.0 and self.shift_q == 0.0

    def _rule(self, limit):
        n = self.nodes_per_axis
        if self.rule == "gauss_legendre":
            x, w = np.polynomial.legendre.leggauss(n)
        else:
            x = (np.arange(n) + 0.5) * 2.0 / n - 1.0
            w = np.full(n, 2.0 / n)
        return x * limit, w * limit

    def p_nodes(self):
        x, w = self._rule(self.limit_p)
        return x + self.shift_p, w

    def q_nodes(self):
        x, w = self._rule(self.limit_q)
        return x + self.shift_q, w


@dataclass(frozen=True)
class McSampler:
    """Monte Carlo settings for loops of any length.

    Points are drawn from exp(-lam * sum_j H_j) with lam = base / width^2,
    where base is tanh(beta) for the exact series (the decay rate of the
    exact weight) and beta otherwise.
    """

    samples: int = 200_000
    seed: int = 0
    proposal_width: float = 1.0
    chunk: int = 50_000
    jackknife_blocks: int = 50

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not self.proposal_width > 0:
            raise ValueError("proposal_width must be positive")

    def rate(self, beta, method):
        base = math.tanh(beta) if method.kind == "exact" else beta
        return base / self.proposal_width ** 2


# --------------------------------------------------------------------------
# one-dimensional building blocks

def _series_cut(mags, n_floor, trunc):
    """Index of the last kept term under the adaptive three-quiet-terms rule."""
    if not trunc.adaptive:
        return mags.size - 1
    quiet = 0
    for n, m in enumerate(mags):
        quiet = quiet + 1 if m < trunc.tail_tol else 0
        if quiet >= 3 and n >= n_floor:
            return n
    return mags.size - 1


def axis_matrix(P, Q, beta, method, kind="w"):
    """One-axis weight on the outer product of node sets P and Q.

    kind ``w`` gives e^{-beta H} W, ``h`` multiplies that by H and ``wh``
    gives e^{-beta H} H W_H.  For the energy series the (P_a, Q_b) matrix
    is Phi_P^T diag(c) Phi_Q times the phase e^{-i P Q}, which costs a
    matrix product instead of a series per point.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    h = 0.5 * (P[:, None] ** 2 + Q[None, :] ** 2)
    if method.kind == "exact":
        trunc = method.truncation
        fp = hermite_functions(trunc.n_max, P)
        fq = hermite_functions(trunc.n_max, Q)
        n = np.arange(trunc.n_max + 1)
        coef = SQRT_2PI * np.exp(-beta * (n + 0.5))
        if kind == "wh":
            coef = coef * (n + 0.5)
        mags = coef * np.max(np.abs(fp), axis=1, initial=0.0) * np.max(np.abs(fq), axis=1,
                                                                         initial=0.0)
        x2max = max(float(np.max(P * P, initial=0.0)), float(np.max(Q * Q, initial=0.0)))
        top = _series_cut(mags, int(np.ceil(0.5 * (x2max - 1.0))) + 1, trunc)
        phase_n = np.array([i_power(k) for k in range(top + 1)])
        core = (fp[:top + 1].T * (coef[:top + 1] * phase_n)) @ fq[:top + 1]
        out = np.exp(-1j * np.outer(P, Q)) * core
    elif method.kind == "classical":
        out = np.exp(-beta * h) + 0j
        if kind == "wh":
            out = out * h
    else:
        PP, QQ = np.meshgrid(P, Q, indexing="ij")
        pts_p, pts_q = PP[..., None], QQ[..., None]
        if kind == "wh":
            return weighted_wh(pts_p, pts_q, beta, method)
        out = weighted_w(pts_p, pts_q, beta, method)
    if kind == "h":
        out = out * h
    return out


def _mono_sum(f, wp, wq):
    return complex(wp @ f @ wq)


def _dimer_sum(f, g, P, wp, Q, wq, policy):
    """sum over two 1-D phase points of f(1) g(2) exp(i phase) * cut-off.

    The loop phase is (Q1 - Q2)(P1 - P2).  For each Q1 node the P sums
    are contractions, so the cost is O(N^3) without a momentum cut-off
    and O(N^4) with one.
    """
    n_q = Q.size
    cut_q = np.ones((n_q, n_q), dtype=bool)
    if policy.r_cut_q is not None:
        cut_q = np.abs(Q[:, None] - Q[None, :]) <= policy.r_cut_q
    cut_p = None
    if policy.r_cut_p is not None:
        cut_p = (np.abs(P[:, None] - P[None, :]) <= policy.r_cut_p).astype(float)
    fw = f * wp[:, None]
    gw = g * wp[:, None]
    n_blocks = -(-n_q // _BLOCK)

    def block(ib):
        rows = range(ib * _BLOCK, min(n_q, (ib + 1) * _BLOCK))
        acc = 0j
        for b in rows:
            dq = Q[b] - Q                                   # over e
            ph = np.exp(1j * np.outer(dq, P))               # [e, a]
            x = fw[:, b][None, :] * ph                      # [e, a]
            y = gw.T * np.conj(ph)                          # [e, c]
            if cut_p is None:
                inner = x.sum(axis=1) * y.sum(axis=1)
            else:
                inner = np.sum(x * (y @ cut_p), axis=1)
            acc += wq[b] * np.sum(wq * cut_q[b] * inner)
        return acc

    return _ordered_sum(block, n_blocks)


def _band_rule(x, w, lo, hi, r_cut, m):
    """Pairs (x_a, x_a + t) with |t| <= r_cut, both inside [lo, hi].

    For each outer node the offset t gets its own Gauss-Legendre rule on
    the admissible interval, so the cut-off is an integration limit
    rather than a step in the integrand.
    """
    tx, tw = np.polynomial.legendre.leggauss(m)
    a_lo = np.maximum(-r_cut, lo - x)
    a_hi = np.minimum(r_cut, hi - x)
    half = 0.5 * (a_hi - a_lo)
    t = (0.5 * (a_hi + a_lo))[:, None] + half[:, None] * tx[None, :]
    wt = (w * half)[:, None] * tw[None, :]
    first = np.repeat(np.arange(x.size), m)
    return first, t.ravel(), wt.ravel()


def _dimer_band_sum(ev, f, gkind, P, wp, p_dom, Q, wq, q_dom, policy, m):
    """Cut-off dimer sum in pair coordinates (x1, x2 = x1 + t).

    The loop phase (Q1 - Q2)(P1 - P2) becomes t_q t_p.  ``f`` is the
    first particle's weight on the base nodes, ``ev`` evaluates the second
    particle's weight on arbitrary node sets.
    """
    rp = policy.r_cut_p if policy.r_cut_p is not None else p_dom[1] - p_dom[0]
    rq = policy.r_cut_q if policy.r_cut_q is not None else q_dom[1] - q_dom[0]
    ip, tp, wtp = _band_rule(P, wp, p_dom[0], p_dom[1], rp, m)
    iq, tq, wtq = _band_rule(Q, wq, q_dom[0], q_dom[1], rq, m)
    p2 = P[ip] + tp
    q2 = Q[iq] + tq
    n_k = tq.size
    step = _BLOCK * 16
    n_blocks = -(-n_k // step)

    def block(ib):
        sl = slice(ib * step, min(n_k, (ib + 1) * step))
        g = ev(p2, q2[sl], gkind)
        first = f[np.ix_(ip, iq[sl])]
        ph = np.exp(1j * np.outer(tp, tq[sl]))
        return complex(wtp @ (first * g * ph) @ wtq[sl])

    return _ordered_sum(block, n_blocks)


def _check_nonseparable_dims(method, d, l):
    if method.separable:
        return
    if l == 1 and d > 2:
        raise UnsupportedLoopOrder(
            f"{method.kind} weight is not separable; deterministic monomer grids stop at d=2")
    if l == 2 and d > 1:
        raise UnsupportedLoopOrder(
            f"{method.kind} weight is not separable; deterministic dimer grids need d=1")


def _monomer_nonseparable_2d(ts, grid, method, kind):
    """Monomer integral over a 4-D tensor grid (d = 2, expansion methods)."""
    P, wp = grid.p_nodes()
    Q, wq = grid.q_nodes()
    n = P.size
    n_blocks = -(-n // _BLOCK)

    def block(ib):
        sl = slice(ib * _BLOCK, min(n, (ib + 1) * _BLOCK))
        # axes: p1, p2, q1, q2
        pp = np.stack(np.broadcast_arrays(P[sl, None, None, None], P[None, :, None, None],
                                          Q[None, None, :, None], Q[None, None, None, :]))
        pts_p = np.stack([pp[0], pp[1]], axis=-1)
        pts_q = np.stack([pp[2], pp[3]], axis=-1)
        if kind == "wh":
            val = weighted_wh(pts_p, pts_q, ts.beta, method)
        else:
            val = weighted_w(pts_p, pts_q, ts.beta, method)
            if kind == "h":
                val = val * hamiltonian(pts_p, pts_q)
        wts = (wp[sl, None, None, None] * wp[None, :, None, None]
               * wq[None, None, :, None] * wq[None, None, None, :])
        return complex(np.sum(val * wts))

    return _ordered_sum(block, n_blocks)


# --------------------------------------------------------------------------
# monomer

def _monomer_integrals(ts, grid, method, with_energy=False, use_wh=False):
    """Complex (2 pi)^{-d} integrals of the monomer weight (and energy weight)."""
    d = ts.d
    _check_nonseparable_dims(method, d, 1)
    P, wp = grid.p_nodes()
    Q, wq = grid.q_nodes()
    if not method.separable and d == 2:
        plain = _monomer_nonseparable_2d(ts, grid, method, "w") / TWO_PI ** 2
        if not with_energy:
            return plain, None
        ener = _monomer_nonseparable_2d(ts, grid, method, "wh" if use_wh else "h")
        return plain, ener / TWO_PI ** 2

    f = axis_matrix(P, Q, ts.beta, method, "w")
    one = _mono_sum(f, wp, wq) / TWO_PI
    plain = one ** d
    if not with_energy:
        return plain, None
    h = axis_matrix(P, Q, ts.beta, method, "wh" if use_wh else "h")
    one_e = _mono_sum(h, wp, wq) / TWO_PI
    # energy is a sum over axes; the other axes contribute plain factors
    return plain, d * one_e * one ** (d - 1)


def monomer_grand_potential(ts: ThermoState, grid: Optional[QuadratureGrid] = None,
                            method: WMethod = WMethod()):
    """-beta*Omega_1 = z (2 pi)^{-d} int dP dQ Re[e^{-beta H} W]."""
    grid = grid or QuadratureGrid.default(ts.beta, method=method)
    plain, _ = _monomer_integrals(ts, grid, method)
    return ts.z * plain.real


def monomer_energy(ts: ThermoState, grid: Optional[QuadratureGrid] = None,
                   method: WMethod = WMethod(), use_wh=False):
    """Monomer contribution to the average energy."""
    grid = grid or QuadratureGrid.default(ts.beta, method=method)
    _, ener = _monomer_integrals(ts, grid, method, with_energy=True, use_wh=use_wh)
    return ts.z * ener.real


def imaginary_residual(ts: ThermoState, grid: Optional[QuadratureGrid] = None,
                       method: WMethod = WMethod()):
    """Integral of Im of the monomer integrand, and of its modulus.

    Returns (residual, scale); on a P-symmetric grid residual/scale is at
    rounding level because the imaginary part is odd in P.
    """
    grid = grid or QuadratureGrid.default(ts.beta, method=method)
    if ts.d != 1:
        raise ValueError("imaginary_residual is defined for d = 1")
    P, wp = grid.p_nodes()
    Q, wq = grid.q_nodes()
    f = axis_matrix(P, Q, ts.beta, method, "w")
    resid = float(wp @ f.imag @ wq) / TWO_PI
    scale = float(wp @ np.abs(f) @ wq) / TWO_PI
    return resid, scale


# --------------------------------------------------------------------------
# dimer

def _dimer_integrals(ts, grid, policy, method, with_energy=False, use_wh=False):
    """Complex (2 pi)^{-2d} dimer integrals, per-axis factorized when possible."""
    d = ts.d
    _check_nonseparable_dims(method, d, 2)
    P, wp = grid.p_nodes()
    Q, wq = grid.q_nodes()
    norm = TWO_PI ** 2
    ekind = "wh" if use_wh else "h"
    f = axis_matrix(P, Q, ts.beta, method, "w")
    h = axis_matrix(P, Q, ts.beta, method, ekind) if with_energy else None

    if policy.active:
        p_dom = (grid.shift_p - grid.limit_p, grid.shift_p + grid.limit_p)
        q_dom = (grid.shift_q - grid.limit_q, grid.shift_q + grid.limit_q)

        def ev(pv, qv, kind):
            return axis_matrix(pv, qv, ts.beta, method, kind)

        def pair(a, bkind):
            return _dimer_band_sum(ev, a, bkind, P, wp, p_dom, Q, wq, q_dom,
                                   policy, grid.nodes_per_axis)
    else:
        def pair(a, bkind):
            b = f if bkind == "w" else h
            return _dimer_sum(a, b, P, wp, Q, wq, policy)

    one = pair(f, "w") / norm
    plain = one ** d
    if not with_energy:
        return plain, None
    # sum over the two particles of the energy-carrying factor
    one_e = (pair(h, "w") + pair(f, ekind)) / norm
    return plain, d * one_e * one ** (d - 1)


def loop_grand_potential(l, ts: ThermoState, grid: Optional[QuadratureGrid] = None,
                         policy: CutoffPolicy = CutoffPolicy(), method: WMethod = WMethod()):
    """Signed -beta*Omega_l for l = 2 on a deterministic grid.

    The statistics enter only through the prefactor (+-1)^{l-1}.
    """
    if l != 2:
        raise UnsupportedLoopOrder(
            f"deterministic grids support l = 2 only, got l = {l}; use mc_loop_grand_potential")
    grid = grid or QuadratureGrid.default(ts.beta, DIMER_NODES, method)
    plain, _ = _dimer_integrals(ts, grid, policy, method)
    return ts.sign * ts.z ** 2 / 2.0 * plain.real


def dimer_energy(ts: ThermoState, grid: Optional[QuadratureGrid] = None,
                 policy: CutoffPolicy = CutoffPolicy(), method: WMethod = WMethod(),
                 use_wh=False):
    """Signed dimer contribution to the average energy."""
    grid = grid or QuadratureGrid.default(ts.beta, DIMER_NODES, method)
    _, ener = _dimer_integrals(ts, grid, policy, method, with_energy=True, use_wh=use_wh)
    return ts.sign * ts.z ** 2 / 2.0 * ener.real


# --------------------------------------------------------------------------
# Monte Carlo for any loop length

def _jackknife(values, n_blocks):
    n = values.size
    k = max(2, min(n_blocks, n))
    edges = np.linspace(0, n, k + 1).astype(int)
    sums = np.array([values[edges[i]:edges[i + 1]].sum() for i in range(k)])
    counts = np.diff(edges)
    total, count = sums.sum(), counts.sum()
    loo = (total - sums) / (count - counts)
    mean = total / count
    err = math.sqrt((k - 1) / k * np.sum((loo - loo.mean()) ** 2))
    return mean, err


def _mc_values(l, ts, sampler, policy, method, energy=None, symmetrize=True):
    """Per-sample importance-weighted integrand values for an l-loop."""
    d = ts.d
    lam = sampler.rate(ts.beta, method)
    n_chunks = -(-sampler.samples // sampler.chunk)

    def chunk(ic):
        m = min(sampler.chunk, sampler.samples - ic * sampler.chunk)
        seq = np.random.SeedSequence(sampler.seed, spawn_key=(ic,))
        rng = np.random.Generator(np.random.Philox(seq))
        std = 1.0 / math.sqrt(lam)
        P = rng.normal(0.0, std, size=(m, l, d))
        Q = rng.normal(0.0, std, size=(m, l, d))
        h = hamiltonian(P, Q)                                # (m, l)
        prop = np.exp(-lam * h)
        f = weighted_w(P, Q, ts.beta, method) / prop         # (m, l)
        prod = np.prod(f, axis=-1)
        if energy == "w":
            prod = prod * h.sum(axis=-1)
        elif energy == "wh":
            fh = weighted_wh(P, Q, ts.beta, method) / prop
            acc = 0j
            for k in range(l):
                others = np.prod(np.delete(f, k, axis=-1), axis=-1)
                acc = acc + fh[:, k] * others
            prod = acc
        if symmetrize:
            prod = prod * np.exp(1j * loop_phase(P, Q))
        val = prod.real
        if policy.active:
            val = val * cutoff_accept(P, Q, policy)
        return val

    workers = n_workers()
    if workers == 1:
        parts = [chunk(i) for i in range(n_chunks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(chunk, range(n_chunks)))
    scale = ts.sign ** (l - 1) * ts.z ** l / l * lam ** (-l * d)
    return np.concatenate(parts) * scale


def mc_loop_grand_potential(l, ts: ThermoState, sampler: McSampler = McSampler(),
                            policy: CutoffPolicy = CutoffPolicy(), method: WMethod = WMethod(),
                            symmetrize=True):
    """Monte Carlo estimate of the signed -beta*Omega_l with a jackknife error.

    ``symmetrize=False`` drops the loop phase (eta = 1), leaving only the
    commutation weights; with W = 1 that is exactly the Gaussian norm.
    """
    if l < 1:
        raise ValueError("loop length must be >= 1")
    vals = _mc_values(l, ts, sampler, policy, method, symmetrize=symmetrize)
    return _jackknife(vals, sampler.jackknife_blocks)


def mc_loop_energy(l, ts: ThermoState, sampler: McSampler = McSampler(),
                   policy: CutoffPolicy = CutoffPolicy(), method: WMethod = WMethod(),
                   use_wh=False):
    """Monte Carlo estimate of the signed l-loop energy contribution."""
    vals = _mc_values(l, ts, sampler, policy, method, energy="wh" if use_wh else "w")
    return _jackknife(vals, sampler.jackknife_blocks)


# --------------------------------------------------------------------------
# totals over loops

def loop_contribution(l, ts, grid=None, sampler=None, policy=CutoffPolicy(),
                      method=WMethod()):
    """Signed -beta*Omega_l by whichever route handles this loop length."""
    if l == 1:
        return monomer_grand_potential(ts, grid, method)
    if l == 2 and sampler is None:
        return loop_grand_potential(2, ts, grid, policy, method)
    if sampler is None:
        raise UnsupportedLoopOrder(f"loop length {l} needs a McSampler")
    return mc_loop_grand_potential(l, ts, sampler, policy, method)[0]


def average_energy_loops(l_max, ts: ThermoState, grid=None, sampler=None,
                         policy=CutoffPolicy(), method=WMethod(), use_wh=False,
                         dimer_grid=None):
    """Sum of the signed loop energy contributions for l = 1..l_max.

    Monomer and dimer use deterministic grids, longer loops Monte Carlo.
    The loop terms are already the linked contributions of ln Xi, so no
    further division by the partition function is applied.
    """
    if l_max < 1:
        raise ValueError("l_max must be >= 1")
    if l_max >= 3 and sampler is None:
        raise UnsupportedLoopOrder("loops with l >= 3 need a McSampler")
    total = monomer_energy(ts, grid, method, use_wh)
    if l_max >= 2:
        total += dimer_energy(ts, dimer_grid or grid, policy, method, use_wh)
    for l in range(3, l_max + 1):
        total += mc_loop_energy(l, ts, sampler, policy, method, use_wh)[0]
    return total


def grand_potential_loops(l_max, ts: ThermoState, grid=None, sampler=None,
                          policy=CutoffPolicy(), method=WMethod(), dimer_grid=None):
    """Sum of signed -beta*Omega_l for l = 1..l_max."""
    total = monomer_grand_potential(ts, grid, method)
    if l_max >= 2:
        total += loop_grand_potential(2, ts, dimer_grid or grid, policy, method)
    for l in range(3, l_max + 1):
        if sampler is None:
            raise UnsupportedLoopOrder("loops with l >= 3 need a McSampler")
        total += mc_loop_grand_potential(l, ts, sampler, policy, method)[0]
    return total
