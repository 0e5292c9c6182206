"""Fateev-Zamolodchikov Z_N clock model: weights, Fourier identities and boundaries.

Spins take values ``omega**r`` with ``omega = exp(2 pi i / N)``; all weight
tables are indexed by the spin difference ``r`` mod N.  ``lam`` is always
``pi / (2 N)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import dft, idft

POLE_EPS = 1e-12


def crossing(N: int) -> float:
    return math.pi / (2 * N)


def parafermion_spin(N: int, m: int = 1) -> float:
    """Conformal spin ``m (N - m) / N`` of the charge-``m`` parafermion."""
    return m * (N - m) / N


def cr_u(N: int, alpha: float, s: float | None = None) -> float:
    """Bulk spectral parameter attached to a rhombus of angle ``alpha``."""
    if s is None:
        s = parafermion_spin(N)
    return 0.5 * (1 - s) * (math.pi - alpha)


@dataclass(frozen=True)
class ZnWeightTable:
    N: int
    u: float
    W: np.ndarray

    @property
    def lam(self) -> float:
        return crossing(self.N)

    def __getitem__(self, r):
        return self.W[np.mod(r, self.N)]


@dataclass(frozen=True)
class ZnBoundaryTable:
    N: int
    u: float
    xi: complex
    Yhat: np.ndarray

    @property
    def Y(self) -> np.ndarray:
        return idft(self.Yhat)


def _check_N(N):
    if int(N) != N or N < 2:
        raise ValueError("N must be an integer >= 2")


def fz_product(N: int, u, shift=0.0) -> np.ndarray:
    """``prod_{p<r} sin((2p+1) lam - u + shift) / sin((2p+1) lam + u + shift)``, complex-safe."""
    lam = crossing(N)
    out = np.ones(N, dtype=complex)
    for r in range(1, N):
        den = np.sin((2 * r - 1) * lam + u + shift)
        if abs(den) < POLE_EPS:
            raise ZeroDivisionError(f"pole at r={r}")
        out[r] = out[r - 1] * np.sin((2 * r - 1) * lam - u + shift) / den
    return out


def fz_weights(N: int, u: float) -> ZnWeightTable:
    """Integrable FZ weights ``W(u|r)``, normalised by ``W(u|0) = 1``."""
    _check_N(N)
    W = fz_product(N, u)
    return ZnWeightTable(N, u, W.real if np.allclose(W.imag, 0) else W)


def symmetry_residual(W) -> float:
    """``max_r |W[r] - W[-r]|``; periodicity is built into the storage."""
    W = np.asarray(W)
    return float(np.max(np.abs(W - np.roll(W[::-1], 1))))


def self_duality_residual(N: int, u: float) -> float:
    """Compare ``dft(W(u))`` normalised at k=0 with ``W(lam - u)``."""
    What = dft(fz_weights(N, u).W)
    if abs(What[0]) < POLE_EPS:
        raise ZeroDivisionError("transform vanishes at k=0")
    return float(np.max(np.abs(What / What[0] - fz_weights(N, crossing(N) - u).W)))


def star_triangle_ratios(N: int, u: float, v: float, shift: float = 0.0) -> np.ndarray:
    """LHS/RHS of the star-triangle relation for every outer spin triple.

    ``shift`` offsets the argument of the middle weight (control runs).
    """
    lam = crossing(N)
    A = fz_weights(N, lam - u).W
    B = fz_weights(N, u + v + shift).W
    C = fz_weights(N, lam - v).W
    D = fz_weights(N, u).W
    E = fz_weights(N, lam - u - v).W
    F = fz_weights(N, v).W
    r = np.arange(N)
    r1, r2, r3 = np.meshgrid(r, r, r, indexing="ij")
    lhs = np.zeros((N, N, N), dtype=complex)
    for rp in range(N):
        lhs += A[(r1 - rp) % N] * B[(r2 - rp) % N] * C[(r3 - rp) % N]
    rhs = D[(r2 - r3) % N] * E[(r1 - r3) % N] * F[(r1 - r2) % N]
    if np.any((np.abs(rhs) < POLE_EPS) & (np.abs(lhs) > 1e-9)):
        return np.array([np.inf])
    ok = np.abs(rhs) >= POLE_EPS
    return (lhs[ok] / rhs[ok]).ravel()


def star_triangle_spread(N: int, u: float, v: float, shift: float = 0.0) -> float:
    """Spread of the LHS/RHS ratio over spin triples (0 when the relation holds)."""
    rho = star_triangle_ratios(N, u, v, shift)
    if not np.all(np.isfinite(rho)):
        return math.inf
    return float(np.max(np.abs(rho - rho[0])))


def _bracket(N, u, s, W, m=1):
    """Four-term plaquette bracket for spin differences ``omega**(m r)``."""
    om = np.exp(2j * np.pi / N)
    r = np.arange(N)
    ph = om ** ((m * r) % N)
    W = np.asarray(W)
    return (np.exp(-1j * u) - np.exp(1j * u) * ph) * W[r] + (
        np.exp(1j * u + 1j * np.pi * s) - np.exp(-1j * u - 1j * np.pi * s) * ph
    ) * W[(r + m) % N]


def bulk_I_residual(N: int, u: float, s: float) -> float:
    """Bulk plaquette bracket evaluated on the weight of the crossed edge.

    The edge shared by the two disorder insertions sits on the diagonal of
    a rhombus with angle ``pi - alpha`` at its dual corners, so it carries
    ``W(lam - u)``.
    """
    return float(np.max(np.abs(_bracket(N, u, s, fz_weights(N, crossing(N) - u).W))))


def recursion_check(N: int, u: float, s: float) -> float:
    """Residual of the first-order recursion in ``r`` that generates ``W(u|r)``."""
    W = fz_weights(N, u).W
    lam = crossing(N)
    ph = -np.exp(1j * np.pi * s + 1j * np.pi / N)
    out = 0.0
    for r in range(N):
        rhs = W[r] * ph * np.sin((2 * r + 1) * lam - u) / np.sin((2 * r + 1) * lam + u)
        out = max(out, abs(W[(r + 1) % N] - rhs))
    return float(out)


def iterated_recursion(N: int, u: float) -> np.ndarray:
    """Apply the recursion ``N`` times from ``W[0] = 1``; returns ``N+1`` values."""
    lam = crossing(N)
    vals = [1.0 + 0j]
    for r in range(N):
        vals.append(vals[-1] * np.sin((2 * r + 1) * lam - u) / np.sin((2 * r + 1) * lam + u))
    return np.array(vals)


# ---------------------------------------------------------------------------
# charged parafermions


def charged_transform(table, m: int):
    """Relabel spins ``sigma -> sigma**m``: ``W'(r) = W(m r mod N)``."""
    if isinstance(table, ZnWeightTable):
        N = table.N
        _check_charge(N, m)
        return ZnWeightTable(N, table.u, _permute(table.W, m))
    if isinstance(table, ZnBoundaryTable):
        N = table.N
        _check_charge(N, m)
        Y = _permute(table.Y, m)
        return ZnBoundaryTable(N, table.u, table.xi, dft(Y))
    W = np.asarray(table)
    _check_charge(len(W), m)
    return _permute(W, m)


def _check_charge(N, m):
    if not (1 <= m < N) or math.gcd(m, N) != 1:
        raise ValueError(f"charge {m} is not invertible mod {N}")


def _permute(W, m):
    N = len(W)
    return np.asarray(W)[(m * np.arange(N)) % N]


def charged_I_residual(W, u: float, s: float, m: int) -> float:
    """Plaquette bracket for the charge-``m`` parafermion on table ``W``."""
    W = W.W if isinstance(W, ZnWeightTable) else np.asarray(W)
    return float(np.max(np.abs(_bracket(len(W), u, s, W, m))))


def charged_recursion_weights(N: int, u: float, m: int, s: float | None = None) -> np.ndarray:
    """Solve the charge-``m`` bracket for ``W`` along the orbit ``0, m, 2m, ...``.

    Returns the table and leaves the closure condition to the caller via
    :func:`charged_I_residual`.
    """
    _check_charge(N, m)
    if s is None:
        s = parafermion_spin(N, m)
    om = np.exp(2j * np.pi / N)
    W = np.zeros(N, dtype=complex)
    W[0] = 1
    r = 0
    for _ in range(N - 1):
        a = np.exp(-1j * u) - np.exp(1j * u) * om ** (m * r % N)
        b = np.exp(1j * u + 1j * np.pi * s) - np.exp(-1j * u - 1j * np.pi * s) * om ** (m * r % N)
        W[(r + m) % N] = -a / b * W[r]
        r = (r + m) % N
    return W


# ---------------------------------------------------------------------------
# boundary weights


def boundary_yhat(N: int, u, xi) -> np.ndarray:
    """Fourier-space boundary weights, ``Yhat[0] = 1``."""
    lam = crossing(N)
    out = np.ones(N, dtype=complex)
    for k in range(1, N):
        q = (2 * k - 1) * lam
        den = np.sin(q + u + xi) * np.sin(q + u - xi)
        if abs(den) < POLE_EPS:
            raise ZeroDivisionError(f"pole at k={k}")
        out[k] = out[k - 1] * np.sin(q - u + xi) * np.sin(q - u - xi) / den
    return out


def boundary_y(N: int, u: float, xi) -> ZnBoundaryTable:
    _check_N(N)
    return ZnBoundaryTable(N, u, xi, boundary_yhat(N, u, xi))


def boundary_jhat(N: int, u: float, xi, Yhat=None, s: float | None = None) -> np.ndarray:
    """Fourier transform of the pentagon bracket.

    The boundary phases carry ``2 xi``: the table argument ``xi`` is half the
    geometric boundary field of the pentagon.
    """
    if s is None:
        s = parafermion_spin(N)
    if Yhat is None:
        Yhat = boundary_yhat(N, u, xi)
    om = np.exp(2j * np.pi / N)
    k = np.arange(N)
    Yn = np.roll(Yhat, -1)
    return (np.exp(-2j * u) + np.exp(2j * xi + 1j * np.pi * s) * om ** (-k)) * Yhat - (
        np.exp(2j * u) + np.exp(-2j * xi - 1j * np.pi * s) * om ** (-k - 1)
    ) * Yn


def boundary_phase(N: int) -> np.ndarray:
    """The phases ``(4k + 2) lam`` that select the symmetric solution."""
    return (4 * np.arange(N) + 2) * crossing(N)


def boundary_cr_residual_zn(N: int, u: float, xi, phase=None, Yhat=None) -> float:
    """``max_k |Re[exp(i phase_k) Jhat(k)]|``.

    The real part is continued analytically in ``xi``: the conjugate half is
    evaluated at ``conj(xi)``, so complex fields are handled and real ones
    reduce to the plain real part.
    """
    if phase is None:
        phase = boundary_phase(N)
    ph = np.exp(1j * np.asarray(phase))
    xi_c = np.conj(xi)
    if Yhat is None:
        J = boundary_jhat(N, u, xi)
        Jc = np.conj(boundary_jhat(N, u, xi_c))
    else:
        J = boundary_jhat(N, u, xi, Yhat)
        Jc = np.conj(boundary_jhat(N, u, xi_c, np.conj(Yhat)))
    return float(np.max(np.abs(ph * J + np.conj(ph) * Jc)) / 2)


def solve_boundary_yhat(N: int, u: float, xi: float, phase) -> np.ndarray:
    """Solve ``Re[exp(i phase_k) Jhat(k)] = 0`` for ``Yhat`` with ``Yhat[0] = 1``.

    Each equation fixes ``Yhat[k+1] / Yhat[k]``.  All ``N`` equations are used,
    so the result has ``N + 1`` entries and ``Yhat[N]`` should return to 1.
    """
    s = parafermion_spin(N)
    om = np.exp(2j * np.pi / N)
    Y = np.ones(N + 1)
    for k in range(N):
        A = np.exp(-2j * u) + np.exp(2j * xi + 1j * np.pi * s) * om ** (-k)
        B = np.exp(2j * u) + np.exp(-2j * xi - 1j * np.pi * s) * om ** (-k - 1)
        ph = np.exp(1j * phase[k])
        Y[k + 1] = Y[k] * (ph * A).real / (ph * B).real
    return Y


def boundary_symmetry_residual(N: int, u: float, xi: float, phase=None) -> float:
    """Periodicity and reflection symmetry of the table solved from ``phase``."""
    if phase is None:
        phase = boundary_phase(N)
    Y = solve_boundary_yhat(N, u, xi, phase)
    return max(abs(Y[N] - Y[0]), symmetry_residual(Y[:N]))


def boundary_ybe_residual(N: int, u: float, v: float, xi, Yu=None, Yv=None) -> float:
    """Fourier-space reflection equation, max residual over ``(k, l)``."""
    from .numerics import residual

    if Yu is None:
        Yu = boundary_yhat(N, u, xi)
    if Yv is None:
        Yv = boundary_yhat(N, v, xi)
    Wm = dft(fz_weights(N, u - v).W)
    Wp = dft(fz_weights(N, u + v).W)
    out = 0.0
    for k in range(N):
        for l in range(N):
            m = np.arange(N)
            lhs = Yv[k] * np.sum(Wm[m] * Yu[(l - m) % N] * Wp[(k + l - m) % N])
            rhs = Yv[l] * np.sum(Wm[m] * Wp[(k + l - m) % N] * Yu[(k - m) % N])
            out = max(out, residual(lhs, rhs))
    return out


def boundary_ybe_real_space_residual(N: int, u: float, v: float, xi) -> float:
    """Spin-space reflection equation with ``Y(v)`` on both outer legs of the right side."""
    from .numerics import residual

    Wm = fz_weights(N, u - v).W
    Wp = fz_weights(N, u + v).W
    Yu = boundary_y(N, u, xi).Y
    Yv = boundary_y(N, v, xi).Y
    out = 0.0
    rp = np.arange(N)
    for r1 in range(N):
        for r2 in range(N):
            for r3 in range(N):
                lhs = Wm[(r1 - r2) % N] * np.sum(Yu[(r1 - rp) % N] * Wp[(r2 - rp) % N] * Yv[(r3 - rp) % N])
                rhs = Wm[(r2 - r3) % N] * np.sum(Yv[(r1 - rp) % N] * Wp[(r2 - rp) % N] * Yu[(r3 - rp) % N])
                out = max(out, residual(lhs, rhs))
    return out


def free_bc_proportionality(N: int, u: float) -> float:
    """Compare ``Y(u/2, u/2)`` with the vertical bulk weight ``W(lam - u)`` up to scale."""
    Y = boundary_y(N, u / 2, u / 2).Y
    if abs(Y[0]) < POLE_EPS:
        raise ZeroDivisionError("Y[0] vanishes")
    W = fz_weights(N, crossing(N) - u).W
    return float(np.max(np.abs(Y / Y[0] - W / W[0])))


# ---------------------------------------------------------------------------
# two-row transfer matrix


def two_row_transfer_matrix(N: int, L: int, u: float, xi_l, xi_r, YL=None, YR=None) -> np.ndarray:
    """Two-row transfer matrix of a width-``L`` open strip.

    Bulk faces alternate ``W(u)`` and ``W(lam - u)``; the left boundary edge
    carries ``Y(u, xi_l)`` and the right one ``Y(lam - u, xi_r)``.  Rows are
    indexed by the lower spin row, columns by the upper one.
    """
    if N**L > 10**4:
        raise MemoryError(f"N**L = {N**L} exceeds the dense cap")
    lam = crossing(N)
    A = fz_weights(N, u).W
    B = fz_weights(N, lam - u).W
    if YL is None:
        YL = boundary_y(N, u, xi_l).Y
    if YR is None:
        YR = boundary_y(N, lam - u, xi_r).Y
    states = np.array(np.unravel_index(np.arange(N**L), (N,) * L)).T
    mids = np.array(np.unravel_index(np.arange(N ** (L - 1)), (N,) * (L - 1))).T if L > 1 else np.zeros((1, 0), int)
    S = states[:, None, :]
    P = states[None, :, :]
    M = YL[(S[..., 0] - P[..., 0]) % N] * YR[(S[..., -1] - P[..., -1]) % N]
    total = np.zeros((N**L, N**L), dtype=complex)
    for t in mids:
        term = np.ones((N**L, N**L), dtype=complex)
        for k in range(L - 1):
            term = term * (
                A[(S[..., k] - t[k]) % N]
                * B[(S[..., k + 1] - t[k]) % N]
                * A[(t[k] - P[..., k]) % N]
                * B[(t[k] - P[..., k + 1]) % N]
            )
        total += term
    return M * total


def two_row_transfer_commutator(N: int, L: int, u: float, v: float, xi_l, xi_r, YL_fn=None, YR_fn=None) -> float:
    """``max|[t(u), t(v)]| / max|t(u) t(v)|``."""
    def tm(x):
        YL = YL_fn(x) if YL_fn else None
        YR = YR_fn(x) if YR_fn else None
        return two_row_transfer_matrix(N, L, x, xi_l, xi_r, YL, YR)

    Tu, Tv = tm(u), tm(v)
    P = Tu @ Tv
    scale = np.max(np.abs(P))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(P - Tv @ Tu)) / scale)


# ---------------------------------------------------------------------------
# spin lattices and exact sums

MAX_CONFIGS = 2 * 10**6


class SpinLattice:
    """Rectangular patch of ``nx x ny`` spins with edge weights from rhombus angles.

    Spin ``(x, y)`` sits at ``(2 c x, 2 d y)`` with ``c = cos(alpha/2)``,
    ``d = sin(alpha/2)``, so every unit rhombus of the covering lattice has
    angle ``alpha`` at spins joined along x.  Dual sites are labelled by the
    lower-left spin of their cell and run over ``-1..nx-1`` by ``-1..ny-1``;
    the outer ring lies outside the patch.
    """

    def __init__(self, N: int, nx: int, ny: int, alpha: float, max_sites: int | None = None):
        _check_N(N)
        if nx < 1 or ny < 1:
            raise ValueError("lattice needs at least one site")
        if not 0 < alpha < math.pi:
            raise ValueError("alpha must lie in (0, pi)")
        if N ** (nx * ny) > MAX_CONFIGS or (max_sites is not None and nx * ny > max_sites):
            raise MemoryError(f"{N}**{nx * ny} configurations exceed the cap")
        self.N, self.nx, self.ny, self.alpha = N, nx, ny, alpha
        self.c, self.d = math.cos(alpha / 2), math.sin(alpha / 2)
        self.edges = []
        for y in range(ny):
            for x in range(nx):
                if x + 1 < nx:
                    self.edges.append((self.index(x, y), self.index(x + 1, y), "x"))
                if y + 1 < ny:
                    self.edges.append((self.index(x, y), self.index(x, y + 1), "y"))
        self._edge_id = {frozenset(e[:2]): i for i, e in enumerate(self.edges)}
        # per-edge weight overrides (boundary tables)
        self.overrides: dict = {}

    @property
    def n_sites(self) -> int:
        return self.nx * self.ny

    def index(self, x: int, y: int) -> int:
        return x + self.nx * y

    def has_site(self, x: int, y: int) -> bool:
        return 0 <= x < self.nx and 0 <= y < self.ny

    def site_pos(self, x, y) -> complex:
        return complex(2 * self.c * x, 2 * self.d * y)

    def dual_pos(self, X, Y) -> complex:
        return complex(2 * self.c * (X + 0.5), 2 * self.d * (Y + 0.5))

    def corners(self, X: int, Y: int) -> list:
        """Corner spins of a dual cell, counter-clockwise from lower left."""
        return [(X, Y), (X + 1, Y), (X + 1, Y + 1), (X, Y + 1)]

    def is_interior_dual(self, X, Y) -> bool:
        return all(self.has_site(*p) for p in self.corners(X, Y))

    def edge_between(self, p, q):
        if not (self.has_site(*p) and self.has_site(*q)):
            return None
        return self._edge_id.get(frozenset((self.index(*p), self.index(*q))))

    def crossing(self, k, k2):
        """``(left, right, edge)`` spins of the L-edge crossed by the dual step ``k -> k2``."""
        dX, dY = k2[0] - k[0], k2[1] - k[1]
        if abs(dX) + abs(dY) != 1:
            raise ValueError("dual steps must join neighbouring cells")
        common = [p for p in self.corners(*k) if p in self.corners(*k2)]
        p, q = common
        e = self.edge_between(p, q)
        if e is None:
            raise ValueError(f"dual step {k}->{k2} crosses no edge of the patch")
        mid = (self.site_pos(*p) + self.site_pos(*q)) / 2
        step = self.dual_pos(*k2) - self.dual_pos(*k)
        left_p = (np.conj(step) * (self.site_pos(*p) - mid)).imag > 0
        return (p, q, e) if left_p else (q, p, e)

    def edge_tables(self, u: float) -> list:
        """Weight table of every edge; x-edges get ``W(lam - u)``, y-edges ``W(u)``."""
        lam = crossing(self.N)
        Wx = fz_weights(self.N, lam - u).W
        Wy = fz_weights(self.N, u).W
        out = []
        for i, (_, _, o) in enumerate(self.edges):
            out.append(np.asarray(self.overrides.get(i, Wx if o == "x" else Wy)))
        return out

    def configurations(self) -> np.ndarray:
        n = self.n_sites
        return np.array(np.unravel_index(np.arange(self.N**n), (self.N,) * n)).T


def _config_weights(lat: SpinLattice, u: float, shifts=None) -> np.ndarray:
    """Boltzmann weight of every configuration; ``shifts[e] = (m, sign)`` twists edge ``e``."""
    N = lat.N
    R = lat.configurations()
    w = np.ones(len(R), dtype=complex)
    shifts = shifts or {}
    for e, ((i, j, _), T) in enumerate(zip(lat.edges, lat.edge_tables(u))):
        diff = R[:, i] - R[:, j] - shifts.get(e, 0)
        w = w * T[diff % N]
    return w


def partition_function(lat: SpinLattice, u: float) -> complex:
    """Exact sum over all ``N**sites`` spin assignments."""
    return complex(np.sum(_config_weights(lat, u)))


def path_shifts(lat: SpinLattice, gamma, m: int) -> dict:
    """Shift subtracted from ``r_i - r_j`` on each edge crossed by ``gamma``.

    The spin on the left of the step is multiplied by ``omega**m``, so the
    crossed weight becomes ``W(r_left + m - r_right)``.
    """
    shifts: dict = {}
    for k, k2 in zip(gamma, gamma[1:]):
        left, right, e = lat.crossing(tuple(k), tuple(k2))
        i, j, _ = lat.edges[e]
        # table argument is r_i - r_j; orient the twist with the crossing
        sgn = -1 if lat.index(*left) == i else 1
        shifts[e] = shifts.get(e, 0) + sgn * m
    return {e: v % lat.N for e, v in shifts.items() if v % lat.N}


def disorder_correlator(lat: SpinLattice, u: float, gamma, m: int = 1, insertions=()) -> complex:
    """``<mu^(-m)_start mu^(m)_end prod sigma_j^p>`` by exact summation, normalised by ``Z``."""
    N = lat.N
    R = lat.configurations()
    Z = np.sum(_config_weights(lat, u))
    if abs(Z) < POLE_EPS:
        raise ZeroDivisionError("partition function vanishes")
    w = _config_weights(lat, u, path_shifts(lat, list(gamma), m))
    phase = np.zeros(len(R), dtype=np.int64)
    for site, p in insertions:
        j = lat.index(*site) if isinstance(site, tuple) else site
        phase += p * R[:, j]
    om = np.exp(2j * np.pi * np.arange(N) / N)
    return complex(np.sum(w * om[phase % N]) / Z)


def dual_path(lat: SpinLattice, start, end) -> list:
    """Shortest dual path whose steps all cross patch edges (breadth-first, fixed order)."""
    from collections import deque

    start, end = tuple(start), tuple(end)
    prev = {start: None}
    dq = deque([start])
    while dq:
        k = dq.popleft()
        if k == end:
            break
        for d in ((1, 0), (0, 1), (-1, 0), (0, -1)):
            k2 = (k[0] + d[0], k[1] + d[1])
            if k2 in prev or not (-1 <= k2[0] < lat.nx and -1 <= k2[1] < lat.ny):
                continue
            common = [p for p in lat.corners(*k) if p in lat.corners(*k2)]
            if lat.edge_between(*common) is None:
                continue
            # only the endpoints may lie outside the patch
            if not lat.is_interior_dual(*k2) and k2 != end:
                continue
            prev[k2] = k
            dq.append(k2)
    if end not in prev:
        raise ValueError("no dual path between the given cells")
    out = [end]
    while prev[out[-1]] is not None:
        out.append(prev[out[-1]])
    return out[::-1]


def _turn(a: complex, b: complex) -> float:
    q = b / a
    return math.atan2(q.imag, q.real)


def transport_angle(lat: SpinLattice, gamma, j_start, j_end) -> float:
    """Angle from ``k(a) -> j(a)`` to ``k(z) -> j(z)`` lifted along ``gamma``.

    The start term is the principal angle at ``k(a)``; the lift is the
    continuous change of ``arg(j(z) - k)`` as ``k`` runs along ``gamma``, so
    deforming the path across ``j(z)`` shifts the angle by ``2 pi``.
    """
    gamma = [tuple(k) for k in gamma]
    pz = lat.site_pos(*j_end)
    k0 = lat.dual_pos(*gamma[0])
    theta = _turn(lat.site_pos(*j_start) - k0, pz - k0)
    for k, k2 in zip(gamma, gamma[1:]):
        theta += _turn(pz - lat.dual_pos(*k), pz - lat.dual_pos(*k2))
    return theta


@dataclass(frozen=True)
class SpinObservableSpec:
    """Marked boundary midedge ``a = (spin, dual cell)`` and the spin ``s``."""

    a: tuple
    s: float
    m: int = 1


def parafermion_observable(
    lat: SpinLattice, u: float, spec: SpinObservableSpec, z, gamma=None, end_direction=None
) -> complex:
    """``exp(-i s theta(a, z)) <sigma*(a) sigma(z) mu*(a) mu(z)>`` by exact summation.

    ``end_direction`` replaces the vector ``k(z) -> j(z)`` when the face
    around ``z`` is not a rhombus (the truncated dual site of a pentagon).
    """
    (ja, ka), (jz, kz) = spec.a, z
    if gamma is None:
        gamma = dual_path(lat, ka, kz)
    theta = transport_angle(lat, gamma, ja, jz)
    if end_direction is not None:
        theta += _turn(lat.site_pos(*jz) - lat.dual_pos(*kz), end_direction)
    m = spec.m
    ins = [(tuple(ja), -m), (tuple(jz), m)]
    return np.exp(-1j * spec.s * theta) * disorder_correlator(lat, u, gamma, m, ins)


def rhombus_midedges(lat: SpinLattice, edge: int) -> tuple:
    """Vertices and midedges ``(spin, cell)`` of the rhombus around an L-edge, counter-clockwise."""
    i, j, o = lat.edges[edge]
    p = (i % lat.nx, i // lat.nx)
    q = (j % lat.nx, j // lat.nx)
    if o == "x":
        k_lo, k_hi = (p[0], p[1] - 1), (p[0], p[1])
        verts = [("s", p), ("d", k_lo), ("s", q), ("d", k_hi)]
    else:
        k_r, k_l = (p[0], p[1]), (p[0] - 1, p[1])
        verts = [("s", p), ("d", k_r), ("s", q), ("d", k_l)]
    mids = []
    for a, b in zip(verts, verts[1:] + verts[:1]):
        spin = a[1] if a[0] == "s" else b[1]
        cell = a[1] if a[0] == "d" else b[1]
        mids.append((spin, cell))
    pos = [lat.site_pos(*v[1]) if v[0] == "s" else lat.dual_pos(*v[1]) for v in verts]
    return pos, mids


def plaquette_cr_residual(lat: SpinLattice, u: float, spec: SpinObservableSpec, edge: int) -> complex:
    """Discrete contour integral of ``F`` around the rhombus of an interior edge."""
    pos, mids = rhombus_midedges(lat, edge)
    total = 0j
    for k in range(4):
        total += (pos[(k + 1) % 4] - pos[k]) * parafermion_observable(lat, u, spec, mids[k])
    return total


# ---------------------------------------------------------------------------
# pentagon boundary faces


def boundary_parameters(N: int, alpha: float, beta: float) -> tuple:
    """``(u, xi)`` of a pentagon: half the bulk spectral parameter and the geometric field."""
    s = parafermion_spin(N)
    return 0.25 * (1 - s) * (math.pi - alpha), 0.5 * (1 - s) * (math.pi - beta)


def boundary_strip(N: int, nx: int, ny: int, alpha: float, beta: float) -> SpinLattice:
    """Patch whose top row of x-edges carries ``Y(u, xi / 2)`` for pentagon angle ``beta``.

    The table argument is half the geometric field (see :func:`boundary_jhat`).
    """
    lat = SpinLattice(N, nx, ny, alpha)
    u, xi = boundary_parameters(N, alpha, beta)
    Y = boundary_y(N, u, xi / 2).Y
    for e, (i, _, o) in enumerate(lat.edges):
        if o == "x" and i // nx == ny - 1:
            lat.overrides[e] = Y
    lat.beta = beta
    return lat


def pentagon_geometry(lat: SpinLattice, x0: int, beta: float) -> dict:
    """Spins, cells and vertices of the pentagon over top edge ``(x0, top) - (x0+1, top)``.

    Vertices run counter-clockwise ``k1, j1, y, x, j2``; the side ``y -> x``
    replaces the truncated outer dual site and does not contribute.
    """
    top = lat.ny - 1
    if not lat.alpha <= beta < math.pi:
        raise ValueError("pentagon needs beta in [alpha, pi)")
    if lat.ny < 2 or not 0 <= x0 < lat.nx - 1:
        raise ValueError("pentagon needs a top edge with an interior cell below")
    j2, j1 = (x0, top), (x0 + 1, top)
    k1, k2 = (x0, top - 1), (x0, top)
    J1, J2 = lat.site_pos(*j1), lat.site_pos(*j2)
    ypt = J1 + np.exp(1j * (math.pi - beta / 2))
    xpt = J2 + np.exp(1j * beta / 2)
    return {
        "spins": (j1, j2),
        "cells": (k1, k2),
        "vertices": (lat.dual_pos(*k1), J1, complex(ypt), complex(xpt), J2),
    }


def pentagon_contour(lat: SpinLattice, u: float, spec: SpinObservableSpec, x0: int, beta: float) -> complex:
    """``sum_P F delta z`` over the four contributing sides of a pentagon."""
    g = pentagon_geometry(lat, x0, beta)
    (j1, j2), (k1, k2) = g["spins"], g["cells"]
    K1, J1, Yp, Xp, J2 = g["vertices"]
    F = lambda j, k, d=None: parafermion_observable(lat, u, spec, (j, k), end_direction=d)
    return (
        (J1 - K1) * F(j1, k1)
        + (Yp - J1) * F(j1, k2, J1 - Yp)
        + (J2 - Xp) * F(j2, k2, J2 - Xp)
        + (K1 - J2) * F(j2, k1)
    )


def pentagon_bracket(lat: SpinLattice, u: float, spec: SpinObservableSpec, x0: int, beta: float, phi_xi=None) -> complex:
    """Same contour written as a spin sum against ``J(r)``, ``r = r(j2) - r(j1)``.

    The boundary edge is left out of the product; ``J`` carries both of its
    weights, untwisted and twisted by the path extension to the outer cell.
    """
    N, s = lat.N, spec.s
    g = pentagon_geometry(lat, x0, beta)
    (j1, j2), (k1, _) = g["spins"], g["cells"]
    K1, J1 = g["vertices"][:2]
    ub, xi = boundary_parameters(N, lat.alpha, beta)
    if phi_xi is not None:
        xi = phi_xi
    e12 = lat.edge_between(j2, j1)
    Y = lat.edge_tables(u)[e12]
    R = lat.configurations()
    gam = dual_path(lat, spec.a[1], k1)
    shifts = path_shifts(lat, gam, spec.m)
    w = np.ones(len(R), dtype=complex)
    for e, ((i, j, _), T) in enumerate(zip(lat.edges, lat.edge_tables(u))):
        if e != e12:
            w = w * T[(R[:, i] - R[:, j] - shifts.get(e, 0)) % N]
    om = np.exp(2j * np.pi / N)
    ja = lat.index(*spec.a[0])
    w = w * om ** ((R[:, lat.index(*j1)] - R[:, ja]) % N)
    r = (R[:, lat.index(*j2)] - R[:, lat.index(*j1)]) % N
    ps = np.exp(1j * xi + 1j * np.pi * s)
    J = (np.exp(-2j * ub) - np.exp(2j * ub) * om**r) * Y[r] + (ps - om**r / ps) * Y[(r + 1) % N]
    theta = transport_angle(lat, gam, spec.a[0], j1)
    pref = (J1 - K1) * np.exp(2j * ub) * np.exp(-1j * s * theta)
    return complex(pref * np.sum(w * J) / partition_function(lat, u))


def pentagon_contour_residual(lat: SpinLattice, u: float, spec: SpinObservableSpec, x0: int, beta: float) -> complex:
    """Direct pentagon contour minus its ``J(r)`` spin-sum form."""
    return pentagon_contour(lat, u, spec, x0, beta) - pentagon_bracket(lat, u, spec, x0, beta)
