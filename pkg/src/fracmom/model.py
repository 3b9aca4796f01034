"""Discretized random Schrodinger operators on boxes with Dirichlet walls.

The ambient region is the box [0, L_1] x ... x [0, L_d].  Wavefunctions are
pinned to zero on the box boundary, so the unknowns live on the interior
grid points q = (j_1 h, ..., j_d h), 1 <= j_i <= n_i.  The deterministic part
is the standard 2d+1-point Laplacian with edge phases for a vector potential
and a scalar background; the random part is a sum of single-site bumps with
iid couplings, one per lattice site, each coupling a pure function of
(realization seed, site coordinates).
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import (
    ConstructionError,
    CoveringError,
    DensityError,
    NonConvergenceError,
)

DENSE_EIG_CAP = 600           # below this size, ground energies go dense
_DENSITY_TABLE = 4097         # inverse-CDF table resolution
_AXIS_TOL = 1e-9              # box-length / spacing commensurability check


# ---------------------------------------------------------------------------
# grid

@dataclass(frozen=True)
class GridSpec:
    """Finite-difference grid over [0, box_1] x ... x [0, box_d].

    Parameters
    ----------
    d : spatial dimension, 1 to 3.
    box : per-axis extents; each must be an integer multiple of h.
    h : grid spacing in the same length units.
    """

    d: int
    box: tuple
    h: float

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ConstructionError(f"dimension must be 1, 2 or 3, got {self.d}")
        box = tuple(float(b) for b in self.box)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "h", float(self.h))
        if len(box) != self.d:
            raise ConstructionError(f"box has {len(box)} extents for d={self.d}")
        if not self.h > 0:
            raise ConstructionError("grid spacing h must be positive")
        for L in box:
            m = L / self.h
            if abs(m - round(m)) > _AXIS_TOL * max(1.0, m):
                raise ConstructionError(
                    f"extent {L} is not an integer multiple of h={self.h}")
            if round(m) - 1 < 3:
                raise ConstructionError(
                    f"extent {L} gives {round(m) - 1} interior points; need >= 3")

    @property
    def shape(self):
        """Interior points per axis."""
        return tuple(int(round(L / self.h)) - 1 for L in self.box)

    @property
    def npoints(self):
        return int(np.prod(self.shape))

    @property
    def volume(self):
        return float(np.prod(self.box))


@lru_cache(maxsize=64)
def _axes(grid: GridSpec):
    return tuple(grid.h * np.arange(1, n + 1) for n in grid.shape)


@lru_cache(maxsize=64)
def grid_points(grid: GridSpec) -> np.ndarray:
    """All interior grid points as an (npoints, d) array, C-ordered."""
    mesh = np.meshgrid(*_axes(grid), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def lattice_sites(grid: GridSpec) -> np.ndarray:
    """Integer lattice sites inside the closed box, one bump center each."""
    axes = [np.arange(0, int(math.floor(L + _AXIS_TOL)) + 1) for L in grid.box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1).astype(np.int64)


# ---------------------------------------------------------------------------
# background fields

@dataclass(frozen=True)
class ConstantScalar:
    value: float

    def __call__(self, q):
        return self.value


@dataclass(frozen=True)
class ConstantVector:
    value: tuple

    def __call__(self, q):
        return np.asarray(self.value, dtype=float)


@dataclass(frozen=True)
class LandauGauge:
    """A(q) = (-b q_2, 0): uniform magnetic field b, two dimensions only."""

    b: float

    def __call__(self, q):
        return np.array([-self.b * q[1], 0.0])


@dataclass(frozen=True)
class BackgroundFields:
    """Deterministic vector potential A and scalar potential V0.

    A maps a grid point to a length-d array (None means zero); V0 maps a grid
    point to a real number (None means zero) and must stay above the declared
    bound V0_min at every grid point.
    """

    A: Callable | None = None
    V0: Callable | None = None
    V0_min: float = 0.0


def _eval_scalar_field(fn, pts, name):
    if fn is None:
        return np.zeros(len(pts))
    vals = np.empty(len(pts))
    for k, q in enumerate(pts):
        v = float(fn(q))
        if not math.isfinite(v):
            raise ConstructionError(f"{name} is not finite at point {tuple(q)}")
        vals[k] = v
    return vals


# ---------------------------------------------------------------------------
# single-site profile and disorder law

@dataclass(frozen=True)
class SingleSiteProfile:
    """Radial bump U of support radius r and amplitude u0.

    shape "indicator" is u0 on the open ball of radius r; "cosine-bump" is
    u0 * cos^2(pi |q| / 2r) inside the ball.  Both vanish for |q| >= r and
    stay within [0, u0].
    """

    r: float = 1.0
    shape: str = "indicator"
    u0: float = 1.0

    def __post_init__(self):
        if self.shape not in ("indicator", "cosine-bump"):
            raise ConstructionError(f"unknown profile shape {self.shape!r}")
        if not self.r > 0:
            raise ConstructionError("profile radius r must be positive")
        if not self.u0 > 0:
            raise ConstructionError("profile amplitude u0 must be positive")


def profile_values(profile: SingleSiteProfile, dist) -> np.ndarray:
    """Evaluate U at the given distances from the bump center."""
    dist = np.asarray(dist, dtype=float)
    inside = dist < profile.r
    if profile.shape == "indicator":
        return profile.u0 * inside.astype(float)
    vals = np.zeros_like(dist)
    vals[inside] = profile.u0 * np.cos(np.pi * dist[inside] / (2 * profile.r)) ** 2
    return vals


@dataclass(eq=False)
class DisorderLaw:
    """Coupling strength, site lattice and the common density of couplings.

    density is "uniform" or a callable pdf on [0, 1]; callables are checked
    to integrate to 1 within 1e-10 and sampled through an inverse-CDF table.
    """

    lam: float
    sites: np.ndarray
    density: object = "uniform"

    def __post_init__(self):
        if self.lam < 0:
            raise ConstructionError("disorder strength lambda must be >= 0")
        sites = np.asarray(self.sites, dtype=np.int64)
        if sites.ndim != 2 or len(sites) == 0:
            raise ConstructionError("site lattice must be a nonempty (n, d) array")
        if sites.min() < 0:
            raise ConstructionError("site coordinates must be nonnegative")
        self.sites = sites
        self._inv_cdf = None
        if callable(self.density):
            self._inv_cdf = _inverse_cdf_table(self.density)
        elif self.density != "uniform":
            raise DensityError(f"unsupported density {self.density!r}")


def _inverse_cdf_table(pdf):
    total, err = scipy.integrate.quad(pdf, 0.0, 1.0, epsabs=1e-12, limit=200)
    if abs(total - 1.0) > 1e-10:
        raise DensityError(
            f"density integrates to {total!r} over [0,1]; must be 1 within 1e-10")
    xs = np.linspace(0.0, 1.0, _DENSITY_TABLE)
    vals = np.array([float(pdf(x)) for x in xs])
    if not np.all(np.isfinite(vals)):
        raise DensityError("density must be bounded on [0,1]")
    if vals.min() < 0:
        raise DensityError("density must be nonnegative on [0,1]")
    cdf = scipy.integrate.cumulative_trapezoid(vals, xs, initial=0.0)
    cdf /= cdf[-1]
    return cdf, xs


def disorder_law(lam, grid=None, density="uniform", sites=None) -> DisorderLaw:
    """Build a DisorderLaw with sites defaulting to the grid's integer lattice."""
    if sites is None:
        if grid is None:
            raise ConstructionError("either grid or explicit sites required")
        sites = lattice_sites(grid)
    return DisorderLaw(lam=lam, sites=sites, density=density)


@dataclass(eq=False)
class DisorderRealization:
    """One sample of the couplings: eta[k] belongs to site sites[k]."""

    seed: int
    sites: np.ndarray
    eta: np.ndarray


def sample_couplings(law: DisorderLaw, seed: int) -> DisorderRealization:
    """Draw one iid coupling per site, a pure function of (seed, site).

    Each site gets its own counter-based stream keyed by the site's integer
    coordinates, so the draw does not depend on lattice enumeration order or
    on which other sites exist.
    """
    seed = int(seed)
    if seed < 0:
        raise ConstructionError("seed must be a nonnegative integer")
    uniforms = np.empty(len(law.sites))
    for k, site in enumerate(law.sites):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(c) for c in site))
        uniforms[k] = np.random.Generator(np.random.Philox(ss)).random()
    if law._inv_cdf is None:
        eta = uniforms
    else:
        cdf, xs = law._inv_cdf
        eta = np.interp(uniforms, cdf, xs)
    return DisorderRealization(seed=seed, sites=law.sites, eta=eta)


# ---------------------------------------------------------------------------
# random potential

def _bump_field(grid, sites, weights, profile):
    """Sum of weighted bumps, evaluated on the full interior grid."""
    axes = _axes(grid)
    shape = grid.shape
    out = np.zeros(shape)
    r = profile.r
    for site, w in zip(sites, weights):
        lohi = []
        for i in range(grid.d):
            lo = int(np.searchsorted(axes[i], site[i] - r, side="left"))
            hi = int(np.searchsorted(axes[i], site[i] + r, side="right"))
            lohi.append((lo, hi))
        if any(lo >= hi for lo, hi in lohi):
            continue
        dist2 = 0.0
        for i, (lo, hi) in enumerate(lohi):
            delta = axes[i][lo:hi] - site[i]
            sh = [1] * grid.d
            sh[i] = hi - lo
            dist2 = dist2 + (delta ** 2).reshape(sh)
        block = tuple(slice(lo, hi) for lo, hi in lohi)
        out[block] += w * profile_values(profile, np.sqrt(dist2))
    return out.ravel()


def check_covering(profile: SingleSiteProfile, law: DisorderLaw, grid: GridSpec):
    """Min and max over grid points of the total bump coverage sum_a U(q - a).

    A vanishing minimum means some grid point is unreachable by disorder and
    raises CoveringError.
    """
    cover = _bump_field(grid, law.sites, np.ones(len(law.sites)), profile)
    b_minus = float(cover.min())
    b_plus = float(cover.max())
    if b_minus <= 0.0:
        worst = grid_points(grid)[int(np.argmin(cover))]
        raise CoveringError(
            f"covering violated: grid point {tuple(worst)} has zero bump coverage")
    return b_minus, b_plus


def realize_potential(rz: DisorderRealization, profile, law, grid) -> np.ndarray:
    """Random potential V(q) = sum_a eta_a U(q - a) on the full grid."""
    if rz.sites.shape != law.sites.shape or not np.array_equal(rz.sites, law.sites):
        raise ConstructionError("realization sites do not match the law's lattice")
    return _bump_field(grid, law.sites, rz.eta, profile)


# ---------------------------------------------------------------------------
# Hamiltonians

@dataclass(eq=False)
class DiscreteHamiltonian:
    """Hermitian sparse operator on the active grid points.

    mask holds the sorted global grid indices that remain after Dirichlet
    restriction; entries is the principal submatrix on those points.  The
    matrix is immutable by convention; e0 caches the ground energy.
    """

    grid: GridSpec
    entries: scipy.sparse.csr_matrix
    mask: np.ndarray
    e0: float | None = None

    @property
    def n(self):
        return len(self.mask)

    def points(self) -> np.ndarray:
        """Coordinates of the active grid points, in mask order."""
        return grid_points(self.grid)[self.mask]

    def local_indices(self, global_indices) -> np.ndarray:
        """Positions of the given global grid indices inside the mask."""
        gi = np.asarray(global_indices, dtype=np.int64)
        pos = np.searchsorted(self.mask, gi)
        if np.any(pos >= self.n) or not np.array_equal(self.mask[pos], gi):
            raise ConstructionError("indices not contained in the active mask")
        return pos

    def dense(self) -> np.ndarray:
        return self.entries.toarray()


def assemble_h0(grid: GridSpec, bg: BackgroundFields) -> DiscreteHamiltonian:
    """Deterministic part: 2d+1-point Laplacian with edge phases plus V0.

    Diagonal entries are 2d/h^2 + V0(q).  The edge from q to q' = q + h e_i
    carries the hopping H[q', q] = -exp(-i theta)/h^2 with theta the midpoint
    rule for the line integral of A along the edge, and the reverse entry is
    the conjugate, so the matrix is Hermitian entry by entry.
    """
    pts = grid_points(grid)
    n = len(pts)
    h = grid.h
    v0 = _eval_scalar_field(bg.V0, pts, "V0")
    if np.any(v0 < bg.V0_min - 1e-12):
        k = int(np.argmin(v0 - bg.V0_min))
        raise ConstructionError(
            f"V0({tuple(pts[k])}) = {v0[k]} below declared V0_min = {bg.V0_min}")

    idx = np.arange(n).reshape(grid.shape)
    rows, cols, vals = [], [], []
    any_phase = False
    for axis in range(grid.d):
        sl_lo = [slice(None)] * grid.d
        sl_hi = [slice(None)] * grid.d
        sl_lo[axis] = slice(0, -1)
        sl_hi[axis] = slice(1, None)
        left = idx[tuple(sl_lo)].ravel()
        right = idx[tuple(sl_hi)].ravel()
        if bg.A is None:
            theta = np.zeros(len(left))
        else:
            mids = (pts[left] + pts[right]) / 2.0
            theta = np.empty(len(left))
            for k, m in enumerate(mids):
                a = np.asarray(bg.A(m), dtype=float)
                if a.shape != (grid.d,) or not np.all(np.isfinite(a)):
                    raise ConstructionError(
                        f"A is not a finite length-{grid.d} vector at {tuple(m)}")
                theta[k] = h * a[axis]
        if np.any(theta != 0.0):
            any_phase = True
        hop = -np.exp(-1j * theta) / h ** 2
        rows.append(right)
        cols.append(left)
        vals.append(hop)
        rows.append(left)
        cols.append(right)
        vals.append(np.conj(hop))

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    if not any_phase:
        vals = vals.real
    off = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n, n))
    diag = scipy.sparse.diags(2 * grid.d / h ** 2 + v0)
    H = (off + diag).tocsr()
    return DiscreteHamiltonian(grid=grid, entries=H, mask=np.arange(n, dtype=np.int64))


def assemble_hamiltonian(h0: DiscreteHamiltonian, potential, lam) -> DiscreteHamiltonian:
    """H = H0 + lam * diag(potential), potential given on the full grid."""
    potential = np.asarray(potential, dtype=float)
    if potential.shape != (h0.grid.npoints,):
        raise ConstructionError(
            f"potential has shape {potential.shape}, expected ({h0.grid.npoints},)")
    if lam < 0:
        raise ConstructionError("coupling lambda must be >= 0")
    if lam == 0:
        return h0
    ent = (h0.entries + scipy.sparse.diags(lam * potential[h0.mask])).tocsr()
    return DiscreteHamiltonian(grid=h0.grid, entries=ent, mask=h0.mask)


def restrict_dirichlet(H: DiscreteHamiltonian, mask) -> DiscreteHamiltonian:
    """Principal submatrix on the given global indices (Dirichlet restriction)."""
    mask = np.unique(np.asarray(mask, dtype=np.int64))
    if len(mask) == 0:
        raise ConstructionError("Dirichlet restriction to an empty mask")
    if np.setdiff1d(mask, H.mask).size:
        raise ConstructionError("restriction mask is not a subset of the active mask")
    pos = H.local_indices(mask)
    sub = H.entries[pos][:, pos].tocsr()
    return DiscreteHamiltonian(grid=H.grid, entries=sub, mask=mask)


def ground_energy(H: DiscreteHamiltonian) -> float:
    """Smallest eigenvalue, cached on the operator.

    Dense solve below DENSE_EIG_CAP points, Lanczos above; relative accuracy
    1e-8 or better either way.
    """
    if H.e0 is not None:
        return H.e0
    if H.n <= DENSE_EIG_CAP:
        e0 = float(scipy.linalg.eigvalsh(H.dense())[0])
    else:
        try:
            vals = scipy.sparse.linalg.eigsh(
                H.entries, k=1, which="SA", tol=1e-10, maxiter=20000,
                return_eigenvectors=False)
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise NonConvergenceError(f"ground energy iteration failed: {exc}") from exc
        e0 = float(vals[0])
    H.e0 = e0
    return e0


# ---------------------------------------------------------------------------
# bundled model

@dataclass(eq=False)
class ModelConfig:
    """Grid, background, bump profile and disorder law for one ensemble."""

    grid: GridSpec
    background: BackgroundFields
    profile: SingleSiteProfile
    law: DisorderLaw

    def __post_init__(self):
        self._h0 = None

    def h0(self) -> DiscreteHamiltonian:
        if self._h0 is None:
            self._h0 = assemble_h0(self.grid, self.background)
        return self._h0

    def covering(self):
        return check_covering(self.profile, self.law, self.grid)

    def sample(self, seed) -> DisorderRealization:
        return sample_couplings(self.law, seed)

    def hamiltonian(self, rz: DisorderRealization) -> DiscreteHamiltonian:
        v = realize_potential(rz, self.profile, self.law, self.grid)
        return assemble_hamiltonian(self.h0(), v, self.law.lam)

    def hamiltonian_for_seed(self, seed) -> DiscreteHamiltonian:
        return self.hamiltonian(self.sample(seed))

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_h0"] = None  # rebuilt lazily in workers; keeps pickles small
        return state


@dataclass(frozen=True)
class OneSiteModel:
    """Multiplication by a single uniform coupling: H = [eta].

    The smallest disordered model.  Its fractional moments at z = e + i*0
    have the closed form E|eta - e|^{-s} = (e^{1-s} + (1-e)^{1-s})/(1-s)
    for e in (0, 1), which makes it the standard calibration target for
    the Monte Carlo estimator.
    """

    def hamiltonian_for_seed(self, seed) -> DiscreteHamiltonian:
        law = disorder_law(1.0, sites=np.array([[0]]))
        eta = sample_couplings(law, seed).eta[0]
        entries = scipy.sparse.csr_matrix(np.array([[eta]]))
        grid = GridSpec(d=1, box=(4.0,), h=1.0)
        return DiscreteHamiltonian(grid=grid, entries=entries,
                                   mask=np.array([0]))
