"""Monte Carlo fractional moments of Green-function block norms.

The estimator is the plain empirical mean of m_i^s over independent
disorder realizations; the fractional power s < 1 is what tames the
variance near the spectrum, and that is exactly the effect the epsilon
scans below are built to exhibit.  Scans over several shifts reuse one
set of realizations (common random numbers), so differences between
shifts are not drowned in resampling noise.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SolveError
from .resolvent import IndicatorSet, ShiftedSolver, SpectralShift

DEFAULT_STABILIZATION_TOL = 0.05


def sample_seed(master_seed, index):
    """Derived 64-bit seed for one sample; stable across worker counts."""
    if index < 0:
        raise DomainError("sample index must be >= 0")
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def _center_of(sel):
    return tuple(sel.center) if isinstance(sel, IndicatorSet) else None


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentEstimate:
    """Empirical mean of ||chi_x (H - z)^{-1} chi_y||^s over realizations.

    s = 1.0 is allowed only as a diagnostic (the moment itself is not
    integrable there); estimators refuse it unless explicitly asked.
    """

    s: float
    shift: SpectralShift
    x: tuple | None
    y: tuple | None
    N: int
    mean: float
    stderr: float
    sample_min: float
    sample_max: float
    seed: int
    wall_time_ms: float = 0.0
    diagnostic: bool = False

    def __post_init__(self):
        if not (0.0 < self.s < 1.0 or (self.s == 1.0 and self.diagnostic)):
            raise DomainError(
                f"s must be in (0,1); s=1.0 needs diagnostic=True (got {self.s})")
        if self.N < 1:
            raise DomainError("need at least one sample")
        if not (self.mean >= 0.0 and self.stderr >= 0.0):
            raise DomainError("mean and stderr must be nonnegative")

    @property
    def E(self):
        return self.shift.E

    @property
    def eps(self):
        return self.shift.eps

    def payload(self):
        """Flat record for the JSON-lines emitter."""
        return {
            "s": self.s, "E": self.E, "eps": self.eps,
            "x": list(self.x) if self.x is not None else None,
            "y": list(self.y) if self.y is not None else None,
            "N": self.N, "mean": self.mean, "stderr": self.stderr,
            "seed": self.seed, "wall_time_ms": self.wall_time_ms,
        }


@dataclass(frozen=True)
class EpsilonSchedule:
    """Strictly decreasing positive eps values with a stabilization tol."""

    eps: tuple
    tol: float = DEFAULT_STABILIZATION_TOL

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps)
        object.__setattr__(self, "eps", eps)
        if len(eps) < 2:
            raise DomainError("schedule needs at least two eps values")
        if not all(e > 0.0 for e in eps):
            raise DomainError("all eps must be positive")
        if not all(a > b for a, b in zip(eps, eps[1:])):
            raise DomainError("eps values must be strictly decreasing")
        if not 0.0 < self.tol:
            raise DomainError("stabilization tolerance must be positive")

    @classmethod
    def geometric(cls, start, stop, num, tol=DEFAULT_STABILIZATION_TOL):
        if not (start > stop > 0.0 and num >= 2):
            raise DomainError("need start > stop > 0 and num >= 2")
        return cls(eps=tuple(np.geomspace(start, stop, num)), tol=tol)

    def shifts(self, E):
        return [SpectralShift(E=E, eps=e) for e in self.eps]


@dataclass(frozen=True)
class EpsilonScanResult:
    estimates: tuple
    verdict: str
    norms: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def means(self):
        return np.array([e.mean for e in self.estimates])

    @property
    def stable(self):
        return self.verdict == "stable"


# ---------------------------------------------------------------------------
# scan core
# ---------------------------------------------------------------------------

class _ScanTask:
    """Picklable per-sample job: one realization, norms at every shift."""

    def __init__(self, factory, shifts, X, Y, master_seed, tol, power_rtol):
        self.factory = factory
        self.shifts = list(shifts)
        self.X = X
        self.Y = Y
        self.master_seed = master_seed
        self.tol = tol
        self.power_rtol = power_rtol

    def __call__(self, index):
        seed = sample_seed(self.master_seed, index)
        H = self.factory.hamiltonian_for_seed(seed)
        row = np.empty(len(self.shifts))
        for k, shift in enumerate(self.shifts):
            try:
                solver = ShiftedSolver(H, shift, tol=self.tol)
                row[k] = solver.block_norm(self.X, self.Y,
                                           power_rtol=self.power_rtol)
            except SolveError as exc:
                raise SolveError(
                    f"sample {index} (seed {seed}) failed at "
                    f"z={shift.z}: {exc}", achieved=exc.achieved) from exc
        return index, row


def scan_norms(factory, shifts, X, Y, N, master_seed, workers=None,
               tol=1e-10, power_rtol=1e-8):
    """(N, len(shifts)) block norms; row i uses the seed for sample i.

    All shifts share realizations.  Worker processes only change the
    evaluation schedule: rows are placed by sample index before any
    aggregation, so results are identical for every worker count.
    """
    shifts = list(shifts)
    if len(shifts) == 0:
        raise DomainError("need at least one shift")
    for sh in shifts:
        if not isinstance(sh, SpectralShift):
            raise DomainError("shifts must be SpectralShift instances")
    if N < 1:
        raise DomainError("need at least one sample")
    task = _ScanTask(factory, shifts, X, Y, master_seed, tol, power_rtol)
    out = np.empty((N, len(shifts)))
    if workers is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for index, row in pool.map(task, range(N)):
                out[index] = row
    else:
        for index in range(N):
            out[index] = task(index)[1]
    return out


class _PairScanTask:
    """Picklable per-sample job: one realization, one shift, many pairs."""

    def __init__(self, factory, shift, pairs, master_seed, tol, power_rtol):
        self.factory = factory
        self.shift = shift
        self.pairs = list(pairs)
        self.master_seed = master_seed
        self.tol = tol
        self.power_rtol = power_rtol

    def __call__(self, index):
        seed = sample_seed(self.master_seed, index)
        H = self.factory.hamiltonian_for_seed(seed)
        try:
            solver = ShiftedSolver(H, self.shift, tol=self.tol)
            row = np.array([
                solver.block_norm(X, Y, power_rtol=self.power_rtol)
                for X, Y in self.pairs])
        except SolveError as exc:
            raise SolveError(f"sample {index} (seed {seed}) failed: {exc}",
                             achieved=exc.achieved) from exc
        return index, row


def scan_pair_norms(factory, shift, pairs, N, master_seed, workers=None,
                    tol=1e-10, power_rtol=1e-8):
    """(N, len(pairs)) block norms at one shift, shared factorization.

    All pairs see the same realizations and the same factorization of
    (H - z), so decay ladders come out of one sweep with common random
    numbers across distances.
    """
    if not isinstance(shift, SpectralShift):
        raise DomainError("shift must be a SpectralShift")
    pairs = list(pairs)
    if len(pairs) == 0:
        raise DomainError("need at least one (X, Y) pair")
    if N < 1:
        raise DomainError("need at least one sample")
    task = _PairScanTask(factory, shift, pairs, master_seed, tol, power_rtol)
    out = np.empty((N, len(pairs)))
    if workers is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for index, row in pool.map(task, range(N)):
                out[index] = row
    else:
        for index in range(N):
            out[index] = task(index)[1]
    return out


def estimates_from_norms(norms, s, shifts, X=None, Y=None, seed=0,
                         diagnostic=False, wall_time_ms=0.0):
    """Fold a norm scan into per-shift MomentEstimates at exponent s."""
    norms = np.asarray(norms, dtype=float)
    if norms.ndim != 2 or norms.shape[1] != len(shifts):
        raise DomainError("norms must be (N, len(shifts))")
    if not (0.0 < s < 1.0 or (s == 1.0 and diagnostic)):
        raise DomainError(
            f"s must be in (0,1); s=1.0 needs diagnostic=True (got {s})")
    N = norms.shape[0]
    powers = norms ** s
    means = powers.mean(axis=0)
    if N >= 2:
        stderrs = powers.std(axis=0, ddof=1) / np.sqrt(N)
    else:
        stderrs = np.zeros(len(shifts))
    return [
        MomentEstimate(
            s=float(s), shift=shift, x=_center_of(X), y=_center_of(Y),
            N=N, mean=float(means[k]), stderr=float(stderrs[k]),
            sample_min=float(powers[:, k].min()),
            sample_max=float(powers[:, k].max()),
            seed=int(seed), wall_time_ms=wall_time_ms, diagnostic=diagnostic)
        for k, shift in enumerate(shifts)
    ]


def stability_verdict(means, tol=DEFAULT_STABILIZATION_TOL):
    """'stable' if the last two means agree to the relative tolerance."""
    means = np.asarray(means, dtype=float)
    if means.size < 2:
        raise DomainError("verdict needs at least two means")
    a, b = means[-2], means[-1]
    scale = max(abs(a), abs(b))
    if scale == 0.0:
        return "stable"
    return "stable" if abs(a - b) < tol * scale else "unstable"


# ---------------------------------------------------------------------------
# public estimators
# ---------------------------------------------------------------------------

def estimate_fractional_moment(factory, s, shift, X, Y, N, master_seed,
                               workers=None, tol=1e-10, power_rtol=1e-8,
                               diagnostic=False):
    """Mean of N independent samples of ||chi_X (H - z)^{-1} chi_Y||^s."""
    if N < 2:
        raise DomainError("need N >= 2 for a standard error")
    t0 = time.perf_counter()
    norms = scan_norms(factory, [shift], X, Y, N, master_seed,
                       workers=workers, tol=tol, power_rtol=power_rtol)
    ms = 1e3 * (time.perf_counter() - t0)
    return estimates_from_norms(norms, s, [shift], X=X, Y=Y, seed=master_seed,
                                diagnostic=diagnostic, wall_time_ms=ms)[0]


def epsilon_scan(factory, s, E, schedule, X, Y, N, master_seed, workers=None,
                 tol=1e-10, power_rtol=1e-8, diagnostic=False):
    """Moment estimates along a decreasing eps schedule, common seeds.

    The verdict compares the last two means: the scan "stabilized" when
    they differ by less than the schedule tolerance relatively.
    """
    if not isinstance(schedule, EpsilonSchedule):
        raise DomainError("expected an EpsilonSchedule")
    if N < 2:
        raise DomainError("need N >= 2 for a standard error")
    shifts = schedule.shifts(E)
    t0 = time.perf_counter()
    norms = scan_norms(factory, shifts, X, Y, N, master_seed,
                       workers=workers, tol=tol, power_rtol=power_rtol)
    ms = 1e3 * (time.perf_counter() - t0)
    # estimates share the scan's wall time; per-shift split is not observable
    estimates = estimates_from_norms(norms, s, shifts, X=X, Y=Y,
                                     seed=master_seed, diagnostic=diagnostic,
                                     wall_time_ms=ms)
    verdict = stability_verdict([e.mean for e in estimates], tol=schedule.tol)
    return EpsilonScanResult(estimates=tuple(estimates), verdict=verdict,
                             norms=norms)


def holder_modulus(factory, s, z1, z2, X, Y, N, master_seed, workers=None,
                   tol=1e-10, power_rtol=1e-8):
    """|m(z1) - m(z2)| / |z1 - z2|^s with common-seed moment estimates m."""
    if not (isinstance(z1, SpectralShift) and isinstance(z2, SpectralShift)):
        raise DomainError("z1 and z2 must be SpectralShift instances")
    if z1.z == z2.z:
        raise DomainError("z1 = z2 leaves the modulus undefined")
    if not 0.0 < s < 1.0:
        raise DomainError(f"s must be in (0,1), got {s}")
    if N < 2:
        raise DomainError("need N >= 2 for a standard error")
    norms = scan_norms(factory, [z1, z2], X, Y, N, master_seed,
                       workers=workers, tol=tol, power_rtol=power_rtol)
    m1, m2 = (norms ** s).mean(axis=0)
    return float(abs(m1 - m2) / abs(z1.z - z2.z) ** s)
