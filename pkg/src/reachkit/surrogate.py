"""Approximate value-function backends and their certification.

Two backends provide value fields for an obstacle configuration:

* ``TrainedOperator`` runs the spectral network of :mod:`reachkit.fno`
  slice by slice over the (theta, t) grid;
* ``PerturbedOracle`` adds seeded band-limited noise to the true grid
  solution, with the sup error over grid nodes pinned to exactly the
  injected amplitude -- the error bound holds by construction, which is
  what makes certification exercisable without a trained model.

``certify`` measures the quantities behind the certified-planning chain:
sup error epsilon, Sobolev-type error epsilon0 (grid-cell-weighted L2 of
the value error plus L2 of its spatial gradient), the temporal/spatial
error ratio rho, inclusion volumes at the epsilon- and 0-sublevels, and
the Chebyshev bound on the measure of the residual-violation set,
normalized by meas(X) = domain area x 2 pi.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import reachsets
from .dynamics import Bounds
from .fno import SpectralWeights, fno_forward
from .grid import Grid3, ValueField
from .levelset import sdf_obstacles


def smooth_noise(grid: Grid3, times, amplitude: float, seed: int,
                 n_waves: int = 8) -> np.ndarray:
    """Sum of low-frequency sinusoids over (x, y, theta, t), rescaled so the
    max over grid nodes and stored times is exactly ``amplitude``."""
    rng = np.random.default_rng(seed)
    X, Y, TH = grid.meshes()
    times = np.asarray(times, dtype=np.float64)
    out = np.zeros((len(times),) + tuple(grid.dims))
    for _ in range(n_waves):
        amp = rng.uniform(0.5, 1.0)
        kx, ky = rng.uniform(0.05, 0.25, 2) * rng.choice([-1.0, 1.0], 2)
        kth = float(rng.integers(0, 2))  # integer so the wave wraps in theta
        kt = rng.uniform(0.05, 0.3) * rng.choice([-1.0, 1.0])
        phase = rng.uniform(0, 2 * np.pi)
        spatial = kx * X + ky * Y + kth * TH + phase
        out += amp * np.sin(spatial[None] + kt * times[:, None, None, None])
    peak = np.abs(out).max()
    if amplitude == 0.0 or peak == 0.0:
        return np.zeros_like(out)
    out *= amplitude / peak
    return np.clip(out, -amplitude, amplitude)


@dataclass
class PerturbedOracle:
    """Oracle solution plus seeded smooth noise with a by-construction bound.

    ``solver`` maps an obstacle list to the true ValueField; results are
    cached per obstacle configuration. The noise field depends only on
    (grid, times, seed, amplitude), so updates that change g keep the same
    perturbation.
    """

    solver: object
    eps_inj: float
    seed: int = 0
    name: str = "perturbed-oracle"
    _cache: dict = field(default_factory=dict, repr=False)
    _noise: np.ndarray = field(default=None, repr=False)

    def _key(self, obstacles):
        return tuple(sorted((float(o.center[0]), float(o.center[1]),
                             float(o.radius)) for o in obstacles))

    def oracle_field(self, obstacles) -> ValueField:
        # preseeded fields (certification test sets) take precedence; the
        # solver keeps its own cache/eviction policy otherwise
        key = self._key(obstacles)
        if key in self._cache:
            return self._cache[key]
        return self.solver(list(obstacles))

    def seed_oracle(self, obstacles, vf: ValueField):
        """Pre-register a solved oracle (used by certification test sets)."""
        self._cache[self._key(obstacles)] = vf

    def value_field(self, obstacles) -> ValueField:
        truth = self.oracle_field(obstacles)
        if self._noise is None:
            self._noise = smooth_noise(truth.grid, truth.times, self.eps_inj,
                                       self.seed)
        return ValueField(grid=truth.grid, times=truth.times,
                          values=truth.values + self._noise)


@dataclass
class TrainedOperator:
    """Spectral-operator backend evaluating the full (theta, t) slice stack."""

    weights: SpectralWeights
    grid: Grid3
    times: np.ndarray
    name: str = "trained-operator"

    def value_field(self, obstacles) -> ValueField:
        g = sdf_obstacles(self.grid, list(obstacles))
        thetas = self.grid.axis(2)
        horizon = float(self.times[-1])
        g2d = g.data[:, :, 0]
        vals = np.empty((len(self.times),) + tuple(self.grid.dims))
        for ti, t in enumerate(self.times):
            for ki, th in enumerate(thetas):
                vals[ti, :, :, ki] = fno_forward(self.weights, g2d, th, t,
                                                 horizon)
        return ValueField(grid=self.grid, times=np.asarray(self.times),
                          values=vals)


def evaluate_backend(backend, obstacles, theta: float, t: float) -> np.ndarray:
    """One 2D value slice at (theta, t) from the backend's value field."""
    vf = backend.value_field(obstacles)
    k = vf.slice_index(t, nearest=True)
    thetas = vf.grid.axis(2)
    wrapped = np.abs(np.mod(thetas - theta + np.pi, 2 * np.pi) - np.pi)
    return vf.values[k][:, :, int(np.argmin(wrapped))]


@dataclass
class CertificationReport:
    epsilon: float
    epsilon0: float
    rho: float
    eta_include_eps: float
    eta_include_zero: float
    violation_bound: float
    alpha0: float
    m_f: float
    meas_x: float
    n_scenarios: int
    eta_vacuous: bool
    passed: bool
    backend: str
    mse: float
    per_scenario: list

    def to_json(self, path=None):
        blob = json.dumps(asdict(self), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as f:
                f.write(blob + "\n")
        return blob


def _grid_gradients(values, grid: Grid3):
    """Central-difference spatial gradients of a slice stack (periodic theta)."""
    hx, hy, hth = grid.spacing
    gx = np.gradient(values, hx, axis=1)
    gy = np.gradient(values, hy, axis=2)
    gth = (np.roll(values, -1, axis=3) - np.roll(values, 1, axis=3)) / (2 * hth)
    return gx, gy, gth


def certify(backend, scenarios, bounds: Bounds, alpha0: float = 0.03,
            epsilon_for_eta: float = None) -> CertificationReport:
    """Measure approximation-quality bounds over a test set.

    ``scenarios`` is a list of (obstacles, oracle ValueField) pairs solved
    on a common grid and time sampling. PASS requires the inclusion volume
    at the measured epsilon to be exactly 1.
    """
    if not scenarios:
        raise ValueError("need at least one test scenario")
    grid = scenarios[0][1].grid
    times = scenarios[0][1].times
    hx, hy, hth = grid.spacing
    dt = float(times[1] - times[0]) if len(times) > 1 else 1.0
    cell = hx * hy * hth * dt

    eps = 0.0
    eps0 = 0.0
    sq_sum_t = 0.0
    sq_sum_x = 0.0
    mse_total = 0.0
    n_total = 0
    learned_masks_eps = []
    truth_masks = []
    learned_masks_zero = []
    per_scenario = []

    fields = []
    for obstacles, truth in scenarios:
        if truth.grid != grid:
            raise ValueError("test scenarios must share one grid")
        approx = backend.value_field(obstacles)
        if approx.grid != grid or len(approx.times) != len(times):
            raise ValueError("backend field does not match the oracle grid")
        fields.append((approx, truth))

    eps = max(float(np.abs(a.values - t.values).max()) for a, t in fields)
    eta_threshold = eps if epsilon_for_eta is None else epsilon_for_eta

    for (obstacles, truth), (approx, _) in zip(scenarios, fields):
        e = approx.values - truth.values
        gx, gy, gth = _grid_gradients(e, grid)
        gt = np.gradient(e, dt, axis=0) if len(times) > 1 else np.zeros_like(e)
        l2_val = float(np.sum(e**2) * cell)
        l2_grad = float(np.sum(gx**2 + gy**2 + gth**2) * cell)
        l2_time = float(np.sum(gt**2) * cell)
        scen_eps0 = float(np.sqrt(l2_val + l2_grad))
        eps0 = max(eps0, scen_eps0)
        sq_sum_t += l2_time
        sq_sum_x += l2_grad
        mse_total += float(np.sum(e**2))
        n_total += e.size
        scen_rho = (np.sqrt(l2_time) / (bounds.m_f * np.sqrt(l2_grad))
                    if l2_grad > 0 else 0.0)
        per_scenario.append({
            "epsilon": float(np.abs(e).max()),
            "epsilon0": scen_eps0,
            "rho": float(scen_rho),
            "n_obstacles": len(obstacles),
        })
        for t in truth.times:
            learned_masks_eps.append(reachsets.epsilon_sublevel(approx, t, eta_threshold))
            learned_masks_zero.append(reachsets.epsilon_sublevel(approx, t, 0.0))
            truth_masks.append(reachsets.epsilon_sublevel(truth, t, 0.0))

    rho = float(np.sqrt(sq_sum_t) / (bounds.m_f * np.sqrt(sq_sum_x))) \
        if sq_sum_x > 0 else 0.0
    eta_eps, vac = reachsets.inclusion_volume(learned_masks_eps, truth_masks)
    eta_zero, _ = reachsets.inclusion_volume(learned_masks_zero, truth_masks)

    (x0, x1), (y0, y1), _ = grid.bounds
    meas_x = (x1 - x0) * (y1 - y0) * 2 * np.pi
    bound = ((1 + rho) ** 2 * bounds.m_f**2 * eps0**2) / (alpha0**2 * meas_x)

    return CertificationReport(
        epsilon=eps,
        epsilon0=eps0,
        rho=rho,
        eta_include_eps=float(eta_eps),
        eta_include_zero=float(eta_zero),
        violation_bound=float(bound),
        alpha0=alpha0,
        m_f=bounds.m_f,
        meas_x=float(meas_x),
        n_scenarios=len(scenarios),
        eta_vacuous=bool(vac),
        passed=bool(eta_eps == 1.0),
        backend=getattr(backend, "name", type(backend).__name__),
        mse=float(mse_total / max(n_total, 1)),
        per_scenario=per_scenario,
    )
