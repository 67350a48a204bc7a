"""
Discretized Loewner evolution: chordal and whole-plane SLE traces and the
angle diffusion d(Theta) = (1 - 4/kappa) cot(Theta) dt + dB.

Traces are built by composing elementary slit maps backwards in time, one
per driving increment, with the driving held at its right-endpoint value
on each step. Composition cost is quadratic in the number of steps.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.config import LOEWNER_DENOMINATOR_TOL, logger
from core.errors import InvalidParameterError, NumericalInstabilityError
from core.geometry import PathKind, PlanarPath

MAX_HALVINGS = 40


@dataclass(frozen=True, eq=False)
class DrivingFunction:
    times: np.ndarray
    values: np.ndarray
    kappa: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or len(times) < 2 or times.shape != values.shape:
            raise InvalidParameterError("driving needs matching time and value arrays of length >= 2")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise InvalidParameterError("driving times must start at 0 and increase strictly")
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("driving values must be finite")
        if self.kappa < 0:
            raise InvalidParameterError(f"kappa must be >= 0, got {self.kappa}")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def shifted(self, constant: float) -> "DrivingFunction":
        return DrivingFunction(self.times, self.values + constant, self.kappa)

    def scaled(self, alpha: float) -> "DrivingFunction":
        """Brownian rescaling t -> alpha^2 t, U -> alpha U."""
        if not alpha > 0:
            raise InvalidParameterError(f"alpha must be positive, got {alpha}")
        return DrivingFunction(alpha * alpha * self.times, alpha * self.values, self.kappa)


@dataclass(frozen=True, eq=False)
class ThetaPath:
    times: np.ndarray
    values: np.ndarray
    kappa: float
    absorbed: bool = False
    absorbed_at: Optional[float] = None

    @property
    def final(self) -> float:
        return float(self.values[-1])


def _step_count(horizon: float, dt: float) -> int:
    return max(1, int(math.ceil(horizon / dt - 1e-9)))


def _check_time_grid(horizon: float, dt: float):
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    if not horizon >= dt:
        raise InvalidParameterError(f"horizon must be >= dt, got horizon={horizon}, dt={dt}")


def sample_driving(kappa: float, horizon: float, dt: float, seed=None) -> DrivingFunction:
    """U = sqrt(kappa) B on a uniform grid, U_0 = 0.

    Args:
        kappa: SLE parameter, non-negative
        horizon: Final time
        dt: Time step, at most the horizon
        seed: Anything numpy.random.default_rng accepts

    Returns:
        DrivingFunction on the grid 0, dt, ..., horizon
    """
    if kappa < 0:
        raise InvalidParameterError(f"kappa must be >= 0, got {kappa}")
    _check_time_grid(horizon, dt)
    rng = np.random.default_rng(seed)
    steps = _step_count(horizon, dt)
    increments = math.sqrt(kappa * dt) * rng.standard_normal(steps)
    values = np.concatenate([[0.0], np.cumsum(increments)])
    return DrivingFunction(dt * np.arange(steps + 1), values, float(kappa))


def constant_driving(value: float, horizon: float, dt: float) -> DrivingFunction:
    _check_time_grid(horizon, dt)
    steps = _step_count(horizon, dt)
    return DrivingFunction(dt * np.arange(steps + 1), np.full(steps + 1, float(value)), 0.0)


def _upper_sqrt(w: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Square root in the closed upper half-plane.

    On the real axis the sign follows the real part of reference.
    """
    root = np.sqrt(w)
    flip = (root.imag < 0) | ((root.imag == 0) & (reference.real < 0))
    return np.where(flip, -root, root)


def _kept_indices(steps: int, stride: int) -> np.ndarray:
    if stride < 1:
        raise InvalidParameterError(f"stride must be >= 1, got {stride}")
    kept = np.arange(0, steps + 1, stride)
    if kept[-1] != steps:
        kept = np.append(kept, steps)
    return kept


def _dedupe(points: np.ndarray, times: np.ndarray):
    keep = np.concatenate([[True], np.any(np.diff(points, axis=0) != 0.0, axis=1)])
    return points[keep], times[keep]


def chordal_trace(driving: DrivingFunction, stride: int = 1) -> PlanarPath:
    """Chordal SLE trace in the upper half-plane from U_0.

    eta(t_k) = f_1 o ... o f_k (U_k) with f_j(w) = U_j + sqrt((w - U_j)^2 - 4 dt_j),
    the inverse of the vertical-slit map of step j.

    Args:
        driving: Driving function U
        stride: Keep every stride-th grid time, plus the last one

    Returns:
        SLE-trace PlanarPath carrying the kept times

    Raises:
        NumericalInstabilityError: If a composition step reaches the slit
            branch point or stops being finite; the error names the step
    """
    steps = driving.steps
    kept = _kept_indices(steps, stride)
    u = driving.values
    dts = np.diff(driving.times)

    w = u[kept].astype(complex)
    for j in range(steps, 0, -1):
        start = np.searchsorted(kept, j)
        if start == len(kept):
            continue
        shifted = w[start:] - u[j]
        branch = shifted * shifted - 4.0 * dts[j - 1]
        if np.any(np.abs(branch) < LOEWNER_DENOMINATOR_TOL):
            raise NumericalInstabilityError(f"chordal composition hit the slit branch point at step {j}", step=j)
        mapped = _upper_sqrt(branch, shifted)
        w[start:] = u[j] + mapped
        if not np.all(np.isfinite(w[start:])):
            raise NumericalInstabilityError(f"chordal composition blew up at step {j}", step=j)

    logger.debug(f"Chordal trace: {steps} steps, {len(kept)} stored points")
    points = np.column_stack([w.real, w.imag])
    points, times = _dedupe(points, driving.times[kept])
    return PlanarPath.from_points(points, kind=PathKind.SLE_TRACE, times=times)


def initial_radius_exponent(dt: float) -> int:
    """T0 with e^{-T0} < dt."""
    return int(math.ceil(math.log(1.0 / dt))) + 1


def whole_plane_trace_from_driving(driving: DrivingFunction, stride: int = 1) -> PlanarPath:
    """Whole-plane SLE trace grown from the circle of radius e^{-T0} around 0.

    Works with psi_t(w) = 1 / g_t(1 / w), a radial Loewner chain in the unit
    disk with driving point e^{-i U_t}. Each step inverts the radial slit map
    through the Cayley transform T(z) = i (a - z) / (a + z).
    """
    dt = float(np.min(np.diff(driving.times)))
    t0 = initial_radius_exponent(dt)
    steps = driving.steps
    kept = _kept_indices(steps, stride)
    anchors = np.exp(-1j * driving.values)
    dts = np.diff(driving.times)

    zeta = anchors[kept].copy()
    for j in range(steps, 0, -1):
        start = np.searchsorted(kept, j)
        if start == len(kept):
            continue
        a = anchors[j]
        z = zeta[start:]
        denominator = a + z
        if np.any(np.abs(denominator) < LOEWNER_DENOMINATOR_TOL):
            raise NumericalInstabilityError(f"radial composition hit a vanishing denominator at step {j}", step=j)
        w = 1j * (a - z) / denominator
        w = w * math.exp(-dts[j - 1] / 2.0)
        w = _upper_sqrt(w * w - (1.0 - math.exp(-dts[j - 1])), w)
        zeta[start:] = a * (1j - w) / (1j + w)
        if not np.all(np.isfinite(zeta[start:])):
            raise NumericalInstabilityError(f"radial composition blew up at step {j}", step=j)

    # kept[0] == 0: no maps applied, trace starts on the initial circle
    trace = math.exp(-t0) / zeta
    logger.debug(f"Whole-plane trace: {steps} steps, T0={t0}, {len(kept)} stored points")
    points = np.column_stack([trace.real, trace.imag])
    points, times = _dedupe(points, driving.times[kept])
    return PlanarPath.from_points(points, kind=PathKind.SLE_TRACE, times=times)


def whole_plane_trace(kappa: float, horizon: float, dt: float, seed=None, stride: int = 1) -> PlanarPath:
    """Whole-plane SLE_kappa from 0; horizon counts time after the initial circle."""
    driving = sample_driving(kappa, horizon, dt, seed)
    return whole_plane_trace_from_driving(driving, stride)


def _drift_coefficient(kappa: float) -> float:
    if not kappa > 0:
        raise InvalidParameterError(f"kappa must be positive, got {kappa}")
    return 1.0 - 4.0 / kappa


def _check_theta0(theta0: float):
    if not 0.0 < theta0 < math.pi:
        raise InvalidParameterError(f"theta0 must lie in (0, pi), got {theta0}")


def _admissible_steps(theta: np.ndarray, coefficient: float, h: np.ndarray) -> np.ndarray:
    """Halve h until |drift step| <= half the distance to {0, pi}."""
    drift = coefficient / np.tan(theta)
    gap = np.minimum(theta, math.pi - theta)
    h = h.copy()
    for _ in range(MAX_HALVINGS):
        too_big = np.abs(drift * h) > 0.5 * gap
        if not too_big.any():
            break
        h = np.where(too_big, 0.5 * h, h)
    return h


def theta_diffusion(kappa: float, theta0: float, horizon: float, dt: float, seed=None) -> ThetaPath:
    """Euler-Maruyama path of the angle diffusion with boundary step halving.

    Leaving (0, pi) absorbs the path: it is truncated at its last interior
    value and flagged.

    Args:
        kappa: SLE parameter, positive
        theta0: Start angle in (0, pi)
        horizon: Final time
        dt: Nominal time step
        seed: Anything numpy.random.default_rng accepts

    Returns:
        ThetaPath with the visited times and angles and the absorption flag
    """
    coefficient = _drift_coefficient(kappa)
    _check_theta0(theta0)
    _check_time_grid(horizon, dt)
    rng = np.random.default_rng(seed)

    times = [0.0]
    values = [float(theta0)]
    t = 0.0
    theta = float(theta0)
    while t < horizon - 1e-12:
        h = float(_admissible_steps(np.array([theta]), coefficient, np.array([min(dt, horizon - t)]))[0])
        proposal = theta + coefficient / math.tan(theta) * h + math.sqrt(h) * rng.standard_normal()
        t += h
        if not 0.0 < proposal < math.pi:
            logger.warning(f"Theta path absorbed at t={t:.6g}")
            return ThetaPath(np.array(times), np.array(values), float(kappa), True, t)
        theta = proposal
        times.append(t)
        values.append(theta)

    return ThetaPath(np.array(times), np.array(values), float(kappa))


def theta_endpoints(kappa: float, theta0: float, horizon: float, dt: float, runs: int, seed=None):
    """Values at the horizon of independent angle paths, run in lockstep.

    Each run keeps its own clock, so step halving in one run does not slow
    the others. Absorbed runs stop at the boundary value they hit.
    Returns (values, absorbed) arrays of length runs.
    """
    coefficient = _drift_coefficient(kappa)
    _check_theta0(theta0)
    _check_time_grid(horizon, dt)
    if runs < 1:
        raise InvalidParameterError(f"runs must be >= 1, got {runs}")
    rng = np.random.default_rng(seed)

    theta = np.full(runs, float(theta0))
    clock = np.zeros(runs)
    absorbed = np.zeros(runs, dtype=bool)
    active = np.ones(runs, dtype=bool)
    while active.any():
        idx = np.flatnonzero(active)
        h = _admissible_steps(theta[idx], coefficient, np.minimum(dt, horizon - clock[idx]))
        proposal = theta[idx] + coefficient / np.tan(theta[idx]) * h + np.sqrt(h) * rng.standard_normal(len(idx))
        clock[idx] += h
        out = (proposal <= 0.0) | (proposal >= math.pi)
        theta[idx] = np.clip(proposal, 0.0, math.pi)
        absorbed[idx[out]] = True
        active[idx[out | (clock[idx] >= horizon - 1e-12)]] = False

    return theta, absorbed


def loewner_angle_process(driving: DrivingFunction, z: complex) -> ThetaPath:
    """Theta_t = arg(g_t(z) - U_t) for a fixed point z in the upper half-plane.

    The path is flagged as absorbed once z is swallowed (g_t(z) - U_t
    reaches the real axis).
    """
    z = complex(z)
    if not z.imag > 0:
        raise InvalidParameterError(f"z must lie in the open upper half-plane, got {z}")
    u = driving.values
    dts = np.diff(driving.times)
    g = z
    times = [0.0]
    values = [math.atan2((g - u[0]).imag, (g - u[0]).real)]
    for j in range(1, len(u)):
        shifted = np.array([g - u[j]])
        g = u[j] + complex(_upper_sqrt(shifted * shifted + 4.0 * dts[j - 1], shifted)[0])
        angle = math.atan2((g - u[j]).imag, (g - u[j]).real)
        if not 0.0 < angle < math.pi or (g - u[j]).imag <= 0.0:
            return ThetaPath(np.array(times), np.array(values), driving.kappa, True, float(driving.times[j]))
        times.append(float(driving.times[j]))
        values.append(angle)
    return ThetaPath(np.array(times), np.array(values), driving.kappa)
