"""Environment distributions and system-under-test oracles.

Two response oracles are provided: a two-dimensional additive toy function
with a known exceedance probability, and a longitudinal lane-change
simulation in which an automated ego vehicle running ACC with an AEB
override follows a cutting-in frontal vehicle. The scenario coordinates
for the lane change are omega = [TTC^-1, R^-1] with TTC = -R / Rdot.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import InvalidConfigurationError, SimulationDivergenceError

#: Minimum inter-vehicle range (m) kept in the integrator; reaching it
#: means bumper contact, so max 1/R is capped at 1/RANGE_FLOOR and stays
#: on a scale the kriging model can absorb.
RANGE_FLOOR = 1.0

_ENV_KINDS = ("iid-standard-gaussian", "lane-change-env", "point-mass", "empirical")


@dataclass(frozen=True)
class ScenarioDistribution:
    """Sampling law F of the random environment vector omega.

    Use the constructors :func:`standard_gaussian`, :func:`lane_change_env`,
    :func:`point_mass` or :func:`empirical` rather than filling fields by
    hand.
    """

    dim: int
    kind: str
    ttc_inv_rate: float = 6.0
    r_inv_scale: float = 0.01
    r_inv_shape: float = 2.5
    location: tuple = ()
    table: tuple = ()

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return sample_env(self, count, rng)


def standard_gaussian(dim: int) -> ScenarioDistribution:
    return ScenarioDistribution(dim=dim, kind="iid-standard-gaussian")


def lane_change_env(ttc_inv_rate: float = 6.0, r_inv_scale: float = 0.01,
                    r_inv_shape: float = 2.5) -> ScenarioDistribution:
    """TTC^-1 ~ Exponential(rate), R^-1 ~ Pareto(scale, shape), independent."""
    if ttc_inv_rate <= 0 or r_inv_scale <= 0 or r_inv_shape <= 0:
        raise InvalidConfigurationError("lane-change-env parameters must be positive")
    return ScenarioDistribution(dim=2, kind="lane-change-env",
                                ttc_inv_rate=ttc_inv_rate,
                                r_inv_scale=r_inv_scale,
                                r_inv_shape=r_inv_shape)


def point_mass(location) -> ScenarioDistribution:
    loc = tuple(float(v) for v in np.asarray(location, dtype=float).ravel())
    return ScenarioDistribution(dim=len(loc), kind="point-mass", location=loc)


def empirical(table) -> ScenarioDistribution:
    arr = np.atleast_2d(np.asarray(table, dtype=float))
    if arr.size == 0:
        raise InvalidConfigurationError("empirical distribution needs a non-empty table")
    rows = tuple(tuple(float(v) for v in row) for row in arr)
    return ScenarioDistribution(dim=arr.shape[1], kind="empirical", table=rows)


def sample_env(dist: ScenarioDistribution, count: int,
               rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. draws from F, shape (count, dim)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if dist.kind == "iid-standard-gaussian":
        return rng.standard_normal((count, dist.dim))
    if dist.kind == "point-mass":
        return np.tile(np.asarray(dist.location, dtype=float), (count, 1))
    if dist.kind == "empirical":
        table = np.asarray(dist.table, dtype=float)
        idx = rng.integers(0, table.shape[0], size=count)
        return table[idx]
    if dist.kind == "lane-change-env":
        ttc_inv = rng.exponential(scale=1.0 / dist.ttc_inv_rate, size=count)
        # (1 + Lomax(shape)) * scale is Pareto-I(scale, shape)
        r_inv = dist.r_inv_scale * (1.0 + rng.pareto(dist.r_inv_shape, size=count))
        return np.column_stack([ttc_inv, r_inv])
    raise InvalidConfigurationError(f"unknown distribution kind {dist.kind!r}")


def toy_oracle(omega) -> float:
    """Additive toy response f(omega) = omega_1 + omega_2."""
    omega = np.asarray(omega, dtype=float).ravel()
    if omega.shape[0] != 2:
        raise ValueError("toy oracle expects a 2-dimensional scenario")
    return float(omega[0] + omega[1])


#: Exceedance probability of the toy oracle above gamma=2 under iid
#: standard Gaussians: P(w1 + w2 > 2) = Phibar(2 / sqrt(2)).
TOY_TRUTH = float(ndtr(-2.0 / math.sqrt(2.0)))


@dataclass(frozen=True)
class EgoControlParams:
    """Stand-in ACC + AEB controller for the ego vehicle.

    ACC commands ``k_range*(R - headway*v_ego) + k_speed*(v_front - v_ego)``;
    AEB overrides with constant full braking while 0 < TTC < trigger.
    Accelerations saturate at [-max_decel, max_accel]. Setting
    ``aeb_ttc_trigger`` to 0 disables AEB; zero gains give a coasting ego.
    """

    acc_time_headway: float = 1.5
    acc_gain_range: float = 0.23
    acc_gain_speed: float = 0.07
    aeb_ttc_trigger: float = 1.5
    aeb_decel: float = 6.0
    max_accel: float = 2.0
    max_decel: float = 8.0

    def __post_init__(self):
        if self.acc_time_headway <= 0:
            raise ValueError("acc_time_headway must be positive")
        if self.acc_gain_range < 0 or self.acc_gain_speed < 0:
            raise ValueError("ACC gains must be non-negative")
        if self.aeb_ttc_trigger < 0:
            raise ValueError("aeb_ttc_trigger must be non-negative")
        if self.aeb_decel <= 0 or self.max_decel <= 0 or self.max_accel <= 0:
            raise ValueError("acceleration limits must be positive")
        if self.aeb_decel > self.max_decel:
            raise ValueError("aeb_decel must not exceed max_decel")


@dataclass(frozen=True)
class LaneChangeScenario:
    """Initial conditions of one lane-change test.

    The frontal vehicle cuts in at range ``R0`` moving at constant speed
    ``v``; the initial range rate is ``-R0 * ttc_inv``.
    """

    v: float
    R0: float
    ttc_inv: float
    b: float = 2.0
    T: float = 10.0
    dt: float = 0.01

    def __post_init__(self):
        if self.R0 <= 0:
            raise ValueError("initial range must be positive")
        if self.dt <= 0 or self.T < self.dt:
            raise ValueError("need dt > 0 and T >= dt")


def simulate_lane_change(scn: LaneChangeScenario, ego: EgoControlParams) -> dict:
    """Integrate the two-vehicle longitudinal dynamics over [0, T].

    Explicit Euler with step ``scn.dt``. Returns arrays ``t``, ``R``,
    ``Rdot``, ``a_ego``, ``a_front`` of length floor(T/dt)+1.
    """
    steps = int(math.floor(scn.T / scn.dt)) + 1
    t = np.arange(steps) * scn.dt
    R = np.empty(steps)
    Rdot = np.empty(steps)
    a_ego = np.empty(steps)
    a_front = np.zeros(steps)  # constant-speed continuation after cut-in

    v_front = scn.v
    v_ego = scn.v + scn.R0 * scn.ttc_inv
    r = scn.R0
    for k in range(steps):
        rdot = v_front - v_ego
        # ACC tracks the headway set-point; AEB overrides on imminent TTC
        a = (ego.acc_gain_range * (r - ego.acc_time_headway * v_ego)
             + ego.acc_gain_speed * (v_front - v_ego))
        if rdot < 0:
            ttc = -r / rdot
            if 0.0 < ttc < ego.aeb_ttc_trigger:
                a = -ego.aeb_decel
        a = min(max(a, -ego.max_decel), ego.max_accel)

        R[k] = r
        Rdot[k] = rdot
        a_ego[k] = a
        if not (math.isfinite(r) and math.isfinite(v_ego)):
            raise SimulationDivergenceError("non-finite vehicle state", k)

        r = max(r + rdot * scn.dt, RANGE_FLOOR)
        v_ego = max(v_ego + a * scn.dt, 0.0)
    return {"t": t, "R": R, "Rdot": Rdot, "a_ego": a_ego, "a_front": a_front}


def lane_change_oracle(omega, v: float = 10.0,
                       ego: EgoControlParams | None = None,
                       b: float = 2.0, T: float = 10.0,
                       dt: float = 0.01) -> float:
    """Response f(omega) = max over [0, T] of 1/R(t) for omega=[TTC^-1, R^-1].

    Exceeding 1/b means the minimum range dropped below the collision
    threshold ``b``.
    """
    omega = np.asarray(omega, dtype=float).ravel()
    if omega.shape[0] != 2:
        raise ValueError("lane-change oracle expects omega = [ttc_inv, r_inv]")
    ttc_inv, r_inv = float(omega[0]), float(omega[1])
    if r_inv <= 0:
        raise ValueError("R^-1 must be positive")
    scn = LaneChangeScenario(v=v, R0=1.0 / r_inv, ttc_inv=ttc_inv, b=b, T=T, dt=dt)
    traj = simulate_lane_change(scn, ego or EgoControlParams())
    return float(np.max(1.0 / traj["R"]))


def trajectory_to_csv(traj: dict, path) -> None:
    rows = np.column_stack([traj["t"], traj["R"], traj["Rdot"],
                            traj["a_ego"], traj["a_front"]])
    np.savetxt(path, rows, delimiter=",", header="t,R,Rdot,a_ego,a_front",
               comments="", fmt="%.10g")
