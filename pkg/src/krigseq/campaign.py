"""The sequential test campaign: design, propose, observe, update, track.

One campaign starts from a small space-filling design, then repeats:
pick the next scenario by maximizing the information gain (or by the
random baseline), query the oracle there, condition the model on the new
observation and re-estimate the target probability on a fixed evaluation
sample. Every step appends one JSON record to the trace.

All randomness fans out from the master seed into named substreams keyed
by purpose and step index, so identical seeds give byte-identical traces
(wall-clock fields aside) no matter how calls interleave.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import jsonio
from .acquisition import CandidateScore, SAConfig, information_gain, local_prediction_impact, sa_search
from .errors import DuplicateDesignPointError, InvalidConfigurationError
from .estimator import ProbabilityEstimate, estimate_target
from .gp import DesignSet, KernelParams, build_design, extend
from .rng import substream
from .scenarios import (
    TOY_TRUTH,
    EgoControlParams,
    ScenarioDistribution,
    empirical,
    lane_change_env,
    lane_change_oracle,
    point_mass,
    standard_gaussian,
    toy_oracle,
)

SELECTION_MODES = ("sa-optimized", "random-baseline", "fixed-start")


@dataclass(frozen=True)
class OracleSpec:
    """Resolved response oracle: a callable plus optional declared truth."""

    id: str
    fn: object
    truth: float | None
    doc: dict


@dataclass(frozen=True)
class CampaignConfig:
    params: KernelParams
    gamma: float
    env: ScenarioDistribution
    oracle: OracleSpec
    initial_count: int
    initial_bounds: np.ndarray
    initial_seed: int | None
    initial_points: np.ndarray | None
    sa: SAConfig
    sa_starts_mode: object  # "env-draw", int count, or explicit list
    steps: int
    eval_samples: int
    eval_resample: bool
    seed: int
    selection_mode: str
    fixed_start: np.ndarray | None
    free_form_observations: bool
    plateau_tol: float | None = None
    doc: dict = field(repr=False, default_factory=dict)


@dataclass
class CampaignState:
    """Mutable-by-replacement state of one running campaign."""

    design: DesignSet
    estimates: list
    proposals: list
    records: list
    initial_count: int

    @property
    def step(self) -> int:
        return len(self.design)

    @property
    def sequential_steps(self) -> int:
        return len(self.design) - self.initial_count


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise InvalidConfigurationError(f"missing required field",
                                        field_path=f"{path}.{key}" if path else key)
    return doc[key]


def _check_keys(doc: dict, allowed, path: str):
    for k in doc:
        if k not in allowed:
            raise InvalidConfigurationError(
                f"unknown field {k!r}",
                field_path=f"{path}.{k}" if path else k)


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidConfigurationError("expected a number", field_path=path)
    return float(value)


def _bounds_array(raw, path: str) -> np.ndarray:
    try:
        b = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise InvalidConfigurationError("expected [[lo, hi], ...]", field_path=path)
    if b.ndim != 2 or b.shape[1] != 2 or np.any(b[:, 0] >= b[:, 1]):
        raise InvalidConfigurationError("each axis needs lo < hi", field_path=path)
    return b


def _parse_params(doc, path) -> KernelParams:
    _check_keys(doc, {"beta", "tau2", "theta", "nugget"}, path)
    kwargs = {
        "beta": _number(_require(doc, "beta", path), f"{path}.beta"),
        "tau2": _number(_require(doc, "tau2", path), f"{path}.tau2"),
        "theta": _number(_require(doc, "theta", path), f"{path}.theta"),
    }
    if "nugget" in doc:
        kwargs["nugget"] = _number(doc["nugget"], f"{path}.nugget")
    try:
        return KernelParams(**kwargs)
    except ValueError as exc:
        bad = "tau2" if kwargs["tau2"] <= 0 else (
            "theta" if kwargs["theta"] <= 0 else "nugget")
        raise InvalidConfigurationError(str(exc), field_path=f"{path}.{bad}")


def _parse_env(doc, path) -> ScenarioDistribution:
    kind = _require(doc, "kind", path)
    if kind == "iid-standard-gaussian":
        _check_keys(doc, {"kind", "dim"}, path)
        return standard_gaussian(int(_require(doc, "dim", path)))
    if kind == "point-mass":
        _check_keys(doc, {"kind", "location"}, path)
        return point_mass(_require(doc, "location", path))
    if kind == "empirical":
        _check_keys(doc, {"kind", "table"}, path)
        try:
            return empirical(_require(doc, "table", path))
        except InvalidConfigurationError as exc:
            raise InvalidConfigurationError(str(exc), field_path=f"{path}.table")
    if kind == "lane-change-env":
        _check_keys(doc, {"kind", "ttc_inv_rate", "r_inv_scale", "r_inv_shape"}, path)
        return lane_change_env(
            ttc_inv_rate=_number(doc.get("ttc_inv_rate", 6.0), f"{path}.ttc_inv_rate"),
            r_inv_scale=_number(doc.get("r_inv_scale", 0.01), f"{path}.r_inv_scale"),
            r_inv_shape=_number(doc.get("r_inv_shape", 2.5), f"{path}.r_inv_shape"),
        )
    raise InvalidConfigurationError(f"unknown environment kind {kind!r}",
                                    field_path=f"{path}.kind")


def _parse_oracle(doc, path) -> OracleSpec:
    oid = _require(doc, "id", path)
    if oid == "toy":
        _check_keys(doc, {"id"}, path)
        return OracleSpec(id="toy", fn=toy_oracle, truth=TOY_TRUTH, doc=dict(doc))
    if oid == "lane-change":
        _check_keys(doc, {"id", "v", "b", "T", "dt", "ego"}, path)
        ego_doc = doc.get("ego", {})
        allowed = {"acc_time_headway", "acc_gain_range", "acc_gain_speed",
                   "aeb_ttc_trigger", "aeb_decel", "max_accel", "max_decel"}
        _check_keys(ego_doc, allowed, f"{path}.ego")
        try:
            ego = EgoControlParams(**{k: _number(v, f"{path}.ego.{k}")
                                      for k, v in ego_doc.items()})
        except ValueError as exc:
            raise InvalidConfigurationError(str(exc), field_path=f"{path}.ego")
        v = _number(doc.get("v", 10.0), f"{path}.v")
        b = _number(doc.get("b", 2.0), f"{path}.b")
        T = _number(doc.get("T", 10.0), f"{path}.T")
        dt = _number(doc.get("dt", 0.01), f"{path}.dt")

        def fn(omega, _v=v, _ego=ego, _b=b, _T=T, _dt=dt):
            return lane_change_oracle(omega, v=_v, ego=_ego, b=_b, T=_T, dt=_dt)

        return OracleSpec(id="lane-change", fn=fn, truth=None, doc=dict(doc))
    if oid == "manual":
        _check_keys(doc, {"id"}, path)
        return OracleSpec(id="manual", fn=None, truth=None, doc=dict(doc))
    raise InvalidConfigurationError(f"unknown oracle id {oid!r}",
                                    field_path=f"{path}.id")


def config_from_dict(doc: dict) -> CampaignConfig:
    """Parse and validate a campaign configuration document.

    Unknown keys anywhere in the document are rejected; error field paths
    name the offending entry (e.g. ``params.tau2``).
    """
    if not isinstance(doc, dict):
        raise InvalidConfigurationError("config must be a JSON object")
    allowed = {"params", "gamma", "env", "oracle", "initial_design", "sa",
               "steps", "eval", "seed", "selection_mode", "fixed_start",
               "free_form_observations", "plateau_tol"}
    _check_keys(doc, allowed, "")
    params = _parse_params(_require(doc, "params", ""), "params")
    gamma = _number(_require(doc, "gamma", ""), "gamma")
    env = _parse_env(_require(doc, "env", ""), "env")
    oracle = _parse_oracle(_require(doc, "oracle", ""), "oracle")

    ides = _require(doc, "initial_design", "")
    _check_keys(ides, {"count", "bounds", "seed", "points"}, "initial_design")
    bounds = _bounds_array(_require(ides, "bounds", "initial_design"),
                           "initial_design.bounds")
    if bounds.shape[0] != env.dim:
        raise InvalidConfigurationError(
            f"bounds have {bounds.shape[0]} axes but the environment has "
            f"dimension {env.dim}", field_path="initial_design.bounds")
    initial_points = None
    if "points" in ides:
        initial_points = np.asarray(ides["points"], dtype=float)
        if initial_points.ndim != 2 or initial_points.shape[1] != env.dim:
            raise InvalidConfigurationError(
                "points must be an array of scenario vectors",
                field_path="initial_design.points")
        count = initial_points.shape[0]
    else:
        count = int(_require(ides, "count", "initial_design"))
        if count < 1:
            raise InvalidConfigurationError("count must be >= 1",
                                            field_path="initial_design.count")
    initial_seed = ides.get("seed")
    if initial_seed is not None:
        initial_seed = int(initial_seed)

    sa_doc = _require(doc, "sa", "")
    _check_keys(sa_doc, {"a0", "iterations", "grad_samples", "starts", "bounds",
                         "refresh_pn", "rescore_outer", "rescore_inner"}, "sa")
    sa_bounds = _bounds_array(sa_doc["bounds"], "sa.bounds") \
        if "bounds" in sa_doc else bounds
    starts_mode = sa_doc.get("starts", "env-draw")
    if isinstance(starts_mode, list):
        starts_mode = [np.asarray(p, dtype=float) for p in starts_mode]
    elif starts_mode != "env-draw":
        starts_mode = int(starts_mode)
        if starts_mode < 1:
            raise InvalidConfigurationError("starts count must be >= 1",
                                            field_path="sa.starts")
    try:
        sa = SAConfig(
            a0=_number(_require(sa_doc, "a0", "sa"), "sa.a0"),
            iterations=int(_require(sa_doc, "iterations", "sa")),
            grad_samples=int(_require(sa_doc, "grad_samples", "sa")),
            starts=1,
            bounds=sa_bounds,
            refresh_pn=bool(sa_doc.get("refresh_pn", False)),
            rescore_outer=int(sa_doc.get("rescore_outer", 64)),
            rescore_inner=int(sa_doc.get("rescore_inner", 1000)),
        )
    except ValueError as exc:
        raise InvalidConfigurationError(str(exc), field_path="sa")

    eval_doc = _require(doc, "eval", "")
    _check_keys(eval_doc, {"samples", "resample"}, "eval")
    eval_samples = int(_require(eval_doc, "samples", "eval"))
    if eval_samples < 1:
        raise InvalidConfigurationError("samples must be >= 1",
                                        field_path="eval.samples")

    steps = int(_require(doc, "steps", ""))
    if steps < 0:
        raise InvalidConfigurationError("steps must be >= 0", field_path="steps")
    mode = _require(doc, "selection_mode", "")
    if mode not in SELECTION_MODES:
        raise InvalidConfigurationError(
            f"selection_mode must be one of {SELECTION_MODES}",
            field_path="selection_mode")
    fixed_start = None
    if mode == "fixed-start":
        fixed_start = np.asarray(_require(doc, "fixed_start", ""), dtype=float)
        if fixed_start.shape != (env.dim,):
            raise InvalidConfigurationError(
                "fixed_start must match the scenario dimension",
                field_path="fixed_start")
    elif "fixed_start" in doc:
        fixed_start = np.asarray(doc["fixed_start"], dtype=float)

    return CampaignConfig(
        params=params, gamma=gamma, env=env, oracle=oracle,
        initial_count=count, initial_bounds=bounds, initial_seed=initial_seed,
        initial_points=initial_points, sa=sa, sa_starts_mode=starts_mode,
        steps=steps, eval_samples=eval_samples,
        eval_resample=bool(eval_doc.get("resample", False)),
        seed=int(_require(doc, "seed", "")), selection_mode=mode,
        fixed_start=fixed_start,
        free_form_observations=bool(doc.get("free_form_observations", False)),
        plateau_tol=(None if doc.get("plateau_tol") is None
                     else _number(doc["plateau_tol"], "plateau_tol")),
        doc=doc,
    )


def lhs_design(n0: int, bounds, seed) -> np.ndarray:
    """Latin hypercube sample: one point per axis bin, jittered in-bin."""
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    bounds = _bounds_array(bounds, "bounds")
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    d = bounds.shape[0]
    pts = np.empty((n0, d))
    for j in range(d):
        bins = rng.permutation(n0)
        jitter = rng.random(n0)
        lo, hi = bounds[j]
        pts[:, j] = lo + (bins + jitter) * (hi - lo) / n0
    return pts


def eval_omegas(config: CampaignConfig, step_index: int) -> np.ndarray:
    """Fixed evaluation sample, optionally re-drawn each step."""
    if config.eval_resample:
        rng = substream(config.seed, "eval", step_index)
    else:
        rng = substream(config.seed, "eval")
    return config.env.sample(config.eval_samples, rng)


def estimate_for_step(config: CampaignConfig, design: DesignSet,
              step_index: int) -> ProbabilityEstimate:
    return estimate_target(design, config.params, config.gamma, config.env,
                           config.eval_samples, rng=None,
                           omegas=eval_omegas(config, step_index))


def initial_points(config: CampaignConfig) -> np.ndarray:
    if config.initial_points is not None:
        return config.initial_points
    seed = config.initial_seed
    rng = substream(config.seed, "design") if seed is None \
        else np.random.default_rng(seed)
    return lhs_design(config.initial_count, config.initial_bounds, rng)


def _record0(design: DesignSet, est: ProbabilityEstimate, wall_ms: float) -> dict:
    return {
        "step": 0,
        "initial_design": {
            "points": [list(map(float, p)) for p in design.points],
            "responses": [float(y) for y in design.responses],
        },
        "estimate": est.value,
        "std_error": est.std_error,
        "wall_ms": wall_ms,
    }


def initialize_with_responses(config: CampaignConfig, points: np.ndarray,
                              responses) -> CampaignState:
    """Build the step-0 state from externally supplied responses."""
    t0 = time.perf_counter()
    design = build_design(points, responses, config.params)
    est = estimate_for_step(config, design, 0)
    wall_ms = (time.perf_counter() - t0) * 1000.0
    return CampaignState(
        design=design,
        estimates=[est],
        proposals=[],
        records=[_record0(design, est, wall_ms)],
        initial_count=len(design),
    )


def initialize(config: CampaignConfig) -> CampaignState:
    """Evaluate the oracle over the initial design and record step 0."""
    if config.oracle.fn is None:
        raise InvalidConfigurationError(
            "manual oracle requires externally supplied initial responses",
            field_path="oracle.id")
    pts = initial_points(config)
    responses = []
    for p in pts:
        try:
            responses.append(float(config.oracle.fn(p)))
        except Exception as exc:
            raise RuntimeError(
                f"oracle failed at initial design point {list(map(float, p))}: {exc}"
            ) from exc
    return initialize_with_responses(config, pts, responses)


def select_next(state: CampaignState, config: CampaignConfig):
    """Choose the next scenario; returns (x_star, score, sa_iterations).

    The per-step start draw comes from its own substream in every mode,
    so paired sa-optimized and random-baseline runs with one master seed
    see identical draws.
    """
    k = state.sequential_steps + 1
    start = config.env.sample(1, substream(config.seed, "start", k))[0]
    if config.selection_mode == "random-baseline":
        x = np.clip(start, config.sa.bounds[:, 0], config.sa.bounds[:, 1]) \
            if config.sa.bounds is not None else start
        rng = substream(config.seed, "score", k)
        gain = information_gain(x, state.design, config.params, config.gamma,
                                config.env, config.sa.rescore_outer,
                                config.sa.rescore_inner, rng)
        lpi = local_prediction_impact(x, state.design, config.params,
                                      config.gamma)
        return x, CandidateScore(point=x, info_gain=gain, lpi=lpi), 0

    if config.selection_mode == "fixed-start":
        starts = [np.array(config.fixed_start, dtype=float)]
    elif isinstance(config.sa_starts_mode, list):
        starts = [start] + [np.array(p, dtype=float)
                            for p in config.sa_starts_mode]
    elif config.sa_starts_mode == "env-draw":
        starts = [start]
    else:
        count = int(config.sa_starts_mode)
        starts = [start]
        if count > 1 and config.sa.bounds is not None:
            from scipy.stats import qmc
            sob = qmc.Sobol(d=state.design.dim, scramble=True,
                            seed=int(substream(config.seed, "sobol", k)
                                     .integers(2**31)))
            unit = sob.random(count - 1)
            lo, hi = config.sa.bounds[:, 0], config.sa.bounds[:, 1]
            starts.extend(lo + unit * (hi - lo))
    sa_cfg = replace(config.sa, starts=starts)
    result = sa_search(state.design, config.params, config.gamma, config.env,
                       sa_cfg, substream(config.seed, "sa", k))
    return result.point, result.score, result.iterations_used


def step(state: CampaignState, config: CampaignConfig) -> CampaignState:
    """Run one propose/observe/update cycle and append its trace record."""
    if config.oracle.fn is None:
        raise InvalidConfigurationError("cannot auto-step a manual oracle",
                                        field_path="oracle.id")
    t0 = time.perf_counter()
    k = state.sequential_steps + 1
    x_star, score, sa_iters = select_next(state, config)
    y_star = float(config.oracle.fn(x_star))
    try:
        design = extend(state.design, x_star, y_star, config.params)
    except DuplicateDesignPointError:
        nudge = substream(config.seed, "perturb", k).standard_normal(
            state.design.dim)
        x_star = x_star + 1e-4 * nudge / np.linalg.norm(nudge)
        y_star = float(config.oracle.fn(x_star))
        design = extend(state.design, x_star, y_star, config.params)
    est = estimate_for_step(config, design, k)
    wall_ms = (time.perf_counter() - t0) * 1000.0
    record = {
        "step": k,
        "x_star": [float(v) for v in x_star],
        "y_star": y_star,
        "info_gain": score.info_gain,
        "lpi": score.lpi,
        "estimate": est.value,
        "std_error": est.std_error,
        "sa_iterations_used": sa_iters,
        "wall_ms": wall_ms,
    }
    return CampaignState(
        design=design,
        estimates=state.estimates + [est],
        proposals=state.proposals + [score],
        records=state.records + [record],
        initial_count=state.initial_count,
    )


def summary_dict(state: CampaignState, config: CampaignConfig) -> dict:
    final = state.estimates[-1]
    out = {"final_estimate": final.value, "n_total": state.step,
           "seed": config.seed}
    if config.oracle.truth is not None:
        out["abs_error_vs_truth"] = abs(final.value - config.oracle.truth)
    return out


PLATEAU_WINDOW = 5


def _plateaued(estimates, tol: float) -> bool:
    if len(estimates) < PLATEAU_WINDOW + 1:
        return False
    tail = [e.value for e in estimates[-(PLATEAU_WINDOW + 1):]]
    return all(abs(b - a) < tol for a, b in zip(tail, tail[1:]))


def run(config: CampaignConfig, trace_path=None, summary_path=None,
        progress=None) -> CampaignState:
    """Full campaign: initialize then take up to ``config.steps`` steps.

    Stops early if ``config.plateau_tol`` is set and the estimate moved
    less than that for ``PLATEAU_WINDOW`` consecutive steps. Trace records
    are flushed to ``trace_path`` as they are produced, so an aborted run
    leaves a valid partial trace.
    """
    trace_file = open(trace_path, "w") if trace_path else None

    def emit(record):
        if trace_file:
            trace_file.write(jsonio.dumps(record) + "\n")
            trace_file.flush()

    try:
        state = initialize(config)
        emit(state.records[0])
        for _ in range(config.steps):
            state = step(state, config)
            emit(state.records[-1])
            if progress:
                progress(state)
            if config.plateau_tol is not None and \
                    _plateaued(state.estimates, config.plateau_tol):
                break
    finally:
        if trace_file:
            trace_file.close()
    if summary_path:
        with open(summary_path, "w") as fh:
            fh.write(jsonio.dumps(summary_dict(state, config)) + "\n")
    return state


def canonical_trace_lines(path) -> list:
    """Trace lines with volatile timing fields removed, for comparisons."""
    import json

    lines = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            rec.pop("wall_ms", None)
            lines.append(jsonio.dumps(rec))
    return lines
