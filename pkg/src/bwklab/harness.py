"""Experiment harness: seeded episode batches, budget sweeps, CSV emission.

Episodes are embarrassingly parallel; results are reduced in (budget,
replication) order, so output bytes do not depend on the worker count.
"""
from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Sequence, Union

from .core import (
    InstanceParams,
    Outcome,
    RngStream,
    RoundRecord,
    RunTrace,
    TerminationReason,
    float_bits,
    stable_mix64,
)
from .environments import (
    AdversarialMatrixSpec,
    Distribution,
    PointMass,
    ScaledBernoulli,
    StochasticEnvSpec,
    UniformOn,
    big_cost_trap_matrix,
    hidden_best_arm_instance,
    load_matrix_csv,
    random_matrix_spec,
)
from .evaluation import (
    RegretMode,
    RegretReport,
    adversarial_regret,
    aggregate_regret,
    stochastic_regret_report,
)
from .policies import BudgetedPolicy, Exp3Bwk, Exp3PPBwk, FixedArmPolicy, UniformPolicy

SUMMARY_HEADER = "policy,B,replications,mean_regret,stderr_regret,mean_tau,mean_total_cost"
TRACE_HEADER = "t,arm,reward,cost,budget_after,prob_selected"

POLICY_NAMES = ("exp3bwk", "exp3pp_bwk", "fixed_arm", "uniform")
ENV_KINDS = ("stochastic", "matrix_file", "hidden_best_arm", "big_cost_trap", "random_matrix")

EnvSpec = Union[StochasticEnvSpec, AdversarialMatrixSpec]


@lru_cache(maxsize=8)
def _load_matrix_cached(
    path: str, budget: float, cost_min: float | None, cost_max: float | None
) -> AdversarialMatrixSpec:
    # Specs are immutable, so replications can share one loaded matrix.
    return load_matrix_csv(path, budget, cost_min=cost_min, cost_max=cost_max)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolicyConfig:
    name: str
    gamma_override: float | None = None
    alpha: float = 3.0
    beta: float | None = None
    lam: float | None = None
    arm: int = 0

    def build(self, params: InstanceParams) -> BudgetedPolicy:
        if self.name == "exp3bwk":
            return Exp3Bwk(params, gamma_override=self.gamma_override)
        if self.name == "exp3pp_bwk":
            return Exp3PPBwk(params, alpha=self.alpha, beta=self.beta, lam=self.lam)
        if self.name == "fixed_arm":
            return FixedArmPolicy(params, arm=self.arm)
        if self.name == "uniform":
            return UniformPolicy(params)
        raise ValueError(f"unknown policy {self.name!r}")


@dataclass(frozen=True)
class EnvironmentConfig:
    """Environment factory: holds validated payload, builds a spec per budget.

    Generated kinds draw fresh randomness per replication from the dedicated
    environment stream, so Monte-Carlo runs average over the construction's
    own random choices (hidden arm, matrix noise) as well as episode noise.
    """

    kind: str
    payload: dict = field(default_factory=dict)

    @property
    def mode(self) -> RegretMode:
        if self.kind in ("stochastic", "hidden_best_arm"):
            return RegretMode.STOCHASTIC
        return RegretMode.ADVERSARIAL

    def build(self, budget: float, env_rng: RngStream) -> EnvSpec:
        p = self.payload
        if self.kind == "stochastic":
            params = InstanceParams(
                n_arms=len(p["arms"]),
                budget=budget,
                cost_min=p["cost_min"],
                cost_max=p["cost_max"],
            )
            return StochasticEnvSpec(
                params=params,
                reward_dists=tuple(a[0] for a in p["arms"]),
                cost_dists=tuple(a[1] for a in p["arms"]),
                optimal_arm=p.get("optimal_arm"),
            )
        if self.kind == "matrix_file":
            return _load_matrix_cached(
                p["path"], budget, p.get("cost_min"), p.get("cost_max")
            )
        if self.kind == "hidden_best_arm":
            params = InstanceParams(
                n_arms=p["n_arms"], budget=budget, cost_min=p["cost_min"], cost_max=1.0
            )
            return hidden_best_arm_instance(params, env_rng)
        if self.kind == "big_cost_trap":
            return big_cost_trap_matrix(
                p["alpha"], budget, optimal_arm=p.get("optimal_arm"), rng=env_rng
            )
        if self.kind == "random_matrix":
            params = InstanceParams(
                n_arms=p["n_arms"],
                budget=budget,
                cost_min=p["cost_min"],
                cost_max=p.get("cost_max", 1.0),
            )
            return random_matrix_spec(
                params,
                env_rng,
                cost_jitter=p.get("cost_jitter"),
                reward_noise=p.get("reward_noise", 0.15),
                level_span=p.get("level_span", (0.15, 0.85)),
            )
        raise ValueError(f"unknown environment kind {self.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    policy: PolicyConfig
    environment: EnvironmentConfig
    budgets: tuple[float, ...]
    replications: int
    base_seed: int
    output: str | None = None

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not self.budgets:
            raise ValueError("budgets must be nonempty")
        if any(b2 <= b1 for b1, b2 in zip(self.budgets, self.budgets[1:])):
            raise ValueError("budgets must be strictly increasing")


@dataclass(frozen=True)
class SummaryRow:
    policy: str
    budget: float
    replications: int
    mean_regret: float
    stderr_regret: float
    mean_tau: float
    mean_total_cost: float


# --- strict JSON parsing (typos in experiment configs must not pass silently)


def _take(d: dict, where: str, required: Sequence[str], optional: Sequence[str] = ()) -> dict:
    unknown = set(d) - set(required) - set(optional)
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")
    missing = [k for k in required if k not in d]
    if missing:
        raise ValueError(f"{where}: missing keys {missing}")
    return d


def _parse_distribution(d: Any, where: str) -> Distribution:
    if not isinstance(d, dict) or "type" not in d:
        raise ValueError(f"{where}: expected a distribution object with a 'type'")
    kind = d["type"]
    if kind == "point":
        _take(d, where, ["type", "value"])
        return PointMass(value=float(d["value"]))
    if kind == "uniform":
        _take(d, where, ["type", "low", "high"])
        return UniformOn(low=float(d["low"]), high=float(d["high"]))
    if kind == "bernoulli":
        _take(d, where, ["type", "p"], ["hi", "lo"])
        return ScaledBernoulli(
            p=float(d["p"]), hi=float(d.get("hi", 1.0)), lo=float(d.get("lo", 0.0))
        )
    raise ValueError(f"{where}: unknown distribution type {kind!r}")


def _parse_policy(d: Any) -> PolicyConfig:
    if not isinstance(d, dict) or "name" not in d:
        raise ValueError("policy: expected an object with a 'name'")
    name = d["name"]
    if name == "exp3bwk":
        _take(d, "policy", ["name"], ["gamma_override"])
        g = d.get("gamma_override")
        return PolicyConfig(name=name, gamma_override=None if g is None else float(g))
    if name == "exp3pp_bwk":
        _take(d, "policy", ["name"], ["alpha", "beta", "lambda"])
        beta = d.get("beta")
        lam = d.get("lambda")
        return PolicyConfig(
            name=name,
            alpha=float(d.get("alpha", 3.0)),
            beta=None if beta is None else float(beta),
            lam=None if lam is None else float(lam),
        )
    if name == "fixed_arm":
        _take(d, "policy", ["name", "arm"])
        return PolicyConfig(name=name, arm=int(d["arm"]))
    if name == "uniform":
        _take(d, "policy", ["name"])
        return PolicyConfig(name=name)
    raise ValueError(f"policy: unknown name {name!r}; expected one of {POLICY_NAMES}")


def _parse_environment(d: Any) -> EnvironmentConfig:
    if isinstance(d, str):
        with open(d) as fh:
            d = json.load(fh)
    if not isinstance(d, dict) or "kind" not in d:
        raise ValueError("environment: expected an object with a 'kind'")
    kind = d["kind"]
    where = f"environment[{kind}]"
    if kind == "stochastic":
        _take(d, where, ["kind", "cost_min", "arms"], ["cost_max", "optimal_arm"])
        arms = []
        for i, arm in enumerate(d["arms"]):
            _take(arm, f"{where}.arms[{i}]", ["reward", "cost"])
            arms.append(
                (
                    _parse_distribution(arm["reward"], f"{where}.arms[{i}].reward"),
                    _parse_distribution(arm["cost"], f"{where}.arms[{i}].cost"),
                )
            )
        payload = {
            "arms": arms,
            "cost_min": float(d["cost_min"]),
            "cost_max": float(d.get("cost_max", 1.0)),
            "optimal_arm": d.get("optimal_arm"),
        }
    elif kind == "matrix_file":
        _take(d, where, ["kind", "path"], ["cost_min", "cost_max"])
        payload = {
            "path": d["path"],
            "cost_min": d.get("cost_min"),
            "cost_max": d.get("cost_max"),
        }
    elif kind == "hidden_best_arm":
        _take(d, where, ["kind", "n_arms", "cost_min"])
        payload = {"n_arms": int(d["n_arms"]), "cost_min": float(d["cost_min"])}
    elif kind == "big_cost_trap":
        _take(d, where, ["kind", "alpha"], ["optimal_arm"])
        payload = {"alpha": float(d["alpha"]), "optimal_arm": d.get("optimal_arm")}
    elif kind == "random_matrix":
        _take(
            d,
            where,
            ["kind", "n_arms", "cost_min"],
            ["cost_max", "cost_jitter", "reward_noise", "level_span"],
        )
        jitter = d.get("cost_jitter")
        span = d.get("level_span", (0.15, 0.85))
        payload = {
            "n_arms": int(d["n_arms"]),
            "cost_min": float(d["cost_min"]),
            "cost_max": float(d.get("cost_max", 1.0)),
            "cost_jitter": None if jitter is None else float(jitter),
            "reward_noise": float(d.get("reward_noise", 0.15)),
            "level_span": (float(span[0]), float(span[1])),
        }
    else:
        raise ValueError(f"environment: unknown kind {kind!r}; expected one of {ENV_KINDS}")
    return EnvironmentConfig(kind=kind, payload=payload)


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a config document; unknown keys anywhere are errors."""
    _take(
        doc,
        "config",
        ["policy", "environment", "budgets", "replications", "base_seed"],
        ["output"],
    )
    return ExperimentConfig(
        policy=_parse_policy(doc["policy"]),
        environment=_parse_environment(doc["environment"]),
        budgets=tuple(float(b) for b in doc["budgets"]),
        replications=int(doc["replications"]),
        base_seed=int(doc["base_seed"]),
        output=doc.get("output"),
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(json.load(fh))


def resolved_config_dict(config: ExperimentConfig) -> dict:
    """Config echo with every default filled in, for the _config.json file."""
    pol: dict[str, Any] = {"name": config.policy.name}
    if config.policy.name == "exp3bwk":
        pol["gamma_override"] = config.policy.gamma_override
    elif config.policy.name == "exp3pp_bwk":
        pol["alpha"] = config.policy.alpha
        pol["beta"] = config.policy.beta
        pol["lambda"] = config.policy.lam
    elif config.policy.name == "fixed_arm":
        pol["arm"] = config.policy.arm
    env: dict[str, Any] = {"kind": config.environment.kind}
    for key, value in config.environment.payload.items():
        if key == "arms":
            env["arms"] = [
                {"reward": _dist_dict(r), "cost": _dist_dict(c)} for r, c in value
            ]
        else:
            env[key] = value
    return {
        "policy": pol,
        "environment": env,
        "budgets": list(config.budgets),
        "replications": config.replications,
        "base_seed": config.base_seed,
        "output": config.output,
    }


def _dist_dict(dist: Distribution) -> dict:
    if isinstance(dist, PointMass):
        return {"type": "point", "value": dist.value}
    if isinstance(dist, UniformOn):
        return {"type": "uniform", "low": dist.low, "high": dist.high}
    return {"type": "bernoulli", "p": dist.p, "hi": dist.hi, "lo": dist.lo}


# ---------------------------------------------------------------------------
# Episode driver
# ---------------------------------------------------------------------------


def run_episode(
    policy_config: PolicyConfig,
    env_spec: EnvSpec,
    budget: float,
    seed: int,
    stream_id: int,
) -> RunTrace:
    """Drive one select/observe/update loop to termination.

    The policy and the environment share one rng stream; the round counter
    and a hard horizon cap bound the loop even against misbehaving inputs.
    """
    params = env_spec.params
    if params.budget != budget:
        raise ValueError("env_spec was built for a different budget")
    policy = policy_config.build(params)
    rng = RngStream(seed, stream_id)
    cap = params.horizon_cap()
    rounds: list[RoundRecord] = []
    reason = TerminationReason.BUDGET_EXHAUSTED
    while not policy.terminated and policy.remaining_budget > 0.0:
        if policy.t > cap:
            reason = TerminationReason.HORIZON_CAP
            break
        t = policy.t
        arm, probs = policy.select(rng)
        outcome = env_spec.step(t, arm, rng)
        if policy.update(arm, probs, outcome):
            rounds.append(
                RoundRecord(
                    t=t,
                    arm=arm,
                    probs=tuple(probs),
                    outcome=outcome,
                    budget_after=policy.remaining_budget,
                )
            )
    return RunTrace.build(
        budget=budget,
        rounds=rounds,
        terminated_by=reason,
        aborted_pull=policy.aborted_pull,
    )


def episode_stream_id(budget: float, replication: int) -> int:
    """Stream id for the policy/environment draws of one episode."""
    return stable_mix64(float_bits(budget), replication, 0)


def instance_stream_id(budget: float, replication: int) -> int:
    """Stream id for generated-environment construction randomness."""
    return stable_mix64(float_bits(budget), replication, 1)


def _run_one(
    config: ExperimentConfig, budget: float, replication: int
) -> tuple[RunTrace, RegretReport, EnvSpec]:
    env_rng = RngStream(config.base_seed, instance_stream_id(budget, replication))
    spec = config.environment.build(budget, env_rng)
    trace = run_episode(
        config.policy,
        spec,
        budget,
        config.base_seed,
        episode_stream_id(budget, replication),
    )
    if config.environment.mode is RegretMode.STOCHASTIC:
        report = stochastic_regret_report(trace, spec)
    else:
        report = adversarial_regret(trace, spec)
    return trace, report, spec


def _episode_task(args: tuple[ExperimentConfig, float, int]) -> tuple[float, int, float, int, float]:
    config, budget, replication = args
    try:
        trace, report, _ = _run_one(config, budget, replication)
    except Exception as exc:
        raise RuntimeError(
            f"episode failed (B={budget}, replication={replication}, "
            f"seed={config.base_seed})"
        ) from exc
    return budget, replication, report.primary_regret, trace.tau, trace.total_cost


def run_experiment(
    config: ExperimentConfig,
    threads: int = 1,
    trace_hook: Callable[[float, int, int, RunTrace], None] | None = None,
) -> list[SummaryRow]:
    """Run the full budget sweep and aggregate one summary row per budget.

    ``threads`` > 1 runs episodes on a process pool; rows are reduced in
    (budget, replication) order either way, so results are byte-identical
    regardless of parallelism. ``trace_hook(budget, rep, stream_id, trace)``,
    if given, replays episodes serially after aggregation (trace emission is
    a debugging path; it stays off the workers).
    """
    mode = config.environment.mode
    tasks = [
        (config, budget, rep)
        for budget in config.budgets
        for rep in range(config.replications)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_episode_task, tasks, chunksize=8))
    else:
        results = [_episode_task(t) for t in tasks]

    rows = []
    n = config.replications
    for i, budget in enumerate(config.budgets):
        chunk = results[i * n : (i + 1) * n]
        if mode is RegretMode.STOCHASTIC:
            reports = [RegretReport(mode=mode, pseudo_regret=r) for (_, _, r, _, _) in chunk]
        else:
            reports = [RegretReport(mode=mode, reward_sum_regret=r) for (_, _, r, _, _) in chunk]
        agg = aggregate_regret(reports)
        rows.append(
            SummaryRow(
                policy=config.policy.name,
                budget=budget,
                replications=n,
                mean_regret=agg.mean_regret,
                stderr_regret=agg.stderr_regret,
                mean_tau=math.fsum(tau for (_, _, _, tau, _) in chunk) / n,
                mean_total_cost=math.fsum(c for (_, _, _, _, c) in chunk) / n,
            )
        )
    if trace_hook is not None:
        for budget in config.budgets:
            for rep in range(config.replications):
                trace, _, _ = _run_one(config, budget, rep)
                trace_hook(budget, rep, episode_stream_id(budget, rep), trace)
    return rows


# ---------------------------------------------------------------------------
# Scaling fits and output files
# ---------------------------------------------------------------------------


def fit_loglog_slope(points: Sequence[tuple[float, float]]) -> float:
    """OLS slope of ln(regret) against ln(budget).

    Nonpositive regret points cannot enter a log fit; they are dropped with
    a warning, and fewer than three survivors is an error.
    """
    kept = [(b, r) for b, r in points if r > 0.0]
    if len(kept) < len(points):
        warnings.warn(
            f"dropped {len(points) - len(kept)} nonpositive regret point(s) from log-log fit",
            stacklevel=2,
        )
    if len(kept) < 3:
        raise ValueError("need at least 3 positive points for a log-log fit")
    xs = [math.log(b) for b, _ in kept]
    ys = [math.log(r) for _, r in kept]
    mx = math.fsum(xs) / len(xs)
    my = math.fsum(ys) / len(ys)
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / sxx


def _fmt(x: float) -> str:
    return format(x, ".12g")


def emit_results(
    rows: Sequence[SummaryRow],
    traces: Sequence[tuple[int, RunTrace]],
    output_prefix: str,
    config: ExperimentConfig,
) -> list[str]:
    """Write <prefix>_summary.csv, <prefix>_config.json and optional traces.

    Floats are written with 12 significant digits; identical inputs produce
    byte-identical files.
    """
    written = []
    summary_path = f"{output_prefix}_summary.csv"
    with open(summary_path, "w", newline="") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    [
                        row.policy,
                        _fmt(row.budget),
                        str(row.replications),
                        _fmt(row.mean_regret),
                        _fmt(row.stderr_regret),
                        _fmt(row.mean_tau),
                        _fmt(row.mean_total_cost),
                    ]
                )
                + "\n"
            )
    written.append(summary_path)

    config_path = f"{output_prefix}_config.json"
    with open(config_path, "w") as fh:
        json.dump(resolved_config_dict(config), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(config_path)

    for stream_id, trace in traces:
        trace_path = f"{output_prefix}_trace_{stream_id}.csv"
        with open(trace_path, "w", newline="") as fh:
            fh.write(TRACE_HEADER + "\n")
            for r in trace.rounds:
                fh.write(
                    ",".join(
                        [
                            str(r.t),
                            str(r.arm),
                            _fmt(r.outcome.reward),
                            _fmt(r.outcome.cost),
                            _fmt(r.budget_after),
                            _fmt(r.probs[r.arm]),
                        ]
                    )
                    + "\n"
                )
        written.append(trace_path)
    return written


def parse_summary_csv(path: str) -> list[SummaryRow]:
    """Read a summary file back into rows (12-significant-digit floats)."""
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != SUMMARY_HEADER:
            raise ValueError(f"{path}: unexpected summary header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise ValueError(f"{path}: line {lineno}: expected 7 fields")
            rows.append(
                SummaryRow(
                    policy=parts[0],
                    budget=float(parts[1]),
                    replications=int(parts[2]),
                    mean_regret=float(parts[3]),
                    stderr_regret=float(parts[4]),
                    mean_tau=float(parts[5]),
                    mean_total_cost=float(parts[6]),
                )
            )
    return rows
