"""Experiment commands behind the ``qattest`` CLI.

Each ``cmd_*`` takes an :class:`ExperimentConfig` and returns a
:class:`CommandResult`: result rows, a JSON-able summary, plot curves, and
the list of checks that failed. Runs are reproducible from ``(config, seed)``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Mapping, get_args, get_origin, get_type_hints

import numpy as np
import yaml
from scipy import stats

from . import adversary as adv
from .attest import (
    PROVER,
    ProtocolParams,
    default_network,
    rotation_check,
    run_full_protocol,
    write_transcript,
)
from .channels import Endpoint
from .memory import ClassicalMemory, angle_qubit
from .qsim import (
    StateVector,
    amplitude_encode,
    derive_seed,
    fidelity,
    inner_product,
    make_basis_state,
    make_rng,
    random_state,
    random_unitary,
    swap_test_many,
)
from .soteria import (
    BITSTRING,
    QpufTable,
    encode_bits,
    agreement_rate,
    l2_accuracy_rate,
    min_copies,
    random_challenge_bits,
    sampled_overlap_sq,
    single_copy_agreement,
)

CSV_HEADER = ("experiment", "params", "measured", "analytic", "stderr", "trials", "seed")


@dataclass
class ExperimentConfig:
    """Flat experiment configuration; list-valued keys drive sweeps.

    ``trials`` left as ``None`` means the command's own default.
    """

    experiment: str = ""
    seed: int = 0
    trials: int | None = None
    out: str = "results"
    workers: int = 1
    # memory / checksum
    m: int = 1024
    width: int = 32
    lam: int = 128
    K: int = 4
    N: int = 64
    step_time: float = 50e-9
    # topology
    c: float = 3.0e8
    max_distance: float = 100.0
    prover_position: float = 50.0
    processing_delay: float = 0.0
    proxy_factor: float = 10.0
    # corruption scenario of the protocol command
    corrupt_fraction: float = 0.01
    corrupt_K: int = 8
    corrupt_N: int = 256
    transcripts: int = 1
    # soteria
    kappa_values: list[int] = field(default_factory=lambda: [4, 8, 16, 32])
    agreement_target: float = 0.95
    weight_kappa: int = 64
    weight_values: list[int] = field(default_factory=lambda: [2, 4, 8, 16, 32])
    copies: int = 1
    swap_trials: int = 1
    # overlap sweeps
    q_points: int = 21
    b_values: list[int] = field(default_factory=lambda: [64, 128, 256, 512, 1024])
    eps_values: list[float] = field(default_factory=lambda: [0.1, 0.25])
    # quantum-memory perturbation
    qm_words: int = 16
    p_values: list[float] = field(default_factory=lambda: [0.25, 0.5, 1.0])
    perturb_eps: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.2])
    shots: int = 200
    # hash impossibility
    dims: list[int] = field(default_factory=lambda: [2, 4, 8, 16])
    pair_eps: float = 0.1

    def validate(self) -> "ExperimentConfig":
        if self.trials is not None and self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.m < 1 or self.width not in (8, 16, 32, 64):
            raise ValueError("m must be >= 1 and width one of 8/16/32/64")
        ProtocolParams(self.lam, self.K, self.N, self.max_distance, self.c, self.step_time)
        ProtocolParams(self.lam, self.corrupt_K, self.corrupt_N, self.max_distance, self.c, self.step_time)
        if not 0 <= self.prover_position <= self.max_distance:
            raise ValueError("prover_position must lie within max_distance")
        if self.proxy_factor <= 0 or self.processing_delay < 0:
            raise ValueError("proxy_factor must be > 0 and processing_delay >= 0")
        if not 0 < self.corrupt_fraction <= 1:
            raise ValueError("corrupt_fraction must be in (0, 1]")
        if any(k < 2 for k in self.kappa_values):
            raise ValueError("kappa values must be >= 2")
        if any(not 1 <= w <= self.weight_kappa for w in self.weight_values):
            raise ValueError("weight values must be in [1, weight_kappa]")
        if not 0 < self.agreement_target < 1:
            raise ValueError("agreement_target must be in (0, 1)")
        if self.copies < 1 or self.swap_trials < 1 or self.shots < 1:
            raise ValueError("copies, swap_trials and shots must be >= 1")
        if self.q_points < 2:
            raise ValueError("q_points must be >= 2")
        if any(b < 1 for b in self.b_values):
            raise ValueError("b values must be >= 1")
        if any(not 0 <= e <= 1 for e in [*self.eps_values, *self.perturb_eps, self.pair_eps]):
            raise ValueError("epsilon values must be in [0, 1]")
        if any(not 0 <= p <= 1 for p in self.p_values):
            raise ValueError("p values must be in [0, 1]")
        if self.qm_words < 2:
            raise ValueError("qm_words must be >= 2")
        if any(d < 2 or d & (d - 1) for d in self.dims):
            raise ValueError("dims must be powers of two >= 2")
        return self

    @classmethod
    def from_mapping(cls, doc: Mapping[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        hints = get_type_hints(cls)
        return cls(**{k: _coerce(v, hints[k], k) for k, v in doc.items()})

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            doc = yaml.safe_load(fh) or {}
        if not isinstance(doc, dict):
            raise ValueError(f"{path}: config must be a flat key-value mapping")
        return cls.from_mapping(doc)


def _coerce(value: Any, hint: Any, key: str) -> Any:
    # YAML 1.1 reads "2e8" as a string, so numbers are coerced by field type
    if value is None:
        return None
    args = [a for a in get_args(hint) if a is not type(None)]
    if get_origin(hint) is list:
        if not isinstance(value, list):
            raise ValueError(f"{key} must be a list")
        return [_coerce(v, args[0], key) for v in value]
    target = args[0] if args else hint
    if target in (int, float):
        try:
            out = target(value)
        except (TypeError, ValueError):
            raise ValueError(f"{key} must be {target.__name__}, got {value!r}") from None
        if target is int and isinstance(value, float) and out != value:
            raise ValueError(f"{key} must be an integer, got {value!r}")
        return out
    return value


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    params: dict[str, Any]
    measured: float
    analytic: float | None
    stderr: float | None
    trials: int
    seed: int

    def csv_fields(self) -> list[str]:
        params = ";".join(f"{k}={v}" for k, v in self.params.items())
        return [
            self.experiment,
            params,
            _fmt(self.measured),
            _fmt(self.analytic),
            _fmt(self.stderr),
            str(self.trials),
            str(self.seed),
        ]


@dataclass
class CommandResult:
    rows: list[ResultRow] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)
    curves: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    def check(self, ok: bool, message: str) -> bool:
        if not ok:
            self.violations.append(message)
        return ok

    def write(self, out: str | Path, cfg: ExperimentConfig) -> None:
        out = Path(out)
        (out / "curves").mkdir(parents=True, exist_ok=True)
        with open(out / "results.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            w.writerows(r.csv_fields() for r in self.rows)
        summary = {"config": asdict(cfg), **self.summary, "violations": self.violations}
        with open(out / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, default=float)
        for name, pts in self.curves.items():
            with open(out / "curves" / f"{name}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(("x", "y"))
                w.writerows((repr(float(x)), repr(float(y))) for x, y in pts)


def _bernoulli_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n)


def _within(measured: float, analytic: float, se: float, k: float = 3.0) -> bool:
    # a zero standard error demands exact agreement
    return abs(measured - analytic) <= k * se + 1e-12


def loglog_slope(x, y) -> float:
    return float(stats.linregress(np.log(x), np.log(y)).slope)


# ----------------------------------------------------------------- commands


def overlap_pair(q: float) -> tuple[StateVector, float, float]:
    """Angle qubits ``Ry(theta)|1>``, ``Ry(theta')|1>`` with overlap squared ``q``."""
    theta = 0.0
    theta_prime = 2.0 * math.acos(math.sqrt(q))
    return angle_qubit(theta_prime), theta, theta_prime


def cmd_swap_vs_rotation(cfg: ExperimentConfig) -> CommandResult:
    """Detection rate of the rotation check versus one SWAP test across overlaps."""
    trials = cfg.trials or 10_000
    res = CommandResult()
    rotation, swap = [], []
    for idx, q in enumerate(np.linspace(0.0, 1.0, cfg.q_points)):
        rng = make_rng(derive_seed(cfg.seed, idx))
        q = float(q)
        received, theta, _ = overlap_pair(q)
        expected = angle_qubit(theta)
        rot = 1.0 - np.mean([rotation_check(received, theta, rng) for _ in range(trials)])
        sw = float(swap_test_many(received, expected, trials, rng).mean())
        for name, measured, analytic in (("rotation", rot, 1 - q), ("swap", sw, 0.5 - q / 2)):
            se = _bernoulli_se(measured, trials)
            res.rows.append(ResultRow(f"swap_vs_rotation/{name}", {"q": round(q, 6)}, measured, analytic, se, trials, cfg.seed))
            res.check(_within(measured, analytic, se), f"{name} detection {measured:.4f} vs {analytic:.4f} at q={q:.3f}")
        rotation.append((q, rot))
        swap.append((q, sw))
        if q < 1:
            res.check(rot > sw, f"rotation {rot:.4f} does not beat swap {sw:.4f} at q={q:.3f}")
    res.curves = {"rotation": rotation, "swap": swap}
    res.summary["trials"] = trials
    return res


WORKED_OVERLAPS = (
    (np.array([1, 0, 1, 1, 0]), np.array([0, 0, 1, 1, 0]), 0.8166),
    (np.array([1, 0, 1, 1, 0, 1]), np.array([0, 0, 1, 1, 0, 1]), 0.8661),
)


def cmd_sample_length(cfg: ExperimentConfig) -> CommandResult:
    """Mean sampled-bit overlap squared versus sample length ``b`` for each flip rate."""
    trials = cfg.trials or 4_000
    res = CommandResult()
    res.summary["regression"] = {}
    for e_idx, eps in enumerate(cfg.eps_values):
        rng = make_rng(derive_seed(cfg.seed, e_idx))
        xs, ys, curve = [], [], []
        for b in cfg.b_values:
            v = sampled_overlap_sq(b, eps, trials, rng)
            mean, se = float(v.mean()), float(v.std(ddof=1) / math.sqrt(trials))
            analytic = (1 - eps) ** 2
            res.rows.append(ResultRow("sample_length", {"eps": eps, "b": b}, mean, analytic, se, trials, cfg.seed))
            res.check(_within(mean, analytic, se), f"mean overlap {mean:.5f} vs {analytic:.5f} at eps={eps}, b={b}")
            xs.append(np.full(trials, b))
            ys.append(v)
            curve.append((b, mean))
        fit = stats.linregress(np.concatenate(xs), np.concatenate(ys))
        half = stats.t.ppf(0.975, trials * len(cfg.b_values) - 2) * fit.stderr
        ci = (fit.slope - half, fit.slope + half)
        res.summary["regression"][str(eps)] = {"slope": fit.slope, "ci95": ci}
        res.rows.append(ResultRow("sample_length/slope", {"eps": eps}, fit.slope, 0.0, fit.stderr, trials, cfg.seed))
        res.check(ci[0] <= 0 <= ci[1], f"slope CI {ci} excludes 0 at eps={eps}")
        res.curves[f"sample_length_eps{eps}"] = curve

    for i, (sigma, truth, reported) in enumerate(WORKED_OVERLAPS):
        ov = abs(inner_product(amplitude_encode(sigma), amplitude_encode(truth)))
        q = ov**2
        rng = make_rng(derive_seed(cfg.seed, 1000 + i))
        n = cfg.trials or 100_000
        det = float(swap_test_many(amplitude_encode(sigma), amplitude_encode(truth), n, rng).mean())
        se = _bernoulli_se(det, n)
        res.rows.append(ResultRow("sample_length/worked_overlap", {"bits": len(sigma)}, ov, reported, None, 1, cfg.seed))
        res.rows.append(ResultRow("sample_length/worked_detection", {"bits": len(sigma)}, det, 0.5 - q / 2, se, n, cfg.seed))
        res.check(abs(ov - reported) < 1e-3, f"worked overlap {ov:.5f} vs {reported}")
        res.check(_within(det, 0.5 - q / 2, se), f"worked detection {det:.4f} vs {0.5 - q / 2:.4f}")
    return res


def bitstring_response(kappa: int, weight: int, rng) -> StateVector:
    table = QpufTable(kappa, seed=int(rng.integers(2**32)), kind=BITSTRING, weight=weight)
    return table.lookup(encode_bits(random_challenge_bits(kappa, rng)))


def cmd_tomography_cost(cfg: ExperimentConfig) -> CommandResult:
    """Copies needed for prover and verifier to decode the same QPUF string, per ``kappa``."""
    trials = cfg.trials or 4_000
    res = CommandResult()
    rows_copies, rows_l2 = [], []
    for idx, kappa in enumerate(cfg.kappa_values):
        rng = make_rng(derive_seed(cfg.seed, idx))
        weight = max(1, kappa // 2)
        resp = bitstring_response(kappa, weight, rng)
        norm = math.sqrt(weight)
        n_agree = min_copies(lambda n: agreement_rate(resp, norm, n, trials, rng, kappa), cfg.agreement_target)
        n_l2 = min_copies(lambda n: l2_accuracy_rate(resp, norm, n, trials, rng), cfg.agreement_target)
        rows_copies.append((kappa, n_agree))
        rows_l2.append((kappa, n_l2))
        res.rows.append(ResultRow("tomography_cost/agreement", {"kappa": kappa, "weight": weight}, n_agree, None, None, trials, cfg.seed))
        res.rows.append(ResultRow("tomography_cost/l2", {"kappa": kappa, "weight": weight}, n_l2, None, None, trials, cfg.seed))
    slope = loglog_slope(*zip(*rows_copies))
    slope_l2 = loglog_slope(*zip(*rows_l2))
    res.rows.append(ResultRow("tomography_cost/slope", {"target": cfg.agreement_target}, slope, 2.0, None, trials, cfg.seed))
    res.rows.append(ResultRow("tomography_cost/l2_slope", {"target": cfg.agreement_target}, slope_l2, 2.0, None, trials, cfg.seed))
    res.summary.update(min_copies=rows_copies, slope=slope, l2_min_copies=rows_l2, l2_slope=slope_l2)
    res.curves = {"tomography_agreement": rows_copies, "tomography_l2": rows_l2}
    res.check(abs(slope - 2.0) <= 0.3, f"agreement copies slope {slope:.3f} outside 2 +/- 0.3")

    # fixed kappa, growing normalizing factor N = sqrt(weight)
    by_norm = []
    rng = make_rng(derive_seed(cfg.seed, 5_000))
    for weight in cfg.weight_values:
        resp = bitstring_response(cfg.weight_kappa, weight, rng)
        norm = math.sqrt(weight)
        n = min_copies(lambda c: agreement_rate(resp, norm, c, trials, rng, cfg.weight_kappa), cfg.agreement_target)
        by_norm.append((norm, n))
        res.rows.append(ResultRow("tomography_cost/by_norm", {"kappa": cfg.weight_kappa, "weight": weight}, n, None, None, trials, cfg.seed))
    norm_slope = loglog_slope(*zip(*by_norm))
    res.rows.append(ResultRow("tomography_cost/norm_slope", {"kappa": cfg.weight_kappa}, norm_slope, 2.0, None, trials, cfg.seed))
    res.summary.update(min_copies_by_norm=by_norm, norm_slope=norm_slope)
    res.curves["tomography_by_norm"] = by_norm
    res.check(abs(norm_slope - 2.0) <= 0.3, f"copies vs normalizing factor slope {norm_slope:.3f} outside 2 +/- 0.3")

    # one copy: agreement is the collision probability of the response
    single_trials = cfg.trials or 10_000
    rng = make_rng(derive_seed(cfg.seed, 10_000))
    for label, resp in (("haar", random_state(3, rng)), ("basis", make_basis_state(3, 5))):
        measured = agreement_rate(resp, 1.0, 1, single_trials, rng)
        analytic = single_copy_agreement(resp)
        se = _bernoulli_se(measured, single_trials)
        res.rows.append(ResultRow("tomography_cost/single_copy", {"response": label}, measured, analytic, se, single_trials, cfg.seed))
        res.check(_within(measured, analytic, se), f"single-copy agreement {measured:.4f} vs {analytic:.4f} ({label})")
    return res


def _protocol_params(cfg: ExperimentConfig, K: int | None = None, N: int | None = None) -> ProtocolParams:
    return ProtocolParams(cfg.lam, K or cfg.K, N or cfg.N, cfg.max_distance, cfg.c, cfg.step_time)


def cmd_protocol(cfg: ExperimentConfig) -> CommandResult:
    """Honest, proxied and corrupted runs of the attestation protocol plus a timing boundary sweep."""
    trials = cfg.trials or 1_000
    res = CommandResult()
    params = _protocol_params(cfg)
    mem = ClassicalMemory.random(cfg.m, make_rng(derive_seed(cfg.seed, 0)), cfg.width)
    common = dict(memory=mem, prover_position=cfg.prover_position, processing_delay=cfg.processing_delay)
    proxy_extra = cfg.proxy_factor * cfg.max_distance - cfg.prover_position

    scenarios = {
        "honest": (adv.AdversaryConfig(strategy=adv.NONE), params, 1.0),
        "proxy": (adv.AdversaryConfig(strategy=adv.NONE, proxy_distance=proxy_extra), params, 0.0),
        "corrupted": (
            adv.AdversaryConfig(strategy=adv.FRACTION, p=cfg.corrupt_fraction),
            _protocol_params(cfg, cfg.corrupt_K, cfg.corrupt_N),
            None,
        ),
    }
    for idx, (name, (acfg, p, target)) in enumerate(scenarios.items()):
        r = adv.run_security_experiment(
            "attest", acfg, trials, make_rng(derive_seed(cfg.seed, 100 + idx)), workers=cfg.workers, params=p, **common
        )
        row_params = {"K": p.K, "N": p.N, "m": mem.m}
        if name == "proxy":
            row_params["colluder_extra_m"] = proxy_extra
        if name == "corrupted":
            row_params["fraction"] = cfg.corrupt_fraction
        res.rows.append(ResultRow(f"protocol/{name}/accept", row_params, r.freq, r.analytic, r.se, trials, cfg.seed))
        res.summary[f"{name}_accept_rate"] = r.freq
        if name == "corrupted":
            res.summary["corrupted_reject_rate"] = 1 - r.freq
            res.check(1 - r.freq >= 0.99, f"corrupted memory rejected in {1 - r.freq:.4f} < 0.99 of runs")
        else:
            res.check(r.freq == target, f"{name} accept rate {r.freq} != {target}")

    # proxy verdict kinds, and sample transcripts per scenario
    out = Path(cfg.out) / "transcripts"
    out.mkdir(parents=True, exist_ok=True)
    net = default_network(cfg.prover_position, cfg.c, cfg.processing_delay)
    colluder = Endpoint("colluder", cfg.prover_position + proxy_extra)
    net.add(colluder)
    proxied = adv.proxy_wrap(net.endpoints[PROVER], colluder, net)
    kinds = []
    proxy_trials = min(trials, 200)
    for i in range(proxy_trials):
        t = run_full_protocol(mem, mem, params, net, make_rng(derive_seed(cfg.seed, 10_000 + i)), prover_endpoint=proxied)
        kinds.append(str(t.verdict))
        if i < cfg.transcripts:
            write_transcript(t, out / f"proxy_{i}.jsonl")
    frac = kinds.count("abort_timing(1)") / proxy_trials
    res.rows.append(ResultRow("protocol/proxy/abort_timing_round1", {"colluder_extra_m": proxy_extra}, frac, 1.0, 0.0, proxy_trials, cfg.seed))
    res.check(frac == 1.0, f"proxy runs ending in abort_timing(1): {frac}")
    for i in range(cfg.transcripts):
        t = run_full_protocol(mem, mem, params, net, make_rng(derive_seed(cfg.seed, 20_000 + i)))
        write_transcript(t, out / f"honest_{i}.jsonl")

    boundary = timing_boundary_sweep(mem, params, cfg)
    res.summary["boundary"] = boundary
    for point in boundary["points"]:
        res.rows.append(
            ResultRow(
                "protocol/boundary",
                {"extra_m": point["extra_m"], "max_rtt": point["max_rtt"], "threshold": params.round_threshold},
                float(point["timing_abort"]),
                float(point["expected_abort"]),
                None,
                1,
                cfg.seed,
            )
        )
        res.check(point["timing_abort"] == point["expected_abort"], f"verdict at extra {point['extra_m']} m does not match threshold")
    res.summary["thresholds"] = {"round": params.round_threshold, "proximity": params.proximity_threshold}
    return res


BOUNDARY_FACTORS = (0.0, 0.5, 0.9, 0.999, 0.999999, 1.0, 1.000001, 1.001, 1.1, 2.0)


def timing_boundary_sweep(mem: ClassicalMemory, params: ProtocolParams, cfg: ExperimentConfig) -> dict[str, Any]:
    """Sweep colluder detours around the distance where round trips hit ``Delta + delta/c``.

    The critical detour ``x*`` comes from the honest round trip: each extra
    metre of one-way detour adds ``2/c`` to every round.
    """
    net = default_network(cfg.prover_position, cfg.c, cfg.processing_delay)
    honest = run_full_protocol(mem, mem, params, net, make_rng(derive_seed(cfg.seed, 30_000)))
    base = max(r.rtt for r in honest.rounds)
    # an extra relay hop also adds one processing delay per leg
    x_star = (params.round_threshold - base - 2 * cfg.processing_delay) * cfg.c / 2
    points = []
    for j, f in enumerate(BOUNDARY_FACTORS):
        x = f * x_star
        net = default_network(cfg.prover_position, cfg.c, cfg.processing_delay)
        endpoint = None
        if x > 0:
            colluder = Endpoint("colluder", cfg.prover_position + x)
            net.add(colluder)
            endpoint = adv.proxy_wrap(net.endpoints[PROVER], colluder, net)
        t = run_full_protocol(mem, mem, params, net, make_rng(derive_seed(cfg.seed, 30_001 + j)), prover_endpoint=endpoint)
        max_rtt = max(r.rtt for r in t.rounds)
        points.append(
            {
                "factor": f,
                "extra_m": x,
                "max_rtt": max_rtt,
                "verdict": str(t.verdict),
                "timing_abort": t.verdict.kind == "abort_timing",
                # exact threshold semantics on the recorded times; off the boundary the factor decides
                "expected_abort": max_rtt >= params.round_threshold if f == 1.0 else f > 1.0,
            }
        )
    return {"critical_extra_m": x_star, "honest_rtt": base, "points": points}


def cmd_hash_impossibility(cfg: ExperimentConfig) -> CommandResult:
    """Overlap of close state pairs before and after random unitaries."""
    trials = cfg.trials or 1_000
    res = CommandResult()
    worst = 0.0
    for d_idx, dim in enumerate(cfg.dims):
        rng = make_rng(derive_seed(cfg.seed, d_idx))
        dev = 0.0
        n = dim.bit_length() - 1
        for _ in range(trials):
            a = random_state(n, rng)
            kick = rng.normal(size=dim) + 1j * rng.normal(size=dim)
            b = StateVector.normalized(a.amps + cfg.pair_eps * kick / math.sqrt(2 * dim))
            u = random_unitary(dim, rng)
            dev = max(dev, abs(fidelity(u(a), u(b)) - fidelity(a, b)))
        worst = max(worst, dev)
        res.rows.append(ResultRow("hash_impossibility", {"dim": dim}, dev, 0.0, None, trials, cfg.seed))
        res.check(dev < 1e-9, f"overlap deviation {dev:.3e} at dim {dim}")
    rng = make_rng(derive_seed(cfg.seed, 9_999))
    a, b = random_state(2, rng), random_state(2, rng)
    ident = abs(fidelity(a, b) - fidelity(StateVector(np.eye(4) @ a.amps), StateVector(np.eye(4) @ b.amps)))
    res.rows.append(ResultRow("hash_impossibility/identity", {"dim": 4}, ident, 0.0, None, 1, cfg.seed))
    res.check(ident == 0.0, "identity changed the overlap")
    res.summary["max_deviation"] = worst
    return res


def epsilon_bound(p: float, eps: float) -> float:
    pe = p * eps
    return pe**2 / 2 - pe**4 / 8


def cmd_epsilon_bound(cfg: ExperimentConfig) -> CommandResult:
    """SWAP-test detection of an eps-perturbed quantum memory against the analytic bound."""
    draws = cfg.trials or 2_000
    res = CommandResult()
    res.summary["slopes"] = {}
    idx = 0
    for p in cfg.p_values:
        curve = []
        for eps in [0.0, *cfg.perturb_eps]:
            acfg = adv.AdversaryConfig(p=p, eps=eps)
            r = adv.run_security_experiment(
                "soteria_quantum", acfg, draws, make_rng(derive_seed(cfg.seed, idx)), workers=cfg.workers, m=cfg.qm_words, shots=cfg.shots
            )
            idx += 1
            detection, bound = 1 - r.freq, epsilon_bound(p, eps)
            res.rows.append(
                ResultRow("epsilon_bound", {"p": p, "eps": eps, "m": cfg.qm_words, "shots": cfg.shots}, detection, bound, r.se, draws, cfg.seed)
            )
            res.rows.append(
                ResultRow("epsilon_bound/per_word", {"p": p, "eps": eps}, detection, p * epsilon_bound(1.0, eps), r.se, draws, cfg.seed)
            )
            if eps == 0:
                res.check(detection == 0.0, f"eps=0 detection {detection} != 0 at p={p}")
                continue
            res.check(detection <= bound + 3 * r.se, f"detection {detection:.5f} exceeds bound {bound:.5f} + 3se at p={p}, eps={eps}")
            curve.append((eps, detection))
        if len(curve) >= 2 and all(y > 0 for _, y in curve):
            slope = loglog_slope(*zip(*curve))
            res.summary["slopes"][str(p)] = slope
            res.rows.append(ResultRow("epsilon_bound/slope", {"p": p}, slope, 2.0, None, draws, cfg.seed))
            res.check(abs(slope - 2.0) <= 0.3, f"log-log slope {slope:.3f} outside 2 +/- 0.3 at p={p}")
        res.curves[f"epsilon_detection_p{p}"] = curve
    return res


COMMANDS: dict[str, Callable[[ExperimentConfig], CommandResult]] = {
    "swap-vs-rotation": cmd_swap_vs_rotation,
    "sample-length": cmd_sample_length,
    "tomography-cost": cmd_tomography_cost,
    "protocol": cmd_protocol,
    "hash-impossibility": cmd_hash_impossibility,
    "epsilon-bound": cmd_epsilon_bound,
}
