# app/services/experiment_service.py

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.core.config import settings
from app.core.constants import EXPERIMENTS, STOCHASTIC_EXPERIMENTS
from app.schemas.experiments import (
    EXPERIMENT_PARAMS,
    AtmSpaceParams,
    BlowupParams,
    CoefficientsParams,
    CriticalK1Params,
    ExperimentConfig,
    ExperimentParams,
    ExperimentSummary,
    ExpProblemConfig,
    GreenRoundtripParams,
    HardyParams,
    MaximizeParams,
    MoserNormsParams,
    NavierConstantsParams,
    NormsParams,
    PowerProblemConfig,
    RegimesParams,
    SharpnessParams,
)
from app.schemas.moser import MoserSequenceParams, OptimizerConfig
from app.schemas.pde import PowerProblem, SolverConfig
from app.schemas.spaces import Regime, SpaceParams
from app.services.corpus_service import boundary_vanishing_corpus, build_corpus
from app.services.function_service import FunctionError, GridFunction, RadialFunction, cosine_series, power
from app.services.moser_service import (
    KAMembershipError,
    MoserError,
    blowup_table,
    composite_norm,
    conjugate,
    critical_k1_sweep,
    extend_ramp,
    halfline_identity,
    halfline_transform,
    maximize_lmu,
    moser_sequence,
    mu0,
    sequence_norm_report,
)
from app.services.operator_service import (
    OperatorError,
    ParameterConstraintError,
    coefficient_table,
    delta_gamma,
    green_inverse,
    iterated_laplacian_psi,
    mu0_navier,
    product_identity,
    roundtrip_error,
)
from app.services.pde_service import (
    PdeError,
    nonlinearity,
    solve_exp,
    solve_power,
    weak_form_check,
)
from app.services.quadrature_service import QuadratureError, build_panel_grid
from app.services.space_service import (
    DivergentIntegralError,
    SpaceError,
    boundary_bound_constant,
    boundary_ratio,
    embedding_exponent,
    hardy_constant,
    hardy_extremal_family,
    hardy_ratio,
    morrey_constant,
    morrey_ratio,
    regime,
    sobolev_norm,
    weighted_lq_norm,
    weights_admissible,
)

logger = logging.getLogger(__name__)

# 요약에 실패 코드로 기록되는 수치 오류. 파라미터는 build_params 에서 이미 검증됨
NUMERICAL_ERRORS = (
    QuadratureError, FunctionError, SpaceError, OperatorError, MoserError, PdeError, ValueError, ArithmeticError,
)


class ConfigError(Exception):
    """실험 설정 오류 (종료 코드 2)"""
    pass


@dataclass
class ExperimentOutcome:
    """실험 함수의 반환값: 표 행, 요약 지표, 실패 코드"""
    rows: List[Dict[str, Any]]
    metrics: Dict[str, Any] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)

    def check(self, ok: bool, code: str) -> None:
        if not ok:
            self.failures.append(code)


def _map(fn: Callable, items: Iterable, workers: int) -> list:
    """순서를 보존하는 병렬 map"""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _relative(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def _atm_space(params: AtmSpaceParams) -> SpaceParams:
    return params.space()


# ------------------------------------------------------------------
# 공간 / 임베딩
# ------------------------------------------------------------------

def run_regimes(params: RegimesParams, config: ExperimentConfig) -> ExperimentOutcome:
    """α_k 스윕에 대한 regime 과 임베딩 지수"""
    out = ExperimentOutcome(rows=[])
    for a in params.alpha_top:
        space = params.space(a)
        report = embedding_exponent(space)
        sigma = space.sigma
        if abs(sigma) <= settings.regime_tol:
            expected = Regime.ATM
        else:
            expected = Regime.SOBOLEV if sigma > 0 else Regime.MORREY

        consistent = report.regime == expected
        if expected == Regime.SOBOLEV:
            consistent = consistent and _relative(report.exponent, (space.theta + 1) * space.p / sigma) <= params.tol
        elif expected == Regime.ATM:
            consistent = consistent and report.unbounded
        else:
            consistent = consistent and 0 <= report.holder <= 1

        out.rows.append({
            "alpha_top": a,
            "sigma": sigma,
            "regime": report.regime.value,
            "exponent": report.exponent,
            "weights_admissible": weights_admissible(space),
            "consistent": consistent,
        })
        out.check(consistent, f"regime-mismatch@alpha={a:g}")
    out.metrics["count"] = len(out.rows)
    return out


def _norm_row(name: str, u: RadialFunction, space: SpaceParams, bound: float) -> Dict[str, Any]:
    row = {
        "name": name,
        "norm": math.nan,
        "boundary_ratio": math.nan,
        "boundary_constant": bound,
        "morrey_ratio": math.nan,
        "morrey_constant": math.nan,
        "status": "ok",
    }
    try:
        row["norm"] = sobolev_norm(u, space)
    except DivergentIntegralError as e:
        row["status"] = f"divergent-norm-{e.j}"
        return row
    except FunctionError:
        row["status"] = "insufficient-order"
        return row

    row["boundary_ratio"] = boundary_ratio(u, space)
    alpha1 = space.alphas[1]
    if space.k == 1 and regime(space) == Regime.MORREY and space.p > 1 and 0 <= alpha1 < space.p - 1:
        try:
            row["morrey_ratio"] = morrey_ratio(u, space)
            row["morrey_constant"] = morrey_constant(space.p, alpha1)
        except QuadratureError:
            row["status"] = "divergent-morrey"
    return row


def run_norms(params: NormsParams, config: ExperimentConfig) -> ExperimentOutcome:
    """코퍼스 노름과 경계값 / Morrey 추정 비율"""
    space = params.space()
    bound = boundary_bound_constant(space.alphas[0], space.alphas[1], space.p, space.R)
    corpus = build_corpus(params.R)
    rows = _map(lambda item: _norm_row(item[0], item[1], space, bound), corpus.items(), config.workers)

    out = ExperimentOutcome(rows=rows)
    for row in rows:
        if row["status"] != "ok" and not row["status"].startswith("divergent-norm"):
            out.failures.append(f"{row['status']}@{row['name']}")
            continue
        if not math.isnan(row["boundary_ratio"]):
            out.check(row["boundary_ratio"] <= bound * (1 + params.tol), f"boundary-bound@{row['name']}")
        if not math.isnan(row["morrey_ratio"]):
            out.check(row["morrey_ratio"] <= row["morrey_constant"] * (1 + params.tol), f"morrey-bound@{row['name']}")

    finite = [r["boundary_ratio"] for r in rows if not math.isnan(r["boundary_ratio"])]
    out.metrics.update({
        "regime": regime(space).value,
        "boundary_constant": bound,
        "max_boundary_ratio": max(finite) if finite else math.nan,
        "divergent": sum(1 for r in rows if r["status"].startswith("divergent-norm")),
    })
    return out


def run_verify_hardy(params: HardyParams, config: ExperimentConfig) -> ExperimentOutcome:
    """Hardy 상수 p/(α−p+1): 코퍼스는 상수 이하, 극값족은 fraction 이상"""
    out = ExperimentOutcome(rows=[])
    corpus = boundary_vanishing_corpus(params.R)
    for (p, alpha), delta in zip(params.pairs, params.deltas):
        constant = hardy_constant(p, alpha)
        for name, u in corpus.items():
            try:
                ratio = hardy_ratio(u, p, alpha, params.R)
            except QuadratureError as e:
                logger.warning(f"⚠️ Hardy ratio for {name} failed: {e}")
                out.failures.append(f"quadrature@{name},p={p:g},alpha={alpha:g}")
                continue
            out.rows.append({"p": p, "alpha": alpha, "function": name, "kind": "corpus", "ratio": ratio, "constant": constant})
            out.check(ratio <= constant + params.tol, f"hardy-exceeded@{name},p={p:g},alpha={alpha:g}")

        extremal = hardy_extremal_family(p, alpha, params.R, delta)
        ratio = hardy_ratio(extremal, p, alpha, params.R)
        out.rows.append({"p": p, "alpha": alpha, "function": extremal.name, "kind": "extremal", "ratio": ratio, "constant": constant})
        out.check(ratio >= params.fraction * constant, f"extremal-short@p={p:g},alpha={alpha:g}")
        out.metrics[f"extremal_fraction.p={p:g},alpha={alpha:g}"] = ratio / constant
    return out


def run_verify_embedding_sharpness(params: SharpnessParams, config: ExperimentConfig) -> ExperimentOutcome:
    """X^{1,1}_R(1,2) ⊄ L^q_1: u = t^{−2/q} 의 L^q 노름은 log(R/a) 로 발산하고 X-노름은 수렴"""
    space = SpaceParams(k=1, p=1.0, R=params.R, alphas=[1.0, 2.0], theta=1.0)
    out = ExperimentOutcome(rows=[])
    for q in params.q_list:
        u = power(-2.0 / q, params.R, order=1)
        full = sobolev_norm(u, space)
        previous = None
        for lower in params.lowers:
            lq = weighted_lq_norm(u, q, 1.0, params.R, lower)
            x_norm = sobolev_norm(u, space, lower)
            slope = math.nan
            if previous is not None:
                # ∫_a^R t^{−2}·t dt = log(R/a)
                slope = (lq ** q - previous[1] ** q) / math.log(previous[0] / lower)
                out.check(lq > previous[1], f"not-increasing@q={q:g},lower={lower:g}")
                out.check(abs(slope - 1.0) <= params.tol, f"growth-rate@q={q:g},lower={lower:g}")
            out.rows.append({
                "q": q,
                "lower": lower,
                "lq_norm": lq,
                "x_norm": x_norm,
                "x_relative_gap": _relative(x_norm, full),
                "log_slope": slope,
            })
            previous = (lower, lq)
        gap = out.rows[-1]["x_relative_gap"]
        out.check(gap <= params.tol, f"x-norm-gap@q={q:g}")
        out.metrics[f"x_norm.q={q:g}"] = full
    return out


# ------------------------------------------------------------------
# Moser
# ------------------------------------------------------------------

def run_moser_norms(params: MoserNormsParams, config: ExperimentConfig) -> ExperimentOutcome:
    """(log m)^{p−1}∥ψ_{m,ε}∥^p 가 [floor, bound + slack] 안에 있는지"""
    space = _atm_space(params)
    out = ExperimentOutcome(rows=[])
    for log_m in params.log_m:
        seq = MoserSequenceParams(m=math.exp(log_m), eps=params.eps, k=params.k, R=params.R)
        report = sequence_norm_report(seq, space)
        within = params.rescaled_floor * (1 - 1e-9) <= report.rescaled <= report.bound + params.slack
        out.rows.append({
            "log_m": log_m,
            "norm_p": report.norm_p,
            "rescaled": report.rescaled,
            "bound": report.bound,
            "lower_order": report.lower_order,
            "within": within,
        })
        out.check(within, f"rescaled-out-of-range@log_m={log_m:g}")
    out.metrics["bound"] = out.rows[0]["bound"] if out.rows else math.nan
    return out


def run_blowup(params: BlowupParams, config: ExperimentConfig) -> ExperimentOutcome:
    """μ₀ 위아래에서 정규화된 Moser 함수열의 함수형 값"""
    space = _atm_space(params)
    tables = _map(lambda mu: blowup_table(mu, space, params.m_list, params.eps), params.mu_list, config.workers)
    volume = params.R ** (params.theta + 1) / (params.theta + 1)

    out = ExperimentOutcome(rows=[])
    for table in tables:
        mu = table.mu
        for row in table.rows:
            out.rows.append({"mu": mu, **row.model_dump()})
        first, last = table.rows[0], table.rows[-1]
        growth = last.value / first.value if first.value > 0 else math.inf
        capped = any(row.capped for row in table.rows)
        out.metrics.update({
            f"mu={mu:g}.growth": growth,
            f"mu={mu:g}.predicted_exponent": table.predicted_exponent,
            f"mu={mu:g}.empirical_exponent": math.nan if table.empirical_exponent is None else table.empirical_exponent,
        })
        if mu == 0:
            out.check(all(_relative(r.value, volume) <= params.tol for r in table.rows), "mu0-not-constant")
        elif mu > table.mu0:
            out.check(capped or growth >= params.growth_factor, f"no-blowup@mu={mu:g}")
        elif mu < table.mu0:
            out.check(not capped and growth <= params.stable_factor, f"unstable@mu={mu:g}")
        out.metrics["mu0"] = table.mu0
    return out


def run_maximize(params: MaximizeParams, config: ExperimentConfig) -> ExperimentOutcome:
    """ℓ_μ 의 격자 최대화 (μ = mu_fraction·μ₀)"""
    space = _atm_space(params)
    mu = params.mu_fraction * mu0(params.theta, params.k, params.p)
    opt = OptimizerConfig(
        max_iters=params.max_iters,
        tol=params.opt_tol,
        seed=config.seed,
        restarts=params.restarts,
        nodes=params.nodes,
    )
    report = maximize_lmu(mu, space, opt)
    values = report.restart_values
    spread = (max(values) - min(values)) / abs(max(values))
    volume = params.R ** (params.theta + 1) / (params.theta + 1)

    out = ExperimentOutcome(rows=[{"restart": i, "value": v} for i, v in enumerate(values)])
    out.metrics.update({
        "mu": mu,
        "value": report.value,
        "norm": report.norm,
        "iterations": report.iterations,
        "converged": report.converged,
        "spread": spread,
    })
    out.check(spread <= params.agreement, "restart-disagreement")
    out.check(abs(report.norm - 1) <= params.norm_tol, "maximizer-not-normalized")
    out.check(report.value >= volume * (1 - 1e-12), "value-below-volume")
    return out


def _critical_rows(R: float, params: CriticalK1Params) -> List[Dict[str, Any]]:
    corpus = build_corpus(R)
    rows = []
    for row in critical_k1_sweep(params.A, params.theta, params.alpha0, params.p, R, corpus):
        record = {
            **row.model_dump(),
            "identity_error": math.nan,
            "energy": math.nan,
            "composite_norm": math.nan,
        }
        if row.value is not None:
            u = corpus[row.name].scale(1.0 / row.norm)
            left, right = halfline_identity(u, params.theta, params.p, R, params.T)
            record["identity_error"] = _relative(left, right)
            w = halfline_transform(u, params.theta, params.p, R)
            record["composite_norm"] = composite_norm(w, params.alpha0, params.p)
            try:
                record["energy"] = extend_ramp(w, params.A, params.theta, params.alpha0, params.p, R).energy()
            except KAMembershipError as e:
                record["reason"] = f"ramp:{e}"
        rows.append(record)
    return rows


def run_critical_k1(params: CriticalK1Params, config: ExperimentConfig) -> ExperimentOutcome:
    """μ = θ+1 에서 K_A 코퍼스의 함수형, 반직선 항등식, ramp 확장 에너지"""
    blocks = _map(lambda R: _critical_rows(R, params), params.R_list, config.workers)
    out = ExperimentOutcome(rows=[row for block in blocks for row in block])
    values = []
    for row in out.rows:
        tag = f"{row['name']},R={row['R']:g}"
        if row["admissible"] and row["value"] is None:
            out.failures.append(f"divergent@{tag}")
            continue
        if row["value"] is None:
            continue
        values.append(row["value"])
        out.check(row["identity_error"] <= params.tol, f"identity@{tag}")
        if not math.isnan(row["energy"]):
            out.check(row["energy"] <= 1 + params.energy_tol, f"ramp-energy@{tag}")
    out.metrics.update({
        "admissible": sum(1 for row in out.rows if row["admissible"]),
        "max_value": max(values) if values else math.nan,
    })
    return out


# ------------------------------------------------------------------
# 연산자 / 상수
# ------------------------------------------------------------------

def _mu0_formula(theta: float, gamma: float, p: float, k: int) -> float:
    if k == 1:
        return theta + 1
    return (theta + 1) * (gamma - 1) ** conjugate(p)


def run_navier_constants(params: NavierConstantsParams, config: ExperimentConfig) -> ExperimentOutcome:
    """Navier 조건의 μ₀ 와 Γ 곱 항등식"""
    out = ExperimentOutcome(rows=[])
    for k in params.k_list:
        for theta in params.theta_list:
            for gamma in params.gamma_list:
                for p in params.p_list:
                    row = {"kind": "mu0", "k": k, "theta": theta, "gamma": gamma, "p": p,
                           "value": math.nan, "reference": math.nan, "error": math.nan, "status": "ok"}
                    try:
                        row["value"] = mu0_navier(theta, gamma, p, k)
                    except ParameterConstraintError:
                        row["status"] = "constraint"
                        out.rows.append(row)
                        continue
                    if k <= 2:
                        row["reference"] = _mu0_formula(theta, gamma, p, k)
                        row["error"] = _relative(row["value"], row["reference"])
                        out.check(row["error"] <= params.tol, f"mu0@k={k},theta={theta:g},gamma={gamma:g},p={p:g}")
                    out.rows.append(row)

    for k in params.product_k:
        for gamma in params.product_gammas:
            for p in params.p_list:
                row = {"kind": "product", "k": k, "theta": 0.0, "gamma": gamma, "p": p,
                       "value": math.nan, "reference": math.nan, "error": math.nan, "status": "ok"}
                try:
                    chain, base = product_identity(k, gamma, p)
                except ParameterConstraintError:
                    row["status"] = "constraint"
                    out.rows.append(row)
                    continue
                row.update(value=chain, reference=base, error=_relative(chain, base))
                out.check(row["error"] <= params.product_tol, f"product@k={k},gamma={gamma:g},p={p:g}")
                out.rows.append(row)

    errors = [row["error"] for row in out.rows if not math.isnan(row["error"])]
    out.metrics.update({
        "checked": len(errors),
        "max_error": max(errors) if errors else math.nan,
        "constraint_rows": sum(1 for row in out.rows if row["status"] == "constraint"),
    })
    return out


def _psi_error(gamma: float, level: int, params: CoefficientsParams) -> float:
    """Δ_γ^n ψ 닫힌 꼴과 delta_gamma n 회 적용의 상대 차이"""
    k = 1 if level <= 2 else level
    seq = MoserSequenceParams(m=params.psi_m, eps=0.05, k=k, R=1.0)
    u = moser_sequence(seq, order=2 * level)
    for _ in range(level):
        u = delta_gamma(u, gamma)
    closed = iterated_laplacian_psi(seq, gamma, level)
    r = seq.R * seq.m ** (-np.linspace(0.013, 0.987, 75))
    direct, formula = u(r), closed(r)
    return float(np.max(np.abs(direct - formula)) / np.max(np.abs(formula)))


def run_coefficients(params: CoefficientsParams, config: ExperimentConfig) -> ExperimentOutcome:
    """c_{in} 점화식 테이블, c_{1n} 닫힌 꼴 비교, ψ 에 대한 직접 미분 비교"""
    out = ExperimentOutcome(rows=[])
    poles = 0
    for gamma in params.gammas:
        table = coefficient_table(gamma, params.n, params.convention)
        for level, row in enumerate(table.levels, start=1):
            closed = table.closed_form[level - 1]
            for i, c in enumerate(row, start=1):
                out.rows.append({
                    "kind": "table",
                    "gamma": gamma,
                    "n": level,
                    "i": i,
                    "value": float(c),
                    "reference": closed if i == 1 and closed is not None else math.nan,
                })
            if closed is None:
                poles += 1
            elif table.mismatch[level - 1]:
                out.failures.append(f"c1n-mismatch@gamma={gamma:g},n={level}")

        for level in range(1, params.psi_levels + 1):
            error = _psi_error(gamma, level, params)
            out.rows.append({"kind": "psi", "gamma": gamma, "n": level, "i": 0, "value": error, "reference": 0.0})
            out.check(error <= params.psi_tol, f"psi-mismatch@gamma={gamma:g},n={level}")

    out.metrics.update({"poles": poles, "convention": params.convention})
    return out


def _roundtrip(item: Tuple[float, int], params: GreenRoundtripParams, seed: int, grid) -> Dict[str, Any]:
    gamma, sample = item
    rng = np.random.default_rng([seed, sample])
    coeffs = rng.normal(size=params.terms) / (1.0 + np.arange(params.terms)) ** 2
    v = cosine_series(coeffs, params.R, order=2)
    u = green_inverse(v, gamma, params.R, grid)
    x = grid.nodes
    error = roundtrip_error(GridFunction(grid, u(x)), v(x), gamma)
    return {
        "gamma": gamma,
        "sample": sample,
        "relative_error": error,
        "u_R": float(u(np.array([params.R]))[0]),
    }


def run_green_roundtrip(params: GreenRoundtripParams, config: ExperimentConfig) -> ExperimentOutcome:
    """∥Δ_γ(G_γ v) − v∥ / ∥v∥ (무작위 코사인 급수 v)"""
    grid = build_panel_grid(params.R, n=params.n, floor=params.floor)
    items = [(gamma, s) for gamma in params.gammas for s in range(params.samples)]
    rows = _map(lambda item: _roundtrip(item, params, config.seed, grid), items, config.workers)

    out = ExperimentOutcome(rows=rows)
    for row in rows:
        tag = f"gamma={row['gamma']:g},sample={row['sample']}"
        out.check(row["relative_error"] <= params.tol, f"roundtrip@{tag}")
        out.check(row["u_R"] == 0.0, f"boundary@{tag}")
    out.metrics.update({
        "max_relative_error": max(row["relative_error"] for row in rows),
        "nodes": grid.n,
    })
    return out


# ------------------------------------------------------------------
# PDE
# ------------------------------------------------------------------

def run_solve_power(params: PowerProblemConfig, config: ExperimentConfig) -> ExperimentOutcome:
    """Δ_α²u = λ r^{θ−α} g|u|^{p−2}u, 격자 세분화별 진단"""
    problem = params.problem()
    n_list = sorted(params.n_list or [config.grid_n or settings.grid_n])
    seed = settings.seed if config.seed is None else config.seed

    def solve(n: int) -> Dict[str, Any]:
        report = solve_power(problem, SolverConfig(n=n, seed=seed))
        ends = report.endpoints
        return {
            "n": n,
            "lam": report.lam,
            "rayleigh": report.rayleigh,
            "multiplier": report.multiplier,
            "residual": report.residual,
            "relative_residual": report.relative_residual,
            "u_R": ends.u_R,
            "delta_R": ends.delta_R,
            "delta_0": ends.delta_0,
            "defect": ends.defect,
            "u3_0": ends.u3_0,
            "stable": ends.stable,
            "weak": weak_form_check(report, problem),
            "iterations": report.iterations,
            "converged": report.converged,
            "scaling_c": report.scaling.get("c", 1.0),
            "scaling_exponent": report.scaling.get("exponent", "none"),
        }

    rows = _map(solve, n_list, config.workers)
    out = ExperimentOutcome(rows=rows)
    fine = rows[-1]
    out.check(fine["converged"], "not-converged")
    out.check(fine["relative_residual"] <= params.tol, "residual")
    out.check(max(abs(fine["u_R"]), abs(fine["delta_R"])) <= params.boundary_tol, "boundary")
    out.check(abs(fine["defect"]) <= params.defect_tol * abs(fine["delta_0"]), "origin-defect")
    out.check(fine["weak"] <= params.weak_tol, "weak-form")
    scale = abs(fine["delta_0"])
    out.check(abs(fine["u3_0"]) <= params.defect_tol * scale, "u3-nonzero")
    if len(rows) > 1:
        u3 = [abs(row["u3_0"]) for row in rows]
        settled = params.u3_floor * scale
        out.check(all(b <= a or b <= settled for a, b in zip(u3, u3[1:])), "u3-not-decreasing")
    out.metrics.update({
        "lam": fine["lam"],
        "rayleigh": fine["rayleigh"],
        "relative_residual": fine["relative_residual"],
        "scaling_exponent": fine["scaling_exponent"],
    })
    return out


def run_solve_exp(params: ExpProblemConfig, config: ExperimentConfig) -> ExperimentOutcome:
    """Δ₃²u = κ r^{θ−3} f(r,u): λ 자기 일관성, restart 일치, 선형 경우 교차 검증"""
    problem = params.problem()
    cfg = SolverConfig(n=params.n, seed=config.seed, restarts=params.restarts)
    report = solve_exp(problem, cfg)
    m_delta = report.scaling["m_delta"]
    problem = problem.model_copy(update={"m_delta": m_delta})

    grid, u = report.u.grid, report.u.values
    nl = nonlinearity(problem, m_delta)
    lam_check = grid.integrate(nl.f(u) * u, problem.theta)
    values = report.restart_values
    spread = (max(values) - min(values)) / abs(max(values))

    out = ExperimentOutcome(rows=[{"restart": i, "value": v} for i, v in enumerate(values)])
    out.metrics.update({
        "lam": report.lam,
        "multiplier": report.multiplier,
        "m_delta": m_delta,
        "relative_residual": report.relative_residual,
        "self_consistency": _relative(lam_check, report.lam),
        "spread": spread,
        "weak": weak_form_check(report, problem, m_delta=m_delta),
    })
    out.check(out.metrics["self_consistency"] <= params.tol, "lambda-self-consistency")
    out.check(spread <= params.restart_tol, "restart-disagreement")

    if params.nonlinearity == "linear":
        reference = solve_power(PowerProblem(alpha=3.0, theta=params.theta, p=2.0, R=params.R), SolverConfig(n=params.n))
        error = _relative(report.multiplier, reference.lam)
        out.metrics["linear_cross_check"] = error
        out.check(error <= params.linear_tol, "linear-cross-check")
    return out


# ------------------------------------------------------------------
# 카탈로그
# ------------------------------------------------------------------

EXPERIMENT_MAP: Dict[str, Callable[[ExperimentParams, ExperimentConfig], ExperimentOutcome]] = {
    "regimes": run_regimes,
    "norms": run_norms,
    "verify-hardy": run_verify_hardy,
    "verify-embedding-sharpness": run_verify_embedding_sharpness,
    "moser-norms": run_moser_norms,
    "blowup": run_blowup,
    "maximize": run_maximize,
    "critical-k1": run_critical_k1,
    "navier-constants": run_navier_constants,
    "coefficients": run_coefficients,
    "green-roundtrip": run_green_roundtrip,
    "solve-power": run_solve_power,
    "solve-exp": run_solve_exp,
}

EXPERIMENT_INFO = {
    "regimes": {
        "description": "σ 부호에 따른 Sobolev / ATM / Morrey 분류와 임베딩 지수",
        "sort_by": ["alpha_top"],
        "category": "spaces",
    },
    "norms": {
        "description": "코퍼스 함수의 가중 Sobolev 노름, 경계값 및 Morrey 추정",
        "sort_by": ["name"],
        "category": "spaces",
    },
    "verify-hardy": {
        "description": "Hardy 부등식 최적 상수와 극값족 근접도",
        "sort_by": ["p", "alpha", "kind", "function"],
        "category": "spaces",
    },
    "verify-embedding-sharpness": {
        "description": "임계 지수 밖에서의 임베딩 실패 증인",
        "sort_by": ["q", "lower"],
        "category": "spaces",
    },
    "moser-norms": {
        "description": "Moser 함수열 노름의 로그 스케일 점근",
        "sort_by": ["log_m"],
        "category": "moser",
    },
    "blowup": {
        "description": "μ₀ 위아래의 함수형 값 증가 / 유계 이분법",
        "sort_by": ["mu", "m"],
        "category": "moser",
    },
    "maximize": {
        "description": "μ < μ₀ 에서 ℓ_μ 최대화 (restart 비교)",
        "sort_by": ["restart"],
        "category": "moser",
    },
    "critical-k1": {
        "description": "k=1 임계 μ = θ+1 에서 K_A 코퍼스 함수형과 반직선 항등식",
        "sort_by": ["R", "name"],
        "category": "moser",
    },
    "navier-constants": {
        "description": "Navier 조건 최적 상수와 Γ 곱 항등식",
        "sort_by": ["kind", "k", "theta", "gamma", "p"],
        "category": "operators",
    },
    "coefficients": {
        "description": "Δ_γ^n ψ 계수 점화식과 닫힌 꼴",
        "sort_by": ["kind", "gamma", "n", "i"],
        "category": "operators",
    },
    "green-roundtrip": {
        "description": "Green 역연산자 왕복 오차",
        "sort_by": ["gamma", "sample"],
        "category": "operators",
    },
    "solve-power": {
        "description": "거듭제곱 비선형 4계 Navier 문제",
        "sort_by": ["n"],
        "category": "pde",
    },
    "solve-exp": {
        "description": "지수 성장 비선형 4계 Navier 문제",
        "sort_by": ["restart"],
        "category": "pde",
    },
}


def get_all_experiments() -> Dict[str, Dict[str, Any]]:
    """실험 이름 → 메타데이터 (확률적 여부 포함)"""
    return {
        name: {**EXPERIMENT_INFO[name], "stochastic": name in STOCHASTIC_EXPERIMENTS}
        for name in EXPERIMENTS
    }


def _describe(e: ValidationError, experiment: str) -> str:
    parts = []
    for err in e.errors():
        key = ".".join(str(part) for part in err["loc"]) or "params"
        if err["type"] == "extra_forbidden":
            parts.append(f"Unknown key '{key}' for experiment {experiment}")
        else:
            parts.append(f"Invalid value for '{key}': {err['msg']}")
    return "; ".join(parts)


def build_params(config: ExperimentConfig) -> ExperimentParams:
    """config.params 와 CLI 덮어쓰기(tol, grid_n)로 실험 파라미터 모델 생성

    Raises:
        ConfigError: 알 수 없는 키 또는 잘못된 값
    """
    model = EXPERIMENT_PARAMS[config.experiment]
    values = dict(config.params)
    if config.tol is not None:
        values["tol"] = config.tol
    if config.grid_n is not None and "n" in model.model_fields:
        values["n"] = config.grid_n
    try:
        return model(**values)
    except ValidationError as e:
        raise ConfigError(_describe(e, config.experiment)) from e


def to_frame(rows: List[Dict[str, Any]], experiment: str) -> pd.DataFrame:
    """행 목록을 정렬된 DataFrame 으로"""
    frame = pd.DataFrame(rows)
    if frame.empty:
        return frame
    keys = [key for key in EXPERIMENT_INFO[experiment]["sort_by"] if key in frame.columns]
    if keys:
        frame = frame.sort_values(keys, kind="mergesort").reset_index(drop=True)
    return frame


def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    return value


def run_experiment(config: ExperimentConfig) -> Tuple[ExperimentSummary, pd.DataFrame]:
    """실험 하나를 실행하고 요약과 표를 반환

    수치 오류는 요약에 실패 코드(예외 클래스 이름)로 기록한다. 실행 중의
    ValueError, ArithmeticError 도 수치 실패이고, 설정 오류는 build_params 단계에서만 난다.

    Raises:
        ConfigError: 파라미터 검증 실패
    """
    params = build_params(config)
    name = config.experiment
    logger.info(f"🚀 Experiment {name} started (seed={config.seed}, workers={config.workers})")
    try:
        outcome = EXPERIMENT_MAP[name](params, config)
    except ValidationError as e:
        raise ConfigError(_describe(e, name)) from e
    except NUMERICAL_ERRORS as e:
        logger.error(f"❌ Experiment {name} hit a numerical failure: {e}")
        code = type(e).__name__
        summary = ExperimentSummary(
            experiment=name,
            passed=False,
            status="numerical-failure",
            failures=[code],
            metrics={"message": str(e).replace("\n", " ")},
            rows=0,
            seed=config.seed,
        )
        return summary, pd.DataFrame({"failure": [code]})

    frame = to_frame(outcome.rows, name)
    passed = not outcome.failures
    summary = ExperimentSummary(
        experiment=name,
        passed=passed,
        status="ok" if passed else "check-failed",
        failures=outcome.failures,
        metrics={key: _plain(value) for key, value in outcome.metrics.items()},
        rows=len(frame),
        seed=config.seed,
    )
    if passed:
        logger.info(f"✅ Experiment {name} passed ({len(frame)} rows)")
    else:
        logger.warning(f"⚠️ Experiment {name} failed checks: {', '.join(outcome.failures)}")
    return summary, frame
