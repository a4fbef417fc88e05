"""HTTP service exposing the toolkit: fitting, criteria tables, model
comparison tests and simulation runs as JSON request/response endpoints.

Error contract: malformed numeric input yields 400 with
``detail.code == "input_error"``; a request that falls outside a method's
domain of validity (the corrected criterion with a known error variance,
the comparison test without one) yields 409 with
``detail.code == "mode_refusal"`` instead of silently computing.
"""
from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import criteria as crit
from .discrepancy import TrueModel
from .io import InputError, sim_config_from_dict
from .regression import Dataset, LinearModel, fit_ols, standardize_errors
from .selection import SEPARATION_TRACE_FACTOR, z_test
from .simulate import run as run_simulation

app = FastAPI(
    title="regselect",
    description="Model selection for normal linear regression",
    version="0.1.0",
)


def _input_error(message: str) -> HTTPException:
    return HTTPException(status_code=400, detail={"code": "input_error", "message": message})


def _refusal(message: str) -> HTTPException:
    return HTTPException(status_code=409, detail={"code": "mode_refusal", "message": message})


# ---------------------------------------------------------------------------
# request / response models


class VarianceSpec(BaseModel):
    """How the error variance is known: exactly one mode applies.

    ``sigma2`` gives a known common variance; ``error_bars`` are per-point
    standard deviations that get standardized away (to ``target_sigma``);
    neither means the variance is a nuisance parameter to be fitted.
    """

    sigma2: float | None = None
    error_bars: list[float] | None = None
    unknown_sigma: bool = False
    target_sigma: float = 1.0


class FitRequest(VarianceSpec):
    y: list[float]
    design: list[list[float]]


class FitResponse(BaseModel):
    beta_hat: list[float]
    rss: float
    sigma2_hat: float | None
    n: int
    k: int
    variance_mode: str
    sigma2: float | None
    scale_factors: list[float] | None


class CriteriaRequest(VarianceSpec):
    y: list[float]
    designs: list[list[list[float]]]
    gamma: float | None = None
    require_aicc: bool = False


class CriterionRow(BaseModel):
    model: int
    n: int
    k: int
    rss: float
    aic: float
    aicc: float | None = None
    aicc_note: str | None = None
    aicu: float | None = None
    aic_gamma: float | None = None
    weight: float


class CriteriaResponse(BaseModel):
    variance_mode: str
    sigma2: float | None
    weights_from: str
    rows: list[CriterionRow]


class CompareRequest(VarianceSpec):
    y: list[float]
    design1: list[list[float]]
    design2: list[list[float]]
    alternative: str = "two-sided"
    alpha: float = 0.05


class CompareResponse(BaseModel):
    delta12: float
    trace_t2: float
    var_estimate: float
    valid: bool
    z: float | None
    p_two_sided: float | None
    p_one_sided: float | None
    alternative: str
    alpha: float
    reject_null: bool | None
    sigma2: float
    caveats: list[str]


class TrueModelSpec(BaseModel):
    sigma0_2: float
    y0: list[float] | None = None
    y0_csv: str | None = None


class CandidateSpec(BaseModel):
    design: list[list[float]] | None = None
    design_csv: str | None = None
    sigma2: float | None = None


class SimConfigModel(BaseModel):
    experiment: str
    replications: int
    seed: int
    params: dict = Field(default_factory=dict)
    true_model: TrueModelSpec | None = None
    candidates: list[CandidateSpec] = Field(default_factory=list)


class SimulateRequest(BaseModel):
    config: SimConfigModel
    workers: int = 1


# ---------------------------------------------------------------------------
# shared mode resolution


def _resolve(spec: VarianceSpec, y: list[float], designs: list[list[list[float]]]):
    """Apply the variance mode: returns (y, designs, sigma2 or None, mode, scale)."""
    modes = sum([spec.sigma2 is not None, spec.error_bars is not None, spec.unknown_sigma])
    if modes > 1:
        raise _input_error("give at most one of sigma2 / error_bars / unknown_sigma")
    try:
        y_arr = np.asarray(y, dtype=np.float64)
        mats = [np.asarray(d, dtype=np.float64) for d in designs]
        if spec.error_bars is not None:
            ds, scale = standardize_errors(
                Dataset(y=y_arr, error_bars=np.asarray(spec.error_bars, dtype=np.float64)),
                target_sigma=spec.target_sigma,
            )
            return (
                ds.y,
                [m * scale[:, None] for m in mats],
                ds.common_sigma2,
                "standardized_error_bars",
                scale,
            )
        if spec.sigma2 is not None:
            if spec.sigma2 <= 0:
                raise ValueError("sigma2 must be positive")
            return y_arr, mats, float(spec.sigma2), "known", None
        return y_arr, mats, None, "unknown", None
    except InputError as exc:
        raise _input_error(str(exc)) from None
    except ValueError as exc:
        raise _input_error(str(exc)) from None


def _model(matrix: np.ndarray, sigma2: float | None) -> LinearModel:
    try:
        return LinearModel(matrix, sigma2=sigma2)
    except ValueError as exc:
        raise _input_error(str(exc)) from None


# ---------------------------------------------------------------------------
# endpoints


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "service": "regselect"}


@app.post("/fit", response_model=FitResponse)
def fit_endpoint(req: FitRequest) -> FitResponse:
    y, mats, sigma2, mode, scale = _resolve(req, req.y, [req.design])
    model = _model(mats[0], sigma2)
    try:
        fit = fit_ols(model, y)
    except ValueError as exc:
        raise _input_error(str(exc)) from None
    return FitResponse(
        beta_hat=fit.beta_hat.tolist(),
        rss=fit.rss,
        sigma2_hat=fit.sigma2_hat,
        n=fit.n,
        k=fit.k,
        variance_mode=mode,
        sigma2=sigma2,
        scale_factors=None if scale is None else scale.tolist(),
    )


@app.post("/criteria", response_model=CriteriaResponse)
def criteria_endpoint(req: CriteriaRequest) -> CriteriaResponse:
    if not req.designs:
        raise _input_error("at least one design matrix is required")
    y, mats, sigma2, mode, _ = _resolve(req, req.y, req.designs)
    known = sigma2 is not None
    if known and req.require_aicc:
        raise _refusal(
            "the small-sample corrected criterion applies only when the error variance "
            "is fitted; with error bars (known variance) use the plain criterion"
        )
    if not known and req.gamma is not None:
        raise _refusal(
            "the gamma-penalized criterion is defined for a known error variance; "
            "supply sigma2 or error bars"
        )
    rows = []
    aics = []
    aiccs: list[float | None] = []
    for idx, mat in enumerate(mats):
        model = _model(mat, sigma2)
        try:
            fit = fit_ols(model, y)
        except ValueError as exc:
            raise _input_error(f"model {idx + 1}: {exc}") from None
        n, k = fit.n, fit.k
        if known:
            aic = crit.aic_known_sigma(fit.rss, sigma2, k)
            gamma_val = None if req.gamma is None else crit.aic_gamma(fit.rss, sigma2, k, req.gamma)
            rows.append(CriterionRow(model=idx + 1, n=n, k=k, rss=fit.rss, aic=aic,
                                     aic_gamma=gamma_val, weight=0.0))
            aiccs.append(None)
        else:
            try:
                aic = crit.aic_unknown_sigma(fit.rss, n, k)
                aicu_val = crit.aicu(fit.rss, n, k)
            except ValueError as exc:
                raise _input_error(f"model {idx + 1}: {exc}") from None
            try:
                aicc_val, note = crit.aicc(fit.rss, n, k), None
            except ValueError:
                aicc_val, note = None, "undefined (n - k - 2 <= 0)"
            rows.append(CriterionRow(model=idx + 1, n=n, k=k, rss=fit.rss, aic=aic,
                                     aicc=aicc_val, aicc_note=note, aicu=aicu_val, weight=0.0))
            aiccs.append(aicc_val)
        aics.append(aic)
    if known:
        weights_from = "aic"
        weights = crit.akaike_weights(aics)
    elif all(v is not None for v in aiccs):
        weights_from = "aicc"
        weights = crit.akaike_weights([v for v in aiccs if v is not None])
    else:
        weights_from = "aic"
        weights = crit.akaike_weights(aics)
    for row, w in zip(rows, weights):
        row.weight = float(w)
    return CriteriaResponse(variance_mode=mode, sigma2=sigma2, weights_from=weights_from, rows=rows)


@app.post("/compare", response_model=CompareResponse)
def compare_endpoint(req: CompareRequest) -> CompareResponse:
    if req.alternative not in ("two-sided", "m1-closer", "m2-closer"):
        raise _input_error(f"unknown alternative {req.alternative!r}")
    if not (0.0 < req.alpha < 1.0):
        raise _input_error("alpha must lie in (0, 1)")
    y, mats, sigma2, mode, _ = _resolve(req, req.y, [req.design1, req.design2])
    if sigma2 is None:
        raise _refusal(
            "the significance test for a criterion difference is defined only with a "
            "known error variance; supply sigma2 or error bars"
        )
    m1 = _model(mats[0], sigma2)
    m2 = _model(mats[1], sigma2)
    try:
        result = z_test(m1, m2, y, sigma2, alternative=req.alternative)
    except ValueError as exc:
        raise _input_error(str(exc)) from None
    caveats = []
    if result.trace_t2 <= 1e-10:
        caveats.append("identical error spaces: the difference statistic is degenerate")
    if result.trace_t2 > SEPARATION_TRACE_FACTOR * (m1.k + m2.k):
        caveats.append(
            f"trace of squared projection difference ({result.trace_t2:.4g}) is large for "
            f"k1 + k2 = {m1.k + m2.k}; the models may be too dissimilar for the normal limit"
        )
    caveats.append(
        "the normal approximation assumes both models carry per-point mean error and "
        "that the sample is large; those conditions involve the unknown true mean and "
        "cannot be verified from the data"
    )
    if not result.valid:
        caveats.append("variance estimate is non-positive: no z statistic or p-value is reported")
    p_for_decision = result.p_two_sided if req.alternative == "two-sided" else result.p_one_sided
    return CompareResponse(
        delta12=result.delta12,
        trace_t2=result.trace_t2,
        var_estimate=result.var_estimate,
        valid=result.valid,
        z=result.z,
        p_two_sided=result.p_two_sided,
        p_one_sided=result.p_one_sided,
        alternative=req.alternative,
        alpha=req.alpha,
        reject_null=None if not result.valid else bool(p_for_decision < req.alpha),
        sigma2=sigma2,
        caveats=caveats,
    )


@app.post("/simulate")
def simulate_endpoint(req: SimulateRequest) -> dict:
    doc = req.config.model_dump()
    if (req.config.true_model and req.config.true_model.y0_csv) or any(
        c.design_csv for c in req.config.candidates
    ):
        raise _input_error("CSV paths must be resolved client-side; send matrices inline")
    if req.workers < 1:
        raise _input_error("workers must be at least 1")
    try:
        config = sim_config_from_dict(doc)
    except InputError as exc:
        raise _input_error(str(exc)) from None
    try:
        report = run_simulation(config, workers=req.workers)
    except ValueError as exc:
        raise _input_error(str(exc)) from None
    return report.to_dict()
