"""FastAPI app exposing the metric, trainer, and oracle machinery.

The handler functions are plain request-model -> response-model functions;
the HTTP layer only maps domain errors to status codes.  The CLI imports
the same handlers for its default in-process mode.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..consistency import consistency_report
from ..losses import check_lipschitz_pair, parse_loss_spec
from ..metrics import closed_form_comparison, enumerate_comparison, metric_report
from ..trainer import Dataset, ExperimentConfig, evaluate, generate_synthetic, init_model, loads_csv, sgd_train
from .schemas import (
    CompareRequest,
    CompareResponse,
    ConsistencyRequest,
    ConsistencyResponse,
    EvalRequest,
    EvalResponse,
    LipschitzRequest,
    LipschitzResponse,
    TrainRequest,
    TrainResponse,
)


def handle_eval(req: EvalRequest) -> EvalResponse:
    report = metric_report(req.scores, req.labels, req.K, req.kmax)
    return EvalResponse(**report)


def _resolve_datasets(req: TrainRequest) -> tuple[Dataset, Dataset | None]:
    if req.train_csv is not None:
        train = loads_csv(req.train_csv)
        test = loads_csv(req.test_csv) if req.test_csv else None
        if test is not None and test.n_classes > train.n_classes:
            train = Dataset(train.X, train.y, test.n_classes, train.eta)
        elif test is not None and test.n_classes < train.n_classes:
            test = Dataset(test.X, test.y, train.n_classes, test.eta)
        return train, test
    spec = req.data
    full = generate_synthetic(spec.C, spec.d, spec.n_train + spec.n_test, spec.tau, req.seed)
    train = full.subset(np.arange(spec.n_train))
    test = full.subset(np.arange(spec.n_train, spec.n_train + spec.n_test)) if spec.n_test else None
    return train, test


def handle_train(req: TrainRequest) -> TrainResponse:
    config = ExperimentConfig(
        loss=parse_loss_spec(req.loss),
        K_eval=tuple(req.K_eval),
        epochs=req.epochs,
        warmup_epochs=req.warmup_epochs,
        batch_size=req.batch_size,
        lr=req.lr,
        lr_decay_ratio=req.lr_decay_ratio,
        lr_decay_every=req.lr_decay_every,
        momentum=req.momentum,
        weight_decay=req.weight_decay,
        seed=req.seed,
        model=req.model,
        hidden=tuple(req.hidden),
    )
    train, test = _resolve_datasets(req)
    model = init_model(config.model, train.X.shape[1], train.n_classes, config.hidden, config.seed)
    model, history = sgd_train(model, train, config)
    final = evaluate(model, test if test is not None else train, config.K_eval)
    resolved = {
        "loss": str(config.loss),
        "K_eval": list(config.K_eval),
        "epochs": config.epochs,
        "warmup_epochs": config.warmup_epochs,
        "batch_size": config.batch_size,
        "lr": config.lr,
        "lr_decay_ratio": config.lr_decay_ratio,
        "lr_decay_every": config.lr_decay_every,
        "momentum": config.momentum,
        "weight_decay": config.weight_decay,
        "seed": config.seed,
        "model": config.model,
        "hidden": list(config.hidden),
        "data": req.data.model_dump() if req.train_csv is None else {"source": "csv"},
    }
    return TrainResponse(config=resolved, history=history, final=final)


def handle_consistency(req: ConsistencyRequest) -> ConsistencyResponse:
    report = consistency_report(
        req.family, req.C, req.K, req.trials, req.seed, gap_tol=req.gap_tol
    )
    if req.family == "hinge":
        passed = report["risk_gap"] > 0.0
    else:
        passed = report["rp_success_rate"] >= 0.95
    return ConsistencyResponse(**report, passed=passed)


def handle_compare(req: CompareRequest) -> CompareResponse:
    counts = enumerate_comparison(req.C, req.k, req.K)
    closed = closed_form_comparison(req.C, req.k, req.K)
    infinite = counts.Q == 0
    return CompareResponse(
        C=req.C,
        k=req.k,
        K=req.K,
        R=counts.R,
        S=counts.S,
        P=counts.P,
        Q=counts.Q,
        degree_of_consistency=counts.degree_of_consistency,
        degree_of_discriminancy=None if infinite else counts.degree_of_discriminancy,
        discriminancy_infinite=infinite,
        closed_form_match=counts == closed,
    )


def handle_lipschitz(req: LipschitzRequest) -> LipschitzResponse:
    spec = parse_loss_spec(req.family)
    report = check_lipschitz_pair(spec, req.C, req.trials, req.seed)
    report["passed"] = report.pop("pass")
    return LipschitzResponse(**report)


app = FastAPI(title="autkc", version=__version__)


def _wrap(handler, req):
    try:
        return handler(req)
    except (ValueError, KeyError, IndexError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/eval", response_model=EvalResponse)
def eval_endpoint(req: EvalRequest) -> EvalResponse:
    return _wrap(handle_eval, req)


@app.post("/train", response_model=TrainResponse)
def train_endpoint(req: TrainRequest) -> TrainResponse:
    return _wrap(handle_train, req)


@app.post("/consistency", response_model=ConsistencyResponse)
def consistency_endpoint(req: ConsistencyRequest) -> ConsistencyResponse:
    return _wrap(handle_consistency, req)


@app.post("/compare-metrics", response_model=CompareResponse)
def compare_endpoint(req: CompareRequest) -> CompareResponse:
    return _wrap(handle_compare, req)


@app.post("/lipschitz", response_model=LipschitzResponse)
def lipschitz_endpoint(req: LipschitzRequest) -> LipschitzResponse:
    return _wrap(handle_lipschitz, req)
