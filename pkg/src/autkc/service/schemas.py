"""Pydantic request/response models for the evaluation service.

These schemas are the wire contract shared by the FastAPI app and the CLI
(the CLI builds the same requests and either calls the handlers in-process
or POSTs them to a running server).
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class EvalRequest(BaseModel):
    scores: list[list[float]] = Field(description="n rows of C class scores")
    labels: list[int]
    K: int = Field(ge=1)
    kmax: int | None = Field(default=None, ge=1)


class EvalResponse(BaseModel):
    K: int
    autkc_up: float
    topk_curve: list[float]
    n: int


class SyntheticSpec(BaseModel):
    C: int = Field(default=20, ge=2)
    d: int = Field(default=16, ge=1)
    n_train: int = Field(default=5000, ge=1)
    n_test: int = Field(default=2000, ge=0)
    tau: float = Field(default=2.0, gt=0)


class TrainRequest(BaseModel):
    loss: str = Field(description="loss spec, e.g. 'autkc-exp@5', 'l5@3', 'ce'")
    K_eval: list[int] = Field(default=[1, 3, 5])
    epochs: int = Field(default=90, ge=1)
    warmup_epochs: int = Field(default=10, ge=0)
    batch_size: int = Field(default=128, ge=1)
    lr: float = Field(default=0.01, ge=0)
    lr_decay_ratio: float = Field(default=0.1, gt=0)
    lr_decay_every: int = Field(default=30, ge=1)
    momentum: float = Field(default=0.9, ge=0, lt=1)
    weight_decay: float = Field(default=1e-4, ge=0)
    seed: int = Field(default=0, ge=0)
    model: str = Field(default="mlp", pattern="^(linear|mlp)$")
    hidden: list[int] = Field(default=[64])
    data: SyntheticSpec = Field(default_factory=SyntheticSpec)
    train_csv: str | None = Field(default=None, description="inline dataset CSV, overrides synthetic data")
    test_csv: str | None = None


class EpochRecord(BaseModel):
    epoch: int
    loss_family: str
    train_loss: float
    autkc_up: dict[str, float]
    topk: list[float]


class TrainResponse(BaseModel):
    config: dict
    history: list[EpochRecord]
    final: dict


class ConsistencyRequest(BaseModel):
    family: str = Field(pattern="^(square|exp|logit|hinge)$")
    C: int = Field(ge=3)
    K: int = Field(ge=1)
    trials: int = Field(default=50, ge=1)
    seed: int = Field(default=0, ge=0)
    gap_tol: float = Field(default=1e-6, gt=0)


class ConsistencyResponse(BaseModel):
    family: str
    C: int
    K: int
    trials: int
    gap_tol: float
    rp_success_rate: float
    worst_risk_gap: float
    records: list[dict]
    # hinge construction extras
    risk_gap: float | None = None
    tail_mass: float | None = None
    condition_threshold: float | None = None
    eta: list[float] | None = None
    s_rp: list[float] | None = None
    s_tied: list[float] | None = None
    passed: bool


class CompareRequest(BaseModel):
    C: int = Field(ge=2)
    k: int = Field(ge=1)
    K: int = Field(ge=2)


class CompareResponse(BaseModel):
    C: int
    k: int
    K: int
    R: int
    S: int
    P: int
    Q: int
    degree_of_consistency: float
    degree_of_discriminancy: float | None = Field(
        default=None, description="None when infinite (Q = 0)"
    )
    discriminancy_infinite: bool
    closed_form_match: bool


class LipschitzRequest(BaseModel):
    family: str = Field(description="normalized loss spec, e.g. 'autkc-sq@2'")
    C: int = Field(default=5, ge=2)
    trials: int = Field(default=10000, ge=1)
    seed: int = Field(default=0, ge=0)


class LipschitzResponse(BaseModel):
    family: str
    K: int
    C: int
    trials: int
    bound_pair: list[float]
    max_ratio: float
    passed: bool
