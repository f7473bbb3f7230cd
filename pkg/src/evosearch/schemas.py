"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class RunRequest(BaseModel):
    config: dict = Field(default_factory=dict,
                         description="run configuration, config-file shaped")
    wait: bool = True


class RunHandle(BaseModel):
    run_id: str
    status: str


class RunStatus(BaseModel):
    run_id: str
    status: str                       # running | done | failed | stopped
    report: Optional[dict] = None
    error: Optional[str] = None


class BenchRequest(BaseModel):
    config: dict = Field(default_factory=dict)
    runs: int = 8
    parallel_runs: int = 1


class LongrunRequest(BaseModel):
    config: dict = Field(default_factory=dict)
    checkpoint_every: float = 1e4


class GeneralizeRequest(BaseModel):
    variant: str = "basic"
    n_values: list[int]
    baseline: Optional[str] = None
    seed: int = 0
    value: float = 0.0
    priority_source: Optional[str] = None
    group: str = "diags4"
    budget: Optional[int] = None
    worker_cmd: Optional[list[str]] = None
    eval_timeout_s: float = 120.0


class GeneralizeResponse(BaseModel):
    variant: str
    rows: list[dict]
    csv: str
    ok_count: int
    warning: Optional[str] = None


class VerifyRequest(BaseModel):
    construction: dict


class VerifyResponse(BaseModel):
    problem: Optional[str]
    valid: bool
    size: int
    diameter: Optional[int] = None


class OracleResponse(BaseModel):
    problem: str
    n: int
    max: int
    geometry: Optional[str] = None


class PromptRequest(BaseModel):
    spec_text: Optional[str] = None
    problem: Optional[str] = None
    programs: list[dict] = Field(default_factory=list,
                                 description="[{source, score}] oldest first")


class PromptResponse(BaseModel):
    system_prompt: str
    user_prompt: str
    expected_next_version: int


class SpecInfo(BaseModel):
    name: str
    text: str


class Health(BaseModel):
    status: str
    version: str
    runs: dict[str, Any]
