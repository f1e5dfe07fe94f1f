"""Request and response bodies for the HTTP service.

Front points travel inline (objective names plus rows) rather than as
file paths, so a remote server never needs the client's filesystem; the
CLI reads and writes the CSVs on its side. Experiment and synthetic-data
configs are passed as raw JSON objects and validated server-side so config
errors come back as structured 400s naming the offending field.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class FrontPayload(BaseModel):
    label: str = "front"
    objectives: list[str] = Field(min_length=1)
    points: list[list[float]]


class RunRequest(BaseModel):
    config: dict
    jobs: int = Field(default=1, ge=1)


class RunResponse(BaseModel):
    ok: bool
    out_dir: str
    manifest: dict


class MetricsRequest(BaseModel):
    front: FrontPayload
    second: Optional[FrontPayload] = None


class MetricsResponse(BaseModel):
    report: dict


class CompareRequest(BaseModel):
    vanilla: FrontPayload
    adamized: FrontPayload


class CompareResponse(BaseModel):
    report: dict


class ExportFrontRequest(BaseModel):
    fronts: list[FrontPayload] = Field(min_length=1)


class ExportFrontResponse(BaseModel):
    objectives: list[str]
    points: list[list[float]]


class SynthDataRequest(BaseModel):
    config: dict


class SynthDataResponse(BaseModel):
    ok: bool
    out_dir: str
    manifest: dict


class HealthResponse(BaseModel):
    status: str
    version: str
