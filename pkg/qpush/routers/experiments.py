import logging
from typing import List

import pandas as pd
from fastapi import APIRouter, HTTPException, Query

from qpush.config import settings
from qpush.exceptions import QPushError
from qpush.harness import bits_to_error, run
from qpush.oracle import run_validation_suite
from qpush.routers import reject_file_graphs
from qpush.schemas import CompareRequest, CompareRow, ExperimentConfig, RunResponse, ValidateResponse

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/experiments", tags=["experiments"])


def _http_error(e: QPushError) -> HTTPException:
    logger.info("[API] %s: %s", type(e).__name__, e.detail)
    return HTTPException(status_code=e.status_code, detail=e.detail)


@router.post("/run", response_model=RunResponse)
def run_experiment(
    cfg: ExperimentConfig,
    write: bool = Query(False, description="Also write <name>.csv and <name>.meta.json"),
):
    """
    Run one gossip, convex or nonconvex experiment.
    Returns the run metadata and every per-round record.
    """
    try:
        reject_file_graphs(cfg.graph)
        trace = run(cfg, write=write)
    except QPushError as e:
        raise _http_error(e)
    return RunResponse(metadata=trace.metadata, columns=trace.columns, records=trace.records)


@router.post("/compare", response_model=List[CompareRow])
def compare_bits(request: CompareRequest):
    """Bits the quantized and exact runs need to reach each target error."""
    try:
        reject_file_graphs(request.quantized.graph, request.exact.graph)
        table = bits_to_error(request.quantized, request.exact, request.targets)
    except QPushError as e:
        raise _http_error(e)
    return [
        CompareRow(
            target_error=float(row.target_error),
            quantized_bits=None if pd.isna(row.quantized_bits) else int(row.quantized_bits),
            exact_bits=None if pd.isna(row.exact_bits) else int(row.exact_bits),
            bit_ratio=None if pd.isna(row.bit_ratio) else float(row.bit_ratio),
            status=row.status,
        )
        for row in table.itertuples(index=False)
    ]


@router.post("/validate", response_model=ValidateResponse)
def validate_engines(
    rounds: int = Query(settings.VALIDATION_ROUNDS, ge=1, le=10_000),
    seed: int = Query(settings.DEFAULT_SEED, ge=0),
):
    """Cross-check the node-level engines against the matrix-form recursions."""
    try:
        checks = run_validation_suite(rounds, seed)
    except QPushError as e:
        raise _http_error(e)
    return ValidateResponse(passed=all(c.passed for c in checks), checks=checks)
