from typing import List, Optional

from fastapi import APIRouter, HTTPException, Query
from pydantic import BaseModel

from qpush.config import settings
from qpush.exceptions import DegenerateSpectrum, QPushError
from qpush.routers import reject_file_graphs
from qpush.graph import (
    SpectralProfile,
    TheoryBounds,
    build_topology,
    estimate_spectral_profile,
    out_degree_weight_matrix,
    theory_bounds,
)

router = APIRouter(prefix="/graphs", tags=["graphs"])


class GraphProfileResponse(BaseModel):
    name: str
    n: int
    arcs: int
    doubly_stochastic: bool
    spectral_profile: SpectralProfile
    theory_bounds: Optional[TheoryBounds] = None
    warnings: List[str] = []


@router.get("/{preset:path}/profile", response_model=GraphProfileResponse)
def graph_profile(
    preset: str,
    d_sq: float = Query(0.0, ge=0, description="Gradient second-moment bound used for xi"),
    horizon: Optional[int] = Query(None, ge=2, le=settings.MAX_SPECTRAL_HORIZON),
):
    """
    Estimated push-sum constants of a built-in graph preset (ring:<n>, g1, g2, complete:<n>).
    Theory bounds are omitted with a warning when the spectrum is degenerate.
    """
    try:
        reject_file_graphs(preset)
        graph = build_topology(preset)
        A = out_degree_weight_matrix(graph)
        profile = estimate_spectral_profile(
            A,
            max(horizon or settings.SPECTRAL_HORIZON, 2 * graph.n),
            settings.SPECTRAL_TOL,
        )
    except QPushError as e:
        raise HTTPException(status_code=e.status_code, detail=e.detail)

    warnings: List[str] = []
    try:
        bounds = theory_bounds(profile, graph.n, d_sq)
    except DegenerateSpectrum as e:
        bounds = None
        warnings.append(e.detail)
    return GraphProfileResponse(
        name=graph.name,
        n=graph.n,
        arcs=graph.edge_count,
        doubly_stochastic=A.is_doubly_stochastic(),
        spectral_profile=profile,
        theory_bounds=bounds,
        warnings=warnings,
    )
