from fastapi import APIRouter, HTTPException
from fastapi.concurrency import run_in_threadpool
from typing import Dict, Any

from app.cli import parse_algebras, parse_range, sweep
from app.errors import GraphParseError, KMSGraphError
from app.fixtures import FIXTURES, fixture_document, fixture_names
from app.models import AnalyzeRequest, SweepRequest
from app.services.graph_service import graph_service
from app.services.spectral_service import parse_beta
from app.workflows.analysis_workflow import analysis_workflow

router = APIRouter(prefix="/analysis", tags=["analysis"])

@router.post("/analyze", response_model=Dict[str, Any])
async def analyze_graph(request: AnalyzeRequest):
    """Entropies, phase diagram and KMS simplices of a graph"""
    try:
        g = graph_service.graph_from_document(request.graph)
        betas = [parse_beta(b, field=f"betas[{i}]") for i, b in enumerate(request.betas)]

        report = await analysis_workflow.ainvoke(
            g,
            betas=betas,
            algebras=parse_algebras(request.algebra),
            verify=request.verify,
        )

        return {
            "success": True,
            "report": report.model_dump(mode="json")
        }

    except GraphParseError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except KMSGraphError as e:
        raise HTTPException(status_code=422, detail=str(e))

@router.post("/sweep", response_model=Dict[str, Any])
async def sweep_graph(request: SweepRequest):
    """Simplex dimensions over a beta grid"""
    try:
        g = graph_service.graph_from_document(request.graph)
        rows = await run_in_threadpool(sweep, g, parse_range(request.range), parse_algebras(request.algebra))

        return {
            "success": True,
            "rows": [r.model_dump(mode="json") for r in rows]
        }

    except GraphParseError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except KMSGraphError as e:
        raise HTTPException(status_code=422, detail=str(e))

@router.get("/fixtures", response_model=Dict[str, Any])
async def list_fixtures():
    """Bundled example graphs"""
    return {
        "success": True,
        "fixtures": {name: FIXTURES[name]["description"] for name in fixture_names()}
    }

@router.get("/fixtures/{name}", response_model=Dict[str, Any])
async def get_fixture(name: str):
    if name not in FIXTURES:
        raise HTTPException(status_code=404, detail=f"unknown fixture '{name}'")

    return {
        "success": True,
        "name": name,
        "graph": fixture_document(name)
    }
