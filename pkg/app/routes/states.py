from fastapi import APIRouter, HTTPException
from fastapi.concurrency import run_in_threadpool
from typing import Dict, Any

from app.errors import GraphParseError, KMSGraphError
from app.models import EvalStateRequest, VerifyRequest
from app.services.graph_service import graph_service
from app.services.spectral_service import parse_beta
from app.services.state_service import state_service
from app.workflows.verification_workflow import verification_workflow

router = APIRouter(prefix="/states", tags=["states"])

@router.post("/evaluate", response_model=Dict[str, Any])
async def evaluate_state(request: EvalStateRequest):
    """Evaluate a finite, infinite or ground state on spanning monomials"""
    try:
        g = graph_service.graph_from_document(request.graph)
        evaluation = await run_in_threadpool(state_service.evaluate_query, g, request.query)

        return {
            "success": True,
            "evaluation": evaluation.model_dump(mode="json")
        }

    except GraphParseError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except KMSGraphError as e:
        raise HTTPException(status_code=422, detail=str(e))

@router.post("/verify", response_model=Dict[str, Any])
async def verify_states(request: VerifyRequest):
    """Check the Toeplitz KMS states at one beta on a truncated Fock space"""
    try:
        g = graph_service.graph_from_document(request.graph)

        report = await verification_workflow.ainvoke(
            g,
            beta=parse_beta(request.beta),
            depth=request.depth,
            trials=request.trials,
            seed=request.seed,
            entropy_steps=request.entropy_steps,
        )

        return {
            "success": True,
            "report": report.model_dump(mode="json")
        }

    except GraphParseError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except KMSGraphError as e:
        raise HTTPException(status_code=422, detail=str(e))
