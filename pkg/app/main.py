from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from app.routes import analysis, states
from app.config import settings
import logging
import uvicorn
from datetime import datetime, timezone

logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL.upper(), logging.WARNING),
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)

# Create FastAPI app
app = FastAPI(
    title="kmsgraph - KMS phase structure of graph algebras",
    description="Entropies, phase transitions and KMS simplices of Toeplitz and Cuntz-Pimsner algebras of finite graphs",
    version="1.0.0",
    docs_url="/docs",
    redoc_url="/redoc"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include routers
app.include_router(analysis.router)
app.include_router(states.router)

@app.get("/")
async def root():
    """Root endpoint"""
    return {
        "message": "kmsgraph - KMS states of finite graph algebras",
        "version": "1.0.0",
        "endpoints": [
            "POST /analysis/analyze - components, entropies, phase diagram, simplices",
            "POST /analysis/sweep - simplex dimensions over a beta grid",
            "GET /analysis/fixtures - bundled example graphs",
            "POST /states/evaluate - evaluate a KMS or ground state",
            "POST /states/verify - truncated Fock-space verification"
        ],
        "docs": "/docs"
    }

@app.get("/health")
async def health_check():
    """Health check endpoint"""
    return {
        "status": "healthy",
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "fock_dimension_cap": settings.FOCK_DIMENSION_CAP
    }

@app.on_event("startup")
async def startup_event():
    logger.info("kmsgraph API starting on %s:%d", settings.HOST, settings.PORT)

@app.on_event("shutdown")
async def shutdown_event():
    logger.info("kmsgraph API shutting down")

if __name__ == "__main__":
    uvicorn.run(
        "app.main:app",
        host=settings.HOST,
        port=settings.PORT,
        reload=True,
        log_level=settings.LOG_LEVEL.lower()
    )
