from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from qpush.config import settings
from qpush.routers import experiments, graphs
from qpush.utils.logging import configure_logging

configure_logging()

# Initialize FastAPI app
app = FastAPI(
    title=settings.API_TITLE,
    description="Quantized push-sum gossip and decentralized SGD simulator",
    version="1.0.0"
)

# CORS middleware (configure QPUSH_CORS_ORIGINS for deployed frontends)
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.CORS_ORIGINS,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include routers
app.include_router(experiments.router)
app.include_router(graphs.router)


@app.get("/")
def root():
    """Root endpoint."""
    return {
        "message": "Quantized Push-Sum Simulator API",
        "version": "1.0.0",
        "status": "running"
    }


@app.get("/health")
def health_check():
    """Health check endpoint."""
    return {"status": "healthy"}
