from abc import ABC, abstractmethod
from typing import Any, Dict, TypedDict
import logging

from fastapi.concurrency import run_in_threadpool

from app.errors import KMSGraphError
from app.models import MultiGraph

logger = logging.getLogger(__name__)


class WorkflowState(TypedDict):
    """Base state shared by all workflows"""
    multigraph: MultiGraph
    options: Dict[str, Any]
    context: Dict[str, Any]
    result: Dict[str, Any]


class BaseWorkflow(ABC):
    """Base class for the LangGraph analysis pipelines"""

    def __init__(self):
        self.graph = None
        self._build_graph()

    @abstractmethod
    def _build_graph(self):
        """Build the LangGraph workflow"""
        pass

    def _initial_state(self, multigraph: MultiGraph, **options) -> WorkflowState:
        return {
            "multigraph": multigraph,
            "options": options,
            "context": {},
            "result": {},
        }

    def invoke(self, multigraph: MultiGraph, **options) -> Any:
        """Run the workflow to completion and return its result"""
        try:
            final = self.graph.invoke(self._initial_state(multigraph, **options))
        except KMSGraphError as e:
            logger.error("%s failed: %s", self.__class__.__name__, e)
            raise
        return final["result"]["report"]

    async def ainvoke(self, multigraph: MultiGraph, **options) -> Any:
        """Run the workflow on a worker thread; the nodes are blocking numerical code"""
        return await run_in_threadpool(self.invoke, multigraph, **options)
