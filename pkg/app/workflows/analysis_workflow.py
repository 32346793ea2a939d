import logging

from langgraph.graph import StateGraph, END

from app.models import Algebra, AnalysisReport
from app.services.entropy_service import entropy_service
from app.services.graph_service import graph_service
from app.services.state_service import state_service
from app.workflows.base_workflow import BaseWorkflow, WorkflowState
from app.workflows.verification_workflow import verification_workflow

logger = logging.getLogger(__name__)

ALL_ALGEBRAS = (Algebra.TOEPLITZ, Algebra.CUNTZ_PIMSNER, Algebra.OA)


class AnalysisWorkflow(BaseWorkflow):
    """Full phase-structure report: components, entropies, phase diagram, simplices at requested betas"""

    def _build_graph(self):
        workflow = StateGraph(WorkflowState)

        workflow.add_node("decompose", self.decompose_node)
        workflow.add_node("entropies", self.entropies_node)
        workflow.add_node("phase", self.phase_node)
        workflow.add_node("simplices", self.simplices_node)
        workflow.add_node("verification", self.verification_node)
        workflow.add_node("assemble", self.assemble_node)

        workflow.add_edge("decompose", "entropies")
        workflow.add_edge("entropies", "phase")
        workflow.add_conditional_edges(
            "phase", self._after_phase, {"simplices": "simplices", "assemble": "assemble"}
        )
        workflow.add_conditional_edges(
            "simplices", self._after_simplices, {"verification": "verification", "assemble": "assemble"}
        )
        workflow.add_edge("verification", "assemble")
        workflow.add_edge("assemble", END)

        workflow.set_entry_point("decompose")

        self.graph = workflow.compile()

    def _after_phase(self, state: WorkflowState) -> str:
        return "simplices" if state["options"].get("betas") else "assemble"

    def _after_simplices(self, state: WorkflowState) -> str:
        return "verification" if state["options"].get("verify") else "assemble"

    def decompose_node(self, state: WorkflowState) -> WorkflowState:
        logger.info("decomposing graph")
        g = state["multigraph"]
        dec = graph_service.scc_decompose(g)
        radii = entropy_service.component_radii(g, dec)
        state["context"]["decomposition"] = dec
        state["context"]["components"] = [
            {
                "index": c.index,
                "vertices": [g.vertex_labels[v] for v in c.vertices],
                "is_zero": c.is_zero,
                "is_sink": c.is_sink,
                "radius": radii[c.index],
                "successors": list(dec.successors(c.index)),
            }
            for c in dec.components
        ]
        return state

    def entropies_node(self, state: WorkflowState) -> WorkflowState:
        logger.info("computing entropies")
        state["context"]["entropy"] = entropy_service.entropy_report(state["multigraph"])
        return state

    def phase_node(self, state: WorkflowState) -> WorkflowState:
        logger.info("computing phase diagram")
        state["context"]["phase"] = entropy_service.phase_diagram(state["multigraph"])
        return state

    def simplices_node(self, state: WorkflowState) -> WorkflowState:
        g = state["multigraph"]
        algebras = state["options"].get("algebras") or ALL_ALGEBRAS
        betas = state["options"]["betas"]
        logger.info("describing simplices at %d beta values", len(betas))
        state["context"]["simplices"] = [
            state_service.kms_simplex(g, beta, algebra) for beta in betas for algebra in algebras
        ]
        state["context"]["ground_states"] = [state_service.ground_and_kms_infinity(g, a) for a in algebras]
        return state

    def verification_node(self, state: WorkflowState) -> WorkflowState:
        options = state["options"]
        logger.info("verifying states on the truncated Fock space")
        state["context"]["verification"] = [
            verification_workflow.invoke(
                state["multigraph"],
                beta=beta,
                depth=options.get("depth", 6),
                trials=options.get("trials", 200),
                seed=options.get("seed", 0),
            )
            for beta in options["betas"]
        ]
        return state

    def assemble_node(self, state: WorkflowState) -> WorkflowState:
        g = state["multigraph"]
        context = state["context"]
        dec = context["decomposition"]
        summary = graph_service.serialize_graph(g)
        summary.update({
            "edge_count": g.edge_count,
            "sources": [g.vertex_labels[v] for v in sorted(graph_service.sources(g))],
            "sinks": [g.vertex_labels[v] for v in sorted(graph_service.sinks(g))],
            "ideal_vertices": [g.vertex_labels[v] for v in sorted(graph_service.ideal_i_vertices(g, dec))],
            "order": [g.vertex_labels[v] for v in dec.order],
        })
        state["result"]["report"] = AnalysisReport(
            graph=summary,
            components=context["components"],
            entropy=context["entropy"],
            phase=context["phase"],
            simplices=tuple(context.get("simplices", ())),
            ground_states=tuple(context.get("ground_states", ())),
            verification=tuple(context.get("verification", ())),
        )
        return state


analysis_workflow = AnalysisWorkflow()
