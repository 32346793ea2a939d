import logging

from langgraph.graph import StateGraph, END

from app.config import settings
from app.models import Algebra, Monomial, StateKind, VerifyReport
from app.services.fock_service import fock_service
from app.services.state_service import state_service
from app.workflows.base_workflow import BaseWorkflow, WorkflowState

logger = logging.getLogger(__name__)

# Matrix products are only used to validate the symbolic canonicalization on a sample
CANONICALIZATION_SAMPLE = 50


class VerificationWorkflow(BaseWorkflow):
    """Checks the constructed KMS states of the Toeplitz algebra at one beta on a truncated Fock space"""

    def _build_graph(self):
        workflow = StateGraph(WorkflowState)

        workflow.add_node("build_fock", self.build_fock_node)
        workflow.add_node("check_relations", self.check_relations_node)
        workflow.add_node("check_states", self.check_states_node)
        workflow.add_node("check_vector_states", self.check_vector_states_node)
        workflow.add_node("norm_entropy", self.norm_entropy_node)
        workflow.add_node("assemble", self.assemble_node)

        workflow.add_edge("build_fock", "check_relations")
        workflow.add_edge("check_relations", "check_states")
        workflow.add_edge("check_states", "check_vector_states")
        workflow.add_edge("check_vector_states", "norm_entropy")
        workflow.add_edge("norm_entropy", "assemble")
        workflow.add_edge("assemble", END)

        workflow.set_entry_point("build_fock")

        self.graph = workflow.compile()

    def build_fock_node(self, state: WorkflowState) -> WorkflowState:
        options = state["options"]
        options.setdefault("depth", 6)
        options.setdefault("trials", settings.DEFAULT_TRIALS)
        options.setdefault("seed", settings.DEFAULT_SEED)
        options.setdefault("entropy_steps", 30)
        logger.info("building truncated Fock space of depth %d", options["depth"])
        state["context"]["fock"] = fock_service.build_truncated_fock(state["multigraph"], options["depth"])
        state["context"]["pairs"] = fock_service.sample_monomials(
            state["multigraph"], options["trials"], max(0, options["depth"] - 2), options["seed"]
        )
        return state

    def check_relations_node(self, state: WorkflowState) -> WorkflowState:
        fock = state["context"]["fock"]
        state["context"]["relations_exact"] = fock_service.relations_exact(fock)
        state["context"]["canonicalization_exact"] = fock_service.canonicalization_check(
            fock, state["context"]["pairs"][:CANONICALIZATION_SAMPLE]
        )
        return state

    def check_states_node(self, state: WorkflowState) -> WorkflowState:
        g, options = state["multigraph"], state["options"]
        beta = options["beta"]
        simplex = state_service.kms_simplex(g, beta, Algebra.TOEPLITZ)

        def residual(tau, kind):
            return fock_service.kms_residual(
                g, options["depth"], tau, beta, kind, trials=options["trials"], seed=options["seed"]
            )

        residuals = [residual(extreme.trace, StateKind.FINITE) for extreme in simplex.finite_extremes]
        residuals += [residual(tau, StateKind.INFINITE) for tau in simplex.infinite_extremes]
        averaging = [fock_service.averaging_residual(g, tau, beta) for tau in simplex.infinite_extremes]

        logger.info("checked %d extreme states at beta=%.6g", len(residuals), beta)
        state["context"]["simplex"] = simplex
        state["context"]["residuals"] = residuals
        state["context"]["averaging"] = averaging
        return state

    def check_vector_states_node(self, state: WorkflowState) -> WorkflowState:
        """Finite states realized as vector states on the truncated space"""
        g, context = state["multigraph"], state["context"]
        beta = state["options"]["beta"]
        fock, pairs = context["fock"], context["pairs"][:CANONICALIZATION_SAMPLE]

        fock_residuals, deviations, mass_deviations, tails = [], [], [], []
        for extreme in context["simplex"].finite_extremes:
            tau = extreme.trace
            fock_residuals.append(fock_service.fock_kms_residual(fock, tau, beta, pairs))
            closed = state_service.state_vertex_vector(g, tau, beta, StateKind.FINITE)
            deviations.append(max(
                abs(fock_service.fock_state_eval(fock, tau, beta, Monomial.vertex(v)) - closed[v]) for v in range(g.n)
            ))
            deviation, tail = fock_service.level_mass_check(g, fock, tau, beta)
            mass_deviations.append(deviation)
            tails.append(tail)

        context["fock_residuals"] = fock_residuals
        context["vector_deviations"] = deviations
        context["mass_deviations"] = mass_deviations
        context["mass_tails"] = tails
        return state

    def norm_entropy_node(self, state: WorkflowState) -> WorkflowState:
        steps = state["options"]["entropy_steps"]
        logger.info("estimating norm entropy over %d steps", steps)
        state["context"]["norm_entropy"] = fock_service.norm_entropy_estimate(state["multigraph"], steps)
        return state

    def assemble_node(self, state: WorkflowState) -> WorkflowState:
        context, options = state["context"], state["options"]

        def largest(values):
            return max(values) if values else None

        state["result"]["report"] = VerifyReport(
            relations_exact=context["relations_exact"],
            canonicalization_exact=context["canonicalization_exact"],
            kms_max_residual=max(context["residuals"], default=0.0),
            averaging_residual=largest(context["averaging"]),
            fock_kms_residual=largest(context["fock_residuals"]),
            vector_state_deviation=largest(context["vector_deviations"]),
            level_mass_deviation=largest(context["mass_deviations"]),
            level_mass_tail=largest(context["mass_tails"]),
            norm_entropy=tuple(context["norm_entropy"]),
            N=options["depth"],
            seed=options["seed"],
            trials=options["trials"],
            states_checked=len(context["residuals"]),
        )
        return state


verification_workflow = VerificationWorkflow()
