from langgraph.graph import END, StateGraph

from graph.nodes import (
    check_contact,
    check_integrality,
    check_lie_derivative,
    check_period,
    check_reduction,
    check_reeb,
    load_target,
    route_after_contact,
    route_after_load,
    route_after_period,
    route_after_reduction,
)
from graph.state import VerifyState


def create_workflow():
    """Create the verification suite run by ``verify``."""
    workflow = StateGraph(VerifyState)

    workflow.add_node("load_target", load_target)
    workflow.add_node("check_contact", check_contact)
    workflow.add_node("check_reeb", check_reeb)
    workflow.add_node("check_lie_derivative", check_lie_derivative)
    workflow.add_node("check_period", check_period)
    workflow.add_node("check_reduction", check_reduction)
    workflow.add_node("check_integrality", check_integrality)

    workflow.set_entry_point("load_target")
    workflow.add_conditional_edges(
        "load_target",
        route_after_load,
        {"check_contact": "check_contact", "check_period": "check_period", "END": END},
    )
    workflow.add_conditional_edges(
        "check_contact",
        route_after_contact,
        {"check_reeb": "check_reeb", "END": END},
    )
    workflow.add_edge("check_reeb", "check_lie_derivative")
    workflow.add_edge("check_lie_derivative", "check_period")
    workflow.add_conditional_edges(
        "check_period",
        route_after_period,
        {"check_reduction": "check_reduction", "END": END},
    )
    workflow.add_conditional_edges(
        "check_reduction",
        route_after_reduction,
        {"check_integrality": "check_integrality", "END": END},
    )
    workflow.add_edge("check_integrality", END)

    return workflow.compile()


# Create the compiled graph
graph = create_workflow()
