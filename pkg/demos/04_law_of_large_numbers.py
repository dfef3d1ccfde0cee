"""Law of large numbers for the empirical historical measure.

Runs a reduced N ladder and shows sample means converging to the limit
functionals with variance decaying like 1/N.
"""

import coagtree as ct
from coagtree.lln import ExperimentPlan, run_lln
from coagtree.trees import LEAF, shape_node


def main():
    cherry = shape_node(LEAF, LEAF)
    plan = ExperimentPlan(
        kernel=ct.builtin("constant"),
        mu0=ct.MassSpectrum.monodisperse(),
        t=2.0,
        functionals=(
            ("leaf", ct.ShapeIndicator(LEAF)),
            ("cherry", ct.ShapeIndicator(cherry)),
            ("cherry in [0.5, 1.5]",
             ct.ShapeTimeBoxIndicator(cherry, ((0.5, 1.5),))),
        ),
        n_ladder=(100, 400, 1600),
        replicas=(4000, 1000, 250),
        seed=7,
        tau_max_leaves=2,
    )
    report = run_lln(plan)
    print(report.to_text())


if __name__ == "__main__":
    main()
