import copy
import math

SCHEDULES = {
    "sqrt": lambda n: 5.0 * math.sqrt(n),
    "linear": lambda n: float(n),
    "nlogn": lambda n: n * math.log2(n),
    "quadratic": lambda n: float(n * n),
}


def schedule_order(schedule: str, num_sites: int) -> int:
    """Series order ``ceil(f(N))`` rounded up to the next even number."""
    try:
        value = SCHEDULES[schedule](num_sites)
    except KeyError:
        raise ValueError(f"Unknown schedule {schedule!r}; choose from {', '.join(SCHEDULES)}") from None
    order = math.ceil(value - 1e-9)
    return order + order % 2


_RECIPES = {
    "fig1-variance-scaling": {
        "description": "Off-diagonal width delta^2 against M for several chain lengths",
        "sizes": [12, 16, 20],
        "initial_states": ["X+"],
        "filter": {"M": 256, "max_bond": 256, "checkpoints": [32, 48, 64, 96, 128, 192, 256]},
        "observables": ["sx", "sz"],
    },
    "fig2-norm-vs-width": {
        "description": "Frobenius norm <rho_M|rho_M> against the filter width",
        "sizes": [12, 16, 20],
        "initial_states": ["X+"],
        "filter": {"M": 128, "max_bond": 128},
        "observables": ["sx", "sz"],
    },
    "fig3-5-error-small-N": {
        "description": "Exact filtering sweep compared with the diagonal ensemble",
        "mode": "exact",
        "sizes": [8, 10, 12],
        "initial_states": ["X+", "Z+"],
        "filter": {"M": 384, "checkpoints": [16, 24, 32, 48, 64, 96, 128, 192, 256, 384]},
        "observables": ["sx", "sz"],
    },
    "fig4-6-error-large-N": {
        "description": "Reduced-size analogue: MPS filtering against the thermal value",
        "sizes": [10, 12, 14],
        "initial_states": ["X+", "Z+"],
        "filter": {"M": 128, "max_bond": 128},
        "observables": ["sx", "sz"],
        "oracle": True,
        "thermal": True,
        "notes": (
            "reduced-size analogue; thermal reference from exact diagonalization (N <= 14). "
            "Z+ runs sit next to the X+ runs for comparison."
        ),
    },
    "fig7-osee-scaling": {
        "description": "Operator space entanglement of rho_M with M = f(N)",
        "sizes": [12, 16, 20, 24],
        "initial_states": ["X+"],
        "filter": {"schedules": ["sqrt", "linear", "nlogn"], "max_bond": 128},
        "observables": ["sx", "sz"],
    },
    "fig7-osee-scaling-quadratic": {
        "description": "Operator space entanglement of rho_M with M = N^2",
        "sizes": [8, 10, 12, 14, 16],
        "initial_states": ["X+"],
        "filter": {"schedules": ["quadratic"], "max_bond": 128},
        "observables": ["sx", "sz"],
        "notes": "N^2 passes the desk-scale order limit above N = 20; sizes stop at 16.",
    },
    "fig8-osee-peak": {
        "description": "Exact operator space entanglement against 1/delta",
        "mode": "exact",
        "sizes": [8, 10, 12],
        "initial_states": ["X+", "Y+", "Z+"],
        "filter": {"M": 256, "checkpoints": [2, 4, 8, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256]},
        "observables": ["sx", "sz"],
        "osee": True,
    },
    "fig8-diagonal-osee-size": {
        "description": "Exact operator space entanglement of the diagonal ensemble against N",
        "mode": "exact",
        "sizes": [4, 6, 8, 10, 12],
        "initial_states": ["X+", "Y+", "Z+"],
        "filter": {"M": 2, "checkpoints": [2]},
        "observables": ["sx", "sz"],
        "osee": True,
        "notes": "gather osee_diagonal per run, then fit it linearly against N for each state.",
    },
}


def figure_recipes():
    """Named experiment presets, keyed by the figure they reproduce."""
    recipes = {}
    for name, recipe in _RECIPES.items():
        recipe = copy.deepcopy(recipe)
        recipe["name"] = name
        recipes[name] = recipe
    return recipes


def get_recipe(name: str) -> dict:
    recipes = figure_recipes()
    if name not in recipes:
        raise KeyError(f"Unknown recipe {name!r}; available: {', '.join(recipes)}")
    return recipes[name]
