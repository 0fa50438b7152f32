"""Built-in scenarios reproducing the reference figures and tables.

Every preset exists in two radius variants, ``<name>@R15`` and ``<name>@R30``;
the bare name is an alias for ``@R15``. A preset expands to one or more
scenario trees that are run side by side.
"""

from __future__ import annotations

import copy

__all__ = ["PRESET_NAMES", "RADII", "DEFAULT_RADIUS", "preset_trees", "list_presets", "is_preset"]

RADII = (15.0, 30.0)
DEFAULT_RADIUS = 15.0

_SILVER = {"eps_inf": 6.0, "omega_p_eV": 7.90, "gamma_p_eV": 0.051}


def _tree(name, emitters, tasks, radius, **extra):
    tree = {
        "name": name,
        "sphere": {"radius_nm": radius, "eps_d": 1.0},
        "metal": dict(_SILVER),
        "emitters": emitters,
        "controls": {"max_multipole": 25},
        "tasks": tasks,
    }
    tree.update(copy.deepcopy(extra))
    return tree


def _ring(orientation, h, omega0=2.77, count=6):
    return {"layout": "ring", "count": count, "h_nm": h, "orientation": orientation, "omega0_eV": omega0}


def _poles(h, omega0=2.77, count=6):
    return {"layout": "poles", "count": count, "h_nm": h, "omega0_eV": omega0, "offset_deg": 1.0}


def _pair(orientation, h, omega0, theta=180.0):
    return {"layout": "pair", "h_nm": h, "orientation": orientation, "omega0_eV": omega0, "theta_deg": theta}


_EVOLVE = {"t_max": 2.0, "steps": 81}
_EVOLVE2 = {"t_max": 4.0, "steps": 81}


def _fig2(tag, orientation, h, radius):
    return [
        _tree(f"{tag}-ring", _ring(orientation, h), ["rates", "evolve", "ladder"], radius, evolve=_EVOLVE),
        _tree(f"{tag}-poles", _poles(h), ["rates", "evolve"], radius, evolve=_EVOLVE),
    ]


def _build(radius: float) -> dict[str, list[dict]]:
    sweep_theta = {"param": "emitters.theta_deg", "from": 0.0, "to": 180.0, "steps": 37,
                   "summaries": ["gamma12_over_gamma1"]}
    return {
        "fig2a": [_tree("fig2a", _ring("azimuthal", 20.0), ["rates", "evolve", "ladder"], radius, evolve=_EVOLVE)],
        "fig2b": _fig2("fig2b", "radial", 20.0, radius),
        "fig2c": _fig2("fig2c", "radial", 2.0, radius),
        "fig3": [_tree("fig3", _ring("azimuthal", 20.0), ["ladder"], radius)],
        "fig4a": [
            _tree("fig4a-h20", _pair("radial", 20.0, 2.771), ["sweep"], radius, sweep=sweep_theta),
            _tree("fig4a-h2", _pair("radial", 2.0, 2.964), ["sweep"], radius, sweep=sweep_theta),
        ],
        "fig4b": [_tree("fig4b", _pair("radial", 20.0, 2.771), ["rates", "evolve"], radius, evolve=_EVOLVE2)],
        "fig4c": [_tree("fig4c", _pair("radial", 2.0, 2.964), ["rates", "evolve"], radius, evolve=_EVOLVE2)],
        "table1": [
            _tree("table1-radial", _ring("radial", 20.0), ["eigenstates"], radius,
                  eigen={"modes": ["all"], "fixed_orientation": False}),
            _tree("table1-azimuthal", _ring("azimuthal", 20.0), ["eigenstates"], radius,
                  eigen={"modes": ["all"], "fixed_orientation": False}),
            _tree("table1-radial-fixed", _ring("radial", 20.0), ["eigenstates"], radius,
                  eigen={"modes": ["all"], "fixed_orientation": True}),
        ],
        "table2": [
            _tree("table2", _ring("azimuthal", 20.0), ["modes", "eigenstates"], radius,
                  eigen={"modes": ["all", 1, 2, 3], "fixed_orientation": True}),
        ],
        "table3": [
            _tree("table3", _pair("radial", 2.0, 2.964), ["modes", "eigenstates"], radius,
                  eigen={"modes": [1, 2, 3, "all"], "fixed_orientation": True}),
        ],
        "table4": [
            _tree("table4-radial", _pair("radial", 20.0, 2.771), ["rates", "eigenstates"], radius,
                  eigen={"modes": ["all"], "fixed_orientation": True}),
            _tree("table4-azimuthal", _pair("azimuthal", 20.0, 2.771), ["rates", "eigenstates"], radius,
                  eigen={"modes": ["all"], "fixed_orientation": True}),
        ],
    }


PRESET_NAMES = tuple(_build(DEFAULT_RADIUS))

_DESCRIPTIONS = {
    "fig2a": "6 azimuthal emitters on a ring, h=20 nm: emission burst and ladder",
    "fig2b": "6 radial emitters, h=20 nm, ring and pole layouts",
    "fig2c": "6 radial emitters, h=2 nm, ring and pole layouts",
    "fig3": "extended Dicke ladder for the azimuthal ring",
    "fig4a": "two-emitter cooperative rate versus angular separation, h=2 and 20 nm",
    "fig4b": "two radial emitters at the poles, h=20 nm, dynamics",
    "fig4c": "two radial emitters at the poles, h=2 nm, dynamics",
    "table1": "brightest and darkest single-excitation states of the 6-emitter rings",
    "table2": "single-mode brightest-state ratios for the azimuthal ring",
    "table3": "single-mode bright states of two radial emitters at h=2 nm",
    "table4": "two-emitter super/sub-radiant pairs at h=20 nm",
}


def _split(name: str) -> tuple[str, float]:
    base, _, tag = name.partition("@")
    if not tag:
        return base, DEFAULT_RADIUS
    if not tag.startswith("R"):
        raise KeyError(name)
    try:
        radius = float(tag[1:])
    except ValueError as exc:
        raise KeyError(name) from exc
    if radius not in RADII:
        raise KeyError(name)
    return base, radius


def is_preset(name: str) -> bool:
    try:
        base, _ = _split(name)
    except KeyError:
        return False
    return base in PRESET_NAMES


def preset_trees(name: str) -> list[dict]:
    """Scenario trees for preset ``name`` (``fig2a``, ``fig2a@R30``, ...)."""
    base, radius = _split(name)
    table = _build(radius)
    if base not in table:
        raise KeyError(name)
    return copy.deepcopy(table[base])


def list_presets() -> list[tuple[str, str]]:
    out = []
    for base in PRESET_NAMES:
        out.append((base, _DESCRIPTIONS[base] + f" (R={DEFAULT_RADIUS:g} nm)"))
        for r in RADII:
            out.append((f"{base}@R{r:g}", f"R={r:g} nm"))
    return out
