"""Command-line entry point ``plasmodicke``.

Exit codes: 0 success, 2 configuration error, 3 numerical-invariant failure,
4 solver non-convergence.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .config import ConfigError, parse_config, scenario_from_dict, set_path
from .greens import ResonanceError
from .lindblad import InvariantError
from .modes import FitError
from .presets import is_preset, list_presets, preset_trees
from .rates import ConvergenceError
from .runner import run_preset, run_scenario, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_CONVERGENCE = 4


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _guarded(fn, context: str):
    try:
        return fn()
    except ConfigError as exc:
        _fail(EXIT_CONFIG, f"{context}: {exc}")
    except (InvariantError, ResonanceError) as exc:
        _fail(EXIT_INVARIANT, f"{context}: {exc}")
    except (ConvergenceError, FitError) as exc:
        _fail(EXIT_CONVERGENCE, f"{context}: {exc}")


def _load_tree(target: str) -> dict:
    if is_preset(target):
        trees = preset_trees(target)
        if len(trees) != 1:
            names = ", ".join(t["name"] for t in trees)
            raise ConfigError(f"{target}: preset has several scenarios ({names}); pass a config file")
        return trees[0]
    p = Path(target)
    if not p.is_file():
        raise ConfigError(f"{target}: neither a preset nor an existing file")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _summarize(manifest: dict) -> None:
    for entry in manifest["scenarios"]:
        click.echo(f"[{entry['name']}]")
        for key, val in sorted(entry["summary"].items()):
            click.echo(f"  {key} = {json.dumps(val)}")
        for w in entry["warnings"]:
            click.echo(f"  warning: {w}")
    click.echo(f"{len(manifest['files'])} files written")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Collective emission of quantum emitters near a metal nanosphere."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@main.command()
@click.argument("target")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.option("--modes", "n_modes", type=click.IntRange(min=1), default=None, help="Multipole truncation N.")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker processes.")
def run(target: str, out_dir, n_modes, threads) -> None:
    """Run a scenario given as a JSON config file or a preset name."""
    if is_preset(target):
        manifest = _guarded(lambda: run_preset(target, out_dir, threads, n_modes), target)
    else:
        def go():
            sc = parse_config(target)
            if n_modes is not None:
                sc = scenario_from_dict(set_path(sc.raw, "controls.max_multipole", n_modes), sc.name)
            return run_scenario(sc, out_dir, threads)

        manifest = _guarded(go, target)
    _summarize(manifest)


@main.command()
@click.argument("target")
@click.option("--param", required=True, help="Dotted parameter path, e.g. emitters.theta_deg.")
@click.option("--from", "start", type=float, required=True)
@click.option("--to", "stop", type=float, required=True)
@click.option("--steps", type=click.IntRange(min=1), required=True)
@click.option("--summary", "summaries", multiple=True, help="Summary column(s); default gamma12_over_gamma1.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.option("--threads", type=click.IntRange(min=1), default=None)
def sweep(target: str, param: str, start: float, stop: float, steps: int, summaries, out_dir, threads) -> None:
    """Scan one numeric parameter of a scenario."""

    def go():
        tree = _load_tree(target)
        spec = {"param": param, "from": start, "to": stop, "steps": steps}
        if summaries:
            spec["summaries"] = list(summaries)
        tree = set_path(tree, "sweep", spec)
        tree["tasks"] = ["sweep"]
        sc = scenario_from_dict(tree)
        return run_sweep(sc, out_dir, threads)

    manifest = _guarded(go, target)
    _summarize(manifest)


@main.command()
def presets() -> None:
    """List built-in presets."""
    for name, desc in list_presets():
        click.echo(f"{name:16s} {desc}")


if __name__ == "__main__":  # pragma: no cover
    main()
