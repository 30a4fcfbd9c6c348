"""Scripted mock exchanges for the three built-in scenarios.

One script per (agent stage, assigned role) pair; the final-stage outputs
are valid plans over the default SDK registry so oracle scoring of a mock
run is meaningful and fully deterministic.
"""

from __future__ import annotations

from .backends import MockBackend, MockScript

PAINTER = "Painter Tradesperson"
SAFETY = "Safety Inspector"
TILING = "Floor Tiling Tradesperson"

_PAINTER_OBSERVATION = """The workspace holds an unfinished wooden panel (plywood) leaning in front of a finished wall.
On the drop cloth I can identify a Behr Painting Can, a Behr waterproofing stain sealer, a Golden primer,
a Handy Paint Tray, a paint roller, a paintbrush, and a ladder standing unused to the side.
The plywood surface is bare; the wall behind it is already painted. Nothing else is unusual."""

_PAINTER_PLAN = """1. Go to the unfinished wooden panel (plywood); it is the surface to be coated, not the finished surface behind it.
2. Prime the plywood first using the Golden primer.
3. Rest the primer on the Handy Paint Tray when done.
4. Coat the primed plywood from the Behr Painting Can.
5. Finish the edges with the paintbrush.
6. Signal completion."""

_PAINTER_CODE = """Here is the executable plan.

```python
navigate_to("unfinished wooden panel (plywood)")
detect_surfaces()
pick_up("Golden primer")
apply("Golden primer", "unfinished wooden panel (plywood)")
place("Golden primer", "Handy Paint Tray")
pick_up("Behr Painting Can")
apply("Behr Painting Can", "unfinished wooden panel (plywood)")
place("Behr Painting Can", "Handy Paint Tray")
pick_up("paintbrush")
apply("paintbrush", "unfinished wooden panel (plywood)")
set_light("green")
speak("Coating of the wooden panel is complete")
```"""

_SAFETY_OBSERVATION = """A worker is handling woodwork without protective equipment.
A yellow hardhat and a pair of safety gloves lie on the ground next to him, clearly set aside.
A bucket stands nearby but is unrelated to what the worker is doing. This is a safety violation scene."""

_SAFETY_PLAN = """1. Approach the yellow hardhat first; missing head protection is the most serious hazard.
2. Bring the yellow hardhat to the worker.
3. Bring the safety gloves to the worker as well.
4. Warn the worker about the hazard with a spoken message and a red light."""

_SAFETY_CODE = """Here is the executable plan.

```python
navigate_to("yellow hardhat")
detect_objects()
pick_up("yellow hardhat")
navigate_to("worker")
place("yellow hardhat", "worker")
pick_up("safety gloves")
place("safety gloves", "worker")
set_light("red")
speak("Please put on your hard hat and safety gloves before you continue")
```"""

_TILING_OBSERVATION = """The floor area is partially tiled and the job is ongoing.
Laid out beside it I can identify tile adhesive, grout, tile spacers, trowels, a rubber mallet,
a cleaning sponge, a stack of tiles, a surface level, and a tile hammer. The next section of floor is bare."""

_TILING_PLAN = """1. Spread tile adhesive on the bare floor area with the trowels.
2. Set the tiles into the adhesive.
3. Insert tile spacers between the tiles.
4. Tap the tiles flat with the rubber mallet and check them with the surface level.
5. Work grout into the joints, then clean the tiles with the cleaning sponge.
6. Signal completion."""

_TILING_CODE = """Here is the executable plan.

```python
navigate_to("floor area")
detect_surfaces()
pick_up("trowels")
apply("tile adhesive", "floor area")
place("trowels", "floor area")
pick_up("tiles")
place("tiles", "floor area")
pick_up("tile spacers")
place("tile spacers", "tiles")
pick_up("rubber mallet")
apply("rubber mallet", "tiles")
pick_up("surface level")
apply("surface level", "tiles")
pick_up("grout")
apply("grout", "tiles")
pick_up("cleaning sponge")
apply("cleaning sponge", "tiles")
set_light("green")
speak("Tiling of this section is complete")
```"""

_FIXTURES = {
    PAINTER: (_PAINTER_OBSERVATION, _PAINTER_PLAN, _PAINTER_CODE),
    SAFETY: (_SAFETY_OBSERVATION, _SAFETY_PLAN, _SAFETY_CODE),
    TILING: (_TILING_OBSERVATION, _TILING_PLAN, _TILING_CODE),
}

# (stage marker, which fixture, tokens_in, tokens_out, latency_s)
_STAGES = (
    ("Autonomous Robot Controller", 2, 780, 320, 11.0),
    ("Observing Planner", 1, 860, 400, 7.5),
    ("Scene Observer", 0, 850, 210, 6.0),
    ("Action Planner", 1, 620, 340, 4.5),
    ("Code Actor", 2, 910, 280, 5.0),
    ("Code Editor", 2, 1150, 190, 6.5),
)


def default_mock_backend() -> MockBackend:
    backend = MockBackend()
    for role, fixtures in _FIXTURES.items():
        for stage, fixture_idx, tin, tout, latency in _STAGES:
            backend.add_script(
                MockScript(
                    stage_marker=stage,
                    role_marker=role,
                    text=fixtures[fixture_idx],
                    tokens_in=tin,
                    tokens_out=tout,
                    latency_s=latency,
                )
            )
    return backend
