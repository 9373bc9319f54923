"""Grid worlds with slipping robots and queryable sensors, compiled into an Hmm.

Cells are ``(x, y)`` with ``0 <= x < width`` and ``0 <= y < height``; "up"
increases y. The hidden state is the pair (robot type, cell), so the initial
state identifies the type and the inference problem is type recognition.
Observation ``i`` means sensor ``i`` reported the robot, ``"n"`` is the null
observation and action ``query_i`` reads sensor ``i``.
"""

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .exceptions import CompileError
from .hmm import Hmm

MOVES = ("up", "down", "left", "right", "stay")
_DELTA = {"up": (0, 1), "down": (0, -1), "left": (-1, 0), "right": (1, 0), "stay": (0, 0)}
_LATERAL = {"up": ("left", "right"), "down": ("left", "right"),
            "left": ("up", "down"), "right": ("up", "down"), "stay": ()}
NULL_OBSERVATION = "n"


@dataclass(frozen=True)
class RobotType:
    start: tuple
    goal: tuple
    name: str = ""


@dataclass(frozen=True)
class Sensor:
    id: str
    cells: frozenset


@dataclass(frozen=True)
class GridWorldSpec:
    width: int
    height: int
    robot_types: tuple
    sensors: tuple
    type_prior: tuple
    walls: frozenset = frozenset()
    slip_prob: float = 0.2
    detection_prob: float = 0.9
    discount: float = 0.95
    description: str = ""

    @classmethod
    def from_dict(cls, doc):
        try:
            types = tuple(
                RobotType(tuple(t["start"]), tuple(t["goal"]), t.get("name", f"type{i + 1}"))
                for i, t in enumerate(doc["types"]))
            sensors = tuple(Sensor(str(s["id"]), frozenset(tuple(c) for c in s["cells"]))
                            for s in doc["sensors"])
            return cls(
                width=int(doc["grid"]["width"]),
                height=int(doc["grid"]["height"]),
                walls=frozenset(tuple(c) for c in doc.get("walls", [])),
                robot_types=types,
                sensors=sensors,
                type_prior=tuple(float(p) for p in doc["prior"]),
                slip_prob=float(doc.get("probabilities", {}).get("slip", 0.2)),
                detection_prob=float(doc.get("probabilities", {}).get("detection", 0.9)),
                discount=float(doc.get("probabilities", {}).get("discount", 0.95)),
                description=doc.get("description", ""),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CompileError(f"malformed grid-world spec: {exc!r}") from None

    def to_dict(self):
        return {
            "description": self.description,
            "grid": {"width": self.width, "height": self.height},
            "walls": sorted(list(c) for c in self.walls),
            "types": [{"name": t.name, "start": list(t.start), "goal": list(t.goal)}
                      for t in self.robot_types],
            "sensors": [{"id": s.id, "cells": sorted(list(c) for c in s.cells)}
                        for s in self.sensors],
            "probabilities": {"slip": self.slip_prob, "detection": self.detection_prob,
                              "discount": self.discount},
            "prior": list(self.type_prior),
        }

    @property
    def num_cells(self):
        return self.width * self.height

    def cell_index(self, cell):
        x, y = cell
        return y * self.width + x

    def cell_at(self, index):
        return (index % self.width, index // self.width)

    def inside(self, cell):
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def validate(self):
        if self.width < 1 or self.height < 1:
            raise CompileError("grid dimensions must be positive")
        for cell in self.walls:
            if not self.inside(cell):
                raise CompileError(f"wall {cell} lies outside the grid")
        if not self.robot_types:
            raise CompileError("at least one robot type is required")
        for i, t in enumerate(self.robot_types):
            for what, cell in (("start", t.start), ("goal", t.goal)):
                if not self.inside(cell):
                    raise CompileError(f"type {t.name or i}: {what} {cell} lies outside the grid")
                if cell in self.walls:
                    raise CompileError(f"type {t.name or i}: {what} {cell} is a wall")
        starts = [t.start for t in self.robot_types]
        if len(set(starts)) != len(starts):
            raise CompileError("robot types must have distinct start cells")
        ids = [s.id for s in self.sensors]
        if len(set(ids)) != len(ids) or NULL_OBSERVATION in ids:
            raise CompileError(f"sensor ids must be unique and differ from {NULL_OBSERVATION!r}")
        if not self.sensors:
            raise CompileError("at least one sensor is required")
        for s in self.sensors:
            for cell in s.cells:
                if not self.inside(cell):
                    raise CompileError(f"sensor {s.id}: cell {cell} lies outside the grid")
        if not 0.0 <= self.detection_prob <= 1.0:
            raise CompileError("detection probability must lie in [0, 1]")
        if not 0.0 <= self.slip_prob < 1.0:
            raise CompileError("slip probability must lie in [0, 1)")
        if not 0.0 < self.discount <= 1.0:
            raise CompileError("discount must lie in (0, 1]")
        if len(self.type_prior) != len(self.robot_types):
            raise CompileError("prior needs one entry per robot type")
        if min(self.type_prior) < 0 or abs(sum(self.type_prior) - 1.0) > 1e-12:
            raise CompileError(f"prior {self.type_prior} is not a distribution")


def load_spec(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CompileError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return GridWorldSpec.from_dict(doc)


def paper_environment():
    """Bundled 6x4 reproduction with three robot types and five sensors.

    Start cells, slip, detection rate and prior are fixed; goal cells and
    sensor ranges are a reconstruction chosen to make sensing matter.
    """
    text = resources.files("activepercept").joinpath("data/bundled_gridworld.json").read_text()
    return GridWorldSpec.from_dict(json.loads(text))


def move_distribution(spec, cell, move):
    """Successor cells of ``move`` from ``cell`` under slip dynamics."""
    out = {}
    if move == "stay":
        return {cell: 1.0}
    branches = [(move, 1.0 - spec.slip_prob)]
    branches += [(m, spec.slip_prob / 2) for m in _LATERAL[move]]
    for m, p in branches:
        if p == 0.0:
            continue
        dx, dy = _DELTA[m]
        nxt = (cell[0] + dx, cell[1] + dy)
        if not spec.inside(nxt) or nxt in spec.walls:
            nxt = cell
        out[nxt] = out.get(nxt, 0.0) + p
    return out


def _move_matrices(spec):
    # P[m, c, c'] = probability of c -> c' under move m
    n = spec.num_cells
    p = np.zeros((len(MOVES), n, n))
    for c in range(n):
        cell = spec.cell_at(c)
        for m, move in enumerate(MOVES):
            if cell in spec.walls:
                p[m, c, c] = 1.0
                continue
            for nxt, prob in move_distribution(spec, cell, move).items():
                p[m, c, spec.cell_index(nxt)] += prob
    return p


@dataclass(frozen=True, eq=False)
class RobotPolicy:
    """Move chosen in every cell with the resulting goal-reaching probability."""

    moves: np.ndarray
    reach_prob: np.ndarray
    value: np.ndarray

    def move_at(self, spec, cell):
        return MOVES[self.moves[spec.cell_index(cell)]]


def _fixed_point(update, x, tol=1e-12, max_sweeps=100_000):
    for _ in range(max_sweeps):
        nxt = update(x)
        if np.max(np.abs(nxt - x)) < tol:
            return nxt
        x = nxt
    return x


def robot_policy(spec, type_index):
    """Goal-seeking moves of one robot type.

    Moves maximize the discounted probability of reaching the goal
    (``spec.discount``; 1.0 gives plain reachability, which ties often).
    Ties within 1e-12 go to the first move in ``MOVES``. ``reach_prob`` is
    the undiscounted probability of eventually reaching the goal under the
    chosen moves. The goal cell is absorbing.
    """
    robot = spec.robot_types[type_index]
    goal = spec.cell_index(robot.goal)
    p = _move_matrices(spec)
    gamma = spec.discount

    def bellman(v):
        q = gamma * (p @ v)
        out = q.max(axis=0)
        out[goal] = 1.0
        return out

    v0 = np.zeros(spec.num_cells)
    v0[goal] = 1.0
    value = _fixed_point(bellman, v0)
    q = gamma * (p @ value)
    best = q.max(axis=0)
    moves = np.argmax(q >= best[None, :] - 1e-12, axis=0)
    moves[goal] = MOVES.index("stay")
    for wall in spec.walls:
        moves[spec.cell_index(wall)] = MOVES.index("stay")

    chain = p[moves, np.arange(spec.num_cells)]

    def reach_update(x):
        out = chain @ x
        out[goal] = 1.0
        return out

    reach = _fixed_point(reach_update, v0)
    if reach[spec.cell_index(robot.start)] <= 0.0:
        raise CompileError(
            f"type {robot.name or type_index}: goal {robot.goal} is unreachable "
            f"from start {robot.start}")
    return RobotPolicy(moves, reach, value)


@dataclass(frozen=True, eq=False)
class CompiledEnvironment:
    hmm: Hmm
    spec: GridWorldSpec
    state_index: tuple
    robot_policies: tuple = field(default=())

    def state_of(self, type_index, cell):
        return type_index * self.spec.num_cells + self.spec.cell_index(cell)

    def initial_state(self, type_index):
        return self.state_of(type_index, self.spec.robot_types[type_index].start)

    def type_of(self, state):
        return self.state_index[state][0]

    def sidecar(self):
        return {
            "format": "cehmm-v1-states",
            "states": [{"id": i, "label": self.hmm.state_labels[i], "type": k,
                        "type_name": self.spec.robot_types[k].name, "cell": list(cell)}
                       for i, (k, cell) in enumerate(self.state_index)],
        }


def compile_gridworld(spec):
    """Build the controllable-emission HMM over (type, cell) states."""
    spec.validate()
    n_cells = spec.num_cells
    n_types = len(spec.robot_types)
    n = n_types * n_cells
    p = _move_matrices(spec)
    transition = np.zeros((n, n))
    policies = []
    state_index = []
    labels = []
    for k, robot in enumerate(spec.robot_types):
        pol = robot_policy(spec, k)
        policies.append(pol)
        block = p[pol.moves, np.arange(n_cells)]  # row = source cell
        off = k * n_cells
        transition[off:off + n_cells, off:off + n_cells] = block.T
        for c in range(n_cells):
            cell = spec.cell_at(c)
            state_index.append((k, cell))
            labels.append(f"{robot.name}@{cell[0]},{cell[1]}")

    observations = [s.id for s in spec.sensors] + [NULL_OBSERVATION]
    actions = [f"query_{s.id}" for s in spec.sensors]
    null = len(observations) - 1
    emissions = np.zeros((len(actions), len(observations), n))
    for i, sensor in enumerate(spec.sensors):
        covered = np.array([spec.cell_at(c) in sensor.cells for c in range(n_cells)])
        covered = np.tile(covered, n_types)
        emissions[i, i, covered] = spec.detection_prob
        emissions[i, null, covered] = 1.0 - spec.detection_prob
        emissions[i, null, ~covered] = 1.0

    mu0 = np.zeros(n)
    for k, robot in enumerate(spec.robot_types):
        mu0[k * n_cells + spec.cell_index(robot.start)] = spec.type_prior[k]

    hmm = Hmm(transition, emissions, mu0, observations=observations, actions=actions,
              state_labels=labels)
    return CompiledEnvironment(hmm, spec, tuple(state_index), tuple(policies))
