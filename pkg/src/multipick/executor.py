"""Five-phase pick-and-place trials and the full factorial experiment matrix.

A trial is a small behaviour tree: a sequence of the five phase actions under a
fallback that records the failure and aborts. Module errors raised inside a
trial never escape; they become ``SystemFailure`` records.
"""

from __future__ import annotations

import csv
import enum
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import arm as arm_mod
from . import gripper as gr
from . import scene as sc
from . import sensing
from .errors import CollisionRisk, IoFailure, MultipickError, OutOfRange, SchemaError
from .spatial import Pose, Wrench, quat_from_axis_angle, quat_multiply

PHASES = ("Initialisation", "Approach", "Grasping", "Transport", "Placement")
ALLOWED_ANGLES = (60, 75, 90)


class PickType(str, enum.Enum):
    SINGLE = "Single"
    MULTI = "Multi"


class GripperLayout(str, enum.Enum):
    PARALLEL = "Parallel"
    CONCENTRIC = "Concentric"

    @property
    def spread(self) -> float:
        return 0.0 if self is GripperLayout.PARALLEL else 1.0


class Outcome(str, enum.Enum):
    SUCCESS = "Success"
    GRASP_FAILURE = "GraspFailure"
    DROP_FAILURE = "DropFailure"
    SYSTEM_FAILURE = "SystemFailure"


@dataclass(frozen=True)
class ScenarioSpec:
    object_type: sc.ObjectType
    pick_type: PickType
    approach_angle: int
    gripper_config: GripperLayout
    repetition: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "object_type", sc.ObjectType(self.object_type))
        object.__setattr__(self, "pick_type", PickType(self.pick_type))
        object.__setattr__(self, "gripper_config", GripperLayout(self.gripper_config))
        if self.approach_angle not in ALLOWED_ANGLES:
            raise OutOfRange(f"approach angle must be one of {ALLOWED_ANGLES}, got {self.approach_angle}")
        if self.repetition < 1:
            raise OutOfRange("repetition counts from 1")

    @property
    def density(self) -> sc.Density:
        return sc.Density.SPARSE_SINGLE if self.pick_type is PickType.SINGLE else sc.Density.FULL

    @property
    def key(self) -> str:
        return (f"{self.object_type.value}-{self.pick_type.value}-{self.approach_angle}-"
                f"{self.gripper_config.value}")


@dataclass(frozen=True)
class TrialRecord:
    scenario: ScenarioSpec
    phase_durations: tuple
    outcome: Outcome
    items_captured: int = 0
    items_placed: int = 0
    wrench_trace: Optional[tuple] = None
    note: str = ""

    def __post_init__(self):
        durations = tuple(None if d is None else float(d) for d in self.phase_durations)
        if len(durations) != len(PHASES):
            raise ValueError("one duration slot per phase")
        object.__setattr__(self, "phase_durations", durations)
        object.__setattr__(self, "outcome", Outcome(self.outcome))
        if any(d is not None and d < 0 for d in durations):
            raise ValueError("phase durations must be non-negative")
        seen_gap = False
        for d in durations:
            if d is None:
                seen_gap = True
            elif seen_gap:
                raise ValueError("a phase cannot be recorded after an unrecorded one")
        if self.items_placed > self.items_captured:
            raise ValueError("cannot place more items than were captured")
        if self.outcome is Outcome.SUCCESS and self.items_placed < 1:
            raise ValueError("a successful trial places at least one item")
        if self.outcome is Outcome.GRASP_FAILURE and self.items_placed != 0:
            raise ValueError("a grasp failure places nothing")

    @property
    def active_time(self) -> float:
        return float(sum(d for d in self.phase_durations if d is not None))

    @property
    def reached_grasping(self) -> bool:
        return self.outcome is not Outcome.SYSTEM_FAILURE


@dataclass(frozen=True)
class TimingConfig:
    dt: float = 0.01
    init_move: float = 5.0
    init_overhead: float = 0.12
    approach_move: float = 10.0
    approach_overhead: float = 0.37
    transport_lift: float = 10.0
    transport_move: float = 10.0
    transport_overhead: float = 0.12
    descent_speed: float = 0.05
    max_descent: float = 0.6
    approach_height: float = 0.302
    finger_speed_deg_s: float = 300.0
    max_close_steps: int = 400
    path_samples: int = 10
    record_traces: bool = True

    def __post_init__(self):
        for name in ("dt", "init_move", "approach_move", "transport_lift", "transport_move",
                     "descent_speed", "max_descent", "approach_height", "finger_speed_deg_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("init_overhead", "approach_overhead", "transport_overhead"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def finger_speed(self) -> float:
        return math.radians(self.finger_speed_deg_s)


@dataclass(frozen=True)
class MatrixConfig:
    objects: tuple = ("Lime", "Pickle")
    picks: tuple = ("Single", "Multi")
    angles: tuple = (60, 75, 90)
    configs: tuple = ("Parallel", "Concentric")
    repetitions: int = 5

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(sc.ObjectType(o) for o in self.objects))
        object.__setattr__(self, "picks", tuple(PickType(p) for p in self.picks))
        object.__setattr__(self, "configs", tuple(GripperLayout(c) for c in self.configs))
        angles = tuple(int(a) for a in self.angles)
        for a in angles:
            if a not in ALLOWED_ANGLES:
                raise OutOfRange(f"approach angle {a} not in {ALLOWED_ANGLES}")
        object.__setattr__(self, "angles", angles)
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")

    @property
    def size(self) -> int:
        return len(self.objects) * len(self.picks) * len(self.angles) * len(self.configs) * self.repetitions


@dataclass(frozen=True)
class RunConfig:
    gripper: gr.GripperConfig = field(default_factory=gr.GripperConfig)
    impedance: arm_mod.ImpedanceParams = field(default_factory=arm_mod.ImpedanceParams)
    thresholds: sensing.DetectionThresholds = field(default_factory=sensing.DetectionThresholds)
    sensor: sensing.SensorModel = field(default_factory=sensing.SensorModel)
    scene: sc.SceneConfig = field(default_factory=sc.SceneConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)
    matrix: MatrixConfig = field(default_factory=MatrixConfig)
    master_seed: int = 2024
    output_dir: str = "results"
    jobs: int = 1
    reference_phase_total: Optional[float] = None  # externally quoted total to cross-check

    def __post_init__(self):
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")


# --- poses ---------------------------------------------------------------------

# gripper z (tool axis) pointing straight down
_DOWN = quat_from_axis_angle([1.0, 0.0, 0.0], math.pi)
HOME_POSITION = np.array([0.25, 0.35, 0.40])


def tool_orientation(approach_angle: float) -> np.ndarray:
    """Tool axis tilted from vertical by ``90 - approach_angle`` degrees (towards +x)."""
    tilt = math.radians(90.0 - approach_angle)
    return quat_multiply(quat_from_axis_angle([0.0, 1.0, 0.0], -tilt), _DOWN)


def palm_from_tcp(tcp: np.ndarray, orientation: np.ndarray, config: gr.GripperConfig) -> Pose:
    """Palm pose whose open-finger tip centre sits at ``tcp``."""
    pose = Pose(np.zeros(3), orientation)
    axis = pose.rotation[:, 2]
    return Pose(np.asarray(tcp) - config.linkage.finger_length * axis, orientation)


@dataclass(frozen=True)
class PhasePlan:
    """Waypoints (palm poses) and move durations for each phase."""

    waypoints: dict
    durations: dict
    spread: float
    descent_direction: np.ndarray
    descent_speed: float

    @property
    def phases(self) -> tuple:
        return PHASES


def build_plan(scenario: ScenarioSpec, scene: sc.Scene, config: RunConfig) -> PhasePlan:
    if scenario.approach_angle < 60:
        raise CollisionRisk(f"approach angle {scenario.approach_angle} deg would hit the crate")
    if not scene.crate.contains(scene.pick_pose.position):
        raise OutOfRange("pick pose lies outside the crate")
    t = config.timing
    g = config.gripper
    q_tool = tool_orientation(scenario.approach_angle)
    axis = Pose(np.zeros(3), q_tool).rotation[:, 2]
    target = scene.pick_pose.position
    approach = palm_from_tcp(target - t.approach_height * axis, q_tool, g)
    home = palm_from_tcp(HOME_POSITION, _DOWN, g)
    punnet = scene.punnet.pose.position
    place_tcp = np.array([punnet[0], punnet[1], punnet[2] + scene.punnet.height + 0.10])
    place = palm_from_tcp(place_tcp, _DOWN, g)
    waypoints = {
        "Initialisation": (home,),
        "Approach": (home, approach),
        "Grasping": (approach,),
        "Transport": (approach, place),
        "Placement": (place,),
    }
    durations = {
        "Initialisation": t.init_move,
        "Approach": t.approach_move,
        "Grasping": None,
        "Transport": (t.transport_lift, t.transport_move),
        "Placement": None,
    }
    return PhasePlan(waypoints, durations, scenario.gripper_config.spread, axis, t.descent_speed)


# --- behaviour tree ----------------------------------------------------------------


class Status(enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"


class Action:
    def __init__(self, name: str, fn: Callable[[dict], Status]):
        self.name = name
        self.fn = fn

    def tick(self, bb: dict) -> Status:
        return self.fn(bb)


class PhaseSequence:
    """Ticks children in order; stops at the first failure."""

    def __init__(self, name: str, children):
        self.name = name
        self.children = list(children)

    def tick(self, bb: dict) -> Status:
        for child in self.children:
            if child.tick(bb) is Status.FAILURE:
                return Status.FAILURE
        return Status.SUCCESS


class Fallback:
    """Ticks children in order; stops at the first success."""

    def __init__(self, name: str, children):
        self.name = name
        self.children = list(children)

    def tick(self, bb: dict) -> Status:
        for child in self.children:
            if child.tick(bb) is Status.SUCCESS:
                return Status.SUCCESS
        return Status.FAILURE


def _quantize(x: float) -> float:
    # matches the 9-significant-digit CSV encoding so in-process and re-read
    # records agree exactly
    return float(f"{x:.9g}")


class _Trial:
    """Blackboard-holding runner for one scenario."""

    def __init__(self, scenario: ScenarioSpec, config: RunConfig, scene: Optional[sc.Scene] = None):
        self.scenario = scenario
        self.config = config
        self.scene = scene
        self.durations: list = [None] * len(PHASES)
        self.outcome: Optional[Outcome] = None
        self.captured: list[int] = []
        self.placed = 0
        self.trace: list = []
        self.note = ""

    # phase actions ----------------------------------------------------------
    def initialisation(self, bb) -> Status:
        cfg = self.config
        if self.scene is None:
            spec = sc.PopulationSpec(self.scenario.object_type, self.scenario.density, self.scenario.seed)
            self.scene = sc.populate(spec, config=cfg.scene)
        self.plan = build_plan(self.scenario, self.scene, cfg)
        home = self.plan.waypoints["Initialisation"][0]
        self.arm = arm_mod.step(arm_mod.ArmState.at(home, 0.0), cfg.impedance, None, cfg.timing.init_move)
        self.durations[0] = cfg.timing.init_move + cfg.timing.init_overhead
        return Status.SUCCESS

    def approach(self, bb) -> Status:
        t = self.config.timing
        _, target = self.plan.waypoints["Approach"]
        self.arm = arm_mod.step(replace(self.arm, desired_pose=target), self.config.impedance, None, t.approach_move)
        self.gripper = gr.GripperState.open(self.plan.spread, target, self.config.gripper)
        self.durations[1] = t.approach_move + t.approach_overhead
        return Status.SUCCESS

    def grasping(self, bb) -> Status:
        cfg = self.config
        t = cfg.timing
        g = cfg.gripper
        scene = self.scene
        start = self.gripper.base_pose
        d = self.plan.descent_direction

        nominal = sc.first_obstruction(self.gripper, d, scene, g, cfg.scene)
        if not math.isfinite(nominal.travel):
            raise MultipickError("descent path never meets an obstruction")
        at_nominal = self.gripper.with_pose(start.translated(nominal.travel * d))
        insertion = sc.insertion_check(sc.footprint(at_nominal, g), scene, cfg.scene)
        blocked = [i for i, r in enumerate(insertion) if r is sc.Insertion.BLOCKED]
        hit = nominal
        if blocked:
            hit = sc.first_obstruction(self.gripper, d, scene, g, cfg.scene, blocked_fingers=blocked)

        surface = arm_mod.Obstruction(start.position + hit.travel * d, -d)
        lever = hit.point - (start.position + hit.travel * d)
        sensor = replace(cfg.sensor, seed=self.scenario.seed)
        n_max = int(math.ceil(t.max_descent / (t.descent_speed * t.dt)))
        begin = self.arm
        times, _, actual, force = arm_mod.straight_descent(
            begin, d, t.descent_speed, n_max, cfg.impedance, surface, t.dt)
        # the contact pushes back on the tool at the lever arm
        true = np.concatenate([force, np.cross(lever[None, :], -force)], axis=1)
        readings = sensing.sensed_wrenches(true, sensor, first_tick=1)
        detection = sensing.detect_in_arrays(times, readings, cfg.thresholds, t.dt)
        if detection is None:
            raise MultipickError("no contact detected within the maximum descent")
        k = detection.index
        if t.record_traces:
            self.trace = [(times[i] - begin.time, readings[i]) for i in range(k + 1)]
        descent_time = float(times[k] - begin.time)
        here = Pose(actual[k], start.orientation)
        self.arm = arm_mod.ArmState(here, here, float(times[k]), Wrench(force[k], true[k, 3:]))
        self.gripper = self.gripper.with_pose(here)

        scene = sc.push_aside(self.gripper, scene, g)
        self.scene = scene
        closed, contacts = gr.close_fingers(self.gripper, scene, t.max_close_steps, g)
        travel = max(f1.flexion - f0.flexion for f0, f1 in zip(self.gripper.fingers, closed.fingers))
        self.gripper = closed
        self.contacts = contacts
        self.durations[2] = descent_time + travel / t.finger_speed
        self.detection = detection
        if blocked:
            self.outcome = Outcome.GRASP_FAILURE
            self.note = f"fingers {blocked} blocked by rigid items"
            return Status.FAILURE
        self.captured = sc.capture_set(closed, scene, contacts, g, cfg.scene)
        if not self.captured:
            self.outcome = Outcome.GRASP_FAILURE
            self.note = "no item held after closing"
            return Status.FAILURE
        return Status.SUCCESS

    def transport(self, bb) -> Status:
        cfg = self.config
        t = cfg.timing
        grasp_pose = self.gripper.base_pose
        above, place = self.plan.waypoints["Transport"]
        n = cfg.timing.path_samples
        path = [arm_mod.interpolate_pose(grasp_pose, above, 1.0, u) for u in np.linspace(0, 1, n)]
        path += [arm_mod.interpolate_pose(above, place, 1.0, u) for u in np.linspace(0, 1, n)[1:]]
        self.arm = arm_mod.step(replace(self.arm, desired_pose=above), cfg.impedance, None, t.transport_lift)
        self.arm = arm_mod.step(replace(self.arm, desired_pose=place), cfg.impedance, None, t.transport_move)
        polygon = sc.grasp_polygon(self.gripper, cfg.gripper, whole_fingers=True)
        items = [self.scene.item(i) for i in self.captured]
        self.retention = sc.retention_check(items, polygon, path, self.scenario.seed,
                                            punnet_index=len(path) - 1, config=cfg.scene)
        self.durations[3] = t.transport_lift + t.transport_move + t.transport_overhead
        return Status.SUCCESS

    def placement(self, bb) -> Status:
        g = self.config.gripper
        opening = max(f.flexion - g.flexion_min for f in self.gripper.fingers)
        self.durations[4] = opening / self.config.timing.finger_speed
        self.placed = len(self.retention.placed)
        if self.placed == 0:
            self.outcome = Outcome.DROP_FAILURE
            self.note = f"items {list(self.retention.dropped_outside)} dropped outside the punnet"
            return Status.FAILURE
        self.outcome = Outcome.SUCCESS
        if self.retention.dropped_outside:
            self.note = f"items {list(self.retention.dropped_outside)} dropped outside the punnet"
        return Status.SUCCESS

    def record_failure(self, bb) -> Status:
        return Status.FAILURE

    def tree(self):
        return Fallback("trial", [
            PhaseSequence("pick_and_place", [
                Action("Initialisation", self.initialisation),
                Action("Approach", self.approach),
                Action("Grasping", self.grasping),
                Action("Transport", self.transport),
                Action("Placement", self.placement),
            ]),
            Action("record_failure", self.record_failure),
        ])

    def run(self) -> TrialRecord:
        try:
            self.tree().tick({})
        except (MultipickError, ValueError, ArithmeticError) as exc:
            return TrialRecord(self.scenario, (None,) * len(PHASES), Outcome.SYSTEM_FAILURE,
                               note=f"{type(exc).__name__}: {exc}")
        durations = tuple(None if d is None else _quantize(d) for d in self.durations)
        trace = None
        if self.config.timing.record_traces:
            trace = tuple((_quantize(tm), tuple(_quantize(v) for v in w)) for tm, w in self.trace)
        return TrialRecord(self.scenario, durations, self.outcome, len(self.captured), self.placed,
                           trace, self.note)


def run_trial(scenario: ScenarioSpec, config: RunConfig = RunConfig(),
              scene: Optional[sc.Scene] = None) -> TrialRecord:
    """Execute one pick-and-place trial; deterministic per ``(scenario, config)``.

    Passing ``scene`` replays a stored scene instead of populating a new one.
    """
    return _Trial(scenario, config, scene).run()


def scenario_seed(master_seed: int, object_type, pick_type, angle: int, layout, repetition: int) -> int:
    """Per-trial seed tied to the scenario's identity, not its position in a run."""
    key = [
        int(master_seed) & 0xFFFFFFFF,
        list(sc.ObjectType).index(sc.ObjectType(object_type)),
        list(PickType).index(PickType(pick_type)),
        int(angle),
        list(GripperLayout).index(GripperLayout(layout)),
        int(repetition),
    ]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


def build_matrix(matrix: MatrixConfig, master_seed: int) -> list[ScenarioSpec]:
    out = []
    for obj, pick, angle, layout in itertools.product(matrix.objects, matrix.picks, matrix.angles, matrix.configs):
        for rep in range(1, matrix.repetitions + 1):
            out.append(ScenarioSpec(obj, pick, angle, layout, rep,
                                    scenario_seed(master_seed, obj, pick, angle, layout, rep)))
    return out


def _run_one(args) -> TrialRecord:
    scenario, config = args
    return run_trial(scenario, config)


def run_matrix(matrix: Optional[MatrixConfig] = None, config: RunConfig = RunConfig(),
               jobs: Optional[int] = None, scenarios: Optional[Sequence[ScenarioSpec]] = None) -> list[TrialRecord]:
    """Run every scenario of the factorial (or the given list) in stable order.

    Results are ordered by scenario, whatever the worker count.
    """
    if scenarios is None:
        scenarios = build_matrix(matrix or config.matrix, config.master_seed)
    jobs = config.jobs if jobs is None else jobs
    work = [(s, config) for s in scenarios]
    if jobs <= 1 or len(work) <= 1:
        return [_run_one(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, work, chunksize=max(1, len(work) // (4 * jobs))))


# --- record I/O ------------------------------------------------------------------

RECORD_COLUMNS = (
    "object_type", "pick_type", "approach_angle", "gripper_config", "repetition", "seed",
    "t_initialisation", "t_approach", "t_grasping", "t_transport", "t_placement",
    "outcome", "items_captured", "items_placed", "note",
)


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.9g}"


def _scenario_dict(s: ScenarioSpec) -> dict:
    return {"object_type": s.object_type.value, "pick_type": s.pick_type.value,
            "approach_angle": s.approach_angle, "gripper_config": s.gripper_config.value,
            "repetition": s.repetition, "seed": s.seed}


def record_to_dict(record: TrialRecord, include_trace: bool = True) -> dict:
    d = {
        "scenario": _scenario_dict(record.scenario),
        "phase_durations": list(record.phase_durations),
        "outcome": record.outcome.value,
        "items_captured": record.items_captured,
        "items_placed": record.items_placed,
        "note": record.note,
    }
    if include_trace:
        d["wrench_trace"] = None if record.wrench_trace is None else [
            [t, list(w)] for t, w in record.wrench_trace]
    return d


def record_from_dict(d: dict) -> TrialRecord:
    trace = d.get("wrench_trace")
    if trace is not None:
        trace = tuple((float(t), tuple(float(v) for v in w)) for t, w in trace)
    return TrialRecord(ScenarioSpec(**d["scenario"]), tuple(d["phase_durations"]), Outcome(d["outcome"]),
                       int(d["items_captured"]), int(d["items_placed"]), trace, d.get("note", ""))


def write_records_csv(records: Sequence[TrialRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            s = _scenario_dict(r.scenario)
            w.writerow([s["object_type"], s["pick_type"], s["approach_angle"], s["gripper_config"],
                        s["repetition"], s["seed"], *(_fmt(x) for x in r.phase_durations),
                        r.outcome.value, r.items_captured, r.items_placed, r.note])


def read_records_csv(path) -> list[TrialRecord]:
    """Parse a trial CSV written by :func:`write_records_csv` (traces are not kept)."""
    out = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        missing = [c for c in RECORD_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        for n, row in enumerate(reader, start=2):
            try:
                scenario = ScenarioSpec(row["object_type"], row["pick_type"], int(row["approach_angle"]),
                                        row["gripper_config"], int(row["repetition"]), int(row["seed"]))
                durations = tuple(None if row[c] == "" else float(row[c]) for c in RECORD_COLUMNS[6:11])
                out.append(TrialRecord(scenario, durations, Outcome(row["outcome"]),
                                       int(row["items_captured"]), int(row["items_placed"]),
                                       None, row["note"] or ""))
            except (ValueError, KeyError, TypeError) as exc:
                raise SchemaError(f"{path}, line {n}: {exc}") from exc
    return out


def write_records_json(records: Sequence[TrialRecord], path) -> None:
    payload = [record_to_dict(r) for r in records]
    with open(path, "w") as fh:
        json.dump(payload, fh, separators=(",", ":"))
        fh.write("\n")


def read_records_json(path) -> list[TrialRecord]:
    with open(path) as fh:
        return [record_from_dict(d) for d in json.load(fh)]
