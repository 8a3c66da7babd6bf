"""Lattice of cell state machines.

Each cell carries an LED bank (5 PWM channels + 4 digital side LEDs), a hall
receiver, four LDR receivers facing its von Neumann neighbors, and one loaded
firmware program. Ticks are synchronous: every program runs against the
receiver snapshot taken at the top of the tick, so evaluation order never
matters and trials are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Callable, NamedTuple, Optional

INTENSITY_MAX = 100

# PWM channel indices: one center LED, four corner LEDs.
CENTER, NE, NW, SE, SW = range(5)
PWM_CHANNELS = 5


class Side(IntEnum):
    """Von Neumann directions, in the fixed N, E, S, W order."""

    N = 0
    E = 1
    S = 2
    W = 3

    @property
    def opposite(self) -> "Side":
        return _OPPOSITE[self]

    @property
    def delta(self) -> tuple[int, int]:
        """(drow, dcol) toward this side; row 0 is the north edge."""
        return _DELTA[self]


_OPPOSITE = {Side.N: Side.S, Side.S: Side.N, Side.E: Side.W, Side.W: Side.E}
_DELTA = {Side.N: (-1, 0), Side.E: (0, 1), Side.S: (1, 0), Side.W: (0, -1)}


class CellId(NamedTuple):
    row: int
    col: int


class GridError(Exception):
    """Base error for lattice operations."""


class GridConstructionError(GridError):
    pass


class GridLookupError(GridError):
    pass


class IntensityError(GridError):
    pass


def check_intensity(value) -> int:
    """Validate a PWM duty percentage (integer 0..100)."""
    if isinstance(value, bool) or not isinstance(value, int):
        raise IntensityError(f"intensity must be an integer, got {value!r}")
    if not 0 <= value <= INTENSITY_MAX:
        raise IntensityError(f"intensity {value} outside 0..{INTENSITY_MAX}")
    return value


@dataclass(slots=True)
class LedBank:
    """Actuator state: pwm[CENTER, NE, NW, SE, SW] and side[N, E, S, W]."""

    pwm: list[int] = field(default_factory=lambda: [0] * PWM_CHANNELS)
    side: list[bool] = field(default_factory=lambda: [False] * 4)

    @classmethod
    def dark(cls) -> "LedBank":
        return cls()

    @classmethod
    def uniform(cls, level: int, sides_on: bool = False) -> "LedBank":
        return cls([level] * PWM_CHANNELS, [sides_on] * 4)

    def copy(self) -> "LedBank":
        return LedBank(list(self.pwm), list(self.side))

    def analog_level(self) -> int:
        """Brightest PWM channel; what a neighbor's LDR sees on the analog path."""
        return max(self.pwm)

    def is_dark(self) -> bool:
        return not any(self.pwm) and not any(self.side)

    def total(self) -> int:
        return sum(self.pwm)


class ProgramKind(str, Enum):
    INERT = "inert"
    STATIC_INTENSITY = "static_intensity"
    VIRTUAL_WALL = "virtual_wall"
    TRANSPORT_CONTROLLER = "transport_controller"
    SHEPHERD_RESPONDER = "shepherd_responder"
    PHEROMONE_CA = "pheromone_ca"


# Kinds whose output never changes once applied (pure fixed points); a grid of
# only these can skip re-evaluation after the first tick.
STATIC_KINDS = frozenset(
    {ProgramKind.INERT, ProgramKind.STATIC_INTENSITY, ProgramKind.VIRTUAL_WALL}
)

# Kinds that read the hall receiver; a grid without them never needs hall
# refreshes from the physical layer.
HALL_KINDS = frozenset(
    {
        ProgramKind.TRANSPORT_CONTROLLER,
        ProgramKind.SHEPHERD_RESPONDER,
        ProgramKind.PHEROMONE_CA,
    }
)


@dataclass
class CellProgram:
    kind: ProgramKind
    params: dict = field(default_factory=dict)

    def copy(self) -> "CellProgram":
        return CellProgram(self.kind, dict(self.params))


INERT = CellProgram(ProgramKind.INERT)


@dataclass(slots=True)
class Receivers:
    """One cell's sensor snapshot at the top of a tick.

    ldr is the scalar each LDR perceives from the facing neighbor (max of the
    neighbor's PWM channels, saturated to 100 when the facing digital side LED
    is on). ldr_analog carries the PWM-only part, ldr_digital the facing side
    bit; the two hardware channels stay distinct for programs that need them.
    """

    hall: float = 0.0
    ldr: list[int] = field(default_factory=lambda: [0] * 4)
    ldr_analog: list[int] = field(default_factory=lambda: [0] * 4)
    ldr_digital: list[bool] = field(default_factory=lambda: [False] * 4)


@dataclass
class Cell:
    id: CellId
    leds: LedBank = field(default_factory=LedBank)
    hall: float = 0.0
    ldr: list[int] = field(default_factory=lambda: [0] * 4)
    program: CellProgram = field(default_factory=lambda: INERT.copy())
    program_state: dict = field(default_factory=dict)
    fault: Optional[str] = None


def broadcast_brightness(cell: Cell, toward: Optional[Side] = None) -> int:
    """Scalar brightness a reader on side `toward` perceives from this cell.

    Max of the center and corner PWM channels; the digital side LED facing the
    reader saturates the reading to 100.
    """
    level = cell.leds.analog_level()
    if toward is not None and cell.leds.side[toward]:
        return INTENSITY_MAX
    return level


# --- cell firmware programs ------------------------------------------------
# Each update is a pure function (cell, receivers) -> LedBank or None, where
# None means "leave the bank as it is" (the inert identity).


def _update_inert(cell: Cell, rx: Receivers) -> Optional[LedBank]:
    return None


def _update_static_intensity(cell: Cell, rx: Receivers) -> LedBank:
    bank = LedBank.dark()
    bank.pwm[CENTER] = check_intensity(cell.program.params.get("intensity", 0))
    return bank


def _update_virtual_wall(cell: Cell, rx: Receivers) -> LedBank:
    bank = LedBank.dark()
    bank.pwm[CENTER] = INTENSITY_MAX
    return bank


def _update_shepherd_responder(cell: Cell, rx: Receivers) -> LedBank:
    threshold = float(cell.program.params.get("hall_threshold", 0.5))
    if rx.hall >= threshold:
        return LedBank([INTENSITY_MAX] * PWM_CHANNELS, [False] * 4)
    return LedBank.dark()


def _update_transport_controller(cell: Cell, rx: Receivers) -> LedBank:
    threshold = float(cell.program.params.get("hall_threshold", 0.5))
    if rx.hall >= threshold:
        # Occupied: dark PWM, all side LEDs signal occupancy to the flanks.
        return LedBank([0] * PWM_CHANNELS, [True] * 4)
    if rx.ldr_digital[Side.E] and rx.ldr_digital[Side.W]:
        # Empty cell flanked by occupied neighbors: light up as the object.
        return LedBank([INTENSITY_MAX] * PWM_CHANNELS, [False] * 4)
    return LedBank.dark()


def pheromone_ca_update(cell: Cell, rx: Receivers) -> LedBank:
    """One synchronous pheromone step for a single cell.

    A hall hit (robot/magnet overhead) saturates all 9 LEDs. Otherwise the
    cell relaxes toward the brightest analog neighbor minus the evaporation
    step; side LEDs mark any nonzero trail.
    """
    params = cell.program.params
    threshold = float(params.get("hall_threshold", 0.5))
    decay = check_intensity(params.get("decay", 20))
    if rx.hall >= threshold:
        return LedBank.uniform(INTENSITY_MAX, sides_on=True)
    level = max(0, max(rx.ldr_analog) - decay)
    return LedBank.uniform(level, sides_on=level > 0)


# Spec-facing aliases for the two controller programs.
transport_controller_update = _update_transport_controller
shepherd_responder_update = _update_shepherd_responder

_PROGRAM_TABLE: dict[ProgramKind, Callable[[Cell, Receivers], Optional[LedBank]]] = {
    ProgramKind.INERT: _update_inert,
    ProgramKind.STATIC_INTENSITY: _update_static_intensity,
    ProgramKind.VIRTUAL_WALL: _update_virtual_wall,
    ProgramKind.SHEPHERD_RESPONDER: _update_shepherd_responder,
    ProgramKind.TRANSPORT_CONTROLLER: _update_transport_controller,
    ProgramKind.PHEROMONE_CA: pheromone_ca_update,
}


class Grid:
    """rows x cols lattice of cells with von Neumann adjacency."""

    def __init__(self, rows: int, cols: int, default_program: Optional[CellProgram] = None,
                 phase_jitter: float = 0.0):
        if rows < 1 or cols < 1:
            raise GridConstructionError(f"grid dimensions must be >= 1, got {rows}x{cols}")
        if not 0.0 <= phase_jitter < 1.0:
            raise GridConstructionError(f"phase_jitter must be in [0, 1), got {phase_jitter}")
        self.rows = rows
        self.cols = cols
        self.phase_jitter = phase_jitter
        prog = default_program if default_program is not None else INERT
        self.cells: list[list[Cell]] = [
            [Cell(CellId(r, c), program=prog.copy()) for c in range(cols)]
            for r in range(rows)
        ]
        self._settled = False  # True once a static-only grid has been applied

    # -- lookup ---------------------------------------------------------

    def __contains__(self, cid) -> bool:
        r, c = cid
        return 0 <= r < self.rows and 0 <= c < self.cols

    def cell(self, cid) -> Cell:
        if cid not in self:
            raise GridLookupError(f"cell {tuple(cid)} outside {self.rows}x{self.cols} grid")
        return self.cells[cid[0]][cid[1]]

    def all_cells(self):
        for row in self.cells:
            yield from row

    def neighbors(self, cid) -> list[tuple[Side, CellId]]:
        """In-grid orthogonal neighbors tagged with their side, in N, E, S, W order."""
        if cid not in self:
            raise GridLookupError(f"cell {tuple(cid)} outside {self.rows}x{self.cols} grid")
        r, c = cid
        out = []
        for side in Side:
            dr, dc = side.delta
            nid = CellId(r + dr, c + dc)
            if nid in self:
                out.append((side, nid))
        return out

    # -- mutation ---------------------------------------------------------

    def set_center_intensity(self, cid, value: int) -> "Grid":
        cell = self.cell(cid)
        cell.leds.pwm[CENTER] = check_intensity(value)
        self._settled = False
        return self

    def set_program(self, cid, program: CellProgram) -> "Grid":
        cell = self.cell(cid)
        cell.program = program.copy()
        cell.program_state = {}
        cell.fault = None
        self._settled = False
        return self

    def set_hall(self, cid, level: float) -> "Grid":
        self.cell(cid).hall = float(level)
        return self

    # -- stepping ---------------------------------------------------------

    @property
    def settled(self) -> bool:
        """True once a static-only grid has applied its programs; further
        step_cells calls are identities and are skipped."""
        return self._settled

    @property
    def all_static(self) -> bool:
        return all(cell.program.kind in STATIC_KINDS for cell in self.all_cells())

    @property
    def reads_hall(self) -> bool:
        return any(cell.program.kind in HALL_KINDS for cell in self.all_cells())

    def snapshot_receivers(self, cid) -> Receivers:
        """Receiver values cell `cid` perceives from the current LED banks."""
        cell = self.cell(cid)
        rx = Receivers(hall=cell.hall)
        r, c = cid
        for side in Side:
            dr, dc = side.delta
            nr, nc = r + dr, c + dc
            if 0 <= nr < self.rows and 0 <= nc < self.cols:
                nb = self.cells[nr][nc].leds
                analog = max(nb.pwm)
                digital = nb.side[side.opposite]
                rx.ldr_analog[side] = analog
                rx.ldr_digital[side] = digital
                rx.ldr[side] = INTENSITY_MAX if digital else analog
        return rx

    def step_cells(self, rng=None, order: Optional[list[CellId]] = None) -> "Grid":
        """Run every cell's program once against the tick-start snapshot.

        A faulting program records the fault and leaves the cell inert and
        dark; the rest of the grid continues. `order` only exists so tests can
        verify evaluation-order independence.
        """
        if self._settled:
            return self
        ids = order if order is not None else [cell.id for cell in self.all_cells()]
        snapshots = {cid: self.snapshot_receivers(cid) for cid in ids}
        updates: list[tuple[Cell, Optional[LedBank]]] = []
        for cid in ids:
            cell = self.cell(cid)
            if self.phase_jitter and rng is not None and rng.random() < self.phase_jitter:
                continue  # this cell skips the tick (hardware-like asynchrony)
            try:
                bank = _PROGRAM_TABLE[cell.program.kind](cell, snapshots[cid])
            except Exception as exc:  # per-cell fault, simulation continues
                cell.fault = f"{type(exc).__name__}: {exc}"
                cell.program = INERT.copy()
                bank = LedBank.dark()
            updates.append((cell, bank))
        for cid in ids:
            self.cell(cid).ldr = list(snapshots[cid].ldr)
        for cell, bank in updates:
            if bank is not None:
                cell.leds = bank
        if not self.phase_jitter and self.all_static:
            self._settled = True
        return self

    # -- aggregates ---------------------------------------------------------

    def total_brightness(self) -> int:
        """Sum of every PWM channel over the grid."""
        return sum(cell.leds.total() for cell in self.all_cells())

    def lit_cells(self) -> set[CellId]:
        return {cell.id for cell in self.all_cells() if cell.leds.analog_level() > 0}

    def center_intensity(self, cid) -> int:
        return self.cell(cid).leds.pwm[CENTER]


def build_grid(rows: int, cols: int, default_program: Optional[CellProgram] = None) -> Grid:
    """Construct a dark rows x cols lattice with every cell running `default_program`."""
    return Grid(rows, cols, default_program)


def neighbors(grid: Grid, cid) -> list[tuple[Side, CellId]]:
    return grid.neighbors(cid)


def set_center_intensity(grid: Grid, cid, value: int) -> Grid:
    return grid.set_center_intensity(cid, value)


def step_cells(grid: Grid, rng=None) -> Grid:
    return grid.step_cells(rng)
