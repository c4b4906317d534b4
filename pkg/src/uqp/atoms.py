"""Neutral-atom preparation: synthetic imaging, detection, rearrangement planning, AWG moves."""

from __future__ import annotations

import json
import math
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

Site = tuple[int, int]


class AtomPipelineError(Exception):
    pass


class GeometryMismatch(AtomPipelineError):
    pass


class InsufficientAtoms(AtomPipelineError):
    pass


@dataclass(frozen=True)
class AtomImage:
    width: int
    height: int
    pixels: np.ndarray  # uint16, shape (height, width)

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width):
            raise GeometryMismatch(f"pixel array {self.pixels.shape} != ({self.height}, {self.width})")

    def to_pgm(self) -> bytes:
        """Binary 16-bit PGM (P5, big-endian samples)."""
        header = f"P5\n{self.width} {self.height}\n65535\n".encode()
        return header + self.pixels.astype(">u2").tobytes()

    @classmethod
    def from_pgm(cls, data: bytes) -> AtomImage:
        fields, pos = [], 0
        while len(fields) < 4:
            while data[pos:pos + 1].isspace():
                pos += 1
            if data[pos:pos + 1] == b"#":
                pos = data.index(b"\n", pos) + 1
                continue
            end = pos
            while end < len(data) and not data[end:end + 1].isspace():
                end += 1
            fields.append(data[pos:end])
            pos = end
        magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
        if magic != b"P5" or maxval != 65535:
            raise ValueError("expected a 16-bit binary PGM")
        pix = np.frombuffer(data, dtype=">u2", count=w * h, offset=pos + 1).reshape(h, w)
        return cls(w, h, pix.astype(np.uint16))


@dataclass(frozen=True)
class AtomGrid:
    rows: int
    cols: int
    occupancy: tuple[bool, ...]

    def __post_init__(self):
        if len(self.occupancy) != self.rows * self.cols:
            raise GeometryMismatch(f"{len(self.occupancy)} sites for a {self.rows}x{self.cols} grid")

    @classmethod
    def from_array(cls, arr) -> AtomGrid:
        arr = np.asarray(arr, dtype=bool)
        return cls(arr.shape[0], arr.shape[1], tuple(bool(x) for x in arr.ravel()))

    @classmethod
    def from_sites(cls, rows: int, cols: int, sites: Iterable[Site]) -> AtomGrid:
        occ = [False] * (rows * cols)
        for r, c in sites:
            occ[r * cols + c] = True
        return cls(rows, cols, tuple(occ))

    def as_array(self) -> np.ndarray:
        return np.array(self.occupancy, dtype=bool).reshape(self.rows, self.cols)

    def sites(self) -> list[Site]:
        return [divmod(i, self.cols) for i, occ in enumerate(self.occupancy) if occ]

    def __getitem__(self, site: Site) -> bool:
        r, c = site
        return self.occupancy[r * self.cols + c]

    @property
    def count(self) -> int:
        return sum(self.occupancy)


@dataclass(frozen=True)
class TargetPattern:
    sites: frozenset[Site]

    def check(self, rows: int, cols: int) -> None:
        for r, c in self.sites:
            if not (0 <= r < rows and 0 <= c < cols):
                raise GeometryMismatch(f"target site {(r, c)} outside a {rows}x{cols} grid")

    @classmethod
    def dense(cls, size: int, cols: int, rows: int | None = None) -> TargetPattern:
        """Top-left dense block: ``size`` sites filled row-major inside a square-ish rectangle."""
        width = min(cols, max(1, math.ceil(math.sqrt(size))))
        if rows:
            # widen the block when a short grid cannot hold it square
            width = min(cols, max(width, math.ceil(size / rows)))
        return cls(frozenset(divmod(i, width) for i in range(size)))

    @classmethod
    def parse(cls, text: str) -> TargetPattern:
        """Text grid: ``#`` marks a required site, ``.`` a free one."""
        sites = set()
        rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
        for r, line in enumerate(rows):
            for c, ch in enumerate(line):
                if ch == "#":
                    sites.add((r, c))
                elif ch != ".":
                    raise ValueError(f"unexpected character {ch!r} in target pattern")
        return cls(frozenset(sites))

    @classmethod
    def load(cls, path: str | Path) -> TargetPattern:
        return cls.parse(Path(path).read_text())

    def render(self, rows: int, cols: int) -> str:
        return "\n".join("".join("#" if (r, c) in self.sites else "." for c in range(cols))
                         for r in range(rows)) + "\n"


@dataclass(frozen=True)
class MoveCommand:
    src: Site
    dst: Site

    @property
    def distance(self) -> int:
        return abs(self.src[0] - self.dst[0]) + abs(self.src[1] - self.dst[1])


@dataclass(frozen=True)
class SortPlan:
    moves: tuple[MoveCommand, ...]

    @property
    def cost(self) -> int:
        return sum(m.distance for m in self.moves)

    def __len__(self) -> int:
        return len(self.moves)


def spot_sigma(pixels_per_cell: int) -> float:
    return pixels_per_cell / 5.0


def _spot(pixels_per_cell: int) -> np.ndarray:
    # Gaussian truncated to its own cell so neighbouring cells stay dark.
    centre = (pixels_per_cell - 1) / 2
    y, x = np.mgrid[0:pixels_per_cell, 0:pixels_per_cell]
    sigma = spot_sigma(pixels_per_cell)
    return np.exp(-((x - centre) ** 2 + (y - centre) ** 2) / (2 * sigma ** 2))


def integrated_signal(brightness: float, pixels_per_cell: int = 5) -> float:
    """Noiseless integrated brightness of one occupied cell (before quantization)."""
    return float(brightness * _spot(pixels_per_cell).sum())


def half_signal_threshold(brightness: float, pixels_per_cell: int = 5) -> float:
    return 0.5 * integrated_signal(brightness, pixels_per_cell)


def synth_image(grid: AtomGrid, brightness: float, noise_sd: float, seed: int | np.random.Generator = 0,
                pixels_per_cell: int = 5) -> AtomImage:
    """Render a fluorescence-like image: one truncated Gaussian spot per atom plus pixel noise."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p = pixels_per_cell
    occ = grid.as_array().astype(float)
    img = np.kron(occ, brightness * _spot(p))
    if noise_sd > 0:
        img = img + rng.normal(0.0, noise_sd, img.shape)
    pixels = np.clip(np.rint(img), 0, 65535).astype(np.uint16)
    return AtomImage(grid.cols * p, grid.rows * p, pixels)


def cell_sums(image: AtomImage, rows: int, cols: int) -> np.ndarray:
    if rows <= 0 or cols <= 0 or image.height % rows or image.width % cols:
        raise GeometryMismatch(f"{rows}x{cols} cells do not tile a {image.width}x{image.height} image")
    ph, pw = image.height // rows, image.width // cols
    return image.pixels.astype(np.int64).reshape(rows, ph, cols, pw).sum(axis=(1, 3))


def detect(image: AtomImage, geometry: tuple[int, int], threshold: float) -> AtomGrid:
    """Per-cell integration followed by a brightness threshold."""
    rows, cols = geometry
    return AtomGrid.from_array(cell_sums(image, rows, cols) > threshold)


def manhattan(a: Site, b: Site) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def plan_sort(grid: AtomGrid, target: TargetPattern) -> SortPlan:
    """Minimum-total-distance rearrangement of surplus atoms into vacant target sites.

    Atoms already on target sites stay put; keeping them never raises the optimum
    under a metric cost. Sources are non-target sites and destinations are vacant
    target sites, so no move can collide with another in any order; moves are
    emitted in row-major order of their destination.
    """
    target.check(grid.rows, grid.cols)
    if grid.count < len(target.sites):
        raise InsufficientAtoms(f"{grid.count} atoms cannot fill {len(target.sites)} target sites")
    vacant = sorted(s for s in target.sites if not grid[s])
    if not vacant:
        return SortPlan(())
    surplus = sorted(s for s in grid.sites() if s not in target.sites)
    cost = np.array([[manhattan(v, a) for a in surplus] for v in vacant], dtype=np.int64)
    rows, cols = linear_sum_assignment(cost)
    moves = sorted((MoveCommand(surplus[c], vacant[r]) for r, c in zip(rows, cols)),
                   key=lambda m: m.dst)
    return SortPlan(tuple(moves))


def apply_plan(grid: AtomGrid, plan: SortPlan) -> AtomGrid:
    """Execute moves in order; raises if a move picks from an empty site or drops onto an atom."""
    occ = list(grid.occupancy)
    for i, m in enumerate(plan.moves):
        s = m.src[0] * grid.cols + m.src[1]
        d = m.dst[0] * grid.cols + m.dst[1]
        if not occ[s]:
            raise AtomPipelineError(f"move {i} picks from empty site {m.src}")
        if occ[d]:
            raise AtomPipelineError(f"move {i} drops onto occupied site {m.dst}")
        occ[s], occ[d] = False, True
    return AtomGrid(grid.rows, grid.cols, tuple(occ))


# Placeholder acousto-optic frequency map: site index -> tone in MHz.
AOD_BASE_MHZ = 75.0
AOD_PITCH_MHZ = 0.5
RAMP_US_PER_SITE = 20.0


def emit_moves(plan: SortPlan) -> list[dict]:
    """One AWG command record per move, in plan order."""
    records = []
    for i, m in enumerate(plan.moves):
        (r0, c0), (r1, c1) = m.src, m.dst
        records.append({
            "index": i,
            "pickup": [r0, c0],
            "drop": [r1, c1],
            "ramp_x_mhz": [AOD_BASE_MHZ + AOD_PITCH_MHZ * c0, AOD_BASE_MHZ + AOD_PITCH_MHZ * c1],
            "ramp_y_mhz": [AOD_BASE_MHZ + AOD_PITCH_MHZ * r0, AOD_BASE_MHZ + AOD_PITCH_MHZ * r1],
            "duration_us": RAMP_US_PER_SITE * max(1, m.distance),
        })
    return records


def write_jsonl(records: Iterable[dict], path: str | Path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


@dataclass(frozen=True)
class AtomPrepConfig:
    """Parameters of the simulated loading and imaging setup."""

    rows: int = 0  # 0 = size from the qubit count
    cols: int = 0
    fill_probability: float = 0.6
    brightness: float = 5000.0
    noise_sd: float = 100.0
    pixels_per_cell: int = 5
    target: TargetPattern | None = None

    def geometry(self, num_qubits: int) -> tuple[int, int]:
        if self.rows and self.cols:
            return self.rows, self.cols
        # Roughly 3x more sites than needed so a 0.6 fill leaves ample surplus.
        side = max(4, math.ceil(math.sqrt(3 * max(num_qubits, 1))))
        return side, side

    def target_for(self, num_qubits: int) -> TargetPattern:
        rows, cols = self.geometry(num_qubits)
        target = self.target or TargetPattern.dense(num_qubits, cols, rows)
        target.check(rows, cols)
        return target


class AtomPrepUnit:
    """Stateful block driven by the four AtomPrep instructions within one shot."""

    def __init__(self, config: AtomPrepConfig, num_qubits: int):
        self.config = config
        self.rows, self.cols = config.geometry(num_qubits)
        self.target = config.target_for(num_qubits)
        self.threshold = half_signal_threshold(config.brightness, config.pixels_per_cell)
        self.reset()

    def reset(self) -> None:
        self.loaded: AtomGrid | None = None
        self.image: AtomImage | None = None
        self.grid: AtomGrid | None = None
        self.plan: SortPlan | None = None
        self.records: list[dict] | None = None
        self.final: AtomGrid | None = None

    def image_fetch(self, rng: np.random.Generator) -> None:
        c = self.config
        occ = rng.random((self.rows, self.cols)) < c.fill_probability
        self.loaded = AtomGrid.from_array(occ)
        self.image = synth_image(self.loaded, c.brightness, c.noise_sd, rng, c.pixels_per_cell)

    def atom_detect(self) -> None:
        if self.image is None:
            raise AtomPipelineError("AtomDetect before ImageFetch")
        self.grid = detect(self.image, (self.rows, self.cols), self.threshold)

    def atom_sort(self) -> None:
        if self.grid is None:
            raise AtomPipelineError("AtomSort before AtomDetect")
        self.plan = plan_sort(self.grid, self.target)

    def atom_move(self) -> None:
        if self.plan is None or self.grid is None:
            raise AtomPipelineError("AtomMove before AtomSort")
        self.records = emit_moves(self.plan)
        self.final = apply_plan(self.grid, self.plan)

    def log(self) -> dict:
        return {
            "grid": [self.rows, self.cols],
            "atoms_loaded": None if self.loaded is None else self.loaded.count,
            "atoms_detected": None if self.grid is None else self.grid.count,
            "target_sites": len(self.target.sites),
            "plan_size": None if self.plan is None else len(self.plan),
            "plan_cost": None if self.plan is None else self.plan.cost,
            "awg_records": self.records or [],
            "defect_free": None if self.final is None else all(self.final[s] for s in self.target.sites),
        }
