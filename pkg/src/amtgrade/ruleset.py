"""Composition rules for test pieces: a validator and a seeded generator.

Rule ids:
    1  tempo within the allowed BPM range
    2  meter in the allowed set
    3  onsets and offsets on the sixteenth-note grid
    4  no double-dotted durations or trills
    5  pitch within range
    6  velocity within the pp..ff band
    7  whitelisted instruments, at most three per piece
    8  at most one string instrument
"""
from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .midi import InstrumentTrack, Note, Piece, TempoMap, write_smf

PIANO, VIOLIN, VIOLA, CELLO = 0, 40, 41, 42
TROMBONE, OBOE, BASSOON, FLUTE = 57, 68, 70, 73

INSTRUMENT_NAMES = {
    PIANO: "piano", VIOLIN: "violin", VIOLA: "viola", CELLO: "cello",
    FLUTE: "flute", BASSOON: "bassoon", TROMBONE: "trombone", OBOE: "oboe",
}

# eight-level notation-software scale
DYNAMICS = {"ppp": 16, "pp": 33, "p": 49, "mp": 64, "mf": 80, "f": 96, "ff": 112, "fff": 127}

# written ranges, before intersecting with the rule's pitch range
INSTRUMENT_RANGES = {
    PIANO: (21, 108), VIOLIN: (55, 103), VIOLA: (48, 88), CELLO: (36, 81),
    FLUTE: (60, 96), BASSOON: (34, 75), TROMBONE: (40, 72), OBOE: (58, 91),
}

_NAME_RE = re.compile(r"^([A-Ga-g])(#{1,2}|b{1,2}|♯|♭)?(-?\d+)$")
_STEPS = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
_ACCIDENTALS = {None: 0, "#": 1, "##": 2, "♯": 1, "b": -1, "bb": -2, "♭": -1}


def note_name_to_midi(name: str) -> int:
    """Scientific pitch name to MIDI number, with middle C = C4 = 60."""
    m = _NAME_RE.match(name.strip())
    if not m:
        raise ValueError(f"cannot parse note name {name!r}")
    letter, accidental, octave = m.groups()
    number = 12 * (int(octave) + 1) + _STEPS[letter.upper()] + _ACCIDENTALS[accidental]
    if not 0 <= number <= 127:
        raise ValueError(f"{name!r} is outside the MIDI range")
    return number


@dataclass(frozen=True)
class Rules:
    tempo_range: tuple[float, float] = (60.0, 90.0)
    meters: frozenset = frozenset({(3, 4), (4, 4), (6, 8)})
    subdivision: int = 16  # smallest note value, as a fraction of a whole note
    pitch_range: tuple[int, int] = (36, 96)
    velocity_range: tuple[int, int] = (DYNAMICS["pp"], DYNAMICS["ff"])
    instruments: frozenset = frozenset(INSTRUMENT_NAMES)
    max_instruments: int = 3
    strings: frozenset = frozenset({VIOLIN, VIOLA, CELLO})
    max_strings: int = 1
    grid_slack_ticks: int = 1
    trill_min_notes: int = 6

    def __post_init__(self):
        for lo, hi in (self.tempo_range, self.pitch_range, self.velocity_range):
            if not lo < hi:
                raise ValueError("rule ranges must be non-degenerate")

    def grid_ticks(self, division: int) -> float:
        return division * 4 / self.subdivision


@dataclass(frozen=True)
class Violation:
    rule: int
    location: str
    message: str

    def to_json(self) -> dict:
        return {"rule": self.rule, "location": self.location, "message": self.message}


def _off_grid(tick: float, grid: float, slack: float) -> bool:
    r = tick % grid
    return min(r, grid - r) > slack + 1e-6


def _double_dotted(ticks: float, grid: float, slack: float) -> bool:
    # 7/4 of a power-of-two note value: 7, 14, 28 ... sixteenths
    units = ticks / grid
    k = 7.0
    while k <= units + 1:
        if abs(ticks - k * grid) <= slack + 1e-6:
            return True
        k *= 2
    return False


def _trill_runs(notes: Sequence[Note], is_short, min_len: int):
    """(start index, length) of runs of short, back-to-back notes alternating
    between two pitches one or two semitones apart."""

    def linked(i, start):
        a, b = notes[i - 1], notes[i]
        if not (is_short(a) and is_short(b) and 1 <= abs(a.pitch - b.pitch) <= 2):
            return False
        if abs(b.onset - a.offset) > 1e-6:
            return False
        return i - 2 < start or b.pitch == notes[i - 2].pitch

    runs, start = [], 0
    for i in range(1, len(notes) + 1):
        if i < len(notes) and linked(i, start):
            continue
        if i - start >= min_len:
            runs.append((start, i - start))
        start = i - 1 if i < len(notes) and linked(i, i - 1) else i
    return runs


def validate_piece(piece: Piece, rules: Rules = Rules()) -> list[Violation]:
    """Every rule violation in the piece; an empty list means compliant."""
    out: list[Violation] = []
    tm = piece.tempo_map
    lo, hi = rules.tempo_range
    for (tick, tempo), bpm in zip(tm.entries, tm.bpm_values()):
        if not lo - 0.01 <= bpm <= hi + 0.01:
            out.append(Violation(1, f"tempo@tick{tick}", f"tempo {bpm:.2f} BPM outside {lo:g}-{hi:g}"))
    for tick, num, den in piece.meters:
        if (num, den) not in rules.meters:
            out.append(Violation(2, f"meter@tick{tick}", f"meter {num}/{den} not allowed"))

    grid = rules.grid_ticks(piece.division)
    slack = rules.grid_slack_ticks
    programs = piece.programs
    for track in piece.tracks:
        p = track.program
        for idx, note in enumerate(track.notes):
            where = f"program{p}/note{idx}"
            on, off = tm.seconds_to_ticks(note.onset), tm.seconds_to_ticks(note.offset)
            if _off_grid(on, grid, slack) or _off_grid(off, grid, slack):
                out.append(Violation(3, where, f"note at ticks {on:.1f}-{off:.1f} is off the "
                                                f"1/{rules.subdivision} grid"))
            elif _double_dotted(off - on, grid, slack):
                out.append(Violation(4, where, f"double-dotted duration of {(off - on) / grid:g} "
                                                f"sixteenths"))
            if not rules.pitch_range[0] <= note.pitch <= rules.pitch_range[1]:
                out.append(Violation(5, where, f"pitch {note.pitch} outside {rules.pitch_range}"))
            if not rules.velocity_range[0] <= note.velocity <= rules.velocity_range[1]:
                out.append(Violation(6, where, f"velocity {note.velocity} outside {rules.velocity_range}"))

        def short(n, _tm=tm):
            return _tm.seconds_to_ticks(n.offset) - _tm.seconds_to_ticks(n.onset) <= grid + slack

        for start, length in _trill_runs(track.notes, short, rules.trill_min_notes):
            out.append(Violation(4, f"program{p}/note{start}", f"trill of {length} alternating notes"))

    for p in programs:
        if p not in rules.instruments:
            out.append(Violation(7, f"program{p}", f"program {p} is not an allowed instrument"))
    if len(programs) > rules.max_instruments:
        out.append(Violation(7, "global", f"{len(programs)} instruments, at most "
                                          f"{rules.max_instruments} allowed"))
    strings = [p for p in programs if p in rules.strings]
    if len(strings) > rules.max_strings:
        out.append(Violation(8, "global", f"{len(strings)} string instruments {strings}, at most "
                                          f"{rules.max_strings} allowed"))
    return out


# --------------------------------------------------------------------------
# generation

MAJOR = (0, 2, 4, 5, 7, 9, 11)
# sixteenths; 7 and 14 (double-dotted) are deliberately absent
DURATIONS = (1, 2, 2, 3, 4, 4, 4, 6, 8, 8, 12, 16)
DEFAULT_MIX = (6, 24, 46)


def instrument_range(program: int, rules: Rules = Rules()) -> tuple[int, int]:
    lo, hi = INSTRUMENT_RANGES.get(program, rules.pitch_range)
    return max(lo, rules.pitch_range[0]), min(hi, rules.pitch_range[1])


def _pick_instruments(rng: random.Random, count: int, rules: Rules) -> list[int]:
    pool = sorted(rules.instruments)
    strings = [p for p in pool if p in rules.strings]
    others = [p for p in pool if p not in rules.strings]
    n_strings = rng.randint(0, min(rules.max_strings, count, len(strings)))
    n_strings = max(n_strings, count - len(others))
    return sorted(rng.sample(strings, n_strings) + rng.sample(others, count - n_strings))


def _line(rng: random.Random, program: int, total: int, scale: list[int], rules: Rules):
    """One monophonic voice as (start, length, pitch, velocity) in sixteenths."""
    lo, hi = instrument_range(program, rules)
    pitches = [p for p in scale if lo <= p <= hi]
    pos = rng.choice([p for p in range(len(pitches))
                      if abs(pitches[p] - (lo + hi) // 2) <= 7] or [len(pitches) // 2])
    levels = [v for v in DYNAMICS.values() if rules.velocity_range[0] <= v <= rules.velocity_range[1]]
    velocity = rng.choice(levels)
    t = 0
    history: list[int] = []
    out = []
    while t < total:
        length = rng.choice([d for d in DURATIONS if d <= total - t])
        if rng.random() < 0.12:  # rest
            t += length
            continue
        for _ in range(8):
            step = rng.choice((-2, -1, -1, 0, 1, 1, 2, rng.randint(-4, 4)))
            cand = min(max(pos + step, 0), len(pitches) - 1)
            # never return to the pitch two notes back: rules out trills
            if len(history) < 2 or pitches[cand] != history[-2]:
                break
        else:
            cand = pos
        pos = cand
        if rng.random() < 0.1:
            velocity = rng.choice(levels)
        history.append(pitches[pos])
        out.append((t, length, pitches[pos], velocity))
        t += length
    return out


def generate_piece(seed: int, n_instruments: int = 1, duration: float = 20.0,
                   rules: Rules = Rules(), division: int = 480) -> Piece:
    """A rule-compliant piece of roughly ``duration`` seconds, fully determined by ``seed``."""
    if not 1 <= n_instruments <= rules.max_instruments:
        raise ValueError(f"instrument count must be 1-{rules.max_instruments}")
    if duration <= 0:
        raise ValueError("duration must be positive")
    if division % (rules.subdivision // 4):
        raise ValueError("division must be divisible into the subdivision grid")
    rng = random.Random(seed)
    lo_bpm, hi_bpm = rules.tempo_range
    bpm = rng.randint(int(-(-lo_bpm // 1)), int(hi_bpm))
    tempo = round(60_000_000 / bpm)
    meter = rng.choice(sorted(rules.meters))
    tm = TempoMap([(0, tempo)], division)

    grid = int(rules.grid_ticks(division))
    bar_sixteenths = meter[0] * rules.subdivision // meter[1]
    bar_seconds = tm.ticks_to_seconds(bar_sixteenths * grid)
    bars = max(1, round(duration / bar_seconds))
    total = bars * bar_sixteenths

    tonic = rng.randrange(12)
    scale = [p for p in range(rules.pitch_range[0], rules.pitch_range[1] + 1) if (p - tonic) % 12 in MAJOR]
    tracks = []
    for program in _pick_instruments(rng, n_instruments, rules):
        notes = [
            Note(pitch, tm.ticks_to_seconds(start * grid), tm.ticks_to_seconds((start + length) * grid), vel)
            for start, length, pitch, vel in _line(rng, program, total, scale, rules)
        ]
        tracks.append(InstrumentTrack(program, tuple(notes)))
    return Piece(tuple(tracks), tm, meter=meter)


def allocate(count: int, mix: Sequence[float]) -> list[int]:
    """Split ``count`` pieces across instrument counts 1..len(mix) by largest remainder."""
    if count < 1:
        raise ValueError("count must be at least 1")
    if any(w < 0 for w in mix) or sum(mix) <= 0:
        raise ValueError(f"unsatisfiable mix {tuple(mix)}")
    total = sum(mix)
    quotas = [count * w / total for w in mix]
    base = [int(q) for q in quotas]
    order = sorted(range(len(mix)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:count - sum(base)]:
        base[i] += 1
    return base


@dataclass
class GeneratedSet:
    seed: int
    pieces: dict[str, Piece] = field(default_factory=dict)

    def manifest(self) -> dict:
        entries = [
            {"id": pid, "file": f"{pid}.mid", "programs": list(p.programs), "instrument_count": len(p.programs)}
            for pid, p in self.pieces.items()
        ]
        counts: dict[str, int] = {}
        for e in entries:
            counts[str(e["instrument_count"])] = counts.get(str(e["instrument_count"]), 0) + 1
        return {"seed": self.seed, "count": len(entries), "instrument_counts": dict(sorted(counts.items())),
                "pieces": entries}

    def write(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for pid, piece in self.pieces.items():
            (directory / f"{pid}.mid").write_bytes(write_smf(piece))
        path = directory / "manifest.json"
        path.write_text(json.dumps(self.manifest(), indent=2) + "\n")
        return path


def generate_set(seed: int, count: int = 76, mix: Sequence[float] = DEFAULT_MIX,
                 rules: Rules = Rules(), duration: float = 20.0) -> GeneratedSet:
    if len(mix) > rules.max_instruments:
        raise ValueError(f"mix has {len(mix)} entries but pieces hold at most {rules.max_instruments} instruments")
    sizes = allocate(count, mix)
    rng = random.Random(seed)
    plan = [k + 1 for k, n in enumerate(sizes) for _ in range(n)]
    rng.shuffle(plan)
    out = GeneratedSet(seed)
    for index, n_instruments in enumerate(plan):
        piece_seed = rng.getrandbits(63)
        out.pieces[f"piece_{seed}_{index}"] = generate_piece(piece_seed, n_instruments, duration, rules)
    return out
