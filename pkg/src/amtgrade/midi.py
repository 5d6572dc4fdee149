"""Standard MIDI File reading and writing for the note-level domain model.

Only what grading needs survives parsing: notes (resolved to seconds through
the tempo map), the GM program that governs each note's channel, tempo and
time signature.  Everything else in the file is parsed and skipped.
"""
from __future__ import annotations

import bisect
import struct
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

DEFAULT_TEMPO = 500_000  # microseconds per quarter note, i.e. 120 BPM
DEFAULT_DIVISION = 480
PERCUSSION_CHANNEL = 9


class MidiError(ValueError):
    """Base class for MIDI errors."""


class ParseError(MidiError):
    """Malformed SMF data. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class CapacityError(MidiError):
    """The piece needs more melodic channels than a MIDI file provides."""


@dataclass(frozen=True)
class Note:
    pitch: int
    onset: float
    offset: float
    velocity: int = 100

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside 0-127")
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity {self.velocity} outside 1-127")
        if self.onset < 0:
            raise ValueError(f"negative onset {self.onset}")
        if not self.offset > self.onset:
            raise ValueError(f"offset {self.offset} not after onset {self.onset}")

    @property
    def duration(self) -> float:
        return self.offset - self.onset

    def sort_key(self):
        return (self.onset, self.pitch, self.offset, self.velocity)


@dataclass(frozen=True)
class InstrumentTrack:
    program: int
    notes: tuple[Note, ...] = ()

    def __post_init__(self):
        if not 0 <= self.program <= 127:
            raise ValueError(f"program {self.program} outside 0-127")
        object.__setattr__(self, "notes", tuple(sorted(self.notes, key=Note.sort_key)))


class TempoMap:
    """Piecewise-constant tempo over ticks.

    ``entries`` are ``(tick, microseconds_per_quarter)`` pairs.  A default
    120 BPM entry is inserted at tick 0 when the first change comes later.
    """

    def __init__(self, entries: Iterable[tuple[int, int]] = (), division: int = DEFAULT_DIVISION):
        if division <= 0:
            raise ValueError("division must be positive")
        merged: dict[int, int] = {}
        for tick, tempo in entries:
            if tick < 0 or tempo <= 0:
                raise ValueError(f"bad tempo entry ({tick}, {tempo})")
            merged[int(tick)] = int(tempo)  # later entry at the same tick wins
        if 0 not in merged:
            merged[0] = DEFAULT_TEMPO
        self.entries: tuple[tuple[int, int], ...] = tuple(sorted(merged.items()))
        self.division = int(division)
        self._ticks = [t for t, _ in self.entries]
        # seconds elapsed at the start of each segment
        self._starts = [0.0]
        for (t0, tempo), (t1, _) in zip(self.entries, self.entries[1:]):
            self._starts.append(self._starts[-1] + self._span(t1 - t0, tempo))

    def _span(self, ticks: float, tempo: int) -> float:
        return ticks * tempo / (self.division * 1_000_000)

    def ticks_to_seconds(self, tick: float) -> float:
        if tick < 0:
            raise ValueError("tick must be non-negative")
        i = bisect.bisect_right(self._ticks, tick) - 1
        t0, tempo = self.entries[i]
        if tick == t0:
            return self._starts[i]
        return self._starts[i] + self._span(tick - t0, tempo)

    def seconds_to_ticks(self, seconds: float) -> float:
        """Inverse of :meth:`ticks_to_seconds`; the result is not rounded."""
        if seconds < 0:
            raise ValueError("seconds must be non-negative")
        i = bisect.bisect_right(self._starts, seconds) - 1
        t0, tempo = self.entries[i]
        return t0 + (seconds - self._starts[i]) * self.division * 1_000_000 / tempo

    def bpm_values(self) -> list[float]:
        return [60_000_000 / tempo for _, tempo in self.entries]

    def __eq__(self, other):
        if not isinstance(other, TempoMap):
            return NotImplemented
        return self.entries == other.entries and self.division == other.division

    def __hash__(self):
        return hash((self.entries, self.division))

    def __repr__(self):
        return f"TempoMap({list(self.entries)!r}, division={self.division})"


def ticks_to_seconds(tempo_map: TempoMap, tick: float) -> float:
    return tempo_map.ticks_to_seconds(tick)


@dataclass(frozen=True)
class Piece:
    tracks: tuple[InstrumentTrack, ...] = ()
    tempo_map: TempoMap = field(default_factory=TempoMap)
    meter: tuple[int, int] = (4, 4)
    # every time signature seen, as (tick, numerator, denominator)
    meters: tuple[tuple[int, int, int], ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        tracks = tuple(sorted(self.tracks, key=lambda t: t.program))
        programs = [t.program for t in tracks]
        if len(set(programs)) != len(programs):
            raise ValueError(f"duplicate program in tracks: {programs}")
        object.__setattr__(self, "tracks", tracks)
        if not self.meters:
            object.__setattr__(self, "meters", ((0, *self.meter),))

    @property
    def division(self) -> int:
        return self.tempo_map.division

    @property
    def programs(self) -> tuple[int, ...]:
        return tuple(t.program for t in self.tracks)

    def track(self, program: int) -> InstrumentTrack | None:
        for t in self.tracks:
            if t.program == program:
                return t
        return None

    def notes_by_program(self) -> dict[int, tuple[Note, ...]]:
        return {t.program: t.notes for t in self.tracks}

    def window(self, start: float, end: float) -> "Piece":
        """Copy holding only the notes whose onset falls in ``[start, end)``."""
        tracks = tuple(
            InstrumentTrack(t.program, tuple(n for n in t.notes if start <= n.onset < end))
            for t in self.tracks
        )
        return replace(self, tracks=tuple(t for t in tracks if t.notes))

    @property
    def end_time(self) -> float:
        return max((n.offset for t in self.tracks for n in t.notes), default=0.0)


def piece_notes(piece: Piece) -> dict[int, tuple[Note, ...]]:
    """Non-empty note lists keyed by program; the round-trip comparison key."""
    return {t.program: t.notes for t in piece.tracks if t.notes}


# --------------------------------------------------------------------------
# reading


class _Reader:
    def __init__(self, data: bytes, pos: int = 0, end: int | None = None):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end

    def byte(self) -> int:
        if self.pos >= self.end:
            raise ParseError("unexpected end of track data", self.pos)
        b = self.data[self.pos]
        self.pos += 1
        return b

    def take(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise ParseError(f"need {n} bytes, chunk ends", self.pos)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def varlen(self) -> int:
        start = self.pos
        value = 0
        for _ in range(4):
            b = self.byte()
            value = (value << 7) | (b & 0x7F)
            if not b & 0x80:
                return value
        raise ParseError("variable-length quantity longer than 4 bytes", start)


# data bytes following each channel-voice status nibble
_DATA_LEN = {0x8: 2, 0x9: 2, 0xA: 2, 0xB: 2, 0xC: 1, 0xD: 1, 0xE: 2}


def _read_track(data: bytes, start: int, end: int, track_index: int):
    """Yield ``(tick, track_index, kind, payload)`` for the events we keep."""
    r = _Reader(data, start, end)
    tick = 0
    status = None
    events = []
    while r.pos < r.end:
        tick += r.varlen()
        at = r.pos
        b = r.byte()
        if b == 0xFF:
            meta_type = r.byte()
            body = r.take(r.varlen())
            if meta_type == 0x2F:
                events.append((tick, "end", None))
                break
            if meta_type == 0x51:
                if len(body) != 3:
                    raise ParseError("Set Tempo needs 3 data bytes", at)
                events.append((tick, "tempo", int.from_bytes(body, "big")))
            elif meta_type == 0x58:
                if len(body) < 2:
                    raise ParseError("Time Signature needs 4 data bytes", at)
                events.append((tick, "meter", (body[0], 2 ** body[1])))
            status = None  # meta and sysex cancel running status
            continue
        if b in (0xF0, 0xF7):
            r.take(r.varlen())
            status = None
            continue
        if b >= 0xF0:
            raise ParseError(f"unexpected system status byte 0x{b:02X}", at)
        if b & 0x80:
            status = b
            first = r.byte()
        else:
            if status is None:
                raise ParseError("running status with no previous status", at)
            first = b
        if first & 0x80:
            raise ParseError("data byte has high bit set", r.pos - 1)
        kind, channel = status >> 4, status & 0x0F
        second = r.byte() if _DATA_LEN[kind] == 2 else None
        if kind in (0x8, 0x9):
            on = kind == 0x9 and second > 0
            events.append((tick, "on" if on else "off", (channel, first, second)))
        elif kind == 0xC:
            events.append((tick, "program", (channel, first)))
    else:
        events.append((tick, "end", None))
    return [(t, track_index, seq, kind, payload) for seq, (t, kind, payload) in enumerate(events)]


def parse_smf(data: bytes) -> Piece:
    """Parse SMF bytes (format 0 or 1) into a :class:`Piece`.

    Same-pitch notes on one channel pair first-in first-out.  Percussion
    (channel 10) is dropped.  Notes left open at the end of their track are
    closed at the track's last tick and reported in ``Piece.warnings``.
    """
    data = bytes(data)
    if data[:4] != b"MThd":
        raise ParseError("missing MThd header", 0)
    if len(data) < 14:
        raise ParseError("truncated header chunk", len(data))
    (hlen,) = struct.unpack(">I", data[4:8])
    if hlen < 6 or 8 + hlen > len(data):
        raise ParseError(f"bad header length {hlen}", 4)
    fmt, ntracks, division = struct.unpack(">HHh", data[8:14])
    if fmt not in (0, 1):
        raise ParseError(f"unsupported SMF format {fmt}", 8)
    if division <= 0:
        raise ParseError("SMPTE time division is not supported", 12)

    pos = 8 + hlen
    events = []
    track_ends: dict[int, int] = {}
    found = 0
    while pos < len(data):
        if pos + 8 > len(data):
            raise ParseError("truncated chunk header", pos)
        ctype = data[pos:pos + 4]
        (clen,) = struct.unpack(">I", data[pos + 4:pos + 8])
        body = pos + 8
        if body + clen > len(data):
            raise ParseError(f"chunk {ctype!r} runs past end of file", pos)
        if ctype == b"MTrk":
            evs = _read_track(data, body, body + clen, found)
            track_ends[found] = evs[-1][0] if evs else 0
            events.extend(evs)
            found += 1
        pos = body + clen  # unknown chunk types are skipped
    if found < ntracks:
        raise ParseError(f"header declares {ntracks} tracks, found {found}", len(data))
    if fmt == 0 and found != 1:
        raise ParseError("format 0 file must contain exactly one track", 8)

    events.sort(key=lambda e: (e[0], e[1], e[2]))
    tempo_map = TempoMap([(t, p) for t, _, _, k, p in events if k == "tempo"], division)
    meters = {}
    for t, _, _, k, p in events:
        if k == "meter":
            meters[t] = p
    meter_list = tuple((t, n, d) for t, (n, d) in sorted(meters.items()))

    warnings: list[str] = []
    programs = [0] * 16
    open_notes: dict[tuple[int, int, int], list[tuple[int, int, int]]] = {}
    collected: dict[int, list[Note]] = {}

    def close(onset_tick, velocity, program, pitch, off_tick):
        if off_tick <= onset_tick:
            warnings.append(f"dropped zero-length note pitch {pitch} at tick {onset_tick}")
            return
        collected.setdefault(program, []).append(Note(
            onset=tempo_map.ticks_to_seconds(onset_tick),
            pitch=pitch,
            offset=tempo_map.ticks_to_seconds(off_tick),
            velocity=velocity,
        ))

    for tick, track, _, kind, payload in events:
        if kind == "program":
            channel, program = payload
            programs[channel] = program
        elif kind == "on":
            channel, pitch, velocity = payload
            if channel != PERCUSSION_CHANNEL:
                key = (track, channel, pitch)
                open_notes.setdefault(key, []).append((tick, velocity, programs[channel]))
        elif kind == "off":
            channel, pitch, _ = payload
            if channel == PERCUSSION_CHANNEL:
                continue
            queue = open_notes.get((track, channel, pitch))
            if queue:
                on_tick, velocity, program = queue.pop(0)
                close(on_tick, velocity, program, pitch, tick)
        elif kind == "end":
            for (t, channel, pitch), queue in open_notes.items():
                if t != track:
                    continue
                for on_tick, velocity, program in queue:
                    warnings.append(f"unterminated note pitch {pitch} channel {channel + 1} "
                                    f"in track {track}; closed at tick {tick}")
                    close(on_tick, velocity, program, pitch, tick)
                queue.clear()

    tracks = tuple(InstrumentTrack(p, tuple(ns)) for p, ns in collected.items())
    meter = (meter_list[0][1], meter_list[0][2]) if meter_list else (4, 4)
    return Piece(tracks=tracks, tempo_map=tempo_map, meter=meter,
                 meters=meter_list or ((0, 4, 4),), warnings=tuple(warnings))


def read_smf(path) -> Piece:
    with open(path, "rb") as fh:
        return parse_smf(fh.read())


# --------------------------------------------------------------------------
# writing


def _varlen(value: int) -> bytes:
    if value < 0:
        raise ValueError("negative delta time")
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def _chunk(events: Sequence[tuple[int, int, bytes]]) -> bytes:
    """Encode ``(tick, order, message)`` events as an MTrk chunk."""
    body = bytearray()
    last = 0
    for tick, _, message in sorted(events, key=lambda e: (e[0], e[1])):
        body += _varlen(tick - last) + message
        last = tick
    body += _varlen(0) + b"\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


def write_smf(piece: Piece) -> bytes:
    """Serialise a piece as a format-1 SMF.

    Track 0 carries tempo and time signature; each instrument gets its own
    track and channel (channel 10 is skipped).  Note times are rounded to the
    nearest tick of the piece's tempo map.
    """
    instruments = [t for t in piece.tracks if t.notes]
    channels = [c for c in range(16) if c != PERCUSSION_CHANNEL]
    if len(instruments) > len(channels):
        raise CapacityError(f"{len(instruments)} instruments need more than "
                            f"{len(channels)} melodic channels")
    tm = piece.tempo_map

    meta = []
    for tick, num, den in piece.meters:
        log_den = den.bit_length() - 1
        if 2 ** log_den != den:
            raise ValueError(f"meter denominator {den} is not a power of two")
        meta.append((tick, 0, bytes([0xFF, 0x58, 0x04, num, log_den, 24, 8])))
    for tick, tempo in tm.entries:
        meta.append((tick, 1, b"\xff\x51\x03" + tempo.to_bytes(3, "big")))
    chunks = [_chunk(meta)]

    for track, channel in zip(instruments, channels):
        events = [(0, 0, bytes([0xC0 | channel, track.program]))]
        for note in track.notes:
            on = round(tm.seconds_to_ticks(note.onset))
            off = max(round(tm.seconds_to_ticks(note.offset)), on + 1)
            # offs sort before ons at the same tick so repeated pitches re-strike
            events.append((on, 2, bytes([0x90 | channel, note.pitch, note.velocity])))
            events.append((off, 1, bytes([0x80 | channel, note.pitch, 0])))
        chunks.append(_chunk(events))

    header = b"MThd" + struct.pack(">IHHH", 6, 1, len(chunks), tm.division)
    return header + b"".join(chunks)


def write_smf_file(piece: Piece, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_smf(piece))
