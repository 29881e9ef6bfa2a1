"""Typed cell values, units, and the inference/normalization cascade.

A raw cell string is classified by an ordered cascade
Boolean -> Number (with optional unit/scale suffix) -> Date -> Time -> List -> Text,
with ``Other`` reserved for payloads that contain no letters or digits.
"""

from __future__ import annotations

import datetime as dt
import math
import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Optional, Union

from .similarity import norm_text

# Variant tags, one per data-type column of the cell-level breakdown.
NUMBER = "number"
TEXT = "text"
BOOLEAN = "boolean"
DATE = "date"
TIME = "time"
LIST = "list"
OTHER = "other"
TYPE_TAGS = (NUMBER, TEXT, BOOLEAN, DATE, TIME, LIST, OTHER)

MONTH_DAYS = 30.44
YEAR_DAYS = 365.25


@dataclass(frozen=True)
class Unit:
    dimension: str
    symbol: str
    to_base: float
    base: str

    def __post_init__(self) -> None:
        if not self.to_base > 0:
            raise ValueError(f"unit {self.symbol!r}: to_base must be positive")

    def compatible(self, other: Optional["Unit"]) -> bool:
        return self.base == unit_base(other)

    def scaled(self, factor: float, prefix: str) -> "Unit":
        return Unit(self.dimension, f"{prefix}{self.symbol}", self.to_base * factor, self.base)

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "symbol": self.symbol,
                "to_base": self.to_base, "base": self.base}

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> Optional["Unit"]:
        if d is None:
            return None
        return cls(d["dimension"], d["symbol"], float(d["to_base"]), d["base"])


def unit_base(u: Optional[Unit]) -> str:
    return "" if u is None else u.base


def _units(dimension: str, base: str, table: dict[str, float]) -> dict[str, Unit]:
    return {sym: Unit(dimension, sym, f, base) for sym, f in table.items()}


_DAY = 86400.0
UNITS: dict[str, Unit] = {}
UNITS.update(_units("length", "m", {
    "mm": 0.001, "millimeter": 0.001, "millimeters": 0.001,
    "cm": 0.01, "centimeter": 0.01, "centimeters": 0.01, "centimetre": 0.01, "centimetres": 0.01,
    "m": 1.0, "meter": 1.0, "meters": 1.0, "metre": 1.0, "metres": 1.0,
    "km": 1000.0, "kilometer": 1000.0, "kilometers": 1000.0, "kilometre": 1000.0, "kilometres": 1000.0,
    "in": 0.0254, "inch": 0.0254, "inches": 0.0254,
    "ft": 0.3048, "foot": 0.3048, "feet": 0.3048,
    "mi": 1609.344, "mile": 1609.344, "miles": 1609.344,
}))
UNITS.update(_units("time", "s", {
    "ms": 0.001, "s": 1.0, "sec": 1.0, "secs": 1.0, "second": 1.0, "seconds": 1.0,
    "min": 60.0, "mins": 60.0, "minute": 60.0, "minutes": 60.0,
    "h": 3600.0, "hr": 3600.0, "hrs": 3600.0, "hour": 3600.0, "hours": 3600.0,
    "d": _DAY, "day": _DAY, "days": _DAY,
    "wk": 7 * _DAY, "week": 7 * _DAY, "weeks": 7 * _DAY,
    "mo": MONTH_DAYS * _DAY, "month": MONTH_DAYS * _DAY, "months": MONTH_DAYS * _DAY,
    "yr": YEAR_DAYS * _DAY, "yrs": YEAR_DAYS * _DAY, "year": YEAR_DAYS * _DAY, "years": YEAR_DAYS * _DAY,
}))
UNITS.update(_units("mass", "kg", {
    "mg": 1e-6, "g": 0.001, "gram": 0.001, "grams": 0.001,
    "kg": 1.0, "kilogram": 1.0, "kilograms": 1.0,
    "t": 1000.0, "tonne": 1000.0, "tonnes": 1000.0,
    "lb": 0.45359237, "lbs": 0.45359237, "pound": 0.45359237, "pounds": 0.45359237,
    "oz": 0.028349523125,
}))
UNITS.update(_units("speed", "m/s", {
    "m/s": 1.0, "km/h": 1 / 3.6, "kph": 1 / 3.6, "kmh": 1 / 3.6, "mph": 0.44704,
}))
UNITS.update(_units("percentage", "%", {"%": 1.0, "percent": 1.0, "pct": 1.0}))

SCALES: dict[str, float] = {
    "k": 1e3, "K": 1e3, "thousand": 1e3, "thousands": 1e3,
    "M": 1e6, "mn": 1e6, "million": 1e6, "millions": 1e6,
    "B": 1e9, "bn": 1e9, "billion": 1e9, "billions": 1e9,
    "T": 1e12, "tn": 1e12, "trillion": 1e12, "trillions": 1e12,
}

CURRENCY_SYMBOLS = {"$": "USD", "€": "EUR", "£": "GBP", "¥": "JPY"}
CURRENCY_CODES = {"USD", "EUR", "GBP", "JPY", "CAD", "AUD", "CHF", "CNY", "INR"}


def currency_unit(code: str) -> Unit:
    return Unit("currency-scale", code, 1.0, code)


def scale_unit(symbol: str) -> Unit:
    return Unit("count", symbol, SCALES[symbol], "")


# -- variants ---------------------------------------------------------------


@dataclass(frozen=True)
class Number:
    magnitude: float
    unit: Optional[Unit] = None
    tag = NUMBER

    def __post_init__(self) -> None:
        if not math.isfinite(self.magnitude):
            raise ValueError("Number magnitude must be finite")

    @property
    def base_magnitude(self) -> float:
        return self.magnitude * (self.unit.to_base if self.unit else 1.0)


@dataclass(frozen=True)
class Text:
    text: str
    tag = TEXT


@dataclass(frozen=True)
class Boolean:
    value: bool
    tag = BOOLEAN


@dataclass(frozen=True)
class Date:
    value: dt.date
    tag = DATE


@dataclass(frozen=True)
class Time:
    seconds: float
    clock: bool = True
    tag = TIME


@dataclass(frozen=True)
class ListValue:
    items: tuple
    tag = LIST


@dataclass(frozen=True)
class Other:
    raw: str
    tag = OTHER


CellValue = Union[Number, Text, Boolean, Date, Time, ListValue, Other]


def value_to_json(v: CellValue):
    if isinstance(v, Number):
        return {"type": NUMBER, "magnitude": v.magnitude,
                "unit": v.unit.to_dict() if v.unit else None}
    if isinstance(v, Text):
        return {"type": TEXT, "text": v.text}
    if isinstance(v, Boolean):
        return {"type": BOOLEAN, "value": v.value}
    if isinstance(v, Date):
        return {"type": DATE, "value": v.value.isoformat()}
    if isinstance(v, Time):
        return {"type": TIME, "seconds": v.seconds, "clock": v.clock}
    if isinstance(v, ListValue):
        return {"type": LIST, "items": [value_to_json(x) for x in v.items]}
    return {"type": OTHER, "raw": v.raw}


def value_from_json(d: dict) -> CellValue:
    kind = d["type"]
    if kind == NUMBER:
        return Number(float(d["magnitude"]), Unit.from_dict(d.get("unit")))
    if kind == TEXT:
        return Text(d["text"])
    if kind == BOOLEAN:
        return Boolean(bool(d["value"]))
    if kind == DATE:
        return Date(dt.date.fromisoformat(d["value"]))
    if kind == TIME:
        return Time(float(d["seconds"]), bool(d.get("clock", True)))
    if kind == LIST:
        return ListValue(tuple(value_from_json(x) for x in d["items"]))
    return Other(d["raw"])


# -- unit text ----------------------------------------------------------------


def parse_unit_text(text: str) -> Optional[Unit]:
    """Parse a unit phrase such as ``cm``, ``$M``, ``USD millions`` or ``in thousands``."""
    s = text.strip()
    if s.lower().startswith("in "):
        s = s[3:].strip()
    if not s:
        return None
    if s in UNITS:
        return UNITS[s]
    if s.lower() in UNITS and s.lower() not in ("m", "t"):
        return UNITS[s.lower()]
    if s in SCALES:
        return scale_unit(s)

    currency: Optional[str] = None
    scale: Optional[str] = None
    rest = s
    for sym, code in CURRENCY_SYMBOLS.items():
        if rest.startswith(sym):
            currency, rest = code, rest[len(sym):].strip()
            break
    tokens = rest.replace("/", " ").split() if rest else []
    leftovers = []
    for tok in tokens:
        bare = tok.rstrip(".")
        if bare.upper() in CURRENCY_CODES and currency is None:
            currency = bare.upper()
        elif bare in SCALES and scale is None:
            scale = bare
        elif bare.lower() in SCALES and scale is None:
            scale = bare.lower()
        else:
            leftovers.append(tok)
    if leftovers:
        return None
    if currency is None and scale is None:
        return None
    if currency is None:
        return scale_unit(scale)
    unit = currency_unit(currency)
    if scale is not None:
        unit = unit.scaled(SCALES[scale], f"{scale} ")
    return unit


_HEADER_UNIT = re.compile(r"[\(\[]\s*([^()\[\]]+?)\s*[\)\]]\s*$")


def header_unit(header: str) -> Optional[Unit]:
    """Unit declared in a trailing parenthetical of a header, e.g. ``Runtime (min)``."""
    m = _HEADER_UNIT.search(header)
    if not m:
        return None
    return parse_unit_text(m.group(1))


def strip_header_unit(header: str) -> str:
    return _HEADER_UNIT.sub("", header).strip()


# -- inference ---------------------------------------------------------------

_TRUE = {"true", "yes"}
_FALSE = {"false", "no"}
_TRUE_LOOSE = _TRUE | {"y", "t", "1"}
_FALSE_LOOSE = _FALSE | {"n", "f", "0"}

_CUR_PREFIX = r"(?:[$€£¥]|(?:USD|EUR|GBP|JPY|CAD|AUD|CHF|CNY|INR)\s?)"
_NUMBER = re.compile(
    r"^(?P<open>\()?\s*"
    rf"(?P<pre>{_CUR_PREFIX})?\s*"
    r"(?P<sign>[-+−])?\s*"
    rf"(?P<pre2>{_CUR_PREFIX})?"
    r"(?P<num>\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?|\.\d+)"
    r"\s*(?P<suffix>[^\d()\s][^\d()]*?)?\s*(?P<close>\))?$"
)
_COMPOUND_DURATION = re.compile(
    r"^(?P<h>\d+(?:\.\d+)?)\s*(?:h|hr|hrs|hours?)\s*(?P<m>\d+(?:\.\d+)?)\s*(?:m|min|mins|minutes?)$",
    re.IGNORECASE,
)
_CLOCK = re.compile(r"^(\d{1,2}):(\d{2})(?::(\d{2}))?\s*([AaPp])?\.?\s*(?:[Mm]\.?)?$")
_DATE_FORMATS = (
    "%Y-%m-%d", "%m/%d/%Y", "%d/%m/%Y", "%Y/%m/%d", "%m-%d-%Y", "%d.%m.%Y",
    "%B %d, %Y", "%b %d, %Y", "%b. %d, %Y", "%B %d %Y", "%b %d %Y",
    "%d %B %Y", "%d %b %Y", "%d %B, %Y",
)
_LIST_SEPS = re.compile(r"\s*(?:;|\||\n|•)\s*")


def _parse_number(raw: str) -> Optional[Number]:
    m = _COMPOUND_DURATION.match(raw)
    if m:
        seconds = float(m.group("h")) * 3600 + float(m.group("m")) * 60
        return Number(seconds, UNITS["s"])
    m = _NUMBER.match(raw)
    if not m:
        return None
    if bool(m.group("open")) != bool(m.group("close")):
        return None
    if m.group("pre") and m.group("pre2"):
        return None
    magnitude = float(m.group("num").replace(",", ""))
    if m.group("sign") in ("-", "−") or m.group("open"):
        magnitude = -magnitude
    unit: Optional[Unit] = None
    pre = (m.group("pre") or m.group("pre2") or "").strip()
    suffix = (m.group("suffix") or "").strip()
    if pre:
        unit = currency_unit(CURRENCY_SYMBOLS.get(pre, pre))
        if suffix:
            if suffix in SCALES or suffix.lower() in ("million", "billion", "thousand", "trillion"):
                key = suffix if suffix in SCALES else suffix.lower()
                unit = unit.scaled(SCALES[key], f"{key} ")
            else:
                return None
    elif suffix:
        unit = parse_unit_text(suffix)
        if unit is None:
            # glued scale followed by a unit, e.g. "2.5M USD" handled above; "3kg" handled by UNITS
            return None
    if not math.isfinite(magnitude):
        return None
    return Number(magnitude, unit)


def _parse_date(raw: str) -> Optional[Date]:
    s = " ".join(raw.split())
    for fmt in _DATE_FORMATS:
        try:
            return Date(dt.datetime.strptime(s, fmt).date())
        except ValueError:
            continue
    return None


def _parse_clock(raw: str) -> Optional[Time]:
    m = _CLOCK.match(raw.strip())
    if not m:
        return None
    h, mi, sec, ampm = int(m.group(1)), int(m.group(2)), int(m.group(3) or 0), m.group(4)
    if ampm:
        if not 1 <= h <= 12:
            return None
        h = h % 12 + (12 if ampm.lower() == "p" else 0)
    if h > 23 or mi > 59 or sec > 59:
        return None
    return Time(float(h * 3600 + mi * 60 + sec), clock=True)


def _parse_bool(raw: str, loose: bool = False) -> Optional[Boolean]:
    key = raw.strip().casefold()
    if key in (_TRUE_LOOSE if loose else _TRUE):
        return Boolean(True)
    if key in (_FALSE_LOOSE if loose else _FALSE):
        return Boolean(False)
    return None


def _split_list(raw: str) -> Optional[list[str]]:
    parts = [p for p in _LIST_SEPS.split(raw.strip()) if p]
    if len(parts) >= 2:
        return parts
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if len(parts) >= 3:
        return parts
    return None


def _scalar(raw: str) -> CellValue:
    s = raw.strip()
    if not s:
        return Text("")
    for parse in (_parse_bool, _parse_number, _parse_date, _parse_clock):
        v = parse(s)
        if v is not None:
            return v
    if not any(ch.isalnum() for ch in s):
        return Other(s)
    return Text(s)


def infer_cell_type(raw: str, column_hint: Optional[str] = None) -> CellValue:
    """Classify a raw cell string.

    ``column_hint`` (a variant tag, usually the column's majority type) only
    settles genuinely ambiguous strings: ``1``/``0``/``y``/``n`` become Boolean
    under a boolean hint, and a scalar becomes a one-element List under a list
    hint.
    """
    s = raw.strip()
    if column_hint == BOOLEAN:
        b = _parse_bool(s, loose=True)
        if b is not None:
            return b
    if not s:
        return Text("")
    b = _parse_bool(s)
    if b is not None:
        return b
    n = _parse_number(s)
    if n is not None:
        return n
    d = _parse_date(s)
    if d is not None:
        return d
    t = _parse_clock(s)
    if t is not None:
        return t
    parts = _split_list(s)
    if parts is not None:
        return ListValue(tuple(_scalar(p) for p in parts))
    if column_hint == LIST:
        return ListValue((_scalar(s),))
    if not any(ch.isalnum() for ch in s):
        return Other(s)
    return Text(s)


def apply_default_unit(v: CellValue, unit: Optional[Unit]) -> CellValue:
    """Give a unitless Number the column's header unit."""
    if unit is not None and isinstance(v, Number) and v.unit is None:
        return Number(v.magnitude, unit)
    return v


def normalize_value(v: CellValue) -> CellValue:
    """Fold scales and units into base units, case-fold text. Idempotent."""
    if isinstance(v, Number):
        if v.unit is None:
            return v
        base = None if v.unit.base == "" else Unit(v.unit.dimension, v.unit.base, 1.0, v.unit.base)
        return Number(v.base_magnitude, base)
    if isinstance(v, Text):
        return Text(norm_text(v.text))
    if isinstance(v, ListValue):
        return ListValue(tuple(normalize_value(x) for x in v.items))
    if isinstance(v, Other):
        return Other(norm_text(v.raw))
    return v


# -- rendering helpers ---------------------------------------------------------


def format_number(x: float, places: int = 10) -> str:
    """Plain decimal rendering without exponent, trailing zeros dropped."""
    d = Decimal(repr(round(x, places))).normalize()
    text = format(d, "f")
    if text in ("-0", "-0.0"):
        text = "0"
    return text
