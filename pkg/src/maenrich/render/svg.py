"""SVG building blocks shared by every renderer.

Output is a pure function of the inputs: attributes keep insertion order,
every number is printed with two decimals, and all randomness comes from
:class:`XorShift64Star` seeded by the caller.
"""

from __future__ import annotations

import math
from typing import Iterable
from xml.sax.saxutils import escape, quoteattr

SVG_NS = "http://www.w3.org/2000/svg"

# Okabe-Ito colour-blind-safe palette, cycled for clusters/groups.
PALETTE = (
    "#E69F00",
    "#56B4E9",
    "#009E73",
    "#F0E442",
    "#0072B2",
    "#D55E00",
    "#CC79A7",
    "#000000",
)
GREY = "#BBBBBB"
DARK = "#333333"
GRID = "#DDDDDD"

# Diverging scale for effect estimates: negative -> blue, 0 -> near white, positive -> red.
DIVERGING = ("#2166AC", "#F7F7F7", "#B2182B")

FONT = "Helvetica, Arial, sans-serif"


def fmt(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def _attr(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return fmt(float(value))
    return str(value)


def el(tag: str, attrs: dict | None = None, text: str | None = None, children: Iterable[str] = ()) -> str:
    parts = [f"<{tag}"]
    for k, v in (attrs or {}).items():
        if v is None:
            continue
        parts.append(f" {k}={quoteattr(_attr(v))}")
    kids = list(children)
    if text is None and not kids:
        return "".join(parts) + "/>"
    body = (escape(text) if text is not None else "") + "".join(kids)
    return "".join(parts) + ">" + body + f"</{tag}>"


def path_d(commands: Iterable[tuple]) -> str:
    """``[("M", x, y), ("L", x, y), ("Z",)]`` -> path data with fixed precision."""
    out = []
    for cmd in commands:
        out.append(cmd[0] + " ".join(fmt(v) if isinstance(v, float) else str(v) for v in cmd[1:]))
    return " ".join(out)


def points_attr(points: Iterable[tuple[float, float]]) -> str:
    return " ".join(f"{fmt(x)},{fmt(y)}" for x, y in points)


class SvgDocument:
    """Accumulates elements and serializes to a standalone ``<svg>``."""

    def __init__(self, width: float, height: float, title: str, desc: str = ""):
        self.width = width
        self.height = height
        self.title = title
        self.desc = desc
        self.elements: list[str] = []

    def add(self, element: str) -> None:
        self.elements.append(element)

    def extend(self, elements: Iterable[str]) -> None:
        self.elements.extend(elements)

    def to_string(self) -> str:
        head = el(
            "svg",
            {
                "xmlns": SVG_NS,
                "width": self.width,
                "height": self.height,
                "viewBox": f"0 0 {fmt(self.width)} {fmt(self.height)}",
                "role": "img",
                "aria-labelledby": "title desc",
                "font-family": FONT,
            },
            children=["\n", el("title", {"id": "title"}, self.title), "\n",
                      el("desc", {"id": "desc"}, self.desc or self.title), "\n",
                      el("rect", {"class": "background", "x": 0, "y": 0, "width": self.width,
                                  "height": self.height, "fill": "#FFFFFF"}), "\n"]
            + [e + "\n" for e in self.elements],
        )
        return head + "\n"

    __str__ = to_string


def palette(i: int) -> str:
    return PALETTE[i % len(PALETTE)]


def _hex_to_rgb(h: str) -> tuple[int, int, int]:
    return int(h[1:3], 16), int(h[3:5], 16), int(h[5:7], 16)


def _mix(a: str, b: str, t: float) -> str:
    ra, ga, ba = _hex_to_rgb(a)
    rb, gb, bb = _hex_to_rgb(b)
    r = round(ra + (rb - ra) * t)
    g = round(ga + (gb - ga) * t)
    bl = round(ba + (bb - ba) * t)
    return f"#{r:02X}{g:02X}{bl:02X}"


def diverging(value: float, limit: float) -> str:
    """Colour for ``value`` on a symmetric [-limit, limit] diverging scale."""
    if limit <= 0:
        return DIVERGING[1]
    t = max(-1.0, min(1.0, value / limit))
    if t < 0:
        return _mix(DIVERGING[1], DIVERGING[0], -t)
    return _mix(DIVERGING[1], DIVERGING[2], t)


def text(x: float, y: float, content: str, **attrs) -> str:
    base = {"x": x, "y": y, "font-size": attrs.pop("font_size", 11), "fill": attrs.pop("fill", DARK)}
    base.update({k.replace("_", "-"): v for k, v in attrs.items()})
    return el("text", base, content)


def nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    """Round tick values covering [lo, hi]."""
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


class XorShift64Star:
    """xorshift64* generator (Vigna 2016): 64-bit state, multiplier 0x2545F4914F6CDD1D.

    The seed is passed through one splitmix64 step so small seeds give
    well-mixed states; a zero state is replaced by a fixed constant.
    """

    MASK = (1 << 64) - 1

    def __init__(self, seed: int = 42):
        z = (seed + 0x9E3779B97F4A7C15) & self.MASK
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        z ^= z >> 31
        self.state = z or 0x853C49E6748FEA9B

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & self.MASK
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & self.MASK

    def random(self) -> float:
        """Uniform float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) / float(1 << 53)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()
