"""SVG Gantt chart of microscopic occupations: one row per siding and per switch group."""

from __future__ import annotations

import re
from xml.sax.saxutils import escape

from .infrastructure import effective_sg_offset
from .network import ARRIVAL, DEPARTURE, SpaceTimeNetwork
from .timetable import Solution

ROW_H = 18
LABEL_W = 70
PX_PER_MICRO = 4
PALETTE = ("#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
           "#9c755f", "#bab0ac")


def _runs(times) -> list[tuple[int, int]]:
    """Maximal runs of consecutive integers as ``[start, end)`` pairs."""
    out: list[list[int]] = []
    for t in sorted(set(times)):
        if out and out[-1][1] == t:
            out[-1][1] = t + 1
        else:
            out.append([t, t + 1])
    return [(a, b) for a, b in out]


def occupation_runs(solution: Solution | dict, network: SpaceTimeNetwork) -> list[dict]:
    """Occupied micro periods as runs per (train, resource row, style).

    ``actual``: the route holds the switch group, or the train is on the siding.
    ``implicit``: switch-group headway tails and the siding lock of a departure.
    Taken together the runs cover exactly the train's occupied resources.
    """
    choices = network.choices(solution.paths) if isinstance(solution, Solution) else solution
    res, station = network.resources, network.station
    g, m = network.grid.macro_granularity, network.grid.micro_granularity
    out = []
    for t in network.trains:
        ch = choices[t.id]
        if ch is None:
            continue
        block = network.blocks[t.id]
        ptr, idx = block.link.indptr, block.link.indices
        for row in block.choice_rows(ch).tolist():
            kind, p, _ = block.decode(row)
            arc = block.arc(row)
            route = block.in_routes[p] if kind == ARRIVAL else block.out_routes[p]
            per_space: dict[tuple[str, str], list[int]] = {}
            for r in idx[ptr[row]:ptr[row + 1]].tolist():
                mr = res.resource(r)
                per_space.setdefault((mr.kind, mr.space), []).append(mr.time)
            for (rk, space), times in per_space.items():
                if rk == "sg":
                    release = arc.start * g + effective_sg_offset(route, space, station.interlocking_mode)
                    cut = -(-release // m)
                else:
                    cut = None if kind != DEPARTURE else -1
                for a, b in _runs(times):
                    if cut is None:
                        pieces = [(a, b, "actual")]
                    elif cut < 0:
                        pieces = [(a, b, "implicit")]
                    else:
                        c = min(max(cut, a), b)
                        pieces = [(a, c, "actual"), (c, b, "implicit")]
                    out += [dict(train=t.id, kind=rk, space=space, start=x, end=y, style=s)
                            for x, y, s in pieces if y > x]
    out.sort(key=lambda r: (r["kind"], r["space"], r["start"], r["train"], r["style"]))
    return out


def emit_gantt(solution: Solution | dict, network: SpaceTimeNetwork) -> str:
    """Deterministic SVG text: the same input always gives the same bytes."""
    res = network.resources
    rows = [("siding", s) for s in res.sidings] + [("sg", s) for s in res.sgs]
    row_of = {r: k for k, r in enumerate(rows)}
    m = network.grid.micro_granularity
    width = LABEL_W + res.n_micro * PX_PER_MICRO + 10
    y_axis = (len(rows) + 1) * ROW_H
    colours = {t.id: PALETTE[k % len(PALETTE)] for k, t in enumerate(network.trains)}
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{y_axis + ROW_H}" '
           'font-family="monospace" font-size="10">',
           "<style>.implicit{fill-opacity:0.35}</style>",
           f'<line x1="{LABEL_W}" y1="{y_axis}" x2="{width - 10}" y2="{y_axis}" stroke="black"/>']
    tick = max(300 // m, 1)  # every five minutes
    for t in range(0, res.n_micro + 1, tick):
        x = LABEL_W + t * PX_PER_MICRO
        out.append(f'<line x1="{x}" y1="{ROW_H}" x2="{x}" y2="{y_axis}" stroke="#ddd"/>')
        out.append(f'<text x="{x}" y="{y_axis + 12}" text-anchor="middle">{t * m}</text>')
    for k, (_, space) in enumerate(rows):
        out.append(f'<text x="2" y="{(k + 1) * ROW_H + 13}">{escape(space)}</text>')
    for r in occupation_runs(solution, network):
        k = row_of[(r["kind"], r["space"])]
        cls = ' class="implicit"' if r["style"] == "implicit" else ""
        out.append(f'<rect x="{LABEL_W + r["start"] * PX_PER_MICRO}" y="{(k + 1) * ROW_H + 2}" '
                   f'width="{(r["end"] - r["start"]) * PX_PER_MICRO}" height="{ROW_H - 4}" '
                   f'fill="{colours[r["train"]]}"{cls} data-train="{escape(r["train"])}" '
                   f'data-row="{escape(r["space"])}" data-start="{r["start"] * m}" data-end="{r["end"] * m}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


_RECT = re.compile(r'<rect [^>]*?(class="implicit" )?data-train="([^"]*)" data-row="([^"]*)" '
                   r'data-start="(\d+)" data-end="(\d+)"')


def gantt_rects(svg: str) -> list[dict]:
    """Rectangles of an :func:`emit_gantt` document, times in seconds."""
    return [dict(train=t, row=r, start=int(a), end=int(b), style="implicit" if c else "actual")
            for c, t, r, a, b in _RECT.findall(svg)]
