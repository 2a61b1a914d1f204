"""Minimal SVG rendering of a world and an optional trajectory."""

from __future__ import annotations

from typing import Sequence

from .world import OccupancyWorld

SCALE = 40.0  # pixels per metre


def world_svg(world: OccupancyWorld, trace: Sequence | None = None, robot_radius: float = 0.3) -> str:
    res = world.resolution
    w_px, h_px = world.width_m * SCALE, world.height_m * SCALE
    px = lambda x: f"{x * SCALE:.2f}"
    py = lambda y: f"{h_px - y * SCALE:.2f}"  # svg y grows downward
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w_px:.0f}" height="{h_px:.0f}" '
        f'viewBox="0 0 {w_px:.2f} {h_px:.2f}">',
        f'<rect width="{w_px:.2f}" height="{h_px:.2f}" fill="white"/>',
    ]
    # one rect per horizontal run of occupied cells
    for r in range(world.height_cells):
        row = world.cells[r]
        c = 0
        while c < world.width_cells:
            if not row[c]:
                c += 1
                continue
            c0 = c
            while c < world.width_cells and row[c]:
                c += 1
            parts.append(
                f'<rect x="{px(c0 * res)}" y="{py((r + 1) * res)}" width="{(c - c0) * res * SCALE:.2f}" '
                f'height="{res * SCALE:.2f}" fill="#333"/>'
            )
    sx, sy, _ = world.start
    gx, gy = world.goal
    rad = f"{robot_radius * SCALE:.2f}"
    parts.append(f'<circle cx="{px(sx)}" cy="{py(sy)}" r="{rad}" fill="none" stroke="#1f77b4" stroke-width="2"/>')
    parts.append(f'<circle cx="{px(gx)}" cy="{py(gy)}" r="{rad}" fill="none" stroke="#2ca02c" stroke-width="2"/>')
    if trace:
        pts = " ".join(f"{px(s.x)},{py(s.y)}" for s in trace)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#d62728" stroke-width="2"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
