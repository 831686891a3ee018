"""Thicken a trefoil into a tube, collect the cubes that meet it, and check
that their union is a collar: two boundary tori, one inside and one outside,
with every normal ray crossing each exactly once."""

from cubeknot.knot import make_knot, rm_frame, tube_surface
from cubeknot.voxelizer import (
    bicollar_ray_test,
    boundary_components,
    choose_scale,
    classify_sides,
    cubes_meeting,
)

r = 0.35
curve = make_knot("trefoil", 0.1)
tube = tube_surface(curve, rm_frame(curve), r, 16)
print(f"tube: {len(tube.vertices)} vertices, {len(tube.triangles)} triangles")

s = choose_scale(tube, r)
cubes = cubes_meeting(tube, s)
print(f"scale m={s.m}: {len(cubes)} cubes meet the tube")

plus, minus = classify_sides(boundary_components(cubes), curve.samples, r)
for name, sheet in (("outer", plus), ("inner", minus)):
    st = sheet.stats()
    print(f"{name} sheet: {st['faces']} squares, Euler characteristic {st['euler_characteristic']}")

rays = bicollar_ray_test(tube, plus, minus)
print(f"normal rays: {len(rays['failures'])} of 200 fail")
