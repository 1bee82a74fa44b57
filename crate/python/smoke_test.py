"""Smoke test for the kdnav Python extension.

Build and install first:  pip install --no-build-isolation ./crates/py
"""
import json
import math

import kdnav


def main():
    print("kdnav", kdnav.__version__)

    # lone agent heads straight for its goal at the preferred speed
    vx, vy = kdnav.orca_velocity((0.0, 0.0), (0.0, 0.0), (10.0, 0.0), [])
    assert abs(vx - 1.3) < 1e-12 and abs(vy) < 1e-12, (vx, vy)

    # perfect expert match at the goal velocity earns both weights
    r = kdnav.step_reward((0, 0), (0.156, 0), (1.3, 0), (10, 0), (0.4, 0.9), [(0.4, 0.9)])
    assert abs(r - 0.10) < 1e-12, r
    r = kdnav.step_reward((0, 0), (0.156, 0), (1.3, 0), (10, 0), (1.0, 0.0), [(0.0, 0.0)])
    assert abs(r - (0.02 * math.exp(-0.85) + 0.08)) < 1e-12, r

    adv, ret = kdnav.gae([1.0, 1.0], [0.0, 0.0, 0.0], [False, True], 0.9, 0.95)
    assert abs(adv[0] - 1.855) < 1e-12 and adv[1] == 1.0, adv

    pairs = kdnav.generate_scenario("circle", 6, 7)
    assert len(pairs) == 6

    trial = json.loads(kdnav.simulate("orca", "corridor", 20, 1000))
    print("orca 20-corridor seed 1000:", trial)
    assert 0.0 <= trial["success"] <= 1.0

    report = json.loads(kdnav.benchmark(["orca"], ["square"], [6], 2))
    assert report["schema_version"] == 1 and len(report["cells"]) == 1
    print("smoke test passed")


if __name__ == "__main__":
    main()
