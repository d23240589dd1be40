#!/usr/bin/env python3
"""Regenerate the shared annotator golden fixtures.

The file pins exact mock responses for a set of canned requests. The
Python test suite asserts the in-process mocks reproduce it, and the
bridge's test suite asserts the HTTP service reproduces it field for
field, which is what keeps the two implementations interchangeable.
"""

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from ecotkit import mockproto  # noqa: E402

OUT = os.path.join(os.path.dirname(__file__), "..", "fixtures", "annotator_golden.json")

PICK_MOVES = [
    "move forward right",
    "move forward right down",
    "move down, close gripper",
    "close gripper",
    "move up, close gripper",
    "move backward left",
    "move backward left",
    "move left down",
    "move down, open gripper",
    "open gripper",
    "stop",
]


def main():
    cases = {"describe": [], "detect": [], "gripper": [], "plan": []}

    for image_ref, instruction, seed in [
        ("img://traj-00/000", "put the mushroom in the pot", 7),
        ("img://traj-07/000", "stack", 7),
        ("img://demo/012", None, 3),
        ("img://traj-02/004", "put the carrot on the plate", 11),
    ]:
        req = {"image_ref": image_ref, "seed": seed}
        if instruction is not None:
            req["instruction"] = instruction
        cases["describe"].append(
            {"request": req, "response": mockproto.mock_describe(image_ref, instruction, seed)}
        )

    caption = mockproto.mock_describe("img://traj-00/000", "put the mushroom in the pot", 7)["caption"]
    for image_ref, text, seed in [
        ("img://traj-00/000", caption + " put the mushroom in the pot", 7),
        ("img://traj-00/003", "a plain wall with nothing recognizable", 7),
        ("img://traj-05/001", "the duck is next to the towel near a sponge", 5),
        ("img://traj-08/010", "fork plate fork plate", 2),
    ]:
        cases["detect"].append(
            {
                "request": {"image_ref": image_ref, "text": text, "seed": seed},
                "response": mockproto.mock_detect(image_ref, text, seed),
            }
        )

    for image_ref, seed in [
        ("img://traj-00/000?gp=128,96,0.9", 7),
        ("img://traj-00/001?gp=245,117,0.85", 1),
        ("img://traj-00/002", 7),
        ("img://weird/000?gp=broken", 7),
        ("img://traj-03/014?gp=-12,300,0.55", 9),
    ]:
        cases["gripper"].append(
            {
                "request": {"image_ref": image_ref, "seed": seed},
                "response": mockproto.mock_gripper(image_ref, seed),
            }
        )

    for instruction, cap, moves, seed in [
        ("put the mushroom in the pot", caption, PICK_MOVES, 7),
        ("stack", "There is a green block on the mat.", ["stop"], 7),
        ("move the banana to the pan", "A yellow banana lies next to a pan.", PICK_MOVES[:6], 13),
    ]:
        cases["plan"].append(
            {
                "request": {"instruction": instruction, "caption": cap, "moves": moves, "seed": seed},
                "response": mockproto.mock_plan(instruction, cap, moves, seed),
            }
        )

    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w", encoding="utf-8") as fh:
        json.dump(cases, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
    n = sum(len(v) for v in cases.values())
    print(f"wrote {n} golden cases -> {os.path.normpath(OUT)}")


if __name__ == "__main__":
    main()
