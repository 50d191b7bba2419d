"""Scenario files for the worked CLI examples."""

import json

import numpy as np

from qsteer.reports import matrix_to_json


def write(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def eq20_schmidt(angle=0.4):
    l1, l2 = np.cos(angle) / np.sqrt(2), np.sin(angle) / np.sqrt(2)
    return [l1, l1, l2, l2]


def make_all(tmp):
    x2 = np.array([[0, 1], [1, 0]])
    return {
        "triple": write(tmp / "triple.json", {"d": 4, "alice": ["triple_d4"]}),
        "weaker": write(
            tmp / "weaker.json",
            {"d": 4, "alice": ["weaker_d4_pair"], "bob": "ideal", "state": {"schmidt": eq20_schmidt()}},
        ),
        "nonunitary": write(tmp / "nonunitary.json", {"d": 2, "alice": ["pauli_x", [[1, 1], [0, 1]]]}),
        "mub3": write(
            tmp / "mub3.json",
            {"d": 3, "alice": [{"mub": 0}, {"mub": 1}, {"mub": 2}, "pauli_z"], "bob": "ideal",
             "state": "maximally_entangled"},
        ),
        "identity_bob": write(
            tmp / "identity_bob.json",
            {"d": 2, "alice": ["pauli_x", "pauli_z"], "bob": [matrix_to_json(x2), "identity"],
             "state": "maximally_entangled"},
        ),
        "xz2": write(tmp / "xz2.json", {"d": 2, "alice": ["pauli_x", "pauli_z"]}),
        "z3": write(tmp / "z3.json", {"d": 3, "alice": ["pauli_z"]}),
    }
