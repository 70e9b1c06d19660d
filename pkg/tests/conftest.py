import math

import numpy as np
import pytest

from pseudotherm import ModelParams
from pseudotherm.algebra import spin_operators
from pseudotherm.blocks import enumerate_nv_labels, enumerate_qubit_labels


@pytest.fixture(scope="session")
def desk_params():
    """The working system: 8 ensemble spins, 2 pairs per register level."""
    return ModelParams()


def subsystem_partition_product(p, beta: float) -> float:
    """Z_ensemble * Z_register from independently diagonalized subsystems.

    Independent factorization oracle for the decoupled (g = 0) model.
    """
    z_nv = 0.0
    for lbl in enumerate_nv_labels(p.Omega):
        ops = spin_operators(lbl.S)
        h = p.D * ops["Sz"] @ ops["Sz"] + 0.5 * p.E * (
            ops["Splus"] @ ops["Splus"] + ops["Sminus"] @ ops["Sminus"]
        )
        z_nv += lbl.mult * math.fsum(np.exp(-beta * np.linalg.eigvalsh(h)))
    z_qb = 0.0
    for lbl in enumerate_qubit_labels(p.Omega1, p.Omega2):
        o1, o2 = spin_operators(lbl.s1), spin_operators(lbl.s2)
        i1 = np.eye(o1["Sz"].shape[0])
        i2 = np.eye(o2["Sz"].shape[0])
        z1 = np.kron(o1["Sz"], i2)
        z2 = np.kron(i1, o2["Sz"])
        pp = np.kron(o1["Splus"], i2) + np.kron(i1, o2["Splus"])
        h = p.eps1 * z1 + p.eps2 * z2 - p.G * pp @ pp.T
        z_qb += lbl.mult * math.fsum(np.exp(-beta * np.linalg.eigvalsh(h)))
    return z_nv * z_qb
